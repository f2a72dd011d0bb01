"""Dynamic-network containers and the DNET v1 edge-list format.

DNET v1 is a UTF-8 text format::

    dnet v1 n=<int> T=<int>
    <t> <i> <j>
    ...

Each body line is an undirected edge between nodes ``i`` and ``j`` in layer
``t``; all three are 1-based. ``#`` comment lines and blank lines are ignored.
Internally layers and nodes are 0-based array positions; time indices exposed
by the detector (change points, scan positions) stay 1-based.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .spectral import as_basis, subspace_distance_sq

__all__ = [
    "GraphSequence",
    "SegmentModel",
    "parse_graph_sequence",
    "read_dnet",
    "format_dnet",
    "sequence_sparsity_estimate",
]

_HEADER = re.compile(r"^dnet\s+v1\s+n=(\d+)\s+T=(\d+)\s*$")


class GraphSequence:
    """Ordered, immutable stack of hollow symmetric binary adjacency matrices."""

    __slots__ = ("_layers",)

    def __init__(self, layers):
        layers = np.asarray(layers)
        if layers.ndim == 2:
            layers = layers[None]
        if layers.ndim != 3 or layers.shape[1] != layers.shape[2]:
            raise ValidationError(f"layers must have shape (T, n, n), got {layers.shape}")
        T, n, _ = layers.shape
        if T < 1 or n < 1:
            raise ValidationError("need at least one layer and one node")
        if not np.isin(layers, (0, 1)).all():
            raise ValidationError("adjacency entries must be 0 or 1")
        layers = layers.astype(np.uint8)
        if (layers != layers.transpose(0, 2, 1)).any():
            raise ValidationError("adjacency matrices must be symmetric")
        if layers[:, np.arange(n), np.arange(n)].any():
            raise ValidationError("adjacency diagonals must be zero (no self-loops)")
        layers.flags.writeable = False
        self._layers = layers

    @property
    def layers(self) -> np.ndarray:
        return self._layers

    @property
    def n(self) -> int:
        return self._layers.shape[1]

    @property
    def T(self) -> int:
        return self._layers.shape[0]

    def layer(self, t: int) -> np.ndarray:
        """Adjacency matrix of layer ``t`` (1-based)."""
        if not 1 <= t <= self.T:
            raise IndexError(f"layer {t} outside [1, {self.T}]")
        return self._layers[t - 1]

    def edges(self):
        """Canonical edge triples ``(t, i, j)``, 1-based with ``i < j``, sorted."""
        t, i, j = np.nonzero(np.triu(self._layers, k=1))
        return [(int(a) + 1, int(b) + 1, int(c) + 1) for a, b, c in zip(t, i, j)]

    def __eq__(self, other):
        if not isinstance(other, GraphSequence):
            return NotImplemented
        return np.array_equal(self._layers, other._layers)

    def __hash__(self):
        return hash((self._layers.shape, self._layers.tobytes()))

    def __repr__(self):
        return f"GraphSequence(n={self.n}, T={self.T}, edges={int(self._layers.sum()) // 2})"


@dataclass(frozen=True)
class SegmentModel:
    """Piecewise-subspace model ``P_t = rho V^(k) M_t V^(k)^T``.

    ``change_points`` are 1-based, strictly increasing and interior to
    ``(1, T)``; segment ``k`` covers ``[tau_{k-1}, tau_k)``. ``core_matrices``
    holds one symmetric ``R_k x R_k`` matrix per time step.
    """

    change_points: tuple
    bases: tuple
    core_matrices: tuple
    sparsity: float = 1.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.check:
            return
        T = len(self.core_matrices)
        cps = list(self.change_points)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValidationError("change points must be strictly increasing")
        if cps and (cps[0] <= 1 or cps[-1] >= T):
            raise ValidationError("change points must lie strictly inside (1, T)")
        if len(self.bases) != len(cps) + 1:
            raise ValidationError("need one basis per segment")
        if not 0 < self.sparsity <= 1:
            raise ValidationError("sparsity must lie in (0, 1]")
        for a, b in zip(self.bases, self.bases[1:]):
            if subspace_distance_sq(a, b) <= 1e-12:
                raise ValidationError("consecutive segment subspaces must differ")
        for t in range(1, T + 1):
            p = self.probability(t)
            if p.min() < -1e-12 or p.max() > 1 + 1e-12:
                raise ValidationError(f"P_{t} has entries outside [0, 1]")

    @property
    def T(self) -> int:
        return len(self.core_matrices)

    @property
    def n(self) -> int:
        return np.asarray(self.bases[0]).shape[0]

    def segment_of(self, t: int) -> int:
        """0-based segment index of 1-based time ``t``."""
        return int(np.searchsorted(np.asarray(self.change_points), t, side="right"))

    def ranks(self):
        return [as_basis(v).shape[1] for v in self.bases]

    def probability(self, t: int) -> np.ndarray:
        v = as_basis(self.bases[self.segment_of(t)])
        m = np.asarray(self.core_matrices[t - 1], dtype=float)
        p = self.sparsity * v @ m @ v.T
        return 0.5 * (p + p.T)


def parse_graph_sequence(data) -> GraphSequence:
    """Parse DNET v1 text (``str`` or ``bytes``) into a GraphSequence."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc}") from exc
    lines = data.splitlines()
    if not lines:
        raise ParseError("empty input, expected a 'dnet v1' header", line=1)
    header = lines[0].lstrip("\ufeff").strip()
    match = _HEADER.match(header)
    if match is None:
        raise ParseError(f"malformed header {header!r}", line=1)
    n, T = int(match.group(1)), int(match.group(2))
    if n < 1 or T < 1:
        raise ValidationError("header requires n >= 1 and T >= 1", line=1)

    layers = np.zeros((T, n, n), dtype=np.uint8)
    triples = _fast_triples(lines[1:], n, T)
    if triples is not None:
        t, i, j = (triples[:, k] - 1 for k in range(3))
        layers[t, i, j] = 1
        layers[t, j, i] = 1
        return GraphSequence(layers)

    # slow path: exact diagnostics with line numbers
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected '<t> <i> <j>', got {line!r}", line=lineno)
        try:
            t, i, j = (int(p) for p in parts)
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", line=lineno) from None
        if not 1 <= t <= T:
            raise ValidationError(f"time index {t} outside [1, {T}]", line=lineno)
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValidationError(f"node index outside [1, {n}] in {line!r}", line=lineno)
        if i == j:
            raise ValidationError(f"self-loop on node {i}", line=lineno)
        layers[t - 1, i - 1, j - 1] = 1
        layers[t - 1, j - 1, i - 1] = 1
    return GraphSequence(layers)


def _fast_triples(body, n, T):
    """Vectorized parse of well-formed bodies; None means "use the slow path"."""
    body = [ln for ln in body if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        return np.zeros((0, 3), dtype=np.int64)
    try:
        arr = np.loadtxt(io.StringIO("\n".join(body)), dtype=np.int64, comments=None, ndmin=2)
    except ValueError:
        return None
    if arr.shape[1] != 3:
        return None
    t, i, j = arr[:, 0], arr[:, 1], arr[:, 2]
    ok = (t >= 1) & (t <= T) & (i >= 1) & (i <= n) & (j >= 1) & (j <= n) & (i != j)
    return arr if ok.all() else None


def read_dnet(path) -> GraphSequence:
    return parse_graph_sequence(Path(path).read_bytes())


def format_dnet(g: GraphSequence) -> str:
    """Canonical DNET v1 text: edges sorted by ``(t, i, j)`` with ``i < j``."""
    out = [f"dnet v1 n={g.n} T={g.T}"]
    out.extend(f"{t} {i} {j}" for t, i, j in g.edges())
    return "\n".join(out) + "\n"


def sequence_sparsity_estimate(g: GraphSequence) -> float:
    """Largest time-averaged edge frequency over node pairs ``i < j``."""
    if g.n < 2:
        return 0.0
    freq = g.layers.sum(axis=0, dtype=np.int64)
    iu = np.triu_indices(g.n, k=1)
    return float(freq[iu].max()) / g.T
