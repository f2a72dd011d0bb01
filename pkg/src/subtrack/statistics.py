"""Detection statistics over sliding windows of squared adjacency matrices.

Every statistic works on a *square stack*: a ``(T, n, n)`` float array whose
layer ``t - 1`` holds the per-time signal matrix for 1-based time ``t``. For
observed data that is ``A_t^2 - D_t`` (see :func:`debiased_squares`); in
simulation one may pass the population stack of ``P_t^2`` instead, which makes
the same code compute the noiseless statistics.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidRankError, OutOfRangeError
from .netdata import GraphSequence
from .spectral import proj_residual_norm, proj_residual_trace, spectral_norm, sym_eig, uevt

__all__ = [
    "debiased_square",
    "debiased_squares",
    "as_square_stack",
    "window_sum",
    "WindowAggregator",
    "TraceRecord",
    "StatTrace",
    "pi_proj_hat",
    "pi_eig_hat",
    "pbar",
    "pi_ref1",
    "pi_ref2",
]

DEFAULT_RECOMPUTE_INTERVAL = 64


def debiased_square(a) -> np.ndarray:
    """``A^2 - diag(A 1)``; for a hollow binary ``A`` the diagonal is exactly zero."""
    a = np.asarray(a, dtype=float)
    sq = a @ a
    sq[np.diag_indices_from(sq)] -= a.sum(axis=1)
    return sq


def debiased_squares(g: GraphSequence) -> np.ndarray:
    a = g.layers.astype(float)
    sq = np.matmul(a, a)
    idx = np.arange(g.n)
    sq[:, idx, idx] -= a.sum(axis=2)
    return sq


def as_square_stack(source) -> np.ndarray:
    if isinstance(source, GraphSequence):
        return debiased_squares(source)
    stack = np.asarray(source, dtype=float)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise DimensionError(f"square stack must have shape (T, n, n), got {stack.shape}")
    return stack


def _check_window(T: int, last: int, L: int):
    if L < 1:
        raise OutOfRangeError(f"window length must be >= 1, got {L}")
    if last - L + 1 < 1 or last > T:
        raise OutOfRangeError(f"window [{last - L + 1}, {last}] outside [1, {T}]")


def window_sum(source, last: int, L: int) -> np.ndarray:
    """Sum of the per-time matrices over ``[last - L + 1, last]`` (1-based, inclusive).

    ``source`` is a GraphSequence or a square stack.
    """
    if isinstance(source, GraphSequence):
        _check_window(source.T, last, L)
        layers = source.layers[last - L:last].astype(float)
        return sum(debiased_square(a) for a in layers)
    stack = as_square_stack(source)
    _check_window(stack.shape[0], last, L)
    return stack[last - L:last].sum(axis=0)


class WindowAggregator:
    """Running sum over a sliding window of a square stack.

    Each :meth:`slide` adds the newest layer and drops the oldest. The sum is
    rebuilt from scratch every ``recompute_interval`` slides to bound drift.
    """

    def __init__(self, stack, L: int, last: int, recompute_interval=DEFAULT_RECOMPUTE_INTERVAL):
        self.stack = as_square_stack(stack)
        self.L = L
        self.recompute_interval = recompute_interval
        self.reset(last)

    def reset(self, last: int):
        _check_window(self.stack.shape[0], last, self.L)
        self.last = last
        self.sum = self.stack[last - self.L:last].sum(axis=0)
        self._since_rebuild = 0

    def slide(self, steps: int = 1):
        for _ in range(steps):
            new = self.last + 1
            if new > self.stack.shape[0]:
                raise OutOfRangeError(f"cannot slide window past T={self.stack.shape[0]}")
            self._since_rebuild += 1
            if self._since_rebuild >= self.recompute_interval:
                self.reset(new)
                continue
            self.sum += self.stack[new - 1]
            self.sum -= self.stack[new - 1 - self.L]
            self.last = new
        return self.sum

    def move_to(self, last: int):
        """Advance to ``last``; jumps of more than ``L`` layers rebuild instead."""
        if last < self.last or last - self.last > self.L:
            self.reset(last)
        else:
            self.slide(last - self.last)
        return self.sum


@dataclass(frozen=True)
class TraceRecord:
    l: int
    pi_proj: float
    pi_eig: float
    segment: int
    rank: int


@dataclass
class StatTrace:
    records: list = field(default_factory=list)

    def append(self, record: TraceRecord):
        if self.records and record.l <= self.records[-1].l:
            raise ValueError("trace positions must be strictly increasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["l", "pi_proj", "pi_eig", "segment", "rank"])
        for r in self.records:
            writer.writerow([r.l, repr(float(r.pi_proj)), repr(float(r.pi_eig)), r.segment, r.rank])
        return buf.getvalue()


def pi_proj_hat(window, basis) -> float:
    """Spectral norm of the window's component outside ``span(basis)``."""
    window = np.asarray(window, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[0] != window.shape[0]:
        raise DimensionError("basis and window dimensions differ")
    if basis.shape[1] == 0:
        return spectral_norm(window)
    return proj_residual_norm(basis, window)


def pi_eig_hat(window, rank: int) -> float:
    """The ``rank``-th largest eigenvalue of the window."""
    window = np.asarray(window, dtype=float)
    n = window.shape[0]
    if not 1 <= rank <= n:
        raise InvalidRankError(f"rank must lie in [1, {n}], got {rank}")
    return float(sym_eig(window).values[rank - 1])


def pbar(window, b: float):
    """Thresholded low-rank estimate of a window; returns ``(matrix, rank)``."""
    res = uevt(window, b)
    return res.approx, res.rank


def _ref_windows(stack, l: int, L: int, b: float):
    T = stack.shape[0]
    if l - L < 1 or l + L - 1 > T:
        raise OutOfRangeError(f"refinement position {l} needs [{l - L}, {l + L - 1}] inside [1, {T}]")
    back = uevt(stack[l - L - 1:l - 1].sum(axis=0), b)
    fwd = uevt(stack[l - 1:l + L - 1].sum(axis=0), b)
    return back, fwd


def pi_ref1(source, l: int, L: int, b: float) -> float:
    """Forward window's thresholded estimate, traced outside the backward subspace.

    The backward window is ``[l - L, l - 1]`` and the forward window
    ``[l, l + L - 1]``. Large values mean new directions appear from ``l`` on.
    """
    stack = as_square_stack(source)
    back, fwd = _ref_windows(stack, l, L, b)
    return proj_residual_trace(back.basis, fwd.approx)


def pi_ref2(source, l: int, L: int, b: float) -> float:
    """Mirror of :func:`pi_ref1`: backward estimate traced outside the forward subspace."""
    stack = as_square_stack(source)
    back, fwd = _ref_windows(stack, l, L, b)
    return proj_residual_trace(fwd.basis, back.approx)
