"""Dynamic stochastic block model simulator with ground truth.

Each layer is drawn from ``P_t = rho Z^(k) B_t Z^(k)^T`` where the membership
``Z^(k)`` is fixed within a segment and ``B_t`` is redrawn independently at
every time step, so the probability matrix keeps moving while its column
space only changes at the change points.

Randomness comes from Philox streams derived from one seed: stream ``(0,)``
drives memberships and connectivity choices, stream ``(1, t)`` samples layer
``t``. Any layer can therefore be regenerated on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np

from .errors import InfeasibleProbabilityError, OutOfRangeError, ValidationError
from .netdata import GraphSequence, SegmentModel

__all__ = [
    "W1",
    "W2",
    "B1",
    "B2",
    "ScenarioParams",
    "GroundTruth",
    "scenario_params",
    "build_scenario",
    "build_toy",
    "build_stationary",
    "population_squares",
    "population_window",
    "philox",
]

_S6 = math.sqrt(6.0)
_S2 = math.sqrt(2.0)

W1 = np.array([
    [3 / 4, 1 / 4, _S6 / 4],
    [1 / 2, 3 / 4, -_S6 / 4],
    [_S6 / 4, -_S6 / 4, -1 / 2],
])
W2 = np.array([
    [1 / 2, 1 / 2, -_S2 / 2],
    [1 / 2, 1 / 2, _S2 / 2],
    [_S2 / 2, -_S2 / 2, 0.0],
])
B1 = W1 @ np.diag([1.0, 0.5, 0.5]) @ W1.T
B2 = W2 @ np.diag([1.0, 0.5, -0.5]) @ W2.T
CONNECTIVITY = (B1, B2)

CLUSTER_FRACTIONS = (0.3, 0.3)


def philox(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**6)


@dataclass(frozen=True)
class ScenarioParams:
    n: int
    T: int
    s: float = 0.25
    q: float = 0.5
    rho: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("need at least 3 nodes")
        if not 0 < _as_fraction(self.s) <= Fraction(1, 4):
            raise ValidationError(f"s must lie in (0, 1/4], got {self.s}")
        if not 0 <= self.q <= 1:
            raise ValidationError(f"q must lie in [0, 1], got {self.q}")
        if not 0 < self.rho <= 1:
            raise ValidationError(f"rho must lie in (0, 1], got {self.rho}")
        cps = self.change_points
        if not (1 < cps[0] < cps[1] < cps[2] < self.T):
            raise ValidationError(f"change points {cps} are not strictly increasing and interior")

    @property
    def change_points(self) -> tuple:
        T = self.T
        return (
            math.floor(_as_fraction(self.s) * T),
            math.floor(Fraction(T, 2)),
            math.floor(Fraction(3 * T, 4)),
        )


def scenario_params(scenario: str, value, n: int, T: int, seed: int = 0) -> ScenarioParams:
    """Parameters for one cell of Scenario I (vary s), II (vary q) or III (vary rho).

    For Scenario III ``value`` may be a string such as ``"80/n"``.
    """
    scenario = scenario.upper()
    if scenario == "I":
        return ScenarioParams(n=n, T=T, s=float(_as_fraction(value)), q=0.5, rho=1.0, seed=seed)
    if scenario == "II":
        return ScenarioParams(n=n, T=T, s=0.25, q=float(_as_fraction(value)), rho=1.0, seed=seed)
    if scenario == "III":
        if isinstance(value, str) and value.endswith("/n"):
            rho = float(value[:-2]) / n
        else:
            rho = float(_as_fraction(value))
        return ScenarioParams(n=n, T=T, s=0.25, q=0.5, rho=rho, seed=seed)
    raise ValidationError(f"unknown scenario {scenario!r}; expected I, II or III")


@dataclass
class GroundTruth:
    """True change points, memberships and per-layer connectivity choices.

    ``labels[k]`` is the cluster of every node in segment ``k`` (0-based
    clusters, consecutive). ``choices[t-1]`` is 0 for ``B1`` and 1 for
    ``B2``; in rank-2 segments the upper-left 2x2 block of the choice is used.
    """

    n: int
    T: int
    change_points: tuple
    labels: list
    choices: np.ndarray
    rho: float
    connectivity: tuple = field(default=CONNECTIVITY, repr=False)

    @property
    def segment_ranks(self) -> list:
        return [int(lab.max()) + 1 for lab in self.labels]

    def segment_of(self, t: int) -> int:
        return int(np.searchsorted(np.asarray(self.change_points), t, side="right"))

    def membership(self, k: int) -> np.ndarray:
        lab = self.labels[k]
        z = np.zeros((self.n, int(lab.max()) + 1))
        z[np.arange(self.n), lab] = 1.0
        return z

    def connectivity_at(self, t: int) -> np.ndarray:
        k = self.segment_of(t)
        r = self.segment_ranks[k]
        return self.connectivity[int(self.choices[t - 1])][:r, :r]

    def probability(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.T:
            raise OutOfRangeError(f"time {t} outside [1, {self.T}]")
        lab = self.labels[self.segment_of(t)]
        b = self.connectivity_at(t)
        return self.rho * b[np.ix_(lab, lab)]

    def segment_model(self) -> SegmentModel:
        """Equivalent ``rho V M_t V^T`` factorization with orthonormal ``V``."""
        bases = []
        scales = []
        for k in range(len(self.labels)):
            z = self.membership(k)
            sizes = z.sum(axis=0)
            bases.append(z / np.sqrt(sizes))
            scales.append(np.sqrt(sizes))
        cores = []
        for t in range(1, self.T + 1):
            d = scales[self.segment_of(t)]
            cores.append(d[:, None] * self.connectivity_at(t) * d[None, :])
        return SegmentModel(tuple(self.change_points), tuple(bases), tuple(cores), self.rho)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "T": self.T,
            "change_points": [int(c) for c in self.change_points],
            "segment_ranks": self.segment_ranks,
            "labels": [[int(x) for x in lab] for lab in self.labels],
            "connectivity_choice": [int(c) for c in self.choices],
            "rho": self.rho,
        }


def _initial_labels(n: int, rng) -> np.ndarray:
    sizes = [math.floor(f * n + 0.5) for f in CLUSTER_FRACTIONS]
    sizes.append(n - sum(sizes))
    labels = np.repeat(np.arange(3), sizes)
    return labels[rng.permutation(n)]


def _reassign(labels: np.ndarray, q: float, rng) -> np.ndarray:
    """Move ``round(q n)`` random nodes to a uniformly chosen other cluster."""
    n = labels.size
    k = labels.max() + 1
    moved = rng.choice(n, size=math.floor(q * n + 0.5), replace=False)
    out = labels.copy()
    shift = rng.integers(1, k, size=moved.size)
    out[moved] = (labels[moved] + shift) % k
    return _relabel(out)


def _remove_smallest(labels: np.ndarray, rng) -> np.ndarray:
    counts = np.bincount(labels)
    gone = int(np.argmin(counts))
    keep = [c for c in range(counts.size) if c != gone]
    out = labels.copy()
    idx = np.flatnonzero(labels == gone)
    out[idx] = rng.choice(keep, size=idx.size)
    return _relabel(out)


def _relabel(labels: np.ndarray) -> np.ndarray:
    # consecutive cluster ids, preserving the original order
    present = np.unique(labels)
    return np.searchsorted(present, labels)


def _sample_layers(gt: GroundTruth, seed: int) -> GraphSequence:
    n = gt.n
    iu = np.triu_indices(n, k=1)
    layers = np.zeros((gt.T, n, n), dtype=np.uint8)
    for t in range(1, gt.T + 1):
        p = gt.probability(t)
        if p.max() > 1 + 1e-12 or p.min() < -1e-12:
            raise InfeasibleProbabilityError(f"P_{t} has entries outside [0, 1]")
        draw = philox(seed, 1, t).random(iu[0].size)
        edges = (draw < p[iu]).astype(np.uint8)
        layers[t - 1][iu] = edges
        layers[t - 1].T[iu] = edges
    return GraphSequence(layers)


def _draw_choices(T: int, rng) -> np.ndarray:
    return rng.integers(0, 2, size=T)


def build_scenario(params: ScenarioParams):
    """Simulate one Scenario I-III sequence; returns ``(GroundTruth, GraphSequence)``.

    Segments use memberships Z1 (clusters of 0.3n/0.3n/0.4n nodes), Z2 (a
    fraction ``q`` of nodes moved), Z3 (smallest cluster of Z2 dissolved, rank
    2) and Z4 = Z2.
    """
    rng = philox(params.seed, 0)
    z1 = _initial_labels(params.n, rng)
    z2 = _reassign(z1, params.q, rng)
    if z2.max() < 2:
        raise ValidationError(
            f"reassigning q={params.q} of n={params.n} nodes emptied a cluster; use a larger n"
        )
    z3 = _remove_smallest(z2, rng)
    choices = _draw_choices(params.T, rng)
    gt = GroundTruth(
        n=params.n,
        T=params.T,
        change_points=params.change_points,
        labels=[z1, z2, z3, z2.copy()],
        choices=choices,
        rho=params.rho,
    )
    return gt, _sample_layers(gt, params.seed)


def build_toy(n: int = 100, T: int = 400, seed: int = 0, rho: float = 1.0):
    """Four-segment sequence with rank pattern 3 > 2 < 3 = 3.

    Change points sit at ``T/4 + 1``, ``T/2 + 1`` and ``3T/4 + 1`` (101, 201
    and 301 for the default size). Segment 2 dissolves the smallest cluster,
    segment 3 moves half of the segment-1 nodes, segment 4 moves half of the
    segment-3 nodes again.
    """
    rng = philox(seed, 0)
    z1 = _initial_labels(n, rng)
    z2 = _remove_smallest(z1, rng)
    z3 = _reassign(z1, 0.5, rng)
    z4 = _reassign(z3, 0.5, rng)
    choices = _draw_choices(T, rng)
    cps = (T // 4 + 1, T // 2 + 1, 3 * T // 4 + 1)
    gt = GroundTruth(n=n, T=T, change_points=cps, labels=[z1, z2, z3, z4], choices=choices, rho=rho)
    return gt, _sample_layers(gt, seed)


def build_stationary(n: int, T: int, seed: int = 0, rho: float = 1.0):
    """Single-segment sequence (no change point) with the three-cluster membership."""
    rng = philox(seed, 0)
    gt = GroundTruth(n=n, T=T, change_points=(), labels=[_initial_labels(n, rng)],
                     choices=_draw_choices(T, rng), rho=rho)
    return gt, _sample_layers(gt, seed)


def population_squares(gt) -> np.ndarray:
    """Stack of ``P_t^2`` for every layer; usable wherever a square stack is accepted.

    ``gt`` may be a GroundTruth or a SegmentModel.
    """
    out = np.empty((gt.T, gt.n, gt.n))
    for t in range(1, gt.T + 1):
        p = gt.probability(t)
        out[t - 1] = p @ p
    return out


def population_window(gt: GroundTruth, last: int, L: int) -> np.ndarray:
    """``sum_{t = last-L+1}^{last} P_t^2``."""
    if L < 1 or last - L + 1 < 1 or last > gt.T:
        raise OutOfRangeError(f"window [{last - L + 1}, {last}] outside [1, {gt.T}]")
    total = np.zeros((gt.n, gt.n))
    for t in range(last - L + 1, last + 1):
        p = gt.probability(t)
        total += p @ p
    return total


def params_to_json(params: ScenarioParams) -> dict:
    return asdict(params)
