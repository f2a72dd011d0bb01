"""Coarse scan plus refinement for network-subspace change points.

Time indices in this module are 1-based, like the layer numbers in DNET
files. Windows are inclusive on both ends.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from .errors import DegenerateRankError, OutOfRangeError, ValidationError
from .netdata import GraphSequence, sequence_sparsity_estimate
from .spectral import proj_residual_norm, proj_residual_trace, uevt
from .statistics import (
    DEFAULT_RECOMPUTE_INTERVAL,
    StatTrace,
    TraceRecord,
    WindowAggregator,
    as_square_stack,
    pi_eig_hat,
    pi_proj_hat,
)

log = logging.getLogger(__name__)

__all__ = [
    "REPORT_SCHEMA",
    "DetectorConfig",
    "SubspaceEstimate",
    "ChangePointSet",
    "ScanResult",
    "RefineResult",
    "DetectionReport",
    "default_config",
    "estimate_subspace",
    "triggers",
    "scan",
    "refine",
    "detect",
]

REPORT_SCHEMA = "subtrack-report-v1"
DEFAULT_PROJ_MULTIPLIER = 1.0 + math.sqrt(2.0)

RANK_UP = "rank-up"
RANK_DOWN = "rank-down"
RANK_EQUAL = "rank-equal"


@dataclass(frozen=True)
class DetectorConfig:
    L: int
    b: float
    auto_tune: bool = False
    proj_multiplier: float = DEFAULT_PROJ_MULTIPLIER
    recompute_interval: int = DEFAULT_RECOMPUTE_INTERVAL
    rho_check: float | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ValidationError(f"window length L must be >= 1, got {self.L}")
        if not self.b > 0 or not math.isfinite(self.b):
            raise ValidationError(f"threshold b must be positive and finite, got {self.b}")
        if self.proj_multiplier < 1:
            raise ValidationError("proj_multiplier must be >= 1")
        if self.recompute_interval < 1:
            raise ValidationError("recompute_interval must be >= 1")

    @property
    def proj_threshold(self) -> float:
        return self.proj_multiplier * self.b

    def to_json(self) -> dict:
        return asdict(self)


def default_threshold(n: int, T: int, L: int, rho_check: float, rho: float | None = None) -> float:
    """``(L n r^2 + sqrt(L) n r sqrt(max(50, n p))) log(n + T) / 30``.

    ``r`` is the sparsity estimate; ``p`` is the true sparsity when known and
    falls back to ``r`` otherwise.
    """
    r = rho_check
    p = r if rho is None else rho
    return (L * n * r**2 + math.sqrt(L) * n * r * math.sqrt(max(50.0, n * p))) * math.log(n + T) / 30.0


def default_config(n: int, T: int, rho_check: float, rho: float | None = None, **overrides) -> DetectorConfig:
    """Tuning used in the simulations: ``L = floor(T / 20)`` (at least 1) and the
    sparsity-scaled threshold of :func:`default_threshold`.

    An explicit ``L`` in ``overrides`` is used when computing ``b``. A zero
    sparsity estimate yields the smallest positive threshold, which leaves the
    initial subspace empty and surfaces as a DegenerateRankError downstream.
    """
    L = overrides.pop("L", None) or max(T // 20, 1)
    b = overrides.pop("b", None)
    if b is None:
        b = default_threshold(n, T, L, rho_check, rho)
        if b <= 0:
            b = np.finfo(float).tiny
    return DetectorConfig(L=L, b=b, auto_tune=True, rho_check=rho_check, **overrides)


@dataclass(frozen=True)
class SubspaceEstimate:
    basis: np.ndarray
    values: np.ndarray
    rank: int
    window: tuple  # (first, last), inclusive


def estimate_subspace(source, start: int, L: int, b: float) -> SubspaceEstimate:
    """Eigenvectors with eigenvalue above ``b`` of the window ``[start + L, start + 2L - 1]``."""
    return _estimate_window(as_square_stack(source), start + L, start + 2 * L - 1, b)


def _estimate_window(stack, first: int, last: int, b: float) -> SubspaceEstimate:
    T = stack.shape[0]
    if first < 1 or last > T or last < first:
        raise OutOfRangeError(f"estimation window [{first}, {last}] outside [1, {T}]")
    res = uevt(stack[first - 1:last].sum(axis=0), b)
    if res.rank == 0:
        raise DegenerateRankError(
            f"no eigenvalue of the window [{first}, {last}] exceeds b={b:.6g}",
            start=first,
            window=(first, last),
        )
    return SubspaceEstimate(res.basis, res.values, res.rank, (first, last))


@dataclass(frozen=True)
class ChangePointSet:
    points: tuple
    ranks: tuple  # one per segment, len(points) + 1

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValidationError("change points must be strictly increasing")
        if len(self.ranks) != len(self.points) + 1:
            raise ValidationError("need one rank per segment")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


class ScanResult(NamedTuple):
    coarse: ChangePointSet
    trace: StatTrace
    estimates: list
    warnings: list


class RefineResult(NamedTuple):
    refined: ChangePointSet
    cases: list
    warnings: list


def triggers(pi_proj: float, pi_eig: float, config: DetectorConfig) -> bool:
    """Scan trigger: the eigenvalue drops below ``b`` or the residual exceeds the projection threshold."""
    if pi_eig < config.b:
        return True
    return pi_proj > config.proj_threshold


def scan(source, config: DetectorConfig) -> ScanResult:
    """Coarse scan.

    The first subspace comes from ``[L + 1, 2L]``; positions ``l`` run from
    ``2L + 1`` while ``l <= T - L``. After a trigger at ``l`` the next subspace
    is estimated from ``[l + L, l + 2L - 1]`` and the scan resumes at
    ``l + 2L``.
    """
    stack = as_square_stack(source)
    T = stack.shape[0]
    L = config.L
    if T < 3 * L + 1:
        raise OutOfRangeError(f"need T >= 3L + 1 layers to scan, got T={T}, L={L}")

    est = estimate_subspace(stack, 1, L, config.b)
    estimates = [est]
    points = []
    warnings = []
    trace = StatTrace()

    l = 2 * L + 1
    back = WindowAggregator(stack, L, l, config.recompute_interval)
    fwd = WindowAggregator(stack, L, l + L - 1, config.recompute_interval)
    while l <= T - L:
        p_proj = pi_proj_hat(back.move_to(l), est.basis)
        p_eig = pi_eig_hat(fwd.move_to(l + L - 1), est.rank)
        trace.append(TraceRecord(l, p_proj, p_eig, len(points), est.rank))
        if not triggers(p_proj, p_eig, config):
            l += 1
            continue
        points.append(l)
        if l + 2 * L - 1 > T:
            msg = (
                f"trigger at {l} leaves fewer than 2L={2 * L} layers; "
                f"last subspace estimated from [{T - L + 1}, {T}] and scan stopped"
            )
            log.warning(msg)
            warnings.append(msg)
            estimates.append(_estimate_window(stack, T - L + 1, T, config.b))
            break
        est = estimate_subspace(stack, l, L, config.b)
        estimates.append(est)
        l += 2 * L

    coarse = ChangePointSet(tuple(points), tuple(e.rank for e in estimates))
    return ScanResult(coarse, trace, estimates, warnings)


class _WindowCache:
    """Thresholded eigendecompositions keyed by window end."""

    def __init__(self, stack, L, b):
        self.stack = stack
        self.L = L
        self.b = b
        self._cache = {}

    def __call__(self, last):
        res = self._cache.get(last)
        if res is None:
            first = last - self.L + 1
            res = uevt(self.stack[first - 1:last].sum(axis=0), self.b)
            self._cache[last] = res
        return res

    def ref1(self, l):
        return proj_residual_trace(self(l - 1).basis, self(l + self.L - 1).approx)

    def ref2(self, l):
        return proj_residual_trace(self(l + self.L - 1).basis, self(l - 1).approx)


def _argmax(values, positions):
    # np.argmax returns the first maximum: ties break to the smallest position
    return positions[int(np.argmax(values))]


def refine(source, coarse: ChangePointSet, config: DetectorConfig, estimates=None) -> RefineResult:
    """Localize each coarse point with the refinement statistics.

    Case by rank comparison of the neighbouring segment estimates:
    rank up maximizes ``pi_ref1`` over ``[c - L + 1, c]``; rank down maximizes
    ``pi_ref2`` over ``[c, c + L - 1]``; equal ranks first search backwards for
    the last position whose forward window still leaves a large residual
    outside the new subspace, then maximize ``pi_ref1`` from there to ``c``.
    Search intervals are clipped to ``[L + 1, T - L + 1]``.
    """
    stack = as_square_stack(source)
    T = stack.shape[0]
    L = config.L
    if estimates is None:
        estimates = _reestimate(stack, coarse, config)
    cache = _WindowCache(stack, L, config.b)
    lo_clip, hi_clip = L + 1, T - L + 1

    refined = []
    cases = []
    warnings = []
    prev = 0
    for m, c in enumerate(coarse.points):
        r_old, r_new = coarse.ranks[m], coarse.ranks[m + 1]
        info = {"coarse": c}
        if r_old < r_new:
            case, lo, hi, stat = RANK_UP, c - L + 1, c, cache.ref1
        elif r_old > r_new:
            case, lo, hi, stat = RANK_DOWN, c, c + L - 1, cache.ref2
        else:
            case, stat = RANK_EQUAL, cache.ref1
            lo, hit = _backward_search(stack, c, prev, estimates[m + 1].basis, config)
            if not hit:
                msg = f"rank-equal backward search from {c} found no trigger; fell back to {lo}"
                log.warning(msg)
                warnings.append(msg)
            info["backward_start"] = lo
            hi = c
        info["case"] = case
        info["interval"] = [lo, hi]
        lo, hi = max(lo, lo_clip), min(hi, hi_clip)
        if lo > hi:
            msg = f"refinement interval for coarse point {c} is empty after clipping; kept {c}"
            warnings.append(msg)
            tau = c
        else:
            positions = list(range(lo, hi + 1))
            tau = _argmax([stat(s) for s in positions], positions)
        info["searched"] = [lo, hi]
        info["refined"] = tau
        refined.append(tau)
        cases.append(info)
        prev = tau

    return RefineResult(ChangePointSet(tuple(refined), coarse.ranks), cases, warnings)


def _backward_search(stack, c, prev, new_basis, config):
    """First ``l`` in ``c - 1, c - 2, ..., prev + 1`` whose window ``[l, l + L - 1]``
    has residual norm above the projection threshold outside ``new_basis``."""
    L = config.L
    T = stack.shape[0]
    for l in range(min(c - 1, T - L + 1), max(prev, 0), -1):
        window = stack[l - 1:l + L - 1].sum(axis=0)
        if proj_residual_norm(new_basis, window) > config.proj_threshold:
            return l, True
    return max(prev + 1, c - 2 * L + 1), False


def _reestimate(stack, coarse, config):
    T = stack.shape[0]
    L = config.L
    out = [estimate_subspace(stack, 1, L, config.b)]
    for c in coarse.points:
        if c + 2 * L - 1 > T:
            out.append(_estimate_window(stack, T - L + 1, T, config.b))
        else:
            out.append(estimate_subspace(stack, c, L, config.b))
    return out


@dataclass
class DetectionReport:
    coarse: ChangePointSet
    refined: ChangePointSet
    trace: StatTrace
    config: DetectorConfig
    cases: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def blind_spot(self):
        """Layers where no change can be reported: ``[1, 2L]``."""
        return (1, 2 * self.config.L)

    def to_json(self, trace_csv_path=None) -> dict:
        out = {
            "schema": REPORT_SCHEMA,
            "config": self.config.to_json(),
            "coarse_points": list(self.coarse.points),
            "refined_points": list(self.refined.points),
            "segment_ranks": list(self.coarse.ranks),
            "cases": self.cases,
            "warnings": self.warnings,
            "blind_spot": list(self.blind_spot),
        }
        if trace_csv_path is not None:
            out["trace_csv_path"] = str(trace_csv_path)
        return out


def detect(g, config: DetectorConfig | None = None) -> DetectionReport:
    """Run the coarse scan and the refinement on a GraphSequence.

    Without ``config`` the tuning comes from :func:`default_config` using the
    sequence's sparsity estimate.
    """
    if config is None:
        if not isinstance(g, GraphSequence):
            raise ValidationError("auto-tuning needs a GraphSequence")
        config = default_config(g.n, g.T, sequence_sparsity_estimate(g))
    stack = as_square_stack(g)
    coarse, trace, estimates, scan_warnings = scan(stack, config)
    refined, cases, refine_warnings = refine(stack, coarse, config, estimates)
    return DetectionReport(coarse, refined, trace, config, cases, scan_warnings + refine_warnings)
