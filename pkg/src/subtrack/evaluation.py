"""Localization metrics, the replication harness and post-hoc community summaries."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, replace

import numpy as np

from .errors import ClusteringError, EmptyCommunityError, OutOfRangeError, SubtrackError
from .detector import default_config, detect
from .generator import build_scenario
from .netdata import GraphSequence, sequence_sparsity_estimate

log = logging.getLogger(__name__)

__all__ = [
    "MetricRow",
    "ReplicationOutcome",
    "hausdorff",
    "count_error",
    "replication_seed",
    "run_replication",
    "run_replications",
    "rows_to_csv",
    "internal_density",
    "cohen_kappa",
    "cohen_kappa_pairs",
    "cluster_memberships",
]

METHODS = ("coarse", "refined")


def _points(a):
    return [int(x) for x in getattr(a, "points", a)]


def hausdorff(a, b, T: int | None = None) -> float:
    """Symmetric Hausdorff distance between two change-point sets.

    Two empty sets are at distance 0. When exactly one set is empty the
    distance is the penalty ``max(T - 1, 1)``, which needs ``T``.
    """
    a, b = _points(a), _points(b)
    if not a and not b:
        return 0.0
    if not a or not b:
        if T is None:
            raise ValueError("T is required to penalize an empty change-point set")
        return float(max(T - 1, 1))
    x = np.asarray(a)[:, None]
    y = np.asarray(b)[None, :]
    d = np.abs(x - y)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def count_error(a, truth) -> int:
    return abs(len(_points(a)) - len(_points(truth)))


@dataclass(frozen=True)
class MetricRow:
    scenario: str
    param: str
    method: str
    count_mean: float
    count_se: float
    haus_mean: float
    haus_se: float
    R: int
    failures: int = 0


@dataclass(frozen=True)
class ReplicationOutcome:
    rep: int
    seed: int
    truth: tuple
    coarse: tuple | None
    refined: tuple | None
    error: str | None = None

    def metrics(self, method: str, T: int):
        pts = self.coarse if method == "coarse" else self.refined
        return count_error(pts, self.truth), hausdorff(pts, self.truth, T)


def replication_seed(master_seed: int, rep: int) -> int:
    """Independent 63-bit seed for replication ``rep``."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(rep,))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def run_replication(params, rep: int, config_overrides=None) -> ReplicationOutcome:
    """Generate, detect and collect points for one replication of ``params``."""
    seed = replication_seed(params.seed, rep)
    p = replace(params, seed=seed)
    gt, g = build_scenario(p)
    truth = tuple(int(c) for c in gt.change_points)
    try:
        cfg = default_config(g.n, g.T, sequence_sparsity_estimate(g), **dict(config_overrides or {}))
        report = detect(g, cfg)
    except SubtrackError as exc:
        return ReplicationOutcome(rep, seed, truth, None, None, f"{type(exc).__name__}: {exc}")
    return ReplicationOutcome(rep, seed, truth, report.coarse.points, report.refined.points)


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(values.sum() / values.size)
    if values.size == 1:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def aggregate(scenario: str, param: str, outcomes, T: int, methods=METHODS):
    rows = []
    ok = [o for o in outcomes if o.error is None]
    failures = len(outcomes) - len(ok)
    for method in methods:
        counts, hauss = [], []
        for o in ok:
            c, h = o.metrics(method, T)
            counts.append(c)
            hauss.append(h)
        cm, cse = _mean_se(counts)
        hm, hse = _mean_se(hauss)
        rows.append(MetricRow(scenario, param, method, cm, cse, hm, hse, len(outcomes), failures))
    return rows


def run_replications(grid, R: int, methods=METHODS, workers: int = 1, config_overrides=None,
                     return_outcomes=False):
    """Run ``R`` replications for every cell of ``grid`` and aggregate per method.

    ``grid`` is a sequence of ``(scenario, param_label, ScenarioParams)``;
    each cell's ``params.seed`` acts as the master seed. Results do not depend
    on ``workers``.
    """
    if R < 1:
        raise ValueError("need at least one replication")
    jobs = [(cell, rep) for cell in range(len(grid)) for rep in range(R)]
    args = [(grid[cell][2], rep, config_overrides) for cell, rep in jobs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, args))
    else:
        results = [_run_job(a) for a in args]

    rows, outcomes = [], []
    for cell, (scenario, label, params) in enumerate(grid):
        cell_out = results[cell * R:(cell + 1) * R]
        for o in cell_out:
            if o.error is not None:
                log.warning("replication %d of %s=%s failed: %s", o.rep, scenario, label, o.error)
        outcomes.append(cell_out)
        rows.extend(aggregate(scenario, str(label), cell_out, params.T, methods))
    if return_outcomes:
        return rows, outcomes
    return rows


def _run_job(args):
    params, rep, overrides = args
    return run_replication(params, rep, overrides)


def _fmt(x: float) -> str:
    return repr(float(x))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "method", "count_mean", "count_se", "haus_mean", "haus_se", "R", "failures"])
    for r in rows:
        w.writerow([r.param, r.method, _fmt(r.count_mean), _fmt(r.count_se),
                    _fmt(r.haus_mean), _fmt(r.haus_se), r.R, r.failures])
    return buf.getvalue()


def rows_to_json(rows) -> list:
    return [asdict(r) for r in rows]


def _interval_layers(g: GraphSequence, interval):
    t0, t1 = interval
    if not (1 <= t0 < t1 <= g.T + 1):
        raise OutOfRangeError(f"interval [{t0}, {t1}) outside [1, {g.T + 1})")
    return g.layers[t0 - 1:t1 - 1]


def internal_density(g: GraphSequence, labels, interval) -> dict:
    """Average within-community edge density over the layers ``[t0, t1)``.

    For community ``k`` with ``N_k`` members this is the edge count over ordered
    pairs ``i != j`` inside ``k``, summed over layers, divided by
    ``N_k (N_k - 1) (t1 - t0)``.
    """
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ValueError("labels must cover every node")
    layers = _interval_layers(g, interval)
    width = layers.shape[0]
    counts = layers.sum(axis=0, dtype=np.int64)
    out = {}
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        pairs = idx.size * (idx.size - 1)
        if pairs == 0:
            raise EmptyCommunityError(f"community {k} has fewer than two members")
        out[k.item()] = float(counts[np.ix_(idx, idx)].sum()) / (pairs * width)
    return out


def cohen_kappa(x, y) -> float | None:
    """Cohen's kappa between two binary vectors; None when chance agreement is 1."""
    x = np.asarray(x, dtype=bool)
    y = np.asarray(y, dtype=bool)
    p_obs = float(np.mean(x == y))
    px, py = float(x.mean()), float(y.mean())
    p_exp = px * py + (1 - px) * (1 - py)
    if math.isclose(p_exp, 1.0):
        return None
    return (p_obs - p_exp) / (1 - p_exp)


def cohen_kappa_pairs(g: GraphSequence, labels, interval):
    """Kappa of neighbourhood indicators for every intra-community node pair.

    For a pair ``(i, j)`` the compared vectors are ``A_t(i, v)`` and
    ``A_t(j, v)`` over layers in ``[t0, t1)`` and nodes ``v`` other than ``i``
    and ``j``. Returns ``(per_community, skipped)`` where ``per_community`` maps
    each label to its list of kappas and ``skipped`` counts undefined pairs.
    """
    labels = np.asarray(labels)
    layers = _interval_layers(g, interval)
    out = {}
    skipped = 0
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        vals = []
        for a_pos, i in enumerate(idx):
            for j in idx[a_pos + 1:]:
                others = np.ones(g.n, dtype=bool)
                others[[i, j]] = False
                kappa = cohen_kappa(layers[:, i, others].ravel(), layers[:, j, others].ravel())
                if kappa is None:
                    skipped += 1
                else:
                    vals.append(kappa)
        out[k.item()] = vals
    return out, skipped


def cluster_memberships(basis, k: int, seed: int = 0, max_iter: int = 100, restarts: int = 10,
                        n_init: int = 10) -> np.ndarray:
    """k-means on the rows of ``basis``; labels are ordered by first appearance.

    Seeding is k-means++ from ``seed``; the best of ``n_init`` runs by inertia
    is kept. A run that empties a cluster is restarted, up to ``restarts``
    times, before giving up.
    """
    x = np.asarray(basis, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if k == 1:
        return np.zeros(n, dtype=int)
    rng = np.random.default_rng(seed)
    best, best_inertia = None, math.inf
    for _ in range(n_init):
        for _attempt in range(restarts + 1):
            labels, inertia = _lloyd(x, k, rng, max_iter)
            if labels is not None:
                break
        else:
            raise ClusteringError(f"k-means kept producing empty clusters after {restarts} restarts")
        if inertia < best_inertia - 1e-12:
            best, best_inertia = labels, inertia
    _, first = np.unique(best, return_index=True)
    order = np.argsort(first)
    remap = np.empty(k, dtype=int)
    remap[order] = np.arange(k)
    return remap[best]


def _lloyd(x, k, rng, max_iter):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    for _ in range(1, k):
        d2 = ((x[:, None, :] - np.asarray(centers)[None]) ** 2).sum(-1).min(axis=1)
        total = d2.sum()
        if total <= 0:
            return None, math.inf
        centers.append(x[rng.choice(n, p=d2 / total)])
    centers = np.asarray(centers)
    labels = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None]) ** 2).sum(-1)
        new = np.argmin(d2, axis=1)  # ties go to the lowest cluster index
        if np.bincount(new, minlength=k).min() == 0:
            return None, math.inf
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
    d2 = ((x - centers[labels]) ** 2).sum()
    return labels, float(d2)
