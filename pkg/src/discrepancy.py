"""
Star discrepancy of point sets and Threshold Accepting subset selection.
"""
import logging
from typing import Tuple, Optional

import numpy as np

from errors import SpecError, SizeGuardError
from models import PointSet, GeneratorKind, DiscrepancyMethod, DiscrepancyReport

logger = logging.getLogger(__name__)

LINF_WORK_LIMIT = 10 ** 9
_BLOCK_ELEMENTS = 1 << 22


def _check_nonempty(ps: PointSet) -> None:
    if ps is None or ps.n < 1:
        raise SpecError("point set must not be empty")


def _max_products(rows: np.ndarray, X: np.ndarray) -> np.ndarray:
    """prod_k (1 - max(rows_ik, X_jk)) for every pair (i, j)"""
    return np.prod(1.0 - np.maximum(rows[:, None, :], X[None, :, :]), axis=2)


def _block_size(n: int, d: int) -> int:
    return max(1, _BLOCK_ELEMENTS // max(1, n * d))


def l2_star_squared(ps: PointSet) -> float:
    """
    Squared L2 star discrepancy by Warnock's closed form.

    The O(N^2 d) double sum is accumulated over row blocks in a fixed order.
    """
    _check_nonempty(ps)
    X = ps.points
    n, d = X.shape

    first = 3.0 ** (-d)
    second = (2.0 / n) * np.sum(np.prod((1.0 - X ** 2) / 2.0, axis=1))

    step = _block_size(n, d)
    pair_sum = 0.0
    for start in range(0, n, step):
        pair_sum += float(np.sum(_max_products(X[start:start + step], X)))

    return first - second + pair_sum / (n * n)


def l2_star(ps: PointSet) -> float:
    """L2 star discrepancy in [0, 1]; rounding below zero is clamped"""
    return float(np.sqrt(max(l2_star_squared(ps), 0.0)))


def l2_star_mc(ps: PointSet, samples: int = 100000, seed: int = 0) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of the L2 star discrepancy.

    Args:
        ps: Point set
        samples: Number of uniform anchor points q (>= 100)
        seed: Seed for the anchors

    Returns:
        (estimate, std_error) where std_error follows the delta method for the square root
    """
    _check_nonempty(ps)
    if samples < 100:
        raise SpecError("samples must be at least 100")
    X = ps.points
    n, d = X.shape
    rng = np.random.default_rng(seed)

    squared = np.empty(samples, dtype=np.float64)
    step = _block_size(n, d)
    for start in range(0, samples, step):
        count = min(step, samples - start)
        q = rng.random((count, d))
        inside = np.all(X[None, :, :] < q[:, None, :], axis=2).sum(axis=1)
        local = inside / n - np.prod(q, axis=1)
        squared[start:start + count] = local * local

    mean = float(squared.mean())
    mean_error = float(squared.std(ddof=1)) / np.sqrt(samples)
    estimate = float(np.sqrt(mean))
    std_error = mean_error / (2.0 * estimate) if estimate > 0 else 0.0
    return estimate, std_error


def linf_star_exact(ps: PointSet) -> float:
    """
    Exact L-infinity star discrepancy by enumerating critical boxes.

    Every corner on the grid of per-axis coordinates (plus 1) is scored with the
    open count against the volume and the closed count against the volume.
    """
    _check_nonempty(ps)
    X = ps.points
    n, d = X.shape
    if float(n) ** d * n > LINF_WORK_LIMIT:
        raise SizeGuardError(
            f"exact L-infinity enumeration needs n^d * n <= {LINF_WORK_LIMIT:.0e} (n={n}, d={d})"
        )

    axes = [np.union1d(X[:, k], [1.0]) for k in range(d)]
    corners = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing='ij')], axis=1)

    worst = 0.0
    step = _block_size(n, d)
    for start in range(0, len(corners), step):
        q = corners[start:start + step]
        volume = np.prod(q, axis=1)
        open_count = np.all(X[None, :, :] < q[:, None, :], axis=2).sum(axis=1)
        closed_count = np.all(X[None, :, :] <= q[:, None, :], axis=2).sum(axis=1)
        worst = max(
            worst,
            float(np.max(volume - open_count / n)),
            float(np.max(closed_count / n - volume)),
        )
    return worst


def discrepancy_report(
    ps: PointSet,
    method: DiscrepancyMethod = DiscrepancyMethod.WARNOCK,
    samples: int = 100000,
    seed: int = 0
) -> DiscrepancyReport:
    """Compute one DiscrepancyReport row for `ps`"""
    std_error = None
    if method is DiscrepancyMethod.WARNOCK:
        value = l2_star(ps)
    elif method is DiscrepancyMethod.MONTECARLO:
        value, std_error = l2_star_mc(ps, samples, seed)
    else:
        value = linf_star_exact(ps)
    return DiscrepancyReport(
        set_id=ps.set_id,
        dim=ps.dim,
        n=ps.n,
        l2_star=min(value, 1.0),
        method=method,
        mc_std_error=std_error,
    )


# ===========================
# Threshold Accepting
# ===========================

class _SubsetObjective:
    """Incremental squared L2 star discrepancy for k-subsets of a fixed base"""

    def __init__(self, X: np.ndarray, k: int):
        n, d = X.shape
        self.k = k
        self.constant = 3.0 ** (-d)
        self.a = np.prod((1.0 - X ** 2) / 2.0, axis=1)
        step = _block_size(n, d)
        self.M = np.vstack([_max_products(X[s:s + step], X) for s in range(0, n, step)])

    def squared(self, selected: np.ndarray) -> float:
        k = self.k
        return (self.constant
                - 2.0 / k * float(self.a[selected].sum())
                + float(self.M[np.ix_(selected, selected)].sum()) / (k * k))

    def swap_delta(self, row_sums: np.ndarray, p: int, q: int) -> float:
        """Change of the squared discrepancy when p leaves and q enters"""
        M, k = self.M, self.k
        pair_change = -2.0 * row_sums[p] + M[p, p] + 2.0 * (row_sums[q] - M[q, p]) + M[q, q]
        return -2.0 / k * (self.a[q] - self.a[p]) + pair_change / (k * k)


def _root(value: float) -> float:
    return float(np.sqrt(max(value, 0.0)))


def ta_subset(
    base: PointSet,
    k: int,
    iters: int = 20000,
    seed: int = 0,
    restarts: int = 10
) -> PointSet:
    """
    Select a k-subset of `base` with low L2 star discrepancy by Threshold Accepting.

    The search starts from the best of `restarts` random k-subsets, swaps one
    selected point for one unselected point per step and accepts a swap when the
    change in discrepancy is at most the current threshold. The threshold starts
    at the median absolute change of 100 random swaps and decays linearly to 0.

    Args:
        base: Candidate points
        k: Subset size (k <= base.n)
        iters: Number of swap proposals
        seed: Seed for starting subsets and proposals
        restarts: Number of random starting subsets to choose from

    Returns:
        PointSet tagged OPTIMIZED (or `base` itself when k == base.n)
    """
    _check_nonempty(base)
    n = base.n
    if k < 1 or k > n:
        raise SpecError(f"k must be in [1, {n}], got {k}")
    if iters < 1:
        raise SpecError("iters must be positive")
    if k == n:
        return base

    rng = np.random.default_rng(seed)
    objective = _SubsetObjective(base.points, k)

    candidates = [np.sort(rng.choice(n, size=k, replace=False)) for _ in range(restarts)]
    start_values = [objective.squared(c) for c in candidates]
    start = candidates[int(np.argmin(start_values))]
    start_value = min(start_values)

    mask = np.zeros(n, dtype=bool)
    mask[start] = True
    selected = np.flatnonzero(mask)
    unselected = np.flatnonzero(~mask)
    row_sums = objective.M[:, selected].sum(axis=1)
    current = start_value

    probes = [
        abs(_root(current + objective.swap_delta(row_sums, selected[i], unselected[j])) - _root(current))
        for i, j in zip(rng.integers(k, size=100), rng.integers(n - k, size=100))
    ]
    threshold = float(np.median(probes))
    grad = -threshold / max(iters - 1, 1)

    best_value = current
    best = selected.copy()
    out_slots = rng.integers(k, size=iters)
    in_slots = rng.integers(n - k, size=iters)

    for step in range(iters):
        i, j = out_slots[step], in_slots[step]
        p, q = selected[i], unselected[j]
        delta_sq = objective.swap_delta(row_sums, p, q)
        delta = _root(current + delta_sq) - _root(current)
        if delta <= threshold:
            row_sums += objective.M[:, q] - objective.M[:, p]
            selected[i], unselected[j] = q, p
            current += delta_sq
            if current < best_value:
                best_value = current
                best = selected.copy()
        threshold = max(threshold + grad, 0.0)
        if (step + 1) % 5000 == 0:
            # refresh incremental sums
            row_sums = objective.M[:, selected].sum(axis=1)
            current = objective.squared(selected)

    best = np.sort(best)
    if objective.squared(best) > objective.squared(start):
        logger.warning("threshold accepting drifted above its start; returning the start subset")
        best = start

    logger.debug("ta_subset k=%d: start d2=%.6g best d2=%.6g", k, _root(start_value), _root(best_value))
    return PointSet(base.dim, base.points[best], GeneratorKind.OPTIMIZED, seed)


def best_random_subset_l2(base: PointSet, k: int, tries: int = 10, seed: int = 0) -> float:
    """Lowest L2 star discrepancy among `tries` random k-subsets of `base`"""
    if k > base.n:
        raise SpecError(f"k must be at most {base.n}")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(tries):
        chosen = np.sort(rng.choice(base.n, size=k, replace=False))
        values.append(l2_star(PointSet(base.dim, base.points[chosen], base.generator, base.seed)))
    return min(values)


def optimized_base_size(k: int, minimum: int = 512, factor: int = 8) -> int:
    """Size of the Sobol base an optimized k-point set is selected from"""
    return max(minimum, factor * k)
