"""Zero-noise extrapolation in the distribution parameter ``theta``."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfinv

from .ensemble import NoisyEstimator
from .noise import Gaussian, NoiseModel

__all__ = [
    "ZneResult",
    "BoundReport",
    "richardson_weights",
    "richardson_extrapolate",
    "weighted_polyfit",
    "loocv_residual",
    "loocv_select",
    "theorem1_bound",
    "zne_series",
    "transpose",
    "write_zne_csv",
    "write_bounds_csv",
]

log = logging.getLogger(__name__)


@dataclass
class ZneResult:
    estimate: float
    fit_std_err: float
    order: int
    coefficients: list[float]
    method: str
    zero_linear: bool = False
    time: float | None = None


@dataclass
class BoundReport:
    remainder: float
    projection: float
    total: float
    epsilon: float
    weights: list[float] = field(default_factory=list)
    node_remainders: list[float] = field(default_factory=list)
    node_projection: list[float] = field(default_factory=list)


def richardson_weights(thetas: Sequence[float]) -> np.ndarray:
    """Lagrange basis polynomials of the nodes evaluated at ``theta = 0``."""
    th = np.asarray(thetas, dtype=float)
    if th.ndim != 1 or th.size < 2:
        raise ValueError("Richardson extrapolation needs at least two nodes")
    if not np.all(np.isfinite(th)) or np.any(th <= 0):
        raise ValueError("Richardson nodes must be finite and positive")
    scale = np.max(th)
    gaps = np.abs(th[:, None] - th[None, :]) + np.eye(th.size) * scale
    if np.min(gaps) < 1e-12 * scale:
        raise ValueError("Richardson nodes must be distinct")
    gamma = np.empty(th.size)
    for i in range(th.size):
        others = np.delete(th, i)
        gamma[i] = np.prod(others / (others - th[i]))
    return gamma


def _check_common_time(estimators: Sequence[NoisyEstimator]) -> float | None:
    times = {e.time for e in estimators}
    if len(times) > 1:
        raise ValueError(f"estimators belong to different times {sorted(times)}")
    return times.pop() if times else None


def richardson_extrapolate(estimators: Sequence[NoisyEstimator]) -> ZneResult:
    t = _check_common_time(estimators)
    gamma = richardson_weights([e.theta for e in estimators])
    values = np.array([e.value for e in estimators])
    nus = np.array([e.std_err for e in estimators])
    return ZneResult(
        estimate=float(gamma @ values),
        fit_std_err=float(np.sqrt(np.sum(gamma**2 * nus**2))),
        order=len(estimators) - 1,
        coefficients=gamma.tolist(),
        method="richardson",
        time=t,
    )


def _powers(degree: int, zero_linear: bool) -> list[int]:
    return [p for p in range(degree + 1) if not (zero_linear and p == 1)]


def _weights(std_errs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Inverse-standard-error weights; unit weights unless every error is positive."""
    if np.all(std_errs > 0):
        return 1.0 / std_errs, True
    return np.ones_like(std_errs), False


def weighted_polyfit(
    thetas: Sequence[float],
    values: Sequence[float],
    std_errs: Sequence[float] | None,
    degree: int,
    zero_linear: bool = False,
) -> ZneResult:
    """Least-squares polynomial in ``theta`` returning its intercept.

    Minimizes ``sum(((value - p(theta)) / std_err)**2)``. With ``zero_linear``
    the ``theta**1`` coefficient is pinned to zero. The intercept error comes
    from the parameter covariance; without usable standard errors it is scaled
    by the reduced chi-square of the residuals.
    """
    th = np.asarray(thetas, dtype=float)
    y = np.asarray(values, dtype=float)
    nus = np.zeros_like(y) if std_errs is None else np.asarray(std_errs, dtype=float)
    powers = _powers(degree, zero_linear)
    if degree < 0 or len(powers) > th.size:
        raise ValueError(f"degree {degree} needs more than {th.size} points")
    scale = np.max(np.abs(th)) or 1.0
    design = (th[:, None] / scale) ** np.array(powers)[None, :]
    w, weighted = _weights(nus)
    a = design * w[:, None]
    b = y * w
    if np.linalg.matrix_rank(a) < len(powers):
        raise np.linalg.LinAlgError("rank-deficient design matrix")
    # SVD of the weighted design avoids squaring its condition number
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    coef = vt.T @ ((u.T @ b) / sv)
    cov = (vt.T / sv**2) @ vt
    dof = th.size - len(powers)
    if not weighted:
        resid = b - a @ coef
        cov = cov * (resid @ resid / dof if dof > 0 else 0.0)
    full = np.zeros(degree + 1)
    full[powers] = coef / scale ** np.array(powers)
    return ZneResult(
        estimate=float(coef[0]),
        fit_std_err=float(math.sqrt(max(cov[0, 0], 0.0))),
        order=degree,
        coefficients=full.tolist(),
        method="least_squares",
        zero_linear=zero_linear,
    )


def loocv_residual(thetas, values, std_errs, degree: int, zero_linear: bool = False) -> float:
    """Sum of squared, error-weighted leave-one-out prediction residuals."""
    th = np.asarray(thetas, dtype=float)
    y = np.asarray(values, dtype=float)
    nus = np.asarray(std_errs, dtype=float)
    w, _ = _weights(nus)
    total = 0.0
    for j in range(th.size):
        keep = np.arange(th.size) != j
        fit = weighted_polyfit(th[keep], y[keep], nus[keep] if np.all(nus > 0) else None, degree, zero_linear)
        pred = np.polynomial.polynomial.polyval(th[j], fit.coefficients)
        total += ((y[j] - pred) * w[j]) ** 2
    return float(total)


def _max_degree(n_points: int, zero_linear: bool) -> int:
    # each leave-one-out fit has n_points - 1 samples
    deg = n_points - 2
    while len(_powers(deg + 1, zero_linear)) <= n_points - 1:
        deg += 1
    return deg


def _select_degree(th, y, nus, max_degree: int, zero_linear: bool) -> int:
    w, _ = _weights(nus)
    # residuals this close count as ties and go to the lower degree
    atol = 1e-18 * float(np.sum((w * y) ** 2))
    best_deg, best_res = 0, math.inf
    for deg in range(max_degree + 1):
        if zero_linear and deg == 1:
            continue  # identical to degree 0 once the linear term is removed
        res = loocv_residual(th, y, nus, deg, zero_linear)
        if best_res == math.inf or res < best_res - 1e-9 * best_res - atol:
            best_deg, best_res = deg, res
    return best_deg


def loocv_select(
    dataset: Sequence[Sequence[NoisyEstimator]],
    max_degree: int | None = None,
    zero_linear: bool = False,
) -> tuple[list[int], list[int], tuple[float, float]]:
    """Leave-one-out degree selection smoothed by a linear trend in time.

    ``dataset[k]`` holds the estimators for time ``k``. Returns the final
    per-time orders, the raw per-time LOOCV minimizers and the
    ``(slope, intercept)`` of the degree-vs-time fit.
    """
    if not dataset:
        raise ValueError("empty dataset")
    n = min(len(group) for group in dataset)
    if n < 3:
        raise ValueError("LOOCV needs at least three estimators per time")
    limit = _max_degree(n, zero_linear)
    if max_degree is None:
        max_degree = limit
    if max_degree > limit:
        raise ValueError(f"max_degree {max_degree} exceeds what {n} points support ({limit})")
    times, raw = [], []
    for group in dataset:
        th = np.array([e.theta for e in group])
        y = np.array([e.value for e in group])
        nus = np.array([e.std_err for e in group])
        raw.append(_select_degree(th, y, nus, max_degree, zero_linear))
        times.append(group[0].time)
    times = np.asarray(times, dtype=float)
    raw_arr = np.asarray(raw, dtype=float)
    if times.size > 1 and np.ptp(times) > 0:
        slope, intercept = np.polyfit(times, raw_arr, 1)
    else:
        slope, intercept = 0.0, float(raw_arr.mean())
    trend = slope * times + intercept
    final = np.ceil(trend - 1e-9).astype(int)
    clamped = np.clip(final, 0, max_degree)
    if np.any(clamped != final):
        log.info("LOOCV trend clamped to [0, %d] at %d times", max_degree, int(np.sum(clamped != final)))
    return clamped.tolist(), raw, (float(slope), float(intercept))


def theorem1_bound(
    model: NoiseModel,
    t: float,
    v_norm: float,
    o_norm: float,
    thetas: Sequence[float],
    nus: Sequence[float] | None = None,
    epsilon: float = 0.05,
) -> BoundReport:
    """Worst-case error of Richardson extrapolation over ``thetas``.

    Each node contributes ``|gamma_i| (R_i + c_i)`` where ``R_i`` bounds the
    truncated Dyson remainder through the ``(r+1)``-th absolute moment of the
    node's distribution and ``c_i = sqrt(2) nu_i erfinv(1 - epsilon)`` bounds
    projection noise with probability ``1 - epsilon``. Gaussian nodes use the
    sharper even-order remainder available when extrapolating in the variance.
    """
    if not 0 < epsilon < 1:
        raise ValueError("failure probability epsilon must lie in (0, 1)")
    th = np.asarray(thetas, dtype=float)
    nus = np.zeros_like(th) if nus is None else np.asarray(nus, dtype=float)
    if nus.shape != th.shape:
        raise ValueError("need one standard error per node")
    order = th.size  # r + 1
    if th.size == 1:
        gamma = np.ones(1)
    else:
        gamma = richardson_weights(th)
    remainders = []
    for theta in th:
        node = model.with_theta(float(theta))
        if isinstance(node, Gaussian):
            x = node.variance * (2.0 * t) ** 2 * v_norm**2
            r_i = o_norm * x**order / _double_factorial(2 * order)
        else:
            r_i = o_norm * (2.0 * t * v_norm) ** order * node.abs_moment_bound(order) / math.factorial(order)
        remainders.append(r_i)
    remainders = np.asarray(remainders)
    c = math.sqrt(2.0) * nus * erfinv(1.0 - epsilon)
    rem_total = float(np.sum(np.abs(gamma) * remainders))
    proj_total = float(np.sum(np.abs(gamma) * c))
    return BoundReport(
        remainder=rem_total,
        projection=proj_total,
        total=rem_total + proj_total,
        epsilon=epsilon,
        weights=gamma.tolist(),
        node_remainders=remainders.tolist(),
        node_projection=c.tolist(),
    )


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def zne_series(
    dataset: Sequence[Sequence[NoisyEstimator]],
    method: str = "loocv",
    degree: int | None = None,
    zero_linear: bool = False,
    max_degree: int | None = None,
) -> list[ZneResult]:
    """Extrapolate every time slice; ``method`` is richardson, least_squares or loocv."""
    thetas = [tuple(e.theta for e in group) for group in dataset]
    if len(set(thetas)) > 1:
        raise ValueError("theta grids differ between times")
    results = []
    if method == "richardson":
        return [richardson_extrapolate(group) for group in dataset]
    if method == "least_squares":
        if degree is None:
            raise ValueError("least_squares needs a degree")
        orders = [degree] * len(dataset)
    elif method == "loocv":
        orders, _, _ = loocv_select(dataset, max_degree, zero_linear)
    else:
        raise ValueError(f"unknown extrapolation method {method!r}")
    for group, order in zip(dataset, orders):
        _check_common_time(group)
        res = weighted_polyfit(
            [e.theta for e in group],
            [e.value for e in group],
            [e.std_err for e in group],
            order,
            zero_linear,
        )
        res.time = group[0].time
        if method == "loocv":
            res.method = "loocv"
        results.append(res)
    return results


def transpose(per_node: Sequence[Sequence[NoisyEstimator]]) -> list[list[NoisyEstimator]]:
    """Turn ``[node][time]`` estimator lists into ``[time][node]``."""
    return [list(group) for group in zip(*per_node)]


def write_zne_csv(path, results: Sequence[ZneResult], extra: dict | None = None):
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("time", "estimate", "fit_std_err", "order", "method") + tuple(extra))
        for r in results:
            tag = r.method
            if r.method != "richardson" and r.zero_linear:
                tag += "+zero_linear"
            writer.writerow(
                [repr(r.time), repr(r.estimate), repr(r.fit_std_err), r.order, tag]
                + [repr(f(r)) for f in extra.values()]
            )


def write_bounds_csv(path, rows: Sequence[tuple[float, int, BoundReport]], extra: dict | None = None):
    """Write bound reports; ``extra`` maps column name to one value per row."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("time", "theta_count", "R_total", "projection_total", "total", "epsilon") + tuple(extra))
        for k, (t, count, rep) in enumerate(rows):
            writer.writerow(
                [repr(t), count, repr(rep.remainder), repr(rep.projection), repr(rep.total), repr(rep.epsilon)]
                + [repr(float(col[k])) for col in extra.values()]
            )
