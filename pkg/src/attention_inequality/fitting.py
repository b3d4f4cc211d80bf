"""Quintile stratification and regression estimates of model parameters.

Two-term power laws ``y ~ c1 x1**e1 + c2 x2**e2`` are fitted in two stages:
a fixed grid over the exponents with the (nonnegative) linear coefficients
solved exactly at every grid point, then a bounded Nelder-Mead polish of the
exponents with the coefficients profiled out.  Nothing is randomised, so
results depend only on the input.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import minimize

from .errors import (
    DegenerateData,
    EmptyInput,
    LengthMismatch,
    NoConvergenceWarning,
    TooFewUsers,
)
from .ingest import UserWindow, empirical_transition_probs
from .model import QUINTILES, ModelParams, ProxyParams, closed_form_curve, AttentionState, gain_rate, loss_rate

MIN_SAMPLES = 20
EXPONENT_STEP = 0.05
GAIN_EXPONENT_BOUNDS = (0.0, 2.0)
LOSS_EXPONENT_BOUNDS = (-2.0, 2.0)
POLISH_MAXITER = 500
POLISH_FATOL = 1e-9
POLISH_XATOL = 1e-9
LOW_CONFIDENCE = ("Q4", "Q5")


def evaluate_rmse(predicted: ArrayLike, actual: ArrayLike) -> float:
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size != a.size:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} observations")
    if p.size == 0:
        raise EmptyInput("nothing to compare")
    return float(np.sqrt(np.mean((p - a) ** 2)))


# -- quintiles ---------------------------------------------------------------


@dataclass(frozen=True)
class QuintileTable:
    members: dict[str, list[Hashable]]
    mean_followers: dict[str, float]
    mean_statuses: dict[str, float]

    def label_of(self, user_id: Hashable) -> str:
        for q, ids in self.members.items():
            if user_id in ids:
                return q
        raise KeyError(user_id)

    def labels(self) -> dict[Hashable, str]:
        return {u: q for q, ids in self.members.items() for u in ids}


def quintile_sizes(n: int) -> list[int]:
    """Five near-equal group sizes, larger groups first."""
    base, extra = divmod(n, 5)
    return [base + (1 if i < extra else 0) for i in range(5)]


def assign_quintiles(users: Iterable[tuple[Hashable, float, float]]) -> QuintileTable:
    """Split ``(id, followers, statuses)`` triples into follower quintiles.

    Users are ranked by followers, descending, ties broken by id ascending;
    Q1 holds the top fifth.
    """
    users = list(users)
    if len(users) < 5:
        raise TooFewUsers(f"need at least 5 users, got {len(users)}")
    ranked = sorted(users, key=lambda u: (-u[1], u[0]))
    members, mean_f, mean_s = {}, {}, {}
    start = 0
    for q, size in zip(QUINTILES, quintile_sizes(len(ranked))):
        chunk = ranked[start:start + size]
        start += size
        members[q] = [u[0] for u in chunk]
        mean_f[q] = float(np.mean([u[1] for u in chunk]))
        mean_s[q] = float(np.mean([u[2] for u in chunk]))
    return QuintileTable(members, mean_f, mean_s)


# -- reports -----------------------------------------------------------------


@dataclass
class FitReport:
    params: Any
    rmse: float
    n_samples: int
    converged: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        p = self.params.to_dict() if hasattr(self.params, "to_dict") else dict(self.params)
        out = {"params": p, "rmse": self.rmse, "n_samples": self.n_samples, "converged": self.converged}
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


# -- two-term power fits -----------------------------------------------------


def _grid(lo: float, hi: float, step: float = EXPONENT_STEP) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 10)


def _pow(x: np.ndarray, e) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.power(x, e)


def _best_nonneg_pair(X1, X2, y):
    """Exact 2-variable NNLS by enumerating active sets; returns (c1, c2, sse)."""
    best = (0.0, 0.0, float(y @ y))
    for cols in ((0,), (1,), (0, 1)):
        A = np.column_stack([(X1, X2)[c] for c in cols])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        if np.any(coef < 0) or not np.all(np.isfinite(coef)):
            continue
        sse = float(np.sum((A @ coef - y) ** 2))
        if sse < best[2]:
            c = [0.0, 0.0]
            for i, col in enumerate(cols):
                c[col] = float(coef[i])
            best = (c[0], c[1], sse)
    return best


def _grid_pair(x1, x2, y, grid1, grid2):
    """Vectorised NNLS over every exponent pair via normal equations."""
    P1 = np.stack([_pow(x1, e) for e in grid1])
    P2 = np.stack([_pow(x2, e) for e in grid2])
    g11 = np.einsum("ij,ij->i", P1, P1)[:, None]
    g22 = np.einsum("ij,ij->i", P2, P2)[None, :]
    g12 = P1 @ P2.T
    b1 = (P1 @ y)[:, None]
    b2 = (P2 @ y)[None, :]
    yy = float(y @ y)

    c1s = np.maximum(b1 / np.where(g11 > 0, g11, np.inf), 0.0)
    c2s = np.maximum(b2 / np.where(g22 > 0, g22, np.inf), 0.0)
    sse1 = yy - 2 * c1s * b1 + c1s**2 * g11
    sse2 = yy - 2 * c2s * b2 + c2s**2 * g22
    det = g11 * g22 - g12**2
    ok = det > 1e-12 * g11 * g22
    safe = np.where(ok, det, 1.0)
    c1 = (b1 * g22 - g12 * b2) / safe
    c2 = (g11 * b2 - g12 * b1) / safe
    ok &= (c1 >= 0) & (c2 >= 0)
    sse_full = np.where(ok, yy - c1 * b1 - c2 * b2, np.inf)
    sse = np.minimum(np.minimum(sse1, sse2), sse_full)
    sse = np.where(np.isfinite(sse), sse, np.inf)
    i, j = np.unravel_index(int(np.argmin(sse)), sse.shape)
    return float(grid1[i]), float(grid2[j])


def _simplex(x0: np.ndarray, lo: float, hi: float, step: float) -> np.ndarray:
    pts = [x0]
    for k in range(x0.size):
        v = x0.copy()
        v[k] = v[k] + step if v[k] + step <= hi else v[k] - step
        pts.append(v)
    return np.array(pts)


def _polish(objective, x0: np.ndarray, bounds: tuple[float, float]):
    lo, hi = bounds
    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=[bounds] * x0.size,
        options={
            "maxiter": POLISH_MAXITER,
            "fatol": POLISH_FATOL,
            "xatol": POLISH_XATOL,
            "initial_simplex": _simplex(x0, lo, hi, EXPONENT_STEP),
        },
    )
    return res


@dataclass(frozen=True)
class PowerPairFit:
    e1: float
    e2: float
    c1: float
    c2: float
    rmse: float
    converged: bool


def fit_power_pair(
    x1: ArrayLike, x2: ArrayLike, y: ArrayLike, bounds: tuple[float, float] = GAIN_EXPONENT_BOUNDS
) -> PowerPairFit:
    """Fit ``y ~ c1 x1**e1 + c2 x2**e2`` with ``c1, c2 >= 0``.

    A regressor that is identically zero cannot be identified; its term is
    dropped (coefficient and exponent reported as 0).
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    use1, use2 = bool(np.any(x1 != 0)), bool(np.any(x2 != 0))
    if not (use1 or use2):
        raise DegenerateData("both regressors are identically zero")
    grid = _grid(*bounds)

    def solve(e1, e2):
        X1 = _pow(x1, e1) if use1 else np.zeros(n)
        X2 = _pow(x2, e2) if use2 else np.zeros(n)
        return _best_nonneg_pair(X1, X2, y)

    if use1 and use2:
        e = np.array(_grid_pair(x1, x2, y, grid, grid))
    elif use1:
        e = np.array([_grid_pair(x1, np.zeros(n), y, grid, grid[:1])[0]])
    else:
        e = np.array([_grid_pair(np.zeros(n), x2, y, grid[:1], grid)[1]])

    def unpack(v):
        if use1 and use2:
            return float(v[0]), float(v[1])
        return (float(v[0]), 0.0) if use1 else (0.0, float(v[0]))

    def objective(v):
        return math.sqrt(solve(*unpack(v))[2] / n)

    res = _polish(objective, e, bounds)
    converged = bool(res.success)
    if converged and res.fun <= objective(e):
        e = np.asarray(res.x)
    elif not converged:
        warnings.warn(
            f"polish stopped after {res.nit} iterations; keeping grid estimate", NoConvergenceWarning, stacklevel=3
        )
    e1, e2 = unpack(e)
    c1, c2, sse = solve(e1, e2)
    return PowerPairFit(e1, e2, c1, c2, math.sqrt(sse / n), converged)


def fit_gain_params(samples: Iterable[tuple[float, float, float]]) -> FitReport:
    """Fit ``P+ ~ w1 r**alpha + w2 m**beta`` to ``(r, m, P+)`` samples."""
    arr = np.asarray(list(samples), dtype=np.float64).reshape(-1, 3)
    if arr.shape[0] < MIN_SAMPLES:
        raise DegenerateData(f"need at least {MIN_SAMPLES} samples, got {arr.shape[0]}")
    r, m, p = arr.T
    fit = fit_power_pair(r, m, p, GAIN_EXPONENT_BOUNDS)
    params = {"alpha": fit.e1, "beta": fit.e2, "w1": fit.c1, "w2": fit.c2}
    return FitReport(params, fit.rmse, arr.shape[0], fit.converged)


def fit_loss_params(samples: Iterable[tuple[float, float]]) -> FitReport:
    """Fit ``P- ~ w3 r**(-theta)`` to ``(r, P-)`` samples with ``r >= 1``.

    Strictly positive data go through a log-log linear regression, which is
    exact for noiseless input.  Otherwise (zeros, or signed values) the grid
    plus polish scheme is used with an unconstrained, possibly negative, w3.
    """
    arr = np.asarray(list(samples), dtype=np.float64).reshape(-1, 2)
    n = arr.shape[0]
    if n < MIN_SAMPLES:
        raise DegenerateData(f"need at least {MIN_SAMPLES} samples, got {n}")
    r, p = arr.T
    if np.any(r < 1):
        raise DegenerateData("loss samples need r >= 1")
    if np.ptp(r) == 0:
        raise DegenerateData("all samples share one retweet count; theta is unidentifiable")

    if np.all(p > 0):
        slope, intercept = np.polyfit(np.log(r), np.log(p), 1)
        theta, w3 = -float(slope), float(math.exp(intercept))
        rmse = evaluate_rmse(w3 * r ** (-theta), p)
        return FitReport({"theta": theta, "w3": w3}, rmse, n, True, {"method": "log-log"})

    def solve(theta):
        x = _pow(r, -theta)
        xx = float(x @ x)
        w = float(x @ p) / xx if xx > 0 else 0.0
        return w, float(np.sum((w * x - p) ** 2))

    grid = _grid(*LOSS_EXPONENT_BOUNDS)
    sse = [solve(t)[1] for t in grid]
    t0 = np.array([grid[int(np.argmin(sse))]])
    res = _polish(lambda v: math.sqrt(solve(float(v[0]))[1] / n), t0, LOSS_EXPONENT_BOUNDS)
    converged = bool(res.success)
    theta = float(res.x[0]) if converged else float(t0[0])
    if not converged:
        warnings.warn("loss polish hit its iteration cap; keeping grid estimate", NoConvergenceWarning, stacklevel=2)
    w3, s = solve(theta)
    return FitReport({"theta": theta, "w3": w3}, math.sqrt(s / n), n, converged, {"method": "grid"})


def fit_proxy_models(windows: Sequence[UserWindow]) -> tuple[FitReport, FitReport]:
    """Fit the retweet proxy ``r = a f**b + c p**d`` and mention proxy ``m = a_m exp(b_m f)``.

    The mention proxy is a log-linear regression on windows with ``m > 0``;
    the rest are excluded and counted in ``extra["n_excluded"]``.
    """
    ws = list(windows)
    if len(ws) < MIN_SAMPLES:
        raise DegenerateData(f"need at least {MIN_SAMPLES} windows, got {len(ws)}")
    f = np.array([w.f_start for w in ws], dtype=np.float64)
    p = np.array([w.p for w in ws], dtype=np.float64)
    r = np.array([w.r for w in ws], dtype=np.float64)
    m = np.array([w.m for w in ws], dtype=np.float64)

    rt = fit_power_pair(f, p, r, GAIN_EXPONENT_BOUNDS)
    retweet = FitReport({"a": rt.c1, "b": rt.e1, "c": rt.c2, "d": rt.e2}, rt.rmse, len(ws), rt.converged)

    pos = m > 0
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise DegenerateData("no window has a positive mention count")
    fm, lm = f[pos], np.log(m[pos])
    if n_pos >= 2 and np.ptp(fm) > 0:
        b_m, log_a = np.polyfit(fm, lm, 1)
    else:
        b_m, log_a = 0.0, float(lm.mean())
    a_m, b_m = float(math.exp(log_a)), float(b_m)
    with np.errstate(over="ignore"):
        pred = a_m * np.exp(b_m * fm)
    mention = FitReport(
        {"a_m": a_m, "b_m": b_m},
        evaluate_rmse(pred, m[pos]),
        n_pos,
        True,
        {"n_excluded": len(ws) - n_pos},
    )
    return retweet, mention


def proxy_from_reports(retweet: FitReport, mention: FitReport) -> ProxyParams:
    return ProxyParams(**retweet.params, **mention.params)


# -- integration constant and full quintile fit -----------------------------


@dataclass(frozen=True)
class ObservedTrajectory:
    state: AttentionState
    times: np.ndarray
    followers: np.ndarray


def fit_integration_constant(params: ModelParams, trajectories: Sequence[ObservedTrajectory]) -> tuple[float, float]:
    """Least-squares C with every other parameter frozen; returns ``(C, rmse)``.

    The closed form is affine in C, ``f(t) - f0 + b N t = C (exp(b t) - exp(lam t))``,
    so the estimate is a single ratio of sums.
    """
    xs, ys = [], []
    for tr in trajectories:
        b = -float(gain_rate(params, tr.state.r, tr.state.m))
        lam = float(loss_rate(params, tr.state.r))
        t = np.asarray(tr.times, dtype=np.float64)
        with np.errstate(over="ignore", invalid="ignore"):
            x = np.exp(b * t) - np.exp(lam * t)
        y = np.asarray(tr.followers, dtype=np.float64) - tr.state.f0 + b * params.N * t
        ok = np.isfinite(x) & np.isfinite(y)
        xs.append(x[ok])
        ys.append(y[ok])
    if not xs:
        raise DegenerateData("no trajectories to fit C")
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if x.size == 0:
        raise DegenerateData("no finite trajectory points")
    xx = float(x @ x)
    C = float(x @ y) / xx if xx > 0 else 0.0
    return C, float(np.sqrt(np.mean((C * x - y) ** 2)))


def _user_trajectories(windows: Sequence[UserWindow]) -> list[ObservedTrajectory]:
    by_user: dict[str, list[UserWindow]] = defaultdict(list)
    for w in windows:
        by_user[w.user_id].append(w)
    out = []
    for uid in sorted(by_user):
        ws = sorted(by_user[uid], key=lambda w: w.window_index)
        k0 = ws[0].window_index
        state = AttentionState(
            f0=ws[0].f_start,
            r=float(np.mean([w.r for w in ws])),
            m=float(np.mean([w.m for w in ws])),
            p=float(np.mean([w.p for w in ws])),
        )
        out.append(
            ObservedTrajectory(
                state,
                np.array([w.window_index - k0 for w in ws], dtype=np.float64),
                np.array([w.f_start for w in ws], dtype=np.float64),
            )
        )
    return out


def fit_quintile(windows: Sequence[UserWindow], N: int, label: str) -> FitReport:
    """Estimate a full :class:`ModelParams` from one quintile's windows.

    Gain and loss exponents come from the per-window empirical probabilities;
    C is fitted last against the users' observed follower series.  The
    report's ``rmse`` is that of the follower series under the final model.
    """
    ws = list(windows)
    samples = empirical_transition_probs(ws, N)
    r, m, pp = samples.gain_samples()
    gain = fit_gain_params(np.column_stack([r, m, pp]))
    lr, pm = samples.loss_samples()
    loss = fit_loss_params(np.column_stack([np.maximum(lr, 1.0), pm]))
    partial = ModelParams(
        alpha=gain.params["alpha"],
        beta=gain.params["beta"],
        theta=loss.params["theta"],
        w1=gain.params["w1"],
        w2=gain.params["w2"],
        w3=loss.params["w3"],
        C=0.0,
        N=int(N),
        quintile_label=label,
    )
    trajs = _user_trajectories(ws)
    C, _ = fit_integration_constant(partial, trajs)
    params = partial.with_(C=C)
    pred, obs = [], []
    for tr in trajs:
        with np.errstate(over="ignore"):
            pred.append(closed_form_curve(params, tr.state, tr.times))
        obs.append(tr.followers)
    rmse = evaluate_rmse(np.concatenate(pred), np.concatenate(obs))
    return FitReport(
        params,
        rmse,
        len(ws),
        gain.converged and loss.converged,
        {
            "gain_rmse": gain.rmse,
            "loss_rmse": loss.rmse,
            "n_users": len(trajs),
            "n_skipped_gain": samples.n_skipped_plus,
            "low_confidence": label in LOW_CONFIDENCE,
        },
    )


def quintiles_from_windows(windows: Sequence[UserWindow]) -> QuintileTable:
    """Rank users by followers at their first window; statuses are summed tweets."""
    first: dict[str, tuple[int, float]] = {}
    tweets: dict[str, float] = defaultdict(float)
    for w in windows:
        if w.user_id not in first or w.window_index < first[w.user_id][0]:
            first[w.user_id] = (w.window_index, w.f_start)
        tweets[w.user_id] += w.p
    return assign_quintiles((u, first[u][1], tweets[u]) for u in sorted(first))
