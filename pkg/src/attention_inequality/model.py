"""Follower dynamics driven by attention.

A user with ``f`` followers, receiving ``r`` retweets and ``m`` mentions per
period, gains followers from the ``N - f`` non-followers with probability

    P+ = w1 * r**alpha + w2 * m**beta

and loses each current follower with probability

    P- = w3 * r**(-theta).

Time is measured in periods of four days.  Probabilities are clamped to
``[0, 1]`` wherever they are used as probabilities; the closed-form
trajectory keeps the raw signed rates because they sit inside exponentials.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import BadStep, NonFiniteResult

TIME_UNIT_DAYS = 4
TIME_UNIT_SECONDS = TIME_UNIT_DAYS * 86400

# Smallest retweet count fed to r**(-theta); keeps P- finite at r = 0.
R_FLOOR = 1.0

QUINTILES = ("Q1", "Q2", "Q3", "Q4", "Q5")

# Fitted values reported for the three top quintiles.  N is not part of the
# table and must be supplied by the caller.
PUBLISHED_ROWS = {
    "Q1": dict(alpha=0.634, beta=0.865, theta=0.129, w1=0.00215, w2=0.00038, w3=0.00836, C=8546.0),
    "Q2": dict(alpha=1.0145, beta=0.0, theta=-0.730, w1=0.0, w2=0.00030, w3=-0.00135, C=754.0),
    "Q3": dict(alpha=0.448, beta=1.141, theta=-0.020, w1=0.00006, w2=0.0, w3=-300.0, C=-9.0),
}
PUBLISHED_RMSE = {"Q1": 52800.0, "Q2": 406.0, "Q3": 334.0}


def model_time(seconds: ArrayLike, unit_seconds: float = TIME_UNIT_SECONDS) -> np.ndarray:
    """Convert elapsed seconds into model time units."""
    return np.asarray(seconds, dtype=np.float64) / unit_seconds


class _KeyValueMixin:
    """Flat ``name=value`` and JSON serialisation shared by parameter records.

    Floats are written with ``repr`` (shortest round-trip form), so a
    write/read cycle is bit-exact.
    """

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_kv(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_dict(cls, d: dict[str, Any]):
        kwargs = {}
        for f in fields(cls):
            if f.name in d:
                kwargs[f.name] = _coerce(f.type, d[f.name])
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown fields for {cls.__name__}: {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_kv(cls, text: str):
        d = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected name=value, got {line!r}")
            k, v = line.split("=", 1)
            d[k.strip()] = v.strip()
        return cls.from_dict(d)

    @classmethod
    def loads(cls, text: str):
        """Parse either JSON or key-value text."""
        return cls.from_json(text) if text.lstrip().startswith("{") else cls.from_kv(text)


def _fmt(v: Any) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _coerce(typ: Any, v: Any) -> Any:
    name = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    if name == "float":
        return float(v)
    if name == "int":
        if isinstance(v, str):
            return int(v)
        if isinstance(v, float) and not v.is_integer():
            raise ValueError(f"expected an integer, got {v!r}")
        return int(v)
    return str(v)


@dataclass(frozen=True)
class ModelParams(_KeyValueMixin):
    alpha: float
    beta: float
    theta: float
    w1: float
    w2: float
    w3: float
    C: float
    N: int
    quintile_label: str = "Q1"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"population size N must be >= 1, got {self.N}")

    @classmethod
    def published(cls, label: str, N: int) -> ModelParams:
        """Published coefficients for quintile ``label`` (Q1-Q3) with population ``N``."""
        try:
            row = PUBLISHED_ROWS[label]
        except KeyError:
            raise KeyError(f"no published parameters for {label!r}; have {sorted(PUBLISHED_ROWS)}") from None
        return cls(**row, N=int(N), quintile_label=label)

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class ProxyParams(_KeyValueMixin):
    """Coefficients of ``r = a f**b + c p**d`` and ``m = a_m exp(b_m f)``."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    a_m: float = 0.0
    b_m: float = 0.0


@dataclass(frozen=True)
class AttentionState:
    f0: float
    r: float = 0.0
    m: float = 0.0
    p: float = 0.0

    def __post_init__(self):
        if min(self.f0, self.r, self.m, self.p) < 0:
            raise ValueError("attention state values must be nonnegative")


class TrajectoryPoint(NamedTuple):
    t: float
    f: float


def _pow(base: ArrayLike, exponent: float) -> np.ndarray:
    # numpy already gives 0**0 == 1 and 0**e == 0 for e > 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.power(np.asarray(base, dtype=np.float64), exponent)


def gain_rate(params: ModelParams, r: ArrayLike, m: ArrayLike) -> np.ndarray:
    """Unclamped ``w1 r**alpha + w2 m**beta``, elementwise."""
    return params.w1 * _pow(r, params.alpha) + params.w2 * _pow(m, params.beta)


def loss_rate(params: ModelParams, r: ArrayLike) -> np.ndarray:
    """Unclamped ``w3 * max(r, 1)**(-theta)``, elementwise."""
    r_eff = np.maximum(np.asarray(r, dtype=np.float64), R_FLOOR)
    return params.w3 * _pow(r_eff, -params.theta)


def gain_probabilities(params: ModelParams, r: ArrayLike, m: ArrayLike) -> np.ndarray:
    return np.clip(np.nan_to_num(gain_rate(params, r, m), nan=0.0, posinf=1.0), 0.0, 1.0)


def loss_probabilities(params: ModelParams, r: ArrayLike) -> np.ndarray:
    return np.clip(np.nan_to_num(loss_rate(params, r), nan=0.0, posinf=1.0), 0.0, 1.0)


def gain_probability(params: ModelParams, state: AttentionState) -> float:
    return float(gain_probabilities(params, state.r, state.m))


def loss_probability(params: ModelParams, state: AttentionState) -> float:
    return float(loss_probabilities(params, state.r))


def follower_trajectory_closed(params: ModelParams, state: AttentionState, t: float) -> TrajectoryPoint:
    """Closed-form follower count at time ``t``.

    ``f(t) = f0 + C exp(b t) - C exp(lam t) - b N t`` with
    ``b = -(w1 r**alpha + w2 m**beta)`` and ``lam = w3 max(r, 1)**(-theta)``.
    The expression is evaluated as written, with signed rates and no
    clamping of the result.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    b = -float(gain_rate(params, state.r, state.m))
    lam = float(loss_rate(params, state.r))
    try:
        f = state.f0 + params.C * math.exp(b * t) - params.C * math.exp(lam * t) - b * params.N * t
    except OverflowError:
        raise NonFiniteResult(f"closed-form trajectory overflowed at t={t}") from None
    if not math.isfinite(f):
        raise NonFiniteResult(f"closed-form trajectory is not finite at t={t}")
    return TrajectoryPoint(float(t), f)


def closed_form_curve(params: ModelParams, state: AttentionState, times: ArrayLike) -> np.ndarray:
    """Vectorised :func:`follower_trajectory_closed` over an array of times."""
    t = np.asarray(times, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("times must be >= 0")
    b = -float(gain_rate(params, state.r, state.m))
    lam = float(loss_rate(params, state.r))
    with np.errstate(over="ignore", invalid="ignore"):
        f = state.f0 + params.C * np.exp(b * t) - params.C * np.exp(lam * t) - b * params.N * t
    if not np.all(np.isfinite(f)):
        bad = float(t[~np.isfinite(f)].min())
        raise NonFiniteResult(f"closed-form trajectory is not finite from t={bad}")
    return f


def closed_form_slope0(params: ModelParams, state: AttentionState) -> float:
    """Analytic d/dt of the closed form at t = 0."""
    b = -float(gain_rate(params, state.r, state.m))
    lam = float(loss_rate(params, state.r))
    return params.C * b - params.C * lam - b * params.N


def follower_rhs(f: float, n: int, p_plus: float, p_minus: float) -> float:
    """``df/dt = (N - f) P+ - f P-``."""
    return (n - f) * p_plus - f * p_minus


def follower_trajectory_ode(
    params: ModelParams, state: AttentionState, t_end: float, dt: float
) -> list[TrajectoryPoint]:
    """Integrate the gain/loss rate equation with fixed-step RK4.

    Probabilities are clamped and held constant over the horizon.  The last
    step is shortened so the final point lands exactly on ``t_end``.
    """
    if not dt > 0:
        raise BadStep(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    n = params.N
    if not 0 <= state.f0 <= n:
        raise ValueError(f"f0={state.f0} outside [0, N={n}]")
    pp = gain_probability(params, state)
    pm = loss_probability(params, state)

    def rhs(f):
        return follower_rhs(f, n, pp, pm)

    n_steps = max(0, math.ceil(t_end / dt - 1e-9))
    t, f = 0.0, float(state.f0)
    out = [TrajectoryPoint(t, f)]
    for i in range(n_steps):
        h = min(dt, t_end - t) if i == n_steps - 1 else dt
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * h * k1)
        k3 = rhs(f + 0.5 * h * k2)
        k4 = rhs(f + h * k3)
        f = f + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        # RK4 stays between f and the fixed point for h*(P+ + P-) < 2.78;
        # the clip only matters for absurd step sizes
        f = min(max(f, 0.0), float(n))
        t = t_end if i == n_steps - 1 else (i + 1) * dt
        out.append(TrajectoryPoint(t, f))
    return out


def retweet_count(proxy: ProxyParams, f: ArrayLike, p: ArrayLike):
    """``a f**b + c p**d``; scalar in, scalar out."""
    out = proxy.a * _pow(f, proxy.b) + proxy.c * _pow(p, proxy.d)
    return float(out) if np.ndim(out) == 0 else out


def mention_count(proxy: ProxyParams, f: ArrayLike):
    """``a_m exp(b_m f)``; raises :class:`NonFiniteResult` on overflow."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = proxy.a_m * np.exp(proxy.b_m * np.asarray(f, dtype=np.float64))
    if not np.all(np.isfinite(out)):
        raise NonFiniteResult("mention proxy overflowed")
    return float(out) if np.ndim(out) == 0 else out


def published_params_all(N: int) -> dict[str, ModelParams]:
    return {q: ModelParams.published(q, N) for q in PUBLISHED_ROWS}
