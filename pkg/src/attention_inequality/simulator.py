"""Seeded agent-based simulation of attention-driven follower dynamics.

Each step every user tweets ``p ~ LogNormal(mu, sigma)`` times, receives
``r`` retweets and ``m`` mentions from the proxy models, then gains
``Binomial(N - 1 - f, P+)`` followers and loses ``Binomial(f, P-)``.  Only
in-degrees are tracked.

Random numbers come from a counter-based SplitMix64 hash.  The uniform for
draw ``j`` of user ``i`` at step ``k`` is a pure function of
``(seed, k, i, j)``::

    key = mix(mix(mix(seed) ^ k) ^ i)
    u   = ((mix(key + (j + 1) * GOLDEN) >> 11) + 0.5) / 2**53

and is turned into a variate by inverse-CDF sampling.  Step 0 holds the
initial follower draws.  Because no state is shared between users, any
partition of the users across workers gives bit-identical results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, NamedTuple

import numpy as np
from scipy.stats import binom, norm

from .errors import BadConfig
from .fitting import quintile_sizes
from .inequality import gini, top_share
from .model import (
    PUBLISHED_ROWS,
    QUINTILES,
    ModelParams,
    ProxyParams,
    gain_probabilities,
    loss_probabilities,
    mention_count,
    retweet_count,
)

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

DRAW_INIT = 0
DRAW_TWEETS = 0
DRAW_GAINS = 1
DRAW_LOSSES = 2


def mix64(x) -> np.ndarray:
    """SplitMix64 finaliser over uint64 arrays (wrapping arithmetic)."""
    z = np.array(x, dtype=np.uint64, ndmin=1) + GOLDEN
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class StreamRNG:
    """Per-(step, user) substreams derived from a 64-bit seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._root = mix64(self.seed)

    def keys(self, step: int, users: np.ndarray) -> np.ndarray:
        k = mix64(self._root ^ np.uint64(step))
        return mix64(k ^ np.asarray(users, dtype=np.uint64))

    def uniforms(self, step: int, users: np.ndarray, draw: int) -> np.ndarray:
        keys = self.keys(step, users)
        with np.errstate(over="ignore"):
            z = mix64(keys + np.uint64(draw + 1) * GOLDEN)
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class LogNormal:
    mu: float = 0.0
    sigma: float = 1.0

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.exp(self.mu + self.sigma * norm.ppf(u))


@dataclass(frozen=True)
class TruncatedPareto:
    """Pareto(shape, scale) restricted to ``[scale, upper]``."""

    shape: float = 1.16
    scale: float = 10.0

    def ppf(self, u: np.ndarray, upper: float) -> np.ndarray:
        cdf_upper = 1.0 - (self.scale / upper) ** self.shape
        return self.scale * (1.0 - u * cdf_upper) ** (-1.0 / self.shape)


@dataclass(frozen=True)
class SimConfig:
    n_users: int
    n_steps: int
    seed: int
    class_params: Mapping[str, ModelParams]
    activity: LogNormal = LogNormal()
    initial_followers: TruncatedPareto = TruncatedPareto()
    proxy: ProxyParams = ProxyParams()

    def validate(self) -> None:
        if self.n_users < 5:
            raise BadConfig(f"n_users must be >= 5, got {self.n_users}")
        if self.n_steps < 0:
            raise BadConfig(f"n_steps must be >= 0, got {self.n_steps}")
        if not 0 <= self.seed < 2**64:
            raise BadConfig("seed must be a 64-bit unsigned integer")
        missing = [q for q in QUINTILES if q not in self.class_params]
        if missing:
            raise BadConfig(f"class_params missing {missing}")
        if not self.activity.sigma >= 0:
            raise BadConfig("activity sigma must be >= 0")
        ip = self.initial_followers
        if not (ip.shape > 0 and ip.scale > 0):
            raise BadConfig("initial_followers shape and scale must be positive")
        if ip.scale > self.n_users - 1:
            raise BadConfig("initial_followers scale exceeds N - 1")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> SimConfig:
        """Build a config from plain JSON data.

        ``class_params`` maps each quintile (or ``"*"`` for all of them) to
        either the name of a published row (``"Q1"``) or a dict of
        coefficients ``alpha, beta, theta, w1, w2, w3`` and optionally ``C``.
        """
        try:
            n = int(d["n_users"])
            raw = d["class_params"]
            if isinstance(raw, str):
                raw = {"*": raw}
            classes = {}
            for q in QUINTILES:
                spec = raw.get(q, raw.get("*"))
                if spec is None:
                    raise BadConfig(f"no parameters for class {q}")
                if isinstance(spec, str):
                    if spec not in PUBLISHED_ROWS:
                        raise BadConfig(f"unknown parameter row {spec!r}")
                    classes[q] = ModelParams(**PUBLISHED_ROWS[spec], N=n, quintile_label=q)
                else:
                    coeffs = {k: float(v) for k, v in spec.items() if k not in ("N", "quintile_label")}
                    coeffs.setdefault("C", 0.0)
                    classes[q] = ModelParams(**coeffs, N=n, quintile_label=q)
            cfg = cls(
                n_users=n,
                n_steps=int(d["n_steps"]),
                seed=int(d["seed"]),
                class_params=classes,
                activity=LogNormal(**d.get("activity", {})),
                initial_followers=TruncatedPareto(**d.get("initial_followers", {})),
                proxy=ProxyParams(**{k: float(v) for k, v in d.get("proxy", {}).items()}),
            )
        except BadConfig:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise BadConfig(f"invalid simulation config: {exc!r}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> SimConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_users": self.n_users,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "class_params": {
                q: {k: v for k, v in p.to_dict().items() if k not in ("N", "quintile_label")}
                for q, p in self.class_params.items()
            },
            "activity": {"mu": self.activity.mu, "sigma": self.activity.sigma},
            "initial_followers": {"shape": self.initial_followers.shape, "scale": self.initial_followers.scale},
            "proxy": self.proxy.to_dict(),
        }


class MetricsRow(NamedTuple):
    step: int
    gini_followers: float
    top01_share: float
    top20_share: float
    mean_f: float


@dataclass
class SimState:
    step: int
    followers: np.ndarray
    classes: np.ndarray
    tweets: np.ndarray
    retweets: np.ndarray
    mentions: np.ndarray
    metrics_series: list[MetricsRow] = field(default_factory=list)
    last_gains: np.ndarray | None = None
    last_losses: np.ndarray | None = None
    last_p_plus: np.ndarray | None = None
    last_p_minus: np.ndarray | None = None

    @property
    def gini_series(self) -> np.ndarray:
        return np.array([row.gini_followers for row in self.metrics_series])


def metrics_row(step: int, followers: np.ndarray) -> MetricsRow:
    f = followers.astype(np.float64)
    if not np.any(f > 0):
        return MetricsRow(step, math.nan, math.nan, math.nan, 0.0)
    return MetricsRow(step, gini(f), top_share(f, 0.01), top_share(f, 0.2), float(f.mean()))


def _class_labels(followers: np.ndarray) -> np.ndarray:
    # same ranking rule as assign_quintiles: followers desc, then index asc
    order = np.lexsort((np.arange(followers.size), -followers))
    labels = np.empty(followers.size, dtype=object)
    start = 0
    for q, size in zip(QUINTILES, quintile_sizes(followers.size)):
        labels[order[start:start + size]] = q
        start += size
    return labels


def init_population(cfg: SimConfig, rng: StreamRNG | None = None) -> SimState:
    cfg.validate()
    rng = rng or StreamRNG(cfg.seed)
    n = cfg.n_users
    users = np.arange(n)
    u = rng.uniforms(0, users, DRAW_INIT)
    f = np.floor(cfg.initial_followers.ppf(u, n - 1)).astype(np.int64)
    f = np.clip(f, 0, n - 1)
    zeros = np.zeros(n)
    return SimState(
        step=0,
        followers=f,
        classes=_class_labels(f),
        tweets=zeros.copy(),
        retweets=zeros.copy(),
        mentions=zeros.copy(),
        metrics_series=[metrics_row(0, f)],
    )


def _binomial(u: np.ndarray, trials: np.ndarray, prob: np.ndarray) -> np.ndarray:
    out = np.zeros(trials.shape, dtype=np.int64)
    live = (trials > 0) & (prob > 0)
    if np.any(live):
        out[live] = binom.ppf(u[live], trials[live], prob[live]).astype(np.int64)
    return out


def step(state: SimState, cfg: SimConfig, rng: StreamRNG) -> SimState:
    """Advance one period; returns a new state and leaves ``state`` untouched."""
    k = state.step + 1
    n = cfg.n_users
    users = np.arange(n)
    f = state.followers

    p = cfg.activity.ppf(rng.uniforms(k, users, DRAW_TWEETS))
    r = np.asarray(retweet_count(cfg.proxy, f.astype(np.float64), p), dtype=np.float64)
    m = np.asarray(mention_count(cfg.proxy, f.astype(np.float64)), dtype=np.float64)

    p_plus = np.zeros(n)
    p_minus = np.zeros(n)
    for q in QUINTILES:
        sel = state.classes == q
        if np.any(sel):
            params = cfg.class_params[q]
            p_plus[sel] = gain_probabilities(params, r[sel], m[sel])
            p_minus[sel] = loss_probabilities(params, r[sel])

    gains = _binomial(rng.uniforms(k, users, DRAW_GAINS), n - 1 - f, p_plus)
    losses = _binomial(rng.uniforms(k, users, DRAW_LOSSES), f, p_minus)
    f_new = f + gains - losses

    return replace(
        state,
        step=k,
        followers=f_new,
        tweets=state.tweets + p,
        retweets=state.retweets + r,
        mentions=state.mentions + m,
        metrics_series=state.metrics_series + [metrics_row(k, f_new)],
        last_gains=gains,
        last_losses=losses,
        last_p_plus=p_plus,
        last_p_minus=p_minus,
    )


def run(cfg: SimConfig) -> SimState:
    cfg.validate()
    rng = StreamRNG(cfg.seed)
    state = init_population(cfg, rng)
    for _ in range(cfg.n_steps):
        state = step(state, cfg, rng)
    return state


def reference_config(seed: int = 0, n_users: int = 2000, n_steps: int = 50) -> SimConfig:
    """Every class runs the published Q1 dynamics."""
    return SimConfig.from_dict(
        {
            "n_users": n_users,
            "n_steps": n_steps,
            "seed": seed,
            "class_params": {"*": "Q1"},
            **REFERENCE_SETTINGS,
        }
    )


REFERENCE_SETTINGS: dict[str, Any] = {
    "activity": {"mu": 0.0, "sigma": 1.0},
    "initial_followers": {"shape": 1.16, "scale": 10.0},
    "proxy": {"a": 3e-05, "b": 2.0, "c": 0.001, "d": 1.0, "a_m": 0.01, "b_m": 0.002},
}
REFERENCE_SEEDS = tuple(range(1, 21))
