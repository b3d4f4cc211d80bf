"""Deterministic synthetic data standing in for a crawled follower network.

:func:`calibrated_dataset` builds a seed-user population whose follower
distribution is tuned to look like a large microblogging sample: follower
Gini around 0.92, the top 1% holding about 60% of followers, and top-quintile
means near 29,000 followers and 14,000 statuses.  These are calibration
goals for the generator, not measurements.

:func:`model_windows` instead produces windows that follow the attention
model exactly (expected counts, no sampling noise), for round-trip tests of
the fitting code.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .ingest import UserWindow, windows_to_csv
from .model import (
    TIME_UNIT_SECONDS,
    ModelParams,
    ProxyParams,
    gain_probabilities,
    gain_rate,
    loss_probabilities,
    loss_rate,
    mention_count,
    retweet_count,
)

DEFAULT_SEED = 20140320
# 2014-03-20 00:00 UTC
DEFAULT_T0 = 1395273600

# (quantile lo, quantile hi, followers lo, followers hi); log-uniform inside a band
FOLLOWER_BANDS = (
    (0.0, 0.2, 1.0, 60.0),
    (0.2, 0.4, 60.0, 230.0),
    (0.4, 0.6, 230.0, 800.0),
    (0.6, 0.8, 800.0, 1400.0),
    (0.8, 0.99, 1400.0, 40000.0),
)
TAIL_SHAPE = 0.875
TAIL_SCALE = 40000.0
FOLLOWER_CAP = 5e7
# mean statuses per follower quintile, Q1..Q5
STATUS_MEANS = (14086.0, 7184.0, 4053.0, 2300.0, 1300.0)
STATUS_SIGMA = 0.7
FRIENDS_MU, FRIENDS_SIGMA = 5.5, 1.41
STATUS_HISTORY_WINDOWS = 600


def follower_quantile(q: np.ndarray) -> np.ndarray:
    """Follower count at population quantile ``q`` (0 = least followed)."""
    q = np.asarray(q, dtype=np.float64)
    f = np.empty_like(q)
    for q0, q1, lo, hi in FOLLOWER_BANDS:
        sel = (q >= q0) & (q < q1)
        f[sel] = lo * (hi / lo) ** ((q[sel] - q0) / (q1 - q0))
    tail = q >= FOLLOWER_BANDS[-1][1]
    t = (1.0 - q[tail]) / (1.0 - FOLLOWER_BANDS[-1][1])
    f[tail] = np.minimum(TAIL_SCALE * t ** (-1.0 / TAIL_SHAPE), FOLLOWER_CAP)
    return f


@dataclass
class Population:
    user_ids: list[str]
    followers: np.ndarray
    friends: np.ndarray
    statuses: np.ndarray

    def snapshot_csv(self) -> str:
        buf = io.StringIO()
        buf.write("user_id,followers,friends,statuses\n")
        for u, a, b, c in zip(self.user_ids, self.followers, self.friends, self.statuses):
            buf.write(f"{u},{int(a)},{int(b)},{int(c)}\n")
        return buf.getvalue()


def calibrated_population(n_users: int = 5600, seed: int = DEFAULT_SEED) -> Population:
    """Quantile-matched follower counts with noisy, rank-dependent statuses."""
    rng = np.random.default_rng(seed)
    q = (np.arange(n_users) + 0.5) / n_users
    followers = np.floor(follower_quantile(q)).astype(np.int64)
    # quintile by rank (q ascending, so the last fifth is Q1)
    quint = np.minimum((4 - np.floor(q * 5)).astype(int), 4)
    noise = rng.lognormal(-0.5 * STATUS_SIGMA**2, STATUS_SIGMA, n_users)
    statuses = np.maximum(np.round(np.asarray(STATUS_MEANS)[quint] * noise), 1).astype(np.int64)
    friends = np.round(rng.lognormal(FRIENDS_MU, FRIENDS_SIGMA, n_users)).astype(np.int64)
    perm = rng.permutation(n_users)
    ids = [f"u{i:05d}" for i in range(n_users)]
    return Population(ids, followers[perm], friends[perm], statuses[perm])


def edge_events(
    pop: Population,
    n_events: int,
    n_windows: int,
    *,
    seed: int = DEFAULT_SEED,
    t0: int = DEFAULT_T0,
    window_seconds: int = TIME_UNIT_SECONDS,
    redundant_fraction: float = 0.01,
) -> list[tuple[str, str, str, int]]:
    """Follow/unfollow events toward the population, as ``(src, dst, action, ts)`` rows.

    New followers pick targets roughly in proportion to their follower
    count.  Unfollows hit either an edge created earlier in the log or one
    that predates it (source ids ``p<dst>-<k>``, never created in the log).
    A small fraction of redundant events (repeat creates and deletes) is
    mixed in to exercise de-duplication.
    """
    rng = np.random.default_rng(seed + 1)
    n = len(pop.user_ids)
    ids = pop.user_ids
    weights = (pop.followers + 1.0) ** 0.9
    weights /= weights.sum()
    ts = np.sort(rng.integers(t0, t0 + n_windows * window_seconds, size=n_events)).tolist()
    pre_left = pop.followers.astype(np.int64).copy()
    pre_used = np.zeros(n, dtype=np.int64)
    active: list[tuple[str, str]] = []
    is_active: set[tuple[str, str]] = set()
    rows: list[tuple[str, str, str, int]] = []
    n_anon = 0

    while len(rows) < n_events:
        t = ts[len(rows)]
        u = rng.random()
        if u < redundant_fraction and rows:
            src, dst, act, _ = rows[int(rng.integers(len(rows)))]
            rows.append((src, dst, act, t))
        elif u < 0.55 or not (active or pre_left.any()):
            j = int(rng.choice(n, p=weights))
            if rng.random() < 0.1:
                k = int(rng.integers(n - 1))
                src = ids[k if k < j else k + 1]
            else:
                src = f"a{n_anon:06d}"
                n_anon += 1
            if (src, ids[j]) in is_active:
                continue
            active.append((src, ids[j]))
            is_active.add((src, ids[j]))
            rows.append((src, ids[j], "create", t))
        elif active and (rng.random() < 0.5 or not pre_left.any()):
            i = int(rng.integers(len(active)))
            active[i], active[-1] = active[-1], active[i]
            src, dst = active.pop()
            is_active.discard((src, dst))
            rows.append((src, dst, "delete", t))
        else:
            j = int(rng.choice(n, p=pre_left / pre_left.sum()))
            pre_left[j] -= 1
            pre_used[j] += 1
            rows.append((f"p{ids[j]}-{pre_used[j]}", ids[j], "delete", t))
    return rows


def edges_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("src,dst,action,timestamp\n")
    for src, dst, act, t in rows:
        buf.write(f"{src},{dst},{act},{t}\n")
    return buf.getvalue()


def activity_rows(
    pop: Population,
    n_windows: int,
    *,
    seed: int = DEFAULT_SEED,
    t0: int = DEFAULT_T0,
    window_seconds: int = TIME_UNIT_SECONDS,
) -> list[tuple[str, int, str, int]]:
    """Per-window tweet, retweet and mention tallies for every user."""
    rng = np.random.default_rng(seed + 2)
    f = pop.followers.astype(np.float64)
    tweet_rate = pop.statuses / STATUS_HISTORY_WINDOWS
    rows = []
    for k in range(n_windows):
        p = rng.poisson(tweet_rate)
        r = rng.poisson(0.0015 * f**0.95 + 0.05 * p)
        m = rng.poisson(0.001 * f**0.95 + 0.02)
        offs = rng.integers(0, window_seconds, size=(3, f.size))
        base = t0 + k * window_seconds
        for i, uid in enumerate(pop.user_ids):
            for kind, counts, row in (("tweet", p, 0), ("retweet_received", r, 1), ("mention_received", m, 2)):
                if counts[i] > 0:
                    rows.append((uid, int(base + offs[row, i]), kind, int(counts[i])))
    rows.sort(key=lambda x: x[1])
    return rows


def activity_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("user_id,timestamp,kind,count\n")
    for uid, t, kind, c in rows:
        buf.write(f"{uid},{t},{kind},{c}\n")
    return buf.getvalue()


@dataclass
class SyntheticDataset:
    population: Population
    snapshot: str
    edges: str
    activity: str
    t0: int
    window_seconds: int

    def write(self, directory: str | os.PathLike) -> dict[str, str]:
        os.makedirs(directory, exist_ok=True)
        paths = {}
        for name, text in (("snapshot", self.snapshot), ("edges", self.edges), ("activity", self.activity)):
            path = os.path.join(directory, f"{name}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            paths[name] = path
        return paths


def calibrated_dataset(
    n_users: int = 5600,
    n_windows: int = 12,
    n_edge_events: int = 10000,
    *,
    seed: int = DEFAULT_SEED,
    t0: int = DEFAULT_T0,
    window_seconds: int = TIME_UNIT_SECONDS,
) -> SyntheticDataset:
    pop = calibrated_population(n_users, seed)
    edges = edge_events(pop, n_edge_events, n_windows, seed=seed, t0=t0, window_seconds=window_seconds)
    acts = activity_rows(pop, n_windows, seed=seed, t0=t0, window_seconds=window_seconds)
    return SyntheticDataset(pop, pop.snapshot_csv(), edges_csv(edges), activity_csv(acts), t0, window_seconds)


def model_windows(
    params: ModelParams | Mapping[str, ModelParams],
    n_users: int,
    n_windows: int,
    *,
    seed: int = DEFAULT_SEED,
    r_range: tuple[float, float] = (1.0, 1000.0),
    m_range: tuple[float, float] = (1.0, 100.0),
) -> list[UserWindow]:
    """Windows whose gains and losses are the model's expected counts.

    ``params`` is either one parameter set for everybody or a mapping from
    user index modulo its length.  Retweets and mentions are log-uniform per
    window; follower counts evolve by ``f += (N - f) P+ - f P-``.
    """
    plist = [params] if isinstance(params, ModelParams) else list(params.values())
    n_pop = plist[0].N
    rng = np.random.default_rng(seed)
    f0 = np.exp(rng.uniform(np.log(10.0), np.log(max(n_pop / 10.0, 11.0)), n_users))
    out: list[UserWindow] = []
    for i in range(n_users):
        pr = plist[i % len(plist)]
        f = float(np.floor(f0[i]))
        for k in range(n_windows):
            r = float(np.exp(rng.uniform(*np.log(r_range))))
            m = float(np.exp(rng.uniform(*np.log(m_range))))
            p = float(rng.integers(1, 50))
            pp = float(gain_probabilities(pr, r, m))
            pm = float(loss_probabilities(pr, r))
            gained = (pr.N - f) * pp
            lost = f * pm
            out.append(UserWindow(f"s{i:04d}", k, p, f, r, m, gained, lost))
            f = f + gained - lost
    return out


def model_windows_csv(*args, **kwargs) -> str:
    return windows_to_csv(model_windows(*args, **kwargs))


def _log_uniform(rng: np.random.Generator, lo: float, hi: float, n: int) -> np.ndarray:
    return np.exp(rng.uniform(np.log(lo), np.log(hi), n))


def rate_samples(
    params: ModelParams,
    n: int,
    *,
    seed: int,
    noise: float = 0.0,
    r_range: tuple[float, float] = (1.0, 1000.0),
    m_range: tuple[float, float] = (1.0, 100.0),
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(r, m, gain, loss)`` with the model's unclamped rates times ``1 + noise * z``."""
    rng = np.random.default_rng(seed)
    r = _log_uniform(rng, *r_range, n)
    m = _log_uniform(rng, *m_range, n)
    gain = gain_rate(params, r, m) * (1.0 + noise * rng.standard_normal(n))
    loss = loss_rate(params, r) * (1.0 + noise * rng.standard_normal(n))
    return r, m, gain, loss


def proxy_windows(
    proxy: ProxyParams,
    n: int,
    *,
    seed: int,
    noise: float = 0.0,
    f_range: tuple[float, float] = (1.0, 1000.0),
    p_range: tuple[float, float] = (1.0, 5000.0),
) -> list[UserWindow]:
    """Windows whose r and m follow the proxy models, with multiplicative noise."""
    rng = np.random.default_rng(seed)
    f = _log_uniform(rng, *f_range, n)
    p = _log_uniform(rng, *p_range, n)
    r = retweet_count(proxy, f, p) * (1.0 + noise * rng.standard_normal(n))
    m = mention_count(proxy, f) * (1.0 + noise * rng.standard_normal(n))
    return [UserWindow(f"x{i:05d}", 0, p[i], f[i], r[i], m[i], 0.0, 0.0) for i in range(n)]
