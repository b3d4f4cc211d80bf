"""Temporal follow-edge and activity logs, and their per-window summaries.

Both inputs are headered CSV.  Edge rows are ``src,dst,action,timestamp``
where ``src`` follows ``dst``; activity rows are
``user_id,timestamp,kind,count``.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np

from .errors import BadAction, ParseError, TimestampBeforeOrigin
from .model import TIME_UNIT_SECONDS

log = logging.getLogger(__name__)

EDGE_HEADER = ("src", "dst", "action", "timestamp")
ACTIVITY_HEADER = ("user_id", "timestamp", "kind", "count")
WINDOW_HEADER = ("user_id", "window", "p", "f_start", "r", "m", "gained", "lost")
SNAPSHOT_HEADER = ("user_id", "followers", "friends", "statuses")


class Action(enum.Enum):
    CREATE = "create"
    DELETE = "delete"


class ActivityKind(enum.Enum):
    TWEET = "tweet"
    RETWEET_RECEIVED = "retweet_received"
    MENTION_RECEIVED = "mention_received"


@dataclass(frozen=True)
class TemporalEdge:
    src: str
    dst: str
    action: Action
    timestamp: float


@dataclass(frozen=True)
class ActivityRecord:
    user_id: str
    timestamp: float
    kind: ActivityKind
    count: int


@dataclass
class EdgeLog:
    """Edges in replay order, after dropping redundant creates and deletes."""

    edges: list[TemporalEdge]
    n_dropped: int = 0

    def __iter__(self) -> Iterator[TemporalEdge]:
        return iter(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def __getitem__(self, i):
        return self.edges[i]


@dataclass(frozen=True)
class WindowingConfig:
    window_seconds: int = TIME_UNIT_SECONDS
    t0: float = 0.0

    def __post_init__(self):
        if self.window_seconds <= 0:
            raise ValueError("window_seconds must be positive")

    def index(self, timestamp: float) -> int:
        if timestamp < self.t0:
            raise TimestampBeforeOrigin(f"timestamp {timestamp} precedes window origin {self.t0}")
        return math.floor((timestamp - self.t0) / self.window_seconds)


@dataclass(frozen=True)
class UserWindow:
    """One user's observables over one window.

    Counts are normally integers but may be real-valued expectations, e.g.
    for windows synthesised from model parameters.
    """

    user_id: str
    window_index: int
    p: float
    f_start: float
    r: float
    m: float
    gained: float
    lost: float

    @property
    def inconsistent(self) -> bool:
        """More followers lost than were present at the start."""
        return self.lost > self.f_start


@dataclass(frozen=True)
class Snapshot:
    followers: int
    friends: int
    statuses: int


def _reader(stream: TextIO | str, header: tuple[str, ...], source: str | None):
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = csv.reader(stream)
    try:
        got = next(rows)
    except StopIteration:
        raise ParseError(1, "missing header row", source) from None
    got = tuple(h.strip().lower() for h in got)
    if got[: len(header)] != header:
        raise ParseError(1, f"expected header {','.join(header)}, got {','.join(got)}", source)
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}", source)
        yield lineno, [c.strip() for c in row]


def _timestamp(text: str, lineno: int, source: str | None) -> float:
    try:
        ts = float(text)
    except ValueError:
        raise ParseError(lineno, f"bad timestamp {text!r}", source) from None
    if not math.isfinite(ts) or ts < 0:
        raise ParseError(lineno, f"timestamp must be finite and >= 0, got {text!r}", source)
    return ts


def parse_temporal_edges(
    stream: TextIO | str, *, preexisting: bool = False, source: str | None = None
) -> EdgeLog:
    """Parse a follow-edge log and replay it in timestamp order.

    Rows are stably sorted by timestamp, so ties keep file order.  A CREATE
    of an already active edge, or a DELETE of an inactive one, is dropped
    and counted in ``n_dropped``.  With ``preexisting=True`` a DELETE of an
    edge never seen before is kept, on the assumption that the edge predates
    the log (use together with a follower snapshot).
    """
    rows: list[TemporalEdge] = []
    for lineno, (src, dst, action, ts) in _reader(stream, EDGE_HEADER, source):
        if not src or not dst:
            raise ParseError(lineno, "empty user id", source)
        if src == dst:
            raise ParseError(lineno, f"self-follow {src}->{dst}", source)
        try:
            act = Action(action.lower())
        except ValueError:
            raise BadAction(lineno, f"unknown action {action!r}", source) from None
        rows.append(TemporalEdge(src, dst, act, _timestamp(ts, lineno, source)))

    rows.sort(key=lambda e: e.timestamp)
    state: dict[tuple[str, str], bool] = {}
    kept: list[TemporalEdge] = []
    dropped = 0
    for e in rows:
        key = (e.src, e.dst)
        active = state.get(key)
        if e.action is Action.CREATE:
            if active:
                dropped += 1
                continue
            state[key] = True
        else:
            if active is None and preexisting:
                pass
            elif not active:
                dropped += 1
                continue
            state[key] = False
        kept.append(e)
    if dropped:
        log.warning("dropped %d redundant edge events%s", dropped, f" in {source}" if source else "")
    return EdgeLog(kept, dropped)


def parse_activity_log(stream: TextIO | str, *, source: str | None = None) -> list[ActivityRecord]:
    out = []
    for lineno, (uid, ts, kind, count) in _reader(stream, ACTIVITY_HEADER, source):
        if not uid:
            raise ParseError(lineno, "empty user id", source)
        try:
            k = ActivityKind(kind.lower())
        except ValueError:
            raise ParseError(lineno, f"unknown activity kind {kind!r}", source) from None
        try:
            n = int(count)
        except ValueError:
            raise ParseError(lineno, f"count must be an integer, got {count!r}", source) from None
        if n < 1:
            raise ParseError(lineno, f"count must be >= 1, got {n}", source)
        out.append(ActivityRecord(uid, _timestamp(ts, lineno, source), k, n))
    return out


def parse_snapshot(stream: TextIO | str, *, source: str | None = None) -> dict[str, Snapshot]:
    """Profile snapshot ``user_id,followers,friends,statuses`` taken at the log origin."""
    out: dict[str, Snapshot] = {}
    for lineno, (uid, fol, fri, sta) in _reader(stream, SNAPSHOT_HEADER, source):
        try:
            vals = [int(v) for v in (fol, fri, sta)]
        except ValueError:
            raise ParseError(lineno, "snapshot counts must be integers", source) from None
        if min(vals) < 0:
            raise ParseError(lineno, "snapshot counts must be >= 0", source)
        out[uid] = Snapshot(*vals)
    return out


def parse_windows(stream: TextIO | str, *, source: str | None = None) -> list[UserWindow]:
    out = []
    for lineno, row in _reader(stream, WINDOW_HEADER, source):
        try:
            w = int(row[1])
            vals = [float(v) for v in row[2:]]
        except ValueError:
            raise ParseError(lineno, "non-numeric window field", source) from None
        if w < 0 or min(vals) < 0 or not all(math.isfinite(v) for v in vals):
            raise ParseError(lineno, "window fields must be finite and >= 0", source)
        out.append(UserWindow(row[0], w, *vals))
    return out


def _num(v: float) -> str:
    """17 significant digits, integers without a trailing ``.0``."""
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else format(v, ".17g")


def windows_to_csv(windows: Iterable[UserWindow]) -> str:
    buf = io.StringIO()
    buf.write(",".join(WINDOW_HEADER) + "\n")
    for w in windows:
        buf.write(
            ",".join([w.user_id, str(w.window_index)] + [_num(v) for v in (w.p, w.f_start, w.r, w.m, w.gained, w.lost)])
            + "\n"
        )
    return buf.getvalue()


@dataclass
class Replay:
    """Result of :func:`build_windows`: the windows plus replay bookkeeping."""

    windows: list[UserWindow]
    n_windows: int
    initial_in_degree: dict[str, int] = field(default_factory=dict)
    final_in_degree: dict[str, int] = field(default_factory=dict)
    final_out_degree: dict[str, int] = field(default_factory=dict)

    def __iter__(self) -> Iterator[UserWindow]:
        return iter(self.windows)

    def __len__(self) -> int:
        return len(self.windows)


def build_windows(
    edges: Iterable[TemporalEdge],
    activity: Iterable[ActivityRecord],
    cfg: WindowingConfig,
    N: int | None = None,
    *,
    initial_followers: Mapping[str, int] | None = None,
    initial_friends: Mapping[str, int] | None = None,
) -> Replay:
    """Replay edges and tally activity into per-user, per-window observations.

    Window ``k`` covers ``[t0 + k*w, t0 + (k+1)*w)``, so a timestamp on a
    boundary opens the later window.  Users are everyone who is followed in
    the edge log, appears in the activity log, or has a snapshot entry.
    ``f_start`` is the active in-degree when the window opens, seeded from
    ``initial_followers`` when given.  Every user gets a row for every window
    from 0 to the last one holding an event.
    """
    edges = list(edges)
    activity = list(activity)
    init_f = dict(initial_followers or {})
    init_out = dict(initial_friends or {})

    users: dict[str, None] = {}
    for u in init_f:
        users[u] = None
    for e in edges:
        users[e.dst] = None
    for a in activity:
        users[a.user_id] = None

    last = -1
    for e in edges:
        last = max(last, cfg.index(e.timestamp))
    for a in activity:
        last = max(last, cfg.index(a.timestamp))
    n_windows = last + 1

    gained = defaultdict(float)
    lost = defaultdict(float)
    tallies = {k: defaultdict(float) for k in ActivityKind}
    for a in activity:
        tallies[a.kind][(a.user_id, cfg.index(a.timestamp))] += a.count

    indeg = {u: int(init_f.get(u, 0)) for u in users}
    outdeg = defaultdict(int, init_out)
    # f_start[k] for each user: snapshot of indeg before window k's events
    starts = {u: [0] * n_windows for u in users}
    order = sorted(range(len(edges)), key=lambda i: edges[i].timestamp)
    pos = 0
    for k in range(n_windows):
        for u in users:
            starts[u][k] = indeg[u]
        while pos < len(order) and cfg.index(edges[order[pos]].timestamp) == k:
            e = edges[order[pos]]
            if e.action is Action.CREATE:
                indeg[e.dst] += 1
                outdeg[e.src] += 1
                gained[(e.dst, k)] += 1
            else:
                indeg[e.dst] -= 1
                outdeg[e.src] -= 1
                lost[(e.dst, k)] += 1
            pos += 1

    if N is not None:
        worst = max(indeg.values(), default=0)
        peak = max((max(s) for s in starts.values() if s), default=0)
        if max(worst, peak) > N:
            raise ValueError(f"in-degree {max(worst, peak)} exceeds population size N={N}")

    windows = []
    for u in users:
        for k in range(n_windows):
            key = (u, k)
            windows.append(
                UserWindow(
                    user_id=u,
                    window_index=k,
                    p=tallies[ActivityKind.TWEET].get(key, 0.0),
                    f_start=float(starts[u][k]),
                    r=tallies[ActivityKind.RETWEET_RECEIVED].get(key, 0.0),
                    m=tallies[ActivityKind.MENTION_RECEIVED].get(key, 0.0),
                    gained=gained.get(key, 0.0),
                    lost=lost.get(key, 0.0),
                )
            )
    n_bad = sum(w.inconsistent for w in windows)
    if n_bad:
        log.warning("%d windows lose more followers than they start with", n_bad)
    return Replay(
        windows=windows,
        n_windows=n_windows,
        initial_in_degree={u: int(init_f.get(u, 0)) for u in users},
        final_in_degree=dict(indeg),
        final_out_degree=dict(outdeg),
    )


@dataclass
class TransitionSamples:
    """Per-window empirical follow/unfollow probabilities.

    ``p_plus`` is NaN on rows where it is undefined (``f_start >= N``);
    those rows are tallied in ``n_skipped_plus``.
    """

    r: np.ndarray
    m: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    n_skipped_plus: int = 0

    def __len__(self) -> int:
        return self.r.size

    def __iter__(self):
        return zip(self.r.tolist(), self.m.tolist(), self.p_plus.tolist(), self.p_minus.tolist())

    def gain_samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ok = ~np.isnan(self.p_plus)
        return self.r[ok], self.m[ok], self.p_plus[ok]

    def loss_samples(self) -> tuple[np.ndarray, np.ndarray]:
        return self.r, self.p_minus


def empirical_transition_probs(windows: Iterable[UserWindow], N: int) -> TransitionSamples:
    """``P+ = gained / (N - f_start)`` and ``P- = lost / max(f_start, 1)``, clamped to [0, 1]."""
    ws = list(windows)
    r = np.array([w.r for w in ws], dtype=np.float64)
    m = np.array([w.m for w in ws], dtype=np.float64)
    f = np.array([w.f_start for w in ws], dtype=np.float64)
    g = np.array([w.gained for w in ws], dtype=np.float64)
    lo = np.array([w.lost for w in ws], dtype=np.float64)
    pool = N - f
    ok = pool > 0
    p_plus = np.full(r.shape, np.nan)
    p_plus[ok] = np.clip(g[ok] / pool[ok], 0.0, 1.0)
    p_minus = np.clip(lo / np.maximum(f, 1.0), 0.0, 1.0)
    return TransitionSamples(r, m, p_plus, p_minus, int(np.count_nonzero(~ok)))
