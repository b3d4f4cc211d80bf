"""Batch command-line interface.

Every command reads its inputs fully, computes all outputs in memory and
only then publishes them with atomic renames, followed by a
``run_manifest.json``.  Exit codes: 0 success, 2 bad input, 3 degenerate
data, 4 numeric failure.  ``ATTN_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import os
import sys
import time
from typing import Any, Sequence

import numpy as np

from .errors import (
    AttentionError,
    DegenerateData,
    DegenerateSeries,
    EmptySample,
    NonFiniteResult,
    TooFewUsers,
    ZeroMean,
)
from .fitting import fit_quintile, quintiles_from_windows
from .inequality import DEFAULT_FRACTIONS, gini, lorenz, top_share
from .ingest import (
    WindowingConfig,
    build_windows,
    parse_activity_log,
    parse_snapshot,
    parse_temporal_edges,
    parse_windows,
    windows_to_csv,
)
from .model import (
    QUINTILES,
    TIME_UNIT_SECONDS,
    AttentionState,
    ModelParams,
    closed_form_curve,
    follower_trajectory_ode,
)
from .outputs import OutputSet, csv_text, json_text, read_input
from .simulator import REFERENCE_SEEDS, SimConfig, reference_config, run
from .synthetic import DEFAULT_SEED, calibrated_dataset

log = logging.getLogger("attention_inequality")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST = "run_manifest.json"
METRICS = ("followers", "retweets", "mentions", "friends", "tweets")


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class Run:
    """Bookkeeping for one command invocation."""

    def __init__(self, command: str, out_dir: str):
        self.command = command
        self.out = OutputSet(out_dir)
        self.inputs: dict[str, str] = {}
        self.config: dict[str, Any] = {}
        self.started = time.perf_counter()

    def read(self, path: str) -> str:
        try:
            text, digest = read_input(path)
        except FileNotFoundError:
            raise CommandFailed(EXIT_INPUT, f"{path}: no such file") from None
        except (OSError, UnicodeDecodeError) as exc:
            raise CommandFailed(EXIT_INPUT, f"{path}: cannot read ({exc})") from None
        self.inputs[path] = digest
        return text

    def publish(self) -> None:
        names = self.out.names()
        self.out.commit()
        manifest = {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": names,
            "duration_seconds": time.perf_counter() - self.started,
        }
        done = OutputSet(self.out.out_dir)
        done.add(MANIFEST, json_text(manifest))
        done.commit()


# -- analyze / windows -------------------------------------------------------


def _load_replay(run_: Run, args, N: int | None = None):
    snap = None
    if args.snapshot:
        snap = parse_snapshot(run_.read(args.snapshot), source=args.snapshot)
    edges = parse_temporal_edges(run_.read(args.edges), preexisting=snap is not None, source=args.edges)
    acts = parse_activity_log(run_.read(args.activity), source=args.activity)
    t0 = args.t0
    if t0 is None:
        stamps = [e.timestamp for e in edges] + [a.timestamp for a in acts]
        t0 = float(math.floor(min(stamps))) if stamps else 0.0
    cfg = WindowingConfig(window_seconds=args.window_seconds, t0=t0)
    replay = build_windows(
        edges,
        acts,
        cfg,
        N,
        initial_followers={u: s.followers for u, s in snap.items()} if snap else None,
        initial_friends={u: s.friends for u, s in snap.items()} if snap else None,
    )
    run_.config.update(window_seconds=args.window_seconds, t0=t0, n_dropped_edges=edges.n_dropped)
    log.info("replayed %d edges into %d windows", len(edges), replay.n_windows)
    return replay


def _per_user_totals(replay) -> dict[str, np.ndarray]:
    users = list(replay.initial_in_degree)
    idx = {u: i for i, u in enumerate(users)}
    sums = {k: np.zeros(len(users)) for k in ("tweets", "retweets", "mentions")}
    for w in replay.windows:
        i = idx[w.user_id]
        sums["tweets"][i] += w.p
        sums["retweets"][i] += w.r
        sums["mentions"][i] += w.m
    return {
        "followers": np.array([replay.final_in_degree[u] for u in users], dtype=np.float64),
        "friends": np.array([replay.final_out_degree.get(u, 0) for u in users], dtype=np.float64),
        **sums,
    }


def _safe_gini(values: np.ndarray) -> float:
    try:
        return gini(values)
    except (ZeroMean, EmptySample):
        return math.nan


def cmd_analyze(args) -> int:
    run_ = Run("analyze", args.out)
    replay = _load_replay(run_, args)
    totals = _per_user_totals(replay)
    if totals["followers"].size == 0:
        raise CommandFailed(EXIT_DEGENERATE, "no users in the input")

    metrics: dict[str, Any] = {}
    for name in METRICS:
        v = totals[name]
        if np.any(v < 0):
            raise CommandFailed(EXIT_INPUT, f"{name}: negative totals after replay; is a snapshot missing?")
        try:
            g = gini(v)
        except ZeroMean:
            if name == "followers":
                raise CommandFailed(EXIT_DEGENERATE, "followers: every user has zero followers") from None
            log.warning("%s: all zero, reported as null", name)
            metrics[name] = None
            continue
        metrics[name] = {
            "gini": g,
            "top_shares": {repr(f): top_share(v, f) for f in DEFAULT_FRACTIONS},
            "n": int(v.size),
        }
        curve = lorenz(v)
        run_.out.add(f"lorenz_{name}.csv", csv_text(("pop_frac", "value_frac"), curve.points))

    report = {
        "n_users": int(totals["followers"].size),
        "n_windows": replay.n_windows,
        "window_seconds": args.window_seconds,
        "t0": run_.config["t0"],
        "metrics": metrics,
    }
    run_.out.add("inequality_report.json", json_text(report))

    by_window: dict[int, dict[str, list[float]]] = {}
    for w in replay.windows:
        d = by_window.setdefault(w.window_index, {"f": [], "r": [], "m": [], "p": []})
        d["f"].append(w.f_start)
        d["r"].append(w.r)
        d["m"].append(w.m)
        d["p"].append(w.p)
    rows = [
        (k, *(_safe_gini(np.asarray(d[c])) for c in ("f", "r", "m", "p")))
        for k, d in sorted(by_window.items())
    ]
    header = ("window", "gini_followers", "gini_retweets", "gini_mentions", "gini_tweets")
    run_.out.add("gini_series.csv", csv_text(header, rows))
    run_.publish()
    return EXIT_OK


def cmd_windows(args) -> int:
    run_ = Run("windows", args.out)
    replay = _load_replay(run_, args, args.population_n)
    run_.config["population_n"] = args.population_n
    run_.out.add("windows.csv", windows_to_csv(replay.windows))
    run_.publish()
    return EXIT_OK


# -- fit ---------------------------------------------------------------------


def cmd_fit(args) -> int:
    run_ = Run("fit", args.out)
    N = args.population_n
    run_.config["population_n"] = N
    windows = parse_windows(run_.read(args.windows), source=args.windows)
    if not windows:
        raise CommandFailed(EXIT_DEGENERATE, "windows file has no rows")
    peak = max(w.f_start for w in windows)
    if not N > peak:
        raise CommandFailed(EXIT_INPUT, f"--population-n {N} must exceed the largest f_start ({peak:g})")
    table = quintiles_from_windows(windows)
    labels = table.labels()

    rows, failed = [], []
    for q in QUINTILES:
        members = [w for w in windows if labels[w.user_id] == q]
        try:
            report = fit_quintile(members, N, q)
        except DegenerateData as exc:
            log.error("%s: %s", q, exc)
            failed.append(q)
            rows.append((q, "degenerate", math.nan, len(members), False))
            continue
        run_.out.add(f"params_{q}.json", report.to_json())
        rows.append((q, "ok", report.rmse, report.n_samples, report.converged))
    header = ("quintile", "status", "rmse", "n_samples", "converged")
    run_.out.add("fit_summary.csv", csv_text(header, rows))
    run_.publish()
    if failed:
        raise CommandFailed(EXIT_DEGENERATE, f"degenerate data in {', '.join(failed)}; other quintiles written")
    return EXIT_OK


# -- predict -----------------------------------------------------------------


def _load_params_text(text: str, source: str) -> ModelParams:
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    try:
        if isinstance(data, dict):
            return ModelParams.from_dict(data.get("params", data))
        return ModelParams.from_kv(text)
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandFailed(EXIT_INPUT, f"{source}: not a parameter file ({exc})") from None


def _load_params(run_: Run, path: str) -> dict[str, ModelParams]:
    if os.path.isdir(path):
        files = sorted(glob.glob(os.path.join(path, "params_Q*.json")))
        if not files:
            raise CommandFailed(EXIT_INPUT, f"{path}: no params_Q*.json files")
        out = {}
        for f in files:
            p = _load_params_text(run_.read(f), f)
            out[os.path.basename(f)[len("params_"):-len(".json")]] = p
        return out
    return {"*": _load_params_text(run_.read(path), path)}


def _parse_states(text: str, source: str) -> list[tuple[str, AttentionState, str | None]]:
    lines = text.splitlines()
    if not lines:
        raise CommandFailed(EXIT_INPUT, f"{source}:1: missing header row")
    header = [h.strip().lower() for h in lines[0].split(",")]
    if header[:5] != ["user_id", "f0", "r", "m", "p"] or header[5:] not in ([], ["quintile"]):
        raise CommandFailed(EXIT_INPUT, f"{source}:1: expected header user_id,f0,r,m,p[,quintile]")
    out = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise CommandFailed(EXIT_INPUT, f"{source}:{n}: expected {len(header)} fields, got {len(cells)}")
        try:
            vals = [float(c) for c in cells[1:5]]
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("non-finite value")
            state = AttentionState(*vals)
        except ValueError as exc:
            raise CommandFailed(EXIT_INPUT, f"{source}:{n}: {exc}") from None
        out.append((cells[0], state, cells[5] if len(cells) > 5 else None))
    return out


def _trajectory(params: ModelParams, state: AttentionState, horizon: int, mode: str, dt: float) -> np.ndarray:
    if mode == "closed":
        return closed_form_curve(params, state, np.arange(horizon + 1, dtype=np.float64))
    f = [state.f0]
    for _ in range(horizon):
        pts = follower_trajectory_ode(params, AttentionState(f[-1], state.r, state.m, state.p), 1.0, dt)
        f.append(pts[-1].f)
    return np.array(f)


def cmd_predict(args) -> int:
    run_ = Run("predict", args.out)
    run_.config.update(horizon=args.horizon, mode=args.mode, dt=args.dt)
    if args.horizon < 0:
        raise CommandFailed(EXIT_INPUT, "--horizon must be >= 0")
    params = _load_params(run_, args.params)
    states = _parse_states(run_.read(args.state), args.state)
    if not states:
        raise CommandFailed(EXIT_DEGENERATE, f"{args.state}: no user states")

    traj_rows, curves = [], []
    for uid, state, q in states:
        if "*" in params:
            p = params["*"]
        elif q in params:
            p = params[q]
        else:
            raise CommandFailed(EXIT_INPUT, f"user {uid}: no parameters for quintile {q!r}")
        if state.f0 > p.N:
            raise CommandFailed(EXIT_INPUT, f"user {uid}: f0={state.f0:g} exceeds N={p.N}")
        try:
            f = _trajectory(p, state, args.horizon, args.mode, args.dt)
        except NonFiniteResult as exc:
            raise CommandFailed(EXIT_NUMERIC, f"user {uid}: {exc}") from None
        curves.append(f)
        traj_rows.extend((uid, t, float(v)) for t, v in enumerate(f))

    F = np.maximum(np.vstack(curves), 0.0)
    gini_rows = [(t, _safe_gini(F[:, t])) for t in range(args.horizon + 1)]
    run_.out.add("trajectories.csv", csv_text(("user", "t", "f"), traj_rows))
    run_.out.add("predicted_gini.csv", csv_text(("t", "gini"), gini_rows))
    run_.publish()
    return EXIT_OK


# -- simulate / generate -----------------------------------------------------


def cmd_simulate(args) -> int:
    run_ = Run("simulate", args.out)
    data = json.loads(run_.read(args.config)) if args.config else None
    if data is None:
        raise CommandFailed(EXIT_INPUT, "--config is required")
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = SimConfig.from_dict(data)
    run_.config.update(cfg.to_dict())
    state = run(cfg)
    run_.out.add("sim_metrics.csv", csv_text(state.metrics_series[0]._fields, state.metrics_series))
    users = zip(range(cfg.n_users), state.followers.tolist(), state.classes.tolist())
    run_.out.add("sim_users.csv", csv_text(("user", "followers", "class"), users))
    run_.publish()
    return EXIT_OK


def cmd_generate(args) -> int:
    run_ = Run("generate", args.out)
    run_.config.update(seed=args.seed, users=args.users, windows=args.windows, events=args.events)
    ds = calibrated_dataset(args.users, args.windows, args.events, seed=args.seed)
    run_.out.add("snapshot.csv", ds.snapshot)
    run_.out.add("edges.csv", ds.edges)
    run_.out.add("activity.csv", ds.activity)
    ref = reference_config(seed=REFERENCE_SEEDS[0]).to_dict()
    run_.out.add("reference_sim_config.json", json_text(ref))
    run_.publish()
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def _replay_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="edge log CSV (src,dst,action,timestamp)")
    p.add_argument("--activity", required=True, help="activity CSV (user_id,timestamp,kind,count)")
    p.add_argument("--snapshot", help="follower snapshot CSV seeding initial in-degrees")
    p.add_argument("--window-seconds", type=int, default=TIME_UNIT_SECONDS)
    p.add_argument("--t0", type=float, help="window origin (default: earliest timestamp)")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attention-inequality", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="inequality of followers and activity")
    _replay_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("windows", help="replay logs into per-user windows")
    _replay_flags(p)
    p.add_argument("--population-n", type=int, help="optional bound checked against in-degrees")
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("fit", help="per-quintile parameter estimates")
    p.add_argument("--windows", required=True)
    p.add_argument("--population-n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="follower trajectories from fitted parameters")
    p.add_argument("--params", required=True, help="parameter file or directory of params_Q*.json")
    p.add_argument("--state", required=True, help="CSV user_id,f0,r,m,p[,quintile]")
    p.add_argument("--horizon", type=int, required=True, help="number of model time steps")
    p.add_argument("--mode", choices=("closed", "ode"), default="closed")
    p.add_argument("--dt", type=float, default=0.1, help="RK4 step for --mode ode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="agent-based simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="write the calibrated synthetic dataset")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--users", type=int, default=5600)
    p.add_argument("--windows", type=int, default=12)
    p.add_argument("--events", type=int, default=10000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


_DEGENERATE = (DegenerateData, TooFewUsers, ZeroMean, EmptySample, DegenerateSeries)


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("ATTN_LOG", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandFailed as exc:
        code, msg = exc.code, str(exc)
    except _DEGENERATE as exc:
        code, msg = EXIT_DEGENERATE, str(exc)
    except (NonFiniteResult, FloatingPointError, OverflowError) as exc:
        code, msg = EXIT_NUMERIC, str(exc)
    except (AttentionError, ValueError) as exc:
        code, msg = EXIT_INPUT, str(exc)
    except OSError as exc:
        code, msg = EXIT_INPUT, f"cannot write outputs: {exc}"
    print(f"error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
