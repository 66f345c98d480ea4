"""Command-line driver.

Every output embeds the tool version, the full configuration and the RNG
seeds. Reruns with identical inputs give byte-identical files, except for
the ``wall_ms`` column of sweeps; pass ``--no-timing`` to zero it.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 mixed Nash
requested where it is not supported.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    JointPolicy,
    PolicyKind,
    game_to_dict,
    load_game,
    parse_json,
    policy_from_dict,
    policy_to_dict,
    save_game,
)
from .equilibrium import DEFAULT_MAX_ITERS, DEFAULT_TOL
from .errors import ConstructionFailed, NashIntractable, NonUniqueEquilibrium, NumericalFailure, ValidationError
from .evaluation import gap_cce, gap_ce, gap_ne, policy_gap, robust_policy_eval
from .generators import random_game
from .instances import (
    HardInstanceSpec,
    build_hard_rmdp,
    fishing_rollout,
    fishing_solve,
    hard_rmdp_closed_form,
)
from .nvi import dr_nvi
from .sampler import RNG_NAME, draw, empirical_game

SEED_ENV = "RMG_SOLVE_SEED"
GAP_NAMES = {"nash": "ne", "cce": "cce", "ce": "ce"}


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def parse_int_list(text: str) -> list[int]:
    """``"1,2,5"``, ``"0-19"`` or a mix such as ``"0-3,10"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _header(command: str, config: dict, seeds) -> dict:
    return {"tool_version": __version__, "command": command, "config": config, "seeds": list(seeds)}


def _write_json(obj: dict, out) -> None:
    text = json.dumps(obj, indent=1) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _pure_profiles(policy: JointPolicy):
    """Decoded profile per (h, s) if the policy is deterministic, else ``None``."""
    d = policy.dist
    if not np.all((d == 0.0) | (d == 1.0)):
        return None
    idx = d.argmax(axis=-1)
    return np.stack(np.unravel_index(idx, policy.actions.sizes), axis=-1).tolist()


# ---------------------------------------------------------------------------
# solve / eval / validate


def cmd_solve(args) -> int:
    game = load_game(args.game)
    res = dr_nvi(game, args.kind, args.sub_tol, args.max_iters, args.workers)
    config = {"game": str(args.game), "kind": args.kind, "sub_tol": args.sub_tol,
              "max_iters": args.max_iters, "workers": args.workers}
    out = _header("solve", config, [])
    out.update({
        "policy": policy_to_dict(res.policy),
        "pure_profiles": _pure_profiles(res.policy),
        "v": res.v.tolist(),
        "q": res.q.tolist(),
        "stage_gaps": res.stage_gaps.tolist(),
        "max_stage_gap": res.max_stage_gap,
        "iterations": res.iterations.tolist(),
    })
    _write_json(out, args.out)
    return 0


def cmd_eval(args) -> int:
    game = load_game(args.game)
    raw = parse_json(Path(args.policy).read_text(), str(args.policy))
    policy = policy_from_dict(raw.get("policy", raw))
    gaps = {"cce": gap_cce(game, policy), "ce": gap_ce(game, policy)}
    if policy.kind is PolicyKind.PRODUCT:
        gaps["ne"] = gap_ne(game, policy)
    config = {"game": str(args.game), "policy": str(args.policy)}
    out = _header("eval", config, [])
    out.update({"gaps": gaps, "v": robust_policy_eval(game, policy).tolist()})
    _write_json(out, args.out)
    return 0


def cmd_validate(args) -> int:
    game = load_game(args.game)
    print(f"valid: H={game.horizon} S={game.state_count} actions={list(game.actions.sizes)} "
          f"sigma={game.sigma.tolist()} normalized={game.normalized}")
    return 0


def cmd_generate(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    game = random_game(np.random.default_rng(seed), args.horizon, args.states,
                       parse_int_list(args.actions), args.sigma, structure=args.structure)
    if args.out in (None, "-"):
        sys.stdout.write(json.dumps(game_to_dict(game)) + "\n")
    else:
        save_game(game, args.out)
    return 0


# ---------------------------------------------------------------------------
# sweeps


def run_trial(game, kind: str, gap_kind: str, N: int, seed: int, sub_tol: float, max_iters: int) -> tuple:
    """Sample, solve on the empirical model, and measure the gap on ``game``."""
    t0 = time.perf_counter()
    est = empirical_game(game, draw(game, N, seed))
    policy = dr_nvi(est, kind, sub_tol, max_iters).policy
    gap = policy_gap(game, policy, gap_kind)
    return gap, (time.perf_counter() - t0) * 1e3


def _run_trials(game, jobs, kind, gap_kind, sub_tol, max_iters, workers):
    args = [(game, kind, gap_kind, N, seed, sub_tol, max_iters) for N, seed in jobs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_trial, *zip(*args)))
    return [run_trial(*a) for a in args]


def loglog_slope(ns, medians) -> float:
    """Least-squares slope of log(median) against log(N) over positive medians."""
    pts = [(math.log(n), math.log(m)) for n, m in zip(ns, medians) if m > 0]
    if len(pts) < 2:
        return float("nan")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _csv_text(meta: dict, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# tool_version: {meta['tool_version']}\n")
    buf.write(f"# command: {meta['command']}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    buf.write(f"# seeds: {','.join(str(s) for s in meta['seeds'])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _sweep_setup(args):
    game = load_game(args.game)
    if args.sigma is not None:
        game = game.with_sigma(args.sigma)
    seeds = parse_int_list(args.seeds) if args.seeds else [default_seed()]
    gap_kind = args.gap or GAP_NAMES[args.kind]
    gap_kind = {"ne": "nash"}.get(gap_kind, gap_kind)
    return game, seeds, gap_kind


def _sweep_config(args, seeds, gap_kind, **extra) -> dict:
    cfg = {"game": str(args.game), "kind": args.kind, "gap": GAP_NAMES[gap_kind],
           "sub_tol": args.sub_tol, "max_iters": args.max_iters, "workers": args.workers,
           "timing": not args.no_timing, "sampler_rng": RNG_NAME}
    if args.sigma is not None:
        cfg["sigma"] = args.sigma
    cfg.update(extra)
    return cfg


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_sweep(args) -> int:
    game, seeds, gap_kind = _sweep_setup(args)
    ns = sorted(parse_int_list(args.n_list))
    jobs = [(N, s) for N in ns for s in seeds]
    results = _run_trials(game, jobs, args.kind, gap_kind, args.sub_tol, args.max_iters, args.workers)
    rows = sorted((N, s, g, 0.0 if args.no_timing else ms) for (N, s), (g, ms) in zip(jobs, results))
    medians = [float(np.median([r[2] for r in rows if r[0] == N])) for N in ns]
    slope = loglog_slope(ns, medians)
    meta = _header("sweep", _sweep_config(args, seeds, gap_kind, n_list=ns), seeds)
    body = [[N, s, _fmt(g), f"{ms:.3f}"] for N, s, g, ms in rows]
    body.append(["summary", "loglog_slope_median_gap", _fmt(slope), ""])
    _emit(_csv_text(meta, ["N", "seed", f"gap_{GAP_NAMES[gap_kind]}", "wall_ms"], body), args.out)
    return 0


def cmd_sigma_sweep(args) -> int:
    game, seeds, gap_kind = _sweep_setup(args)
    sigmas = parse_float_list(args.sigma_list)
    N = int(args.n)
    body, summary = [], []
    for sigma in sigmas:
        g = game.with_sigma(sigma)
        results = _run_trials(g, [(N, s) for s in seeds], args.kind, gap_kind,
                              args.sub_tol, args.max_iters, args.workers)
        rows = sorted((s, gap, 0.0 if args.no_timing else ms) for s, (gap, ms) in zip(seeds, results))
        body += [[_fmt(sigma), N, s, _fmt(gap), f"{ms:.3f}"] for s, gap, ms in rows]
        summary.append(["median", _fmt(sigma), "", _fmt(np.median([r[1] for r in rows])), ""])
    meta = _header("sigma-sweep", _sweep_config(args, seeds, gap_kind, n=N, sigma_list=sigmas), seeds)
    _emit(_csv_text(meta, ["sigma", "N", "seed", f"gap_{GAP_NAMES[gap_kind]}", "wall_ms"], body + summary),
          args.out)
    return 0


# ---------------------------------------------------------------------------
# built-in instances


def cmd_fishing(args) -> int:
    robust = args.mode == "robust"
    seeds = parse_int_list(args.seeds) if args.seeds else [default_seed()]
    results = []
    for p in args.p:
        sol = fishing_solve(p, args.horizon, robust, args.sigma)
        # rollouts longer than the solved horizon repeat a constant profile
        steady = sol.constant_profile()
        if args.rollout_horizon > args.horizon and steady is None:
            raise ValidationError("rollout horizon exceeds the solved horizon and the policy is not constant")
        plan = sol.profiles if args.rollout_horizon <= args.horizon else steady
        results.append({
            "p": p,
            "constant_profile": sol.constant_profile(),
            "initial_values": sol.values[:, 0, 0].tolist(),
            "profiles": sol.profiles.tolist(),
            "rollout_terminal_states": {str(s): fishing_rollout(p, args.rollout_horizon, plan, s) for s in seeds},
        })
    config = {"mode": args.mode, "p": args.p, "sigma": args.sigma if robust else 0.0,
              "horizon": args.horizon, "rollout_horizon": args.rollout_horizon}
    out = _header("fishing", config, seeds)
    out["results"] = results
    _write_json(out, args.out)
    return 0


def hard_instance_report(spec: HardInstanceSpec) -> dict:
    game = build_hard_rmdp(spec)
    res = dr_nvi(game, "nash")
    cf = hard_rmdp_closed_form(spec)
    m, w, H = spec.pending, spec.w, spec.H
    V = res.v[0]
    chosen = res.policy.dist[:, :m, :].argmax(axis=-1)
    q_last = res.q[0, H - 1, :m]
    lo = spec.p - spec.sigma
    recursion = lo * V[1:, m + w] + (1 - lo) * V[1:, w]
    x_rest = np.delete(V[:H, :m], w, axis=1)
    ordering = bool(np.all(V[:H, w][:, None] <= x_rest + 1e-12) and np.all(V[:H, :m].max(axis=1) < V[:H, m:].min(axis=1)))
    return {
        "spec": {"S": spec.S, "A": spec.A, "H": H, "sigma": spec.sigma, "eps": spec.eps, "w": w,
                 "theta": list(spec.theta), "c0": spec.c0, "c1": spec.c1, "c2": spec.c2, "c5": spec.c5,
                 "p": spec.p, "delta": spec.delta, "q": spec.q},
        "policy_matches_before_last_step": bool(np.array_equal(chosen[:-1], cf.pending_actions[:-1])),
        "last_step_all_actions_tie": bool(np.all(q_last == q_last[:, :1])),
        "max_gap_error": float(np.max(np.abs(V[:H, m + w] - V[:H, w] - cf.gap))),
        "max_special_value_error": float(np.max(np.abs(V[:, w] - cf.v_special))),
        "max_absorbing_value_error": float(np.max(np.abs(V[:, m:] - cf.v_absorbing[:, None]))),
        "max_recursion_residual": float(np.max(np.abs(V[:H, w] - recursion))),
        "ordering_holds": ordering,
        "dr_nvi_pending_actions": chosen.tolist(),
        "closed_form_pending_actions": cf.pending_actions.tolist(),
        "closed_form_gap": cf.gap.tolist(),
    }


def cmd_hard_instance(args) -> int:
    theta = [int(c) for c in args.theta] if args.theta else None
    spec = HardInstanceSpec(args.S, args.A, args.horizon, args.sigma, args.eps, args.w, theta,
                            c0=args.c0, c2=args.c2, c5=args.c5)
    out = _header("hard-instance", {k: v for k, v in vars(args).items() if k not in ("func", "out")}, [])
    out["report"] = hard_instance_report(spec)
    _write_json(out, args.out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustmg", description="Robust Markov game solver and experiment harness.")
    ap.add_argument("--version", action="version", version=f"robustmg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_flags(p, kind_default="nash"):
        p.add_argument("--game", required=True)
        p.add_argument("--kind", choices=["nash", "ce", "cce"], default=kind_default)
        p.add_argument("--sub-tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")

    p = sub.add_parser("solve", help="run DR-NVI and write policy, values and stage gaps as JSON")
    solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="robust values and equilibrium gaps of a policy")
    p.add_argument("--game", required=True)
    p.add_argument("--policy", required=True, help="policy JSON or the output of 'solve'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", help="check a game file")
    p.add_argument("--game", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a random normalized game")
    p.add_argument("--states", type=int, default=4)
    p.add_argument("--horizon", type=int, default=5)
    p.add_argument("--actions", default="2,2")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--structure", choices=["general", "constant-sum"], default="general")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    for name, func, help_ in (("sweep", cmd_sweep, "gap on the true game versus samples per cell"),
                              ("sigma-sweep", cmd_sigma_sweep, "gap versus a shared uncertainty radius")):
        p = sub.add_parser(name, help=help_)
        solver_flags(p, "cce")
        p.add_argument("--gap", choices=["ne", "cce", "ce"], help="gap to report (default: matches --kind)")
        p.add_argument("--seeds", help="e.g. '0-19' or '1,2,3' (default: $RMG_SOLVE_SEED or 0)")
        p.add_argument("--sigma", type=float, help="override every agent's radius")
        p.add_argument("--no-timing", action="store_true", help="write 0 in the wall_ms column")
        if name == "sweep":
            p.add_argument("--n-list", required=True, help="samples per cell, e.g. '64,256,1024'")
        else:
            p.add_argument("--n", required=True, type=int)
            p.add_argument("--sigma-list", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("fishing", help="fishing-protection example")
    p.add_argument("mode", choices=["standard", "robust"])
    p.add_argument("--p", type=float, action="append", help="may repeat (default: 0.049 and 0.051)")
    p.add_argument("--sigma", type=float, default=0.005)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--rollout-horizon", type=int, default=10_000)
    p.add_argument("--seeds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fishing)

    p = sub.add_parser("hard-instance", help="lower-bound instance: closed form versus DR-NVI")
    p.add_argument("--S", type=int, default=2)
    p.add_argument("--A", type=int, default=2)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--w", type=int, default=0)
    p.add_argument("--theta", help="bit string of length H (default: second word of the greedy code)")
    p.add_argument("--c0", type=float, default=0.25)
    p.add_argument("--c2", type=float, default=0.25)
    p.add_argument("--c5", type=float, default=0.125)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hard_instance)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "p", "unset") is None:
        args.p = [0.049, 0.051]
    try:
        return args.func(args)
    except NashIntractable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (NumericalFailure, NonUniqueEquilibrium, ConstructionFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
