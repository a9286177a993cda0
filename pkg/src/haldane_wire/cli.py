"""Command-line sweeps over the chain parameter with deterministic CSV/JSON output."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__

log = logging.getLogger("haldane_wire")

AKLT_BETA = -1.0 / 3.0
BETA_BOUND = 0.99
ALLOWED_L = (1, 3, 9)
# flat keys accepted in a --config file
CONFIG_KEYS = {
    "n_spin1", "beta_min", "beta_max", "beta_steps", "beta_grid", "L_list", "theta", "seed",
    "workers", "out", "inject_aklt", "trials", "beta", "terminations", "k", "average_blocks",
    "max_log",
}


@dataclass
class SweepConfig:
    n_spin1: int = 12
    beta_min: float = -0.9
    beta_max: float = 0.9
    beta_steps: int = 19
    beta_grid: list[float] | None = None
    L_list: list[int] = field(default_factory=lambda: [1, 3, 9])
    theta: float = math.pi / 2
    seed: int = 0
    workers: int = 1
    out: str | None = None
    inject_aklt: bool = True
    # single-point commands
    beta: float = AKLT_BETA
    terminations: str = "both"
    k: int = 2
    trials: int = 1000
    average_blocks: bool = False
    max_log: int = 1000

    def grid(self) -> list[float]:
        if self.beta_grid is not None:
            pts = [float(b) for b in self.beta_grid]
        elif self.beta_steps == 1:
            pts = [float(self.beta_min)]
        else:
            # decimal rounding keeps nominal points like 0.1 exact in the file
            pts = [round(float(b), 12) for b in np.linspace(self.beta_min, self.beta_max, self.beta_steps)]
        if self.inject_aklt and not any(abs(b - AKLT_BETA) < 1e-12 for b in pts):
            pts.append(AKLT_BETA)
        return sorted(set(pts))

    def validate(self, command: str) -> None:
        if command in ("sweep-fidelity", "rg-bloch"):
            grid = self.grid()
            if not grid:
                raise ValueError("beta grid is empty")
            bad = [b for b in grid if abs(b) > BETA_BOUND]
            if bad:
                raise ValueError(f"beta values outside [-{BETA_BOUND}, {BETA_BOUND}]: {bad}")
        if command == "sweep-fidelity":
            if not self.L_list or any(L not in ALLOWED_L for L in self.L_list):
                raise ValueError(f"L values must be drawn from {ALLOWED_L}")
            if max(self.L_list) > self.n_spin1:
                raise ValueError("block longer than the chain")
        if command == "rg-bloch" and (self.n_spin1 % 3 or self.n_spin1 < 9):
            raise ValueError("rg-bloch needs n_spin1 >= 9 and divisible by 3")
        if command == "ground" and self.terminations not in ("both", "left", "right", "none"):
            raise ValueError("terminations must be one of both/left/right/none")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        from .chain import build_layout

        left = self.terminations in ("both", "left") or command != "ground"
        right = self.terminations in ("both", "right") or command != "ground"
        build_layout(self.n_spin1, left, right)  # raises when over the memory cap

    def digest(self, command: str) -> str:
        """Hash of everything that affects results; worker count and paths excluded."""
        d = asdict(self)
        for k in ("workers", "out", "max_log"):
            d.pop(k)
        d["command"] = command
        d["grid"] = self.grid() if command in ("sweep-fidelity", "rg-bloch") else None
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a flat JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"config must be flat; nested keys: {nested}")
    return data


def resolve_config(args: argparse.Namespace) -> SweepConfig:
    values = {"workers": int(os.environ.get("HALDANE_WORKERS", "1"))}
    values.update(load_config(args.config))
    overrides = {
        "n_spin1": args.n,
        "beta_min": args.beta_min,
        "beta_max": args.beta_max,
        "beta_steps": args.beta_steps,
        "L_list": args.L,
        "theta": args.theta,
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "trials": getattr(args, "trials", None),
        "beta": getattr(args, "beta", None),
        "terminations": getattr(args, "terminations", None),
        "k": getattr(args, "k", None),
        "max_log": getattr(args, "max_log", None),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if any(v is not None for v in (args.beta_min, args.beta_max, args.beta_steps)):
        values.pop("beta_grid", None)
    if args.no_inject_aklt:
        values["inject_aklt"] = False
    if getattr(args, "average_blocks", False):
        values["average_blocks"] = True
    known = {f.name for f in fields(SweepConfig)}
    return SweepConfig(**{k: v for k, v in values.items() if k in known})


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def write_csv(path: str | None, command: str, cfg: SweepConfig, columns: list[tuple[str, str]], rows: list[dict]) -> str:
    lines = [
        f"# command: {command}",
        f"# config_hash: {cfg.digest(command)}",
        f"# version: {__version__}",
        f"# n_spin1: {cfg.n_spin1}",
        "# units: " + "; ".join(f"{c}={u}" for c, u in columns),
        ",".join(c for c, _ in columns),
    ]
    for r in rows:
        lines.append(",".join(fmt(r[c]) for c, _ in columns))
    text = "\n".join(lines) + "\n"
    _emit(path, text)
    return text


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _pool_map(fn, tasks: list, workers: int) -> list:
    """Map in task order; results never depend on the worker count."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


# ---- sweep-fidelity ------------------------------------------------------

FIDELITY_COLUMNS = [
    ("beta", "1"), ("L", "sites"), ("theta", "rad"), ("F", "1"), ("success_prob", "1"),
    ("normalized_success", "1"), ("E0", "J"), ("residual", "J"), ("status", "text"),
]


def _fidelity_task(task: tuple) -> list[dict]:
    from .chain import SolverConvergenceError, chain_ground_state
    from .fidelity import rotation_fidelity

    beta, n, L_list, theta = task
    nan = float("nan")
    try:
        g = chain_ground_state(n, beta)
    except SolverConvergenceError as exc:
        e0 = exc.energies[0] if exc.energies is not None and len(exc.energies) else nan
        return [dict(beta=beta, L=L, theta=theta, F=nan, success_prob=nan, normalized_success=nan,
                     E0=e0, residual=exc.best_residual, status="no_convergence") for L in L_list]
    rows = []
    for L in L_list:
        rec = rotation_fidelity(beta, n, L, theta, ground=g.state)
        rows.append(dict(beta=beta, L=L, theta=theta, F=rec.F, success_prob=rec.success_probability,
                         normalized_success=rec.normalized_success, E0=g.energy,
                         residual=g.residual_norm, status="ok"))
    return rows


def cmd_sweep_fidelity(cfg: SweepConfig) -> list[dict]:
    tasks = [(b, cfg.n_spin1, sorted(cfg.L_list), cfg.theta) for b in cfg.grid()]
    rows = [r for chunk in _pool_map(_fidelity_task, tasks, cfg.workers) for r in chunk]
    rows.sort(key=lambda r: (r["beta"], r["L"]))
    write_csv(cfg.out, "sweep-fidelity", cfg, FIDELITY_COLUMNS, rows)
    return rows


# ---- rg-bloch --------------------------------------------------------------

RG_COLUMNS = [
    ("beta", "1"), ("pre_v_plus", "1"), ("pre_v_chi", "1"), ("pre_weight", "1"),
    ("post_v_plus", "1"), ("post_v_chi", "1"), ("post_weight", "1"),
    ("dist_pre", "1"), ("dist_post", "1"), ("status", "text"),
]


def _rg_task(task: tuple) -> dict:
    from .chain import SolverConvergenceError
    from .rg import bloch_flow

    beta, n, average = task
    try:
        step = bloch_flow(beta, n, average)
    except SolverConvergenceError:
        nan = float("nan")
        return dict(beta=beta, pre_v_plus=nan, pre_v_chi=nan, pre_weight=nan, post_v_plus=nan,
                    post_v_chi=nan, post_weight=nan, dist_pre=nan, dist_post=nan,
                    status="no_convergence", v_y=(nan, nan))
    return dict(
        beta=beta,
        pre_v_plus=step.pre.v_plus, pre_v_chi=step.pre.v_chi, pre_weight=step.pre.weight,
        post_v_plus=step.post.v_plus, post_v_chi=step.post.v_chi, post_weight=step.post.weight,
        dist_pre=step.pre_distance, dist_post=step.post_distance, status="ok",
        v_y=(step.pre.v_y, step.post.v_y),
    )


def cmd_rg_bloch(cfg: SweepConfig) -> list[dict]:
    tasks = [(b, cfg.n_spin1, cfg.average_blocks) for b in cfg.grid()]
    rows = sorted(_pool_map(_rg_task, tasks, cfg.workers), key=lambda r: r["beta"])
    for r in rows:
        vy = max(abs(v) for v in r["v_y"])
        (log.warning if vy > 1e-8 else log.info)("beta=%.6g imaginary label component %.3g", r["beta"], vy)
    write_csv(cfg.out, "rg-bloch", cfg, RG_COLUMNS, rows)
    return rows


# ---- ground ---------------------------------------------------------------

def cmd_ground(cfg: SweepConfig) -> dict:
    from .chain import SolverConvergenceError, chain_ground_state

    left = cfg.terminations in ("both", "left")
    right = cfg.terminations in ("both", "right")
    summary = dict(beta=cfg.beta, n_spin1=cfg.n_spin1, terminations=cfg.terminations, k=cfg.k,
                   config_hash=cfg.digest("ground"), version=__version__)
    try:
        g = chain_ground_state(cfg.n_spin1, float(cfg.beta), left, right, seed=cfg.seed, k=cfg.k)
    except SolverConvergenceError as exc:
        summary.update(status="no_convergence", residual=exc.best_residual,
                       low_spectrum=None if exc.energies is None else [float(e) for e in exc.energies])
    else:
        summary.update(
            status="ok", E0=g.energy, low_spectrum=[float(e) for e in g.low_spectrum],
            residual=g.residual_norm, method=g.method, iterations=g.iterations, seconds=g.seconds,
            degeneracy=g.degeneracy() if cfg.k >= 2 else None,
            unique=g.is_unique() if cfg.k >= 2 else None,
        )
    _emit(cfg.out, json.dumps(summary, indent=2) + "\n")
    return summary


# ---- sample ---------------------------------------------------------------

def cmd_sample(cfg: SweepConfig) -> dict:
    from .aklt import AkltChainSpec, aklt_state
    from .buffering import BranchCache, sample_buffered_gate
    from .chain import chain_ground_state
    from .measurement import trajectory_rng

    L = cfg.L_list[0] if cfg.L_list else 3
    beta = float(cfg.beta)
    if abs(beta - AKLT_BETA) < 1e-12:
        state = aklt_state(AkltChainSpec(cfg.n_spin1, right_terminated=True))
    else:
        state = chain_ground_state(cfg.n_spin1, beta).state
    cache = BranchCache(state, keep_states=False)
    first = applied = 0
    attempts_hist: dict[int, int] = {}
    log_entries = []
    for i in range(cfg.trials):
        tr = sample_buffered_gate(cache, cfg.theta, trajectory_rng(cfg.seed, i), L)
        first += tr.first_attempt_success
        applied += tr.applied
        attempts_hist[len(tr.attempts)] = attempts_hist.get(len(tr.attempts), 0) + 1
        if i < cfg.max_log:
            log_entries.append(dict(
                trial=i,
                attempts=[dict(block=list(a.block_sites), outcomes=a.outcomes, padded=a.padded,
                               success=a.success, applied=a.applied) for a in tr.attempts],
                frames=tr.frame_history, final_frame=tr.frame.label, applied=tr.applied,
            ))
    n = max(cfg.trials, 1)
    rate = first / n
    summary = dict(
        beta=beta, n_spin1=cfg.n_spin1, L=L, theta=cfg.theta, seed=cfg.seed, trials=cfg.trials,
        config_hash=cfg.digest("sample"), version=__version__,
        first_attempt_success_rate=rate,
        first_attempt_success_stderr=math.sqrt(rate * (1 - rate) / n),
        applied_rate=applied / n,
        attempts_histogram={str(k): v for k, v in sorted(attempts_hist.items())},
        trajectories=log_entries,
    )
    _emit(cfg.out, json.dumps(summary, indent=1) + "\n")
    return summary


COMMANDS = {
    "sweep-fidelity": cmd_sweep_fidelity,
    "rg-bloch": cmd_rg_bloch,
    "ground": cmd_ground,
    "sample": cmd_sample,
}


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haldane-wire", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
        p.add_argument("--config", help="flat JSON file; flags override its values")
        p.add_argument("--n", type=int, help="number of spin-1 sites")
        p.add_argument("--beta-min", type=float)
        p.add_argument("--beta-max", type=float)
        p.add_argument("--beta-steps", type=int)
        p.add_argument("--L", type=_int_list, help="comma-separated block lengths")
        p.add_argument("--theta", type=float, help="rotation angle in radians")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, help="process count (default $HALDANE_WORKERS or 1)")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--no-inject-aklt", action="store_true", help="do not add beta = -1/3 to the grid")
        if name in ("ground", "sample"):
            p.add_argument("--beta", type=float)
        if name == "ground":
            p.add_argument("--terminations", choices=["both", "left", "right", "none"])
            p.add_argument("--k", type=int, help="number of low levels to compute")
        if name == "sample":
            p.add_argument("--trials", type=int)
            p.add_argument("--max-log", type=int, help="trajectories written in full")
        if name == "rg-bloch":
            p.add_argument("--average-blocks", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        cfg.validate(args.command)
    except (ValueError, OSError) as exc:
        print(f"haldane-wire: error: {exc}", file=sys.stderr)
        return 2
    COMMANDS[args.command](cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
