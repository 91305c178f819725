"""Command-line interface.

Exit codes: 0 success, 1 invalid input or I/O error, 2 solver failure
(no bracket, undecided integration).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .estimator import ConservativeLockInEstimator
from .exceptions import InvalidParameters, PLLError, SolverError
from .io import export_trajectory, render_table
from .lockin import conservative_lock_in
from .model import LoopParameters, dissipativity_bound, equilibria, hold_in_frequency
from .oracle import frequency_step, integrate_trajectory, numeric_conservative_lock_in, trace_separatrix
from .stability import pull_in_lower_bound

COMMANDS = ("equilibria", "holdin", "pullin", "lockin", "portrait", "sweep")
EXACT_TOL = 1e-10
ORACLE_TOL = 1e-9

# option name -> (type, default)
OPTIONS = {
    "tau1": (float, None),
    "tau2": (float, None),
    "kvco": (float, None),
    "omega": (float, None),
    "tol": (float, None),
    "format": (str, "csv"),
    "output": (str, None),
    "oracle": (bool, False),
    "epsilon": (float, 1e-7),
    "m_range": (str, "-2:2"),
    "kvco_min": (float, 50.0),
    "kvco_max": (float, 500.0),
    "points": (int, 46),
    "jobs": (int, 1),
    "max_step": (float, None),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: LoopParameters
    omega: Optional[float] = None
    tol: float = ORACLE_TOL
    format: str = "csv"
    output_path: Optional[str] = None
    oracle: bool = False
    epsilon: float = 1e-7
    m_range: tuple[int, int] = (-2, 2)
    sweep_spec: Optional[tuple[float, float, int]] = None
    jobs: int = 1
    max_step: Optional[float] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidParameters(f"unknown command {self.command!r}")
        if not (1e-13 <= self.tol <= 1e-3):
            raise InvalidParameters(f"--tol must lie in [1e-13, 1e-3], got {self.tol}")
        if self.format not in ("csv", "json"):
            raise InvalidParameters(f"--format must be csv or json, got {self.format!r}")
        if self.sweep_spec is not None:
            lo, hi, n = self.sweep_spec
            if not (2 <= n <= 100_000):
                raise InvalidParameters(f"--points must lie in [2, 100000], got {n}")
            if not (0 < lo < hi):
                raise InvalidParameters(f"need 0 < --kvco-min < --kvco-max, got {lo}, {hi}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pll-lockin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "equilibria": "list equilibria and their types",
        "holdin": "hold-in frequency",
        "pullin": "Lyapunov pull-in lower bound",
        "lockin": "exact conservative lock-in frequency",
        "portrait": "separatrix and step-response samples",
        "sweep": "conservative lock-in over a range of K_vco",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="file of key=value lines; flags override it")
        p.add_argument("--tau1", type=float)
        p.add_argument("--tau2", type=float)
        p.add_argument("--kvco", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--output", help="output file (portrait: file stem)")
        p.add_argument("--epsilon", type=float, help="separatrix seed offset")
        p.add_argument("--m-range", dest="m_range", help="equilibrium indices, e.g. -2:2")
        p.add_argument("--oracle", action="store_true", default=None, help="add the numeric cross-check")
        if name == "sweep":
            p.add_argument("--kvco-min", dest="kvco_min", type=float)
            p.add_argument("--kvco-max", dest="kvco_max", type=float)
            p.add_argument("--points", type=int)
            p.add_argument("--jobs", type=int)
        if name == "portrait":
            p.add_argument("--max-step", dest="max_step", type=float, help="cap on the integrator step, s")
    return parser


def read_config(path: str | os.PathLike) -> dict[str, object]:
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameters(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in OPTIONS:
            raise InvalidParameters(f"{path}:{lineno}: unknown key {key!r}")
        kind = OPTIONS[key][0]
        if kind is bool:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                values[key] = kind(value)
            except ValueError as exc:
                raise InvalidParameters(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def _parse_m_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(s) for s in text.split(":"))
    except ValueError as exc:
        raise InvalidParameters(f"--m-range must look like LO:HI, got {text!r}") from exc
    if lo > hi:
        raise InvalidParameters(f"--m-range is empty: {text!r}")
    return lo, hi


def make_config(args: argparse.Namespace) -> RunConfig:
    merged = {key: default for key, (_, default) in OPTIONS.items()}
    if args.config:
        merged.update(read_config(args.config))
    for key in OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    for key in ("tau1", "tau2", "kvco"):
        if merged[key] is None and not (args.command == "sweep" and key == "kvco"):
            raise InvalidParameters(f"--{key} is required")
    kvco = merged["kvco"] if merged["kvco"] is not None else merged["kvco_max"]
    params = LoopParameters(merged["tau1"], merged["tau2"], kvco)
    tol = merged["tol"]
    if tol is None:
        tol = EXACT_TOL if args.command in ("lockin", "sweep") and not merged["oracle"] else ORACLE_TOL
    sweep = None
    if args.command == "sweep":
        sweep = (merged["kvco_min"], merged["kvco_max"], merged["points"])
    return RunConfig(
        command=args.command,
        params=params,
        omega=merged["omega"],
        tol=tol,
        format=merged["format"],
        output_path=merged["output"],
        oracle=bool(merged["oracle"]),
        epsilon=merged["epsilon"],
        m_range=_parse_m_range(merged["m_range"]),
        sweep_spec=sweep,
        jobs=merged["jobs"],
        max_step=merged["max_step"],
    )


def _need_omega(config: RunConfig) -> float:
    if config.omega is None:
        raise InvalidParameters(f"{config.command} needs --omega")
    return config.omega


def _emit(config: RunConfig, text: str, out) -> None:
    if config.output_path:
        with open(config.output_path, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _scalar_row(config: RunConfig, row: dict) -> str:
    return render_table({k: [v] for k, v in row.items()}, config.format)


def _cmd_equilibria(config: RunConfig) -> str:
    omega = _need_omega(config)
    lo, hi = config.m_range
    eqs = equilibria(config.params, omega, range(lo, hi + 1))
    cols = {
        "m": [e.index_m for e in eqs],
        "x_eq": [e.x_eq for e in eqs],
        "theta_eq": [e.theta_eq for e in eqs],
        "kind": [e.kind.value for e in eqs],
    }
    return render_table(cols, config.format)


def _cmd_holdin(config: RunConfig) -> str:
    p = config.params
    return _scalar_row(config, {"hold_in": hold_in_frequency(p), "dissipativity_bound": dissipativity_bound(p)})


def _cmd_pullin(config: RunConfig) -> str:
    report = pull_in_lower_bound(config.params, config.omega)
    return _scalar_row(config, dataclasses.asdict(report))


def _cmd_lockin(config: RunConfig) -> str:
    sol = conservative_lock_in(config.params)
    row = {
        "omega_lc": sol.omega_lc,
        "y_ab": sol.y_ab,
        "case": sol.case_tag.value,
        "residual_a": sol.residual_a,
        "residual_b": sol.residual_b,
        "iterations": sol.iterations,
        "sign_changes": sol.sign_changes,
    }
    if config.oracle:
        numeric = numeric_conservative_lock_in(config.params, tol=config.tol, epsilon=config.epsilon)
        row["omega_lc_oracle"] = numeric
        row["difference"] = sol.omega_lc - numeric
    return _scalar_row(config, row)


def _portrait_curves(config: RunConfig) -> dict:
    omega = _need_omega(config)
    p = config.params
    sep = trace_separatrix(p, omega, config.epsilon, config.tol)
    curves = {"separatrix": sep}
    for start in ("saddle", "stable"):
        curves[f"step_from_{start}"] = frequency_step(p, omega, start, config.tol).trajectory
    if config.max_step is not None:
        # re-integrate with a capped step for smoother plots
        dense = {}
        for name, traj in curves.items():
            initial = traj.samples[0][1]
            dense[name] = integrate_trajectory(p, omega, initial, float(traj.t[-1]), config.tol, max_step=config.max_step)
        curves = dense
    return curves


def _cmd_portrait(config: RunConfig, out) -> None:
    curves = _portrait_curves(config)
    if config.output_path:
        stem = Path(config.output_path)
        for name, traj in curves.items():
            target = stem.with_name(f"{stem.stem}_{name}.{config.format}")
            export_trajectory(traj, config.format, target, reduced=True)
        return
    for name, traj in curves.items():
        if config.format == "csv":
            out.write(f"# {name}\n")
        out.write(export_trajectory(traj, config.format, reduced=True))


def _cmd_sweep(config: RunConfig) -> str:
    lo, hi, n = config.sweep_spec
    kvco = np.linspace(lo, hi, n)
    X = np.column_stack([np.full(n, config.params.tau1), np.full(n, config.params.tau2), kvco])
    est = ConservativeLockInEstimator(
        method="oracle" if config.oracle else "exact",
        tol=config.tol,
        epsilon=config.epsilon,
        n_jobs=config.jobs,
    ).fit(X)
    omega = est.predict(X)
    meta = {"params": {"tau1": config.params.tau1, "tau2": config.params.tau2}} if config.format == "json" else None
    return render_table({"kvco": kvco, "omega_lc": omega}, config.format, meta)


def run(config: RunConfig, out=None) -> int:
    """Execute one command; returns the process exit code."""
    out = sys.stdout if out is None else out
    handlers = {
        "equilibria": _cmd_equilibria,
        "holdin": _cmd_holdin,
        "pullin": _cmd_pullin,
        "lockin": _cmd_lockin,
        "sweep": _cmd_sweep,
    }
    try:
        if config.command == "portrait":
            _cmd_portrait(config, out)
        else:
            _emit(config, handlers[config.command](config), out)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except (PLLError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = make_config(args)
    except (PLLError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
