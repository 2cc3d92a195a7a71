"""Command-line front end.

    chattering fuller      Fuller trajectory CSV, phase-plane SVG, constants JSON
    chattering synthesize  shooting from x_init: trajectory CSV, sphere SVG, result JSON
    chattering curve       switching curves per delta: CSV per delta, overlay SVG
    chattering direct      N-step direct-method study: study CSV, control CSV/SVG per N
    chattering verify      invariant checks; exit code 1 on any failure

Exit codes: 0 success, 1 verification failure, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import direct, fuller, synthesis
from .checks import run_checks
from .dynamics import ModelParams
from .integrator import IntegratorFailure, IntegratorSettings
from .svgplot import Figure

log = logging.getLogger("chattering")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class FullerSettings:
    y0: float = 1.0
    n_arcs: int = 8
    per_arc: int = 60


@dataclass
class CurveSettings:
    deltas: tuple = (6.0, 10.0, 14.0)
    n_seeds: int = 16
    x20_max: float = 1e-3
    x3_floor: float = -0.3
    horizon: float = 6.0


@dataclass
class DirectSettings:
    n_steps: tuple = (50, 100, 200, 400)
    t_f: float = 2.59
    mu: float = 1e3
    mu_start: float = 10.0
    max_iter: int = 20000
    tol: float = 1e-7
    init: str = "pmp"
    max_substep: float = 0.005


@dataclass
class RunConfig:
    delta: float = 10.0
    x20: Union[float, str] = "auto"
    x_init: tuple = (0.0, 1.0, 0.0)
    precision: float = 1e-3
    out_dir: str = "out"
    workers: int = 1
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    fuller: FullerSettings = field(default_factory=FullerSettings)
    curve: CurveSettings = field(default_factory=CurveSettings)
    direct: DirectSettings = field(default_factory=DirectSettings)

    def validate(self) -> "RunConfig":
        if not (isinstance(self.delta, (int, float)) and self.delta > 0):
            raise ConfigError(f"delta must be positive, got {self.delta!r}")
        if self.x20 != "auto":
            if not isinstance(self.x20, (int, float)) or self.x20 == 0 or not math.isfinite(self.x20):
                raise ConfigError(f"x20 must be 'auto' or a nonzero number, got {self.x20!r}")
        x = np.asarray(self.x_init, float)
        if x.shape != (3,) or abs(float(x @ x) - 1.0) > 1e-8:
            raise ConfigError(f"x_init must be a unit 3-vector, got {self.x_init!r}")
        if not self.precision > 0:
            raise ConfigError("precision must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.fuller.y0 <= 0 or self.fuller.n_arcs < 1:
            raise ConfigError("fuller.y0 must be positive and fuller.n_arcs >= 1")
        if not self.curve.deltas or any(d <= 0 for d in self.curve.deltas):
            raise ConfigError("curve.deltas must be positive")
        if not self.direct.n_steps or any(int(n) < 2 for n in self.direct.n_steps):
            raise ConfigError("direct.n_steps must all be >= 2")
        if self.direct.init not in ("pmp", "zero"):
            raise ConfigError("direct.init must be 'pmp' or 'zero'")
        if self.direct.t_f <= 0 or self.direct.mu < 0 or self.direct.mu_start <= 0:
            raise ConfigError("direct.t_f and direct.mu_start must be positive, direct.mu non-negative")
        return self

    @property
    def params(self) -> ModelParams:
        return ModelParams(float(self.delta))


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, f"{where}{key}.")
        elif isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{where}{key} must be a list")
            kwargs[key] = tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{where}{key} must be a boolean")
            kwargs[key] = value
        elif isinstance(default, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}{key} must be a number, got {value!r}")
            if isinstance(default, int) and not isinstance(default, bool) and not float(value).is_integer():
                raise ConfigError(f"{where}{key} must be an integer, got {value!r}")
            kwargs[key] = type(default)(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where or 'config'}: {exc}") from exc


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = _build(RunConfig, data, "")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "n_steps":
            cfg.direct = dataclasses.replace(cfg.direct, n_steps=tuple(value))
        elif key == "delta" and isinstance(value, list):
            cfg.delta = value[0]
            cfg.curve = dataclasses.replace(cfg.curve, deltas=tuple(value))
        else:
            setattr(cfg, key, value)
    return cfg.validate()


# --- output helpers ----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, str) else _fmt(c) for c in r])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --- subcommands --------------------------------------------------------------------


def cmd_fuller(cfg: RunConfig) -> int:
    out = _out(cfg)
    y0 = cfg.fuller.y0
    start = fuller.FullerState(fuller.fuller_switching_curve(y0), y0)
    traj = fuller.fuller_trajectory(start, cfg.fuller.n_arcs)
    rows = traj.sample(cfg.fuller.per_arc)
    write_csv(out / "fuller_traj.csv", ["t", "x", "y", "u"], rows)
    c = fuller.fuller_constants()
    write_json(out / "fuller_traj.json", {
        "constants": {"xi": c.xi, "alpha": c.alpha, "quartic_residual": c.quartic_residual},
        "start": {"x": start.x, "y": start.y},
        "n_arcs": cfg.fuller.n_arcs,
        "t_f": traj.t_f,
        "cost": traj.cost,
        "tail_time": traj.tail_time,
        "tail_cost": traj.tail_cost,
        "switch_times": traj.switch_times(),
    })
    ys = np.linspace(-1.1 * y0, 1.1 * y0, 201)
    fig = Figure("Fuller phase plane", "x", "y")
    fig.add(rows[:, 1], rows[:, 2], "optimal trajectory", "#1f77b4")
    fig.add([fuller.fuller_switching_curve(v) for v in ys[ys >= 0]], ys[ys >= 0], "switch -1 to +1", "#d62728", dashed=True)
    fig.add([fuller.fuller_switching_curve(v) for v in ys[ys <= 0]], ys[ys <= 0], "switch +1 to -1", "#2ca02c", dashed=True)
    fig.save(out / "fuller_phase.svg")
    print(f"fuller: xi={c.xi:.6f} alpha={c.alpha:.6f} t_f={traj.t_f:.6f} cost={traj.cost:.6e} -> {out}")
    return EXIT_OK


def _synthesis_result(cfg: RunConfig):
    params = cfg.params
    if cfg.x20 == "auto":
        return synthesis.shoot(cfg.x_init, cfg.precision, params, cfg.integrator)
    return synthesis.evaluate_seed(float(cfg.x20), cfg.x_init, params, cfg.integrator)


def cmd_synthesize(cfg: RunConfig) -> int:
    out = _out(cfg)
    res = _synthesis_result(cfg)
    rows = res.trajectory.samples()
    rows[:, 0] += res.tau  # forward time, t = 0 at x_init
    header = ["t", "x1", "x2", "x3", "p1", "p2", "p3", "u", "phi", "event"]
    write_csv(out / "synth_traj.csv", header,
              [[*r[:9], "switch" if r[9] else ""] for r in rows])
    info = res.to_json()
    info.update({
        "delta": cfg.delta,
        "x_init": list(map(float, cfg.x_init)),
        "running_cost": res.running_cost,
        "tail_cost": res.tail_cost,
        "tail_time": res.tail_time,
        "iterations": res.iterations,
        "extrapolated": res.extrapolated,
        "warning": res.warning,
        "switch_times": sorted(float(sp.t + res.tau) for sp in res.trajectory.switch_points),
    })
    write_json(out / "synth_result.json", info)
    fig = Figure(f"Optimal trajectory, delta={cfg.delta:g}", "x2", "x1")
    fig.add(rows[:, 2], rows[:, 1], "trajectory (x2, x1)")
    sw = rows[rows[:, 9] > 0]
    fig.add(sw[:, 2], sw[:, 1], "switching points", "#d62728", width=0.0)
    fig.save(out / "synth_sphere.svg")
    fig = Figure("Control", "t", "u")
    fig.add(rows[:, 0], rows[:, 7], "u(t)")
    fig.save(out / "synth_control.svg")
    print(f"synthesize: x20*={res.x20_star:.6e} tau={res.tau:.6f} t_f={res.t_f:.6f} "
          f"cost={res.cost:.7f} switchings={res.n_switchings} -> {out}")
    return EXIT_OK


def cmd_curve(cfg: RunConfig) -> int:
    out = _out(cfg)
    grid = synthesis.default_seed_grid(cfg.curve.n_seeds, cfg.curve.x20_max)
    fig = Figure("Switching curves", "x2", "x1", equal_aspect=True)
    summary = {}
    for d in cfg.curve.deltas:
        params = ModelParams(float(d))
        curves = synthesis.build_switching_curve(grid, params, cfg.integrator, cfg.curve.x3_floor,
                                                 cfg.curve.horizon, workers=cfg.workers)
        rows = []
        for name in ("upper", "lower"):
            for p in curves[name].samples:
                rows.append([name, p.x20_seed, p.switch_index, *p.X])
        write_csv(out / f"curve_delta{d:g}.csv", ["branch", "x20_seed", "switch_index", "x1", "x2", "x3"], rows)
        pts = np.vstack([curves["lower"].points()[::-1], curves["upper"].points()])
        fig.add(pts[:, 1], pts[:, 0], f"delta={d:g}")
        lam = fuller.XI * d
        summary[f"{d:g}"] = {
            "lambda_upper": synthesis.fit_local_coefficient(curves["upper"]),
            "lambda_lower": synthesis.fit_local_coefficient(curves["lower"]),
            "xi_delta": lam,
            "distance_to_plus_e1": min(c.distance_to([1.0, 0.0, 0.0]) for c in curves.values()),
            "distance_to_minus_e1": min(c.distance_to([-1.0, 0.0, 0.0]) for c in curves.values()),
            "sign_rule_violations": sum(len(synthesis.sign_rule_violations(c)) for c in curves.values()),
            "n_points": len(rows),
        }
        s = summary[f"{d:g}"]
        print(f"curve delta={d:g}: lambda/(xi*delta)={s['lambda_upper'] / lam:.5f}, "
              f"dist(+e1)={s['distance_to_plus_e1']:.2e}, dist(-e1)={s['distance_to_minus_e1']:.2e}, "
              f"violations={s['sign_rule_violations']}")
    write_json(out / "curve_summary.json", summary)
    fig.save(out / "curves.svg")
    return EXIT_OK


def run_direct_study(cfg: RunConfig, reference=None):
    """Direct solves for every N in the config; returns (solutions, reference result)."""
    params = cfg.params
    if reference is None:
        reference = synthesis.shoot(cfg.x_init, cfg.precision, params, cfg.integrator)
    u_ref = synthesis.forward_control(reference)
    sols = []
    for N in cfg.direct.n_steps:
        prob = direct.DirectProblem(int(N), cfg.direct.t_f, cfg.direct.mu, tuple(cfg.x_init), params,
                                    cfg.direct.max_substep)
        init = direct.sample_control(u_ref, prob) if cfg.direct.init == "pmp" else None
        sols.append(direct.solve_continuation(prob, init=init, mu_start=cfg.direct.mu_start,
                                              max_iter=cfg.direct.max_iter, tol=cfg.direct.tol))
    return sols, reference


def cmd_direct(cfg: RunConfig) -> int:
    out = _out(cfg)
    sols, ref = run_direct_study(cfg)
    rows = direct.compare_to_pmp(sols, ref.cost)
    direct.write_study_csv(out / "direct_study.csv", rows, with_reference=True)
    for sol in sols:
        N = sol.problem.N
        direct.write_control_csv(out / f"direct_control_N{N}.csv", sol)
        t = np.repeat(np.append(sol.problem.times(), sol.problem.t_f), 2)[1:-1]
        fig = Figure(f"Direct control, N={N}", "t", "u")
        fig.add(t, np.repeat(sol.controls, 2), f"N={N}")
        fig.save(out / f"direct_control_N{N}.svg")
    for r in rows:
        print(f"direct N={r.N}: cost={r.cost:.7f} gap={r.gap:.3e} distance={r.terminal_distance:.3e} "
              f"iterations={r.iterations}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg.delta)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "fuller": cmd_fuller,
    "synthesize": cmd_synthesize,
    "curve": cmd_curve,
    "direct": cmd_direct,
    "verify": cmd_verify,
}


def _x20_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"x20 must be a number or 'auto', got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chattering", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration; flags override it")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--delta", type=float, nargs="+", help="coupling; several values for `curve`")
        p.add_argument("--x20", type=_x20_arg)
        p.add_argument("--precision", type=float)
        p.add_argument("--n-steps", dest="n_steps", type=int, nargs="+")
        p.add_argument("--workers", type=int)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        "out_dir": args.out_dir,
        "delta": args.delta,
        "x20": args.x20,
        "precision": args.precision,
        "n_steps": args.n_steps,
        "workers": args.workers,
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except (synthesis.ShootingError, IntegratorFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
