"""Command-line entry point: ``excitonnet {run,sample,optimize,sweep}``.

Settings are resolved as defaults < JSON settings file (``--settings``) <
command-line flags. Every command writes a ``manifest.json`` that is itself a
valid settings file, so ``excitonnet <cmd> --settings manifest.json``
reproduces the outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .dynamics import build_liouvillian, eigenstate_report, evolve_oracle, purity, transfer_time
from .errors import BudgetExhausted, EmptyState, ExcitonNetError
from .landscape import make_gamma_grid, run_landscape, write_curves_csv, write_landscape_csv
from .network import Configuration, ModelParams, build_model
from .optimizer import optimize_gamma0, sweep_optimized

__all__ = ["UsageError", "RunSpec", "parse_spec", "execute", "main", "WORKERS_ENV"]

WORKERS_ENV = "EXCITONNET_WORKERS"
COMMANDS = ("run", "sample", "optimize", "sweep")

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_IO = 0, 2, 3, 4

PARAM_KEYS = ("n_sites", "alpha", "sphere_radius", "min_separation", "sink_rate_multiplier")
DEFAULTS = {
    "n_sites": 7,
    "alpha": 1.0,
    "sphere_radius": 0.5,
    "min_separation": None,
    "sink_rate_multiplier": 10.0,
    "gamma_min": 1e-5,
    "gamma_max": 1e3,
    "gamma_steps": 60,
    "n_samples": 200_000,
    "seed": 0,
    "workers": None,
    "output": ".",
    "config": None,
    "gamma": 0.0,
    "restarts": 32,
    "budget": 20_000,
}
# keys a manifest carries for provenance only
META_KEYS = ("command", "code_version")


class UsageError(ExcitonNetError):
    """Bad command line or settings file."""


@dataclass
class RunSpec:
    command: str
    params: ModelParams
    gamma_min: float = 1e-5
    gamma_max: float = 1e3
    gamma_steps: int = 60
    n_samples: int = 200_000
    seed: int = 0
    workers: int = 1
    output: Path = Path(".")
    config: Path | None = None
    gamma: float = 0.0
    restarts: int = 32
    budget: int = 20_000
    settings: dict = field(default_factory=dict)

    def grid(self):
        return make_gamma_grid(self.gamma_min, self.gamma_max, self.gamma_steps)

    def manifest(self) -> dict:
        keys = {"run": ("config", "gamma"),
                "sample": ("gamma_min", "gamma_max", "gamma_steps", "n_samples", "seed"),
                "optimize": ("gamma_min", "gamma_max", "gamma_steps", "seed", "restarts", "budget"),
                "sweep": ("config", "gamma_min", "gamma_max", "gamma_steps")}[self.command]
        data = {"command": self.command, "code_version": __version__}
        data.update({k: getattr(self.params, k) for k in PARAM_KEYS})
        for k in keys:
            v = getattr(self, k)
            data[k] = str(v) if isinstance(v, Path) else v
        return data


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="excitonnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--settings", help="JSON settings file (a manifest works too)")
        p.add_argument("-o", "--output", default=S, help="output directory")
        g = p.add_argument_group("model")
        g.add_argument("--n-sites", dest="n_sites", type=int, default=S)
        g.add_argument("--alpha", type=float, default=S)
        g.add_argument("--sphere-radius", dest="sphere_radius", type=float, default=S)
        g.add_argument("--min-separation", dest="min_separation", type=float, default=S)
        g.add_argument("--sink-rate-multiplier", dest="sink_rate_multiplier", type=float, default=S)

    def grid(p):
        p.add_argument("--gamma-min", dest="gamma_min", type=float, default=S, help="in units of Gamma")
        p.add_argument("--gamma-max", dest="gamma_max", type=float, default=S, help="in units of Gamma")
        p.add_argument("--gamma-steps", dest="gamma_steps", type=int, default=S)

    p = sub.add_parser("run", help="evaluate one configuration")
    common(p)
    p.add_argument("--config", default=S, help="configuration JSON")
    p.add_argument("--gamma", type=float, default=S, help="dephasing rate in units of Gamma")

    p = sub.add_parser("sample", help="Monte Carlo landscape")
    common(p)
    grid(p)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)

    p = sub.add_parser("optimize", help="optimize at zero dephasing and sweep the result")
    common(p)
    grid(p)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--restarts", type=int, default=S)
    p.add_argument("--budget", type=int, default=S, help="evaluations per restart")

    p = sub.add_parser("sweep", help="evaluate a configuration over the grid")
    common(p)
    grid(p)
    p.add_argument("--config", default=S, help="configuration JSON")
    return parser


def parse_spec(argv=None, env=None) -> RunSpec:
    """Resolve a :class:`RunSpec` from arguments, a settings file and defaults."""
    env = os.environ if env is None else env
    ns = vars(_parser().parse_args(argv))
    command = ns.pop("command")
    settings_path = ns.pop("settings", None)

    values = dict(DEFAULTS)
    file_values = {}
    if settings_path:
        try:
            file_values = json.loads(Path(settings_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read settings file {settings_path}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise UsageError("settings file must hold a JSON object")
        unknown = sorted(set(file_values) - set(DEFAULTS) - set(META_KEYS))
        if unknown:
            raise UsageError(f"unknown settings key {unknown[0]!r}")
        if file_values.get("command", command) != command:
            raise UsageError(
                f"settings file is a {file_values['command']!r} manifest, not {command!r}")
        values.update({k: v for k, v in file_values.items() if k not in META_KEYS})
    values.update(ns)

    if values["workers"] is None:
        try:
            values["workers"] = int(env.get(WORKERS_ENV, "1"))
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer") from exc
    for key in ("n_samples", "gamma_steps", "restarts", "budget", "workers", "n_sites", "seed"):
        v = values[key]
        if isinstance(v, bool) or int(v) != v:
            raise UsageError(f"{key} must be an integer, got {v!r}")
        values[key] = int(v)
    positive = {"n_samples": 1, "workers": 1, "restarts": 1, "budget": 100, "gamma_steps": 2}
    for key, lo in positive.items():
        if values[key] < lo:
            raise UsageError(f"{key} must be >= {lo}, got {values[key]}")
    if values["gamma"] < 0:
        raise UsageError(f"gamma must be >= 0, got {values['gamma']}")
    if not 0 < values["gamma_min"] < values["gamma_max"]:
        raise UsageError("need 0 < gamma_min < gamma_max")
    if command in ("run", "sweep") and not values["config"]:
        raise UsageError(f"{command} needs --config")
    try:
        params = ModelParams(**{k: values[k] for k in PARAM_KEYS})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return RunSpec(
        command=command,
        params=params,
        gamma_min=float(values["gamma_min"]),
        gamma_max=float(values["gamma_max"]),
        gamma_steps=values["gamma_steps"],
        n_samples=values["n_samples"],
        seed=values["seed"],
        workers=values["workers"],
        output=Path(values["output"]),
        config=Path(values["config"]) if values["config"] else None,
        gamma=float(values["gamma"]),
        restarts=values["restarts"],
        budget=values["budget"],
        settings=file_values,
    )


def _load_config(spec: RunSpec):
    config = Configuration.load(spec.config)
    params = spec.params
    if config.n_sites != params.n_sites:
        # the geometry file decides the network size
        params = ModelParams(**{**params.to_dict(), "n_sites": config.n_sites, "gamma": 0.0})
    return config, params


def _write_manifest(spec: RunSpec) -> None:
    (spec.output / "manifest.json").write_text(json.dumps(spec.manifest(), indent=2, sort_keys=True) + "\n")


def _write_curve(path: Path, curve) -> None:
    lines = ["gamma_over_Gamma,T_over_T"]
    lines += [f"{g:.17g},{t:.17g}" for g, t in zip(curve.gamma_over_sink, curve.transfer)]
    path.write_text("\n".join(lines) + "\n")


def _cmd_run(spec: RunSpec, out) -> None:
    config, params = _load_config(spec)
    model = build_model(config, params)
    gamma = spec.gamma * model.sink_rate
    liou = build_liouvillian(model, gamma)
    result = transfer_time(liou)
    print(f"gamma/Gamma = {spec.gamma:.17g}", file=out)
    print(f"T_transfer/T = {result.transfer_time:.17g}", file=out)
    print(f"status = {result.status.value}", file=out)
    print(f"absorption_total = {result.absorption_total:.17g}", file=out)
    print(f"residual = {result.residual:.3e}", file=out)
    print("purity trace (t/T, excited trace, purity):", file=out)
    try:
        traj = evolve_oracle(liou, model.direct_time, method="propagator", max_steps=200)
    except BudgetExhausted as exc:
        traj = exc.partial
        print("  (excitation not fully absorbed within the panel budget)", file=out)
    for k in range(0, len(traj.times), 8):
        try:
            pur = f"{purity(traj.state(k)):.6f}"
        except EmptyState:
            pur = "n/a"
        print(f"  {traj.times[k] / model.direct_time:12.6g}  {traj.traces[k]:.6e}  {pur}", file=out)
    print("eigenstates of H:", file=out)
    print(eigenstate_report(model).format(), file=out)


def _cmd_sample(spec: RunSpec, out) -> None:
    grid = spec.grid()
    land = run_landscape(spec.params, grid, spec.n_samples, spec.seed, spec.workers)
    write_landscape_csv(land, spec.output / "landscape.csv")
    write_curves_csv(land, spec.output / "curves.csv")
    print(f"{land.n_samples} samples x {len(grid)} rates; overflow {int(land.overflow.sum())}; "
          f"written to {spec.output}", file=out)


def _cmd_optimize(spec: RunSpec, out) -> None:
    result = optimize_gamma0(spec.params, spec.seed, spec.restarts, spec.budget, spec.workers)
    result.best_config.save(spec.output / "best_config.json")
    curve = sweep_optimized(result, spec.grid(), spec.params)
    _write_curve(spec.output / "optimized_curve.csv", curve)
    print(f"best T_transfer/T at gamma=0: {result.best_T:.17g} (restart {result.best_restart}, "
          f"{result.evaluations} evaluations)", file=out)


def _cmd_sweep(spec: RunSpec, out) -> None:
    config, params = _load_config(spec)
    curve = sweep_optimized(config, spec.grid(), params)
    _write_curve(spec.output / "sweep_curve.csv", curve)
    print(f"swept {len(curve.transfer)} rates; written to {spec.output}", file=out)


def execute(spec: RunSpec, out=None) -> int:
    """Run a resolved spec; returns the process exit status."""
    out = sys.stdout if out is None else out
    try:
        spec.output.mkdir(parents=True, exist_ok=True)
        {"run": _cmd_run, "sample": _cmd_sample, "optimize": _cmd_optimize,
         "sweep": _cmd_sweep}[spec.command](spec, out)
        _write_manifest(spec)
    except OSError as exc:
        print(f"excitonnet {spec.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ExcitonNetError, ValueError, KeyError) as exc:
        print(f"excitonnet {spec.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def main(argv=None) -> int:
    try:
        spec = parse_spec(argv)
    except UsageError as exc:
        print(f"excitonnet: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute(spec)


if __name__ == "__main__":
    sys.exit(main())
