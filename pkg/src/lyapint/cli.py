"""Experiment runner CLI.

Subcommands:

  run     Integrate one system/method/step-size cell and write a CSV drift
          trace plus a summary (config file with flag overrides).
  figure  Reproduce the benchmark figure data sets (F1..F9) at a reduced
          horizon scale, one CSV per method curve.
  check   Run the validator suite for a system; exits nonzero on failure.

CSV schema per system: ``t, <state components...>, V, <drift metrics...>``
with one header row, '.' decimal separator and 17 significant digits so the
doubles round-trip exactly. Exit codes: 0 success, 2 configuration error,
3 domain violation or scheme failure mid-run, 4 validator failure.
"""

import argparse
import configparser
import io
import sys
import time
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from . import perturbed_kepler
from .diagnostics import (
    check_rank_condition,
    gradient_agreement_report,
    orthogonality_report,
)
from .errors import ConfigError, DomainError, IntegrationError, ProjectionError
from .integrators import (
    ProjectionConfig,
    euler_step,
    projection_step,
    rk4_step,
    steps_for,
    stormer_verlet_step,
    rollout,
)
from .kepler import state_at_eccentric_anomaly
from .numerics import norm
from .systems import SYSTEM_NAMES, SystemModel, make_system

METHOD_NAMES = (
    "feedback_euler", "feedback_rk4", "euler", "rk4",
    "projection_euler", "splitting", "stormer_verlet_a", "stormer_verlet_b",
)

_GAIN_KEYS = {"rigid_body": ("k0", "k1", "k2"), "kepler": ("k1", "k2"),
              "perturbed_kepler": ("k1", "k2")}


@dataclass
class ExperimentConfig:
    """One integration cell: system x method x step size, plus I/O settings."""

    system: str = ""
    method: str = ""
    h: Optional[float] = None
    t_end: Optional[float] = None
    gains: dict = dataclass_field(default_factory=dict)
    initial_condition: object = "paper_default"
    output_path: str = "run.csv"
    sample_stride: int = 1
    mu: Optional[float] = None
    delta: Optional[float] = None
    eccentricity: Optional[float] = None
    inertia: Optional[tuple] = None
    projection_tol: Optional[float] = None
    projection_max_iter: int = 25

    def validated(self) -> "ExperimentConfig":
        if self.system not in SYSTEM_NAMES:
            raise ConfigError(f"unknown system {self.system!r}; choose from {SYSTEM_NAMES}")
        if self.method not in METHOD_NAMES:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHOD_NAMES}")
        if self.method == "splitting" and self.system != "rigid_body":
            raise ConfigError("splitting method is only defined for the rigid body")
        if self.method.startswith("stormer_verlet") and self.system == "rigid_body":
            raise ConfigError(
                "Stormer-Verlet schemes need a position-only acceleration; "
                "they apply to the Kepler-family systems only")
        if self.h is None:
            self.h = _BENCHMARK_STEP[self.system]
        if self.h <= 0.0:
            raise ConfigError("step size h must be positive")
        if self.t_end is None:
            raise ConfigError("t_end is required (config [experiment] or --t-end)")
        if self.t_end <= self.h:
            raise ConfigError("t_end must exceed the step size h")
        if self.sample_stride < 1:
            raise ConfigError("sample stride must be a positive integer")
        for key, value in self.gains.items():
            if key not in ("k0", "k1", "k2"):
                raise ConfigError(f"unknown gain {key!r}")
            if value <= 0.0:
                raise ConfigError(f"gain {key} must be positive")
        return self


_BENCHMARK_STEP = {"rigid_body": 1e-4, "kepler": 0.005, "perturbed_kepler": 0.03}


def parse_config(path: str) -> ExperimentConfig:
    """Read a flat key = value config file with section headers."""
    parser = configparser.ConfigParser()
    with open(path) as handle:
        parser.read_file(handle)
    return _config_from_parser(parser)


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    return _config_from_parser(parser)


def _config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if parser.has_section("experiment"):
        sec = parser["experiment"]
        cfg.system = sec.get("system", cfg.system)
        cfg.method = sec.get("method", cfg.method)
        if "h" in sec:
            cfg.h = sec.getfloat("h")
        if "t_end" in sec:
            cfg.t_end = sec.getfloat("t_end")
        cfg.output_path = sec.get("out", cfg.output_path)
        if "stride" in sec:
            cfg.sample_stride = sec.getint("stride")
    if parser.has_section("gains"):
        cfg.gains = {k: float(v) for k, v in parser["gains"].items()}
    if parser.has_section("constants"):
        sec = parser["constants"]
        if "mu" in sec:
            cfg.mu = sec.getfloat("mu")
        if "delta" in sec:
            cfg.delta = sec.getfloat("delta")
        if "eccentricity" in sec:
            cfg.eccentricity = sec.getfloat("eccentricity")
        if "inertia" in sec:
            cfg.inertia = tuple(float(part) for part in sec["inertia"].split(","))
    if parser.has_section("initial"):
        sec = parser["initial"]
        if sec.get("condition", "") == "paper_default":
            cfg.initial_condition = "paper_default"
        else:
            cfg.initial_condition = {k: float(v) for k, v in sec.items()
                                     if k != "condition"}
    if parser.has_section("projection"):
        sec = parser["projection"]
        if "tol" in sec:
            cfg.projection_tol = sec.getfloat("tol")
        if "max_iter" in sec:
            cfg.projection_max_iter = sec.getint("max_iter")
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "system": cfg.system,
        "method": cfg.method,
        "out": cfg.output_path,
        "stride": str(cfg.sample_stride),
    }
    if cfg.h is not None:
        parser["experiment"]["h"] = repr(cfg.h)
    if cfg.t_end is not None:
        parser["experiment"]["t_end"] = repr(cfg.t_end)
    if cfg.gains:
        parser["gains"] = {k: repr(v) for k, v in cfg.gains.items()}
    constants = {}
    if cfg.mu is not None:
        constants["mu"] = repr(cfg.mu)
    if cfg.delta is not None:
        constants["delta"] = repr(cfg.delta)
    if cfg.eccentricity is not None:
        constants["eccentricity"] = repr(cfg.eccentricity)
    if cfg.inertia is not None:
        constants["inertia"] = ",".join(repr(v) for v in cfg.inertia)
    if constants:
        parser["constants"] = constants
    if cfg.initial_condition == "paper_default":
        parser["initial"] = {"condition": "paper_default"}
    else:
        parser["initial"] = {k: repr(v) for k, v in cfg.initial_condition.items()}
    projection = {}
    if cfg.projection_tol is not None:
        projection["tol"] = repr(cfg.projection_tol)
    if cfg.projection_max_iter != 25:
        projection["max_iter"] = str(cfg.projection_max_iter)
    if projection:
        parser["projection"] = projection
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def build_system(cfg: ExperimentConfig) -> SystemModel:
    """Instantiate the configured system with gains, constants and start state."""
    gain_keys = _GAIN_KEYS[cfg.system]
    defaults = {"rigid_body": (50.0, 100.0, 50.0), "kepler": (4.0, 2.0),
                "perturbed_kepler": (2.0, 3.0)}[cfg.system]
    gains = tuple(cfg.gains.get(k, d) for k, d in zip(gain_keys, defaults))
    initial = None
    if cfg.initial_condition != "paper_default":
        names = _state_names(cfg.system)
        missing = [n for n in names if n not in cfg.initial_condition]
        if missing:
            raise ConfigError(f"initial condition missing components {missing}")
        extra = [n for n in cfg.initial_condition if n not in names]
        if extra:
            raise ConfigError(f"unknown initial-condition components {extra}")
        initial = np.array([cfg.initial_condition[n] for n in names])
    kwargs = {"gains": gains, "initial_state": initial}
    if cfg.system == "rigid_body":
        kwargs["inertia"] = cfg.inertia
    else:
        kwargs["mu"] = cfg.mu
        if cfg.system == "perturbed_kepler":
            kwargs["delta"] = cfg.delta
            if initial is None:
                kwargs["eccentricity"] = cfg.eccentricity
    try:
        return make_system(cfg.system, **kwargs)
    except (ValueError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc


def _state_names(system_name: str):
    from . import kepler as kepler_mod
    from . import rigid_body as rigid_mod
    return rigid_mod.STATE_NAMES if system_name == "rigid_body" else kepler_mod.STATE_NAMES


def make_advance(system: SystemModel, method: str, cfg: ExperimentConfig):
    """Bind a method name to an ``advance(x, h) -> x`` stepping closure."""
    if method == "feedback_euler":
        return lambda x, h: euler_step(system.modified_field, x, h)
    if method == "feedback_rk4":
        return lambda x, h: rk4_step(system.modified_field, x, h)
    if method == "euler":
        return lambda x, h: euler_step(system.field, x, h)
    if method == "rk4":
        return lambda x, h: rk4_step(system.field, x, h)
    if method == "projection_euler":
        tol = cfg.projection_tol if cfg.projection_tol is not None else system.projection_tol
        pcfg = ProjectionConfig(
            constraint=system.integral_map,
            target=system.feedback_spec.reference,
            tol=tol,
            max_iter=cfg.projection_max_iter,
        )
        return lambda x, h: projection_step(euler_step, pcfg, system.field, x, h)
    if method == "splitting":
        if system.splitting_step is None:
            raise ConfigError(f"splitting is not defined for system {system.name!r}")
        return lambda x, h: system.splitting_step(x, h)
    if method in ("stormer_verlet_a", "stormer_verlet_b"):
        if system.accel is None:
            raise ConfigError(f"Stormer-Verlet is not defined for system {system.name!r}")
        variant = "A" if method.endswith("a") else "B"

        def advance(x, h):
            q, v = stormer_verlet_step(system.accel, x[:3], x[3:], h, variant=variant)
            return np.concatenate((q, v))

        return advance
    raise ConfigError(f"unknown method {method!r}")


@dataclass(frozen=True)
class RunSummary:
    max_drift: dict
    final_v: float
    wall_time: float
    steps_taken: int
    output_path: str


def _format_value(x: float) -> str:
    return format(float(x), ".17g")


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    """Integrate one configured cell, stream the CSV trace, return the summary.

    Drift maxima are tracked at full step resolution regardless of the output
    stride. A mid-run domain violation or scheme failure flushes the partial
    CSV before the error propagates (with a partial summary attached).
    """
    cfg = cfg.validated()
    system = build_system(cfg)
    advance = make_advance(system, cfg.method, cfg)
    n_steps = steps_for(cfg.t_end, cfg.h)
    stride = cfg.sample_stride

    s0 = np.array(system.initial_state)
    maxima: dict = {}
    started = time.perf_counter()
    drift_cols = [name for name in system.drift_names if name != "V"]
    header = ["t", *system.state_names, "V", *drift_cols]

    def metrics_row(t, x):
        metrics = system.drift_metrics(x, s0)
        for key, value in metrics.items():
            if maxima.get(key, -1.0) < value:
                maxima[key] = value
        return [_format_value(t), *(_format_value(c) for c in x),
                _format_value(metrics["V"]),
                *(_format_value(metrics[c]) for c in drift_cols)], metrics

    x = s0.copy()
    final_metrics = None
    with open(cfg.output_path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        row, final_metrics = metrics_row(0.0, x)
        handle.write(",".join(row) + "\n")
        for k in range(1, n_steps + 1):
            try:
                x = advance(x, cfg.h)
                row, final_metrics = metrics_row(k * cfg.h, x)
            except (DomainError, IntegrationError, ProjectionError) as exc:
                handle.flush()
                partial = RunSummary(
                    max_drift=dict(maxima),
                    final_v=final_metrics["V"] if final_metrics else float("nan"),
                    wall_time=time.perf_counter() - started,
                    steps_taken=k - 1,
                    output_path=cfg.output_path,
                )
                if getattr(exc, "step", None) is None:
                    exc.step = k
                exc.partial_summary = partial
                raise
            if k % stride == 0 or k == n_steps:
                handle.write(",".join(row) + "\n")
    return RunSummary(
        max_drift=dict(maxima),
        final_v=final_metrics["V"],
        wall_time=time.perf_counter() - started,
        steps_taken=n_steps,
        output_path=cfg.output_path,
    )


@dataclass(frozen=True)
class FigureSpec:
    system: str
    methods: tuple
    h: float
    t_end: float
    h_overrides: dict


_RIGID_FIG = FigureSpec(
    "rigid_body",
    ("feedback_euler", "projection_euler", "splitting", "euler"),
    1e-4, 1000.0, {})
_KEPLER_FIG = FigureSpec(
    "kepler",
    ("feedback_euler", "projection_euler", "stormer_verlet_a", "stormer_verlet_b"),
    0.005, 1000.0 * 70.2481, {})
_PERT_FIG = FigureSpec(
    "perturbed_kepler",
    ("feedback_euler", "projection_euler", "stormer_verlet_a", "rk4"),
    0.03, 200.0, {"rk4": 1e-4})

FIGURES = {
    "F1": _RIGID_FIG, "F2": _RIGID_FIG, "F3": _RIGID_FIG, "F4": _RIGID_FIG,
    "F5": _KEPLER_FIG, "F6": _KEPLER_FIG, "F7": _KEPLER_FIG,
    "F8": _PERT_FIG, "F9": _PERT_FIG,
}


def replicate_figure(figure_id: str, scale: float, out_dir: str) -> dict:
    """Write one CSV per method curve of a benchmark figure.

    The horizon is the figure's full horizon multiplied by ``scale`` in
    (0, 1]; step sizes and gains are the benchmark values. Returns a mapping
    from method name to CSV path.
    """
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure id {figure_id!r}; choose F1..F9")
    if not (0.0 < scale <= 1.0):
        raise ConfigError("scale must lie in (0, 1]")
    spec = FIGURES[figure_id]
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for method in spec.methods:
        h = spec.h_overrides.get(method, spec.h)
        t_end = spec.t_end * scale
        n = steps_for(t_end, h)
        cfg = ExperimentConfig(
            system=spec.system,
            method=method,
            h=h,
            t_end=t_end,
            output_path=os.path.join(out_dir, f"{figure_id}_{method}.csv"),
            sample_stride=max(1, n // 5000),
        )
        run_experiment(cfg)
        paths[method] = cfg.output_path
    return paths


def _print_check(name: str, passed: bool, detail: str) -> bool:
    print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return passed


def check_system(name: str) -> int:
    """Validator suite for one system; returns the process exit code."""
    if name not in SYSTEM_NAMES:
        raise ConfigError(f"unknown system {name!r}; choose from {SYSTEM_NAMES}")
    system = make_system(name)
    ok = True

    rep = orthogonality_report(system, n_samples=10_000, seed=1)
    ok &= _print_check(
        f"{name}.orthogonality",
        rep.passed,
        f"max scaled <grad V, X> residual {rep.max_scaled_residual:.3e} "
        f"over {rep.n_samples} states (tol {rep.tolerance:.0e})")

    rep = gradient_agreement_report(system, n_samples=1000, seed=2)
    ok &= _print_check(
        f"{name}.gradient_agreement",
        rep.passed,
        f"max scaled analytic-vs-generic difference {rep.max_scaled_difference:.3e} "
        f"over {rep.n_samples} states (tol {rep.tolerance:.0e})")

    if name == "rigid_body":
        # starting on the level set, V must stay at the scheme-attractor
        # scale (measured ~4e-9 for Euler at h = 1e-4), far below the basin
        # bound
        _, states = rollout(
            make_advance(system, "feedback_euler", ExperimentConfig()),
            system.initial_state, 1e-4, steps_for(2.0, 1e-4), stride=200)
        worst = max(system.lyapunov(s) for s in states)
        ok &= _print_check(
            "rigid_body.level_set_invariance",
            worst <= 1e-7,
            f"max V {worst:.3e} over t in [0, 2] starting on the level set (tol 1e-7)")

    if name == "kepler":
        rng = np.random.default_rng(3)
        from .kepler import invariants as kep_invariants

        worst = 0.0
        for _ in range(2000):
            s = system.sample_state(rng)
            L, A, E = kep_invariants(system.params, s)
            relation = abs(float(A @ A) - system.params.mu**2
                           - 2.0 * E * float(L @ L))
            ortho = abs(float(L @ A)) / (1.0 + norm(L) * norm(A))
            scale = 1.0 + abs(float(A @ A)) + 2.0 * abs(E) * float(L @ L)
            worst = max(worst, relation / scale, ortho)
        ok &= _print_check(
            "kepler.vector_identities",
            worst <= 1e-12,
            f"max scaled residual of |A|^2 = mu^2 + 2E|L|^2 and L . A = 0: {worst:.3e}")

        orbit_samples = [state_at_eccentric_anomaly(system.params, psi)
                         for psi in np.linspace(0.0, 2.0 * np.pi, 7)[:-1]]
        rank = check_rank_condition(system.integral_map, orbit_samples)
        usable = min(spectrum[4] for spectrum in rank.spectra)
        ok &= _print_check(
            "kepler.integral_map_rank",
            usable > 1e-8,
            f"(L, A) pins the orbit: 5th singular value >= {usable:.3e}; the 6th "
            f"vanishes along the flow direction (min {rank.min_singular_value:.3e})")

    if name == "perturbed_kepler":
        _, states = rollout(
            make_advance(system, "rk4", ExperimentConfig()),
            system.initial_state, 1e-3, steps_for(system.period, 1e-3),
            stride=max(1, steps_for(system.period, 1e-3) // 6))
        rank = check_rank_condition(system.integral_map, list(states))
        ok &= _print_check(
            "perturbed_kepler.integral_map_rank",
            rank.passed,
            f"min singular value of the (E, L) Jacobian on the level set "
            f"{rank.min_singular_value:.3e} (tol {rank.threshold:.0e})")

        report = perturbed_kepler.check_hypothesis(system.params)
        ok &= _print_check(
            "perturbed_kepler.circular_orbit_hypothesis",
            report.satisfied,
            f"{len(report.roots)} candidate radii in {report.bracket}, "
            f"energy residuals {tuple(f'{r:.3g}' for r in report.residuals)} "
            f"(all must exceed {report.residual_tol:.0e})")

    return 0 if ok else 4


def _parse_gains(text: str) -> dict:
    gains = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad gain assignment {part!r}; expected k0=...,k1=...")
        key, _, value = part.partition("=")
        try:
            gains[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"bad gain value in {part!r}") from None
    return gains


def _build_run_parser(sub):
    p = sub.add_parser("run", help="run one experiment cell and write a CSV trace")
    p.add_argument("--config", help="config file (flat key = value with sections)")
    p.add_argument("--h", type=float, help="step size override")
    p.add_argument("--t-end", dest="t_end", type=float, help="horizon override")
    p.add_argument("--gains", help="gain overrides, e.g. k0=50,k1=100,k2=50")
    p.add_argument("--method", choices=METHOD_NAMES, help="method override")
    p.add_argument("--system", choices=SYSTEM_NAMES, help="system override")
    p.add_argument("--out", help="output CSV path override")
    p.add_argument("--stride", type=int, help="output subsampling stride")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lyapint",
        description="Invariant-preserving integration experiments "
                    "(gradient-feedback, projection, splitting, Stormer-Verlet)")
    sub = parser.add_subparsers(dest="command", required=True)
    _build_run_parser(sub)
    fig = sub.add_parser("figure", help="replicate a benchmark figure's data at reduced scale")
    fig.add_argument("--id", required=True, help="figure id, F1..F9")
    fig.add_argument("--scale", type=float, required=True, help="horizon scale in (0, 1]")
    fig.add_argument("--out-dir", dest="out_dir", required=True, help="output directory")
    chk = sub.add_parser("check", help="run validator suite for a system")
    chk.add_argument("--system", required=True, choices=SYSTEM_NAMES)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config(args.config) if args.config else ExperimentConfig()
            if args.system:
                cfg.system = args.system
            if args.method:
                cfg.method = args.method
            if args.h is not None:
                cfg.h = args.h
            if args.t_end is not None:
                cfg.t_end = args.t_end
            if args.gains:
                cfg.gains = {**cfg.gains, **_parse_gains(args.gains)}
            if args.out:
                cfg.output_path = args.out
            if args.stride is not None:
                cfg.sample_stride = args.stride
            summary = run_experiment(cfg)
            print(f"steps_taken = {summary.steps_taken}")
            print(f"final_V = {summary.final_v:.17g}")
            for key, value in summary.max_drift.items():
                print(f"max_{key} = {value:.17g}")
            print(f"wall_time_s = {summary.wall_time:.3f}")
            print(f"csv = {summary.output_path}")
            return 0
        if args.command == "figure":
            paths = replicate_figure(args.id, args.scale, args.out_dir)
            for method, path in paths.items():
                print(f"{method}: {path}")
            return 0
        if args.command == "check":
            return check_system(args.system)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, IntegrationError, ProjectionError) as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"run aborted{where}: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial_summary", None)
        if partial is not None:
            print(f"partial CSV flushed to {partial.output_path} "
                  f"({partial.steps_taken} completed steps)", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
