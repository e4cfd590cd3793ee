"""Command-line entry point: ``phaseclusters <command> [options]``.

Exit codes: 0 success, 2 usage or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .cluster_algebra import Partition, SolverError, enumerate_isotropy, solve_phases
from .coupling import PRESETS, FourierCoupling, circle_distance, default_epsilon
from .linalg import EigenConvergenceError
from .portrait import export_portrait
from .simulator import (
    SimConfig,
    SimulationError,
    dominant_pairing,
    integrate,
    itinerary,
    observables,
    saddle_returns,
    saddle_set,
)
from .stability import bifurcation_thresholds, stability_report, sweep_row

logger = logging.getLogger("phaseclusters")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
OUT_ENV = "PHASECLUSTERS_OUT"

# Newton guesses used when a preset is given without --guess
DEFAULT_GUESS = {
    "case0": (0.0, 1.5, 3.1),
    "case1": (0.0, 1.70, 4.76),
    "case2": (0.0, 1.70, 4.78),
}
DEFAULT_SIZES = (2, 2, 2)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: str
    seed: int
    tool_version: str
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "wall_time": self.wall_time,
        }


def canonical_json(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def tool_version() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(
            f"config parse error in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def resolve_coupling(args: argparse.Namespace, config: dict) -> tuple[FourierCoupling, str | None]:
    """Coupling from --preset, else from the config's "coupling" or "preset"."""
    name = args.preset or config.get("preset")
    if "coupling" in config and not args.preset:
        try:
            return FourierCoupling.from_dict(config["coupling"]), None
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad coupling in config: {exc}") from exc
    if name is None:
        raise UsageError("give --preset or a config with a coupling")
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name], name


def _state_config(args: argparse.Namespace, config: dict) -> dict:
    g, name = resolve_coupling(args, config)
    sizes = args.sizes or tuple(config.get("sizes", DEFAULT_SIZES))
    guess = args.guess or config.get("guess") or DEFAULT_GUESS.get(name or "")
    if guess is None:
        raise UsageError("a Newton guess is required for custom couplings")
    if len(guess) != len(sizes):
        raise UsageError(f"guess has {len(guess)} entries for {len(sizes)} clusters")
    omega = float(config.get("omega", 0.0))
    return {
        "coupling": g.to_dict(),
        "sizes": [int(m) for m in sizes],
        "guess": [float(x) for x in guess],
        "omega": omega,
    }


def _solve(cfg: dict):
    g = FourierCoupling.from_dict(cfg["coupling"])
    p = Partition(tuple(cfg["sizes"]))
    state = solve_phases(g, p, cfg["guess"], cfg["omega"])
    phi = state.phase_array
    gaps = circle_distance(phi[:, None], phi[None, :])[~np.eye(p.M, dtype=bool)]
    if gaps.size and gaps.min() < 1e-8:
        logger.warning("solution has coinciding cluster phases; clusters merge")
    return g, p, state


def output_dir(args: argparse.Namespace) -> Path:
    base = args.out or os.environ.get(OUT_ENV) or "phaseclusters-out"
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> Path:
    if fmt == "json":
        target = path.with_suffix(".json")
        target.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=2))
    else:
        target = path.with_suffix(".csv")
        with target.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return target


def finish(out: Path, command: str, cfg: dict, seed: int, t0: float, extra: dict | None = None) -> RunManifest:
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True))
    manifest = RunManifest(command, config_digest(cfg), int(seed), tool_version(), time.perf_counter() - t0)
    payload = manifest.to_dict()
    if extra:
        payload.update(extra)
    (out / "manifest.json").write_text(json.dumps(payload, indent=2))
    return manifest


def _fmt(x: complex | float | None) -> str:
    if x is None:
        return "-"
    z = complex(x)
    if abs(z.imag) > 0:
        return f"{z.real:.6g}{z.imag:+.6g}i"
    return f"{z.real:.6g}"


# -- commands -------------------------------------------------------------------


def cmd_enumerate(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    try:
        classes = enumerate_isotropy(args.N)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = ["sizes", "fix_dim", "num_conjugates", "orbit_size"]
    rows = [[c.as_row()[h] for h in header] for c in classes]
    print(f"{'sizes':<24}{'dim':>5}{'conjugates':>12}{'orbit':>10}")
    for r in rows:
        print(f"{r[0]:<24}{r[1]:>5}{r[2]:>12}{r[3]:>10}")
    if args.out or os.environ.get(OUT_ENV):
        out = output_dir(args)
        write_rows(out / "isotropy", header, rows, args.format)
        finish(out, "enumerate", {"N": args.N}, 0, t0)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    cfg = _state_config(args, load_config(args.config))
    _, _, state = _solve(cfg)
    out = output_dir(args)
    (out / "state.json").write_text(json.dumps(state.to_dict(), indent=2))
    print("phases: " + ", ".join(f"{x:.10f}" for x in state.phases))
    print(f"Omega: {state.frequency:.10f}")
    finish(out, "solve", cfg, 0, t0)
    return EXIT_OK


def cmd_stability(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    cfg = _state_config(args, load_config(args.config))
    g, p, state = _solve(cfg)
    report = stability_report(g, p, state.phases)
    out = output_dir(args)
    payload = {"state": state.to_dict(), "report": report.to_dict()}
    (out / "stability.json").write_text(json.dumps(payload, indent=2))
    print("phases:      " + "  ".join(_fmt(x) for x in state.phases))
    print("tangential:  " + "  ".join(_fmt(z) for z in report.tangential))
    print("transverse:  " + "  ".join(f"{_fmt(lam)} (x{m})" for lam, m in report.transverse))
    if report.mu is not None:
        print(f"mu, nu:      {_fmt(report.mu)}  {_fmt(report.nu)}")
    if report.classification is not None:
        print(f"class:       {report.classification.value}")
    finish(out, "stability", cfg, 0, t0)
    return EXIT_OK


def _sweep_worker(job: tuple[dict, tuple[float, ...], float, float]):
    coupling, sizes_phases, r, eps = job
    g = FourierCoupling.from_dict(coupling)
    sizes, phases = sizes_phases
    return sweep_row(g, Partition(tuple(sizes)), np.asarray(phases), r, eps)


def cmd_design(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    raw = load_config(args.config)
    cfg = _state_config(args, raw)
    r_min = args.r_min if args.r_min is not None else raw.get("r_min")
    r_max = args.r_max if args.r_max is not None else raw.get("r_max")
    steps = args.steps if args.steps is not None else int(raw.get("steps", 101))
    if r_min is None or r_max is None:
        raise UsageError("design needs --r-min and --r-max")
    if not r_max > r_min or steps < 2:
        raise UsageError("need r_max > r_min and at least two steps")
    g, p, state = _solve(cfg)
    eps = args.epsilon if args.epsilon is not None else raw.get("epsilon")
    eps = float(default_epsilon(state.phases) if eps is None else eps)
    cfg.update({"r_min": float(r_min), "r_max": float(r_max), "steps": int(steps), "epsilon": eps})

    thresholds = None
    if min(p.sizes) > 1:
        thresholds = bifurcation_thresholds(g, p, state.phases, eps)
    rs = np.linspace(float(r_min), float(r_max), int(steps))
    jobs = [(cfg["coupling"], (cfg["sizes"], state.phases), float(r), eps) for r in rs]
    n_jobs = args.jobs or os.cpu_count() or 1
    if n_jobs == 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_sweep_worker, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))

    header = ["r"] + [f"lambda_{k + 1}" for k in range(p.M)] + ["n_stable", "classification"]
    rows = [
        [row.r, *row.exponents, row.n_stable, row.classification.value if row.classification else ""]
        for row in results
    ]
    out = output_dir(args)
    write_rows(out / "sweep", header, rows, args.format)
    extra = {}
    if thresholds is not None:
        extra["thresholds"] = {
            "r": list(thresholds.r_values),
            "bisected": list(thresholds.bisected),
            "cluster_order": list(thresholds.cluster_order),
            "epsilon": thresholds.epsilon_used,
        }
        print("thresholds r_k: " + "  ".join(_fmt(r) for r in thresholds.r_values))
    counts = [row.n_stable for row in results]
    steps_seen = [counts[0]] + [c for a, c in zip(counts, counts[1:]) if c != a]
    print("stable-cluster counts along sweep: " + " -> ".join(map(str, steps_seen)))
    finish(out, "design", cfg, 0, t0, extra)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    raw = load_config(args.config)
    analysis = raw.pop("analysis", {}) if isinstance(raw.get("analysis", {}), dict) else None
    if analysis is None:
        raise UsageError('"analysis" must be a JSON object')
    g, name = resolve_coupling(args, raw)
    sim = {k: v for k, v in raw.items() if k not in ("coupling", "preset")}
    sim.setdefault("N", 6)
    sim.setdefault("t_end", 5000.0)
    sim.setdefault("noise_amplitude", 1e-12)
    if args.seed is not None:
        sim["rng_seed"] = args.seed
    if args.t_end is not None:
        sim["t_end"] = args.t_end
    try:
        config = SimConfig.from_dict({"coupling": g.to_dict(), **sim})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad simulation config: {exc}") from exc

    guess = analysis.get("saddle_guess") or DEFAULT_GUESS.get(name or "")
    enter_tol = float(analysis.get("enter_tol", 0.05))
    min_dwell = float(analysis.get("min_dwell", 5.0))
    cfg = {**config.to_dict(), "analysis": {"saddle_guess": guess, "enter_tol": enter_tol, "min_dwell": min_dwell}}

    traj = integrate(config)
    out = output_dir(args)
    N = config.N
    with (out / "trajectory.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"theta_{i + 1}" for i in range(N)])
        w.writerows(np.column_stack([traj.times, traj.states]).tolist())
    with (out / "observables.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"Y_{i + 1}" for i in range(N)])
        w.writerows(np.column_stack([traj.times, observables(traj)]).tolist())

    events: list[dict] = []
    info: dict[str, Any] = {}
    if N == 6 and guess is not None:
        _, _, state = _solve({"coupling": g.to_dict(), "sizes": [2, 2, 2], "guess": list(guess), "omega": 0.0})
        saddles = saddle_set(state.phases[1], state.phases[2])
        pairing = dominant_pairing(traj.states)
        events = [e.to_dict() for e in itinerary(traj, saddles, enter_tol, min_dwell, pairing)]
        info = {
            "alpha": saddles.alpha,
            "beta": saddles.beta,
            "pairing": list(pairing),
            "returns": saddle_returns(traj, saddles, enter_tol, pairing),
        }
    (out / "itinerary.json").write_text(json.dumps({"events": events, **info}, indent=2))
    print(f"{len(traj)} samples, {len(events)} itinerary events, backend {traj.backend}")
    if events:
        print("saddle sequence: " + " ".join(str(e["saddle_index"]) for e in events))
    finish(out, "simulate", cfg, config.rng_seed, t0, {"dt": config.step, "scheme": config.scheme})
    return EXIT_OK


def cmd_portrait(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    raw = load_config(args.config)
    g, _ = resolve_coupling(args, raw)
    sizes = args.sizes or tuple(raw.get("sizes", DEFAULT_SIZES))
    resolution = args.resolution or int(raw.get("resolution", 64))
    density = args.grid_density or int(raw.get("grid_density", 32))
    cfg = {"coupling": g.to_dict(), "sizes": list(sizes), "resolution": resolution, "grid_density": density}
    try:
        portrait = export_portrait(g, sizes, resolution, density)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = output_dir(args)
    (out / "portrait.csv").write_text(portrait.to_csv())
    (out / "fixed_points.json").write_text(portrait.fixed_points_json())
    kinds: dict[str, int] = {}
    for fp in portrait.fixed_points:
        kinds[fp.kind.value] = kinds.get(fp.kind.value, 0) + 1
    print(f"{len(portrait.samples)} field samples; fixed points: {kinds}")
    finish(out, "portrait", cfg, 0, t0)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--config", metavar="FILE")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./phaseclusters-out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for sweeps (default: all CPUs)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    state = argparse.ArgumentParser(add_help=False)
    state.add_argument("--sizes", type=_ints, help="cluster sizes, e.g. 2,2,2")
    state.add_argument("--guess", type=_floats, help="Newton guess, e.g. 0,1.7,4.76")

    parser = argparse.ArgumentParser(prog="phaseclusters", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="isotropy classes of S_N")
    p.add_argument("N", type=int)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("solve", parents=[common, state], help="solve the cluster existence equations")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stability", parents=[common, state], help="tangential and transverse spectra")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("design", parents=[common, state], help="sweep the bump strength r")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", parents=[common], help="integrate the full system")
    p.add_argument("--t-end", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("portrait", parents=[common], help="reduced phase portrait data")
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--resolution", type=int)
    p.add_argument("--grid-density", type=int)
    p.set_defaults(func=cmd_portrait)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.jobs is not None and args.jobs < 1:
        parser.error("--jobs must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, SimulationError, EigenConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
