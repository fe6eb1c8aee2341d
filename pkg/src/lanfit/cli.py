"""``lanfit`` command line: fit, sweep, simulate, validate, report.

Exit codes: 0 success, 1 usage or data error, 2 non-convergence,
3 validation violations.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import ModelError, PRESETS, closed_form_trajectory, homogeneous_preset, state_ratio
from .data import DataError, DayWindow, resolve_data, validate_csv
from .estimation import EstimationError, FitConfig
from .phases import PartitionError, axis_values, fit_phases, make_partition, sweep

log = logging.getLogger("lanfit")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_VIOLATIONS = 0, 1, 2, 3

PARTITIONS = {"whole": "whole", "five": "five_phase", "per-day": "per_day"}

# Published values, echoed next to computed ones for manual comparison.
PUBLISHED_REFERENCE = {
    "heterogeneous_14_phases": {
        "loglik": 13203, "ks": 0.08647, "chi_square": 1.90e-5, "r_squared": 1.0,
        "rmse": 0.0005, "efficiency": 1.0,
    },
    "per_day_fit": {
        "loglik": 13202, "ssr": 3.3e-6, "chi_square": 1.9e-5, "r_squared": 1.0, "rmse": 0.0005,
    },
    "single_phase_ssr_optimum": {
        "ssr": 1.19e5, "p1": 0.129, "q1": 0.404, "p2": 0.138, "q2": 0.136,
        "a1": 1.14, "b1": 0.70, "a2": 0.90, "b2": 0.95,
    },
    "single_phase_model": {
        "a1": 1.46, "a2": 0.906, "b1": 0.704, "b2": 0.953,
        "p1": 0.129, "q1": 0.404, "p2": 0.138, "q2": 0.136,
    },
    "loglik_grid_optimum": {
        "loglik": 5.11e3, "p1": 0.21, "q1": 0.28, "p2": 0.02, "q2": 0.04,
        "a1": 0.99, "b1": 0.88, "a2": 0.89, "b2": 0.96,
    },
}


class UsageError(Exception):
    pass


def _num(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _g6(x) -> str:
    return "-" if x is None else f"{x:.6g}"


def parse_assignments(text: str | None, what: str) -> dict[str, str]:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"malformed {what} entry {item!r}, expected name=value")
        name, value = item.split("=", 1)
        out[name.strip()] = value.strip()
    return out


def parse_bounds(text: str | None) -> dict[str, tuple[float, float]]:
    out = {}
    for name, value in parse_assignments(text, "--bounds").items():
        try:
            lo, hi = (float(v) for v in value.split(":"))
        except ValueError:
            raise UsageError(f"malformed bound {name}={value}, expected lo:hi") from None
        out[name] = (lo, hi)
    return out


def parse_floats(text: str | None, what: str) -> dict[str, float]:
    try:
        return {k: float(v) for k, v in parse_assignments(text, what).items()}
    except ValueError as exc:
        raise UsageError(f"malformed {what}: {exc}") from None


def parse_range(text: str, what: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"malformed {what} {text!r}, expected min:max:step") from None
    try:
        return axis_values(lo, hi, step)
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from None


def parse_axes(text: str) -> dict[str, np.ndarray]:
    axes = {}
    for name, spec in parse_assignments(text, "--axes").items():
        axes[name] = parse_range(spec, f"axis {name}")
    if len(axes) != 2:
        raise UsageError(f"--axes needs exactly two axes, got {len(axes)}")
    return axes


def _load(args):
    series = resolve_data(args.data)
    if args.window:
        window = DayWindow.parse(args.window)
    elif series.n_days > 1:
        # opening day dropped by default
        window = DayWindow(series.days[1], series.days[-1])
    else:
        window = series.window
    return series.slice(window), window


def _shooters(args, series) -> tuple[tuple[str, ...], str]:
    shooters = tuple(c.strip() for c in args.categories.split(",")) if args.categories \
        else series.categories
    target = args.target or ("tank" if "tank" in series.categories else series.categories[0])
    for c in shooters + (target,):
        series.category_index(c)
    return shooters, target


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def _write_manifest(out: Path, command: str, args, config: dict, outputs: list[str], t0: float):
    manifest = {
        "command": command,
        "input": getattr(args, "data", None),
        "config": config,
        "seed": getattr(args, "seed", None),
        "outputs": sorted(outputs + ["manifest.json"]),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "version": __version__,
    }
    _json_dump(manifest, out / "manifest.json")


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    series, window = _load(args)
    shooters, target = _shooters(args, series)
    if args.partition.startswith("custom="):
        partition = make_partition("custom", window, args.partition.split("=", 1)[1])
    elif args.partition in PARTITIONS:
        partition = make_partition(PARTITIONS[args.partition], window)
    else:
        raise UsageError(f"unknown --partition {args.partition!r}")
    config = FitConfig(
        objective=args.objective, shooters=shooters, target=target,
        bounds=parse_bounds(args.bounds), init=parse_floats(args.init, "--init"),
        restarts=args.restarts, seed=args.seed, likelihood=args.likelihood,
    )
    result = fit_phases(series, partition, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    phases = []
    for window_k, r in zip(partition, result.results):
        phases.append({
            "window": str(window_k),
            "params": {k: _num(v) for k, v in r.params.items()},
            "objective_value": _num(r.objective_value),
            "ssr": _num(r.ssr),
            "converged": r.converged,
            "iterations": r.iterations,
        })
    gof = {k: (_num(v) if isinstance(v, float) else v) for k, v in result.gof.as_dict().items()}
    computed = {"ssr": gof["ssr"], "ks": gof["ks"], "chi_square": gof["chi_square"],
                "r_squared": gof["r_squared"], "rmse": gof["rmse"],
                args.objective: _num(result.total_objective)}
    report = {
        "data": args.data,
        "window": str(window),
        "objective": args.objective,
        "likelihood": args.likelihood,
        "partition": [str(w) for w in partition],
        "shooters": list(shooters),
        "target": target,
        "converged": result.converged,
        "total_objective": _num(result.total_objective),
        "phases": phases,
        "gof": gof,
        "comparison": {"computed": computed, "published": PUBLISHED_REFERENCE},
    }
    _json_dump(report, out / "fit.json")

    with open(out / "fitted.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "side", "observed", "fitted"]
                   + [f"{c}_component" for c in shooters] + ["residual"])
        for r in result.results:
            for i, day in enumerate(r.days):
                for side, obs, comps, res in (
                    ("X", r.observed_x, r.fitted.x_components, r.residuals_x),
                    ("Y", r.observed_y, r.fitted.y_components, r.residuals_y),
                ):
                    w.writerow([day, side, repr(float(obs[i])), repr(float(comps[i].sum()))]
                               + [repr(float(c)) for c in comps[i]] + [repr(float(res[i]))])

    config_echo = {
        "objective": args.objective, "partition": args.partition, "window": str(window),
        "shooters": list(shooters), "target": target, "restarts": args.restarts,
        "bounds": args.bounds, "init": args.init, "likelihood": args.likelihood,
    }
    _write_manifest(out, "fit", args, config_echo, ["fit.json", "fitted.csv"], t0)

    print(f"{args.objective} fit, {len(partition)} phase(s), window {window}")
    print(f"  total objective {_g6(result.total_objective)}   converged {result.converged}")
    for key in ("ssr", "r_squared", "rmse", "ks", "chi_square"):
        print(f"  {key:<10} {_g6(gof[key])}")
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    axes = parse_axes(args.axes)
    series, window = _load(args)
    shooters, target = _shooters(args, series)
    fixed = parse_floats(args.fixed, "--fixed")
    for k in range(1, len(shooters) + 1):
        for kind in "pq":
            name = f"{kind}{k}"
            if name not in axes:
                fixed.setdefault(name, 0.0)
    grid = sweep(series, axes, fixed, objective=args.objective, shooters=shooters,
                 target=target, likelihood=args.likelihood)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    F = len(shooters)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([grid.axis1_name, grid.axis2_name, "objective"]
                   + [f"a{i}_hat" for i in range(1, F + 1)]
                   + [f"b{i}_hat" for i in range(1, F + 1)] + ["valid"])
        for v1, v2, value, a, b, ok in grid.rows():
            w.writerow([repr(v1), repr(v2), repr(value) if ok else "nan"]
                       + [repr(float(x)) if ok else "nan" for x in a + b] + [int(ok)])
    config_echo = {"objective": args.objective, "axes": args.axes, "fixed": fixed,
                   "window": str(window), "shooters": list(shooters), "target": target,
                   "likelihood": args.likelihood}
    _write_manifest(out, "sweep", args, config_echo, ["sweep.csv"], t0)
    n = grid.values.size
    print(f"{args.objective} sweep over {grid.axis1_name} x {grid.axis2_name}: "
          f"{n} cells, {int(grid.valid.sum())} valid")
    if grid.valid.any():
        i, j, v = grid.best()
        print(f"  best {grid.axis1_name}={_g6(grid.axis1[i])} "
              f"{grid.axis2_name}={_g6(grid.axis2[j])} objective {_g6(v)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / validate / report
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    if args.preset:
        model = homogeneous_preset(args.preset)
        p, q = model.p[0], model.q[0]
    else:
        p, q = args.p, args.q
    if p is None or q is None:
        raise UsageError("simulate needs --preset or both --p and --q")
    times = parse_range(args.t, "--t")
    xp, yq = closed_form_trajectory(p, q, args.a, args.b, args.x0, args.y0, times)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    breakpoint_ratio = args.b / args.a
    verdict = None
    with open(out / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x_powered", "y_powered", "x", "y", "state_ratio", "victory"])
        for t, xv, yv in zip(times, xp, yq):
            x = _unpower(xv, p)
            y = _unpower(yv, q)
            ratio = victory = None
            if x is not None and y is not None:
                try:
                    ratio = state_ratio(p, q, args.x0, args.y0, x, y)
                    victory = ratio >= breakpoint_ratio
                    verdict = victory
                except ModelError:
                    pass
            w.writerow([repr(float(t)), repr(float(xv)), repr(float(yv)),
                        "" if x is None else repr(x), "" if y is None else repr(y),
                        "" if ratio is None else repr(ratio),
                        "" if victory is None else int(victory)])
    config_echo = {"preset": args.preset, "p": p, "q": q, "a": args.a, "b": args.b,
                   "x0": args.x0, "y0": args.y0, "t": args.t}
    _write_manifest(out, "simulate", args, config_echo, ["trajectory.csv"], t0)
    print(f"trajectory: {len(times)} steps, p={p:g} q={q:g}")
    print(f"  victory condition at last defined step: "
          f"{'undetermined' if verdict is None else verdict}")
    return EXIT_OK


def _unpower(value: float, exponent: float) -> float | None:
    """Recover a strength from its power; None where that is impossible."""
    if exponent == 0 or not value > 0 or not math.isfinite(value):
        return None
    return float(value ** (1.0 / exponent))


def cmd_validate(args) -> int:
    if args.data.startswith("embedded:"):
        resolve_data(args.data)
        print(f"{args.data}: ok")
        return EXIT_OK
    if not Path(args.data).is_file():
        raise DataError(f"no such file: {args.data}")
    errors = validate_csv(args.data)
    if not errors:
        series = resolve_data(args.data)
        print(f"{args.data}: ok ({series.n_days} days, categories {', '.join(series.categories)})")
        return EXIT_OK
    print(f"{args.data}: {len(errors)} violation(s)")
    for e in errors:
        print(f"  {e}")
    return EXIT_VIOLATIONS


def cmd_report(args) -> int:
    path = Path(args.run) / "fit.json"
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no fit.json in {args.run}") from None
    print(f"{report['objective']} fit of {report['data']} over {report['window']} "
          f"({len(report['phases'])} phases)")
    names = list(report["phases"][0]["params"])
    print("  " + "window".ljust(8) + "".join(n.rjust(12) for n in names) + "objective".rjust(14))
    for ph in report["phases"]:
        print("  " + ph["window"].ljust(8)
              + "".join(_g6(ph["params"][n]).rjust(12) for n in names)
              + _g6(ph["objective_value"]).rjust(14))
    print("  goodness of fit")
    for key in ("ssr", "r_squared", "rmse", "ks", "chi_square"):
        print(f"    {key:<10} {_g6(report['gof'][key])}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lanfit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"lanfit {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_opts(p, required=True):
        p.add_argument("--data", required=required, help="CSV path or embedded:kursk")
        p.add_argument("--window", help="first:last days (default: drop the first day)")
        p.add_argument("--categories", help="comma-separated shooter categories")
        p.add_argument("--target", help="category whose losses are modelled")
        p.add_argument("--objective", choices=("ssr", "loglik"), default="ssr")
        p.add_argument("--likelihood", choices=("total", "componentwise"), default="total")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("fit", help="fit a model per phase")
    data_opts(p)
    p.add_argument("--partition", default="whole",
                   help="whole, five, per-day or custom=2-3,4-6,...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--bounds", help="name=lo:hi,...")
    p.add_argument("--init", help="name=value,...")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="objective over a 2-D exponent lattice")
    data_opts(p)
    p.add_argument("--axes", required=True, help="name=min:max:step,name=min:max:step")
    p.add_argument("--fixed", help="values of the other exponents, name=value,... (default 0)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="closed-form trajectory and victory condition")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--t", required=True, help="start:stop:step")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="check a CSV against the schema")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="print a saved fit as a table")
    p.add_argument("--run", default=".", help="directory holding fit.json")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lanfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, PartitionError, ModelError, ValueError) as exc:
        print(f"lanfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EstimationError as exc:
        print(f"lanfit: fit failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
