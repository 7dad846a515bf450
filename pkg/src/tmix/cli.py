"""Batch front-end: JSON experiment configs in, CSV / SVG / run.json out."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .mitigation import (
    Axis,
    SimulationConfig,
    SweepResult,
    SweepSpec,
    run_sweep,
)
from .params import GenerativeParams, ReweighWeights, SolverConfig
from .replica import BACKEND

METRIC_COLUMNS = (
    "acc_plus", "acc_minus", "di",
    "mi_sp", "mi_eo", "mi_ea", "mi_eodds", "mi_pp1", "mi_pp10",
)
THETA_COLUMNS = ("Q", "m", "R_plus", "R_minus", "delta_q", "b")

_GEN_KEYS = {
    "rho", "delta_plus", "delta_minus", "m_tilde_plus", "m_tilde_minus",
    "q_teacher", "b_tilde_plus", "b_tilde_minus", "alpha",
}
_HYPER_KEYS = {"lambda_l2", "gamma", "w_group_plus", "w_label_one", "eta"}
_TOP_KEYS = {
    "schema", "generative", "hyper", "sweep", "simulation", "solver",
    "heatmaps", "compare_split",
}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if cfg.get("schema") != 1:
        raise ConfigError(f"{path}: field 'schema' must be 1")
    for key in cfg:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{path}: unknown field {key!r}")
    for block, allowed in (("generative", _GEN_KEYS), ("hyper", _HYPER_KEYS)):
        for key in cfg.get(block, {}):
            if key not in allowed:
                raise ConfigError(f"{path}: unknown field '{block}.{key}'")
    return cfg


def build_spec(cfg: dict, mode: str, args=None) -> SweepSpec:
    """Assemble a SweepSpec from a parsed config, applying CLI overrides."""
    try:
        gen = GenerativeParams(**cfg.get("generative", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"generative block: {exc}") from exc
    hyper = cfg.get("hyper", {})
    rw = ReweighWeights(
        w_group_plus=hyper.get("w_group_plus", 0.5),
        w_label_one=hyper.get("w_label_one", 0.5),
    )
    sweep_blk = cfg.get("sweep", {})
    try:
        axes = [Axis(**ax) for ax in sweep_blk.get("axes", [])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sweep.axes: {exc}") from exc

    sim = None
    if mode in ("simulation", "both"):
        blk = dict(cfg.get("simulation", {}))
        if args is not None and args.d is not None:
            blk["d"] = args.d
        if args is not None and args.seed is not None:
            blk["base_seed"] = args.seed
        blk.setdefault("n_seeds", blk.pop("seeds", 5))
        try:
            sim = SimulationConfig(**blk)
        except TypeError as exc:
            raise ConfigError(f"simulation block: {exc}") from exc

    solver = None
    if "solver" in cfg:
        try:
            solver = SolverConfig(**cfg["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver block: {exc}") from exc

    try:
        return SweepSpec(
            gen=gen,
            lambda_l2=hyper.get("lambda_l2", 0.05),
            axes=axes,
            gamma=hyper.get("gamma", 0.0),
            rw=rw,
            eta=hyper.get("eta", 1.0),
            mode=mode,
            strategy=sweep_blk.get("strategy", "auto"),
            sim=sim,
            solver=solver,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, (int,)):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".12g")


def write_csv(path: Path, result: SweepResult, extra: dict | None = None) -> None:
    """result.csv with the stable column schema; extra maps column name to a
    per-cell list appended after the standard columns."""
    spec = result.spec
    axis_names = [ax.name for ax in spec.axes]
    header = list(axis_names) + list(METRIC_COLUMNS) + list(THETA_COLUMNS)
    header += ["sweeps", "residual", "converged"]
    both = spec.mode == "both"
    if both:
        header += ["sim_" + c for c in METRIC_COLUMNS]
        header += ["sim_Q", "sim_m", "sim_R_plus", "sim_R_minus", "sim_b"]
    extra = extra or {}
    header += list(extra)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for pos, cell in enumerate(result.cells):
            row = [_fmt(cell.params[nm]) for nm in axis_names]
            for key in METRIC_COLUMNS:
                row.append(_fmt(cell.metric(key)))
            theta = cell.theta if cell.theta is not None else cell.sim_theta
            if theta is not None:
                row += [_fmt(x) for x in theta.as_array()]
            else:
                row += [""] * 6
            row += [_fmt(cell.sweeps), _fmt(cell.residual), _fmt(cell.converged)]
            if both:
                rep = cell.sim_report
                if rep is not None:
                    row += [_fmt(rep.acc_plus), _fmt(rep.acc_minus),
                            _fmt(rep.disparate_impact)]
                    from .mitigation import MI_SHORT
                    row += [_fmt(rep.mi[MI_SHORT["mi_" + k]])
                            for k in ("sp", "eo", "ea", "eodds", "pp1", "pp10")]
                else:
                    row += [""] * 9
                st = cell.sim_theta
                if st is not None:
                    a = st.as_array()
                    row += [_fmt(a[0]), _fmt(a[1]), _fmt(a[2]), _fmt(a[3]), _fmt(a[5])]
                else:
                    row += [""] * 5
            for col in extra:
                row.append(_fmt(extra[col][pos]))
            writer.writerow(row)


def _lerp_color(t: float) -> str:
    lo, hi = (33, 102, 172), (178, 24, 43)
    r = [round(a + t * (b - a)) for a, b in zip(lo, hi)]
    return f"rgb({r[0]},{r[1]},{r[2]})"


def write_heatmap(path: Path, result: SweepResult, metric: str) -> None:
    """Hand-rolled SVG heatmap of one metric over a 2-axis sweep.

    Linear colour scale between the finite min and max of the grid; failed
    cells are grey.  Output is a deterministic function of the grid values.
    """
    if len(result.spec.axes) != 2:
        raise ValueError("heatmaps need a 2-axis sweep")
    grid = result.metric_grid(metric)
    xs, ys = result.axis_values
    xname, yname = (ax.name for ax in result.spec.axes)
    finite = grid[~_isnan(grid)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0

    cs = 22
    ml, mt, mr, mb = 70, 34, 96, 52
    nx, ny = grid.shape
    width, height = ml + nx * cs + mr, mt + ny * cs + mb
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml}" y="{mt - 14}" font-family="sans-serif" font-size="13">'
        f"{metric}</text>",
    ]
    for i in range(nx):
        for j in range(ny):
            v = grid[i, j]
            if math.isnan(v):
                fill = "rgb(200,200,200)"
            else:
                fill = _lerp_color((v - lo) / span)
            x = ml + i * cs
            y = mt + (ny - 1 - j) * cs
            out.append(f'<rect x="{x}" y="{y}" width="{cs}" height="{cs}" '
                       f'fill="{fill}"/>')
    # axis labels and end/middle ticks
    y0 = mt + ny * cs
    out.append(
        f'<text x="{ml + nx * cs // 2}" y="{y0 + 36}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xname}</text>'
    )
    out.append(
        f'<text x="16" y="{mt + ny * cs // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {mt + ny * cs // 2})">{yname}</text>'
    )
    for k in (0, nx // 2, nx - 1):
        x = ml + k * cs + cs // 2
        out.append(f'<text x="{x}" y="{y0 + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">'
                   f"{format(xs[k], '.6g')}</text>")
    for k in (0, ny // 2, ny - 1):
        y = mt + (ny - 1 - k) * cs + cs // 2 + 4
        out.append(f'<text x="{ml - 6}" y="{y}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">'
                   f"{format(ys[k], '.6g')}</text>")
    # colour bar
    bx = ml + nx * cs + 24
    steps = 32
    bh = ny * cs
    for k in range(steps):
        t = 1.0 - (k + 0.5) / steps
        y = mt + k * bh / steps
        out.append(f'<rect x="{bx}" y="{format(y, ".6g")}" width="14" '
                   f'height="{format(bh / steps + 0.5, ".6g")}" '
                   f'fill="{_lerp_color(t)}"/>')
    out.append(f'<text x="{bx + 18}" y="{mt + 10}" font-family="sans-serif" '
               f'font-size="10">{format(hi, ".6g")}</text>')
    out.append(f'<text x="{bx + 18}" y="{mt + bh}" font-family="sans-serif" '
               f'font-size="10">{format(lo, ".6g")}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")


def _isnan(grid):
    import numpy as np

    return np.isnan(grid)


def list_recipes() -> list[str]:
    base = resources.files("tmix.recipes")
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def recipe_text(name: str) -> str:
    base = resources.files("tmix.recipes")
    p = base / f"{name}.json"
    if not p.is_file():
        raise ConfigError(f"no recipe named {name!r}; try `tmix recipes`")
    return p.read_text()


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("TMIX_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"TMIX_WORKERS={env!r} is not an integer")
    return 1


_COMMAND_MODE = {
    "solve": "theory",
    "simulate": "simulation",
    "compare": "both",
}


def _check_axes(command: str, spec: SweepSpec) -> None:
    names = {ax.name for ax in spec.axes}
    if command in ("solve", "simulate"):
        # point commands work off the base point; any sweep block is ignored
        spec.axes = []
        return
    if command == "reweigh" and names != {"w_group_plus", "w_label_one"}:
        raise ConfigError("reweigh needs exactly the axes w_group_plus, w_label_one")
    if command == "couple" and names != {"gamma"}:
        raise ConfigError("couple needs exactly one gamma axis")
    if command == "eta":
        if names != {"eta"}:
            raise ConfigError("eta needs exactly one eta axis")
        if spec.strategy not in ("reweigh", "coupled"):
            raise ConfigError("eta needs sweep.strategy 'reweigh' or 'coupled'")
    if command in ("sweep", "compare", "reweigh", "couple", "eta") and not spec.axes:
        raise ConfigError(f"{command} needs at least one sweep axis")


def _split_baseline(spec: SweepSpec, workers: int):
    """Per-group accuracies of the split baseline (two uncoupled students,
    each trained on its own group only), on the same grid."""
    base = dataclasses.replace(
        spec, gamma=0.0, eta=1.0, strategy="coupled", mode="theory", sim=None
    )
    res = run_sweep(base, workers=workers)
    return (
        [c.metric("acc_plus") for c in res.cells],
        [c.metric("acc_minus") for c in res.cells],
    )


def run(command: str, args) -> int:
    cfg = load_config(args.config)
    mode = _COMMAND_MODE.get(command, cfg.get("sweep", {}).get("mode", "theory"))
    spec = build_spec(cfg, mode, args)
    if command == "couple":
        spec.strategy = "coupled"
    _check_axes(command, spec)
    workers = _resolve_workers(args)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = run_sweep(spec, workers=workers)

    extra = None
    if cfg.get("compare_split") and spec.mode != "simulation":
        split_p, split_m = _split_baseline(spec, workers)
        gain_p = [c.metric("acc_plus") - s for c, s in zip(result.cells, split_p)]
        gain_m = [c.metric("acc_minus") - s for c, s in zip(result.cells, split_m)]
        extra = {
            "acc_plus_split": split_p,
            "acc_minus_split": split_m,
            "acc_plus_gain": gain_p,
            "acc_minus_gain": gain_m,
        }

    write_csv(out / "result.csv", result, extra)

    if len(spec.axes) == 2:
        for metric in cfg.get("heatmaps", ["di"]):
            if metric not in METRIC_COLUMNS:
                raise ConfigError(f"unknown heatmap metric {metric!r}")
            write_heatmap(out / f"heatmap_{metric}.svg", result, metric)

    resolved = {
        "schema": 1,
        "command": command,
        "generative": spec.gen.to_dict(),
        "hyper": {
            "lambda_l2": spec.lambda_l2,
            "gamma": spec.gamma,
            "w_group_plus": spec.rw.w_group_plus,
            "w_label_one": spec.rw.w_label_one,
            "eta": spec.eta,
        },
        "sweep": {
            "axes": [dataclasses.asdict(ax) for ax in spec.axes],
            "mode": spec.mode,
            "strategy": spec.strategy,
        },
        "simulation": dataclasses.asdict(spec.sim) if spec.sim else None,
        "solver": spec.solver.to_dict() if spec.solver else None,
        "minima": {k: list(int(i) for i in v) for k, v in result.minima.items()},
        "version": __version__,
        "backend": BACKEND,
        "workers": workers,
    }
    (out / "run.json").write_text(json.dumps(resolved, indent=2) + "\n")

    failures = [c for c in result.cells if not c.converged]
    for c in failures:
        if c.error:
            print(f"cell {c.index} {c.params}: {c.error}", file=sys.stderr)
    if failures and not args.allow_partial:
        print(f"{len(failures)} of {len(result.cells)} cells did not converge",
              file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tmix",
        description="two-group teacher-mixture solver, simulator and sweep tool",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("solve", "one theory solve at the base point"),
        ("simulate", "finite-d training runs at the base point"),
        ("compare", "theory and simulation side by side"),
        ("sweep", "grid sweep from the config's sweep block"),
        ("reweigh", "2D sweep over the loss reweighing matrix"),
        ("couple", "1D sweep over the elastic coupling strength"),
        ("eta", "1D sweep over the membership-assessment fidelity"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("-c", "--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--allow-partial", action="store_true",
                       help="exit 0 even if some cells failed")
        p.add_argument("--seed", type=int, default=None,
                       help="override the simulation base seed")
        p.add_argument("--d", type=int, default=None,
                       help="override the simulation dimension")
    p = sub.add_parser("recipes", help="list or print the shipped experiment configs")
    p.add_argument("name", nargs="?", help="print this recipe's JSON")

    args = parser.parse_args(argv)
    try:
        if args.command == "recipes":
            if args.name:
                print(recipe_text(args.name), end="")
            else:
                for name in list_recipes():
                    print(name)
            return 0
        return run(args.command, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
