"""Experiment runner.

Usage::

    mfglab <subcommand> [--config run.json] [--out DIR] [--dump-config] [--threads N]

Each subcommand reads one JSON document (every key optional, unknown keys
rejected), writes CSV tables and PNG figures into ``--out`` together with
the fully-defaulted ``config.json``. Exit codes: 0 success, 2 configuration
error, 3 numerical failure, 4 precondition refused.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys

import numpy as np

from . import analysis, equilibrium, measures, pde, plotting
from .csvio import write_csv
from .dynamics import drift_from_dict
from .errors import ConfigError, PreconditionError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_REFUSED = 0, 2, 3, 4

_UNIFORM = {"atoms": [], "pieces": [[0.0, 1.0, 1.0]]}
_STEP = {"kind": "step_of_mean", "threshold": 0.0, "alpha": 1.0, "beta": 0.0}
_BURGERS = {"kind": "constant_in_x", "sigma_range": [-1.5, 1.5]}
_SCHEME = {"cfl": 0.45, "viscosity": 0.0, "boundary": "outflow", "source": "well_balanced"}
_RIEMANN = {"kind": "riemann", "left": 1.0, "right": 0.0, "at": 0.0}
_GAME = {"drift": _BURGERS, "sigma0": _STEP, "t": 1.0, "dimension": 1,
         "quantization_points": 64, "steps_per_unit_time": 200}

DEFAULTS = {
    "quantize": {"measure": _UNIFORM, "N": 3, "exact": False},
    "mfg": {"game": _GAME, "measure": {"atoms": [[0.5, 1.0]], "pieces": []},
            "points": None, "grid_points": 2048, "root_tolerance": 1e-10},
    "nplayer": {"construction": "prop33",
                "prop33": {"a": 1.0, "b": 1.0, "t": 1.0, "N": 10},
                "alternating": {"t": 1.0, "N": 4, "alpha": 0.5},
                "two_population": {"game": dict(_GAME, t=0.25),
                                   "mu_tilde": {"atoms": [], "pieces": [[-2.0, -1.0, 1.0]]},
                                   "nu_tilde": {"atoms": [], "pieces": [[1.0, 2.0, 1.0]]},
                                   "N_values": [20, 40, 80]},
                "verify": {"game": _GAME, "points": [1.0, -1.0], "sigmas": [0.0, 0.0]}},
    "pde": {"drift": _BURGERS, "initial": _RIEMANN, "grid": {"axes": [[-2.0, 3.0, 800]]},
            "scheme": _SCHEME, "t_end": 1.0, "snapshots": 4, "entropy_k": [0.25, 0.5, 0.75]},
    "select": {"sigma0": _STEP, "t": 1.0, "means": [0.1, 0.3, 0.45, 0.55, 0.7, 0.9],
               "cells": 1600, "scheme": _SCHEME},
    "sweep": {"drift": _BURGERS, "initial": _RIEMANN, "grid": {"axes": [[-2.0, 3.0, 800]]},
              "scheme": _SCHEME, "t_end": 1.0, "eps": [0.02, 0.04, 0.08, 0.16],
              "N": 1, "d": 1, "R": None, "dm_bound": 0.0, "uniform_bound": None},
}

# sub-documents whose own keys are validated by their parsers
_OPAQUE = {"measure", "mu_tilde", "nu_tilde", "drift", "sigma0", "game", "grid", "initial",
           "points", "sigmas", "N_values", "means", "eps", "entropy_k"}


def merge(defaults: dict, given: dict, where: str = "config") -> dict:
    """Defaults overlaid with ``given``; unknown keys are a configuration error."""
    if not isinstance(given, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(defaults[k], dict) and k not in _OPAQUE and isinstance(v, dict):
            out[k] = merge(defaults[k], v, f"{where}.{k}")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _measure(d, where):
    try:
        return measures.Measure1D.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _drift(d):
    try:
        return drift_from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"drift: {exc}") from exc


def _scheme(d):
    try:
        return pde.SchemeConfig(**merge(_SCHEME, d, "scheme"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"scheme: {exc}") from exc


def _grid(d):
    d = merge({"axes": [[-2.0, 3.0, 800]]}, d, "grid")
    try:
        return pde.Grid(tuple(tuple(a) for a in d["axes"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _initial(d, grid):
    kind = d.get("kind")
    if kind == "riemann":
        d = merge(_RIEMANN, d, "initial")
        x = grid.mesh()[0]
        return pde.GridState(grid, np.where(x < d["at"], d["left"], d["right"]), 0.0)
    if kind == "sigma0":
        d = merge({"kind": "sigma0", "sigma0": _STEP, "N": 1, "d": 1}, d, "initial")
        s0 = equilibrium.sigma0_from_dict(d["sigma0"])
        return pde.initial_from_sigma0(s0, grid, int(d["N"]), int(d["d"]))
    raise ConfigError(f"initial.kind must be 'riemann' or 'sigma0', got {kind!r}")


def _out(out, name):
    return os.path.join(out, name)


# ---------------------------------------------------------------------------
# subcommands


def cmd_quantize(cfg, out, threads=1):
    m = _measure(cfg["measure"], "measure")
    N = int(cfg["N"])
    if N < 1:
        raise ConfigError("N must be >= 1")
    if cfg["exact"]:
        m = m.exact()
    q = measures.quantize(m, N)
    rows = []
    for j, (x, sub) in enumerate(zip(q.points, q.partition.sub_measures), start=1):
        lo, hi = sub.support()
        rows.append([j, x, sub.mass, lo, hi])
    write_csv(_out(out, "quantization.csv"), ["j", "point", "mass", "support_left", "support_right"], rows)
    parts = []
    for j, sub in enumerate(q.partition.sub_measures, start=1):
        for x, w in sub.atoms:
            parts.append([j, "atom", x, x, w])
        for l, r, w in sub.pieces:
            parts.append([j, "piece", l, r, w])
    write_csv(_out(out, "partition.csv"), ["j", "kind", "left", "right", "mass"], parts)
    write_csv(_out(out, "summary.csv"), ["N", "w2", "w2_squared", "barycenter", "mean_of_points"],
              [[N, q.w2, q.w2_squared, m.mean, sum(q.points) / N]])
    plotting.quantization_figure(_out(out, "quantization.png"), m, q)


def _game(d):
    return equilibrium.GameSpec.from_dict(d)


def cmd_mfg(cfg, out, threads=1):
    spec = _game(cfg["game"])
    if cfg["points"] is not None:
        m = measures.EmpiricalMeasure(np.asarray(cfg["points"], dtype=float))
    else:
        m = _measure(cfg["measure"], "measure")
    rep = equilibrium.find_equilibria(spec, m, int(cfg["grid_points"]), float(cfg["root_tolerance"]))
    write_csv(_out(out, "samples.csv"), ["sigma", "F"], rep.samples)
    write_csv(_out(out, "roots.csv"), ["sigma", "F_prime"], rep.roots)
    write_csv(_out(out, "jumps.csv"), ["sigma"], [[j] for j in rep.jump_crossings])
    plotting.equilibrium_figure(_out(out, "F.png"), rep)


def _write_patterns(out, spec, points, patterns, tag=""):
    res_rows, sum_rows = [], []
    arr = np.array(points, dtype=object)
    for name, sig in patterns.items():
        sol = equilibrium.verify_nplayer(spec, arr, sig)
        for i, (x, s, r) in enumerate(zip(points, sol.sigmas, sol.residuals), start=1):
            res_rows.append([name, i, x, s, r])
        sum_rows.append([name, sol.exact, sol.max_residual, sol.mode])
    write_csv(_out(out, f"residuals{tag}.csv"), ["pattern", "player", "point", "sigma", "residual"], res_rows)
    return sum_rows


def cmd_nplayer(cfg, out, threads=1):
    kind = cfg["construction"]
    if kind == "prop33":
        p = merge(DEFAULTS["nplayer"]["prop33"], cfg["prop33"], "prop33")
        c = equilibrium.construct_prop33(p["a"], p["b"], p["t"], int(p["N"]))
        rows = _write_patterns(out, c.spec, c.points, c.patterns)
        write_csv(_out(out, "summary.csv"), ["pattern", "exact", "max_residual", "mode"], rows)
        write_csv(_out(out, "construction.csv"), ["N", "J", "sum_if_switching", "sum_if_staying"],
                  [[int(p["N"]), c.J, c.details["sum_if_switching"], c.details["sum_if_staying"]]])
        plotting.nplayer_figure(_out(out, "patterns.png"), c.points, c.patterns)
    elif kind == "alternating":
        p = merge(DEFAULTS["nplayer"]["alternating"], cfg["alternating"], "alternating")
        c = equilibrium.construct_alternating(p["t"], int(p["N"]), p["alpha"])
        rows = _write_patterns(out, c.spec, c.points, {"alternating": c.sigmas})
        write_csv(_out(out, "summary.csv"), ["pattern", "exact", "max_residual", "mode"], rows)
        write_csv(_out(out, "construction.csv"), ["N", "alpha", "b_N", "note"],
                  [[int(p["N"]), p["alpha"], c.b_N, n] for n in c.notes])
        plotting.nplayer_figure(_out(out, "patterns.png"), c.sigmas, {"alternating": c.sigmas})
    elif kind == "two_population":
        p = merge(DEFAULTS["nplayer"]["two_population"], cfg["two_population"], "two_population")
        spec = _game(p["game"])
        mu, nu = _measure(p["mu_tilde"], "mu_tilde"), _measure(p["nu_tilde"], "nu_tilde")
        cons, summary, last = [], [], None
        for N in p["N_values"]:
            c = equilibrium.construct_two_population(spec, mu, nu, int(N))
            if c is None:
                cons.append([int(N), "none", math.nan, math.nan, math.nan, math.nan])
                continue
            last = c
            for row in _write_patterns(out, c.spec, c.points, c.patterns, f"_N{int(N)}"):
                summary.append([int(N)] + row)
            cons.append([int(N), c.J, c.details["lambda"], c.details["J_minus_lambda_N"],
                         c.details["sum_y"], c.details["time0_mean_mixed"]])
        write_csv(_out(out, "construction.csv"),
                  ["N", "J", "lambda", "J_minus_lambda_N", "sum_y", "time0_mean_mixed"], cons)
        write_csv(_out(out, "summary.csv"), ["N", "pattern", "exact", "max_residual", "mode"], summary)
        if last is not None:
            plotting.nplayer_figure(_out(out, "patterns.png"), last.points, last.patterns)
    elif kind == "verify":
        p = merge(DEFAULTS["nplayer"]["verify"], cfg["verify"], "verify")
        spec = _game(p["game"])
        rows = _write_patterns(out, spec, list(p["points"]), {"given": tuple(p["sigmas"])})
        write_csv(_out(out, "summary.csv"), ["pattern", "exact", "max_residual", "mode"], rows)
    else:
        raise ConfigError(f"unknown construction {kind!r}")


def cmd_pde(cfg, out, threads=1):
    model = _drift(cfg["drift"])
    grid = _grid(cfg["grid"])
    scheme = _scheme(cfg["scheme"])
    state = _initial(cfg["initial"], grid)
    t_end = float(cfg["t_end"])
    n = max(int(cfg["snapshots"]), 1)
    # run segment by segment so snapshots land exactly on the requested times
    history, snaps = [state], [state]
    for k in range(1, n + 1):
        seg = pde.run_history(snaps[-1], model, scheme, t_end * k / n)
        history.extend(seg[1:])
        snaps.append(seg[-1])
    diag = []
    for k, s in enumerate(snaps):
        diag.append([k, s.t, pde.total_variation(s), float(s.u.min()), float(s.u.max()), pde.mass(s)])
        with open(_out(out, f"state_{k}.csv"), "w", newline="") as fh:
            fh.write(pde.state_csv(s))
        with open(_out(out, f"state_{k}.bin"), "wb") as fh:
            fh.write(pde.dump_binary(s))
    write_csv(_out(out, "diagnostics.csv"), ["snapshot", "t", "total_variation", "min", "max", "mass"], diag)
    if t_end > 0 and scheme.viscosity == 0:
        write_csv(_out(out, "entropy.csv"), ["k", "residual"],
                  [[k, pde.entropy_residual(history, model, k)] for k in cfg["entropy_k"]])
    plotting.pde_figure(_out(out, "profile.png"), snaps)


def cmd_select(cfg, out, threads=1):
    s0 = equilibrium.sigma0_from_dict(cfg["sigma0"])
    scheme = _scheme(cfg["scheme"])
    t = float(cfg["t"])
    lo, hi = s0.value_range()
    drift = equilibrium.ConstantInX((min(lo, 0.0) - 0.5, max(hi, 0.0) + 0.5))
    spec = equilibrium.GameSpec(drift, s0, t)
    rows, values, state = [], [], None
    means = [float(m) for m in cfg["means"]]
    grid = analysis.selection_grid(s0, min(means), t, int(cfg["cells"]))
    a, b, _ = grid.axes[0]
    hi_m = max(means)
    if hi_m >= b:
        grid = pde.Grid.line(a, hi_m + (b - a) * 0.1, int(cfg["cells"]))
    for m in means:
        sel = analysis.select_equilibrium(s0, m, t, scheme, grid)
        state = sel.state
        roots = equilibrium.find_equilibria(spec, measures.Measure1D.dirac(m)).root_values
        near = min(roots, key=lambda r: abs(r - sel.value)) if roots and sel.value is not None else math.nan
        rows.append([m, math.nan if sel.value is None else sel.value, sel.unresolved, near,
                     " ".join("%.12e" % r for r in roots)])
        values.append(sel.value)
    write_csv(_out(out, "selection.csv"), ["mean", "selected", "unresolved", "nearest_root", "roots"], rows)
    if state is not None:
        plotting.selection_figure(_out(out, "selection.png"), state, means, values)


def cmd_sweep(cfg, out, threads=1):
    model = _drift(cfg["drift"])
    grid = _grid(cfg["grid"])
    scheme = _scheme(cfg["scheme"])
    state = _initial(cfg["initial"], grid)
    res = analysis.viscosity_sweep(state, model, float(cfg["t_end"]), cfg["eps"], int(cfg["N"]),
                                   int(cfg["d"]), scheme, cfg["uniform_bound"],
                                   float(cfg["dm_bound"]), cfg["R"], threads)
    write_csv(_out(out, "sweep.csv"), list(analysis.SweepRow.HEADER), [r.row() for r in res.rows])
    write_csv(_out(out, "bounds.csv"), analysis.BOUND_HEADER,
              [analysis.bound_row(r.bounds) for r in res.rows])
    if res.fit is not None:
        write_csv(_out(out, "rate.csv"), list(analysis.RateFit.HEADER), [res.fit.row()])
    plotting.sweep_figure(_out(out, "sweep.png"), res.rows, res.fit)


COMMANDS = {"quantize": cmd_quantize, "mfg": cmd_mfg, "nplayer": cmd_nplayer,
            "pde": cmd_pde, "select": cmd_select, "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="mfglab", description="Mean field game laboratory.")
    p.add_argument("subcommand", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config document (defaults apply to missing keys)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--dump-config", action="store_true",
                   help="print the fully-defaulted config and exit")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return p


def load_config(subcommand, path):
    given = {}
    if path is not None:
        try:
            with open(path) as fh:
                given = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return merge(DEFAULTS[subcommand], given)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.subcommand, args.config)
        if args.dump_config:
            sys.stdout.write(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        with open(_out(args.out, "config.json"), "w") as fh:
            fh.write(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        COMMANDS[args.subcommand](cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PreconditionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
