"""Command line interface: solve, spectrum, rate, condition, preset."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfg
from .core import MetricSelector, Problem
from .model import ConfigurationError, preset
from .optimize import RunOptions, run
from .spectral import (condition_sweep, eigs_component_A,
                       eigs_projected_hessian, eigs_horizontal_pencil,
                       predicted_rate)


def _sig8(x: float) -> str:
    return f"{x:.8g}"


def _load_spec_options(args):
    if getattr(args, "config", None):
        with open(args.config) as fh:
            spec, options = cfg.parse_config(fh.read())
    elif getattr(args, "preset", None):
        spec = preset(args.preset)
        options = RunOptions()
        if spec.p >= 3:
            options.tol_cg = 1e-1
    else:
        raise ConfigurationError("need --config or --preset")
    if getattr(args, "mesh", None):
        spec = spec.with_mesh(args.mesh)
    # flag overrides
    if getattr(args, "method", None):
        options.method = args.method
    if getattr(args, "omega", None) is not None:
        options.omega = args.omega
    if getattr(args, "step", None):
        options.step = cfg.parse_step(args.step)
    if getattr(args, "tol", None) is not None:
        options.stop_residual = args.tol
    if getattr(args, "tol_cg", None) is not None:
        options.tol_cg = args.tol_cg
    if getattr(args, "max_iters", None) is not None:
        options.max_iters = args.max_iters
    return spec, options


def _load_state_problem(args):
    spec, options = _load_spec_options(args)
    problem = Problem(spec)
    frame = cfg.state_frame(problem.disc, args.state)
    return spec, options, problem, frame


def cmd_solve(args) -> int:
    spec, options = _load_spec_options(args)
    problem = Problem(spec)
    result = run(spec, options, problem=problem)

    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    cfg.write_history(os.path.join(out, "history.csv"), result.history)
    cfg.save_state(os.path.join(out, "state.bin"), spec, result.frame.coefficients)
    cfg.export_density(problem.disc, result.frame.coefficients,
                       os.path.join(out, "density.csv"), fmt="csv")
    cfg.export_density(problem.disc, result.frame.coefficients,
                       os.path.join(out, "density.vtk"), fmt="vtk")
    with open(os.path.join(out, "config.toml"), "w") as fh:
        fh.write(cfg.emit_config(spec, options))

    print(f"termination: {result.termination}")
    print(f"iterations: {result.history[-1].k}")
    print(f"energy: {_sig8(result.energy)}")
    print("lambda: " + " ".join(_sig8(v) for v in result.multipliers))
    print(f"residual: {result.residual:.3e}")
    return 0 if result.converged else 2


def cmd_spectrum(args) -> int:
    spec, options, problem, frame = _load_state_problem(args)
    k = args.k
    for j in range(spec.p):
        rep = eigs_component_A(problem, frame, j, k, tol=args.eig_tol,
                               seed=args.seed)
        print(f"component {j + 1} operator eigenvalues: "
              + " ".join(_sig8(v) for v in rep.eigenvalues))
    for j in range(spec.p):
        rep = eigs_projected_hessian(problem, frame, j, k, tol=args.eig_tol,
                                     seed=args.seed)
        print(f"component {j + 1} projected Hessian eigenvalues: "
              + " ".join(_sig8(v) for v in rep.eigenvalues))
    return 0


def cmd_rate(args) -> int:
    spec, options, problem, frame = _load_state_problem(args)
    if (args.method or options.method) == "lagr":
        sel = MetricSelector.lagrangian(args.omega if args.omega is not None
                                        else options.omega)
    else:
        sel = MetricSelector.energy_adaptive()
    lo = eigs_horizontal_pencil(problem, frame, sel, "smallest", k=1,
                                tol=args.eig_tol, seed=args.seed)
    hi = eigs_horizontal_pencil(problem, frame, sel, "largest", k=1,
                                tol=args.eig_tol, seed=args.seed)
    eta_inf = float(lo.eigenvalues[0])
    eta_sup = float(hi.eigenvalues[-1])
    print(f"eta_inf: {_sig8(eta_inf)}")
    print(f"eta_sup: {_sig8(eta_sup)}")
    for tau in args.tau:
        pred = predicted_rate(tau, eta_inf, eta_sup)
        flag = "admissible" if pred.admissible else "inadmissible"
        print(f"rho(tau={_sig8(tau)}): {_sig8(pred.rho)} [{flag}]")
    return 0


def cmd_condition(args) -> int:
    spec, options, problem, frame = _load_state_problem(args)
    omegas = args.omega_list
    rows = condition_sweep(problem, frame, omegas, tol=args.eig_tol,
                           seed=args.seed)
    lines = ["omega," + ",".join(f"kappa_{j + 1}" for j in range(spec.p))]
    for omega, kappas in rows:
        cells = [("indefinite" if kp is None else _sig8(kp)) for kp in kappas]
        lines.append(f"{omega:.10g}," + ",".join(cells))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_preset(args) -> int:
    spec = preset(args.name)
    options = RunOptions(tol_cg=1e-1 if spec.p >= 3 else 1e-8)
    sys.stdout.write(cfg.emit_config(spec, options))
    return 0


def _add_common(p, state: bool = False):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--preset", choices=["model1", "model2", "model3"])
    p.add_argument("--method", choices=["earg", "lagr"])
    p.add_argument("--omega", type=float)
    p.add_argument("--step", help="fixed:F | ls | adaptive")
    p.add_argument("--tol", type=float, help="outer residual tolerance")
    p.add_argument("--tol-cg", dest="tol_cg", type=float,
                   help="inner tolerance factor")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--mesh", type=int, help="override elements per direction")
    p.add_argument("--out", help="output directory or file")
    p.add_argument("--seed", type=int, default=0)
    if state:
        p.add_argument("--state", required=True, help="binary state snapshot")
        p.add_argument("--eig-tol", dest="eig_tol", type=float, default=1e-8)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gperot",
        description="Ground states of rotating multicomponent condensates "
                    "by Riemannian gradient descent")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the descent iteration")
    _add_common(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("spectrum", help="component and projected-Hessian spectra")
    _add_common(p, state=True)
    p.add_argument("-k", type=int, default=4, help="eigenvalues per operator")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("rate", help="predicted contraction rate at a state")
    _add_common(p, state=True)
    p.add_argument("--tau", type=float, nargs="+", default=[1.0])
    p.set_defaults(fn=cmd_rate)

    p = sub.add_parser("condition", help="metric condition numbers over omega")
    _add_common(p, state=True)
    p.add_argument("--omega-list", dest="omega_list", type=float, nargs="+",
                   default=[0.0, 0.5, 0.9, 0.95, 0.99])
    p.set_defaults(fn=cmd_condition)

    p = sub.add_parser("preset", help="print a built-in model config")
    p.add_argument("name", choices=["model1", "model2", "model3"])
    p.set_defaults(fn=cmd_preset)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
