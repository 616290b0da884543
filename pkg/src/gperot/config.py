"""Config file handling (TOML), binary state snapshots, CSV/VTK exporters."""

from __future__ import annotations

import struct
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import PFrame
from .fem import Discretization
from .model import Component, ConfigurationError, ModelSpec, Potential
from .optimize import RunOptions, StepRule

MAGIC = b"GPEROT01"


# --- step rule <-> string --------------------------------------------------

def parse_step(text: str) -> StepRule:
    """Parse 'fixed:F' | 'ls' | 'adaptive' into a StepRule."""
    if text == "ls":
        return StepRule.line_search()
    if text == "adaptive":
        return StepRule.adaptive()
    if text.startswith("fixed:"):
        return StepRule.fixed(float(text.split(":", 1)[1]))
    raise ConfigurationError(f"unknown step rule {text!r} (expected fixed:F|ls|adaptive)")


def format_step(rule: StepRule) -> str:
    if rule.variant == "fixed":
        return f"fixed:{rule.tau:.17g}"
    if rule.variant == "line_search":
        return "ls"
    return "adaptive"


# --- TOML ------------------------------------------------------------------

def parse_config(text: str):
    """Parse a TOML config into (ModelSpec, RunOptions)."""
    doc = tomllib.loads(text)
    try:
        model = doc["model"]
        comps = []
        for block in doc["component"]:
            pot = block.get("potential", {})
            comps.append(Component(
                mass=float(block["mass"]),
                frequency=float(block["frequency"]),
                potential=Potential(
                    a=float(pot.get("a", 0.0)), b=float(pot.get("b", 0.0)),
                    c=float(pot.get("c", 0.0)), d=float(pot.get("d", 0.0)),
                    alpha=float(pot.get("alpha", 0.0)),
                    beta=float(pot.get("beta", 0.0))),
                assumption_margin=float(block.get("assumption_margin", 0.1)),
            ))
        spec = ModelSpec(
            domain=tuple(float(v) for v in model["domain"]),
            elements_per_dir=int(model["elements_per_dir"]),
            components=tuple(comps),
            interaction=np.array(model["interaction"], dtype=float),
        )
    except KeyError as exc:
        raise ConfigurationError(f"missing config key: {exc}") from exc

    run = doc.get("run", {})
    options = RunOptions(
        method=run.get("method", "earg"),
        omega=float(run.get("omega", 0.9)),
        step=parse_step(run.get("step", "fixed:1.0")),
        stop_residual=float(run.get("stop_residual", 1e-14)),
        max_iters=int(run.get("max_iters", 10000)),
        tol_cg=float(run.get("tol_cg", 1e-8)),
        warm_start_residual=float(run.get("warm_start_residual", 1e-2)),
        record_every=int(run.get("record_every", 1)),
        fallback=run.get("fallback", "earg_step"),
    )
    return spec, options


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot format {type(v)}")


def emit_config(spec: ModelSpec, options: RunOptions | None = None) -> str:
    lines = ["[model]",
             f"domain = {_fmt(list(spec.domain))}",
             f"elements_per_dir = {spec.elements_per_dir}",
             f"interaction = {_fmt([list(row) for row in spec.interaction])}",
             ""]
    for comp in spec.components:
        pot = comp.potential
        lines += ["[[component]]",
                  f"mass = {_fmt(comp.mass)}",
                  f"frequency = {_fmt(comp.frequency)}",
                  f"assumption_margin = {_fmt(comp.assumption_margin)}",
                  "[component.potential]"]
        for key in ("a", "b", "c", "d", "alpha", "beta"):
            lines.append(f"{key} = {_fmt(getattr(pot, key))}")
        lines.append("")
    if options is not None:
        lines += ["[run]",
                  f"method = {_fmt(options.method)}",
                  f"omega = {_fmt(options.omega)}",
                  f"step = {_fmt(format_step(options.step))}",
                  f"stop_residual = {_fmt(options.stop_residual)}",
                  f"max_iters = {options.max_iters}",
                  f"tol_cg = {_fmt(options.tol_cg)}",
                  f"warm_start_residual = {_fmt(options.warm_start_residual)}",
                  f"record_every = {options.record_every}",
                  f"fallback = {_fmt(options.fallback)}",
                  ""]
    return "\n".join(lines)


# --- binary state ------------------------------------------------------------

def save_state(path, spec: ModelSpec, coefficients: np.ndarray) -> None:
    """Write a binary snapshot of the free-dof coefficients (column-major)."""
    coefficients = np.asarray(coefficients, dtype=np.complex128)
    n, p = coefficients.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQQ", n, p, spec.elements_per_dir))
        fh.write(struct.pack("<4d", *spec.domain))
        flat = coefficients.ravel(order="F")
        inter = np.empty(2 * flat.size, dtype="<f8")
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.tobytes())


def load_state(path):
    """Read a snapshot; returns (coefficients n x p, m, domain)."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a state file (bad magic)")
        n, p, m = struct.unpack("<QQQ", fh.read(24))
        domain = struct.unpack("<4d", fh.read(32))
        raw = np.frombuffer(fh.read(16 * n * p), dtype="<f8")
    if raw.size != 2 * n * p:
        raise ValueError(f"{path}: truncated state file")
    flat = raw[0::2] + 1j * raw[1::2]
    return flat.reshape((n, p), order="F"), int(m), domain


def state_frame(disc: Discretization, path) -> PFrame:
    """Load a state and wrap it for the given discretization, checking shapes."""
    coeffs, m, domain = load_state(path)
    if m != disc.spec.elements_per_dir or coeffs.shape != (disc.n, disc.spec.p):
        raise ValueError(
            f"state file mismatch: file has n={coeffs.shape[0]}, p={coeffs.shape[1]}, "
            f"m={m}; discretization expects n={disc.n}, p={disc.spec.p}, "
            f"m={disc.spec.elements_per_dir}")
    if not np.allclose(domain, disc.spec.domain):
        raise ValueError("state file domain differs from configured domain")
    return PFrame(disc, coeffs)


# --- history / densities ------------------------------------------------------

def write_history(path, history) -> None:
    with open(path, "w") as fh:
        fh.write("k,energy,residual,tau,cg_iters,wall_ms\n")
        for rec in history:
            fh.write(f"{rec.k},{rec.energy:.16e},{rec.residual:.16e},"
                     f"{rec.tau:.16e},{rec.cg_iters},{rec.wall_ms:.3f}\n")


def node_densities(disc: Discretization, coefficients: np.ndarray) -> np.ndarray:
    """|phi_j|^2 at all (2m+1)^2 nodes, boundary included (zero there)."""
    p = coefficients.shape[1]
    full = np.zeros((disc.n_nodes, p))
    free = disc.free_to_node
    full[free] = np.abs(coefficients) ** 2
    return full


def export_density(disc: Discretization, coefficients: np.ndarray, path,
                   fmt: str = "csv") -> None:
    dens = node_densities(disc, coefficients)
    p = dens.shape[1]
    m = disc.spec.elements_per_dir
    nx = 2 * m + 1
    ax, bx, ay, by = disc.spec.domain
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write("x,y," + ",".join(f"density_{j + 1}" for j in range(p)) + "\n")
            for i in range(disc.n_nodes):
                x, y = disc.nodes[i]
                vals = ",".join(f"{dens[i, j]:.16e}" for j in range(p))
                fh.write(f"{x:.16e},{y:.16e},{vals}\n")
    elif fmt == "vtk":
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write("component densities\nASCII\nDATASET STRUCTURED_POINTS\n")
            fh.write(f"DIMENSIONS {nx} {nx} 1\n")
            fh.write(f"ORIGIN {ax:.16g} {ay:.16g} 0\n")
            fh.write(f"SPACING {(bx - ax) / (nx - 1):.16g} "
                     f"{(by - ay) / (nx - 1):.16g} 1\n")
            fh.write(f"POINT_DATA {nx * nx}\n")
            for j in range(p):
                fh.write(f"SCALARS density_{j + 1} double 1\nLOOKUP_TABLE default\n")
                for v in dens[:, j]:
                    fh.write(f"{v:.16e}\n")
    else:
        raise ValueError("format must be 'csv' or 'vtk'")
