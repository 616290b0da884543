"""Uniform Q2 (biquadratic) finite elements on a rectangle with Dirichlet boundary.

Assembles the constant matrices (mass M, stiffness S, rotation R, potential-
weighted masses) and provides quadrature-point evaluation and density-weighted
assembly used by the nonlinear terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import ConfigurationError, ModelSpec


def shape1d(xi: np.ndarray) -> np.ndarray:
    """Quadratic Lagrange values on [-1,1] with nodes -1, 0, 1; shape (len(xi), 3)."""
    xi = np.asarray(xi, dtype=float)
    return np.stack([0.5 * xi * (xi - 1.0), 1.0 - xi**2, 0.5 * xi * (xi + 1.0)], axis=-1)


def dshape1d(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.stack([xi - 0.5, -2.0 * xi, xi + 0.5], axis=-1)


@dataclass
class Quadrature:
    """Per-element quadrature tables on the uniform grid.

    Points are ordered element-major, point-minor; a global quadrature array
    has shape (n_elements * nq,) after raveling (element index slowest).
    """

    points: np.ndarray      # (n_el, nq, 2) physical coordinates
    weights: np.ndarray     # (nq,) reference weights * constant jacobian
    basis: np.ndarray       # (nq, 9) reference basis values
    grads: np.ndarray       # (nq, 9, 2) physical basis gradients (grid-uniform)
    conn: np.ndarray        # (n_el, 9) global node indices
    conn_free: np.ndarray   # (n_el, 9) free-dof indices, -1 on the boundary

    @property
    def n_elements(self) -> int:
        return self.points.shape[0]

    @property
    def nq(self) -> int:
        return self.weights.shape[0]

    @property
    def total_points(self) -> int:
        return self.n_elements * self.nq

    @property
    def global_weights(self) -> np.ndarray:
        """Weights aligned with a raveled global quadrature field."""
        return np.broadcast_to(self.weights, (self.n_elements, self.nq)).ravel()


@dataclass
class Discretization:
    """Assembled discrete problem over the free (interior) degrees of freedom."""

    spec: ModelSpec
    nodes: np.ndarray            # ((2m+1)^2, 2) all Q2 node coordinates
    boundary_mask: np.ndarray    # True on Dirichlet nodes
    n: int                       # number of free dofs
    M: sp.csr_matrix             # mass
    S: sp.csr_matrix             # stiffness
    R: sp.csr_matrix             # rotation, entries int psi_a (x d_y - y d_x) psi_b
    Vmass: list                  # per-component potential-weighted mass matrices
    quad: Quadrature

    # fixed element-connectivity CSR pattern for fast repeated assembly;
    # filled lazily by _assembly_pattern
    _pattern: tuple = None

    @property
    def n_nodes(self) -> int:
        """Total Q2 node count (2m+1)^2, boundary included."""
        return self.nodes.shape[0]

    @property
    def free_to_node(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)


class QuadField(np.ndarray):
    """Complex values of a coefficient vector at all quadrature points.

    Plain ndarray subclass used only as a semantic marker; ordering is
    element-major, point-minor.
    """

    def __new__(cls, values):
        return np.asarray(values).view(cls)


def _grid(spec: ModelSpec):
    ax, bx, ay, by = spec.domain
    m = spec.elements_per_dir
    nx = 2 * m + 1
    x = np.linspace(ax, bx, nx)
    y = np.linspace(ay, by, nx)
    return x, y, m, nx


def _connectivity(m: int, nx: int) -> np.ndarray:
    ex, ey = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    ex = ex.ravel()
    ey = ey.ravel()
    conn = np.empty((m * m, 9), dtype=np.int64)
    for j in range(3):        # y-direction local index
        for i in range(3):    # x-direction local index
            conn[:, 3 * j + i] = (2 * ey + j) * nx + (2 * ex + i)
    return conn


def _quadrature(spec: ModelSpec, q: int) -> Quadrature:
    x, y, m, nx = _grid(spec)
    hx = (spec.domain[1] - spec.domain[0]) / m
    hy = (spec.domain[3] - spec.domain[2]) / m
    gp, gw = np.polynomial.legendre.leggauss(q)

    # tensor reference rule, x fastest
    XI, ETA = np.meshgrid(gp, gp, indexing="ij")
    WX, WY = np.meshgrid(gw, gw, indexing="ij")
    xi = XI.ravel()
    eta = ETA.ravel()
    wref = (WX * WY).ravel() * (hx / 2.0) * (hy / 2.0)

    lx, ly = shape1d(xi), shape1d(eta)
    dlx, dly = dshape1d(xi), dshape1d(eta)
    nq = q * q
    basis = np.empty((nq, 9))
    grads = np.empty((nq, 9, 2))
    for j in range(3):
        for i in range(3):
            a = 3 * j + i
            basis[:, a] = lx[:, i] * ly[:, j]
            grads[:, a, 0] = dlx[:, i] * (2.0 / hx) * ly[:, j]
            grads[:, a, 1] = lx[:, i] * dly[:, j] * (2.0 / hy)

    # physical quadrature points per element
    ex, ey = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    x0 = spec.domain[0] + hx * ex.ravel()
    y0 = spec.domain[2] + hy * ey.ravel()
    points = np.empty((m * m, nq, 2))
    points[:, :, 0] = x0[:, None] + hx * (xi[None, :] + 1.0) / 2.0
    points[:, :, 1] = y0[:, None] + hy * (eta[None, :] + 1.0) / 2.0

    conn = _connectivity(m, nx)

    boundary = _boundary_mask(nx)
    free_index = -np.ones(nx * nx, dtype=np.int64)
    free_index[~boundary] = np.arange((~boundary).sum())
    conn_free = free_index[conn]

    return Quadrature(points, wref, basis, grads, conn, conn_free)


def _boundary_mask(nx: int) -> np.ndarray:
    ix, iy = np.meshgrid(np.arange(nx), np.arange(nx), indexing="ij")
    mask = (ix == 0) | (ix == nx - 1) | (iy == 0) | (iy == nx - 1)
    # node id = iy * nx + ix
    out = np.zeros(nx * nx, dtype=bool)
    out[(iy * nx + ix).ravel()] = mask.ravel()
    return out


def _scatter(quad: Quadrature, elem_mats: np.ndarray, n_total: int, conn: np.ndarray):
    """Sum (n_el, 9, 9) element matrices into a CSR matrix over `conn` indexing."""
    rows = np.repeat(conn, 9, axis=1)            # (n_el, 81) row index a
    cols = np.tile(conn, (1, 9))                 # (n_el, 81) col index b
    data = elem_mats.reshape(quad.n_elements, 81)
    mask = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix(
        (data[mask], (rows[mask], cols[mask])), shape=(n_total, n_total)
    ).tocsr()
    A.sort_indices()
    return A


def assemble_constant_matrices(spec: ModelSpec, q: int = 4):
    """Assemble full (unconstrained) M, S, R and per-component potential masses.

    Returned matrices include boundary nodes; build_discretization slices them
    down to the free dofs.
    """
    quad = _quadrature(spec, q)
    nq = quad.nq
    w = quad.weights
    N = quad.conn.max() + 1

    Me = np.einsum("q,qa,qb->ab", w, quad.basis, quad.basis)
    Se = np.einsum("q,qad,qbd->ab", w, quad.grads, quad.grads)
    M = _scatter(quad, np.broadcast_to(Me, (quad.n_elements, 9, 9)), N, quad.conn)
    S = _scatter(quad, np.broadcast_to(Se, (quad.n_elements, 9, 9)), N, quad.conn)

    # rotation: int psi_a (x d_y psi_b - y d_x psi_b)
    X = quad.points[:, :, 0]
    Y = quad.points[:, :, 1]
    P_y = np.einsum("q,qa,qb->qab", w, quad.basis, quad.grads[:, :, 1]).reshape(nq, 81)
    P_x = np.einsum("q,qa,qb->qab", w, quad.basis, quad.grads[:, :, 0]).reshape(nq, 81)
    Re = (X @ P_y - Y @ P_x).reshape(quad.n_elements, 9, 9)
    R = _scatter(quad, Re, N, quad.conn)

    Pmass = np.einsum("q,qa,qb->qab", w, quad.basis, quad.basis).reshape(nq, 81)
    Vmass = []
    for comp in spec.components:
        vvals = comp.potential(X, Y)
        Ve = (vvals @ Pmass).reshape(quad.n_elements, 9, 9)
        Vmass.append(_scatter(quad, Ve, N, quad.conn))

    return M, S, R, Vmass, quad


def build_discretization(spec: ModelSpec, q: int = 4) -> Discretization:
    """Build the Q2 grid, check the trap-vs-rotation condition, assemble matrices."""
    x, y, m, nx = _grid(spec)
    nodes = np.stack(np.meshgrid(x, y, indexing="xy"), axis=-1).reshape(-1, 2)
    # node id iy*nx+ix -> coordinates (x[ix], y[iy])
    ix, iy = np.meshgrid(np.arange(nx), np.arange(nx), indexing="ij")
    nodes = np.empty((nx * nx, 2))
    nodes[(iy * nx + ix).ravel(), 0] = x[ix.ravel()]
    nodes[(iy * nx + ix).ravel(), 1] = y[iy.ravel()]

    Mf, Sf, Rf, Vf, quad = assemble_constant_matrices(spec, q)

    # rotation-dominance check at every quadrature point
    X = quad.points[:, :, 0]
    Y = quad.points[:, :, 1]
    r2 = X**2 + Y**2
    for j, comp in enumerate(spec.components):
        gap = comp.potential(X, Y) - 0.25 * (1.0 + comp.assumption_margin) * comp.frequency**2 * r2
        if gap.min() < -1e-12:
            e, k = np.unravel_index(np.argmin(gap), gap.shape)
            raise ConfigurationError(
                f"component {j}: trap potential does not dominate rotation at "
                f"quadrature point ({X[e, k]:.4g}, {Y[e, k]:.4g}) (margin "
                f"{comp.assumption_margin}, deficit {gap.min():.3e})"
            )

    boundary = _boundary_mask(nx)
    free = np.flatnonzero(~boundary)
    n = free.size

    def restrict(A):
        B = A[free][:, free].tocsr()
        B.sort_indices()
        return B

    return Discretization(
        spec=spec,
        nodes=nodes,
        boundary_mask=boundary,
        n=n,
        M=restrict(Mf),
        S=restrict(Sf),
        R=restrict(Rf),
        Vmass=[restrict(V) for V in Vf],
        quad=quad,
    )


def _coeffs_by_element(disc: Discretization, coeffs: np.ndarray) -> np.ndarray:
    """Gather free coefficients per element; Dirichlet slots contribute zero."""
    quad = disc.quad
    padded = np.zeros(disc.n + 1, dtype=coeffs.dtype)
    padded[:-1] = coeffs
    return padded[quad.conn_free]   # -1 picks the trailing zero


def eval_quadrature(disc: Discretization, coeffs: np.ndarray) -> QuadField:
    """Values of the FE function with the given free coefficients at all quad points."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (disc.n,):
        raise ValueError(f"expected coefficient vector of length {disc.n}, got {coeffs.shape}")
    ce = _coeffs_by_element(disc, coeffs)                 # (n_el, 9)
    vals = ce @ disc.quad.basis.T                          # (n_el, nq)
    return QuadField(vals.ravel())


def assemble_load(disc: Discretization, qvals: np.ndarray) -> np.ndarray:
    """Dual (load) vector l_a = sum_q w_q f(x_q) psi_a(x_q) over free dofs."""
    quad = disc.quad
    f = np.asarray(qvals).reshape(quad.n_elements, quad.nq)
    le = (f * quad.weights) @ quad.basis                   # (n_el, 9)
    out = np.zeros(disc.n + 1, dtype=le.dtype)
    np.add.at(out, quad.conn_free, le)
    return out[:-1]


def _assembly_pattern(disc: Discretization):
    """Fixed CSR pattern of the free-dof element connectivity plus the map
    from element-local matrix entries to CSR data slots."""
    if disc._pattern is None:
        quad = disc.quad
        rows = np.repeat(quad.conn_free, 9, axis=1).ravel()
        cols = np.tile(quad.conn_free, (1, 9)).ravel()
        mask = (rows >= 0) & (cols >= 0)
        r, c = rows[mask], cols[mask]
        order = np.lexsort((c, r))
        rs, cs = r[order], c[order]
        new_entry = np.ones(rs.size, dtype=bool)
        new_entry[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
        slot_sorted = np.cumsum(new_entry) - 1
        slots = np.empty(rs.size, dtype=np.int64)
        slots[order] = slot_sorted
        nnz = slot_sorted[-1] + 1
        indices = cs[new_entry]
        indptr = np.zeros(disc.n + 1, dtype=np.int64)
        np.add.at(indptr, rs[new_entry] + 1, 1)
        indptr = np.cumsum(indptr)
        object.__setattr__(disc, "_pattern", (indptr, indices, mask, slots, nnz))
    return disc._pattern


def assemble_weighted_mass_data(disc: Discretization, w) -> np.ndarray:
    """CSR data array (on the fixed connectivity pattern) of the weighted mass."""
    quad = disc.quad
    w = np.asarray(w)
    if np.iscomplexobj(w):
        if w.size and np.abs(w.imag).max() > 1e-12 * max(1.0, np.abs(w).max()):
            raise ValueError("weight field must be real-valued")
        w = w.real
    scale = max(1.0, abs(w).max()) if w.size else 1.0
    if w.min() < -1e-14 * scale:
        raise ValueError(f"weight field has negative values (min {w.min():.3e})")
    f = w.reshape(quad.n_elements, quad.nq) * quad.weights
    nq = quad.nq
    Pmass = np.einsum("qa,qb->qab", quad.basis, quad.basis).reshape(nq, 81)
    data = (f @ Pmass).ravel()                             # (n_el * 81,)
    indptr, indices, mask, slots, nnz = _assembly_pattern(disc)
    return np.bincount(slots, weights=data[mask], minlength=nnz)


def assemble_weighted_mass(disc: Discretization, w) -> sp.csr_matrix:
    """Mass matrix weighted by the real nonnegative quadrature field w."""
    data = assemble_weighted_mass_data(disc, w)
    indptr, indices, _, _, _ = _assembly_pattern(disc)
    return sp.csr_matrix((data, indices, indptr), shape=(disc.n, disc.n))


def align_to_pattern(disc: Discretization, A: sp.csr_matrix) -> np.ndarray:
    """Data array of A expressed on the fixed connectivity pattern."""
    indptr, indices, _, _, nnz = _assembly_pattern(disc)
    Z = sp.csr_matrix((np.zeros(nnz), indices.copy(), indptr.copy()),
                      shape=(disc.n, disc.n))
    B = (A + Z).tocsr()
    B.sort_indices()
    if B.indptr.size != indptr.size or not np.array_equal(B.indices, indices):
        raise ValueError("matrix sparsity is not contained in the element pattern")
    return B.data


def quartic_interactions(disc: Discretization, coefficients: np.ndarray) -> np.ndarray:
    """Pairwise density overlaps Q_ij = int |phi_i|^2 |phi_j|^2 dx for an n x p array."""
    coefficients = np.asarray(coefficients)
    p = coefficients.shape[1]
    gw = disc.quad.global_weights
    dens = np.empty((p, gw.size))
    for j in range(p):
        vals = eval_quadrature(disc, coefficients[:, j])
        dens[j] = np.abs(vals) ** 2
    return (dens * gw) @ dens.T
