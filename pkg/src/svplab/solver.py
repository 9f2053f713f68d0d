"""Discrete p-energy minimization on canonical meshes.

The solver minimizes sum_q w a(x) |grad f|^p / p over nodal fields
matching Dirichlet cap data, with lateral faces either natural (Neumann)
or pinned to zero.  The outer loop is a Kacanov (lagged-coefficient)
fixed point: each step freezes the diffusivity
a(x) (|grad f|^2 + eps^2)^((p-2)/2) from the previous iterate and solves
one symmetric positive-definite system.  A damping factor, halved on
energy increase, keeps the iteration monotone for large p.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import DIRICHLET0, Mesh


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundarySpec:
    """Cap Dirichlet data plus the lateral-face condition kinds.

    g_low / g_high map mesh-point arrays of shape (N, dim) to values; the
    mesh coordinates are the cross-section axes followed by the axial
    coordinate (centered band coordinate in layer mode, radius in radial
    mode).  lateral must match the domain's lateral partition.  Where a
    Dirichlet-zero lateral face meets a cap, the zero condition wins.
    """

    g_low: callable
    g_high: callable
    lateral: tuple[str, ...]


@dataclass(frozen=True)
class SolverSettings:
    eps_reg: float = None          # default 1e-8 x cap-data scale
    tol_energy: float = 1e-10
    max_outer: int = 200
    damping: float = 1.0
    direct_limit: int = 20000      # direct factorization below this many unknowns
    cg_rtol: float = 1e-12
    cg_maxiter: int = None

    def __post_init__(self):
        if self.eps_reg is not None and self.eps_reg < 0:
            raise ValueError("eps_reg must be >= 0")
        if self.tol_energy <= 0:
            raise ValueError("tol_energy must be positive")
        if not (0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SolverDiagnostics:
    outer_iterations: int
    converged: bool
    energy: float
    last_decrease: float
    eps_reg: float
    damping_final: float
    linear_solver: str


@dataclass(frozen=True)
class ScalarField:
    """Nodal solution with its boundary data and solver diagnostics."""

    mesh: Mesh
    values: np.ndarray
    op: object
    bc: BoundarySpec
    diagnostics: SolverDiagnostics

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=float))


def dirichlet_data(mesh, bc):
    """Boolean Dirichlet mask and prescribed values (zero elsewhere)."""
    if tuple(bc.lateral) != tuple(mesh.domain.lateral_bc):
        raise ValueError("boundary spec lateral kinds do not match the domain partition")
    nodes = mesh.grid.nodes
    mask = np.zeros(mesh.n_nodes, dtype=bool)
    vals = np.zeros(mesh.n_nodes)
    low = mesh.cap_node_ids("low")
    high = mesh.cap_node_ids("high")
    g_low = np.asarray(bc.g_low(nodes[low]), dtype=float)
    g_high = np.asarray(bc.g_high(nodes[high]), dtype=float)
    if not (np.all(np.isfinite(g_low)) and np.all(np.isfinite(g_high))):
        raise ValueError("cap data must be finite on all cap nodes")
    mask[low] = True
    vals[low] = g_low
    mask[high] = True
    vals[high] = g_high
    lat0 = mesh.lateral_node_ids(kind=DIRICHLET0)
    mask[lat0] = True
    vals[lat0] = 0.0
    return mask, vals


def _linear_solve(K, mask, vals, settings):
    free = ~mask
    n_free = int(free.sum())
    Kff = K[free][:, free].tocsc()
    rhs = -K[free][:, mask] @ vals[mask]
    if n_free == 0:
        return vals.copy(), "none"
    if n_free <= settings.direct_limit:
        try:
            lu = spla.splu(Kff)
        except RuntimeError as exc:
            raise SolverError(f"singular inner system: {exc}") from exc
        xf = lu.solve(rhs)
        method = "direct"
    else:
        diag = Kff.diagonal()
        if np.any(diag <= 0):
            raise SolverError("singular inner system: nonpositive diagonal")
        M = sp.diags(1.0 / diag)
        maxiter = settings.cg_maxiter or 40 * n_free
        xf, info = spla.cg(Kff, rhs, rtol=settings.cg_rtol, atol=0.0, maxiter=maxiter, M=M)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
        method = "cg-jacobi"
    out = vals.copy()
    out[free] = xf
    return out, method


def _regularized_energy(mesh, op, values, eps):
    g = mesh.grid.grads_at_quads(values)
    s = np.sum(g**2, axis=-1) + eps**2
    a = op.a(mesh.pk_at_quads())
    return float(np.sum(mesh.grid.quad_weights * a * s ** (0.5 * op.p) / op.p))


def solve(domain, mesh, op, bc, settings=None):
    """Minimize the p-Dirichlet energy for the given caps and laterals.

    Returns a ScalarField; non-convergence is reported through the
    diagnostics rather than raised.  For p = 2 the coefficient does not
    depend on the iterate and a single linear solve is exact.
    """
    if mesh.domain is not domain and mesh.domain != domain:
        raise ValueError("mesh was built on a different domain")
    settings = settings or SolverSettings()
    mask, vals = dirichlet_data(mesh, bc)
    scale = float(np.max(np.abs(vals))) if mask.any() else 0.0
    eps = settings.eps_reg if settings.eps_reg is not None else 1e-8 * max(scale, 1.0)

    a_q = op.a(mesh.pk_at_quads())
    f, method = _linear_solve(mesh.grid.stiffness(coeff=a_q), mask, vals, settings)
    energy = _regularized_energy(mesh, op, f, eps)
    theta = settings.damping
    converged = op.p == 2.0
    iters = 1
    decrease = 0.0

    while not converged and iters < settings.max_outer:
        g = mesh.grid.grads_at_quads(f)
        s = np.sum(g**2, axis=-1) + eps**2
        coeff = a_q * s ** (0.5 * (op.p - 2.0))
        f_hat, method = _linear_solve(mesh.grid.stiffness(coeff=coeff), mask, vals, settings)
        while True:
            f_new = f + theta * (f_hat - f)
            e_new = _regularized_energy(mesh, op, f_new, eps)
            if e_new <= energy or theta <= 2**-30:
                break
            theta *= 0.5
        decrease = (energy - e_new) / max(abs(energy), 1e-300)
        f, energy = f_new, e_new
        iters += 1
        if decrease < settings.tol_energy:
            converged = True

    diag = SolverDiagnostics(
        outer_iterations=iters,
        converged=converged,
        energy=energy,
        last_decrease=decrease,
        eps_reg=eps,
        damping_final=theta,
        linear_solver=method,
    )
    return ScalarField(mesh=mesh, values=f, op=op, bc=bc, diagnostics=diag)


@dataclass(frozen=True)
class WeakResidualReport:
    """Normalized interior weak residuals on a slab.

    plain_form tests nodal hats phi (Definition-1 style identity);
    product_form tests phi * f.  Both are max_i |residual_i| / N_i with
    N_i the corresponding absolute-value integral, so exact discrete
    solutions give roundoff-level plain_form values.
    """

    plain_form: float
    product_form: float
    n_tests: int


def weak_residual(field, t, tau):
    """Interior weak residuals of the field over the slab between t and tau."""
    mesh = field.mesh
    elems = mesh.slab_elements(t, tau)
    jt, _ = mesh.station_index(t)
    jtau, _ = mesh.station_index(tau)

    grid = mesh.grid
    g = grid.grads_at_quads(field.values)[elems]
    fq = grid.vals_at_quads(field.values)[elems]
    a = field.op.a(mesh.pk_at_quads())[elems]
    s = np.sum(g**2, axis=-1)
    fac = np.zeros_like(s)
    pos = s > 0
    fac[pos] = s[pos] ** (0.5 * (field.op.p - 2.0))
    flux = (a * fac)[..., None] * g          # A(x, grad f) at slab quadrature points
    flux_norm = a * fac * np.sqrt(s)

    w = grid.quad_weights[elems]
    conn = grid.elem_nodes[elems]
    gb = grid.basis_grads                    # (Q, d, m)
    vb = grid.basis_vals                     # (Q, m)
    grad_abs = np.sqrt(np.einsum("qdm,qdm->qm", gb, gb))

    def scatter(local):
        out = np.zeros(grid.n_nodes)
        np.add.at(out, conn, local)
        return out

    r1 = scatter(np.einsum("eq,eqd,qdm->em", w, flux, gb))
    n1 = scatter(np.einsum("eq,eq,qm->em", w, flux_norm, grad_abs))

    pairing = np.einsum("eqd,eqd->eq", flux, g)  # <A, grad f>
    r2 = scatter(
        np.einsum("eq,eq,eqd,qdm->em", w, fq, flux, gb)
        + np.einsum("eq,eq,qm->em", w, pairing, vb)
    )
    n2 = scatter(
        np.einsum("eq,eq,eq,qm->em", w, np.abs(fq), flux_norm, grad_abs)
        + np.einsum("eq,eq,qm->em", w, np.abs(pairing), vb)
    )

    # admissible test nodes: strictly inside the slab, off Dirichlet sets
    admissible = np.zeros(grid.n_nodes, dtype=bool)
    ax_idx = np.arange(jt + 1, jtau)
    for j in ax_idx:
        admissible[mesh.station_node_ids(j)] = True
    mask, _ = dirichlet_data(mesh, field.bc)
    admissible &= ~mask
    ids = np.flatnonzero(admissible)
    if ids.size == 0:
        return WeakResidualReport(0.0, 0.0, 0)

    def normalized(r, n):
        out = np.zeros(ids.size)
        nz = n[ids] > 0
        out[nz] = np.abs(r[ids][nz]) / n[ids][nz]
        return float(out.max()) if out.size else 0.0

    return WeakResidualReport(
        plain_form=normalized(r1, n1),
        product_form=normalized(r2, n2),
        n_tests=int(ids.size),
    )


@dataclass(frozen=True)
class FluxResult:
    value: float
    tau: float
    side: str
    weight: str


def _section_trace(field, j, side):
    """One-sided values and gradients of the field on station j."""
    mesh = field.mesh
    elem_ids, pts, w, vals_tab, grads_tab = mesh.station_edge_tables(j, side)
    ue = field.values[mesh.grid.elem_nodes[elem_ids]]
    fvals = np.einsum("em,qm->eq", ue, vals_tab)
    fgrads = np.einsum("em,qdm->eqd", ue, grads_tab)
    return pts, w, fvals, fgrads


def flux_integral(field, tau, weight="one", side="auto", C=0.0):
    """Section flux integral of w(f) <A(x, grad f), grad p_k>.

    weight is 'one', 'f' or 'f_minus_C' (with the constant C); grad p_k
    is the unit axial direction, so the integrand reduces to the axial
    component of A(x, grad f).  The gradient is taken one-sided from the
    requested slab side ('below' or 'above' the section; 'auto' picks the
    side facing the axial midpoint) and the side used is recorded.
    """
    mesh = field.mesh
    j, _ = mesh.station_index(tau, snap_tol=mesh.snap_tolerance())
    if side == "auto":
        mid = 0.5 * (mesh.stations[0] + mesh.stations[-1])
        side = "above" if mesh.stations[j] <= mid else "below"
    pts, w, fvals, fgrads = _section_trace(field, j, side)
    a = field.op.a(mesh.domain.pk_of_axial(pts[..., -1]))
    s = np.sum(fgrads**2, axis=-1)
    fac = np.zeros_like(s)
    pos = s > 0
    fac[pos] = s[pos] ** (0.5 * (field.op.p - 2.0))
    axial_flux = a * fac * fgrads[..., -1]
    if weight == "one":
        wf = np.ones_like(fvals)
    elif weight == "f":
        wf = fvals
    elif weight == "f_minus_C":
        wf = fvals - C
    else:
        raise ValueError(f"unknown weight {weight!r}")
    value = float(np.sum(w * wf * axial_flux))
    return FluxResult(value=value, tau=float(mesh.stations[j]), side=side, weight=weight)


def section_values(field, tau):
    """Nodal trace of the field on the section nearest tau."""
    sec = field.mesh.cross_section(tau)
    return sec, field.values[sec.volume_node_ids]


def section_quad_trace(field, tau, side="auto"):
    """Section quadrature (points, weights, f, grad f) with one-sided gradients."""
    mesh = field.mesh
    j, _ = mesh.station_index(tau, snap_tol=mesh.snap_tolerance())
    if side == "auto":
        mid = 0.5 * (mesh.stations[0] + mesh.stations[-1])
        side = "above" if mesh.stations[j] <= mid else "below"
    return _section_trace(field, j, side)
