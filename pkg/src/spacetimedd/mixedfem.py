"""Lowest-order Raviart-Thomas mixed discretization of time-dependent diffusion.

The continuous problem on a (sub)domain is

    omega * dc/dt + div r = f,      r = -d * grad(c),

discretized with one normal-flux unknown per edge and one concentration
unknown per cell, and piecewise-constant discontinuous Galerkin in time
(algebraically a modified backward Euler scheme: per slab of width dt,

    (W/dt) c + B r = (W/dt) c_prev + f-load
    -B^T c + A r   = boundary load,

where W is the porosity-weighted cell mass, A the flux mass for d^{-1},
and B the cell-by-edge divergence).

Boundary conditions per edge group: Dirichlet (prescribed concentration
trace), Neumann (prescribed outward normal flux, imposed strongly), or
Robin (-r.n + alpha*c = xi, which augments A with a 1/alpha boundary
mass).  The concentration trace on an edge is recovered as the hybrid
trace implied by the adjacent cell's own flux equation; it is exact for
Dirichlet data and satisfies the Robin relation identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from spacetimedd.geometry import RectMesh
from spacetimedd.timegrid import TimePartition, TraceFunction

_DT_KEY_DIGITS = 12


@dataclass(frozen=True)
class Coefficients:
    """Constant porosity and scalar isotropic diffusion (D = diffusion * I)."""

    porosity: float
    diffusion: float

    def __post_init__(self):
        if self.porosity <= 0.0 or self.diffusion <= 0.0:
            raise ValueError("porosity and diffusion must be positive")


def _per_cell(value, n_cells: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_cells, float(arr))
    if arr.shape != (n_cells,):
        raise ValueError("coefficient array must be scalar or per-cell")
    if np.any(arr <= 0.0):
        raise ValueError("coefficients must be positive")
    return arr


class SubdomainSystem:
    """Assembled mixed-form blocks for one rectangular mesh.

    omega and d may be scalars or per-cell arrays (so a monodomain mesh
    spanning several materials is assembled the same way).
    """

    def __init__(self, mesh: RectMesh, omega, d):
        self.mesh = mesh
        self.omega = _per_cell(omega, mesh.n_cells)
        self.d = _per_cell(d, mesh.n_cells)
        self.areas = mesh.cell_areas()
        self.lengths = mesh.edge_lengths()
        self.cell_edges = mesh.cell_edge_ids()  # (n_cells, 4): W,E,S,N
        self.W = self.omega * self.areas  # diagonal
        self.B = self._assemble_B()
        self.A = self._assemble_A(self.d)
        self.flux_mass_unit = self._assemble_A(np.ones(mesh.n_cells))

    def _assemble_B(self) -> sp.csr_matrix:
        mesh = self.mesh
        hx, hy = mesh.cell_widths()
        rows = np.repeat(np.arange(mesh.n_cells), 4)
        cols = self.cell_edges.ravel()
        vals = np.column_stack([-hy, hy, -hx, hx]).ravel()
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(mesh.n_cells, mesh.n_edges)
        )

    def _assemble_A(self, d: np.ndarray) -> sp.csr_matrix:
        """Flux mass for d^{-1}: per cell, each direction contributes
        (hx*hy/d) * [[1/3, 1/6], [1/6, 1/3]] on its (low, high) edge pair."""
        mesh = self.mesh
        scale = self.areas / d
        rows, cols, vals = [], [], []
        for lo, hi in ((0, 1), (2, 3)):  # (W,E) then (S,N)
            e_lo = self.cell_edges[:, lo]
            e_hi = self.cell_edges[:, hi]
            rows += [e_lo, e_hi, e_lo, e_hi]
            cols += [e_lo, e_hi, e_hi, e_lo]
            vals += [scale / 3.0, scale / 3.0, scale / 6.0, scale / 6.0]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(mesh.n_edges, mesh.n_edges),
        )

    def edge_cell_side(self, edges: np.ndarray, signs: np.ndarray):
        """For each edge, the adjacent cell on the side whose outward
        normal sign (vs the global +x/+y convention) is `signs[e]`, and
        the opposite edge of that cell in the same direction."""
        mesh = self.mesh
        edges = np.asarray(edges)
        signs = np.asarray(signs)
        cells = np.empty(edges.size, dtype=int)
        opp = np.empty(edges.size, dtype=int)
        nv = mesh.n_vedges
        for k, (e, s) in enumerate(zip(edges, signs)):
            if e < nv:
                i, j = e // mesh.ny, e % mesh.ny
                ci = i - 1 if s > 0 else i
                if not (0 <= ci < mesh.nx):
                    raise ValueError(f"edge {e}: no cell on requested side")
                cells[k] = mesh.cell_id(ci, j)
                opp[k] = mesh.v_edge(ci if s > 0 else ci + 1, j)
            else:
                e2 = e - nv
                j, i = e2 // mesh.nx, e2 % mesh.nx
                cj = j - 1 if s > 0 else j
                if not (0 <= cj < mesh.ny):
                    raise ValueError(f"edge {e}: no cell on requested side")
                cells[k] = mesh.cell_id(i, cj)
                opp[k] = mesh.h_edge(i, cj if s > 0 else cj + 1)
        return cells, opp


@dataclass
class BCGroup:
    """One boundary-condition group: a set of edges sharing a BC kind.

    values: None (zero data), an (n_slabs, n_edges) array, or a callable
    m -> per-edge array giving the piecewise-constant slab data.
    signs: outward-normal sign of each edge vs the global orientation.
    For Robin, `alpha` is the (positive) Robin parameter and values carry
    the incoming combination xi = -r.n + alpha*c.
    """

    kind: str  # 'dirichlet' | 'neumann' | 'robin'
    edges: np.ndarray
    signs: np.ndarray
    values: object = None
    alpha: object = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=int)
        self.signs = np.asarray(self.signs, dtype=float)
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise ValueError(f"unknown BC kind {self.kind!r}")
        if self.kind == "robin":
            a = np.asarray(self.alpha, dtype=float)
            if a.ndim == 0:
                a = np.full(self.edges.size, float(a))
            if np.any(a <= 0.0):
                raise ValueError("Robin alpha must be positive")
            self.alpha = a

    def slab_values(self, m: int) -> np.ndarray:
        if self.values is None:
            return np.zeros(self.edges.size)
        if callable(self.values):
            return np.asarray(self.values(m), dtype=float)
        return np.asarray(self.values)[m]


@dataclass
class SpaceTimeField:
    """Concentration and flux histories over a time partition."""

    partition: TimePartition
    c: np.ndarray  # (n_slabs, n_cells)
    r: np.ndarray  # (n_slabs, n_edges)
    mesh: RectMesh = None

    def export_csv(self, c_path=None, r_path=None) -> None:
        t_end = self.partition.boundaries[1:]
        if c_path is not None:
            centers = self.mesh.cell_centers()
            with open(c_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "cell_x", "cell_y", "c"])
                for m, t in enumerate(t_end):
                    for k in range(centers.shape[0]):
                        w.writerow([t, centers[k, 0], centers[k, 1], self.c[m, k]])
        if r_path is not None:
            with open(r_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "edge_id", "r"])
                for m, t in enumerate(t_end):
                    for e in range(self.r.shape[1]):
                        w.writerow([t, e, self.r[m, e]])

    def snapshot(self, time: float) -> tuple:
        """(slab_index, per-cell c) for the slab containing `time`."""
        b = self.partition.boundaries
        m = min(int(np.searchsorted(b[1:], time)), self.partition.n_slabs - 1)
        return m, self.c[m]


def _slab_operator(system: SubdomainSystem, bcs) -> sp.csc_matrix:
    """The dt-independent second block row [-B^T | A+Robin], with Neumann
    rows replaced by identity rows pinning the flux unknown."""
    n_c, n_e = system.mesh.n_cells, system.mesh.n_edges
    A2 = system.A.copy()
    robin_diag = np.zeros(n_e)
    pinned = np.zeros(n_e, dtype=bool)
    for g in bcs:
        if g.kind == "robin":
            robin_diag[g.edges] += system.lengths[g.edges] / g.alpha
        elif g.kind == "neumann":
            pinned[g.edges] = True
    if robin_diag.any():
        A2 = A2 + sp.diags(robin_diag)
    row2 = sp.hstack([-system.B.T, A2], format="csr")
    if pinned.any():
        mask = sp.diags((~pinned).astype(float))
        repl = sp.csr_matrix(
            (np.ones(pinned.sum()), (np.where(pinned)[0], n_c + np.where(pinned)[0])),
            shape=(n_e, n_c + n_e),
        )
        row2 = mask @ row2 + repl
    return row2


class _MarchOperator:
    """Factorization cache for one (system, BC structure) pair."""

    def __init__(self, system: SubdomainSystem, bcs):
        self.system = system
        self.bcs = bcs
        self.row2 = _slab_operator(system, bcs)
        self._factors = {}

    def matrix(self, dt: float) -> sp.csc_matrix:
        n_c, n_e = self.system.mesh.n_cells, self.system.mesh.n_edges
        row1 = sp.hstack([sp.diags(self.system.W / dt), self.system.B], format="csr")
        return sp.vstack([row1, self.row2], format="csc")

    def factor(self, dt: float):
        key = round(float(np.log(dt)), _DT_KEY_DIGITS)
        lu = self._factors.get(key)
        if lu is None:
            lu = splu(self.matrix(dt))
            self._factors[key] = lu
        return lu

    def rhs(self, c_prev, f_slab, dt, m):
        system = self.system
        n_c, n_e = system.mesh.n_cells, system.mesh.n_edges
        b = np.zeros(n_c + n_e)
        b[:n_c] = system.W * c_prev / dt
        if f_slab is not None:
            b[:n_c] += f_slab * system.areas
        for g in self.bcs:
            vals = g.slab_values(m)
            sl = g.signs * system.lengths[g.edges]
            if g.kind == "dirichlet":
                b[n_c + g.edges] += -vals * sl
            elif g.kind == "robin":
                b[n_c + g.edges] += -(vals / g.alpha) * sl
            else:  # neumann: pinned rows read r_e = sign * q
                b[n_c + g.edges] = g.signs * vals
        return b


MarchOperator = _MarchOperator


def step(system: SubdomainSystem, c_prev, f_slab, bcs, dt, m=0, _op=None):
    """Advance one slab; returns (c_new, r_new)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    op = _op if _op is not None else _MarchOperator(system, bcs)
    n_c = system.mesh.n_cells
    try:
        sol = op.factor(dt).solve(op.rhs(c_prev, f_slab, dt, m))
    except RuntimeError as exc:
        raise RuntimeError(f"singular slab system at slab {m}") from exc
    return sol[:n_c], sol[n_c:]


def march(
    system: SubdomainSystem,
    partition: TimePartition,
    c0,
    bcs,
    f=None,
    slab_callback=None,
    operator=None,
    keep_history: bool = True,
) -> SpaceTimeField:
    """Solve the space-time problem over all slabs of `partition`.

    c0: per-cell initial concentration (or None for zero).
    f: None, an (n_slabs, n_cells) array, or a callable m -> per-cell array
       of the slab-averaged source density.
    slab_callback(m, c_slab, r_slab): optional hook invoked per slab; with
    keep_history=False nothing is stored and None is returned, so very
    fine marches can be consumed streamingly at O(1) memory.
    operator: a MarchOperator to reuse across marches (its cached
    factorizations persist); when given, `bcs` is ignored.
    """
    n_c, n_e = system.mesh.n_cells, system.mesh.n_edges
    M = partition.n_slabs
    op = operator if operator is not None else _MarchOperator(system, bcs)
    if keep_history:
        c_hist = np.empty((M, n_c))
        r_hist = np.empty((M, n_e))
    c_prev = np.zeros(n_c) if c0 is None else np.asarray(c0, dtype=float)
    widths = partition.widths
    for m in range(M):
        if f is None:
            f_slab = None
        elif callable(f):
            f_slab = f(m)
        else:
            f_slab = f[m]
        c_prev, r_m = step(system, c_prev, f_slab, bcs, widths[m], m, _op=op)
        if keep_history:
            c_hist[m] = c_prev
            r_hist[m] = r_m
        if slab_callback is not None:
            slab_callback(m, c_prev, r_m)
    if not keep_history:
        return None
    return SpaceTimeField(partition, c_hist, r_hist, system.mesh)


def hybrid_trace(system: SubdomainSystem, field: SpaceTimeField, edges, signs) -> TraceFunction:
    """Concentration trace on the given edges, seen from the side whose
    outward sign is `signs`, recovered from that cell's flux equation:

        trace_e = c_K - (area_K / (d_K * s_e * len_e)) * (r_e/3 + r_opp/6).
    """
    edges = np.asarray(edges, dtype=int)
    signs = np.asarray(signs, dtype=float)
    cells, opp = system.edge_cell_side(edges, signs)
    coef = system.areas[cells] / (system.d[cells] * signs * system.lengths[edges])
    vals = field.c[:, cells] - coef * (field.r[:, edges] / 3.0 + field.r[:, opp] / 6.0)
    return TraceFunction(field.partition, edges, vals)


def extract_normal_flux(field: SpaceTimeField, edges, signs) -> TraceFunction:
    """Outward normal flux r.n on the given edges for the side with
    outward sign `signs`."""
    edges = np.asarray(edges, dtype=int)
    signs = np.asarray(signs, dtype=float)
    return TraceFunction(field.partition, edges, signs * field.r[:, edges])


def cell_average(mesh: RectMesh, fn) -> np.ndarray:
    """Midpoint-rule cell values of a callable fn(x, y)."""
    centers = mesh.cell_centers()
    return np.asarray(fn(centers[:, 0], centers[:, 1]), dtype=float)


def weighted_l2_norm(system: SubdomainSystem, c_slab: np.ndarray) -> float:
    """Porosity-weighted spatial L2 norm of a per-cell concentration."""
    return float(np.sqrt(np.sum(system.W * c_slab**2)))


def flux_l2_norm_sq(system: SubdomainSystem, r_slab: np.ndarray) -> float:
    """Squared spatial L2 norm of an RT0 flux (unit-diffusion mass)."""
    return float(r_slab @ (system.flux_mass_unit @ r_slab))
