"""Matrix-free space-time interface operators for the two DD methods.

Method 1 (substructuring): the interface unknown is the concentration
trace lambda on each interface, living on a designated time partition.
The Steklov-Poincare action is

    S(lambda) = -sum_i Proj(F_i D_i(lambda, 0, 0)),

where D_i is the subdomain Dirichlet solve and F_i the outward normal
flux trace; the right-hand side is chi = +sum_i Proj(F_i D_i(0, f, c0)).
The weighted Neumann-Neumann preconditioner applies, per side, a Neumann
subdomain solve (flux imposed strongly) and returns the sigma-weighted
sum of the recovered concentration traces.

Method 2 (Schwarz waveform relaxation): the unknown is the stack of
directed Robin data xi[i, j] (the combination -r.n_i + alpha[i,j]*c fed
to subdomain i on its interface with j), each living on subdomain i's
own partition.  The fixed-point map replaces xi[i, j] by the projected
outgoing Robin combination of neighbor j's solve; S_R is the
corresponding affine-free part, chi_R the data part.

All cross-partition transfers use the L2 projection of timegrid; all
subdomain solves reuse cached per-time-step factorizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spacetimedd import mixedfem as mf
from spacetimedd.geometry import Decomposition, subdomain_slice
from spacetimedd.timegrid import TimePartition, TraceFunction, project

_SIDES = ("left", "right", "bottom", "top")


@dataclass
class InterfaceVector:
    """Interface unknown: one (n_slabs, n_edges) block per key.

    Method 1 keys are undirected interface pairs (a, b); Method 2 keys
    are directed pairs (i, j).  Flattening concatenates blocks in sorted
    key order, each raveled row-major.
    """

    partitions: dict  # key -> TimePartition
    edges: dict  # key -> global edge ids
    blocks: dict = None

    def __post_init__(self):
        if self.blocks is None:
            self.blocks = {
                k: np.zeros((p.n_slabs, self.edges[k].size))
                for k, p in self.partitions.items()
            }

    @property
    def keys(self):
        return sorted(self.partitions.keys())

    @property
    def size(self) -> int:
        return sum(b.size for b in self.blocks.values())

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.blocks[k].ravel() for k in self.keys])

    def with_flat(self, flat: np.ndarray) -> "InterfaceVector":
        blocks = {}
        pos = 0
        for k in self.keys:
            shape = self.blocks[k].shape
            n = shape[0] * shape[1]
            blocks[k] = flat[pos : pos + n].reshape(shape).copy()
            pos += n
        if pos != flat.size:
            raise ValueError("flat vector length mismatch")
        return InterfaceVector(self.partitions, self.edges, blocks)

    def copy(self) -> "InterfaceVector":
        return InterfaceVector(
            self.partitions, self.edges, {k: v.copy() for k, v in self.blocks.items()}
        )

    def zeros_like(self) -> "InterfaceVector":
        return InterfaceVector(self.partitions, self.edges)


@dataclass(frozen=True)
class NNWeights:
    """Per-interface averaging weights with sigma_i + sigma_j = 1."""

    weights: dict  # pair (a, b) -> (sigma_a, sigma_b)

    def __post_init__(self):
        for pair, (sa, sb) in self.weights.items():
            if not np.isclose(sa + sb, 1.0):
                raise ValueError(f"weights on {pair} must sum to 1")

    def side(self, pair, s: int) -> float:
        sa, sb = self.weights[pair]
        return sa if s == pair[0] else sb

    @classmethod
    def from_diffusion(cls, pairs, d: dict) -> "NNWeights":
        """Diffusion-squared weights, normalized per interface pair."""
        w = {}
        for a, b in pairs:
            tot = d[a] ** 2 + d[b] ** 2
            w[(a, b)] = (d[a] ** 2 / tot, d[b] ** 2 / tot)
        return cls(w)


@dataclass
class _Subdomain:
    index: int
    slice: object
    system: mf.SubdomainSystem
    partition: TimePartition
    outer_bcs: list  # BCGroups in local edge ids, with the real data
    c0: np.ndarray  # local per-cell initial concentration (real data)
    f: object  # None | array | callable m -> local per-cell source
    itf_edges: dict  # pair -> local edge ids
    itf_signs: dict  # pair -> outward signs from this subdomain
    itf_global: dict  # pair -> global edge ids (interface ordering)


class DDContext:
    """Per-subdomain systems, partitions, and cached solve operators.

    boundary_spec maps each outer domain side to (kind, value) where
    value is None (homogeneous), or a callable g(x, y, t_end) evaluated
    at edge midpoints per slab.  c0_fn(x, y) gives the initial
    concentration; f_fn(x, y, t0, t1) the slab-averaged source density.
    """

    def __init__(
        self,
        decomp: Decomposition,
        coefficients,  # list of mixedfem.Coefficients, one per subdomain
        partitions,  # list of TimePartition, one per subdomain
        boundary_spec,  # side -> (kind, value)
        c0_fn=None,
        f_fn=None,
        lambda_partitions=None,
    ):
        self.decomp = decomp
        self.coefficients = list(coefficients)
        self.solve_count = 0
        self.subs = []
        mesh = decomp.mesh
        for s in range(decomp.n_subdomains):
            sl = subdomain_slice(decomp, s)
            lm = sl.local_mesh
            co = self.coefficients[s]
            system = mf.SubdomainSystem(lm, co.porosity, co.diffusion)
            part = partitions[s]

            g2l = {int(g): l for l, g in enumerate(sl.edge_map)}
            itf_edges, itf_signs, itf_global = {}, {}, {}
            itf_all = set()
            for pair, itf in decomp.interfaces_of(s).items():
                loc = np.array([g2l[int(e)] for e in itf.edges])
                itf_edges[pair] = loc
                itf_signs[pair] = itf.sign(s).astype(float)
                itf_global[pair] = itf.edges
                itf_all.update(loc.tolist())

            outer = []
            for side in _SIDES:
                loc = lm.boundary_edges(side)
                loc = np.array([e for e in loc if e not in itf_all], dtype=int)
                # keep only edges on the global domain boundary
                on_global = [
                    e
                    for e in loc
                    if self._on_outer_boundary(mesh, sl.edge_map[e], side)
                ]
                if not on_global:
                    continue
                loc = np.array(on_global, dtype=int)
                kind, value = boundary_spec[side]
                sign = float(lm.outward_sign(side))
                values = None
                if value is not None:
                    mids = lm.edge_midpoints()[loc]
                    t_end = part.boundaries[1:]
                    if callable(value):
                        values = np.array(
                            [value(mids[:, 0], mids[:, 1], t) for t in t_end]
                        )
                    else:
                        values = np.full((part.n_slabs, loc.size), float(value))
                outer.append(
                    mf.BCGroup(kind, loc, np.full(loc.size, sign), values=values)
                )

            centers = lm.cell_centers()
            c0 = None
            if c0_fn is not None:
                c0 = np.asarray(c0_fn(centers[:, 0], centers[:, 1]), dtype=float)
            f = None
            if f_fn is not None:
                b = part.boundaries

                def f_local(m, _c=centers, _b=b):
                    return f_fn(_c[:, 0], _c[:, 1], _b[m], _b[m + 1])

                f = f_local
            self.subs.append(
                _Subdomain(s, sl, system, part, outer, c0, f, itf_edges, itf_signs, itf_global)
            )

        if lambda_partitions is None:
            lambda_partitions = {}
            for pair in decomp.interfaces:
                a, b = pair
                da = self.coefficients[a].diffusion
                db = self.coefficients[b].diffusion
                side = a if da > db else b
                lambda_partitions[pair] = partitions[side]
        self.lambda_partitions = dict(lambda_partitions)
        self._op_cache = {}

    @staticmethod
    def _on_outer_boundary(mesh, global_edge: int, side: str) -> bool:
        nv = mesh.n_vedges
        if global_edge < nv:
            i = global_edge // mesh.ny
            return i == 0 if side == "left" else i == mesh.nx
        e2 = global_edge - nv
        j = e2 // mesh.nx
        return j == 0 if side == "bottom" else j == mesh.ny

    # ---- interface vector templates -------------------------------------

    def lambda_template(self) -> InterfaceVector:
        """Method 1 unknown: one block per interface pair."""
        edges = {p: self.decomp.interfaces[p].edges for p in self.decomp.interfaces}
        return InterfaceVector(dict(self.lambda_partitions), edges)

    def xi_template(self) -> InterfaceVector:
        """Method 2 unknown: one block per directed pair (i, j), on T_i."""
        parts, edges = {}, {}
        for (a, b), itf in self.decomp.interfaces.items():
            parts[(a, b)] = self.subs[a].partition
            parts[(b, a)] = self.subs[b].partition
            edges[(a, b)] = itf.edges
            edges[(b, a)] = itf.edges
        return InterfaceVector(parts, edges)

    # ---- subdomain solves ------------------------------------------------

    def _operator(self, s: int, kind: str, alphas=None):
        """Cached march operator for subdomain s with all its interfaces
        carrying BC `kind`; alphas is a dict pair -> alpha for Robin."""
        akey = None
        if kind == "robin":
            akey = tuple(sorted((p, float(alphas[p])) for p in self.subs[s].itf_edges))
        key = (s, kind, akey)
        entry = self._op_cache.get(key)
        if entry is None:
            sd = self.subs[s]
            itf_groups = {}
            for pair, loc in sd.itf_edges.items():
                alpha = alphas[pair] if kind == "robin" else None
                itf_groups[pair] = mf.BCGroup(
                    kind, loc, sd.itf_signs[pair], values=None, alpha=alpha
                )
            bcs = sd.outer_bcs + list(itf_groups.values())
            op = mf.MarchOperator(sd.system, bcs)
            entry = (op, itf_groups)
            self._op_cache[key] = entry
        return entry

    def solve(self, s: int, kind: str, itf_values=None, use_data=False, alphas=None):
        """One subdomain space-time solve.

        itf_values: dict pair -> (n_slabs, n_edges) interface data on the
        subdomain's own partition (interpreted per `kind`: concentration
        trace, outward normal flux, or incoming Robin combination).
        use_data selects the real (c0, f) versus zero data.
        """
        sd = self.subs[s]
        op, itf_groups = self._operator(s, kind, alphas)
        for pair, g in itf_groups.items():
            g.values = None if itf_values is None else itf_values.get(pair)
        c0 = sd.c0 if use_data else None
        f = sd.f if use_data else None
        if not use_data:
            saved = [(g, g.values) for g in sd.outer_bcs]
            for g in sd.outer_bcs:
                g.values = None
        try:
            fld = mf.march(sd.system, sd.partition, c0, None, f=f, operator=op)
        finally:
            if not use_data:
                for g, v in saved:
                    g.values = v
        self.solve_count += 1
        return fld

    def trace(self, s: int, fld, pair) -> TraceFunction:
        """Hybrid concentration trace on the pair's interface, from side s."""
        sd = self.subs[s]
        return mf.hybrid_trace(sd.system, fld, sd.itf_edges[pair], sd.itf_signs[pair])

    def flux(self, s: int, fld, pair) -> TraceFunction:
        """Outward normal flux r.n_s on the pair's interface."""
        sd = self.subs[s]
        return mf.extract_normal_flux(fld, sd.itf_edges[pair], sd.itf_signs[pair])


# ---- Method 1: substructuring operator --------------------------------------


def _dirichlet_sweep(ctx: DDContext, lam: InterfaceVector | None, use_data: bool):
    """One Dirichlet solve per subdomain; returns projected flux sums."""
    out = ctx.lambda_template()
    for sd in ctx.subs:
        itf_values = None
        if lam is not None:
            itf_values = {}
            for pair in sd.itf_edges:
                src = TraceFunction(
                    lam.partitions[pair], lam.edges[pair], lam.blocks[pair]
                )
                itf_values[pair] = project(src, sd.partition).values
        fld = ctx.solve(sd.index, "dirichlet", itf_values, use_data=use_data)
        for pair in sd.itf_edges:
            fl = ctx.flux(sd.index, fld, pair)
            out.blocks[pair] += project(fl, out.partitions[pair]).values
    return out


def apply_S(ctx: DDContext, lam: InterfaceVector) -> InterfaceVector:
    """Steklov-Poincare action: minus the summed, projected normal fluxes
    of the zero-data Dirichlet solves with trace lam."""
    out = _dirichlet_sweep(ctx, lam, use_data=False)
    for k in out.blocks:
        out.blocks[k] = -out.blocks[k]
    return out


def compute_chi(ctx: DDContext) -> InterfaceVector:
    """Right-hand side of S(lambda) = chi: summed fluxes of the zero-trace
    solves with the real (c0, f)."""
    return _dirichlet_sweep(ctx, None, use_data=True)


def apply_NN_preconditioner(
    ctx: DDContext, residual: InterfaceVector, weights: NNWeights
) -> InterfaceVector:
    """Weighted Neumann-Neumann action: per side, impose the residual as
    interface Neumann data (r.n_i = -w), read the concentration trace,
    and return the sigma-weighted projected sum."""
    out = residual.zeros_like()
    for sd in ctx.subs:
        if not sd.itf_edges:
            continue
        itf_values = {}
        for pair in sd.itf_edges:
            src = TraceFunction(
                residual.partitions[pair], residual.edges[pair], residual.blocks[pair]
            )
            itf_values[pair] = -project(src, sd.partition).values
        fld = ctx.solve(sd.index, "neumann", itf_values, use_data=False)
        for pair in sd.itf_edges:
            tr = ctx.trace(sd.index, fld, pair)
            sigma = weights.side(pair, sd.index)
            out.blocks[pair] += sigma * project(tr, out.partitions[pair]).values
    return out


# ---- Method 2: Robin-to-Robin operator ---------------------------------------


def _robin_sweep(ctx: DDContext, xi: InterfaceVector | None, alphas, use_data: bool):
    """One Robin solve per subdomain; returns the directed outgoing Robin
    data: block (i, j) = projection onto T_i of (r_j.n_j + alpha[i,j]*c_j)."""
    out = ctx.xi_template()
    for sd in ctx.subs:
        j = sd.index
        if not sd.itf_edges:
            continue
        incoming = None
        if xi is not None:
            incoming = {pair: xi.blocks[_directed(j, pair)] for pair in sd.itf_edges}
        own_alphas = {pair: alphas[_directed(j, pair)] for pair in sd.itf_edges}
        fld = ctx.solve(j, "robin", incoming, use_data=use_data, alphas=own_alphas)
        for pair in sd.itf_edges:
            i = pair[0] if pair[1] == j else pair[1]
            tr = ctx.trace(j, fld, pair)
            fl = ctx.flux(j, fld, pair)
            outgoing = TraceFunction(
                sd.partition,
                sd.itf_global[pair],
                fl.values + alphas[(i, j)] * tr.values,
            )
            out.blocks[(i, j)] = project(outgoing, ctx.subs[i].partition).values
    return out


def _directed(i: int, pair) -> tuple:
    """Directed key (i, j) for subdomain i on the undirected pair."""
    a, b = pair
    return (i, b if i == a else a)


def apply_SR(ctx: DDContext, xi: InterfaceVector, alphas) -> InterfaceVector:
    """Robin-to-Robin action: xi minus the neighbors' outgoing Robin data
    (zero c0 and f)."""
    sweep = _robin_sweep(ctx, xi, alphas, use_data=False)
    out = xi.copy()
    for k in out.blocks:
        out.blocks[k] -= sweep.blocks[k]
    return out


def compute_chiR(ctx: DDContext, alphas) -> InterfaceVector:
    """Right-hand side of S_R(xi) = chi_R: outgoing Robin data of the
    zero-xi solves with the real (c0, f)."""
    return _robin_sweep(ctx, None, alphas, use_data=True)


def oswr_sweep(ctx: DDContext, xi: InterfaceVector, alphas) -> InterfaceVector:
    """One Jacobi waveform-relaxation update: every directed trace becomes
    the neighbor's outgoing Robin datum from a single real-data solve."""
    return _robin_sweep(ctx, xi, alphas, use_data=True)
