"""Krylov and fixed-point drivers over interface vectors, plus error norms.

The GMRES here is full-memory (no restart) with modified Gram-Schmidt
orthogonalization and Givens-rotation residual updates; interface
problems at desk scale are small enough that restarting would only slow
convergence.  Left preconditioning is supported; the reported residual
is the preconditioned one.  The Jacobi driver implements the waveform
relaxation fixed point xi <- chi_R + (I - S_R) xi, one subdomain solve
per subdomain per iteration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from spacetimedd import interface_ops as io
from spacetimedd import mixedfem as mf
from spacetimedd.timegrid import TimePartition


@dataclass
class SolveReport:
    """Iteration history of an interface solve.

    residuals has length iterations + 1 (entry 0 is the initial guess);
    subdomain_solves is the cumulative solver-call count at each entry.
    err_c / err_r are optional per-iteration error norms against a
    reference (L2-in-time L2-in-space unless stated otherwise by the
    caller's probe).
    """

    iterations: int
    residuals: np.ndarray
    subdomain_solves: np.ndarray
    err_c: np.ndarray = None
    err_r: np.ndarray = None
    converged: bool = True
    seed: int = None

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "subdomain_solves", "rel_residual", "err_c", "err_r"])
            for k in range(len(self.residuals)):
                ec = "" if self.err_c is None else self.err_c[k]
                er = "" if self.err_r is None else self.err_r[k]
                w.writerow([k, int(self.subdomain_solves[k]), self.residuals[k], ec, er])


def gmres(apply, rhs, x0=None, tol=1e-10, max_iter=200, precond=None, callback=None):
    """Solve apply(x) = rhs by full-memory GMRES on flat arrays.

    apply/precond: callables ndarray -> ndarray (precond approximates the
    inverse; applied on the left).  callback(k, x_k), if given, receives
    the reconstructed iterate each step.  Returns (x, residual_history).
    A near-zero new Krylov basis norm is treated as happy breakdown
    (exact convergence in the current subspace).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = rhs.size
    M = (lambda v: v) if precond is None else precond
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)

    r0 = M(rhs - apply(x0))
    beta = np.linalg.norm(r0)
    norm_b = np.linalg.norm(M(rhs))
    ref = norm_b if norm_b > 0.0 else (beta if beta > 0.0 else 1.0)
    history = [beta / ref]
    if beta / ref <= tol:
        return x0, np.array(history)

    V = [r0 / beta]
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta

    def iterate(k):
        # after the Givens sweep, H[:k+1,:k+1] is upper triangular and
        # g[:k+1] is the rotated right-hand side
        y = np.linalg.solve(np.triu(H[: k + 1, : k + 1]), g[: k + 1])
        return x0 + np.column_stack(V[: k + 1]) @ y

    k_final = 0
    for k in range(max_iter):
        w = M(apply(V[k]))
        for i in range(k + 1):  # modified Gram-Schmidt
            H[i, k] = V[i] @ w
            w = w - H[i, k] * V[i]
        H[k + 1, k] = np.linalg.norm(w)
        happy = H[k + 1, k] <= 1e-14 * max(beta, 1.0)
        if not happy:
            V.append(w / H[k + 1, k])
        # apply accumulated Givens rotations to the new column
        for i in range(k):
            t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        if denom == 0.0:
            raise RuntimeError(f"Arnoldi degeneracy at iteration {k}")
        cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        history.append(abs(g[k + 1]) / ref)
        k_final = k
        if callback is not None:
            callback(k + 1, iterate(k))
        if history[-1] <= tol or happy:
            break

    x = iterate(k_final)
    return x, np.array(history)


def solve_method1(
    ctx: io.DDContext,
    weights: io.NNWeights = None,
    tol: float = 1e-11,
    max_iter: int = 200,
    x0=None,
    error_probe=None,
    seed: int = None,
):
    """Substructuring solve S(lambda) = chi, GMRES with optional weighted
    Neumann-Neumann preconditioning.  Returns (lambda, SolveReport).

    error_probe(lambda_vec) -> (err_c, err_r), if given, is evaluated at
    every iterate; its subdomain solves are excluded from the counter.
    x0: None, a flat array, or an InterfaceVector.
    """
    template = ctx.lambda_template()
    chi = io.compute_chi(ctx).flatten()
    base_solves = ctx.solve_count
    per_iter = []  # (solves, err_c, err_r) snapshots

    def apply(flat):
        return io.apply_S(ctx, template.with_flat(flat)).flatten()

    precond = None
    if weights is not None:
        def precond(flat):
            return io.apply_NN_preconditioner(
                ctx, template.with_flat(flat), weights
            ).flatten()

    probes = []

    def callback(k, xk):
        before = ctx.solve_count
        if error_probe is not None:
            probes.append(error_probe(template.with_flat(xk)))
        probe_cost[0] += ctx.solve_count - before

    probe_cost = [0]
    if isinstance(x0, io.InterfaceVector):
        x0 = x0.flatten()
    if error_probe is not None:
        before = ctx.solve_count
        x0_vec = template.with_flat(x0 if x0 is not None else np.zeros(template.size))
        probes.append(error_probe(x0_vec))
        probe_cost[0] += ctx.solve_count - before

    x, history = gmres(apply, chi, x0=x0, tol=tol, max_iter=max_iter,
                       precond=precond, callback=callback)
    iters = len(history) - 1
    per_side = 2 if weights is not None else 1
    solves = np.arange(iters + 1) * per_side * ctx.decomp.n_subdomains
    err_c = err_r = None
    if probes:
        probes = probes[: iters + 1]
        err_c = np.array([p[0] for p in probes])
        err_r = np.array([p[1] for p in probes])
    report = SolveReport(iters, history, solves, err_c, err_r,
                         converged=history[-1] <= tol, seed=seed)
    return template.with_flat(x), report


def solve_method2_gmres(
    ctx: io.DDContext,
    alphas,
    tol: float = 1e-6,
    max_iter: int = 200,
    x0=None,
    error_probe=None,
    seed: int = None,
):
    """Waveform-relaxation interface problem S_R(xi) = chi_R by GMRES."""
    template = ctx.xi_template()
    chiR = io.compute_chiR(ctx, alphas).flatten()

    def apply(flat):
        return io.apply_SR(ctx, template.with_flat(flat), alphas).flatten()

    probes = []

    def callback(k, xk):
        if error_probe is not None:
            probes.append(error_probe(template.with_flat(xk)))

    if isinstance(x0, io.InterfaceVector):
        x0 = x0.flatten()
    if error_probe is not None:
        x0_vec = template.with_flat(x0 if x0 is not None else np.zeros(template.size))
        probes.append(error_probe(x0_vec))
    x, history = gmres(apply, chiR, x0=x0, tol=tol, max_iter=max_iter,
                       callback=callback if error_probe else None)
    iters = len(history) - 1
    solves = np.arange(iters + 1) * ctx.decomp.n_subdomains
    err_c = err_r = None
    if probes:
        probes = probes[: iters + 1]
        err_c = np.array([p[0] for p in probes])
        err_r = np.array([p[1] for p in probes])
    report = SolveReport(iters, history, solves, err_c, err_r,
                         converged=history[-1] <= tol, seed=seed)
    return template.with_flat(x), report


def jacobi_oswr(
    ctx: io.DDContext,
    alphas,
    x0=None,
    tol: float = 1e-6,
    max_iter: int = 200,
    error_probe=None,
    seed: int = None,
    divergence_factor: float = 1e6,
):
    """Jacobi waveform relaxation: xi^k = chi_R + (I - S_R) xi^{k-1},
    realized as one real-data Robin solve per subdomain per iteration.

    The residual is ||xi^k - xi^{k-1}|| relative to the first update.
    Aborts if the residual grows by divergence_factor over the initial
    one.  Returns (xi, SolveReport).
    """
    template = ctx.xi_template()
    xi = template.copy() if x0 is None else (
        x0.copy() if isinstance(x0, io.InterfaceVector) else template.with_flat(x0)
    )
    history = [1.0]
    errs = []
    if error_probe is not None:
        errs.append(error_probe(xi))
    res0 = None
    converged = False
    for k in range(1, max_iter + 1):
        xi_new = io.oswr_sweep(ctx, xi, alphas)
        res = float(np.linalg.norm(xi_new.flatten() - xi.flatten()))
        xi = xi_new
        if res0 is None:
            if res == 0.0:  # x0 was already the fixed point
                history = [0.0]
                errs = errs[:1]
                converged = True
                break
            res0 = res
        history.append(res / res0)
        if error_probe is not None:
            errs.append(error_probe(xi))
        if res / res0 > divergence_factor:
            raise RuntimeError(
                f"Jacobi waveform relaxation diverging at iteration {k}"
            )
        if res <= tol * res0:
            converged = True
            break
    iters = len(history) - 1
    history = np.asarray(history)
    solves = np.arange(len(history)) * ctx.decomp.n_subdomains
    err_c = err_r = None
    if errs:
        err_c = np.array([e[0] for e in errs])
        err_r = np.array([e[1] for e in errs])
    report = SolveReport(iters, history, solves, err_c, err_r,
                         converged=converged, seed=seed)
    return xi, report


def reconstruct(ctx: io.DDContext, x: io.InterfaceVector, method: str):
    """Final per-subdomain fields from a converged interface vector.

    method 'method1': Dirichlet solves with the projected trace;
    'method2': Robin solves (alphas must be attached via
    reconstruct_method2).  One real-data solve per subdomain.
    """
    if method != "method1":
        raise ValueError("use reconstruct_method2 for Robin reconstruction")
    from spacetimedd.timegrid import TraceFunction, project

    fields = []
    for sd in ctx.subs:
        itf_values = {}
        for pair in sd.itf_edges:
            src = TraceFunction(x.partitions[pair], x.edges[pair], x.blocks[pair])
            itf_values[pair] = project(src, sd.partition).values
        fields.append(ctx.solve(sd.index, "dirichlet", itf_values, use_data=True))
    return fields


def reconstruct_method2(ctx: io.DDContext, xi: io.InterfaceVector, alphas):
    """Final per-subdomain fields from the converged Robin data."""
    fields = []
    for sd in ctx.subs:
        j = sd.index
        incoming = {pair: xi.blocks[io._directed(j, pair)] for pair in sd.itf_edges}
        own = {pair: alphas[io._directed(j, pair)] for pair in sd.itf_edges}
        fields.append(
            ctx.solve(j, "robin", incoming, use_data=True, alphas=own)
        )
    return fields


# ---- error norms ------------------------------------------------------------


def _overlaps(pa: TimePartition, pb: TimePartition):
    from spacetimedd.timegrid import _overlap_weights

    # returns (slab_a, slab_b, width) triples covering (0, T)
    ib, ia, w = _overlap_weights(pa, pb)
    return ia, ib, w


def field_error(field_a: mf.SpaceTimeField, field_b: mf.SpaceTimeField,
                system: mf.SubdomainSystem):
    """Squared L2(0,T; L2) differences (c and r) of two fields on the
    same mesh, with possibly different time partitions.  Exact for the
    piecewise-constant-in-time fields produced here."""
    ib, ia, w = _overlaps(field_b.partition, field_a.partition)
    err_c2 = err_r2 = 0.0
    Mr = system.flux_mass_unit
    for sa, sb, wk in zip(ia, ib, w):
        dc = field_a.c[sa] - field_b.c[sb]
        dr = field_a.r[sa] - field_b.r[sb]
        err_c2 += wk * float(np.sum(system.areas * dc * dc))
        err_r2 += wk * float(dr @ (Mr @ dr))
    return err_c2, err_r2


def field_norms_sq(field: mf.SpaceTimeField, system: mf.SubdomainSystem):
    """Squared L2(0,T; L2) norms of c and r."""
    widths = field.partition.widths
    c2 = float(widths @ np.sum(system.areas * field.c**2, axis=1))
    Mr = system.flux_mass_unit
    r2 = float(widths @ np.einsum("me,me->m", field.r, (Mr @ field.r.T).T))
    return c2, r2


def multidomain_error(ctx: io.DDContext, fields, ref_field: mf.SpaceTimeField,
                      ref_system: mf.SubdomainSystem, relative: bool = True):
    """Relative L2(0,T; L2) errors of per-subdomain fields vs a
    monodomain reference on the parent mesh."""
    err_c2 = err_r2 = 0.0
    for sd, fld in zip(ctx.subs, fields):
        ref_local = mf.SpaceTimeField(
            ref_field.partition,
            ref_field.c[:, sd.slice.cell_map],
            ref_field.r[:, sd.slice.edge_map],
            sd.system.mesh,
        )
        ec, er = field_error(fld, ref_local, sd.system)
        err_c2 += ec
        err_r2 += er
    if not relative:
        return np.sqrt(err_c2), np.sqrt(err_r2)
    nc2, nr2 = field_norms_sq(ref_field, ref_system)
    return np.sqrt(err_c2 / nc2), np.sqrt(err_r2 / nr2)


def multidomain_norms(ctx: io.DDContext, fields):
    """(L-infinity-in-time L2 norm of c, L2(L2) norm of r) of a
    multidomain field; used as the error when the exact solution is 0."""
    # per-slab L2(Omega) norms need a common time axis: use merged slabs
    c_linf = 0.0
    r2 = 0.0
    for sd, fld in zip(ctx.subs, fields):
        cn = np.sqrt(np.sum(sd.system.areas * fld.c**2, axis=1))
        c_linf = max(c_linf, float(cn.max()))
        _, rr = field_norms_sq(fld, sd.system)
        r2 += rr
    return c_linf, np.sqrt(r2)


def random_interface_vector(template: io.InterfaceVector, seed: int):
    """Uniform [-1, 1] entries per DOF from a seeded generator."""
    rng = np.random.default_rng(seed)
    return template.with_flat(rng.uniform(-1.0, 1.0, template.size))
