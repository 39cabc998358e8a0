"""End-to-end orchestration: runs, studies, references, artifacts.

The time-accuracy study needs errors against a reference marched on a
very fine time grid (the coarsest run step divided by 2^6 relative to
the fine step).  Storing that reference field whole would cost gigabytes,
so the reference march is consumed streamingly: per-slab integrals are
accumulated on an intermediate partition that refines every run
partition, together with the reference's squared space-time norm.  The
error of any run field a against the reference b then follows from

    ||a - b||^2 = sum_l (w_l a_l' M a_l - 2 a_l' M I_l) + ||b||^2,

with I_l the accumulated integral of b over intermediate slab l and a_l
the (constant) run value there.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from spacetimedd import __version__
from spacetimedd import interface_ops as io
from spacetimedd import mixedfem as mf
from spacetimedd import solvers as sv
from spacetimedd.scenarios import Scenario, config_hash
from spacetimedd.timegrid import TimePartition


@dataclass
class RunArtifacts:
    """Paths and summary numbers produced by one run or study."""

    out_dir: object
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _manifest(out_dir, files, cfg, seed, timings, extra=None):
    import pathlib

    out_dir = pathlib.Path(out_dir)
    data = {
        "config_hash": config_hash(cfg),
        "config": {k: str(v) for k, v in cfg.items()},
        "seed": seed,
        "versions": {
            "spacetimedd": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "timings_s": timings,
        "files": [str(f) for f in files],
    }
    if extra:
        data.update(extra)
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, default=str)
    return path


def solve_monodomain(scenario: Scenario, partition: TimePartition = None,
                     slab_callback=None, keep_field: bool = True):
    """Direct global space-time solve (the reference path)."""
    system, bcs, c0, f = scenario.monodomain(partition)
    part = partition if partition is not None else scenario.partitions[0]
    fld = mf.march(system, part, c0, bcs, f=f, slab_callback=slab_callback,
                   keep_history=keep_field)
    return fld, system


def probe_cell(scenario: Scenario):
    """Global cell id of the first clay cell above the repository center
    (used to track the paper-style breakthrough curve)."""
    mesh = scenario.mesh()
    x0, x1, y0, y1 = scenario.meta["repository_box"]
    xm = 0.5 * (x0 + x1)
    i = int(np.searchsorted(mesh.xs, xm) - 1)
    j = int(np.searchsorted(mesh.ys, y1 + 1e-9))  # first cell row above y1
    return mesh.cell_id(i, j)


def run(scenario: Scenario, out_dir, method: str = None, seed: int = None,
        tol: float = None, max_iter: int = None, cfg: dict = None,
        snapshots_at=None, render_figures: bool = True) -> RunArtifacts:
    """Execute one scenario end to end and write all artifacts."""
    import pathlib

    from spacetimedd import reporting

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    method = method or scenario.method
    seed = scenario.seed if seed is None else seed
    tol = scenario.tol if tol is None else tol
    max_iter = scenario.max_iter if max_iter is None else max_iter
    cfg = cfg or {"scenario": scenario.name, "method": method, "tol": tol,
                  "max_iter": max_iter, "seed": seed}
    timings = {}
    files = []
    t0 = time.time()

    if method == "monodomain":
        fld, system = solve_monodomain(scenario)
        timings["solve"] = time.time() - t0
        fields = [fld]
        report = None
        meshes = [system.mesh]
    else:
        ctx = scenario.context()
        if method == "method1":
            d = {s: c.diffusion for s, c in enumerate(scenario.coefficients)}
            weights = io.NNWeights.from_diffusion(list(ctx.decomp.interfaces), d)
            lam, report = sv.solve_method1(ctx, weights=weights, tol=tol,
                                           max_iter=max_iter, seed=seed)
            fields = sv.reconstruct(ctx, lam, "method1")
        elif method in ("method2-gmres", "method2-jacobi"):
            alphas = scenario.robin_params()
            if method == "method2-gmres":
                xi, report = sv.solve_method2_gmres(ctx, alphas, tol=tol,
                                                    max_iter=max_iter, seed=seed)
            else:
                xi, report = sv.jacobi_oswr(ctx, alphas, tol=tol,
                                            max_iter=max_iter, seed=seed)
            fields = sv.reconstruct_method2(ctx, xi, alphas)
        else:
            raise ValueError(f"unknown method {method!r}")
        timings["solve"] = time.time() - t0
        meshes = [sd.system.mesh for sd in ctx.subs]

    if report is not None:
        rp = out / "report.csv"
        report.export_csv(rp)
        files.append(rp)
        if render_figures:
            files.append(reporting.fig_convergence(report, out / "convergence.png"))

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    T = scenario.final_time
    times = snapshots_at if snapshots_at is not None else [0.25 * T, 0.5 * T, T]
    for t in times:
        path = snap_dir / f"c_t{t:.6g}.csv"
        reporting.write_snapshot(path, meshes, fields, t)
        files.append(path)
        if render_figures:
            files.append(
                reporting.fig_snapshot(meshes, fields, t, snap_dir / f"c_t{t:.6g}.png")
            )

    summary = {"method": method}
    if report is not None:
        summary.update(
            iterations=report.iterations,
            final_residual=float(report.residuals[-1]),
            converged=bool(report.converged),
        )
    if "repository_box" in scenario.meta:
        cell = probe_cell(scenario)
        series = probe_series(scenario, fields, cell, method)
        pp = out / "probe.csv"
        reporting.write_probe(pp, series)
        files.append(pp)
        summary["probe_cell"] = int(cell)
    files.append(_manifest(out, files, cfg, seed, timings,
                           extra={"summary": {k: str(v) for k, v in summary.items()}}))
    art = RunArtifacts(out, files, summary)
    art.fields = fields
    art.report = report
    return art


def probe_series(scenario: Scenario, fields, global_cell: int, method: str):
    """(t_end, concentration) history of one global cell from a run."""
    if method == "monodomain":
        fld = fields[0]
        return np.column_stack([fld.partition.boundaries[1:], fld.c[:, global_cell]])
    decomp = scenario.decomposition()
    s = int(decomp.labels[global_cell])
    from spacetimedd.geometry import subdomain_slice

    sl = subdomain_slice(decomp, s)
    local = int(np.where(sl.cell_map == global_cell)[0][0])
    fld = fields[s]
    return np.column_stack([fld.partition.boundaries[1:], fld.c[:, local]])


# ---- time-accuracy study ------------------------------------------------------


class _ReferenceAccumulator:
    """Streaming per-slab integrals of a reference march.

    Accumulates, on a coarse 'collect' partition that refines every run
    partition, the time integrals of c and r, plus the reference's
    squared L2(0,T; L2) norms.
    """

    def __init__(self, system: mf.SubdomainSystem, ref_partition: TimePartition,
                 collect: TimePartition):
        if ref_partition.n_slabs % collect.n_slabs != 0:
            raise ValueError("reference partition must refine the collect partition")
        self.system = system
        self.collect = collect
        self.stride = ref_partition.n_slabs // collect.n_slabs
        self.dt = float(ref_partition.widths[0])
        n_c, n_e = system.mesh.n_cells, system.mesh.n_edges
        self.Ic = np.zeros((collect.n_slabs, n_c))
        self.Ir = np.zeros((collect.n_slabs, n_e))
        self.norm_c2 = 0.0
        self.norm_r2 = 0.0

    def __call__(self, m, c_slab, r_slab):
        l = m // self.stride
        self.Ic[l] += self.dt * c_slab
        self.Ir[l] += self.dt * r_slab
        self.norm_c2 += self.dt * float(np.sum(self.system.areas * c_slab**2))
        self.norm_r2 += self.dt * float(r_slab @ (self.system.flux_mass_unit @ r_slab))


def _error_vs_accumulated(ctx: io.DDContext, fields, acc: _ReferenceAccumulator):
    """Relative L2(0,T; L2) errors of a multidomain run against the
    streamed reference integrals."""
    err_c2 = acc.norm_c2
    err_r2 = acc.norm_r2
    for sd, fld in zip(ctx.subs, fields):
        M_run = fld.partition.n_slabs
        if acc.collect.n_slabs % M_run != 0:
            raise ValueError("collect partition must refine the run partition")
        ratio = acc.collect.n_slabs // M_run
        areas = sd.system.areas
        Mr = sd.system.flux_mass_unit
        cmap, emap = sd.slice.cell_map, sd.slice.edge_map
        # group the reference integrals by run slab (collect refines run)
        Icg = acc.Ic[:, cmap].reshape(M_run, ratio, -1).sum(axis=1)
        Irg = acc.Ir[:, emap].reshape(M_run, ratio, -1).sum(axis=1)
        dtm = fld.partition.widths
        err_c2 += float(np.sum(dtm[:, None] * areas * fld.c**2))
        err_c2 -= 2.0 * float(np.sum(areas * fld.c * Icg))
        Ma = (Mr @ fld.r.T).T
        err_r2 += float(dtm @ np.einsum("me,me->m", fld.r, Ma))
        err_r2 -= 2.0 * float(np.sum(Irg * Ma))
    err_c2 = max(err_c2, 0.0)
    err_r2 = max(err_r2, 0.0)
    return (np.sqrt(err_c2 / acc.norm_c2), np.sqrt(err_r2 / acc.norm_r2))


_LAYOUTS = (
    ("fine-fine", "f", "f"),
    ("coarse-fine", "c", "f"),
    ("fine-coarse", "f", "c"),
    ("coarse-coarse", "c", "c"),
)


def time_grid_study(scenario: Scenario, dt_coarse: float, dt_fine: float,
                    n_refinements: int = 4, out_dir=None, tol: float = 1e-10,
                    max_iter: int = 200, ref_factor: int = 64,
                    render_figures: bool = True, cfg: dict = None) -> RunArtifacts:
    """Run the four time-grid layouts across dyadic refinements, measure
    errors against a fine monodomain reference, and fit log-log slopes.

    dt_coarse / dt_fine are the level-0 steps of the coarse and fine
    partitions (dt_coarse > dt_fine); each refinement halves both.  The
    reference uses dt_fine / ref_factor at the deepest level.
    """
    import pathlib

    from spacetimedd import reporting

    if dt_coarse <= dt_fine:
        raise ValueError("dt_coarse must exceed dt_fine")
    T = scenario.final_time
    Mc0 = int(round(T / dt_coarse))
    Mf0 = int(round(T / dt_fine))
    timings = {}

    # collect partition: refines every run partition at every level
    M_collect = int(np.lcm(Mc0, Mf0)) * 2 ** (n_refinements - 1)
    M_ref = M_collect * ref_factor // 2 ** (n_refinements - 1)
    while M_ref % M_collect != 0:
        M_ref *= 2
    collect = TimePartition.uniform(T, M_collect)
    ref_part = TimePartition.uniform(T, M_ref)

    system, _, _, _ = scenario.monodomain()
    acc = _ReferenceAccumulator(system, ref_part, collect)
    t0 = time.time()
    solve_monodomain(scenario, partition=ref_part, slab_callback=acc,
                     keep_field=False)
    timings["reference"] = time.time() - t0

    rows = []
    t0 = time.time()
    for level in range(n_refinements):
        Mc = Mc0 * 2**level
        Mf = Mf0 * 2**level
        parts = {"c": TimePartition.uniform(T, Mc), "f": TimePartition.uniform(T, Mf)}
        for layout, k1, k2 in _LAYOUTS:
            sc = scenario.with_partitions([parts[k1], parts[k2]])
            ctx = sc.context()
            alphas = sc.robin_params()
            xi, report = sv.solve_method2_gmres(ctx, alphas, tol=tol,
                                                max_iter=max_iter)
            fields = sv.reconstruct_method2(ctx, xi, alphas)
            err_c, err_r = _error_vs_accumulated(ctx, fields, acc)
            rows.append(
                dict(layout=layout, level=level,
                     dt1=T / parts[k1].n_slabs, dt2=T / parts[k2].n_slabs,
                     dt=T / max(Mc, Mf) / 2**0,
                     err_c=float(err_c), err_r=float(err_r),
                     iterations=report.iterations)
            )
    timings["runs"] = time.time() - t0

    slopes = {}
    for layout, _, _ in _LAYOUTS:
        sel = [r for r in rows if r["layout"] == layout]
        # errors are reported against dt = max(dt1, dt2)
        dts = np.array([max(r["dt1"], r["dt2"]) for r in sel])
        for key in ("err_c", "err_r"):
            errs = np.array([r[key] for r in sel])
            slopes[(layout, key)] = float(
                np.polyfit(np.log(dts), np.log(errs), 1)[0]
            )

    art = RunArtifacts(out_dir, summary={"slopes": {f"{l}/{k}": v
                                                    for (l, k), v in slopes.items()}})
    art.rows = rows
    art.slopes = slopes
    if out_dir is not None:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "errors_vs_dt.csv"
        reporting.write_errors_vs_dt(path, rows, slopes)
        art.files.append(path)
        if render_figures:
            art.files.append(reporting.fig_errors_vs_dt(rows, out / "errors_vs_dt.png"))
        cfg = cfg or {"scenario": scenario.name, "study": "time-order",
                      "dt_coarse": dt_coarse, "dt_fine": dt_fine,
                      "n_refinements": n_refinements}
        art.files.append(_manifest(out, art.files, cfg, scenario.seed, timings))
    return art


def landscape(scenario: Scenario, alpha_min: float, alpha_max: float, n: int = 15,
              n_iter: int = 20, seed: int = 0, out_dir=None,
              render_figures: bool = True, cfg: dict = None) -> RunArtifacts:
    """Residual landscape of the Jacobi iteration over a log-spaced
    (alpha12, alpha21) grid on the zero-data problem."""
    import pathlib

    from spacetimedd import reporting, robin_opt

    ctx = scenario.context(zero_data=True)
    grid = np.geomspace(alpha_min, alpha_max, n)
    t0 = time.time()
    res = robin_opt.landscape_scan(ctx, grid, grid, n_iter=n_iter, seed=seed)
    timings = {"scan": time.time() - t0}
    opt = scenario.robin_params()
    pair = sorted(scenario.decomposition().interfaces)[0]
    a_opt = (opt[pair], opt[(pair[1], pair[0])])

    art = RunArtifacts(out_dir, summary={
        "grid_min": float(res.min()),
        "optimized_point": a_opt,
    })
    art.grid = grid
    art.residuals = res
    if out_dir is not None:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "landscape.csv"
        reporting.write_landscape(path, grid, grid, res)
        art.files.append(path)
        if render_figures:
            art.files.append(
                reporting.fig_landscape(grid, grid, res, a_opt, out / "landscape.png")
            )
        cfg = cfg or {"scenario": scenario.name, "study": "robin-landscape",
                      "n": n, "n_iter": n_iter, "seed": seed}
        art.files.append(_manifest(out, art.files, cfg, seed, timings))
    return art
