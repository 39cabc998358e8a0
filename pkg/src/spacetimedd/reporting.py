"""Delimited output writers and the figures rendered alongside them."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def write_snapshot(path, meshes, fields, t: float):
    """One CSV row per cell: the concentration at the slab containing t."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cell_x", "cell_y", "c"])
        for mesh, fld in zip(meshes, fields):
            m, c = fld.snapshot(t)
            centers = mesh.cell_centers()
            t_slab = fld.partition.boundaries[m + 1]
            for k in range(centers.shape[0]):
                w.writerow([t_slab, centers[k, 0], centers[k, 1], c[k]])
    return path


def write_probe(path, series):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "c"])
        for t, c in series:
            w.writerow([t, c])
    return path


def write_errors_vs_dt(path, rows, slopes):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layout", "level", "dt1", "dt2", "err_c", "err_r",
                    "iterations", "slope_c", "slope_r"])
        for r in rows:
            w.writerow([r["layout"], r["level"], r["dt1"], r["dt2"],
                        r["err_c"], r["err_r"], r["iterations"],
                        slopes[(r["layout"], "err_c")],
                        slopes[(r["layout"], "err_r")]])
    return path


def write_landscape(path, a12_grid, a21_grid, residuals):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha12", "alpha21", "log10_residual"])
        for i, a12 in enumerate(a12_grid):
            for j, a21 in enumerate(a21_grid):
                w.writerow([a12, a21, np.log10(max(residuals[i, j], 1e-300))])
    return path


def fig_convergence(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    it = np.arange(len(report.residuals))
    ax.semilogy(it, report.residuals, "o-", label="relative residual")
    if report.err_c is not None:
        ax.semilogy(it[: len(report.err_c)], report.err_c, "s--", label="error in c")
    if report.err_r is not None:
        ax.semilogy(it[: len(report.err_r)], report.err_r, "^--", label="error in r")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual / error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fig_errors_vs_dt(rows, path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    layouts = sorted({r["layout"] for r in rows})
    for key, ax, label in ((("err_c"), axes[0], "concentration"),
                           (("err_r"), axes[1], "flux")):
        for layout in layouts:
            sel = sorted((r for r in rows if r["layout"] == layout),
                         key=lambda r: r["level"])
            dts = [min(r["dt1"], r["dt2"]) for r in sel]
            ax.loglog(dts, [r[key] for r in sel], "o-", label=layout)
        dts = np.array(sorted({min(r["dt1"], r["dt2"]) for r in rows}))
        ref = rows[0][key] * dts / min(r["dt1"] for r in rows)
        ax.loglog(dts, dts * (max(r[key] for r in rows) / dts.max()), "k:",
                  label="slope 1")
        ax.set_xlabel("dt")
        ax.set_ylabel(f"relative L2(L2) error in {label}")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fig_landscape(a12_grid, a21_grid, residuals, opt_point, path):
    fig, ax = plt.subplots(figsize=(6, 5))
    A12, A21 = np.meshgrid(a12_grid, a21_grid, indexing="ij")
    lv = np.log10(np.maximum(residuals, 1e-300))
    cs = ax.contourf(A12, A21, lv, levels=20, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="log10 residual after fixed sweeps")
    ax.plot([opt_point[0]], [opt_point[1]], "r*", markersize=14,
            label="optimized parameters")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("alpha12")
    ax.set_ylabel("alpha21")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def fig_snapshot(meshes, fields, t, path):
    fig, ax = plt.subplots(figsize=(8, 4))
    vals = []
    for mesh, fld in zip(meshes, fields):
        _, c = fld.snapshot(t)
        vals.append(c)
    vmin = min(v.min() for v in vals)
    vmax = max(v.max() for v in vals)
    for mesh, fld in zip(meshes, fields):
        _, c = fld.snapshot(t)
        pc = ax.pcolormesh(mesh.xs, mesh.ys, c.reshape(mesh.ny, mesh.nx),
                           vmin=vmin, vmax=vmax, cmap="inferno")
    fig.colorbar(pc, ax=ax, label="concentration")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"t = {t:.6g}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
