"""Command-line entry points.

Verbs:
    run <config>                   execute the configured scenario/method
    study time-order <config>     four-layout time-accuracy study
    study robin-landscape <config> Jacobi residual landscape over alphas
    optimize-robin <config>        print/write optimized Robin parameters
    reference <config>             direct monodomain reference solve
"""

from __future__ import annotations

import json
import pathlib

import click

from spacetimedd import runner
from spacetimedd.scenarios import load_config

_shared = [
    click.option("--seed", type=int, default=None, help="random seed override"),
    click.option("--tol", type=float, default=None, help="solver tolerance override"),
    click.option("--max-iter", type=int, default=None, help="iteration cap override"),
    click.option("--out-dir", type=click.Path(), default="out", show_default=True),
    click.option("--scale", type=int, default=None, help="resolution divisor override"),
    click.option("--method", type=str, default=None,
                 help="monodomain | method1 | method2-gmres | method2-jacobi"),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


def _load(config, seed, tol, max_iter, scale, method):
    path = pathlib.Path(config)
    with open(path) as fh:
        import yaml

        cfg = yaml.safe_load(fh) or {}
    if scale is not None:
        cfg["scale"] = scale
    if seed is not None:
        cfg["seed"] = seed
    if tol is not None:
        cfg["tol"] = tol
    if max_iter is not None:
        cfg["max_iter"] = max_iter
    if method is not None:
        cfg["method"] = method
    from spacetimedd.scenarios import scenario_from_config

    return scenario_from_config(cfg), cfg


@click.group()
def main():
    """Global-in-time domain decomposition benchmarks."""


@main.command("run")
@click.argument("config", type=click.Path(exists=True))
@shared_options
def run_cmd(config, seed, tol, max_iter, out_dir, scale, method):
    """Run one scenario end to end and write report, snapshots, manifest."""
    scenario, cfg = _load(config, seed, tol, max_iter, scale, method)
    art = runner.run(scenario, out_dir, method=cfg.get("method"),
                     seed=cfg.get("seed"), tol=cfg.get("tol"),
                     max_iter=cfg.get("max_iter"), cfg=cfg)
    click.echo(json.dumps(art.summary, default=str, indent=2))


@main.group()
def study():
    """Parameter and accuracy studies."""


@study.command("time-order")
@click.argument("config", type=click.Path(exists=True))
@shared_options
def time_order_cmd(config, seed, tol, max_iter, out_dir, scale, method):
    """Errors versus time step on the four time-grid layouts."""
    scenario, cfg = _load(config, seed, tol, max_iter, scale, method)
    block = cfg.get("study", {})
    art = runner.time_grid_study(
        scenario,
        dt_coarse=float(block.get("dt_coarse", 1.0 / 40)),
        dt_fine=float(block.get("dt_fine", 1.0 / 160)),
        n_refinements=int(block.get("n_refinements", 4)),
        out_dir=out_dir,
        tol=cfg.get("tol") or 1e-10,
        cfg=cfg,
    )
    click.echo(json.dumps(art.summary, default=str, indent=2))


@study.command("robin-landscape")
@click.argument("config", type=click.Path(exists=True))
@shared_options
def landscape_cmd(config, seed, tol, max_iter, out_dir, scale, method):
    """Jacobi residual after fixed sweeps over an (alpha12, alpha21) grid."""
    scenario, cfg = _load(config, seed, tol, max_iter, scale, method)
    block = cfg.get("landscape", {})
    art = runner.landscape(
        scenario,
        alpha_min=float(block.get("alpha_min", 1e-2)),
        alpha_max=float(block.get("alpha_max", 1e2)),
        n=int(block.get("n", 15)),
        n_iter=int(block.get("n_iter", 20)),
        seed=cfg.get("seed", 0) or 0,
        out_dir=out_dir,
        cfg=cfg,
    )
    click.echo(json.dumps(art.summary, default=str, indent=2))


@main.command("optimize-robin")
@click.argument("config", type=click.Path(exists=True))
@shared_options
def optimize_cmd(config, seed, tol, max_iter, out_dir, scale, method):
    """Compute and print optimized Robin parameters per interface."""
    scenario, cfg = _load(config, seed, tol, max_iter, scale, method)
    alphas = scenario.robin_params()
    out = {f"{int(i)},{int(j)}": a for (i, j), a in alphas.items()}
    outp = pathlib.Path(out_dir)
    outp.mkdir(parents=True, exist_ok=True)
    with open(outp / "robin_params.json", "w") as fh:
        json.dump(out, fh, indent=2)
    click.echo(json.dumps(out, indent=2))


@main.command("reference")
@click.argument("config", type=click.Path(exists=True))
@shared_options
def reference_cmd(config, seed, tol, max_iter, out_dir, scale, method):
    """Direct monodomain solve on the scenario's (finest) time grid."""
    scenario, cfg = _load(config, seed, tol, max_iter, scale, method)
    art = runner.run(scenario, out_dir, method="monodomain", cfg=cfg)
    click.echo(json.dumps(art.summary, default=str, indent=2))


if __name__ == "__main__":
    main()
