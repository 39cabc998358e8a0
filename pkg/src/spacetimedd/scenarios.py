"""Benchmark scenario definitions and config-file loading.

Two built-in problem families:

* test1 — a unit-square two-subdomain problem with a diffusion contrast
  (ratio 10, 100, or 1000) across the vertical midline, Gaussian-bump
  initial data, no source, and nonconforming per-subdomain time grids.
* test2 — a 3950 m x 140 m clay/repository configuration: nine
  rectangular subdomains, a thin central repository layer with higher
  porosity and diffusivity, a source active for the first 1e5 years, and
  a graded mesh refined inside the repository band.

Internally everything is SI (meters, seconds); year-based inputs are
converted once on construction and echoed back in years exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from spacetimedd import mixedfem as mf
from spacetimedd.geometry import GradingSpec, build_mesh, decompose
from spacetimedd.interface_ops import DDContext
from spacetimedd.timegrid import TimePartition

SECONDS_PER_YEAR = 3.15576e7

_TEST1_TABLE = {
    # diffusion ratio -> (d1, slabs1, d2, slabs2) on (0, 1]
    10: (0.02, 150, 0.2, 200),
    100: (0.002, 50, 0.2, 200),
    1000: (0.0002, 20, 0.2, 200),
}


@dataclass
class Scenario:
    """Complete problem description consumed by the runners."""

    name: str
    domain: tuple
    nx: int
    ny: int
    boxes: list
    coefficients: list  # mixedfem.Coefficients per subdomain
    partitions: list  # TimePartition per subdomain
    boundary: dict  # side -> (kind, value)
    c0_fn: object = None
    f_fn: object = None
    grading: GradingSpec = None
    method: str = "method1"
    robin_source: str = "opt1"  # 'explicit' | 'opt1' | 'opt2'
    explicit_alphas: dict = None
    tol: float = 1e-6
    max_iter: int = 200
    seed: int = 0
    lambda_partitions: dict = None
    meta: dict = field(default_factory=dict)

    # ---- derived objects -------------------------------------------------

    @property
    def final_time(self) -> float:
        return self.partitions[0].final_time

    def mesh(self):
        return build_mesh(self.domain, self.nx, self.ny, self.grading)

    def decomposition(self):
        return decompose(self.mesh(), self.boxes)

    def context(self, zero_data: bool = False) -> DDContext:
        """Build the per-subdomain solve context (zero_data drops c0, f)."""
        return DDContext(
            self.decomposition(),
            self.coefficients,
            self.partitions,
            self.boundary,
            c0_fn=None if zero_data else self.c0_fn,
            f_fn=None if zero_data else self.f_fn,
            lambda_partitions=self.lambda_partitions,
        )

    def monodomain(self, partition: TimePartition = None):
        """(system, bcs, c0 array, f provider) for a direct global solve."""
        mesh = self.mesh()
        decomp = self.decomposition()
        omega = np.empty(mesh.n_cells)
        d = np.empty(mesh.n_cells)
        for s, co in enumerate(self.coefficients):
            cells = decomp.labels == s
            omega[cells] = co.porosity
            d[cells] = co.diffusion
        system = mf.SubdomainSystem(mesh, omega, d)
        part = partition if partition is not None else self.partitions[0]
        bcs = []
        for side, (kind, value) in self.boundary.items():
            edges = mesh.boundary_edges(side)
            sign = float(mesh.outward_sign(side))
            values = None
            if value is not None:
                mids = mesh.edge_midpoints()[edges]
                t_end = part.boundaries[1:]
                if callable(value):
                    values = np.array(
                        [value(mids[:, 0], mids[:, 1], t) for t in t_end]
                    )
                else:
                    values = np.full((part.n_slabs, edges.size), float(value))
            bcs.append(mf.BCGroup(kind, edges, np.full(edges.size, sign), values=values))
        centers = mesh.cell_centers()
        c0 = None
        if self.c0_fn is not None:
            c0 = np.asarray(self.c0_fn(centers[:, 0], centers[:, 1]), dtype=float)
        f = None
        if self.f_fn is not None:
            b = part.boundaries

            def f(m, _c=centers, _b=b):
                return self.f_fn(_c[:, 0], _c[:, 1], _b[m], _b[m + 1])

        return system, bcs, c0, f

    def with_partitions(self, partitions) -> "Scenario":
        out = Scenario(**{**self.__dict__, "partitions": list(partitions)})
        return out

    # ---- Robin parameters --------------------------------------------------

    def robin_params(self) -> dict:
        """Directed alpha dict per the scenario's robin_source."""
        from spacetimedd import robin_opt as ro

        if self.robin_source == "explicit":
            if not self.explicit_alphas:
                raise ValueError("explicit Robin source needs explicit_alphas")
            return dict(self.explicit_alphas)
        decomp = self.decomposition()
        mesh = decomp.mesh
        lengths = mesh.edge_lengths()
        alphas = {}
        for (a, b), itf in decomp.interfaces.items():
            ca, cb = self.coefficients[a], self.coefficients[b]
            elens = lengths[itf.edges]
            L_itf = float(elens.sum())
            dx = float(elens.min())
            dt_min = min(self.partitions[a].widths.min(), self.partitions[b].widths.min())
            box = ro.FrequencyBox.from_discretization(
                self.final_time, dt_min, L_itf, dx
            )
            La = Lb = None
            if self.robin_source == "opt2":
                La = _normal_extent(decomp, a, itf)
                Lb = _normal_extent(decomp, b, itf)
            a12, a21, _ = ro.optimize(
                ca.diffusion, cb.diffusion, ca.porosity, cb.porosity,
                box, L1=La, L2=Lb,
            )
            alphas[(a, b)] = a12
            alphas[(b, a)] = a21
        return alphas


def _normal_extent(decomp, s: int, itf) -> float:
    """Subdomain width in the direction normal to the interface."""
    mesh = decomp.mesh
    i0, i1, j0, j1 = decomp.box_ranges[s]
    vertical = bool(itf.edges[0] < mesh.n_vedges)
    if vertical:  # normal along x
        return float(mesh.xs[i1] - mesh.xs[i0])
    return float(mesh.ys[j1] - mesh.ys[j0])


def scenario_test1(ratio: int = 100, scale: int = 1, n_slabs=None, **overrides) -> Scenario:
    """Two-subdomain unit-square benchmark with diffusion contrast `ratio`.

    scale divides the spatial and temporal resolutions; n_slabs, if given
    as (M1, M2), overrides the per-subdomain slab counts (e.g. for
    conforming-grid runs).
    """
    if ratio not in _TEST1_TABLE:
        raise ValueError(f"ratio must be one of {sorted(_TEST1_TABLE)}")
    d1, m1, d2, m2 = _TEST1_TABLE[ratio]
    n = 200 // scale
    if n % 2:
        raise ValueError("scale must keep an even cell count so the midline "
                         "x = 0.5 stays on a mesh line")
    if n_slabs is None:
        n_slabs = (max(m1 // scale, 1), max(m2 // scale, 1))
    parts = [TimePartition.uniform(1.0, n_slabs[0]), TimePartition.uniform(1.0, n_slabs[1])]
    sc = Scenario(
        name=f"test1-ratio{ratio}",
        domain=(0.0, 1.0, 0.0, 1.0),
        nx=n,
        ny=n,
        boxes=[(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.0, 1.0)],
        coefficients=[mf.Coefficients(1.0, d1), mf.Coefficients(1.0, d2)],
        partitions=parts,
        boundary={
            "left": ("dirichlet", None),
            "right": ("dirichlet", None),
            "bottom": ("neumann", None),
            "top": ("neumann", None),
        },
        c0_fn=lambda x, y: np.exp((x - 0.55) ** 2 + 0.5 * (y - 0.5) ** 2),
        meta={"ratio": ratio, "scale": scale},
    )
    for k, v in overrides.items():
        setattr(sc, k, v)
    return sc


def scenario_test2(T_years: float = 2e5, scale: int = 1, **overrides) -> Scenario:
    """Nine-subdomain clay/repository benchmark.

    The repository occupies the central 2950 m x 10 m layer; the source
    injects 1e-5 s^-1 there for the first 1e5 years.  Time steps are
    2000 years inside the repository and 10000 years elsewhere, scaled by
    `scale`; the mesh is uniform in the repository band (600/scale by
    30/scale cells) and geometrically graded outside (factor 1.05,
    coarsest cell capped at 50x the band cell).
    """
    xs = [0.0, 500.0, 3450.0, 3950.0]
    ys = [0.0, 65.0, 75.0, 140.0]
    boxes = [
        (xs[i], xs[i + 1], ys[j], ys[j + 1]) for j in range(3) for i in range(3)
    ]
    rep = 4  # central box, row-major
    coeffs = [
        mf.Coefficients(0.2, 2e-9) if s == rep else mf.Coefficients(0.05, 5e-12)
        for s in range(9)
    ]
    T = T_years * SECONDS_PER_YEAR
    dt_rep_y, dt_clay_y = 2000.0 * scale, 10000.0 * scale
    parts = []
    for s in range(9):
        dt_y = dt_rep_y if s == rep else dt_clay_y
        n_slabs = int(round(T_years / dt_y))
        parts.append(TimePartition.uniform(T, n_slabs))
    t_cut = 1e5 * SECONDS_PER_YEAR
    rate = 1e-5  # s^-1, inside the repository while the source is on

    def f_fn(x, y, t0, t1):
        inside = (
            (x > 500.0) & (x < 3450.0) & (y > 65.0) & (y < 75.0)
        ).astype(float)
        frac = np.clip((t_cut - t0) / (t1 - t0), 0.0, 1.0)
        return rate * frac * inside

    grading = GradingSpec(
        band=(500.0, 3450.0, 65.0, 75.0),
        band_nx=max(600 // scale, 1),
        band_ny=max(30 // scale, 1),
        factor=1.05,
        max_ratio=50.0,
    )
    sc = Scenario(
        name=f"test2-T{T_years:g}y",
        domain=(0.0, 3950.0, 0.0, 140.0),
        nx=0,
        ny=0,
        boxes=boxes,
        coefficients=coeffs,
        partitions=parts,
        boundary={
            "left": ("neumann", None),
            "right": ("neumann", None),
            "bottom": ("dirichlet", None),
            "top": ("dirichlet", None),
        },
        f_fn=f_fn,
        grading=grading,
        method="method2-gmres",
        robin_source="opt2",
        meta={
            "T_years": T_years,
            "scale": scale,
            "repository_subdomain": rep,
            "repository_box": (500.0, 3450.0, 65.0, 75.0),
            "source_cutoff_years": 1e5,
            "dt_repository_years": dt_rep_y,
            "dt_clay_years": dt_clay_y,
        },
    )
    for k, v in overrides.items():
        setattr(sc, k, v)
    return sc


# ---- config files -----------------------------------------------------------

_SCENARIO_KEYS = ("method", "robin_source", "tol", "max_iter", "seed")


def load_config(path) -> tuple:
    """Read a YAML config and return (Scenario, normalized config dict).

    Schema:
        scenario: test1 | test2
        ratio / T_years / scale: scenario parameters
        method, robin_source, tol, max_iter, seed: optional overrides
        alphas: optional {"i,j": value} explicit Robin parameters
        study: optional time-order study block (dt_coarse, dt_fine,
               n_refinements)
        landscape: optional block (alpha_min, alpha_max, n, n_iter)
    """
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return scenario_from_config(raw), raw


def scenario_from_config(cfg: dict) -> Scenario:
    kind = cfg.get("scenario", "test1")
    if kind == "test1":
        sc = scenario_test1(
            ratio=int(cfg.get("ratio", 100)),
            scale=int(cfg.get("scale", 1)),
            n_slabs=tuple(cfg["n_slabs"]) if "n_slabs" in cfg else None,
        )
    elif kind == "test2":
        sc = scenario_test2(
            T_years=float(cfg.get("T_years", 2e5)),
            scale=int(cfg.get("scale", 1)),
        )
    else:
        raise ValueError(f"unknown scenario {kind!r}")
    for key in _SCENARIO_KEYS:
        if key in cfg:
            setattr(sc, key, cfg[key])
    if "alphas" in cfg:
        sc.robin_source = "explicit"
        sc.explicit_alphas = {
            tuple(int(t) for t in k.split(",")): float(v)
            for k, v in cfg["alphas"].items()
        }
    return sc


def config_hash(cfg: dict) -> str:
    """Stable hash of a config mapping (order-independent)."""
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
