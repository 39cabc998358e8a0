"""Structured rectangular meshes and box decompositions.

Meshes are tensor products of strictly increasing coordinate arrays.
Edges carry a global orientation: vertical edges have unit normal +x,
horizontal edges +y.  Flux degrees of freedom and interface signs are
always expressed relative to that convention.

Edge numbering for an nx-by-ny grid:

* vertical edge (i, j), i in [0, nx], j in [0, ny-1]:  id = i*ny + j
* horizontal edge (i, j), i in [0, nx-1], j in [0, ny]:
  id = (nx+1)*ny + j*nx + i

Cell (i, j) has id j*nx + i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_COORD_TOL = 1e-9


@dataclass(frozen=True)
class RectMesh:
    """Tensor-product rectangular mesh."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.size < 2 or ys.size < 2:
            raise ValueError("mesh needs at least one cell per direction")
        if np.any(np.diff(xs) <= 0.0) or np.any(np.diff(ys) <= 0.0):
            raise ValueError("mesh coordinates must be strictly increasing")

    @property
    def nx(self) -> int:
        return self.xs.size - 1

    @property
    def ny(self) -> int:
        return self.ys.size - 1

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_vedges(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n_hedges(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def n_edges(self) -> int:
        return self.n_vedges + self.n_hedges

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.xs)

    @property
    def dy(self) -> np.ndarray:
        return np.diff(self.ys)

    def cell_id(self, i, j):
        return j * self.nx + i

    def v_edge(self, i, j):
        return i * self.ny + j

    def h_edge(self, i, j):
        return self.n_vedges + j * self.nx + i

    def cell_centers(self):
        """(n_cells, 2) array of centers, cell-id ordered."""
        cx = 0.5 * (self.xs[:-1] + self.xs[1:])
        cy = 0.5 * (self.ys[:-1] + self.ys[1:])
        X, Y = np.meshgrid(cx, cy)
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_areas(self):
        return np.outer(self.dy, self.dx).ravel()

    def cell_widths(self):
        """(hx, hy) per cell, cell-id ordered."""
        hx = np.tile(self.dx, self.ny)
        hy = np.repeat(self.dy, self.nx)
        return hx, hy

    def edge_lengths(self):
        lv = np.tile(self.dy, self.nx + 1)  # v_edge id = i*ny + j
        lh = np.repeat(self.dx[None, :], self.ny + 1, axis=0).ravel()
        return np.concatenate([lv, lh])

    def cell_edge_ids(self):
        """(n_cells, 4) edge ids in order (W, E, S, N)."""
        I, J = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        i, j = I.ravel(), J.ravel()
        return np.column_stack(
            [
                self.v_edge(i, j),
                self.v_edge(i + 1, j),
                self.h_edge(i, j),
                self.h_edge(i, j + 1),
            ]
        )

    def edge_midpoints(self):
        """(n_edges, 2) array of edge midpoints, edge-id ordered."""
        cx = 0.5 * (self.xs[:-1] + self.xs[1:])
        cy = 0.5 * (self.ys[:-1] + self.ys[1:])
        out = np.empty((self.n_edges, 2))
        Xv, Yv = np.meshgrid(self.xs, cy, indexing="ij")  # v_edge id = i*ny + j
        out[: self.n_vedges] = np.column_stack([Xv.ravel(), Yv.ravel()])
        Xh, Yh = np.meshgrid(cx, self.ys, indexing="xy")
        out[self.n_vedges :] = np.column_stack([Xh.ravel(), Yh.ravel()])
        return out

    def n_interior_edges(self) -> int:
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    def boundary_edges(self, side: str) -> np.ndarray:
        """Edge ids on one side of the rectangle: left/right/bottom/top."""
        j = np.arange(self.ny)
        i = np.arange(self.nx)
        if side == "left":
            return self.v_edge(0, j)
        if side == "right":
            return self.v_edge(self.nx, j)
        if side == "bottom":
            return self.h_edge(i, 0)
        if side == "top":
            return self.h_edge(i, self.ny)
        raise ValueError(f"unknown side {side!r}")

    def outward_sign(self, side: str) -> int:
        """Sign of the outward normal vs the global +x/+y edge orientation."""
        return {"left": -1, "right": 1, "bottom": -1, "top": 1}[side]


@dataclass(frozen=True)
class GradingSpec:
    """Geometric mesh grading away from a uniformly refined band.

    Inside the band the mesh is uniform (band_nx by band_ny cells);
    outside it, consecutive cell widths grow by `factor`, clamped so no
    cell exceeds `max_ratio` times the band cell width.
    """

    band: tuple  # (x0, x1, y0, y1)
    band_nx: int
    band_ny: int
    factor: float = 1.05
    max_ratio: float = 50.0

    def __post_init__(self):
        if self.factor < 1.0:
            raise ValueError("grading factor must be >= 1")


def _graded_axis(lo, hi, band_lo, band_hi, n_band, factor, max_ratio):
    if not (lo <= band_lo < band_hi <= hi):
        raise ValueError("grading band must lie inside the domain")
    w0 = (band_hi - band_lo) / n_band

    def outward(length):
        if length <= _COORD_TOL * (hi - lo):
            return np.array([])
        widths = []
        w = w0
        total = 0.0
        while total < length:
            w = min(w * factor, max_ratio * w0)
            widths.append(w)
            total += w
        widths = np.array(widths)
        return widths * (length / total)

    left = outward(band_lo - lo)[::-1]
    right = outward(hi - band_hi)
    inside = np.full(n_band, w0)
    widths = np.concatenate([left, inside, right])
    coords = lo + np.concatenate([[0.0], np.cumsum(widths)])
    coords[-1] = hi
    return coords


def build_mesh(domain, nx: int, ny: int, grading: GradingSpec | None = None) -> RectMesh:
    """Mesh an axis-aligned rectangle.

    domain is (x0, x1, y0, y1) in meters.  Without grading the mesh is
    uniform nx-by-ny.  With grading, nx/ny are ignored and the band
    resolution of the GradingSpec applies.
    """
    x0, x1, y0, y1 = map(float, domain)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("domain extents must be positive")
    if grading is None:
        if nx < 1 or ny < 1:
            raise ValueError("need nx, ny >= 1")
        return RectMesh(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1))
    bx0, bx1, by0, by1 = grading.band
    xs = _graded_axis(x0, x1, bx0, bx1, grading.band_nx, grading.factor, grading.max_ratio)
    ys = _graded_axis(y0, y1, by0, by1, grading.band_ny, grading.factor, grading.max_ratio)
    return RectMesh(xs, ys)


@dataclass(frozen=True)
class Interface:
    """The edges shared by an ordered subdomain pair (a, b), a < b.

    sign_a[e] is the outward-normal sign of edge e as seen from subdomain
    a (relative to the global +x/+y edge orientation); the sign seen from
    b is the negative.
    """

    pair: tuple
    edges: np.ndarray
    sign_a: np.ndarray

    def sign(self, subdomain: int) -> np.ndarray:
        if subdomain == self.pair[0]:
            return self.sign_a
        if subdomain == self.pair[1]:
            return -self.sign_a
        raise ValueError(f"subdomain {subdomain} not adjacent to interface {self.pair}")

    @property
    def n_edges(self) -> int:
        return self.edges.size


@dataclass(frozen=True)
class Decomposition:
    """Nonoverlapping box partition of a RectMesh.

    Subdomains are indexed 0..I-1 in the order the boxes were given.
    """

    mesh: RectMesh
    labels: np.ndarray  # per-cell subdomain index
    box_ranges: tuple  # per subdomain: (i0, i1, j0, j1) cell-index ranges
    interfaces: dict = field(default_factory=dict)  # (a, b) -> Interface
    neighbors: dict = field(default_factory=dict)

    @property
    def n_subdomains(self) -> int:
        return len(self.box_ranges)

    def interfaces_of(self, i: int):
        return {p: itf for p, itf in self.interfaces.items() if i in p}


def _locate(coords, value, what):
    idx = int(np.searchsorted(coords, value))
    for k in (idx - 1, idx, idx + 1):
        if 0 <= k < coords.size and abs(coords[k] - value) <= _COORD_TOL * max(
            1.0, coords[-1] - coords[0]
        ):
            return k
    raise ValueError(f"{what}={value} does not lie on a mesh line")


def decompose(mesh: RectMesh, boxes) -> Decomposition:
    """Partition the mesh into axis-aligned rectangular subdomains.

    boxes is a list of (x0, x1, y0, y1) that must exactly tile the domain
    with edges on mesh lines.
    """
    labels = np.full(mesh.n_cells, -1, dtype=int)
    ranges = []
    for s, (x0, x1, y0, y1) in enumerate(boxes):
        i0 = _locate(mesh.xs, x0, "box x0")
        i1 = _locate(mesh.xs, x1, "box x1")
        j0 = _locate(mesh.ys, y0, "box y0")
        j1 = _locate(mesh.ys, y1, "box y1")
        if i1 <= i0 or j1 <= j0:
            raise ValueError("box must contain at least one cell")
        ranges.append((i0, i1, j0, j1))
        for j in range(j0, j1):
            cells = mesh.cell_id(np.arange(i0, i1), j)
            if np.any(labels[cells] >= 0):
                raise ValueError("boxes overlap")
            labels[cells] = s
    if np.any(labels < 0):
        raise ValueError("boxes leave gaps in the domain")

    interfaces = {}
    staging = {}

    def visit(edge, ca, cb):
        # ca is the cell on the -normal side (left/below), cb on +normal
        la, lb = labels[ca], labels[cb]
        if la == lb:
            return
        a, b = (la, lb) if la < lb else (lb, la)
        # outward sign from a: +1 if a sits on the -normal side
        sign_a = 1 if la == a else -1
        staging.setdefault((a, b), []).append((edge, sign_a))

    nx, ny = mesh.nx, mesh.ny
    for i in range(1, nx):
        for j in range(ny):
            visit(mesh.v_edge(i, j), mesh.cell_id(i - 1, j), mesh.cell_id(i, j))
    for j in range(1, ny):
        for i in range(nx):
            visit(mesh.h_edge(i, j), mesh.cell_id(i, j - 1), mesh.cell_id(i, j))

    neighbors = {s: set() for s in range(len(boxes))}
    for pair, items in sorted(staging.items()):
        edges = np.array([e for e, _ in items], dtype=int)
        signs = np.array([s for _, s in items], dtype=int)
        interfaces[pair] = Interface(pair, edges, signs)
        neighbors[pair[0]].add(pair[1])
        neighbors[pair[1]].add(pair[0])
    neighbors = {s: sorted(v) for s, v in neighbors.items()}
    return Decomposition(mesh, labels, tuple(ranges), interfaces, neighbors)


@dataclass(frozen=True)
class SubdomainSlice:
    """A subdomain viewed as its own RectMesh plus global index maps."""

    local_mesh: RectMesh
    cell_map: np.ndarray  # local cell id -> global cell id
    edge_map: np.ndarray  # local edge id -> global edge id
    cell_range: tuple  # (i0, i1, j0, j1) in the parent mesh


def subdomain_slice(decomp: Decomposition, s: int) -> SubdomainSlice:
    mesh = decomp.mesh
    i0, i1, j0, j1 = decomp.box_ranges[s]
    local = RectMesh(mesh.xs[i0 : i1 + 1], mesh.ys[j0 : j1 + 1])
    li, lj = np.meshgrid(np.arange(i1 - i0), np.arange(j1 - j0))
    cell_map = mesh.cell_id(li.ravel() + i0, lj.ravel() + j0)

    edge_map = np.empty(local.n_edges, dtype=int)
    for i in range(local.nx + 1):
        for j in range(local.ny):
            edge_map[local.v_edge(i, j)] = mesh.v_edge(i + i0, j + j0)
    for i in range(local.nx):
        for j in range(local.ny + 1):
            edge_map[local.h_edge(i, j)] = mesh.h_edge(i + i0, j + j0)
    return SubdomainSlice(local, cell_map, edge_map, (i0, i1, j0, j1))
