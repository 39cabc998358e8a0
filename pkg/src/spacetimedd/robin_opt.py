"""Optimized Robin parameters for the waveform-relaxation coupling.

The two-half-space Fourier analysis of one relaxation sweep for

    omega_i dc/dt - d_i Laplace(c) = 0

with Robin coupling (-r.n + alpha*c) gives, per temporal frequency w and
tangential frequency k, the contraction factor

    rho = |(d1*s1 - a21)(d2*s2 - a12)| / |(d1*s1 + a12)(d2*s2 + a21)|,

with s_i = sqrt((omega_i*i*w + d_i*k^2)/d_i) (principal root).  The
optimized parameters minimize the maximum of rho over the frequencies a
discretization can represent: w in [pi/T, pi/dt_min], k in
[pi/L_interface, pi/dx].  A geometry-aware variant replaces the
half-space symbol d_i*s_i by the bounded-strip symbol
d_i*s_i*coth(s_i*L_i), which matters when a subdomain is thin in the
direction normal to the interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from spacetimedd import interface_ops as io


@dataclass(frozen=True)
class RobinParams:
    """Directed Robin parameters: alphas[(i, j)] is used in subdomain i's
    interface condition -r_i.n_i + alpha[i,j]*c_i on its interface with j."""

    alphas: dict

    def __post_init__(self):
        for key, a in self.alphas.items():
            if a <= 0.0:
                raise ValueError(f"Robin parameter {key} must be positive")

    def __getitem__(self, key):
        return self.alphas[key]


@dataclass(frozen=True)
class FrequencyBox:
    """Resolvable frequency window of a given discretization."""

    w_min: float
    w_max: float
    k_min: float
    k_max: float

    def __post_init__(self):
        if not (0.0 < self.w_min <= self.w_max and 0.0 < self.k_min <= self.k_max):
            raise ValueError("frequency ranges must be positive and ordered")

    @classmethod
    def from_discretization(cls, T, dt_min, L_interface, dx) -> "FrequencyBox":
        return cls(np.pi / T, np.pi / dt_min, np.pi / L_interface, np.pi / dx)

    def sample_grid(self, n: int = 30):
        ws = np.geomspace(self.w_min, self.w_max, n)
        ks = np.geomspace(self.k_min, self.k_max, n)
        return ws, ks


def _sigma(w, k, d, om):
    """Principal root of the half-space symbol, positive real part."""
    return np.sqrt((om * 1j * w + d * k**2) / d)


def convergence_factor(a12, a21, w, k, d1, d2, om1, om2) -> float:
    """Fourier contraction factor of one relaxation sweep at (w, k)."""
    s1 = d1 * _sigma(w, k, d1, om1)
    s2 = d2 * _sigma(w, k, d2, om2)
    num = abs((s1 - a21) * (s2 - a12))
    den = abs((s1 + a12) * (s2 + a21))
    return float(num / den)


def _symbols_on_grid(box: FrequencyBox, d1, d2, om1, om2, n, L1=None, L2=None):
    ws, ks = box.sample_grid(n)
    W, K = np.meshgrid(ws, ks, indexing="ij")
    sig1 = _sigma(W, K, d1, om1)
    sig2 = _sigma(W, K, d2, om2)
    s1 = d1 * sig1
    s2 = d2 * sig2
    if L1 is not None:
        s1 = s1 / np.tanh(sig1 * L1)
    if L2 is not None:
        s2 = s2 / np.tanh(sig2 * L2)
    return s1, s2


def _minmax_rho(s1, s2, a12, a21) -> float:
    num = np.abs((s1 - a21) * (s2 - a12))
    den = np.abs((s1 + a12) * (s2 + a21))
    return float(np.max(num / den))


def optimize(
    d1, d2, om1, om2, box: FrequencyBox,
    mode: str = "two-sided",
    n_samples: int = 30,
    L1=None, L2=None,
    sweeps: int = 12,
):
    """Min-max optimal Robin pair over the sampled frequency box.

    mode 'symmetric' constrains a12 = a21; 'two-sided' alternates
    bounded scalar minimizations over log(a12) and log(a21).
    Pass L1/L2 (subdomain widths normal to the interface) for the
    strip-corrected variant.  Returns (a12, a21, achieved min-max rho).
    """
    s1, s2 = _symbols_on_grid(box, d1, d2, om1, om2, n_samples, L1, L2)
    mags = np.concatenate([np.abs(s1).ravel(), np.abs(s2).ravel()])
    lo, hi = np.log(mags.min() / 100.0), np.log(mags.max() * 100.0)

    if mode == "symmetric":
        res = minimize_scalar(
            lambda t: _minmax_rho(s1, s2, np.exp(t), np.exp(t)),
            bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10},
        )
        a = float(np.exp(res.x))
        return a, a, float(res.fun)
    if mode != "two-sided":
        raise ValueError(f"unknown mode {mode!r}")

    # the min-max objective is non-convex; seed the alternating descent
    # with a coarse exhaustive scan over the log box
    seeds = np.exp(np.linspace(lo, hi, 48))
    best = np.inf
    a12 = a21 = float(np.sqrt(mags.min() * mags.max()))
    for x in seeds:
        for y in seeds:
            v = _minmax_rho(s1, s2, x, y)
            if v < best:
                best, a12, a21 = v, float(x), float(y)
    for _ in range(sweeps):
        r1 = minimize_scalar(
            lambda t: _minmax_rho(s1, s2, np.exp(t), a21),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-10},
        )
        a12 = float(np.exp(r1.x))
        r2 = minimize_scalar(
            lambda t: _minmax_rho(s1, s2, a12, np.exp(t)),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-10},
        )
        a21 = float(np.exp(r2.x))
        new = float(r2.fun)
        if best - new < 1e-12 * max(best, 1e-300):
            best = min(best, new)
            break
        best = new
    return a12, a21, best


def adapted_optimize(d1, d2, om1, om2, box: FrequencyBox, L1, L2,
                     mode: str = "two-sided", n_samples: int = 30):
    """Strip-corrected optimization ('Opt. 2'): accounts for the finite
    subdomain widths L1, L2 normal to the interface."""
    return optimize(d1, d2, om1, om2, box, mode=mode, n_samples=n_samples,
                    L1=L1, L2=L2)


def landscape_scan(ctx: io.DDContext, a12_grid, a21_grid, pair=None,
                   n_iter: int = 20, seed: int = 0):
    """Residual after exactly n_iter Jacobi sweeps for every (a12, a21)
    on a zero-data context, from one fixed random initial guess.

    Returns an array res[i, j] = ||xi^n - xi^{n-1}|| for
    (a12_grid[i], a21_grid[j]).  `pair` selects the interface when the
    decomposition has several (default: the only one).
    """
    from spacetimedd.solvers import random_interface_vector

    pairs = list(ctx.decomp.interfaces)
    if pair is None:
        if len(pairs) != 1:
            raise ValueError("pair must be given for multi-interface scans")
        pair = pairs[0]
    a, b = pair
    x0 = random_interface_vector(ctx.xi_template(), seed)
    out = np.empty((len(a12_grid), len(a21_grid)))
    for i, a12 in enumerate(a12_grid):
        for j, a21 in enumerate(a21_grid):
            alphas = {(a, b): float(a12), (b, a): float(a21)}
            xi = x0.copy()
            res = np.inf
            for _ in range(n_iter):
                xi_new = io.oswr_sweep(ctx, xi, alphas)
                res = float(np.linalg.norm(xi_new.flatten() - xi.flatten()))
                xi = xi_new
            out[i, j] = res
    return out
