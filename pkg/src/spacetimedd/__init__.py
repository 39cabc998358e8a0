"""Global-in-time domain decomposition solvers for mixed-form diffusion.

A 2D time-dependent diffusion solver in mixed form (lowest-order
Raviart-Thomas in space, piecewise-constant DG in time) with two
global-in-time nonoverlapping domain decomposition methods:

* an interface substructuring method built on a space-time
  Dirichlet-to-Neumann operator with weighted Neumann-Neumann
  preconditioning, and
* Optimized Schwarz Waveform Relaxation with Robin transmission
  conditions,

both supporting independent (nonconforming) time grids per subdomain
coupled through an L2 projection of interface traces.
"""

from spacetimedd.geometry import RectMesh, Decomposition, build_mesh, decompose
from spacetimedd.timegrid import TimePartition, TraceFunction, project, integrate_in_time

__all__ = [
    "RectMesh",
    "Decomposition",
    "build_mesh",
    "decompose",
    "TimePartition",
    "TraceFunction",
    "project",
    "integrate_in_time",
]

__version__ = "0.1.0"
