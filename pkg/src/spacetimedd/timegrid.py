"""Per-subdomain time partitions and piecewise-constant interface traces.

Interface data is piecewise constant in time (one value per slab) and
piecewise constant in space (one value per interface edge).  Different
subdomains may use different partitions of (0, T]; data crossing an
interface is transferred with the L2 projection `project`, an averaging
that is exact for piecewise constants and conserves the time integral.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

_T_MATCH_RTOL = 1e-12


@dataclass(frozen=True)
class TimePartition:
    """Partition 0 = t_0 < t_1 < ... < t_M = T into slabs (t_{m-1}, t_m]."""

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        object.__setattr__(self, "boundaries", b)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("partition needs at least one slab")
        if abs(b[0]) > _T_MATCH_RTOL * b[-1]:
            raise ValueError("partition must start at t=0")
        if np.any(np.diff(b) <= 0.0):
            raise ValueError("slab boundaries must be strictly increasing")

    @classmethod
    def uniform(cls, final_time: float, n_slabs: int) -> "TimePartition":
        if final_time <= 0.0 or n_slabs < 1:
            raise ValueError("need final_time > 0 and n_slabs >= 1")
        return cls(np.linspace(0.0, final_time, n_slabs + 1))

    @property
    def final_time(self) -> float:
        return float(self.boundaries[-1])

    @property
    def n_slabs(self) -> int:
        return self.boundaries.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def refine(self, factor: int) -> "TimePartition":
        """Split every slab into `factor` equal parts."""
        b = self.boundaries
        steps = np.linspace(0.0, 1.0, factor + 1)[1:]
        fine = np.concatenate([[0.0], (b[:-1, None] + np.outer(np.diff(b), steps)).ravel()])
        fine[-1] = b[-1]
        return TimePartition(fine)

    def same_span(self, other: "TimePartition") -> bool:
        T = self.final_time
        return abs(T - other.final_time) <= _T_MATCH_RTOL * max(T, other.final_time)


@dataclass
class TraceFunction:
    """Piecewise-constant space-time data on a set of interface edges.

    values[m, e] is the value on slab m of `partition` at edge `edges[e]`.
    """

    partition: TimePartition
    edges: np.ndarray
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=int)
        if self.values is None:
            self.values = np.zeros((self.partition.n_slabs, self.edges.size))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.partition.n_slabs, self.edges.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"({self.partition.n_slabs}, {self.edges.size})"
            )

    def copy(self) -> "TraceFunction":
        return TraceFunction(self.partition, self.edges, self.values.copy())

    def dump_csv(self, path) -> None:
        """Debug dump: one row per (slab, edge)."""
        b = self.partition.boundaries
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slab_index", "t_begin", "t_end", "edge_index", "value"])
            for m in range(self.partition.n_slabs):
                for e, edge in enumerate(self.edges):
                    w.writerow([m, b[m], b[m + 1], int(edge), self.values[m, e]])


def _overlap_weights(src: TimePartition, dst: TimePartition):
    """Merged-interval sweep: lists of (dst_slab, src_slab, overlap_width).

    Single pass over both partitions, O(M_src + M_dst).
    """
    ts, td = src.boundaries, dst.boundaries
    eps = _T_MATCH_RTOL * max(ts[-1], td[-1])
    out_d, out_s, out_w = [], [], []
    i = j = 0
    lo = 0.0
    Ms, Md = src.n_slabs, dst.n_slabs
    while i < Ms and j < Md:
        hi = min(ts[i + 1], td[j + 1])
        if hi > lo:
            out_d.append(j)
            out_s.append(i)
            out_w.append(hi - lo)
        # advance whichever slab ends here (both, if the ends coincide)
        if ts[i + 1] <= hi + eps:
            i += 1
        if td[j + 1] <= hi + eps:
            j += 1
        lo = hi
    return np.array(out_d, dtype=int), np.array(out_s, dtype=int), np.array(out_w)


def project(source: TraceFunction, target_partition: TimePartition) -> TraceFunction:
    """L2-project a piecewise-constant-in-time trace onto another partition.

    On each target slab the result is the width-weighted average of the
    source values overlapping that slab.  Exactly conservative: the time
    integral per edge is preserved.
    """
    if not source.partition.same_span(target_partition):
        raise ValueError("source and target partitions must share the final time")
    if source.partition is target_partition or np.array_equal(
        source.partition.boundaries, target_partition.boundaries
    ):
        return TraceFunction(target_partition, source.edges, source.values.copy())
    d_idx, s_idx, w = _overlap_weights(source.partition, target_partition)
    out = np.zeros((target_partition.n_slabs, source.edges.size))
    np.add.at(out, d_idx, w[:, None] * source.values[s_idx])
    out /= target_partition.widths[:, None]
    return TraceFunction(target_partition, source.edges, out)


def integrate_in_time(f: TraceFunction) -> np.ndarray:
    """Per-edge time integral over (0, T]."""
    return f.partition.widths @ f.values
