"""Numerical tolerances shared by every module.

Everything that compares floats reads its threshold from :data:`DEFAULT`
unless a caller passes its own :class:`Tolerances`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    simplex_sum: float = 1e-9        # |sum(x) - 1| for mixed actions
    distribution: float = 1e-9       # signal-law rows
    lp_feasibility: float = 1e-9
    lp_optimality: float = 1e-9
    lp_pivot: float = 1e-11
    lp_report: float = 1e-7          # post-solve constraint recheck
    projection: float = 1e-8         # Dykstra stopping rule
    projection_max_sweeps: int = 10_000
    unit_norm: float = 1e-9
    flag: float = 1e-7               # flag comparisons / fiber residuals
    flag_repair: float = 1e-6        # largest l1 gap silently repaired
    vertex_dedup: float = 1e-7
    inside_target: float = 1e-9      # "average already in the target"
    condition: float = 1e-7          # verdict threshold for margins

    def with_(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT = Tolerances()
