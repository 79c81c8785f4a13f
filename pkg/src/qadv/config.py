"""Central tolerance configuration.

Every numerical routine in the package reads its thresholds from a
:class:`Tolerances` record instead of hardcoding them, so a single override
propagates consistently through validation, solvers and certificates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # validation of operator types
    hermiticity: float = 1e-12          # relative, scaled by (1 + max|entry|)
    state_trace: float = 1e-10
    state_psd: float = 1e-10
    unitarity: float = 1e-10
    orthonormality: float = 1e-10
    povm_element_psd: float = 1e-10
    povm_sum: float = 1e-9
    subchannel_contraction: float = 1e-10
    instrument_sum: float = 1e-9

    # eigensolver conventions
    degenerate_gap: float = 1e-9
    eig_residual: float = 1e-9

    # witness feasibility
    witness_psd: float = 1e-9
    witness_support: float = 1e-7

    # robustness solver
    duality_gap: float = 1e-5
    feasibility_slack: float = 1e-9
    bisection_width: float = 1e-8
    membership: float = 1e-6
    combination_residual: float = 1e-9
    fw_max_iter: int = 5000
    dykstra_max_cycles: int = 5000
    dykstra_stall: float = 1e-7
    dykstra_stall_rounds: int = 200
    tau_clip: float = 1e-8
    tau_clip_mass: float = 1e-6
    ppt_support_width: float = 1e-7

    # discrimination engine
    povm_optimality: float = 1e-8
    povm_dual_gap: float = 1e-6
    povm_max_iter: int = 5000

    def replace(self, **overrides) -> "Tolerances":
        return dataclasses.replace(self, **overrides)


DEFAULT_TOLS = Tolerances()
