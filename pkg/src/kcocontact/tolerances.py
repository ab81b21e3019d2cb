"""Central numerical defaults.

Every threshold used by the checks lives here so acceptance runs and the CLI
share one source of truth. CLI configs may override any field.
"""

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # derivative oracle
    fd_step: float = 1e-5
    fd_rtol: float = 1e-6
    # singular values below rank_rtol * sigma_max count as zero
    rank_rtol: float = 1e-10
    reeb_residual: float = 1e-9
    # fiber Hessian regular iff condition number below this
    regular_cond: float = 1e12
    newton_max_iter: int = 50
    newton_residual: float = 1e-10
    kvector_residual: float = 1e-10
    lie_fd_step: float = 1e-5
    lie_residual: float = 1e-6
    autonomy: float = 1e-12
    holonomy: float = 1e-2
    section_residual: float = 1e-2
    cfl_safety: float = 0.5

    def override(self, **changes):
        known = {f.name for f in fields(self)}
        for key, value in changes.items():
            if key not in known:
                raise KeyError(key)
            if not value > 0:
                raise ValueError(f"tolerance {key} must be positive")
        return replace(self, **changes)


DEFAULTS = Tolerances()
