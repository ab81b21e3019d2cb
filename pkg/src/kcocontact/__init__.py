"""Pointwise geometry, field equations and desk-scale integrators for
non-autonomous dissipative field theories with k independent variables."""

from .autodiff import ScalarField, eval_grad, eval_hess, fd_check
from .dynamics import GridSection, el_residual, hdw_residual, prolong, sopde_residual
from .geometry import CanonicalStructure, FormsAtPoint, rank_of, solve_reeb, verify_axioms
from .hamiltonian import HamiltonianSystem, KVectorCoeffs, canonical_kvector, hdw_determined, verify_kvector
from .integrators import WaveConfig, integrate_k1, integrate_wave
from .lagrangian import LagrangianSystem, assemble_holonomic
from .phase import HAMILTONIAN, LAGRANGIAN, PhasePoint, Signature
from .suspension import KContactSystem, is_autonomous, project, suspend

__all__ = [
    "CanonicalStructure",
    "FormsAtPoint",
    "GridSection",
    "HAMILTONIAN",
    "HamiltonianSystem",
    "KContactSystem",
    "KVectorCoeffs",
    "LAGRANGIAN",
    "LagrangianSystem",
    "PhasePoint",
    "ScalarField",
    "Signature",
    "WaveConfig",
    "assemble_holonomic",
    "canonical_kvector",
    "el_residual",
    "eval_grad",
    "eval_hess",
    "fd_check",
    "hdw_determined",
    "hdw_residual",
    "integrate_k1",
    "integrate_wave",
    "is_autonomous",
    "project",
    "prolong",
    "rank_of",
    "solve_reeb",
    "sopde_residual",
    "suspend",
    "verify_axioms",
    "verify_kvector",
]
