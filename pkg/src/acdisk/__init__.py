"""Allen-Cahn dynamics on a disk with Neumann walls, plus the geometric
diagnostics used to probe the sharp-interface limit: energy/discrepancy
measures, reflected backward heat kernels and their monotonicity ledger,
discrete varifolds with first variation, interface extraction and contact
angles."""

from .grid import PolarGrid, ScalarField, pairwise_sum, read_snapshot, write_snapshot
from .potential import PotentialSpec, StandingWave, eval_potential, surface_tension
from .geometry import CutoffEta, DiskGeometry
from .solver import SolverConfig, State, init_well_prepared, run, step
from .measures import MeasureFields, measure_fields
from .kernels import KernelPoint, MonotonicityReport
from .varifold import DiscreteVarifold, build_varifold

__all__ = [
    "PolarGrid", "ScalarField", "pairwise_sum", "read_snapshot", "write_snapshot",
    "PotentialSpec", "StandingWave", "eval_potential", "surface_tension",
    "CutoffEta", "DiskGeometry",
    "SolverConfig", "State", "init_well_prepared", "run", "step",
    "MeasureFields", "measure_fields",
    "KernelPoint", "MonotonicityReport",
    "DiscreteVarifold", "build_varifold",
]
