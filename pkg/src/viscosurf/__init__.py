"""Min-max minimal surfaces in the 3-sphere by viscous relaxation of area.

Discrete immersions of closed surfaces into S^3, the relaxed energy
area + sigma^2 * integral (1 + |II|^2)^p with exact gradients, critical
point search by preconditioned descent, mountain-pass min-max over
sweep-outs with entropy-based continuation in sigma, and varifold-style
diagnostics (density monotonicity, quantization, necks, integer density).
"""

__version__ = "0.1.0"

from .ambient import S3, AmbientSphere
from .geometry import EnergyBreakdown, energies, gauss_map, ii_squared, mean_curvature
from .mesh import DiscreteImmersion, ParamMesh, generate, load, refine, save
from .minmax import SweepOut, latitude_sweepout, minmax_critical, pull_down, struwe_continuation, width
from .flow import CriticalPointResult, FlowOptions, descend, ps_probe
from .variation import dual_residual, fd_check, finsler_norm, grad_area, grad_fp, grad_relaxed

__all__ = [
    "S3", "AmbientSphere", "DiscreteImmersion", "ParamMesh",
    "EnergyBreakdown", "CriticalPointResult", "FlowOptions", "SweepOut",
    "generate", "load", "refine", "save", "energies", "gauss_map",
    "ii_squared", "mean_curvature", "grad_area", "grad_fp", "grad_relaxed",
    "dual_residual", "finsler_norm", "fd_check", "descend", "ps_probe",
    "latitude_sweepout", "width", "pull_down", "minmax_critical",
    "struwe_continuation",
]
