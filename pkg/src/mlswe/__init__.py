"""Energy-stable well-balanced finite difference schemes for the multi-layer
shallow water equations on fixed and adaptive moving meshes."""
from .model import ConfigError, DryStateError, LayerSystem, StructuredGrid
from .solver_fixed import FixedSolver, Scheme
from .movingmesh import MeshTanglingError, MovingSolver
from .cases import get_case, case_names

__all__ = ["ConfigError", "DryStateError", "LayerSystem", "StructuredGrid", "FixedSolver", "Scheme",
           "MeshTanglingError", "MovingSolver", "get_case", "case_names"]
__version__ = "0.1.0"
