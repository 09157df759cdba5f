"""Numerical laboratory for extended backward stochastic Volterra integral
equations and the associated non-local parabolic PDE system."""

__version__ = "0.1.0"

from .catalog import catalog_names, get_instance
from .errors import (ConfigError, DomainError, EbsvieError,
                     NonContractionError, SimulationError, SingularityError,
                     SolverError)
from .model import (DiffusionTerm, DriftTerm, FreeTerm, GeneratorTerm,
                    ProblemSpec, ReductionClass, TimeGrid, TriangularIndex,
                    classify, make_grid, spec_from_dict, spec_to_dict,
                    validate_spec)
from .sde import PathEnsemble, malliavin_derivative, simulate_paths
from .solver_mc import (BasisSpec, TwoTimeField, evaluate_field_at,
                        glue_windows, picard_solve, solve_ebsvie_regression)
from .solver_pde import (PdeField, SpatialMesh, pde_residual,
                         representation_from_pde, solve_nonlocal_pde)
from .malliavin import (VariationalField, finite_diff_y, pathwise_z,
                        solve_variational_ebsvie)
from .validate import (CrossValReport, DeterministicField, adaptedness_probe,
                       continuity_probe, cross_validate, deterministic_oracle,
                       stability_probe)
