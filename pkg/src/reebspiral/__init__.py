"""Sub-Riemannian geodesics on contact 3-manifolds spiraling around Reeb orbits."""

__version__ = "0.1.0"

from .models import (ContactModel, ManifoldPoint, ModelError, TangentVec, Covec, builtin_model,
                     lie_bracket, reeb_vector, validate_model)
from .symplectic import (DEFAULT_CONFIG, CharacteristicDataError, IntegrationError,
                         IntegratorConfig, PhasePoint, Trajectory, geodesic, heisenberg_geodesic,
                         integrate)
from .reeb import (ReebOrbit, find_reeb_period, monodromy, periodic_orbit, reeb_flow,
                   transport_frame, transport_rate)
from .spiral import (RegimeError, adiabatic_scan, convergence_scan, fit_loglog,
                     spiral_prediction, spiral_run)
from .periodic import (PredictionError, length_spectrum, predicted_length, predicted_seed,
                       shoot_closed_geodesic)
from .polyalg import (HomPoly, a_operator, decompose, inner_product, poisson_uv,
                      solve_cohomological)

__all__ = [
    "ContactModel", "ManifoldPoint", "ModelError", "TangentVec", "Covec", "builtin_model",
    "lie_bracket", "reeb_vector", "validate_model",
    "DEFAULT_CONFIG", "CharacteristicDataError", "IntegrationError", "IntegratorConfig",
    "PhasePoint", "Trajectory", "geodesic", "heisenberg_geodesic", "integrate",
    "ReebOrbit", "find_reeb_period", "monodromy", "periodic_orbit", "reeb_flow",
    "transport_frame", "transport_rate",
    "RegimeError", "adiabatic_scan", "convergence_scan", "fit_loglog", "spiral_prediction",
    "spiral_run",
    "PredictionError", "length_spectrum", "predicted_length", "predicted_seed",
    "shoot_closed_geodesic",
    "HomPoly", "a_operator", "decompose", "inner_product", "poisson_uv", "solve_cohomological",
]
