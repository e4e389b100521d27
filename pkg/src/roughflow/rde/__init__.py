from .expr import ExprSyntaxError, Poly, parse, poly_to_text, to_poly, to_text
from .fields import VectorFieldSet, lie_bracket, linear_field, lyndon_words, parse_vector_field, standard_bracketing
from .solver import (
    LogODEGenerator,
    NotLieElement,
    SolverBlowUp,
    Trajectory,
    integral_residual,
    log_ode_step,
    milstein_step,
    ode_solve_piecewise_linear,
    perturbed_driver,
    solve_flow,
    solve_inverse_flow,
    solve_path,
)
