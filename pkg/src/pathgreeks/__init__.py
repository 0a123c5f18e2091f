"""Monte-Carlo Greeks for path-dependent payoffs under jump-diffusions."""
from .errors import (
    ConfigError,
    DiffusionDegeneracyError,
    InvalidArgumentError,
    InvalidDirectionError,
    ModelInvalidError,
    NumericalError,
    PathGreeksError,
    SimulationOverflowError,
)
from .pathspace import Path, QVSeries, TimeGrid, make_grid, quadratic_variation, stop_path, vertical_perturb
from .payoffs import PayoffSpec, evaluate_payoff
from .simulate import (
    JumpSpec,
    ModelSpec,
    SimConfig,
    additive_model,
    black_scholes,
    simulate_batch,
    table_model,
    validate_model,
)
from .greeks import (
    GreekEstimate,
    VegaDirection,
    estimate_bs_greeks,
    estimate_delta_weight,
    estimate_fd_greek,
    estimate_gamma_weight,
    estimate_price,
    estimate_vega_weight,
    gamma_weight,
)

__version__ = "0.1.0"
