"""Pay-as-Bid vs Pay-as-Clear energy market toolkit: exact mechanisms, equilibrium bounds and Hedge dynamics."""

from pbpc.errors import (
    BudgetExceededError,
    InfeasibleInstanceError,
    InvalidInputError,
    NonFiniteWeightError,
    PbpcError,
    ValidationError,
)
from pbpc.market import MarketInstance, Producer, allocate, clearing_price, validate_instance
from pbpc.mechanisms import Mechanism, Outcome, run_mechanism, utility

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "InfeasibleInstanceError",
    "InvalidInputError",
    "MarketInstance",
    "Mechanism",
    "NonFiniteWeightError",
    "Outcome",
    "PbpcError",
    "Producer",
    "ValidationError",
    "allocate",
    "clearing_price",
    "run_mechanism",
    "utility",
    "validate_instance",
]
