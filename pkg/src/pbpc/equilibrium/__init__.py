"""Best responses, price bounds and Nash-equilibrium search and verification."""

from pbpc.equilibrium.bounds import (
    BHigh,
    BoundsReport,
    Deviation,
    b_high,
    b_high_witness,
    b_low,
    best_response_max,
    best_response_set,
    bounds_summary,
    construct_pc_pure_ne,
    pc_pure_price,
    refined_pb_upper_bound,
    truthful_manipulability,
    truthful_max_utility,
)
from pbpc.equilibrium.nash import (
    MonteCarloReport,
    NeReport,
    check_mixed_profile,
    deviation_payoffs,
    enumerate_pure_ne,
    estimate_mixed_ne_gain,
    expected_unit_price,
    is_mixed_ne,
    is_pure_ne,
    point_mass,
)
from pbpc.equilibrium.support import enumerate_mixed_ne_2p, iterated_dominance, payoff_matrices
