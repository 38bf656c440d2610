"""Pure and mixed Nash-equilibrium verification and brute-force enumeration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from pbpc.errors import BudgetExceededError, InvalidInputError
from pbpc.market import Bids, MarketInstance, check_profile
from pbpc.mechanisms import Mechanism, run_mechanism, utility_segments

Weight = Union[Fraction, float]
Distribution = Mapping[int, Weight]
MixedProfile = tuple[dict[int, Weight], ...]

FLOAT_SUM_TOL = 1e-12
DEFAULT_PURE_BUDGET = 10**7
DEFAULT_MIXED_BUDGET = 10**6


@dataclass(frozen=True)
class NeReport:
    is_equilibrium: bool
    epsilon: Weight  # largest gain from a unilateral pure deviation
    worst_deviator: tuple[int, int] | None  # (agent, bid) attaining epsilon


def point_mass(bids: Bids) -> MixedProfile:
    return tuple({int(b): Fraction(1)} for b in bids)


def check_mixed_profile(inst: MarketInstance, sigma: Sequence[Distribution]) -> MixedProfile:
    """Validate and copy ``sigma``; zero-weight entries are dropped."""
    if len(sigma) != inst.n:
        raise InvalidInputError(f"mixed profile has {len(sigma)} entries for {inst.n} agents")
    out = []
    for i, dist in enumerate(sigma):
        clean = {int(b): w for b, w in dist.items() if w != 0}
        if not clean:
            raise InvalidInputError(f"agent {i}: empty distribution")
        for b, w in clean.items():
            if not 0 <= b <= inst.max_bid:
                raise InvalidInputError(f"agent {i}: bid {b} outside [0, {inst.max_bid}]")
            if w < 0:
                raise InvalidInputError(f"agent {i}: negative probability {w} on bid {b}")
        total = sum(clean.values())
        exact = all(isinstance(w, (int, Fraction)) for w in clean.values())
        if exact and total != 1:
            raise InvalidInputError(f"agent {i}: probabilities sum to {total}, not 1")
        if not exact and abs(float(total) - 1.0) > FLOAT_SUM_TOL:
            raise InvalidInputError(f"agent {i}: probabilities sum to {float(total)}, not 1")
        out.append(clean)
    return tuple(out)


def _support_product_size(sigma: MixedProfile, skip: int | None = None) -> int:
    return math.prod(len(d) for j, d in enumerate(sigma) if j != skip)


def deviation_payoffs(
    mech: Mechanism | str, inst: MarketInstance, sigma: MixedProfile, i: int
) -> list[Weight]:
    """Expected utility of agent ``i`` for every pure bid against ``sigma`` of the others."""
    den = inst.denominator
    exact = all(
        isinstance(w, (int, Fraction)) for j, d in enumerate(sigma) if j != i for w in d.values()
    )
    zero: Weight = Fraction(0) if exact else 0.0
    acc: list[Weight] = [zero] * (inst.max_bid + 1)
    others = [j for j in range(inst.n) if j != i]
    supports = [sorted(sigma[j].items()) for j in others]
    for combo in itertools.product(*supports):
        prob: Weight = Fraction(1) if exact else 1.0
        bids = [0] * inst.n
        for j, (b, w) in zip(others, combo):
            bids[j] = b
            prob *= w
        for seg in utility_segments(mech, inst, bids, i):
            for v in range(seg.lo, seg.hi + 1):
                val = seg.value(v)
                if val:
                    acc[v] += prob * (Fraction(val, den) if exact else val / den)
    return acc


def is_mixed_ne(
    mech: Mechanism | str,
    inst: MarketInstance,
    sigma: Sequence[Distribution],
    tolerance: Weight = 0,
    budget: int = DEFAULT_MIXED_BUDGET,
) -> NeReport:
    """Exact check that no agent gains more than ``tolerance`` by a pure deviation.

    Expectations enumerate the full support product; beyond ``budget``
    profiles use :func:`estimate_mixed_ne_gain` instead.
    """
    sigma = check_mixed_profile(inst, sigma)
    size = _support_product_size(sigma)
    if size > budget:
        raise BudgetExceededError(
            f"support product {size} exceeds budget {budget}; use Monte Carlo estimation"
        )
    eps: Weight = Fraction(0)
    worst: tuple[int, int] | None = None
    for i in range(inst.n):
        dev = deviation_payoffs(mech, inst, sigma, i)
        current = sum((w * dev[b] for b, w in sigma[i].items()), Fraction(0))
        best = max(dev)
        gain = best - current
        if gain > eps:
            eps = gain
            worst = (i, dev.index(best))
    return NeReport(is_equilibrium=eps <= tolerance, epsilon=eps, worst_deviator=worst)


def _lowest_argmax(segs) -> tuple[int, int]:
    """Maximum scaled utility over the segments and the lowest bid attaining it."""
    best, arg = None, None
    for sg in segs:
        for v in (sg.lo, sg.hi):
            val = sg.value(v)
            if best is None or val > best or (val == best and v < arg):
                best, arg = val, v
    return best, arg


def is_pure_ne(
    mech: Mechanism | str, inst: MarketInstance, bids: Bids, tolerance: Weight = 0
) -> NeReport:
    check_profile(inst, bids)
    den = inst.denominator
    eps_scaled = 0
    worst: tuple[int, int] | None = None
    for i in range(inst.n):
        segs = utility_segments(mech, inst, bids, i)
        here = next(sg.value(bids[i]) for sg in segs if sg.lo <= bids[i] <= sg.hi)
        best, arg = _lowest_argmax(segs)
        if best - here > eps_scaled:
            eps_scaled = best - here
            worst = (i, arg)
    eps = Fraction(eps_scaled, den)
    return NeReport(is_equilibrium=eps <= tolerance, epsilon=eps, worst_deviator=worst)


def enumerate_pure_ne(
    mech: Mechanism | str, inst: MarketInstance, budget: int = DEFAULT_PURE_BUDGET
) -> list[tuple[int, ...]]:
    """Every pure equilibrium, in lexicographic order of the bid profile."""
    mech = Mechanism.parse(mech)
    size = (inst.max_bid + 1) ** inst.n
    if size > budget:
        raise BudgetExceededError(f"(M+1)^n = {size} profiles exceeds budget {budget}")
    bid_range = range(inst.max_bid + 1)
    # best-reply sets per agent and opponent profile
    ok: list[dict[tuple[int, ...], frozenset[int]]] = []
    for i in range(inst.n):
        table: dict[tuple[int, ...], frozenset[int]] = {}
        for opp in itertools.product(bid_range, repeat=inst.n - 1):
            bids = list(opp[:i]) + [0] + list(opp[i:])
            segs = utility_segments(mech, inst, bids, i)
            top = max(max(sg.value(sg.lo), sg.value(sg.hi)) for sg in segs)
            best = set()
            for sg in segs:
                if sg.slope == 0:
                    if sg.intercept == top:
                        best.update(range(sg.lo, sg.hi + 1))
                else:
                    best.update(v for v in (sg.lo, sg.hi) if sg.value(v) == top)
            table[opp] = frozenset(best)
        ok.append(table)
    found = []
    for prof in itertools.product(bid_range, repeat=inst.n):
        if all(prof[i] in ok[i][prof[:i] + prof[i + 1 :]] for i in range(inst.n)):
            found.append(prof)
    return found


def expected_unit_price(
    mech: Mechanism | str, inst: MarketInstance, sigma: Sequence[Distribution]
) -> Weight:
    sigma = check_mixed_profile(inst, sigma)
    total: Weight = Fraction(0)
    for combo in itertools.product(*(sorted(d.items()) for d in sigma)):
        prob: Weight = Fraction(1)
        for _, w in combo:
            prob *= w
        total += prob * run_mechanism(mech, inst, [b for b, _ in combo]).unit_price
    return total


@dataclass(frozen=True)
class MonteCarloReport:
    epsilon: float
    stderr: float
    samples: int
    worst_deviator: tuple[int, int] | None


def estimate_mixed_ne_gain(
    mech: Mechanism | str,
    inst: MarketInstance,
    sigma: Sequence[Distribution],
    samples: int,
    seed: int = 0,
) -> MonteCarloReport:
    """Sampled estimate of the largest deviation gain, for support products too big to enumerate.

    The reported ``stderr`` belongs to the gain of the worst agent/bid pair.
    """
    sigma = check_mixed_profile(inst, sigma)
    rng = np.random.default_rng(seed)
    bids_by_agent = [np.array(sorted(d)) for d in sigma]
    probs_by_agent = [np.array([float(d[b]) for b in sorted(d)]) for d in sigma]
    draws = np.stack(
        [rng.choice(b, size=samples, p=p / p.sum()) for b, p in zip(bids_by_agent, probs_by_agent)],
        axis=1,
    )
    from pbpc.mechanisms import counterfactual_utilities_array

    best = (-math.inf, 0.0, None)
    for i in range(inst.n):
        rows = np.stack([counterfactual_utilities_array(mech, inst, row, i) for row in draws])
        own = rows[np.arange(samples), draws[:, i]]
        gains = rows - own[:, None]
        means = gains.mean(axis=0)
        v = int(np.argmax(means))
        se = float(gains[:, v].std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
        if means[v] > best[0]:
            best = (float(means[v]), se, (i, v))
    eps, se, worst = best
    return MonteCarloReport(epsilon=max(eps, 0.0), stderr=se, samples=samples, worst_deviator=worst)
