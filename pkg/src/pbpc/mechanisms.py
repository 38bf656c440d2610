"""Pay-as-Bid, Pay-as-Clear and VCG pricing on top of the merit-order allocation.

Besides the per-profile rules, this module provides a counterfactual sweep:
the utility of one agent for every bid ``0..M`` against fixed opponents,
computed from the opponents' sorted order instead of ``M + 1`` separate
allocations. The sweep is expressed as a short list of affine segments so
that exact (``Fraction``) and fast (``numpy``) renderings share one code path.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from pbpc.errors import InvalidInputError
from pbpc.market import (
    Bids,
    MarketInstance,
    _require_feasible,
    allocate,
    check_profile,
    clearing_price,
    merit_order,
)


class Mechanism(str, Enum):
    PB = "pb"
    PC = "pc"
    VCG = "vcg"

    @classmethod
    def parse(cls, value: str | Mechanism) -> Mechanism:
        if isinstance(value, Mechanism):
            return value
        key = value.strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "pb": cls.PB,
            "payasbid": cls.PB,
            "pc": cls.PC,
            "payasclear": cls.PC,
            "vcg": cls.VCG,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidInputError(f"unknown mechanism {value!r}") from None


@dataclass(frozen=True)
class Outcome:
    allocation: tuple[Fraction, ...]
    prices: tuple[Fraction, ...]
    clearing_price: int
    unit_price: Fraction


def _residual_cost(inst: MarketInstance, bids: Bids, exclude: int) -> Fraction:
    """Cost of covering demand without agent ``exclude``; any shortfall costs M per unit."""
    remaining = Fraction(1)
    cost = Fraction(0)
    for j in merit_order(bids):
        if j == exclude:
            continue
        if remaining == 0:
            break
        take = min(inst.producers[j].supply, remaining)
        cost += take * bids[j]
        remaining -= take
    return cost + remaining * inst.max_bid


def vcg_prices(inst: MarketInstance, bids: Bids) -> tuple[Fraction, ...]:
    """Per-unit VCG prices: each seller's externality divided by its allocation."""
    x = allocate(inst, bids)
    prices = []
    for i in range(inst.n):
        if x[i] == 0:
            prices.append(Fraction(0))
            continue
        with_i = sum((x[j] * bids[j] for j in range(inst.n) if j != i), Fraction(0))
        without_i = _residual_cost(inst, bids, exclude=i)
        prices.append((without_i - with_i) / x[i])
    return tuple(prices)


def run_mechanism(mech: Mechanism | str, inst: MarketInstance, bids: Bids) -> Outcome:
    mech = Mechanism.parse(mech)
    x = allocate(inst, bids)
    q = clearing_price(inst, bids)
    if mech is Mechanism.PB:
        prices = tuple(Fraction(b) for b in bids)
    elif mech is Mechanism.PC:
        prices = tuple(Fraction(q) for _ in bids)
    else:
        prices = vcg_prices(inst, bids)
    unit = sum((xi * pi for xi, pi in zip(x, prices)), Fraction(0))
    return Outcome(allocation=x, prices=prices, clearing_price=q, unit_price=unit)


def utility(mech: Mechanism | str, inst: MarketInstance, bids: Bids, i: int) -> Fraction:
    out = run_mechanism(mech, inst, bids)
    return (out.prices[i] - inst.producers[i].cost) * out.allocation[i]


# -- counterfactual sweep ----------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """On bids ``lo..hi`` the utility times the instance denominator is ``slope*v + intercept``."""

    lo: int
    hi: int
    slope: int
    intercept: int

    def value(self, v: int) -> int:
        return self.slope * v + self.intercept


def utility_segments(
    mech: Mechanism | str, inst: MarketInstance, bids: Bids, i: int
) -> list[Segment]:
    """Affine pieces of agent ``i``'s utility over its own bid; ``bids[i]`` is ignored.

    Position ``k`` means agent ``i`` sits right after the first ``k`` opponents
    of the merit order. Inside a position the allocation is fixed, so the
    utility is affine in the agent's own bid.
    """
    mech = Mechanism.parse(mech)
    _require_feasible(inst)
    if not 0 <= i < inst.n:
        raise InvalidInputError(f"agent index {i} out of range")
    if len(bids) != inst.n:
        raise InvalidInputError(f"profile has {len(bids)} bids for {inst.n} agents")
    for j, b in enumerate(bids):
        if j != i and not 0 <= b <= inst.max_bid:
            raise InvalidInputError(f"agent {j}: bid {b} outside [0, {inst.max_bid}]")

    big_m = inst.max_bid
    d = inst.denominator
    s = inst.scaled_supplies
    s_i = s[i]
    c_i = inst.producers[i].cost
    opps = sorted((bids[j], j) for j in range(inst.n) if j != i)
    n_opp = len(opps)

    prefix = [0] * (n_opp + 1)
    cum_cost = [0] * (n_opp + 1)
    for k, (b, j) in enumerate(opps):
        prefix[k + 1] = prefix[k] + s[j]
        cum_cost[k + 1] = cum_cost[k] + b * s[j]

    # first opponent count t with prefix[t] + s_i >= d; it prices full sales
    pivot_count = next(t for t in range(n_opp + 1) if prefix[t] + s_i >= d)
    full_sale_price = opps[pivot_count - 1][0] if pivot_count > 0 else None

    def opp_cost(amount: int) -> int:
        # cheapest cost of ``amount`` (scaled) from opponents, shortfall at M
        if amount >= prefix[-1]:
            return cum_cost[-1] + big_m * (amount - prefix[-1])
        k = bisect.bisect_right(prefix, amount) - 1
        return cum_cost[k] + opps[k][0] * (amount - prefix[k])

    cost_without = opp_cost(d) if mech is Mechanism.VCG else 0

    segments: list[Segment] = []
    for k in range(n_opp + 1):
        if k == 0:
            lo = 0
        else:
            pb, pj = opps[k - 1]
            lo = pb if pj < i else pb + 1
        if k == n_opp:
            hi = big_m
        else:
            nb, nj = opps[k]
            hi = nb if nj > i else nb - 1
        lo, hi = max(lo, 0), min(hi, big_m)
        if lo > hi:
            continue

        if prefix[k] >= d:
            x, pivotal = 0, False
        elif prefix[k] + s_i >= d:
            x, pivotal = d - prefix[k], True
        else:
            x, pivotal = s_i, False

        if x == 0:
            seg = Segment(lo, hi, 0, 0)
        elif mech is Mechanism.VCG:
            seg = Segment(lo, hi, 0, cost_without - opp_cost(d - x) - c_i * x)
        elif mech is Mechanism.PB or pivotal:
            seg = Segment(lo, hi, x, -c_i * x)
        else:
            seg = Segment(lo, hi, 0, (full_sale_price - c_i) * x)
        segments.append(seg)
    return segments


def counterfactual_utilities(
    mech: Mechanism | str, inst: MarketInstance, bids: Bids, i: int
) -> list[Fraction]:
    """Exact utility of agent ``i`` for every own bid ``0..M``; ``bids[i]`` is ignored."""
    d = inst.denominator
    out: list[Fraction] = [Fraction(0)] * (inst.max_bid + 1)
    for seg in utility_segments(mech, inst, bids, i):
        for v in range(seg.lo, seg.hi + 1):
            out[v] = Fraction(seg.value(v), d)
    return out


def counterfactual_utilities_array(
    mech: Mechanism | str, inst: MarketInstance, bids: Bids, i: int
) -> np.ndarray:
    """Floating-point rendering of :func:`counterfactual_utilities`."""
    d = inst.denominator
    segs = utility_segments(mech, inst, bids, i)
    out = np.arange(inst.max_bid + 1, dtype=float)
    for seg in segs:
        part = out[seg.lo : seg.hi + 1]
        part *= seg.slope / d
        part += seg.intercept / d
    return out


def segments_max(segments: list[Segment]) -> int:
    """Maximum scaled utility over all bids covered by ``segments``."""
    return max(max(seg.value(seg.lo), seg.value(seg.hi)) for seg in segments)


def unit_price(mech: Mechanism | str, inst: MarketInstance, bids: Bids) -> Fraction:
    """Exact unit price; PB and PC avoid building the full :class:`Outcome`."""
    mech = Mechanism.parse(mech)
    if mech is Mechanism.VCG:
        return run_mechanism(mech, inst, bids).unit_price
    _require_feasible(inst)
    check_profile(inst, bids)
    d = inst.denominator
    s = inst.scaled_supplies
    remaining = d
    paid = 0
    for j in merit_order(bids):
        take = min(s[j], remaining)
        remaining -= take
        paid += take * bids[j]
        if remaining == 0:
            return Fraction(paid if mech is Mechanism.PB else bids[j] * d, d)
    raise AssertionError("unreachable: feasible instance always has a pivot")


__all__ = [
    "Mechanism",
    "Outcome",
    "Segment",
    "check_profile",
    "counterfactual_utilities",
    "counterfactual_utilities_array",
    "run_mechanism",
    "segments_max",
    "unit_price",
    "utility",
    "utility_segments",
    "vcg_prices",
]
