"""Energy market instances and the cost-minimizing allocation rule.

Demand is normalized to one unit. Agents are indexed from 0 in this API; the
merit order sorts agents by ascending bid and breaks ties by lower index.
All quantities are exact: supplies and allocations are ``Fraction`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from pbpc.errors import InfeasibleInstanceError, InvalidInputError

Bids = Sequence[int]


@dataclass(frozen=True)
class Producer:
    supply: Fraction
    cost: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "supply", Fraction(self.supply))
        object.__setattr__(self, "cost", int(self.cost))


@dataclass(frozen=True)
class MarketInstance:
    """A set of producers plus the bid ceiling ``max_bid`` (bids live in 0..max_bid).

    Construction never rejects out-of-range values; call
    :func:`validate_instance` to get the full list of problems.
    """

    name: str
    max_bid: int
    producers: tuple[Producer, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "producers", tuple(self.producers))
        object.__setattr__(self, "max_bid", int(self.max_bid))

    @classmethod
    def from_lists(
        cls,
        supplies: Sequence[Fraction | int | str],
        costs: Sequence[int],
        max_bid: int,
        name: str = "instance",
    ) -> MarketInstance:
        if len(supplies) != len(costs):
            raise InvalidInputError("supplies and costs differ in length")
        producers = tuple(Producer(Fraction(s), c) for s, c in zip(supplies, costs))
        return cls(name=name, max_bid=max_bid, producers=producers)

    @property
    def n(self) -> int:
        return len(self.producers)

    @property
    def supplies(self) -> tuple[Fraction, ...]:
        return tuple(p.supply for p in self.producers)

    @property
    def costs(self) -> tuple[int, ...]:
        return tuple(p.cost for p in self.producers)

    @cached_property
    def total_supply(self) -> Fraction:
        return sum(self.supplies, Fraction(0))

    @cached_property
    def denominator(self) -> int:
        """Least common denominator of all supplies (and of the unit demand)."""
        return math.lcm(1, *(s.denominator for s in self.supplies))

    @cached_property
    def scaled_supplies(self) -> tuple[int, ...]:
        """Supplies as integers over :attr:`denominator`."""
        d = self.denominator
        return tuple(s.numerator * (d // s.denominator) for s in self.supplies)

    def truthful(self) -> tuple[int, ...]:
        """The profile where every agent bids its cost."""
        return self.costs


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.problems


def validate_instance(inst: MarketInstance) -> ValidationReport:
    """Collect every violation of the market-model constraints. Never raises."""
    problems: list[str] = []
    if inst.n == 0:
        problems.append("instance has no producers")
    if inst.max_bid < 0:
        problems.append(f"max_bid {inst.max_bid} is negative")
    for i, p in enumerate(inst.producers):
        if not 0 < p.supply <= 1:
            problems.append(f"agent {i}: supply {p.supply} outside (0, 1]")
        if p.cost < 0:
            problems.append(f"agent {i}: cost {p.cost} is negative")
        elif p.cost > inst.max_bid:
            problems.append(f"agent {i}: cost {p.cost} exceeds bid ceiling {inst.max_bid}")
    if inst.n and inst.total_supply < 1:
        problems.append(f"total supply {inst.total_supply} < 1 cannot cover demand")
    return ValidationReport(tuple(problems))


def check_profile(inst: MarketInstance, bids: Bids) -> None:
    if len(bids) != inst.n:
        raise InvalidInputError(f"profile has {len(bids)} bids for {inst.n} agents")
    for i, b in enumerate(bids):
        if not 0 <= b <= inst.max_bid:
            raise InvalidInputError(f"agent {i}: bid {b} outside [0, {inst.max_bid}]")


def _check_index(n: int, i: int) -> None:
    if not 0 <= i < n:
        raise InvalidInputError(f"agent index {i} out of range for {n} agents")


def precedes(bids: Bids, i: int, j: int) -> bool:
    """True when agent ``i`` comes before agent ``j`` in the merit order."""
    _check_index(len(bids), i)
    _check_index(len(bids), j)
    if i == j:
        raise InvalidInputError("precedes needs two distinct agents")
    return (bids[i], i) < (bids[j], j)


def merit_order(bids: Bids) -> list[int]:
    """Agents sorted by ascending bid, lower index first on ties."""
    return sorted(range(len(bids)), key=lambda j: (bids[j], j))


def _require_feasible(inst: MarketInstance) -> None:
    if inst.n == 0 or inst.total_supply < 1:
        raise InfeasibleInstanceError(
            f"{inst.name}: total supply {inst.total_supply} cannot cover demand 1"
        )


def pivotal_agent(inst: MarketInstance, bids: Bids) -> int:
    """First agent in merit order whose cumulative supply reaches the demand."""
    _require_feasible(inst)
    check_profile(inst, bids)
    d = inst.denominator
    s = inst.scaled_supplies
    covered = 0
    for j in merit_order(bids):
        covered += s[j]
        if covered >= d:
            return j
    raise AssertionError("unreachable: feasible instance always has a pivot")


def clearing_price(inst: MarketInstance, bids: Bids) -> int:
    return bids[pivotal_agent(inst, bids)]


def allocate(inst: MarketInstance, bids: Bids) -> tuple[Fraction, ...]:
    """Cost-minimizing allocation: fill demand greedily along the merit order."""
    _require_feasible(inst)
    check_profile(inst, bids)
    amounts = [Fraction(0)] * inst.n
    remaining = Fraction(1)
    for j in merit_order(bids):
        if remaining == 0:
            break
        take = min(inst.producers[j].supply, remaining)
        amounts[j] = take
        remaining -= take
    return tuple(amounts)


def eligible_agents(inst: MarketInstance) -> list[int]:
    """Agents that weakly precede the pivotal agent of the truthful profile."""
    truthful = inst.truthful()
    order = merit_order(truthful)
    pivot = pivotal_agent(inst, truthful)
    return sorted(order[: order.index(pivot) + 1])
