"""Best responses under Pay-as-Clear and the price bounds built from them.

``b_high(i)`` is the largest best-response bid of agent ``i`` when every
opponent bids its cost or its cost plus one; ``b_low(i)`` is the smallest
integer price at which selling the full supply matches what the agent can
guarantee against truthful opponents. Maxima of both over the agents that
weakly precede the truthful pivot bound the equilibrium unit prices of PC
and PB.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal

from pbpc.errors import BudgetExceededError, InvalidInputError
from pbpc.market import Bids, MarketInstance, eligible_agents, pivotal_agent
from pbpc.mechanisms import (
    Mechanism,
    counterfactual_utilities,
    segments_max,
    utility_segments,
)

BHighMethod = Literal["auto", "exhaustive", "clustered"]

EXHAUSTIVE_AUTO_LIMIT = 12  # opponents; 2**12 best-response sweeps
DEFAULT_MAX_AGENTS = 20
DEFAULT_CLUSTER_BUDGET = 1 << 20


def best_response_set(inst: MarketInstance, i: int, bids: Bids) -> frozenset[int]:
    """Pay-as-Clear best responses of agent ``i``; ``{cost}`` when nothing is profitable."""
    segs = utility_segments(Mechanism.PC, inst, bids, i)
    top = segments_max(segs)
    if top <= 0:
        return frozenset({inst.producers[i].cost})
    out: set[int] = set()
    for seg in segs:
        if seg.slope == 0:
            if seg.intercept == top:
                out.update(range(seg.lo, seg.hi + 1))
        else:
            for v in (seg.lo, seg.hi):
                if seg.value(v) == top:
                    out.add(v)
    return frozenset(out)


def best_response_max(inst: MarketInstance, i: int, bids: Bids) -> int:
    """Largest element of :func:`best_response_set` without materializing it."""
    segs = utility_segments(Mechanism.PC, inst, bids, i)
    top = segments_max(segs)
    if top <= 0:
        return inst.producers[i].cost
    best = -1
    for seg in segs:
        if seg.value(seg.hi) == top:
            best = max(best, seg.hi)
        elif seg.value(seg.lo) == top:
            best = max(best, seg.lo)
    return best


def _perturbed(inst: MarketInstance, i: int, d: dict[int, int]) -> list[int]:
    big_m = inst.max_bid
    return [
        inst.producers[i].cost if j == i else min(p.cost + d.get(j, 0), big_m)
        for j, p in enumerate(inst.producers)
    ]


@dataclass(frozen=True)
class BHigh:
    value: int
    perturbation: tuple[int, ...]  # 0/1 per agent; the entry of the agent itself is 0

    def profile(self, inst: MarketInstance) -> tuple[int, ...]:
        """Opponents at cost plus perturbation (clamped at M), the agent at ``value``."""
        bids = [min(p.cost + dj, inst.max_bid) for p, dj in zip(inst.producers, self.perturbation)]
        return tuple(bids)


def _b_high_exhaustive(inst: MarketInstance, i: int) -> BHigh:
    others = [j for j in range(inst.n) if j != i]
    best: BHigh | None = None
    for bits in itertools.product((0, 1), repeat=len(others)):
        d = dict(zip(others, bits))
        v = best_response_max(inst, i, _perturbed(inst, i, d))
        if best is None or v > best.value:
            best = BHigh(v, tuple(d.get(j, 0) for j in range(inst.n)))
    assert best is not None
    return best


# -- exact decomposition for many agents --------------------------------------
#
# Opponents are split into clusters whose costs are at least 3 apart. A
# perturbation cannot reorder agents of different clusters, and each
# candidate best response (the top bid of a position in the merit order)
# depends only on the cluster holding the next opponent. Inside a cluster,
# agents with equal (supply, cost, side of i) are interchangeable, so only
# the number of perturbed agents per such group matters.


def _clusters(inst: MarketInstance, i: int) -> list[list[int]]:
    opps = sorted((j for j in range(inst.n) if j != i), key=lambda j: (inst.producers[j].cost, j))
    clusters: list[list[int]] = []
    for j in opps:
        if clusters and inst.producers[j].cost - inst.producers[clusters[-1][-1]].cost <= 2:
            clusters[-1].append(j)
        else:
            clusters.append([j])
    return clusters


def _cluster_assignments(inst: MarketInstance, i: int, members: list[int]) -> Iterator[dict[int, int]]:
    groups: dict[tuple, list[int]] = defaultdict(list)
    for j in members:
        p = inst.producers[j]
        groups[(p.supply, p.cost, j < i)].append(j)
    group_list = [sorted(g) for g in groups.values()]
    ranges = [
        range(1) if inst.producers[g[0]].cost >= inst.max_bid else range(len(g) + 1)
        for g in group_list
    ]
    for counts in itertools.product(*ranges):
        d: dict[int, int] = {}
        for g, t in zip(group_list, counts):
            for j in g[:t]:
                d[j] = 1
        yield d


def _cluster_assignment_count(inst: MarketInstance, i: int, members: list[int]) -> int:
    groups: dict[tuple, int] = defaultdict(int)
    capped: dict[tuple, bool] = {}
    for j in members:
        p = inst.producers[j]
        key = (p.supply, p.cost, j < i)
        groups[key] += 1
        capped[key] = p.cost >= inst.max_bid
    return math.prod(1 if capped[k] else c + 1 for k, c in groups.items())


def _cluster_best(
    inst: MarketInstance,
    i: int,
    members: list[int],
    d: dict[int, int],
    base_supply: int,
    is_first: bool,
    is_last: bool,
) -> tuple[int, int] | None:
    """Best (scaled utility, highest bid) among candidates owned by one cluster."""
    big_m = inst.max_bid
    den = inst.denominator
    s = inst.scaled_supplies
    s_i = s[i]
    c_i = inst.producers[i].cost
    ordered = sorted(
        (min(inst.producers[j].cost + d.get(j, 0), big_m), j) for j in members
    )
    cands: list[tuple[int, int]] = []
    before = base_supply
    for t, (b, j) in enumerate(ordered):
        hi = min(b if j > i else b - 1, big_m)
        if t == 0:
            lo = 0 if is_first else hi
        else:
            pb, pj = ordered[t - 1]
            lo = pb if pj < i else pb + 1
        after = before + s[j]
        if before + s_i < den <= after + s_i and hi >= 0:
            # j prices every full sale; the highest full-sale bid sits right before j
            cands.append(((b - c_i) * s_i, hi))
        if lo <= hi and hi >= 0 and before < den <= before + s_i:
            cands.append(((hi - c_i) * (den - before), hi))
        before = after
    if is_last:
        if ordered:
            pb, pj = ordered[-1]
            lo = pb if pj < i else pb + 1
        else:
            lo = 0
        if lo <= big_m and before < den <= before + s_i:
            cands.append(((big_m - c_i) * (den - before), big_m))
    if not cands:
        return None
    top = max(u for u, _ in cands)
    return top, max(v for u, v in cands if u == top)


def _b_high_clustered(inst: MarketInstance, i: int, budget: int) -> BHigh:
    clusters = _clusters(inst, i)
    total = sum(_cluster_assignment_count(inst, i, c) for c in clusters)
    if total > budget:
        raise BudgetExceededError(
            f"b_high for agent {i} needs {total} cluster assignments (budget {budget})"
        )
    s = inst.scaled_supplies
    c_i = inst.producers[i].cost
    if not clusters:
        return _b_high_exhaustive(inst, i)

    per_cluster: list[list[tuple[tuple[int, int] | None, dict[int, int]]]] = []
    base = 0
    for k, members in enumerate(clusters):
        rows = []
        for d in _cluster_assignments(inst, i, members):
            best = _cluster_best(inst, i, members, d, base, k == 0, k == len(clusters) - 1)
            rows.append((best, d))
        per_cluster.append(rows)
        base += sum(s[j] for j in members)

    def weakest(rows):
        # assignment minimizing the cluster's best utility; None beats everything
        return min(rows, key=lambda r: (r[0] is not None, r[0][0] if r[0] else 0))

    floor_rows = [weakest(rows) for rows in per_cluster]
    floors = [r[0][0] if r[0] is not None else None for r in floor_rows]

    best_value: int | None = None
    best_d: dict[int, int] = {}
    if all(f is None or f <= 0 for f in floors):
        best_value = c_i
        best_d = {j: dj for r in floor_rows for j, dj in r[1].items()}
    for k, rows in enumerate(per_cluster):
        others_ok_at = [f for kk, f in enumerate(floors) if kk != k and f is not None]
        need = max(others_ok_at, default=None)
        for cand, d in rows:
            if cand is None or cand[0] <= 0:
                continue
            u, v = cand
            if need is not None and need > u:
                continue
            if best_value is None or v > best_value:
                best_value = v
                best_d = dict(d)
                for kk, r in enumerate(floor_rows):
                    if kk != k:
                        best_d.update(r[1])
    assert best_value is not None
    return BHigh(best_value, tuple(best_d.get(j, 0) for j in range(inst.n)))


def b_high_witness(
    inst: MarketInstance,
    i: int,
    method: BHighMethod = "auto",
    max_agents: int = DEFAULT_MAX_AGENTS,
    budget: int = DEFAULT_CLUSTER_BUDGET,
) -> BHigh:
    """``b_high`` together with an opponent perturbation that attains it."""
    if not 0 <= i < inst.n:
        raise InvalidInputError(f"agent index {i} out of range")
    pivotal_agent(inst, inst.truthful())  # feasibility check
    if method == "auto":
        method = "exhaustive" if inst.n - 1 <= EXHAUSTIVE_AUTO_LIMIT else "clustered"
    if method == "exhaustive":
        if inst.n > max_agents:
            raise BudgetExceededError(
                f"exhaustive b_high over 2^{inst.n - 1} perturbations exceeds cap n <= {max_agents}"
            )
        return _b_high_exhaustive(inst, i)
    if method == "clustered":
        return _b_high_clustered(inst, i, budget)
    raise InvalidInputError(f"unknown b_high method {method!r}")


def b_high(inst: MarketInstance, i: int, method: BHighMethod = "auto", **kw) -> int:
    return b_high_witness(inst, i, method, **kw).value


def truthful_max_utility(inst: MarketInstance, i: int) -> Fraction:
    """max over own bids of the PC utility against truthful opponents."""
    segs = utility_segments(Mechanism.PC, inst, inst.truthful(), i)
    return Fraction(segments_max(segs), inst.denominator)


def b_low(inst: MarketInstance, i: int) -> int:
    best = truthful_max_utility(inst, i)
    p = inst.producers[i]
    return math.ceil(p.cost + best / p.supply)


def refined_pb_upper_bound(
    inst: MarketInstance,
    highs: tuple[int, ...] | None = None,
    lows: tuple[int, ...] | None = None,
) -> Fraction | None:
    """Tighter PB worst-case price bound for instances with one dominant ``b_low``.

    Returns ``None`` unless the agent with the largest eligible ``b_low`` has
    supply below one, ``b_low + 1 < b_high``, and every other agent has
    ``b_low`` at least two smaller.
    """
    eligible = eligible_agents(inst)
    if lows is None:
        lows = tuple(b_low(inst, j) for j in range(inst.n))
    star = max(eligible, key=lambda j: (lows[j], j))
    p = inst.producers[star]
    hi = highs[star] if highs is not None else b_high(inst, star)
    lo = lows[star]
    if not (p.supply < 1 and lo + 1 < hi):
        return None
    if any(lows[j] > lo - 2 for j in range(inst.n) if j != star):
        return None
    gamma = truthful_max_utility(inst, star) / p.supply + 1
    tail = sum((Fraction(1, a - p.cost - 1) for a in range(lo + 2, hi + 1)), Fraction(0))
    return (1 - p.supply) * (lo + 1 + gamma * tail) + p.supply * hi


@dataclass(frozen=True)
class BoundsReport:
    b_high: tuple[int, ...]
    b_low: tuple[int, ...]
    eligible: tuple[int, ...]
    pc_floor: int
    pc_pure_price: int
    pb_interval: tuple[int, int]
    refined_pb_bound: Fraction | None

    def to_dict(self) -> dict:
        return {
            "b_high": list(self.b_high),
            "b_low": list(self.b_low),
            "eligible": list(self.eligible),
            "pc_floor": self.pc_floor,
            "pc_pure_price": self.pc_pure_price,
            "pb_interval": list(self.pb_interval),
            "refined_pb_bound": None
            if self.refined_pb_bound is None
            else str(self.refined_pb_bound),
        }


def bounds_summary(inst: MarketInstance, method: BHighMethod = "auto") -> BoundsReport:
    eligible = tuple(eligible_agents(inst))
    highs = tuple(b_high(inst, j, method) for j in range(inst.n))
    lows = tuple(b_low(inst, j) for j in range(inst.n))
    floor = max(lows[j] for j in eligible)
    pure = max(highs[j] for j in eligible)
    return BoundsReport(
        b_high=highs,
        b_low=lows,
        eligible=eligible,
        pc_floor=floor,
        pc_pure_price=pure,
        pb_interval=(max(floor - 1, 0), pure),
        refined_pb_bound=refined_pb_upper_bound(inst, highs, lows),
    )


def pc_pure_price(inst: MarketInstance, method: BHighMethod = "auto") -> int:
    """Largest ``b_high`` over eligible agents, without computing the rest."""
    return max(b_high(inst, j, method) for j in eligible_agents(inst))


def construct_pc_pure_ne(inst: MarketInstance, method: BHighMethod = "auto") -> tuple[int, ...]:
    """A pure PC equilibrium whose clearing price is the largest eligible ``b_high``.

    The eligible agent with the largest ``b_high`` (highest index on ties)
    bids it; everyone else bids the perturbed cost profile that attains it.
    """
    witnesses = {j: b_high_witness(inst, j, method) for j in eligible_agents(inst)}
    star = max(witnesses, key=lambda j: (witnesses[j].value, j))
    w = witnesses[star]
    bids = list(w.profile(inst))
    bids[star] = w.value
    return tuple(bids)


@dataclass(frozen=True)
class Deviation:
    agent: int
    bid: int
    gain: Fraction


def truthful_manipulability(inst: MarketInstance) -> Deviation | None:
    """A profitable unilateral PC deviation from truthful bidding, if any.

    The truthful pivot is searched first, then the others by index; for the
    chosen agent the deviation with the largest gain (lowest bid on ties)
    is returned.
    """
    truthful = inst.truthful()
    pivot = pivotal_agent(inst, truthful)
    for i in [pivot] + [j for j in range(inst.n) if j != pivot]:
        utils = counterfactual_utilities(Mechanism.PC, inst, truthful, i)
        best = max(utils)
        gain = best - utils[truthful[i]]
        if gain > 0:
            return Deviation(i, utils.index(best), gain)
    return None
