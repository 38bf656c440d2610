"""Hedge (multiplicative weights) bidding dynamics over the bids ``0..M``.

Every agent keeps log-weights over its bids. Each iteration samples one bid
per agent, then updates every agent with its full counterfactual utility
vector against the sampled opponents (or against the exact expectation over
the opponents' current mixtures).

Gains are ``(U + s*c) / (s*M)``. Shifting by the constant ``s*c`` keeps them
in ``[0, 1]`` even for bids below cost, and leaves Hedge's distributions
unchanged because the shift is the same for every bid.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from pbpc.errors import BudgetExceededError, InvalidInputError, NonFiniteWeightError
from pbpc.market import MarketInstance, _require_feasible
from pbpc.mechanisms import Mechanism, counterfactual_utilities_array, unit_price

DEFAULT_EXPECTATION_BUDGET = 10**5


class Feedback(str, Enum):
    SAMPLED = "sampled"
    EXACT = "exact"

    @classmethod
    def parse(cls, value: Union[str, Feedback]) -> Feedback:
        if isinstance(value, Feedback):
            return value
        key = value.strip().lower()
        if key in ("sampled", "sampled-opponents"):
            return cls.SAMPLED
        if key in ("exact", "exact-expectation"):
            return cls.EXACT
        raise InvalidInputError(f"unknown feedback mode {value!r}")


@dataclass(frozen=True)
class HedgeState:
    log_weights: np.ndarray  # shape (n, M + 1)
    iteration: int = 0

    def probabilities(self) -> np.ndarray:
        z = self.log_weights - self.log_weights.max(axis=1, keepdims=True)
        w = np.exp(z)
        return w / w.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class SimConfig:
    mechanism: Mechanism
    iterations: int
    seed: int = 0
    learning_rate: Union[float, str] = "auto"
    snapshot_every: int = 1
    feedback: Feedback = Feedback.SAMPLED
    workers: int = 1
    expectation_budget: int = DEFAULT_EXPECTATION_BUDGET

    def __post_init__(self) -> None:
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        object.__setattr__(self, "feedback", Feedback.parse(self.feedback))
        if self.iterations < 1:
            raise InvalidInputError("iterations must be positive")
        if self.snapshot_every < 1:
            raise InvalidInputError("snapshot_every must be positive")
        if self.workers < 1:
            raise InvalidInputError("workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.learning_rate != "auto":
            eta = float(self.learning_rate)
            if not (math.isfinite(eta) and eta >= 0):
                raise InvalidInputError(f"learning rate {self.learning_rate!r} must be >= 0")
            object.__setattr__(self, "learning_rate", eta)

    def eta(self, inst: MarketInstance) -> float:
        if self.learning_rate == "auto":
            return auto_learning_rate(inst.max_bid, self.iterations)
        return float(self.learning_rate)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism.value,
            "iterations": self.iterations,
            "seed": self.seed,
            "learning_rate": self.learning_rate,
            "snapshot_every": self.snapshot_every,
            "feedback": self.feedback.value,
            "workers": self.workers,
            "expectation_budget": self.expectation_budget,
        }


@dataclass(frozen=True)
class Snapshot:
    iteration: int
    unit_price: float
    normalized_unit_price: float
    time_avg_unit_price: float


@dataclass
class Trajectory:
    max_bid: int
    snapshots: list[Snapshot] = field(default_factory=list)
    final_strategies: np.ndarray | None = None
    regret: tuple[float, ...] = ()
    eta: float = 0.0

    def csv_lines(self) -> list[str]:
        lines = ["iteration,unit_price,normalized_unit_price,time_avg_unit_price"]
        for s in self.snapshots:
            lines.append(
                f"{s.iteration},{s.unit_price!r},{s.normalized_unit_price!r},"
                f"{s.time_avg_unit_price!r}"
            )
        return lines


@dataclass(frozen=True)
class Summary:
    window: int
    window_mean: float
    window_min: float
    window_max: float
    time_average: float
    normalized_time_average: float


def auto_learning_rate(max_bid: int, horizon: int) -> float:
    return math.sqrt(8 * math.log(max_bid + 1) / horizon)


def hedge_init(inst: MarketInstance) -> HedgeState:
    return HedgeState(np.zeros((inst.n, inst.max_bid + 1)), 0)


def hedge_update(log_weights: np.ndarray, gains: np.ndarray, eta: float) -> np.ndarray:
    """One multiplicative-weights update in log space, renormalized so the max is 0."""
    out = log_weights + eta * gains
    out -= out.max()
    if not np.all(np.isfinite(out)):
        raise NonFiniteWeightError("Hedge log-weights became non-finite")
    return out


def agent_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-agent generators derived from (seed, agent index)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def _gain_scale(inst: MarketInstance, i: int) -> tuple[float, float]:
    p = inst.producers[i]
    s = float(p.supply)
    return s * p.cost, s * inst.max_bid


def expected_utilities(
    mech: Mechanism, inst: MarketInstance, probs: np.ndarray, i: int, budget: int
) -> np.ndarray:
    """Agent ``i``'s expected utility per bid against the opponents' mixtures in ``probs``."""
    others = [j for j in range(inst.n) if j != i]
    supports = [np.flatnonzero(probs[j] > 0) for j in others]
    size = math.prod(len(s) for s in supports)
    if size > budget:
        raise BudgetExceededError(
            f"exact-expectation feedback needs {size} opponent profiles, budget {budget}"
        )
    acc = np.zeros(inst.max_bid + 1)
    bids = [0] * inst.n
    for combo in itertools.product(*supports):
        w = 1.0
        for j, b in zip(others, combo):
            bids[j] = int(b)
            w *= probs[j, b]
        acc += w * counterfactual_utilities_array(mech, inst, bids, i)
    return acc


def hedge_step(
    state: HedgeState,
    inst: MarketInstance,
    mech: Mechanism | str,
    rngs: Sequence[np.random.Generator],
    eta: float,
    feedback: Feedback = Feedback.SAMPLED,
    pool: ThreadPoolExecutor | None = None,
    expectation_budget: int = DEFAULT_EXPECTATION_BUDGET,
    probs: np.ndarray | None = None,
) -> tuple[HedgeState, tuple[int, ...], Fraction, np.ndarray]:
    """Advance every agent by one Hedge update.

    Returns the new state, the sampled profile, its exact unit price, and
    the per-agent utility vectors used for the update (shape ``(n, M + 1)``).
    ``probs`` may pass in ``state.probabilities()`` when already computed.
    """
    mech = Mechanism.parse(mech)
    if probs is None:
        probs = state.probabilities()
    profile = tuple(_sample(probs[i], rngs[i]) for i in range(inst.n))

    def agent_update(i: int) -> tuple[np.ndarray, np.ndarray]:
        if feedback is Feedback.EXACT:
            utils = expected_utilities(mech, inst, probs, i, expectation_budget)
        else:
            utils = counterfactual_utilities_array(mech, inst, profile, i)
        shift, scale = _gain_scale(inst, i)
        gains = (utils + shift) / scale
        return hedge_update(state.log_weights[i], gains, eta), utils

    if pool is None:
        results = [agent_update(i) for i in range(inst.n)]
    else:
        results = list(pool.map(agent_update, range(inst.n)))
    new_weights = np.stack([r[0] for r in results])
    utils = np.stack([r[1] for r in results])
    price = unit_price(mech, inst, profile)
    return HedgeState(new_weights, state.iteration + 1), profile, price, utils


def run_simulation(
    inst: MarketInstance, config: SimConfig, state: HedgeState | None = None
) -> Trajectory:
    """Run ``config.iterations`` Hedge steps. Output depends only on the inputs and the seed."""
    _require_feasible(inst)
    eta = config.eta(inst)
    state = state or hedge_init(inst)
    rngs = agent_streams(config.seed, inst.n)
    traj = Trajectory(max_bid=inst.max_bid, eta=eta)
    cum_best = np.zeros((inst.n, inst.max_bid + 1))
    cum_expected = np.zeros(inst.n)
    total = 0.0
    m = inst.max_bid
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for t in range(1, config.iterations + 1):
            probs = state.probabilities()
            state, _, exact_price, utils = hedge_step(
                state,
                inst,
                config.mechanism,
                rngs,
                eta,
                config.feedback,
                pool,
                config.expectation_budget,
                probs,
            )
            cum_best += utils
            cum_expected += np.einsum("ij,ij->i", probs, utils)
            price = float(exact_price)
            total += price
            if t % config.snapshot_every == 0 or t == config.iterations:
                traj.snapshots.append(
                    Snapshot(t, price, price / m if m else 0.0, total / t)
                )
    finally:
        if pool is not None:
            pool.shutdown()
    traj.final_strategies = state.probabilities()
    traj.regret = tuple(float(cum_best[i].max() - cum_expected[i]) for i in range(inst.n))
    return traj


def regret_bound(inst: MarketInstance, i: int, horizon: int) -> float:
    """Safety-factor-2 Hedge regret bound in utility units for the auto learning rate."""
    return 2 * math.sqrt(horizon * math.log(inst.max_bid + 1)) * float(
        inst.producers[i].supply
    ) * inst.max_bid


def summarize(traj: Trajectory, window: int | None = None) -> Summary:
    """Trailing-window statistics of the normalized price plus the full-run time average."""
    if not traj.snapshots:
        raise InvalidInputError("empty trajectory")
    window = len(traj.snapshots) if window is None else window
    if not 1 <= window <= len(traj.snapshots):
        raise InvalidInputError(f"window {window} outside 1..{len(traj.snapshots)}")
    tail = [s.normalized_unit_price for s in traj.snapshots[-window:]]
    avg = traj.snapshots[-1].time_avg_unit_price
    return Summary(
        window=window,
        window_mean=sum(tail) / window,
        window_min=min(tail),
        window_max=max(tail),
        time_average=avg,
        normalized_time_average=avg / traj.max_bid if traj.max_bid else 0.0,
    )


__all__ = [
    "Feedback",
    "HedgeState",
    "SimConfig",
    "Snapshot",
    "Summary",
    "Trajectory",
    "agent_streams",
    "auto_learning_rate",
    "expected_utilities",
    "hedge_init",
    "hedge_step",
    "hedge_update",
    "regret_bound",
    "run_simulation",
    "summarize",
]
