"""Built-in market instances and parametric instance families."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from pbpc.errors import InvalidInputError
from pbpc.market import MarketInstance

F = Fraction


def gen_vcg_family(k: int, delta: int) -> MarketInstance:
    """Family where truthful VCG pays about ``delta * H_k`` while PC has a pure NE at ``delta + 1``.

    ``k`` zero-cost producers of supply ``1/k``, one producer of supply
    ``1/(2k)`` at cost ``delta``, and ``k - 2`` small producers whose costs
    step up by ``delta``.
    """
    if k < 2:
        raise InvalidInputError(f"k must be >= 2, got {k}")
    if delta <= 2:
        raise InvalidInputError(f"delta must be > 2, got {delta}")
    supplies: list[Fraction] = []
    costs: list[int] = []
    for i in range(1, 2 * k):
        if i <= k:
            supplies.append(F(1, k))
            costs.append(0)
        elif i == k + 1:
            supplies.append(F(1, 2 * k))
            costs.append(delta)
        else:
            supplies.append(F(1, k * (i - k) * (i - k + 1)))
            costs.append(delta * (i - k) - 2)
    return MarketInstance.from_lists(supplies, costs, delta * k - 2, name=f"vcg:{k},{delta}")


def gen_bestpc_family(delta: int) -> MarketInstance:
    """Three producers where the best PC equilibrium beats every PB equilibrium."""
    if delta < 1:
        raise InvalidInputError(f"delta must be >= 1, got {delta}")
    return MarketInstance.from_lists(
        [F(1, 2), F(3, 4), F(1, 4)], [0, 0, delta], 3 * delta, name=f"bestpc:{delta}"
    )


def _lists(name: str, supplies, costs, max_bid: int) -> Callable[[], MarketInstance]:
    return lambda: MarketInstance.from_lists(supplies, costs, max_bid, name=name)


def _renamed(name: str, make: Callable[[], MarketInstance]) -> Callable[[], MarketInstance]:
    def build() -> MarketInstance:
        inst = make()
        return MarketInstance(name=name, max_bid=inst.max_bid, producers=inst.producers)

    return build


_FIG7_SUPPLIES = [F("0.72"), F("0.15"), F("0.47"), F("0.96"), F("0.26")]

BUILTINS: dict[str, Callable[[], MarketInstance]] = {
    "example1": _lists("example1", [F(1, 3), F(1, 2), F(1, 4), F(2, 3)], [0, 1, 2, 3], 3),
    "sec31": _lists("sec31", [F(3, 4), F(3, 4), F(1, 10)], [0, 1, 4], 6),
    # any M works for the non-truthfulness witness; 9 keeps enumeration small
    "cor-pc": _lists("cor-pc", [1, 1], [0, 9], 9),
    "cor-pb": _lists("cor-pb", [F(3, 4), F(3, 4)], [0, 0], 5),
    "cor-pb8": _lists("cor-pb8", [F(3, 4), F(3, 4)], [0, 0], 8),
    "fig2": _renamed("fig2", lambda: gen_bestpc_family(300)),
    "fig3": _lists("fig3", [F("0.3")] * 4, [0] * 4, 800),
    "fig4": _lists("fig4", [F("0.4")] * 3, [0] * 3, 800),
    "fig5": _lists("fig5", [F("0.99")] * 2, [0] * 2, 800),
    "fig6": _renamed("fig6", lambda: gen_bestpc_family(300)),
    # the printed s5 = 26 is read as 0.26 (a supply above 1 is not allowed)
    "fig7": _lists("fig7", _FIG7_SUPPLIES, [390, 280, 30, 510, 680], 1000),
    "fig8": _lists("fig8", _FIG7_SUPPLIES, [3900, 2800, 300, 5100, 6800], 10000),
    "fig9": _lists("fig9", [F("0.25")] * 4 + [F("0.11")], [0, 0, 0, 0, 600], 1000),
    "a4agent": _lists(
        "a4agent", [F("0.75"), F("0.75"), F("0.1"), F("0.05")], [0, 100, 400, 600], 800
    ),
}

# figure ids accepted by ``reproduce``
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig7", "fig8", "fig9")


def gen_builtin(name: str) -> MarketInstance:
    try:
        return BUILTINS[name]()
    except KeyError:
        known = ", ".join(sorted(BUILTINS))
        raise InvalidInputError(f"unknown builtin instance {name!r} (known: {known})") from None


def parse_generator(spec: str) -> MarketInstance:
    """Build an instance from ``name``, ``vcg:k,delta`` or ``bestpc:delta``."""
    if spec in BUILTINS:
        return gen_builtin(spec)
    kind, sep, args = spec.partition(":")
    if not sep:
        return gen_builtin(spec)
    try:
        nums = [int(a) for a in args.split(",")]
    except ValueError:
        raise InvalidInputError(f"bad generator arguments in {spec!r}") from None
    if kind == "vcg" and len(nums) == 2:
        return gen_vcg_family(*nums)
    if kind == "bestpc" and len(nums) == 1:
        return gen_bestpc_family(nums[0])
    raise InvalidInputError(f"unknown generator {spec!r}; use vcg:k,delta or bestpc:delta")
