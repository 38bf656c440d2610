"""Support enumeration for mixed equilibria of two-agent markets.

Only equal-size supports are tried, and a candidate is kept only when both
indifference systems have a unique solution. This finds every equilibrium
of a nondegenerate game; in degenerate games it finds the ones that are
isolated vertices of the equilibrium set.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from pbpc.equilibrium.nash import MixedProfile, is_mixed_ne
from pbpc.errors import BudgetExceededError, InvalidInputError
from pbpc.market import MarketInstance, _require_feasible
from pbpc.mechanisms import Mechanism, utility_segments

DEFAULT_MAX_PAIRS = 10**6


def payoff_matrices(
    mech: Mechanism | str, inst: MarketInstance
) -> tuple[list[list[int]], list[list[int]]]:
    """Scaled utilities ``A[r][c]`` of agent 0 and ``B[r][c]`` of agent 1 when they bid r and c."""
    _require_feasible(inst)
    if inst.n != 2:
        raise InvalidInputError(f"support enumeration needs exactly 2 agents, got {inst.n}")
    size = inst.max_bid + 1
    a = [[0] * size for _ in range(size)]
    b = [[0] * size for _ in range(size)]
    for c in range(size):
        for sg in utility_segments(mech, inst, [0, c], 0):
            for r in range(sg.lo, sg.hi + 1):
                a[r][c] = sg.value(r)
    for r in range(size):
        for sg in utility_segments(mech, inst, [r, 0], 1):
            for c in range(sg.lo, sg.hi + 1):
                b[r][c] = sg.value(c)
    return a, b


def _strictly_dominated(payoff, own: list[int], other: list[int], rows: bool) -> int | None:
    def u(x, y):
        return payoff[x][y] if rows else payoff[y][x]

    for x in own:
        for z in own:
            if z != x and all(u(z, y) > u(x, y) for y in other):
                return x
    return None


def iterated_dominance(a, b) -> tuple[list[int], list[int]]:
    """Surviving bids of each agent after removing strictly dominated pure bids."""
    rows = list(range(len(a)))
    cols = list(range(len(a[0])))
    while True:
        x = _strictly_dominated(a, rows, cols, rows=True)
        if x is not None:
            rows.remove(x)
            continue
        y = _strictly_dominated(b, cols, rows, rows=False)
        if y is not None:
            cols.remove(y)
            continue
        return rows, cols


def _solve(matrix: list[list[int]], rhs: list[int]) -> list[Fraction] | None:
    """Exact solve of an integer system by fraction-free elimination; ``None`` when singular."""
    n = len(matrix)
    m = [list(row) + [r] for row, r in zip(matrix, rhs)]
    prev = 1
    for k in range(n):
        piv = next((r for r in range(k, n) if m[r][k] != 0), None)
        if piv is None:
            return None
        m[k], m[piv] = m[piv], m[k]
        mkk = m[k][k]
        row_k = m[k]
        for i in range(k + 1, n):
            row_i = m[i]
            mik = row_i[k]
            for j in range(k + 1, n + 1):
                row_i[j] = (row_i[j] * mkk - mik * row_k[j]) // prev
            row_i[k] = 0
        prev = mkk
    x: list[Fraction] = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = Fraction(m[i][n]) - sum((m[i][j] * x[j] for j in range(i + 1, n)), Fraction(0))
        x[i] = acc / m[i][i]
    return x


def _indifference(payoff_rows: list[list[int]]) -> tuple[list[Fraction], Fraction] | None:
    """Mix over columns making every row equally good: returns (mix, value)."""
    k = len(payoff_rows)
    mat = [list(row) + [-1] for row in payoff_rows]
    mat.append([1] * k + [0])
    sol = _solve(mat, [0] * k + [1])
    if sol is None:
        return None
    mix, value = sol[:k], sol[k]
    if any(p <= 0 for p in mix):
        return None
    return mix, value


def _exact_candidate(a, b, rows, cols, s1, s2) -> MixedProfile | None:
    # agent 1 mixes over s2 so agent 0 is indifferent on s1
    ym = _indifference([[a[r][c] for c in s2] for r in s1])
    if ym is None:
        return None
    y, u = ym
    if any(sum(p * a[r][c] for p, c in zip(y, s2)) > u for r in rows if r not in s1):
        return None
    xm = _indifference([[b[r][c] for r in s1] for c in s2])
    if xm is None:
        return None
    x, v = xm
    if any(sum(p * b[r][c] for p, r in zip(x, s1)) > v for c in cols if c not in s2):
        return None
    return (dict(zip(s1, x)), dict(zip(s2, y)))


def _batch_indifference(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Float version of :func:`_indifference` for a stack of k x k payoff blocks.

    Returns (mix, value, reliable); unreliable entries are near-singular and
    must be settled exactly.
    """
    m, k, _ = blocks.shape
    mat = np.zeros((m, k + 1, k + 1))
    mat[:, :k, :k] = blocks
    mat[:, :k, k] = -1.0
    mat[:, k, :k] = 1.0
    rhs = np.zeros((m, k + 1, 1))
    rhs[:, k, 0] = 1.0
    cond = np.linalg.cond(mat)
    reliable = np.isfinite(cond) & (cond < 1e8)
    sol = np.zeros((m, k + 1))
    if reliable.any():
        sol[reliable] = np.linalg.solve(mat[reliable], rhs[reliable])[:, :, 0]
    return sol[:, :k], sol[:, k], reliable


def _screen(a, b, rows, cols, s1, col_sets) -> list[tuple[int, ...]]:
    """Column supports that may pair with ``s1``; a float filter with generous slack."""
    tol = 1e-7
    af = np.asarray(a, dtype=float)
    bf = np.asarray(b, dtype=float)
    idx = np.asarray(col_sets)
    rs = list(s1)
    # agent 0 indifferent on s1 -> mix y over each column set
    y, u, ok_y = _batch_indifference(af[rs][:, idx].transpose(1, 0, 2))
    # agent 1 indifferent on each column set -> mix x over s1
    x, v, ok_x = _batch_indifference(bf[rs][:, idx].transpose(1, 2, 0))
    span = max(1.0, float(np.abs(af).max()), float(np.abs(bf).max()))
    bad = np.zeros(len(col_sets), dtype=bool)
    bad |= ok_y & (y < -tol).any(axis=1)
    bad |= ok_x & (x < -tol).any(axis=1)
    off_rows = [r for r in rows if r not in s1]
    if off_rows:
        # payoff of each off-support row against y, per column set
        row_pay = np.einsum("omk,mk->mo", af[off_rows][:, idx], y)
        bad |= ok_y & (row_pay > u[:, None] + tol * span).any(axis=1)
    # agent 1 payoffs of every column against x; support columns are tied at v
    col_pay = x @ bf[rs][:, cols]
    bad |= ok_x & (col_pay > v[:, None] + tol * span).any(axis=1)
    keep = [s2 for s2, drop in zip(col_sets, bad) if not drop]
    return keep


def enumerate_mixed_ne_2p(
    mech: Mechanism | str,
    inst: MarketInstance,
    max_support: int | None = None,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> list[MixedProfile]:
    """Mixed equilibria of a two-agent market, sorted by (support of agent 0, support of agent 1).

    Every returned profile passes :func:`is_mixed_ne` with zero tolerance.
    """
    mech = Mechanism.parse(mech)
    a, b = payoff_matrices(mech, inst)
    rows, cols = iterated_dominance(a, b)
    top = min(len(rows), len(cols))
    if max_support is not None:
        top = min(top, max_support)
    pairs = sum(math.comb(len(rows), k) * math.comb(len(cols), k) for k in range(1, top + 1))
    if pairs > max_pairs:
        raise BudgetExceededError(f"{pairs} support pairs exceeds budget {max_pairs}")

    found: list[tuple[tuple[int, ...], tuple[int, ...], MixedProfile]] = []
    for k in range(1, top + 1):
        col_sets = list(itertools.combinations(cols, k))
        for s1 in itertools.combinations(rows, k):
            for s2 in _screen(a, b, rows, cols, s1, col_sets):
                sigma = _exact_candidate(a, b, rows, cols, s1, s2)
                if sigma is not None:
                    found.append((s1, s2, sigma))
    found.sort(key=lambda t: (t[0], t[1]))
    out = []
    for _, _, sigma in found:
        if not is_mixed_ne(mech, inst, sigma).is_equilibrium:
            raise AssertionError(f"support enumeration produced a non-equilibrium {sigma}")
        out.append(sigma)
    return out
