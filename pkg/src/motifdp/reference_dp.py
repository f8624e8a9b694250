"""Exact edit-distance dynamic programs over integer (or string) sequences.

These are the non-learned counterparts of the neural recursion: classic edit
distance, suffix matching with a zero-initialized top row, the causal
self-match tensor, and a scalar replay of the neural recursion used as an
oracle. All are pure functions; with an integral cost model the arithmetic
stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = [
    "CostModel",
    "unit_costs",
    "edit_distance",
    "sellers_matrix",
    "SelfMatchTensor",
    "self_match_tensor",
    "scalar_recursion_oracle",
    "generic_forecast",
]


@dataclass(frozen=True)
class CostModel:
    """Nonnegative deletion and substitution costs over the alphabet.

    Insertion of a text symbol is modeled symmetrically as deletion of that
    symbol, so delete_cost covers both directions.
    """

    delete_cost: Callable[[object], float]
    substitute_cost: Callable[[object, object], float]


def unit_costs() -> CostModel:
    """delete = 1; substitute = 0 on equal symbols, 1 otherwise."""
    return CostModel(
        delete_cost=lambda a: 1,
        substitute_cost=lambda a, b: 0 if a == b else 1,
    )


def edit_distance(a: Sequence, b: Sequence, costs: CostModel | None = None):
    """Minimum trace cost transforming a into b.

    Standard prefix-by-prefix table with D(0,0)=0; at each cell the min runs
    over the candidates whose indices exist.
    """
    c = costs or unit_costs()
    n, m = len(a), len(b)
    prev = [0] * (m + 1)
    for j in range(1, m + 1):
        prev[j] = prev[j - 1] + c.delete_cost(b[j - 1])
    for i in range(1, n + 1):
        cur = [prev[0] + c.delete_cost(a[i - 1])] + [0] * m
        ai = a[i - 1]
        for j in range(1, m + 1):
            cur[j] = min(
                prev[j] + c.delete_cost(ai),
                prev[j - 1] + c.substitute_cost(ai, b[j - 1]),
                cur[j - 1] + c.delete_cost(b[j - 1]),
            )
        prev = cur
    return prev[m]


def sellers_matrix(p: Sequence, t: Sequence, costs: CostModel | None = None):
    """Suffix-matching table: row 0 is all zeros, so D(|p|, j) is the minimum
    edit distance from p to any suffix of t ending at column j.

    Returns the full (|p|+1) x (|t|+1) table as nested lists.
    """
    if len(p) < 1:
        raise ValueError("pattern must be nonempty")
    c = costs or unit_costs()
    n, m = len(p), len(t)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = d[i - 1][0] + c.delete_cost(p[i - 1])
    for i in range(1, n + 1):
        pi = p[i - 1]
        row, up = d[i], d[i - 1]
        for j in range(1, m + 1):
            row[j] = min(
                up[j] + c.delete_cost(pi),
                up[j - 1] + c.substitute_cost(pi, t[j - 1]),
                row[j - 1] + c.delete_cost(t[j - 1]),
            )
    return d


@dataclass
class SelfMatchTensor:
    """Values D(i,j,k) indexed 1 <= j <= i <= n, 1 <= k <= min(i, k_max)."""

    n: int
    k_max: int
    values: dict = field(default_factory=dict)
    selections: dict = field(default_factory=dict)

    def value(self, i: int, j: int, k: int):
        return self.values[(i, j, k)]

    def __contains__(self, key):
        return key in self.values


def self_match_tensor(s: Sequence, costs: CostModel | None = None) -> SelfMatchTensor:
    """Causal self-matching: D(i,j,k) is the minimum edit distance from the
    length-k suffix ending at i to the best suffix of s(:j), for j <= i.

    The recursion drops the delete-s_i candidate when it would read a cell
    with second index above the first (only possible at i == j), keeping every
    slice a function of the prefix s(:i).
    """
    if len(s) < 1:
        raise ValueError("sequence must be nonempty")
    c = costs or unit_costs()
    n = len(s)
    out = SelfMatchTensor(n=n, k_max=n)
    vals = out.values

    # column j=0: only the empty text suffix remains, so delete the pattern
    del_runs = {}
    for i in range(1, n + 1):
        acc = 0
        for k in range(1, i + 1):
            acc += c.delete_cost(s[i - k])
            del_runs[(i, k)] = acc

    for i in range(1, n + 1):
        si = s[i - 1]
        for k in range(1, i + 1):
            for j in range(1, i + 1):
                sj = s[j - 1]
                diag = vals[(i - 1, j - 1, k - 1)] if k > 1 and j > 1 else (
                    del_runs[(i - 1, k - 1)] if k > 1 else 0)
                best = c.substitute_cost(si, sj) + diag
                if j < i and k > 1:
                    down = c.delete_cost(si) + vals[(i - 1, j, k - 1)]
                    if down < best:
                        best = down
                elif j < i and k == 1:
                    # deleting the single pattern symbol, any suffix of s(:j)
                    if c.delete_cost(si) < best:
                        best = c.delete_cost(si)
                right = c.delete_cost(sj) + (
                    vals[(i, j - 1, k)] if j > 1 else del_runs[(i, k)])
                if right < best:
                    best = right
                vals[(i, j, k)] = best
    return out


def scalar_recursion_oracle(s: Sequence, costs: CostModel | None = None,
                            d0=0, k_max: int | None = None) -> SelfMatchTensor:
    """Replay the neural recursion with scalar distances.

    Distance space is the reals, accumulation is addition, the edit costs come
    from the cost model, and scoring is negated distance so the arg-max picks
    the minimum. The k=1 base is D(i,j,1) = d0 + substitute(s_i, s_j); for
    k > 1 a candidate is considered only when its source cell exists (indices
    >= 1, source j <= source i, k within range).

    Records which candidate won each cell ('base', 'down', 'diag', 'right';
    ties resolved in that fixed order).
    """
    if len(s) < 1:
        raise ValueError("sequence must be nonempty")
    c = costs or unit_costs()
    n = len(s)
    km = n if k_max is None else min(k_max, n)
    out = SelfMatchTensor(n=n, k_max=km)
    vals, sels = out.values, out.selections

    for i in range(1, n + 1):
        si = s[i - 1]
        for k in range(1, min(i, km) + 1):
            if k == 1:
                for j in range(1, i + 1):
                    vals[(i, j, 1)] = d0 + c.substitute_cost(si, s[j - 1])
                    sels[(i, j, 1)] = "base"
                continue
            for j in range(1, i + 1):
                sj = s[j - 1]
                best = None
                pick = None
                if j <= i - 1:  # delete s_i; source (i-1, j, k-1)
                    best = vals[(i - 1, j, k - 1)] + c.delete_cost(si)
                    pick = "down"
                if j >= 2:  # substitute; source (i-1, j-1, k-1)
                    cand = vals[(i - 1, j - 1, k - 1)] + c.substitute_cost(si, sj)
                    if best is None or cand < best:
                        best, pick = cand, "diag"
                    # delete s_j; source (i, j-1, k)
                    cand = vals[(i, j - 1, k)] + c.delete_cost(sj)
                    if cand < best:
                        best, pick = cand, "right"
                vals[(i, j, k)] = best
                sels[(i, j, k)] = pick
    return out


def generic_forecast(prefix: Sequence, tensor: SelfMatchTensor,
                     alphabet_size: int, kernel: Callable[[float], float] | None = None):
    """Next-symbol distribution from distance-to-weight kernel aggregation.

    Mass on symbol s(j+1) is proportional to kernel(D(i,j,k)) summed over
    j < i and all stored k. Prefixes shorter than 2 give the uniform
    distribution. Default kernel: exp(-d / 0.1).
    """
    if kernel is None:
        kernel = lambda d: math.exp(-d / 0.1)
    i = len(prefix)
    probs = [0.0] * alphabet_size
    if i < 2:
        return [1.0 / alphabet_size] * alphabet_size
    total = 0.0
    for j in range(1, i):
        nxt = prefix[j]  # s_{j+1}, 0-based index j
        for k in range(1, min(i, tensor.k_max) + 1):
            key = (i, j, k)
            if key not in tensor.values:
                continue
            w = kernel(tensor.values[key])
            probs[nxt] += w
            total += w
    if total <= 0.0:
        return [1.0 / alphabet_size] * alphabet_size
    return [p / total for p in probs]
