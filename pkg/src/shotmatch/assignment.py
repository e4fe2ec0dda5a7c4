"""Exact minimum-cost linear assignment (Hungarian method).

The solver is the O(n^3) shortest-augmenting-path formulation and is generic
over the cost entries' numeric type: floats work, and exact types such as
fractions.Fraction work too, which lets callers canonicalize tie-broken
assignments without floating-point equality hazards.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import DataError

Matrix = Sequence[Sequence]


def solve_square(cost: Matrix) -> tuple[list[int], object]:
    """Minimum-cost perfect matching on an n x n matrix.

    Returns (col_of_row, total): col_of_row[i] is the column assigned to row
    i, total is the exact sum of the chosen entries (same numeric type as the
    inputs).
    """
    n = len(cost)
    if n == 0:
        return [], 0
    if any(len(row) != n for row in cost):
        raise DataError("cost matrix must be square")
    zero = cost[0][0] - cost[0][0]  # additive identity of the entry type
    inf = math.inf

    u = [zero] * (n + 1)
    v = [zero] * (n + 1)
    match_col = [0] * (n + 1)  # row matched to column j (1-based), 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match_col[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match_col[j0]
            delta = inf
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_col[j0] = match_col[j1]
            j0 = j1

    col_of_row = [0] * n
    for j in range(1, n + 1):
        col_of_row[match_col[j] - 1] = j - 1
    total = zero
    for i, j in enumerate(col_of_row):
        total = total + cost[i][j]
    return col_of_row, total


def _pad_square(cost: Matrix) -> tuple[list[list], int, int]:
    """Pad a rectangular matrix with zero-cost dummy rows/columns."""
    rows = len(cost)
    cols = len(cost[0]) if rows else 0
    n = max(rows, cols)
    zero = cost[0][0] - cost[0][0] if rows and cols else 0
    padded = [[cost[i][j] if i < rows and j < cols else zero for j in range(n)] for i in range(n)]
    return padded, rows, cols


def min_cost_matching(cost: Matrix) -> tuple[list[tuple[int, int]], object]:
    """Optimal one-to-one matching of a rectangular cost matrix.

    Matches min(rows, cols) pairs; returns (pairs sorted by row, total cost
    over the matched real pairs).
    """
    rows = len(cost)
    cols = len(cost[0]) if rows else 0
    if rows == 0 or cols == 0:
        return [], 0
    if any(len(r) != cols for r in cost):
        raise DataError("cost matrix rows have inconsistent lengths")
    padded, rows, cols = _pad_square(cost)
    col_of_row, _ = solve_square(padded)
    pairs = [(i, j) for i, j in enumerate(col_of_row) if i < rows and j < cols]
    pairs.sort()
    zero = cost[0][0] - cost[0][0]
    total = zero
    for i, j in pairs:
        total = total + cost[i][j]
    return pairs, total


def _optimal_total(cost: Matrix):
    if not cost or not cost[0]:
        return 0
    return min_cost_matching(cost)[1]


def lexicographic_min_matching(cost: Matrix) -> tuple[list[tuple[int, int]], object]:
    """Among all minimum-cost matchings, the lexicographically smallest pair list.

    Pair lists are sorted by (row, col); ties in total cost are resolved by
    sequentially fixing the smallest feasible (row, col) whose optimal
    completion still attains the global minimum. Exact entry types (e.g.
    Fraction) make the equality tests exact.
    """
    rows = len(cost)
    cols = len(cost[0]) if rows else 0
    if rows == 0 or cols == 0:
        return [], 0
    m = min(rows, cols)
    _, base_total = min_cost_matching(cost)

    fixed: list[tuple[int, int]] = []
    remaining = base_total
    used_cols: set[int] = set()
    next_row = 0
    for step in range(m):
        pairs_left = m - step
        found = False
        # rows may only be skipped when there are more rows than columns
        last_row = rows - pairs_left
        for x in range(next_row, last_row + 1):
            for y in range(cols):
                if y in used_cols:
                    continue
                sub_rows = list(range(x + 1, rows))
                sub_cols = [c for c in range(cols) if c not in used_cols and c != y]
                sub = [[cost[r][c] for c in sub_cols] for r in sub_rows]
                candidate = cost[x][y] + _optimal_total(sub)
                if candidate == remaining:
                    fixed.append((x, y))
                    used_cols.add(y)
                    remaining = remaining - cost[x][y]
                    next_row = x + 1
                    found = True
                    break
            if found:
                break
        if not found:  # pragma: no cover - would indicate a solver bug
            raise DataError("failed to reconstruct an optimal matching")
    return fixed, base_total
