"""Maximum-weight one-to-one matching of DUEs onto CUE bands (Hungarian method).

Weights are an M x K array (rows CUEs, columns DUEs). ``-inf`` marks a pair
that must never be matched; such pairs are kept out of the search entirely
rather than being replaced by a large negative number. A DUE may end up
unmatched, which is worth zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]  # (cue m, due k)
    objective: float
    num_cues: int = 0
    num_dues: int = 0

    matched_cues: frozenset = field(init=False)
    matched_dues: frozenset = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "matched_cues", frozenset(m for m, _ in self.pairs))
        object.__setattr__(self, "matched_dues", frozenset(k for _, k in self.pairs))

    def due_of(self, m):
        for mm, k in self.pairs:
            if mm == m:
                return k
        return None

    def cue_of(self, k):
        for m, kk in self.pairs:
            if kk == k:
                return m
        return None

    def as_matrix(self):
        x = np.zeros((self.num_cues, self.num_dues), dtype=int)
        for m, k in self.pairs:
            x[m, k] = 1
        return x


def _min_cost_rows(cost):
    """Assign every row of an n x m cost matrix (n <= m) to a distinct column.

    Shortest-augmenting-path Hungarian algorithm with row/column potentials,
    O(n^2 m). ``inf`` entries are forbidden; the caller guarantees a finite
    perfect row assignment exists. Rows are inserted in index order.
    """
    n, m = cost.shape
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) assigned to column j, 0 = free
    way = [0] * (m + 1)
    rows = cost.tolist()
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = rows[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                c = row[j - 1]
                if c != inf:
                    cur = c - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            if j1 < 0:
                raise RuntimeError("no feasible assignment")
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


def max_weight_matching(weights) -> Assignment:
    """Optimal partial one-to-one matching maximising the sum of matched weights.

    Each DUE (column) gets a private zero-weight "stay unmatched" option, so
    pairs with weight <= 0 or -inf are never forced. Runs in O(K^2 (M + K)).
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D array")
    num_cues, num_dues = w.shape
    if num_dues < 1 or num_cues < num_dues:
        raise ValueError(f"need M >= K >= 1, got M={num_cues}, K={num_dues}")
    if np.any(np.isnan(w)) or np.any(w == math.inf):
        raise ValueError("weights must be finite or -inf")

    # rows = DUEs; columns = CUEs followed by one private dummy per DUE
    cost = np.full((num_dues, num_cues + num_dues), math.inf)
    finite = np.isfinite(w.T)
    cost[:, :num_cues] = np.where(finite, -w.T, math.inf)
    cost[np.arange(num_dues), num_cues + np.arange(num_dues)] = 0.0

    cols = _min_cost_rows(cost)
    pairs = []
    total = 0.0
    for k, m in enumerate(cols):
        if m < num_cues and w[m, k] > 0.0:
            pairs.append((m, k))
            total += w[m, k]
    pairs.sort()
    return Assignment(tuple(pairs), float(total), num_cues, num_dues)
