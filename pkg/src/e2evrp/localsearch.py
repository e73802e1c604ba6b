"""Granular first-improvement local search on the second-level routes.

Five neighborhoods (2-opt, 2-opt*, relocate, swap, swap2-1) are scanned in
random order over granular customer pairs.  Each candidate move runs through
a two-stage evaluation:

1. an approximation that keeps every charging stop glued to the customer
   (or satellite) it currently follows, so the move's effect on route
   distance is a handful of leg lookups (inter-route moves are O(1);
   same-route variants and reversals recompute the touched segment);
2. if the move is load-feasible and the approximate distance of the touched
   routes does not grow by more than the filter percentage, the touched
   routes are re-priced exactly with the charging recursion (penalized
   fallback included) and the move is applied only when the full objective,
   fixed costs and first level included, strictly improves.

Tail exchanges (2-opt*) stay within one satellite; moves across satellites
check satellite capacity and re-cost the first level from scratch.

The candidate loops are the innermost hot path of the whole solver, hence
the inlined distance lookups and the two-phase structure that avoids
materializing a move unless it passes the load and distance gates.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .search import SolverContext, WorkingSolution, build_first_level

# approximate-filter slack: moves may deteriorate the frozen-station distance
# of the touched routes by at most 3% before the exact re-evaluation
FILTER_NUM = 103
FILTER_DEN = 100

# flipped by tests to cross-check every leg-delta against a splice recompute
_DEBUG_CHECK_DELTAS = False

Pair = tuple[int, Optional[int]]  # (customer id, trailing charging stop or None)

_NEIGHBORHOODS = ("two_opt", "two_opt_star", "relocate", "swap", "swap21")


def _aug_distance(
    D: dict, satellite: int, anchor: Optional[int], pairs: Sequence[Pair]
) -> int:
    total = 0
    prev, stop = satellite, anchor
    for c, trailing in pairs:
        row = D[prev]
        total += row[c] if stop is None else row[stop] + D[stop][c]
        prev, stop = c, trailing
    row = D[prev]
    total += row[satellite] if stop is None else row[stop] + D[stop][satellite]
    return total


class _LsState:
    """Pair-list mirror of a working solution, rebuilt after each applied move."""

    __slots__ = ("sol", "pairs", "anchor", "aug", "loc", "pref", "dem", "nostop")

    def __init__(self, ctx: SolverContext, sol: WorkingSolution):
        self.sol = sol
        self.refresh(ctx)

    def refresh(self, ctx: SolverContext) -> None:
        D = ctx.inst._dist
        demand = ctx.inst.demand
        self.pairs: list[list[Pair]] = []
        self.anchor: list[Optional[int]] = []  # stop right after the satellite
        self.aug: list[int] = []
        self.pref: list[list[int]] = []  # per route, prefix demand sums
        self.nostop: list[bool] = []  # route carries no customer-trailing stop
        self.loc: dict[int, tuple[int, int]] = {}
        self.dem: dict[int, int] = self.sol.sat_demand()
        for ri, route in enumerate(self.sol.routes):
            by_leg = dict(route.plan.stations) if route.plan else {}
            anchor = by_leg.get(1)
            # a stop on leg l >= 2 trails the customer at position l-2
            pairs = [(c, by_leg.get(idx + 2)) for idx, c in enumerate(route.customers)]
            self.pairs.append(pairs)
            self.anchor.append(anchor)
            self.aug.append(_aug_distance(D, route.satellite, anchor, pairs))
            self.nostop.append(len(by_leg) - (anchor is not None) == 0)
            pref = [0]
            acc = 0
            for pos, (c, _) in enumerate(pairs):
                self.loc[c] = (ri, pos)
                acc += demand[c]
                pref.append(acc)
            self.pref.append(pref)

    def unit(self, ri: int, p: int) -> Pair:
        """Pair at position p; position -1 is the satellite with its anchor stop."""
        if p < 0:
            return (self.sol.routes[ri].satellite, self.anchor[ri])
        return self.pairs[ri][p]

    def head(self, ri: int, p: int) -> int:
        """Vertex at position p, or the satellite one past the last customer."""
        pairs = self.pairs[ri]
        return pairs[p][0] if p < len(pairs) else self.sol.routes[ri].satellite


def local_search(
    ctx: SolverContext, sol: WorkingSolution, rng: random.Random
) -> WorkingSolution:
    """Improve ``sol`` in place until no move in any neighborhood helps."""
    if not sol.routes:
        return sol
    sol.ensure_plans(ctx)
    st = _LsState(ctx, sol)
    customers = list(ctx.inst.customer_ids)
    granular = ctx.granular
    improved = True
    while improved:
        improved = False
        order = list(_NEIGHBORHOODS)
        rng.shuffle(order)
        for nb in order:
            scan = customers[:]
            rng.shuffle(scan)
            handler = _HANDLERS[nb]
            for i in scan:
                for j in granular[i]:
                    if i != j and handler(ctx, st, i, j):
                        improved = True
    return sol


# ---------------------------------------------------------------------------
# neighborhoods; ``_gate`` rejects on load or the distance filter before any
# move list is materialized
# ---------------------------------------------------------------------------


def _gate(st: _LsState, affected: tuple, loads: tuple, delta: int, q2: int) -> bool:
    for load in loads:
        if load > q2:
            return False
    old = 0
    for ri in affected:
        old += st.aug[ri]
    return (old + delta) * FILTER_DEN <= FILTER_NUM * old


def _try_two_opt(ctx: SolverContext, st: _LsState, i: int, j: int) -> bool:
    ri, pi = st.loc[i]
    rj, pj = st.loc[j]
    if ri != rj:
        return False
    # symmetric move: let the canonically ordered scan handle it when the
    # reverse direction is also granular
    if pi > pj and i in ctx.granular_set[j]:
        return False
    lo, hi = (pi, pj) if pi < pj else (pj, pi)
    if hi - lo < 1:
        return False
    D = ctx.inst._dist
    p = st.pairs[ri]
    sv, ss = st.unit(ri, lo - 1)
    tail = st.head(ri, hi + 1)
    vlo, vhi = p[lo][0], p[hi][0]
    row = D[sv]
    old = row[vlo] if ss is None else row[ss] + D[ss][vlo]
    new = row[vhi] if ss is None else row[ss] + D[ss][vhi]
    uv, us = p[hi]
    row = D[uv]
    old += row[tail] if us is None else row[us] + D[us][tail]
    uv, us = p[lo]
    row = D[uv]
    new += row[tail] if us is None else row[us] + D[us][tail]
    if not st.nostop[ri]:
        # charging stops travel with their customers, so the reversed
        # interior legs change cost; station-free routes skip this loop
        for k in range(lo, hi):
            av, as_ = p[k]
            bv, bs = p[k + 1]
            row = D[av]
            old += row[bv] if as_ is None else row[as_] + D[as_][bv]
            row = D[bv]
            new += row[av] if bs is None else row[bs] + D[bs][av]
    load = st.sol.routes[ri].load
    if not _gate(st, (ri,), (), new - old, 0):
        return False
    cand = p[:lo] + p[lo : hi + 1][::-1] + p[hi + 1 :]
    return _commit(ctx, st, [(ri, cand, load)], new - old)


def _try_two_opt_star(ctx: SolverContext, st: _LsState, i: int, j: int) -> bool:
    ri, pi = st.loc[i]
    rj, pj = st.loc[j]
    routes = st.sol.routes
    if ri == rj or routes[ri].satellite != routes[rj].satellite:
        return False
    D = ctx.inst._dist
    a, b = st.pairs[ri], st.pairs[rj]
    iv, is_ = a[pi]
    jv, js = b[pj]
    head_i = a[pi + 1][0] if pi + 1 < len(a) else routes[ri].satellite
    head_j = b[pj + 1][0] if pj + 1 < len(b) else routes[rj].satellite
    row = D[iv]
    delta = (row[head_j] - row[head_i]) if is_ is None else (D[is_][head_j] - D[is_][head_i])
    row = D[jv]
    delta += (row[head_i] - row[head_j]) if js is None else (D[js][head_i] - D[js][head_j])
    h1 = st.pref[ri][pi + 1]
    h2 = st.pref[rj][pj + 1]
    l1 = h1 + routes[rj].load - h2
    l2 = h2 + routes[ri].load - h1
    if not _gate(st, (ri, rj), (l1, l2), delta, ctx.inst.q2_capacity):
        return False
    moves = [
        (ri, a[: pi + 1] + b[pj + 1 :], l1),
        (rj, b[: pj + 1] + a[pi + 1 :], l2),
    ]
    return _commit(ctx, st, moves, delta)


def _leg(D: dict, unit: Pair, head: int) -> int:
    v, s = unit
    row = D[v]
    return row[head] if s is None else row[s] + D[s][head]


def _try_relocate(ctx: SolverContext, st: _LsState, i: int, j: int) -> bool:
    ri, pi = st.loc[i]
    rj, pj = st.loc[j]
    D = ctx.inst._dist
    routes = st.sol.routes
    if ri == rj:
        p = st.pairs[ri]
        load = routes[ri].load
        base = p[:pi] + p[pi + 1 :]
        jpos = pj - 1 if pj > pi else pj
        adjacent = abs(pj - pi) == 1
        unit_i = p[pi]
        if not adjacent:
            prev_i = st.unit(ri, pi - 1)
            after_i = st.head(ri, pi + 1)
            rem = _leg(D, prev_i, after_i) - _leg(D, prev_i, i) - _leg(D, unit_i, after_i)
        for offset in (0, 1):
            if adjacent:
                # neighboring slots share legs with the removal: splice and
                # recompute the short route instead of case analysis
                cand = base[: jpos + offset] + [unit_i] + base[jpos + offset :]
                if cand == p:
                    continue
                delta = (
                    _aug_distance(D, routes[ri].satellite, st.anchor[ri], cand)
                    - st.aug[ri]
                )
            else:
                t = pj - 1 + offset
                anchor = st.unit(ri, t)
                hb = st.head(ri, t + 1)
                delta = rem + _leg(D, anchor, i) + _leg(D, unit_i, hb) - _leg(D, anchor, hb)
                cand = None
            if not _gate(st, (ri,), (), delta, 0):
                continue
            if cand is None:
                cand = base[: jpos + offset] + [unit_i] + base[jpos + offset :]
                if cand == p:
                    continue
            if _commit(ctx, st, [(ri, cand, load)], delta):
                return True
        return False
    q = ctx.inst.demand[i]
    l1 = routes[ri].load - q
    l2 = routes[rj].load + q
    if l2 > ctx.inst.q2_capacity:
        return False
    a, b = st.pairs[ri], st.pairs[rj]
    unit_i = a[pi]
    prev_i = st.unit(ri, pi - 1)
    after_i = st.head(ri, pi + 1)
    rem = _leg(D, prev_i, after_i) - _leg(D, prev_i, i) - _leg(D, unit_i, after_i)
    for offset in (0, 1):
        anchor = st.unit(rj, pj - 1 + offset)
        hb = st.head(rj, pj + offset)
        ins = _leg(D, anchor, i) + _leg(D, unit_i, hb) - _leg(D, anchor, hb)
        delta = rem + ins
        if not _gate(st, (ri, rj), (), delta, 0):
            continue
        moves = [
            (ri, a[:pi] + a[pi + 1 :], l1),
            (rj, b[: pj + offset] + [unit_i] + b[pj + offset :], l2),
        ]
        if _commit(ctx, st, moves, delta):
            return True
    return False


def _try_swap(ctx: SolverContext, st: _LsState, i: int, j: int) -> bool:
    # symmetric move: defer to the canonically ordered scan when it will occur
    if st.loc[j] < st.loc[i] and i in ctx.granular_set[j]:
        return False
    return _exchange(ctx, st, i, j, 1, 1)


def _try_swap21(ctx: SolverContext, st: _LsState, i: int, j: int) -> bool:
    if _exchange(ctx, st, i, j, 2, 1):
        return True
    return _exchange(ctx, st, j, i, 2, 1)


def _seg_cost(D: dict, prev: Pair, seg: list[Pair], head: int) -> int:
    total = 0
    cur = prev
    for pr in seg:
        total += _leg(D, cur, pr[0])
        cur = pr
    return total + _leg(D, cur, head)


def _exchange(
    ctx: SolverContext, st: _LsState, i: int, j: int, len1: int, len2: int
) -> bool:
    """Exchange the ``len1`` pairs starting at i with the ``len2`` at j."""
    r1, s1 = st.loc[i]
    r2, s2 = st.loc[j]
    p1 = st.pairs[r1]
    if s1 + len1 > len(p1):
        return False
    routes = st.sol.routes
    D = ctx.inst._dist
    if r1 == r2:
        a, la, b, lb = (s1, len1, s2, len2) if s1 < s2 else (s2, len2, s1, len1)
        if a + la > b:
            return False  # overlapping segments
        load = routes[r1].load
        p = p1
        if a + la == b:
            # adjacent segments share a junction leg: splice and recompute
            cand = p[:a] + p[b : b + lb] + p[a : a + la] + p[b + lb :]
            if cand == p:
                return False
            delta = (
                _aug_distance(D, routes[r1].satellite, st.anchor[r1], cand)
                - st.aug[r1]
            )
            if not _gate(st, (r1,), (), delta, 0):
                return False
            return _commit(ctx, st, [(r1, cand, load)], delta)
        # detached segments swap in place: only four junction legs change
        ua = st.unit(r1, a - 1)
        ha = p[a + la][0]
        ub = p[b - 1]
        hb = st.head(r1, b + lb)
        first_a, last_a = p[a], p[a + la - 1]
        first_b, last_b = p[b], p[b + lb - 1]
        delta = (
            _leg(D, ua, first_b[0])
            + _leg(D, last_b, ha)
            + _leg(D, ub, first_a[0])
            + _leg(D, last_a, hb)
            - _leg(D, ua, first_a[0])
            - _leg(D, last_a, ha)
            - _leg(D, ub, first_b[0])
            - _leg(D, last_b, hb)
        )
        if not _gate(st, (r1,), (), delta, 0):
            return False
        cand = p[:a] + p[b : b + lb] + p[a + la : b] + p[a : a + la] + p[b + lb :]
        if cand == p:
            return False
        return _commit(ctx, st, [(r1, cand, load)], delta)
    p2 = st.pairs[r2]
    if s2 + len2 > len(p2):
        return False
    pref1, pref2 = st.pref[r1], st.pref[r2]
    d1 = pref1[s1 + len1] - pref1[s1]
    d2 = pref2[s2 + len2] - pref2[s2]
    l1 = routes[r1].load - d1 + d2
    l2 = routes[r2].load - d2 + d1
    q2cap = ctx.inst.q2_capacity
    if l1 > q2cap or l2 > q2cap:
        return False
    seg1 = p1[s1 : s1 + len1]
    seg2 = p2[s2 : s2 + len2]
    u1 = st.unit(r1, s1 - 1)
    u2 = st.unit(r2, s2 - 1)
    h1 = st.head(r1, s1 + len1)
    h2 = st.head(r2, s2 + len2)
    delta = (
        _seg_cost(D, u1, seg2, h1)
        + _seg_cost(D, u2, seg1, h2)
        - _seg_cost(D, u1, seg1, h1)
        - _seg_cost(D, u2, seg2, h2)
    )
    if not _gate(st, (r1, r2), (), delta, 0):
        return False
    moves = [
        (r1, p1[:s1] + seg2 + p1[s1 + len1 :], l1),
        (r2, p2[:s2] + seg1 + p2[s2 + len2 :], l2),
    ]
    return _commit(ctx, st, moves, delta)


_HANDLERS = {
    "two_opt": _try_two_opt,
    "two_opt_star": _try_two_opt_star,
    "relocate": _try_relocate,
    "swap": _try_swap,
    "swap21": _try_swap21,
}


# ---------------------------------------------------------------------------
# exact evaluation and application
# ---------------------------------------------------------------------------


def _commit(
    ctx: SolverContext,
    st: _LsState,
    moves: list[tuple[int, list[Pair], int]],
    delta_aug: int,
) -> bool:
    inst = ctx.inst
    sol = st.sol

    if _DEBUG_CHECK_DELTAS:
        D = inst._dist
        old = sum(st.aug[ri] for ri, _, _ in moves)
        recomputed = sum(
            _aug_distance(D, sol.routes[ri].satellite, st.anchor[ri], pairs)
            for ri, pairs, _ in moves
        )
        assert recomputed - old == delta_aug, (delta_aug, recomputed - old)

    # satellite capacity for demand that moves across satellites
    delta_dem: dict[int, int] = {}
    for ri, _pairs, load in moves:
        k = sol.routes[ri].satellite
        delta_dem[k] = delta_dem.get(k, 0) + load - sol.routes[ri].load
    demands_change = any(delta_dem.values())
    if demands_change:
        for k, dv in delta_dem.items():
            cap = inst.satellite_by_id[k].capacity
            if dv > 0 and cap is not None and st.dem.get(k, 0) + dv > cap:
                return False

    # exact re-pricing of the touched routes
    f2 = inst.fixed_cost_l2
    old_part = 0
    new_part = 0
    new_plans: list = []
    for ri, pairs, _load in moves:
        plan_old = sol.routes[ri].plan
        old_part += plan_old.cost + plan_old.penalty + f2
        if not pairs:
            new_plans.append(None)
            continue
        plan = ctx.plan(sol.routes[ri].satellite, tuple(c for c, _ in pairs))
        new_plans.append(plan)
        new_part += plan.cost + plan.penalty + f2
    delta = new_part - old_part

    new_first = None
    if demands_change:
        demands = dict(st.dem)
        for k, dv in delta_dem.items():
            demands[k] = demands.get(k, 0) + dv
        rebuilt = build_first_level(inst, demands)
        if rebuilt is None:
            return False
        new_first = rebuilt
        delta += (
            rebuilt[1]
            + inst.fixed_cost_l1 * len(rebuilt[0])
            - sol.l1_distance
            - inst.fixed_cost_l1 * len(sol.first_level)
        )

    if delta >= 0:
        return False

    for (ri, pairs, load), plan in zip(moves, new_plans):
        route = sol.routes[ri]
        route.customers = [c for c, _ in pairs]
        route.load = load
        route.plan = plan
    sol.routes = [r for r in sol.routes if r.customers]
    if new_first is not None:
        sol.first_level, sol.l1_distance = new_first
    st.refresh(ctx)
    return True
