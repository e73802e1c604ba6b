"""Least-cost ng-route pricing on the multigraph, used as a lower-bound utility.

An ng-path may revisit a customer once it has left the path's bounded memory,
so its least cost per (load, last customer) never exceeds the cost of any
elementary route with the same signature; with full memory the relaxation
collapses to elementary optima.  States carry (memory set, load, consumption,
vertex); consumption is label-managed with (cost, consumption) dominance per
(memory, load, vertex), and loads strictly increase along transitions, which
gives the processing order.

The derived :func:`ng_lower_bound` assembles a simple combinatorial bound on
the full two-echelon problem from the pricing tables (per-unit route cost
covering the total demand, plus fleet fixed-cost floors).  It is deliberately
unsophisticated: a verification aid, not a competitive bounding procedure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, inf
from typing import Optional

from .model import DEPOT_ID, Instance
from .multigraph import MultiArc, Multigraph


class NgStateSpaceExceeded(RuntimeError):
    """The configurable label cap was hit; results would be incomplete."""


@dataclass(frozen=True)
class NgSets:
    """Per customer, the memory neighborhood: the customer plus its nearest peers."""

    delta: int
    neighbors: dict[int, frozenset[int]]

    @classmethod
    def build(cls, inst: Instance, delta: int = 12) -> "NgSets":
        if delta < 1:
            raise ValueError("delta must be >= 1")
        ids = inst.customer_ids
        nb: dict[int, frozenset[int]] = {}
        for i in ids:
            ranked = sorted((inst.distance(i, j), j) for j in ids if j != i)
            nb[i] = frozenset([i, *(j for _, j in ranked[: delta - 1])])
        return cls(delta, nb)


def omega(w: int, arc: MultiArc, battery_limit: int) -> frozenset[int]:
    """Admissible predecessor consumptions for arriving along ``arc`` with ``w``.

    Direct arc: the single value ``w - c`` when the leg fits; via station k:
    any charge state that still reaches k, provided ``w`` equals the fixed
    station-to-head consumption; empty otherwise.
    """
    if arc.station is None:
        if arc.consumption <= w:
            return frozenset({w - arc.consumption})
        return frozenset()
    if w == arc.consumption:
        hi = battery_limit - arc.station_leg
        if hi >= 0:
            return frozenset(range(hi + 1))
    return frozenset()


@dataclass(frozen=True)
class NgRouteTable:
    """Minimum closed ng-route cost per (load, last customer) for one satellite."""

    satellite: int
    by_load_last: dict[tuple[int, int], int]
    label_count: int

    @property
    def by_load(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for (q, _i), cost in self.by_load_last.items():
            if q not in out or cost < out[q]:
                out[q] = cost
        return out


def price_ng_routes(
    inst: Instance,
    graph: Multigraph,
    satellite: int,
    ng: NgSets,
    *,
    max_states: int = 2_000_000,
) -> NgRouteTable:
    """Run the pricing recursion from one satellite.

    Raises :class:`NgStateSpaceExceeded` instead of silently truncating when
    the number of stored labels passes ``max_states``.
    """
    custs = inst.customer_ids
    if satellite not in inst.satellite_by_id:
        raise ValueError(f"unknown satellite {satellite}")
    bit = {c: 1 << k for k, c in enumerate(custs)}
    nmask = {c: sum(bit[j] for j in ng.neighbors[c]) for c in custs}
    demand = inst.demand
    q2 = inst.q2_capacity
    limit = inst.battery_limit

    # labels[(vertex, load, memory mask)] -> nondominated [(w, cost)]
    labels: dict[tuple[int, int, int], list[tuple[int, int]]] = {}
    buckets: dict[int, set[tuple[int, int, int]]] = {}
    count = 0

    def push(key: tuple[int, int, int], w: int, cost: int) -> None:
        nonlocal count
        labs = labels.get(key)
        if labs is None:
            labels[key] = [(w, cost)]
            buckets.setdefault(key[1], set()).add(key)
            count += 1
            if count > max_states:
                raise NgStateSpaceExceeded(f"more than {max_states} labels")
            return
        keep = []
        for lw, lc in labs:
            if lw <= w and lc <= cost:
                return
            if not (w <= lw and cost <= lc):
                keep.append((lw, lc))
        keep.append((w, cost))
        count += len(keep) - len(labs)
        if count > max_states:
            raise NgStateSpaceExceeded(f"more than {max_states} labels")
        labs[:] = keep

    for c in custs:
        if demand[c] > q2:
            continue
        for arc in graph.arcs(satellite, c):
            # leaving the satellite fully charged, arrival consumption is the
            # arc's own consumption for both arc kinds
            push((c, demand[c], bit[c]), arc.consumption, arc.cost)

    # transitions strictly increase the load, so sweeping loads upward visits
    # every reachable state after all its predecessors
    for q in range(1, q2 + 1):
        keys = buckets.get(q)
        if not keys:
            continue
        for key in sorted(keys):
            i, _q, mask = key
            labs = labels[key]
            for j in custs:
                if mask & bit[j]:
                    continue  # memory forbids an immediate revisit
                qn = q + demand[j]
                if qn > q2:
                    continue
                arcs = graph.arcs(i, j)
                if not arcs:
                    continue
                nkey = (j, qn, (mask & nmask[j]) | bit[j])
                for arc in arcs:
                    if arc.station is None:
                        for w, cost in labs:
                            w2 = w + arc.consumption
                            if limit is not None and w2 > limit:
                                continue
                            push(nkey, w2, cost + arc.cost)
                    else:
                        best = None
                        for w, cost in labs:
                            if w + arc.station_leg <= limit and (
                                best is None or cost < best
                            ):
                                best = cost
                        if best is not None:
                            push(nkey, arc.consumption, best + arc.cost)

    table: dict[tuple[int, int], int] = {}
    for (i, q, _mask), labs in labels.items():
        entry = table.get((q, i), None)
        for arc in graph.arcs(i, satellite):
            for w, cost in labs:
                if limit is not None:
                    need = w + (arc.consumption if arc.station is None else arc.station_leg)
                    if need > limit:
                        continue
                total = cost + arc.cost
                if entry is None or total < entry:
                    entry = total
        if entry is not None:
            table[(q, i)] = entry
    return NgRouteTable(satellite, table, count)


def ng_lower_bound(
    inst: Instance,
    graph: Multigraph,
    ng: NgSets,
    *,
    max_states: int = 2_000_000,
) -> int:
    """Valid lower bound on the optimal total cost (weaker than exact bounding).

    Combines two floors and keeps the larger: (a) total demand times the best
    per-unit closed-route cost plus fleet fixed-cost floors, and (b) the cost
    of the single cheapest route plus the first-level trip that must reach its
    satellite.
    """
    if not inst.customers:
        return 0
    q_tot = inst.total_demand
    f1, f2 = inst.fixed_cost_l1, inst.fixed_cost_l2
    d0 = {k: inst.distance(DEPOT_ID, k) for k in inst.satellite_ids}
    tables = {
        k: price_ng_routes(inst, graph, k, ng, max_states=max_states)
        for k in inst.satellite_ids
    }

    first_floor = ceil(q_tot / inst.q1_capacity) * (f1 + 2 * min(d0.values()))

    unit_best: Optional[Fraction] = None
    joint: Optional[int] = None
    for k, tbl in tables.items():
        per_load = tbl.by_load
        for q, cost in per_load.items():
            u = Fraction(cost + f2, q)
            if unit_best is None or u < unit_best:
                unit_best = u
        if per_load:
            jk = min(per_load.values()) + f2 + f1 + 2 * d0[k]
            if joint is None or jk < joint:
                joint = jk

    if unit_best is None:
        # no closed route exists at all; fall back to pure fixed-cost floors
        return ceil(q_tot / inst.q2_capacity) * f2 + first_floor
    amortized = (q_tot * unit_best).__floor__() + first_floor
    return max(amortized, joint if joint is not None else 0)


def bound_report(
    inst: Instance,
    graph: Multigraph,
    ng: NgSets,
    *,
    max_states: int = 2_000_000,
) -> dict:
    """JSON-friendly summary: per-satellite pricing digests plus the global bound."""
    per_sat = {}
    for k in inst.satellite_ids:
        tbl = price_ng_routes(inst, graph, k, ng, max_states=max_states)
        loads = tbl.by_load
        per_sat[str(k)] = {
            "entries": len(tbl.by_load_last),
            "labels": tbl.label_count,
            "min_route_cost": min(loads.values()) if loads else None,
            "best_unit_cost": (
                min(float(Fraction(c + inst.fixed_cost_l2, q)) for q, c in loads.items())
                if loads
                else None
            ),
        }
    return {
        "instance": inst.name,
        "delta": ng.delta,
        "satellites": per_sat,
        "lower_bound": ng_lower_bound(inst, graph, ng, max_states=max_states),
    }
