"""Reformulated multigraph: parallel arcs encoding direct or via-one-station legs.

Between every admissible ordered vertex pair (satellite↔customer or
customer→customer) the graph carries one *direct* arc plus one arc per
charging location k reachable within battery range on both half-legs.  A
via-station arc costs the full detour ``d(i,k) + d(k,j)`` but its arrival
consumption is only ``c(k,j)`` because the battery is fully restored at k.

Arc bundles are then thinned by a dominance rule that is sensitive to the
tail type: leaving a satellite the battery is always full, so only (cost,
arrival consumption) matter; leaving a customer the approach leg to the
station also matters, and direct arcs are never compared against via arcs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .model import DEPOT_ID, Instance, SecondLevelRoute


@dataclass(frozen=True)
class MultiArc:
    tail: int
    head: int
    cost: int
    consumption: int  # arrival consumption at head, scaled units
    station: Optional[int]  # charging location id, None = direct leg
    station_leg: int = 0  # consumption tail -> station (0 for direct arcs)

    def sort_key(self) -> tuple[int, int, int]:
        return (self.cost, self.consumption, -1 if self.station is None else self.station)


class Multigraph:
    """Per ordered pair, the surviving arcs sorted by cost ascending."""

    def __init__(self, inst: Instance, bundles: dict[tuple[int, int], tuple[MultiArc, ...]]):
        self.instance = inst
        self._bundles = bundles
        self._empty: tuple[MultiArc, ...] = ()

    def arcs(self, tail: int, head: int) -> tuple[MultiArc, ...]:
        return self._bundles.get((tail, head), self._empty)

    def pairs(self) -> Iterator[tuple[int, int]]:
        return iter(self._bundles)

    def arc_count(self) -> int:
        return sum(len(b) for b in self._bundles.values())

    def to_csv(self) -> str:
        """Debug dump: one `tail,head,p,cost,consumption,station` row per arc."""
        rows = ["tail,head,p,cost,consumption,station"]
        for (i, j) in sorted(self._bundles):
            for p, arc in enumerate(self._bundles[i, j], 1):
                st = "" if arc.station is None else arc.station
                rows.append(f"{i},{j},{p},{arc.cost},{arc.consumption},{st}")
        return "\n".join(rows) + "\n"


def build_multigraph(inst: Instance) -> Multigraph:
    """Construct all admissible arcs, pre-filtered by battery range.

    With an unconstrained battery only direct arcs are generated: charging
    stops can never be required, and keeping via arcs would only let the
    integer rounding of detour legs masquerade as shortcuts.
    """
    limit = inst.battery_limit
    sats = inst.satellite_ids
    custs = inst.customer_ids
    charge = inst.charging_ids

    pairs: list[tuple[int, int]] = []
    for s in sats:
        for c in custs:
            pairs.append((s, c))
            pairs.append((c, s))
    for a in custs:
        for b in custs:
            if a != b:
                pairs.append((a, b))

    cons = inst.consumption
    dist = inst.distance
    bundles: dict[tuple[int, int], tuple[MultiArc, ...]] = {}
    for i, j in pairs:
        bundle = []
        c_ij = cons(i, j)
        if limit is None or c_ij <= limit:
            bundle.append(MultiArc(i, j, dist(i, j), c_ij, None))
        if limit is not None:
            for k in charge:
                if k == i or k == j:
                    continue  # charging at an endpoint adds nothing over the direct arc
                c_ik = cons(i, k)
                c_kj = cons(k, j)
                if c_ik <= limit and c_kj <= limit:
                    bundle.append(
                        MultiArc(i, j, dist(i, k) + dist(k, j), c_kj, k, station_leg=c_ik)
                    )
        if bundle:
            bundle.sort(key=MultiArc.sort_key)
            bundles[i, j] = tuple(bundle)
    return Multigraph(inst, bundles)


def _removable(r1: MultiArc, r2: MultiArc, tail_is_satellite: bool) -> bool:
    """Whether r2 justifies dropping r1 from the same bundle."""
    if tail_is_satellite:
        if r2.cost > r1.cost or r2.consumption > r1.consumption:
            return False
    else:
        # customer tail: the rule only relates two via-station arcs
        if r1.station is None or r2.station is None:
            return False
        if (
            r2.cost > r1.cost
            or r2.consumption > r1.consumption
            or r2.station_leg > r1.station_leg
        ):
            return False
    if (r2.cost, r2.consumption) != (r1.cost, r1.consumption) or (
        not tail_is_satellite and r2.station_leg != r1.station_leg
    ):
        return True
    # full tie: keep exactly one arc, the lexicographically smallest
    return r2.sort_key() < r1.sort_key()


def reduce_by_dominance(graph: Multigraph) -> Multigraph:
    """Drop arcs that some parallel arc renders useless in any optimal route."""
    inst = graph.instance
    sat_set = set(inst.satellite_ids)
    reduced: dict[tuple[int, int], tuple[MultiArc, ...]] = {}
    for (i, j) in graph.pairs():
        bundle = graph.arcs(i, j)
        if len(bundle) == 1:
            reduced[i, j] = bundle
            continue
        is_sat = i in sat_set
        keep = [
            r1
            for r1 in bundle
            if not any(r2 is not r1 and _removable(r1, r2, is_sat) for r2 in bundle)
        ]
        reduced[i, j] = tuple(keep)
    return Multigraph(inst, reduced)


def expand_arc_route(inst: Instance, arcs: Sequence[MultiArc]) -> SecondLevelRoute:
    """Map a chained arc route in the multigraph back to an explicit route.

    Via-station arcs expand to (tail, station, head); costs and the battery
    trace are preserved exactly.
    """
    if not arcs:
        raise ValueError("empty arc route")
    sat = arcs[0].tail
    if sat not in inst.satellite_by_id:
        raise ValueError(f"arc route must start at a satellite, got {sat}")
    if arcs[-1].head != sat:
        raise ValueError("arc route must return to its starting satellite")
    visits: list[int] = []
    load = 0
    prev_head = sat
    for idx, arc in enumerate(arcs):
        if arc.tail != prev_head:
            raise ValueError(f"arc {idx} tail {arc.tail} does not chain from {prev_head}")
        if arc.station is not None:
            visits.append(arc.station)
        if idx < len(arcs) - 1:
            visits.append(arc.head)
            load += inst.demand.get(arc.head, 0)
        prev_head = arc.head
    return SecondLevelRoute(sat, tuple(visits), load)
