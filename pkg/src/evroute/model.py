"""Route evaluation: state-of-charge recursion, trip time and charging cost,
feasibility checking, and the scalarized fitness used by the metaheuristics.

A solution is a station path plus a charge plan. A plan entry y_i is the
fraction of battery capacity bought at station i; entries at or below
CHARGE_EPS mean the vehicle drives past without stopping, so they add no
detour, wait, charge time, or cost. Plan entries for nodes not on the path
are inert the same way, except that the 0 <= y <= 1 bound still applies.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .instance import Instance

# Charge amounts at or below this are treated as not stopping at all.
CHARGE_EPS = 1e-9
# Slack applied to battery bound checks so exact-arithmetic optima survive
# floating point re-evaluation.
SOC_TOL = 1e-6
# Base penalty for infeasible or undecodable candidates.
PENALTY_BASE = 1e9


class InfeasibleRouteError(ValueError):
    """Raised by evaluate() when the plan runs the battery out of bounds."""

    def __init__(self, violation: "SocViolation", trace: "SocTrace"):
        self.violation = violation
        self.trace = trace
        where = "destination leg" if violation.node is None else f"node {violation.node}"
        super().__init__(f"{violation.kind} violation at {where} "
                         f"(magnitude {violation.magnitude:.6g})")


@dataclass(frozen=True)
class RouteSolution:
    """Ordered station path and the charge fraction bought at each stop."""

    path: tuple[int, ...]
    charge_plan: Mapping[int, float]


@dataclass(frozen=True)
class Objectives:
    time_h: float
    cost: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.time_h, self.cost)


@dataclass(frozen=True)
class SocViolation:
    kind: str  # source-reachability | arrival | overcharge | departure | final-soc
    node: int | None  # None means the final leg into D
    magnitude: float


@dataclass(frozen=True)
class SocTrace:
    """Departure SOC per path node plus the SOC left on arriving at D.

    When feasible is False, q and beta still hold the values the recursion
    produces, and violation names the first place a bound broke.
    """

    q: dict[int, float]
    beta: float
    feasible: bool
    violation: SocViolation | None


@dataclass(frozen=True)
class Violation:
    constraint: str  # "c3".."c19" or "source-reachability"
    magnitude: float
    detail: str


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple[Violation, ...]

    @property
    def feasible(self) -> bool:
        return not self.violations


def active_charges(instance: Instance, solution: RouteSolution) -> dict[int, float]:
    """Charge amounts that actually happen: on the path and above CHARGE_EPS,
    in path order."""
    plan = solution.charge_plan
    return {u: float(plan[u]) for u in solution.path
            if plan.get(u, 0.0) > CHARGE_EPS}


def path_structure_error(instance: Instance, path: tuple[int, ...]) -> str | None:
    """None when the path is structurally sound (starts in layer 0, ends in
    the last layer, every step is an existing edge); otherwise a message."""
    g = instance.graph
    if not path:
        return "path is empty"
    for u in path:
        if u not in g.node_set():
            return f"node {u} is not in the graph"
    if g.layer_of(path[0]) != 0:
        return f"path starts at node {path[0]} which is not in layer 0"
    if g.layer_of(path[-1]) != len(g.levels) - 1:
        return f"path ends at node {path[-1]} which is not in the last layer"
    for i, j in zip(path, path[1:]):
        if (i, j) not in g.edges:
            return f"edge ({i}, {j}) does not exist"
    return None


def _soc_scan(instance: Instance, path: tuple[int, ...],
              plan: Mapping[int, float]):
    """Run the SOC recursion along a structurally valid path.

    Returns (q, beta, violations) where q maps each path node to its
    departure SOC and violations lists every bound break in path order.
    """
    g = instance.graph
    stations = instance.stations
    r = instance.range_km
    soc = instance.params.initial_soc
    q: dict[int, float] = {}
    viols: list[SocViolation] = []
    prev = None
    for u in path:
        y_raw = plan.get(u, 0.0)
        y = y_raw if y_raw > CHARGE_EPS else 0.0
        detour = stations[u].detour_km if y > 0.0 else 0.0
        leg = g.source_dist[u] if prev is None else g.edges[(prev, u)]
        arrival = soc - (detour + leg) / r
        if arrival < -SOC_TOL:
            kind = "source-reachability" if prev is None else "arrival"
            viols.append(SocViolation(kind, u, -arrival))
        soc = arrival + y
        if soc > 1.0 + SOC_TOL:
            viols.append(SocViolation("overcharge", u, soc - 1.0))
        elif soc < -SOC_TOL:
            viols.append(SocViolation("departure", u, -soc))
        q[u] = soc
        prev = u
    beta = soc - g.dest_dist[path[-1]] / r
    if beta < -SOC_TOL:
        viols.append(SocViolation("final-soc", None, -beta))
    elif beta > 1.0 + SOC_TOL:
        viols.append(SocViolation("final-soc", None, beta - 1.0))
    return q, beta, viols


def soc_trace(instance: Instance, solution: RouteSolution) -> SocTrace:
    """SOC recursion along the path.

    Requires a structurally valid path (raises ValueError otherwise). The
    trace is always fully computed; feasibility reflects whether arrival SOC
    stayed >= -SOC_TOL everywhere, departure SOC within [0 - tol, 1 + tol],
    and the destination is reached with beta >= -SOC_TOL.
    """
    problem = path_structure_error(instance, solution.path)
    if problem is not None:
        raise ValueError(problem)
    q, beta, viols = _soc_scan(instance, solution.path, solution.charge_plan)
    return SocTrace(q=q, beta=beta, feasible=not viols,
                    violation=viols[0] if viols else None)


def driven_km(instance: Instance, solution: RouteSolution) -> float:
    """Total km driven: S leg, path legs, D leg, plus detours of actual stops."""
    g = instance.graph
    path = solution.path
    km = g.source_dist[path[0]] + g.dest_dist[path[-1]]
    for i, j in zip(path, path[1:]):
        km += g.edges[(i, j)]
    for u in active_charges(instance, solution):
        km += instance.stations[u].detour_km
    return km


def _objectives(instance: Instance, solution: RouteSolution) -> Objectives:
    p = instance.params
    g = instance.graph
    path = solution.path
    drive = g.source_dist[path[0]] + g.dest_dist[path[-1]]
    for i, j in zip(path, path[1:]):
        drive += g.edges[(i, j)]
    time = drive / p.speed_kmh
    cost = 0.0
    for u, y in active_charges(instance, solution).items():
        st = instance.stations[u]
        time += st.detour_km / p.speed_kmh + st.wait_h + y * p.capacity_kwh / st.power_kw
        cost += y * p.capacity_kwh * st.price
    return Objectives(time_h=time, cost=cost)


def evaluate(instance: Instance, solution: RouteSolution) -> Objectives:
    """Trip time (hours) and charging cost of a feasible solution.

    Raises InfeasibleRouteError when the SOC recursion breaks a bound and
    ValueError when the path itself is malformed.
    """
    tr = soc_trace(instance, solution)
    if not tr.feasible:
        raise InfeasibleRouteError(tr.violation, tr)
    return _objectives(instance, solution)


def try_evaluate(instance: Instance, solution: RouteSolution) -> Objectives | None:
    """evaluate() variant returning None on SOC-infeasible plans."""
    tr = soc_trace(instance, solution)
    if not tr.feasible:
        return None
    return _objectives(instance, solution)


_SOC_KIND_TO_CONSTRAINT = {
    "source-reachability": "source-reachability",
    "arrival": "c11",
    "overcharge": "c14",
    "departure": "c14",
    "final-soc": "c15",
}


def check_feasible(instance: Instance, solution: RouteSolution) -> ConstraintReport:
    """Full constraint audit of an arbitrary solution record.

    Reconstructs the travel indicators (edge uses, source/destination
    attachment, charging flags) from the path and charge plan and grades
    every violated constraint with a magnitude. Binary domains that the
    record cannot express differently (w_S, w_D, z) hold by construction;
    duplicate edge uses surface as c19. Never raises.
    """
    g = instance.graph
    path = solution.path
    viols: list[Violation] = []

    for u, y in sorted(solution.charge_plan.items()):
        if y < -SOC_TOL:
            viols.append(Violation("c13", -float(y), f"y[{u}] = {y} below 0"))
        elif y > 1.0 + SOC_TOL:
            viols.append(Violation("c13", float(y) - 1.0, f"y[{u}] = {y} above 1"))

    if not path:
        viols.append(Violation("c3", 1.0, "empty path: no departure from source"))
        viols.append(Violation("c4", 1.0, "empty path: no arrival at destination"))
        return ConstraintReport(tuple(viols))

    structural = False
    known = g.node_set()
    for u in dict.fromkeys(path):
        if u not in known:
            viols.append(Violation("c7", 1.0, f"node {u} is not in the graph"))
            structural = True
    if path[0] in known and g.layer_of(path[0]) != 0:
        viols.append(Violation(
            "c3", 1.0,
            f"path starts at node {path[0]} in layer {g.layer_of(path[0])}; "
            "the source connects only to layer 0"))
        structural = True
    if path[-1] in known and g.layer_of(path[-1]) != len(g.levels) - 1:
        viols.append(Violation(
            "c4", 1.0,
            f"path ends at node {path[-1]} in layer {g.layer_of(path[-1])}; "
            "the destination is reached only from the last layer"))
        structural = True

    steps = Counter(zip(path, path[1:]))
    for (i, j), cnt in sorted(steps.items()):
        if i == j:
            viols.append(Violation("c12", float(cnt), f"self loop at node {i}"))
            structural = True
            continue
        if i in known and j in known and (i, j) not in g.edges:
            viols.append(Violation("c7", float(cnt), f"edge ({i}, {j}) does not exist"))
            structural = True
        if cnt > 1:
            viols.append(Violation("c19", float(cnt - 1),
                                   f"edge ({i}, {j}) used {cnt} times"))
            structural = True

    indeg = Counter(j for _, j in steps.elements())
    outdeg = Counter(i for i, _ in steps.elements())
    for u in sorted(set(path)):
        if indeg[u] > 1:
            viols.append(Violation("c5", float(indeg[u] - 1),
                                   f"node {u} is entered {indeg[u]} times"))
            structural = True
        if outdeg[u] > 1:
            viols.append(Violation("c6", float(outdeg[u] - 1),
                                   f"node {u} is left {outdeg[u]} times"))
            structural = True
        balance = (indeg[u] + (1 if u == path[0] else 0)
                   - outdeg[u] - (1 if u == path[-1] else 0))
        if balance != 0:
            viols.append(Violation("c7", float(abs(balance)),
                                   f"flow imbalance {balance} at node {u}"))
            structural = True

    if not structural:
        _, _, soc_viols = _soc_scan(instance, path, solution.charge_plan)
        for sv in soc_viols:
            where = "destination leg" if sv.node is None else f"node {sv.node}"
            viols.append(Violation(_SOC_KIND_TO_CONSTRAINT[sv.kind],
                                   sv.magnitude, f"{sv.kind} at {where}"))
    return ConstraintReport(tuple(viols))


def penalized_fitness(instance: Instance, solution: RouteSolution,
                      weights: tuple[float, float] = (0.5, 0.5)) -> float:
    """Weighted scalarization with a graded infeasibility penalty.

    Feasible: weights[0] * time_h + weights[1] * cost. Infeasible:
    PENALTY_BASE plus the sum of violation magnitudes, which keeps every
    infeasible candidate above every feasible one while still ranking
    infeasible candidates by how badly they fail.
    """
    wt, wc = weights
    if wt < 0 or wc < 0 or (wt == 0 and wc == 0):
        raise ValueError("weights must be nonnegative and not both zero")
    report = check_feasible(instance, solution)
    if not report.feasible:
        return PENALTY_BASE + sum(v.magnitude for v in report.violations)
    obj = _objectives(instance, solution)
    return wt * obj.time_h + wc * obj.cost
