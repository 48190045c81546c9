"""Exact bi-objective solvers.

For a fixed path and a fixed set of charging stops, the remaining problem
(how much to buy where) is a small linear program over the charge fractions,
so global optima come from enumerating paths and stop subsets and solving
each LP exactly. The budget-sweep front generator and the brute-force grid
oracle both build on that.

min_time/min_cost and every budget round are lexicographic: they minimize
the primary objective, then the other objective among primary-optimal
solutions, so every reported point is genuinely nondominated.
"""
from __future__ import annotations

import itertools
from bisect import bisect_left
from dataclasses import dataclass

from . import model
from .instance import Instance, RouteGraph
from .lp import OPTIMAL, solve_lp
from .model import CHARGE_EPS, Objectives, RouteSolution
from .pareto import FrontPoint, ParetoFront, filter_nondominated

DEFAULT_PATH_CAP = 10**6
DEFAULT_EVAL_CAP = 10**7
TIE_TOL = 1e-9
LEX_SLACK = 1e-9
_CAP_SLACK = 1e-9


class PathCountError(RuntimeError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"graph admits {count} S->D paths, above the cap of {cap}")


class ResourceCapError(RuntimeError):
    pass


class InfeasibleInstanceError(RuntimeError):
    pass


def count_paths(graph: RouteGraph) -> int:
    """Number of S->D paths, by dynamic programming over the DAG."""
    last = set(graph.last_layer)
    counts: dict[int, int] = {}
    for layer in reversed(graph.levels):
        for u in layer:
            if u in last:
                counts[u] = 1
            else:
                counts[u] = sum(counts[v] for v in graph.out_neighbors(u))
    return sum(counts[u] for u in graph.first_layer)


def enumerate_paths(graph: RouteGraph, cap: int = DEFAULT_PATH_CAP) -> list[tuple[int, ...]]:
    """All S->D paths in lexicographic node-id order.

    Raises PathCountError before materializing anything when the DAG admits
    more than cap paths.
    """
    total = count_paths(graph)
    if total > cap:
        raise PathCountError(total, cap)
    last = set(graph.last_layer)
    paths: list[tuple[int, ...]] = []

    def walk(prefix: tuple[int, ...], u: int) -> None:
        if u in last:
            paths.append(prefix)
            return
        for v in graph.out_neighbors(u):
            walk(prefix + (v,), v)

    for s in sorted(graph.first_layer):
        walk((s,), s)
    return paths


class _PathData:
    """Per-path constants shared by all subset LPs."""

    __slots__ = ("path", "k", "legs", "d_dest", "delta", "stop_time",
                 "price_coef", "time_coef", "drive_time", "r", "alpha")

    def __init__(self, instance: Instance, path: tuple[int, ...]):
        g = instance.graph
        p = instance.params
        self.path = path
        self.k = len(path)
        self.legs = [g.source_dist[path[0]]]
        self.legs += [g.edges[(path[i - 1], path[i])] for i in range(1, self.k)]
        self.d_dest = g.dest_dist[path[-1]]
        stations = [instance.stations[u] for u in path]
        self.delta = [s.detour_km for s in stations]
        self.stop_time = [s.detour_km / p.speed_kmh + s.wait_h for s in stations]
        self.price_coef = [p.capacity_kwh * s.price for s in stations]
        self.time_coef = [p.capacity_kwh / s.power_kw for s in stations]
        self.drive_time = (sum(self.legs) + self.d_dest) / p.speed_kmh
        self.r = p.range_km
        self.alpha = p.initial_soc

    def quick_reject(self) -> bool:
        """Necessary conditions no charging subset can fix."""
        if self.legs[0] > self.alpha * self.r + _CAP_SLACK * self.r:
            return True
        return any(d > self.r + _CAP_SLACK * self.r for d in self.legs[1:] + [self.d_dest])


@dataclass(frozen=True)
class PathPlan:
    objectives: Objectives
    solution: RouteSolution
    value: float


def _objective_value(obj: Objectives, objective: str,
                     weights: tuple[float, float] | None) -> float:
    if objective == "time":
        return obj.time_h
    if objective == "cost":
        return obj.cost
    wt, wc = weights
    return wt * obj.time_h + wc * obj.cost


def _optimize_path_data(instance: Instance, pd: _PathData, objective: str,
                        weights: tuple[float, float] | None = None,
                        cost_cap: float | None = None,
                        time_cap: float | None = None,
                        incumbent: float | None = None) -> PathPlan | None:
    if objective == "weighted" and weights is None:
        raise ValueError("weighted objective needs weights")
    if pd.quick_reject():
        return None
    k, r, alpha = pd.k, pd.r, pd.alpha
    best_value = incumbent
    best: tuple[float, tuple[int, ...], list[float]] | None = None

    for size in range(k + 1):
        for z in itertools.combinations(range(k), size):
            zset = set(z)
            depl = []
            acc = 0.0
            for j in range(k):
                acc += pd.legs[j] + (pd.delta[j] if j in zset else 0.0)
                depl.append(acc / r)

            # Charging to the brim at every chosen stop maximizes every
            # prefix SOC, so this greedy pass decides subset feasibility.
            soc = alpha
            prev = 0.0
            ok = True
            for j in range(k):
                soc -= depl[j] - prev
                prev = depl[j]
                if soc < -1e-9:
                    ok = False
                    break
                if j in zset:
                    soc = 1.0
            if ok and soc - pd.d_dest / r < -1e-9:
                ok = False
            if not ok:
                continue

            t0 = pd.drive_time + sum(pd.stop_time[j] for j in z)
            need = max(0.0, depl[-1] + pd.d_dest / r - alpha)
            if z:
                cost_lb = need * min(pd.price_coef[j] for j in z)
                time_lb = t0 + need * min(pd.time_coef[j] for j in z)
            else:
                cost_lb = 0.0
                time_lb = t0
            if cost_cap is not None and cost_lb > cost_cap + _CAP_SLACK:
                continue
            if time_cap is not None and time_lb > time_cap + _CAP_SLACK:
                continue
            if best_value is not None:
                if objective == "time":
                    bound = time_lb
                elif objective == "cost":
                    bound = cost_lb
                else:
                    bound = weights[0] * time_lb + weights[1] * cost_lb
                if bound >= best_value - TIE_TOL:
                    continue

            if not z:
                value = t0 if objective == "time" else \
                    0.0 if objective == "cost" else weights[0] * t0
                ys: list[float] = []
            else:
                nv = len(z)
                rows: list[list[float]] = []
                rhs: list[float] = []
                for j in range(k):
                    nvars = bisect_left(z, j)
                    if nvars == 0:
                        continue  # constant arrivals were settled by the greedy pass
                    rows.append([-1.0] * nvars + [0.0] * (nv - nvars))
                    rhs.append(alpha - depl[j])
                for t, j in enumerate(z):
                    rows.append([1.0] * (t + 1) + [0.0] * (nv - t - 1))
                    rhs.append(1.0 - alpha + depl[j])
                rows.append([-1.0] * nv)
                rhs.append(alpha - depl[-1] - pd.d_dest / r)
                if cost_cap is not None:
                    rows.append([pd.price_coef[j] for j in z])
                    rhs.append(cost_cap)
                if time_cap is not None:
                    rows.append([pd.time_coef[j] for j in z])
                    rhs.append(time_cap - t0)
                if objective == "time":
                    coefs = [pd.time_coef[j] for j in z]
                    const = t0
                elif objective == "cost":
                    coefs = [pd.price_coef[j] for j in z]
                    const = 0.0
                else:
                    coefs = [weights[0] * pd.time_coef[j]
                             + weights[1] * pd.price_coef[j] for j in z]
                    const = weights[0] * t0
                status, y, val = solve_lp(coefs, rows, rhs, [1.0] * nv)
                if status != OPTIMAL:
                    continue
                value = const + val
                ys = [float(v) for v in y]

            if best_value is None or value < best_value - TIE_TOL:
                best_value = value
                best = (value, z, ys)

    if best is None:
        return None
    _, z, ys = best
    plan = {pd.path[j]: y for j, y in zip(z, ys) if y > CHARGE_EPS}
    sol = RouteSolution(path=pd.path, charge_plan=plan)
    obj = model.evaluate(instance, sol)
    return PathPlan(objectives=obj, solution=sol,
                    value=_objective_value(obj, objective, weights))


def optimize_path(instance: Instance, path: tuple[int, ...], objective: str = "time",
                  weights: tuple[float, float] | None = None,
                  cost_cap: float | None = None,
                  time_cap: float | None = None) -> PathPlan | None:
    """Best charge plan along one fixed path, or None when no subset of
    stops makes the path feasible under the caps.

    objective is "time", "cost", or "weighted" (with weights). Ties between
    stop subsets break toward fewer stops, then the lexicographically
    smaller subset.
    """
    if objective not in ("time", "cost", "weighted"):
        raise ValueError("objective must be 'time', 'cost', or 'weighted'")
    if objective == "weighted" and weights is None:
        raise ValueError("weighted objective needs weights")
    problem = model.path_structure_error(instance, path)
    if problem is not None:
        raise ValueError(problem)
    return _optimize_path_data(instance, _PathData(instance, path), objective,
                               weights, cost_cap, time_cap)


def _prepare(instance: Instance, path_cap: int = DEFAULT_PATH_CAP) -> list[_PathData]:
    return [_PathData(instance, p)
            for p in enumerate_paths(instance.graph, cap=path_cap)]


def _best_plan(instance: Instance, pdatas: list[_PathData], objective: str,
               weights: tuple[float, float] | None = None,
               cost_cap: float | None = None,
               time_cap: float | None = None) -> PathPlan | None:
    best: PathPlan | None = None
    for pd in pdatas:
        plan = _optimize_path_data(
            instance, pd, objective, weights, cost_cap, time_cap,
            incumbent=None if best is None else best.value)
        if plan is not None and (best is None or plan.value < best.value - TIE_TOL):
            best = plan
    return best


def _lex_solve(instance: Instance, pdatas: list[_PathData], primary: str,
               cost_cap: float | None = None,
               time_cap: float | None = None) -> PathPlan | None:
    stage1 = _best_plan(instance, pdatas, primary, cost_cap=cost_cap,
                        time_cap=time_cap)
    if stage1 is None:
        return None
    if primary == "time":
        stage2 = _best_plan(instance, pdatas, "cost", cost_cap=cost_cap,
                            time_cap=stage1.objectives.time_h + LEX_SLACK)
    else:
        stage2 = _best_plan(instance, pdatas, "time", time_cap=time_cap,
                            cost_cap=stage1.objectives.cost + LEX_SLACK)
    return stage2 if stage2 is not None else stage1


def _diagnose(instance: Instance, pdatas: list[_PathData]) -> str:
    if not pdatas:
        return "no S->D path exists in the graph"
    pd = pdatas[0]
    r = instance.range_km
    soc = pd.alpha
    names = ["S"] + [str(u) for u in pd.path] + ["D"]
    legs = pd.legs + [pd.d_dest]
    for j, d in enumerate(legs):
        soc -= d / r
        if soc < -1e-9:
            return (f"no feasible charge plan on any path; on path "
                    f"{'-'.join(str(u) for u in pd.path)} the leg "
                    f"{names[j]}->{names[j + 1]} ({d:.1f} km) cannot be crossed "
                    f"even charging to full at every station")
        if j < pd.k:
            soc = 1.0
    return "no feasible charge plan on any path"


def min_time(instance: Instance) -> PathPlan:
    """Global time-optimal plan (cost minimized among its ties)."""
    pdatas = _prepare(instance)
    plan = _lex_solve(instance, pdatas, "time")
    if plan is None:
        raise InfeasibleInstanceError(_diagnose(instance, pdatas))
    return plan


def min_cost(instance: Instance) -> PathPlan:
    """Global cost-optimal plan (time minimized among its ties)."""
    pdatas = _prepare(instance)
    plan = _lex_solve(instance, pdatas, "cost")
    if plan is None:
        raise InfeasibleInstanceError(_diagnose(instance, pdatas))
    return plan


def weighted_optimum(instance: Instance, weights: tuple[float, float]) -> PathPlan:
    """Global optimum of weights[0] * time_h + weights[1] * cost."""
    pdatas = _prepare(instance)
    plan = _best_plan(instance, pdatas, "weighted", weights=weights)
    if plan is None:
        raise InfeasibleInstanceError(_diagnose(instance, pdatas))
    return plan


def _point(plan: PathPlan) -> FrontPoint:
    return FrontPoint(time_h=plan.objectives.time_h, cost=plan.objectives.cost,
                      payload=plan.solution)


def epsilon_constraint(instance: Instance, delta: float | None = None,
                       minimize: str = "time") -> ParetoFront:
    """Pareto front by a budget sweep.

    Solves the primary objective unconstrained, then repeatedly re-solves it
    under a budget on the other objective, tightening the budget just below
    the latest solution's value minus delta until the sweep passes the other
    extreme or goes infeasible. delta=None uses a twentieth of the observed
    budget-objective range. minimize="cost" runs the converse sweep.
    """
    if minimize not in ("time", "cost"):
        raise ValueError("minimize must be 'time' or 'cost'")
    secondary = "cost" if minimize == "time" else "time"
    pdatas = _prepare(instance)
    top = _lex_solve(instance, pdatas, minimize)
    if top is None:
        raise InfeasibleInstanceError(_diagnose(instance, pdatas))
    bottom = _lex_solve(instance, pdatas, secondary)
    points = [_point(top), _point(bottom)]

    def budget_of(plan: PathPlan) -> float:
        return plan.objectives.cost if secondary == "cost" else plan.objectives.time_h

    hi, lo = budget_of(top), budget_of(bottom)
    if delta is None:
        if hi - lo <= TIE_TOL:
            return filter_nondominated(points)
        delta = (hi - lo) / 20.0
    if delta <= 0:
        raise ValueError("delta must be > 0")

    eps = hi - delta
    max_rounds = int((hi - lo) / delta) + 10
    rounds = 0
    while eps >= lo - TIE_TOL and rounds < max_rounds:
        rounds += 1
        if secondary == "cost":
            plan = _lex_solve(instance, pdatas, minimize, cost_cap=eps)
        else:
            plan = _lex_solve(instance, pdatas, minimize, time_cap=eps)
        if plan is None:
            break
        points.append(_point(plan))
        eps = min(eps, budget_of(plan)) - delta
    return filter_nondominated(points)


def grid_oracle(instance: Instance, grid_n: int = 50,
                eval_cap: int = DEFAULT_EVAL_CAP,
                path_cap: int = DEFAULT_PATH_CAP) -> ParetoFront:
    """Brute-force reference front: every path, every stop subset, every
    charge vector on the {0, 1/grid_n, ..., 1} mesh, evaluated through the
    model and filtered to the nondominated set.

    Raises ResourceCapError when the mesh would exceed eval_cap evaluations.
    """
    if grid_n < 1:
        raise ValueError("grid_n must be >= 1")
    paths = enumerate_paths(instance.graph, cap=path_cap)
    total = sum((grid_n + 1) ** len(p) for p in paths)
    if total > eval_cap:
        raise ResourceCapError(
            f"grid oracle would evaluate about {total} candidates, "
            f"above the cap of {eval_cap}")
    mesh = [m / grid_n for m in range(1, grid_n + 1)]
    buf: list[FrontPoint] = []
    for path in paths:
        k = len(path)
        for size in range(k + 1):
            for z in itertools.combinations(range(k), size):
                for ys in itertools.product(mesh, repeat=size):
                    plan = {path[j]: y for j, y in zip(z, ys)}
                    sol = RouteSolution(path=path, charge_plan=plan)
                    obj = model.try_evaluate(instance, sol)
                    if obj is not None:
                        buf.append(FrontPoint(obj.time_h, obj.cost, sol))
                if len(buf) > 50000:
                    buf = list(filter_nondominated(buf))
    return filter_nondominated(buf)
