"""Population metaheuristics over a continuous route encoding.

A candidate is a flat vector in [0,1]^(n^2 + 3n) for n stations: a
row-major successor-score matrix, per-station charge fractions, and
source/destination selection scores. decode() turns a vector into a
concrete RouteSolution by argmax walks restricted to edges that actually
exist, so every candidate either decodes to a structurally sound path or
is explicitly marked as failed, never to a malformed one.

run_ga and run_pso scalarize the two objectives with caller-supplied
weights and penalize constraint violations, so they search the full
continuous space while reporting only as-good-or-better feasible plans
over time. Both record a per-epoch history (best fitness, best
objectives, population diversity, exploration/exploitation split)
suitable for convergence plots.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import model
from .instance import Instance, RouteGraph
from .model import Objectives, PENALTY_BASE, RouteSolution

# Velocity clamp for PSO, in encoding units.
VELOCITY_LIMIT = 0.2
# Standard deviation of the per-gene Gaussian mutation in run_ga.
MUTATION_SIGMA = 0.1

HISTORY_CSV_COLUMNS = ("epoch", "best_fitness", "best_time_h", "best_cost",
                       "diversity", "exploration_pct")


def encoding_dim(graph: RouteGraph) -> int:
    """Length of the candidate vector for this graph: n^2 + 3n."""
    n = graph.n_nodes
    return n * n + 3 * n


@dataclass(frozen=True)
class DecodeFailure:
    """Marker for vectors that do not describe a complete walk."""
    reason: str


def _argmax_node(candidates: Iterable[int], score) -> int:
    # Strict > with candidates visited in ascending id order implements
    # the lowest-id tie break.
    best_u = -1
    best_s = -math.inf
    for u in sorted(candidates):
        s = score(u)
        if s > best_s:
            best_u, best_s = u, s
    return best_u


def decode(instance: Instance, vector: Sequence[float]) -> RouteSolution | DecodeFailure:
    """Turn an encoding vector into a RouteSolution.

    The source is the highest-scoring first-layer node, the destination
    the highest-scoring last-layer node, and each step follows the
    highest-scoring existing out-edge. The charge plan carries the charge
    gene (clamped to [0,1]) of every visited node. Returns DecodeFailure
    when the walk dead-ends before the destination or takes more steps
    than there are nodes.
    """
    g = instance.graph
    nodes = sorted(g.node_set())
    n = len(nodes)
    pos = {u: i for i, u in enumerate(nodes)}
    vec = np.asarray(vector, dtype=float)
    want = n * n + 3 * n
    if vec.shape != (want,):
        raise ValueError(f"encoding vector must have length {want}, got {vec.shape}")
    x = vec[:n * n]
    y = vec[n * n:n * n + n]
    src_scores = vec[n * n + n:n * n + 2 * n]
    dest_scores = vec[n * n + 2 * n:]

    src = _argmax_node(g.first_layer, lambda u: src_scores[pos[u]])
    dest = _argmax_node(g.last_layer, lambda u: dest_scores[pos[u]])
    path = [src]
    curr = src
    while curr != dest:
        nbrs = g.out_neighbors(curr)
        if not nbrs:
            return DecodeFailure(f"dead end at node {curr} before node {dest}")
        base = pos[curr] * n
        curr = _argmax_node(nbrs, lambda v: x[base + pos[v]])
        path.append(curr)
        if len(path) > n:
            return DecodeFailure("walk exceeded the node count")
    plan = {u: float(min(1.0, max(0.0, y[pos[u]]))) for u in path}
    return RouteSolution(path=tuple(path), charge_plan=plan)


def fitness(instance: Instance, vector: Sequence[float],
            weights: tuple[float, float] = (0.5, 0.5)) -> float:
    """Scalar fitness of one encoding vector (lower is better).

    Decodable candidates get the weighted penalized objective; walks that
    never complete get a penalty above every decodable candidate's base.
    """
    decoded = decode(instance, vector)
    if isinstance(decoded, DecodeFailure):
        return PENALTY_BASE + instance.graph.n_nodes
    return model.penalized_fitness(instance, decoded, weights)


@dataclass(frozen=True)
class GAConfig:
    population: int = 1000
    epochs: int = 1000
    p_crossover: float = 0.4
    p_mutation: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("p_crossover", "p_mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PSOConfig:
    population: int = 1000
    epochs: int = 1000
    w_start: float = 0.1
    w_end: float = 0.5
    c1: float = 2.5
    c2: float = 2.5
    seed: int = 0

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (0.0 <= self.w_start <= 1.0 and 0.0 <= self.w_end <= 1.0):
            raise ValueError("inertia endpoints must lie in [0, 1]")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("acceleration coefficients must be >= 0")


@dataclass(frozen=True)
class RunHistory:
    """Column-oriented per-epoch trace; row 0 is the initial population."""
    epoch: tuple[int, ...]
    best_fitness: tuple[float, ...]
    best_time_h: tuple[float, ...]
    best_cost: tuple[float, ...]
    diversity: tuple[float, ...]
    exploration_pct: tuple[float, ...]
    exploitation_pct: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.epoch)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one metaheuristic run.

    solution/objectives are None when even the best candidate found never
    decoded to a feasible plan (fitness then reflects the penalty).
    """
    solution: RouteSolution | None
    objectives: Objectives | None
    fitness: float
    history: RunHistory

    @property
    def feasible(self) -> bool:
        return self.objectives is not None


def diversity(population) -> float:
    """Mean absolute deviation from the dimension-wise median."""
    pop = np.asarray(population, dtype=float)
    if pop.ndim != 2 or pop.shape[0] == 0:
        raise ValueError("population must be a nonempty 2-d array")
    med = np.median(pop, axis=0)
    return float(np.mean(np.abs(pop - med)))


def diversity_metrics(population, div_max: float | None = None
                      ) -> tuple[float, float, float]:
    """(diversity, exploration %, exploitation %) for one snapshot.

    Exploration is diversity relative to the largest diversity seen so far
    (div_max; defaults to this snapshot's own). An all-identical population
    has zero diversity and counts as pure exploitation.
    """
    div = diversity(population)
    peak = div if div_max is None else max(div, div_max)
    explo = 0.0 if peak <= 0.0 else 100.0 * div / peak
    return div, explo, 100.0 - explo


def _decoded_objectives(instance: Instance, vector) -> Objectives | None:
    decoded = decode(instance, vector)
    if isinstance(decoded, DecodeFailure):
        return None
    return model.try_evaluate(instance, decoded)


class _Recorder:
    def __init__(self, instance: Instance, weights: tuple[float, float]):
        self.instance = instance
        self.weights = weights
        self.rows: list[tuple] = []
        self.div_max = 0.0

    def add(self, epoch: int, best_fit: float, best_vec, population) -> None:
        obj = _decoded_objectives(self.instance, best_vec)
        t, c = (obj.time_h, obj.cost) if obj is not None else (math.nan, math.nan)
        div, explo, exploit = diversity_metrics(population, self.div_max)
        self.div_max = max(self.div_max, div)
        self.rows.append((epoch, float(best_fit), t, c, div, explo, exploit))

    def history(self) -> RunHistory:
        cols = tuple(zip(*self.rows))
        return RunHistory(epoch=tuple(int(e) for e in cols[0]),
                          best_fitness=cols[1], best_time_h=cols[2],
                          best_cost=cols[3], diversity=cols[4],
                          exploration_pct=cols[5], exploitation_pct=cols[6])


def _result(instance: Instance, best_vec, best_fit: float,
            rec: _Recorder) -> SearchResult:
    decoded = decode(instance, best_vec)
    sol = None if isinstance(decoded, DecodeFailure) else decoded
    obj = None if sol is None else model.try_evaluate(instance, sol)
    if obj is None:
        sol = None
    return SearchResult(solution=sol, objectives=obj,
                        fitness=float(best_fit), history=rec.history())


def _eval_population(instance: Instance, pop, weights) -> np.ndarray:
    return np.array([fitness(instance, row, weights) for row in pop])


def run_ga(instance: Instance, cfg: GAConfig = GAConfig(),
           weights: tuple[float, float] = (0.5, 0.5)) -> SearchResult:
    """Elitist genetic algorithm on the route encoding.

    Per epoch: size-2 tournament selection, uniform crossover on parent
    pairs with probability p_crossover, per-gene Gaussian mutation with
    probability p_mutation, then the best cfg.population individuals of
    parents plus offspring survive. Deterministic for a given seed.
    """
    rng = np.random.default_rng(cfg.seed)
    dim = encoding_dim(instance.graph)
    n = cfg.population
    pop = rng.random((n, dim))
    fits = _eval_population(instance, pop, weights)
    order = np.argsort(fits, kind="stable")
    pop, fits = pop[order], fits[order]

    rec = _Recorder(instance, weights)
    rec.add(0, fits[0], pop[0], pop)
    pairs = n // 2
    for epoch in range(1, cfg.epochs + 1):
        tour = rng.integers(0, n, size=(n, 2))
        first_wins = fits[tour[:, 0]] <= fits[tour[:, 1]]
        parents = pop[np.where(first_wins, tour[:, 0], tour[:, 1])]

        off = parents.copy()
        if pairs:
            coins = rng.random(pairs)
            masks = rng.random((pairs, dim)) < 0.5
            a = off[0:2 * pairs:2]
            b = off[1:2 * pairs:2]
            swap = masks & (coins < cfg.p_crossover)[:, None]
            off[0:2 * pairs:2] = np.where(swap, b, a)
            off[1:2 * pairs:2] = np.where(swap, a, b)
        mut = rng.random((n, dim)) < cfg.p_mutation
        noise = rng.normal(0.0, MUTATION_SIGMA, size=(n, dim))
        off = np.clip(off + mut * noise, 0.0, 1.0)

        off_fits = _eval_population(instance, off, weights)
        combined = np.vstack([pop, off])
        all_fits = np.concatenate([fits, off_fits])
        # Stable sort prefers incumbents on exact ties.
        order = np.argsort(all_fits, kind="stable")[:n]
        pop, fits = combined[order], all_fits[order]
        rec.add(epoch, fits[0], pop[0], pop)
    return _result(instance, pop[0], fits[0], rec)


def run_pso(instance: Instance, cfg: PSOConfig = PSOConfig(),
            weights: tuple[float, float] = (0.5, 0.5)) -> SearchResult:
    """Global-best particle swarm on the route encoding.

    Velocities start at zero and are clamped to +/-VELOCITY_LIMIT,
    positions to [0,1]. Inertia ramps linearly from w_start to w_end over
    the epochs; the global best updates synchronously after the whole
    swarm moves. Deterministic for a given seed.
    """
    rng = np.random.default_rng(cfg.seed)
    dim = encoding_dim(instance.graph)
    n = cfg.population
    x = rng.random((n, dim))
    v = np.zeros((n, dim))
    fits = _eval_population(instance, x, weights)
    pbest = x.copy()
    pbest_fits = fits.copy()
    g_idx = int(np.argmin(pbest_fits))
    gbest = pbest[g_idx].copy()
    gbest_fit = float(pbest_fits[g_idx])

    rec = _Recorder(instance, weights)
    rec.add(0, gbest_fit, gbest, x)
    for epoch in range(1, cfg.epochs + 1):
        if cfg.epochs > 1:
            frac = (epoch - 1) / (cfg.epochs - 1)
        else:
            frac = 0.0
        w = cfg.w_start + (cfg.w_end - cfg.w_start) * frac
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        v = np.clip(w * v + cfg.c1 * r1 * (pbest - x) + cfg.c2 * r2 * (gbest - x),
                    -VELOCITY_LIMIT, VELOCITY_LIMIT)
        x = np.clip(x + v, 0.0, 1.0)
        fits = _eval_population(instance, x, weights)
        improved = fits < pbest_fits
        pbest[improved] = x[improved]
        pbest_fits[improved] = fits[improved]
        g_idx = int(np.argmin(pbest_fits))
        if pbest_fits[g_idx] < gbest_fit:
            gbest_fit = float(pbest_fits[g_idx])
            gbest = pbest[g_idx].copy()
        rec.add(epoch, gbest_fit, gbest, x)
    return _result(instance, gbest, gbest_fit, rec)


def write_history_csv(history: RunHistory, path) -> None:
    """Write a run history as CSV (one row per epoch, repr'd floats)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_CSV_COLUMNS)
        for i in range(len(history)):
            writer.writerow([history.epoch[i],
                             repr(history.best_fitness[i]),
                             repr(history.best_time_h[i]),
                             repr(history.best_cost[i]),
                             repr(history.diversity[i]),
                             repr(history.exploration_pct[i])])
