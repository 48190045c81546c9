"""Encoding/decoding, fitness, GA/PSO runs, diversity metrics, history CSV."""
import csv
import math

import numpy as np
import pytest

from evroute.instance import (Instance, RouteGraph, Station, VehicleParams,
                              generate_instance)
from evroute.metaheuristics import (HISTORY_CSV_COLUMNS, DecodeFailure,
                                    GAConfig, PSOConfig, decode, diversity,
                                    diversity_metrics, encoding_dim, fitness,
                                    run_ga, run_pso, write_history_csv)
from evroute.model import (PENALTY_BASE, RouteSolution, evaluate,
                           path_structure_error, penalized_fitness,
                           try_evaluate)


def station(u, price=0.134, power=50.0, level="L3", wait=1.0, detour=10.0):
    return Station(id=u, level=level, power_kw=power, price=price,
                   wait_h=wait, detour_km=detour)


def bipartite_instance(edges=None):
    """{1,2} -> {3,4}, short legs, everything reachable without charging."""
    if edges is None:
        edges = {(1, 3): 100.0, (1, 4): 100.0, (2, 3): 100.0, (2, 4): 100.0}
    stations = {u: station(u) for u in (1, 2, 3, 4)}
    graph = RouteGraph(((1, 2), (3, 4)), edges, {1: 100.0, 2: 100.0},
                       {3: 100.0, 4: 100.0})
    return Instance(params=VehicleParams(), stations=stations, graph=graph,
                    seed=0, shape=(2, 2, 1.0))


def single_node_instance(d_s=250.0, d_d=250.0, detour=0.0, initial_soc=0.5):
    graph = RouteGraph(((7,),), {}, {7: d_s}, {7: d_d})
    return Instance(params=VehicleParams(initial_soc=initial_soc),
                    stations={7: station(7, detour=detour)},
                    graph=graph, seed=0, shape=(1, 1, 1.0))


def vec28(x=(), y=(), src=(), dest=()):
    v = np.zeros(28)
    for idx, val in x:
        v[idx] = val
    v[16:20] = list(y) or 0.0
    v[20:24] = list(src) or 0.0
    v[24:28] = list(dest) or 0.0
    return v


class TestDecode:
    def test_single_node_graph(self):
        inst = single_node_instance()
        sol = decode(inst, [0.3, 0.6, 0.2, 0.9])
        assert sol == RouteSolution(path=(7,), charge_plan={7: 0.6})

    def test_bipartite_argmax_picks_second_node(self):
        inst = bipartite_instance()
        # X row of node 1 scores node 3 at 0.2 and node 4 at 0.9
        v = vec28(x=[(2, 0.2), (3, 0.9)], src=(0.9, 0.1, 0, 0),
                  dest=(0, 0, 0.1, 0.9))
        sol = decode(inst, v)
        assert sol.path == (1, 4)
        assert set(sol.charge_plan) == {1, 4}

    def test_all_ties_break_to_lowest_id(self):
        inst = bipartite_instance()
        sol = decode(inst, np.zeros(28))
        assert sol.path == (1, 3)

    def test_argmax_restricted_to_existing_edges(self):
        inst = bipartite_instance(edges={(1, 3): 100.0, (2, 3): 100.0,
                                         (2, 4): 100.0})
        # node 1 scores node 4 highest, but edge (1,4) does not exist
        v = vec28(x=[(2, 0.2), (3, 0.9)], src=(0.9, 0, 0, 0),
                  dest=(0, 0, 0.9, 0.1))
        sol = decode(inst, v)
        assert sol.path == (1, 3)

    def test_dead_end_fails(self):
        inst = bipartite_instance(edges={(1, 3): 100.0, (2, 3): 100.0,
                                         (2, 4): 100.0})
        v = vec28(src=(0.9, 0, 0, 0), dest=(0, 0, 0.1, 0.9))
        out = decode(inst, v)
        assert isinstance(out, DecodeFailure)
        assert "dead end" in out.reason

    def test_charge_genes_clamped(self):
        inst = bipartite_instance()
        v = vec28(y=(-0.5, 0.0, 1.7, 0.0))
        sol = decode(inst, v)
        assert sol.charge_plan == {1: 0.0, 3: 1.0}

    def test_wrong_length_rejected(self):
        inst = bipartite_instance()
        with pytest.raises(ValueError, match="length 28"):
            decode(inst, np.zeros(27))

    def test_fuzzed_vectors_always_structurally_valid(self):
        inst = generate_instance((4, 4, 0.5), seed=42)
        dim = encoding_dim(inst.graph)
        rng = np.random.default_rng(7)
        vectors = rng.random((10_000, dim))
        decoded = 0
        for v in vectors:
            out = decode(inst, v)
            if isinstance(out, DecodeFailure):
                continue
            decoded += 1
            assert path_structure_error(inst, out.path) is None
            assert all(0.0 <= y <= 1.0 for y in out.charge_plan.values())
            assert set(out.charge_plan) == set(out.path)
        assert decoded > 0


class TestFitness:
    def test_decode_failure_penalty(self):
        inst = bipartite_instance(edges={(1, 3): 100.0, (2, 3): 100.0,
                                         (2, 4): 100.0})
        v = vec28(src=(0.9, 0, 0, 0), dest=(0, 0, 0.1, 0.9))
        assert fitness(inst, v, (1.0, 1.0)) == PENALTY_BASE + 4

    def test_golden_weighted_value(self):
        inst = single_node_instance()
        assert fitness(inst, [0.0, 0.5, 0.0, 0.0], (1.0, 1.0)) == \
            pytest.approx(18.7, abs=1e-12)

    def test_matches_penalized_fitness_composition(self):
        inst = bipartite_instance()
        v = vec28(y=(0.2, 0, 0.1, 0), src=(0.9, 0, 0, 0), dest=(0, 0, 0.9, 0))
        sol = decode(inst, v)
        assert fitness(inst, v, (0.7, 0.3)) == \
            pytest.approx(penalized_fitness(inst, sol, (0.7, 0.3)), abs=1e-12)

    def test_infeasible_decoded_below_decode_failure(self):
        # a mildly infeasible decoded plan ranks better than no walk at all
        inst = bipartite_instance()
        v = vec28(y=(0.9, 0, 0.9, 0), src=(0.9, 0, 0, 0), dest=(0, 0, 0.9, 0))
        sol = decode(inst, v)
        assert isinstance(sol, RouteSolution)
        assert try_evaluate(inst, sol) is None
        infeasible = fitness(inst, v, (1.0, 1.0))
        assert PENALTY_BASE <= infeasible < PENALTY_BASE + 4


class TestDiversity:
    def test_uniform_population_quarter(self):
        rng = np.random.default_rng(3)
        pop = rng.random((400, 120))
        assert diversity(pop) == pytest.approx(0.25, abs=0.01)

    def test_identical_population_zero(self):
        pop = np.ones((30, 8)) * 0.4
        div, explo, exploit = diversity_metrics(pop)
        assert div == 0.0
        assert explo == 0.0
        assert exploit == 100.0

    def test_relative_to_peak(self):
        pop = np.zeros((4, 2))
        pop[:2] = 1.0  # median 0.5, every deviation 0.5
        div, explo, exploit = diversity_metrics(pop, div_max=1.0)
        assert div == pytest.approx(0.5)
        assert explo == pytest.approx(50.0)
        assert exploit == pytest.approx(50.0)

    def test_snapshot_is_its_own_peak(self):
        pop = np.array([[0.0, 1.0], [1.0, 0.0]])
        div, explo, exploit = diversity_metrics(pop, div_max=0.1)
        assert explo == 100.0
        assert exploit == 0.0
        assert div == pytest.approx(0.5)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            diversity(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            diversity(np.zeros(5))


class TestConfigs:
    def test_defaults_follow_reference_settings(self):
        ga = GAConfig()
        assert (ga.population, ga.epochs) == (1000, 1000)
        assert (ga.p_crossover, ga.p_mutation) == (0.4, 0.4)
        pso = PSOConfig()
        assert (pso.w_start, pso.w_end) == (0.1, 0.5)
        assert (pso.c1, pso.c2) == (2.5, 2.5)

    def test_validation(self):
        with pytest.raises(ValueError, match="population"):
            GAConfig(population=0)
        with pytest.raises(ValueError, match="epochs"):
            GAConfig(epochs=-1)
        with pytest.raises(ValueError, match="p_crossover"):
            GAConfig(p_crossover=1.5)
        with pytest.raises(ValueError, match="p_mutation"):
            GAConfig(p_mutation=-0.1)
        with pytest.raises(ValueError, match="population"):
            PSOConfig(population=0)
        with pytest.raises(ValueError, match="inertia"):
            PSOConfig(w_start=1.2)
        with pytest.raises(ValueError, match="acceleration"):
            PSOConfig(c2=-1.0)


def check_common_run_contract(inst, result, epochs, weights):
    h = result.history
    assert len(h) == epochs + 1
    assert list(h.epoch) == list(range(epochs + 1))
    bf = h.best_fitness
    assert all(b <= a + 1e-12 for a, b in zip(bf, bf[1:]))
    assert result.fitness == bf[-1]
    assert all(d >= 0.0 for d in h.diversity)
    for e, x in zip(h.exploration_pct, h.exploitation_pct):
        assert 0.0 <= e <= 100.0
        assert x == pytest.approx(100.0 - e, abs=1e-9)
    peak = max(h.diversity)
    assert h.exploration_pct[h.diversity.index(peak)] == pytest.approx(100.0)
    if result.feasible:
        obj = evaluate(inst, result.solution)
        assert obj.as_tuple() == pytest.approx(result.objectives.as_tuple(),
                                               abs=1e-12)
        wt, wc = weights
        assert result.fitness == pytest.approx(wt * obj.time_h + wc * obj.cost,
                                               abs=1e-9)


class TestRunGA:
    def test_contract_and_determinism(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        cfg = GAConfig(population=24, epochs=15, seed=5)
        a = run_ga(inst, cfg, (1.0, 1.0))
        check_common_run_contract(inst, a, 15, (1.0, 1.0))
        assert a.feasible
        b = run_ga(inst, cfg, (1.0, 1.0))
        assert a.history == b.history
        assert a.fitness == b.fitness
        assert a.solution == b.solution

    def test_zero_epochs_returns_initial_best(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        dim = encoding_dim(inst.graph)
        cfg = GAConfig(population=16, epochs=0, seed=9)
        res = run_ga(inst, cfg, (1.0, 1.0))
        assert len(res.history) == 1
        pop0 = np.random.default_rng(9).random((16, dim))
        expect = min(fitness(inst, row, (1.0, 1.0)) for row in pop0)
        assert res.fitness == pytest.approx(expect, abs=1e-12)

    def test_population_of_one(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        res = run_ga(inst, GAConfig(population=1, epochs=3, seed=0), (1.0, 1.0))
        assert len(res.history) == 4

    def test_all_infeasible_instance(self):
        inst = single_node_instance(d_s=700.0, d_d=700.0, initial_soc=1.0)
        res = run_ga(inst, GAConfig(population=10, epochs=4, seed=1), (1.0, 1.0))
        assert not res.feasible
        assert res.solution is None and res.objectives is None
        assert res.fitness >= PENALTY_BASE
        assert all(math.isnan(t) for t in res.history.best_time_h)
        assert all(math.isnan(c) for c in res.history.best_cost)


class TestRunPSO:
    def test_contract_and_determinism(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        cfg = PSOConfig(population=24, epochs=15, seed=5)
        a = run_pso(inst, cfg, (1.0, 1.0))
        check_common_run_contract(inst, a, 15, (1.0, 1.0))
        assert a.feasible
        b = run_pso(inst, cfg, (1.0, 1.0))
        assert a.history == b.history
        assert a.fitness == b.fitness
        assert a.solution == b.solution

    def test_zero_epochs_returns_initial_best(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        dim = encoding_dim(inst.graph)
        cfg = PSOConfig(population=16, epochs=0, seed=9)
        res = run_pso(inst, cfg, (1.0, 1.0))
        assert len(res.history) == 1
        pop0 = np.random.default_rng(9).random((16, dim))
        expect = min(fitness(inst, row, (1.0, 1.0)) for row in pop0)
        assert res.fitness == pytest.approx(expect, abs=1e-12)

    def test_single_epoch_and_particle_edge(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        res = run_pso(inst, PSOConfig(population=1, epochs=1, seed=0), (1.0, 1.0))
        assert len(res.history) == 2

    def test_seed_changes_trajectory(self):
        inst = generate_instance((2, 8, 0.6), seed=102)
        a = run_pso(inst, PSOConfig(population=24, epochs=10, seed=1), (1.0, 1.0))
        b = run_pso(inst, PSOConfig(population=24, epochs=10, seed=2), (1.0, 1.0))
        assert a.history.diversity != b.history.diversity


class TestHistoryCsv:
    def test_written_file_round_trips(self, tmp_path):
        inst = generate_instance((2, 8, 0.6), seed=102)
        res = run_ga(inst, GAConfig(population=12, epochs=6, seed=3), (1.0, 1.0))
        dest = tmp_path / "history.csv"
        write_history_csv(res.history, dest)
        with open(dest, newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == HISTORY_CSV_COLUMNS
        assert len(rows) == len(res.history) + 1
        for row, k in zip(rows[1:], range(len(res.history))):
            assert int(row[0]) == res.history.epoch[k]
            assert float(row[1]) == res.history.best_fitness[k]
            assert float(row[4]) == res.history.diversity[k]
            assert float(row[5]) == res.history.exploration_pct[k]

    def test_nan_objectives_survive_round_trip(self, tmp_path):
        inst = single_node_instance(d_s=700.0, d_d=700.0, initial_soc=1.0)
        res = run_pso(inst, PSOConfig(population=6, epochs=2, seed=0), (1.0, 1.0))
        dest = tmp_path / "history.csv"
        write_history_csv(res.history, dest)
        with open(dest, newline="") as fh:
            rows = list(csv.reader(fh))
        assert all(math.isnan(float(r[2])) and math.isnan(float(r[3]))
                   for r in rows[1:])
