import logging
import math
import random
from collections import Counter
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphevo.errors import InstanceError
from graphevo.evo import (
    CandidateSet,
    classical_crossover,
    classical_mutation,
    derive_seed,
    fitness,
    greedy_by_degree,
    low_fitness_indices,
    random_init,
    rank_and_filter_candidates,
    roulette_indices,
    select_none,
    select_random,
    select_roulette,
    select_tournament,
    tournament_indices,
)
from graphevo.graph import (
    degree_centrality,
    detect_communities,
    from_edges,
    load_partition,
    random_graph,
    single_community,
    star_graph,
)

from conftest import oracle_fitness, seed_sets, small_corpus

PATH5 = from_edges([(1, 2), (2, 3), (3, 4), (4, 5)])


def within_3_sigma(count, trials, p):
    sigma = math.sqrt(trials * p * (1 - p))
    return abs(count - trials * p) <= 3 * sigma


def test_fitness_examples():
    assert fitness(PATH5, single_community(PATH5), {3}) == pytest.approx(5.0)
    assert fitness(PATH5, single_community(PATH5), set()) == 0.0
    tri = from_edges([(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)])
    part = load_partition("1 0\n2 0\n3 0\n4 1\n5 1\n6 1", tri)
    assert fitness(tri, part, {1}) == pytest.approx(1.5)


def test_fitness_unknown_element():
    with pytest.raises(InstanceError):
        fitness(PATH5, single_community(PATH5), {42})


def test_fitness_matches_oracle_on_corpus():
    for g in small_corpus():
        for part in (single_community(g), detect_communities(g)):
            for s in seed_sets(g.nodes):
                assert abs(fitness(g, part, s) - oracle_fitness(g, part, s)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.floats(0, 0.5), st.integers(0, 999), st.data())
def test_fitness_bounds(n, p, seed, data):
    g = random_graph(n, p, seed=seed)
    s = data.draw(st.sets(st.sampled_from(g.nodes), max_size=4))
    f = fitness(g, detect_communities(g), s)
    assert 0.0 <= f <= g.node_count + 1e-9


def test_candidates_examples():
    assert rank_and_filter_candidates(PATH5, 0.5).ids == {2, 3, 4}
    assert rank_and_filter_candidates(PATH5, 1.0).ids == set(PATH5.nodes)
    star = from_edges([(9, 1), (9, 2), (9, 3), (9, 4)])
    assert rank_and_filter_candidates(star, 0.2).ids == {9}


def test_candidates_bad_fraction():
    with pytest.raises(InstanceError):
        rank_and_filter_candidates(PATH5, 0.0)
    with pytest.raises(InstanceError):
        rank_and_filter_candidates(PATH5, 1.5)


def test_candidates_against_full_sort_oracle():
    for seed in range(30):
        r = random.Random(seed)
        g = random_graph(r.randint(5, 200), r.uniform(0.01, 0.2), seed=seed)
        deg = degree_centrality(g)
        want = math.ceil(0.5 * g.node_count)
        oracle = sorted(g.nodes, key=lambda v: (-deg[v], v))[:want]
        assert rank_and_filter_candidates(g, 0.5).ids == set(oracle)


def test_random_init_examples():
    pop = random_init(CandidateSet(frozenset(range(1, 11))), 3, 5, seed=1)
    assert len(pop) == 5
    assert all(len(set(s)) == 3 and set(s) <= set(range(1, 11)) for s in pop)
    forced = random_init(CandidateSet(frozenset({1, 2, 3})), 3, 4, seed=2)
    assert all(sorted(s) == [1, 2, 3] for s in forced)
    with pytest.raises(InstanceError):
        random_init(CandidateSet(frozenset({1, 2})), 3, 2)
    assert random_init(CandidateSet(frozenset(range(20))), 4, 6, seed=9) == random_init(CandidateSet(frozenset(range(20))), 4, 6, seed=9)


def test_roulette_zero_weight_excluded():
    picks = roulette_indices([1, 0], 2000, seed=3)
    assert set(picks) == {0}


def test_roulette_even_split():
    picks = roulette_indices([2, 2], 10_000, seed=4)
    assert within_3_sigma(picks.count(0), 10_000, 0.5)


def test_roulette_all_zero_falls_back(caplog):
    with caplog.at_level(logging.INFO, logger="graphevo.evo"):
        picks = roulette_indices([0, 0], 1000, seed=5)
    assert set(picks) == {0, 1}
    assert "uniform" in caplog.text


def test_tournament_forced_cases():
    fit = [3, 9, 1, 9, 2]
    assert set(tournament_indices(fit, 50, len(fit), seed=1)) == {1}  # tie at 9 goes to index 1
    picks = tournament_indices(fit, 10_000, 1, seed=2)
    for i in range(len(fit)):
        assert within_3_sigma(picks.count(i), 10_000, 0.2)


def test_tournament_closed_form_distribution():
    fit = [3, 1, 2]
    # each of the 3 pairs is equally likely; the best member wins
    expected = Counter()
    for pair in combinations(range(3), 2):
        expected[max(pair, key=lambda i: fit[i])] += 1 / 3
    picks = tournament_indices(fit, 10_000, 2, seed=7)
    for i in range(3):
        assert within_3_sigma(picks.count(i), 10_000, expected[i])


def test_tournament_bad_size():
    with pytest.raises(InstanceError):
        tournament_indices([1, 2], 1, 3)


def test_select_random_and_none():
    pop = [(i,) for i in range(5)]
    assert select_none(pop) == pop
    assert select_none(select_none(pop)) == select_none(pop)
    picks = Counter(select_random(pop * 2000, seed=1))
    for s in pop:
        assert within_3_sigma(picks[s], 10_000, 0.2)
    assert select_random([(7,)], seed=2) == [(7,)]


def test_select_wrappers_materialise():
    pop = [(0, 1), (2, 3), (4, 5)]
    out = select_roulette(pop, [0, 0, 1], seed=1)
    assert out == [(4, 5)] * 3
    out = select_tournament(pop, [1, 2, 3], 3, seed=1)
    assert out == [(4, 5)] * 3


def test_crossover_identical_parents():
    a = (1, 2, 3)
    assert classical_crossover(a, a, seed=1) == (a, a)


def test_crossover_exchange_trace():
    c1, c2 = classical_crossover((1, 2, 3), (4, 5, 6), mask=[True, False, False])
    assert c1 == (4, 2, 3) and c2 == (1, 5, 6)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_crossover_children_valid(seed):
    cands = CandidateSet(frozenset(range(1, 20)))
    for a, b in [((1, 2, 3), (3, 2, 9)), ((1, 2, 3, 4), (4, 3, 2, 1)), ((5, 6, 7), (8, 9, 10))]:
        for child in classical_crossover(a, b, seed=seed, candidates=cands):
            assert len(child) == len(a)
            assert len(set(child)) == len(child)
            assert set(child) <= set(a) | set(b)


def test_crossover_unequal_lengths_keep_tails():
    c1, c2 = classical_crossover((1, 2, 3), (4, 5), mask=[True, True])
    assert len(c1) == 3 and len(c2) == 2
    assert c1[:2] == (4, 5)


def test_mutation_examples(caplog):
    cands = CandidateSet(frozenset(range(1, 101)))
    assert classical_mutation((1, 2, 3), cands, 0.0, seed=1) == (1, 2, 3)
    own = CandidateSet(frozenset({1, 2, 3}))
    with caplog.at_level(logging.INFO, logger="graphevo.evo"):
        assert classical_mutation((1, 2, 3), own, 1.0, seed=1) == (1, 2, 3)
    assert "unchanged" in caplog.text
    disjoint = 0
    for seed in range(1000):
        out = classical_mutation((1, 2, 3), cands, 1.0, seed=seed)
        assert len(set(out)) == 3 and set(out) <= cands.ids
        disjoint += not (set(out) & {1, 2, 3})
    assert disjoint >= 900


def test_mutation_bad_rate():
    with pytest.raises(InstanceError):
        classical_mutation((1,), CandidateSet(frozenset({1, 2})), 1.5)


def test_greedy_by_degree():
    star = star_graph(5)
    assert greedy_by_degree(star, 1) == (5,)
    assert greedy_by_degree(PATH5, 2) == (2, 3)


def test_low_fitness_band():
    assert low_fitness_indices([5, 6, 7, 8, 9, 10, 11, 12, 13, 1]) == {9}
    assert low_fitness_indices([1.0] * 30) == set()
    assert low_fitness_indices([3, 1, 2]) == set()  # floor(0.3) = 0
    fit = list(range(30))
    assert low_fitness_indices(fit) == {0, 1, 2}


def test_derive_seed_stable_and_independent():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)
    assert derive_seed(1, "a") != derive_seed(2, "a")
