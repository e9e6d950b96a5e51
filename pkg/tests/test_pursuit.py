"""Stealth candidate generation, scoring and the tightening loop."""

import numpy as np
import pytest

from maplp import (
    BeliefState,
    RelaxationSpec,
    SolverParams,
    brute_force_map,
    dd_spec,
    energy,
    max_intersection_spec,
    pursuit_score,
    run,
    run_with_pursuit,
    stealth_candidates,
)
from maplp.pursuit import StealthCandidate

from conftest import GRID_CLIQUES, build_graph, frustrated_cycle


def grid_mi_beliefs(clique_grid, disagree=True):
    """Beliefs for the clique-grid MI relaxation in which the two top
    cliques either disagree or agree on their shared pair (1, 4)."""
    spec = max_intersection_spec(clique_grid)
    tables = {}
    for t in spec.support:
        tables[t] = np.zeros((2,) * len(t))
    a, b = GRID_CLIQUES[0], GRID_CLIQUES[1]
    # clique a prefers (1,4) = (0,0); clique b prefers (0,0) or (1,1)
    tables[a][0, 0, 0, 0] = 1.0
    if disagree:
        tables[b][1, 0, 1, 0] = 1.0  # (1,4) -> (1,1) on b's axes (1,2,4,5)
    else:
        tables[b][0, 0, 0, 0] = 1.0
    return spec, BeliefState(tables)


class TestCandidates:
    def test_disagreeing_cliques_form_candidate(self, clique_grid):
        spec, beliefs = grid_mi_beliefs(clique_grid, disagree=True)
        cands = stealth_candidates(spec, beliefs)
        unions = {c.union for c in cands}
        assert (0, 1, 2, 3, 4, 5) in unions
        cand = next(c for c in cands if c.union == (0, 1, 2, 3, 4, 5))
        assert set(cand.parents) == {GRID_CLIQUES[0], GRID_CLIQUES[1]}
        assert all(set(s) < set(cand.union) for s in cand.sub_clusters)

    def test_agreeing_cliques_do_not_qualify(self, clique_grid):
        spec, beliefs = grid_mi_beliefs(clique_grid, disagree=False)
        cands = stealth_candidates(spec, beliefs)
        assert all(
            set(c.parents) != {GRID_CLIQUES[0], GRID_CLIQUES[1]} for c in cands
        )

    def test_pair_without_shared_sub_cluster_never_considered(self):
        # two disjoint pairs share nothing; beliefs disagree everywhere
        spec = RelaxationSpec(
            ((0, 1), (2, 3), (0,), (1,), (2,), (3,)),
            {(0, 1): ((0,), (1,)), (2, 3): ((2,), (3,))},
        )
        tables = {t: np.zeros((2,) * len(t)) for t in spec.support}
        cands = stealth_candidates(spec, BeliefState(tables))
        assert cands == []

    def test_common_parent_excludes_pair(self):
        # both pairs are sub-clusters of the triple, so their union is not
        # a stealth cluster even when they disagree on the shared singleton
        spec = RelaxationSpec(
            ((0, 1, 2), (0, 1), (1, 2), (0,), (1,), (2,)),
            {
                (0, 1, 2): ((0, 1), (1, 2)),
                (0, 1): ((0,), (1,)),
                (1, 2): ((1,), (2,)),
            },
        )
        tables = {t: np.zeros((2,) * len(t)) for t in spec.support}
        tables[(0, 1)][0, 0] = 1.0
        tables[(1, 2)][1, 1] = 1.0
        cands = stealth_candidates(spec, BeliefState(tables))
        assert all(set(c.parents) != {(0, 1), (1, 2)} for c in cands)

    def test_union_order_cap_drops_candidate(self, caplog):
        spec = RelaxationSpec(
            (tuple(range(5)), tuple(range(4, 9)), (4,)),
            {
                tuple(range(5)): ((4,),),
                tuple(range(4, 9)): ((4,),),
            },
        )
        tables = {t: np.zeros((2,) * len(t)) for t in spec.support}
        tables[tuple(range(5))][(0,) * 5] = 1.0
        tables[tuple(range(4, 9))].flat[-1] = 1.0
        with caplog.at_level("WARNING", logger="maplp.pursuit"):
            cands = stealth_candidates(spec, BeliefState(tables), max_order=8)
        assert cands == []
        assert "order cap" in caplog.text


class TestScore:
    def test_all_zero_beliefs_score_zero(self):
        beliefs = BeliefState({
            (0,): np.zeros(2), (1,): np.zeros(2),
        })
        cand = StealthCandidate(((0,), (1,)), (0,), (0, 1), ((0,), (1,)), 0.0)
        assert pursuit_score(beliefs, cand) == 0.0

    def test_hand_worked_score_is_zero_when_consistent(self):
        beliefs = BeliefState({
            (0,): np.array([1.0, 0.0]), (1,): np.array([0.0, 1.0]),
        })
        cand = StealthCandidate(((0,), (1,)), (0,), (0, 1), ((0,), (1,)), 0.0)
        assert pursuit_score(beliefs, cand) == pytest.approx(0.0, abs=1e-12)

    def test_score_positive_when_no_joint_maximiser(self):
        # sub-beliefs over the two pairs of a triple pull variable 1 both ways
        beliefs = BeliefState({
            (0, 1): np.array([[1.0, 0.0], [0.0, 0.0]]),
            (1, 2): np.array([[0.0, 0.0], [1.0, 0.0]]),
        })
        cand = StealthCandidate(
            ((0, 1), (1, 2)), (1,), (0, 1, 2), ((0, 1), (1, 2)), 0.0
        )
        assert pursuit_score(beliefs, cand) == pytest.approx(1.0, abs=1e-12)


class TestPursuitLoop:
    def test_already_exact_instance_needs_no_rounds(self):
        g = build_graph([2] * 5, ((0, 1), (1, 2), (2, 3), (3, 4)), seed=3)
        result = run_with_pursuit(g, dd_spec(g), SolverParams(max_sweeps=300))
        assert result.closed
        assert result.rounds == 0

    def test_frustrated_cycle_family_closed_exactly(self):
        params = SolverParams(max_sweeps=500, pursuit_sweeps=50)
        for seed in range(20):
            g = frustrated_cycle(seed)
            exact = brute_force_map(g)
            plain = run(g, dd_spec(g), params)
            assert plain.gap > 0.1
            result = run_with_pursuit(g, dd_spec(g), params)
            assert result.gap <= 1e-6
            assert energy(g, result.assignment) == exact.value
            assert result.rounds >= 1
            assert result.spec.extended_clusters != dd_spec(g).extended_clusters

    def test_candidate_scores_never_negative(self):
        # separate maxima always dominate the joint maximum, so a single
        # block update of a new cluster can only lower the dual
        for seed in range(20):
            g = frustrated_cycle(seed)
            r = run(g, dd_spec(g), SolverParams(max_sweeps=500))
            for cand in stealth_candidates(dd_spec(g), r.beliefs):
                assert cand.score >= -1e-9

    def test_trace_stays_monotone_across_rounds(self):
        params = SolverParams(max_sweeps=200, pursuit_sweeps=30)
        for seed in range(20):
            g = frustrated_cycle(seed)
            result = run_with_pursuit(g, dd_spec(g), params)
            duals = result.trace.duals
            assert all(b <= a + 1e-9 for a, b in zip(duals, duals[1:]))

    def test_added_clusters_restore_overlap_agreement(self):
        from maplp.pursuit import maximiser_projections

        g = frustrated_cycle(0)
        result = run_with_pursuit(
            g, dd_spec(g), SolverParams(max_sweeps=500, pursuit_sweeps=50)
        )
        spec = result.spec
        added = [c for c in spec.extended_clusters if len(c) > 2]
        assert added
        beliefs = result.beliefs
        for c in added:
            for s in spec.proper_subs_of(c):
                proj_c = maximiser_projections(beliefs[c], c, s)
                proj_s = maximiser_projections(beliefs[s], s, s)
                assert proj_c & proj_s

    def test_message_mode_pursuit_matches(self):
        params = SolverParams(max_sweeps=500, pursuit_sweeps=50)
        for seed in range(5):
            g = frustrated_cycle(seed)
            exact = brute_force_map(g)
            result = run_with_pursuit(g, dd_spec(g), params, mode="messages")
            assert result.gap <= 1e-6
            assert energy(g, result.assignment) == exact.value

    def test_time_limit_sets_truncated_flag(self):
        g = frustrated_cycle(1)
        params = SolverParams(
            max_sweeps=2, pursuit_sweeps=1, time_limit=1e-6
        )
        result = run_with_pursuit(g, dd_spec(g), params)
        assert result.truncated
        assert not result.closed
        assert len(result.assignment) == g.num_vars
