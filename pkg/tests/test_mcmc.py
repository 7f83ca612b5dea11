import io
import math
from collections import Counter

import numpy as np
import pytest

import bctseg as b
from bctseg import BctHyperParams, ChangePoints, EvidenceCache, McmcConfig
from bctseg.mcmc import equispaced_positions, log_move_correction

from helpers import (
    empirical_distribution,
    exhaustive_joint_posterior,
    total_variation,
)


class TestConfig:
    def test_exactly_one_mode(self):
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, burn_in=0, seed=0, depth=1)
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, burn_in=0, seed=0, depth=1, num_changes=1, ell_max=3)

    def test_bounds(self):
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, burn_in=10, seed=0, depth=1, num_changes=1)
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, burn_in=0, seed=0, depth=1, num_changes=0)
        with pytest.raises(ValueError):
            # unknown-count mode requires room for the boundary move cases
            McmcConfig(iterations=10, burn_in=0, seed=0, depth=1, ell_max=1)


class TestProposeFixed:
    def test_support_on_tiny_state(self):
        # n=5, p=(3,): both move types can only reach 2 or 4
        cp = ChangePoints(5, (3,))
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(400):
            cand, ratio = b.propose_fixed(cp, rng)
            assert ratio == 0.0
            seen.add(cand.positions)
        assert seen == {(2,), (4,)}

    def test_changes_exactly_one_point(self):
        cp = ChangePoints(30, (5, 11, 20))
        rng = np.random.default_rng(1)
        for _ in range(300):
            cand, _ = b.propose_fixed(cp, rng)
            assert cand.ell == 3
            assert len(set(cand.positions) - set(cp.positions)) == 1

    def test_walk_clamps_at_boundary(self):
        # p=2 has zero prior mass but must still propose symmetrically:
        # a left step to 1 becomes a guaranteed self-transition
        cp = ChangePoints(8, (2,))
        rng = np.random.default_rng(2)
        seen = set()
        for _ in range(500):
            cand, _ = b.propose_fixed(cp, rng)
            seen.add(cand.positions)
        assert (2,) in seen  # the clamped self-transition occurs

    def test_empirical_symmetry(self):
        # q(p -> p') vs q(p' -> p) for a neighbouring pair, 5e5 draws each way
        n_draws = 500_000
        a = ChangePoints(8, (3, 6))
        a2 = ChangePoints(8, (4, 6))
        rng = np.random.default_rng(3)

        def census(start):
            hits = Counter()
            for _ in range(n_draws):
                cand, _ = b.propose_fixed(start, rng)
                hits[cand.positions] += 1
            return hits

        fwd = census(a)[a2.positions] / n_draws
        rev = census(a2)[a.positions] / n_draws
        sigma = math.sqrt(fwd * (1 - fwd) / n_draws + rev * (1 - rev) / n_draws)
        assert abs(fwd - rev) <= 3 * sigma


class TestAcceptFixed:
    def setup_method(self):
        raw = [0] * 9 + [1] * 9 + [0, 1]
        self.x = b.split_context(np.asarray(raw), 1, b.Alphabet.of_size(2))
        self.params = BctHyperParams(2, 1)
        self.cache = EvidenceCache()

    def test_same_state_always_accepted(self):
        cp = ChangePoints(self.x.n, (9,))
        rng = np.random.default_rng(0)
        nxt, accepted = b.accept_fixed(cp, cp, self.x, self.params, self.cache, rng)
        assert accepted and nxt is cp

    def test_zero_prior_candidate_always_rejected(self):
        cp = ChangePoints(self.x.n, (9,))
        bad = ChangePoints(self.x.n, (2,))  # first gap weight is zero
        for seed in range(20):
            rng = np.random.default_rng(seed)
            nxt, accepted = b.accept_fixed(cp, bad, self.x, self.params, self.cache, rng)
            assert not accepted and nxt is cp


class TestProposeVariable:
    def test_forced_birth_from_zero(self):
        cp = ChangePoints(12)
        rng = np.random.default_rng(0)
        for _ in range(200):
            cand, move = b.propose_variable(cp, 3, rng)
            assert move == "birth" and cand.ell == 1

    def test_menu_at_cap(self):
        cp = ChangePoints(12, (4, 8))
        rng = np.random.default_rng(1)
        ells = set()
        for _ in range(300):
            cand, move = b.propose_variable(cp, 2, rng)
            assert move in ("death", "within")
            ells.add(cand.ell)
        assert ells == {1, 2}

    def test_birth_keeps_order_and_uniqueness(self):
        cp = ChangePoints(20, (5, 11))
        rng = np.random.default_rng(2)
        for _ in range(300):
            cand, move = b.propose_variable(cp, 6, rng)
            pos = cand.positions
            assert list(pos) == sorted(set(pos))


class TestMoveCorrection:
    def test_within_is_one(self):
        for ell in range(0, 5):
            assert log_move_correction(ell, ell, 30, 6) == 0.0

    def test_birth_from_empty_example(self):
        # n=10: 2*8/(7*6) = 8/21
        got = log_move_correction(0, 1, 10, 5)
        assert got == pytest.approx(math.log(8 / 21), abs=1e-12)

    @pytest.mark.parametrize("n", [12, 25, 60, 201])
    @pytest.mark.parametrize("ell_max", [2, 3, 5])
    def test_reversed_pairs_cancel(self, n, ell_max):
        if n < 2 * ell_max + 4:
            pytest.skip("not enough room for the cap")
        for ell in range(0, ell_max):
            birth = log_move_correction(ell, ell + 1, n, ell_max)
            death = log_move_correction(ell + 1, ell, n, ell_max)
            assert birth + death == pytest.approx(0.0, abs=1e-12)

    def test_unmatched_case_raises(self):
        with pytest.raises(ValueError, match="out of sync"):
            log_move_correction(1, 3, 30, 5)

    def test_within_ratio_has_no_correction_term(self, switch_sequence):
        # a within-count candidate's ratio is evidence + gap terms only
        params = BctHyperParams(2, 1)
        cache = EvidenceCache()
        cur = ChangePoints(switch_sequence.n, (9,))
        cand = ChangePoints(switch_sequence.n, (12,))
        got = b.accept_ratio_variable(cur, cand, switch_sequence, params, 3, cache)
        manual = (
            b.log_posterior_unnorm(switch_sequence, cand, params, cache)
            - b.log_posterior_unnorm(switch_sequence, cur, params, cache)
        )
        assert got == pytest.approx(manual, abs=1e-12)


class TestEquispaced:
    def test_positive_prior(self):
        for n, ell in [(10, 1), (20, 3), (50, 8), (4300, 10)]:
            pos = equispaced_positions(n, ell)
            assert len(pos) == ell
            assert b.log_prior_positions(ChangePoints(n, pos)) > -math.inf

    def test_too_many_points(self):
        with pytest.raises(ValueError):
            equispaced_positions(10, 4)


class TestRun:
    def test_seed_determinism(self, switch_sequence):
        cfg = McmcConfig(iterations=2000, burn_in=100, seed=42, depth=1, ell_max=2)
        t1 = b.run(switch_sequence, cfg)
        t2 = b.run(switch_sequence, cfg)
        assert t1.states == t2.states
        assert t1.accepted == t2.accepted

    def test_fixed_mode_keeps_count(self, switch_sequence):
        cfg = McmcConfig(iterations=3000, burn_in=0, seed=1, depth=1, num_changes=2)
        trace = b.run(switch_sequence, cfg)
        assert all(len(pos) == 2 for pos in trace.states)

    def test_variable_mode_stays_in_range(self, switch_sequence):
        cfg = McmcConfig(iterations=5000, burn_in=0, seed=2, depth=1, ell_max=3)
        trace = b.run(switch_sequence, cfg)
        ells = {len(pos) for pos in trace.states}
        assert ells <= {0, 1, 2, 3}
        assert trace.ell_counts.sum() == trace.retained == len(trace.states)

    def test_visited_states_have_finite_posterior(self, switch_sequence):
        cfg = McmcConfig(iterations=5000, burn_in=0, seed=3, depth=1, ell_max=3)
        trace = b.run(switch_sequence, cfg)
        assert trace.min_log_post > -math.inf
        assert trace.best_log_post > -math.inf

    def test_thinning_and_burn_in(self, switch_sequence):
        cfg = McmcConfig(
            iterations=1000, burn_in=200, seed=4, depth=1, ell_max=2, thinning=10
        )
        trace = b.run(switch_sequence, cfg)
        assert trace.retained == 80
        assert trace.iterations[0] == 200
        assert trace.iterations[-1] == 990

    def test_streaming_mode_matches_histograms(self, switch_sequence):
        cfg = McmcConfig(iterations=2000, burn_in=100, seed=5, depth=1, ell_max=2)
        full = b.run(switch_sequence, cfg)
        slim = b.run(switch_sequence, cfg, state_limit=10)
        assert slim.states is None
        assert np.array_equal(slim.ell_counts, full.ell_counts)
        assert np.array_equal(slim.loc_counts, full.loc_counts)
        s1, s2 = b.summarize(full), b.summarize(slim)
        assert s1.map_ell == s2.map_ell and s1.map_positions == s2.map_positions

    def test_block_timings_recorded(self, switch_sequence):
        cfg = McmcConfig(iterations=3000, burn_in=0, seed=6, depth=1, num_changes=1)
        trace = b.run(switch_sequence, cfg)
        assert len(trace.block_seconds) == 3
        assert all(t > 0 for t in trace.block_seconds)

    def test_trace_csv_layout(self, switch_sequence):
        cfg = McmcConfig(iterations=50, burn_in=0, seed=7, depth=1, ell_max=2)
        trace = b.run(switch_sequence, cfg)
        buf = io.StringIO()
        trace.write_csv(buf)
        lines = buf.getvalue().strip().split("\n")
        assert len(lines) == trace.retained
        first = lines[0].split(",")
        assert first[0] == "0" and int(first[1]) == len(first) - 2


class TestStationarity:
    def test_fixed_chain_matches_exact_posterior(self, switch_sequence):
        params = BctHyperParams(2, 1)
        exact = b.exact_single_cp_posterior(switch_sequence, params)
        cfg = McmcConfig(iterations=40_000, burn_in=2000, seed=9, depth=1, num_changes=1)
        trace = b.run(switch_sequence, cfg)
        emp = np.zeros(switch_sequence.n - 2)
        for pos in trace.states:
            emp[pos[0] - 2] += 1
        emp /= emp.sum()
        assert total_variation(emp, exact) < 0.05

    def test_variable_chain_matches_joint_posterior(self, switch_sequence):
        params = BctHyperParams(2, 1)
        configs, exact = exhaustive_joint_posterior(switch_sequence, params, 2)
        cfg = McmcConfig(iterations=60_000, burn_in=2000, seed=10, depth=1, ell_max=2)
        trace = b.run(switch_sequence, cfg)
        emp = empirical_distribution(trace.states, configs)
        assert total_variation(emp, exact) < 0.05


class TestSummarize:
    def test_identical_samples(self):
        trace = b.Trace(n=20, ell_cap=3)
        cp = ChangePoints(20, (5, 11))
        for t in range(10):
            trace.record(t, cp)
        s = b.summarize(trace)
        assert s.map_ell == 2
        assert s.map_positions == (5, 11)
        assert s.ell_hist == {2: 10}
        assert s.loc_hist == {5: 10, 11: 10}

    def test_masses_match_retained(self, switch_sequence):
        cfg = McmcConfig(iterations=4000, burn_in=500, seed=11, depth=1, ell_max=2)
        trace = b.run(switch_sequence, cfg)
        s = b.summarize(trace)
        assert sum(s.ell_hist.values()) == s.retained
        pooled = sum(ell * c for ell, c in s.ell_hist.items())
        assert sum(s.loc_hist.values()) == pooled

    def test_count_ties_break_low(self):
        trace = b.Trace(n=20, ell_cap=3)
        trace.record(0, ChangePoints(20, (5,)))
        trace.record(1, ChangePoints(20, (5, 11)))
        s = b.summarize(trace)
        assert s.map_ell == 1

    def test_empty_trace(self):
        with pytest.raises(ValueError):
            b.summarize(b.Trace(n=20, ell_cap=3))
