import math
from collections import Counter

import numpy as np
import pytest

import coalsim as cs
from coalsim import EngineOptions, InputError, Move, MoveKind, NumericalError
from coalsim.engine import prepare_tables


def cfg(*counts):
    return cs.Configuration(np.array(counts))


class TestTotalRate:
    def test_values(self):
        assert cs.total_rate(cfg(2), 1.0) == 4.0
        assert cs.total_rate(cfg(5), 2.0) == 30.0
        assert cs.total_rate(cfg(2), 1e-12) == pytest.approx(2.0, abs=1e-9)

    def test_requires_two_individuals(self):
        with pytest.raises(InputError):
            cs.total_rate(cfg(1), 1.0)


class TestMoveCoefficients:
    def test_k1(self):
        model = cs.MutationModel.from_matrix([[1.0]], 2.0)
        moves = dict(cs.move_coefficients(cfg(3), model))
        assert moves[Move(MoveKind.COALESCENCE, 0)] == 6.0
        assert moves[Move(MoveKind.MUTATION, 0, 0)] == 6.0

    def test_singletons_cannot_coalesce(self, swap_model):
        moves = dict(cs.move_coefficients(cfg(1, 1), swap_model))
        assert moves == {
            Move(MoveKind.MUTATION, 0, 1): 1.0,
            Move(MoveKind.MUTATION, 1, 0): 1.0,
        }

    def test_total_coefficient_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            k = int(rng.integers(1, 5))
            P = rng.random((k, k)) + 0.01
            P /= P.sum(axis=1, keepdims=True)
            mu = float(rng.uniform(0.1, 5))
            model = cs.MutationModel.from_matrix(P, mu)
            counts = rng.integers(0, 5, size=k)
            if counts.sum() < 2:
                counts[0] += 2
            config = cs.Configuration(counts)
            total = sum(nu for _, nu in cs.move_coefficients(config, model))
            expected = sum(c * (c - 1) for c in counts) + mu * float(
                counts @ P.sum(axis=0)
            )
            assert total == pytest.approx(expected, rel=1e-12)


class TestProposeMove:
    def test_joint_k1_q(self):
        model = cs.MutationModel.from_matrix([[1.0]], 2.0)
        stream = cs.derive_stream(0, 0)
        n = 5
        for _ in range(50):
            move, q = cs.propose_move(cfg(n), model, EngineOptions(proposal="joint"), stream)
            if move.kind is MoveKind.COALESCENCE:
                assert q == pytest.approx((n - 1) / (n - 1 + model.mu))
            else:
                assert q == pytest.approx(model.mu / (n - 1 + model.mu))

    @pytest.mark.parametrize("proposal", ["two-stage", "joint"])
    def test_singleton_pair_support(self, swap_model, proposal):
        stream = cs.derive_stream(3, 0)
        options = EngineOptions(proposal=proposal)
        seen = {}
        for _ in range(200):
            move, q = cs.propose_move(cfg(1, 1), swap_model, options, stream)
            assert move.kind is MoveKind.MUTATION
            seen[move] = q
        assert sum(seen.values()) == pytest.approx(1.0)

    @pytest.mark.parametrize("proposal", ["two-stage", "joint"])
    def test_draw_frequencies_match_returned_q(self, proposal):
        P = np.array([[0.7, 0.3], [0.4, 0.6]])
        model = cs.MutationModel.from_matrix(P, 0.8)
        config = cfg(2, 1)
        options = EngineOptions(proposal=proposal)
        stream = cs.derive_stream(202, 0)
        n = 100_000
        counts = Counter()
        qs = {}
        for _ in range(n):
            move, q = cs.propose_move(config, model, options, stream)
            counts[move] += 1
            qs[move] = q
        assert sum(qs.values()) == pytest.approx(1.0, abs=1e-12)
        for move, q in qs.items():
            se = math.sqrt(q * (1 - q) / n)
            assert abs(counts[move] / n - q) <= 3 * se, (move, counts[move] / n, q)

    def test_zero_column_resampling(self):
        # column 1 is all zero: a singleton of type 1 has no backward move,
        # so stage one must renormalise onto type 0
        P = np.array([[1.0, 0.0], [1.0, 0.0]])
        model = cs.MutationModel.from_matrix(P, 0.5)
        options = EngineOptions()
        stream = cs.derive_stream(7, 0)
        for _ in range(100):
            move, q = cs.propose_move(cfg(1, 1), model, options, stream)
            # stage one always lands on type 0 (marginal 1.0); the ancestor
            # is type 0 or 1 with equal stage-two probability
            assert move.kind is MoveKind.MUTATION
            assert move.offspring_type == 0
            assert q == pytest.approx(0.5)

    def test_no_moves_raises(self):
        # singletons of types whose transition-matrix columns are all zero
        # admit neither coalescence nor a backward mutation
        P = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        model = cs.MutationModel.from_matrix(P, 0.5)
        stream = cs.derive_stream(7, 0)
        with pytest.raises(NumericalError):
            cs.propose_move(cfg(0, 1, 1), model, EngineOptions(), stream)


class TestApplyMove:
    def test_coalescence(self):
        out = cs.apply_move(cfg(3, 0), Move(MoveKind.COALESCENCE, 0))
        assert out.counts.tolist() == [2, 0]
        assert out.total == 2

    def test_mutation(self):
        out = cs.apply_move(cfg(1, 1), Move(MoveKind.MUTATION, 0, 1))
        assert out.counts.tolist() == [0, 2]
        assert out.total == 2

    def test_preconditions(self):
        with pytest.raises(InputError):
            cs.apply_move(cfg(1, 1), Move(MoveKind.COALESCENCE, 0))
        with pytest.raises(InputError):
            cs.apply_move(cfg(0, 2), Move(MoveKind.MUTATION, 0, 1))


class TestStepLogWeight:
    def test_identity_case(self):
        assert cs.step_log_weight(2.0, 8.0, 0.25) == 0.0
        assert cs.step_log_weight(4.0, 4.0, 1.0) == 0.0

    def test_joint_value(self):
        # joint proposal: log(sum nu) - log(D)
        assert cs.step_log_weight(3.0, 12.0, 3.0 / 6.0) == pytest.approx(
            math.log(6.0 / 12.0)
        )

    def test_rejects_non_positive(self):
        for bad in [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0), (-1.0, 1.0, 1.0)]:
            with pytest.raises(InputError):
                cs.step_log_weight(*bad)


class TestTerminalLogFactor:
    def test_full_mode(self, swap_dist):
        options = EngineOptions(stop_size=1)
        assert cs.terminal_log_factor(cfg(1, 0), swap_dist, options) == math.log(0.5)

    def test_stationary_product(self):
        dist = cs.StationaryDistribution(np.array([0.25, 0.75]))
        options = EngineOptions(stop_size=2)
        assert cs.terminal_log_factor(cfg(2, 0), dist, options) == pytest.approx(
            2 * math.log(0.25)
        )

    def test_correction_none(self):
        dist = cs.StationaryDistribution(np.array([0.25, 0.75]))
        options = EngineOptions(stop_size=2, correction="none")
        assert cs.terminal_log_factor(cfg(1, 1), dist, options) == 0.0

    def test_zero_probability_gives_minus_inf(self):
        dist = cs.StationaryDistribution(np.array([1.0, 0.0]))
        options = EngineOptions(stop_size=2)
        assert cs.terminal_log_factor(cfg(1, 1), dist, options) == -math.inf


class TestSimulateOnce:
    @pytest.mark.parametrize("proposal", ["two-stage", "joint"])
    @pytest.mark.parametrize("n", [2, 7, 40])
    def test_k1_telescopes_exactly(self, k1_model, k1_dist, proposal, n):
        record = cs.simulate_once(
            cfg(n), k1_model, k1_dist, EngineOptions(proposal=proposal),
            cs.derive_stream(5, n),
        )
        assert record.log_weight == 0.0
        assert len(record.coalescent_sens) == n - 1

    def test_immediate_stop(self, swap_model, swap_dist):
        options = EngineOptions(stop_size=3)
        record = cs.simulate_once(
            cfg(2, 1), swap_model, swap_dist, options, cs.derive_stream(0, 0)
        )
        assert record.event_count == 0
        assert record.log_weight == record.log_correction

    @pytest.mark.parametrize("proposal", ["two-stage", "joint"])
    def test_conservation_and_sen_monotonicity(self, proposal):
        P = np.array([[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.3, 0.2, 0.5]])
        model = cs.MutationModel.from_matrix(P, 1.5)
        dist = cs.stationary(model)
        initial = cfg(4, 2, 3)
        for stop in (1, 4):
            options = EngineOptions(stop_size=stop, proposal=proposal)
            for idx in range(30):
                record = cs.simulate_once(
                    initial, model, dist, options, cs.derive_stream(77, idx)
                )
                sens = record.coalescent_sens
                assert record.final_config.total == stop
                assert len(sens) == initial.total - stop
                assert np.all(np.diff(sens) > 0)
                assert len(sens) == 0 or sens[-1] <= record.event_count
                assert record.final_config.counts.sum() == stop

    def test_early_stop_decomposition(self, swap_model, swap_dist):
        # log_weight - log_correction is invariant to the correction option
        for idx in range(20):
            a = cs.simulate_once(
                cfg(4, 2), swap_model, swap_dist,
                EngineOptions(stop_size=3), cs.derive_stream(8, idx),
            )
            b = cs.simulate_once(
                cfg(4, 2), swap_model, swap_dist,
                EngineOptions(stop_size=3, correction="none"), cs.derive_stream(8, idx),
            )
            assert a.log_weight - a.log_correction == pytest.approx(
                b.log_weight, rel=1e-12
            )
            assert b.log_correction == 0.0

    def test_forced_final_coalescence(self, swap_model, swap_dist):
        options = EngineOptions(final_coalescence="forced")
        for idx in range(20):
            record = cs.simulate_once(
                cfg(2, 0), swap_model, swap_dist, options, cs.derive_stream(12, idx)
            )
            # the identical pair coalesces immediately: one event, weight
            # log(2/(2(1+mu))) + log pi
            assert record.event_count == 1
            assert record.log_weight == pytest.approx(
                math.log(2.0 / (2.0 * 2.0)) + math.log(0.5)
            )

    def test_max_events_cap(self, swap_model, swap_dist):
        with pytest.raises(NumericalError, match="event cap"):
            cs.simulate_once(
                cfg(5, 5), swap_model, swap_dist,
                EngineOptions(max_events=3), cs.derive_stream(0, 0),
            )

    def test_preconditions(self, swap_model, swap_dist):
        with pytest.raises(InputError):
            cs.simulate_once(cfg(1, 0), swap_model, swap_dist, EngineOptions(),
                             cs.derive_stream(0, 0))
        with pytest.raises(InputError):
            cs.simulate_once(cfg(1, 1), swap_model, swap_dist,
                             EngineOptions(stop_size=5), cs.derive_stream(0, 0))

    @pytest.mark.parametrize("proposal", ["two-stage", "joint"])
    def test_unbiased_for_pair(self, swap_model, swap_dist, proposal):
        # exact value (1+mu)/(2(1+2mu)) = 1/3 at mu=1
        point, _ = cs.estimate(
            cfg(2, 0), swap_model, swap_dist,
            EngineOptions(proposal=proposal), 20_000, master_seed=31,
        )
        mean_w = math.exp(point.log_likelihood)
        se = point.std_error * mean_w
        assert abs(mean_w - 1 / 3) <= 3 * se


class TestEngineOptions:
    def test_validation(self):
        with pytest.raises(InputError):
            EngineOptions(stop_size=0)
        with pytest.raises(InputError):
            EngineOptions(proposal="bogus")
        with pytest.raises(InputError):
            EngineOptions(correction="bogus")
        with pytest.raises(InputError):
            EngineOptions(max_events=0)


def test_prepare_tables():
    P = np.array([[0.7, 0.3], [0.4, 0.6]])
    tables = prepare_tables(P)
    assert np.allclose(tables.colsum, [1.1, 0.9])
    assert np.allclose(tables.colcum, [[0.7, 1.1], [0.3, 0.9]])
