import math

import numpy as np
import pytest

import coalsim as cs
from coalsim import InputError
from coalsim.oracle import (
    exact_likelihood,
    exact_table,
    level_configurations,
    level_normalisation,
    multinomial_coefficient,
)

from conftest import random_row_stochastic


def cfg(*counts):
    return cs.Configuration(np.array(counts))


class TestLevelConfigurations:
    def test_small_levels(self):
        assert level_configurations(2, 2) == [(0, 2), (1, 1), (2, 0)]
        assert level_configurations(1, 3) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]

    def test_counts(self):
        # stars and bars: C(n + K - 1, K - 1)
        assert len(level_configurations(6, 3)) == math.comb(8, 2)
        for c in level_configurations(6, 3):
            assert sum(c) == 6

    def test_guard_refusal_names_count(self):
        with pytest.raises(InputError, match="1000000"):
            exact_table(
                cs.MutationModel.from_matrix(cs.build_single_site_model(5), 1.0),
                cs.StationaryDistribution(np.full(32, 1 / 32)),
                40,
            )


class TestPairFormula:
    @pytest.mark.parametrize("mu", [0.1, 1.0, 10.0])
    def test_swap_pair(self, mu):
        # for the type-swapping matrix: q(2,0) = (1+mu)/(2(1+2mu)),
        # q(1,1) = mu/(2(1+2mu))
        model = cs.MutationModel.from_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]), mu)
        dist = cs.stationary(model)
        same = math.exp(exact_likelihood(cfg(2, 0), model, dist))
        diff = math.exp(exact_likelihood(cfg(1, 1), model, dist))
        assert same == pytest.approx((1 + mu) / (2 * (1 + 2 * mu)), abs=1e-9)
        assert diff == pytest.approx(mu / (2 * (1 + 2 * mu)), abs=1e-9)

    def test_k1_is_certain(self, k1_model, k1_dist):
        for n in (1, 2, 5, 12):
            assert exact_likelihood(cfg(n), k1_model, k1_dist) == pytest.approx(
                0.0, abs=1e-12
            )


class TestNormalisation:
    @pytest.mark.parametrize("seed", [1, 2])
    @pytest.mark.parametrize("total", [2, 4, 6])
    def test_k3_random_matrices(self, seed, total):
        rng = np.random.default_rng(seed)
        P = random_row_stochastic(rng, 3)
        model = cs.MutationModel.from_matrix(P, float(rng.uniform(0.2, 3.0)))
        dist = cs.stationary(model)
        assert level_normalisation(model, dist, total) == pytest.approx(1.0, abs=1e-9)

    def test_multinomial_coefficient(self):
        assert multinomial_coefficient((2, 1)) == 3
        assert multinomial_coefficient((2, 2, 0)) == 6
        assert multinomial_coefficient((5,)) == 1


class TestTable:
    def test_levels_present_and_positive(self, swap_model, swap_dist):
        table = exact_table(swap_model, swap_dist, 4)
        assert sorted(table) == [1, 2, 3, 4]
        for level, entries in table.items():
            assert len(entries) == level + 1
            assert all(q > 0.0 for q in entries.values())

    def test_shape_mismatch(self, swap_model, swap_dist):
        with pytest.raises(InputError):
            exact_likelihood(cfg(1, 1, 1), swap_model, swap_dist)
