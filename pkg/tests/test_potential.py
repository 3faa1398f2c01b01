import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lifshitz.errors import ConfigurationError
from lifshitz.lattice import BoxGrid, LatticeGeometry, cell_offsets
from lifshitz.potential import (
    AtomAtZero,
    BaseSet,
    CouplingLaw,
    Custom,
    GeneralBreather,
    PointMass,
    PotentialModel,
    Realization,
    StandardBreather,
    Tabulated,
    TentProfile,
    Uniform,
    cutoff_simplify,
    evaluate_on_grid,
    evaluate_potential,
    find_nondegeneracy_level,
    mu_nondegeneracy_check,
    non_degeneracy_margin,
    sample_for_box,
    sample_realization,
)


def full_cell_model(geom, coupling=1.0, law=None):
    return PotentialModel(geom, StandardBreather(coupling, BaseSet("box", (0.5,))), CouplingLaw((law or Uniform(),)))


class TestSampling:
    def test_same_key_same_value(self, breather_model):
        a = sample_realization(breather_model, 0, 17, 0)
        b = sample_realization(breather_model, 0, 17, 0)
        assert a.values.shape == (1,)
        assert 0.0 <= a.values[0] <= 1.0
        assert a == b

    def test_point_mass_gives_ones(self, line):
        model = full_cell_model(line, law=PointMass(1.0))
        r = sample_realization(model, 1, 99, 3)
        assert r.values.tolist() == [1.0, 1.0, 1.0]

    def test_uniform_mean(self, breather_model):
        r = sample_realization(breather_model, 4999, 5, 0)
        assert len(r.values) == 9999
        assert abs(r.values.mean() - 0.5) < 0.02

    def test_other_key_differs(self, breather_model):
        a = sample_realization(breather_model, 3, 1, 0)
        b = sample_realization(breather_model, 3, 1, 1)
        c = sample_realization(breather_model, 3, 2, 0)
        assert not np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    @given(st.integers(0, 2**64 - 1), st.integers(0, 10_000), st.integers(0, 5), st.integers(0, 5))
    def test_values_do_not_depend_on_the_box(self, seed, index, small, extra):
        geom = LatticeGeometry.cubic(1)
        model = full_cell_model(geom)
        inner = sample_realization(model, small, seed, index).as_dict()
        outer = sample_realization(model, small + extra, seed, index).as_dict()
        assert all(outer[k] == v for k, v in inner.items())

    def test_site_order_irrelevant(self, line):
        model = full_cell_model(line)
        sites = np.array([[3], [-2], [0], [7]])
        fwd = sample_realization(model, sites, 8, 2).as_dict()
        rev = sample_realization(model, sites[::-1], 8, 2).as_dict()
        assert fwd == rev

    def test_empty_index_set_rejected(self, line):
        with pytest.raises(ConfigurationError):
            sample_realization(full_cell_model(line), np.zeros((0, 1), dtype=int), 0, 0)

    def test_realization_is_read_only(self, breather_model):
        r = sample_realization(breather_model, 2, 0, 0)
        with pytest.raises(ValueError):
            r.values[0] = 0.5

    def test_atom_law_frequency(self, line):
        model = full_cell_model(line, law=AtomAtZero(0.3, Uniform()))
        r = sample_realization(model, 4999, 11, 0)
        frac = np.mean(r.values == 0.0)
        sigma = math.sqrt(0.3 * 0.7 / r.values.size)
        assert abs(frac - 0.3) < 4 * sigma

    def test_beta_law_mean(self, line):
        law = Tabulated.beta(2.0, 5.0)
        model = full_cell_model(line, law=law)
        r = sample_realization(model, 4999, 4, 0)
        assert abs(law.mean - 2.0 / 7.0) < 5e-3
        assert abs(r.values.mean() - 2.0 / 7.0) < 0.01

    def test_bad_laws_rejected(self):
        with pytest.raises(ConfigurationError):
            Uniform(0.6, 0.2)
        with pytest.raises(ConfigurationError):
            CouplingLaw((Uniform(0.5, 1.0),), require_zero_in_support=True)


class TestPointEvaluation:
    def test_inside_base_set(self, line):
        model = PotentialModel(line, StandardBreather(2.0, BaseSet("box", (0.5,))), CouplingLaw((Uniform(),)))
        r = Realization(np.array([[0]]), np.array([1.0]), 0, 0)
        assert evaluate_potential(model, r, [0.0]) == 2.0

    def test_zero_coupling_vanishes(self, line):
        model = PotentialModel(line, StandardBreather(2.0, BaseSet("box", (0.5,))), CouplingLaw((Uniform(),)))
        r = Realization(np.array([[0]]), np.array([0.0]), 0, 0)
        for x in (-0.4, 0.0, 0.3):
            assert evaluate_potential(model, r, [x]) == 0.0

    def test_ball_membership_2d(self):
        geom = LatticeGeometry.cubic(2)
        model = PotentialModel(geom, StandardBreather(1.0, BaseSet("ball", (1.0,))), CouplingLaw((Uniform(),)))
        r = Realization(np.array([[0, 0]]), np.array([0.5]), 0, 0)
        assert evaluate_potential(model, r, [0.4, 0.4]) == 0.0
        assert evaluate_potential(model, r, [0.3, 0.3]) == 1.0

    def test_missing_neighbour_flagged(self, line):
        model = PotentialModel(line, GeneralBreather(TentProfile(1.0, 1.5)), CouplingLaw((Uniform(),)))
        r = Realization(np.array([[0]]), np.array([1.0]), 0, 0)
        _, complete = evaluate_potential(model, r, [0.2], with_flag=True)
        assert not complete


class TestGridEvaluation:
    def test_all_zero_couplings(self, breather_model):
        grid = BoxGrid(breather_model.geometry, 3, 8)
        r = Realization.constant(breather_model.geometry, 3, 0.0)
        assert not np.any(evaluate_on_grid(breather_model, r, grid))

    def test_monotone_in_coupling(self, breather_model):
        grid = BoxGrid(breather_model.geometry, 2, 16)
        r = sample_for_box(breather_model, 2, 5, 0)
        lo = evaluate_on_grid(breather_model, r.with_values(np.where(r.sites[:, 0] == 0, 0.3, r.values)), grid)
        hi = evaluate_on_grid(breather_model, r.with_values(np.where(r.sites[:, 0] == 0, 0.6, r.values)), grid)
        assert np.all(hi >= lo)
        assert np.any(hi > lo)

    def test_covered_fraction_matches_measure(self, line):
        model = PotentialModel(line, StandardBreather(1.0, BaseSet("box", (0.3,))), CouplingLaw((Uniform(),)))
        for n_h in (16, 64, 256):
            grid = BoxGrid(line, 0, n_h)
            frac = np.mean(evaluate_on_grid(model, Realization.constant(line, 0, 1.0), grid) > 0)
            assert abs(frac - 0.6) <= 1.0 / n_h

    def test_grid_agrees_with_pointwise(self, line):
        model = PotentialModel(line, GeneralBreather(TentProfile(1.0, 0.9)), CouplingLaw((Uniform(),)))
        grid = BoxGrid(line, 2, 8)
        r = sample_for_box(model, 2, 3, 1)
        on_grid = evaluate_on_grid(model, r, grid)
        direct = np.array([evaluate_potential(model, r, x) for x in grid.physical_nodes()])
        np.testing.assert_allclose(on_grid.ravel(), direct, atol=1e-12)

    def test_half_cell_2d_fraction(self):
        geom = LatticeGeometry.cubic(2)
        model = PotentialModel(geom, StandardBreather(1.0, BaseSet("half-cell")), CouplingLaw((Uniform(),)))
        grid = BoxGrid(geom, 0, 32)
        frac = np.mean(evaluate_on_grid(model, Realization.constant(geom, 0, 1.0), grid) > 0)
        assert abs(frac - 0.25) < 0.05

    def test_nonnegative(self, breather_model):
        grid = BoxGrid(breather_model.geometry, 3, 8)
        W = evaluate_on_grid(breather_model, sample_for_box(breather_model, 3, 0, 0), grid)
        assert W.min() >= 0.0


class TestCutoff:
    def test_two_valued_on_level_set(self, line):
        u = Custom(lambda lam, z: np.where((z[:, 0] > 0.0) & (z[:, 0] < 0.3), 2.0, 0.0)[None, :], 0.5)
        cut = cutoff_simplify(u, 1.0)
        _, z = cell_offsets(line, 100)
        vals = cut.values([1.0], z, line)[0]
        assert set(np.unique(vals)) == {0.0, 1.0}
        assert np.mean(vals == 1.0) == pytest.approx(0.3, abs=0.011)

    def test_below_level_vanishes(self, line):
        u = Custom(lambda lam, z: np.full((1, len(z)), 0.4), 0.5)
        _, z = cell_offsets(line, 50)
        assert not np.any(cutoff_simplify(u, 0.5).values([1.0], z, line))

    def test_tent_threshold_matches_scan(self, line):
        tent = GeneralBreather(TentProfile(1.0, 0.5))
        cut = cutoff_simplify(tent, 0.5)
        _, z = cell_offsets(line, 400)
        direct = tent.values([1.0], z, line)[0] >= 0.5
        reduced = cut.values([1.0], z, line)[0]
        assert np.array_equal(reduced > 0, direct)
        assert np.mean(direct) == pytest.approx(0.5, abs=0.01)

    def test_nonpositive_level_rejected(self, breather_model):
        with pytest.raises(ConfigurationError):
            cutoff_simplify(breather_model.single_site, 0.0)


class TestNonDegeneracy:
    def test_fixed_half_indicator(self, line):
        u = Custom(lambda lam, z: np.where((z[:, 0] > 0.0) & (z[:, 0] < 0.5), 1.0, 0.0)[None, :], 0.5)
        model = PotentialModel(line, u, CouplingLaw((Uniform(),)))
        assert non_degeneracy_margin(model, 20, 0).estimate == pytest.approx(0.5, abs=1e-12)

    def test_zero_potential(self, line):
        model = full_cell_model(line, law=PointMass(0.0))
        assert non_degeneracy_margin(model, 50, 0).estimate == 0.0

    def test_uniform_breather_mean_length(self, line):
        res = non_degeneracy_margin(full_cell_model(line), 4000, 2)
        assert abs(res.estimate - 0.5) <= 3 * res.half_width / 1.96 + 1.0 / 64

    def test_mu_check_full_cell(self, line):
        u = Custom(lambda lam, z: np.ones((1, len(z))), 0.5)
        res = mu_nondegeneracy_check(PotentialModel(line, u, CouplingLaw((Uniform(),))), 0.5, 200, 0)
        assert res.passed and res.probability == 1.0

    def test_mu_check_zero_potential(self, line):
        res = mu_nondegeneracy_check(full_cell_model(line, law=PointMass(0.0)), 0.5, 200, 0)
        assert not res.passed and res.probability == 0.0

    def test_mu_check_uniform_cdf(self, line):
        res = mu_nondegeneracy_check(full_cell_model(line), 0.2, 4000, 1)
        assert res.passed
        assert abs(res.probability - 0.8) < 3 * math.sqrt(0.16 / 4000) + 1.0 / 64

    def test_mu_out_of_range(self, line):
        with pytest.raises(ConfigurationError):
            mu_nondegeneracy_check(full_cell_model(line), 1.5, 10, 0)

    def test_level_search(self, line):
        # P{lambda >= mu} = 1 - mu, so mu = 1/2 sits exactly on the boundary and cannot be certified
        assert find_nondegeneracy_level(full_cell_model(line), 2000, 0) == 0.25
        assert find_nondegeneracy_level(full_cell_model(line, law=PointMass(0.0)), 100, 0) is None
