"""Tests for block factorization, two-block bounds and the even/odd constant."""

from __future__ import annotations

import math

import numpy as np
import pytest

from entrofact.errors import DomainError, PreconditionError, StateSpaceTooLargeError
from entrofact.gibbs import GibbsTable, gibbs_table
from entrofact.inequalities import (
    BlockWeights,
    check_btc,
    check_shearer_product,
    check_tensorization,
    check_two_block,
    epsilon_k,
    estimate_best_constant,
    even_odd_delta,
    gamma,
    jensen_check,
    recursion_consistency,
    reduction_even_odd,
    rough_entropy_constant,
    scale_delta,
    ssm_two_block_bound,
    theta,
    two_block_epsilon,
)
from entrofact.lattice import Region, boundary
from entrofact.models import BoundaryCondition, SpinModel, make_hardcore, make_ising
from entrofact.optimize import OptimizerConfig, random_densities


@pytest.fixture
def optimizer() -> OptimizerConfig:
    return OptimizerConfig(starts=3, max_iter=200, seed=5)


def _chain_table(model: SpinModel, n: int, spin: int = 0) -> GibbsTable:
    region = Region.chain(n)
    return gibbs_table(model, region, BoundaryCondition.constant(spin, boundary(region)))


def _densities(table: GibbsTable, count: int = 10, seed: int = 0) -> list[np.ndarray]:
    return random_densities(table, np.random.default_rng(seed), count)


class TestBlockWeights:
    """Tests for weight families and gamma."""

    def test_negative_weight_rejected(self) -> None:
        """Test that negative weights are refused."""
        with pytest.raises(ValueError, match="nonnegative"):
            BlockWeights(Region.chain(2), ((Region.chain(1), -1.0),))

    def test_block_outside_volume_rejected(self) -> None:
        """Test that blocks must lie in the volume."""
        with pytest.raises(ValueError, match="not inside"):
            BlockWeights(Region.chain(2), ((Region.chain(1, start=5), 1.0),))

    def test_duplicate_blocks_merge(self) -> None:
        """Test that repeated blocks add their weights."""
        block = Region.chain(2)
        weights = BlockWeights(block, ((block, 0.5), (block, 0.25)))
        assert weights.blocks == ((block, 0.75),)

    @pytest.mark.parametrize(
        "weights,expected",
        [
            (BlockWeights.singletons(Region.chain(4)), 1.0),
            (BlockWeights.even_odd(Region.rectangle((3, 3))), 1.0),
            (BlockWeights.full(Region.chain(3), 2.5), 2.5),
            (BlockWeights.blocks_up_to(Region.chain(3), 2), 3.0),
        ],
    )
    def test_gamma(self, weights: BlockWeights, expected: float) -> None:
        """Test gamma of the presets."""
        assert gamma(weights) == pytest.approx(expected)

    def test_gamma_uses_least_covered_vertex(self) -> None:
        """Test that gamma is the minimum coverage."""
        volume = Region.chain(3)
        weights = BlockWeights.explicit(volume, {Region.chain(2): 2.0, Region(1, ((2,),)): 0.5})
        assert weights.gamma == pytest.approx(0.5)
        assert weights.argmin_vertices() == [(2,)]

    @pytest.mark.parametrize("factor", [0.0, 0.5, 3.0])
    def test_gamma_is_homogeneous(self, factor: float) -> None:
        """Test gamma(c alpha) = c gamma(alpha)."""
        weights = BlockWeights.explicit(Region.chain(3), {Region.chain(2): 2.0, Region(1, ((2,),)): 0.5})
        assert gamma(weights.scaled(factor)) == pytest.approx(factor * gamma(weights))

    def test_gamma_of_empty_volume(self) -> None:
        """Test that gamma is undefined on an empty volume."""
        with pytest.raises(PreconditionError):
            gamma(BlockWeights(Region.empty(1)))

    def test_blocks_up_to_cap(self) -> None:
        """Test that huge block families are refused."""
        with pytest.raises(StateSpaceTooLargeError):
            BlockWeights.blocks_up_to(Region.chain(20), 20)


class TestFactorizationOnProducts:
    """Tests that must hold exactly at infinite temperature."""

    def test_btc_with_unit_constant(self) -> None:
        """Test that singleton factorization holds with constant one on a product."""
        table = _chain_table(make_ising(0.0), 4)
        weights = BlockWeights.singletons(table.region)
        for f in _densities(table):
            assert check_btc(table, weights, f, constant=1.0).passed

    def test_shearer_with_fractional_cover(self) -> None:
        """Test weighted Shearer for a fractional cover."""
        table = _chain_table(make_ising(0.0), 4)
        volume = table.region
        weights = BlockWeights.explicit(
            volume,
            {Region.chain(2): 0.5, Region.chain(2, start=2): 0.7, Region.chain(3, start=1): 0.5, volume: 0.1},
        )
        for f in _densities(table):
            report = check_shearer_product(table, weights, f)
            assert report.passed, report

    def test_shearer_needs_product(self) -> None:
        """Test that an interacting measure is refused."""
        table = _chain_table(make_ising(0.5), 3)
        with pytest.raises(PreconditionError, match="not a product"):
            check_shearer_product(table, BlockWeights.singletons(table.region), np.ones(table.size))

    def test_best_constant_is_one(self, optimizer: OptimizerConfig) -> None:
        """Test that the optimizer finds constant one on a product with singletons."""
        table = _chain_table(make_ising(0.0), 3)
        estimate = estimate_best_constant(table, BlockWeights.singletons(table.region), optimizer)
        assert estimate.value == pytest.approx(1.0, abs=1e-6)

    def test_delta_is_one(self, optimizer: OptimizerConfig) -> None:
        """Test that the even/odd constant is one on a product."""
        table = _chain_table(make_ising(0.0), 4)
        estimate = even_odd_delta(table, optimizer)
        assert estimate.delta_hat == pytest.approx(1.0, abs=1e-4)

    def test_two_block_epsilon_vanishes(self) -> None:
        """Test that halves of a product measure have eps = 0."""
        table = _chain_table(make_ising(0.0), 4)
        assert two_block_epsilon(table, Region.chain(3), Region.chain(2, start=2)) < 1e-12


class TestTwoBlock:
    """Tests for the overlapping two-block bounds."""

    @pytest.mark.parametrize("beta", [0.1, 0.3])
    def test_two_block_bounds(self, beta: float) -> None:
        """Test both entropy bounds on an Ising chain of five."""
        table = _chain_table(make_ising(beta), 5, spin=1)
        a, b = Region.chain(3), Region.chain(3, start=2)
        eps = two_block_epsilon(table, a, b)
        assert 0.0 < eps < 1.0
        for f in _densities(table, seed=int(beta * 10)):
            reports = check_two_block(table, a, b, f, epsilon=eps)
            names = [r.name for r in reports]
            assert names == ["two_block_plain", "two_block_smoothed", "two_block_penalty"]
            for report in reports[:2]:
                assert report.passed, report

    def test_hardcore_chain_epsilon(self) -> None:
        """Test eps on a hard-core chain where every outside spin pattern has a positive-mass twin."""
        region = Region.chain(4)
        table = gibbs_table(make_hardcore(1.0), region, BoundaryCondition.free_boundary())
        assert two_block_epsilon(table, Region.chain(3), Region.chain(2, start=2)) == pytest.approx(1.0 / 3.0)

    def test_zero_mass_boundary_counts(self) -> None:
        """Test that eps sees boundary spins of B that are forbidden inside V."""
        region = Region.chain(4)
        table = gibbs_table(make_hardcore(1.0), region, BoundaryCondition.free_boundary())
        a, b = Region(1, ((1,), (2,))), Region(1, ((0,), (3,)))
        eps = two_block_epsilon(table, a, b)
        assert eps == pytest.approx(5.0 / 3.0)
        (report,) = check_two_block(table, a, b, np.ones(table.size))
        assert report.passed is None

    def test_cover_required(self) -> None:
        """Test that the two blocks must cover the region."""
        table = _chain_table(make_ising(0.2), 4)
        with pytest.raises(PreconditionError, match="cover"):
            two_block_epsilon(table, Region.chain(2), Region.chain(1, start=2))

    def test_large_epsilon_is_inapplicable(self) -> None:
        """Test that eps >= 1 yields an unevaluated report."""
        table = _chain_table(make_ising(0.2), 3)
        (report,) = check_two_block(table, Region.chain(2), Region.chain(2, start=1), np.ones(table.size), 1.5)
        assert report.passed is None

    @pytest.mark.parametrize(
        "eps,expected",
        [(0.0, 0.0), (0.5, 168.0), (0.1, 84 * 0.1 / 0.81)],
    )
    def test_theta(self, eps: float, expected: float) -> None:
        """Test the penalty factor."""
        assert theta(eps) == pytest.approx(expected)

    def test_theta_domain(self) -> None:
        """Test that theta is undefined at one."""
        with pytest.raises(DomainError):
            theta(1.0)

    def test_interpolation_bound_is_ordered(self) -> None:
        """Test exact eps <= psi sup <= interpolation bound."""
        table = _chain_table(make_ising(0.4), 5, spin=1)
        bound = ssm_two_block_bound(table.model, table, Region.chain(3), Region.chain(3, start=2))
        assert bound.ordered
        assert bound.flips == 1

    def test_interpolation_needs_fixed_boundary(self) -> None:
        """Test that a free boundary is refused."""
        region = Region.chain(4)
        table = gibbs_table(make_ising(0.4), region, BoundaryCondition.free_boundary())
        with pytest.raises(PreconditionError, match="fixed boundary"):
            ssm_two_block_bound(table.model, table, Region.chain(3), Region.chain(2, start=2))


class TestTensorization:
    """Tests for combining row-wise constants."""

    def test_two_rows(self) -> None:
        """Test the combined bound on two decoupled rows of pairs."""
        row0 = [Region(2, ((0, 0), (1, 0))), Region(2, ((2, 0),))]
        row1 = [Region(2, ((0, 2), (1, 2))), Region(2, ((2, 2),))]
        volume = Region(2, row0[0].points + row0[1].points + row1[0].points + row1[1].points)
        table = gibbs_table(make_ising(0.5), volume, BoundaryCondition.constant(1, boundary(volume)))
        for f in _densities(table):
            report = check_tensorization(table, [row0, row1], f)
            assert report.passed, report

    def test_rows_must_be_independent(self) -> None:
        """Test that coupled rows are refused."""
        volume = Region.rectangle((2, 2))
        table = gibbs_table(make_ising(0.5), volume, BoundaryCondition.constant(1, boundary(volume)))
        rows = [[Region(2, ((0, 0), (1, 0)))], [Region(2, ((0, 1), (1, 1)))]]
        with pytest.raises(PreconditionError, match="not a product"):
            check_tensorization(table, rows, np.ones(table.size))


class TestReduction:
    """Tests for the even/odd reduction."""

    def test_reduction_holds(self, optimizer: OptimizerConfig) -> None:
        """Test gamma Ent f <= 2 C_eo sum alpha_A mu[Ent_A f] with C_eo = 1/delta_hat."""
        table = _chain_table(make_ising(0.3), 4)
        c_eo = 1.0 / even_odd_delta(table, optimizer).delta_hat
        weights = BlockWeights.explicit(table.region, {Region.chain(2): 1.0, Region.chain(3, start=1): 0.5})
        for f in _densities(table):
            report = reduction_even_odd(table, c_eo, weights, f)
            assert report.passed in (True, None), report

    def test_delta_bracketed(self, optimizer: OptimizerConfig) -> None:
        """Test that delta_hat lies in (0, 1] above the analytic lower bound."""
        table = _chain_table(make_ising(0.3, 0.1), 4)
        estimate = even_odd_delta(table, optimizer)
        assert 0.0 < estimate.delta_hat <= 1.0
        assert estimate.rough_bound <= estimate.delta_hat + 1e-8

    def test_delta_with_hard_constraints(self, optimizer: OptimizerConfig) -> None:
        """Test the even/odd constant for the hard-core gas."""
        table = _chain_table(make_hardcore(1.0), 3)
        estimate = even_odd_delta(table, optimizer)
        assert 0.0 < estimate.delta_hat <= 1.0


class TestConstants:
    """Tests for closed-form constants and the recursion."""

    @pytest.mark.parametrize(
        "mu_star,expected",
        [(0.5, 2.0), (1.0, 0.0), (0.25, math.log(3.0) / 0.5)],
    )
    def test_rough_entropy_constant(self, mu_star: float, expected: float) -> None:
        """Test the two-point log-Sobolev constant."""
        assert rough_entropy_constant(mu_star) == pytest.approx(expected)

    def test_rough_entropy_constant_domain(self) -> None:
        """Test that atoms above one half are invalid."""
        with pytest.raises(DomainError):
            rough_entropy_constant(0.7)

    def test_epsilon_k(self) -> None:
        """Test the recursion error term in one dimension."""
        assert epsilon_k(1, 2.0, 1.0, 4.0) == pytest.approx(10.0 * math.exp(-1.0))

    def test_recursion_consistency(self) -> None:
        """Test the informational recursion comparison."""
        report = recursion_consistency(0.9, 0.8, k=4)
        assert report.l_k == pytest.approx(1.5**4)
        assert report.bound == pytest.approx((1 - 10 / (1.5**4 * 0.9)) * 0.9)
        assert report.holds

    def test_scale_delta(self, optimizer: OptimizerConfig) -> None:
        """Test the scale sweep over intervals in F_1."""
        result = scale_delta(make_ising(0.2), 1, optimizer)
        assert result.regions == 4 + 4 + 4
        assert 0.0 < result.delta_hat <= 1.0

    def test_jensen(self) -> None:
        """Test Ent_A f <= cov_A(f, log f) fiberwise."""
        table = _chain_table(make_ising(0.7), 4)
        for f in _densities(table):
            assert jensen_check(table, Region(1, ((1,), (2,))), f).passed
