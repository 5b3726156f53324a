"""Tests for exact Gibbs tables and the entropy toolkit."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from entrofact.errors import DomainError, NonPermissiveError, PreconditionError
from entrofact.gibbs import (
    ConfigFunction,
    GibbsTable,
    block_entropy,
    block_variance,
    conditional_expectation,
    conditional_operator,
    covariance_block,
    dlr_check,
    entropy,
    expectation,
    expected_block_entropy,
    gibbs_table,
    is_product,
    marginal_density,
    marginal_density_psi,
    read_entf,
    specification_operator,
    telescope_check,
    variance,
    variational_check,
    write_function,
    write_table,
)
from entrofact.lattice import Region, boundary
from entrofact.models import BoundaryCondition, hamiltonian, make_colorings, make_hardcore, make_ising


@pytest.fixture
def region() -> Region:
    return Region.chain(4)


@pytest.fixture
def table(region: Region) -> GibbsTable:
    """Ising chain of four at beta=0.6 with a plus boundary."""
    return gibbs_table(make_ising(0.6, 0.1), region, BoundaryCondition.constant(1, boundary(region)))


@pytest.fixture
def density(table: GibbsTable) -> np.ndarray:
    rng = np.random.default_rng(7)
    return rng.exponential(size=table.size)


class TestGibbsTable:
    """Tests for table construction."""

    def test_normalized(self, table: GibbsTable) -> None:
        """Test that probabilities sum to one."""
        assert table.probs.sum() == pytest.approx(1.0)

    def test_infinite_temperature_is_uniform(self, region: Region) -> None:
        """Test that beta=0 gives the uniform measure."""
        tau = BoundaryCondition.constant(0, boundary(region))
        uniform = gibbs_table(make_ising(0.0), region, tau)
        np.testing.assert_allclose(uniform.probs, np.full(16, 1 / 16))

    def test_boltzmann_weights(self, table: GibbsTable) -> None:
        """Test that probability ratios follow exp(-H)."""
        h = [hamiltonian(table.model, table.region, table.tau, row) for row in table.configs]
        expected = np.exp(-np.array(h))
        np.testing.assert_allclose(table.probs, expected / expected.sum(), rtol=1e-12)

    def test_log_partition(self, table: GibbsTable) -> None:
        """Test log Z against a direct sum."""
        h = np.array([hamiltonian(table.model, table.region, table.tau, row) for row in table.configs])
        assert table.log_z == pytest.approx(math.log(np.exp(-h).sum()))

    def test_mixed_radix_order(self, table: GibbsTable) -> None:
        """Test that vertex i is digit i of the configuration index."""
        assert list(table.configs[6]) == [0, 1, 1, 0]
        assert table.encode([0, 1, 1, 0]) == 6

    def test_hard_constraint_gives_zero_mass(self) -> None:
        """Test that forbidden configurations get probability zero."""
        region = Region.chain(2)
        hard = gibbs_table(make_hardcore(1.0), region, BoundaryCondition.constant(0, boundary(region)))
        assert hard.probs[3] == 0.0
        np.testing.assert_allclose(hard.probs[:3], [1 / 3] * 3)

    def test_non_permissive_boundary(self) -> None:
        """Test that an empty support raises NonPermissiveError."""
        region = Region.chain(3)
        tau = BoundaryCondition.of({(-1,): 0, (3,): 1})
        with pytest.raises(NonPermissiveError):
            gibbs_table(make_colorings(2), region, tau)

    def test_function_shape_checked(self, table: GibbsTable) -> None:
        """Test that a function of the wrong length is refused."""
        with pytest.raises(ValueError, match="shape"):
            ConfigFunction.on(table, np.ones(3))


class TestConditionalExpectation:
    """Tests for mu_A and the DLR property."""

    def test_constant_on_fibers(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test that mu_A f only depends on spins outside A."""
        block = Region(1, ((1,), (2,)))
        cond = conditional_expectation(table, block, density)
        fib = table.fibers(block)
        for members in fib.members:
            assert np.ptp(cond[members]) == pytest.approx(0.0, abs=1e-12)

    def test_full_block_is_mean(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test that conditioning on the whole region returns mu f."""
        cond = conditional_expectation(table, table.region, density)
        np.testing.assert_allclose(cond, expectation(table, density))

    @pytest.mark.parametrize("points", [((0,),), ((1,), (3,)), ((0,), (1,), (2,), (3,))])
    def test_dlr(self, table: GibbsTable, density: np.ndarray, points: tuple[tuple[int, ...], ...]) -> None:
        """Test mu(mu_A f) = mu f."""
        assert dlr_check(table, Region(1, points), density) < 1e-12

    @pytest.mark.parametrize("points", [((0,),), ((1,), (2,)), ((0,), (3,))])
    def test_kernel_matches_conditioning_on_support(self, points: tuple[tuple[int, ...], ...]) -> None:
        """Test that the Gibbs kernel equals mu_A on positive-mass rows and is Markov on every row."""
        table = gibbs_table(make_hardcore(2.0), Region.chain(4), BoundaryCondition.free_boundary())
        block = Region(1, points)
        kernel = specification_operator(table, block).toarray()
        conditional = conditional_operator(table, block).toarray()
        np.testing.assert_allclose(kernel[table.support], conditional[table.support], atol=1e-12)
        np.testing.assert_allclose(kernel.sum(axis=1), 1.0, atol=1e-12)

    def test_kernel_needs_permissive_outside(self) -> None:
        """Test that outside spins with no admissible block spins are refused."""
        table = gibbs_table(make_colorings(2), Region.chain(3), BoundaryCondition.free_boundary())
        with pytest.raises(NonPermissiveError, match="admits no spins"):
            specification_operator(table, Region(1, ((1,),)))


class TestEntropy:
    """Tests for entropy and its block versions."""

    def test_constant_has_zero_entropy(self, table: GibbsTable) -> None:
        """Test Ent of a constant."""
        assert entropy(table, np.full(table.size, 3.0)) == 0.0

    def test_indicator_entropy(self, table: GibbsTable) -> None:
        """Test Ent(1_S) = mu(S) log(1/mu(S))."""
        indicator = (table.spins(0) == 1).astype(float)
        p = expectation(table, indicator)
        assert entropy(table, indicator) == pytest.approx(p * math.log(1 / p))

    def test_negative_function_rejected(self, table: GibbsTable) -> None:
        """Test that entropy needs a nonnegative function."""
        f = np.ones(table.size)
        f[0] = -1.0
        with pytest.raises(DomainError):
            entropy(table, f)

    def test_scale_invariance(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test Ent(c f) = c Ent f."""
        assert entropy(table, 5.0 * density) == pytest.approx(5.0 * entropy(table, density))

    def test_block_entropy_average(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test that mu[Ent_A f] is the average of the fiberwise entropy."""
        block = Region(1, ((0,), (1,)))
        local = block_entropy(table, block, density)
        assert expectation(table, local) == pytest.approx(expected_block_entropy(table, block, density))

    def test_variance_of_spin(self, table: GibbsTable) -> None:
        """Test variance of an indicator."""
        indicator = (table.spins(2) == 0).astype(float)
        p = expectation(table, indicator)
        assert variance(table, indicator) == pytest.approx(p * (1 - p))

    def test_block_covariance(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test the law of total variance and symmetry of cov_A."""
        block = Region(1, ((1,), (2,)))
        g = np.log1p(density)
        local = expectation(table, block_variance(table, block, density))
        between = variance(table, conditional_expectation(table, block, density))
        assert local + between == pytest.approx(variance(table, density))
        np.testing.assert_allclose(
            covariance_block(table, block, density, g), covariance_block(table, block, g, density), atol=1e-12
        )

    def test_telescope(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test the decomposition and telescoping identities along a nested chain."""
        chain = [Region.chain(1), Region.chain(2), Region.chain(4)]
        assert telescope_check(table, chain, density).worst < 1e-10

    def test_telescope_requires_nesting(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test that a non-nested chain is refused."""
        with pytest.raises(PreconditionError, match="nested"):
            telescope_check(table, [Region.chain(2), Region(1, ((3,),))], density)

    def test_variational_optimum(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test that h = log(g / mu g) attains Ent g."""
        h = np.log(density / expectation(table, density))
        result = variational_check(table, density, h)
        assert result.accepted
        assert result.lhs == pytest.approx(result.entropy, abs=1e-10)

    def test_variational_rejects_infeasible(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test that h with mu(e^h) > 1 is not accepted."""
        result = variational_check(table, density, np.ones(table.size))
        assert not result.accepted
        assert result.holds

    def test_variational_within_block(self, table: GibbsTable, density: np.ndarray) -> None:
        """Test the fiberwise inequality for a feasible h."""
        block = Region(1, ((1,), (2,)))
        h = 0.3 * np.log(density) - 1.0
        scale = conditional_expectation(table, block, np.exp(h))
        result = variational_check(table, density, h - np.log(scale), within=block)
        assert result.holds


class TestProductAndMarginals:
    """Tests for product detection and marginal densities."""

    def test_uniform_is_product(self, region: Region) -> None:
        """Test that beta=0 is a product over singletons."""
        tau = BoundaryCondition.constant(0, boundary(region))
        uniform = gibbs_table(make_ising(0.0), region, tau)
        parts = [Region(1, (p,)) for p in region]
        assert is_product(uniform, parts) == pytest.approx(0.0, abs=1e-15)

    def test_coupled_is_not_product(self, table: GibbsTable, region: Region) -> None:
        """Test that an interacting chain is not a product."""
        parts = [Region(1, (p,)) for p in region]
        assert is_product(table, parts) > 1e-3

    def test_parts_must_cover(self, table: GibbsTable) -> None:
        """Test that the parts must partition the block."""
        with pytest.raises(PreconditionError, match="cover"):
            is_product(table, [Region.chain(2)])

    def test_marginal_density(self, table: GibbsTable) -> None:
        """Test that the marginal sums to one and agrees with the pointwise psi."""
        delta = Region(1, ((0,), (3,)))
        psi = marginal_density(table, delta)
        assert psi.sum() == pytest.approx(1.0)
        value = marginal_density_psi(table.model, table.region, delta, table.tau, [1, 0])
        assert value == pytest.approx(psi[1])

    def test_marginal_support_checked(self, table: GibbsTable) -> None:
        """Test that delta must lie inside the region."""
        with pytest.raises(PreconditionError):
            marginal_density_psi(table.model, table.region, Region(1, ((9,),)), table.tau, [0])


class TestEntfFiles:
    """Tests for the binary table format."""

    def test_write_and_read_table(self, table: GibbsTable, tmp_path: Path) -> None:
        """Test that a table file carries its header and values."""
        path = tmp_path / "table.entf"
        write_table(path, table)
        header, values = read_entf(path)
        assert header["kind"] == "gibbs"
        assert header["q"] == 2
        assert header["model_hash"] == table.model.fingerprint()
        np.testing.assert_array_equal(values, table.probs)

    def test_write_function(self, table: GibbsTable, density: np.ndarray, tmp_path: Path) -> None:
        """Test that a function file records its label."""
        path = tmp_path / "f.entf"
        write_function(path, table, ConfigFunction.on(table, density, label="random"))
        header, values = read_entf(path)
        assert header["label"] == "random"
        np.testing.assert_array_equal(values, density)

    def test_bad_magic(self, tmp_path: Path) -> None:
        """Test that a foreign file is refused."""
        path = tmp_path / "bad.entf"
        path.write_bytes(b"NOPE")
        with pytest.raises(ValueError, match="not an ENTF1"):
            read_entf(path)
