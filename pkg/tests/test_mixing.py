"""Tests for boundary-flip deviations, decay fits and the mixing condition."""

from __future__ import annotations

import math

import pytest

from entrofact.errors import PreconditionError
from entrofact.lattice import Region
from entrofact.mixing import (
    chain_sweep,
    check_condition,
    collect_samples,
    fit_decay,
    fit_ssm,
    psi_deviation,
)
from entrofact.models import BoundaryCondition, make_colorings, make_hardcore, make_ising
from entrofact.transfer import ChainTransferMatrix


def _tau(n: int, left: int = 1, right: int = 1) -> BoundaryCondition:
    return BoundaryCondition.of({(-1,): left, (n,): right})


class TestPsiDeviation:
    """Tests for the marginal-density deviation under boundary flips."""

    def test_zero_without_coupling(self) -> None:
        """Test that flips do nothing at infinite temperature."""
        assert psi_deviation(make_ising(0.0), Region.chain(3), Region(1, ((0,),)), (3,), _tau(3)) == 0.0

    def test_decays_with_distance(self) -> None:
        """Test that farther flips matter less."""
        model = make_ising(0.5)
        near = psi_deviation(model, Region.chain(2), Region(1, ((0,),)), (2,), _tau(2))
        far = psi_deviation(model, Region.chain(5), Region(1, ((0,),)), (5,), _tau(5))
        assert 0.0 < far < near

    def test_flip_must_be_on_boundary(self) -> None:
        """Test that an interior flip vertex is refused."""
        with pytest.raises(PreconditionError, match="not on the boundary"):
            psi_deviation(make_ising(0.5), Region.chain(3), Region(1, ((0,),)), (1,), _tau(3))

    def test_free_boundary_refused(self) -> None:
        """Test that flips need a fixed boundary."""
        with pytest.raises(PreconditionError, match="fixed boundary"):
            psi_deviation(
                make_ising(0.5), Region.chain(3), Region(1, ((0,),)), (3,), BoundaryCondition.free_boundary()
            )

    def test_delta_inside_region(self) -> None:
        """Test that the marginal support lies in the region."""
        with pytest.raises(PreconditionError, match="inside the region"):
            psi_deviation(make_ising(0.5), Region.chain(3), Region(1, ((4,),)), (3,), _tau(3))

    def test_hard_constraint_relaxed_distance(self) -> None:
        """Test that hard-constraint models are only evaluated far from the flip."""
        with pytest.raises(PreconditionError, match="below L/2"):
            psi_deviation(make_hardcore(1.0), Region.chain(3), Region(1, ((2,),)), (3,), _tau(3, 0, 0), relax_side=6)

    def test_absolute_continuity_failure(self) -> None:
        """Test that a flip emptying the support gives an infinite deviation."""
        value = psi_deviation(make_colorings(2), Region.chain(1), Region(1, ((0,),)), (1,), _tau(1, 0, 0))
        assert value == math.inf

    def test_collect_samples(self) -> None:
        """Test that every boundary vertex is visited with its distance."""
        samples = collect_samples(make_ising(0.4), Region.chain(3), [Region(1, ((0,),))], _tau(3))
        assert sorted(s.distance for s in samples) == [1, 3]
        assert all(s.deviation > 0 for s in samples)


class TestFitDecay:
    """Tests for the least-squares decay fit."""

    def test_recovers_exponential(self) -> None:
        """Test exact recovery of K and a from noiseless samples."""
        samples = [(d, 2.0 * math.exp(-0.5 * d)) for d in range(9)]
        estimate = fit_decay(samples)
        assert estimate.k_hat == pytest.approx(2.0)
        assert estimate.a_hat == pytest.approx(0.5)
        assert estimate.residual == pytest.approx(0.0, abs=1e-10)

    def test_uses_worst_deviation_per_distance(self) -> None:
        """Test that the fit keeps the largest value at each distance."""
        samples = [(d, math.exp(-d)) for d in range(2, 8)] + [(d, 0.5 * math.exp(-d)) for d in range(2, 8)]
        assert fit_decay(samples).a_hat == pytest.approx(1.0)

    def test_all_below_floor(self) -> None:
        """Test that vanishing deviations are reported as too fast to fit."""
        estimate = fit_decay([(d, 0.0) for d in range(2, 10)])
        assert estimate.too_fast
        assert estimate.a_hat is None

    def test_too_few_points(self) -> None:
        """Test that fewer than four usable distances are refused."""
        with pytest.raises(PreconditionError, match="at least 4"):
            fit_decay([(2, 0.1), (3, 0.05), (4, 0.02)])

    def test_negative_rejected(self) -> None:
        """Test that deviations must be nonnegative."""
        with pytest.raises(ValueError, match="nonnegative"):
            fit_decay([(2, -0.1)])


class TestFitSSM:
    """Tests for the chain sweep against the transfer-matrix rate."""

    def test_chain_sweep_entries(self) -> None:
        """Test that the sweep places the flip at distance n."""
        plan = chain_sweep(5, 1, 0)
        assert len(plan.entries) == 5
        region, delta, x, tau = plan.entries[-1]
        assert region == Region.chain(5)
        assert x == (5,)
        assert tau.spin_at((-1,)) == 1

    @pytest.mark.parametrize("beta", [0.2, 0.4])
    def test_rate_matches_transfer_matrix(self, beta: float) -> None:
        """Test the fitted rate within ten percent of -log tanh(beta)."""
        model = make_ising(beta)
        estimate = fit_ssm(model, chain_sweep(10, 1, 1))
        oracle = ChainTransferMatrix(model).decay_rate()
        assert estimate.a_hat is not None
        assert abs(estimate.a_hat - oracle) / oracle < 0.10
        assert estimate.plan["name"] == "chain 1..10"

    def test_infinite_temperature_is_too_fast(self) -> None:
        """Test that a decoupled chain has nothing to fit."""
        assert fit_ssm(make_ising(0.0), chain_sweep(8)).too_fast


class TestCheckCondition:
    """Tests for the exhaustive mixing-condition sweep."""

    def test_holds_without_coupling(self) -> None:
        """Test that any positive K, a works at infinite temperature."""
        report = check_condition(make_ising(0.0), Region.chain(2), 1.0, 1.0)
        assert report.passed
        assert report.exhaustive
        assert report.boundaries == 4

    def test_fails_with_tiny_constant(self) -> None:
        """Test that a coupled chain violates K = 1e-6."""
        report = check_condition(make_ising(1.0), Region.chain(2), 1e-6, 1.0)
        assert not report.passed
        assert report.worst is not None

    def test_single_boundary(self) -> None:
        """Test evaluation under a fixed boundary condition."""
        report = check_condition(make_ising(0.3), Region.chain(3), 10.0, 0.1, tau=_tau(3))
        assert report.boundaries == 1
        assert report.evaluated == 7 * 2
        assert report.passed
