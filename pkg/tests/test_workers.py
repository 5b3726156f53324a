"""Tests for the worker pool and seeded streams."""

from __future__ import annotations

import numpy as np
import pytest

from entrofact.workers import THREADS_ENV, make_rng, ordered_map, resolve_threads, spawn_rngs


class TestResolveThreads:
    """Tests for thread-count resolution."""

    def test_explicit_value_wins(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that an explicit count overrides the environment."""
        monkeypatch.setenv(THREADS_ENV, "8")
        assert resolve_threads(3) == 3

    def test_environment_fallback(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test reading the environment variable."""
        monkeypatch.setenv(THREADS_ENV, "4")
        assert resolve_threads(None) == 4

    def test_invalid_environment_ignored(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that a non-integer variable falls back to one thread."""
        monkeypatch.setenv(THREADS_ENV, "many")
        assert resolve_threads(None) == 1

    def test_minimum_one(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that counts below one are clamped."""
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert resolve_threads(0) == 1
        assert resolve_threads(None) == 1


class TestOrderedMap:
    """Tests for order-preserving parallel map."""

    @pytest.mark.parametrize("threads", [1, 4])
    def test_order_preserved(self, threads: int) -> None:
        """Test that results come back in input order."""
        assert ordered_map(lambda x: x * x, range(20), threads=threads) == [x * x for x in range(20)]

    def test_parallel_sum_matches_serial(self) -> None:
        """Test that a reduction over the results does not depend on the worker count."""
        values = [0.1 * i for i in range(50)]
        serial = sum(ordered_map(lambda x: x / 3.0, values, threads=1))
        parallel = sum(ordered_map(lambda x: x / 3.0, values, threads=8))
        assert serial == parallel


class TestStreams:
    """Tests for counter-based random streams."""

    def test_same_seed_same_stream(self) -> None:
        """Test reproducibility of a stream."""
        np.testing.assert_array_equal(make_rng(5, 1).random(8), make_rng(5, 1).random(8))

    def test_streams_differ(self) -> None:
        """Test that different stream paths give different draws."""
        assert not np.array_equal(make_rng(5, 1).random(8), make_rng(5, 2).random(8))

    def test_spawn_matches_make_rng(self) -> None:
        """Test that spawned replicas equal the explicit stream path."""
        rngs = spawn_rngs(9, 3, 4)
        np.testing.assert_array_equal(rngs[2].random(4), make_rng(9, 4, 2).random(4))
