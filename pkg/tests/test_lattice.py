"""Tests for regions, scale classes and the overlapping decomposition."""

from __future__ import annotations

import pytest

from entrofact.errors import DistanceUndefinedError, PreconditionError
from entrofact.lattice import (
    Region,
    admissible_rectangles,
    boundary,
    cesi_decomposition,
    ell,
    even_odd_split,
    fat_region,
    graph_distance,
    in_scale_box,
    in_scale_class,
    interior_edges,
    is_even,
    is_fat,
    normalize_to_scale_box,
    scale_class_index,
    smallest_nontrivial_scales,
    verify_geo,
)


class TestRegion:
    """Tests for the Region value type."""

    def test_points_are_canonical(self) -> None:
        """Test that points are deduplicated and sorted."""
        region = Region(1, ((2,), (0,), (2,)))
        assert region.points == ((0,), (2,))

    def test_rejects_wrong_arity(self) -> None:
        """Test that points of the wrong dimension are rejected."""
        with pytest.raises(ValueError, match="coordinates"):
            Region(2, ((0,),))

    def test_rectangle_size(self) -> None:
        """Test rectangle construction."""
        rect = Region.rectangle((2, 3))
        assert len(rect) == 6
        assert rect.extents() == (1, 2)

    def test_set_algebra(self) -> None:
        """Test union, intersection and difference."""
        a = Region.chain(3)
        b = Region.chain(3, start=2)
        assert len(a | b) == 5
        assert (a & b).points == ((2,),)
        assert (a - b).points == ((0,), (1,))
        assert (a & b) <= a

    def test_dimension_mismatch(self) -> None:
        """Test that mixing dimensions raises."""
        with pytest.raises(ValueError, match="Dimension mismatch"):
            _ = Region.chain(2) | Region.rectangle((1, 1))

    def test_json_round_trip(self) -> None:
        """Test JSON encoding of a region."""
        rect = Region.rectangle((2, 2), origin=(1, -1))
        assert Region.from_json(rect.to_json()) == rect

    def test_indices_in_parent(self) -> None:
        """Test positions inside a parent region."""
        parent = Region.chain(5)
        assert list(Region(1, ((1,), (3,))).indices_in(parent)) == [1, 3]

    def test_indices_outside_parent(self) -> None:
        """Test that a point outside the parent is a precondition failure."""
        with pytest.raises(PreconditionError):
            Region(1, ((7,),)).indices_in(Region.chain(3))


class TestBoundaryAndEdges:
    """Tests for exterior boundary and edge enumeration."""

    def test_chain_boundary(self) -> None:
        """Test the boundary of an interval."""
        assert boundary(Region.chain(3)).points == ((-1,), (3,))

    def test_square_boundary(self) -> None:
        """Test the boundary of a 2x2 square."""
        assert len(boundary(Region.rectangle((2, 2)))) == 8

    def test_interior_edges(self) -> None:
        """Test edge count on a 3x3 square."""
        assert interior_edges(Region.rectangle((3, 3))).shape == (12, 2)

    @pytest.mark.parametrize("shape", [(5,), (3, 3), (2, 4)])
    def test_even_odd_split_is_bipartite(self, shape: tuple[int, ...]) -> None:
        """Test that no edge joins two sites of the same parity class."""
        region = Region.rectangle(shape)
        even, odd = even_odd_split(region)
        assert len(even) + len(odd) == len(region)
        for i, j in interior_edges(region):
            assert is_even(region.points[i]) != is_even(region.points[j])
        assert all(is_even(p) for p in even)


class TestDistance:
    """Tests for graph distance."""

    def test_chain_distance(self) -> None:
        """Test distance between disjoint intervals."""
        assert graph_distance(Region.chain(2), Region.chain(2, start=5)) == 4

    def test_l1_distance(self) -> None:
        """Test that distance is L1 in two dimensions."""
        assert graph_distance(Region(2, ((0, 0),)), Region(2, ((2, 3),))) == 5

    def test_empty_region_raises(self) -> None:
        """Test that an empty region has no distance."""
        with pytest.raises(DistanceUndefinedError):
            graph_distance(Region.empty(1), Region.chain(2))


class TestScaleClasses:
    """Tests for scale lengths and membership."""

    def test_ell(self) -> None:
        """Test the scale length."""
        assert ell(2, 1) == pytest.approx(2.25)
        assert ell(2, 2) == pytest.approx(1.5)

    @pytest.mark.parametrize(
        "n,k,expected",
        [(2, 0, True), (3, 0, False), (3, 1, True), (4, 1, False)],
    )
    def test_chain_membership(self, n: int, k: int, expected: bool) -> None:
        """Test scale-class membership of intervals."""
        assert in_scale_class(Region.chain(n), k) is expected

    def test_membership_ignores_translation(self) -> None:
        """Test that membership is translation invariant."""
        assert in_scale_class(Region.chain(3, start=40), 1)

    def test_membership_allows_permutation(self) -> None:
        """Test that a rotated rectangle belongs to the same class."""
        tall = Region.rectangle((1, 3))
        wide = Region.rectangle((3, 1))
        for k in range(6):
            assert in_scale_class(tall, k) == in_scale_class(wide, k)

    def test_scale_class_index(self) -> None:
        """Test the smallest scale containing an interval."""
        assert scale_class_index(Region.chain(3)) == 1
        assert scale_class_index(Region.chain(1)) == 0

    def test_normalize_to_scale_box(self) -> None:
        """Test translation to the origin with ascending extents."""
        region = Region.rectangle((4, 2), origin=(3, 5))
        normalized = normalize_to_scale_box(region)
        lo, _ = normalized.bounding_box()
        assert lo == (0, 0)
        assert normalized.extents() == (1, 3)

    def test_in_scale_box_is_literal(self) -> None:
        """Test that box containment does not translate."""
        assert in_scale_box(Region.chain(2), 0)
        assert not in_scale_box(Region.chain(2, start=5), 0)


class TestFatRegions:
    """Tests for unions of aligned cubes."""

    def test_fat_region_size(self) -> None:
        """Test that each base point contributes a full cube."""
        base = Region(2, ((0, 0), (1, 0)))
        fat = fat_region(2, base)
        assert len(fat) == 8
        assert is_fat(fat, 2)

    def test_missing_point_is_not_fat(self) -> None:
        """Test that removing a vertex breaks fatness."""
        fat = fat_region(2, Region(2, ((0, 0),)))
        assert not is_fat(fat - Region(2, ((1, 1),)), 2)

    def test_invalid_side(self) -> None:
        """Test that the cube side must be positive."""
        with pytest.raises(ValueError, match="at least 1"):
            fat_region(0, Region.chain(1))


class TestDecomposition:
    """Tests for the overlapping decomposition and its geometric properties."""

    def test_smallest_scales_in_two_dimensions(self) -> None:
        """Test the first scales with a nonempty decomposition."""
        assert smallest_nontrivial_scales(2, 2) == [7, 8]

    def test_all_admissible_rectangles_pass(self) -> None:
        """Test all four properties on every admissible rectangle at the smallest scales."""
        checked = 0
        for k in smallest_nontrivial_scales(2, 2):
            for rect in admissible_rectangles(2, k):
                report = verify_geo(cesi_decomposition(rect, k))
                assert report.passed, (k, rect.extents(), report.failures)
                assert report.r >= 1
                checked += 1
        assert checked > 0

    def test_admissible_rectangles_leave_previous_scale(self) -> None:
        """Test that admissible rectangles are not in the previous class."""
        for rect in admissible_rectangles(2, 7):
            assert not in_scale_class(rect, 6)
            assert in_scale_box(rect, 7)

    def test_blocks_are_nested(self) -> None:
        """Test that the A blocks grow with the index."""
        rect = admissible_rectangles(2, 8)[-1]
        dec = cesi_decomposition(rect, 8)
        for i in range(1, dec.r + 1):
            assert dec.blocks_a[i] <= dec.blocks_a[i + 1]
        assert len(dec.blocks_a) == dec.r + 2

    def test_scale_zero_rejected(self) -> None:
        """Test that k must be at least one."""
        with pytest.raises(PreconditionError, match="k >= 1"):
            cesi_decomposition(Region.chain(2), 0)

    def test_region_in_previous_class_rejected(self) -> None:
        """Test that a region already in F_{k-1} is refused."""
        with pytest.raises(PreconditionError, match="already belongs"):
            cesi_decomposition(Region.rectangle((2, 2)), 7)

    def test_region_outside_box_rejected(self) -> None:
        """Test that an unnormalized region is refused."""
        with pytest.raises(PreconditionError, match="normalize"):
            cesi_decomposition(Region.rectangle((6, 7), origin=(10, 10)), 7)
