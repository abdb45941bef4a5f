import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpmic.grid import (
    AxisPartition,
    CountMatrix,
    Dataset,
    Grid,
    RangeBounds,
    coarsen,
    count_matrix,
    mass_equipartition,
    mass_part_sizes,
    range_equipartition,
    stable_ranks,
    subpartition_count,
)

from oracles import rank_labels

UNIT = RangeBounds(0.0, 1.0, 0.0, 1.0)


def test_range_equipartition_examples():
    assert range_equipartition(0, 1, 4).boundaries.tolist() == [0, 0.25, 0.5, 0.75, 1]
    assert range_equipartition(0, 24, 2).boundaries.tolist() == [0, 12, 24]
    p = range_equipartition(0.1, 0.7, 3)
    assert p.boundaries[-1] == 0.7


@pytest.mark.parametrize("lo,hi,parts", [(3, 3, 2), (4, 3, 2), (0, 1, 0)])
def test_range_equipartition_rejects(lo, hi, parts):
    with pytest.raises(ValueError):
        range_equipartition(lo, hi, parts)


@given(st.floats(-100, 100), st.floats(0.01, 50), st.floats(0.1, 10), st.floats(-10, 10),
       st.integers(1, 40))
def test_range_equipartition_affine(lo, width, a, b, parts):
    base = range_equipartition(lo, lo + width, parts).boundaries
    mapped = range_equipartition(a * lo + b, a * (lo + width) + b, parts).boundaries
    scale = max(1.0, np.abs(mapped).max())
    assert np.allclose(mapped, a * base + b, rtol=0, atol=1e-12 * scale)


def test_mass_part_sizes_examples():
    assert mass_part_sizes(8, 4).tolist() == [2, 2, 2, 2]
    assert mass_part_sizes(7, 3).tolist() == [3, 3, 1]
    assert mass_part_sizes(7, 5).tolist() == [2, 2, 1, 1, 1]


def test_mass_part_sizes_exhaustive():
    for n in range(1, 31):
        for parts in range(1, n + 1):
            sizes = mass_part_sizes(n, parts)
            per = -(-n // parts)
            assert sizes.sum() == n and sizes.min() >= 1
            if per * (parts - 1) < n:
                # the plain remainder rule applies
                assert sizes[:-1].tolist() == [per] * (parts - 1)
            assert sizes.max() <= per


@pytest.mark.parametrize("n,parts", [(0, 1), (3, 4), (3, 0)])
def test_mass_part_sizes_rejects(n, parts):
    with pytest.raises(ValueError):
        mass_part_sizes(n, parts)


def test_mass_equipartition_counts_by_rank():
    v = np.array([5.0, 1.0, 3.0, 7.0, 2.0, 9.0, 4.0])
    labels = mass_equipartition(v, 3).locate(stable_ranks(v))
    assert np.bincount(labels).tolist() == [3, 3, 1]


def test_mass_equipartition_ties_match_stable_rank_oracle():
    v = [1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 2.0, 1.0]
    for parts in (2, 3, 5):
        got = mass_equipartition(v, parts).locate(stable_ranks(v))
        assert got.tolist() == rank_labels(v, parts)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30), st.data())
def test_mass_equipartition_property(values, data):
    parts = data.draw(st.integers(1, len(values)))
    v = [float(a) for a in values]
    got = mass_equipartition(v, parts).locate(stable_ranks(v))
    assert got.tolist() == rank_labels(v, parts)


def test_mass_equipartition_rejects():
    with pytest.raises(ValueError):
        mass_equipartition([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        mass_equipartition([], 1)


def test_locate_convention():
    p = range_equipartition(0, 1, 2)
    assert p.locate([0.0, 0.5, 1.0, -0.1, 1.1]).tolist() == [0, 1, 1, -1, -1]


def test_count_matrix_single_point():
    g = Grid(range_equipartition(0, 1, 2), range_equipartition(0, 1, 2))
    cm = count_matrix(Dataset([0.1], [0.1]), g)
    assert cm.counts.tolist() == [[1, 0], [0, 0]]


def test_count_matrix_diagonal_oracle():
    t = np.linspace(0, 1, 100)
    g = Grid(range_equipartition(0, 1, 2), range_equipartition(0, 1, 2))
    cm = count_matrix(Dataset(t, t), g)
    # direct evaluation of the cell map
    expect = np.zeros((2, 2), int)
    for v in t:
        i = 0 if v < 0.5 else 1
        expect[i, i] += 1
    assert np.array_equal(cm.counts, expect)
    assert cm.counts[0, 1] == cm.counts[1, 0] == 0


def test_count_matrix_outside_point_reports_index():
    g = Grid(range_equipartition(0, 1, 2), range_equipartition(0, 1, 2))
    with pytest.raises(ValueError, match="point 2"):
        count_matrix(Dataset([0.1, 0.2, 1.5], [0.1, 0.2, 0.3]), g)


@settings(max_examples=50)
@given(st.integers(1, 60), st.integers(2, 8), st.integers(2, 8), st.integers(0, 10 ** 6))
def test_count_matrix_totals(n, k, l, seed):
    rng = np.random.default_rng(seed)
    g = Grid(range_equipartition(0, 1, k), range_equipartition(0, 1, l))
    cm = count_matrix(Dataset(rng.random(n), rng.random(n)), g)
    assert cm.shape == (k, l) and cm.total == n
    assert abs(cm.normalized().sum() - 1.0) <= 1e-12


def test_coarsen_examples():
    m = range_equipartition(0, 1, 4)
    master = Grid(m, m)
    ones = CountMatrix(np.ones((4, 4), int))
    assert coarsen(ones, master, master) == ones
    half = range_equipartition(0, 1, 2)
    assert coarsen(ones, master, Grid(half, half)).counts.tolist() == [[4, 4], [4, 4]]


def test_coarsen_rejects_unaligned():
    m = range_equipartition(0, 1, 4)
    ones = CountMatrix(np.ones((4, 4), int))
    with pytest.raises(ValueError):
        coarsen(ones, Grid(m, m), Grid(range_equipartition(0, 1, 3), m))


def test_coarsen_commutes_with_counting_exhaustive():
    rng = np.random.default_rng(3)
    for rows, cols in [(3, 3), (4, 5), (6, 6), (6, 2)]:
        data = Dataset(rng.random(80), rng.random(80))
        mr, mc = range_equipartition(0, 1, rows), range_equipartition(0, 1, cols)
        master = Grid(mr, mc)
        mcounts = count_matrix(data, master)
        for r in range(1, rows):
            for rd in itertools.combinations(range(1, rows), r):
                for cd in itertools.combinations(range(1, cols), 1):
                    sub = Grid(AxisPartition(mr.boundaries[[0, *rd, rows]]),
                               AxisPartition(mc.boundaries[[0, *cd, cols]]))
                    assert coarsen(mcounts, master, sub) == count_matrix(data, sub)


def test_subpartition_count():
    assert subpartition_count(4, 2) == 3
    assert subpartition_count(7, 7) == 1
    assert subpartition_count(10, 4) == 84
    assert subpartition_count(10, 4) == len(list(itertools.combinations(range(9), 3)))
    with pytest.raises(ValueError):
        subpartition_count(3, 4)


def test_bounds_and_dataset_validation():
    with pytest.raises(ValueError):
        RangeBounds(1, 1, 0, 1)
    assert RangeBounds.parse("0,24,-1,2") == RangeBounds(0, 24, -1, 2)
    with pytest.raises(ValueError):
        RangeBounds.parse("0,1,2")
    with pytest.raises(ValueError, match="point 1"):
        Dataset([0.5, 2.0], [0.5, 0.5], UNIT)
    d = Dataset([0.1, 0.2], [0.3, 0.4], UNIT)
    assert d.replace_point(0, 0.9, 0.9).x.tolist() == [0.9, 0.2]
    assert d.x.tolist() == [0.1, 0.2]
    assert d.transposed().x.tolist() == [0.3, 0.4]
