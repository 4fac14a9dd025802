"""Integration cells: exact splitting and Cantor complement bookkeeping."""

from fractions import Fraction

import numpy as np
import pytest

from hardylab._cells import (
    QCell,
    cantor_complement_cells,
    grid_cells,
    interval_cells,
    split_cell,
)
from hardylab.core import Bracket
from hardylab.fractals import CantorTree, schedule_constant


def test_box_cell_properties():
    c = QCell.box([0.0, 1.0], [0.5, 2.0])
    assert c.n == 2
    assert c.volume == pytest.approx(0.5)
    assert c.measure.lower == c.measure.upper == pytest.approx(0.5)
    assert np.allclose(c.center, [0.25, 1.5])
    assert c.diam == pytest.approx(np.hypot(0.5, 1.0))
    assert c.half_diag == pytest.approx(c.diam / 2)


def test_inverted_cell_rejected():
    with pytest.raises(ValueError):
        QCell.box([0.0, 0.0], [1.0, -1.0])


def test_split_halves_longest_axis_exactly():
    c = QCell.box([0.0, 0.0], [1.0, 4.0])
    a, b = split_cell(c)
    assert a.hi[1] == b.lo[1] == pytest.approx(2.0)
    # x extent untouched
    assert a.hi[0] == b.hi[0] == pytest.approx(1.0)
    assert a.volume + b.volume == pytest.approx(c.volume)


def test_split_rejects_fuzzy_measure():
    c = QCell(np.array([0.0, 0.0]), np.array([1.0, 1.0]), Bracket(0.3, 0.9))
    with pytest.raises(ValueError):
        split_cell(c)


def test_grid_cells_partition():
    cells = grid_cells([0.25, 0.25], [0.75, 0.75], 4)
    assert len(cells) == 16
    assert sum(c.volume for c in cells) == pytest.approx(0.25)
    lows = sorted({float(c.lo[0]) for c in cells})
    assert lows == pytest.approx([0.25, 0.375, 0.5, 0.625])


def test_interval_cells_partition():
    cells = interval_cells(0.0, 1.0, 8)
    assert len(cells) == 8
    assert all(c.n == 1 for c in cells)
    assert sum(c.volume for c in cells) == pytest.approx(1.0)


def test_cantor_complement_totals_match_product_measure():
    # total complement bracket must telescope to |root| - |K| at any depth
    tree = CantorTree((Fraction(0), Fraction(0)), Fraction(1), schedule_constant(Fraction(1, 8)))
    km = tree.measure_bracket(30)
    for depth in (0, 1, 2, 3):
        cells, total = cantor_complement_cells(tree, [0.0, 0.0], [1.0, 1.0], depth)
        want_lo = 1.0 - km.upper
        want_hi = 1.0 - km.lower
        assert total.lower <= want_hi and want_lo <= total.upper
        assert total.upper - total.lower < 1e-6
        assert sum(c.volume for c in cells) == pytest.approx(1.0)


def test_cantor_complement_corridors_exact():
    tree = CantorTree((Fraction(0), Fraction(0)), Fraction(1), schedule_constant(Fraction(1, 8)))
    cells, _ = cantor_complement_cells(tree, [0.0, 0.0], [1.0, 1.0], 2)
    exact = [c for c in cells if c.measure.width == 0.0 and c.measure.upper == c.volume]
    fuzzy = [c for c in cells if c.measure.width > 0.0]
    # three corridor rectangles per retained cell at depths 0 and 1,
    # sixteen fuzzy leaves at the cutoff
    assert len(fuzzy) == 16
    assert len(exact) == 3 * (1 + 4)
    # first-level cross: eps * l * l + two half-corridors = eps(2 - eps) l^2
    cross0 = sum(c.volume for c in exact[:3])
    assert cross0 == pytest.approx(0.125 * (2 - 0.125))


def test_cantor_complement_rejects_wrong_root():
    tree = CantorTree((Fraction(0), Fraction(0)), Fraction(1), schedule_constant(Fraction(1, 8)))
    with pytest.raises(ValueError):
        cantor_complement_cells(tree, [0.0, 0.0], [2.0, 2.0], 1)
