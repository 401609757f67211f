import math
from pathlib import Path

import numpy as np
import pytest

from bellman.boundary_function import BoundaryFunction
from bellman.chords import (
    Chord,
    chord_at,
    chord_through,
    cup_residual,
    differentials,
    grow_chordal_domain,
    length_at_left_end,
    length_at_right_end,
)
from bellman.config import load_boundary_function_document
from bellman.constants import StopReason, TableKind
from bellman.exceptions import OutOfRange, SeedInvalid

SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"


def load(name: str) -> BoundaryFunction:
    return BoundaryFunction.from_document(load_boundary_function_document(SAMPLES_DIR / f"{name}.json"))


@pytest.fixture(scope="module")
def quartic_table():
    return grow_chordal_domain(load("quartic_neg"), 0.0, 3.0)


@pytest.fixture(scope="module")
def sextic_table():
    bf = load("sextic_pos_c05")
    return grow_chordal_domain(bf, bf.roots.c[1].lo, 3.0)


def test_cup_residual_vanishes_for_odd_derivative():
    assert cup_residual(BoundaryFunction.polynomial([0, 0, 0, 0, -1 / 24]), -1.0, 1.0) == pytest.approx(0.0)


@pytest.mark.parametrize("a,b", [(-3.0, 2.0), (0.0, 0.1), (7.0, 100.0)])
def test_cup_residual_vanishes_for_quadratics(a, b):
    assert cup_residual(load("quadratic"), a, b) == pytest.approx(0.0, abs=1e-9)
    assert differentials(load("quadratic"), a, b) == pytest.approx((0.0, 0.0), abs=1e-9)


@pytest.mark.parametrize("a,b", [(-2.0, 1.0), (0.3, 0.4), (-0.5, 2.5)])
def test_cup_residual_of_the_sextic(a, b):
    w, half = 0.5 * (a + b), 0.5 * (b - a)
    expected = 2 * half**2 / 3 * (w**3 - 3 * w * (1 - half**2 / 5) + 0.5)
    assert cup_residual(load("sextic_pos_c05"), a, b) == pytest.approx(expected, rel=1e-9)


def test_cup_residual_needs_an_ordered_pair():
    with pytest.raises(SeedInvalid):
        cup_residual(load("exp"), 1.0, 1.0)


def test_symmetric_quartic_cup(quartic_table):
    assert quartic_table.kind is TableKind.CUP
    assert quartic_table.origin == 0.0
    assert quartic_table.stop_reason is StopReason.L_MAX
    assert quartic_table.l_max == pytest.approx(3.0)
    assert quartic_table.left == pytest.approx(-quartic_table.lengths / 2, abs=1e-9)
    assert quartic_table.right == pytest.approx(quartic_table.lengths / 2, abs=1e-9)
    assert np.all(quartic_table.dl[1:] < 0) and np.all(quartic_table.dr[1:] < 0)
    assert quartic_table.dl[1:] == pytest.approx(quartic_table.dr[1:])


def test_table_is_monotone(sextic_table):
    assert np.all(np.diff(sextic_table.lengths) > 0)
    assert np.all(np.diff(sextic_table.left) < 0)
    assert np.all(np.diff(sextic_table.right) > 0)
    assert sextic_table.right - sextic_table.left == pytest.approx(sextic_table.lengths, abs=1e-12)


def test_table_samples_solve_the_cup_equation(sextic_table):
    bf = sextic_table.bf
    for length, a, b, _, _ in list(sextic_table.to_rows())[1:]:
        assert abs(cup_residual(bf, a, b)) < 1e-9 * (1 + length)


def test_right_differential_of_the_sextic(sextic_table):
    for _, a, b, _, dr in list(sextic_table.to_rows())[1:]:
        w, half = 0.5 * (a + b), 0.5 * (b - a)
        assert dr == pytest.approx(half**2 / 5 * (5 * w * w + 2 * w * half + half * half - 5), abs=1e-8)


def test_table_follows_the_differential_equation(sextic_table):
    lengths, left = sextic_table.lengths, sextic_table.left
    for index in range(2, len(sextic_table) - 2):
        total = sextic_table.dl[index] + sextic_table.dr[index]
        if abs(total) < 1e-4:
            continue
        before, after = lengths[index] - lengths[index - 1], lengths[index + 1] - lengths[index]
        slope = (
            before**2 * left[index + 1] - after**2 * left[index - 1] + (after**2 - before**2) * left[index]
        ) / (before * after * (before + after))
        assert slope == pytest.approx(-sextic_table.dr[index] / total, rel=1e-4, abs=1e-5)


def test_short_chords_follow_the_differential_equation():
    bf = load("sextic_pos_c05")
    table = grow_chordal_domain(bf, bf.roots.c[1].lo, 0.05)
    for length in (0.01, 0.02, 0.04):
        chord = chord_at(table, length)
        shorter, longer = chord_at(table, length - 1e-4), chord_at(table, length + 1e-4)
        slope = (longer.a - shorter.a) / 2e-4
        assert slope == pytest.approx(-chord.dr / (chord.dl + chord.dr), rel=1e-3)


def test_cup_of_the_sine_monster_is_symmetric():
    table = grow_chordal_domain(load("sine_monster"), 0.0, 0.5)
    assert table.kind is TableKind.CUP
    assert table.right + table.left == pytest.approx(np.zeros(len(table)), abs=1e-9)
    assert np.all(table.dl[1:] < 0) and np.all(table.dr[1:] < 0)


def test_symmetric_sextic_cup_stops_when_differentials_vanish():
    table = grow_chordal_domain(load("sextic_pos_c0"), 0.0, 10.0)
    assert table.stop_reason is StopReason.DIFFERENTIAL
    assert table.l_max == pytest.approx(2 * math.sqrt(5), abs=1e-5)
    assert table.left == pytest.approx(-table.lengths / 2, abs=1e-8)


def test_domain_over_a_solid_root():
    table = grow_chordal_domain(load("solid_root_cubic"), Chord(-1.0, 1.0), 6.0)
    assert table.kind is TableKind.OVER_CHORD
    assert table.origin is None
    assert table.l_min == 2.0
    assert table.l_max == pytest.approx(6.0)
    assert table.left == pytest.approx(-table.lengths / 2, abs=1e-9)


def test_seed_chord_must_solve_the_cup_equation():
    with pytest.raises(SeedInvalid) as err_info:
        grow_chordal_domain(load("quartic_neg"), Chord(0.0, 1.0), 2.0)
    assert "violates the cup equation" in str(err_info.value)


def test_seed_point_must_be_a_cup_origin():
    with pytest.raises(SeedInvalid):
        grow_chordal_domain(load("quartic_neg"), 5.0, 2.0)


def test_chord_at(quartic_table):
    assert chord_at(quartic_table, 0.0) == quartic_table.seed
    stored = chord_at(quartic_table, float(quartic_table.lengths[3]))
    assert stored.a == quartic_table.left[3]
    chord = chord_at(quartic_table, 0.73)
    assert (chord.a, chord.b) == pytest.approx((-0.365, 0.365), abs=1e-10)
    assert chord.length == pytest.approx(0.73)


@pytest.mark.parametrize("length", [-0.1, 3.5])
def test_chord_at_out_of_range(quartic_table, length):
    with pytest.raises(OutOfRange):
        chord_at(quartic_table, length)


def test_lengths_at_chord_ends(quartic_table):
    assert length_at_right_end(quartic_table, 0.5) == pytest.approx(1.0, abs=1e-10)
    assert length_at_left_end(quartic_table, -0.5) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(OutOfRange):
        length_at_right_end(quartic_table, 4.0)


def test_chord_through(quartic_table):
    chord = chord_through(quartic_table, 0.1, 0.25, quartic_table.l_min, quartic_table.l_max)
    assert chord is not None
    assert chord.length == pytest.approx(1.0, abs=1e-9)
    assert chord.height(0.1) == pytest.approx(0.25)
    assert chord_through(quartic_table, 0.1, 5.0, quartic_table.l_min, quartic_table.l_max) is None
