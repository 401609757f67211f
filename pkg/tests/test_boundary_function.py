import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from bellman.boundary_function import (
    BoundaryFunction,
    EssentialRoot,
    RootStructure,
    affine_normalize,
    check_conditions,
    eval_derivs,
    find_roots,
    root_gap,
    sign_runs,
    weighted_variation,
)
from bellman.config import load_boundary_function_document
from bellman.constants import RootKind
from bellman.exceptions import DegenerateTransform, Divergent, NonAlternatingSigns

SAMPLES_DIR = Path(__file__).parent.parent / "bellman/samples"
SAMPLE_KINK = Path(__file__).parent / "sample/bf_kink.json"


def load(name: str) -> BoundaryFunction:
    return BoundaryFunction.from_document(load_boundary_function_document(SAMPLES_DIR / f"{name}.json"))


def test_eval_derivs_exp():
    assert eval_derivs(load("exp"), 0.0) == pytest.approx((1.0, 1.0, 1.0, 1.0))


def test_eval_derivs_sextic_third_derivative():
    assert eval_derivs(load("sextic_pos_c0"), 2.0)[3] == pytest.approx(2.0)


def test_eval_derivs_inside_a_solid_root():
    assert eval_derivs(load("solid_root_cubic"), 0.5) == (0.0, 0.0, 0.0, 0.0)


def test_derivative_is_vectorized_across_pieces():
    bf = load("solid_root_cubic")
    values = bf.derivative(np.array([-2.0, 0.0, 2.0]), 3)
    assert values == pytest.approx([6.0, 0.0, -6.0])


@pytest.mark.parametrize("name", ["exp", "sextic_pos_c0", "solid_root_cubic", "sine_monster", "escaping_angle"])
def test_shipped_samples_are_c2(name):
    report = check_conditions(load(name))
    assert report.entry("c2_junctions").passed


def test_sextic_roots():
    roots = find_roots(load("sextic_pos_c0"))
    kinds = [root.kind for root in roots.ordered()]
    assert kinds == [RootKind.C, RootKind.V, RootKind.C, RootKind.V, RootKind.C]
    c0, v1, c1, v2, c2 = roots.ordered()
    assert c0.is_at_infinity and c0.lo == -math.inf
    assert v1.lo == pytest.approx(-math.sqrt(3), abs=1e-10)
    assert c1.lo == pytest.approx(0.0, abs=1e-10)
    assert v2.lo == pytest.approx(math.sqrt(3), abs=1e-10)
    assert c2.is_at_infinity and c2.lo == math.inf


def test_negative_sextic_swaps_root_kinds():
    roots = find_roots(load("sextic_neg_c0"))
    assert [root.kind for root in roots.ordered()] == [RootKind.C, RootKind.V, RootKind.C]
    assert [root.center for root in roots.ordered()] == pytest.approx([-math.sqrt(3), 0.0, math.sqrt(3)], abs=1e-10)


def test_sine_monster_has_five_essential_roots():
    alpha = 1.5 * math.pi
    roots = find_roots(load("sine_monster")).ordered()
    assert len(roots) == 5
    assert roots[0].is_left_ray and roots[0].hi == pytest.approx(-alpha)
    assert roots[1].center == pytest.approx(-math.pi, abs=1e-9)
    assert roots[2].center == pytest.approx(0.0, abs=1e-9)
    assert roots[3].center == pytest.approx(math.pi, abs=1e-9)
    assert roots[4].is_right_ray and roots[4].lo == pytest.approx(alpha)


def test_solid_root():
    roots = find_roots(load("solid_root_cubic"))
    assert len(roots) == 1
    (solid,) = roots.c
    assert (solid.lo, solid.hi) == (-1.0, 1.0)
    assert root_gap(roots) == 2.0


def test_exp_root_at_infinity():
    roots = find_roots(load("exp"))
    assert len(roots) == 1
    assert roots.c[0].is_at_infinity and roots.c[0].lo == math.inf


def test_quadratic_has_no_roots():
    bf = load("quadratic")
    assert len(find_roots(bf)) == 0
    assert sign_runs(bf) == [(-math.inf, math.inf, 0)]
    assert root_gap(bf.roots) == math.inf


def test_roots_override_is_validated():
    bf = load("quartic_neg")
    bf = BoundaryFunction(
        pieces=bf.pieces,
        roots_override=RootStructure(c=(EssentialRoot(RootKind.C, 1.0, 1.0),)),
    )
    with pytest.raises(NonAlternatingSigns):
        find_roots(bf)


def test_roots_override_replaces_the_sign_analysis():
    bf = load("quartic_neg")
    override = RootStructure(c=(EssentialRoot(RootKind.C, 0.0, 0.0),))
    bf = BoundaryFunction(pieces=bf.pieces, roots_override=override)
    assert find_roots(bf) == override


def test_non_alternating_structure():
    structure = RootStructure(c=(EssentialRoot(RootKind.C, 0.0, 0.0), EssentialRoot(RootKind.C, 1.0, 1.0)))
    with pytest.raises(NonAlternatingSigns) as err_info:
        structure.validate()
    assert "one more c-root" in str(err_info.value)


def test_check_conditions_exp():
    bf = load("exp")
    assert check_conditions(bf, 0.99).passed
    report = check_conditions(bf, 1.5)
    assert not report.passed
    assert not report.entry("summability").passed


@pytest.mark.parametrize("eps", [0.5, 0.9])
def test_weighted_variation_of_the_exponential_is_finite(eps):
    expected = 1 / (1 + 1 / eps) + 1 / (1 / eps - 1)
    assert weighted_variation(load("exp"), eps) == pytest.approx(expected, rel=1e-7)
    entry = check_conditions(load("exp"), eps).entry("summability")
    assert entry.passed
    assert entry.value == pytest.approx(expected, rel=1e-7)


def test_check_conditions_polynomial_passes_for_any_radius():
    bf = load("quintic")
    assert check_conditions(bf, 1e3).passed
    assert check_conditions(bf).as_dict()["essential_roots"] == 3


def test_check_conditions_reports_a_kink():
    bf = BoundaryFunction.from_document(load_boundary_function_document(SAMPLE_KINK))
    report = check_conditions(bf)
    assert not report.entry("c2_junctions").passed
    assert "twice continuously differentiable" in report.entry("c2_junctions").message


def test_weighted_stieltjes_exp_closed_form():
    bf = load("exp")
    eps, u = 0.5, 0.3
    expected = eps * math.exp(u * (1 - 1 / eps)) / (1 - eps)
    assert bf.weighted_stieltjes(u, math.inf, eps, -1) == pytest.approx(expected, rel=1e-12)


def test_weighted_stieltjes_diverges_for_growing_exponentials():
    with pytest.raises(Divergent):
        load("exp").weighted_stieltjes(0.0, math.inf, 1.5, -1)


def test_weighted_stieltjes_short_interval_matches_quadrature():
    bf = load("sine_monster")
    eps, p, q = 0.7, 0.2, 0.3
    expected, _ = integrate.quad(lambda t: math.exp((t - q) / eps) * bf.derivative(t, 3), p, q, epsabs=1e-14)
    assert bf.weighted_stieltjes(p, q, eps, 1, shift=q) == pytest.approx(expected, rel=1e-7)


def test_affine_normalize():
    bf = load("quartic_pos")
    g, transform = affine_normalize(bf, a=2.0, b=1.0, c=-1.0, d=3.0, alpha=0.5, beta=1.0)
    for t in (-1.0, 0.0, 2.5):
        assert g(t) == pytest.approx(2 * (0.5 * t + 1) ** 4 + t * t - t + 3)
    assert transform.radius(0.4) == pytest.approx(0.2)
    y = transform.point(0.7, 0.6)
    assert transform.inverse_point(*y) == pytest.approx((0.7, 0.6))
    assert transform.recover(*y, transform.forward_value(0.7, 0.6, 1.25)) == pytest.approx(1.25)


def test_affine_normalize_reflection_reverses_pieces():
    g, _ = affine_normalize(load("escaping_angle"), alpha=-1.0)
    assert g.pieces[0].hi == 0.0
    assert g(-2.0) == pytest.approx(load("escaping_angle")(2.0))
    assert g.eps_inf == math.inf


@pytest.mark.parametrize(
    "a, alpha, expected",
    [(1.0, -1.0, "quartic_neg"), (-1.0, -1.0, "quartic_pos"), (-1.0, 1.0, "quartic_pos"), (2.0, 0.5, "quartic_neg")],
)
def test_affine_normalize_maps_the_roots_override(a, alpha, expected):
    bf = load("quartic_neg")
    bf = BoundaryFunction(pieces=bf.pieces, roots_override=RootStructure(c=(EssentialRoot(RootKind.C, 0.0, 0.0),)))
    g, _ = affine_normalize(bf, a=a, alpha=alpha)
    assert g.roots_override is not None
    roots, natural = find_roots(g).ordered(), find_roots(load(expected)).ordered()
    assert [root.kind for root in roots] == [root.kind for root in natural]
    ends = [end for root in roots for end in (root.lo, root.hi)]
    assert ends == pytest.approx([end for root in natural for end in (root.lo, root.hi)], abs=1e-9)


@pytest.mark.parametrize("a, alpha, end", [(1.0, 1.0, math.inf), (-1.0, 1.0, -math.inf), (-1.0, -1.0, math.inf)])
def test_affine_normalize_maps_a_root_at_infinity(a, alpha, end):
    bf = load("exp")
    override = RootStructure(c=(EssentialRoot(RootKind.C, math.inf, math.inf),))
    bf = BoundaryFunction(pieces=bf.pieces, roots_override=override)
    g, _ = affine_normalize(bf, a=a, alpha=alpha)
    assert find_roots(g) == RootStructure(c=(EssentialRoot(RootKind.C, end, end),))


@pytest.mark.parametrize("kwargs", [{"a": 0.0}, {"alpha": 0.0}])
def test_affine_normalize_degenerate(kwargs):
    with pytest.raises(DegenerateTransform):
        affine_normalize(load("exp"), **kwargs)


def test_negated_flips_root_kinds():
    bf = load("quartic_pos")
    negated = bf.negated()
    assert negated(1.5) == pytest.approx(-bf(1.5))
    assert [root.kind for root in negated.roots.ordered()] == [RootKind.C]
    assert [root.kind for root in bf.roots.ordered()] == [RootKind.C, RootKind.V, RootKind.C]


def test_document_round_trip_keeps_the_version():
    bf = load("sine_monster")
    assert BoundaryFunction.from_document(bf.as_document()).version == bf.version
