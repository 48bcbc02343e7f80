import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from cartan_coh.formal import PolyVectorField, TruncPoly
from cartan_coh.jet import (
    ConstraintSystem, JetCochain, JetComplex, JetTangent, NonComposable, OrderExhausted, PolyJet,
    SingularLinearPart, SpencerSection, bicomplex_check, cartan_form_eval, cartan_mult_defect,
    haefliger_dc, haefliger_delta, horizontal_lift, jet_cochain_corpus, jet_compose, jet_invert,
    jet_suite, jet_symbol, lift_identities_check, mobius_check, multiplicativity_check,
    point_symbol, prolong_constraints, random_jet, random_tangent, spencer_apply,
    spencer_flatness_check, tangent_action, total_derivative, u_symbol,
)

X = TruncPoly.var(1, 0)


def derivs(jet):
    return [jet.derivative(0, (k,)) for k in range(jet.order + 1)]


# -- composition and inversion -------------------------------------------------------

def test_compose_example():
    g = PolyJet.from_polynomials([1], [X * X], 2)
    h = PolyJet.from_polynomials([0], [X + 1], 2)
    assert derivs(jet_compose(g, h)) == [1, 2, 2]


def test_invert_example():
    g = PolyJet.from_polynomials([0], [2 * X + X * X], 2)
    assert derivs(jet_invert(g)) == [0, Fraction(1, 2), Fraction(-1, 4)]


def test_compose_and_invert_errors():
    g = PolyJet.from_polynomials([1], [X * X], 2)
    with pytest.raises(NonComposable):
        jet_compose(g, PolyJet.from_polynomials([0], [X], 2))
    with pytest.raises(SingularLinearPart):
        jet_invert(PolyJet.from_polynomials([0], [X * X], 2))
    with pytest.raises(OrderExhausted):
        jet_invert(g, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 2), st.integers(1, 3))
def test_groupoid_laws(seed, q, order):
    rng = random.Random(seed)
    h = random_jet(rng, q, order)
    g = random_jet(rng, q, order, source=h.target)
    f = random_jet(rng, q, order, source=g.target)
    assert jet_compose(jet_compose(f, g), h) == jet_compose(f, jet_compose(g, h))
    assert jet_compose(PolyJet.unit(g.target, order), g) == g
    assert jet_compose(g, PolyJet.unit(g.source, order)) == g
    assert jet_compose(g, jet_invert(g)) == PolyJet.unit(g.target, order)
    assert jet_compose(jet_invert(g), g) == PolyJet.unit(g.source, order)


def test_tangent_action_is_inverse_linear_part():
    g = PolyJet.from_polynomials([0], [3 * X + X * X], 2)
    assert tangent_action(g) == [[Fraction(1, 3)]]


# -- Cartan form --------------------------------------------------------------------

def test_cartan_form_coordinates():
    base = PolyJet.from_derivatives(1, [0], [0], {(0, (1,)): 1}, 1)
    key = (0, (0,))
    assert cartan_form_eval(JetTangent.from_variation(base, [1], [0], {}))[key] == -1
    assert cartan_form_eval(JetTangent.from_variation(base, [0], [1], {}))[key] == 1
    assert cartan_form_eval(JetTangent.from_variation(base, [0], [0], {(0, (1,)): 1}))[key] == 0


def test_cartan_form_order_errors():
    base = PolyJet.from_derivatives(1, [0], [0], {(0, (1,)): 1}, 1)
    v = JetTangent.from_variation(base, [1], [0], {})
    with pytest.raises(OrderExhausted):
        cartan_form_eval(v, 0)
    with pytest.raises(OrderExhausted):
        cartan_form_eval(v, 2)


def test_multiplicativity_on_random_pairs():
    v = multiplicativity_check(random.Random(1), 100)
    assert v.ok and v.checked == 100


def test_multiplicativity_negative_control():
    assert not multiplicativity_check(random.Random(1), 5, skip_action=True).ok


def test_unit_jets_have_no_defect():
    rng = random.Random(3)
    for q in (1, 2):
        u = PolyJet.unit([Fraction(1)] * q, 3)
        vu = random_tangent(rng, u)
        vu2 = random_tangent(rng, u, d_source=vu.d_target())
        assert cartan_mult_defect(vu2, vu) == {}


def test_defect_needs_composable_tangents():
    rng = random.Random(4)
    h = random_jet(rng, 1, 2)
    g = random_jet(rng, 1, 2, source=h.target)
    vh = random_tangent(rng, h)
    vg = random_tangent(rng, g, d_source=[vh.d_target()[0] + 1])
    with pytest.raises(NonComposable):
        cartan_mult_defect(vg, vh)


# -- horizontal lifts ---------------------------------------------------------------

def test_source_lift_example():
    g = PolyJet.from_polynomials([0], [X + X * X], 3)
    lift = horizontal_lift(g, [1], side="s")
    assert lift.order == 2 and lift.d_source() == [1]
    assert [lift.variation()[(0, (k,))] for k in range(3)] == [1, 2, 0]


def test_target_lift_moves_target_by_v():
    g = PolyJet.from_polynomials([0], [3 * X + X * X], 3)
    lift = horizontal_lift(g, [1], side="t")
    assert lift.d_target() == [1] and lift.d_source() == [Fraction(1, 3)]
    assert not any(cartan_form_eval(lift).values())


def test_lift_order_is_sharp():
    g = PolyJet.from_polynomials([0], [X], 1)
    with pytest.raises(OrderExhausted):
        horizontal_lift(g, [1])
    assert horizontal_lift(g.__class__.from_polynomials([0], [X], 2), [1]).order == 1


def test_lift_identities():
    v = lift_identities_check(random.Random(2), 20)
    assert v.ok, v.first_failure


# -- Haefliger cochains -----------------------------------------------------------------

def test_dc_on_base_forms_is_de_rham():
    z = point_symbol(0, 0)
    c = JetCochain(1, 0, 0, 0, {(): z ** 3})
    assert haefliger_dc(c, 1).coeffs == {(0,): 3 * z ** 2}


def test_delta_of_function():
    z0, z1 = point_symbol(0, 0), point_symbol(1, 0)
    c = JetCochain(1, 0, 0, 0, {(): z0 ** 2 + 1})
    d = haefliger_delta(c, 1)
    assert sympy.expand(d.coeffs[()] - (z1 ** 2 - z0 ** 2)) == 0
    g = PolyJet.from_polynomials([2], [X * X], 1)
    values = {z0: g.target[0], z1: g.source[0], jet_symbol(1, 0, (1,)): g.derivative(0, (1,))}
    assert d.evaluate(values)[()] == (2 ** 2 + 1) - (4 ** 2 + 1)


def test_delta_acts_on_forms_by_inverse_derivative():
    z = point_symbol(0, 0)
    c = JetCochain(1, 0, 1, 0, {(0,): sympy.Integer(1)})
    d = haefliger_delta(c, 1)
    y1 = jet_symbol(1, 0, (1,))
    assert sympy.simplify(d.coeffs[(0,)] - (1 / y1 - 1)) == 0
    assert d.order == 1 and z not in d.coeffs[(0,)].free_symbols


def test_first_derivative_cochain_commutes():
    c = JetCochain(1, 1, 0, 1, {(): jet_symbol(1, 0, (1,))})
    cx = JetComplex(1, 3)
    assert (cx.delta(cx.dc(c)) - cx.dc(cx.delta(c))).is_zero()
    assert cx.dc(cx.dc(c)).is_zero()


def test_dc_order_is_sharp():
    c = JetCochain(1, 1, 0, 1, {(): jet_symbol(1, 0, (1,))})
    with pytest.raises(OrderExhausted) as err:
        haefliger_dc(c, 1)
    assert err.value.deficit == 1
    assert haefliger_dc(c, 2).order == 2


def test_cochain_validation():
    with pytest.raises(ValueError):
        JetCochain(1, 1, 0, 1, {(): jet_symbol(1, 0, (2,))})
    with pytest.raises(ValueError):
        JetCochain(1, 1, 0, 1, {(): jet_symbol(2, 0, (1,))})
    with pytest.raises(ValueError):
        JetCochain(2, 0, 2, 0, {(1, 0): sympy.Integer(1)})


@pytest.mark.parametrize("dim,order", [(1, 4), (2, 3)])
def test_bicomplex_identities_on_corpus(dim, order):
    v = bicomplex_check(dim, order)
    assert v.ok, v.failures
    assert v.checked >= 2 * len(jet_cochain_corpus(dim))


# -- Spencer operator -------------------------------------------------------------------------

def test_spencer_examples():
    dx = PolyVectorField([TruncPoly.const(1, 1)])
    hol = SpencerSection.holonomic([X * X], 2)
    assert spencer_apply(hol, dx).is_zero()
    sigma = SpencerSection(1, 1, 2, {(0, (0,)): X * X})
    out = spencer_apply(sigma, dx)
    assert out.components[(0, (0,))] == 2 * X
    assert out.components[(0, (1,))] == TruncPoly.zero(1)


def test_spencer_order_errors():
    dx = PolyVectorField([TruncPoly.const(1, 1)])
    with pytest.raises(OrderExhausted):
        spencer_apply(SpencerSection(1, 1, 0, {}), dx)
    with pytest.raises(OrderExhausted):
        spencer_flatness_check(SpencerSection(1, 1, 1, {}), dx, dx)


def test_spencer_flatness_random():
    from cartan_coh.jet import spencer_check
    v = spencer_check(random.Random(5), 20)
    assert v.ok, v.first_failure


# -- PDE systems and Moebius -------------------------------------------------------------------

def test_total_derivative_examples():
    u1, u2 = u_symbol(0, (1,)), u_symbol(0, (2,))
    assert total_derivative(u1 - 1, 0, 1, 1, 1) == u2
    assert total_derivative(sympy.Integer(7), 0, 1, 1, 0) == 0
    with pytest.raises(OrderExhausted):
        total_derivative(u1 - 1, 0, 1, 1, 1, working_order=1)


def test_volume_preserving_prolongation():
    system = ConstraintSystem.from_json({
        "nvars": 2, "order": 1,
        "equations": ["u1_10*u2_01 - u1_01*u2_10 - 1"]})
    prolonged = prolong_constraints(system, 1)
    assert prolonged.order == 2 and len(prolonged.equations) == 3
    x1, x2 = sympy.symbols("x1 x2")
    points = [(0, 0), (1, 2), (-3, 5)]
    assert prolonged.holds_for([x1 + x2 ** 2, x2], points)
    assert not prolonged.holds_for([2 * x1, x2], points)


def test_translation_constraint_prolongs():
    system = ConstraintSystem.from_json({"nvars": 1, "order": 1, "equations": ["u1_1 - 1"]})
    assert prolong_constraints(system, 2).equations[1:] == [u_symbol(0, (2,)), u_symbol(0, (3,))]


def test_constraint_rejects_excess_order():
    with pytest.raises(ValueError):
        ConstraintSystem(1, 1, 1, [u_symbol(0, (2,))])


def test_mobius():
    v = mobius_check()
    assert v.ok and v.details["cubic_relation"] == "-72*x**2"


def test_jet_suite_passes():
    report = jet_suite(seed=7, samples=20)
    assert all(v.ok for v in report.values()), {k: v.first_failure for k, v in report.items()}
