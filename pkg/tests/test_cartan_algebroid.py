import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cartan_coh.cartan_algebroid import (
    AlgebroidConnection, AlgebroidData, CartanPackage, DataError, MixedCochain, NotFlatCartan,
    NotWeightGraded, action_package, basic_curvature, double, double_equivalence_check,
    euler_package, extended_isotropy, homogeneous_packages, induced_connections, inf_haefliger,
    isotropy_embedding_check, isotropy_transport_check, jacobi_check, matched_pair_check,
    mc_defect, perturb_package, perturbable, pointwise_bracket, random_flat_package,
    sl2_algebroid, tangent_matched_pair, tangent_package, HaefligerBicomplex,
)
from cartan_coh.formal import PolyForm, PolyVectorField, TruncPoly


def P(n, terms):
    return TruncPoly(n, terms)


def zero_gamma(n, r):
    return [[[0] * r for _ in range(r)] for _ in range(n)]


def lie_bundle():
    """Bundle of Lie algebras over the line with [e1, e2] = x e2."""
    x = P(1, {(1,): 1})
    alg = AlgebroidData(2, 1, [[0], [0]],
                        [[[0, 0], [0, x]], [[0, -x], [0, 0]]])
    return CartanPackage(alg, zero_gamma(1, 2))


# -- algebroid axioms --------------------------------------------------------------------

def test_tangent_algebroid_passes():
    assert jacobi_check(AlgebroidData.tangent(2)).ok


def test_sl2_action_passes():
    assert jacobi_check(sl2_algebroid()).ok


def test_perturbed_structure_function_fails_with_triple():
    base = sl2_algebroid()
    x = P(1, {(1,): 1})
    c = [[list(cell) for cell in row] for row in base.structure]
    # [e_2, e_3] gains x e_1
    c[1][2][0] = c[1][2][0] + x
    c[2][1][0] = c[2][1][0] - x
    v = jacobi_check(AlgebroidData(3, 1, base.anchor, c))
    assert not v.ok
    assert v.first_failure["axiom"] in ("anchor", "jacobi")
    assert any(f.get("triple") == [0, 1, 2] for f in v.failures)


def test_action_solver_recovers_sl2():
    e, h, f = (P(1, {(0,): 1}),), (P(1, {(1,): 2}),), (P(1, {(2,): -1}),)
    alg = AlgebroidData.action([e, h, f])
    assert alg.structure == sl2_algebroid().structure


def test_action_solver_rejects_open_family():
    with pytest.raises(DataError):
        AlgebroidData.action([(P(1, {(0,): 1}),), (P(1, {(2,): 1}),)])


def test_antisymmetry_enforced():
    with pytest.raises(DataError):
        AlgebroidData(2, 1, [[0], [0]], [[[0, 0], [1, 0]], [[0, 0], [0, 0]]])


def test_json_round_trip():
    pkg = random_flat_package(random.Random(5))
    again = CartanPackage.from_json(pkg.to_json())
    assert again.to_json() == pkg.to_json()


# -- basic curvature and induced connections ------------------------------------------------

def test_basic_curvature_plane_example():
    pkg = tangent_package(2)
    alpha = [1, 0]
    alpha2 = [0, P(2, {(2, 0): 1})]
    k = basic_curvature(pkg, alpha, alpha2, [1, 0])
    assert all(not c for c in k)


def test_basic_curvature_lie_bundle():
    k = basic_curvature(lie_bundle(), 0, 1, [1])
    assert k == (TruncPoly.zero(1), TruncPoly.const(1, 1))


def test_basic_curvature_rank_one_vanishes():
    pkg = CartanPackage(AlgebroidData(1, 1, [[P(1, {(2,): 3})]], [[[0]]]), [[[P(1, {(1,): 1})]]])
    assert not any(basic_curvature(pkg, 0, 0, [P(1, {(0,): 1})]))
    assert pkg.flags["infinitesimally_multiplicative"]


def test_basic_curvature_antisymmetric_and_tensorial():
    pkg = CartanPackage(sl2_algebroid(), [[[P(1, {(1,): 1}), 0, 0], [0, 1, 0], [0, 0, 0]]])
    f = P(1, {(2,): 1, (0,): 3})
    x = [P(1, {(1,): 2})]
    k = basic_curvature(pkg, 0, 2, x)
    assert basic_curvature(pkg, 2, 0, x) == tuple(-c for c in k)
    assert basic_curvature(pkg, [f, 0, 0], 2, x) == tuple(f * c for c in k)
    assert basic_curvature(pkg, 0, [0, 0, f], x) == tuple(f * c for c in k)
    assert basic_curvature(pkg, 0, 2, [f * x[0]]) == tuple(f * c for c in k)


def test_nabla_tx_coordinate_example():
    pkg = tangent_package(2)
    y = (TruncPoly.zero(2), P(2, {(1, 0): 1}))
    out = pkg.nabla_tx(pkg.alg.frame(0), y)
    assert out == (TruncPoly.zero(2), TruncPoly.const(2, 1))


def test_zero_anchor_zero_connection_has_trivial_tx():
    tx = induced_connections(lie_bundle()).tx
    assert all(not v for row in tx.coeffs for cell in row for v in cell)


def test_curvature_relations_on_random_packages():
    rng = random.Random(11)
    for _ in range(10):
        pkg = random_flat_package(rng)
        if perturbable(pkg):
            pkg = perturb_package(pkg, rng)
        assert induced_connections(pkg).report.ok


# -- pointwise bracket and isotropy ------------------------------------------------------------

def test_pointwise_bracket_action_constants():
    pkg = action_package("sl2")
    for a in range(3):
        for b in range(3):
            assert pointwise_bracket(pkg, a, b) == pkg.alg.structure[a][b]


def test_pointwise_bracket_tangent_abelian():
    pkg = tangent_package(2)
    x = [P(2, {(0, 1): 1}), P(2, {(2, 0): 1})]
    y = [P(2, {(1, 1): 1}), 3]
    assert not any(pointwise_bracket(pkg, x, y))


def test_pointwise_bracket_function_linear():
    pkg = random_flat_package(random.Random(2), "heisenberg")
    f = P(2, {(1, 1): 1, (0, 0): 2})
    s = [f, 0, 0]
    assert pointwise_bracket(pkg, s, 2) == tuple(f * c for c in pointwise_bracket(pkg, 0, 2))


def test_extended_isotropy_jacobi_and_guard():
    pkg = random_flat_package(random.Random(4), "sl2")
    iso = extended_isotropy(pkg, [Fraction(1, 3)])
    assert iso.jacobi
    with pytest.raises(NotFlatCartan):
        extended_isotropy(lie_bundle(), [0])
    assert extended_isotropy(lie_bundle(), [0], require_lie=False).constants[0][1] == [0, 0]


def test_isotropy_transport_between_points():
    rng = random.Random(8)
    for name in ("sl2", "heisenberg", "rotation_scaling"):
        pkg = random_flat_package(rng, name)
        pts = [(0,) * pkg.basedim, (Fraction(1, 2),) * pkg.basedim, (-2,) * pkg.basedim]
        assert isotropy_transport_check(pkg, pts).ok


# -- the double ---------------------------------------------------------------------------------

def test_double_of_trivial_package():
    alg = AlgebroidData(1, 2, [[0, 0]], [[[0]]])
    dbl = double(CartanPackage(alg, zero_gamma(2, 1)))
    x1, x2 = P(2, {(1, 0): 1}), P(2, {(0, 1): 1})
    # constant A-parts: Gamma = 0 still differentiates coefficients
    first = (TruncPoly.const(2, 2), x2, TruncPoly.zero(2))     # (2 e, x2 d1)
    second = (TruncPoly.const(2, -1), TruncPoly.zero(2), x1 * x1)  # (-e, x1^2 d2)
    field_bracket = PolyVectorField([x2, 0]).bracket(PolyVectorField([0, x1 * x1]))
    assert dbl.bracket(first, second) == (TruncPoly.zero(2),) + field_bracket.components


def test_double_mixed_bracket_components():
    pkg = random_flat_package(random.Random(21), "affine")
    dbl = double(pkg)
    n, r = pkg.basedim, pkg.rank
    for a in range(r):
        for i in range(n):
            di = tuple(TruncPoly.const(n, int(j == i)) for j in range(n))
            lhs = dbl.bracket(pkg.alg.frame(a) + (TruncPoly.zero(n),) * n,
                              (TruncPoly.zero(n),) * r + di)
            first = tuple(-c for c in pkg.nabla(di, pkg.alg.frame(a)))
            assert lhs == first + pkg.nabla_tx(pkg.alg.frame(a), di)


def test_double_passes_jacobi():
    assert jacobi_check(double(tangent_package(2))).ok
    rng = random.Random(6)
    for _ in range(4):
        assert jacobi_check(double(random_flat_package(rng))).ok


def test_double_requires_flat_cartan():
    with pytest.raises(NotFlatCartan):
        double(lie_bundle())


def test_isotropy_embedding():
    rng = random.Random(9)
    for _ in range(4):
        assert isotropy_embedding_check(random_flat_package(rng)).ok


# -- matched pairs -------------------------------------------------------------------------------

def test_flat_packages_give_matched_pairs():
    rng = random.Random(13)
    for _ in range(5):
        assert matched_pair_check(*tangent_matched_pair(random_flat_package(rng))).ok


def test_lie_bundle_fails_condition_three():
    v = matched_pair_check(*tangent_matched_pair(lie_bundle()))
    assert v.details["violated"] == ["iii"]


def test_zero_rank_pair_passes():
    empty = AlgebroidData(0, 1, [], [])
    conn = AlgebroidConnection(empty, 0, [])
    assert matched_pair_check(empty, conn, empty, conn).ok


def test_matched_pair_iff_flags():
    rng = random.Random(17)
    for _ in range(6):
        pkg = random_flat_package(rng)
        if perturbable(pkg) and rng.random() < 0.5:
            pkg = perturb_package(pkg, rng)
        assert matched_pair_check(*tangent_matched_pair(pkg)).ok == pkg.is_flat_cartan


# -- the Haefliger bicomplex ------------------------------------------------------------------------

def test_euler_package_commutes():
    rep = inf_haefliger(euler_package(), 1, 1, degree_bound=4, weight=0)
    assert rep.ok
    assert rep.cohomology.dim_list() == [1, 1, 0]


def test_perturbed_connection_breaks_commutation():
    # on the line a rank-1 connection is always flat Cartan, so use the plane
    pkg = action_package("plane_euler")
    gamma = [[list(cell) for cell in row] for row in pkg.gamma]
    gamma[0][0][0] = gamma[0][0][0] + P(2, {(0, 1): 1})
    bad = CartanPackage(pkg.alg, gamma)
    assert not bad.flags["flat"]
    rep = inf_haefliger(bad, 2, 2, degree_bound=2)
    assert "dA_d_commute" in rep.failing_squares()


def test_functions_get_de_rham():
    pkg = random_flat_package(random.Random(3), "heisenberg")
    bic = HaefligerBicomplex(pkg)
    f = P(2, {(2, 1): 1, (0, 3): -2})
    out = bic.d_form(MixedCochain(0, 0, {((), ()): f}))
    expect = PolyForm.function(f).d()
    assert {k[1]: v for k, v in out.coeffs.items()} == {idx: c for idx, c in expect.terms.items()}


def test_mixed_cochain_rejects_unsorted():
    with pytest.raises(DataError):
        MixedCochain(2, 0, {((1, 0), ()): TruncPoly.const(1, 1)})


def test_cohomology_needs_weights():
    pkg = random_flat_package(random.Random(1), "sl2")
    if pkg.weights is not None:
        pkg.alg.weights = None
    with pytest.raises(NotWeightGraded):
        inf_haefliger(pkg, 0, 0, weight=0)


def test_double_equivalence_euler():
    v = double_equivalence_check(euler_package(), degree_bound=3)
    assert v.ok
    assert v.details["haefliger"] == v.details["double_ce"]


def test_double_equivalence_rank_zero():
    alg = AlgebroidData(0, 2, [], [], weights=[])
    v = double_equivalence_check(CartanPackage(alg, [[], []]), degree_bound=2)
    assert v.ok
    assert v.details["haefliger"] == [1, 0, 0]


def test_double_equivalence_homogeneous_library():
    for pkg in homogeneous_packages().values():
        assert double_equivalence_check(pkg, degree_bound=3).ok


# -- Maurer-Cartan -------------------------------------------------------------------------------------

def test_mc_identity_on_tangent():
    pkg = tangent_package(2)
    rep = mc_defect(pkg, [pkg.alg.frame(0), pkg.alg.frame(1)])
    assert rep.vanishes and rep.morphism.ok


def test_mc_zero_form():
    pkg = random_flat_package(random.Random(7), "plane_euler")
    rep = mc_defect(pkg, [pkg.alg.zero_section()] * 2)
    assert rep.vanishes and rep.consistent


def test_mc_perturbed_identity():
    pkg = tangent_package(2)
    x1 = P(2, {(1, 0): 1})
    theta = [pkg.alg.frame(0), (x1, TruncPoly.const(2, 1))]
    rep = mc_defect(pkg, theta)
    assert not rep.vanishes
    assert not rep.morphism.ok
    assert rep.consistent


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.integers(-2, 2), min_size=6, max_size=6))
def test_mc_verdicts_agree(seed, coeffs):
    pkg = random_flat_package(random.Random(seed), "plane_euler")
    n, r = 2, 3
    it = iter(coeffs)
    theta = [tuple(P(n, {(0, 0): next(it)}) for _ in range(r)) for _ in range(n)]
    assert mc_defect(pkg, theta).consistent
