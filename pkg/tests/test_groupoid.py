import random

import pytest
from hypothesis import given, settings, strategies as st

from cartan_coh.formal import PolyForm, TruncPoly
from cartan_coh.groupoid import (
    BarCochain, CapTooSmall, CoverNerve, FiniteGroupoid, GroupoidMorphism, InconsistentNerve,
    NotAFunctor, NotAGroup, NotAGroupoid, PairingMismatch, Representation, action_bicomplex,
    bar_delta, cocycle_morphism, cup_w, delta_matrix, group_cohomology, groupoid_cohomology,
    mayer_vietoris_groupoid, morphism_pullback, mv_cech,
)

Z2 = FiniteGroupoid.cyclic(2)
S3 = FiniteGroupoid.symmetric(3)


def sign(perm):
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


SGN = Representation.one_dim(S3, sign)


def random_cochain(G, rho, p, rng):
    return BarCochain(G, rho, p, {s: [rng.randint(-3, 3) for _ in range(rho.dims[G.string_target(s)])]
                                  for s in G.strings(p)})


def test_delta_example_z2():
    rho = Representation.trivial(Z2)
    c = BarCochain(Z2, rho, 1, {(0,): [0], (1,): [1]})
    assert bar_delta(c)((1, 1)) == (2,)
    v = BarCochain(Z2, rho, 0, {"*": [5]})
    assert bar_delta(v).is_zero()


def test_delta_level0_formula():
    rho = Representation.one_dim(Z2, lambda g: -1 if g else 1)
    v = BarCochain(Z2, rho, 0, {"*": [1]})
    assert bar_delta(v)((1,)) == (-2,)


def test_delta_squared_exhaustive():
    mv = mayer_vietoris_groupoid([0, 1, 2], [[0, 1], [1, 2], [2, 0]])
    cases = [(S3, SGN), (S3, Representation.trivial(S3, 2)), (FiniteGroupoid.pair("abc"), None), (mv, None)]
    for G, rho in cases:
        assert len(G.arrows) <= 24
        rho = rho or Representation.trivial(G)
        for p in range(3):
            assert (delta_matrix(G, rho, p + 1) @ delta_matrix(G, rho, p)).is_zero()


def test_delta_matrix_matches_formula():
    rng = random.Random(3)
    for p in range(3):
        c = random_cochain(S3, SGN, p, rng)
        from cartan_coh.groupoid import _string_label_basis
        src = _string_label_basis(S3, SGN, p, False)
        tgt = _string_label_basis(S3, SGN, p + 1, False)
        assert delta_matrix(S3, SGN, p).apply(c.to_vector(src)) == bar_delta(c).to_vector(tgt)


def test_group_cohomology_examples():
    assert group_cohomology(Z2, p_max=4).dim_list() == [1, 0, 0, 0, 0]
    assert group_cohomology(FiniteGroupoid.trivial(), p_max=1).dim_list() == [1, 0]
    assert group_cohomology(S3, p_max=2).dim_list() == [1, 0, 0]
    with pytest.raises(NotAGroup):
        group_cohomology(FiniteGroupoid.pair("ab"))


@pytest.mark.parametrize("G", [FiniteGroupoid.cyclic(2), FiniteGroupoid.cyclic(3),
                               FiniteGroupoid.cyclic(6), S3])
def test_normalized_equals_full(G):
    for rho in (Representation.trivial(G),):
        assert group_cohomology(G, rho, 3, True).dims == group_cohomology(G, rho, 3, False).dims
    if G is S3:
        assert group_cohomology(G, SGN, 3, True).dims == group_cohomology(G, SGN, 3, False).dims


def test_h0_is_invariants():
    for G, rho in [(S3, SGN), (S3, Representation.trivial(S3, 2)), (FiniteGroupoid.pair("ab"), None)]:
        rho = rho or Representation.trivial(G)
        assert groupoid_cohomology(G, rho, 0).dims[0] == len(rho.invariants())


def test_cup_examples():
    rho = Representation.trivial(Z2)
    c = BarCochain(Z2, rho, 1, {(1,): [1]})
    assert cup_w(c, c)((1, 1)) == (1,)
    one = BarCochain.unit(Z2, rho)
    assert cup_w(one, c) == c
    with pytest.raises(PairingMismatch):
        cup_w(BarCochain.unit(S3, Representation.trivial(S3, 2)), BarCochain.unit(S3, Representation.trivial(S3, 2)))


def _sgn_pairing(x, u, v):
    return (u[0] * v[0],)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 10 ** 6))
def test_cup_leibniz(p1, p2, seed):
    rng = random.Random(seed)
    triv = Representation.trivial(S3)
    a = random_cochain(S3, SGN, p1, rng)
    b = random_cochain(S3, SGN, p2, rng)
    # sgn (x) sgn = trivial
    lhs = bar_delta(cup_w(a, b, _sgn_pairing, triv))
    rhs = cup_w(bar_delta(a), b, _sgn_pairing, triv) + cup_w(a, bar_delta(b), _sgn_pairing, triv).scale((-1) ** p1)
    assert lhs == rhs


def test_cech_examples():
    circle = CoverNerve(3, {(0,): ["a"], (1,): ["b"], (2,): ["c"], (0, 1): ["ab"], (1, 2): ["bc"], (0, 2): ["ac"]})
    assert mv_cech(circle, 1).dim_list() == [1, 1]
    assert mv_cech(CoverNerve(1, {(0,): ["u"]}), 1).dim_list() == [1, 0]
    interval = CoverNerve(2, {(0,): ["a"], (1,): ["b"], (0, 1): ["ab"]})
    assert mv_cech(interval, 1).dim_list() == [1, 0]


def test_cech_circle_two_arcs():
    # two arcs whose intersection has two components
    nerve = CoverNerve(2, {(0,): ["a"], (1,): ["b"], (0, 1): ["l", "r"]})
    assert mv_cech(nerve, 2).dim_list() == [1, 1, 0]


def test_cech_inconsistent():
    with pytest.raises(InconsistentNerve):
        CoverNerve(2, {(0,): ["a"], (0, 1): ["x"]})
    with pytest.raises(InconsistentNerve):
        CoverNerve(2, {(0,): ["a", "a2"], (1,): ["b"], (0, 1): ["x"]})


def test_cech_from_json():
    data = {"opens": 2, "intersections": [
        {"indices": [0], "components": ["a", "a2"]}, {"indices": [1], "components": ["b"]},
        {"indices": [0, 1], "components": ["x"]}],
        "restrictions": [{"from": [0, 1], "component": "x", "to": [0], "target": "a"}]}
    assert mv_cech(CoverNerve.from_json(data), 1).dim_list() == [2, 0]


def test_mv_groupoid_and_collapse():
    pts = [0, 1, 2]
    mv = mayer_vietoris_groupoid(pts, [[0, 1], [1, 2]])
    X = FiniteGroupoid.units_only(pts)
    phi = GroupoidMorphism(mv, X, {o: o[1] for o in mv.objects}, {a: ("1", a[2]) for a in mv.arrows})
    f = BarCochain(X, Representation.trivial(X), 0, {x: [x + 1] for x in pts})
    pulled = morphism_pullback(phi, f)
    assert pulled == BarCochain(mv, pulled.rho, 0, {(i, x): [x + 1] for (i, x) in mv.objects})


def test_identity_pullback():
    rng = random.Random(1)
    ident = GroupoidMorphism(S3, S3, {"*": "*"}, {g: g for g in S3.arrows})
    c = random_cochain(S3, SGN, 2, rng)
    assert morphism_pullback(ident, c).values == c.values


def test_pullback_commutes_with_delta():
    rng = random.Random(5)
    t = (1, 0, 2)   # Z2 -> S3 through a transposition
    phi = GroupoidMorphism(Z2, S3, {"*": "*"}, {0: (0, 1, 2), 1: t})
    for p in range(3):
        c = random_cochain(S3, SGN, p, rng)
        assert bar_delta(morphism_pullback(phi, c)).values == morphism_pullback(phi, bar_delta(c)).values
    with pytest.raises(NotAFunctor):
        GroupoidMorphism(Z2, S3, {"*": "*"}, {0: (0, 1, 2), 1: (1, 2, 0)})


def test_cocycle_morphism():
    mv = mayer_vietoris_groupoid([0, 1, 2], [[0, 1], [1, 2], [0, 2]])
    pot = {0: 0, 1: 1, 2: 1}
    phi = cocycle_morphism(mv, Z2, lambda i, j, x: (pot[i] - pot[j]) % 2)
    assert phi((0, 1, 1)) == 1
    with pytest.raises(NotAFunctor):
        cocycle_morphism(mv, Z2, lambda i, j, x: 1 if (i, j) == (0, 1) else 0)


def test_groupoid_axioms_checked():
    with pytest.raises(NotAGroupoid):
        FiniteGroupoid.from_group([0, 1], lambda a, b: 0, 0)


def test_action_bicomplex_examples():
    assert action_bicomplex([[[1]], [[-1]]], 6, 3, 1).total.dim_list() == [1, 0, 0, 0]
    assert action_bicomplex([[[1]]], 6, 3, 1).total.dim_list() == [1, 0, 0, 0]
    with pytest.raises(CapTooSmall):
        action_bicomplex([[[1]], [[-1]]], 3, 3, 1)
    with pytest.raises(NotAGroup):
        action_bicomplex([[[1]], [[2]]], 6, 3, 1)
    with pytest.raises(NotAGroup):
        action_bicomplex([[[1]], [[0]]], 6, 3, 1)


def test_action_bicomplex_d_squared():
    bc = action_bicomplex([[[1, 0], [0, 1]], [[0, 1], [1, 0]], [[-1, 0], [0, -1]], [[0, -1], [-1, 0]]], 5, 2, 2)
    for k in range(3):
        assert (bc.differentials[k + 1] @ bc.differentials[k]).is_zero()
    assert bc.total.dim_list() == [1, 0, 0]


def _random_component(bc, p, q, rng):
    n = bc.nvars
    from itertools import combinations
    out = {}
    for s in bc.group.strings(p):
        terms = {}
        for I in combinations(range(n), q):
            terms[I] = TruncPoly(n, {tuple(rng.randint(0, 2) for _ in range(n)): rng.randint(-2, 2)
                                     for _ in range(2)})
        w = PolyForm(n, q, terms)
        if not w.is_zero():
            out[s] = w
    return out


def test_action_bicomplex_leibniz():
    rng = random.Random(11)
    bc = action_bicomplex([[[1, 0], [0, 1]], [[0, 1], [1, 0]]], 5, 2, 2)
    for _ in range(6):
        pa, qa, pb, qb = rng.randint(0, 1), rng.randint(0, 1), rng.randint(0, 1), rng.randint(0, 1)
        a = _random_component(bc, pa, qa, rng)
        b = _random_component(bc, pb, qb, rng)
        lhs = bc.total_d({(pa + pb, qa + qb): bc.cup(a, pa, qa, b, pb, qb)})
        da = bc.total_d({(pa, qa): a})
        db = bc.total_d({(pb, qb): b})
        rhs = {}
        sgn = (-1) ** (pa + qa)
        for (p, q), c in da.items():
            term = bc.cup(c, p, q, b, pb, qb)
            rhs.setdefault((p + pb, q + qb), []).append((1, term))
        for (p, q), c in db.items():
            term = bc.cup(a, pa, qa, c, p, q)
            rhs.setdefault((pa + p, qa + q), []).append((sgn, term))
        for key in set(lhs) | set(rhs):
            total = {}
            for s_, term in rhs.get(key, []):
                for st_, w in term.items():
                    w = w if s_ > 0 else -w
                    total[st_] = total[st_] + w if st_ in total else w
            total = {k: v for k, v in total.items() if not v.is_zero()}
            assert lhs.get(key, {}) == total


def test_action_bicomplex_total_d_squared_on_elements():
    rng = random.Random(2)
    bc = action_bicomplex([[[1]], [[-1]]], 6, 3, 1)
    for p in range(3):
        a = _random_component(bc, p, 0, rng)
        dd = bc.total_d(bc.total_d({(p, 0): a}))
        assert all(not v for v in dd.values())
