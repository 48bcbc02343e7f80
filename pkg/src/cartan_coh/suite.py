"""The acceptance matrix as executable checks.

Each criterion is a function of the seed returning a :class:`Verdict`; the
report lists them in a fixed order so identical seeds give identical output.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, Dict, List, NamedTuple, Optional

from .verdict import Verdict

DEFAULT_SEED = 20240601


class Criterion(NamedTuple):
    number: int
    name: str
    module: str
    run: Callable[[int], Verdict]


def _expect(v: Verdict, got, want, **info) -> bool:
    return v.record(got == want, got=got, expected=want, **info)


def gf_godbillon_vey(seed: int) -> Verdict:
    from .gelfand_fuchs import gf_cohomology
    v = Verdict("gf_q1_weight0")
    t = gf_cohomology(1, 0, 3)
    _expect(v, t.dim_list(), [1, 0, 0, 1], what="dims")
    reps = t.representatives[3]
    v.record(len(reps) == 1 and list(reps[0]) == ["xi0^xi1^xi2"]
             and Fraction(reps[0]["xi0^xi1^xi2"]) != 0, what="degree-3 representative", got=reps)
    v.details["representative"] = reps
    return v


def wo_tables(seed: int) -> Verdict:
    from .gelfand_fuchs import wo_cohomology
    v = Verdict("wo_cohomology")
    t1 = wo_cohomology(1, 3)
    _expect(v, t1.dim_list(), [1, 0, 0, 1], what="WO_1 dims")
    _expect(v, t1.representatives[3], [{"h1*c1": "1/1"}], what="WO_1 degree-3 representative")
    t2 = wo_cohomology(2, 5)
    _expect(v, t2.dims[5], 2, what="dim H^5(WO_2)")
    _expect(v, sorted(k for r in t2.representatives[5] for k in r), ["h1*c1^2", "h1*c2"],
            what="H^5(WO_2) representatives")
    return v


def wo_matches_gf(seed: int) -> Verdict:
    from .gelfand_fuchs import gf_cohomology, wo_cohomology
    v = Verdict("wo_equals_relative_gf")
    for q in (1, 2):
        wo = wo_cohomology(q, 5).dim_list()
        gf = gf_cohomology(q, 0, 5, relative=True).dim_list()
        v.details[f"q{q}"] = {"wo": wo, "relative_gf": gf}
        _expect(v, gf, wo, q=q)
    return v


def euler_homotopy(seed: int) -> Verdict:
    from .gelfand_fuchs import euler_homotopy_check
    v = Verdict("euler_homotopy")
    for q in (1, 2):
        for w in (-3, -2, -1, 1, 2, 3):
            for p in range(5):
                r = euler_homotopy_check(q, p, w)
                v.record(r.ok, **r.to_json())
    return v


def finite_group_vanishing(seed: int) -> Verdict:
    from .groupoid import FiniteGroupoid, group_cohomology
    v = Verdict("finite_group_vanishing")
    _expect(v, group_cohomology(FiniteGroupoid.cyclic(2), p_max=4).dim_list(), [1, 0, 0, 0, 0],
            group="Z/2")
    _expect(v, group_cohomology(FiniteGroupoid.symmetric(3), p_max=2).dim_list(), [1, 0, 0],
            group="S3")
    return v


def cech_examples(seed: int) -> Verdict:
    from .groupoid import CoverNerve, mv_cech
    v = Verdict("cech")
    circle = CoverNerve(3, {(0,): ["a"], (1,): ["b"], (2,): ["c"],
                            (0, 1): ["ab"], (1, 2): ["bc"], (0, 2): ["ac"]})
    interval = CoverNerve(2, {(0,): ["a"], (1,): ["b"], (0, 1): ["ab"]})
    _expect(v, mv_cech(circle, 1).dim_list(), [1, 1], nerve="circle, three arcs")
    _expect(v, mv_cech(interval, 1).dim_list(), [1, 0], nerve="interval, two arcs")
    return v


def action_bicomplex_line(seed: int) -> Verdict:
    from .groupoid import action_bicomplex
    v = Verdict("action_bicomplex")
    bc = action_bicomplex([[[1]], [[-1]]], 6, 3, 1)
    _expect(v, bc.total.dim_list(), [1, 0, 0, 0], group="{+1,-1} on the line", cap=6)
    return v


def matched_pair_equivalence(seed: int) -> Verdict:
    from .cartan_algebroid import (inf_haefliger, matched_pair_check, perturb_package, perturbable,
                                   random_flat_package, tangent_matched_pair)
    rng = random.Random(seed)
    v = Verdict("matched_pair_iff_flat_cartan")
    for n in range(20):
        pkg = random_flat_package(rng)
        mp = matched_pair_check(*tangent_matched_pair(pkg))
        rep = inf_haefliger(pkg, 2, 2, degree_bound=4)
        v.record(mp.ok and rep.ok, kind="flat", sample=n, matched_pair=mp.first_failure,
                 failing_squares=rep.failing_squares(), package=pkg.to_json())
    for n in range(20):
        pkg = random_flat_package(rng)
        while not perturbable(pkg):
            pkg = random_flat_package(rng)
        bad = perturb_package(pkg, rng)
        mp = matched_pair_check(*tangent_matched_pair(bad))
        rep = inf_haefliger(bad, 2, 2, degree_bound=4)
        named = mp.details.get("first_violated")
        v.record(not mp.ok and named is not None and bool(rep.failing_squares()),
                 kind="perturbed", sample=n, violated=named,
                 failing_squares=rep.failing_squares(), package=bad.to_json())
    return v


def double_equivalence(seed: int) -> Verdict:
    from .cartan_algebroid import double_equivalence_check, homogeneous_packages
    v = Verdict("double_equivalence")
    for name, pkg in homogeneous_packages().items():
        res = double_equivalence_check(pkg, degree_bound=3)
        v.merge(res, prefix=name)
        v.details[name] = res.details
    return v


def jet_checks(seed: int) -> Verdict:
    from .jet import jet_suite
    v = Verdict("jet_suite")
    for name, res in jet_suite(seed, samples=100).items():
        v.merge(res, prefix=name)
        v.details[name] = {"pass": res.ok, "checked": res.checked}
    return v


CRITERIA: List[Criterion] = [
    Criterion(1, "gf_q1_weight0", "gelfand_fuchs", gf_godbillon_vey),
    Criterion(2, "wo_cohomology", "gelfand_fuchs", wo_tables),
    Criterion(3, "wo_equals_relative_gf", "gelfand_fuchs", wo_matches_gf),
    Criterion(4, "euler_homotopy", "gelfand_fuchs", euler_homotopy),
    Criterion(5, "finite_group_vanishing", "groupoid", finite_group_vanishing),
    Criterion(6, "cech", "groupoid", cech_examples),
    Criterion(7, "action_bicomplex", "groupoid", action_bicomplex_line),
    Criterion(8, "matched_pair_iff_flat_cartan", "cartan_algebroid", matched_pair_equivalence),
    Criterion(9, "double_equivalence", "cartan_algebroid", double_equivalence),
    Criterion(10, "jet_suite", "jet", jet_checks),
]

MODULES = ("gelfand_fuchs", "groupoid", "cartan_algebroid", "jet")


def run_criterion(c: Criterion, seed: int) -> Verdict:
    """Run one criterion; an exception counts as a failure carrying its message."""
    try:
        return c.run(seed)
    except Exception as exc:  # reported, not raised: the suite must always finish
        v = Verdict(c.name)
        v.fail(error=type(exc).__name__, message=str(exc))
        return v


def run_suite(module: Optional[str] = None, seed: int = DEFAULT_SEED,
              only: Optional[List[int]] = None) -> Dict:
    """Run the selected criteria in their fixed order and summarize."""
    if module is not None and module not in MODULES:
        raise ValueError(f"unknown module {module!r}; choose from {', '.join(MODULES)}")
    rows = []
    for c in CRITERIA:
        if module is not None and c.module != module:
            continue
        if only is not None and c.number not in only:
            continue
        res = run_criterion(c, seed)
        row = {"criterion": c.number, "module": c.module, **res.to_json()}
        rows.append(row)
    return {"selector": module or "all", "pass": all(r["pass"] for r in rows), "criteria": rows}
