"""Bounded search for transforms decoupling the annihilator part.

The question is whether new coordinates ``Q = Q~ + q(S_X, N~)`` and
``N = N(S_X, N~)`` exist with ``{Q, N} = 0`` and ``{N, N}`` free of ``S``.
Writing ``J = dN/dN~``, the annihilator block transforms as

    {N, N} = sum_p J g_p J^T delta_p + sum_p J g_p (D_p J)^T delta.

Two exact reductions come first.  If some ``g_p0`` is invertible, the
``S_XX`` terms of the ``delta`` coefficient force ``dJ/dS_X = 0``; then the
leading term must satisfy ``J (dg_p/dS_X) J^T = 0``.  That last system is
solved exactly over the rationals for ``N`` polynomial in ``N~`` up to the
degree bound, with a Groebner basis and an auxiliary variable enforcing an
invertible Jacobian.  A reduced basis equal to ``{1}`` certifies that no
solution exists at that degree.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from ..errors import PreconditionError, RefusalError
from ..jetcalc import DiffPoly, JetVar
from .admissible import unit
from .sqn import (SQNBracket, canonical_form_check, classify_annihilator_part,
                  pseudo_canonicalize_thm31, reduce_to_sqn)
from .transform import HydroTransform, transform_bracket


@dataclass(frozen=True)
class Certificate:
    """An inconsistent constraint subset found at a fixed degree."""

    direction: int
    phase: int
    slot: int
    support: tuple
    sample_point: tuple
    matrix: tuple
    equations: tuple
    groebner: tuple
    unknowns: int

    def describe(self, fs) -> str:
        var = fs.var_name(JetVar.of(self.phase, unit(fs.dim, self.slot)))
        rows = ",".join(str(i + 1) for i in self.support)
        return (f"g[.,.,{self.direction + 1}] depends on {var} (support rows {rows}); "
                f"J*dg*J^T = 0 with det J != 0 has Groebner basis {list(self.groebner)}")


@dataclass(frozen=True)
class ObstructionVerdict:
    verdict: str
    degree_bound: int
    ladder: tuple = ()
    certificates: tuple = ()
    witness: HydroTransform | None = None
    notes: tuple = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"

    @property
    def primary(self) -> Certificate | None:
        return self.certificates[0] if self.certificates else None

    def summary(self) -> str:
        if self.verdict == "infeasible":
            return f"infeasible up to degree {self.degree_bound}"
        if self.verdict == "feasible":
            return f"feasible (witness found, degree bound {self.degree_bound})"
        return f"undecided up to degree {self.degree_bound}"


def _sample_point(K, fs, nphase):
    """Rational point where the polynomial matrix ``K`` is not the zero matrix."""
    d = fs.dim
    vars_ = [JetVar.of(a, unit(d, p)) for a in range(nphase) for p in range(d)]
    for values in itertools.product(range(0, 3), repeat=len(vars_)):
        point = {v: Fraction(x) for v, x in zip(vars_, values)}
        mat = [[c.evaluate(point) if isinstance(c, DiffPoly) else Fraction(c) for c in row]
               for row in K]
        if any(x != 0 for row in mat for x in row):
            return tuple(values), mat
    raise PreconditionError("matrix polynomial vanishes on the sampling grid")


def _ansatz(s: int, degree: int):
    """``N^l`` as a general polynomial in ``s`` variables without constant term."""
    xs = sympy.symbols(f"n1:{s + 1}")
    monos = [sympy.Mul(*combo) for deg in range(1, degree + 1)
             for combo in itertools.combinations_with_replacement(xs, deg)]
    coeffs = [sympy.symbols(f"c{l + 1}_1:{len(monos) + 1}") for l in range(s)]
    polys = [sum(c * mono for c, mono in zip(coeffs[l], monos)) for l in range(s)]
    return xs, [c for row in coeffs for c in row], polys


def _solve_block(K, s: int, degree: int):
    """Groebner basis of ``J K J^T = 0`` plus ``t det J(0) = 1``."""
    xs, unknowns, polys = _ansatz(s, degree)
    J = sympy.Matrix([[sympy.diff(p, x) for x in xs] for p in polys])
    Km = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in K])
    prod = (J * Km * J.T).expand()
    eqs = set()
    for i in range(s):
        for k in range(i, s):
            poly = sympy.Poly(prod[i, k], *xs)
            for c in poly.coeffs():
                if c != 0:
                    eqs.add(sympy.expand(c))
    t = sympy.Symbol("t")
    det0 = J.subs({x: 0 for x in xs}).det()
    system = sorted(eqs, key=sympy.default_sort_key) + [sympy.expand(t * det0 - 1)]
    basis = sympy.groebner(system, *unknowns, t, order="grevlex")
    return tuple(str(e) for e in system), tuple(str(g) for g in basis.exprs), len(unknowns) + 1


def _ladder(Bq: SQNBracket, cls):
    """Exact necessary conditions derived from an invertible directional metric."""
    fs, s, d = Bq.fieldset, Bq.s, Bq.d
    if not cls.directions:
        return None, ()
    p0 = cls.directions[0]
    facts = [f"det g[.,.,{p0 + 1}] = {fs.format(cls.determinants[p0])} is not identically zero",
             f"S_XX coefficients of the delta term give J g[.,.,{p0 + 1}] (dJ/dS_X)^T = 0, "
             "hence dJ/dS_X = 0"]
    return p0, tuple(facts)


def _dependences(Bq: SQNBracket, p0: int):
    """Each S_X-dependence of a directional metric, most localized first."""
    fs, s, d, m = Bq.fieldset, Bq.s, Bq.d, Bq.m
    found = []
    for p in range(d):
        G = Bq.metric(p)
        support = tuple(i for i in range(s) if any(not G[i][k].is_zero() for k in range(s)))
        for a in range(m):
            for q in range(d):
                v = JetVar.of(a, unit(d, q))
                K = [[G[i][k].partial(v) for k in range(s)] for i in range(s)]
                if all(c.is_zero() for row in K for c in row):
                    continue
                found.append(((p == p0, len(support), p, a, q), p, a, q, support, K))
    found.sort(key=lambda item: item[0])
    return found


def decoupling_obstruction_search(Bq: SQNBracket, degree_bound: int = 2,
                                  all_certificates: bool = False,
                                  workers: int = 1) -> ObstructionVerdict:
    """Feasible witness, bounded-degree infeasibility certificate, or undecided."""
    red = reduce_to_sqn(Bq.bracket)
    if not red.report.passed:
        raise PreconditionError("bracket is not in reduced form")
    if degree_bound < 1:
        raise PreconditionError("degree bound must be at least 1")
    cls = classify_annihilator_part(Bq)
    if cls.simple and cls.nondegenerate:
        if canonical_form_check(Bq.bracket, Bq.m, Bq.s).passed:
            witness = HydroTransform.identity(Bq.fieldset)
        else:
            witness = pseudo_canonicalize_thm31(Bq)
        check = canonical_form_check(transform_bracket(Bq.bracket, witness), Bq.m, Bq.s)
        if not check.passed:
            raise RefusalError("witness transform failed verification")
        return ObstructionVerdict("feasible", degree_bound, witness=witness,
                                  notes=("annihilator metric is constant and non-degenerate",))
    p0, ladder = _ladder(Bq, cls)
    if p0 is None:
        return ObstructionVerdict("undecided", degree_bound,
                                  notes=("every directional metric is singular; "
                                         "the necessary-condition ladder does not apply",))
    deps = _dependences(Bq, p0)
    if not deps:
        return ObstructionVerdict("undecided", degree_bound, ladder=ladder,
                                  notes=("metric is constant but the coupling could not be removed",))
    if not all_certificates:
        deps = deps[:1]

    def run(item):
        _, p, a, q, support, K = item
        point, Kval = _sample_point(K, Bq.fieldset, Bq.m)
        eqs, basis, nunk = _solve_block(Kval, Bq.s, degree_bound)
        return Certificate(p, a, q, support, point, tuple(tuple(r) for r in Kval), eqs, basis, nunk)

    if workers > 1 and len(deps) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            certs = list(pool.map(run, deps))
    else:
        certs = [run(item) for item in deps]
    inconsistent = tuple(c for c in certs if c.groebner == ("1",))
    if inconsistent:
        return ObstructionVerdict("infeasible", degree_bound, ladder=ladder,
                                  certificates=inconsistent)
    return ObstructionVerdict("undecided", degree_bound, ladder=ladder,
                              notes=("reduced coefficient system is consistent at this degree",))
