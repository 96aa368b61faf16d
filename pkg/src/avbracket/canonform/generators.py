"""Minor-determinant bases for phase shifts and annihilator metrics.

Shifts ``Q -> Q + q(S_X)`` preserving the canonical pair form a finite
dimensional space spanned by signed maximal minors of the matrix of phase
gradients with one row deleted.  Divergence-free metric vectors for
annihilators are spanned by the analogous minors with one column deleted.
Both claims are checked here against the exact solution spaces of the
defining linear relations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .. import linalg
from ..jetcalc import ZERO, DiffPoly, FieldSet, JetVar, apply_multi, det_poly
from ..report import CheckReport
from .admissible import phase_fieldset, second, sx, unit


@dataclass(frozen=True)
class GeneratorBasis:
    """Generators keyed by their index sets; each value is a tuple of polynomials."""

    fieldset: FieldSet
    generators: tuple

    def vectors(self) -> list:
        return [vec for _, vec in self.generators]

    def __len__(self):
        return len(self.generators)


def canonical_generators(m: int, d: int, l_max: int, fs: FieldSet | None = None) -> GeneratorBasis:
    """Shift vectors built from rows ``M1`` (size l+1) and columns ``M2`` (size l)."""
    fs = fs or phase_fieldset(m, d)
    gens = []
    for l in range(0, l_max + 1):
        for rows in itertools.combinations(range(m), l + 1):
            for cols in itertools.combinations(range(d), l):
                vec = [ZERO] * m
                for j, alpha in enumerate(rows):
                    kept = [r for r in rows if r != alpha]
                    minor = [[sx(fs, r, c) for c in cols] for r in kept]
                    val = det_poly(minor)
                    vec[alpha] = val if j % 2 == 0 else -val
                gens.append(((rows, cols), tuple(vec)))
    return GeneratorBasis(fs, tuple(gens))


def annihilator_metric_generators(m: int, d: int, l_max: int,
                                  fs: FieldSet | None = None) -> GeneratorBasis:
    """Metric vectors built from rows ``N1`` (size l) and columns ``N2`` (size l+1)."""
    fs = fs or phase_fieldset(m, d)
    gens = []
    for l in range(0, l_max + 1):
        for rows in itertools.combinations(range(m), l):
            for cols in itertools.combinations(range(d), l + 1):
                vec = [ZERO] * d
                for j, p in enumerate(cols):
                    kept = [c for c in cols if c != p]
                    minor = [[sx(fs, r, c) for c in kept] for r in rows]
                    val = det_poly(minor)
                    vec[p] = val if j % 2 == 0 else -val
                gens.append(((rows, cols), tuple(vec)))
    return GeneratorBasis(fs, tuple(gens))


def is_canonical_transform(q: Sequence[DiffPoly], fs: FieldSet, m: int) -> CheckReport:
    """Relations on first and second derivatives characterising canonical shifts."""
    d = fs.dim
    grads = [JetVar.of(a, unit(d, p)) for a in range(m) for p in range(d)]
    items = []
    for v in sorted(set().union(*(x.variables() for x in q)) if q else set()):
        if v not in grads:
            items.append((f"depends on {fs.var_name(v)}", DiffPoly.var(v)))
    for a in range(m):
        for b in range(a, m):
            for p in range(d):
                val = (q[a].partial(JetVar.of(b, unit(d, p)))
                       + q[b].partial(JetVar.of(a, unit(d, p))))
                if not val.is_zero():
                    items.append((f"dq{a + 1}/dS{b + 1}_{p + 1} + dq{b + 1}/dS{a + 1}_{p + 1}", val))
    for b in range(m):
        for a in range(m):
            for c in range(m):
                for p in range(d):
                    for r in range(p, d):
                        va, vc = JetVar.of(a, unit(d, p)), JetVar.of(c, unit(d, r))
                        wa, wc = JetVar.of(a, unit(d, r)), JetVar.of(c, unit(d, p))
                        val = q[b].partial(va).partial(vc) + q[b].partial(wa).partial(wc)
                        if not val.is_zero():
                            items.append((f"second derivatives of q{b + 1} in "
                                          f"(S{a + 1},S{c + 1}) along ({p + 1},{r + 1})", val))
    return CheckReport("canonical_transform", tuple(items))


def _monomials(variables: Sequence[JetVar], max_degree: int) -> list:
    out = []
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(variables, deg):
            acc: dict = {}
            for v in combo:
                acc[v] = acc.get(v, 0) + 1
            out.append(tuple(sorted(acc.items())))
    return out


def _vector_ansatz(m: int, d: int, ncomp: int, degree: int):
    variables = [JetVar.of(a, unit(d, p)) for a in range(m) for p in range(d)]
    monos = _monomials(variables, degree)
    columns = [(i, mono) for i in range(ncomp) for mono in monos]
    return variables, columns


def _linear_constraints(columns, fs, constraint_fn) -> list:
    """Rows of the linear map ``coefficients -> constraint polynomials``."""
    rows: dict = {}
    for j, (i, mono) in enumerate(columns):
        vec = [ZERO] * (max(c[0] for c in columns) + 1)
        vec[i] = DiffPoly({mono: 1})
        for label, poly in constraint_fn(vec):
            for m2, c in poly.terms.items():
                rows.setdefault((label, m2), {})[j] = c
    return list(rows.values())


def _vectors_from_solutions(basis, columns, ncomp) -> list:
    out = []
    for sol in basis:
        vec = [ZERO] * ncomp
        for j, c in sol.items():
            i, mono = columns[j]
            vec[i] = vec[i] + DiffPoly({mono: c})
        out.append(tuple(vec))
    return out


def canonical_solution_space(m: int, d: int, degree: int, fs: FieldSet | None = None) -> list:
    """Basis of polynomial shifts of bounded degree satisfying the relations."""
    fs = fs or phase_fieldset(m, d)
    _, columns = _vector_ansatz(m, d, m, degree)

    def constraints(vec):
        rep = is_canonical_transform(vec, fs, m)
        return [(label, val) for label, val in rep.residual]

    rows = _linear_constraints(columns, fs, constraints)
    return _vectors_from_solutions(linalg.nullspace(rows, len(columns)), columns, m)


def metric_solution_space(m: int, d: int, degree: int, fs: FieldSet | None = None) -> list:
    """Basis of polynomial vectors ``(g^1..g^d)`` in ``S_X`` with zero divergence."""
    fs = fs or phase_fieldset(m, d)
    _, columns = _vector_ansatz(m, d, d, degree)

    def constraints(vec):
        div = ZERO
        for p, g in enumerate(vec):
            div = div + apply_multi(g, unit(d, p), fs.max_order)
        return [("div", div)]

    rows = _linear_constraints(columns, fs, constraints)
    return _vectors_from_solutions(linalg.nullspace(rows, len(columns)), columns, d)


def _vector_to_row(vec: Sequence[DiffPoly], index: dict) -> dict:
    row = {}
    for i, p in enumerate(vec):
        for mono, c in p.terms.items():
            key = index.setdefault((i, mono), len(index))
            row[key] = c
    return row


def span_compare(a: Sequence[Sequence[DiffPoly]], b: Sequence[Sequence[DiffPoly]]) -> dict:
    """Dimensions and mutual membership of two spans of polynomial vectors."""
    index: dict = {}
    rows_a = [_vector_to_row(v, index) for v in a]
    rows_b = [_vector_to_row(v, index) for v in b]
    return {
        "dim_a": linalg.rank(rows_a),
        "dim_b": linalg.rank(rows_b),
        "a_in_b": all(linalg.in_span(rows_b, r) for r in rows_a),
        "b_in_a": all(linalg.in_span(rows_a, r) for r in rows_b),
    }


def span_membership(metric: Mapping, basis: GeneratorBasis) -> CheckReport:
    """Whether each metric vector ``metric[(k, l)] = (g^1..g^d)`` lies in the span."""
    index: dict = {}
    rows = [_vector_to_row(v, index) for v in basis.vectors()]
    items = []
    for key, vec in sorted(metric.items()):
        if not linalg.in_span(rows, _vector_to_row(vec, index)):
            items.append((f"g{key} outside span", vec[0] if vec else ZERO))
    return CheckReport("metric_span", tuple(items))
