"""Brackets on phases ``S``, conjugate densities ``Q`` and annihilator densities ``N``.

In the reduced form the blocks are ``{S, S} = 0``, ``{S, Q} = delta``,
``{S, N} = 0``, ``{Q, N} = A[l, p] delta_p`` and ``{N, N} = g[l, k, p](S_X) delta_p``
with ``g`` symmetric and divergence-free.  When ``g`` is constant and some
``g[., ., p]`` is invertible, :func:`pseudo_canonicalize_thm31` builds a
transform decoupling ``N`` from ``(S, Q)`` completely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .. import linalg
from ..errors import InternalError, NonIntegrableError, PreconditionError, RefusalError
from ..jetcalc import ZERO, DiffPoly, Field, FieldSet, JetVar, apply_multi, det_poly, jet_potential
from ..locbracket import LocalBracket, skew_check
from ..report import CheckReport
from .admissible import AdmissibleBracket, canonicalize_thm21, unit
from .transform import HydroTransform, field_var, transform_bracket


def sqn_fieldset(m: int, s: int, d: int, max_order: int = 6) -> FieldSet:
    names_s = ["S"] if m == 1 else [f"S{a + 1}" for a in range(m)]
    names_q = ["Q"] if m == 1 else [f"Q{a + 1}" for a in range(m)]
    names_n = [f"N{l + 1}" for l in range(s)]
    fields = ([Field(n, "phase") for n in names_s] + [Field(n, "density") for n in names_q]
              + [Field(n, "annihilator") for n in names_n])
    return FieldSet(d, tuple(fields), max_order)


@dataclass(frozen=True)
class SQNBracket:
    bracket: LocalBracket
    m: int
    s: int

    @property
    def fieldset(self) -> FieldSet:
        return self.bracket.fieldset

    @property
    def d(self) -> int:
        return self.bracket.dim

    def phase(self, a: int) -> int:
        return a

    def dens(self, a: int) -> int:
        return self.m + a

    def ann(self, l: int) -> int:
        return 2 * self.m + l

    def A(self, l: int, p: int, a: int) -> DiffPoly:
        """Coefficient of ``delta_p`` in ``{Q_a, N^l}``."""
        return self.bracket.coefficient(self.dens(a), self.ann(l), unit(self.d, p))

    def g(self, l: int, k: int, p: int) -> DiffPoly:
        return self.bracket.coefficient(self.ann(l), self.ann(k), unit(self.d, p))

    def metric(self, p: int) -> list:
        return [[self.g(l, k, p) for k in range(self.s)] for l in range(self.s)]


def _roles(fs: FieldSet):
    return fs.by_role("phase"), fs.by_role("density"), fs.by_role("annihilator")


@dataclass(frozen=True)
class SQNReduction:
    report: CheckReport
    bracket: SQNBracket | None


def reduce_to_sqn(B: LocalBracket) -> SQNReduction:
    """Check the reduced block structure and wrap the bracket."""
    fs = B.fieldset
    S, Q, N = _roles(fs)
    m, s, d = len(S), len(N), fs.dim
    if S != list(range(m)) or Q != list(range(m, 2 * m)) or N != list(range(2 * m, 2 * m + s)):
        raise PreconditionError("fields must be ordered as phases, densities, annihilators")
    if fs.size != 2 * m + s:
        raise PreconditionError("unexpected generic fields in an (S, Q, N) bracket")
    zero = (0,) * d
    names = fs.names
    items = []

    def expect(i, j, want):
        got = B.entry(i, j)
        if got != want:
            for l in set(got) | set(want):
                diff = got.get(l, ZERO) - want.get(l, ZERO)
                if not diff.is_zero():
                    items.append((f"{{{names[i]},{names[j]}}}[{','.join(map(str, l))}]", diff))

    skew = skew_check(B)
    items.extend(skew.residual)
    for a in S:
        for b in S:
            expect(a, b, {})
        for b in range(m):
            expect(a, Q[b], {zero: DiffPoly.const(1)} if a == b else {})
        for l in N:
            expect(a, l, {})
    for a in Q:
        for l in N:
            for key, c in B.entry(a, l).items():
                if sum(key) != 1:
                    items.append((f"{{{names[a]},{names[l]}}}[{','.join(map(str, key))}] "
                                  "not a first derivative of delta", c))
    nvars = set(N)
    for l in N:
        for k in N:
            for key, c in B.entry(l, k).items():
                label = f"{{{names[l]},{names[k]}}}[{','.join(map(str, key))}]"
                if sum(key) != 1:
                    items.append((label + " delta term", c))
                    continue
                if any(v.field in nvars or v.field in Q or v.order != 1 for v in c.variables()):
                    items.append((label + " depends on variables other than S_X", c))
                if c != B.coefficient(k, l, key):
                    items.append((label + " not symmetric", c - B.coefficient(k, l, key)))
            div = ZERO
            for p in range(d):
                div = div + apply_multi(B.coefficient(l, k, unit(d, p)), unit(d, p), fs.max_order)
            if not div.is_zero():
                items.append((f"{{{names[l]},{names[k]}}} metric divergence", div))
    report = CheckReport("sqn_reduced_form", tuple(items))
    return SQNReduction(report, SQNBracket(B, m, s) if report.passed else None)


@dataclass(frozen=True)
class Classification:
    nondegenerate: bool
    simple: bool
    directions: tuple
    determinants: tuple

    def describe(self) -> str:
        return (("non-degenerate" if self.nondegenerate else "degenerate") + ", "
                + ("simple" if self.simple else "not simple"))


def classify_annihilator_part(Bq: SQNBracket) -> Classification:
    dets = tuple(det_poly(Bq.metric(p)) for p in range(Bq.d))
    dirs = tuple(p for p, dt in enumerate(dets) if not dt.is_zero())
    simple = all(Bq.g(l, k, p).is_constant()
                 for l in range(Bq.s) for k in range(Bq.s) for p in range(Bq.d))
    return Classification(bool(dirs), simple, dirs, dets)


def _require_reduced(Bq: SQNBracket) -> None:
    red = reduce_to_sqn(Bq.bracket)
    if not red.report.passed:
        raise PreconditionError("bracket is not in reduced form: "
                                + "; ".join(red.report.residual_text(Bq.fieldset.format)[:5]))


def pseudo_canonicalize_thm31(Bq: SQNBracket, verify: bool = True) -> HydroTransform:
    """Transform reaching ``{Q,Q} = {Q,N} = 0`` with constant ``{N,N}``."""
    _require_reduced(Bq)
    fs, m, s, d = Bq.fieldset, Bq.m, Bq.s, Bq.d
    cls = classify_annihilator_part(Bq)
    if not cls.simple:
        raise RefusalError("annihilator part is not simple: the metric is not constant")
    if not cls.nondegenerate:
        raise RefusalError("annihilator part is degenerate: every directional metric is singular")
    p1 = cls.directions[0]
    G = [[Bq.g(l, k, p1).constant_term() for k in range(s)] for l in range(s)]
    Ginv = linalg.inverse(G)
    zero = (0,) * d
    nvars = [JetVar.of(Bq.ann(k), zero) for k in range(s)]
    f = []
    for a in range(m):
        partials = {}
        for k in range(s):
            partials[nvars[k]] = sum((Bq.A(r, p1, a) * Ginv[r][k] for r in range(s)), ZERO)
        try:
            f.append(jet_potential(partials))
        except NonIntegrableError as exc:
            raise RefusalError(f"coupling coefficients are not a gradient in N: {exc}") from exc
    T1 = HydroTransform.build(fs, shifts={Bq.dens(a): -f[a] for a in range(m)})
    B1 = transform_bracket(Bq.bracket, T1)
    qq = LocalBracket(fs, {k: v for k, v in B1.coeffs.items()
                           if k[0] < 2 * m and k[1] < 2 * m})
    for (i, j, l), c in qq.coeffs.items():
        if any(v.field >= m for v in c.variables()):
            raise InternalError("{Q,Q} still depends on annihilators after decoupling")
    try:
        adm = AdmissibleBracket.from_local(qq, m)
    except PreconditionError as exc:
        raise InternalError(f"{{Q,Q}} block is not admissible: {exc}") from exc
    T2 = canonicalize_thm21(adm, verify=False) if (adm.omega or adm.gamma) else None
    shift2 = [T2.shift(m + a) if T2 else ZERO for a in range(m)]
    gpot = []
    for l in range(s):
        partials = {}
        for a in range(m):
            for p in range(d):
                key = JetVar.of(a, unit(d, p))
                if p == p1:
                    partials[key] = ZERO
                else:
                    partials[key] = B1.coefficient(Bq.dens(a), Bq.ann(l), unit(d, p))
        for coeff in partials.values():
            if any(v.field >= m for v in coeff.variables()):
                raise InternalError("residual coupling still depends on densities or annihilators")
        try:
            gpot.append(jet_potential(partials))
        except NonIntegrableError as exc:
            raise InternalError(f"residual coupling is not a gradient: {exc}") from exc
    shifts = {Bq.dens(a): -f[a] + shift2[a] for a in range(m)}
    shifts.update({Bq.ann(l): -gpot[l] for l in range(s)})
    T = HydroTransform.build(fs, shifts=shifts)
    if verify:
        report = canonical_form_check(transform_bracket(Bq.bracket, T), m, s)
        if not report.passed:
            raise InternalError("pseudo-canonical transform failed verification: "
                                + "; ".join(report.residual_text(fs.format)[:5]))
    return T


def canonical_form_check(B: LocalBracket, m: int, s: int) -> CheckReport:
    """Block identities of the pseudo-canonical form with constant annihilator metric."""
    fs = B.fieldset
    d = fs.dim
    zero = (0,) * d
    names = fs.names
    items = []
    for i in range(2 * m + s):
        for j in range(2 * m + s):
            entry = B.entry(i, j)
            if i < m and j < m:
                want = {}
            elif i < m and m <= j < 2 * m:
                want = {zero: DiffPoly.const(1)} if j - m == i else {}
            elif m <= i < 2 * m and j < m:
                want = {zero: DiffPoly.const(-1)} if i - m == j else {}
            elif i < 2 * m or j < 2 * m:
                want = {}
            else:
                bad = {l: c for l, c in entry.items() if sum(l) != 1 or not c.is_constant()}
                for l, c in bad.items():
                    items.append((f"{{{names[i]},{names[j]}}}[{','.join(map(str, l))}]", c))
                continue
            for l in set(entry) | set(want):
                diff = entry.get(l, ZERO) - want.get(l, ZERO)
                if not diff.is_zero():
                    items.append((f"{{{names[i]},{names[j]}}}[{','.join(map(str, l))}]", diff))
    return CheckReport("pseudo_canonical_form", tuple(items))


def conjugated_metric(Bq: SQNBracket, new_n: Sequence[DiffPoly]) -> LocalBracket:
    """``{N, N}`` for new annihilator coordinates via ``J g J^T`` and ``J g (D J)^T``.

    ``new_n`` are polynomials in ``S_X`` and the old annihilators; the result
    is expressed in the old variables.
    """
    fs, s, d = Bq.fieldset, Bq.s, Bq.d
    zero = (0,) * d
    mo = fs.max_order
    J = [[n.partial(JetVar.of(Bq.ann(b), zero)) for b in range(s)] for n in new_n]
    coeffs = {}
    for p in range(d):
        g = Bq.metric(p)
        DJ = [[apply_multi(J[k][b], unit(d, p), mo) for b in range(s)] for k in range(len(new_n))]
        for l in range(len(new_n)):
            for k in range(len(new_n)):
                lead = ZERO
                low = ZERO
                for a in range(s):
                    for b in range(s):
                        if g[a][b].is_zero():
                            continue
                        lead = lead + J[l][a] * g[a][b] * J[k][b]
                        low = low + J[l][a] * g[a][b] * DJ[k][b]
                i, j = Bq.ann(l), Bq.ann(k)
                coeffs[(i, j, unit(d, p))] = coeffs.get((i, j, unit(d, p)), ZERO) + lead
                coeffs[(i, j, zero)] = coeffs.get((i, j, zero), ZERO) + low
    return LocalBracket(fs, coeffs)
