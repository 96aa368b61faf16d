"""Brackets on phases and conjugate densities and their canonicalization.

The bracket has ``{S, S} = 0``, ``{S^a, Q_b} = delta_ab delta`` and

    {Q_a, Q_b} = Omega[a, b, p] delta_p + Gamma[a, b, c, p, q] S^c_{pq} delta

with coefficients depending on first derivatives of the phases only.  When
the Jacobi identity holds, a shift ``Q -> Q + shift(S_X)`` makes ``{Q, Q}``
vanish; :func:`canonicalize_thm21` constructs it with homotopy formulas.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .. import linalg
from ..errors import (InternalError, NotADivergenceError, NonIntegrableError, PreconditionError,
                      RefusalError)
from ..jetcalc import (ZERO, DiffPoly, Field, FieldSet, JetVar, apply_multi, divergence,
                       divergence_extract, euler_operator, jet_potential, scale_homotopy)
from ..locbracket import LocalBracket, formal_adjoint, jacobi_check, skew_check
from ..report import CheckReport
from .transform import HydroTransform, field_var, transform_bracket


def phase_fieldset(m: int, d: int, max_order: int = 6, extra: Sequence[Field] = ()) -> FieldSet:
    names_s = ["S"] if m == 1 else [f"S{a + 1}" for a in range(m)]
    names_q = ["Q"] if m == 1 else [f"Q{a + 1}" for a in range(m)]
    fields = ([Field(n, "phase") for n in names_s] + [Field(n, "density") for n in names_q]
              + list(extra))
    return FieldSet(d, tuple(fields), max_order)


def unit(d: int, p: int) -> tuple:
    return tuple(int(k == p) for k in range(d))


def second(d: int, p: int, q: int) -> tuple:
    e = [0] * d
    e[p] += 1
    e[q] += 1
    return tuple(e)


def sx(fs: FieldSet, a: int, p: int) -> DiffPoly:
    return DiffPoly.var(JetVar.of(a, unit(fs.dim, p)))


def sxx(fs: FieldSet, a: int, p: int, q: int) -> DiffPoly:
    return DiffPoly.var(JetVar.of(a, second(fs.dim, p, q)))


def _is_first_order_phase_poly(p: DiffPoly, phases: set) -> bool:
    return all(v.field in phases and v.order == 1 for v in p.variables())


@dataclass(frozen=True)
class AdmissibleBracket:
    """Coefficient tables with 0-based indices.

    ``omega[(a, b, p)]`` and ``gamma[(a, b, c, p, q)]``; ``gamma`` is stored
    for ordered axis pairs and must be symmetric in ``(p, q)``.
    """

    fieldset: FieldSet
    m: int
    omega: Mapping
    gamma: Mapping

    @classmethod
    def build(cls, m: int, d: int, omega: Mapping, gamma: Mapping,
              fieldset: FieldSet | None = None) -> "AdmissibleBracket":
        fs = fieldset or phase_fieldset(m, d)
        om = {k: _poly(v) for k, v in omega.items() if not _poly(v).is_zero()}
        ga = {}
        for (a, b, c, p, q), v in gamma.items():
            v = _poly(v)
            if v.is_zero():
                continue
            ga[(a, b, c, p, q)] = v
            if p != q:
                other = gamma.get((a, b, c, q, p))
                if other is None:
                    ga[(a, b, c, q, p)] = v
                elif _poly(other) != v:
                    raise PreconditionError("gamma must be symmetric in its axis pair")
        phases = set(range(m))
        for v in list(om.values()) + list(ga.values()):
            if not _is_first_order_phase_poly(v, phases):
                raise PreconditionError("coefficients may depend only on first derivatives of phases")
        return cls(fs, m, om, ga)

    @property
    def d(self) -> int:
        return self.fieldset.dim

    def to_local(self) -> LocalBracket:
        fs, m, d = self.fieldset, self.m, self.d
        zero = (0,) * d
        coeffs = {}
        for a in range(m):
            coeffs[(a, m + a, zero)] = DiffPoly.const(1)
            coeffs[(m + a, a, zero)] = DiffPoly.const(-1)
        for (a, b, p), v in self.omega.items():
            key = (m + a, m + b, unit(d, p))
            coeffs[key] = coeffs.get(key, ZERO) + v
        for (a, b, c, p, q), v in self.gamma.items():
            key = (m + a, m + b, zero)
            coeffs[key] = coeffs.get(key, ZERO) + v * sxx(fs, c, p, q)
        return LocalBracket(fs, coeffs)

    @classmethod
    def from_local(cls, B: LocalBracket, m: int) -> "AdmissibleBracket":
        """Read the tables off a bracket of the admissible shape (exactly)."""
        fs, d = B.fieldset, B.dim
        zero = (0,) * d
        for a in range(m):
            for b in range(m):
                if B.entry(a, b):
                    raise PreconditionError("{S,S} must vanish")
                want = {zero: DiffPoly.const(1)} if a == b else {}
                if B.entry(a, m + b) != want:
                    raise PreconditionError("{S,Q} must be the unit delta")
        omega, gamma = {}, {}
        for a in range(m):
            for b in range(m):
                for l, c in B.entry(m + a, m + b).items():
                    if sum(l) == 1:
                        omega[(a, b, l.index(1))] = c
                    elif sum(l) == 0:
                        rebuilt = ZERO
                        for g in range(m):
                            for p in range(d):
                                for q in range(d):
                                    coef = c.partial(JetVar.of(g, second(d, p, q)))
                                    if p != q:
                                        coef = coef / 2
                                    if not coef.is_zero():
                                        gamma[(a, b, g, p, q)] = coef
                                        rebuilt = rebuilt + coef * sxx(fs, g, p, q)
                        if rebuilt != c:
                            raise PreconditionError("delta coefficient is not linear in S_XX")
                    else:
                        raise PreconditionError("{Q,Q} has higher derivatives of delta")
        return cls.build(m, d, omega, gamma, fs)


def _poly(v) -> DiffPoly:
    return v if isinstance(v, DiffPoly) else DiffPoly.const(v)


def closedness_check(J: AdmissibleBracket) -> CheckReport:
    """Cyclic identity among the ``Q`` components, computed symbolically."""
    B = J.to_local()
    skew = skew_check(B)
    if not skew.passed:
        raise PreconditionError("closedness check requires a skew-symmetric bracket")
    m = J.m
    triples = [(m + a, m + b, m + c) for a in range(m) for b in range(m) for c in range(m)]
    rep = jacobi_check(B, triples)
    return CheckReport("closedness", rep.residual)


# ---------------------------------------------------------------------------
# divergence-free fields of second-derivative type


def xi_from_table(F: Mapping, fs: FieldSet) -> list:
    """``xi^r = sum F[(q, p, r, a)] S^a_{qp}`` over ordered axis pairs."""
    xi = [ZERO] * fs.dim
    for (q, p, r, a), c in F.items():
        xi[r] = xi[r] + _poly(c) * sxx(fs, a, q, p)
    return xi


def table_from_xi(xi: Sequence[DiffPoly], fs: FieldSet, phases: Sequence[int]) -> dict:
    """Inverse of :func:`xi_from_table` for fields linear in second derivatives."""
    d = fs.dim
    F = {}
    for r, x in enumerate(xi):
        rebuilt = ZERO
        for a in phases:
            for q in range(d):
                for p in range(d):
                    c = x.partial(JetVar.of(a, second(d, q, p)))
                    if q != p:
                        c = c / 2
                    if not c.is_zero():
                        F[(q, p, r, a)] = c
                        rebuilt = rebuilt + c * sxx(fs, a, q, p)
        if rebuilt != x:
            raise PreconditionError("field is not linear in second derivatives of phases")
    return F


def lemma21_decompose(F: Mapping, fs: FieldSet) -> dict:
    """Antisymmetric ``f[(s, r)]`` with ``xi^r == sum_s D_s f[(s, r)]``."""
    d, mo = fs.dim, fs.max_order
    xi = xi_from_table(F, fs)
    div = divergence(xi, mo + 1)
    if not div.is_zero():
        raise NotADivergenceError("field is not divergence-free", div)
    phases = sorted({k[3] for k in F})
    f: dict = {}
    for q, r in itertools.combinations(range(d), 2):
        partials = {}
        for a in phases:
            partials[JetVar.of(a, unit(d, q))] = _poly(F.get((q, q, r, a), ZERO))
            partials[JetVar.of(a, unit(d, r))] = -_poly(F.get((r, r, q, a), ZERO))
        try:
            g = jet_potential(partials)
        except NonIntegrableError as exc:
            raise InternalError(f"mixed partial relations violated: {exc}") from exc
        f[(q, r)] = g
        f[(r, q)] = -g
    residual = [xi[r] - sum((apply_multi(f.get((s, r), ZERO), unit(d, s), mo)
                             for s in range(d) if s != r), ZERO) for r in range(d)]
    if any(not x.is_zero() for x in residual):
        h = _solve_antisymmetric_potential(residual, fs, phases)
        for (p, r), v in h.items():
            f[(p, r)] = f.get((p, r), ZERO) + v
    check = [sum((apply_multi(f.get((s, r), ZERO), unit(d, s), mo) for s in range(d) if s != r),
                 ZERO) for r in range(d)]
    if check != xi:
        raise InternalError("decomposition does not reproduce the field")
    return {k: v for k, v in f.items() if not v.is_zero()}


def _monomials(variables: Sequence[JetVar], degree: int) -> list:
    out = []
    for combo in itertools.combinations_with_replacement(variables, degree):
        acc: dict = {}
        for v in combo:
            acc[v] = acc.get(v, 0) + 1
        out.append(tuple(sorted(acc.items())))
    return out


def _solve_antisymmetric_potential(xi: Sequence[DiffPoly], fs: FieldSet, phases) -> dict:
    """Solve ``sum_s D_s h[(s, r)] = xi^r`` with ``h`` antisymmetric, exactly."""
    d, mo = fs.dim, fs.max_order
    first = [JetVar.of(a, unit(d, p)) for a in phases for p in range(d)]
    degrees = sorted({sum(e for _, e in mono) for x in xi for mono in x.terms})
    columns = []
    for s, r in itertools.combinations(range(d), 2):
        for deg in degrees:
            for mono in _monomials(first, deg):
                columns.append((s, r, mono))
    rows: dict = {}
    entries: dict = {}
    for j, (s, r, mono) in enumerate(columns):
        base = DiffPoly({mono: 1})
        for target, axis, sign in ((r, s, 1), (s, r, -1)):
            for m2, c in apply_multi(base, unit(d, axis), mo).terms.items():
                row = rows.setdefault((target, m2), len(rows))
                entries.setdefault(row, {})
                entries[row][j] = entries[row].get(j, 0) + sign * c
    for r, x in enumerate(xi):
        for m2 in x.terms:
            rows.setdefault((r, m2), len(rows))
    rhs = [Fraction(0)] * len(rows)
    for r, x in enumerate(xi):
        for m2, c in x.terms.items():
            rhs[rows[(r, m2)]] = c
    sol = linalg.solve([entries.get(i, {}) for i in range(len(rows))], rhs, len(columns))
    if sol is None:
        raise InternalError("no antisymmetric potential for the residual field")
    h: dict = {}
    for j, c in sol.items():
        s, r, mono = columns[j]
        term = DiffPoly({mono: c})
        h[(s, r)] = h.get((s, r), ZERO) + term
        h[(r, s)] = h.get((r, s), ZERO) - term
    return h


# ---------------------------------------------------------------------------
# potentials of closed one-forms linear in second derivatives


def one_form_from_table(M: Mapping, fs: FieldSet, m: int) -> list:
    """``q_a = sum M[(q, p, a, c)] S^c_{qp}`` over ordered axis pairs."""
    out = [ZERO] * m
    for (q, p, a, c), v in M.items():
        out[a] = out[a] + _poly(v) * sxx(fs, c, q, p)
    return out


def linearization(qs: Sequence[DiffPoly], fs: FieldSet, m: int) -> LocalBracket:
    coeffs = {}
    for a, q in enumerate(qs):
        for v in q.variables():
            if v.field < m:
                key = (a, v.field, v.deriv)
                coeffs[key] = coeffs.get(key, ZERO) + q.partial(v)
    return LocalBracket(fs, coeffs)


def closed_form_check(qs: Sequence[DiffPoly], fs: FieldSet, m: int) -> CheckReport:
    """Self-adjointness of the linearization of ``q`` (closedness of the form)."""
    L = linearization(qs, fs, m)
    res = L - formal_adjoint(L)
    items = tuple((f"d q_{i + 1} / d S{j + 1} [{','.join(map(str, l))}]", c)
                  for (i, j, l), c in res.coeffs.items())
    return CheckReport("closed_one_form", items)


def lemma22_potential(M: Mapping, fs: FieldSet, m: int) -> DiffPoly:
    """``h(S_X)`` whose variational derivative is ``q_a = M S_XX``."""
    d, mo = fs.dim, fs.max_order
    qs = one_form_from_table(M, fs, m)
    closed = closed_form_check(qs, fs, m)
    if not closed.passed:
        raise PreconditionError("one-form is not closed; asymmetry: "
                                + "; ".join(closed.residual_text(fs.format)))
    Mbar = {k: scale_homotopy(_poly(v), 1) for k, v in M.items()}
    sigma = one_form_from_table(Mbar, fs, m)

    def at_most_one_plain(mono):
        return sum(e for v, e in mono if v.order == 0) <= 1

    h = ZERO
    for rho in range(m):
        if sigma[rho].is_zero():
            continue
        try:
            v = divergence_extract(sigma[rho], d, mo, allow=at_most_one_plain)
        except NotADivergenceError as exc:
            raise InternalError("homotopy density is not a divergence") from exc
        plain = [JetVar.of(mu, (0,) * d) for mu in range(m)]
        u = list(v)
        for mu in range(m):
            V = [vr.partial(plain[mu]) for vr in v]
            u = [ur - DiffPoly.var(plain[mu]) * Vr for ur, Vr in zip(u, V)]
            if all(Vr.is_zero() for Vr in V):
                continue
            phases = list(range(m))
            F = table_from_xi(V, fs, phases)
            f = lemma21_decompose(F, fs)
            for (s, r), fsr in f.items():
                h = h + sx(fs, rho, r) * sx(fs, mu, s) * fsr
        for r in range(d):
            h = h - sx(fs, rho, r) * u[r]
    for a in range(m):
        if euler_operator(h, a, 2 * mo + 2) != qs[a]:
            raise InternalError("potential does not reproduce the one-form")
    return h


# ---------------------------------------------------------------------------
# canonicalization


def homotopy_one_form(A: AdmissibleBracket) -> list:
    """One-form whose skew-symmetrized linearization reproduces ``{Q, Q}``."""
    fs, m, d = A.fieldset, A.m, A.d
    q = [ZERO] * m
    for (a, r, p), v in A.omega.items():
        q[a] = q[a] + sx(fs, r, p) * scale_homotopy(v, 1)
    for (a, r, c, p, pp), v in A.gamma.items():
        q[a] = q[a] + sxx(fs, c, p, pp) * field_var(fs, r) * scale_homotopy(v, 2)
    return q


def canonicalize_thm21(A: AdmissibleBracket, verify: bool = True) -> HydroTransform:
    """Shift ``Q -> Q + shift(S_X)`` that makes ``{Q, Q}`` vanish."""
    fs, m, d = A.fieldset, A.m, A.d
    mo = fs.max_order
    B = A.to_local()
    skew = skew_check(B)
    if not skew.passed:
        raise RefusalError("bracket is not skew-symmetric: "
                           + "; ".join(skew.residual_text(fs.format)))
    jac = jacobi_check(B)
    if not jac.passed:
        raise RefusalError("bracket violates the Jacobi identity: "
                           + "; ".join(jac.residual_text(fs.format)[:6]))
    q = homotopy_one_form(A)
    gauge = ZERO
    for rho in range(m):
        M = {}
        for (a, r, c, p, pp), v in A.gamma.items():
            if r == rho:
                key = (pp, p, a, c)
                M[key] = M.get(key, ZERO) + scale_homotopy(v, 2)
        M = {k: v for k, v in M.items() if not v.is_zero()}
        if M:
            gauge = gauge + field_var(fs, rho) * lemma22_potential(M, fs, m)
    qt = [q[a] - euler_operator(gauge, a, 2 * mo + 2) for a in range(m)]
    for a in range(m):
        if any(v.order == 0 for v in qt[a].variables()):
            raise InternalError("phase-free part still depends on undifferentiated phases")
    T = HydroTransform.build(fs, shifts={m + a: -qt[a] for a in range(m)})
    if verify:
        Bn = transform_bracket(B, T)
        for a in range(m):
            for b in range(m):
                if Bn.entry(m + a, m + b):
                    raise InternalError("canonicalizing shift left a nonzero {Q,Q}")
    return T


def canonical_pair(m: int, d: int, extra: Sequence[Field] = ()) -> LocalBracket:
    fs = phase_fieldset(m, d, extra=extra)
    zero = (0,) * d
    coeffs = {}
    for a in range(m):
        coeffs[(a, m + a, zero)] = 1
        coeffs[(m + a, a, zero)] = -1
    return LocalBracket(fs, coeffs)


# ---------------------------------------------------------------------------
# straightening of the phase frame


def straighten_frame(omega: Sequence[Sequence[DiffPoly]], fs: FieldSet, m: int,
                     density_fields: Sequence[int], candidates: Mapping | None = None):
    """Coordinates ``Qhat`` and ``Nhat`` straightening ``xi_a = omega[a] . d/dU``.

    Without candidates, ``omega`` must be constant with an invertible leading
    ``m x m`` block; the result is ``(Qhat, Nhat)``.  With candidates
    ``{"Q": [...], "N": [...]}`` the defining identities are verified and a
    report is returned.
    """
    zero = (0,) * fs.dim
    uvars = [JetVar.of(i, zero) for i in density_fields]
    n = len(uvars)
    omega = [[_poly(w) for w in row] for row in omega]
    if len(omega) != m or any(len(row) != n for row in omega):
        raise PreconditionError("omega has the wrong shape")
    comm = []
    for a in range(m):
        for b in range(a + 1, m):
            for g in range(n):
                c = ZERO
                for r in range(n):
                    c = c + omega[a][r] * omega[b][g].partial(uvars[r])
                    c = c - omega[b][r] * omega[a][g].partial(uvars[r])
                if not c.is_zero():
                    comm.append((f"[xi{a + 1},xi{b + 1}]^{g + 1}", c))
    if comm:
        if candidates is not None:
            return CheckReport("straighten_frame", tuple(comm))
        raise PreconditionError("frame vector fields do not commute")
    if candidates is not None:
        items = []
        for bi, Qb in enumerate(candidates.get("Q", ())):
            for a in range(m):
                val = sum((omega[a][g] * _poly(Qb).partial(uvars[g]) for g in range(n)), ZERO)
                if val != (1 if a == bi else 0):
                    items.append((f"xi{a + 1}(Q{bi + 1})", val - (1 if a == bi else 0)))
        for li, Nl in enumerate(candidates.get("N", ())):
            for a in range(m):
                val = sum((omega[a][g] * _poly(Nl).partial(uvars[g]) for g in range(n)), ZERO)
                if not val.is_zero():
                    items.append((f"xi{a + 1}(N{li + 1})", val))
        return CheckReport("straighten_frame", tuple(items))
    if any(not w.is_constant() for row in omega for w in row):
        raise RefusalError("omega is not constant; supply candidate coordinates")
    W = [[omega[a][g].constant_term() for g in range(n)] for a in range(m)]
    if linalg.matrix_rank(W) < m:
        raise PreconditionError("omega has rank below the number of phases")
    lead = [row[:m] for row in W]
    if linalg.det(lead) == 0:
        raise RefusalError("leading block of omega is singular; supply candidate coordinates")
    inv = linalg.inverse(lead)
    Q = []
    for b in range(m):
        Q.append(sum((DiffPoly.var(uvars[g]) * inv[g][b] for g in range(m)), ZERO))
    rows = [{g: W[a][g] for g in range(n) if W[a][g]} for a in range(m)]
    N = []
    for vec in linalg.nullspace(rows, n):
        N.append(sum((DiffPoly.var(uvars[g]) * c for g, c in sorted(vec.items())), ZERO))
    return Q, N
