"""Space-time action densities for canonical phase brackets.

For ``{S, Q} = delta`` with vanishing ``{S, S}`` and ``{Q, Q}``, the flow of a
Hamiltonian density ``h(S_X, Q)`` is the Euler-Lagrange system of
``Q S_T - h`` on space-time.  When ``h`` is quadratic in ``Q`` with a constant
invertible Hessian the momenta can be eliminated, leaving a density in the
phases alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import linalg
from ..errors import PreconditionError
from ..jetcalc import ZERO, DiffPoly, FieldSet, JetVar
from ..locbracket import LocalBracket
from .transform import field_var


@dataclass(frozen=True)
class LagrangianResult:
    fieldset: FieldSet
    density: DiffPoly
    reduced: DiffPoly | None
    reduced_fieldset: FieldSet | None
    note: str

    def format(self) -> str:
        return self.fieldset.format(self.density)

    def format_reduced(self) -> str | None:
        if self.reduced is None:
            return None
        return self.reduced_fieldset.format(self.reduced)


def spacetime_fieldset(fs: FieldSet) -> FieldSet:
    axes = tuple(f"x{k + 1}" for k in range(fs.dim)) if fs.dim > 1 else ("x",)
    return FieldSet(fs.dim + 1, fs.fields, fs.max_order, axes + ("t",))


def lift_to_spacetime(p: DiffPoly) -> DiffPoly:
    """Reinterpret spatial jets as jets on space-time with no time derivative."""
    return DiffPoly({tuple((JetVar.of(v.field, v.deriv + (0,)), e) for v, e in mono): c
                     for mono, c in p.items()})


def _check_canonical(B: LocalBracket, m: int) -> None:
    d = B.dim
    zero = (0,) * d
    for i in range(2 * m):
        for j in range(2 * m):
            want = {}
            if i < m and j == i + m:
                want = {zero: DiffPoly.const(1)}
            elif i >= m and j == i - m:
                want = {zero: DiffPoly.const(-1)}
            if B.entry(i, j) != want:
                raise PreconditionError("bracket is not in the canonical phase form")


def lagrangian_emit(B: LocalBracket, hamiltonian: DiffPoly) -> LagrangianResult:
    fs = B.fieldset
    phases = fs.by_role("phase")
    m = len(phases)
    if not m or phases != list(range(m)) or fs.by_role("density") != list(range(m, 2 * m)):
        raise PreconditionError("expected phases followed by their conjugate densities")
    _check_canonical(B, m)
    st = spacetime_fieldset(fs)
    d = fs.dim
    time = tuple(0 for _ in range(d)) + (1,)
    rest = (0,) * (d + 1)
    h = lift_to_spacetime(hamiltonian)
    kinetic = ZERO
    for a in range(m):
        kinetic = kinetic + DiffPoly.var(JetVar.of(m + a, rest)) * DiffPoly.var(JetVar.of(a, time))
    density = kinetic - h
    reduced, note = _eliminate(h, m, st)
    return LagrangianResult(st, density, reduced,
                            None if reduced is None else st, note)


def _eliminate(h: DiffPoly, m: int, st: FieldSet):
    d1 = st.dim
    rest = (0,) * d1
    qvars = [JetVar.of(m + a, rest) for a in range(m)]
    for v in h.variables():
        if v.field >= m and v.order > 0:
            return None, "hamiltonian depends on derivatives of the densities"
    grads = [h.partial(q) for q in qvars]
    hess = [[g.partial(q) for q in qvars] for g in grads]
    if any(not c.is_constant() for row in hess for c in row):
        return None, "hamiltonian is not quadratic in the densities"
    H2 = [[c.constant_term() for c in row] for row in hess]
    if linalg.det(H2) == 0:
        return None, "density Hessian of the hamiltonian is singular"
    inv = linalg.inverse(H2)
    time = tuple(0 for _ in range(d1 - 1)) + (1,)
    offsets = [g - sum((DiffPoly.var(q) * H2[a][b] for b, q in enumerate(qvars)), ZERO)
               for a, g in enumerate(grads)]
    solution = {}
    for a in range(m):
        expr = ZERO
        for b in range(m):
            if inv[a][b]:
                expr = expr + (DiffPoly.var(JetVar.of(b, time)) - offsets[b]) * inv[a][b]
        solution[qvars[a]] = expr
    kinetic = ZERO
    for a in range(m):
        kinetic = kinetic + solution[qvars[a]] * DiffPoly.var(JetVar.of(a, time))
    return kinetic - h.subs(solution), "densities eliminated through S_T = dh/dQ"
