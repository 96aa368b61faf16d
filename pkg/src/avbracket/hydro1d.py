"""One-dimensional brackets ``g(U) delta' + b(U) U_X delta`` and their geometry.

For a non-degenerate ``g`` such a bracket is Poisson exactly when ``g`` is
symmetric, the connection ``Gamma[nu][mu][gamma] = -G[mu][lam] b[lam][nu][gamma]``
(``G`` the inverse of ``g``) is torsion free and compatible with ``g``, and
its curvature vanishes.  Everything here is exact; inverse metrics must be
polynomial and are verified before use.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import DegenerateInputError, PreconditionError
from .jetcalc import ZERO, DiffPoly, Field, FieldSet, JetVar, det_poly
from .locbracket import LocalBracket, annihilator_check, hamiltonian_flow
from .report import CheckReport
from .canonform.transform import HydroTransform, transform_bracket


def dn_fieldset(n: int, max_order: int = 6) -> FieldSet:
    names = ["U"] if n == 1 else [f"U{i + 1}" for i in range(n)]
    return FieldSet(1, tuple(Field(x) for x in names), max_order)


def _u(fs: FieldSet, i: int) -> DiffPoly:
    return DiffPoly.var(JetVar.of(i, (0,)))


def _ux(fs: FieldSet, i: int) -> DiffPoly:
    return DiffPoly.var(JetVar.of(i, (1,)))


def _dU(p: DiffPoly, i: int) -> DiffPoly:
    return p.partial(JetVar.of(i, (0,)))


def _poly(v) -> DiffPoly:
    return v if isinstance(v, DiffPoly) else DiffPoly.const(v)


@dataclass(frozen=True)
class DN1DBracket:
    """``g[l][n]`` and ``b[(l, n, c)]`` as polynomials in the undifferentiated fields."""

    fieldset: FieldSet
    g: tuple
    b: Mapping = field(default_factory=dict)

    def __post_init__(self):
        n = self.fieldset.size
        g = tuple(tuple(_poly(c) for c in row) for row in self.g)
        if len(g) != n or any(len(row) != n for row in g):
            raise PreconditionError("metric must be a square matrix matching the fields")
        object.__setattr__(self, "g", g)
        b = {}
        for key, v in dict(self.b).items():
            if len(key) != 3 or any(not 0 <= k < n for k in key):
                raise PreconditionError(f"bad connection index {key}")
            v = _poly(v)
            if not v.is_zero():
                b[tuple(key)] = v
        object.__setattr__(self, "b", b)
        for row in g:
            for c in row:
                if any(v.order for v in c.variables()):
                    raise PreconditionError("metric entries must depend on undifferentiated fields only")

    @classmethod
    def build(cls, g, b=None) -> "DN1DBracket":
        return cls(dn_fieldset(len(g)), tuple(tuple(r) for r in g), dict(b or {}))

    @classmethod
    def constant(cls, signs: Sequence[int]) -> "DN1DBracket":
        n = len(signs)
        return cls.build([[signs[i] if i == j else 0 for j in range(n)] for i in range(n)])

    @property
    def n(self) -> int:
        return self.fieldset.size

    def bcoef(self, l, nu, c) -> DiffPoly:
        return self.b.get((l, nu, c), ZERO)

    def to_local(self) -> LocalBracket:
        fs = self.fieldset
        coeffs = {}
        for l in range(self.n):
            for nu in range(self.n):
                if not self.g[l][nu].is_zero():
                    coeffs[(l, nu, (1,))] = self.g[l][nu]
                low = sum((self.bcoef(l, nu, c) * _ux(fs, c) for c in range(self.n)), ZERO)
                if not low.is_zero():
                    coeffs[(l, nu, (0,))] = low
        return LocalBracket(fs, coeffs)

    @classmethod
    def from_local(cls, B: LocalBracket) -> "DN1DBracket":
        if B.dim != 1:
            raise PreconditionError("hydrodynamic brackets here are one-dimensional")
        n = B.fieldset.size
        g = [[ZERO] * n for _ in range(n)]
        b = {}
        for (l, nu, k), c in B.coeffs.items():
            if k == (1,):
                if any(v.order for v in c.variables()):
                    raise PreconditionError("leading coefficient depends on derivatives")
                g[l][nu] = c
            elif k == (0,):
                rebuilt = ZERO
                for cc in range(n):
                    coef = c.partial(JetVar.of(cc, (1,)))
                    if any(v.order for v in coef.variables()):
                        raise PreconditionError("delta coefficient is not linear in U_X")
                    if not coef.is_zero():
                        b[(l, nu, cc)] = coef
                        rebuilt = rebuilt + coef * DiffPoly.var(JetVar.of(cc, (1,)))
                if rebuilt != c:
                    raise PreconditionError("delta coefficient is not linear in U_X")
            else:
                raise PreconditionError("bracket has higher derivatives of delta")
        return cls(B.fieldset, tuple(tuple(r) for r in g), b)


def _matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum((a[i][t] * b[t][j] for t in range(k)), ZERO) for j in range(m)] for i in range(n)]


def _adjugate(mat):
    n = len(mat)
    if n == 1:
        return [[DiffPoly.const(1)]]
    adj = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[mat[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            val = det_poly(minor)
            adj[j][i] = val if (i + j) % 2 == 0 else -val
    return adj


def verify_inverse_metric(g, ginv) -> None:
    n = len(g)
    prod = _matmul([list(r) for r in g], [[_poly(c) for c in r] for r in ginv])
    for i in range(n):
        for j in range(n):
            if prod[i][j] != DiffPoly.const(1 if i == j else 0):
                raise PreconditionError("supplied inverse metric does not invert the metric")


def inverse_metric(B: DN1DBracket, g_inverse=None) -> list:
    """Polynomial inverse of ``g``: the supplied one, or the adjugate when ``det g`` is constant."""
    det = det_poly([list(r) for r in B.g])
    if det.is_zero():
        raise DegenerateInputError("degenerate metric: det g vanishes identically")
    if g_inverse is not None:
        inv = [[_poly(c) for c in r] for r in g_inverse]
    elif det.is_constant():
        inv = [[c / det.constant_term() for c in r] for r in _adjugate([list(r) for r in B.g])]
    else:
        raise PreconditionError("metric determinant is not constant; supply a polynomial inverse")
    verify_inverse_metric(B.g, inv)
    return inv


def christoffel(B: DN1DBracket, g_inverse=None) -> dict:
    """``Gamma[(nu, mu, c)] = -sum_l G[mu][l] b[(l, nu, c)]``."""
    G = inverse_metric(B, g_inverse)
    n = B.n
    out = {}
    for nu, mu, c in itertools.product(range(n), repeat=3):
        val = ZERO
        for l in range(n):
            bb = B.bcoef(l, nu, c)
            if not bb.is_zero() and not G[mu][l].is_zero():
                val = val - G[mu][l] * bb
        if not val.is_zero():
            out[(nu, mu, c)] = val
    return out


def christoffel_cleared(B: DN1DBracket) -> tuple:
    """``(det g, det g * Gamma)`` using the adjugate; valid for any non-degenerate ``g``."""
    det = det_poly([list(r) for r in B.g])
    if det.is_zero():
        raise DegenerateInputError("degenerate metric: det g vanishes identically")
    adj = _adjugate([list(r) for r in B.g])
    n = B.n
    out = {}
    for nu, mu, c in itertools.product(range(n), repeat=3):
        val = sum((-adj[mu][l] * B.bcoef(l, nu, c) for l in range(n)), ZERO)
        if not val.is_zero():
            out[(nu, mu, c)] = val
    return det, out


def riemann(gamma: Mapping, n: int) -> dict:
    """``R[(a, b, c, d)] = d_c Gamma^a_{bd} - d_d Gamma^a_{bc} + Gamma^a_{ec} Gamma^e_{bd} - Gamma^a_{ed} Gamma^e_{bc}``."""
    gm = lambda a, b, c: gamma.get((a, b, c), ZERO)
    out = {}
    for a, b in itertools.product(range(n), repeat=2):
        for c in range(n):
            for d in range(c + 1, n):
                val = _dU(gm(a, b, d), c) - _dU(gm(a, b, c), d)
                for e in range(n):
                    val = val + gm(a, e, c) * gm(e, b, d) - gm(a, e, d) * gm(e, b, c)
                if not val.is_zero():
                    out[(a, b, c, d)] = val
    return out


@dataclass(frozen=True)
class CurvatureReport:
    christoffel: dict
    riemann: dict
    symmetry: tuple
    torsion: tuple
    compatibility: tuple

    @property
    def flat(self) -> bool:
        return not self.riemann

    @property
    def poisson(self) -> bool:
        return self.flat and not self.symmetry and not self.torsion and not self.compatibility

    def lines(self, fs: FieldSet) -> list:
        out = [f"flat: {self.flat}"]
        for (a, b, c, d), v in sorted(self.riemann.items()):
            out.append(f"R[{a + 1},{b + 1},{c + 1},{d + 1}] = {fs.format(v)}")
        for label, v in self.symmetry + self.torsion + self.compatibility:
            out.append(f"{label} = {fs.format(v)}")
        return out


def flatness_check(B: DN1DBracket, g_inverse=None) -> CurvatureReport:
    n = B.n
    gamma = christoffel(B, g_inverse)
    sym, tors, comp = [], [], []
    for l in range(n):
        for nu in range(l + 1, n):
            diff = B.g[l][nu] - B.g[nu][l]
            if not diff.is_zero():
                sym.append((f"g[{l + 1},{nu + 1}] - g[{nu + 1},{l + 1}]", diff))
    for nu in range(n):
        for mu in range(n):
            for c in range(mu + 1, n):
                diff = gamma.get((nu, mu, c), ZERO) - gamma.get((nu, c, mu), ZERO)
                if not diff.is_zero():
                    tors.append((f"torsion[{nu + 1};{mu + 1},{c + 1}]", diff))
    for l in range(n):
        for nu in range(n):
            for c in range(n):
                diff = _dU(B.g[l][nu], c) - B.bcoef(l, nu, c) - B.bcoef(nu, l, c)
                if not diff.is_zero():
                    comp.append((f"nabla_{c + 1} g[{l + 1},{nu + 1}]", diff))
    return CurvatureReport(gamma, riemann(gamma, n), tuple(sym), tuple(tors), tuple(comp))


def constant_form_verify(B: DN1DBracket, coords: Sequence[DiffPoly] | None = None,
                         inverse: Sequence[DiffPoly] | None = None) -> CheckReport:
    """Whether new coordinates bring the bracket to ``eps[nu] delta[nu][mu] delta'``."""
    fs = B.fieldset
    if coords is None:
        T = HydroTransform.identity(fs)
    else:
        if len(coords) != B.n:
            raise PreconditionError("one flat coordinate per field is required")
        T = HydroTransform.build(fs, remaps=dict(enumerate(coords)), inverse=inverse)
    Bn = transform_bracket(B.to_local(), T)
    items = []
    signs = []
    for l in range(B.n):
        for nu in range(B.n):
            entry = Bn.entry(l, nu)
            for k, c in entry.items():
                if k == (1,) and l == nu and c.is_constant() and abs(c.constant_term()) == 1:
                    continue
                items.append((f"{{{fs.names[l]},{fs.names[nu]}}}[{k[0]}]", c))
        lead = Bn.coefficient(l, l, (1,))
        signs.append(int(lead.constant_term()) if lead.is_constant() and lead else 0)
        if lead.is_zero():
            items.append((f"{{{fs.names[l]},{fs.names[l]}}}[1] missing", lead))
    return CheckReport("constant_form", tuple(items), {"signs": signs})


def momentum_annihilator_check(B: DN1DBracket, momentum: DiffPoly | None = None) -> CheckReport:
    """Casimir property of each field and the translation flow of the momentum."""
    fs = B.fieldset
    report = constant_form_verify(B)
    if not report.passed:
        raise PreconditionError("bracket is not in constant form")
    signs = report.details["signs"]
    L = B.to_local()
    items = []
    for i in range(B.n):
        sub = annihilator_check(L, _u(fs, i))
        items.extend((f"annihilator {fs.names[i]}: {lab}", v) for lab, v in sub.residual)
    if momentum is None:
        momentum = sum((_u(fs, i) * _u(fs, i) * Fraction(signs[i], 2) for i in range(B.n)), ZERO)
    flow = hamiltonian_flow(L, momentum)
    for i in range(B.n):
        diff = flow[i] - _ux(fs, i)
        if not diff.is_zero():
            items.append((f"momentum flow of {fs.names[i]} minus {fs.names[i]}_x", diff))
    return CheckReport("momentum_annihilator", tuple(items), {"signs": signs})


# ---------------------------------------------------------------------------
# instance generators


def levi_civita_bracket(g, g_inverse) -> DN1DBracket:
    """Bracket whose connection is the Levi-Civita connection of ``g``."""
    n = len(g)
    fs = dn_fieldset(n)
    g = [[_poly(c) for c in r] for r in g]
    G = [[_poly(c) for c in r] for r in g_inverse]
    verify_inverse_metric(g, G)
    gamma = {}
    for nu, mu, c in itertools.product(range(n), repeat=3):
        val = ZERO
        for k in range(n):
            if g[nu][k].is_zero():
                continue
            val = val + g[nu][k] * (_dU(G[k][c], mu) + _dU(G[k][mu], c) - _dU(G[mu][c], k)) / 2
        gamma[(nu, mu, c)] = val
    b = {}
    for l, nu, c in itertools.product(range(n), repeat=3):
        val = sum((-g[l][mu] * gamma[(nu, mu, c)] for mu in range(n)), ZERO)
        if not val.is_zero():
            b[(l, nu, c)] = val
    return DN1DBracket(fs, tuple(tuple(r) for r in g), b)


def _unitriangular(n: int, rng: random.Random, degree: int):
    fs = dn_fieldset(n)
    L = [[DiffPoly.const(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            val = ZERO
            for k in range(n):
                for e in range(1, degree + 1):
                    c = rng.randint(-2, 2)
                    if c:
                        val = val + _u(fs, k) ** e * c
            L[i][j] = val + rng.randint(-1, 1)
    return L


def _lower_inverse(L):
    n = len(L)
    inv = [[DiffPoly.const(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            inv[i][j] = -sum((L[i][k] * inv[k][j] for k in range(j, i)), ZERO)
    return inv


def _transpose(a):
    return [list(r) for r in zip(*a)]


def random_curved_metric(n: int, seed: int, degree: int = 1):
    """``g = L diag(eps) L^T`` with ``L`` unitriangular: determinant ``+-1`` and polynomial inverse."""
    rng = random.Random(seed)
    L = _unitriangular(n, rng, degree)
    eps = [rng.choice((1, -1)) for _ in range(n)]
    E = [[DiffPoly.const(eps[i] if i == j else 0) for j in range(n)] for i in range(n)]
    Li = _lower_inverse(L)
    g = _matmul(_matmul(L, E), _transpose(L))
    G = _matmul(_matmul(_transpose(Li), E), Li)
    return g, G


def random_flat_bracket(n: int, seed: int) -> tuple:
    """Constant bracket pulled back through a random triangular polynomial map.

    Returns the bracket in the new coordinates together with the flat
    coordinates (as polynomials in the new fields) that undo the map.
    """
    rng = random.Random(seed)
    fs = dn_fieldset(n)
    eps = [rng.choice((1, -1)) for _ in range(n)]
    base = DN1DBracket.constant(eps)
    shifts = {}
    for i in range(1, n):
        val = ZERO
        for k in range(i):
            for e in range(1, 3):
                c = rng.randint(-2, 2)
                if c:
                    val = val + _u(fs, k) ** e * c
        shifts[i] = val
    images = [_u(fs, i) + shifts.get(i, ZERO) for i in range(n)]
    inverse = [_u(fs, i) for i in range(n)]
    for i in range(1, n):
        sub = {JetVar.of(k, (0,)): inverse[k] for k in range(i)}
        inverse[i] = _u(fs, i) - shifts[i].subs(sub)
    T = HydroTransform.build(fs, remaps=dict(enumerate(images)), inverse=inverse)
    pulled = DN1DBracket.from_local(transform_bracket(base.to_local(), T))
    return pulled, inverse
