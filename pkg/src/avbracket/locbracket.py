"""Local brackets on a jet space and their exact symbolic checks.

A local bracket is the table of coefficients ``B[i, j, l]`` in

    {u^i(x), u^j(y)} = sum_l B[i, j, l](x) * D_x^l delta(x - y).

Distribution identities are handled through their action on test functions:
an expression in deltas is identified with the integrand it produces when
paired with test functions ``phi(x)``, ``psi(y)``, ``chi(z)``.  Integrating by
parts until ``phi`` carries no derivatives gives a unique normal form, so two
expressions agree exactly when their normal forms agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import PreconditionError
from .jetcalc import (ZERO, DiffPoly, FieldSet, _d_axis, apply_multi, euler_operator,
                      multi_add, multi_binomial, multi_sub, sub_multis)
from .report import CheckReport

POINTS = ("x", "y", "z")


# ---------------------------------------------------------------------------
# integrands over test functions
#
# A load maps keys ``(da, db, dc)`` to coefficients; slot entries are
# multi-indices or None when that test function is absent from the term.


def _load_add(acc: dict, key, value: DiffPoly):
    if value.is_zero():
        return
    cur = acc.get(key)
    new = value if cur is None else cur + value
    if new.is_zero():
        acc.pop(key, None)
    else:
        acc[key] = new


def _load_d(load: dict, axis: int, max_order: int, skip_slot: int | None = None) -> dict:
    out: dict = {}
    for key, coeff in load.items():
        _load_add(out, key, _d_axis(coeff, axis, max_order))
        for s, multi in enumerate(key):
            if multi is None or s == skip_slot:
                continue
            bumped = list(multi)
            bumped[axis] += 1
            nk = key[:s] + (tuple(bumped),) + key[s + 1:]
            _load_add(out, nk, coeff)
    return out


def _load_apply(load: dict, multi: Sequence[int], max_order: int, skip_slot=None) -> dict:
    for axis, n in enumerate(multi):
        for _ in range(n):
            load = _load_d(load, axis, max_order, skip_slot)
    return load


def _load_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            key = tuple(x if x is not None else y for x, y in zip(ka, kb))
            _load_add(out, key, ca * cb)
    return out


def _normalize(load: dict, max_order: int) -> dict:
    """Move every derivative off the first test function by parts."""
    out: dict = {}
    for key, coeff in load.items():
        da = key[0]
        if not any(da):
            _load_add(out, key, coeff)
            continue
        stripped = {(tuple(0 for _ in da),) + key[1:]: coeff}
        moved = _load_apply(stripped, da, max_order, skip_slot=0)
        sign = -1 if sum(da) % 2 else 1
        for k, c in moved.items():
            _load_add(out, k, c * sign)
    return out


@dataclass(frozen=True)
class DeltaExpr:
    """Normal form ``sum C_key(x) * derivatives of deltas based at x``.

    Two-point keys are ``(b,)`` standing for ``C(x) D_x^b delta(x-y)``.
    Three-point keys are ``(b, c)`` standing for
    ``C(x) D_x^b delta(x-y) D_x^c delta(x-z)``.
    """

    dim: int
    terms: Mapping

    def __post_init__(self):
        clean = {tuple(tuple(m) for m in k): v for k, v in self.terms.items() if not v.is_zero()}
        object.__setattr__(self, "terms", MappingProxyType(dict(sorted(clean.items()))))

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, DeltaExpr):
            return NotImplemented
        return dict(self.terms) == dict(other.terms)

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: "DeltaExpr") -> "DeltaExpr":
        acc = dict(self.terms)
        for k, v in other.terms.items():
            acc[k] = acc.get(k, ZERO) + v
        return DeltaExpr(self.dim, acc)

    def __neg__(self):
        return DeltaExpr(self.dim, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def coefficient(self, *key) -> DiffPoly:
        return self.terms.get(tuple(tuple(k) for k in key), ZERO)

    def swap(self, max_order: int = 6) -> "DeltaExpr":
        """Exchange the roles of ``x`` and ``y`` in a two-point expression."""
        raws = [RawTerm(c, "y", (("y", "x", k[0]),)) for k, c in self.terms.items()]
        return delta_normalize(raws, self.dim, max_order)

    def format(self, fieldset: FieldSet) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for key, c in self.terms.items():
            ds = " ".join(_delta_label(k, pt) for k, pt in zip(key, ("x-y", "x-z")))
            parts.append(f"({fieldset.format(c)}) {ds}")
        return " + ".join(parts)


def _delta_label(multi, arg) -> str:
    if not any(multi):
        return f"delta({arg})"
    sub = "".join(f"x{k + 1}" * n for k, n in enumerate(multi))
    return f"delta_{sub}({arg})"


@dataclass(frozen=True)
class RawTerm:
    """``coeff(base) * prod delta^{(multi)}(p - q)`` over factors ``(p, q, multi)``.

    The derivative of each delta factor is taken in its first argument.  The
    factors must form a tree on the points involved.
    """

    coeff: DiffPoly
    base: str
    factors: tuple


def delta_normalize(terms: Iterable[RawTerm], dim: int, max_order: int = 6) -> DeltaExpr:
    acc: dict = {}
    three = False
    for t in terms:
        pts = {t.base} | {p for f in t.factors for p in f[:2]}
        three = three or "z" in pts
    for t in terms:
        for key, c in _raw_to_load(t, dim, max_order, three).items():
            _load_add(acc, key, c)
    out = {}
    for key, c in _normalize(acc, max_order).items():
        out[tuple(k for k in key[1:] if k is not None)] = c
    return DeltaExpr(dim, out)


def _raw_to_load(t: RawTerm, dim: int, max_order: int, three: bool) -> dict:
    zero = (0,) * dim
    slots = 3 if three else 2
    loads = {}
    for s in range(slots):
        key = tuple(zero if i == s else None for i in range(slots))
        loads[POINTS[s]] = {key: DiffPoly.const(1)}
    loads[t.base] = {k: v * t.coeff for k, v in loads[t.base].items()}
    edges = [tuple(f) for f in t.factors]
    alive = set(POINTS[:slots])
    while len(alive) > 1:
        leaf = None
        for pt in sorted(alive):
            if pt == t.base:
                continue
            touching = [e for e in edges if pt in e[:2]]
            if len(touching) == 1:
                leaf = (pt, touching[0])
                break
        if leaf is None:
            raise PreconditionError("delta factors do not form a tree on the points")
        pt, edge = leaf
        p, q, multi = edge
        other = q if p == pt else p
        # integrate the leaf point against a delta based at its neighbour
        sign = -1 if (p == pt and sum(multi) % 2) else 1
        moved = _load_apply(loads[pt], multi, max_order)
        if sign < 0:
            moved = {k: -v for k, v in moved.items()}
        loads[other] = _load_mul(loads[other], moved)
        edges.remove(edge)
        alive.discard(pt)
    (root,) = alive
    return loads[root]


# ---------------------------------------------------------------------------
# local brackets


class LocalBracket:
    """Immutable table of bracket coefficients over a field set."""

    __slots__ = ("fieldset", "_coeffs")

    def __init__(self, fieldset: FieldSet, coeffs: Mapping):
        self.fieldset = fieldset
        clean: dict = {}
        for (i, j, l), c in coeffs.items():
            i, j = fieldset.index(i), fieldset.index(j)
            l = tuple(l)
            if len(l) != fieldset.dim or any(k < 0 for k in l):
                raise PreconditionError(f"bad derivative multi-index {l}")
            if not isinstance(c, DiffPoly):
                c = DiffPoly.const(c)
            for v in c.variables():
                if v.field >= fieldset.size:
                    raise PreconditionError("coefficient uses an unknown field")
            key = (i, j, l)
            total = clean.get(key, ZERO) + c
            if total.is_zero():
                clean.pop(key, None)
            else:
                clean[key] = total
        self._coeffs = MappingProxyType(dict(sorted(clean.items())))

    @property
    def coeffs(self) -> Mapping:
        return self._coeffs

    @property
    def dim(self) -> int:
        return self.fieldset.dim

    @property
    def max_order(self) -> int:
        return self.fieldset.max_order

    def entry(self, i, j) -> dict:
        i, j = self.fieldset.index(i), self.fieldset.index(j)
        return {l: c for (a, b, l), c in self._coeffs.items() if a == i and b == j}

    def coefficient(self, i, j, l) -> DiffPoly:
        return self._coeffs.get((self.fieldset.index(i), self.fieldset.index(j), tuple(l)), ZERO)

    def as_delta(self, i, j) -> DeltaExpr:
        return DeltaExpr(self.dim, {(l,): c for l, c in self.entry(i, j).items()})

    def __eq__(self, other):
        if not isinstance(other, LocalBracket):
            return NotImplemented
        return self.fieldset == other.fieldset and dict(self._coeffs) == dict(other._coeffs)

    def __hash__(self):
        return hash(frozenset(self._coeffs.items()))

    def __add__(self, other: "LocalBracket") -> "LocalBracket":
        acc = dict(self._coeffs)
        for k, v in other.coeffs.items():
            acc[k] = acc.get(k, ZERO) + v
        return LocalBracket(self.fieldset, acc)

    def __neg__(self):
        return LocalBracket(self.fieldset, {k: -v for k, v in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self) -> bool:
        return not self._coeffs

    def lines(self) -> list:
        fs = self.fieldset
        out = []
        for (i, j, l), c in self._coeffs.items():
            out.append(f"{{{fs.names[i]},{fs.names[j]}}} d{l}: {fs.format(c)}")
        return out

    def __repr__(self):
        return "LocalBracket(" + "; ".join(self.lines()) + ")"


def formal_adjoint(B: LocalBracket) -> LocalBracket:
    """Coefficients of the adjoint operator, with the field indices exchanged."""
    acc: dict = {}
    mo = B.max_order
    for (i, j, l), c in B.coeffs.items():
        sign = -1 if sum(l) % 2 else 1
        for r in sub_multis(l):
            term = apply_multi(c, multi_sub(l, r), mo) * (sign * multi_binomial(l, r))
            key = (j, i, tuple(r))
            acc[key] = acc.get(key, ZERO) + term
    return LocalBracket(B.fieldset, acc)


def _residual_label(fs: FieldSet, i, j, l) -> str:
    return f"{{{fs.names[i]},{fs.names[j]}}}[{','.join(map(str, l))}]"


def skew_check(B: LocalBracket) -> CheckReport:
    residual = (-B) - formal_adjoint(B)
    fs = B.fieldset
    items = tuple((_residual_label(fs, i, j, l), c) for (i, j, l), c in residual.coeffs.items())
    return CheckReport("skew", items)


def _triple_terms(B: LocalBracket, a: int, b: int, c: int) -> list:
    """Integrand of ``{{F_a, F_b}, F_c}`` for single-component test covectors.

    Returns ``(coeff, l, m)`` meaning ``coeff * T_a * D^l T_b * D^m T_c``.
    """
    mo = B.max_order
    out = []
    for l, bab in B.entry(a, b).items():
        for v in bab.variables():
            dB = bab.partial(v)
            t = v.deriv
            for r, bsc in B.entry(v.field, c).items():
                for tp in sub_multis(t):
                    coeff = dB * apply_multi(bsc, tp, mo) * multi_binomial(t, tp)
                    if not coeff.is_zero():
                        out.append((coeff, l, multi_add(r, multi_sub(t, tp))))
    return out


def jacobi_integrand(B: LocalBracket, i: int, j: int, k: int) -> DeltaExpr:
    zero = (0,) * B.dim
    load: dict = {}
    for coeff, l, m in _triple_terms(B, i, j, k):
        _load_add(load, (zero, l, m), coeff)
    for coeff, l, m in _triple_terms(B, j, k, i):
        _load_add(load, (m, zero, l), coeff)
    for coeff, l, m in _triple_terms(B, k, i, j):
        _load_add(load, (l, m, zero), coeff)
    normal = _normalize(load, B.max_order)
    return DeltaExpr(B.dim, {key[1:]: c for key, c in normal.items()})


def jacobi_check(B: LocalBracket, triples: Iterable | None = None) -> CheckReport:
    """Exact cyclic identity for all (or the given) component triples."""
    skew = skew_check(B)
    if not skew.passed:
        raise PreconditionError("Jacobi check requires a skew-symmetric bracket")
    n = B.fieldset.size
    names = B.fieldset.names
    if triples is None:
        triples = [(i, j, k) for i in range(n) for j in range(n) for k in range(n)]
    items = []
    for i, j, k in triples:
        expr = jacobi_integrand(B, i, j, k)
        for key, c in expr.terms.items():
            label = f"({names[i]},{names[j]},{names[k]})[{key[0]},{key[1]}]"
            items.append((label, c))
    return CheckReport("jacobi", tuple(items))


def density_bracket(B: LocalBracket, p: DiffPoly, r: DiffPoly) -> DeltaExpr:
    """``{p(x), r(y)}`` for differential polynomials ``p`` and ``r``."""
    mo = B.max_order
    zero = (0,) * B.dim
    load: dict = {}
    pvars = sorted(p.variables())
    rvars = sorted(r.variables())
    for vs in pvars:
        left = {(zero, None): p.partial(vs)}
        left = _load_apply(left, vs.deriv, mo)
        if vs.order % 2:
            left = {kk: -vv for kk, vv in left.items()}
        for vt in rvars:
            right0 = {(None, zero): r.partial(vt)}
            for l, coeff in B.entry(vs.field, vt.field).items():
                right = _load_apply(right0, multi_add(vt.deriv, l), mo)
                if vt.order % 2:
                    right = {kk: -vv for kk, vv in right.items()}
                prod = _load_mul(left, {kk: vv * coeff for kk, vv in right.items()})
                for kk, vv in prod.items():
                    _load_add(load, kk, vv)
    normal = _normalize(load, mo)
    return DeltaExpr(B.dim, {(key[1],): c for key, c in normal.items()})


def hamiltonian_flow(B: LocalBracket, h: DiffPoly) -> list:
    """Components ``u^i_t = sum_j B[i, j, l] D^l (delta h / delta u^j)``."""
    mo = B.max_order
    grads = [euler_operator(h, j, mo) for j in range(B.fieldset.size)]
    flow = [ZERO] * B.fieldset.size
    for (i, j, l), c in B.coeffs.items():
        if grads[j].is_zero():
            continue
        flow[i] = flow[i] + c * apply_multi(grads[j], l, mo)
    return flow


def annihilator_check(B: LocalBracket, c: DiffPoly) -> CheckReport:
    flow = hamiltonian_flow(B, c)
    names = B.fieldset.names
    return CheckReport("annihilator",
                       tuple((f"flow {names[i]}", f) for i, f in enumerate(flow) if not f.is_zero()))
