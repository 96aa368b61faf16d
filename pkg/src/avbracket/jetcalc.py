"""Differential polynomials on a finite jet space with exact rational arithmetic.

A jet variable is a field index together with a multi-index of spatial
derivatives.  Differential polynomials are immutable sparse maps from
monomials to ``Fraction`` coefficients.  The module supplies total
derivatives, the Euler operator, recovery of fluxes from total divergences,
the scaling homotopy and potentials of closed gradients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, prod
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from . import linalg
from .errors import (DegenerateInputError, NonIntegrableError, NotADivergenceError,
                     PreconditionError, TruncationError)

DEFAULT_MAX_ORDER = 6
ROLES = ("generic", "phase", "density", "annihilator")


class JetVar(NamedTuple):
    """Jet coordinate ``field`` differentiated ``deriv[k]`` times along axis ``k``.

    ``order`` is stored explicitly so that the natural tuple ordering is
    graded: field first, then total order, then the multi-index.
    """

    field: int
    order: int
    deriv: tuple

    @classmethod
    def of(cls, field: int, deriv: Sequence[int]) -> "JetVar":
        deriv = tuple(int(k) for k in deriv)
        return cls(field, sum(deriv), deriv)

    def shifted(self, axis: int, times: int = 1) -> "JetVar":
        d = list(self.deriv)
        d[axis] += times
        return JetVar(self.field, self.order + times, tuple(d))


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for v, e in b:
        acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, str)):
        return Fraction(c)
    raise TypeError(f"exact coefficient required, got {type(c).__name__}")


class DiffPoly:
    """Immutable polynomial in jet variables with rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                c = _to_fraction(c)
                if c:
                    clean[m] = c
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "DiffPoly":
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    @classmethod
    def const(cls, c) -> "DiffPoly":
        c = _to_fraction(c)
        return cls._raw({(): c} if c else {})

    @classmethod
    def var(cls, v: JetVar, power: int = 1) -> "DiffPoly":
        return cls._raw({((v, power),): Fraction(1)} if power else {(): Fraction(1)})

    # -- inspection -----------------------------------------------------
    @property
    def terms(self) -> Mapping:
        return self._terms

    def items(self):
        return sorted(self._terms.items())

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((), Fraction(0))

    def variables(self) -> set:
        return {v for m in self._terms for v, _ in m}

    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self._terms), default=0)

    def max_order(self) -> int:
        return max((v.order for m in self._terms for v, _ in m), default=0)

    def coefficient(self, mono: tuple) -> Fraction:
        return self._terms.get(mono, Fraction(0))

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other) -> "DiffPoly":
        if isinstance(other, DiffPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return DiffPoly.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other._terms:
            return self
        if not self._terms:
            return other
        acc = dict(self._terms)
        for m, c in other._terms.items():
            nc = acc.get(m, 0) + c
            if nc:
                acc[m] = nc
            else:
                acc.pop(m, None)
        return DiffPoly._raw(acc)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return DiffPoly._raw({})
            return DiffPoly._raw({m: c * other for m, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                nc = acc.get(m, 0) + c1 * c2
                if nc:
                    acc[m] = nc
                else:
                    acc.pop(m, None)
        return DiffPoly._raw(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        result = DiffPoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.const(other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self):
        return f"DiffPoly({format_poly(self)})"

    # -- calculus -------------------------------------------------------
    def partial(self, v: JetVar) -> "DiffPoly":
        acc: dict = {}
        for m, c in self._terms.items():
            for idx, (w, e) in enumerate(m):
                if w == v:
                    rest = m[:idx] + (((w, e - 1),) if e > 1 else ()) + m[idx + 1:]
                    acc[rest] = acc.get(rest, 0) + c * e
                    break
        return DiffPoly(acc)

    def scale_terms(self, fn: Callable[[tuple], Fraction]) -> "DiffPoly":
        return DiffPoly({m: c * fn(m) for m, c in self._terms.items()})

    def subs(self, mapping: Mapping[JetVar, "DiffPoly"]) -> "DiffPoly":
        """Replace jet variables by polynomials (simultaneously)."""
        result = DiffPoly._raw({})
        power_cache: dict = {}
        for m, c in self._terms.items():
            term = DiffPoly.const(c)
            for v, e in m:
                if v in mapping:
                    key = (v, e)
                    if key not in power_cache:
                        power_cache[key] = _coerce_poly(mapping[v]) ** e
                    term = term * power_cache[key]
                else:
                    term = term * DiffPoly.var(v, e)
            result = result + term
        return result

    def evaluate(self, values: Mapping[JetVar, object]):
        """Evaluate with any numeric type supporting ring operations.

        Values may be Fractions, floats, complex numbers or numpy arrays;
        missing variables raise ``KeyError``.
        """
        total = 0
        for m, c in self._terms.items():
            factor = 1
            for v, e in m:
                factor = factor * values[v] ** e
            coeff = c if isinstance(factor, (int, Fraction)) else float(c)
            total = total + coeff * factor
        return total


def eval_at_jet(p: DiffPoly, assignment: Mapping[JetVar, object]) -> Fraction:
    """Exact rational value of ``p`` at the given jet values."""
    missing = p.variables() - set(assignment)
    if missing:
        names = ", ".join(sorted(_default_name(v) for v in missing))
        raise PreconditionError(f"no value assigned to {names}")
    return Fraction(p.evaluate({v: Fraction(assignment[v]) for v in p.variables()}))


def _coerce_poly(p) -> DiffPoly:
    if isinstance(p, DiffPoly):
        return p
    return DiffPoly.const(p)


ZERO = DiffPoly()
ONE = DiffPoly.const(1)


# ---------------------------------------------------------------------------
# field sets


@dataclass(frozen=True)
class Field:
    name: str
    role: str = "generic"

    def __post_init__(self):
        if self.role not in ROLES:
            raise PreconditionError(f"unknown field role {self.role!r}")


@dataclass(frozen=True)
class FieldSet:
    dim: int
    fields: tuple
    max_order: int = DEFAULT_MAX_ORDER
    axis_names: tuple | None = None
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if self.dim < 1:
            raise PreconditionError("spatial dimension must be positive")
        fields = tuple(f if isinstance(f, Field) else Field(*f) for f in self.fields)
        object.__setattr__(self, "fields", fields)
        names = [f.name for f in fields]
        if len(set(names)) != len(names):
            raise PreconditionError("duplicate field names")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})
        if self.axis_names is not None:
            axes = tuple(self.axis_names)
            if len(axes) != self.dim or len(set(axes)) != self.dim:
                raise PreconditionError("axis names must be distinct, one per dimension")
            object.__setattr__(self, "axis_names", axes)

    @classmethod
    def build(cls, dim: int, spec: Iterable, max_order: int = DEFAULT_MAX_ORDER) -> "FieldSet":
        """``spec`` is an iterable of names or ``(name, role)`` pairs."""
        fields = [Field(s) if isinstance(s, str) else Field(*s) for s in spec]
        return cls(dim, tuple(fields), max_order)

    @property
    def size(self) -> int:
        return len(self.fields)

    @property
    def names(self) -> list:
        return [f.name for f in self.fields]

    def index(self, name) -> int:
        if isinstance(name, int):
            return name
        try:
            return self._index[name]
        except KeyError:
            raise PreconditionError(f"unknown field {name!r}") from None

    def by_role(self, role: str) -> list:
        return [i for i, f in enumerate(self.fields) if f.role == role]

    def jet(self, name, deriv: Sequence[int] | None = None) -> JetVar:
        deriv = tuple(deriv) if deriv is not None else (0,) * self.dim
        if len(deriv) != self.dim or any(k < 0 for k in deriv):
            raise PreconditionError(f"bad multi-index {deriv} for dimension {self.dim}")
        return JetVar.of(self.index(name), deriv)

    def poly(self, name, deriv: Sequence[int] | None = None) -> DiffPoly:
        return DiffPoly.var(self.jet(name, deriv))

    def axis(self, k: int) -> tuple:
        return tuple(int(i == k) for i in range(self.dim))

    def var_name(self, v: JetVar) -> str:
        name = self.fields[v.field].name
        if not v.order:
            return name
        axes = self.axis_names or tuple(f"x{k + 1}" for k in range(self.dim))
        suffix = "".join(axes[k] * n for k, n in enumerate(v.deriv))
        return f"{name}_{suffix}"

    def format(self, p: DiffPoly) -> str:
        return format_poly(p, self.var_name)

    def with_max_order(self, max_order: int) -> "FieldSet":
        return FieldSet(self.dim, self.fields, max_order, self.axis_names)


def _default_name(v: JetVar) -> str:
    if not v.order:
        return f"f{v.field}"
    return f"f{v.field}_" + "".join(f"x{k + 1}" * n for k, n in enumerate(v.deriv))


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(p: DiffPoly, namer: Callable[[JetVar], str] = _default_name) -> str:
    """Canonical text form: terms in ascending monomial order."""
    if p.is_zero():
        return "0"
    pieces = []
    for mono, c in p.items():
        factors = [namer(v) + (f"^{e}" if e > 1 else "") for v, e in mono]
        mag = abs(c)
        if factors:
            body = "*".join(factors)
            text = body if mag == 1 else f"{_format_coeff(mag)}*{body}"
        else:
            text = _format_coeff(mag)
        if not pieces:
            pieces.append(("-" if c < 0 else "") + text)
        else:
            pieces.append((" - " if c < 0 else " + ") + text)
    return "".join(pieces)


# ---------------------------------------------------------------------------
# total derivatives


def _check_order(order: int, max_order: int):
    if order > max_order:
        raise TruncationError(
            f"derivative of order {order} exceeds the maximal jet order {max_order}")


@lru_cache(maxsize=200_000)
def _d_axis(p: DiffPoly, axis: int, max_order: int) -> DiffPoly:
    acc: dict = {}
    for m, c in p.terms.items():
        for idx, (v, e) in enumerate(m):
            if v.order + 1 > max_order:
                _check_order(v.order + 1, max_order)
            w = v.shifted(axis)
            rest = m[:idx] + (((v, e - 1),) if e > 1 else ()) + m[idx + 1:]
            mono = _mono_mul(rest, ((w, 1),))
            nc = acc.get(mono, 0) + c * e
            if nc:
                acc[mono] = nc
            else:
                acc.pop(mono, None)
    return DiffPoly._raw(acc)


def _dim_of(p: DiffPoly) -> int | None:
    for m in p.terms:
        for v, _ in m:
            return len(v.deriv)
    return None


def total_derivative(p: DiffPoly, direction: int, max_order: int = DEFAULT_MAX_ORDER) -> DiffPoly:
    """Total derivative along axis ``direction`` (counted from 1)."""
    dim = _dim_of(p)
    if direction < 1 or (dim is not None and direction > dim):
        raise PreconditionError(f"direction {direction} outside 1..{dim}")
    return _d_axis(p, direction - 1, max_order)


def apply_multi(p: DiffPoly, multi: Sequence[int], max_order: int = DEFAULT_MAX_ORDER) -> DiffPoly:
    """Apply ``D^multi``; axes are 0-based positions in ``multi``."""
    for axis, n in enumerate(multi):
        for _ in range(n):
            if p.is_zero():
                return p
            p = _d_axis(p, axis, max_order)
    return p


def multi_binomial(top: Sequence[int], bottom: Sequence[int]) -> int:
    return prod(comb(a, b) for a, b in zip(top, bottom))


def sub_multis(top: Sequence[int]):
    """All multi-indices componentwise below ``top``."""
    return itertools.product(*(range(k + 1) for k in top))


def multi_add(a: Sequence[int], b: Sequence[int]) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def multi_sub(a: Sequence[int], b: Sequence[int]) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# variational calculus


def euler_operator(p: DiffPoly, field_index: int, max_order: int = DEFAULT_MAX_ORDER) -> DiffPoly:
    """Variational derivative with respect to one field."""
    result = ZERO
    for v in sorted(p.variables()):
        if v.field != field_index:
            continue
        term = apply_multi(p.partial(v), v.deriv, max_order)
        result = result - term if v.order % 2 else result + term
    return result


def euler_all(p: DiffPoly, nfields: int, max_order: int = DEFAULT_MAX_ORDER) -> list:
    return [euler_operator(p, i, max_order) for i in range(nfields)]


def _signature(mono: tuple, dim: int) -> tuple:
    fields = []
    weight = [0] * dim
    for v, e in mono:
        fields.extend([v.field] * e)
        for k in range(dim):
            weight[k] += v.deriv[k] * e
    return tuple(fields), tuple(weight)


def _multis_of_weight(weight: Sequence[int], cap: int):
    """Multi-indices ``a`` with ``a <= weight`` componentwise and ``|a| <= cap``."""
    for a in itertools.product(*(range(w + 1) for w in weight)):
        if sum(a) <= cap:
            yield a


def _candidate_monomials(fields: tuple, weight: tuple, cap: int) -> list:
    """Monomials with the given field multiset and total derivative weight."""
    results = set()
    n = len(fields)

    def rec(i, remaining, chosen):
        if i == n:
            if not any(remaining):
                acc: dict = {}
                for f, a in chosen:
                    v = JetVar.of(f, a)
                    acc[v] = acc.get(v, 0) + 1
                results.add(tuple(sorted(acc.items())))
            return
        for a in _multis_of_weight(remaining, cap):
            rec(i + 1, multi_sub(remaining, a), chosen + [(fields[i], a)])

    rec(0, weight, [])
    return sorted(results)


def divergence_extract(p: DiffPoly, dim: int, max_order: int = DEFAULT_MAX_ORDER,
                       allow=None, check_euler: bool = True) -> list:
    """Return fluxes ``[v1, ..., vd]`` with ``sum_k D_k v_k == p``.

    The linear system is solved block by block (monomials sharing the same
    field multiset and derivative weight).  Unknown flux coefficients are
    ordered with the first axis first; non-pivot unknowns are set to zero, so
    the result prefers fluxes along the lowest-numbered axes.  ``allow`` is an
    optional predicate on candidate monomials restricting the flux shape.
    """
    if p.constant_term():
        raise DegenerateInputError("a nonzero constant is not a total divergence on the jet space")
    if check_euler:
        fields = sorted({v.field for v in p.variables()})
        residual = {f: euler_operator(p, f, 2 * max_order + 2) for f in fields}
        residual = {f: r for f, r in residual.items() if r}
        if residual:
            raise NotADivergenceError("not a total divergence", residual)
    blocks: dict = {}
    for m, c in p.terms.items():
        blocks.setdefault(_signature(m, dim), {})[m] = c
    fluxes = [dict() for _ in range(dim)]
    for (fields, weight), target in sorted(blocks.items()):
        top = max(v.order for m in target for v, _ in m)
        solution = None
        for cap in range(max(top - 1, 0), max_order + 1):
            solution = _solve_block(fields, weight, target, cap, dim, max_order, allow)
            if solution is not None:
                break
        if solution is None:
            raise NotADivergenceError("no flux found within the jet order bound",
                                      DiffPoly(target))
        for (k, mono), c in solution.items():
            fluxes[k][mono] = fluxes[k].get(mono, 0) + c
    return [DiffPoly(f) for f in fluxes]


def _solve_block(fields, weight, target, cap, dim, max_order, allow):
    columns = []
    for k in range(dim):
        if weight[k] == 0:
            continue
        w = list(weight)
        w[k] -= 1
        for mono in _candidate_monomials(fields, tuple(w), cap):
            if allow is None or allow(mono):
                columns.append((k, mono))
    if not columns:
        return None
    row_index: dict = {}
    entries: dict = {}
    for j, (k, mono) in enumerate(columns):
        image = _d_axis(DiffPoly._raw({mono: Fraction(1)}), k, max_order + 1)
        for m, c in image.terms.items():
            r = row_index.setdefault(m, len(row_index))
            entries.setdefault(r, {})[j] = c
    for m in target:
        row_index.setdefault(m, len(row_index))
    rows = [entries.get(r, {}) for r in range(len(row_index))]
    rhs = [Fraction(0)] * len(row_index)
    for m, c in target.items():
        rhs[row_index[m]] = c
    sol = linalg.solve(rows, rhs, len(columns))
    if sol is None:
        return None
    return {columns[j]: c for j, c in sol.items()}


def divergence(fluxes: Sequence[DiffPoly], max_order: int = DEFAULT_MAX_ORDER) -> DiffPoly:
    total = ZERO
    for k, v in enumerate(fluxes):
        total = total + _d_axis(v, k, max_order)
    return total


def scale_homotopy(p: DiffPoly, k: int) -> DiffPoly:
    """Integrate ``lambda**k * p(lambda * u)`` over ``lambda`` in ``[0, 1]``.

    A monomial of degree ``n`` is multiplied by ``1 / (n + k + 1)``.
    """
    if k < 0:
        raise PreconditionError("homotopy exponent must be non-negative")
    return p.scale_terms(lambda m: Fraction(1, sum(e for _, e in m) + k + 1))


def jet_potential(partials: Mapping[JetVar, DiffPoly]) -> DiffPoly:
    """Potential ``g`` with ``dg/dv == partials[v]`` for every key ``v``.

    Variables that are not keys are treated as parameters.  The potential is
    normalised to vanish when all key variables vanish.
    """
    keys = sorted(partials)
    keyset = set(keys)
    for a, b in itertools.combinations(keys, 2):
        if partials[a].partial(b) != partials[b].partial(a):
            raise NonIntegrableError(f"non-integrable gradient: mixed partials differ for {a} and {b}",
                                     (a, b))
    g = ZERO
    for a in keys:
        pa = partials[a]

        def weight(m, keyset=keyset):
            n = sum(e for v, e in m if v in keyset)
            return Fraction(1, n + 1)

        g = g + DiffPoly.var(a) * pa.scale_terms(weight)
    return g


def prolong_substitution(mapping: Mapping[int, DiffPoly], variables: Iterable[JetVar],
                         max_order: int = DEFAULT_MAX_ORDER) -> dict:
    """Images of jet variables under a field substitution ``field -> poly``."""
    out = {}
    for v in variables:
        if v.field in mapping:
            out[v] = apply_multi(mapping[v.field], v.deriv, max_order)
    return out


def substitute_fields(p: DiffPoly, mapping: Mapping[int, DiffPoly],
                      max_order: int = DEFAULT_MAX_ORDER) -> DiffPoly:
    images = prolong_substitution(mapping, p.variables(), max_order)
    return p.subs(images) if images else p


def det_poly(matrix: Sequence[Sequence[DiffPoly]]) -> DiffPoly:
    """Determinant by cofactor expansion (intended for small matrices)."""
    n = len(matrix)
    if n == 0:
        return ONE
    if n == 1:
        return _coerce_poly(matrix[0][0])
    total = ZERO
    for j in range(n):
        entry = _coerce_poly(matrix[0][j])
        if entry.is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in matrix[1:]]
        term = entry * det_poly(minor)
        total = total - term if j % 2 else total + term
    return total
