"""Changes of coordinates of hydrodynamic type and their action on brackets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .. import linalg
from ..errors import PreconditionError
from ..jetcalc import (ZERO, DiffPoly, FieldSet, JetVar, apply_multi, det_poly,
                       prolong_substitution)
from ..locbracket import LocalBracket, density_bracket


def field_var(fs: FieldSet, i: int) -> DiffPoly:
    return DiffPoly.var(JetVar.of(i, (0,) * fs.dim))


@dataclass(frozen=True)
class HydroTransform:
    """New coordinates expressed through the old jet variables.

    ``images[i]`` is the new field ``i`` as a polynomial in old jets and
    ``inverse[i]`` (when known) the old field ``i`` in terms of new jets.  The
    field set, including names, is shared by both coordinate systems.
    """

    fieldset: FieldSet
    images: tuple
    inverse: tuple | None = None

    @classmethod
    def identity(cls, fs: FieldSet) -> "HydroTransform":
        ids = tuple(field_var(fs, i) for i in range(fs.size))
        return cls(fs, ids, ids)

    @classmethod
    def build(cls, fs: FieldSet, shifts: Mapping | None = None, remaps: Mapping | None = None,
              inverse: Sequence | None = None) -> "HydroTransform":
        """``shifts``: new = old + shift;  ``remaps``: new = given polynomial."""
        images = [field_var(fs, i) for i in range(fs.size)]
        for key, s in (shifts or {}).items():
            i = fs.index(key)
            images[i] = images[i] + s
        for key, r in (remaps or {}).items():
            images[fs.index(key)] = r
        T = cls(fs, tuple(images), tuple(inverse) if inverse is not None else None)
        if T.inverse is None:
            T = cls(fs, T.images, derive_inverse(fs, T.images))
        verify_inverse(T)
        return T

    def shift(self, i) -> DiffPoly:
        i = self.fieldset.index(i)
        return self.images[i] - field_var(self.fieldset, i)

    def then(self, other: "HydroTransform") -> "HydroTransform":
        """Apply ``self`` first and ``other`` afterwards."""
        fs = self.fieldset
        mo = fs.max_order
        imgs = tuple(_subst_fields(img, dict(enumerate(self.images)), mo) for img in other.images)
        inv = None
        if self.inverse is not None and other.inverse is not None:
            inv = tuple(_subst_fields(p, dict(enumerate(other.inverse)), mo) for p in self.inverse)
        return HydroTransform(fs, imgs, inv)


def _subst_fields(p: DiffPoly, mapping: Mapping[int, DiffPoly], max_order: int) -> DiffPoly:
    images = prolong_substitution(mapping, p.variables(), max_order)
    return p.subs(images)


def _depends_on(p: DiffPoly, fields: set) -> bool:
    return any(v.field in fields for v in p.variables())


def derive_inverse(fs: FieldSet, images: Sequence[DiffPoly]) -> tuple:
    """Inverse of a triangular transform.

    Supported shape: unchanged fields; an affine block whose images are
    linear in its own undifferentiated fields with a constant invertible
    matrix plus terms in unchanged fields; and shifted fields ``new = old +
    s`` with ``s`` free of shifted fields.
    """
    n = fs.size
    zero = (0,) * fs.dim
    fixed = {i for i in range(n) if images[i] == field_var(fs, i)}
    moving = set(range(n)) - fixed
    affine, rest_terms = [], {}
    for i in sorted(moving):
        img = images[i]
        ok = True
        lin = {}
        rest = ZERO
        for mono, c in img.terms.items():
            mv = [(v, e) for v, e in mono if v.field in moving]
            if not mv:
                rest = rest + DiffPoly({mono: c})
            elif len(mono) == 1 and mono[0][1] == 1 and mono[0][0].order == 0:
                lin[mono[0][0].field] = c
            else:
                ok = False
                break
        if ok:
            affine.append(i)
            rest_terms[i] = (lin, rest)
    aset = set(affine)
    shifted = moving - aset
    for i in affine:
        if any(k in shifted for k in rest_terms[i][0]):
            raise PreconditionError("transform is not triangular; supply an inverse")
    for j in shifted:
        s = images[j] - field_var(fs, j)
        if _depends_on(s, shifted):
            raise PreconditionError("shifted coordinates depend on shifted fields; supply an inverse")
    inverse = [field_var(fs, i) for i in range(n)]
    if affine:
        mat = [[rest_terms[i][0].get(k, 0) for k in affine] for i in affine]
        if linalg.det(mat) == 0:
            raise PreconditionError("singular annihilator-remap Jacobian")
        inv = linalg.inverse(mat)
        for r, i in enumerate(affine):
            expr = ZERO
            for c_idx, k in enumerate(affine):
                if inv[r][c_idx]:
                    expr = expr + (field_var(fs, k) - rest_terms[k][1]) * inv[r][c_idx]
            inverse[i] = expr
    mo = fs.max_order
    amap = {i: inverse[i] for i in affine}
    for j in shifted:
        s = images[j] - field_var(fs, j)
        inverse[j] = field_var(fs, j) - _subst_fields(s, amap, mo)
    return tuple(inverse)


def verify_inverse(T: HydroTransform) -> None:
    fs = T.fieldset
    mo = fs.max_order
    inv_map = dict(enumerate(T.inverse))
    for i, img in enumerate(T.images):
        if _subst_fields(img, inv_map, mo) != field_var(fs, i):
            raise PreconditionError(f"supplied inverse does not invert coordinate {fs.names[i]}")


def remap_jacobian(T: HydroTransform) -> DiffPoly:
    """Determinant of the Jacobian of the non-identity coordinates."""
    fs = T.fieldset
    zero = (0,) * fs.dim
    moving = [i for i in range(fs.size) if T.images[i] != field_var(fs, i)]
    if not moving:
        return DiffPoly.const(1)
    mat = [[T.images[i].partial(JetVar.of(k, zero)) for k in moving] for i in moving]
    return det_poly(mat)


def transform_bracket(B: LocalBracket, T: HydroTransform, express_in: str = "new") -> LocalBracket:
    """Bracket of the new coordinates, each treated as a density."""
    fs = B.fieldset
    if T.fieldset.size != fs.size or T.fieldset.dim != fs.dim:
        raise PreconditionError("transform does not match the bracket's field set")
    if remap_jacobian(T).is_zero():
        raise PreconditionError("singular annihilator-remap Jacobian")
    if express_in not in ("new", "old"):
        raise PreconditionError("express_in must be 'new' or 'old'")
    if express_in == "new" and T.inverse is None:
        raise PreconditionError("transform has no inverse; use express_in='old'")
    mo = fs.max_order
    n = fs.size
    coeffs = {}
    cache: dict = {}
    for a in range(n):
        for b in range(n):
            expr = density_bracket(B, T.images[a], T.images[b])
            for key, c in expr.terms.items():
                if express_in == "new":
                    if c not in cache:
                        cache[c] = _subst_fields(c, dict(enumerate(T.inverse)), mo)
                    c = cache[c]
                coeffs[(a, b, key[0])] = c
    return LocalBracket(fs, coeffs)
