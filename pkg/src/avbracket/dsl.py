"""Reader and writer for ``.br`` bracket files.

A file declares one field set and any number of named objects::

    dim 2;
    maxorder 6;                      # optional jet truncation
    field S : phase;
    field Q : density;
    bracket B { [S,Q] += 1 * d(0,0); [Q,S] += -1 * d(0,0); }
    density H = 1/2*Q^2 + S_x1*S_x2;
    transform T { Q = Q + S_x1^2; inverse Q = Q - S_x1^2; }
    family F {
      phases 1; params a, k;
      phi u = fourier{ ((1), a, 0) };
      wave x1 = (k); freq = (k^3);
      grid { (1, 2); }
    }

``d(a1,...,ad)`` is the ``a``-th derivative of ``delta(x - y)`` in ``x`` and
multiplies the whole polynomial written before it.  Jet variables are written
``name_x1x1x2``; repeating an axis raises the order.  Numbers are integers or
exact fractions ``p/q``.  ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import ParseError
from .jetcalc import DEFAULT_MAX_ORDER, ROLES, ZERO, DiffPoly, Field, FieldSet, JetVar
from .locbracket import LocalBracket
from .averaging import FourierFamily
from .canonform.transform import HydroTransform

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<rational>\d+/\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z0-9]+)?)
  | (?P<op>\+=|[-+*^/(){}\[\],;:=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, chunk, line, col))
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class TransformSpec:
    images: tuple
    inverse: tuple | None = None

    def build(self, fs: FieldSet) -> HydroTransform:
        remaps = {fs.index(name): poly for name, poly in self.images}
        inv = None
        if self.inverse is not None:
            given = dict(self.inverse)
            inv = [given.get(name, DiffPoly.var(JetVar.of(i, (0,) * fs.dim)))
                   for i, name in enumerate(fs.names)]
        return HydroTransform.build(fs, remaps=remaps, inverse=inv)


@dataclass(frozen=True)
class SpecFile:
    fieldset: FieldSet
    brackets: Mapping = field(default_factory=dict)
    densities: Mapping = field(default_factory=dict)
    transforms: Mapping = field(default_factory=dict)
    families: Mapping = field(default_factory=dict)

    def bracket(self, name: str | None = None) -> LocalBracket:
        return _pick(self.brackets, name, "bracket")

    def density(self, name: str) -> DiffPoly:
        return _pick(self.densities, name, "density")

    def transform(self, name: str | None = None) -> HydroTransform:
        return _pick(self.transforms, name, "transform").build(self.fieldset)

    def family(self, name: str | None = None) -> FourierFamily:
        return _pick(self.families, name, "family")


def _pick(table: Mapping, name, kind):
    from .errors import PreconditionError
    if name is None:
        if len(table) != 1:
            raise PreconditionError(f"file defines {len(table)} {kind} blocks; name one")
        return next(iter(table.values()))
    if name not in table:
        raise PreconditionError(f"no {kind} named {name!r}")
    return table[name]


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.fs: FieldSet | None = None
        self.dim: int | None = None
        self.max_order = DEFAULT_MAX_ORDER
        self.fields: list = []

    # -- token helpers ----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, message: str, expected=None, tok: Token | None = None):
        tok = tok or self.tok
        if expected is not None and not isinstance(expected, str):
            expected = ", ".join(expected)
        raise ParseError(message, tok.line, tok.column, expected or "")

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            self.fail(f"expected {text!r}, found {found!r}", [text])
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            self.fail(f"expected a name, found {found!r}", ["name"])
        tok = self.tok
        self.i += 1
        return tok

    def integer(self) -> int:
        if self.tok.kind != "int":
            self.fail(f"expected an integer, found {self.tok.text!r}", ["integer"])
        val = int(self.tok.text)
        self.i += 1
        return val

    # -- numbers and polynomials -------------------------------------------
    def number(self) -> Fraction:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return Fraction(int(tok.text))
        if tok.kind == "rational":
            num, den = tok.text.split("/")
            if int(den) == 0:
                self.fail("malformed rational: zero denominator", tok=tok)
            self.i += 1
            return Fraction(int(num), int(den))
        self.fail(f"expected a number, found {tok.text!r}", ["number"])

    def poly(self, resolve, stop_at_delta: bool = False) -> DiffPoly:
        acc = self.term(resolve, stop_at_delta)
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            sign = self.tok.text
            self.i += 1
            rhs = self.term(resolve, stop_at_delta)
            acc = acc + rhs if sign == "+" else acc - rhs
        return acc

    def _delta_ahead(self) -> bool:
        return (self.tok.text == "*" and self.peek().text == "d" and self.peek(2).text == "(")

    def term(self, resolve, stop_at_delta) -> DiffPoly:
        sign = 1
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            if self.tok.text == "-":
                sign = -sign
            self.i += 1
        acc = self.power(resolve, stop_at_delta)
        while True:
            if stop_at_delta and self._delta_ahead():
                break
            if self.tok.text == "*":
                self.i += 1
                acc = acc * self.power(resolve, stop_at_delta)
            elif self.tok.text == "/":
                tok = self.tok
                self.i += 1
                den = self.number()
                if den == 0:
                    self.fail("malformed rational: zero denominator", tok=tok)
                acc = acc / den
            else:
                break
        return acc * sign

    def power(self, resolve, stop_at_delta) -> DiffPoly:
        base = self.atom(resolve, stop_at_delta)
        if self.tok.text == "^":
            self.i += 1
            base = base ** self.integer()
        return base

    def atom(self, resolve, stop_at_delta) -> DiffPoly:
        tok = self.tok
        if tok.kind in ("int", "rational"):
            return DiffPoly.const(self.number())
        if tok.text == "(":
            self.i += 1
            inner = self.poly(resolve, False)
            self.expect(")")
            return inner
        if tok.kind == "ident":
            self.i += 1
            return DiffPoly.var(resolve(tok))
        self.fail(f"unexpected {tok.text or 'end of input'!r} in polynomial",
                  ["number", "name", "("])

    def jet(self, tok: Token) -> JetVar:
        if self.fs is None:
            self.fail("fields must be declared before use", tok=tok)
        name, _, suffix = tok.text.partition("_")
        if name not in self.fs.names:
            self.fail(f"unknown field {name!r}", self.fs.names, tok)
        deriv = [0] * self.fs.dim
        if suffix:
            parts = re.fullmatch(r"(?:x\d+)+", suffix)
            if not parts:
                self.fail(f"malformed derivative suffix {suffix!r}", ["x1..xd"], tok)
            for axis in re.findall(r"x(\d+)", suffix):
                a = int(axis)
                if not 1 <= a <= self.fs.dim:
                    self.fail(f"axis x{a} outside dimension {self.fs.dim}", tok=tok)
                deriv[a - 1] += 1
        if sum(deriv) > self.fs.max_order:
            self.fail(f"derivative order over truncation ({sum(deriv)} > {self.fs.max_order})",
                      tok=tok)
        return JetVar.of(self.fs.index(name), deriv)

    # -- statements ---------------------------------------------------------
    def parse(self) -> SpecFile:
        brackets, densities, transforms, families = {}, {}, {}, {}
        while self.tok.kind != "eof":
            kw = self.tok
            if kw.text == "dim":
                self.i += 1
                if self.dim is not None:
                    self.fail("dimension declared twice", tok=kw)
                self.dim = self.integer()
                if self.dim < 1:
                    self.fail("dimension must be positive", tok=kw)
                self.expect(";")
            elif kw.text == "maxorder":
                self.i += 1
                if self.fs is not None:
                    self.fail("maxorder must precede field declarations", tok=kw)
                self.max_order = self.integer()
                self.expect(";")
            elif kw.text == "field":
                self.i += 1
                if self.dim is None:
                    self.fail("'dim' must come before field declarations", tok=kw)
                name = self.ident()
                if "_" in name.text:
                    self.fail("field names may not contain '_'", tok=name)
                role = "generic"
                if self.accept(":"):
                    rt = self.ident()
                    if rt.text not in ROLES:
                        self.fail(f"unknown role {rt.text!r}", list(ROLES), rt)
                    role = rt.text
                self.expect(";")
                if any(f.name == name.text for f in self.fields):
                    self.fail(f"field {name.text!r} declared twice", tok=name)
                if brackets or densities or transforms or families:
                    self.fail("fields must be declared before other blocks", tok=kw)
                self.fields.append(Field(name.text, role))
                self.fs = FieldSet(self.dim, tuple(self.fields), self.max_order)
            elif kw.text == "bracket":
                self.i += 1
                name = self._new_name(brackets)
                brackets[name] = self.bracket_block()
            elif kw.text == "density":
                self.i += 1
                name = self._new_name(densities)
                self.expect("=")
                densities[name] = self.poly(self.jet)
                self.expect(";")
            elif kw.text == "transform":
                self.i += 1
                name = self._new_name(transforms)
                transforms[name] = self.transform_block()
            elif kw.text == "family":
                self.i += 1
                name = self._new_name(families)
                families[name] = self.family_block()
            else:
                self.fail(f"unexpected {kw.text!r}",
                          ["dim", "maxorder", "field", "bracket", "density", "transform", "family"])
        if self.fs is None:
            raise ParseError("no fields declared", self.tok.line, self.tok.column, "field")
        return SpecFile(self.fs, brackets, densities, transforms, families)

    def _new_name(self, table) -> str:
        tok = self.ident()
        if self.fs is None:
            self.fail("fields must be declared before other blocks", tok=tok)
        if tok.text in table:
            self.fail(f"duplicate name {tok.text!r}", tok=tok)
        return tok.text

    def _field_index(self) -> int:
        tok = self.ident()
        if tok.text not in self.fs.names:
            self.fail(f"unknown field {tok.text!r}", self.fs.names, tok)
        return self.fs.index(tok.text)

    def bracket_block(self) -> LocalBracket:
        self.expect("{")
        coeffs: dict = {}
        while not self.accept("}"):
            self.expect("[")
            i = self._field_index()
            self.expect(",")
            j = self._field_index()
            self.expect("]")
            self.expect("+=")
            coef = self.poly(self.jet, stop_at_delta=True)
            self.expect("*")
            self.expect("d")
            self.expect("(")
            multi = [self.integer()]
            while self.accept(","):
                multi.append(self.integer())
            close = self.expect(")")
            if len(multi) != self.fs.dim:
                self.fail(f"delta needs {self.fs.dim} derivative counts", tok=close)
            self.expect(";")
            key = (i, j, tuple(multi))
            coeffs[key] = coeffs.get(key, ZERO) + coef
        return LocalBracket(self.fs, coeffs)

    def transform_block(self) -> TransformSpec:
        self.expect("{")
        images, inverse = [], []
        while not self.accept("}"):
            target = images
            if self.accept("inverse"):
                target = inverse
            i = self._field_index()
            self.expect("=")
            target.append((self.fs.names[i], self.poly(self.jet)))
            self.expect(";")
        return TransformSpec(tuple(images), tuple(inverse) if inverse else None)

    def _vector(self, resolve) -> list:
        self.expect("(")
        out = [self.poly(resolve)]
        while self.accept(","):
            out.append(self.poly(resolve))
        self.expect(")")
        return out

    def _int_vector(self) -> tuple:
        self.expect("(")
        out = [self._signed_int()]
        while self.accept(","):
            out.append(self._signed_int())
        self.expect(")")
        return tuple(out)

    def _signed_int(self) -> int:
        sign = -1 if self.accept("-") else 1
        return sign * self.integer()

    def family_block(self) -> FourierFamily:
        self.expect("{")
        phases, params = None, []
        modes, waves, freqs, grid = {}, {}, (), []

        def pres(tok):
            if tok.text not in params:
                self.fail(f"unknown parameter {tok.text!r}", params, tok)
            return JetVar.of(params.index(tok.text), (0,))

        while not self.accept("}"):
            kw = self.ident()
            if kw.text == "phases":
                phases = self.integer()
                self.expect(";")
            elif kw.text == "params":
                params.append(self.ident().text)
                while self.accept(","):
                    params.append(self.ident().text)
                self.expect(";")
            elif kw.text == "phi":
                if phases is None:
                    self.fail("'phases' must precede profile data", tok=kw)
                i = self._field_index()
                self.expect("=")
                self.expect("fourier")
                self.expect("{")
                entries = []
                while True:
                    self.expect("(")
                    n = self._int_vector()
                    if len(n) != phases:
                        self.fail(f"mode vector needs {phases} entries", tok=kw)
                    self.expect(",")
                    re_ = self.poly(pres)
                    self.expect(",")
                    im_ = self.poly(pres)
                    self.expect(")")
                    entries.append((n, re_, im_))
                    if not self.accept(","):
                        break
                self.expect("}")
                self.expect(";")
                modes[i] = tuple(entries)
            elif kw.text == "wave":
                axis = self.ident()
                m = re.fullmatch(r"x(\d+)", axis.text)
                if not m or not 1 <= int(m.group(1)) <= self.fs.dim:
                    self.fail(f"bad axis {axis.text!r}", tok=axis)
                self.expect("=")
                waves[int(m.group(1)) - 1] = tuple(self._vector(pres))
                self.expect(";")
            elif kw.text == "freq":
                self.expect("=")
                freqs = tuple(self._vector(pres))
                self.expect(";")
            elif kw.text == "grid":
                self.expect("{")
                while not self.accept("}"):
                    self.expect("(")
                    pt = [self.number_signed()]
                    while self.accept(","):
                        pt.append(self.number_signed())
                    self.expect(")")
                    self.expect(";")
                    grid.append(tuple(pt))
            else:
                self.fail(f"unexpected {kw.text!r} in family",
                          ["phases", "params", "phi", "wave", "freq", "grid"], kw)
        if phases is None:
            self.fail("family without 'phases'")
        wave_rows = tuple(waves.get(q, tuple(DiffPoly() for _ in range(phases)))
                          for q in range(self.fs.dim))
        return FourierFamily(self.fs, phases, tuple(params), modes, wave_rows, freqs, tuple(grid))

    def number_signed(self) -> Fraction:
        sign = -1 if self.accept("-") else 1
        return sign * self.number()


def parse_spec(text: str) -> SpecFile:
    return _Parser(text).parse()


def load_spec(path) -> SpecFile:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# ---------------------------------------------------------------------------
# printer


def _frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _param_text(fam: FourierFamily, p: DiffPoly) -> str:
    from .jetcalc import format_poly
    return format_poly(p, lambda v: fam.params[v.field])


def print_spec(spec: SpecFile) -> str:
    fs = spec.fieldset
    out = [f"dim {fs.dim};"]
    if fs.max_order != DEFAULT_MAX_ORDER:
        out.append(f"maxorder {fs.max_order};")
    for f in fs.fields:
        out.append(f"field {f.name} : {f.role};")
    for name, B in spec.brackets.items():
        out.append(f"bracket {name} {{")
        for (i, j, l), c in sorted(B.coeffs.items()):
            out.append(f"  [{fs.names[i]},{fs.names[j]}] += ({fs.format(c)}) * "
                       f"d({','.join(map(str, l))});")
        out.append("}")
    for name, p in spec.densities.items():
        out.append(f"density {name} = {fs.format(p)};")
    for name, t in spec.transforms.items():
        out.append(f"transform {name} {{")
        for target, p in t.images:
            out.append(f"  {target} = {fs.format(p)};")
        for target, p in t.inverse or ():
            out.append(f"  inverse {target} = {fs.format(p)};")
        out.append("}")
    for name, fam in spec.families.items():
        out.append(f"family {name} {{")
        out.append(f"  phases {fam.phases};")
        if fam.params:
            out.append(f"  params {', '.join(fam.params)};")
        for i, entries in sorted(fam.modes.items()):
            parts = [f"(({','.join(map(str, n))}), {_param_text(fam, r)}, {_param_text(fam, m)})"
                     for n, r, m in entries]
            out.append(f"  phi {fs.names[i]} = fourier{{ {', '.join(parts)} }};")
        for q, row in enumerate(fam.waves):
            out.append(f"  wave x{q + 1} = ({', '.join(_param_text(fam, w) for w in row)});")
        if fam.freqs:
            out.append(f"  freq = ({', '.join(_param_text(fam, w) for w in fam.freqs)});")
        if fam.grid:
            out.append("  grid {")
            for pt in fam.grid:
                out.append(f"    ({', '.join(_frac(Fraction(x)) for x in pt)});")
            out.append("  }")
        out.append("}")
    return "\n".join(out) + "\n"
