"""Exact sparse linear algebra over the rationals.

Rows are dictionaries ``{column: Fraction}``.  Elimination always pivots on
the leftmost available column, so particular solutions returned by
:func:`solve` set every non-pivot unknown to zero and prefer low-index
unknowns as basic variables.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Row = dict


class Echelon:
    """Incrementally maintained echelon basis of a row space."""

    def __init__(self) -> None:
        self.pivots: dict[int, dict] = {}

    def reduce(self, row: Row) -> Row:
        r = {c: Fraction(v) for c, v in row.items() if v}
        if not self.pivots:
            return r
        last = None
        while True:
            cols = [c for c in r if c in self.pivots and (last is None or c > last)]
            if not cols:
                return r
            col = min(cols)
            factor = r[col]
            for c, v in self.pivots[col].items():
                nv = r.get(c, 0) - factor * v
                if nv:
                    r[c] = nv
                else:
                    r.pop(c, None)
            last = col

    def add(self, row: Row) -> bool:
        """Insert ``row``; return True when it enlarged the row space."""
        r = self.reduce(row)
        if not r:
            return False
        lead = min(r)
        inv = 1 / r[lead]
        self.pivots[lead] = {c: v * inv for c, v in r.items()}
        return True

    @property
    def rank(self) -> int:
        return len(self.pivots)


def rank(rows: Iterable[Row]) -> int:
    ech = Echelon()
    for row in rows:
        ech.add(row)
    return ech.rank


def solve(rows: Sequence[Row], rhs: Sequence, ncols: int) -> dict[int, Fraction] | None:
    """Particular solution of ``rows @ x = rhs`` or None when inconsistent.

    Unknowns are columns ``0 .. ncols-1``; the right-hand side is carried as
    column ``ncols`` so it never becomes a pivot of a consistent system.
    """
    ech = Echelon()
    for row, b in zip(rows, rhs):
        aug = dict(row)
        if b:
            aug[ncols] = Fraction(b)
        ech.add(aug)
    if ncols in ech.pivots:
        return None
    return _back_substitute(ech, ncols, rhs_col=ncols, free_values={})


def _back_substitute(ech: Echelon, ncols: int, rhs_col: int | None, free_values: dict) -> dict:
    x: dict[int, Fraction] = dict(free_values)
    for p in sorted(ech.pivots, reverse=True):
        row = ech.pivots[p]
        val = row.get(rhs_col, Fraction(0)) if rhs_col is not None else Fraction(0)
        for c, a in row.items():
            if c == p or c == rhs_col or c >= ncols:
                continue
            xc = x.get(c)
            if xc:
                val -= a * xc
        if val:
            x[p] = val
    return {c: v for c, v in x.items() if v}


def nullspace(rows: Sequence[Row], ncols: int) -> list[dict[int, Fraction]]:
    ech = Echelon()
    for row in rows:
        ech.add(row)
    basis = []
    for f in range(ncols):
        if f in ech.pivots:
            continue
        basis.append(_back_substitute(ech, ncols, None, {f: Fraction(1)}))
    return basis


def in_span(vectors: Sequence[Row], target: Row) -> bool:
    ech = Echelon()
    for v in vectors:
        ech.add(v)
    return not ech.reduce(target)


def det(matrix: Sequence[Sequence]) -> Fraction:
    """Determinant of a dense square matrix of rationals."""
    a = [[Fraction(v) for v in row] for row in matrix]
    n = len(a)
    sign = 1
    result = Fraction(1)
    for i in range(n):
        piv = next((r for r in range(i, n) if a[r][i]), None)
        if piv is None:
            return Fraction(0)
        if piv != i:
            a[i], a[piv] = a[piv], a[i]
            sign = -sign
        result *= a[i][i]
        for r in range(i + 1, n):
            if a[r][i]:
                f = a[r][i] / a[i][i]
                for c in range(i, n):
                    a[r][c] -= f * a[i][c]
    return sign * result


def inverse(matrix: Sequence[Sequence]) -> list[list[Fraction]]:
    n = len(matrix)
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(matrix)]
    for i in range(n):
        piv = next((r for r in range(i, n) if a[r][i]), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[i], a[piv] = a[piv], a[i]
        inv = 1 / a[i][i]
        a[i] = [v * inv for v in a[i]]
        for r in range(n):
            if r != i and a[r][i]:
                f = a[r][i]
                a[r] = [x - f * y for x, y in zip(a[r], a[i])]
    return [row[n:] for row in a]


def matrix_rank(matrix: Sequence[Sequence]) -> int:
    return rank({j: Fraction(v) for j, v in enumerate(row) if v} for row in matrix)
