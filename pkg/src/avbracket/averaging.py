"""Averaging of local brackets over families of multi-phase periodic profiles.

The pipeline checks that a set of densities Poisson-commute, recovers the
fluxes of their brackets, averages densities over a torus of phases (either
numerically on user-supplied Fourier data or exactly through the linear
closure of the density set) and assembles the averaged bracket on phases
``S`` and averaged densities ``U``.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from .errors import DegenerateRankWarning, NotADivergenceError, PreconditionError, RefusalError
from .jetcalc import (ZERO, DiffPoly, Field, FieldSet, JetVar, apply_multi, divergence,
                      divergence_extract, euler_operator)
from .locbracket import LocalBracket, density_bracket, hamiltonian_flow, jacobi_check
from .report import CheckReport, jsonable


@dataclass(frozen=True)
class DensitySet:
    densities: tuple
    annihilators: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "densities", tuple(self.densities))
        object.__setattr__(self, "annihilators", tuple(self.annihilators))
        if not self.densities:
            raise PreconditionError("density set must be nonempty")
        if any(not 0 <= i < len(self.densities) for i in self.annihilators):
            raise PreconditionError("annihilator index out of range")

    def __len__(self):
        return len(self.densities)


@dataclass(frozen=True)
class FluxSet:
    """Fluxes of bracket coefficients and of time derivatives.

    ``pair_fluxes[(g, r)]`` lists one flux per axis for the undifferentiated
    delta coefficient of ``{P^g, P^r}``; ``time_fluxes[g]`` lists fluxes of
    ``d/dt P^g`` along the flow of the Hamiltonian density.
    """

    pair_fluxes: Mapping
    time_fluxes: Mapping = field(default_factory=dict)


def _zero_order_coefficient(expr, dim: int) -> DiffPoly:
    return expr.coefficient((0,) * dim)


def commuting_set_check(B: LocalBracket, H: DiffPoly, D: DensitySet) -> CheckReport:
    """Every pair from ``D`` plus ``H`` has a divergence as delta coefficient."""
    dens = list(D.densities) + [H]
    labels = [f"P{g + 1}" for g in range(len(D))] + ["H"]
    items = []
    mo = B.max_order
    for a in range(len(dens)):
        for b in range(len(dens)):
            coeff = _zero_order_coefficient(density_bracket(B, dens[a], dens[b]), B.dim)
            if coeff.constant_term():
                items.append((f"({labels[a]},{labels[b]}) constant", coeff))
                continue
            for f in range(B.fieldset.size):
                res = euler_operator(coeff, f, 2 * mo + 2)
                if not res.is_zero():
                    items.append((f"({labels[a]},{labels[b]}) E[{B.fieldset.names[f]}]", res))
    return CheckReport("commuting_set", tuple(items))


def flux_extract(B: LocalBracket, D: DensitySet, H: DiffPoly | None = None) -> FluxSet:
    pairs = {}
    dens = D.densities
    for g in range(len(dens)):
        for r in range(len(dens)):
            coeff = _zero_order_coefficient(density_bracket(B, dens[g], dens[r]), B.dim)
            try:
                pairs[(g, r)] = divergence_extract(coeff, B.dim, B.max_order)
            except NotADivergenceError as exc:
                raise NotADivergenceError(
                    f"densities {g + 1} and {r + 1} do not commute", exc.residual) from None
    times = {}
    if H is not None:
        flow = hamiltonian_flow(B, H)
        for g, p in enumerate(dens):
            dt = ZERO
            for v in p.variables():
                dt = dt + p.partial(v) * apply_multi(flow[v.field], v.deriv, B.max_order)
            try:
                times[g] = divergence_extract(dt, B.dim, B.max_order)
            except NotADivergenceError as exc:
                raise NotADivergenceError(
                    f"density {g + 1} is not conserved by the Hamiltonian flow",
                    exc.residual) from None
    for key, fl in pairs.items():
        target = _zero_order_coefficient(density_bracket(B, dens[key[0]], dens[key[1]]), B.dim)
        if divergence(fl, B.max_order) != target:
            raise NotADivergenceError("flux recomputation mismatch")
    return FluxSet(pairs, times)


# ---------------------------------------------------------------------------
# numeric torus averaging


@dataclass(frozen=True)
class FourierFamily:
    """Truncated Fourier data of a family of multi-phase profiles.

    ``modes[i]`` lists ``(n, re, im)`` with integer vectors ``n`` of length
    ``phases`` and coefficient polynomials in the parameters, meaning
    ``Phi^i = sum re * cos(n.theta) - im * sin(n.theta)``.  ``waves[q][a]`` is
    the wave number of phase ``a`` along axis ``q``; ``freqs[a]`` the
    frequency.  Parameter polynomials live on ``param_fields``.
    """

    fieldset: FieldSet
    phases: int
    params: tuple
    modes: Mapping
    waves: tuple
    freqs: tuple = ()
    grid: tuple = ()

    @property
    def param_fields(self) -> FieldSet:
        return FieldSet.build(1, list(self.params) or ["_"])

    def param_values(self, point: Sequence) -> dict:
        if len(point) != len(self.params):
            raise PreconditionError("grid point has wrong number of parameters")
        return {JetVar.of(i, (0,)): Fraction(v) for i, v in enumerate(point)}

    def _num(self, poly: DiffPoly, pv: dict) -> float:
        return float(poly.evaluate(pv))

    def trig_degree(self, p: DiffPoly) -> tuple:
        deg = [0] * self.phases
        for mono in p.terms:
            acc = [0] * self.phases
            for v, e in mono:
                md = [0] * self.phases
                for n, _, _ in self.modes.get(v.field, ()):
                    md = [max(a, abs(b)) for a, b in zip(md, n)]
                acc = [a + e * b for a, b in zip(acc, md)]
            deg = [max(a, b) for a, b in zip(deg, acc)]
        return tuple(deg)


def torus_average(F: FourierFamily, p: DiffPoly, point: Sequence, samples: int | None = None) -> float:
    """Average of ``p`` over the phase torus at one parameter point."""
    deg = F.trig_degree(p)
    need = 2 * max(deg, default=0) + 1
    if samples is None:
        samples = need
    elif samples < need:
        raise PreconditionError(f"insufficient samples per phase: {samples} < required {need}")
    pv = F.param_values(point)
    m = F.phases
    if m == 0:
        grids = []
    else:
        theta1 = 2 * np.pi * np.arange(samples) / samples
        grids = np.meshgrid(*([theta1] * m), indexing="ij")
    waves = [[F._num(k, pv) for k in row] for row in F.waves]
    values = {}
    for v in p.variables():
        total = np.zeros(grids[0].shape) if m else 0.0
        for n, re, im in F.modes.get(v.field, ()):
            c = complex(F._num(re, pv), F._num(im, pv))
            for q, kq in enumerate(v.deriv):
                if kq:
                    c *= (1j * sum(waves[q][a] * n[a] for a in range(m))) ** kq
            phase = sum(n[a] * grids[a] for a in range(m)) if m else 0.0
            total = total + (c * np.exp(1j * phase)).real
        values[v] = total
    result = p.evaluate(values)
    return float(np.mean(result)) if m else float(result)


def save_table(path, params: Sequence[str], grid: Sequence, values: Mapping) -> None:
    data = {"params": list(params), "grid": jsonable(grid), "values": jsonable(values)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    for key in ("params", "grid", "values"):
        if key not in data:
            raise PreconditionError(f"table lacks {key!r}")
    return data


# ---------------------------------------------------------------------------
# exact averaging through the closure of a density set


def closure_average(f: DiffPoly, D: DensitySet, fieldset: FieldSet, averaged: FieldSet,
                    density_offset: int = 0) -> DiffPoly:
    """Exact average of ``f`` when ``f = c0 + sum c_g P^g + divergence``.

    The result is a polynomial in the averaged variables ``U^g`` located at
    field indices ``density_offset + g`` of ``averaged``; it does not depend
    on the family because divergences average to zero and ``<P^g> = U^g``.
    """
    mo = fieldset.max_order
    nf = fieldset.size
    grads = [[euler_operator(P, i, 2 * mo + 2) for i in range(nf)] for P in D.densities]
    target = [euler_operator(f, i, 2 * mo + 2) for i in range(nf)]
    rows_index: dict = {}
    entries: dict = {}
    for g, gl in enumerate(grads):
        for i, e in enumerate(gl):
            for mono, c in e.terms.items():
                r = rows_index.setdefault((i, mono), len(rows_index))
                entries.setdefault(r, {})[g] = c
    for i, e in enumerate(target):
        for mono in e.terms:
            rows_index.setdefault((i, mono), len(rows_index))
    rhs = [Fraction(0)] * len(rows_index)
    for i, e in enumerate(target):
        for mono, c in e.terms.items():
            rhs[rows_index[(i, mono)]] = c
    rows = [entries.get(r, {}) for r in range(len(rows_index))]
    sol = linalg.solve(rows, rhs, len(D.densities))
    if sol is None:
        raise RefusalError("density is not in the linear closure of the set modulo divergences")
    rest = f
    result = ZERO
    for g, c in sol.items():
        rest = rest - D.densities[g] * c
        result = result + DiffPoly.var(JetVar.of(density_offset + g, (0,) * averaged.dim)) * c
    c0 = rest.constant_term()
    return result + c0


def symbolic_tables(B: LocalBracket, D: DensitySet, averaged: FieldSet, density_offset: int):
    """Exact ``<A>`` and ``<Q>`` tables via :func:`closure_average`.

    Only the first-derivative delta coefficients and the fluxes of the plain
    delta coefficient enter; terms with higher delta derivatives drop out.
    """
    A, Q = {}, {}
    dim = B.dim
    fl = flux_extract(B, D)
    for g in range(len(D)):
        for r in range(len(D)):
            expr = density_bracket(B, D.densities[g], D.densities[r])
            for p in range(dim):
                e = tuple(int(k == p) for k in range(dim))
                A[(g, r, p)] = closure_average(expr.coefficient(e), D, B.fieldset, averaged,
                                               density_offset)
                Q[(g, r, p)] = closure_average(fl.pair_fluxes[(g, r)][p], D, B.fieldset,
                                               averaged, density_offset)
    return A, Q


# ---------------------------------------------------------------------------
# averaged brackets


def averaged_fieldset(m: int, n_dens: int, d: int, max_order: int = 6) -> FieldSet:
    names_s = ["S"] if m == 1 else [f"S{a + 1}" for a in range(m)]
    names_u = ["U"] if n_dens == 1 else [f"U{g + 1}" for g in range(n_dens)]
    fields = [Field(n, "phase") for n in names_s] + [Field(n, "density") for n in names_u]
    return FieldSet(d, tuple(fields), max_order)


@dataclass(frozen=True)
class AveragedBracket:
    fieldset: FieldSet
    m: int
    omega: tuple
    A: Mapping
    Q: Mapping
    rank_status: str = "full"

    @property
    def n_dens(self) -> int:
        return self.fieldset.size - self.m

    def to_local(self) -> LocalBracket:
        m, d = self.m, self.fieldset.dim
        zero = (0,) * d
        coeffs = {}
        for a in range(m):
            for g in range(self.n_dens):
                w = self.omega[a][g]
                coeffs[(a, m + g, zero)] = w
                coeffs[(m + g, a, zero)] = -w
        for g in range(self.n_dens):
            for r in range(self.n_dens):
                for p in range(d):
                    e = tuple(int(k == p) for k in range(d))
                    a_val = self.A.get((g, r, p), ZERO)
                    q_val = self.Q.get((g, r, p), ZERO)
                    coeffs[(m + g, m + r, e)] = coeffs.get((m + g, m + r, e), ZERO) + a_val
                    coeffs[(m + g, m + r, zero)] = (coeffs.get((m + g, m + r, zero), ZERO)
                                                    + apply_multi(q_val, e, self.fieldset.max_order))
        return LocalBracket(self.fieldset, coeffs)


def _random_jet(vars_: set, rng: random.Random) -> dict:
    return {v: Fraction(rng.randint(-20, 20), rng.randint(1, 7)) for v in vars_}


def omega_rank_status(omega: Sequence[Sequence[DiffPoly]], m: int, samples: int = 32,
                      seed: int = 0) -> str:
    if m == 0:
        return "full"
    rng = random.Random(seed)
    vars_ = set()
    for row in omega:
        for w in row:
            vars_ |= w.variables()
    vars_ = sorted(vars_)
    deficient = 0
    for _ in range(samples):
        pt = _random_jet(vars_, rng)
        mat = [[w.evaluate(pt) if w.variables() else w.constant_term() for w in row] for row in omega]
        if linalg.matrix_rank(mat) < m:
            deficient += 1
    if deficient == samples:
        return "degenerate"
    return "stratum" if deficient else "full"


def assemble_averaged(m: int, s: int, d: int, omega, A: Mapping, Q: Mapping,
                      fieldset: FieldSet | None = None, seed: int = 0) -> AveragedBracket:
    n = m + s
    fs = fieldset or averaged_fieldset(m, n, d)
    if fs.size != m + n or fs.dim != d:
        raise PreconditionError("field set does not match (m, s, d)")
    omega = tuple(tuple(w if isinstance(w, DiffPoly) else DiffPoly.const(w) for w in row)
                  for row in omega)
    if len(omega) != m or any(len(row) != n for row in omega):
        raise PreconditionError(f"omega must be {m} x {n}")

    def norm(tab):
        out = {}
        for key, v in tab.items():
            g, r, p = key
            if not (0 <= g < n and 0 <= r < n and 0 <= p < d):
                raise PreconditionError(f"table index {key} out of range")
            out[key] = v if isinstance(v, DiffPoly) else DiffPoly.const(v)
        return out

    status = omega_rank_status(omega, m, seed=seed)
    if status == "degenerate":
        warnings.warn("omega is rank deficient at every sampled jet; degenerate input",
                      DegenerateRankWarning, stacklevel=2)
    elif status == "stratum":
        warnings.warn("omega is rank deficient at some sampled jets", DegenerateRankWarning,
                      stacklevel=2)
    return AveragedBracket(fs, m, omega, norm(A), norm(Q), status)


def frame_commutator_check(avbr: AveragedBracket) -> CheckReport:
    """Vector fields ``xi_a = sum_r omega[a][r] d/dU^r`` must commute pairwise."""
    m, n = avbr.m, avbr.n_dens
    zero = (0,) * avbr.fieldset.dim
    uvars = [JetVar.of(m + r, zero) for r in range(n)]
    items = []
    for a in range(m):
        for b in range(a + 1, m):
            for g in range(n):
                comm = ZERO
                for r in range(n):
                    comm = comm + avbr.omega[a][r] * avbr.omega[b][g].partial(uvars[r])
                    comm = comm - avbr.omega[b][r] * avbr.omega[a][g].partial(uvars[r])
                if not comm.is_zero():
                    items.append((f"[xi{a + 1},xi{b + 1}]^{g + 1}", comm))
    return CheckReport("frame_commutators", tuple(items))


def whitham_flow(avbr: AveragedBracket, hamiltonian_index: int) -> list:
    """Averaged flow generated by the functional of the chosen averaged density."""
    h = DiffPoly.var(JetVar.of(avbr.m + hamiltonian_index, (0,) * avbr.fieldset.dim))
    return hamiltonian_flow(avbr.to_local(), h)


def averaged_jacobi(avbr: AveragedBracket) -> CheckReport:
    return jacobi_check(avbr.to_local())
