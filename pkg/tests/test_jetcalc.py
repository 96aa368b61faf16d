import math
import random
from fractions import Fraction

import numpy as np
import pytest

from avbracket.errors import (DegenerateInputError, NonIntegrableError, NotADivergenceError,
                              PreconditionError, TruncationError)
from avbracket.jetcalc import (ONE, ZERO, DiffPoly, FieldSet, JetVar, divergence,
                               divergence_extract, eval_at_jet, euler_operator, jet_potential,
                               scale_homotopy, total_derivative)

from instances import random_poly
from oracles import Torus

FS1 = FieldSet.build(1, ["u"])
U, UX, UXX = FS1.poly("u"), FS1.poly("u", (1,)), FS1.poly("u", (2,))
FS2 = FieldSet.build(2, [("S", "phase")])


def s2(i, j):
    return FS2.poly("S", (i, j))


# --- total derivative -------------------------------------------------------

def test_total_derivative_of_square():
    assert total_derivative(U * U, 1) == 2 * U * UX


def test_total_derivative_bumps_index():
    assert total_derivative(s2(0, 1), 1) == s2(1, 1)


def _taylor_values(jets, x):
    """Values of ``u, u_x, ...`` at ``x`` for the polynomial with the given jet at 0."""
    order = len(jets)
    return [sum(jets[k + j] * x ** j / math.factorial(j) for j in range(order - k))
            for k in range(order)]


def test_total_derivative_matches_finite_differences():
    rng = random.Random(3)
    p = U * UX
    dp = total_derivative(p, 1)
    assert dp == UX * UX + U * UXX
    h = 1e-5
    for _ in range(5):
        jets = [rng.uniform(-2, 2) for _ in range(6)]

        def at(x):
            vals = _taylor_values(jets, x)
            return float(p.evaluate({FS1.jet("u", (k,)): vals[k] for k in range(3)}))

        numeric = (at(h) - at(-h)) / (2 * h)
        exact = float(dp.evaluate({FS1.jet("u", (k,)): jets[k] for k in range(3)}))
        assert abs(numeric - exact) < 1e-6


def test_total_derivative_truncation_is_an_error():
    top = FS1.poly("u", (6,))
    with pytest.raises(TruncationError):
        total_derivative(top, 1, max_order=6)


def test_total_derivatives_commute():
    p = s2(1, 0) ** 2 * s2(0, 1) + FS2.poly("S") * s2(1, 1)
    assert total_derivative(total_derivative(p, 1), 2) == total_derivative(total_derivative(p, 2), 1)


# --- Euler operator ---------------------------------------------------------

def test_euler_of_exact_divergence_vanishes():
    assert euler_operator(U * UX, 0).is_zero()


def test_euler_of_dirichlet_density():
    assert euler_operator(UX * UX / 2, 0) == -UXX


def test_euler_matches_functional_gradient():
    # F[S] = mean(S * S_x^2) on a periodic grid; directional derivatives by
    # central differences against the pointwise Euler image.
    fs = FieldSet.build(1, [("S", "phase")])
    s, sx = fs.poly("S"), fs.poly("S", (1,))
    density = s * sx * sx
    grad = euler_operator(density, 0)
    torus = Torus(1, 64)
    rng = np.random.default_rng(5)
    field = np.real(torus.random_field(rng, modes=3))
    direction = np.real(torus.random_field(rng, modes=3))

    def functional(f):
        fx = np.real(torus.deriv(f, (1,)))
        return np.mean(f * fx * fx)

    eps = 1e-6
    numeric = (functional(field + eps * direction) - functional(field - eps * direction)) / (2 * eps)
    jets = {JetVar.of(0, (k,)): np.real(torus.deriv(field, (k,))) for k in range(3)}
    pointwise = grad.evaluate(jets)
    assert abs(numeric - np.mean(pointwise * direction)) < 1e-6


# --- divergence extraction -----------------------------------------------------

def test_divergence_extract_one_dimensional():
    assert divergence_extract(U * UX, 1) == [U * U / 2]


def test_divergence_extract_prefers_first_axis():
    flux = divergence_extract(s2(1, 1), 2)
    assert flux == [s2(0, 1), ZERO]
    assert divergence(flux) == s2(1, 1)


def test_divergence_extract_rejects_non_divergence():
    with pytest.raises(NotADivergenceError) as exc:
        divergence_extract(U, 1)
    assert "not a total divergence" in str(exc.value)


def test_divergence_extract_rejects_constants():
    with pytest.raises(DegenerateInputError):
        divergence_extract(UX + 1, 1)


# --- scale homotopy ------------------------------------------------------------

def test_scale_homotopy_linear():
    assert scale_homotopy(s2(1, 0), 1) == s2(1, 0) / 3


def test_scale_homotopy_quadratic():
    assert scale_homotopy(s2(1, 0) ** 2, 1) == s2(1, 0) ** 2 / 4


def test_scale_homotopy_matches_quadrature():
    rng = random.Random(11)
    nodes, weights = np.polynomial.legendre.leggauss(20)
    lam = (nodes + 1) / 2
    variables = [FS1.jet("u", (k,)) for k in range(3)]
    for _ in range(10):
        p = random_poly(rng, variables, 5, 4)
        k = rng.randint(0, 3)
        jets = {v: rng.uniform(-1.5, 1.5) for v in variables}
        values = [lam_i ** k * float(p.evaluate({v: lam_i * x for v, x in jets.items()}))
                  for lam_i in lam]
        quad = float(np.dot(weights, values)) / 2
        assert abs(quad - float(scale_homotopy(p, k).evaluate(jets))) < 1e-10


def test_scale_homotopy_rejects_negative_exponent():
    with pytest.raises(PreconditionError):
        scale_homotopy(U, -1)


# --- potentials -----------------------------------------------------------------

FSAB = FieldSet.build(1, ["a", "b"])
A_, B_ = FSAB.poly("a"), FSAB.poly("b")
JA, JB = FSAB.jet("a"), FSAB.jet("b")


def test_jet_potential_cubic():
    assert jet_potential({JA: 2 * A_ * B_, JB: A_ * A_}) == A_ * A_ * B_


def test_jet_potential_with_constant_partial():
    assert jet_potential({JA: B_, JB: A_ + 1}) == A_ * B_ + B_


def test_jet_potential_rejects_curl():
    with pytest.raises(NonIntegrableError):
        jet_potential({JA: B_, JB: -A_})


# --- exact evaluation ------------------------------------------------------------

def test_eval_at_jet_examples():
    ju, jux = FS1.jet("u"), FS1.jet("u", (1,))
    assert eval_at_jet(U * UX, {ju: 2, jux: 3}) == 6
    assert eval_at_jet(ZERO, {ju: 5}) == 0
    assert eval_at_jet(UX * UX / 2, {jux: Fraction(1, 3)}) == Fraction(1, 18)


def test_eval_at_jet_missing_assignment():
    with pytest.raises(PreconditionError):
        eval_at_jet(U * UX, {FS1.jet("u"): 1})


# --- field sets -------------------------------------------------------------------

def test_fieldset_rejects_duplicates_and_bad_roles():
    with pytest.raises(PreconditionError):
        FieldSet.build(1, ["u", "u"])
    with pytest.raises(PreconditionError):
        FieldSet.build(1, [("u", "velocity")])
    with pytest.raises(PreconditionError):
        FieldSet.build(0, ["u"])


def test_formatting_uses_axis_suffixes():
    assert FS2.format(s2(1, 1) * 2 + ONE) == "1 + 2*S_x1x2"
