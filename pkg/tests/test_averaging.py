import warnings
from fractions import Fraction

import numpy as np
import pytest

from avbracket.averaging import (DensitySet, assemble_averaged, averaged_fieldset,
                                 closure_average, commuting_set_check, flux_extract,
                                 frame_commutator_check, load_table, save_table, torus_average,
                                 whitham_flow)
from avbracket.dsl import load_spec, parse_spec
from avbracket.errors import DegenerateRankWarning, NotADivergenceError, PreconditionError
from avbracket.jetcalc import ZERO, DiffPoly, FieldSet
from avbracket.locbracket import LocalBracket, jacobi_check

from conftest import corpus_path

FS = FieldSet.build(1, ["u"])
U, UX, UXX = FS.poly("u"), FS.poly("u", (1,)), FS.poly("u", (2,))
DPRIME = LocalBracket(FS, {(0, 0, (1,)): 1})


# --- commuting sets and fluxes ---------------------------------------------------

def test_single_density_commutes_with_momentum():
    assert commuting_set_check(DPRIME, U * U / 2, DensitySet([U])).passed


def test_dispersionless_conserved_set():
    assert commuting_set_check(DPRIME, U ** 3 / 6, DensitySet([U, U * U / 2])).passed


def test_cube_commutes_with_momentum():
    # {int u^3, int u^2/2} = int 3u^2 u_x = 0, so this pair passes.
    assert commuting_set_check(DPRIME, U * U / 2, DensitySet([U ** 3])).passed


def test_cube_against_dirichlet_energy_fails():
    # {int u^3, int u_x^2/2} = -3 int u_x^3, whose Euler image is 18 u_x u_xx.
    rep = commuting_set_check(DPRIME, UX * UX / 2, DensitySet([U ** 3]))
    assert not rep.passed
    residual = dict(rep.residual)
    assert residual["(P1,H) E[u]"] == 18 * UX * UXX
    assert residual["(H,P1) E[u]"] == -18 * UX * UXX


def test_pair_fluxes():
    fl = flux_extract(DPRIME, DensitySet([U, U * U / 2]))
    assert fl.pair_fluxes[(0, 0)] == [ZERO]
    assert fl.pair_fluxes[(0, 1)] == [U]
    assert fl.pair_fluxes[(1, 1)] == [U * U / 2]


def test_time_fluxes_follow_the_flow():
    fl = flux_extract(DPRIME, DensitySet([U, U * U / 2]), U ** 3 / 6)
    assert fl.time_fluxes == {0: [U * U / 2], 1: [U ** 3 / 3]}


def test_flux_extract_names_the_failing_pair():
    with pytest.raises(NotADivergenceError) as exc:
        flux_extract(DPRIME, DensitySet([U ** 3, UX * UX / 2]))
    assert "densities 1 and 2" in str(exc.value)


# --- torus averages -----------------------------------------------------------------

COSINE = parse_spec("""
dim 1;
field u : generic;
family cosine {
  phases 1;
  params a, k;
  phi u = fourier{ ((1), a, 0) };
  wave x1 = (k);
}
""").family("cosine")


def test_average_of_constant():
    assert torus_average(COSINE, DiffPoly.const(1), (2, 1)) == 1


def test_average_of_square():
    assert abs(torus_average(COSINE, U * U, (Fraction(3, 2), 1)) - 9 / 8) < 1e-12


def test_average_of_gradient_square_against_dense_quadrature():
    for a, k in [(1, 1), (Fraction(1, 2), 3), (2, Fraction(1, 3))]:
        theta = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
        dense = np.mean((float(a) * float(k) * np.sin(theta)) ** 2)
        got = torus_average(COSINE, UX * UX, (a, k))
        assert abs(got - dense) < 1e-12
        assert abs(got - float(a * a * k * k) / 2) < 1e-12


def test_average_reports_required_samples():
    with pytest.raises(PreconditionError) as exc:
        torus_average(COSINE, U ** 4, (1, 1), samples=5)
    assert "required 9" in str(exc.value)


def test_two_phase_average():
    fam = parse_spec("""
    dim 1;
    field u : generic;
    family two {
      phases 2;
      params a, b;
      phi u = fourier{ ((1,0), a, 0), ((0,1), 0, b), ((1,1), 1, 0) };
      wave x1 = (1, 2);
    }
    """).family()
    # u = a cos t1 - b sin t2 + cos(t1 + t2)
    assert abs(torus_average(fam, U * U, (2, 3)) - (4 + 9 + 1) / 2) < 1e-12
    assert abs(torus_average(fam, UX * UX, (2, 3)) - (4 + 9 * 4 + 9) / 2) < 1e-12


def test_table_round_trip(tmp_path):
    path = tmp_path / "table.json"
    save_table(path, ["a", "k"], [(Fraction(1, 2), 1)], {"A": [Fraction(1, 3)], "Q": ["0"]})
    data = load_table(path)
    assert data["params"] == ["a", "k"]
    assert data["grid"] == [["1/2", "1"]]
    assert data["values"]["A"] == ["1/3"]


# --- exact averages through the density closure -------------------------------------

def test_closure_average_modulo_divergences():
    av = averaged_fieldset(0, 2, 1)
    D = DensitySet([U, U * U / 2])
    f = 3 * U * U + U * UX - 2 + UXX
    assert closure_average(f, D, FS, av) == 6 * av.poly("U2") - 2


# --- assembled averaged brackets -------------------------------------------------------

def test_canonical_pair_from_unit_frame():
    avb = assemble_averaged(1, 0, 1, [[1]], {}, {})
    B = avb.to_local()
    assert B.coeffs == {(0, 1, (0,)): DiffPoly.const(1), (1, 0, (0,)): DiffPoly.const(-1)}
    assert jacobi_check(B).passed


def test_scalar_frame_proportional_to_density_is_consistent():
    # {S, U} = U delta is the one-dimensional affine Lie algebra; Jacobi holds.
    fs = averaged_fieldset(1, 1, 1)
    with pytest.warns(DegenerateRankWarning, match="some sampled jets"):
        avb = assemble_averaged(1, 0, 1, [[fs.poly("U")]], {}, {})
    assert jacobi_check(avb.to_local()).passed


def test_non_commuting_frames_fail_jacobi():
    fs = averaged_fieldset(2, 2, 1)
    with pytest.warns(DegenerateRankWarning):
        avb = assemble_averaged(2, 0, 1, [[1, 0], [0, fs.poly("U1")]], {}, {})
    assert not frame_commutator_check(avb).passed
    assert not jacobi_check(avb.to_local()).passed


def test_reference_bracket_from_blocks():
    target = load_spec(corpus_path("example_bracket.br")).bracket()
    fs = target.fieldset
    S1, S2, N2 = fs.poly("S", (1, 0)), fs.poly("S", (0, 1)), fs.poly("N2")
    A = {(0, 1, 1): N2, (1, 0, 1): N2, (1, 1, 0): S2, (1, 1, 1): -S1,
         (1, 2, 0): 1, (2, 1, 0): 1}
    Q = {(1, 0, 1): N2}
    avb = assemble_averaged(1, 2, 2, [[1, 0, 0]], A, Q, fieldset=fs)
    assert avb.to_local() == target
    assert frame_commutator_check(avb).passed
    assert jacobi_check(avb.to_local()).passed


def test_rank_deficiency_is_flagged():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        avb = assemble_averaged(1, 0, 1, [[0]], {}, {})
    assert avb.rank_status == "degenerate"
    assert any(issubclass(w.category, DegenerateRankWarning) for w in caught)


def test_shape_mismatch_is_rejected():
    with pytest.raises(PreconditionError):
        assemble_averaged(1, 0, 1, [[1, 0]], {}, {})


def test_whitham_flow_of_averaged_momentum_translates():
    # Averaged dispersionless bracket on (U1, U2) = (<u>, <u^2/2>).
    av = averaged_fieldset(0, 2, 1)
    U1, U2 = av.poly("U1"), av.poly("U2")
    avb = assemble_averaged(0, 2, 1, (), {(0, 0, 0): 1, (0, 1, 0): U1, (1, 0, 0): U1,
                                          (1, 1, 0): 2 * U2}, {(0, 1, 0): U1, (1, 1, 0): U2})
    flow = whitham_flow(avb, 1)
    assert flow == [av.poly("U1", (1,)), av.poly("U2", (1,))]
