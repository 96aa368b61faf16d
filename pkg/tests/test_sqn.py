import pytest

from avbracket.canonform.admissible import canonical_pair, sx
from avbracket.canonform.lagrangian import lagrangian_emit
from avbracket.canonform.obstruction import decoupling_obstruction_search
from avbracket.canonform.sqn import (canonical_form_check, classify_annihilator_part,
                                     pseudo_canonicalize_thm31, reduce_to_sqn)
from avbracket.canonform.transform import HydroTransform, transform_bracket
from avbracket.dsl import load_spec
from avbracket.errors import PreconditionError, RefusalError
from avbracket.jetcalc import ZERO, DiffPoly, FieldSet, JetVar, euler_operator
from avbracket.locbracket import LocalBracket, hamiltonian_flow

from conftest import corpus_path
from instances import canonical_sqn, scrambled_sqn


def reference():
    return load_spec(corpus_path("example_bracket.br")).bracket()


def coupled_bracket():
    """One phase, one annihilator, ``{Q, N} = N delta'`` and ``{N, N} = delta'``."""
    B0 = canonical_sqn(1, 1, 1, {(0, 0, 0): 1})
    fs = B0.fieldset
    B = transform_bracket(B0, HydroTransform.build(fs, shifts={"Q": fs.poly("N1") ** 2 / 2}))
    n, nx = fs.poly("N1"), fs.poly("N1", (1,))
    assert B.entry(1, 2) == {(1,): n}
    assert B.entry(1, 1) == {(1,): n * n, (0,): n * nx}
    return B


# --- reduced form ----------------------------------------------------------------------

def test_reference_bracket_metric():
    B = reference()
    Bq = reduce_to_sqn(B).bracket
    fs = B.fieldset
    assert Bq.g(0, 0, 0) == sx(fs, 0, 1)
    assert Bq.g(0, 0, 1) == -sx(fs, 0, 0)
    assert Bq.g(0, 1, 0) == DiffPoly.const(1) and Bq.g(1, 1, 0).is_zero()
    assert Bq.A(0, 1, 0) == fs.poly("N2")


def test_delta_term_in_annihilator_block_is_reported():
    B = reference()
    fs = B.fieldset
    bad = B + LocalBracket(fs, {(2, 2, (0, 0)): sx(fs, 0, 0)})
    red = reduce_to_sqn(bad)
    assert red.bracket is None
    labels = [label for label, _ in red.report.residual]
    assert any("delta term" in label for label in labels)


def test_reduced_form_requires_field_order():
    fields = reference().fieldset.fields
    fs = FieldSet(2, (fields[0], fields[2], fields[1], fields[3]), 6)
    with pytest.raises(PreconditionError):
        reduce_to_sqn(LocalBracket(fs, {}))


# --- classification ----------------------------------------------------------------------

def test_constant_metric_is_simple_and_nondegenerate():
    B = canonical_sqn(1, 2, 2, {(0, 0, 0): 1, (1, 1, 0): -1, (0, 1, 1): 2, (1, 0, 1): 2})
    cls = classify_annihilator_part(reduce_to_sqn(B).bracket)
    assert cls.simple and cls.nondegenerate and cls.directions == (0, 1)


def test_reference_bracket_is_nondegenerate_but_not_simple():
    cls = classify_annihilator_part(reduce_to_sqn(reference()).bracket)
    assert cls.describe() == "non-degenerate, not simple"
    assert cls.directions == (0,)


def test_vanishing_metric_is_degenerate():
    cls = classify_annihilator_part(reduce_to_sqn(canonical_sqn(1, 1, 1, {})).bracket)
    assert not cls.nondegenerate and cls.simple


# --- pseudo-canonical transform ----------------------------------------------------------------

def test_uncoupled_bracket_gets_identity_shifts():
    B = canonical_sqn(2, 1, 1, {(0, 0, 0): 3})
    T = pseudo_canonicalize_thm31(reduce_to_sqn(B).bracket)
    assert T.images == HydroTransform.identity(B.fieldset).images


def test_linear_coupling_is_removed_by_quadratic_shift():
    B = coupled_bracket()
    fs = B.fieldset
    T = pseudo_canonicalize_thm31(reduce_to_sqn(B).bracket)
    assert T.shift("Q") == -fs.poly("N1") ** 2 / 2
    Bn = transform_bracket(B, T)
    assert not Bn.entry(1, 2) and not Bn.entry(2, 1)
    assert canonical_form_check(Bn, 1, 1).passed


def test_non_constant_metric_is_refused():
    with pytest.raises(RefusalError, match="not simple"):
        pseudo_canonicalize_thm31(reduce_to_sqn(reference()).bracket)


def test_degenerate_metric_is_refused():
    with pytest.raises(RefusalError, match="degenerate"):
        pseudo_canonicalize_thm31(reduce_to_sqn(canonical_sqn(1, 1, 1, {})).bracket)


def test_scrambled_instances_recover_canonical_form():
    for seed in (0, 3, 11):
        B, B0, _, m, s = scrambled_sqn(seed)
        Bn = transform_bracket(B, pseudo_canonicalize_thm31(reduce_to_sqn(B).bracket))
        assert canonical_form_check(Bn, m, s).passed


# --- obstruction search -----------------------------------------------------------------------

def test_reference_bracket_is_infeasible_at_degree_two():
    B = reference()
    verdict = decoupling_obstruction_search(reduce_to_sqn(B).bracket, degree_bound=2)
    assert verdict.verdict == "infeasible"
    cert = verdict.primary
    assert cert.groebner == ("1",)
    assert B.fieldset.var_name(JetVar.of(cert.phase, (1, 0) if cert.slot == 0 else (0, 1))) == "S_x1"


def test_all_certificates_with_workers_agree():
    Bq = reduce_to_sqn(reference()).bracket
    serial = decoupling_obstruction_search(Bq, 2, all_certificates=True)
    threaded = decoupling_obstruction_search(Bq, 2, all_certificates=True, workers=3)
    assert serial.certificates == threaded.certificates
    assert len(serial.certificates) >= 1


def test_canonical_bracket_is_feasible_with_identity_witness():
    B = canonical_sqn(1, 1, 2, {(0, 0, 0): 1})
    verdict = decoupling_obstruction_search(reduce_to_sqn(B).bracket)
    assert verdict.feasible
    assert verdict.witness.images == HydroTransform.identity(B.fieldset).images


def test_eligible_bracket_witness_is_the_pseudo_transform():
    B = coupled_bracket()
    Bq = reduce_to_sqn(B).bracket
    verdict = decoupling_obstruction_search(Bq)
    assert verdict.feasible
    assert verdict.witness.images == pseudo_canonicalize_thm31(Bq).images


def test_degree_bound_must_be_positive():
    with pytest.raises(PreconditionError):
        decoupling_obstruction_search(reduce_to_sqn(reference()).bracket, degree_bound=0)


def test_fully_degenerate_metric_is_undecided():
    verdict = decoupling_obstruction_search(reduce_to_sqn(canonical_sqn(1, 1, 1, {})).bracket)
    assert verdict.verdict == "undecided"
    assert verdict.summary() == "undecided up to degree 2"


# --- action densities -------------------------------------------------------------------------

def test_quadratic_hamiltonian_action():
    B = canonical_pair(1, 1)
    q = B.fieldset.poly("Q")
    res = lagrangian_emit(B, q * q / 2)
    assert res.format() == "S_t*Q - 1/2*Q^2"
    assert res.format_reduced() == "1/2*S_t^2"


def test_zero_hamiltonian_has_no_reduction():
    res = lagrangian_emit(canonical_pair(1, 1), ZERO)
    assert res.reduced is None
    assert "singular" in res.note


def test_wave_action_reproduces_the_flow():
    B = canonical_pair(1, 1)
    fs = B.fieldset
    h = fs.poly("Q") ** 2 / 2 + sx(fs, 0, 0) ** 2 / 2
    assert hamiltonian_flow(B, h) == [fs.poly("Q"), fs.poly("S", (2,))]
    res = lagrangian_emit(B, h)
    st = res.reduced_fieldset
    s_tt, s_xx = st.poly("S", (0, 2)), st.poly("S", (2, 0))
    # S_t = Q and Q_t = S_xx combine to S_tt = S_xx.
    assert euler_operator(res.reduced, 0) == s_xx - s_tt


def test_action_needs_canonical_pair():
    with pytest.raises(PreconditionError):
        lagrangian_emit(load_spec(corpus_path("adm_sx_half.br")).bracket(), ZERO)
