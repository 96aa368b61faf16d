import itertools

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from avbracket.averaging import DensitySet, commuting_set_check, flux_extract
from avbracket.canonform.admissible import (canonicalize_thm21, lemma21_decompose, phase_fieldset,
                                            table_from_xi, unit)
from avbracket.canonform.obstruction import decoupling_obstruction_search
from avbracket.canonform.sqn import (canonical_form_check, classify_annihilator_part,
                                     pseudo_canonicalize_thm31, reduce_to_sqn)
from avbracket.canonform.transform import transform_bracket
from avbracket.dsl import load_spec
from avbracket.hydro1d import DN1DBracket, constant_form_verify, momentum_annihilator_check
from avbracket.jetcalc import (ZERO, DiffPoly, FieldSet, JetVar, apply_multi, divergence,
                               divergence_extract, eval_at_jet, euler_operator, scale_homotopy,
                               total_derivative)
from avbracket.locbracket import (LocalBracket, RawTerm, annihilator_check, delta_normalize,
                                  density_bracket, formal_adjoint, hamiltonian_flow)

from conftest import corpus_path
from instances import scrambled_sqn, shifted_admissible

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])

FS2 = FieldSet.build(2, ["u", "v"])
POOL2 = [JetVar.of(f, dv) for f in range(2) for dv in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)]]
FS1 = FieldSet.build(1, ["u"])
POOL1 = [JetVar.of(0, (k,)) for k in range(3)]
FS_UV = FieldSet.build(1, ["u", "v"])
POOL_UV = [JetVar.of(f, (k,)) for f in range(2) for k in range(3)]
U = FS1.poly("u")
DPRIME = LocalBracket(FS1, {(0, 0, (1,)): 1})

fractions = st.fractions(min_value=-4, max_value=4, max_denominator=3)


@st.composite
def polys(draw, pool, max_terms=4, max_degree=3, constant=True):
    out = DiffPoly.const(draw(fractions)) if constant else ZERO
    for _ in range(draw(st.integers(0, max_terms))):
        factors = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=max_degree))
        term = DiffPoly.const(draw(fractions))
        for v in factors:
            term = term * DiffPoly.var(v)
        out = out + term
    return out


def u_polys(max_degree=4):
    return st.lists(fractions, min_size=1, max_size=max_degree).map(
        lambda cs: sum((U ** (k + 1) * c for k, c in enumerate(cs)), ZERO))


# --- jet calculus ------------------------------------------------------------------------------

@SETTINGS
@given(polys(POOL2), polys(POOL2))
def test_euler_annihilates_divergences(a, b):
    div = divergence([a, b])
    assert all(euler_operator(div, f).is_zero() for f in range(2))


@SETTINGS
@given(polys(POOL2), polys(POOL2))
def test_extraction_reconstructs_divergences(a, b):
    div = divergence([a, b])
    if div.is_zero():
        return
    assert divergence(divergence_extract(div, 2)) == div


@SETTINGS
@given(polys(POOL1, max_degree=4))
def test_homotopy_reconstructs_the_polynomial(p):
    rebuilt = sum((DiffPoly.var(v) * scale_homotopy(p.partial(v), 0) for v in p.variables()), ZERO)
    assert rebuilt == p - DiffPoly.const(p.constant_term())


@SETTINGS
@given(polys(POOL2))
def test_total_derivatives_commute(p):
    assert total_derivative(total_derivative(p, 1), 2) == total_derivative(total_derivative(p, 2), 1)


@SETTINGS
@given(polys(POOL2), polys(POOL2), st.lists(fractions, min_size=len(POOL2), max_size=len(POOL2)))
def test_evaluation_is_a_ring_homomorphism(p, q, values):
    jets = dict(zip(POOL2, values))
    assert eval_at_jet(p * q, jets) == eval_at_jet(p, jets) * eval_at_jet(q, jets)
    assert eval_at_jet(p + q, jets) == eval_at_jet(p, jets) + eval_at_jet(q, jets)


# --- local brackets ------------------------------------------------------------------------------

raw_terms = st.builds(
    lambda c, base, order, flip: RawTerm(c, base, (("y", "x", (order,)) if flip else ("x", "y", (order,)),)),
    polys(POOL1, max_terms=2, max_degree=2), st.sampled_from(["x", "y"]),
    st.integers(0, 2), st.booleans())


@SETTINGS
@given(st.lists(raw_terms, max_size=3), st.lists(raw_terms, max_size=3))
def test_normal_form_is_linear_and_idempotent(a, b):
    na, nb = delta_normalize(a, 1), delta_normalize(b, 1)
    assert delta_normalize(a + b, 1) == na + nb
    again = [RawTerm(c, "x", (("x", "y", k[0]),)) for k, c in na.terms.items()]
    assert delta_normalize(again, 1) == na


@SETTINGS
@given(st.dictionaries(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 2)),
                       polys(POOL_UV, max_terms=2, max_degree=2), max_size=4))
def test_adjoint_is_an_involution(table):
    B = LocalBracket(FS_UV, {(i, j, (k,)): c for (i, j, k), c in table.items()})
    assert formal_adjoint(formal_adjoint(B)) == B


REFERENCE = load_spec(corpus_path("example_bracket.br")).bracket()


@SETTINGS
@given(fractions, fractions, fractions, st.integers(1, 3))
def test_casimir_flows_vanish(a, b, c, power):
    fs = REFERENCE.fieldset
    h = fs.poly("N2") ** power * a + fs.poly("N1") * b + c
    if annihilator_check(REFERENCE, h).passed:
        assert all(f.is_zero() for f in hamiltonian_flow(REFERENCE, h))


@SETTINGS
@given(u_polys(), u_polys())
def test_commuting_flows_change_densities_by_divergences(p, r):
    assert commuting_set_check(DPRIME, p, DensitySet([r])).passed
    change = r.partial(FS1.jet("u")) * hamiltonian_flow(DPRIME, p)[0]
    assert euler_operator(change, 0).is_zero()


@SETTINGS
@given(st.lists(u_polys(3), min_size=1, max_size=3))
def test_pair_fluxes_satisfy_the_divergence_identity(densities):
    fl = flux_extract(DPRIME, DensitySet(densities))
    for (i, j), flux in fl.pair_fluxes.items():
        target = density_bracket(DPRIME, densities[i], densities[j]).coefficient((0,))
        assert divergence(flux) == target


# --- canonical forms --------------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_canonicalization_soundness(seed):
    A, _ = shifted_admissible(seed)
    B = A.to_local()
    Bn = transform_bracket(B, canonicalize_thm21(A))
    m, zero = A.m, (0,) * A.d
    for a, b in itertools.product(range(m), repeat=2):
        assert not Bn.entry(m + a, m + b)
        assert Bn.entry(a, m + b) == ({zero: DiffPoly.const(1)} if a == b else {})


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(2, 3), st.data())
def test_divergence_free_fields_have_antisymmetric_potentials(m, d, data):
    fs = phase_fieldset(m, d)
    grads = [JetVar.of(a, unit(d, p)) for a in range(m) for p in range(d)]
    f0 = {}
    for q, r in itertools.combinations(range(d), 2):
        g = data.draw(polys(grads, max_terms=2, max_degree=2))
        f0[(q, r)], f0[(r, q)] = g, -g
    xi = [sum((apply_multi(f0.get((s, r), ZERO), unit(d, s), fs.max_order)
               for s in range(d) if s != r), ZERO) for r in range(d)]
    f = lemma21_decompose(table_from_xi(xi, fs, range(m)), fs)
    rebuilt = [sum((apply_multi(f.get((s, r), ZERO), unit(d, s), fs.max_order)
                    for s in range(d) if s != r), ZERO) for r in range(d)]
    assert rebuilt == xi
    assert all(f.get((s, r), ZERO) == -f.get((r, s), ZERO) for s in range(d) for r in range(d))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_accepted_annihilator_metrics_are_admissible(seed):
    B, _, _, m, s = scrambled_sqn(seed)
    Bq = reduce_to_sqn(B).bracket
    assert Bq is not None
    fs, d = Bq.fieldset, Bq.d
    for l, k in itertools.product(range(s), repeat=2):
        div = ZERO
        for p in range(d):
            g = Bq.g(l, k, p)
            assert g == Bq.g(k, l, p)
            assert not any(v.field >= 2 * m for v in g.variables())
            div = div + apply_multi(g, unit(d, p), fs.max_order)
        assert div.is_zero()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_pseudo_canonical_form_keeps_the_metric(seed):
    B, _, _, m, s = scrambled_sqn(seed)
    Bq = reduce_to_sqn(B).bracket
    before = classify_annihilator_part(Bq)
    Bn = transform_bracket(B, pseudo_canonicalize_thm31(Bq))
    assert canonical_form_check(Bn, m, s).passed
    after = reduce_to_sqn(Bn).bracket
    for l, k, p in itertools.product(range(s), range(s), range(Bq.d)):
        assert after.g(l, k, p) == Bq.g(l, k, p)
    assert classify_annihilator_part(after).directions == before.directions


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_obstruction_never_contradicts_the_pseudo_transform(seed):
    B, *_ = scrambled_sqn(seed)
    verdict = decoupling_obstruction_search(reduce_to_sqn(B).bracket)
    assert verdict.verdict != "infeasible"
    assert verdict.feasible


# --- hydrodynamic brackets --------------------------------------------------------------------------

@SETTINGS
@given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=4))
def test_constant_form_implies_annihilators_and_momentum(signs):
    B = DN1DBracket.constant(signs)
    rep = constant_form_verify(B)
    assert rep.passed and rep.details["signs"] == list(signs)
    assert momentum_annihilator_check(B).passed
