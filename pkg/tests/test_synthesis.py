import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exactgate import synthesis as syn
from exactgate.bipartite import BipartiteShape, cnot, hadamard, swap_gate
from exactgate.errors import (
    HypothesisViolation,
    OutOfRange,
    PrimitiveGate,
    SynthesisBudgetExhausted,
    ToleranceExceeded,
)
from exactgate.tolerances import DEFAULT
from exactgate.unitary_core import Flavor, Unitary, distance, haar_unitary, log_generator
from exactgate.wordlang import FixedGateV, GateWord, Local, evaluate, inverse_free

S22 = BipartiteShape(2, 2)


# ---------------------------------------------------------------- approximate synthesis

def test_local_target_zero_layers(cnot_alphabet, rng):
    a, b = haar_unitary(2, rng), haar_unitary(2, rng)
    r = syn.approx_synthesize(np.kron(a, b), cnot_alphabet, "u")
    assert r.v_count == 0 and r.achieved <= 1e-12 and r.diagnostics["layers"] == 0


def test_gate_itself_one_atom(cnot_alphabet):
    r = syn.approx_synthesize(cnot(), cnot_alphabet, "u")
    assert r.word.atoms == (FixedGateV,) and r.achieved == 0.0


def test_swap_needs_three_cnots(cnot_alphabet):
    # oracle: SWAP = CNOT (H(x)H) CNOT (H(x)H) CNOT
    hh = np.kron(hadamard(), hadamard())
    assert np.allclose(cnot() @ hh @ cnot() @ hh @ cnot(), swap_gate(S22).matrix)
    r = syn.approx_synthesize(swap_gate(S22).matrix, cnot_alphabet, "pu")
    assert r.v_count == 3 and r.achieved <= 1e-8
    assert distance(evaluate(r.word), swap_gate(S22).matrix, "pu") == pytest.approx(r.achieved, abs=1e-15)


def test_primitive_gate_refused(rng):
    alpha = syn.bipartite_alphabet(swap_gate(S22).matrix, S22)
    with pytest.raises(PrimitiveGate):
        syn.approx_synthesize(haar_unitary(4, rng), alpha)


def test_budget_exhausted_reports_best(cnot_alphabet, rng):
    cfg = syn.SynthesisConfig(layer_counts=(0, 1), restarts=2)
    with pytest.raises(SynthesisBudgetExhausted) as exc:
        syn.approx_synthesize(haar_unitary(4, rng), cnot_alphabet, "pu", cfg)
    assert exc.value.best > cfg.target_distance


def test_config_validation():
    with pytest.raises(ValueError):
        syn.SynthesisConfig(target_distance=0)
    with pytest.raises(ValueError):
        syn.SynthesisConfig(layer_counts=(2, 1))
    with pytest.raises(ValueError):
        syn.SynthesisConfig(layer_counts=())


def test_haar_target_approximated(cnot_alphabet, rng):
    t = haar_unitary(4, rng)
    r = syn.approx_synthesize(t, cnot_alphabet, "u")
    assert r.achieved <= 1e-10 and inverse_free(r.word)
    assert r.v_count == 3


# ---------------------------------------------------------------- covering

def test_covering_examples():
    assert syn.covering_count(1.0) == 4
    assert syn.covering_count(2.0) == 2
    for bad in (0.0, -1.0, 2.5):
        with pytest.raises(OutOfRange):
            syn.covering_count(bad)


def test_covering_monotone():
    grid = np.geomspace(1e-6, 2.0, 200)
    n = [syn.covering_count(d) for d in grid]
    assert all(a >= b for a, b in zip(n, n[1:]))
    assert n[0] > 1e6


@given(st.floats(1e-6, 2.0))
def test_covering_is_least_strict_bound(delta):
    n = syn.covering_count(delta)
    q = math.pi / (2 * math.asin(delta / 2))
    assert n > q * (1 - 1e-12) and n - 1 <= q * (1 + 1e-12)


def test_split_target_examples(rng):
    assert np.allclose(syn.split_target(np.eye(4), 9).matrix, np.eye(4))
    u = haar_unitary(4, rng)
    r = syn.split_target(u, 6)
    n_u = np.max(np.abs(np.linalg.eigvalsh(log_generator(u).matrix)))
    n_r = np.max(np.abs(np.linalg.eigvalsh(log_generator(r).matrix)))
    assert n_r == pytest.approx(n_u / 6, abs=1e-12)
    delta = 0.07
    n = syn.covering_count(delta)
    assert distance(syn.split_target(u, n, delta, "pu").matrix, np.eye(4), "pu") <= delta
    with pytest.raises(OutOfRange):
        syn.split_target(u, 2, 1e-3, "u")


def test_factor_tolerance_splits_angle():
    t = syn.factor_tolerance(1e-7, 43)
    # n identical errors add in spectral angle, so the composite stays in budget
    assert 2.0 * math.sin(0.5 * 43 * math.acos(1 - t)) ** 2 <= 0.5e-7
    assert t < 1e-7 / (2 * 43)


# ---------------------------------------------------------------- hypotheses

def test_certify_cnot(cnot_alphabet):
    rep = syn.certify_universality_inputs(cnot_alphabet, "H", "pu")
    assert rep.ok
    assert syn.certify_universality_inputs(cnot_alphabet, "H", "u").ok


def test_certify_clauses():
    swap = syn.bipartite_alphabet(swap_gate(S22).matrix, S22)
    with pytest.raises(HypothesisViolation) as e:
        syn.certify_universality_inputs(swap)
    assert e.value.clause == "imprimitive"
    scalar = syn.bipartite_alphabet(cnot(), S22, np.eye(4))
    with pytest.raises(HypothesisViolation) as e:
        syn.certify_universality_inputs(scalar)
    assert e.value.clause == "not_proportional"
    traceless = syn.bipartite_alphabet(cnot(), S22, np.kron(np.diag([1.0, -1.0]), np.eye(2)))
    assert syn.certify_universality_inputs(traceless, flavor="pu").ok
    with pytest.raises(HypothesisViolation) as e:
        syn.certify_universality_inputs(traceless, flavor="u")
    assert e.value.clause == "nonzero_trace"
    nonlocal_h = syn.bipartite_alphabet(cnot(), S22, np.diag([1.0, 0, 0, 0]))
    with pytest.raises(HypothesisViolation) as e:
        syn.certify_universality_inputs(nonlocal_h)
    assert e.value.clause == "exp_in_S"
    rep = syn.certify_universality_inputs(nonlocal_h, raise_on_failure=False)
    assert not rep.ok and rep.to_json()["exp_iHt_in_S"] is False


def test_default_generator_properties():
    h, (ha, hb) = syn.default_generator(S22)
    assert np.allclose(h, np.kron(np.diag([1, 0]), np.eye(2)))
    assert np.trace(h) != 0
    assert np.allclose(np.kron(ha, np.eye(2)) + np.kron(np.eye(2), hb), h)


# ---------------------------------------------------------------- exact synthesis

def test_identity_short_circuit(cnot_chart):
    ch, nb = cnot_chart
    r = syn.exact_synthesize(np.eye(4), ch, nb)
    assert len(r.word) == 0 and r.achieved == 0.0
    r = syn.exact_synthesize(1j * np.eye(4), ch, nb)
    assert len(r.word) == 0


def test_exact_haar_targets_sound_and_uniform(cnot_chart):
    ch, nb = cnot_chart
    rng = np.random.default_rng(123)
    lengths = set()
    for _ in range(20):
        t = haar_unitary(4, rng)
        r = syn.exact_synthesize(t, ch, nb)
        fresh = GateWord(tuple(r.word.atoms), r.word.alphabet)
        assert abs(distance(evaluate(fresh), t, "pu") - r.achieved) <= 1e-12
        assert r.achieved <= 1e-7
        assert inverse_free(r.word)
        assert r.length_L <= r.diagnostics["length_bound"]
        assert r.diagnostics["length_bound"] == r.diagnostics["n"] * (nb.ell + nb.ell_prime)
        assert "phase_alignment" in r.diagnostics
        lengths.add(r.length_L)
    assert len(lengths) == 1


def test_planted_word(cnot_chart):
    ch, nb = cnot_chart
    rng = np.random.default_rng(8)
    atoms = []
    for _ in range(4):
        atoms += [Local.of(haar_unitary(2, rng), haar_unitary(2, rng)), FixedGateV]
    w = GateWord(tuple(atoms), ch.alphabet)
    r = syn.exact_synthesize(evaluate(w), ch, nb)
    assert distance(evaluate(r.word), evaluate(w), "pu") <= 1e-7


def test_monotone_refinement(cnot_chart):
    ch, nb = cnot_chart
    t = haar_unitary(4, np.random.default_rng(31))
    loose = DEFAULT.replace(exact=1.0)
    ach = [syn.exact_synthesize(t, ch, nb, loose, solve_tol=s).achieved for s in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert all(b <= a + 1e-13 for a, b in zip(ach, ach[1:]))


def test_warm_start_saves_iterations(cnot_chart):
    ch, nb = cnot_chart
    t = haar_unitary(4, np.random.default_rng(32))
    warm = syn.exact_synthesize(t, ch, nb).diagnostics["newton_iters"]
    cold = syn.exact_synthesize(t, ch, nb, warm_start=False).diagnostics["newton_iters"]
    assert warm < cold


def test_tolerance_exceeded(cnot_chart):
    ch, nb = cnot_chart
    t = haar_unitary(4, np.random.default_rng(33))
    with pytest.raises(ToleranceExceeded) as e:
        syn.exact_synthesize(t, ch, nb, DEFAULT.replace(exact=1e-16), solve_tol=1e-9)
    assert e.value.achieved > 1e-16


def test_flavor_mismatch(cnot_chart):
    ch, nb = cnot_chart
    with pytest.raises(HypothesisViolation):
        syn.exact_synthesize(Unitary(np.eye(4), "u"), ch, nb)


@pytest.mark.slow
def test_full_group_pipeline(cnot_alphabet):
    ch, nb = syn.prepare(cnot_alphabet, "u", seed=2)
    assert ch.m == 16
    t = haar_unitary(4, np.random.default_rng(44))
    r = syn.exact_synthesize(Unitary(t, "u"), ch, nb)
    assert distance(evaluate(r.word), t, Flavor.FULL) <= 1e-7
