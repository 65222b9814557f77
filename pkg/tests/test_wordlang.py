import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exactgate.bipartite import BipartiteShape, cnot
from exactgate.errors import ContextMismatch, DimensionMismatch, UnregisteredGenerator
from exactgate.formats import FormatError
from exactgate.synthesis import bipartite_alphabet
from exactgate.unitary_core import haar_unitary
from exactgate.wordlang import (
    Alphabet,
    Exp,
    FixedGateV,
    GateWord,
    Local,
    concat,
    empty_word,
    evaluate,
    fuse_locals,
    inverse_free,
    repeat,
    word_from_json,
    word_to_json,
)

S22 = BipartiteShape(2, 2)
ALPHA = bipartite_alphabet(cnot(), S22)
seeds = st.integers(0, 2**32 - 1)


def rand_word(rng, n, alpha=ALPHA):
    atoms = []
    for _ in range(n):
        r = rng.random()
        if r < 0.4:
            atoms.append(Local.of(haar_unitary(2, rng), haar_unitary(2, rng)))
        elif r < 0.7:
            atoms.append(FixedGateV)
        else:
            atoms.append(Exp("H", float(rng.normal())))
    return GateWord(tuple(atoms), alpha)


def test_empty_word_is_identity():
    assert np.array_equal(evaluate(empty_word(ALPHA)), np.eye(4))


def test_single_local(rng):
    a, b = haar_unitary(2, rng), haar_unitary(2, rng)
    assert np.allclose(evaluate(GateWord((Local.of(a, b),), ALPHA)), np.kron(a, b), atol=1e-15)


def test_product_order(rng):
    a, b, c, d = (haar_unitary(2, rng) for _ in range(4))
    w = GateWord((Local.of(a, b), FixedGateV, Local.of(c, d)), ALPHA)
    direct = np.kron(a, b) @ cnot() @ np.kron(c, d)
    assert np.max(np.abs(evaluate(w) - direct)) <= 1e-12


def test_exp_atom_uses_generator():
    w = GateWord((Exp("H", np.pi),), ALPHA)
    assert np.allclose(evaluate(w), np.diag([-1, -1, 1, 1]), atol=1e-15)
    with pytest.raises(UnregisteredGenerator):
        evaluate(GateWord((Exp("K", 1.0),), ALPHA))
    with pytest.raises(ValueError):
        Exp("H", float("nan"))


def test_dimension_mismatch():
    w = GateWord((Local.of(np.eye(3), np.eye(2)),), ALPHA)
    with pytest.raises(DimensionMismatch):
        evaluate(w)


@given(seeds, st.integers(0, 8), st.integers(0, 8))
def test_concat_homomorphism(seed, n1, n2):
    rng = np.random.default_rng(seed)
    w1, w2 = rand_word(rng, n1), rand_word(rng, n2)
    c = concat(w1, w2)
    assert len(c) == n1 + n2
    assert np.max(np.abs(evaluate(c) - evaluate(w1) @ evaluate(w2))) <= 1e-12


def test_concat_examples(rng):
    w = rand_word(rng, 3)
    assert concat(w, empty_word(ALPHA)).atoms == w.atoms
    assert len(concat(w, rand_word(rng, 4))) == 7
    other = Alphabet(S22, np.eye(4))
    with pytest.raises(ContextMismatch):
        concat(w, GateWord((), other))


def test_repeat(rng):
    w = rand_word(rng, 5)
    assert np.allclose(evaluate(repeat(w, 3)), np.linalg.matrix_power(evaluate(w), 3))


def test_fuse_examples(rng):
    l1 = Local.of(haar_unitary(2, rng), haar_unitary(2, rng))
    l2 = Local.of(haar_unitary(2, rng), haar_unitary(2, rng))
    fused = fuse_locals(GateWord((l1, l2), ALPHA))
    assert len(fused) == 1
    assert np.allclose(evaluate(fused), np.kron(l1.pair.a @ l2.pair.a, l1.pair.b @ l2.pair.b))
    lvl = GateWord((l1, FixedGateV, l2), ALPHA)
    assert fuse_locals(lvl).atoms == lvl.atoms


@given(seeds)
def test_fuse_preserves_value(seed):
    rng = np.random.default_rng(seed)
    w = rand_word(rng, 50)
    f = fuse_locals(w)
    assert np.max(np.abs(evaluate(f) - evaluate(w))) <= 1e-11
    assert f.v_count == w.v_count
    assert len(f) <= len(w)
    assert all(not (a is not FixedGateV and b is not FixedGateV) for a, b in zip(f.atoms, f.atoms[1:]))


def test_non_local_exp_blocks_fusion(rng):
    alpha = ALPHA.with_generator("K", np.diag([1.0, 0, 0, 0]))
    l1 = Local.of(haar_unitary(2, rng), haar_unitary(2, rng))
    w = GateWord((l1, Exp("K", 0.3), l1), alpha)
    assert len(fuse_locals(w)) == 3


@given(seeds)
def test_json_round_trip_is_bit_exact(seed):
    rng = np.random.default_rng(seed)
    w = rand_word(rng, 12)
    text = json.dumps(word_to_json(w))
    back = word_from_json(json.loads(text), ALPHA)
    assert np.array_equal(evaluate(back), evaluate(w))


def test_json_errors():
    with pytest.raises(FormatError):
        word_from_json({"type": "V"}, ALPHA)
    with pytest.raises(FormatError):
        word_from_json([{"type": "Vdag"}], ALPHA)


def test_linter(rng):
    assert inverse_free(rand_word(rng, 20))
    assert not inverse_free(GateWord(("Vdag",), ALPHA))
    assert not inverse_free(GateWord((Exp("K", 1.0),), ALPHA))


def test_generator_local_factors_checked():
    with pytest.raises(ValueError):
        ALPHA.with_generator("bad", np.kron(np.diag([1.0, 0]), np.eye(2)), (np.eye(2), np.zeros((2, 2))))
