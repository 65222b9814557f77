"""Finite words over the gate alphabet ``S = {local pairs} u {V} u {exp(iHt)}``.

A word lists its atoms in product order: ``[U_k, ..., U_1]`` evaluates to
``U_k ... U_1`` so the rightmost atom acts first.  There is no atom type
for ``V^dag``; inverse-free output is a property of the data model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

from .bipartite import BipartiteShape, LocalPair
from .errors import ContextMismatch, DimensionMismatch, UnregisteredGenerator
from .formats import FormatError, matrix_from_json, matrix_to_json
from .unitary_core import Flavor, HermitianGenerator, Unitary, expi


@dataclass(frozen=True, eq=False)
class Generator:
    """A registered one-parameter subgroup.

    ``local`` optionally records ``H = h_a (x) I + I (x) h_b``; such
    exponentials are local gates and can be fused with neighbours.
    """

    hamiltonian: HermitianGenerator
    local: tuple[np.ndarray, np.ndarray] | None = None

    def exp(self, t: float) -> np.ndarray:
        return expi(self.hamiltonian.matrix, t)

    def local_exp(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        ha, hb = self.local
        return expi(ha, t), expi(hb, t)


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Evaluation context shared by all words: shape, ``V`` and generators."""

    shape: BipartiteShape
    gate: np.ndarray
    generators: Mapping[str, Generator] = field(default_factory=dict)

    def __post_init__(self):
        g = np.array(self.gate, dtype=complex, copy=True)
        g.setflags(write=False)
        object.__setattr__(self, "gate", g)
        object.__setattr__(self, "generators", dict(self.generators))
        if g.shape != (self.shape.total, self.shape.total):
            raise DimensionMismatch(f"V has shape {g.shape}, expected total dim {self.shape.total}")

    @property
    def dim(self) -> int:
        return self.shape.total

    def with_generator(self, gen_id: str, h, local=None) -> "Alphabet":
        h = h if isinstance(h, HermitianGenerator) else HermitianGenerator(np.asarray(h, dtype=complex))
        if h.dim != self.dim:
            raise DimensionMismatch(f"generator dim {h.dim} vs {self.dim}")
        if local is not None:
            ha, hb = (np.asarray(x, dtype=complex) for x in local)
            full = np.kron(ha, np.eye(self.shape.dim_b)) + np.kron(np.eye(self.shape.dim_a), hb)
            if np.max(np.abs(full - h.matrix)) > 1e-12:
                raise ValueError("local factors do not reproduce the generator")
            local = (ha, hb)
        gens = dict(self.generators)
        gens[gen_id] = Generator(h, local)
        return Alphabet(self.shape, self.gate, gens)

    def generator(self, gen_id: str) -> Generator:
        try:
            return self.generators[gen_id]
        except KeyError:
            raise UnregisteredGenerator(gen_id) from None

    def compatible(self, other: "Alphabet") -> bool:
        return self is other or (
            self.shape == other.shape
            and np.array_equal(self.gate, other.gate)
            and set(self.generators) == set(other.generators)
            and all(
                np.array_equal(self.generators[k].hamiltonian.matrix, other.generators[k].hamiltonian.matrix)
                for k in self.generators
            )
        )


# ---------------------------------------------------------------- atoms

@dataclass(frozen=True, eq=False)
class Local:
    pair: LocalPair

    @classmethod
    def of(cls, a, b) -> "Local":
        return cls(LocalPair(a, b))


class _FixedGate:
    """The fixed entangling gate ``V`` (singleton)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "V"


FixedGateV = _FixedGate()


@dataclass(frozen=True)
class Exp:
    gen: str
    t: float

    def __post_init__(self):
        if not np.isfinite(self.t):
            raise ValueError("exponential atom needs a finite t")


Atom = Union[Local, _FixedGate, Exp]


def atom_matrix(atom: Atom, alphabet: Alphabet) -> np.ndarray:
    if atom is FixedGateV:
        return alphabet.gate
    if isinstance(atom, Local):
        a, b = atom.pair.a, atom.pair.b
        if a.shape != (alphabet.shape.dim_a,) * 2 or b.shape != (alphabet.shape.dim_b,) * 2:
            raise DimensionMismatch(f"local atom {a.shape}/{b.shape} vs alphabet {alphabet.shape}")
        return np.kron(a, b)
    if isinstance(atom, Exp):
        return alphabet.generator(atom.gen).exp(atom.t)
    raise TypeError(f"not an atom: {atom!r}")


@dataclass(frozen=True, eq=False)
class GateWord:
    atoms: tuple
    alphabet: Alphabet

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def v_count(self) -> int:
        return sum(1 for a in self.atoms if a is FixedGateV)

    def evaluate(self, flavor=Flavor.FULL) -> Unitary:
        return Unitary(evaluate(self), flavor)


def empty_word(alphabet: Alphabet) -> GateWord:
    return GateWord((), alphabet)


def evaluate(word: GateWord) -> np.ndarray:
    """Ordered product of the atoms; the empty word is the identity."""
    out = np.eye(word.alphabet.dim, dtype=complex)
    for atom in word.atoms:
        out = out @ atom_matrix(atom, word.alphabet)
    return out


def concat(*words: GateWord) -> GateWord:
    """``evaluate(concat(w1, w2)) == evaluate(w1) @ evaluate(w2)``."""
    if not words:
        raise ValueError("concat needs at least one word")
    alpha = words[0].alphabet
    atoms: list = []
    for w in words:
        if not w.alphabet.compatible(alpha):
            raise ContextMismatch("words built over different alphabets")
        atoms.extend(w.atoms)
    return GateWord(tuple(atoms), alpha)


def repeat(word: GateWord, n: int) -> GateWord:
    return GateWord(word.atoms * n, word.alphabet)


def _as_local(atom: Atom, alphabet: Alphabet):
    if isinstance(atom, Local):
        return atom.pair.a, atom.pair.b
    if isinstance(atom, Exp):
        gen = alphabet.generator(atom.gen)
        if gen.local is not None:
            return gen.local_exp(atom.t)
    return None


def fuse_locals(word: GateWord) -> GateWord:
    """Merge runs of adjacent local atoms (including local exponentials).

    ``V`` atoms and non-local exponentials block fusion; the number of ``V``
    atoms never changes.
    """
    alpha = word.alphabet
    out: list = []
    run: list = []

    def flush():
        if len(run) == 1 and isinstance(run[0][0], Local):
            out.append(run[0][0])
        elif run:
            a, b = run[0][1]
            for _, (x, y) in run[1:]:
                a, b = a @ x, b @ y
            out.append(Local.of(a, b))
        run.clear()

    for atom in word.atoms:
        loc = _as_local(atom, alpha)
        if loc is None:
            flush()
            out.append(atom)
        else:
            run.append((atom, loc))
    flush()
    return GateWord(tuple(out), alpha)


def inverse_free(word: GateWord) -> bool:
    """Linter: every atom is a local, the fixed ``V``, or a registered exponential."""
    for atom in word.atoms:
        if atom is FixedGateV or isinstance(atom, Local):
            continue
        if isinstance(atom, Exp) and atom.gen in word.alphabet.generators:
            continue
        return False
    return True


# ---------------------------------------------------------------- serialisation

def atom_to_json(atom: Atom) -> dict:
    if atom is FixedGateV:
        return {"type": "V"}
    if isinstance(atom, Local):
        return {"type": "local", "a": matrix_to_json(atom.pair.a), "b": matrix_to_json(atom.pair.b)}
    if isinstance(atom, Exp):
        return {"type": "exp", "gen": atom.gen, "t": float(atom.t)}
    raise TypeError(f"not an atom: {atom!r}")


def atom_from_json(obj) -> Atom:
    kind = obj.get("type") if isinstance(obj, dict) else None
    if kind == "V":
        return FixedGateV
    if kind == "local":
        return Local.of(matrix_from_json(obj["a"]), matrix_from_json(obj["b"]))
    if kind == "exp":
        return Exp(str(obj["gen"]), float(obj["t"]))
    raise FormatError(f"unknown atom {obj!r}")


def word_to_json(word: GateWord) -> list:
    return [atom_to_json(a) for a in word.atoms]


def word_from_json(data: Iterable, alphabet: Alphabet) -> GateWord:
    if not isinstance(data, list):
        raise FormatError("a word file holds a JSON array of atoms")
    return GateWord(tuple(atom_from_json(a) for a in data), alphabet)
