"""Tensor-product structure and the imprimitivity decision procedure.

Index convention: ``|i_A i_B> = i_A * d_B + i_B`` (numpy ``kron`` order).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import (
    DimensionMismatch,
    NotNormalized,
    UnequalFactors,
    WitnessSearchFailure,
)
from .rng import stream
from .tolerances import DEFAULT, Tolerances
from .unitary_core import Flavor, Unitary, as_matrix, haar_unitary


@dataclass(frozen=True)
class BipartiteShape:
    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 2 or self.dim_b < 2:
            raise ValueError(f"both factors must be >= 2, got {self.dim_a}x{self.dim_b}")

    @property
    def total(self) -> int:
        return self.dim_a * self.dim_b


@dataclass(frozen=True, eq=False)
class LocalPair:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("a", "b"):
            m = np.array(getattr(self, name), dtype=complex, copy=True)
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    def kron(self) -> np.ndarray:
        return np.kron(self.a, self.b)


@dataclass(frozen=True, eq=False)
class ImprimitivityVerdict:
    imprimitive: bool
    witness: tuple[np.ndarray, np.ndarray] | None = None
    witness_schmidt: np.ndarray | None = None
    decomposition: tuple[LocalPair, bool] | None = None
    schmidt_coefficients: np.ndarray | None = None

    def to_json(self) -> dict:
        from .formats import matrix_to_json

        out = {"imprimitive": self.imprimitive}
        if self.schmidt_coefficients is not None:
            out["operator_schmidt"] = [float(c) for c in self.schmidt_coefficients]
        if self.witness is not None:
            a, b = self.witness
            out["witness"] = {
                "a": {"re": a.real.tolist(), "im": a.imag.tolist()},
                "b": {"re": b.real.tolist(), "im": b.imag.tolist()},
                "schmidt": [float(s) for s in self.witness_schmidt],
            }
        if self.decomposition is not None:
            pair, swap = self.decomposition
            out["decomposition"] = {
                "a": matrix_to_json(pair.a),
                "b": matrix_to_json(pair.b),
                "swap": bool(swap),
            }
        return out


def _check_dim(m: np.ndarray, shape: BipartiteShape) -> None:
    if m.shape != (shape.total, shape.total):
        raise DimensionMismatch(f"matrix {m.shape} does not match {shape.dim_a}x{shape.dim_b}")


def embed_local(pair: LocalPair, shape: BipartiteShape, flavor=Flavor.FULL) -> Unitary:
    if pair.a.shape != (shape.dim_a, shape.dim_a) or pair.b.shape != (shape.dim_b, shape.dim_b):
        raise DimensionMismatch(f"local pair {pair.a.shape}, {pair.b.shape} vs shape {shape}")
    return Unitary(pair.kron(), flavor)


def swap_gate(shape: BipartiteShape, flavor=Flavor.FULL) -> Unitary:
    if shape.dim_a != shape.dim_b:
        raise UnequalFactors(f"SWAP needs equal factors, got {shape.dim_a}x{shape.dim_b}")
    d = shape.dim_a
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return Unitary(s, flavor)


def realign(v: np.ndarray, shape: BipartiteShape) -> np.ndarray:
    """Reshuffle ``V`` so that ``A (x) B`` becomes the rank-one ``vec(A) vec(B)^T``."""
    da, db = shape.dim_a, shape.dim_b
    return v.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)


def operator_schmidt(v, shape: BipartiteShape):
    """``V = sum_k c_k A_k (x) B_k`` with Hilbert-Schmidt-orthonormal factors.

    Returns ``(coeffs, ops_a, ops_b)`` with ``coeffs`` non-increasing.
    """
    m = as_matrix(v)
    _check_dim(m, shape)
    u, s, vh = np.linalg.svd(realign(m, shape))
    da, db = shape.dim_a, shape.dim_b
    ops_a = u.T.reshape(-1, da, da)
    ops_b = vh.reshape(-1, db, db)
    return s, ops_a, ops_b


def operator_schmidt_rank(coeffs: np.ndarray, tol: Tolerances = DEFAULT) -> int:
    if coeffs.size == 0 or coeffs[0] == 0:
        return 0
    return int(np.sum(coeffs > tol.rank_rel * coeffs[0]))


def schmidt_coefficients(psi, shape: BipartiteShape) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != shape.total:
        raise DimensionMismatch(f"state of length {psi.size} vs total {shape.total}")
    return np.linalg.svd(psi.reshape(shape.dim_a, shape.dim_b), compute_uv=False)


def state_schmidt_rank(psi, shape: BipartiteShape, tol: float = DEFAULT.schmidt) -> int:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-12:
        raise NotNormalized(f"|psi| = {norm!r}")
    return int(np.sum(schmidt_coefficients(psi, shape) > tol))


def _nearest_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _product_factors(m: np.ndarray, shape: BipartiteShape) -> LocalPair:
    """Factor a rank-one operator ``m = U_A (x) U_B`` (up to global phase)."""
    s, ops_a, ops_b = operator_schmidt(m, shape)
    ua = _nearest_unitary(np.sqrt(shape.dim_a) * ops_a[0])
    ub = _nearest_unitary(np.sqrt(shape.dim_b) * ops_b[0])
    # put the global phase back so the pair reproduces m exactly
    ratio = np.vdot(np.kron(ua, ub), m) / shape.total
    return LocalPair(ua * (ratio / abs(ratio)), ub)


def reconstruction_error(v: np.ndarray, pair: LocalPair, swap: bool, shape: BipartiteShape) -> float:
    """``min_phi max|V - e^{i phi} [SWAP] A (x) B|``."""
    rec = pair.kron()
    if swap:
        rec = swap_gate(shape).matrix @ rec
    ov = np.vdot(rec, v)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.max(np.abs(v - phase * rec)))


def _linear_entropy(v: np.ndarray, a: np.ndarray, b: np.ndarray, shape: BipartiteShape) -> float:
    out = v @ np.kron(a, b)
    rho = out.reshape(shape.dim_a, shape.dim_b)
    red = rho @ rho.conj().T
    return float(1.0 - np.real(np.trace(red @ red)))


def _refine_witness(v, a0, b0, shape):
    da, db = shape.dim_a, shape.dim_b

    def unpack(p):
        a = p[:da] + 1j * p[da:2 * da]
        b = p[2 * da:2 * da + db] + 1j * p[2 * da + db:]
        return a / np.linalg.norm(a), b / np.linalg.norm(b)

    def obj(p):
        a, b = unpack(p)
        return -_linear_entropy(v, a, b, shape)

    p0 = np.concatenate([a0.real, a0.imag, b0.real, b0.imag])
    res = scipy.optimize.minimize(obj, p0, method="BFGS", options={"maxiter": 200})
    return unpack(res.x)


def find_witness(v, shape: BipartiteShape, seed: int = 0, restarts: int = 8):
    """Product state whose image under ``V`` is as entangled as we can find.

    Seeds come from the leading operator-Schmidt components and the
    computational/|+> product basis; the best seed is refined by ascent on
    the linear entropy, and random restarts are tried after that.
    """
    m = as_matrix(v)
    da, db = shape.dim_a, shape.dim_b
    _, ops_a, ops_b = operator_schmidt(m, shape)
    seeds = []
    for k in range(min(2, len(ops_a))):
        ua, _, _ = np.linalg.svd(ops_a[k])
        ub, _, _ = np.linalg.svd(ops_b[k])
        seeds.append((ua[:, 0], ub[:, 0]))
    plus_a = np.ones(da) / np.sqrt(da)
    plus_b = np.ones(db) / np.sqrt(db)
    for i in range(da):
        seeds.append((np.eye(da)[i], plus_b))
    for j in range(db):
        seeds.append((plus_a, np.eye(db)[j]))
    seeds.append((plus_a, plus_b))
    rng = stream(seed, "witness")
    for _ in range(restarts):
        seeds.append((haar_unitary(da, rng)[:, 0], haar_unitary(db, rng)[:, 0]))

    seeds = [(a.astype(complex), b.astype(complex)) for a, b in seeds]
    scored = sorted(seeds, key=lambda ab: -_linear_entropy(m, ab[0], ab[1], shape))
    best = None
    best_val = -1.0
    for a0, b0 in scored[:3]:
        a, b = _refine_witness(m, a0, b0, shape)
        val = _linear_entropy(m, a, b, shape)
        if val > best_val:
            best, best_val = (a, b), val
    return best


def is_imprimitive(v, shape: BipartiteShape, tol: Tolerances = DEFAULT, seed: int = 0) -> ImprimitivityVerdict:
    """Decide imprimitivity by operator-Schmidt rank and attach a certificate.

    ``V`` is primitive iff ``V`` or (for equal factors) ``SWAP V`` has
    operator-Schmidt rank one.  Imprimitive verdicts carry an entangling
    product-state witness; primitive ones carry the local decomposition.
    """
    m = as_matrix(v)
    _check_dim(m, shape)
    coeffs, _, _ = operator_schmidt(m, shape)
    if operator_schmidt_rank(coeffs, tol) == 1:
        pair = _product_factors(m, shape)
        return ImprimitivityVerdict(False, decomposition=(pair, False), schmidt_coefficients=coeffs)
    if shape.dim_a == shape.dim_b:
        sw = swap_gate(shape).matrix
        swapped = sw @ m
        sc, _, _ = operator_schmidt(swapped, shape)
        if operator_schmidt_rank(sc, tol) == 1:
            pair = _product_factors(swapped, shape)
            return ImprimitivityVerdict(False, decomposition=(pair, True), schmidt_coefficients=coeffs)

    a, b = find_witness(m, shape, seed=seed)
    sch = schmidt_coefficients(m @ np.kron(a, b), shape)
    if len(sch) < 2 or sch[1] <= tol.schmidt:
        raise WitnessSearchFailure(
            f"rank test says imprimitive but best witness has second Schmidt coefficient "
            f"{sch[1] if len(sch) > 1 else 0.0:.2e}"
        )
    return ImprimitivityVerdict(True, witness=(a, b), witness_schmidt=sch, schmidt_coefficients=coeffs)


def verify_verdict(v, verdict: ImprimitivityVerdict, shape: BipartiteShape, tol: Tolerances = DEFAULT) -> bool:
    """Re-check the certificate carried by a verdict, independent of how it was found."""
    m = as_matrix(v)
    if (verdict.witness is None) == (verdict.decomposition is None):
        return False
    if verdict.imprimitive:
        a, b = verdict.witness
        psi = m @ np.kron(a, b)
        psi = psi / np.linalg.norm(psi)
        sch = schmidt_coefficients(psi, shape)
        return bool(len(sch) > 1 and sch[1] > tol.schmidt)
    pair, swap = verdict.decomposition
    return reconstruction_error(m, pair, swap, shape) <= tol.recon


# common gates used in tests, examples and the CLI
def cnot() -> np.ndarray:
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def local_generator_split(h, shape: BipartiteShape, tol: float = 1e-10):
    """``(h_a, h_b)`` with ``H = h_a (x) I + I (x) h_b``, or ``None`` if ``H`` is not local.

    Partial traces fix both parts up to a shared scalar, which is put on ``h_a``.
    """
    m = as_matrix(h)
    _check_dim(m, shape)
    da, db = shape.dim_a, shape.dim_b
    t = m.reshape(da, db, da, db)
    ha = np.einsum("ijkj->ik", t) / db
    hb = np.einsum("ijil->jl", t) / da
    hb = hb - np.trace(hb) / db * np.eye(db)
    rebuilt = np.kron(ha, np.eye(db)) + np.kron(np.eye(da), hb)
    if np.max(np.abs(rebuilt - m)) > tol:
        return None
    return ha, hb


def named_gate(name: str) -> np.ndarray:
    """Built-in two-qubit gates by name: ``cnot``, ``cz``, ``swap``, ``identity``."""
    key = name.lower()
    if key == "cnot":
        return cnot()
    if key == "cz":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if key == "swap":
        return swap_gate(BipartiteShape(2, 2)).matrix.copy()
    if key == "identity":
        return np.eye(4, dtype=complex)
    raise KeyError(name)
