"""Layered ``(A_k (x) B_k) V ... V (A_0 (x) B_0)`` templates and their gradients.

Each local factor is ``exp(i sum_p theta_p G_p)`` over a Hilbert-Schmidt
orthonormal Hermitian basis.  The cost is a smooth surrogate for the
distance:

* projective: ``1 - |tr(T^dag W)|^2 / d^2``
* full group: ``1 - Re tr(T^dag W) / d``

Both vanish exactly when ``W = T`` (up to phase in the projective case).
"""
from __future__ import annotations

import numpy as np

from .unitary_core import Flavor


def hermitian_basis(d: int, traceless: bool) -> np.ndarray:
    """Generalised Gell-Mann matrices, orthonormal under ``tr(A B)``.

    Order: symmetric off-diagonal, antisymmetric off-diagonal, diagonal
    (traceless), then ``I / sqrt(d)`` unless ``traceless``.
    """
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            mats.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2)
            m[k, j] = 1j / np.sqrt(2)
            mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    if not traceless:
        mats.append(np.eye(d, dtype=complex) / np.sqrt(d))
    return np.array(mats)


def exp_with_derivatives(theta: np.ndarray, basis: np.ndarray):
    """``U = exp(iK)``, ``K = sum theta_p G_p``, and every ``dU/dtheta_p``.

    Uses the divided-difference (Daleckii-Krein) formula in the eigenbasis
    of ``K``: ``(e^{ia} - e^{ib}) / (a - b) = i e^{i(a+b)/2} sinc((a-b)/2)``.
    """
    k = np.tensordot(theta, basis, axes=1)
    lam, q = np.linalg.eigh(k)
    e = np.exp(1j * lam)
    u = (q * e) @ q.conj().T
    half = 0.5 * (lam[:, None] - lam[None, :])
    phi = 1j * np.exp(0.5j * (lam[:, None] + lam[None, :])) * np.sinc(half / np.pi)
    g = q.conj().T @ basis @ q
    du = q @ (phi * g) @ q.conj().T
    return u, du


class LayeredTemplate:
    """Cost and gradient for a ``layers``-layer template against ``target``."""

    def __init__(self, gate: np.ndarray, dim_a: int, dim_b: int, layers: int, target: np.ndarray, flavor: Flavor):
        self.gate = np.asarray(gate, dtype=complex)
        self.da, self.db = dim_a, dim_b
        self.d = dim_a * dim_b
        self.layers = layers
        self.target_dag = np.asarray(target, dtype=complex).conj().T
        self.flavor = Flavor.parse(flavor)
        # one global phase is enough; keep it on the A factors in the full group
        self.basis_a = hermitian_basis(dim_a, traceless=self.flavor is Flavor.PROJECTIVE)
        self.basis_b = hermitian_basis(dim_b, traceless=True)
        self.na, self.nb = len(self.basis_a), len(self.basis_b)
        self.n_params = (layers + 1) * (self.na + self.nb)

    def locals(self, params: np.ndarray):
        p = params.reshape(self.layers + 1, self.na + self.nb)
        out = []
        for row in p:
            a, da = exp_with_derivatives(row[: self.na], self.basis_a)
            b, db = exp_with_derivatives(row[self.na:], self.basis_b)
            out.append((a, da, b, db))
        # row i parametrises A_i (x) B_i; the product lists A_k first
        return out

    def sequence(self, loc) -> list[np.ndarray]:
        seq = []
        for i in range(self.layers, -1, -1):
            a, _, b, _ = loc[i]
            seq.append(np.kron(a, b))
            if i:
                seq.append(self.gate)
        return seq

    def matrix(self, params: np.ndarray) -> np.ndarray:
        seq = self.sequence(self.locals(params))
        out = seq[0]
        for m in seq[1:]:
            out = out @ m
        return out

    def local_pairs(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(A_i, B_i)`` in product order (``A_k`` first)."""
        loc = self.locals(params)
        return [(loc[i][0], loc[i][2]) for i in range(self.layers, -1, -1)]

    def _cost_from_trace(self, t):
        if self.flavor is Flavor.PROJECTIVE:
            return 1.0 - abs(t) ** 2 / self.d**2
        return 1.0 - t.real / self.d

    def cost(self, params: np.ndarray) -> float:
        return float(self._cost_from_trace(np.trace(self.target_dag @ self.matrix(params))))

    def cost_and_grad(self, params: np.ndarray):
        loc = self.locals(params)
        seq = self.sequence(loc)
        n = len(seq)
        pre = [np.eye(self.d, dtype=complex)]
        for m in seq[:-1]:
            pre.append(pre[-1] @ m)
        suf = [None] * n
        acc = np.eye(self.d, dtype=complex)
        for i in range(n - 1, -1, -1):
            suf[i] = acc
            acc = seq[i] @ acc
        w = pre[-1] @ seq[-1]
        t = np.trace(self.target_dag @ w)

        dt = np.empty(self.n_params, dtype=complex)
        stride = self.na + self.nb
        for pos in range(0, n, 2):
            layer = self.layers - pos // 2
            a, da, b, db = loc[layer]
            env = (suf[pos] @ self.target_dag @ pre[pos]).reshape(self.da, self.db, self.da, self.db)
            fa = np.einsum("abce,eb->ac", env, b)
            fb = np.einsum("abce,ca->be", env, a)
            off = layer * stride
            dt[off:off + self.na] = np.einsum("ac,pca->p", fa, da)
            dt[off + self.na:off + stride] = np.einsum("be,qeb->q", fb, db)

        if self.flavor is Flavor.PROJECTIVE:
            grad = -2.0 * np.real(np.conj(t) * dt) / self.d**2
        else:
            grad = -np.real(dt) / self.d
        return float(self._cost_from_trace(t)), grad
