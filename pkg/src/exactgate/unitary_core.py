"""Dense numerics on U(d) and PU(d).

Conventions
-----------
* The distance between two unitaries is ``1 - lambda_min(Herm(U^dag V))``.
  Because ``U^dag V`` is normal, its Hermitian part has eigenvalues
  ``cos(theta_j)`` where ``theta_j`` are the eigenphases, so the distance is
  ``1 - min_j cos(theta_j)``.  We evaluate it as ``2 sin^2(theta/2)`` which
  keeps full relative precision near zero.
* In the projective flavor the distance is additionally minimised over a
  global phase applied to one argument.  The optimum centres the smallest
  arc of the unit circle containing all eigenphases.
* Logarithms use the principal branch with phases in (-pi, pi]; a phase
  within ``branch`` of -pi is mapped to +pi.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    BranchAmbiguity,
    DimensionMismatch,
    EigSolverFailure,
    FlavorMismatch,
    NotHermitian,
    NotSquare,
    NotUnitary,
    OutOfRange,
)
from .tolerances import DEFAULT, Tolerances

TWO_PI = 2.0 * np.pi


class Flavor(str, enum.Enum):
    FULL = "u"
    PROJECTIVE = "pu"

    @classmethod
    def parse(cls, value) -> "Flavor":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Unitary:
    """A validated unitary matrix tagged with its group flavor."""

    matrix: np.ndarray
    flavor: Flavor = Flavor.FULL

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))
        object.__setattr__(self, "flavor", Flavor.parse(self.flavor))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dag(self) -> np.ndarray:
        return self.matrix.conj().T

    def with_flavor(self, flavor) -> "Unitary":
        return Unitary(self.matrix, flavor)

    def __matmul__(self, other: "Unitary") -> "Unitary":
        if self.flavor is not other.flavor:
            raise FlavorMismatch(f"{self.flavor.value} vs {other.flavor.value}")
        return Unitary(self.matrix @ other.matrix, self.flavor)


@dataclass(frozen=True, eq=False)
class HermitianGenerator:
    """Hermitian ``H`` of the one-parameter group ``t -> exp(iHt)``."""

    matrix: np.ndarray
    prop_tol: float = DEFAULT.proportionality

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def identity_component(self) -> float:
        return self.trace / self.dim

    @property
    def not_proportional_to_identity(self) -> bool:
        shifted = self.matrix - self.identity_component * np.eye(self.dim)
        return bool(np.max(np.abs(shifted)) > self.prop_tol)

    def traceless(self) -> np.ndarray:
        return self.matrix - self.identity_component * np.eye(self.dim)


@dataclass(frozen=True, eq=False)
class EigenphaseSpectrum:
    phases: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * np.exp(1j * self.phases)) @ self.vectors.conj().T

    def power(self, n: int) -> np.ndarray:
        """``U^n`` from phase arithmetic; no repeated multiplication."""
        ph = np.mod(n * self.phases + np.pi, TWO_PI) - np.pi
        return (self.vectors * np.exp(1j * ph)) @ self.vectors.conj().T


def as_matrix(u) -> np.ndarray:
    if isinstance(u, (Unitary, HermitianGenerator)):
        return u.matrix
    return np.asarray(u, dtype=complex)


def hermitian_generator(m, tol: Tolerances = DEFAULT) -> HermitianGenerator:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSquare(f"shape {m.shape}")
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev > tol.hermiticity:
        raise NotHermitian(f"max|H - H^dag| = {dev:.3e}")
    return HermitianGenerator(0.5 * (m + m.conj().T), tol.proportionality)


def unitarity_deviation(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def validate_unitary(m, tol: float | None = None, flavor=Flavor.FULL) -> Unitary:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {m.shape}")
    tol = DEFAULT.unitarity if tol is None else tol
    dev = unitarity_deviation(m)
    if not dev <= tol:
        raise NotUnitary(dev, tol)
    return Unitary(m, flavor)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random U(d) from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


# ---------------------------------------------------------------- spectra

def _wrap(theta):
    """Map angles to (-pi, pi]."""
    t = np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(t <= -np.pi, np.pi, t)


def eigenphases(u, tol: Tolerances = DEFAULT) -> EigenphaseSpectrum:
    """Eigenphases in (-pi, pi] and an orthonormal eigenbasis.

    A complex Schur form of a normal matrix is diagonal, which gives an
    orthonormal eigenbasis even inside degenerate eigenspaces.
    """
    m = as_matrix(u)
    try:
        t, z = scipy.linalg.schur(m, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigSolverFailure(str(exc)) from exc
    lam = np.diag(t)
    if not np.all(np.isfinite(lam)):
        raise EigSolverFailure("non-finite eigenvalues")
    phases = np.angle(lam)
    phases = np.where(phases <= -np.pi + tol.branch, np.pi, phases)
    spec = EigenphaseSpectrum(phases, z)
    err = float(np.max(np.abs(spec.reconstruct() - m)))
    if err > tol.eig:
        raise EigSolverFailure(f"eigen reconstruction error {err:.2e}")
    return spec


def phase_alignment(theta) -> tuple[float, float]:
    """Return ``(phi, w)``: shift ``phi`` centring the phases, half-width ``w``.

    After adding ``phi`` every phase lies in ``[-w, w]`` and ``w`` is the
    smallest such half-width.
    """
    th = np.sort(np.mod(np.asarray(theta, dtype=float), TWO_PI))
    if th.size == 1:
        return float(-_wrap(th[0])), 0.0
    gaps = np.diff(np.append(th, th[0] + TWO_PI))
    k = int(np.argmax(gaps))
    # arc starts after the largest gap and runs counterclockwise
    start = th[(k + 1) % th.size]
    width = TWO_PI - gaps[k]
    centre = start + 0.5 * width
    return float(-_wrap(centre)), float(0.5 * width)


def _distance_from_phases(theta, flavor: Flavor) -> float:
    theta = np.asarray(theta, dtype=float)
    if flavor is Flavor.PROJECTIVE:
        _, w = phase_alignment(theta)
    else:
        w = float(np.max(np.abs(_wrap(theta))))
    return float(2.0 * np.sin(0.5 * w) ** 2)


def _resolve_flavor(u, v, flavor) -> Flavor:
    fl = [x.flavor for x in (u, v) if isinstance(x, Unitary)]
    if flavor is not None:
        return Flavor.parse(flavor)
    if len(fl) == 2 and fl[0] is not fl[1]:
        raise FlavorMismatch(f"{fl[0].value} vs {fl[1].value}")
    return fl[0] if fl else Flavor.FULL


def distance(u, v, flavor=None) -> float:
    """``1 - inf_psi Re<psi|U^dag V|psi>``, optionally modulo global phase.

    ``flavor`` defaults to the operands' own flavor (FULL for raw arrays).
    """
    fl = _resolve_flavor(u, v, flavor)
    a, b = as_matrix(u), as_matrix(v)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return distance_to_identity(a.conj().T @ b, fl)


def distance_to_identity(m, flavor=Flavor.FULL) -> float:
    lam = np.linalg.eigvals(as_matrix(m))
    return _distance_from_phases(np.angle(lam), Flavor.parse(flavor))


def max_phase_angle(m, flavor=Flavor.FULL) -> float:
    """Spectral angle ``||log M||_inf`` (after phase alignment if projective).

    Unlike :func:`distance` this is a genuine bi-invariant metric, so error
    budgets are split in this quantity.
    """
    th = np.angle(np.linalg.eigvals(as_matrix(m)))
    if Flavor.parse(flavor) is Flavor.PROJECTIVE:
        return phase_alignment(th)[1]
    return float(np.max(np.abs(th)))


def angle_for_distance(eps: float) -> float:
    """Largest spectral angle whose distance to I is at most ``eps``."""
    return float(np.arccos(1.0 - min(eps, 2.0)))


def distance_for_angle(theta: float) -> float:
    return float(2.0 * np.sin(0.5 * min(theta, np.pi)) ** 2)


# ---------------------------------------------------------------- exp / log

def exp_generator(h, t: float = 1.0, flavor=Flavor.FULL) -> Unitary:
    """``exp(iHt)`` via the eigendecomposition of ``H``."""
    m = as_matrix(h)
    try:
        w, z = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc
    return Unitary((z * np.exp(1j * t * w)) @ z.conj().T, flavor)


def expi(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Raw-array ``exp(iHt)`` for Hermitian ``h``."""
    w, z = np.linalg.eigh(h)
    return (z * np.exp(1j * t * w)) @ z.conj().T


def log_generator(u, tol: Tolerances = DEFAULT, strict: bool = False) -> HermitianGenerator:
    """Principal logarithm ``U = exp(iH)`` with ``||H||_inf <= pi``.

    With ``strict`` an eigenphase within ``tol.branch`` of the branch cut
    raises :class:`BranchAmbiguity` instead of taking the +pi convention.
    """
    spec = eigenphases(u, tol)
    if strict and np.any(np.abs(np.abs(spec.phases) - np.pi) <= tol.branch):
        raise BranchAmbiguity("eigenphase on the branch cut")
    z = spec.vectors
    h = (z * spec.phases) @ z.conj().T
    return HermitianGenerator(0.5 * (h + h.conj().T), tol.proportionality)


def logi(m: np.ndarray) -> np.ndarray:
    """Raw-array principal ``-i log(M)`` for unitary ``m``."""
    t, z = scipy.linalg.schur(m, output="complex")
    ph = np.angle(np.diag(t))
    h = (z * ph) @ z.conj().T
    return 0.5 * (h + h.conj().T)


def nth_root(u, n: int, tol: Tolerances = DEFAULT, strict: bool = False) -> Unitary:
    """Principal n-th root ``exp(i log_generator(U) / n)``."""
    if int(n) != n or n < 1:
        raise OutOfRange(f"root order must be a positive integer, got {n}")
    spec = eigenphases(u, tol)
    if strict and np.any(np.abs(np.abs(spec.phases) - np.pi) <= tol.branch):
        raise BranchAmbiguity("eigenphase on the branch cut")
    z = spec.vectors
    flavor = u.flavor if isinstance(u, Unitary) else Flavor.FULL
    return Unitary((z * np.exp(1j * spec.phases / n)) @ z.conj().T, flavor)


def matrix_power(u, n: int) -> np.ndarray:
    """``U^n`` by repeated squaring (independent of the phase route)."""
    return np.linalg.matrix_power(as_matrix(u), int(n))
