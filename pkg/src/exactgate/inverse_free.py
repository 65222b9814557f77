"""Approximate ``U^{-1}`` by a positive power ``U^n`` (Dirichlet's pigeonhole).

With eigenvalues ``exp(2 pi i alpha_j)``,
``U^n ~ U^{-1}`` iff the torus point ``(n + 1) alpha`` is close to 0, so the
search walks the multiples ``j alpha`` in phase space; matrix powers are
never formed.  Dirichlet's pigeonhole argument bounds how many multiples
have to be examined.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidEpsilon, OutOfRange, ScanLimitExceeded
from .unitary_core import (
    TWO_PI,
    Flavor,
    Unitary,
    angle_for_distance,
    as_matrix,
    distance,
    distance_for_angle,
    eigenphases,
)
from .wordlang import Exp, FixedGateV, GateWord, Local

_CHUNK = 4096


class SearchMethod(str, enum.Enum):
    EXHAUSTIVE_SCAN = "ExhaustiveScan"
    TORUS_PIGEONHOLE = "TorusPigeonhole"


@dataclass(frozen=True)
class InversePowerResult:
    exponent: int
    achieved_distance: float
    bound_used: int
    method: SearchMethod
    evaluations: int
    op_norm_deviation: float

    def to_json(self) -> dict:
        return {
            "n": self.exponent,
            "distance": self.achieved_distance,
            "evaluations": self.evaluations,
            "bound": self.bound_used,
            "method": self.method.value,
            "op_norm_deviation": self.op_norm_deviation,
        }


def phase_deviation_bound(eps_phase: float) -> float:
    """``|1 - exp(i eps)| = 2 sin(eps / 2)``."""
    if not 0.0 <= eps_phase <= math.pi:
        raise OutOfRange(f"phase deviation must lie in [0, pi], got {eps_phase}")
    return 2.0 * math.sin(0.5 * eps_phase)


def torus_radius(eps: float) -> float:
    """Torus (turns) radius equivalent to ``distance <= eps``."""
    return angle_for_distance(eps) / TWO_PI


def pigeonhole_budget(eps: float, d: int) -> int:
    """Candidates guaranteed to contain a hit: ``ceil((1/r)^d) + 1``.

    Volume argument: ``N > r^-d`` cubes of side ``r`` cannot be disjoint in
    the unit torus, so two of ``N`` multiples differ by at most ``r``.
    """
    return math.ceil((1.0 / torus_radius(eps)) ** d - 1e-9) + 1


def _row_distances(phases: np.ndarray, flavor: Flavor) -> np.ndarray:
    """Vectorised distance-to-identity for rows of eigenphases."""
    if flavor is Flavor.FULL:
        w = np.max(np.abs(np.mod(phases + np.pi, TWO_PI) - np.pi), axis=1)
    else:
        th = np.sort(np.mod(phases, TWO_PI), axis=1)
        gaps = np.diff(np.concatenate([th, th[:, :1] + TWO_PI], axis=1), axis=1)
        w = 0.5 * (TWO_PI - np.max(gaps, axis=1))
    return 2.0 * np.sin(0.5 * w) ** 2


def _flavor_of(u, flavor) -> Flavor:
    if flavor is not None:
        return Flavor.parse(flavor)
    return u.flavor if isinstance(u, Unitary) else Flavor.FULL


def inverse_power(u, eps: float, flavor=None, scan_limit: int | None = None,
                  method: str = "scan") -> InversePowerResult:
    """Find ``n >= 1`` with ``distance(U^n, U^{-1}) <= eps``.

    ``method="scan"`` tests ``k = 2, 3, ...`` in order and returns the first
    hit, i.e. the shortest power.  ``method="pigeonhole"`` is the literal
    Dirichlet construction: multiples are dropped into a grid of cells of
    side at most the torus radius and the first pair sharing a cell gives
    the exponent.  The scan stops within :func:`pigeonhole_budget`
    candidates, the grid within ``B^d + 1`` for ``B`` cells per axis.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidEpsilon(f"eps must lie in (0, 1), got {eps}")
    fl = _flavor_of(u, flavor)
    spec = eigenphases(u)
    theta = spec.phases
    budget = pigeonhole_budget(eps, theta.size)
    if method == "scan":
        return _scan(spec, fl, eps, budget, scan_limit)
    if method == "pigeonhole":
        return _pigeonhole(spec, fl, eps, scan_limit)
    raise ValueError(f"unknown method {method!r}")


def _scan(spec, fl, eps, budget, scan_limit):
    start = 0
    while True:
        j = np.arange(start, start + _CHUNK, dtype=np.int64)
        dist = _row_distances(np.outer(j, spec.phases), fl)
        hit = (dist <= eps) & (j >= 2)
        if hit.any():
            k = start + int(np.argmax(hit))
            if scan_limit is not None and k + 1 > scan_limit:
                break
            return _result(spec, fl, k, budget, SearchMethod.EXHAUSTIVE_SCAN, k + 1)
        start += _CHUNK
        if scan_limit is not None and start >= scan_limit:
            break
    raise ScanLimitExceeded(f"no inverse power within {scan_limit} candidates")


def _pigeonhole(spec, fl, eps, scan_limit):
    d = spec.phases.size
    boxes = math.ceil(1.0 / torus_radius(eps) - 1e-12)
    budget = boxes**d + 1
    radix = boxes ** np.arange(d, dtype=np.int64)
    alpha = np.mod(spec.phases / TWO_PI, 1.0)
    seen: dict[int, int] = {}
    start = 0
    while True:
        j = np.arange(start, start + _CHUNK, dtype=np.int64)
        cells = np.minimum((np.mod(np.outer(j, alpha), 1.0) * boxes).astype(np.int64), boxes - 1) @ radix
        for idx, key in enumerate(cells.tolist()):
            jj = start + idx
            if scan_limit is not None and jj + 1 > scan_limit:
                raise ScanLimitExceeded(f"no inverse power within {scan_limit} candidates")
            prev = seen.setdefault(key, jj)
            # a gap of 1 would mean n = 0; keep the earliest index and go on
            if jj - prev >= 2:
                return _result(spec, fl, jj - prev, budget, SearchMethod.TORUS_PIGEONHOLE, jj + 1)
        start += _CHUNK


def _result(spec, flavor, k, budget, method, evaluations) -> InversePowerResult:
    # k = n + 1: U^k ~ I  <=>  U^(k-1) ~ U^{-1}
    ph = np.mod(k * spec.phases + np.pi, TWO_PI) - np.pi
    dist = float(_row_distances(ph[None, :], flavor)[0])
    op = float(np.max(np.abs(2.0 * np.sin(0.5 * ph))))
    return InversePowerResult(int(k - 1), dist, int(budget), method, int(evaluations), op)


def verify_inverse_power(u, result: InversePowerResult, flavor=None) -> float:
    """Recompute ``distance(U^n, U^{-1})`` from matrices (eigen-power route)."""
    fl = _flavor_of(u, flavor)
    m = as_matrix(u)
    spec = eigenphases(m)
    return distance(spec.power(result.exponent), m.conj().T, fl)


def v_atom_budget(eps: float, k: int) -> float:
    """Per-``V`` error allowance when inverting a word with ``k`` ``V`` atoms.

    The half-split ``eps / 2k`` is tightened so the summed spectral angles
    (a true metric, unlike the distance itself) stay within ``eps``.
    """
    return min(eps / (2 * k), distance_for_angle(angle_for_distance(eps) / k))


def invert_word(word: GateWord, eps: float) -> GateWord:
    """Inverse-free word approximating ``evaluate(word)^{-1}`` within ``eps``.

    Locals and exponentials invert exactly; each ``V`` becomes ``V^n`` for a
    single ``n`` from :func:`inverse_power`.
    """
    if len(word) == 0:
        raise ValueError("cannot invert an empty word")
    k = word.v_count
    vpow = 0
    if k:
        vpow = inverse_power(word.alphabet.gate, v_atom_budget(eps, k), Flavor.FULL).exponent
    atoms: list = []
    for atom in reversed(word.atoms):
        if atom is FixedGateV:
            atoms.extend([FixedGateV] * vpow)
        elif isinstance(atom, Local):
            atoms.append(Local.of(atom.pair.a.conj().T, atom.pair.b.conj().T))
        elif isinstance(atom, Exp):
            atoms.append(Exp(atom.gen, -atom.t))
        else:
            raise TypeError(f"not an atom: {atom!r}")
    return GateWord(tuple(atoms), word.alphabet)
