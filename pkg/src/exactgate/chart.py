"""Conjugated-exponential charts near the identity and their numerical inverse.

For conjugators ``U_1..U_m`` the chart is

    f(x) = U_1 e^{iHx_1} U_1^dag  U_2 e^{iHx_2} U_2^dag ... U_m e^{iHx_m} U_m^dag

and ``f~`` replaces every ``U_j`` and ``U_j^dag`` by an inverse-free word.
Tangent vectors are stored as coordinates in a Hilbert-Schmidt orthonormal
basis of su(d) (projective) or u(d) (full group).  Derivatives are taken in
the body frame: column ``j`` of the Jacobian holds the coordinates of
``-i f(x)^{-1} df/dx_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    HypothesisViolation,
    NeighborhoodCollapse,
    NoConvergence,
    SingularJacobian,
    SpanFailure,
)
from .formats import FormatError, matrix_from_json, matrix_to_json
from .rng import stream
from .templates import hermitian_basis
from .tolerances import DEFAULT, Tolerances
from .unitary_core import (
    Flavor,
    HermitianGenerator,
    angle_for_distance,
    as_matrix,
    distance,
    expi,
    haar_unitary,
    logi,
    phase_alignment,
)
from .wordlang import Alphabet, Exp, GateWord, evaluate, word_from_json, word_to_json

CHART_SCHEMA = "exactgate.chart/1"

# (target matrix, flavor, target distance, seed) -> inverse-free word
Synthesizer = Callable[[np.ndarray, Flavor, float, int], GateWord]


def build_tangent_basis(flavor, d: int) -> np.ndarray:
    """``m`` Hermitian matrices, orthonormal under ``tr(A B)``."""
    return hermitian_basis(d, traceless=Flavor.parse(flavor) is Flavor.PROJECTIVE)


def tangent_dim(flavor, d: int) -> int:
    return d * d - 1 if Flavor.parse(flavor) is Flavor.PROJECTIVE else d * d


def coords(basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ji->k", basis, x).real


@dataclass(frozen=True, eq=False)
class Chart:
    alphabet: Alphabet
    gen_id: str
    flavor: Flavor
    conjugators: tuple
    conj_words: tuple
    dagger_words: tuple
    approx_budget: float
    seed: int
    basis: np.ndarray = field(repr=False)
    conj_mats: np.ndarray = field(repr=False)
    dagger_mats: np.ndarray = field(repr=False)
    sigma_min: float = 0.0
    sigma_min_tilde: float = 0.0

    @property
    def m(self) -> int:
        return len(self.conjugators)

    @property
    def hamiltonian(self) -> np.ndarray:
        return self.alphabet.generator(self.gen_id).hamiltonian.matrix

    @property
    def ell(self) -> int:
        """Atoms in one ``f~`` evaluation (independent of ``x``)."""
        return sum(len(w) for w in self.conj_words) + self.m + sum(len(w) for w in self.dagger_words)

    def word_errors(self) -> np.ndarray:
        errs = [distance(p, u, self.flavor) for p, u in zip(self.conj_mats, self.conjugators)]
        errs += [distance(q, u.conj().T, self.flavor) for q, u in zip(self.dagger_mats, self.conjugators)]
        return np.array(errs)


@dataclass(frozen=True, eq=False)
class IdentityNeighborhood:
    delta: float
    anchor_word: GateWord
    anchor_matrix: np.ndarray
    ell: int
    ell_prime: int
    anchor_error: float
    revalidation_rate: float
    halvings: int


# ---------------------------------------------------------------- conjugators

def check_generator(h: HermitianGenerator, flavor) -> None:
    if not h.not_proportional_to_identity:
        raise HypothesisViolation("not_proportional", "H is proportional to the identity")
    if Flavor.parse(flavor) is Flavor.FULL and abs(h.trace) <= h.prop_tol:
        raise HypothesisViolation("nonzero_trace", "full-group charts need tr H != 0")


def select_conjugators(h: HermitianGenerator, flavor, seed: int = 0, tol: Tolerances = DEFAULT,
                       candidates_per_slot: int = 8, max_draws: int | None = None,
                       check_hypotheses: bool = True) -> list[np.ndarray]:
    """Greedy Haar search for ``m`` conjugators whose ``U H U^dag`` span the tangent space.

    A draw is admissible when the coordinate matrix stays of full column rank
    with smallest singular value at least ``tol.span``; among each batch of
    ``candidates_per_slot`` admissible draws the best-conditioned is kept.
    """
    fl = Flavor.parse(flavor)
    if check_hypotheses:
        check_generator(h, fl)
    d = h.dim
    m = tangent_dim(fl, d)
    basis = build_tangent_basis(fl, d)
    max_draws = 200 * m if max_draws is None else max_draws
    rng = stream(seed, "conjugators")
    hm = h.matrix
    chosen: list[np.ndarray] = []
    cols = np.zeros((m, 0))
    draws = 0
    while len(chosen) < m:
        best = None
        tried = 0
        while tried < candidates_per_slot:
            if draws >= max_draws:
                raise SpanFailure(f"only {len(chosen)} of {m} independent conjugates after {draws} draws")
            draws += 1
            u = haar_unitary(d, rng)
            col = coords(basis, u @ hm @ u.conj().T)
            trial = np.column_stack([cols, col])
            s = np.linalg.svd(trial, compute_uv=False)[-1]
            if s < tol.span:
                continue
            tried += 1
            if best is None or s > best[0]:
                best = (s, u, col)
        chosen.append(best[1])
        cols = np.column_stack([cols, best[2]])
    return chosen


# ---------------------------------------------------------------- chart maps

def _factors(chart: Chart, x, use_words: bool):
    h = chart.hamiltonian
    if use_words:
        left, right = chart.conj_mats, chart.dagger_mats
    else:
        left = chart.conjugators
        right = [u.conj().T for u in chart.conjugators]
    return [l @ expi(h, float(xj)) @ r for l, r, xj in zip(left, right, x)], right


def f_eval(chart: Chart, x, use_words: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.eye(chart.alphabet.dim, dtype=complex)
    for f in _factors(chart, x, use_words)[0]:
        out = out @ f
    return out


def f_word(chart: Chart, x) -> GateWord:
    atoms: list = []
    for cw, dw, xj in zip(chart.conj_words, chart.dagger_words, np.asarray(x, dtype=float)):
        atoms.extend(cw.atoms)
        atoms.append(Exp(chart.gen_id, float(xj)))
        atoms.extend(dw.atoms)
    return GateWord(tuple(atoms), chart.alphabet)


def jacobian(chart: Chart, x, use_words: bool = True, method: str = "analytic", step: float | None = None) -> np.ndarray:
    """Body-frame Jacobian as an ``m x m`` coordinate matrix."""
    x = np.asarray(x, dtype=float)
    if method == "fd":
        return _jacobian_fd(chart, x, use_words, DEFAULT.fd_step if step is None else step)
    h = chart.hamiltonian
    facs, right = _factors(chart, x, use_words)
    cols = np.empty((chart.m, chart.m))
    tail = np.eye(chart.alphabet.dim, dtype=complex)
    for j in range(chart.m - 1, -1, -1):
        s = right[j] @ tail
        cols[:, j] = coords(chart.basis, s.conj().T @ h @ s)
        tail = facs[j] @ tail
    return cols


def _jacobian_fd(chart: Chart, x, use_words, step) -> np.ndarray:
    base_dag = f_eval(chart, x, use_words).conj().T
    cols = np.empty((chart.m, chart.m))
    for j in range(chart.m):
        e = np.zeros(chart.m)
        e[j] = step
        plus = logi(base_dag @ f_eval(chart, x + e, use_words))
        minus = logi(base_dag @ f_eval(chart, x - e, use_words))
        cols[:, j] = coords(chart.basis, plus - minus) / (2 * step)
    return cols


def sigma_min(jac: np.ndarray) -> float:
    return float(np.linalg.svd(jac, compute_uv=False)[-1])


def _tangent_residual(chart: Chart, m: np.ndarray) -> np.ndarray:
    if chart.flavor is Flavor.PROJECTIVE:
        phi, _ = phase_alignment(np.angle(np.linalg.eigvals(m)))
        m = m * np.exp(1j * phi)
    return coords(chart.basis, logi(m))


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int


def newton_solve(chart: Chart, target, x0=None, tol: float | None = None, max_iter: int = 50,
                 use_words: bool = True, start_limit: float = 1.0, x_bound: float = np.pi) -> NewtonResult:
    """Damped Newton for ``f~(x) = target``.

    The step solves ``J dx = coords(-i log(f~(x)^dag target))``; the
    residual is the distance.  Steps that do not reduce it are halved up to
    ten times.  Targets further than ``start_limit`` from ``f~(x0)`` or
    iterates leaving ``|x|_inf <= x_bound`` are outside the trusted basin.
    """
    tol = DEFAULT.solve if tol is None else tol
    t = as_matrix(target)
    x = np.zeros(chart.m) if x0 is None else np.array(x0, dtype=float)
    cur = f_eval(chart, x, use_words)
    res = distance(cur, t, chart.flavor)
    if res > start_limit:
        raise NoConvergence(f"target at distance {res:.3f} is outside the chart neighbourhood", res)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NoConvergence(f"no convergence after {max_iter} iterations", res)
        it += 1
        jac = jacobian(chart, x, use_words)
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv[-1] < 1e-12 * max(sv[0], 1.0):
            raise SingularJacobian(f"sigma_min {sv[-1]:.2e} at iterate {it}")
        step = np.linalg.solve(jac, _tangent_residual(chart, cur.conj().T @ t))
        alpha = 1.0
        for _ in range(11):
            x_new = x + alpha * step
            new = f_eval(chart, x_new, use_words)
            r_new = distance(new, t, chart.flavor)
            if r_new < res:
                break
            alpha *= 0.5
        else:
            raise NoConvergence(f"residual stagnated at {res:.3e}", res)
        x, cur, res = x_new, new, r_new
        if np.max(np.abs(x)) > x_bound:
            raise NoConvergence("iterate left the trust region", res)
    return NewtonResult(x, res, it)


# ---------------------------------------------------------------- construction

def build_chart(alphabet: Alphabet, synthesizer: Synthesizer, flavor=Flavor.PROJECTIVE, gen_id: str = "H",
                seed: int = 0, tol: Tolerances = DEFAULT, synth_distance: float = 1e-10,
                candidates_per_slot: int = 8) -> Chart:
    """Select conjugators, synthesise ``U_j`` and ``U_j^dag`` as words, certify."""
    fl = Flavor.parse(flavor)
    h = alphabet.generator(gen_id).hamiltonian
    conj = select_conjugators(h, fl, seed, tol, candidates_per_slot)
    d = alphabet.dim
    basis = build_tangent_basis(fl, d)
    jac0 = np.column_stack([coords(basis, u @ h.matrix @ u.conj().T) for u in conj])
    s0 = sigma_min(jac0)
    m = len(conj)
    budget = s0 / (4 * m)
    target = min(budget, synth_distance)
    cw, dw = [], []
    for j, u in enumerate(conj):
        cw.append(synthesizer(u, fl, target, _sub_seed(seed, 2 * j)))
        dw.append(synthesizer(u.conj().T, fl, target, _sub_seed(seed, 2 * j + 1)))
    return assemble_chart(alphabet, gen_id, fl, conj, cw, dw, budget, seed)


def _sub_seed(seed: int, k: int) -> int:
    return int(stream(seed, f"word-{k}").integers(2**31))


def assemble_chart(alphabet, gen_id, flavor, conjugators, conj_words, dagger_words, budget, seed) -> Chart:
    """Build a :class:`Chart` from its parts and (re)certify it."""
    fl = Flavor.parse(flavor)
    d = alphabet.dim
    basis = build_tangent_basis(fl, d)
    conjugators = tuple(np.array(u, dtype=complex) for u in conjugators)
    pm = np.array([evaluate(w) for w in conj_words])
    qm = np.array([evaluate(w) for w in dagger_words])
    chart = Chart(alphabet, gen_id, fl, conjugators, tuple(conj_words), tuple(dagger_words), float(budget),
                  int(seed), basis, pm, qm)
    m = chart.m
    if m != tangent_dim(fl, d):
        raise SpanFailure(f"need {tangent_dim(fl, d)} conjugators, got {m}")
    s0 = sigma_min(jacobian(chart, np.zeros(m), use_words=False))
    if not s0 > 0:
        raise SpanFailure("df_0 is singular")
    errs = chart.word_errors()
    if np.max(errs) > budget:
        raise SpanFailure(f"conjugator word error {np.max(errs):.2e} exceeds budget {budget:.2e}")
    s1 = sigma_min(jacobian(chart, np.zeros(m), use_words=True))
    if s1 < s0 / 2:
        raise SpanFailure(f"sigma_min of df~_0 = {s1:.3e} below half of {s0:.3e}")
    object.__setattr__(chart, "sigma_min", s0)
    object.__setattr__(chart, "sigma_min_tilde", s1)
    return chart


def sample_ball(delta: float, flavor, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random unitary ``G`` with ``distance(G, I) < delta``."""
    fl = Flavor.parse(flavor)
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    k = 0.5 * (z + z.conj().T)
    if fl is Flavor.PROJECTIVE:
        k -= np.trace(k).real / d * np.eye(d)
    radius = angle_for_distance(delta) * (1 - 1e-9) * rng.random() ** (1.0 / d**2)
    k *= radius / np.max(np.abs(np.linalg.eigvalsh(k)))
    return expi(k)


def _probe(chart, anchor_dag, delta, rng, n_probe, tol, use_words=True) -> int:
    ok = 0
    for _ in range(n_probe):
        g = sample_ball(delta, chart.flavor, chart.alphabet.dim, rng)
        try:
            newton_solve(chart, anchor_dag @ g, None, tol, use_words=use_words)
            ok += 1
        except (NoConvergence, SingularJacobian):
            pass
    return ok


def build_neighborhood(chart: Chart, synthesizer: Synthesizer, seed: int | None = None, n_probe: int = 64,
                       tol: Tolerances = DEFAULT, delta0: float | None = None,
                       anchor_distance: float = 1e-10, use_words: bool = True) -> IdentityNeighborhood:
    """Certify ``B_delta(I)`` inside ``anchor * f~(X)`` by probing.

    ``delta`` starts at ``sigma_min / 4`` and halves until every probe target
    solves from ``x = 0`` and a fresh batch re-validates at >= 95%.
    ``use_words=False`` certifies the exact map ``f`` instead; then
    ``f(0) = I``, the anchor is the empty word and no synthesis happens.
    """
    seed = chart.seed if seed is None else seed
    f0 = f_eval(chart, np.zeros(chart.m), use_words=use_words)
    if use_words:
        anchor_word = synthesizer(f0.conj().T, chart.flavor, anchor_distance, _sub_seed(seed, -1))
    else:
        anchor_word = GateWord((), chart.alphabet)
    anchor = evaluate(anchor_word)
    anchor_err = distance(anchor, f0.conj().T, chart.flavor)
    anchor_dag = anchor.conj().T
    delta = chart.sigma_min / 4 if delta0 is None else delta0
    rng = stream(seed, "probes")
    halvings = 0
    while True:
        if delta < tol.min_delta:
            raise NeighborhoodCollapse(f"delta fell below {tol.min_delta}")
        if anchor_err <= delta and _probe(chart, anchor_dag, delta, rng, n_probe, tol.solve, use_words) == n_probe:
            fresh = stream(seed, f"revalidate-{halvings}")
            rate = _probe(chart, anchor_dag, delta, fresh, n_probe, tol.solve, use_words) / n_probe
            if rate >= 0.95:
                break
        delta *= 0.5
        halvings += 1
    return IdentityNeighborhood(float(delta), anchor_word, anchor, chart.ell, len(anchor_word), anchor_err,
                                rate, halvings)


# ---------------------------------------------------------------- export

def chart_to_json(chart: Chart, nbhd: IdentityNeighborhood | None = None) -> dict:
    gen = chart.alphabet.generator(chart.gen_id)
    out = {
        "schema": CHART_SCHEMA,
        "dims": [chart.alphabet.shape.dim_a, chart.alphabet.shape.dim_b],
        "gate": matrix_to_json(chart.alphabet.gate),
        "flavor": chart.flavor.value,
        "generator": {
            "id": chart.gen_id,
            "H": matrix_to_json(gen.hamiltonian.matrix),
            "local": None if gen.local is None else [matrix_to_json(gen.local[0]), matrix_to_json(gen.local[1])],
        },
        "seed": chart.seed,
        "sigma_min": chart.sigma_min,
        "sigma_min_tilde": chart.sigma_min_tilde,
        "approx_budget": chart.approx_budget,
        "conjugators": [matrix_to_json(u) for u in chart.conjugators],
        "conjugator_words": [word_to_json(w) for w in chart.conj_words],
        "dagger_words": [word_to_json(w) for w in chart.dagger_words],
    }
    if nbhd is not None:
        out["neighborhood"] = {
            "delta": nbhd.delta,
            "anchor_word": word_to_json(nbhd.anchor_word),
            "anchor_error": nbhd.anchor_error,
            "ell": nbhd.ell,
            "ell_prime": nbhd.ell_prime,
            "revalidation_rate": nbhd.revalidation_rate,
            "halvings": nbhd.halvings,
        }
    return out


def chart_from_json(data: dict, alphabet: Alphabet | None = None):
    """Reload and re-certify a chart (no conjugator or word search)."""
    from .bipartite import BipartiteShape

    if data.get("schema") != CHART_SCHEMA:
        raise FormatError(f"unsupported chart schema {data.get('schema')!r}")
    g = data["generator"]
    if alphabet is None:
        alphabet = Alphabet(BipartiteShape(*data["dims"]), matrix_from_json(data["gate"]))
    local = None if g["local"] is None else tuple(matrix_from_json(x) for x in g["local"])
    alphabet = alphabet.with_generator(g["id"], matrix_from_json(g["H"]), local)
    chart = assemble_chart(
        alphabet, g["id"], data["flavor"],
        [matrix_from_json(u) for u in data["conjugators"]],
        [word_from_json(w, alphabet) for w in data["conjugator_words"]],
        [word_from_json(w, alphabet) for w in data["dagger_words"]],
        data["approx_budget"], data["seed"],
    )
    nbhd = None
    if "neighborhood" in data:
        nb = data["neighborhood"]
        aw = word_from_json(nb["anchor_word"], alphabet)
        am = evaluate(aw)
        f0 = f_eval(chart, np.zeros(chart.m), use_words=True)
        err = distance(am, f0.conj().T, chart.flavor)
        if err > nb["delta"]:
            raise NeighborhoodCollapse("stored anchor word no longer within delta")
        nbhd = IdentityNeighborhood(nb["delta"], aw, am, chart.ell, len(aw), err, nb["revalidation_rate"],
                                    nb["halvings"])
    return chart, nbhd
