"""Eigenvalue inequalities and concentration bounds, with certification routines.

Deterministic inequalities (Thirring, Temple, the lower bound through the
averaged support statistic) are checked against dense diagonalisation; the
concentration bounds (Chernoff, Bernstein) against exact binomial tails and
simulation.  All certifications allow ``SLACK`` absolute roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

from .eigensolve import SolverConfig, lowest_eigenpairs
from .errors import DomainError, HypothesisError, OutOfRegimeError
from .lattice import BoxGrid, LatticeGeometry
from .operators import (
    PeriodicGroundState,
    assemble_hamiltonian,
    mezincescu_coefficients,
    periodic_ground_state,
)
from .potential import PeriodicBackground, PotentialModel, Realization, evaluate_on_grid
from .lattice import cell_offsets

SLACK = 1e-10


@dataclass
class Certificate:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Thirring


@dataclass
class ThirringInput:
    """Dense ``H`` with its ground pair and second eigenvalue, and a positive diagonal ``V``."""

    H: np.ndarray
    V: np.ndarray
    psi: np.ndarray
    E1: float
    E2: float

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        if self.V.ndim == 2:
            self.V = np.diag(self.V).copy()
        if np.any(self.V <= 0):
            raise DomainError("V must be positive definite (all diagonal entries > 0)")
        nrm = np.linalg.norm(self.psi)
        if abs(nrm - 1) > 1e-10:
            raise DomainError(f"psi must be normalised, got norm {nrm}")

    @classmethod
    def from_matrices(cls, H, V) -> "ThirringInput":
        H = np.asarray(H, dtype=float)
        vals, vecs = np.linalg.eigh(H)
        E2 = vals[1] if vals.size > 1 else np.inf
        return cls(H, V, vecs[:, 0], float(vals[0]), float(E2))


def thirring_corollary_bound(inp: ThirringInput) -> float:
    """``min{E1(H) + <psi, V^{-1} psi>^{-1}, E2(H)}``, a lower bound for ``E1(H + V)``."""
    inner = float(np.sum(np.abs(inp.psi) ** 2 / inp.V))
    return min(inp.E1 + 1.0 / inner, inp.E2)


def certify_thirring_corollary(inp: ThirringInput) -> Certificate:
    bound = thirring_corollary_bound(inp)
    actual = float(np.linalg.eigvalsh(inp.H + np.diag(inp.V))[0])
    return Certificate("thirring-corollary", bound <= actual + SLACK, {"bound": bound, "E1(H+V)": actual})


def _range_basis(P: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (P + P.T))
    return vecs[:, vals > 0.5]


def thirring_projection_bound(H, V, P) -> Certificate:
    """Certify ``P*(P V^{-1} P*)^{-1} P <= V`` and ``E_n(H + P*(..)^{-1}P) <= E_n(H + V)``."""
    H = np.asarray(H, dtype=float)
    V = np.asarray(V, dtype=float)
    Vm = np.diag(V) if V.ndim == 1 else V
    if np.min(np.linalg.eigvalsh(Vm)) <= 0:
        raise DomainError("V must be positive definite")
    Q = _range_basis(np.asarray(P, dtype=float))
    small = Q.T @ np.linalg.solve(Vm, Q)
    if Q.shape[1] == 0 or np.linalg.cond(small) > 1e12:
        raise DomainError("P V^{-1} P* is singular on the range of P")
    B = Q @ np.linalg.solve(small, Q.T)
    B = 0.5 * (B + B.T)
    psd_margin = float(np.min(np.linalg.eigvalsh(Vm - B)))
    lhs = np.linalg.eigvalsh(H + B)
    rhs = np.linalg.eigvalsh(H + Vm)
    worst = float(np.max(lhs - rhs))
    return Certificate(
        "thirring-projection",
        psd_margin >= -SLACK and worst <= SLACK,
        {"min_eig(V-B)": psd_margin, "max(E_n(H+B)-E_n(H+V))": worst},
    )


# --------------------------------------------------------------------------
# Temple


def temple_lower_bound(H, psi, nu: float) -> float:
    """Temple's lower bound for ``E1(H)`` from the trial state ``psi``.

    Raises :class:`HypothesisError` when ``<psi, H psi> >= nu``.
    """
    H = np.asarray(H.dense() if hasattr(H, "dense") else H, dtype=float)
    psi = np.asarray(psi, dtype=float).ravel()
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-10:
        raise DomainError(f"psi must be normalised, got norm {nrm}")
    Hpsi = H @ psi
    first = float(psi @ Hpsi)
    if first >= nu:
        raise HypothesisError(f"Temple hypothesis <psi,H psi> = {first:.6g} < nu = {nu:.6g} fails")
    variance = float(Hpsi @ Hpsi) - first**2
    return first - variance / (nu - first)


def certify_temple(H, psi, nu: float) -> Certificate:
    """Check the hypotheses densely, then ``temple <= E1 + SLACK``."""
    H = np.asarray(H, dtype=float)
    vals = np.linalg.eigvalsh(H)
    first = float(psi @ H @ psi)
    if not (first < nu <= vals[1] + SLACK):
        return Certificate("temple", True, {"skipped": True, "first": first, "nu": nu, "E2": float(vals[1])})
    value = temple_lower_bound(H, psi, nu)
    return Certificate("temple", value <= vals[0] + SLACK, {"bound": value, "E1": float(vals[0])})


@dataclass
class TempleFailure:
    """Two-valued breather instance on which Temple's hypothesis cannot be met."""

    H: np.ndarray
    psi: np.ndarray
    first_moment: float
    second_moment: float
    potential_first: float
    potential_second: float
    E1: float
    E2: float


def temple_failure_instance(L: int = 10, n_h: int = 4, coupling: float = 1.0) -> TempleFailure:
    """Breather box with ``E0 = 0`` whose trial state is the periodic ground state.

    The couplings are 1 on the right half of the box and 0 on the left, the
    base set is the half cell.  For an indicator potential the second
    moment of ``W`` equals ``coupling`` times the first one, and the first
    moment of ``H`` exceeds its second eigenvalue.
    """
    from .potential import BaseSet, CouplingLaw, PointMass, StandardBreather

    geom = LatticeGeometry.cubic(1)
    model = PotentialModel(geom, StandardBreather(coupling, BaseSet("half-cell")), CouplingLaw((PointMass(1.0),)))
    grid = BoxGrid(geom, L, n_h)
    sites = geom.box_sites(L)
    real = Realization(sites, (sites[:, 0] >= 0).astype(float), -1, -1)
    W = evaluate_on_grid(model, real, grid)
    gs = periodic_ground_state(model.background, geom, n_h)
    bc = mezincescu_coefficients(gs, grid)
    H = assemble_hamiltonian(model.background, W, grid, bc, shift=gs.energy).dense()
    psi = gs.box_state(grid).ravel() * np.sqrt(grid.weight)
    w = W.ravel()
    vals = np.linalg.eigvalsh(H)
    Hpsi = H @ psi
    return TempleFailure(
        H,
        psi,
        float(psi @ Hpsi),
        float(Hpsi @ Hpsi),
        float(psi @ (w * psi)),
        float(psi @ (w * w * psi)),
        float(vals[0]),
        float(vals[1]),
    )


# --------------------------------------------------------------------------
# gap constant, critical lengths


@dataclass
class GapEstimate:
    cgap: float
    slope: float
    lengths: list[int]
    gaps: list[float]
    E1: list[float]


def gap_constant(vper: PeriodicBackground, geometry: LatticeGeometry, n_h: int, L_list, cfg: SolverConfig | None = None) -> GapEstimate:
    """``min_L L^2 (E2 - E1)`` of the Mezincescu background operator, plus the log-log slope."""
    L_list = [int(L) for L in L_list]
    if not L_list:
        raise DomainError("L_list must be nonempty")
    gs = periodic_ground_state(vper, geometry, n_h)
    cfg = cfg or SolverConfig(k=2, vectors=False)
    gaps, e1 = [], []
    for L in L_list:
        grid = BoxGrid(geometry, L, n_h)
        H = assemble_hamiltonian(vper, None, grid, mezincescu_coefficients(gs, grid))
        vals = lowest_eigenpairs(H, cfg).eigenvalues
        gaps.append(float(vals[1] - vals[0]))
        e1.append(float(vals[0]))
    scaled = [L * L * g for L, g in zip(L_list, gaps)]
    slope = float(np.polyfit(np.log(L_list), np.log(gaps), 1)[0]) if len(L_list) > 1 else float("nan")
    return GapEstimate(float(min(scaled)), slope, L_list, gaps, e1)


def critical_length(E: float, E0: float, cgap: float, beta: float, L0: int = 1) -> int:
    """``L_E = floor(sqrt(cgap * beta / (8 (E - E0))))``; must be at least ``max(1, L0)``."""
    if not E > E0:
        raise DomainError("critical length needs E > E0")
    if cgap <= 0 or beta <= 0:
        raise DomainError("constants must be positive")
    L = int(math.floor(math.sqrt(cgap * beta / (8.0 * (E - E0))) + 1e-12))
    if L < max(1, L0):
        raise OutOfRegimeError(f"E - E0 = {E - E0:.4g} too large: L_E = {L} < {max(1, L0)}")
    return L


def crude_critical_length(E: float, E0: float, cgap: float) -> int:
    """``floor(sqrt(cgap / (2 (E - E0))))``, the largest length with ``E <= gamma_L``."""
    return int(math.floor(math.sqrt(cgap / (2.0 * (E - E0))) + 1e-12))


@dataclass(frozen=True)
class ProofConstants:
    """Constants of the upper-bound argument.

    ``beta`` is ``E[X_0]`` for the breather model or the uniform lower bound
    on ``E[X_k]`` in the non-identically distributed case.
    """

    cgap: float
    mu: float
    beta: float

    def __post_init__(self):
        if self.cgap <= 0 or self.mu <= 0 or not 0 < self.beta <= 1:
            raise DomainError("proof constants must be positive with beta in (0, 1]")

    def gamma(self, L: int) -> float:
        return self.cgap / (2.0 * L * L)

    @property
    def L0(self) -> int:
        return int(math.ceil(math.sqrt(self.cgap / (2.0 * self.mu)) - 1e-12))

    @property
    def delta(self) -> float:
        return self.cgap * self.beta / 8.0

    def critical_length(self, E: float, E0: float = 0.0) -> int:
        return critical_length(E, E0, self.cgap, self.beta, self.L0)

    def max_energy_offset(self) -> float:
        """Largest ``E - E0`` with ``L_E >= max(1, L0)``."""
        return self.delta / max(1, self.L0) ** 2


# --------------------------------------------------------------------------
# support statistics


def _support_mass(gs: PeriodicGroundState, model: PotentialModel, lams: np.ndarray) -> np.ndarray:
    """``int_{supp u_lambda} Psi^2`` over the unit cell, on the ground state's nodes."""
    geom = model.geometry
    _, z = cell_offsets(geom, gs.n_h, 0)
    u = model.single_site.values(np.atleast_1d(lams), z, geom)
    w = geom.det / gs.n_h**geom.dimension
    return w * ((u > 0) @ (gs.psi.ravel() ** 2))


def mean_support_mass(gs: PeriodicGroundState, model: PotentialModel, n_samples: int, seed: int) -> float:
    """Monte Carlo ``min_law E[X_k]``; the ``beta`` of :class:`ProofConstants`."""
    from .potential import _law_draws

    return float(min(np.mean(_support_mass(gs, model, lams)) for lams in _law_draws(model, n_samples, seed)))


def xk_statistic(gs: PeriodicGroundState, model: PotentialModel, realization: Realization, k) -> float:
    """``X_k = int_{supp u_{lambda_k}} |Psi|^2`` for site ``k``."""
    lookup = realization.as_dict()
    lam = lookup[tuple(int(c) for c in np.atleast_1d(k))]
    return float(_support_mass(gs, model, np.array([lam]))[0])


def s_average(gs: PeriodicGroundState, model: PotentialModel, realization: Realization, L: int) -> float:
    """``S_L``, the mean of ``X_k`` over ``I_L``."""
    lookup = realization.as_dict()
    sites = model.geometry.box_sites(L)
    lams = np.array([lookup[tuple(int(c) for c in k)] for k in sites])
    return float(np.mean(_support_mass(gs, model, lams)))


@dataclass
class XsvResult:
    lhs: float
    rhs: float
    inner_quadrature: float
    inner_closed_form: float | None
    s_average: float
    holds: bool


def xsv_eigenvalue_bound(
    E1_H0: float,
    gs: PeriodicGroundState,
    gamma: float,
    mu: float,
    realization: Realization,
    model: PotentialModel,
    L: int,
) -> XsvResult:
    """Both sides of ``(gamma/2) S_L <= E1(H_0) + <Psi_L, V^{-1} Psi_L>^{-1}``, ``V = W + gamma``.

    The closed form per cell ``X_k/(mu+gamma) + (1-X_k)/gamma`` is used when
    the potential only takes the values 0 and ``mu``.
    """
    if gamma > mu:
        raise OutOfRegimeError(f"gamma_L = {gamma:.4g} exceeds mu = {mu:.4g} (L below L0)")
    grid = BoxGrid(model.geometry, L, gs.n_h)
    W = evaluate_on_grid(model, realization, grid)
    psi_L = gs.box_state(grid)
    inner_q = float(grid.weight * np.sum(psi_L**2 / (W + gamma)))
    sites = model.geometry.box_sites(L)
    lookup = realization.as_dict()
    X = _support_mass(gs, model, np.array([lookup[tuple(int(c) for c in k)] for k in sites]))
    S = float(np.mean(X))
    two_valued = bool(np.all(np.isin(W, (0.0, mu))))
    closed = float(np.mean(X / (mu + gamma) + (1 - X) / gamma)) if two_valued else None
    inner = closed if closed is not None else inner_q
    lhs = 0.5 * gamma * S
    rhs = E1_H0 + 1.0 / inner
    return XsvResult(lhs, rhs, inner_q, closed, S, lhs <= rhs + SLACK)


# --------------------------------------------------------------------------
# concentration


@dataclass(frozen=True)
class ConcentrationLaw:
    """Law of i.i.d. ``X_k`` in ``[0, 1]``: ``"bernoulli"`` (p), ``"uniform"``,
    ``"constant"`` (c) or ``"tabulated"`` (atoms with weights)."""

    kind: str
    p: float = 0.5
    values: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("bernoulli", "uniform", "constant", "tabulated"):
            raise DomainError(f"unknown concentration law {self.kind!r}")
        if self.kind in ("bernoulli", "constant") and not 0 <= self.p <= 1:
            raise DomainError("parameter must lie in [0, 1]")
        if self.kind == "tabulated":
            v, w = np.asarray(self.values, float), np.asarray(self.weights, float)
            if v.shape != w.shape or v.size == 0 or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise DomainError("tabulated law needs matching values and probability weights")
            if np.any((v < 0) | (v > 1)):
                raise DomainError("tabulated values must lie in [0, 1]")

    @property
    def mean(self) -> float:
        if self.kind in ("bernoulli", "constant"):
            return self.p
        if self.kind == "uniform":
            return 0.5
        return float(np.dot(self.values, self.weights))

    def log_mgf(self, t: float) -> float:
        """``log E[exp(t (E[X] - 2 X))]``."""
        m = self.mean
        if self.kind == "constant":
            return -t * m
        if self.kind == "bernoulli":
            if self.p in (0.0, 1.0):
                return t * (m - 2 * self.p)
            return float(logsumexp([t * m, t * (m - 2)], b=[1 - self.p, self.p]))
        if self.kind == "uniform":
            if t == 0:
                return 0.0
            # E exp(-2tX) = (1 - e^{-2t}) / (2t)
            return t * m + math.log(-math.expm1(-2 * t)) - math.log(2 * t)
        v, w = np.asarray(self.values), np.asarray(self.weights)
        keep = w > 0
        return float(logsumexp(t * (m - 2 * v[keep]), b=w[keep]))

    def mgf(self, t: float) -> float:
        return math.exp(self.log_mgf(t))

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "constant":
            return np.full(shape, self.p)
        if self.kind == "bernoulli":
            return (rng.random(shape) < self.p).astype(float)
        if self.kind == "uniform":
            return rng.random(shape)
        return rng.choice(np.asarray(self.values), size=shape, p=np.asarray(self.weights))


@dataclass
class ChernoffRate:
    s: float
    mgf: float
    rate: float


def chernoff_rate(law: ConcentrationLaw, t_max: float = 50.0, xatol: float = 1e-8) -> ChernoffRate:
    """Minimise ``M(t) = E exp(t(E X - 2X))`` over ``(0, t_max]``; ``rate = |log M(s)|``."""
    if law.mean <= 0:
        raise DomainError("Chernoff rate needs E[X] > 0")
    res = optimize.minimize_scalar(law.log_mgf, bounds=(0.0, t_max), method="bounded", options={"xatol": xatol})
    s = float(res.x)
    # the bounded search never touches the endpoint; monotone laws reach their minimum there
    if law.log_mgf(t_max) < law.log_mgf(s):
        s = t_max
    log_m = law.log_mgf(s)
    if not log_m < 0:
        raise DomainError("no t in (0, t_max] with M(t) < 1")
    return ChernoffRate(s, math.exp(log_m), -log_m)


def chernoff_tail_simulation(law: ConcentrationLaw, n: int, runs: int, seed: int) -> tuple[float, float]:
    """Empirical ``P{S_n <= E[S_n]/2}`` and its standard error."""
    rng = np.random.Generator(np.random.Philox(key=[seed, n]))
    hits = 0
    chunk = max(1, min(runs, 2_000_000 // max(n, 1)))
    done = 0
    while done < runs:
        m = min(chunk, runs - done)
        s = law.sample(rng, (m, n)).mean(axis=1)
        hits += int(np.sum(s <= law.mean / 2))
        done += m
    p = hits / runs
    return p, math.sqrt(max(p * (1 - p), 1.0 / runs) / runs)


def bernoulli_half_tail(p: float, n: int) -> float:
    """Exact ``P{Bin(n, p)/n <= p/2}``."""
    return float(stats.binom.cdf(math.floor(n * p / 2 + 1e-9), n, p))


def bernstein_bound(beta: float, n: int) -> float:
    """``exp(-beta^2 n / 16)``, bounding ``P{S_n <= beta/2}`` when every ``E X_k >= beta``."""
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    return math.exp(-beta * beta * n / 16.0)


def certify_bernstein(beta: float, n: int) -> Certificate:
    bound = bernstein_bound(beta, n)
    exact = bernoulli_half_tail(beta, n)
    return Certificate(f"bernstein(beta={beta},n={n})", exact <= bound, {"exact": exact, "bound": bound})


def certify_chernoff(law: ConcentrationLaw, n: int, runs: int, seed: int) -> Certificate:
    rate = chernoff_rate(law)
    bound = math.exp(-rate.rate * n)
    p, se = chernoff_tail_simulation(law, n, runs, seed)
    return Certificate(
        f"chernoff({law.kind},n={n})",
        rate.mgf < 1 - 1e-6 and p <= bound + 3 * se,
        {"mgf": rate.mgf, "rate": rate.rate, "empirical": p, "bound": bound, "stderr": se},
    )


# --------------------------------------------------------------------------
# random instance suites


def _random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def thirring_suite(n_instances: int, seed: int, max_dim: int = 8) -> Certificate:
    rng = np.random.Generator(np.random.Philox(key=[seed, 1]))
    failures = 0
    worst = -np.inf
    for _ in range(n_instances):
        n = int(rng.integers(2, max_dim + 1))
        H = _random_symmetric(rng, n)
        V = np.exp(rng.standard_normal(n))
        cert = certify_thirring_corollary(ThirringInput.from_matrices(H, V))
        worst = max(worst, cert.details["bound"] - cert.details["E1(H+V)"])
        failures += not cert.passed
    return Certificate("thirring-corollary-suite", failures == 0, {"instances": n_instances, "failures": failures, "max(bound-E1)": worst})


def projection_suite(n_instances: int, seed: int, max_dim: int = 8) -> Certificate:
    rng = np.random.Generator(np.random.Philox(key=[seed, 2]))
    failures = 0
    for _ in range(n_instances):
        n = int(rng.integers(2, max_dim + 1))
        r = int(rng.integers(1, n + 1))
        H = _random_symmetric(rng, n)
        V = np.exp(rng.standard_normal(n))
        Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
        failures += not thirring_projection_bound(H, V, Q @ Q.T).passed
    return Certificate("thirring-projection-suite", failures == 0, {"instances": n_instances, "failures": failures})


def temple_suite(n_instances: int, seed: int, max_dim: int = 8) -> Certificate:
    rng = np.random.Generator(np.random.Philox(key=[seed, 3]))
    failures = checked = 0
    for _ in range(n_instances):
        n = int(rng.integers(2, max_dim + 1))
        H = _random_symmetric(rng, n)
        vals, vecs = np.linalg.eigh(H)
        psi = vecs[:, 0] + 0.3 * rng.random() * rng.standard_normal(n)
        psi /= np.linalg.norm(psi)
        first = float(psi @ H @ psi)
        nu = first + rng.random() * (vals[1] - first) if first < vals[1] else vals[1]
        cert = certify_temple(H, psi, nu)
        if not cert.details.get("skipped"):
            checked += 1
            failures += not cert.passed
    return Certificate("temple-suite", failures == 0 and checked > 0, {"instances": n_instances, "checked": checked, "failures": failures})


def certification_suite(seed: int = 0, n_thirring: int = 10_000, n_projection: int = 1_000, n_temple: int = 1_000, chernoff_runs: int = 100_000) -> list[Certificate]:
    """Every certification of this module, as run by the ``bounds-check`` experiment."""
    certs = [
        thirring_suite(n_thirring, seed),
        projection_suite(n_projection, seed),
        temple_suite(n_temple, seed),
    ]
    fail = temple_failure_instance()
    try:
        temple_lower_bound(fail.H, fail.psi, fail.E2)
        certs.append(Certificate("temple-hypothesis-failure", False, {"note": "hypothesis unexpectedly held"}))
    except HypothesisError:
        certs.append(
            Certificate(
                "temple-hypothesis-failure",
                True,
                {"first": fail.first_moment, "E2": fail.E2, "W_first": fail.potential_first, "W_second": fail.potential_second},
            )
        )
    for beta in (0.2, 0.5, 0.9):
        for n in (20, 50, 100, 200):
            certs.append(certify_bernstein(beta, n))
    for law in (ConcentrationLaw("bernoulli", 0.5), ConcentrationLaw("uniform")):
        certs.append(certify_chernoff(law, 50, chernoff_runs, seed))
    return certs
