"""Single-site potentials, coupling laws and sampled random fields.

The random field is ``W(x) = sum_k u(lambda_k, x - M k)`` with independent
couplings ``lambda_k`` in ``[0, 1]``.  Breather potentials dilate a fixed
profile by ``lambda``; ``u(0, .)`` is identically zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .errors import ConfigurationError
from .lattice import BoxGrid, LatticeGeometry, cell_offsets
from .sampling import keyed_uniforms, mean_interval, site_codes, wilson_interval

# --------------------------------------------------------------------------
# coupling laws


class Law:
    """Distribution of a single coupling ``lambda`` on ``[0, 1]``."""

    def transform(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Map two independent uniforms to draws of ``lambda``."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def cdf(self, x) -> np.ndarray:
        """``P{lambda <= x}``."""
        raise NotImplementedError

    @property
    def atom_at_zero(self) -> float:
        return float(self.cdf(0.0))

    @property
    def zero_in_support(self) -> bool:
        """``P{lambda <= eps} > 0`` for every ``eps > 0``."""
        return bool(self.cdf(1e-12) > 0 or self.cdf(np.finfo(float).tiny) > 0)


@dataclass(frozen=True)
class Uniform(Law):
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.low < self.high <= 1.0:
            raise ConfigurationError(f"uniform law needs 0 <= low < high <= 1, got [{self.low}, {self.high}]")

    def transform(self, u, v):
        return self.low + (self.high - self.low) * u

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    @property
    def zero_in_support(self):
        return self.low == 0.0


@dataclass(frozen=True)
class PointMass(Law):
    value: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ConfigurationError(f"point mass must lie in [0, 1], got {self.value}")

    def transform(self, u, v):
        return np.full_like(np.asarray(u, dtype=float), self.value)

    @property
    def mean(self):
        return self.value

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.value).astype(float)

    @property
    def zero_in_support(self):
        return self.value == 0.0


@dataclass(frozen=True)
class AtomAtZero(Law):
    """``lambda = 0`` with probability ``weight``, otherwise drawn from ``rest``."""

    weight: float
    rest: Law = field(default_factory=lambda: PointMass(1.0))

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ConfigurationError(f"atom weight must lie in [0, 1], got {self.weight}")

    def transform(self, u, v):
        return np.where(np.asarray(u) < self.weight, 0.0, self.rest.transform(v, u))

    @property
    def mean(self):
        return (1.0 - self.weight) * self.rest.mean

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.weight, 0.0) + (1.0 - self.weight) * self.rest.cdf(x)

    @property
    def zero_in_support(self):
        return self.weight > 0 or self.rest.zero_in_support


@dataclass(frozen=True)
class Tabulated(Law):
    """Law given by its inverse CDF on an equispaced probability grid."""

    quantiles: tuple[float, ...]
    name: str = "tabulated"

    def __post_init__(self):
        q = np.asarray(self.quantiles, dtype=float)
        if q.ndim != 1 or q.size < 2:
            raise ConfigurationError("tabulated law needs at least two quantiles")
        if np.any(np.diff(q) < 0) or q[0] < 0 or q[-1] > 1:
            raise ConfigurationError("quantiles must be nondecreasing inside [0, 1]")
        object.__setattr__(self, "quantiles", tuple(float(v) for v in q))

    @classmethod
    def beta(cls, a: float, b: float, points: int = 513) -> "Tabulated":
        if a <= 0 or b <= 0:
            raise ConfigurationError("beta law needs positive shape parameters")
        p = np.linspace(0.0, 1.0, points)
        return cls(tuple(stats.beta.ppf(p, a, b)), name=f"beta({a:g},{b:g})")

    @property
    def _probs(self):
        return np.linspace(0.0, 1.0, len(self.quantiles))

    def transform(self, u, v):
        return np.interp(u, self._probs, self.quantiles)

    @property
    def mean(self):
        return float(np.trapezoid(self.quantiles, self._probs))

    def cdf(self, x):
        q = np.asarray(self.quantiles)
        x = np.asarray(x, dtype=float)
        # right-continuous inverse of the piecewise-linear quantile function
        p = self._probs
        out = np.zeros_like(x, dtype=float)
        flat = x.ravel()
        res = out.ravel()
        for i, xi in enumerate(flat):
            if xi < q[0]:
                res[i] = 0.0
            elif xi >= q[-1]:
                res[i] = 1.0
            else:
                j = np.searchsorted(q, xi, side="right")
                lo, hi = q[j - 1], q[j]
                res[i] = p[j - 1] + (p[j] - p[j - 1]) * (xi - lo) / (hi - lo) if hi > lo else p[j - 1]
        return res.reshape(x.shape)


@dataclass(frozen=True)
class CouplingLaw:
    """Laws of the couplings; several laws are cycled over sites by site code."""

    laws: tuple[Law, ...]
    require_zero_in_support: bool = False

    def __post_init__(self):
        if isinstance(self.laws, Law):
            object.__setattr__(self, "laws", (self.laws,))
        if len(self.laws) == 0:
            raise ConfigurationError("coupling law needs at least one law")
        if self.require_zero_in_support:
            for law in self.laws:
                if not law.zero_in_support:
                    raise ConfigurationError(f"law {law!r} does not have 0 in its support")

    @property
    def iid(self) -> bool:
        return len(self.laws) == 1

    @property
    def nontrivial(self) -> bool:
        return all(law.atom_at_zero < 1.0 for law in self.laws)

    def law_index(self, sites: np.ndarray) -> np.ndarray:
        if self.iid:
            return np.zeros(len(sites), dtype=np.int64)
        return (site_codes(sites) % np.uint64(len(self.laws))).astype(np.int64)

    def draw(self, uniforms: np.ndarray, sites: np.ndarray) -> np.ndarray:
        idx = self.law_index(sites)
        out = np.empty(len(sites))
        for i, law in enumerate(self.laws):
            sel = idx == i
            if np.any(sel):
                out[sel] = law.transform(uniforms[sel, 0], uniforms[sel, 1])
        return out


# --------------------------------------------------------------------------
# single-site potentials


@dataclass(frozen=True)
class BaseSet:
    """Base set ``A`` of a standard breather, in physical offsets from the cell centre.

    ``kind`` is ``"ball"`` (``size`` = radius), ``"box"`` (``size`` = half
    widths per axis) or ``"half-cell"`` (``A = D/2``, no size).
    """

    kind: str
    size: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("ball", "box", "half-cell"):
            raise ConfigurationError(f"unknown base set kind {self.kind!r}")
        size = tuple(float(s) for s in np.atleast_1d(self.size)) if self.kind != "half-cell" else ()
        if self.kind == "ball" and (len(size) != 1 or size[0] <= 0):
            raise ConfigurationError("ball base set needs one positive radius")
        if self.kind == "box" and (len(size) == 0 or min(size) <= 0):
            raise ConfigurationError("box base set needs positive half widths")
        object.__setattr__(self, "size", size)

    def contains(self, z: np.ndarray, geometry: LatticeGeometry) -> np.ndarray:
        """Membership of (already rescaled) offsets ``z`` of shape ``(..., d)``; open sets."""
        if self.kind == "ball":
            return np.linalg.norm(z, axis=-1) < self.size[0]
        if self.kind == "box":
            half = np.broadcast_to(np.asarray(self.size), (geometry.dimension,))
            return np.all(np.abs(z) < half, axis=-1)
        return np.all(np.abs(z @ geometry.inverse.T) < 0.25, axis=-1)

    def measure(self, geometry: LatticeGeometry) -> float:
        d = geometry.dimension
        if self.kind == "ball":
            return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.size[0] ** d
        if self.kind == "box":
            return float(np.prod(2 * np.broadcast_to(np.asarray(self.size), (d,))))
        return geometry.det / 2**d

    def halfwidths(self, geometry: LatticeGeometry) -> np.ndarray:
        """Bounding half widths in reference coordinates."""
        d = geometry.dimension
        if self.kind == "half-cell":
            return np.full(d, 0.25)
        if self.kind == "box" and geometry.is_diagonal:
            return np.broadcast_to(np.asarray(self.size), (d,)) / np.diag(geometry.matrix)
        radius = self.size[0] if self.kind == "ball" else float(np.linalg.norm(np.broadcast_to(self.size, (d,))))
        return radius * np.linalg.norm(geometry.inverse, axis=1)


class SingleSitePotential:
    """``u(lambda, z)`` for couplings ``lambda`` in ``[0, 1]`` and physical offsets ``z``."""

    #: larger ``lambda`` gives a pointwise larger potential
    monotone: bool = False

    def values(self, lam: np.ndarray, z: np.ndarray, geometry: LatticeGeometry) -> np.ndarray:
        """Array of shape ``(len(lam), len(z))``."""
        raise NotImplementedError

    def halfwidths(self, geometry: LatticeGeometry) -> np.ndarray:
        """Reference-coordinate half widths of a box containing every support."""
        raise NotImplementedError


@dataclass(frozen=True)
class StandardBreather(SingleSitePotential):
    """``u(lambda, x) = coupling * 1_{lambda A}(x)``."""

    coupling: float
    base: BaseSet
    monotone = True

    def __post_init__(self):
        if not (self.coupling > 0 and math.isfinite(self.coupling)):
            raise ConfigurationError(f"coupling must be positive, got {self.coupling}")

    def values(self, lam, z, geometry):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        z = np.atleast_2d(z)
        out = np.zeros((lam.size, z.shape[0]))
        for i, lv in enumerate(lam):
            if lv > 0:
                out[i] = self.coupling * self.base.contains(z / lv, geometry)
        return out

    def halfwidths(self, geometry):
        return self.base.halfwidths(geometry)


@dataclass(frozen=True)
class TentProfile:
    """``u_1(x) = peak * max(0, 1 - |x| / radius)``."""

    peak: float = 1.0
    radius: float = 0.5

    def __post_init__(self):
        if self.peak <= 0 or self.radius <= 0:
            raise ConfigurationError("tent profile needs positive peak and radius")

    def __call__(self, z):
        return self.peak * np.maximum(0.0, 1.0 - np.linalg.norm(z, axis=-1) / self.radius)


@dataclass(frozen=True)
class GeneralBreather(SingleSitePotential):
    """``u(lambda, x) = u_1(x / lambda)`` for a bounded, compactly supported ``u_1 >= 0``."""

    profile: TentProfile
    monotone = True

    def values(self, lam, z, geometry):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        z = np.atleast_2d(z)
        out = np.zeros((lam.size, z.shape[0]))
        for i, lv in enumerate(lam):
            if lv > 0:
                out[i] = self.profile(z / lv)
        return out

    def halfwidths(self, geometry):
        return self.profile.radius * np.linalg.norm(geometry.inverse, axis=1)


@dataclass(frozen=True)
class Custom(SingleSitePotential):
    """Arbitrary family given by a vectorised callable ``func(lam, z) -> (n, P)``."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support_radius: float
    name: str = "custom"
    monotone: bool = False

    def values(self, lam, z, geometry):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        out = np.asarray(self.func(lam, np.atleast_2d(z)), dtype=float)
        return np.broadcast_to(out, (lam.size, np.atleast_2d(z).shape[0])).copy()

    def halfwidths(self, geometry):
        return self.support_radius * np.linalg.norm(geometry.inverse, axis=1)


@dataclass(frozen=True)
class Cutoff(SingleSitePotential):
    """Two-valued reduction ``mu * 1{z in D, u(z) >= mu}`` of another potential."""

    base: SingleSitePotential
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigurationError(f"cutoff level must be positive, got {self.mu}")

    @property
    def monotone(self):
        return self.base.monotone

    def values(self, lam, z, geometry):
        z = np.atleast_2d(z)
        in_cell = np.all(np.abs(z @ geometry.inverse.T) < 0.5, axis=-1)
        return self.mu * ((self.base.values(lam, z, geometry) >= self.mu) & in_cell[None, :])

    def halfwidths(self, geometry):
        return np.minimum(self.base.halfwidths(geometry), 0.5)


def cutoff_simplify(u: SingleSitePotential, mu: float) -> Cutoff:
    """Replace ``u`` by ``mu`` on ``{u >= mu}`` inside the unit cell and by 0 elsewhere."""
    return Cutoff(u, mu)


# --------------------------------------------------------------------------
# periodic background


@dataclass(frozen=True)
class PeriodicBackground:
    """Lattice-periodic potential ``V_per``.

    ``terms`` holds ``(amplitude, "cos" | "sin", wavevector)`` entries and
    gives ``constant + sum a * trig(2 pi n . y)`` in reference coordinates
    ``y = M^{-1} x``.  Alternatively ``table`` holds values on the ``table_n``
    cell-centred nodes of one cell (C order); it overrides ``terms``.
    """

    constant: float = 0.0
    terms: tuple[tuple[float, str, tuple[int, ...]], ...] = ()
    table: tuple[float, ...] | None = None
    table_n: int = 0

    def __post_init__(self):
        for amp, kind, wave in self.terms:
            if kind not in ("cos", "sin"):
                raise ConfigurationError(f"unknown background term {kind!r}")
            if not math.isfinite(amp):
                raise ConfigurationError("background amplitudes must be finite")
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            if not np.all(np.isfinite(t)):
                raise ConfigurationError("background table must be finite")
            if self.table_n < 2:
                raise ConfigurationError("background table needs table_n >= 2")
            object.__setattr__(self, "table", tuple(t.ravel()))

    @classmethod
    def cosine(cls, amplitude: float = 1.0, dimension: int = 1, constant: float = 0.0) -> "PeriodicBackground":
        terms = tuple((amplitude, "cos", tuple(int(i == j) for i in range(dimension))) for j in range(dimension))
        return cls(constant=constant, terms=terms)

    @property
    def is_zero(self) -> bool:
        return self.table is None and self.constant == 0 and all(a == 0 for a, _, _ in self.terms)

    def shifted(self, c: float) -> "PeriodicBackground":
        if self.table is not None:
            return PeriodicBackground(table=tuple(np.asarray(self.table) + c), table_n=self.table_n)
        return PeriodicBackground(self.constant + c, self.terms)

    def evaluate(self, y: np.ndarray, local: np.ndarray | None = None, n_h: int | None = None) -> np.ndarray:
        """Values at reference points ``y`` of shape ``(P, d)``.

        Tabulated backgrounds need the nodes' local cell indices and ``n_h``
        equal to ``table_n``.
        """
        y = np.atleast_2d(y)
        if self.table is not None:
            if local is None or n_h != self.table_n:
                raise ConfigurationError("tabulated background requires a grid with matching n_h")
            d = y.shape[1]
            flat = np.ravel_multi_index(tuple(local.T), (self.table_n,) * d)
            return np.asarray(self.table)[flat]
        out = np.full(y.shape[0], float(self.constant))
        for amp, kind, wave in self.terms:
            phase = 2 * np.pi * (y @ np.asarray(wave, dtype=float))
            out += amp * (np.cos(phase) if kind == "cos" else np.sin(phase))
        return out

    def on_grid(self, grid: BoxGrid) -> np.ndarray:
        return self.evaluate(grid.reference_nodes(), grid.local_index(), grid.n_h).reshape(grid.shape)

    def sup_norm(self) -> float:
        if self.table is not None:
            return float(np.max(np.abs(self.table)))
        return abs(self.constant) + sum(abs(a) for a, _, _ in self.terms)


# --------------------------------------------------------------------------
# model and realisations


@dataclass(frozen=True)
class PotentialModel:
    """Complete description of the random operator family."""

    geometry: LatticeGeometry
    single_site: SingleSitePotential
    law: CouplingLaw
    background: PeriodicBackground = field(default_factory=PeriodicBackground)

    def __post_init__(self):
        if not isinstance(self.law, CouplingLaw):
            object.__setattr__(self, "law", CouplingLaw((self.law,)))

    @property
    def dimension(self) -> int:
        return self.geometry.dimension

    @property
    def margin(self) -> int:
        """Extra layers of cells whose bumps can reach into a box."""
        hw = np.asarray(self.single_site.halfwidths(self.geometry))
        return max(0, int(math.ceil(float(np.max(hw)) - 0.5 - 1e-12)))


@dataclass(frozen=True, eq=False)
class Realization:
    """Sampled couplings on a finite set of sites, with the key that produced them."""

    sites: np.ndarray
    values: np.ndarray
    master_seed: int
    sample_index: int

    def __post_init__(self):
        self.sites.setflags(write=False)
        self.values.setflags(write=False)

    def __eq__(self, other):
        return (
            isinstance(other, Realization)
            and np.array_equal(self.sites, other.sites)
            and np.array_equal(self.values, other.values)
        )

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(c) for c in k): float(v) for k, v in zip(self.sites, self.values)}

    def with_values(self, values) -> "Realization":
        return Realization(self.sites, np.array(values, dtype=float), self.master_seed, self.sample_index)

    @classmethod
    def constant(cls, geometry: LatticeGeometry, L: int, value: float) -> "Realization":
        sites = geometry.box_sites(L)
        return cls(sites, np.full(len(sites), float(value)), -1, -1)


def sample_realization(model: PotentialModel, box, master_seed: int, sample_index: int) -> Realization:
    """Draw ``lambda_k`` for every site of ``box`` (a radius ``L`` or an explicit site array).

    Each value depends only on ``(master_seed, sample_index, k)``.
    """
    if isinstance(box, (int, np.integer)):
        sites = model.geometry.box_sites(int(box))
    else:
        sites = np.atleast_2d(np.asarray(box, dtype=np.int64))
    if sites.size == 0:
        raise ConfigurationError("cannot sample an empty index set")
    uniforms = keyed_uniforms(master_seed, sample_index, site_codes(sites))
    values = model.law.draw(uniforms, sites)
    return Realization(sites, values, int(master_seed), int(sample_index))


def sample_for_box(model: PotentialModel, L: int, master_seed: int, sample_index: int) -> Realization:
    """Realisation on ``I_{L + margin}``, enough to evaluate the field on ``Lambda_L``."""
    return sample_realization(model, L + model.margin, master_seed, sample_index)


def evaluate_potential(model: PotentialModel, realization: Realization, x, with_flag: bool = False):
    """``W(x)`` summed over the realisation's sites.

    With ``with_flag`` returns ``(value, complete)`` where ``complete`` is
    False if a site that could contribute at ``x`` is missing.
    """
    geom = model.geometry
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = x @ geom.inverse.T
    hw = np.asarray(model.single_site.halfwidths(geom)) + 1e-12
    near = np.all(np.abs(realization.sites - y) <= hw, axis=1)
    total = 0.0
    for k, lam in zip(realization.sites[near], realization.values[near]):
        z = x - k @ geom.matrix.T
        total += float(model.single_site.values([lam], z, geom)[0, 0])
    if not with_flag:
        return total
    lo = np.ceil(y[0] - hw).astype(int)
    hi = np.floor(y[0] + hw).astype(int)
    needed = np.array(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")).reshape(geom.dimension, -1).T
    have = set(map(tuple, realization.sites.tolist()))
    complete = all(tuple(k) in have for k in needed.tolist())
    return total, complete


def evaluate_on_grid(model: PotentialModel, realization: Realization, grid: BoxGrid) -> np.ndarray:
    """``W`` at every node of ``grid``; requires the sites ``I_{L + margin}``."""
    geom = model.geometry
    m = model.margin
    L, n_h, d = grid.L, grid.n_h, geom.dimension
    reach = L + m
    lookup = realization.as_dict()
    sites = geom.box_sites(reach)
    try:
        lams = np.array([lookup[tuple(int(c) for c in k)] for k in sites])
    except KeyError as exc:
        raise ConfigurationError(f"realisation lacks site {exc.args[0]} needed for L={L}") from None
    active = lams > 0
    padded_cells = 2 * (L + 2 * m) + 1
    n_pad = padded_cells * n_h
    out = np.zeros(n_pad**d)
    if np.any(active):
        _, z = cell_offsets(geom, n_h, m)
        vals = model.single_site.values(lams[active], z, geom)
        patch_n = (2 * m + 1) * n_h
        patch_idx = np.stack(np.meshgrid(*([np.arange(patch_n)] * d), indexing="ij"), axis=-1).reshape(-1, d)
        start = (sites[active] + L + m) * n_h
        idx = start[:, None, :] + patch_idx[None, :, :]
        flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), (n_pad,) * d)
        out = np.bincount(flat.ravel(), weights=vals.ravel(), minlength=n_pad**d)
    out = out.reshape((n_pad,) * d)
    crop = slice(2 * m * n_h, 2 * m * n_h + grid.n_axis)
    return np.ascontiguousarray(out[(crop,) * d])


# --------------------------------------------------------------------------
# non-degeneracy diagnostics


def _cell_quadrature(geometry: LatticeGeometry, n_quad: int):
    _, z = cell_offsets(geometry, n_quad, 0)
    return z, geometry.det / n_quad**geometry.dimension


def _law_draws(model: PotentialModel, n_samples: int, seed: int) -> list[np.ndarray]:
    """``n_samples`` draws per law, keyed by (seed, sample, law index)."""
    draws = []
    codes = np.arange(len(model.law.laws), dtype=np.uint64)
    table = np.stack([keyed_uniforms(seed, s, codes) for s in range(n_samples)])
    for i, law in enumerate(model.law.laws):
        draws.append(law.transform(table[:, i, 0], table[:, i, 1]))
    return draws


@dataclass
class NonDegeneracyMargin:
    estimate: float
    half_width: float
    per_law: list[tuple[float, float]]

    @property
    def lower_bound(self) -> float:
        return self.estimate - self.half_width


def non_degeneracy_margin(model: PotentialModel, n_samples: int, seed: int, n_quad: int = 64) -> NonDegeneracyMargin:
    """Monte Carlo estimate of ``inf_k E int_D min(u(lambda_k, x), 1) dx``."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    z, w = _cell_quadrature(model.geometry, n_quad)
    per = []
    for lams in _law_draws(model, n_samples, seed):
        integrals = w * np.minimum(model.single_site.values(lams, z, model.geometry), 1.0).sum(axis=1)
        mean, lo, _ = mean_interval(integrals)
        per.append((mean, mean - lo))
    worst = min(range(len(per)), key=lambda i: per[i][0])
    return NonDegeneracyMargin(per[worst][0], per[worst][1], per)


@dataclass
class MuCheck:
    passed: bool
    probability: float
    lower_bound: float
    per_law: list[tuple[float, float]]


def mu_nondegeneracy_check(model: PotentialModel, mu: float, n_samples: int, seed: int, n_quad: int = 64) -> MuCheck:
    """Estimate ``inf_k P{|{x in D : u(lambda_k, x) >= mu}| >= mu}`` and compare with ``mu``.

    Passes when the lower Wilson bound is at least ``mu``.
    """
    if not 0 < mu <= 1:
        raise ConfigurationError(f"mu must lie in (0, 1], got {mu}")
    z, w = _cell_quadrature(model.geometry, n_quad)
    per = []
    for lams in _law_draws(model, n_samples, seed):
        measure = w * (model.single_site.values(lams, z, model.geometry) >= mu).sum(axis=1)
        hits = int(np.sum(measure >= mu - 1e-12))
        lo, _ = wilson_interval(hits, n_samples)
        per.append((hits / n_samples, lo))
    p = min(v[0] for v in per)
    lo = min(v[1] for v in per)
    return MuCheck(lo >= mu, p, lo, per)


def find_nondegeneracy_level(model: PotentialModel, n_samples: int, seed: int, levels=None) -> float | None:
    """Largest ``mu`` from a dyadic ladder for which the check passes, else None."""
    levels = levels if levels is not None else [2.0**-j for j in range(0, 9)]
    for mu in sorted(levels, reverse=True):
        if mu_nondegeneracy_check(model, mu, n_samples, seed).passed:
            return mu
    return None


def warn_if_degenerate(model: PotentialModel) -> None:
    if not model.law.nontrivial:
        warnings.warn("coupling law is concentrated at 0; the random field vanishes", stacklevel=2)
