"""Dispatch of a validated configuration to the numerical modules."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from functools import partial

import numpy as np

from .. import __version__
from ..bounds import ProofConstants, certification_suite, gap_constant, mean_support_mass
from ..eigensolve import SolverConfig, ground_energy, lowest_eigenpairs
from ..errors import ConfigurationError, LifshitzError
from ..operators import DIRICHLET
from ..sampling import derive_seed
from ..spectral_stats import (
    CtConstants,
    EnergyGrid,
    SampleContext,
    calibrate_combes_thomas,
    ct_decay,
    e0_identification,
    estimate_c_prime,
    fit_tail,
    ids_curve,
    ilse_probability,
    lower_bound_witness,
    slab_blocks,
    tail_probability,
)
from .config import ExperimentConfig
from .records import ExperimentRecord, FlatTable, write_outputs

TABLE_COLUMNS = {
    "spectrum": ["sample", "bc", "index", "eigenvalue", "residual"],
    "ids": ["bc", "energy", "mean", "ci_low", "ci_high"],
    "tail": ["offset", "energy", "L", "n_samples", "hits", "p_hat", "ci_low", "ci_high", "bound"],
    "lifshitz-fit": ["offset", "energy", "L", "n_samples", "hits", "p_hat", "ci_low", "ci_high", "ln_offset", "ln_neg_ln_p", "in_fit"],
    "bounds-check": ["name", "passed", "metric", "value"],
    "e0": [
        "L", "alpha", "n_samples", "hits", "p_hat", "ci_low", "ci_high", "exact",
        "max_quotient", "max_residual", "residual_bound", "min_gap", "unresolved",
    ],
    "lower-bound": [
        "L", "energy", "hits", "p_hat", "ci_low", "ci_high", "ids_lower", "ids_dirichlet",
        "free_quotient", "cblubb_discrete", "decomposition_gap",
    ],
    "ct-decay": ["energy_fraction", "energy", "E1", "distance", "norm", "rate", "fit_residual"],
    "ilse": [
        "ell", "kappa", "L", "energy", "distance", "threshold", "n_samples", "hits", "p_hat", "ci_low",
        "ci_high", "lower_bound", "ct_hypothesis_fraction", "C1", "C2", "c_prime",
    ],
}


class ExperimentError(LifshitzError):
    """A module error, tagged with the module and operation it came from."""

    def __init__(self, module: str, operation: str, cause: Exception):
        self.module, self.operation, self.cause = module, operation, cause
        super().__init__(f"{module}.{operation}: {type(cause).__name__}: {cause}")


@contextmanager
def stage(module: str, operation: str):
    try:
        yield
    except ExperimentError:
        raise
    except LifshitzError as exc:
        raise ExperimentError(module, operation, exc) from exc


@dataclass
class Outcome:
    results: dict
    table: FlatTable
    certifications: list[dict]


def _cert(name: str, passed: bool, **details) -> dict:
    return {"name": name, "passed": bool(passed), "details": details}


def _solver(cfg: ExperimentConfig, k: int = 1) -> SolverConfig:
    return SolverConfig(k=k, tol=cfg.params.tol, dense_cutoff=cfg.params.dense_cutoff, vectors=False)


# --------------------------------------------------------------------------
# per-kind handlers; each receives the shared sample context and a map function


def _spectrum_sample(ctx: SampleContext, L: int, bc: str, seed: int, scfg: SolverConfig, index: int):
    grid = ctx.grid(L)
    H = ctx.hamiltonian(ctx.potential(L, seed, index), grid, bc)
    spectrum = lowest_eigenpairs(H, scfg)
    return spectrum.eigenvalues[: scfg.k].tolist(), spectrum.residuals[: scfg.k].tolist()


def run_spectrum(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    scfg = _solver(cfg, p.k)
    with stage("eigensolve", "lowest_eigenpairs"):
        data = list(map_fn(partial(_spectrum_sample, ctx, p.L, p.bc, cfg.seed, scfg), range(cfg.samples)))
    table = FlatTable(TABLE_COLUMNS["spectrum"])
    for i, (vals, res) in enumerate(data):
        for j, (v, r) in enumerate(zip(vals, res)):
            table.append([i, p.bc, j + 1, float(v), float(r)])
    e1 = np.array([d[0][0] for d in data])
    return Outcome({"E0": ctx.E0, "L": p.L, "mean_E1": float(e1.mean()), "min_E1": float(e1.min())}, table, [])


def run_ids(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    energies = ctx.E0 + np.asarray(cfg.energies.values())
    with stage("spectral_stats", "ids_curve"):
        curve = ids_curve(ctx.model, p.bcs, p.L, energies, cfg.samples, cfg.seed, cfg.n_h, _solver(cfg), map_fn, ctx)
    table = FlatTable(TABLE_COLUMNS["ids"])
    for row in curve.rows():
        table.append(row)
    return Outcome({"E0": ctx.E0, "L": p.L, "volume": curve.volume}, table, [])


def proof_constants(cfg: ExperimentConfig, ctx: SampleContext) -> tuple[ProofConstants, dict]:
    p = cfg.params
    with stage("bounds", "gap_constant"):
        gap = gap_constant(ctx.model.background, ctx.model.geometry, cfg.n_h, p.gap_lengths)
    beta = p.beta
    if beta is None:
        with stage("bounds", "mean_support_mass"):
            beta = mean_support_mass(ctx.ground_state, ctx.model, 20_000, derive_seed(cfg.seed, 2**31))
    with stage("bounds", "ProofConstants"):
        pc = ProofConstants(gap.cgap, p.mu, min(1.0, beta))
    return pc, {"cgap": gap.cgap, "gap_slope": gap.slope, "mu": p.mu, "beta": pc.beta, "delta": pc.delta, "L0": pc.L0}


def _tail_estimates(cfg, ctx, map_fn):
    p = cfg.params
    pc, info = proof_constants(cfg, ctx)
    with stage("spectral_stats", "tail_probability"):
        grid = EnergyGrid(ctx.E0, tuple(cfg.energies.values()))
        est = tail_probability(
            ctx.model, grid, pc, cfg.samples, cfg.seed, p.bc, cfg.n_h, p.length_rule, p.rate, _solver(cfg), map_fn, ctx
        )
    info.update(E0=ctx.E0, length_rule=p.length_rule, bc=p.bc, skipped=[t.reason for t in est if t.skipped])
    return est, info


def run_tail(cfg, ctx, map_fn) -> Outcome:
    est, info = _tail_estimates(cfg, ctx, map_fn)
    table = FlatTable(TABLE_COLUMNS["tail"])
    for t in est:
        table.append([t.offset, t.energy, t.L, t.n_samples, t.hits, t.p_hat, t.ci_low, t.ci_high, t.bound])
    certs = []
    bounded = [t for t in est if t.bound is not None and not t.skipped]
    if bounded:
        ok = all(t.ci_high <= t.bound for t in bounded)
        certs.append(_cert("tail-below-chernoff-bound", ok, energies=[t.energy for t in bounded]))
    return Outcome(info, table, certs)


def run_lifshitz_fit(cfg, ctx, map_fn) -> Outcome:
    est, info = _tail_estimates(cfg, ctx, map_fn)
    with stage("spectral_stats", "fit_tail"):
        fit = fit_tail(est)
    table = FlatTable(TABLE_COLUMNS["lifshitz-fit"])
    for t in est:
        used = not t.skipped and 0 < t.p_hat < 1
        lx = math.log(t.offset)
        ly = math.log(-math.log(t.p_hat)) if used else None
        table.append([t.offset, t.energy, t.L, t.n_samples, t.hits, t.p_hat, t.ci_low, t.ci_high, lx, ly, used])
    info.update(slope=fit.slope, intercept=fit.intercept, residual=fit.residual, n_points=fit.n_points)
    certs = []
    if cfg.params.slope_max is not None:
        certs.append(_cert("lifshitz-slope", fit.slope <= cfg.params.slope_max, slope=fit.slope, slope_max=cfg.params.slope_max))
    return Outcome(info, table, certs)


def run_bounds_check(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    with stage("bounds", "certification_suite"):
        certs = certification_suite(cfg.seed, p.thirring_instances, p.projection_instances, p.temple_instances, p.chernoff_runs)
    table = FlatTable(TABLE_COLUMNS["bounds-check"])
    out = []
    for c in certs:
        numeric = {k: v for k, v in c.details.items() if isinstance(v, (int, float)) and not isinstance(v, bool)}
        if not numeric:
            table.append([c.name, c.passed, None, None])
        for k, v in numeric.items():
            table.append([c.name, c.passed, k, float(v)])
        out.append(_cert(c.name, c.passed, **c.details))
    return Outcome({"n_certificates": len(certs)}, table, out)


def run_e0(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    with stage("spectral_stats", "e0_identification"):
        rows = e0_identification(ctx.model, p.L_list, p.alphas, cfg.samples, cfg.seed, cfg.n_h, _solver(cfg), map_fn, ctx)
    table = FlatTable(TABLE_COLUMNS["e0"])
    certs = []
    for r in rows:
        table.append([getattr(r, c) for c in TABLE_COLUMNS["e0"]])
        if r.exact is not None:
            inside = r.ci_low <= r.exact <= r.ci_high
            certs.append(_cert(f"e0-probability-L{r.L}-alpha{r.alpha:g}", inside, exact=r.exact, p_hat=r.p_hat))
    return Outcome({"E0": ctx.E0}, table, certs)


def run_lower_bound(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    offsets = cfg.energies.values()
    energies = ctx.E0 + np.asarray(offsets)
    table = FlatTable(TABLE_COLUMNS["lower-bound"])
    certs, free = [], {}
    for L in p.L_list:
        with stage("spectral_stats", "ids_curve"):
            curve = ids_curve(ctx.model, [DIRICHLET], L, energies, cfg.samples, cfg.seed, cfg.n_h, _solver(cfg), map_fn, ctx)
        for j, E in enumerate(energies):
            with stage("spectral_stats", "lower_bound_witness"):
                w = lower_bound_witness(ctx.model, L, float(E), cfg.samples, cfg.seed, None, cfg.n_h, map_fn, ctx)
            ids_d = float(curve.mean[DIRICHLET][j])
            free[L] = w.free_quotient
            table.append([L, float(E), w.hits, w.p_hat, w.ci_low, w.ci_high, w.ids_lower, ids_d,
                          w.free_quotient, w.cblubb_discrete, w.decomposition_gap])
            certs.append(_cert(f"ids-dominates-witness-L{L}-E{E:.6g}", ids_d >= w.ids_lower, ids_dirichlet=ids_d, ids_lower=w.ids_lower))
            certs.append(_cert(f"decomposition-L{L}-E{E:.6g}", w.decomposition_ok, gap=w.decomposition_gap))
    for L in sorted(free):
        if 2 * L in free:
            ratio = free[L] / free[2 * L]
            certs.append(_cert(f"free-quotient-scaling-L{L}", abs(ratio / 4.0 - 1.0) <= 0.2, ratio=ratio))
    return Outcome({"E0": ctx.E0}, table, certs)


def _slab_offsets(L: int, width: float, max_offset: int | None = None) -> list[float]:
    last = int(math.floor(2 * L + 1 - 2 * width + 1e-9))
    if max_offset is not None:
        last = min(last, max_offset)
    return [float(o) for o in range(last + 1)]


def _dirichlet_operator(cfg, ctx, L: int):
    W = ctx.potential(L, cfg.seed, cfg.params.sample_index) if cfg.params.random_potential else None
    return ctx.hamiltonian(W, ctx.grid(L), DIRICHLET)


def run_ct_decay(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    scfg = _solver(cfg)
    H = _dirichlet_operator(cfg, ctx, p.L)
    with stage("eigensolve", "ground_energy"):
        E1 = ground_energy(H, scfg)
    with stage("spectral_stats", "slab_blocks"):
        source, targets, dists = slab_blocks(H.grid, p.width, _slab_offsets(p.L, p.width, p.max_offset))
    table = FlatTable(TABLE_COLUMNS["ct-decay"])
    runs = []
    for f in p.energy_fractions:
        E = ctx.E0 + f * (E1 - ctx.E0)
        with stage("spectral_stats", "ct_decay"):
            r = ct_decay(H, E, source, targets, dists, scfg, E1)
        runs.append((f, r))
        for dist, norm in zip(r.distances, r.norms):
            table.append([f, E, E1, float(dist), float(norm), r.rate, r.fit_residual])
    certs = [
        _cert(f"log-linear-decay-f{f:g}", r.fit_residual < p.ct_residual_max, fit_residual=r.fit_residual, limit=p.ct_residual_max)
        for f, r in runs
    ]
    if len(runs) >= 2:
        lo, hi = min(runs, key=lambda x: x[0]), max(runs, key=lambda x: x[0])
        certs.append(_cert("rate-decreases-with-energy", lo[1].rate > hi[1].rate, rate_low_energy=lo[1].rate, rate_high_energy=hi[1].rate))
    return Outcome({"E0": ctx.E0, "E1": E1, "rates": {f"{f:g}": r.rate for f, r in runs}}, table, certs)


def calibrate(cfg, ctx) -> tuple[CtConstants, float]:
    p = cfg.params
    scfg = _solver(cfg)
    H = ctx.hamiltonian(None, ctx.grid(p.calibration_L), DIRICHLET)
    with stage("eigensolve", "ground_energy"):
        scale = ground_energy(H, scfg) - ctx.E0
    gaps = sorted({*(scale * np.array([0.25, 0.5, 0.75])), *np.geomspace(scale, max(scale, p.energy_ceiling), 8)})
    with stage("spectral_stats", "calibrate_combes_thomas"):
        const, _ = calibrate_combes_thomas(H, gaps, p.width, _slab_offsets(p.calibration_L, p.width), 0.0, scfg)
    return const, scale


def run_ilse(cfg, ctx, map_fn) -> Outcome:
    p = cfg.params
    const, scale = calibrate(cfg, ctx)
    c_prime = p.c_prime
    if c_prime <= 0:
        with stage("spectral_stats", "estimate_c_prime"):
            c_prime = estimate_c_prime(ctx.model, p.ell, p.c_prime_samples, derive_seed(cfg.seed, 1), cfg.n_h, _solver(cfg), map_fn, ctx)
    const = CtConstants(const.C1, const.C2, c_prime)
    with stage("spectral_stats", "ilse_probability"):
        r = ilse_probability(ctx.model, p.ell, p.kappa, const, cfg.samples, cfg.seed, cfg.n_h, cfg=_solver(cfg), map_fn=map_fn, ctx=ctx)
    table = FlatTable(TABLE_COLUMNS["ilse"])
    table.append([r.ell, r.kappa, r.L, r.energy, r.distance, r.threshold, r.n_samples, r.hits, r.p_hat, r.ci_low,
                  r.ci_high, r.lower_bound, r.ct_hypothesis_fraction, const.C1, const.C2, const.c_prime])
    certs = [_cert("ilse-frequency", r.p_hat >= p.ilse_min, p_hat=r.p_hat, minimum=p.ilse_min)]
    return Outcome({"E0": ctx.E0, "calibration_gap_scale": scale, "C1": const.C1, "C2": const.C2, "c_prime": c_prime}, table, certs)


HANDLERS = {
    "spectrum": run_spectrum,
    "ids": run_ids,
    "tail": run_tail,
    "lifshitz-fit": run_lifshitz_fit,
    "bounds-check": run_bounds_check,
    "e0": run_e0,
    "lower-bound": run_lower_bound,
    "ct-decay": run_ct_decay,
    "ilse": run_ilse,
}


class _PoolMap:
    """Order-preserving parallel map; results land in the slot of their input index."""

    def __init__(self, pool: ProcessPoolExecutor, jobs: int):
        self.pool, self.jobs = pool, jobs

    def __call__(self, fn, items):
        items = list(items)
        chunk = max(1, len(items) // (4 * self.jobs))
        return list(self.pool.map(fn, items, chunksize=chunk))


def execute(cfg: ExperimentConfig, jobs: int = 1) -> tuple[ExperimentRecord, FlatTable]:
    """Run ``cfg`` in memory and return the record and its flat table."""
    if jobs < 1:
        raise ConfigurationError("jobs must be at least 1")
    start = time.perf_counter()
    with stage("harness", "build_model"):
        model = cfg.model()
    with stage("operators", "periodic_ground_state"):
        ctx = SampleContext.build(model, cfg.n_h)
    handler = HANDLERS[cfg.kind]
    if jobs == 1:
        outcome = handler(cfg, ctx, map)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcome = handler(cfg, ctx, _PoolMap(pool, jobs))
    certs = outcome.certifications
    record = ExperimentRecord(
        kind=cfg.kind,
        config_hash=cfg.config_hash(),
        config=cfg.canonical(),
        version=__version__,
        seed=cfg.seed,
        wall_time=time.perf_counter() - start,
        results={**outcome.results, "table": {"columns": outcome.table.columns, "rows": outcome.table.rows}},
        certifications=certs,
        passed=all(c["passed"] for c in certs),
    )
    return record, outcome.table


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out_dir=None, persist: bool = True) -> ExperimentRecord:
    """Run ``cfg``; unless ``persist`` is false, write the record and table under ``out_dir`` (default ``cfg.out``)."""
    record, table = execute(cfg, jobs)
    if persist:
        write_outputs(record, table, out_dir if out_dir is not None else cfg.out)
    return record


def table_from_record(record: ExperimentRecord) -> FlatTable:
    t = record.results["table"]
    return FlatTable(list(t["columns"]), [list(r) for r in t["rows"]])


__all__ = ["ExperimentError", "HANDLERS", "TABLE_COLUMNS", "execute", "run_experiment", "table_from_record"]
