"""The eleven acceptance criteria at their stated tolerances; one summary line each."""

import math
import time

import numpy as np
import pytest

from lifshitz.bounds import (
    ConcentrationLaw,
    bernoulli_half_tail,
    bernstein_bound,
    certify_chernoff,
    chernoff_rate,
    gap_constant,
    projection_suite,
    temple_failure_instance,
    temple_lower_bound,
    temple_suite,
    thirring_suite,
)
from lifshitz.eigensolve import counting_function
from lifshitz.errors import HypothesisError
from lifshitz.harness import execute, parse_config
from lifshitz.lattice import BoxGrid
from lifshitz.operators import (
    DIRICHLET,
    MEZINCESCU,
    NEUMANN,
    assemble_hamiltonian,
    boundary_condition,
    periodic_ground_state,
    split_operator,
)
from lifshitz.potential import PeriodicBackground
from lifshitz.spectral_stats import SampleContext

SEED = 2024


def test_thirring_certification(verdict):
    start = time.perf_counter()
    corollary = thirring_suite(10_000, SEED)
    projection = projection_suite(1_000, SEED)
    elapsed = time.perf_counter() - start
    ok = corollary.passed and projection.passed and elapsed < 10.0
    verdict(
        "1 Thirring",
        ok,
        f"corollary failures {corollary.details['failures']}/10000, projection failures "
        f"{projection.details['failures']}/1000, {elapsed:.2f} s",
    )


def test_temple_certification(verdict):
    suite = temple_suite(1_000, SEED)
    inst = temple_failure_instance()
    try:
        temple_lower_bound(inst.H, inst.psi, inst.E2)
        raised = False
    except HypothesisError:
        raised = True
    two_valued = math.isclose(inst.potential_second, inst.potential_first, rel_tol=1e-12)
    verdict(
        "2 Temple",
        suite.passed and raised and two_valued,
        f"{suite.details['checked']} checked, {suite.details['failures']} failures; indicator instance raised={raised}, "
        f"<W^2>=<W>: {two_valued}",
    )


def test_bernstein_against_binomial(verdict):
    start = time.perf_counter()
    worst = -np.inf
    ok = True
    for beta in (0.2, 0.5, 0.9):
        for n in (20, 50, 100, 200):
            exact, bound = bernoulli_half_tail(beta, n), bernstein_bound(beta, n)
            ok &= exact <= bound
            worst = max(worst, exact / bound)
    elapsed = time.perf_counter() - start
    verdict("3 Bernstein", ok and elapsed < 1.0, f"max exact/bound {worst:.3g}, {elapsed * 1e3:.1f} ms")


def test_chernoff(verdict):
    parts = []
    ok = True
    for law in (ConcentrationLaw("bernoulli", 0.5), ConcentrationLaw("uniform")):
        rate = chernoff_rate(law)
        cert = certify_chernoff(law, 50, 100_000, SEED)
        ok &= rate.mgf < 1 - 1e-6 and cert.passed
        parts.append(f"{law.kind}: M(s*)={rate.mgf:.4f}, p_sim={cert.details['empirical']:.2e} vs e^-Cn={cert.details['bound']:.2e}")
    verdict("4 Chernoff", ok, "; ".join(parts))


def test_boundary_bracketing(verdict, cosine_model):
    ctx = SampleContext.build(cosine_model, 8)
    grid = ctx.grid(4)
    gs = ctx.ground_state
    energies = ctx.E0 + np.linspace(0.05, 6.0, 20)
    order_violation = 0.0
    neumann_bad = dirichlet_bad = 0
    for i in range(100):
        W = ctx.potential(4, SEED, i)
        ops = {bc: assemble_hamiltonian(cosine_model.background, W, grid, boundary_condition(bc, gs, grid)) for bc in (NEUMANN, MEZINCESCU, DIRICHLET)}
        ev = {bc: np.linalg.eigvalsh(H.dense()) for bc, H in ops.items()}
        order_violation = max(
            order_violation,
            float(np.max(ev[NEUMANN][:10] - ev[MEZINCESCU][:10])),
            float(np.max(ev[MEZINCESCU][:10] - ev[DIRICHLET][:10])),
        )
        for bc in (NEUMANN, DIRICHLET):
            left, right = split_operator(ops[bc]).blocks()
            el, er = np.linalg.eigvalsh(left.toarray()), np.linalg.eigvalsh(right.toarray())
            for E in energies:
                whole = counting_function(ev[bc], E)
                parts = counting_function(el, E) + counting_function(er, E)
                if bc == NEUMANN:
                    neumann_bad += whole > parts
                else:
                    dirichlet_bad += whole < parts
    ok = order_violation <= 1e-10 and neumann_bad == 0 and dirichlet_bad == 0
    verdict(
        "5 bracketing",
        ok,
        f"max E_k ordering violation {order_violation:.2e}; N subadditivity violations {neumann_bad}, "
        f"D superadditivity violations {dirichlet_bad} over 100 samples x 20 energies",
    )


def test_mezincescu_ground_state(verdict, line):
    vper = PeriodicBackground.cosine(1.0, 1)
    n_h = 8
    gs = periodic_ground_state(vper, line, n_h)
    h = 1.0 / n_h
    scale = 1.0 + vper.sup_norm()
    worst = 0.0
    for L in range(1, 7):
        grid = BoxGrid(line, L, n_h)
        H = assemble_hamiltonian(vper, None, grid, boundary_condition(MEZINCESCU, gs, grid))
        worst = max(worst, abs(float(np.linalg.eigvalsh(H.dense())[0]) - gs.energy))
    slope = gap_constant(vper, line, n_h, range(2, 13)).slope
    ok = worst <= 5 * h * h * scale and -2.2 <= slope <= -1.8
    verdict("6 Mezincescu", ok, f"max |E1 - E0| {worst:.2e} (limit {5 * h * h * scale:.3g}), gap slope {slope:.3f}")


def test_lifshitz_tail_slope(verdict):
    text = f"""
kind = "lifshitz-fit"
seed = {SEED}
samples = 2000
[energies]
smallest = {0.3 * 1.3**-5!r}
ratio = 1.3
count = 6
[params]
length_rule = "gap"
slope_max = -0.35
"""
    start = time.perf_counter()
    rec, _ = execute(parse_config(text))
    elapsed = time.perf_counter() - start
    slope = rec.results["slope"]
    verdict(
        "7 Lifshitz slope",
        slope <= -0.35 and rec.results["n_points"] == 6 and elapsed < 600,
        f"slope {slope:.3f} over {rec.results['n_points']} energies, {elapsed:.0f} s",
    )


def test_lower_bound_chain(verdict):
    text = f"""
kind = "lower-bound"
seed = {SEED}
samples = 500
[energies]
offsets = [0.5, 1.0]
[params]
L_list = [2, 4]
"""
    rec, _ = execute(parse_config(text))
    failed = [c["name"] for c in rec.certifications if not c["passed"]]
    ratio = next(c["details"]["ratio"] for c in rec.certifications if c["name"].startswith("free-quotient"))
    gap = max(row[-1] for row in rec.results["table"]["rows"])
    verdict(
        "8 lower-bound chain",
        rec.passed and len(rec.certifications) == 9,
        f"{len(rec.certifications) - len(failed)}/{len(rec.certifications)} checks, max decomposition gap {gap:.1e}, "
        f"quotient ratio L=2/L=4 {ratio:.3f}",
    )


def test_combes_thomas(verdict):
    rec, _ = execute(parse_config(f'kind = "ct-decay"\nseed = {SEED}\n[params]\nL = 4\nenergy_fractions = [0.25, 0.5, 0.75]\n'))
    fit = {c["name"]: c for c in rec.certifications}
    residual = fit["log-linear-decay-f0.5"]["details"]["fit_residual"]
    rates = rec.results["rates"]
    ok = residual < 1e-2 and rates["0.25"] > rates["0.75"]
    verdict(
        "9 Combes-Thomas",
        ok,
        f"1-R^2 at E1/2 {residual:.3f} (limit 0.01); rate E1/4 {rates['0.25']:.3f} vs 3E1/4 {rates['0.75']:.3f}",
    )


def test_ilse(verdict):
    text = f'kind = "ilse"\nseed = {SEED}\nsamples = 500\n[params]\nell = 3\nkappa = 2\n'
    rec, table = execute(parse_config(text))
    row = dict(zip(table.columns, table.rows[0]))
    verdict(
        "10 ILSE",
        row["p_hat"] >= 0.9,
        f"p_hat {row['p_hat']:.3f} (Wilson {row['ci_low']:.3f}-{row['ci_high']:.3f}), C1 {row['C1']:.3f}, "
        f"C2 {row['C2']:.3f}, c' {row['c_prime']:.3f}",
    )


REPRO = {
    "spectrum": "samples = 8\n[params]\nL = 2\nk = 4\n",
    "ids": "samples = 8\n[params]\nL = 2\n",
    "tail": 'samples = 30\n[energies]\nsmallest = 0.01\ncount = 3\n[params]\nlength_rule = "gap"\n',
    "lifshitz-fit": 'samples = 60\n[energies]\nsmallest = 0.08\nratio = 1.3\ncount = 3\n[params]\nlength_rule = "gap"\n',
    "bounds-check": "[params]\nthirring_instances = 40\nprojection_instances = 20\ntemple_instances = 20\nchernoff_runs = 1000\n",
    "e0": "samples = 8\n[params]\nL_list = [1, 2]\n",
    "lower-bound": "samples = 8\n[energies]\noffsets = [0.5]\n[params]\nL_list = [1, 2]\n",
    "ct-decay": "[params]\nL = 3\nmax_offset = 3\n",
    "ilse": "samples = 8\n[params]\nc_prime_samples = 8\n",
}


@pytest.mark.parametrize("kind", list(REPRO))
def test_reproducible_across_workers(verdict, kind):
    cfg = parse_config(f'kind = "{kind}"\nseed = {SEED}\n' + REPRO[kind])
    serial = execute(cfg, 1)[1].to_csv()
    again = execute(cfg, 1)[1].to_csv()
    parallel = execute(cfg, 4)[1].to_csv()
    verdict(f"11 reproducibility [{kind}]", serial == again == parallel, f"{serial.count(chr(10)) - 1} rows, jobs 1 vs 4")
