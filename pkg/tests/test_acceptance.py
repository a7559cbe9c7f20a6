"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and then
asserts. Runtime limits are part of each criterion.
"""

import json
import math
import time

import numpy as np
from scipy.stats import binom, norm

from csekit import cli
from csekit.calibration import REJECT_NOTHING, Calibrator
from csekit.designs import TwoStageSelectionDesign, ZTestDesign
from csekit.grid import NullHypothesis, Platten, Tile, build_platten, vertices
from csekit.model import BernoulliArms, NormalLocation, OutcomeMatrix
from csekit.tiltbound import (
    BoundQuery,
    forward_bound,
    inverse_bound,
    optimize_forward,
    pinsker_bound,
    q_profile,
    taylor_bound,
    tilt_exponent,
)
from csekit.validation import Validator, clopper_pearson_upper

N1 = NormalLocation(1)
Z975 = norm.ppf(0.975)
THETA0 = -0.25
A_REF = float(norm.cdf(THETA0 - Z975))
NULL = (NullHypothesis(0, 0.0, "<="),)


def ztest_rate(theta, lam):
    """Exact rejection probability of ``1 - Phi(X) < lam`` with ``X ~ N(theta, 1)``."""
    lam = np.asarray(lam, dtype=float)
    safe = np.where(lam > 0, lam, 0.5)
    return np.where(lam > 0, norm.cdf(theta + norm.ppf(safe)), 0.0)


def test_1_optimized_tilt_bound(acceptance):
    start = time.perf_counter()
    res = optimize_forward(N1, BoundQuery([THETA0], [[0.25]], A_REF))
    elapsed = time.perf_counter() - start
    gap = res.bound - 0.025
    ok = abs(res.bound - 0.0273) <= 5e-4 and abs(gap - 0.0023) <= 5e-4 and elapsed < 1.0
    acceptance(1, ok, f"bound={res.bound:.6f} gap={gap:.6f} q*={res.q_star:.4f} t={elapsed:.3f}s")


def test_2_baseline_ordering(acceptance):
    start = time.perf_counter()
    grad = norm.pdf(-2.20996)
    pinsker = pinsker_bound(A_REF, 0.25**2 / 2)
    taylor = taylor_bound(A_REF, grad * 0.25, 1.0, 0.25**2)
    direct = A_REF + grad * 0.25 + 0.03125
    bad = []
    for v in np.linspace(0.0, 0.3, 61)[1:]:
        t = optimize_forward(N1, BoundQuery([THETA0], [[v]], A_REF)).bound
        ty = taylor_bound(A_REF, grad * v, 1.0, v * v)
        p = pinsker_bound(A_REF, v * v / 2)
        if not t < ty < p:
            bad.append(round(float(v), 3))
    elapsed = time.perf_counter() - start
    ok = (
        abs(pinsker - 0.1386) <= 1e-4
        and abs(taylor - direct) <= 1e-4
        and not bad
        and elapsed < 1.0
    )
    detail = f"pinsker={pinsker:.6f} taylor={taylor:.6f} t={elapsed:.3f}s"
    if bad:
        detail += f"; ordering tilt<taylor<pinsker violated at v={bad} (Taylor is tighter at small v)"
    acceptance(2, ok, detail)


def test_3_round_trip(acceptance):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    families = (N1, BernoulliArms((20,)))
    worst, checked, clamped = 0.0, 0, 0
    for i in range(10_000):
        fam = families[i % 2]
        t0 = rng.uniform(-2, 2)
        v = rng.uniform(-0.5, 0.5)
        q = math.exp(rng.uniform(math.log(1.05), math.log(100.0)))
        a = math.exp(rng.uniform(math.log(1e-6), math.log(0.5)))
        u = forward_bound(fam, [t0], [v], q, a)
        if u >= 1.0:
            clamped += 1  # the clamp at 1 is not invertible
            continue
        back = inverse_bound(fam, [t0], [v], q, u)
        worst = max(worst, abs(back - a) / a)
        checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    acceptance(3, ok, f"max rel err={worst:.2e} over {checked} draws ({clamped} clamped at 1) t={elapsed:.2f}s")


def test_4_vertex_dominance(acceptance):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst = -math.inf
    count = 0
    for fam_kind in ("normal", "bernoulli"):
        for i in range(100):
            d = 1 + i % 3
            fam = NormalLocation(d) if fam_kind == "normal" else BernoulliArms(tuple(rng.integers(5, 40, d)))
            tile = Tile(rng.uniform(-1, 1, d), rng.uniform(0.01, 0.4, d), ())
            theta0 = tile.center + rng.uniform(-1, 1, d) * tile.half_widths
            q = math.exp(rng.uniform(math.log(1.1), math.log(50.0)))
            a = rng.uniform(1e-4, 0.3)
            vmax = max(forward_bound(fam, theta0, v - theta0, q, a) for v in vertices(tile))
            pts = tile.center + rng.uniform(-1, 1, (100, d)) * tile.half_widths
            ex = tilt_exponent(fam, theta0, pts - theta0, q)
            inner = np.minimum(1.0, np.exp((1 - 1 / q) * math.log(a) + ex))
            worst = max(worst, float(inner.max() - vmax))
            count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 30.0
    acceptance(4, ok, f"{count} tiles, max(interior - vertex max)={worst:.3e} t={elapsed:.2f}s")


def _unimodal(profile):
    i = int(np.argmin(profile))
    tol = 1e-12 * np.maximum(1.0, np.abs(profile))
    return bool(
        np.all(np.diff(profile[: i + 1]) <= tol[1 : i + 1])
        and np.all(np.diff(profile[i:]) >= -tol[i + 1 :])
    )


def test_5_quasi_convexity(acceptance):
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    qs = 1.0 + np.logspace(-3, 6, 512)
    failures = 0
    for i in range(200):
        d = 1 + i % 3
        fam = NormalLocation(d) if i % 2 else BernoulliArms(tuple(rng.integers(5, 40, d)))
        tile = Tile(rng.uniform(-1, 1, d), rng.uniform(0.01, 0.4, d), ())
        theta0 = tile.center + rng.uniform(-1, 1, d) * tile.half_widths
        inverse = bool(i % 4 >= 2)
        query = BoundQuery(theta0, vertices(tile) - theta0, rng.uniform(1e-5, 0.3))
        prof = q_profile(fam, query, qs, inverse=inverse)
        failures += not _unimodal(-prof if inverse else prof)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 10.0
    acceptance(5, ok, f"{failures} non-unimodal profiles of 200 t={elapsed:.2f}s")


def test_6_pointwise_calibration_mean(acceptance):
    start = time.perf_counter()
    platten = Platten([Tile([0.0], [0.0], (True,), sim_count=999)], NULL)
    fs = []
    for rep in range(2000):
        lam = Calibrator(ZTestDesign(), N1, 0.025, seed=rep).fit(platten).lambda_star_
        fs.append(float(ztest_rate(0.0, lam)))
    fs = np.asarray(fs)
    elapsed = time.perf_counter() - start
    se = fs.std(ddof=1) / math.sqrt(len(fs))
    z = (fs.mean() - 0.025) / se
    ok = abs(z) <= 4 and elapsed < 120
    acceptance(6, ok, f"mean f={fs.mean():.6f} se={se:.2e} z={z:+.2f} t={elapsed:.1f}s")


def test_7_region_calibration(acceptance):
    start = time.perf_counter()
    platten = build_platten([-1.0], [0.0], [64], NULL, sim_count=1000)
    thetas = (0.0, -0.25, -0.5)
    fs = []
    for rep in range(200):
        lam = Calibrator(ZTestDesign(), N1, 0.025, seed=rep).fit(platten).lambda_star_
        fs.append([float(ztest_rate(t, lam)) for t in thetas])
    fs = np.asarray(fs)
    elapsed = time.perf_counter() - start
    mean = fs.mean(axis=0)
    se = fs.std(axis=0, ddof=1) / math.sqrt(len(fs))
    ok = bool(np.all(mean <= 0.025 + 4 * se)) and mean[0] > 0.018 and elapsed < 600
    parts = " ".join(f"f({t})={m:.5f}+-{s:.1e}" for t, m, s in zip(thetas, mean, se))
    acceptance(7, ok, f"{parts} t={elapsed:.1f}s")


def test_8_validation_coverage(acceptance):
    start = time.perf_counter()
    reps = 500
    grids = {n: build_platten([-1.0], [0.0], [n], NULL, sim_count=100_000) for n in (16, 32)}
    uppers = {n: np.empty((reps, n)) for n in grids}
    for rep in range(reps):
        for n, platten in grids.items():
            est = Validator(ZTestDesign(), N1, delta=0.05, seed=rep).fit(platten)
            uppers[n][rep] = est.report_.tile_upper
    elapsed = time.perf_counter() - start
    worst_p, worst_frac = 1.0, 0.0
    for n, platten in grids.items():
        truth = np.array([norm.cdf(t.upper[0] - Z975) for t in platten])
        misses = (uppers[n] < truth).sum(axis=0)
        # one-sided test of H0: miss rate <= 0.05
        pvals = binom.sf(misses - 1, reps, 0.05)
        worst_p = min(worst_p, float(pvals.min()))
        worst_frac = max(worst_frac, float(misses.max()) / reps)
    mean16 = uppers[16].mean(axis=0)
    mean32 = uppers[32].mean(axis=0)
    nested = bool(np.all(mean32 <= np.repeat(mean16, 2)))
    ok = worst_p >= 0.001 and nested and elapsed < 900
    acceptance(
        8,
        ok,
        f"max miss rate={worst_frac:.3f} min binomial p={worst_p:.3g} "
        f"32-tile mean <= 16-tile mean: {nested} t={elapsed:.1f}s",
    )


def test_9_clopper_pearson_golden(acceptance):
    import mpmath

    start = time.perf_counter()
    r0 = clopper_pearson_upper(0, 100, 0.05)
    mine = clopper_pearson_upper(25, 1000, 0.05)
    mpmath.mp.dps = 40
    oracle = float(
        mpmath.findroot(
            lambda x: mpmath.betainc(26, 975, 0, x, regularized=True) - mpmath.mpf("0.95"),
            (0.02, 0.05),
            solver="anderson",
        )
    )
    elapsed = time.perf_counter() - start
    ok = abs(r0 - 0.0295127) <= 1e-6 and abs(mine - oracle) <= 1e-10 and elapsed < 1.0
    acceptance(9, ok, f"R=0: {r0:.9f}; R=25: {mine:.15f} vs {oracle:.15f} t={elapsed:.3f}s")


def test_10_thread_determinism(acceptance, tmp_path):
    start = time.perf_counter()
    base = {
        "family": {"name": "normal", "dim": 1},
        "design": {"name": "ztest", "params": {"lam": 0.025}},
        "grid": {"lower": [-1.0], "upper": [0.0], "counts": [16]},
        "hypotheses": [{"axis": 0, "threshold": 0.0}],
        "sim_count": 100_000,
        "master_seed": 2024,
        "adaptive": {"rounds": 1, "budget": 4, "sim_growth": 1.5},
    }
    same = True
    for command, extra in (("validate", {"delta": 0.05}), ("calibrate", {"alpha": 0.025})):
        cfg = tmp_path / f"{command}.json"
        cfg.write_text(json.dumps({**base, **extra}))
        dirs = []
        for threads in (1, 8):
            out = tmp_path / f"{command}-{threads}"
            assert cli.run([command, "--config", str(cfg), "--out", str(out), "--threads", str(threads)]) == 0
            dirs.append(out)
        for f in dirs[0].iterdir():
            same &= f.read_bytes() == (dirs[1] / f.name).read_bytes()
    elapsed = time.perf_counter() - start
    acceptance(10, same and elapsed < 120, f"byte-identical across 1 and 8 threads: {same} t={elapsed:.1f}s")


def test_11_selection_design_enumeration(acceptance):
    import itertools

    start = time.perf_counter()
    n1, n2 = 2, 2
    n = n1 + n2
    fam = BernoulliArms((n, n, n))
    design = TwoStageSelectionDesign((n1, n2))
    p = (0.35, 0.5, 0.55)
    tables = np.array(list(itertools.product((0, 1), repeat=3 * n)), dtype=bool)
    probs = np.ones(len(tables))
    for arm in range(3):
        k = tables[:, arm * n : (arm + 1) * n].sum(axis=1)
        probs *= p[arm] ** k * (1 - p[arm]) ** (n - k)
    fw = design.statistic(OutcomeMatrix("bernoulli", tables, fam.arm_slices), (True, True))

    def scalar_stat(row):
        c, t1, t2 = row[:n], row[n : 2 * n], row[2 * n :]
        t = t1 if t1[:n1].sum() >= t2[:n1].sum() else t2
        xt, xc = t.sum(), c.sum()
        pooled = (xt + xc) / (2 * n)
        se = math.sqrt(pooled * (1 - pooled) * 2 / n)
        z = 0.0 if se == 0 else (xt - xc) / n / se
        return 0.5 * math.erfc(z / math.sqrt(2))

    ref = np.array([scalar_stat(r) for r in tables])
    # atoms are separated by far more than the rounding noise, so a 1e-13 slack
    # keeps both implementations on the same side of every atom
    atoms = np.unique(ref)
    assert np.diff(atoms).min() > 1e-9
    cdf = np.array([probs[fw <= x + 1e-13].sum() for x in atoms])
    ref_cdf = np.array([probs[ref <= x + 1e-13].sum() for x in atoms])
    err = float(np.abs(cdf - ref_cdf).max())
    stat_err = float(np.abs(fw - ref).max())
    elapsed = time.perf_counter() - start
    ok = err <= 1e-12 and stat_err <= 1e-12
    acceptance(
        11,
        ok,
        f"selection design vs {len(tables)}-table enumeration: max CDF err={err:.1e}, "
        f"max stat err={stat_err:.1e} t={elapsed:.2f}s (desk-scale substitute for headline figures)",
    )
