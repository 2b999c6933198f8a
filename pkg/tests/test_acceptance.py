"""Acceptance suite: one test per criterion part, each recording a pass/fail line.

Tolerances are the stated ones; nothing here is loosened to force a pass.
"""

import math

import numpy as np
import pytest

from cvqkd import bound, constellation as C, estimation, fock, keyrate, mixed, scans

from acceptance_log import record

QAM_SIDES = (2, 4, 8, 16, 32)


def T_of(d):
    return scans.distance_to_transmittance(d)


@pytest.fixture(scope="module")
def qam_v5():
    """Analyses of binomial m x m QAM at V_A = 5 for m in QAM_SIDES."""
    return {m: bound.analyze(C.qam_binomial(m, 5.0)) for m in QAM_SIDES}


# 1. Oracle equivalence (PSK)


def test_c1_psk_closed_form_vs_fock():
    worst = 0.0
    for M in range(2, 9):
        for alpha in (0.2, 0.35, 0.6, 1.0):
            an = bound.analyze(C.psk(M, alpha))
            for T, xi in ((0.5, 0.02), (0.1, 0.01)):
                ref = bound.psk_closed_form(M, alpha, T, xi)
                got = bound.z_star_gaussian_channel(an, T, xi)
                worst = max(worst, abs(got - ref) / abs(ref))
    assert record(1, "Z* closed form vs Fock", worst <= 1e-8, f"max rel err {worst:.2e} <= 1e-8")


# 2. Gaussian degeneracy


def test_c2_gaussian_degeneracy():
    exact = True
    worst_t1 = worst_w = 0.0
    for n in (0.5, 1.0, 2.5):
        g = bound.gaussian_analysis(n)
        exact &= g.w == 0.0 and g.t1 == math.sqrt(n * n + n)
        th = bound.thermal_analysis(n, 80)
        worst_t1 = max(worst_t1, abs(th.t1 - g.t1) / g.t1)
        worst_w = max(worst_w, th.w / n)
    ok = exact and worst_t1 <= 1e-6 and worst_w < 1e-6
    assert record(
        2,
        "closed form and dim-80 thermal",
        ok,
        f"exact={exact}, t1 rel err {worst_t1:.1e}, max w/<n> {worst_w:.1e}",
    )


# 3. Near-Gaussian convergence


def test_c3_w_strictly_decreasing(qam_v5):
    ws = [qam_v5[m].w for m in QAM_SIDES]
    ok = all(b < a for a, b in zip(ws, ws[1:]))
    assert record(3, "w strictly decreasing in m", ok, "w = " + ", ".join(f"{w:.3e}" for w in ws))


def _rates(qam_v5):
    T = T_of(50)
    ks = {m: keyrate.key_rate(qam_v5[m], T, 0.02, 0.95).K for m in QAM_SIDES}
    kg = keyrate.key_rate(bound.gaussian_analysis(2.5), T, 0.02, 0.95).K
    return ks, kg


def test_c3_rate_monotone_toward_gaussian(qam_v5):
    ks, kg = _rates(qam_v5)
    seq = [ks[m] for m in QAM_SIDES] + [kg]
    ok = all(b > a for a, b in zip(seq, seq[1:]))
    assert record(3, "K increasing toward Gaussian", ok, "K = " + ", ".join(f"{k:.5f}" for k in seq))


def test_c3_qam64_within_5pct(qam_v5):
    ks, kg = _rates(qam_v5)
    rel = abs(ks[8] - kg) / abs(kg)
    assert record(3, "64-QAM within 5%", rel <= 0.05, f"K64={ks[8]:.5f}, KG={kg:.5f}, rel {rel:.3f}")


def test_c3_qam256_within_1pct(qam_v5):
    ks, kg = _rates(qam_v5)
    rel = abs(ks[16] - kg) / abs(kg)
    assert record(3, "256-QAM within 1%", rel <= 0.01, f"K256={ks[16]:.5f}, KG={kg:.5f}, rel {rel:.3f}")


# 4. QPSK pessimism


def test_c4_qpsk_vanishing_rate(qam_v5):
    k = keyrate.key_rate(qam_v5[2], T_of(50), 0.02, 0.95).K
    assert record(4, "4-QAM K <= 0", k <= 0, f"K = {k:.5f}")


# 5. PSK saturation

PSK_DISTANCES = np.arange(0.0, 101.0, 5.0)


@pytest.fixture(scope="module")
def psk_curves():
    out = {}
    for M in (4, 5, 6):
        an = bound.analyze(C.psk(M, 0.4))
        out[M] = np.array([keyrate.key_rate(an, T_of(d), 0.01, 0.95).K for d in PSK_DISTANCES])
    return out


def test_c5_psk5_psk6_indistinguishable(psk_curves):
    k5, k6 = psk_curves[5], psk_curves[6]
    pos = (k5 > 0) | (k6 > 0)
    rel = np.abs(k5 - k6)[pos] / np.maximum(np.abs(k5), np.abs(k6))[pos]
    worst = int(np.argmax(rel))
    d_worst = PSK_DISTANCES[pos][worst]
    ok = bool(np.all(rel < 0.01))
    assert record(
        5,
        "M=5 vs M=6 within 1% where K>0",
        ok,
        f"max rel gap {rel[worst]:.4f} at d={d_worst:g} km over {int(pos.sum())} positive points",
    )


def test_c5_psk5_psk6_dominate_psk4(psk_curves):
    k4, k5, k6 = psk_curves[4], psk_curves[5], psk_curves[6]
    pos = (k5 > 0) | (k6 > 0)
    ok = bool(np.all(k5[pos] > k4[pos]) and np.all(k6[pos] > k4[pos]))
    margin = float(np.min(np.minimum(k5, k6)[pos] - k4[pos]))
    assert record(5, "M=5,6 dominate M=4", ok, f"min margin {margin:.3e}")


# 6. xi_max separation


def _xi_max(mod):
    cfg = scans.ScanConfig(mod, distances=[25.0], xi=[0.0], optimize_va=True)
    (pt,) = scans.cmd_xi_max(cfg)
    return pt


def test_c6_xi_max_separation():
    pts = {name: _xi_max(mod) for name, mod in
           (("4", "qam-bin:2,5"), ("64", "qam-bin:8,5"), ("256", "qam-bin:16,5"), ("G", "gauss:5"))}
    x = {k: p.xi_max for k, p in pts.items()}
    first = x["4"] <= 0.1 * x["64"]
    second = x["256"] >= 0.9 * x["G"]
    detail = ", ".join(f"{k}: {p.xi_max:.5f} @V_A={p.V_A:.3g}" for k, p in pts.items())
    record(6, "4-QAM <= 0.1 x 64-QAM", first, detail)
    record(6, "256-QAM >= 0.9 x Gaussian", second, f"ratio {x['256'] / x['G']:.3f}")
    assert first and second


# 7. Pure-state reduction of the mixed bound


@pytest.mark.parametrize("c", [C.psk(4, 0.35), C.qam_binomial(4, 5.0)], ids=["4-PSK", "16-QAM"])
def test_c7_mixed_reduces_to_pure(c):
    an = bound.analyze(c)
    dim = an.dim
    states = []
    for a in c.points:
        v = fock.displacement(a, dim)[:, 0]
        states.append(np.outer(v, v.conj()))
    a_op = fock.annihilation(dim)
    centers = [np.trace(s @ a_op) for s in states]
    am = mixed.analyze_mixed(mixed.MixedConstellation(tuple(states), c.probs, centers, c.label))
    worst = 0.0
    for T, xi in ((0.5, 0.02), (0.1, 0.01)):
        st = bound.expected_stats(an, T, xi)
        p, m = bound.z_interval(an, st), mixed.z_interval_mixed(am, st)
        worst = max(worst, abs(p.low - m.low), abs(p.high - m.high))
    ok = worst <= 1e-8 and abs(am.corr) < 1e-9
    assert record(7, c.label, ok, f"interval diff {worst:.1e}, |corr| {abs(am.corr):.1e}")


# 8. Two-mode-squeezed identity


def test_c8_tmsv_identity():
    worst_nu = 0.0
    worst_k = 0.0
    chi_zero = True
    for V_A in (1.0, 5.0, 10.0):
        for beta in (0.95, 1.0):
            r = keyrate.key_rate(bound.gaussian_analysis(V_A / 2), 1.0, 0.0, beta)
            worst_nu = max(worst_nu, abs(r.nu1 - 1), abs(r.nu2 - 1), abs(r.nu3 - 1))
            chi_zero &= abs(r.chi) < 1e-7
            worst_k = max(worst_k, abs(r.K - beta * math.log2(1 + V_A / 2)))
    ok = worst_nu <= 1e-9 and chi_zero and worst_k < 1e-7
    assert record(8, "T=1, xi=0", ok, f"max |nu-1| {worst_nu:.1e}, chi~0 {chi_zero}, max |K err| {worst_k:.1e}")


# 9. Monte-Carlo estimator consistency


def _standard_errors(an, T, xi, n):
    """Analytic standard errors of (c1, c2, nB) for heterodyne data."""
    c = an.constellation
    s = 1.0 + T * xi / 2.0
    half = s / 2.0
    se_c1 = math.sqrt(np.sum(c.probs * np.abs(an.alpha_tau) ** 2) * half / n)
    se_c2 = math.sqrt(np.sum(c.probs * np.abs(c.points) ** 2) * half / n)
    mu2 = T * np.abs(c.points) ** 2
    var_p = np.sum(c.probs * (s * s + 2 * mu2 * s)) + np.sum(c.probs * mu2**2) - np.sum(c.probs * mu2) ** 2
    return se_c1, se_c2, math.sqrt(var_p / n)


def test_c9_estimators_within_5_se():
    c = C.psk(4, 0.35)
    an = bound.analyze(c)
    T, xi, n = 0.5, 0.01, 10**6
    exp = bound.expected_stats(an, T, xi)
    se = _standard_errors(an, T, xi, n)
    good = 0
    worst = 0.0
    for seed in range(100):
        st = estimation.empirical_stats(estimation.sample_channel(c, T, xi, n, seed), an)
        z = [abs(st.c1 - exp.c1) / se[0], abs(st.c2 - exp.c2) / se[1], abs(st.nB - exp.nB) / se[2]]
        worst = max(worst, max(z))
        good += all(v < 5 for v in z)
    assert record(9, "within 5 SE", good >= 95, f"{good}/100 seeds, largest deviation {worst:.2f} SE")


def test_c9_standard_error_scaling():
    c = C.psk(4, 0.35)
    an = bound.analyze(c)
    T, xi = 0.5, 0.01

    def spread(n, stream):
        vals = [
            estimation.empirical_stats(estimation.sample_channel(c, T, xi, n, seed, stream=stream), an).c2
            for seed in range(100)
        ]
        return float(np.std(vals, ddof=1))

    ratio = spread(10**5, 1) / spread(4 * 10**5, 2)
    assert record(9, "SE ratio n vs 4n", 1.8 <= ratio <= 2.2, f"ratio {ratio:.3f} in [1.8, 2.2]")


# 10. Property suites


@pytest.fixture(scope="module")
def random_constellations():
    rng = np.random.default_rng(20240601)
    out = []
    for _ in range(200):
        M = int(rng.integers(2, 9))
        r = 2.0 * np.sqrt(rng.uniform(0, 1, M))
        pts = r * np.exp(2j * np.pi * rng.uniform(0, 1, M))
        p = rng.uniform(0.05, 1.0, M)
        out.append(C.Constellation(pts, p / p.sum()))
    return out


def test_c10_w_nonnegative(random_constellations):
    ws = [bound.analyze(c).w for c in random_constellations]
    assert record(10, "w >= 0 on 200 random", min(ws) >= 0, f"min w {min(ws):.3e}")


def test_c10_cauchy_schwarz_slack(random_constellations):
    worst = math.inf
    for c in random_constellations:
        an = bound.analyze(c)
        for T in (1.0, 0.5, 0.1):
            for xi in (0.0, 0.01, 0.1):
                st = bound.expected_stats(an, T, xi)
                worst = min(worst, st.nB - st.c2**2 / an.mean_photon)
    # exact value is T xi / 2 >= 0; allow round-off only
    assert record(10, "slack nB - c2^2/<n> >= 0", worst >= -1e-12, f"min slack {worst:.2e}")


def test_c10_symplectic_and_chi(random_constellations):
    min_nu, min_chi, count = math.inf, math.inf, 0
    for c in random_constellations[:100]:
        an = bound.analyze(c)
        for T in (0.9, 0.3, 0.05):
            for xi in (0.005, 0.05):
                r = keyrate.key_rate(an, T, xi)
                for z in (r.z_low, r.z_high):
                    cp = keyrate.CovarianceParams(r.V, r.W, z)
                    if cp.det < 1:
                        continue
                    n1, n2, _, chi = keyrate.holevo_terms(cp)
                    min_nu, min_chi = min(min_nu, n1, n2), min(min_chi, chi)
                    count += 1
    ok = min_nu >= 1 - 1e-9 and min_chi >= -1e-12
    assert record(10, "nu >= 1, chi >= 0", ok, f"{count} matrices, min nu {min_nu:.6f}, min chi {min_chi:.2e}")


def test_c10_dimension_stability(random_constellations, qam_v5):
    worst = 0.0
    cases = list(random_constellations[:50]) + [C.qam_binomial(m, 5.0) for m in (2, 4, 8)]
    for c in cases:
        a = bound.analyze(c)
        b = bound.analyze(c, dim=a.dim + 10)
        worst = max(worst, abs(a.t1 - b.t1) / abs(a.t1))
        if a.w > 1e-6:
            worst = max(worst, abs(a.w - b.w) / a.w)
    assert record(10, "N vs N+10", worst <= 1e-9, f"max rel change {worst:.1e}")
