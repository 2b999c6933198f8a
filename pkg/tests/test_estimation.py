import math

import numpy as np
import pytest

from cvqkd import bound, constellation as C, estimation, keyrate
from cvqkd.errors import NonPhysicalError


def test_single_point_mean():
    alpha = 0.7 - 0.2j
    c = C.Constellation([alpha], [1.0])
    n = 200_000
    b = estimation.sample_channel(c, 1.0, 0.0, n, seed=5)
    sigma = math.sqrt(1 / (2 * n))
    m = b.outcomes.mean()
    assert abs(m.real - alpha.real) < 5 * sigma
    assert abs(m.imag - alpha.imag) < 5 * sigma


def test_photon_number_estimator():
    c = C.psk(4, 0.5)
    T, xi, n = 0.5, 0.04, 400_000
    b = estimation.sample_channel(c, T, xi, n, seed=11)
    p2 = np.abs(b.outcomes) ** 2
    target = T * 0.25 + T * xi / 2 + 1
    assert abs(p2.mean() - target) < 5 * p2.std() / math.sqrt(n)


def test_deterministic_and_streams():
    c = C.psk(4, 0.35)
    a = estimation.sample_channel(c, 0.5, 0.01, 1000, seed=3)
    b = estimation.sample_channel(c, 0.5, 0.01, 1000, seed=3)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)
    other = estimation.sample_channel(c, 0.5, 0.01, 1000, seed=3, stream=1)
    assert not np.array_equal(a.outcomes, other.outcomes)
    s1 = estimation.sample_channel_split(c, 0.5, 0.01, 1001, seed=3, chunks=4)
    s2 = estimation.sample_channel_split(c, 0.5, 0.01, 1001, seed=3, chunks=4)
    assert s1.n == 1001
    np.testing.assert_array_equal(s1.outcomes, s2.outcomes)


def test_sample_validation():
    with pytest.raises(ValueError):
        estimation.sample_channel(C.psk(4, 0.35), 0.5, 0.01, 0, seed=1)
    with pytest.raises(ValueError):
        estimation.SampleBatch(np.zeros(3, int), np.zeros(2, complex), 0)


def test_exact_outcomes():
    c = C.psk(4, 0.35)
    an = bound.analyze(c)
    idx = np.array([0, 1, 1, 2, 3, 3, 3, 0])
    batch = estimation.SampleBatch(idx, c.points[idx], 0)
    means, counts = estimation.per_state_means(batch, 4)
    np.testing.assert_allclose(means, c.points, atol=1e-15)
    np.testing.assert_array_equal(counts, [2, 2, 1, 3])
    # without vacuum noise the photon-number estimate is negative: rejected
    with pytest.raises(NonPhysicalError):
        estimation.empirical_stats(batch, an)


def test_unsampled_points_warn():
    c = C.qam_binomial(8, 5.0)
    an = bound.analyze(c)
    b = estimation.sample_channel(c, 0.5, 0.01, 200, seed=1)
    with pytest.warns(UserWarning, match="no samples"):
        estimation.empirical_stats(b, an)


def test_empirical_stats_converge():
    c = C.psk(4, 0.35)
    an = bound.analyze(c)
    T, xi = 0.5, 0.01
    exp = bound.expected_stats(an, T, xi)
    st = estimation.empirical_stats(estimation.sample_channel(c, T, xi, 10**6, seed=2), an)
    assert st.c1 == pytest.approx(exp.c1, abs=5e-3)
    assert st.c2 == pytest.approx(exp.c2, abs=5e-3)
    assert st.nB == pytest.approx(exp.nB, abs=5e-3)


def test_worst_case_scaling():
    obs = bound.ChannelStats(0.3, 0.1, 0.07)
    same = estimation.worst_case(obs, 1000, 1e-10, 0.0)
    assert (same.c1_min, same.c2_min, same.nB_max) == (obs.c1, obs.c2, obs.nB)
    a = estimation.worst_case(obs, 10_000, 1e-10, 2.0)
    b = estimation.worst_case(obs, 40_000, 1e-10, 2.0)
    assert (obs.c1 - b.c1_min) == pytest.approx((obs.c1 - a.c1_min) / 2)
    assert (b.nB_max - obs.nB) == pytest.approx((a.nB_max - obs.nB) / 2)
    tighter = estimation.worst_case(obs, 10_000, 1e-15, 2.0)
    assert tighter.nB_max > a.nB_max and tighter.c2_min < a.c2_min
    assert a.c1_min <= obs.c1 and a.c2_min <= obs.c2 and a.nB_max >= obs.nB
    for bad in ((0, 1e-3, 1.0), (10, 0.0, 1.0), (10, 1e-3, -1.0)):
        with pytest.raises(ValueError):
            estimation.worst_case(obs, *bad)


def test_penalties_only_hurt():
    c = C.psk(4, 0.35)
    an = bound.analyze(c)
    for T, xi in ((0.5, 0.01), (0.3, 0.02), (0.8, 0.005)):
        obs = bound.expected_stats(an, T, xi)
        k_obs = keyrate.key_rate_from_stats(an, obs).K
        for kappa in (0.1, 1.0, 5.0):
            wc = estimation.worst_case(obs, 10**6, 1e-10, kappa).as_stats()
            assert keyrate.key_rate_from_stats(an, wc).K <= k_obs


def test_batch_csv_round_trip(tmp_path):
    c = C.psk(4, 0.35)
    b = estimation.sample_channel(c, 0.5, 0.01, 50, seed=9)
    path = tmp_path / "b.csv"
    estimation.write_batch_csv(b, path)
    assert path.read_text().splitlines()[0] == "k,re_beta,im_beta"
    back = estimation.read_batch_csv(path, seed=9)
    np.testing.assert_array_equal(back.indices, b.indices)
    np.testing.assert_array_equal(back.outcomes, b.outcomes)
