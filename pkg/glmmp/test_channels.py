import math

import numpy as np
import pytest

from . import oracle, settings
from .channels import (
    ChannelKind, ChannelSpec, channel_moments, channel_sample, clip, l_stats,
    log_interval_mass, truncated_moments,
)
from .errors import DomainError


AWGN = ChannelSpec(ChannelKind.awgn, noise_var=1.0)


def clipped(noise_var: float, theta: float) -> ChannelSpec:
    return ChannelSpec(ChannelKind.clipped_awgn, noise_var, theta)


def test_clip():
    assert clip(0.3, 1) == 0.3
    assert clip(-5, 1) == -1
    assert clip(1, 1) == 1
    assert clip(np.array([-2.0, 0.5, 7.0]), 1.5).tolist() == [-1.5, 0.5, 1.5]
    with pytest.raises(DomainError):
        clip(0.3, 0)


def test_awgn_moments():
    m = channel_moments(AWGN, 2.0, 0.0, 1.0)
    assert (m.mean, m.variance) == pytest.approx((1.0, 0.5))

    # Gaussian product of N(y, noise_var) and N(z_s, v_s).
    spec = ChannelSpec(ChannelKind.awgn, noise_var=0.3)
    m = channel_moments(spec, 1.2, -0.4, 0.7)
    var = 1 / (1 / 0.3 + 1 / 0.7)
    assert m.variance == pytest.approx(var, rel=1e-12)
    assert m.mean == pytest.approx(var * (1.2 / 0.3 - 0.4 / 0.7), rel=1e-12)


def test_awgn_mean_increasing_in_y():
    y = np.linspace(-5, 5, 101)
    m = channel_moments(ChannelSpec(ChannelKind.awgn, noise_var=0.2), y, 0.3, 1.5)
    assert np.all(np.diff(m.mean) > 0)


def test_wide_clipping_is_awgn():
    a = channel_moments(ChannelSpec(ChannelKind.awgn, noise_var=0.1), 0.5, 0.0, 1.0)
    b = channel_moments(clipped(0.1, 1e3), 0.5, 0.0, 1.0)
    assert b.mean == pytest.approx(a.mean, abs=1e-10)
    assert b.variance == pytest.approx(a.variance, abs=1e-10)


def test_clipped_example_against_oracle():
    spec = clipped(0.01, 1.0)
    m = channel_moments(spec, 1.0, 0.8, 0.25)
    mean, var = oracle.quad_moments(oracle.channel_factor(spec, 1.0), 0.8, 0.25)

    assert m.mean == pytest.approx(mean, abs=1e-7)
    assert m.variance == pytest.approx(var, abs=1e-7)


def test_clipped_against_oracle(rng):
    draws = 1000 if settings.SLOW_TESTS else 150

    for _ in range(draws):
        theta = rng.uniform(0.2, 3.0)
        noise_var = 10 ** rng.uniform(-3, 0)
        z_s = rng.uniform(-3, 3)
        v_s = 10 ** rng.uniform(-2, 1)
        spec = clipped(noise_var, theta)
        y = float(channel_sample(spec, np.array([z_s]), rng.integers(1 << 32))[0])

        m = channel_moments(spec, y, z_s, v_s)
        mean, var = oracle.quad_moments(oracle.channel_factor(spec, y), z_s, v_s)

        params = (y, z_s, v_s, theta, noise_var)
        assert m.mean == pytest.approx(mean, abs=1e-7), params
        assert m.variance == pytest.approx(var, abs=1e-7), params


def test_clipped_saturated_tails():
    # Deep in saturation at high SNR, where naive CDF ratios lose everything.
    spec = clipped(10 ** -3, 1.0)
    m = channel_moments(spec, np.array([1.0, -1.0, 0.2]), np.array([8.0, -8.0, 0.0]), 1e-2)
    assert np.all(np.isfinite(m.mean))
    assert np.all(np.isfinite(m.variance))
    assert m.mean[0] == pytest.approx(8.0, abs=1e-6)
    assert m.mean[1] == pytest.approx(-8.0, abs=1e-6)
    assert m.mean[2] == pytest.approx(0.2 * 0.01 / 0.011, rel=1e-6)


def test_clipped_variance_can_exceed_pseudo_var():
    """
    Not log-concave: y near the threshold can't tell a slightly-saturated z from a
    far-saturated one, so the posterior spreads over the whole saturated side.
    """
    spec = clipped(0.01, 1.0)
    m = channel_moments(spec, 0.7, 3.0, 1.0)
    mean, var = oracle.quad_moments(oracle.channel_factor(spec, 0.7), 3.0, 1.0)
    assert m.variance == pytest.approx(var, abs=1e-7)
    assert m.variance > 1.0


def test_variance_contraction_on_average(rng):
    spec = clipped(0.01, 1.0)
    for v_s in (0.1, 1.0, 4.0):
        z = rng.normal(0, math.sqrt(v_s), 100_000)
        y = channel_sample(spec, z, rng.integers(1 << 32))
        m = channel_moments(spec, y, 0.0, v_s)

        assert np.all(m.variance >= 0)
        assert m.variance.mean() <= v_s
        assert np.mean((m.mean - z) ** 2) == pytest.approx(m.variance.mean(), rel=0.05)


def test_awgn_contraction(rng):
    spec = ChannelSpec(ChannelKind.awgn, noise_var=0.05)
    v_s = 10 ** rng.uniform(-3, 3, 200)
    m = channel_moments(spec, rng.normal(0, 3, 200), rng.normal(0, 3, 200), v_s)
    assert np.all(m.variance <= v_s)


def test_l_stats():
    spec = ChannelSpec(ChannelKind.awgn, noise_var=0.4)
    l1, l2 = l_stats(spec, 1.5, 0.5, 0.6)
    assert l1 == pytest.approx(1.0, rel=1e-12)
    assert l2 == pytest.approx(1.0, rel=1e-12)

    assert l_stats(spec, 0.5, 0.5, 2.0)[0] == 0.0

    # The closed AWGN form agrees with the definition through the moments.
    m = channel_moments(spec, 1.5, 0.5, 0.6)
    assert l1 == pytest.approx((m.mean - 0.5) / 0.6, rel=1e-12)
    assert l2 == pytest.approx((1 - m.variance / 0.6) / 0.6, rel=1e-12)

    spec = clipped(0.05, 1.0)
    y, z_s, v_s = 0.9, 0.4, 0.8
    l1, l2 = l_stats(spec, y, z_s, v_s)
    mean, var = oracle.quad_moments(oracle.channel_factor(spec, y), z_s, v_s)
    assert l1 == pytest.approx((mean - z_s) / v_s, abs=1e-7)
    assert l2 == pytest.approx((1 - var / v_s) / v_s, abs=1e-7)

    l1, l2 = l_stats(spec, np.array([0.9, -1.2]), np.array([0.4, 0.0]), 0.8)
    assert l1.shape == l2.shape == (2,)


def test_domain_errors():
    with pytest.raises(DomainError):
        channel_moments(AWGN, 1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        l_stats(AWGN, 1.0, 0.0, -1.0)
    with pytest.raises(DomainError):
        channel_moments(clipped(0.1, 1.0), 1.0, 0.0, np.array([1.0, 0.0]))
    with pytest.raises(DomainError):
        ChannelSpec(ChannelKind.clipped_awgn, 0.1).validate()
    with pytest.raises(DomainError):
        ChannelSpec(ChannelKind.awgn, 0.0).validate()


def test_channel_sample():
    z = np.linspace(-3, 3, 1001)

    quiet = ChannelSpec(ChannelKind.awgn, noise_var=1e-300)
    np.testing.assert_allclose(channel_sample(quiet, z, 0), z, atol=1e-140)

    spec = clipped(0.1, 1.0)
    y = channel_sample(spec, z, 5)
    noise = channel_sample(ChannelSpec(ChannelKind.awgn, 0.1), np.zeros_like(z), 5)
    assert np.all(np.abs(y - noise) <= 1.0 + 1e-12)

    np.testing.assert_array_equal(channel_sample(spec, z, 9), channel_sample(spec, z, 9))


def test_for_snr():
    assert ChannelSpec.for_snr(20).noise_var == pytest.approx(0.01)
    assert ChannelSpec.for_snr(20).kind is ChannelKind.awgn
    spec = ChannelSpec.for_snr(10, 1.0)
    assert spec.kind is ChannelKind.clipped_awgn
    assert spec.noise_var == pytest.approx(0.1)
    assert ChannelSpec.from_dict(spec.asdict()) == spec


def test_log_interval_mass():
    from scipy.stats import norm

    for a, b in ((-1.0, 1.0), (-np.inf, 0.3), (2.0, np.inf), (-0.5, 0.25)):
        expect = math.log(norm.cdf(b) - norm.cdf(a))
        assert log_interval_mass(a, b) == pytest.approx(expect, rel=1e-12)

    # Far tails, where Phi(b) - Phi(a) underflows to zero in the naive form.
    assert log_interval_mass(40.0, np.inf) == pytest.approx(norm.logsf(40.0), rel=1e-10)
    assert log_interval_mass(-np.inf, -40.0) == pytest.approx(norm.logcdf(-40.0), rel=1e-10)
    assert np.isfinite(log_interval_mass(30.0, 31.0))


def test_truncated_moments():
    mean, var, log_z = truncated_moments(0.0, 1.0, 0.0, np.inf)
    assert mean == pytest.approx(math.sqrt(2 / math.pi))
    assert var == pytest.approx(1 - 2 / math.pi)
    assert log_z == pytest.approx(math.log(0.5))

    mean, var, _ = truncated_moments(0.0, 4.0, -1.0, 1.0)
    from scipy.stats import truncnorm
    ref = truncnorm(-0.5, 0.5, loc=0.0, scale=2.0)
    assert mean == pytest.approx(ref.mean(), abs=1e-12)
    assert var == pytest.approx(ref.var(), rel=1e-10)
