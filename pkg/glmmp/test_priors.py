import math

import numpy as np
import pytest

from . import oracle, settings
from .errors import DomainError
from .priors import PriorKind, PriorSpec, prior_marginal, prior_moments, prior_sample


def test_gaussian_prior_moments():
    spec = PriorSpec(PriorKind.gaussian)
    for r in (-3.0, 0.0, 0.4, 10.0):
        out = prior_moments(spec, r, 1.0)
        assert out.mean == pytest.approx(r / 2)
        assert out.variance == pytest.approx(0.5)
        assert out.derivative == pytest.approx(0.5)

    out = prior_moments(PriorSpec(PriorKind.gaussian, mean0=1.0, var0=3.0), 2.0, 1.0)
    assert out.mean == pytest.approx(1.75)
    assert out.variance == pytest.approx(0.75)


def test_point_mass_prior():
    spec = PriorSpec(PriorKind.point_mass, mean0=0.25, var0=0.0)
    out = prior_moments(spec, np.array([-4.0, 1.0]), 2.0)
    assert out.mean.tolist() == [0.25, 0.25]
    assert out.variance.tolist() == [0.0, 0.0]
    assert out.derivative.tolist() == [0.0, 0.0]
    assert prior_marginal(spec) == (0.25, 0.0)


def test_bernoulli_gaussian_symmetry():
    spec = PriorSpec.bernoulli_gaussian(0.5)
    for v in (1e-3, 0.5, 7.0, 1e3):
        assert prior_moments(spec, 0.0, v).mean == 0.0

    r = np.linspace(-5, 5, 41)
    pos = prior_moments(spec, r, 0.3)
    neg = prior_moments(spec, -r, 0.3)
    np.testing.assert_allclose(pos.mean, -neg.mean, atol=1e-15)
    np.testing.assert_allclose(pos.variance, neg.variance, rtol=1e-14)


def test_bernoulli_gaussian_example_against_oracle():
    spec = PriorSpec.bernoulli_gaussian(0.5)
    out = prior_moments(spec, 1.0, 0.5)
    mean, var = oracle.quad_moments(oracle.prior_factor(spec), 1.0, 0.5)

    assert out.mean == pytest.approx(mean, abs=1e-8)
    assert out.variance == pytest.approx(var, rel=1e-6)


def test_bernoulli_gaussian_against_oracle(rng):
    draws = 1000 if settings.SLOW_TESTS else 150

    for _ in range(draws):
        lam = rng.uniform(0.05, 1.0)
        r = rng.uniform(-10, 10)
        v = 10 ** rng.uniform(-3, 3)
        spec = PriorSpec.bernoulli_gaussian(lam)

        out = prior_moments(spec, r, v)
        mean, var = oracle.quad_moments(oracle.prior_factor(spec), r, v)

        assert out.mean == pytest.approx(mean, abs=1e-8), (lam, r, v)
        assert out.variance == pytest.approx(var, rel=1e-6, abs=1e-12), (lam, r, v)


def test_derivative(rng):
    for kind in (PriorKind.bernoulli_gaussian, PriorKind.gaussian):
        spec = PriorSpec(kind, lam=0.3)
        for _ in range(100):
            r = rng.uniform(-6, 6)
            v = 10 ** rng.uniform(-1, 1)
            h = 1e-6 * max(1.0, abs(r))

            out = prior_moments(spec, r, v)
            fd = (prior_moments(spec, r + h, v).mean - prior_moments(spec, r - h, v).mean) / (2 * h)

            assert out.derivative == pytest.approx(out.variance / v, rel=1e-10)
            assert out.derivative == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_stable_at_large_evidence():
    spec = PriorSpec.bernoulli_gaussian(0.05)
    out = prior_moments(spec, np.array([40.0, -40.0, 1e3]), 1e-4)
    assert np.all(np.isfinite(out.mean))
    assert np.all(np.isfinite(out.variance))
    np.testing.assert_allclose(out.mean, [40.0, -40.0, 1e3], rtol=1e-5)


def test_variance_contraction_log_concave(rng):
    r = rng.uniform(-10, 10, 500)
    v = 10 ** rng.uniform(-3, 3, 500)

    out = prior_moments(PriorSpec(PriorKind.gaussian, var0=2.0), r, v)
    assert np.all(out.variance <= v)
    assert np.all(out.variance >= 0)


def test_variance_contraction_on_average(rng):
    """
    The spike-and-slab posterior can be wider than the pseudo-observation noise at
    isolated r, but averaged over r drawn from the model it never is.
    """
    spec = PriorSpec.bernoulli_gaussian(0.1)
    for v in (0.05, 0.5, 5.0):
        x = prior_sample(spec, 200_000, rng.integers(1 << 32))
        r = x + rng.normal(0, math.sqrt(v), x.shape)
        out = prior_moments(spec, r, v)

        assert np.all(out.variance >= 0)
        assert out.variance.mean() <= v
        # And equals the actual error of the posterior mean.
        assert np.mean((out.mean - x) ** 2) == pytest.approx(out.variance.mean(), rel=0.03)


def test_wide_pseudo_variance_returns_prior():
    spec = PriorSpec.bernoulli_gaussian(0.5)
    out = prior_moments(spec, 0.7, 1e12)
    assert out.mean == pytest.approx(0.0, abs=1e-5)
    assert out.variance == pytest.approx(1.0, rel=1e-5)
    assert prior_marginal(spec) == pytest.approx((0.0, 1.0))


def test_domain_errors():
    spec = PriorSpec.bernoulli_gaussian(0.5)
    with pytest.raises(DomainError):
        prior_moments(spec, 1.0, 0.0)
    with pytest.raises(DomainError):
        prior_moments(spec, np.zeros(3), np.array([1.0, -1.0, 1.0]))
    with pytest.raises(DomainError):
        PriorSpec.bernoulli_gaussian(0.0)
    with pytest.raises(DomainError):
        PriorSpec.bernoulli_gaussian(1.5)
    with pytest.raises(DomainError):
        prior_sample(PriorSpec(lam=2.0), 10, 0)
    with pytest.raises(DomainError):
        prior_sample(spec, 0, 0)


def test_prior_sample():
    dense = prior_sample(PriorSpec.bernoulli_gaussian(1.0), 10_000, 7)
    assert np.all(dense != 0)
    assert dense.var() == pytest.approx(1.0, abs=0.05)

    x = prior_sample(PriorSpec.bernoulli_gaussian(0.5), 100_000, 11)
    assert np.mean(x == 0) == pytest.approx(0.5, abs=0.01)
    assert x.var() == pytest.approx(1.0, abs=0.02)

    np.testing.assert_array_equal(
        prior_sample(PriorSpec.bernoulli_gaussian(0.5), 100, 3),
        prior_sample(PriorSpec.bernoulli_gaussian(0.5), 100, 3),
    )


def test_spec_dict():
    spec = PriorSpec.from_dict({'kind': 'bernoulli_gaussian', 'lam': 0.25})
    assert spec.kind is PriorKind.bernoulli_gaussian
    assert spec.slab_var == 4.0
    assert spec.asdict() == {'kind': 'bernoulli_gaussian', 'lam': 0.25, 'mean0': 0.0, 'var0': 1.0}
    assert PriorSpec.from_dict(spec.asdict()) == spec
