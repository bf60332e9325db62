import numpy as np
import pytest

from gfid.errors import InvalidParams, ZeroSignalWithNoise
from gfid.noise import NoiseSpec, corrupt, noise_scale


def test_scale_is_relative_rms():
    y = np.array([3.0, 4.0, 0.0, 0.0])
    # ||y||^2 / N = 25 / 4
    assert noise_scale(y, 0.1) == pytest.approx(0.1 * 2.5)


def test_zero_sigma_is_identity_and_draws_nothing():
    rng = np.random.default_rng(3)
    y = np.arange(5.0)
    out = corrupt(y, 0.0, rng)
    assert np.array_equal(out, y) and out is not y
    assert rng.standard_normal() == np.random.default_rng(3).standard_normal()


def test_empirical_snr():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(200_000)
    noise = corrupt(y, 0.01, rng) - y
    assert np.std(noise) == pytest.approx(0.01 * np.sqrt(np.mean(y ** 2)), rel=0.01)


def test_seeded_spec_reproducible():
    y = np.ones(10)
    a = corrupt(y, NoiseSpec(0.1, seed=5))
    b = corrupt(y, NoiseSpec(0.1, seed=5))
    assert np.array_equal(a, b)


def test_errors():
    with pytest.raises(InvalidParams):
        NoiseSpec(-1.0)
    with pytest.raises(InvalidParams):
        NoiseSpec(float("nan"))
    with pytest.raises(ZeroSignalWithNoise):
        corrupt(np.zeros(3), 0.1, np.random.default_rng(0))
