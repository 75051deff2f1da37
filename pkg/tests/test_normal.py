"""The shared normal CDF against an arbitrary-precision oracle."""
import mpmath
import numpy as np

from gridhedge.normal import normal_cdf, normal_ppf

mpmath.mp.dps = 50


def test_matches_mpmath_below_1e12():
    xs = np.concatenate([np.linspace(-8, 8, 401), [-37.0, 37.0, 0.033541, -0.033541]])
    for x in xs:
        want = float(mpmath.ncdf(mpmath.mpf(float(x))))
        assert abs(normal_cdf(x) - want) < 1e-12


def test_symmetry_and_bounds():
    xs = np.linspace(-6, 6, 101)
    vals = normal_cdf(xs)
    assert np.all(vals >= 0) and np.all(vals <= 1)
    assert np.allclose(vals + normal_cdf(-xs), 1.0, atol=1e-15)


def test_ppf_round_trip():
    qs = np.linspace(0.01, 0.99, 25)
    assert np.allclose(normal_cdf(normal_ppf(qs)), qs, atol=1e-12)
