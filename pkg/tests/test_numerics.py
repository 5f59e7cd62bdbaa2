import numpy as np
import pytest
from scipy.special import lambertw as scipy_lambertw

from roadprivacy.numerics import as_rng, lambert_w_m1


def test_matches_scipy_away_from_branch_point():
    rng = np.random.default_rng(0)
    zs = np.concatenate(
        [
            -np.logspace(-300, -1, 60),
            rng.uniform(-np.exp(-1.0) + 1e-8, -1e-12, 5000),
        ]
    )
    ours = lambert_w_m1(zs)
    ref = scipy_lambertw(zs, k=-1).real
    assert np.max(np.abs(ours - ref) / np.abs(ref)) < 1e-11


def test_defining_equation_residual_everywhere():
    # scipy itself loses accuracy at the branch point, so the defining
    # equation w * e^w = z is the oracle there.
    zs = np.concatenate(
        [
            -np.exp(-1.0) + np.logspace(-16, -2, 60),
            -np.logspace(-12, -0.44, 50),
        ]
    )
    w = lambert_w_m1(zs)
    resid = np.abs(w * np.exp(w) - zs) / np.abs(zs)
    assert resid.max() < 1e-12


def test_branch_point_and_limits():
    assert lambert_w_m1(-np.exp(-1.0)) == pytest.approx(-1.0, abs=1e-12)
    assert lambert_w_m1(0.0) == -np.inf
    assert np.isnan(lambert_w_m1(0.5))
    assert np.isnan(lambert_w_m1(-1.0))


def test_scalar_in_scalar_out():
    out = lambert_w_m1(-0.2)
    assert isinstance(out, float)
    assert out == pytest.approx(-2.542641357773526, rel=1e-12)


def test_as_rng_accepts_seed_and_generator():
    g = as_rng(42)
    assert isinstance(g, np.random.Generator)
    assert as_rng(g) is g
    a = as_rng(42).random()
    b = as_rng(42).random()
    assert a == b
