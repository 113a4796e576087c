import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from landaukit.dyadic import NormSpec, norm_hmsl_direct
from landaukit.estimators import DyadicProfile, LandauFlow, PowerLawRateRegressor, WeightedSobolevNorm
from landaukit.grid import ScalarField, VelocityGrid

from conftest import quiet_maxwellian


@pytest.fixture(scope="module")
def rows():
    g = VelocityGrid(3, 16, 8.0)
    fields = [quiet_maxwellian(1, (s, 0, 0), 1.0, g) for s in (0.0, 0.5)]
    return g, np.stack([f.values.ravel() for f in fields])


def test_norm_transformer_matches_function(rows):
    g, X = rows
    est = WeightedSobolevNorm(m=1, l=2, L=8.0)
    out = est.fit_transform(X)
    assert out.shape == (2, 1)
    expected = norm_hmsl_direct(NormSpec(1, 0, 2), ScalarField(g, X[0].reshape(g.shape)))
    assert out[0, 0] == pytest.approx(expected)


def test_dyadic_method_and_bad_method(rows):
    _, X = rows
    direct = WeightedSobolevNorm(m=0.5).fit_transform(X)
    dyadic = WeightedSobolevNorm(m=0.5, method="dyadic").fit_transform(X)
    assert np.all(np.abs(np.log(dyadic / direct)) < np.log(10))
    with pytest.raises(ValueError):
        WeightedSobolevNorm(method="other").fit(X).transform(X)


def test_dyadic_profile_shape(rows):
    _, X = rows
    est = DyadicProfile().fit(X)
    out = est.transform(X)
    assert out.shape == (2, est.shape_[0] * est.shape_[1])
    assert np.all(out >= 0)


def test_landau_flow_conserves_mass(rows):
    g, X = rows
    bimodal = 0.5 * (X[1] + np.flip(X[1].reshape(g.shape), axis=0).ravel())
    out = LandauFlow(t_end=0.01).fit_transform(bimodal[None, :])
    assert out.shape == (1, X.shape[1])
    assert np.sum(out) == pytest.approx(np.sum(bimodal), rel=1e-12)


def test_heat_flow_in_one_dimension():
    g = VelocityGrid(1, 32, np.pi)
    X = np.cos(g.v[0])[None, :]
    out = LandauFlow(model="pure-heat", t_end=0.5, dim=1, L=np.pi).fit_transform(X)
    assert np.allclose(out, np.exp(-0.5) * X, atol=1e-6)


def test_transformers_validate_input(rows):
    _, X = rows
    with pytest.raises(NotFittedError):
        WeightedSobolevNorm().transform(X)
    with pytest.raises(ValueError):
        WeightedSobolevNorm().fit(X[:, :100])
    est = WeightedSobolevNorm().fit(X)
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 8**3)))


def test_params_round_trip_through_clone():
    est = WeightedSobolevNorm(m=2, s=1, l=-1, method="dyadic")
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert LandauFlow().set_params(t_end=0.3).t_end == 0.3


def test_power_law_regressor():
    t = np.geomspace(0.01, 1, 12)[:, None]
    y = 3.0 * t[:, 0] ** -0.75
    reg = PowerLawRateRegressor().fit(t, y)
    assert reg.coef_[0] == pytest.approx(-0.75)
    assert np.allclose(reg.predict(t), y)
    assert reg.score(t, y) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        PowerLawRateRegressor().fit(np.c_[t, t], y)
    with pytest.raises(ValueError):
        PowerLawRateRegressor().fit(-t, y)


def test_pipeline_composition(rows):
    _, X = rows
    pipe = make_pipeline(LandauFlow(model="pure-heat", t_end=0.01, L=8.0), WeightedSobolevNorm(m=1))
    out = pipe.fit_transform(X)
    raw = WeightedSobolevNorm(m=1).fit_transform(X)
    assert np.all(out < raw)
