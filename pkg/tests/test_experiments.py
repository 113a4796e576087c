import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landaukit.dyadic import NormSpec
from landaukit.experiments import (
    DOMAIN_NOTE,
    PreconditionError,
    RoughDataSpec,
    equivalence_constant,
    exp_tailed_data,
    fit_power_law,
    heat_closed_form_norm,
    localized_norm,
    moment_propagation,
    norm_corpus,
    relaxation,
    rough_data,
    rough_fourier_field,
    smoothing_rate,
    weight_index_scan,
    write_outputs,
)
from landaukit.diagnostics import ExpMomentSpec
from landaukit.grid import ScalarField, VelocityGrid, integrate, l2_norm


@settings(max_examples=25, deadline=None)
@given(slope=st.floats(-3, 3), C=st.floats(0.1, 10))
def test_power_law_fit_is_exact_on_clean_data(slope, C):
    t = np.geomspace(0.01, 1, 10)
    s, icpt, se = fit_power_law(t, C * t**slope)
    assert s == pytest.approx(slope, abs=1e-9)
    assert icpt == pytest.approx(math.log(C), abs=1e-9)
    assert se < 1e-6


def test_power_law_fit_needs_samples():
    with pytest.raises(ValueError):
        fit_power_law([1, 2], [1, 2])


def test_rough_fourier_field_normalisation():
    g = VelocityGrid(3, 16, 4.0)
    f = rough_fourier_field(g, r=0.5, seed=3, amplitude=2.0)
    assert l2_norm(f) == pytest.approx(2.0, rel=1e-12)
    assert abs(integrate(f)) < 1e-12
    assert np.array_equal(f.values, rough_fourier_field(g, r=0.5, seed=3, amplitude=2.0).values)
    assert not np.array_equal(f.values, rough_fourier_field(g, r=0.5, seed=4, amplitude=2.0).values)


def test_heat_closed_form_on_single_mode():
    g = VelocityGrid(1, 32, math.pi)
    f = ScalarField(g, np.cos(3 * g.v[0]))
    t = 0.1
    expected = math.exp(-9 * t) * (1 + 9) ** 0.5 * l2_norm(f)
    assert heat_closed_form_norm(f, 1.0, t) == pytest.approx(expected, rel=1e-12)


def test_pure_heat_rates_match_theory():
    g = VelocityGrid(3, 64, 4.0)
    r = -0.5
    f0 = rough_fourier_field(g, r=r, seed=1)
    fits = smoothing_rate("pure-heat", f0, [NormSpec(m=1)], (2e-3, 2e-2), r)
    assert fits[0].theory == pytest.approx(-0.75)
    assert fits[0].passed
    assert fits[0].n_samples == 12


@pytest.mark.parametrize("window,samples", [((0.0, 1.0), 12), ((0.5, 0.1), 12), ((0.1, 0.5), 4)])
def test_smoothing_rate_rejects_bad_windows(window, samples):
    g = VelocityGrid(1, 16, 4.0)
    with pytest.raises(ValueError):
        smoothing_rate("pure-heat", g.zeros() + 1.0, [NormSpec()], window, 0.0, samples=samples)


def test_smoothing_rate_writes_outputs(tmp_path):
    g = VelocityGrid(1, 64, 4.0)
    f0 = rough_fourier_field(g, r=0.0, seed=2)
    smoothing_rate("pure-heat", f0, [NormSpec(m=1), NormSpec(m=1, l=1)], (1e-3, 1e-2), 0.0, out_dir=tmp_path)
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["fits"]) == 2
    assert (tmp_path / "series.csv").read_text().count("\n") == 13


def test_norm_corpus_composition():
    g = VelocityGrid(3, 16, 4.0)
    corpus = norm_corpus(g)
    assert len(corpus) == 50
    assert all(f.grid == g for f in corpus)
    assert all(l2_norm(f) > 0 for f in corpus)
    again = norm_corpus(g)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(corpus, again))


def test_equivalence_constant_is_symmetric_bound():
    g = VelocityGrid(3, 16, 4.0)
    C, ratios = equivalence_constant(NormSpec(0.5, 0, 1), norm_corpus(g)[:10])
    assert C >= 1
    assert np.all((1 / C <= ratios) & (ratios <= C))


@pytest.mark.parametrize("kwargs", [{"J": -1}, {"alpha": 0.5}, {"radius": 1.5}, {"radius": 0.0}])
def test_rough_spec_validation(kwargs):
    with pytest.raises(ValueError):
        RoughDataSpec(**kwargs)


def test_rough_data_needs_a_large_enough_box():
    with pytest.raises(PreconditionError):
        rough_data(RoughDataSpec(J=2), VelocityGrid(3, 16, 8.0))


def test_rough_data_partial_sums():
    g = VelocityGrid(3, 96, 16.0)
    rd = rough_data(RoughDataSpec(J=1, eps=0.5), g)
    assert len(rd.partial_sums) == 2
    assert rd.partial_sums[1] > rd.partial_sums[0] > 0
    assert np.all(rd.field.values >= 0)
    assert rd.to_dict()["ratios"] == rd.ratios


def test_rough_data_explicit_centres_skip_sums():
    g = VelocityGrid(3, 32, 8.0)
    rd = rough_data(RoughDataSpec(centers=(2.0, 5.0)), g)
    assert rd.partial_sums == [] and rd.terms == []


def test_weight_scan_on_static_translates(tmp_path):
    g = VelocityGrid(1, 256, 32.0)
    centers = [4.0, 10.0, 16.0, 22.0]
    f = rough_data(RoughDataSpec(centers=tuple(centers), alpha=0.0), g, besov=False).field
    scan = weight_index_scan([(0.1, f)], n=1.0, l=0.0, r=0.0, centers=centers, out_dir=tmp_path)
    assert scan.weights["bounded"] == pytest.approx(-1.5)
    assert scan.weights["growing"] == pytest.approx(-1 / 6)
    # a heavier decaying weight shrinks the far translates
    assert scan.table["bounded"][-1] < scan.table["bounded"][0]
    assert not scan.growth_flag("bounded")
    assert scan.spread("bounded") >= 1
    assert (tmp_path / "series.csv").exists()


def test_localized_norm_ignores_distant_mass():
    g = VelocityGrid(1, 128, 16.0)
    far = np.exp(-((g.v[0] - 10.0) ** 2))
    assert localized_norm(ScalarField(g, far), center=-5.0, half=2.0, n=0, w=0) < 1e-12


def test_exp_tailed_data():
    g = VelocityGrid(3, 32, 8.0)
    f = exp_tailed_data(g)
    assert integrate(f) == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(ValueError):
        exp_tailed_data(g, weight=1.5)


def test_moment_propagation_precondition():
    g = VelocityGrid(3, 16, 8.0)
    with pytest.raises(PreconditionError):
        moment_propagation(exp_tailed_data(g), ExpMomentSpec(a=1.0), tail_rate=2.0)


def test_relaxation_rejects_negative_data():
    g = VelocityGrid(3, 16, 8.0)
    with pytest.raises(PreconditionError):
        relaxation(g.zeros() - 1.0)


def test_write_outputs(tmp_path):
    out = write_outputs(tmp_path / "x", {"a": np.float64(1.5), "b": np.arange(2)}, ["t", "y"],
                        [[0.0, 1], [0.5, 2]])
    report = json.loads((out / "report.json").read_text())
    assert report == {"domain_note": DOMAIN_NOTE, "a": 1.5, "b": [0, 1]}
    assert (out / "series.csv").read_text() == "t,y\n0.0,1\n0.5,2\n"
