import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landaukit.dyadic import (
    NormSpec,
    ProjectorBank,
    bernstein_check,
    build_partition,
    dyadic_table,
    evaluate_norm,
    norm_hmsl_direct,
    norm_hmsl_dyadic,
    project_freq,
    project_phase,
)
from landaukit.grid import ScalarField, VelocityGrid, l2_norm

from conftest import quiet_maxwellian

PART = build_partition()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1e4), min_size=1, max_size=50))
def test_partition_of_unity(radii):
    r = np.asarray(radii)
    total = PART.psi(r) + sum(PART.phi(r / 2.0**j) for j in range(20))
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_partition_profile_values():
    assert PART.phi(1.5) == 1.0
    assert PART.psi(2.0) == 0.0
    assert PART.psi(0.5) == 1.0
    r = np.linspace(0, 10, 2001)
    assert np.all(PART.psi(r) >= 0) and np.all(PART.phi(r) >= 0)
    assert PART.max_slope() <= 4.0


def test_support_disjointness_and_overlap_index():
    r = np.geomspace(1e-3, 1e3, 20001)
    for j in range(6):
        for k in range(j + 2, 8):
            assert np.max(PART.shell(j, r) * PART.shell(k, r)) == 0.0
        if j >= 1:
            assert np.max(PART.psi(r) * PART.shell(j, r)) == 0.0
    assert PART.overlap_index == 2


def test_plateau_contains_three_halves():
    c = PART.plateau_halfwidth
    assert c > 0
    r = np.linspace(1.5 - c, 1.5 + c, 101)
    assert np.all(PART.phi(r) == 1.0)


@pytest.mark.parametrize("bad", [0.7, 1.4])
def test_partition_rejects_bad_radius(bad):
    with pytest.raises(ValueError):
        build_partition(inner_radius=bad)


@pytest.fixture(scope="module")
def bank():
    return ProjectorBank(VelocityGrid(3, 32, 8.0))


def test_reconstruction(bank, rng):
    g = bank.grid
    f = ScalarField(g, rng.standard_normal(g.shape))
    rec_f = sum(project_freq(bank, j, f).values for j in bank.j_range)
    rec_p = sum(project_phase(bank, k, f).values for k in bank.k_range)
    assert np.max(np.abs(rec_f - f.values)) < 1e-12
    assert np.max(np.abs(rec_p - f.values)) < 1e-12


def test_far_apart_frequency_shells_annihilate(bank):
    g = bank.grid
    rng = np.random.default_rng(1)
    for _ in range(20):
        f = ScalarField(g, rng.standard_normal(g.shape))
        for j in bank.j_range:
            for jj in bank.j_range:
                if abs(j - jj) >= 2:
                    assert l2_norm(project_freq(bank, jj, project_freq(bank, j, f))) < 1e-12


def test_phase_shells_annihilate(bank, rng):
    g = bank.grid
    f = ScalarField(g, rng.standard_normal(g.shape))
    for k in bank.k_range:
        for kk in bank.k_range:
            if abs(k - kk) >= 2:
                assert l2_norm(project_phase(bank, kk, project_phase(bank, k, f))) == 0.0


def test_harmonic_on_plateau_is_fixed():
    g = VelocityGrid(1, 64, math.pi)
    bank = ProjectorBank(g)
    j = 2
    f = ScalarField(g, np.cos(1.5 * 2**j * g.v[0]))
    assert np.max(np.abs(project_freq(bank, j, f).values - f.values)) < 1e-12
    ratio, inv = bernstein_check(bank, j, f)
    assert ratio == pytest.approx(1.5, rel=1e-12)
    assert inv == pytest.approx(1 / 1.5, rel=1e-12)


def test_out_of_range_shell(bank):
    with pytest.raises(IndexError):
        bank.freq_multiplier(bank.j_max + 1)
    with pytest.raises(IndexError):
        bank.phase_mask(-2)
    with pytest.raises(IndexError):
        bernstein_check(bank, -1, bank.grid.zeros())


def test_plain_l2(bank, rng):
    f = ScalarField(bank.grid, rng.standard_normal(bank.grid.shape))
    assert norm_hmsl_direct(NormSpec(), f) == pytest.approx(l2_norm(f), rel=1e-12)


@pytest.mark.parametrize("l", [-3.0, 0.0, 2.5, 5.0])
def test_weighted_spike(l):
    g = VelocityGrid(3, 16, 4.0)
    vals = np.zeros(g.shape)
    idx = (3, 9, 12)
    vals[idx] = 2.0
    v0 = np.array([g.nodes[i] for i in idx])
    expected = 2.0 * (1 + v0 @ v0) ** (l / 2) * g.h**1.5
    assert norm_hmsl_direct(NormSpec(0, 0, l), ScalarField(g, vals)) == pytest.approx(expected, rel=1e-12)


def test_reference_gaussian_golden_value():
    # frozen from a refinement check: n=32 and n=64 agree to 1e-9
    spec = NormSpec(-0.5, 1, 3)
    for n in (32, 64):
        g = VelocityGrid(3, n, 8.0)
        assert norm_hmsl_direct(spec, quiet_maxwellian(1, 0, 1, g)) == pytest.approx(0.8594258650, abs=1e-6)


def test_zero_field(bank):
    assert norm_hmsl_dyadic(NormSpec(1, 1, 1), bank.grid.zeros(), bank) == 0.0


@settings(max_examples=10, deadline=None)
@given(scale=st.floats(1e-6, 1e6), s=st.sampled_from([0.0, 1.0, 2.0]))
def test_argmax_shell_is_scale_invariant(scale, s):
    g = VelocityGrid(3, 16, 4.0)
    bank = ProjectorBank(g)
    f = quiet_maxwellian(1, [1.0, 0, 0], 0.4, g)
    j = np.array(list(bank.j_range))

    def argmax(field):
        freq = dyadic_table(bank, field).sum(axis=1)
        return int(np.argmax(2.0 ** (-j) * (2.0 + j) ** (2 * s) * freq))

    assert argmax(f) == argmax(f * scale)


def test_single_shell_leakage(bank):
    g = bank.grid
    base = quiet_maxwellian(1, [2.0, 0, 0], 0.3, g)
    j0, k0 = 1, 1
    piece = project_freq(bank, j0, project_phase(bank, k0, base))
    spec = NormSpec(1.0, 1.0, 2.0)
    value = norm_hmsl_dyadic(spec, piece, bank, weights="power") ** 2
    ideal = 2.0 ** (2 * j0) * (2 + j0) ** 2 * 2.0 ** (2 * k0) * l2_norm(piece) ** 2
    # energy stays within neighbouring shells, each seen at most twice
    lo = 0.5 * 2.0**-2 * (1 + j0) ** 2 / (2 + j0) ** 2 * 2.0**-2
    hi = 2.0**2 * (3 + j0) ** 2 / (2 + j0) ** 2 * 2.0**2
    assert lo <= value / ideal <= hi


@pytest.mark.parametrize("text,expected", [
    ("m=-0.5,s=1,l=5", NormSpec(-0.5, 1, 5)),
    ("l=2", NormSpec(0, 0, 2)),
    (" m = 1 , s = 0 ", NormSpec(1, 0, 0)),
])
def test_norm_spec_parse(text, expected):
    assert NormSpec.parse(text) == expected


@pytest.mark.parametrize("text", ["q=1", "m=", "m=x"])
def test_norm_spec_parse_errors(text):
    with pytest.raises(ValueError):
        NormSpec.parse(text)


def test_evaluate_norm_record():
    bank = ProjectorBank(VelocityGrid(3, 48, 8.0))
    g = bank.grid
    smooth = quiet_maxwellian(1, 0, 1, g)
    i = np.indices(g.shape).sum(axis=0)
    rough = ScalarField(g, np.cos(np.pi * i))
    spec = NormSpec(0.5, 0, 0)
    rec = evaluate_norm(spec, smooth, bank=bank)
    assert not rec.truncation_flag
    assert rec.to_dict()["method"] == "direct"
    assert evaluate_norm(spec, rough, bank=bank).truncation_flag
    dy = evaluate_norm(spec, smooth, method="dyadic", bank=bank)
    assert dy.value == pytest.approx(norm_hmsl_dyadic(spec, smooth, bank))
    with pytest.raises(ValueError):
        evaluate_norm(spec, smooth, method="other", bank=bank)
