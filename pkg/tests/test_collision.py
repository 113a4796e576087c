import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landaukit.collision import (
    OracleSizeError,
    SingularInputError,
    TruncatedKernelBank,
    build_symbols,
    conv_a,
    direct_conv_a,
    kernel_a,
    kernel_b,
    q_conservative,
    q_nonconservative,
    q_truncated,
    weak_form_oracle,
)
from landaukit.diagnostics import bimodal
from landaukit.grid import ScalarField, VelocityGrid, integrate, l2_norm
from landaukit.selftest import compact_bump

from conftest import quiet_maxwellian


@pytest.fixture(scope="module")
def g16():
    return VelocityGrid(3, 16, 4.0)


@pytest.fixture(scope="module")
def sym16(g16):
    return build_symbols(g16)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda z: np.linalg.norm(z) > 1e-3))
def test_kernel_is_projection_over_radius(z):
    z = np.asarray(z)
    r = np.linalg.norm(z)
    a = kernel_a(z)
    assert np.allclose(a, a.T)
    assert np.allclose(a @ z, 0.0, atol=1e-12)
    assert np.trace(a) == pytest.approx(2.0 / r)
    assert np.allclose(kernel_b(z), -2.0 * z / r**3)


@pytest.mark.parametrize("mode", ["periodic", "free"])
def test_symbol_identities(mode):
    sym = build_symbols(VelocityGrid(3, 16, 4.0), mode=mode)
    assert sym.divergence_residual() < 1e-12
    assert sym.trace_residual() < 1e-12


def test_build_symbols_rejects_bad_input():
    with pytest.raises(ValueError):
        build_symbols(VelocityGrid(1, 16, 4.0))
    with pytest.raises(ValueError):
        build_symbols(VelocityGrid(3, 16, 4.0), mode="spherical")


def test_a_conv_maxwellian_at_origin():
    # int a(z) mu(z) dz = (2/3) int mu / |z| I = (2/3) sqrt(2/pi) I for T = 1
    g = VelocityGrid(3, 32, 8.0)
    A = conv_a(build_symbols(g), quiet_maxwellian(1, 0, 1, g)).matrix()
    c = g.n // 2
    expected = (2.0 / 3.0) * math.sqrt(2.0 / math.pi)
    assert np.allclose(A[c, c, c], expected * np.eye(3), atol=1e-6)


def test_matches_direct_quadrature(g16, sym16):
    f = compact_bump(g16, 3.0)
    A = conv_a(sym16, f).components
    D = direct_conv_a(f).components
    assert np.linalg.norm(A - D) / np.linalg.norm(D) <= 2e-2


def test_spike_reproduces_kernel_away_from_source(g16, sym16):
    c = g16.n // 2
    spike = np.zeros(g16.shape)
    spike[c, c, c] = 1.0 / g16.cell_volume
    A = conv_a(sym16, ScalarField(g16, spike)).matrix()
    z = np.stack(np.broadcast_arrays(*g16.v), axis=-1) - g16.nodes[c]
    far = np.linalg.norm(z, axis=-1) > 4 * g16.h
    ka = kernel_a(z[far])
    assert np.linalg.norm(A[far] - ka) / np.linalg.norm(ka) <= 5e-2


def test_maxwellian_is_near_equilibrium():
    ratios = []
    for n in (16, 32):
        g = VelocityGrid(3, n, 8.0)
        mu = quiet_maxwellian(1, 0, 1, g)
        ratios.append(l2_norm(q_conservative(build_symbols(g), mu)) / l2_norm(mu))
    assert ratios[0] / ratios[1] >= 4
    assert ratios[1] < 1e-8


def test_conservative_and_nonconservative_forms_agree():
    g = VelocityGrid(3, 32, 8.0)
    sym = build_symbols(g)
    f = bimodal(g)
    qc = q_conservative(sym, f)
    qn = q_nonconservative(sym, f)
    assert l2_norm(qc - qn) / l2_norm(qc) < 1e-4


def test_operator_conserves_mass(g16, sym16):
    f = compact_bump(g16, 3.0) + 0.1
    assert abs(integrate(q_conservative(sym16, f))) < 1e-12 * l2_norm(f)


def test_nonfinite_input_raises(g16, sym16):
    vals = compact_bump(g16, 3.0).values.copy()
    vals[2, 3, 4] = np.nan
    with pytest.raises(SingularInputError):
        q_conservative(sym16, ScalarField(g16, vals))


def test_grid_mismatch(sym16):
    with pytest.raises(ValueError):
        conv_a(sym16, VelocityGrid(3, 16, 5.0).zeros())


def test_truncated_bank_sums_to_full_operator(g16, sym16):
    bank = TruncatedKernelBank(sym16)
    f = compact_bump(g16, 3.0) + quiet_maxwellian(0.5, 0, 0.7, g16)
    full = q_conservative(sym16, f)
    total = sum((q_truncated(bank, k, f, f) for k in bank.k_range), start=g16.zeros())
    assert l2_norm(total - full) <= 1e-12 * l2_norm(full)
    assert l2_norm(q_truncated(bank, bank.k_max + 3, f, f)) == 0.0


def test_truncated_shell_kernel_support(sym16):
    bank = TruncatedKernelBank(sym16)
    z = np.array([[0.5, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
    vals = bank.kernel_values(1, z)
    # shell 1 lives on 1.6 <= |z| <= 16/3
    assert np.all(vals[0] == 0) and np.all(vals[1] == 0)
    assert np.allclose(vals[2], kernel_a(z[2]))
    assert bank.sup_norm(2) <= bank.sup_norm(1) <= bank.sup_norm(0)
    with pytest.raises(IndexError):
        bank.multipliers(-2)


def test_truncated_bank_needs_free_mode(g16):
    with pytest.raises(ValueError):
        TruncatedKernelBank(build_symbols(g16, mode="periodic"))


def test_oracles_refuse_large_grids():
    g = VelocityGrid(3, 24, 4.0)
    f = quiet_maxwellian(1, 0, 1, g)
    with pytest.raises(OracleSizeError):
        direct_conv_a(f)
    with pytest.raises(OracleSizeError):
        weak_form_oracle(f, f)


def test_weak_form_oracle_requires_positive_f():
    g = VelocityGrid(3, 8, 4.0)
    f = compact_bump(g, 2.0)
    with pytest.raises(ValueError):
        weak_form_oracle(f, f)


def test_weak_form_oracle_mass_is_zero():
    g = VelocityGrid(3, 8, 4.0)
    f = quiet_maxwellian(1, [0.5, 0, 0], 1.0, g)
    value, scale = weak_form_oracle(f, g.zeros() + 1.0, return_scale=True)
    assert value == 0.0
    assert scale == 0.0


def test_kernel_shells_sum_pointwise(sym16):
    bank = TruncatedKernelBank(sym16)
    K = bank.k_max
    rng = np.random.default_rng(5)
    z = rng.normal(size=(200, 3))
    z *= (rng.uniform(0.05, 2.0 ** (K - 1), 200) / np.linalg.norm(z, axis=1))[:, None]
    total = sum(bank.kernel_values(k, z) for k in range(-1, K + 1))
    assert np.max(np.abs(total - kernel_a(z))) <= 1e-10 * np.max(np.abs(kernel_a(z)))


def test_kernel_shell_scaling_law():
    g = VelocityGrid(3, 32, 8.0)
    bank = TruncatedKernelBank(build_symbols(g))
    # only shells whose plateau lies inside the sampled range |z_i| <= 2L
    shells = [k for k in range(0, bank.k_max + 1) if (4 / 3) * 2.0**k <= 2 * g.L]
    assert len(shells) >= 3
    scaled = [bank.sup_norm(k) * 2.0**k for k in shells]
    assert max(scaled) / min(scaled) < 2.0
