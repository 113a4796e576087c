import json
import math

import numpy as np
import pytest

from landaukit.grid import ScalarField, VelocityGrid, load_field, weight_field
from landaukit.integrator import (
    AbortedRunError,
    Model,
    SchemeConfig,
    config_hash,
    max_diffusivity,
    rhs,
    run,
    stable_dt,
)

from conftest import quiet_maxwellian


@pytest.mark.parametrize("kwargs", [
    {"scheme": "leapfrog"},
    {"dt": 0.0},
    {"dt_max": -1.0},
    {"cfl_safety": 0.0},
    {"cfl_safety": 1.5},
    {"t_end": 0.0},
    {"record_every": 0},
])
def test_scheme_config_validation(kwargs):
    with pytest.raises(ValueError):
        SchemeConfig(**kwargs)


def test_unknown_model():
    with pytest.raises(ValueError):
        Model("boltzmann")


def test_config_hash_is_stable():
    assert config_hash(SchemeConfig()) == config_hash(SchemeConfig())
    assert config_hash(SchemeConfig()) != config_hash(SchemeConfig(t_end=2.0))
    assert len(config_hash({"a": 1})) == 16


@pytest.mark.parametrize("n", [16, 32])
def test_stable_dt_heat_formula(n):
    g = VelocityGrid(1, n, math.pi)
    f = ScalarField(g, np.cos(g.v[0]))
    cfg = SchemeConfig(cfl_safety=0.4)
    assert stable_dt(Model("pure-heat"), f, cfg) == pytest.approx(0.4 * g.h**2 / 2)


def test_stable_dt_scales_with_h_squared_for_landau():
    dts = []
    for n in (16, 32):
        g = VelocityGrid(3, n, 8.0)
        dts.append(stable_dt(Model("landau").bind(g), quiet_maxwellian(1, 0, 1, g), SchemeConfig()))
    assert dts[0] / dts[1] == pytest.approx(4.0, rel=0.05)


def test_landau_diffusivity_peaks_at_centre():
    g = VelocityGrid(3, 16, 8.0)
    d, where = max_diffusivity(Model("landau").bind(g), quiet_maxwellian(1, 0, 1, g))
    # largest eigenvalue of a * mu at the origin is (2/3) sqrt(2/pi)
    assert d == pytest.approx((2 / 3) * math.sqrt(2 / math.pi), rel=1e-3)
    assert np.allclose(where, 0.0, atol=g.h)


def test_semilinear_reaction_limits_step():
    g = VelocityGrid(1, 16, math.pi)
    f = ScalarField(g, 1e3 * np.ones(16))
    dt = stable_dt(Model("semilinear-heat"), f, SchemeConfig(cfl_safety=0.5))
    assert dt == pytest.approx(0.5 / (16 * math.pi * 1e3))


def _heat_error(dt: float) -> float:
    g = VelocityGrid(1, 16, math.pi)
    f0 = ScalarField(g, np.cos(g.v[0]))
    res = run("pure-heat", f0, SchemeConfig(dt=dt, t_end=1.0, record_every=10**6))
    return float(np.max(np.abs(res.field.values - math.exp(-1.0) * f0.values)))


def test_heat_rk4_accuracy_and_order():
    e1, e2 = _heat_error(0.04), _heat_error(0.02)
    assert _heat_error(0.01) <= 1e-8
    assert math.log2(e1 / e2) >= 3.9


@pytest.mark.parametrize("scheme", ["euler", "imex-frozen"])
def test_first_order_schemes_converge(scheme):
    g = VelocityGrid(1, 16, math.pi)
    f0 = ScalarField(g, np.cos(g.v[0]))
    errs = []
    for dt in (0.02, 0.01):
        res = run("pure-heat", f0, SchemeConfig(scheme=scheme, dt=dt, t_end=0.5, record_every=10**6))
        errs.append(np.max(np.abs(res.field.values - math.exp(-0.5) * f0.values)))
    assert 1.7 < errs[0] / errs[1] < 2.3


def test_toy_rhs_vanishes_on_inverse_weight():
    g = VelocityGrid(1, 32, 4.0)
    f = ScalarField(g, 2.5 / weight_field(g, -3.0).values)
    assert np.max(np.abs(rhs(Model("toy"), f).values)) < 1e-12


def test_landau_rhs_needs_symbols(grid16):
    with pytest.raises(ValueError):
        rhs(Model("landau"), quiet_maxwellian(1, 0, 1, grid16))


def test_landau_rejects_negative_data():
    g = VelocityGrid(3, 8, 4.0)
    f = quiet_maxwellian(1, 0, 1, g) - 0.1
    with pytest.raises(ValueError):
        run("landau", f, SchemeConfig(t_end=1e-3))


def test_blowup_sentinel_stops_run():
    g = VelocityGrid(1, 16, math.pi)
    f0 = ScalarField(g, 5.0 + np.cos(g.v[0]))
    res = run("semilinear-heat", f0, SchemeConfig(t_end=1.0, blowup_factor=10.0))
    assert res.flags["blowup"]
    assert res.t < 1.0
    assert np.max(res.field.values) > 10 * 6.0


def test_abort_writes_checkpoint(tmp_path):
    g = VelocityGrid(1, 16, math.pi)
    f0 = ScalarField(g, np.cos(g.v[0]))
    cfg = SchemeConfig(scheme="euler", dt=1e300, t_end=1e302, blowup_factor=1e308)
    with pytest.raises(AbortedRunError) as info, np.errstate(over="ignore", invalid="ignore"):
        run("pure-heat", f0, cfg, checkpoint_dir=tmp_path)
    path = info.value.checkpoint
    assert path is not None and path.exists()
    assert np.all(np.isfinite(load_field(path).values))
    meta = json.loads((tmp_path / "checkpoint.json").read_text())
    assert set(meta) == {"t", "step", "config_hash"}


def test_positivity_clip_keeps_mass():
    g = VelocityGrid(1, 32, 4.0)
    box = (np.abs(g.v[0]) < 1.0).astype(float)
    f0 = ScalarField(g, box)
    res = run("pure-heat", f0, SchemeConfig(t_end=0.05, positivity_clip=True))
    assert res.flags["clipped_mass"] > 0
    assert np.min(res.field.values) >= 0
    mass = np.sum(res.field.values) * g.cell_volume
    assert mass == pytest.approx(np.sum(box) * g.cell_volume, rel=1e-12)


def test_record_cadence_and_observers():
    g = VelocityGrid(1, 16, math.pi)
    f0 = ScalarField(g, 2.0 + np.cos(g.v[0]))
    res = run("pure-heat", f0, SchemeConfig(dt=0.01, t_end=0.1, record_every=3),
              observers={"peak": lambda f: float(np.max(f.values))})
    assert list(res.record.column("step")) == [0, 3, 6, 9, 10]
    peaks = res.record.column("peak")
    assert np.all(np.diff(peaks) < 0)


def test_runs_are_deterministic():
    g = VelocityGrid(3, 16, 8.0)
    f0 = quiet_maxwellian(0.5, (1, 0, 0), 1, g) + quiet_maxwellian(0.5, (-1, 0, 0), 1, g)
    cfg = SchemeConfig(t_end=0.02)
    a = run("landau", f0, cfg)
    b = run("landau", f0, cfg)
    assert np.array_equal(a.field.values, b.field.values)
    assert a.record.to_csv() == b.record.to_csv()
