"""Invariant suite shared by ``landaukit selftest`` and the acceptance tests.

Each ``check_*`` function measures one group of properties and returns a
list of :class:`Check` records holding the measured value, the threshold and
the comparison.  ``fast=True`` shrinks the expensive parts (fewer fields,
shorter runs, no n=48 solver fit) so the whole suite fits a CI budget.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .collision import build_symbols, conv_a, direct_conv_a, q_conservative, weak_form_oracle
from .diagnostics import (
    ExpMomentSpec,
    TruncationWarning,
    bimodal,
    dissipation,
    entropy_to_equilibrium,
    fisher,
    maxwellian,
    moments,
)
from .dyadic import NormSpec, ProjectorBank, bernstein_check, project_freq, project_phase
from .experiments import (
    RoughDataSpec,
    equivalence_constant,
    exp_tailed_data,
    moment_propagation,
    norm_corpus,
    rough_data,
    rough_fourier_field,
    smoothing_rate,
    weight_index_scan,
)
from .grid import ScalarField, VelocityGrid, integrate, l2_norm
from .integrator import SchemeConfig, run

__all__ = ["Check", "CHECKS", "run_suite"]

NORM_SPECS = ((0.0, 0.0, 0.0), (-0.5, 0.0, 3.0), (-0.5, 1.0, 5.0), (0.5, 1.0, 3.5), (2.0, 0.0, -3.0))


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    value: float
    threshold: float
    relation: str = "<="
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        if self.relation == "<=":
            return self.value <= self.threshold
        return self.value >= self.threshold

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _quiet_maxwellian(rho, u, T, grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return maxwellian(rho, u, T, grid)


def _monotone_excess(values, scale) -> float:
    """Largest increase between consecutive entries, in units of ``scale``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(max(np.max(np.diff(v)) / scale, 0.0))


# ------------------------------------------------------------------ criteria 1-2


def landau_bimodal_run(n: int = 32, L: float = 8.0, t_end: float = 1.0):
    g = VelocityGrid(3, n, L)
    return run("landau", bimodal(g), SchemeConfig(t_end=t_end, record_every=1))


def check_conservation(fast: bool = False) -> list[Check]:
    res = landau_bimodal_run(t_end=0.5 if fast else 1.0)
    rec = res.record
    rho = rec.column("rho")
    E = rec.column("energy")
    mom = np.stack([rec.column(f"momentum_{a}") for a in "xyz"], axis=1)
    # |momentum| <= sqrt(2 rho E), the natural scale when the mean velocity vanishes
    pscale = math.sqrt(2.0 * rho[0] * E[0])
    H = rec.column("H")
    return [
        Check(1, "mass drift", float(np.max(np.abs(rho - rho[0])) / rho[0]), 1e-9),
        Check(1, "momentum drift", float(np.max(np.abs(mom - mom[0]))) / pscale, 1e-5),
        Check(1, "energy drift", float(np.max(np.abs(E - E[0])) / E[0]), 1e-5),
        Check(2, "entropy increase / |H|", _monotone_excess(H, np.max(np.abs(H))), 1e-8,
              detail={"stamps": len(H)}),
    ]


# -------------------------------------------------------------------- criterion 3


def _random_positive(g: VelocityGrid, seed: int) -> ScalarField:
    X = rough_fourier_field(g, r=2.0, seed=seed).values
    mu = _quiet_maxwellian(1.0, 0.0, 2.0, g).values
    return ScalarField(g, mu * np.exp(0.5 * X / np.max(np.abs(X))))


def dissipation_identity(f: ScalarField, dt: float = 1e-4) -> tuple[float, float]:
    """Return ``D(f)`` and ``-(H(f(dt)) - H(f)) / dt`` after one RK4 step."""
    m = moments(f)
    res = run("landau", f, SchemeConfig(dt=dt, t_end=dt, record_every=10**9))
    H0 = entropy_to_equilibrium(f, m)
    H1 = entropy_to_equilibrium(res.field, m)
    return dissipation(f), -(H1 - H0) / dt


def check_dissipation(fast: bool = False) -> list[Check]:
    g = VelocityGrid(3, 16, 7.0)
    count = 5 if fast else 20
    worst = math.inf
    for seed in range(count):
        f = _random_positive(g, seed)
        scale = integrate(f) * fisher(f)
        worst = min(worst, dissipation(f) / scale)
    D, rate = dissipation_identity(bimodal(g, shift=1.0, T=2.0))
    return [
        Check(3, "min D / scale", worst, -1e-10, ">=", {"fields": count}),
        Check(3, "|D + dH/dt| / D", abs(rate - D) / D, 0.05, detail={"D": D, "rate": rate}),
    ]


# -------------------------------------------------------------------- criterion 4


def q_mu_ratio(L: float = 8.0) -> tuple[float, float]:
    out = []
    for n in (16, 32):
        g = VelocityGrid(3, n, L)
        mu = _quiet_maxwellian(1.0, 0.0, 1.0, g)
        out.append(l2_norm(q_conservative(build_symbols(g), mu)) / l2_norm(mu))
    return out[0], out[1]


def check_equilibrium(fast: bool = False) -> list[Check]:
    r16, r32 = q_mu_ratio()
    return [Check(4, "||Q(mu)|| reduction 16 -> 32", r16 / r32, 4.0, ">=",
                  {"n16": r16, "n32": r32})]


# -------------------------------------------------------------------- criterion 5


def fisher_data(g: VelocityGrid) -> dict[str, ScalarField]:
    v = g.v

    def gauss(c, T):
        r2 = sum((x - ci) ** 2 for x, ci in zip(v, c))
        return (2 * math.pi * T) ** -1.5 * np.exp(-r2 / (2 * T))

    aniso = np.exp(-v[0] ** 2 / 1.0 - v[1] ** 2 / 4.0 - v[2] ** 2 / 2.0)
    aniso = np.broadcast_to(aniso, g.shape) / (np.sum(np.broadcast_to(aniso, g.shape)) * g.cell_volume)
    return {
        "bimodal": bimodal(g),
        "anisotropic": ScalarField(g, aniso),
        "trimodal": ScalarField(g, (gauss((2, 0, 0), 0.6) + gauss((-1, 1.7, 0), 0.6)
                                    + gauss((-1, -1.7, 0.5), 0.6)) / 3),
    }


def check_fisher(fast: bool = False) -> list[Check]:
    g = VelocityGrid(3, 32, 8.0)
    out = []
    for name, f0 in fisher_data(g).items():
        res = run("landau", f0, SchemeConfig(t_end=0.25 if fast else 0.5, record_every=1))
        I = res.record.column("fisher")[2:]
        out.append(Check(5, f"Fisher increase / I ({name})",
                         float(max(np.max(np.diff(I) / I[:-1]), 0.0)), 1e-3,
                         detail={"I0": float(I[0]), "I_end": float(I[-1])}))
    return out


# -------------------------------------------------------------------- criterion 6


def compact_bump(g: VelocityGrid, radius: float) -> ScalarField:
    r = np.sqrt(g.speed2) / radius
    return ScalarField(g, np.where(r < 1, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 4, 0.0))


def check_symbols(fast: bool = False) -> list[Check]:
    g = VelocityGrid(3, 16, 4.0)
    sym = build_symbols(g)
    f = compact_bump(g, 3.0)
    A = conv_a(sym, f).components
    B = direct_conv_a(f).components
    per = build_symbols(g, mode="periodic")
    return [
        Check(6, "a*f vs quadrature (rel L2)", float(np.linalg.norm(A - B) / np.linalg.norm(B)), 2e-2),
        Check(6, "divergence identity", float(per.divergence_residual()), 1e-12),
        Check(6, "trace identity", float(per.trace_residual()), 1e-12),
    ]


# -------------------------------------------------------------------- criterion 7


def weak_form_pairs(g: VelocityGrid, f: ScalarField) -> dict[str, tuple[float, float, float]]:
    """``name -> (grid pairing, oracle, int f |phi|)`` for the three collision
    invariants ``1, |v|^2/2, v_1`` and the non-conserved ``v_1^2``."""
    sym = build_symbols(g)
    Q = q_conservative(sym, f).values
    v = [np.broadcast_to(c, g.shape) for c in g.v]
    z = np.zeros(g.shape)
    tests = {
        "1": (np.ones(g.shape), np.stack([z, z, z])),
        "|v|^2/2": (0.5 * (v[0] ** 2 + v[1] ** 2 + v[2] ** 2), np.stack(v)),
        "v_1": (v[0].copy(), np.stack([z + 1.0, z, z])),
        "v_1^2": (v[0] ** 2, np.stack([2.0 * v[0], z, z])),
    }
    out = {}
    for name, (phi, grad) in tests.items():
        W = weak_form_oracle(f, ScalarField(g, phi), grad_phi=grad)
        P = float(np.sum(Q * phi) * g.cell_volume)
        out[name] = (P, W, float(np.sum(f.values * np.abs(phi)) * g.cell_volume))
    return out


def check_weak_form(fast: bool = False) -> list[Check]:
    g = VelocityGrid(3, 16, 7.0)
    out = []
    for name, (P, W, size) in weak_form_pairs(g, bimodal(g, shift=1.0, T=2.0)).items():
        # conserved pairings vanish, so errors are measured against int f |phi|
        rel = abs(P - W) / max(abs(W), size)
        detail = {"grid": P, "oracle": W}
        if name == "v_1^2":
            # generic test functions are limited by midpoint quadrature of the kink at v = w
            out.append(Check(0, f"weak form <Q, {name}> (info)", rel, 1.0, detail=detail))
        else:
            out.append(Check(7, f"weak form <Q, {name}>", rel, 1e-5, detail=detail))
    return out


# -------------------------------------------------------------------- criterion 8


def check_littlewood_paley(fast: bool = False) -> list[Check]:
    g = VelocityGrid(3, 16 if fast else 32, 8.0)
    bank = ProjectorBank(g)
    corpus = norm_corpus(g)
    f = corpus[-1]
    pou = float(np.max(np.abs(sum(bank.freq_multiplier(j) for j in bank.j_range) - 1.0)))
    rec_f = sum(project_freq(bank, j, f).values for j in bank.j_range)
    rec_p = sum(project_phase(bank, k, f).values for k in bank.k_range)
    scale = float(np.max(np.abs(f.values)))
    out = [
        Check(8, "partition of unity residual", pou, 1e-12),
        Check(8, "frequency reconstruction", float(np.max(np.abs(rec_f - f.values))) / scale, 1e-12),
        Check(8, "phase reconstruction", float(np.max(np.abs(rec_p - f.values))) / scale, 1e-12),
    ]
    for spec in NORM_SPECS:
        C, _ = equivalence_constant(NormSpec(*spec), corpus, bank)
        out.append(Check(8, f"equivalence constant m={spec[0]:g},s={spec[1]:g},l={spec[2]:g}", C, 10.0))
    hi, lo = 0.0, math.inf
    for fld in corpus:
        for j in bank.j_range:
            if j < 0:
                continue
            if l2_norm(project_freq(bank, j, fld)) <= 1e-12 * l2_norm(fld):
                continue
            ratio, _ = bernstein_check(bank, j, fld)
            hi, lo = max(hi, ratio), min(lo, ratio)
    inner, outer = bank.partition.support
    out.append(Check(8, "Bernstein ratio max (<= outer radius)", hi, outer))
    out.append(Check(8, "Bernstein ratio min (>= inner radius)", lo, inner, ">="))
    return out


# -------------------------------------------------------------------- criterion 9

HEAT_CASES = ((1.0, -0.5), (2.0, -0.5), (1.0, 0.0))


def heat_slopes(n: int = 128, L: float = 4.0, window=(2e-3, 2e-2)) -> list:
    g = VelocityGrid(3, n, L)
    fits = []
    for m, r in HEAT_CASES:
        f0 = rough_fourier_field(g, r, seed=0)
        fits.extend(smoothing_rate("pure-heat", f0, [NormSpec(m=m)], window, r))
    return fits


def landau_rate_fit(n: int = 48, L: float = 8.0, seed: int = 0):
    """Solver-path fit of ``||f - mu||_{H^1_{-3/2}}`` on ``t in [0.02, 0.3]``."""
    g = VelocityGrid(3, n, L)
    X = rough_fourier_field(g, 0.0, seed=seed).values
    mu = _quiet_maxwellian(1.0, 0.0, 3.0, g)
    f0 = ScalarField(g, mu.values * (1.0 + 0.9 * np.tanh(X / np.std(X))))
    return smoothing_rate("landau", f0, [NormSpec(m=1, l=-1.5)], (0.02, 0.3), 0.0,
                          cfg=SchemeConfig(t_end=0.3, dt_max=0.02), reference=mu)[0]


def check_rates(fast: bool = False) -> list[Check]:
    out = []
    fits = heat_slopes(n=64 if fast else 128)
    for (m, r), fit in zip(HEAT_CASES, fits):
        out.append(Check(9, f"pure-heat slope error (n={m:g}, r={r:g})", abs(fit.slope - fit.theory), 0.05,
                         detail={"slope": fit.slope, "theory": fit.theory}))
    if not fast:
        fit = landau_rate_fit()
        out.append(Check(9, "landau slope error (n=1, r=0, n_grid=48)", abs(fit.slope - fit.theory), 0.3,
                         detail={"slope": fit.slope, "theory": fit.theory, "se": fit.slope_se}))
    return out


# ------------------------------------------------------------------- criterion 10

TOY_CENTERS = (2.0, 3.0, 4.0, 5.0, 6.0, 7.0)


def toy_scan(n: int = 4096, L: float = 8.0):
    g = VelocityGrid(1, n, L)
    rd = rough_data(RoughDataSpec(l=0.0, alpha=0.45, radius=0.4, centers=TOY_CENTERS), g)
    f, t_prev, traj = rd.field, 0.0, []
    for t in np.linspace(0.025, 0.1, 5):
        f = run("toy", f, SchemeConfig(t_end=float(t), record_every=10**9), t0=t_prev).field
        t_prev = float(t)
        traj.append((t_prev, f))
    return weight_index_scan(traj, n=1, l=0.0, r=0.0, centers=TOY_CENTERS)


def check_toy(fast: bool = False) -> list[Check]:
    scan = toy_scan(n=2048 if fast else 4096)
    return [
        Check(10, "bounded column spread", scan.spread("bounded"), 2.0),
        Check(10, "growing column strictly increasing", float(scan.growth_flag("growing")), 1.0, ">=",
              {"growing": scan.table["growing"]}),
    ]


# ------------------------------------------------------------------- criterion 11


def besov_sums(J: int = 5):
    g = VelocityGrid(1, 2**22, 65536.0)
    return rough_data(RoughDataSpec(J=J, l=0.0, eps=0.5, alpha=0.45, radius=1.0), g)


def check_besov(fast: bool = False) -> list[Check]:
    rd = besov_sums()
    ratios = rd.ratios
    return [Check(11, "min S_J / S_{J-1}", float(min(ratios)), 1.5, ">=", {"ratios": ratios})]


# ------------------------------------------------------------------- criterion 12


def check_moments(fast: bool = False) -> list[Check]:
    g = VelocityGrid(3, 32, 8.0)
    rep = moment_propagation(exp_tailed_data(g, b=2.0, beta=1.0), ExpMomentSpec(a=0.2, beta=1.0),
                             tail_rate=2.0, t_end=1.0 if fast else 2.0)
    return [Check(12, "envelope C / initial", rep.envelope_C / rep.initial, 3.0,
                  detail={"max": max(rep.values), "initial": rep.initial})]


CHECKS: dict[str, Callable[[bool], list[Check]]] = {
    "conservation": check_conservation,
    "dissipation": check_dissipation,
    "equilibrium": check_equilibrium,
    "fisher": check_fisher,
    "symbols": check_symbols,
    "weak-form": check_weak_form,
    "littlewood-paley": check_littlewood_paley,
    "rates": check_rates,
    "toy": check_toy,
    "besov": check_besov,
    "moments": check_moments,
}


def run_suite(fast: bool = False, only=None) -> list[Check]:
    """Run every group in :data:`CHECKS` (or those named in ``only``)."""
    out = []
    for name, fn in CHECKS.items():
        if only is None or name in only:
            out.extend(fn(fast))
    return out
