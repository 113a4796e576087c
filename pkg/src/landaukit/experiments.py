"""Scripted numerical experiments: smoothing rates, weight-index scans, rough
data with diverging Besov sums, exponential-moment propagation and relaxation.

Each experiment returns a report object with ``to_dict``; passing ``out_dir``
writes ``report.json`` and ``series.csv`` there.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .diagnostics import (
    ExpMomentSpec,
    TruncationWarning,
    entropy_to_equilibrium,
    exp_moment_norm,
    maxwellian,
    moments,
)
from .dyadic import (
    NormSpec,
    ProjectorBank,
    _sobolev_symbol,
    _spectral_energy,
    norm_hmsl_direct,
    norm_hmsl_dyadic,
)
from .grid import ScalarField, VelocityGrid, _irfftn, _rfftn, l2_norm
from .integrator import Model, RunResult, SchemeConfig, run

__all__ = [
    "RateFit",
    "fit_power_law",
    "rough_fourier_field",
    "heat_closed_form_norm",
    "smoothing_rate",
    "norm_corpus",
    "equivalence_constant",
    "RoughDataSpec",
    "RoughData",
    "rough_data",
    "WeightScan",
    "localized_norm",
    "weight_index_scan",
    "exp_tailed_data",
    "MomentReport",
    "moment_propagation",
    "RelaxationReport",
    "relaxation",
    "PreconditionError",
    "DOMAIN_NOTE",
    "write_outputs",
]


DOMAIN_NOTE = ("measured on the truncated box [-L, L)^d; quantitative constants and norms "
               "are grid values, not whole-space values")


class PreconditionError(ValueError):
    """Experiment inputs violate the stated preconditions."""


def write_outputs(out_dir, report: dict, columns: Sequence[str], rows: Sequence[Sequence]) -> Path:
    """Write ``report.json`` (with a ``domain_note``) and ``series.csv`` into ``out_dir``."""
    report = {"domain_note": DOMAIN_NOTE, **report}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    (out / "series.csv").write_text(buf.getvalue())
    return out


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    return str(x)


# --------------------------------------------------------------------------- rates


@dataclass(frozen=True)
class RateFit:
    """Log-log least-squares fit ``norm ~ t^slope`` over a time window."""

    spec: NormSpec
    window: tuple[float, float]
    slope: float
    slope_se: float
    intercept: float
    theory: float
    tolerance: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.theory) <= self.tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spec"] = asdict(self.spec)
        d["passed"] = self.passed
        return d


def fit_power_law(t, y) -> tuple[float, float, float]:
    """OLS of ``log y`` on ``log t``; returns ``(slope, intercept, slope_se)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three samples")
    res = stats.linregress(np.log(t), np.log(y))
    return float(res.slope), float(res.intercept), float(res.stderr)


def rough_fourier_field(grid: VelocityGrid, r: float, delta: float = 0.02, seed: int = 0,
                        amplitude: float = 1.0) -> ScalarField:
    """Random-phase field with ``|f_hat(xi)| = <xi>^{-dim/2 - r - delta}``.

    The result lies in ``H^{r + delta'}`` for ``delta' < delta`` but has large
    ``H^{r + delta}`` norm on fine grids.  Normalized to unit ``L^2`` norm
    times ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    mag = (1.0 + grid.xi2) ** (-0.5 * (grid.dim / 2 + r + delta))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=grid.spectral_shape)
    coeffs = mag * np.exp(1j * phase)
    coeffs.flat[0] = 0.0
    vals = _irfftn(coeffs, grid.shape)
    fld = ScalarField(grid, vals)
    return ScalarField(grid, vals * (amplitude / l2_norm(fld)))


def _cos4_bump(grid: VelocityGrid, center, radius: float) -> np.ndarray:
    r = np.sqrt(sum((x - c) ** 2 for x, c in zip(grid.v, center))) / radius
    return np.where(r < 1, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 4, 0.0)


def norm_corpus(grid: VelocityGrid, seed: int = 0) -> list[ScalarField]:
    """Fifty test fields: 15 Gaussians, 15 compact bumps, 10 sums of unit bumps
    at random translates, and 10 rough Fourier-tail fields with ``r`` from -1/2 to 3/2.
    """
    rng = np.random.default_rng(seed)
    d, L = grid.dim, grid.L
    out = []
    for i in range(15):
        c = rng.uniform(-0.5 * L, 0.5 * L, d) * (i > 4)
        T = rng.uniform(0.3, 2.5)
        out.append(np.exp(-sum((x - ci) ** 2 for x, ci in zip(grid.v, c)) / (2 * T)))
    for i in range(15):
        c = rng.uniform(-0.5 * L, 0.5 * L, d) * (i > 4)
        out.append(_cos4_bump(grid, c, rng.uniform(1.0, 0.4 * L)))
    for _ in range(10):
        count = int(rng.integers(2, 5))
        out.append(sum(_cos4_bump(grid, rng.uniform(-0.7 * L, 0.7 * L, d), 1.0)
                       for _ in range(count)))
    for i in range(10):
        r = (-0.5, 0.0, 0.5, 1.0, 1.5)[i % 5]
        out.append(rough_fourier_field(grid, r=r, seed=seed + i).values)
    return [ScalarField(grid, np.broadcast_to(a, grid.shape).copy()) for a in out]


def equivalence_constant(spec: NormSpec, fields: Sequence[ScalarField],
                         bank: ProjectorBank | None = None) -> tuple[float, np.ndarray]:
    """Smallest ``C`` with ``dyadic / direct`` in ``[1/C, C]`` over ``fields``, and the ratios."""
    bank = bank or ProjectorBank(fields[0].grid)
    ratios = np.array([norm_hmsl_dyadic(spec, f, bank) / norm_hmsl_direct(spec, f)
                       for f in fields])
    return float(max(ratios.max(), 1.0 / ratios.min())), ratios


def heat_closed_form_norm(f0: ScalarField, m: float, t: float, s: float = 0.0) -> float:
    """``||e^{t Delta} f0||_{H^{m,s}}`` evaluated exactly in Fourier space."""
    g = f0.grid
    coeffs = _rfftn(f0.values) * np.exp(-t * g.xi2) * _sobolev_symbol(g, m, s)
    return math.sqrt(_spectral_energy(g, coeffs))


def _log_times(window: tuple[float, float], count: int) -> np.ndarray:
    t0, t1 = window
    if not 0 < t0 < t1:
        raise ValueError("window must satisfy 0 < t0 < t1")
    if count < 8:
        raise ValueError("fits use at least 8 samples")
    return np.geomspace(t0, t1, count)


def smoothing_rate(
    model: str,
    f0: ScalarField,
    specs: Sequence[NormSpec],
    window: tuple[float, float],
    r: float,
    *,
    samples: int = 12,
    tolerance: float | None = None,
    cfg: SchemeConfig | None = None,
    reference: ScalarField | None = None,
    out_dir=None,
) -> list[RateFit]:
    """Fit ``||f(t)||_spec ~ t^slope`` and compare with ``-m/2 + r/2``.

    ``model="pure-heat"`` uses the exact Fourier multiplier (no time stepping,
    default tolerance 0.05).  Any other model is integrated with ``cfg``; the
    recorded norms inside ``window`` are fitted after dropping the first two
    stamps (default tolerance 0.3).

    With ``reference`` (a time-independent field such as the equilibrium
    fixed by the conserved moments) the fitted quantity is
    ``||f(t) - reference||``; the plain norms are still recorded in the
    series under ``"total:<label>"``.
    """
    specs = list(specs)
    closed = model == "pure-heat"
    tol = tolerance if tolerance is not None else (0.05 if closed else 0.3)
    if closed:
        times = _log_times(window, samples)
        if reference is not None:
            f0 = f0 - reference
        table = {sp: [] for sp in specs}
        for t in times:
            for sp in specs:
                if sp.l:
                    evolved = ScalarField(f0.grid, _irfftn(_rfftn(f0.values) * np.exp(-t * f0.grid.xi2),
                                                           f0.grid.shape))
                    table[sp].append(norm_hmsl_direct(sp, evolved))
                else:
                    table[sp].append(heat_closed_form_norm(f0, sp.m, t, sp.s))
    else:
        cfg = cfg or SchemeConfig(t_end=window[1])
        if cfg.t_end < window[1]:
            cfg = SchemeConfig(**{**asdict(cfg), "t_end": window[1]})
        observers = {}
        for sp in specs:
            if reference is None:
                observers[sp.label()] = lambda f, sp=sp: norm_hmsl_direct(sp, f)
            else:
                observers[sp.label()] = lambda f, sp=sp: norm_hmsl_direct(sp, f - reference)
                observers["total:" + sp.label()] = lambda f, sp=sp: norm_hmsl_direct(sp, f)
        res = run(Model(model), f0, cfg, observers=observers)
        all_t = res.record.times
        keep = np.arange(all_t.size) >= 2
        keep &= (all_t >= window[0] * (1 - 1e-9)) & (all_t <= window[1] * (1 + 1e-9))
        times = all_t[keep]
        table = {sp: list(res.record.column(sp.label())[keep]) for sp in specs}
        totals = {sp: list(res.record.column("total:" + sp.label())[keep])
                  for sp in specs if reference is not None}
        if times.size < 8:
            raise ValueError(f"only {times.size} recorded stamps inside the window; lower record_every")
    fits = []
    for sp in specs:
        slope, icpt, se = fit_power_law(times, table[sp])
        fits.append(RateFit(sp, (float(window[0]), float(window[1])), slope, se, icpt,
                            -sp.m / 2 + r / 2, tol, int(len(times))))
    if out_dir is not None:
        report = {"experiment": "rates", "model": model, "r": r,
                  "fits": [f.to_dict() for f in fits]}
        cols = ["t"] + [sp.label() for sp in specs]
        rows = [[t] + [table[sp][i] for sp in specs] for i, t in enumerate(times)]
        if not closed and reference is not None:
            report["total_norm_slopes"] = {sp.label(): fit_power_law(times, totals[sp])[0] for sp in specs}
            cols += ["total:" + sp.label() for sp in specs]
            rows = [row + [totals[sp][i] for sp in specs] for i, row in enumerate(rows)]
        write_outputs(out_dir, report, cols, rows)
    return fits


# --------------------------------------------------------------------- rough data


@dataclass(frozen=True)
class RoughDataSpec:
    """Translates of a rough bump under the weight ``<v>^-l``.

    The bump is ``|x|^-alpha`` times a ``cos^2`` cut-off supported in the ball of
    radius ``radius`` (singular at its centre; the node there holds the local
    average).  Centres default to ``|x_j| = 1.5 * 8^j``
    along the first axis for ``j = 0..J``; ``centers`` overrides them.
    """

    J: int = 2
    l: float = 0.0
    eps: float = 0.5
    alpha: float = 0.45
    radius: float = 1.0
    centers: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.J < 0:
            raise ValueError("J must be nonnegative")
        if not 0 <= self.alpha < 0.5:
            raise ValueError("alpha must lie in [0, 1/2) so the bump is square integrable")
        if not 0 < self.radius <= 1:
            raise ValueError("bump support must lie in the unit ball")

    def center_list(self) -> list[float]:
        if self.centers is not None:
            return [float(c) for c in self.centers]
        return [1.5 * 8.0**j for j in range(self.J + 1)]


@dataclass
class RoughData:
    field: ScalarField
    spec: RoughDataSpec
    partial_sums: list[float]
    terms: list[float]

    @property
    def ratios(self) -> list[float]:
        s = self.partial_sums
        return [s[i] / s[i - 1] for i in range(1, len(s))]

    def to_dict(self) -> dict:
        return {"spec": asdict(self.spec), "partial_sums": self.partial_sums,
                "terms": self.terms, "ratios": self.ratios}


def _bump(spec: RoughDataSpec, dist: np.ndarray, h: float, dim: int) -> np.ndarray:
    # broad C^1 taper: a steep cut-off puts spurious structure into the low shells
    taper = np.where(dist < spec.radius, np.cos(0.5 * np.pi * dist / spec.radius) ** 2, 0.0)
    # the node at the singularity takes the ball average of |x|^-alpha over radius h/2;
    # plain capping at h/2 depletes the top frequency shells
    core = dim / (dim - spec.alpha) * (0.5 * h) ** (-spec.alpha)
    power = np.maximum(dist, 0.5 * h) ** (-spec.alpha)
    return taper * np.where(dist < 0.5 * h, core, power)


def rough_data(spec: RoughDataSpec, grid: VelocityGrid, besov: bool = True) -> RoughData:
    """``f = [sum_j g(. - x_j)] <v>^-l`` plus Besov partial sums.

    ``S_J = sum_{j <= J} 2^{2 (eps + 3 l) j} ||F_j P_{3j} f||^2`` for the default
    geometric centres; skipped when ``besov`` is false or centres are explicit.
    """
    centers = spec.center_list()
    if max(centers) + spec.radius >= grid.L - grid.h:
        raise PreconditionError(
            f"grid half-width {grid.L} does not resolve the last translate at {max(centers)}")
    v = grid.v
    total = np.zeros(grid.shape)
    for c in centers:
        dist2 = (v[0] - c) ** 2
        for extra in v[1:]:
            dist2 = dist2 + extra**2
        total += _bump(spec, np.sqrt(dist2), grid.h, grid.dim)
    vals = total * (1.0 + np.broadcast_to(grid.speed2, grid.shape)) ** (-0.5 * spec.l)
    f = ScalarField(grid, vals, nonnegative=True)
    sums, terms = [], []
    if besov and spec.centers is None:
        bank = ProjectorBank(grid)
        acc = 0.0
        for j in range(spec.J + 1):
            k = 3 * j
            if j > bank.j_max or k > bank.k_max:
                raise PreconditionError(f"shell j={j} (phase shell {k}) is not resolvable on this grid")
            masked = bank.phase_mask(k) * f.values
            power = _rfftn(masked)
            term = 2.0 ** (2 * (spec.eps + 3 * spec.l) * j) * _spectral_energy(
                grid, bank.freq_multiplier(j) * power)
            acc += term
            terms.append(float(term))
            sums.append(float(acc))
    return RoughData(f, spec, sums, terms)


# ------------------------------------------------------------------ weight scan


@dataclass
class WeightScan:
    """Per-translate localized norms for the two competing weight indices.

    Rows are translates ordered by distance; each entry is the sup over the
    recorded times of the localized ``H^n_w`` norm.
    """

    centers: list[float]
    weights: dict[str, float]
    table: dict[str, list[float]]
    n: float

    def growth_flag(self, column: str, last: int = 5) -> bool:
        col = self.table[column][-last:]
        return all(b > a for a, b in zip(col, col[1:]))

    def spread(self, column: str) -> float:
        """``max / first`` and ``first / min``, whichever is larger."""
        col = np.asarray(self.table[column])
        return float(max(col.max() / col[0], col[0] / col.min()))

    def to_dict(self) -> dict:
        return {
            "centers": self.centers,
            "weights": self.weights,
            "table": self.table,
            "n": self.n,
            "growth": {k: self.growth_flag(k) for k in self.table},
            "spread": {k: self.spread(k) for k in self.table},
        }


def _window(grid: VelocityGrid, center: float, half: float) -> np.ndarray:
    """Cut-off equal to one within ``0.7 half`` of ``center``, zero past ``half``."""
    v = grid.v
    d2 = (v[0] - center) ** 2
    for extra in v[1:]:
        d2 = d2 + extra**2
    d = np.sqrt(d2) / half
    x = np.clip((d - 0.7) / 0.3, 0.0, 1.0)
    # C^1 cosine taper is enough here: localized norms use at most two derivatives
    return np.broadcast_to(0.5 * (1.0 + np.cos(np.pi * x)), grid.shape)


def localized_norm(f: ScalarField, center: float, half: float, n: float, w: float) -> float:
    """``||chi f||_{H^n_w}`` with ``chi`` a cut-off around ``center``."""
    chi = _window(f.grid, center, half)
    return norm_hmsl_direct(NormSpec(m=n, s=0.0, l=w), ScalarField(f.grid, chi * f.values))


def weight_index_scan(
    trajectory: Sequence[tuple[float, ScalarField]],
    n: float,
    l: float,
    r: float,
    centers: Sequence[float],
    eps: float = 0.5,
    half: float | None = None,
    out_dir=None,
) -> WeightScan:
    """Compare ``w_b = l - 3n/2 + 3r/2`` (bounded) with ``w_g = l - (n - eps)/3``.

    ``trajectory`` is a list of ``(t, f(t))`` pairs inside the window.  For each
    translate centre the localized norm is maximised over the window.
    """
    centers = [float(c) for c in centers]
    if half is None:
        gaps = np.diff(sorted(centers))
        half = 0.5 * float(gaps.min()) if gaps.size else 1.0
    weights = {"bounded": l - 1.5 * n + 1.5 * r, "growing": l - (n - eps) / 3.0}
    table = {}
    for name, w in weights.items():
        table[name] = [max(localized_norm(f, c, half, n, w) for _, f in trajectory) for c in centers]
    scan = WeightScan(centers, weights, table, n)
    if out_dir is not None:
        rows = [[c, table["bounded"][i], table["growing"][i]] for i, c in enumerate(centers)]
        write_outputs(out_dir, {"experiment": "weight-scan", **scan.to_dict()},
                      ["center", "bounded", "growing"], rows)
    return scan


# ------------------------------------------------------------ moment propagation


@dataclass
class MomentReport:
    times: list[float]
    values: list[float]
    envelope_C: float
    initial: float
    spec: ExpMomentSpec

    @property
    def passed(self) -> bool:
        return self.envelope_C <= 3.0 * self.initial

    def to_dict(self) -> dict:
        return {"times": self.times, "values": self.values, "envelope_C": self.envelope_C,
                "initial": self.initial, "spec": asdict(self.spec), "passed": self.passed}


def exp_tailed_data(grid: VelocityGrid, b: float = 2.0, beta: float = 1.0,
                    weight: float = 0.3) -> ScalarField:
    """Unit-mass ``(1 - weight) mu + weight C e^{-b <v>^beta}`` with ``mu`` the standard Maxwellian."""
    if not 0 <= weight <= 1:
        raise ValueError("weight must lie in [0, 1]")
    bracket = np.sqrt(1.0 + grid.speed2)
    tail = np.exp(-b * bracket**beta)
    tail /= np.sum(tail) * grid.cell_volume
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        mu = maxwellian(1.0, 0.0, 1.0, grid).values
    return ScalarField(grid, (1 - weight) * mu + weight * tail, nonnegative=True)


def moment_propagation(
    f0: ScalarField,
    spec: ExpMomentSpec,
    tail_rate: float,
    t_end: float = 2.0,
    cfg: SchemeConfig | None = None,
    model: str | Model = "landau",
    out_dir=None,
) -> MomentReport:
    """Track ``||f(t) G^{a,beta}||`` along a run from data with tail ``e^{-b <v>^beta}``.

    Requires ``a < b/2``.  The envelope constant is the smallest ``C`` with
    ``value(t) <= C (1 + t)``; the check passes when ``C <= 3 value(0)``.
    """
    if not spec.a < tail_rate / 2:
        raise PreconditionError(f"need a < b/2, got a={spec.a}, b={tail_rate}")
    cfg = cfg or SchemeConfig(t_end=t_end, record_every=4)
    if cfg.t_end != t_end:
        cfg = SchemeConfig(**{**asdict(cfg), "t_end": t_end})
    res = run(model if isinstance(model, Model) else Model(model), f0, cfg,
              observers={"exp_moment": lambda f: exp_moment_norm(spec, f)})
    t = res.record.times
    vals = res.record.column("exp_moment")
    C = float(np.max(vals / (1.0 + t)))
    rep = MomentReport(list(map(float, t)), list(map(float, vals)), C, float(vals[0]), spec)
    if out_dir is not None:
        write_outputs(out_dir, {"experiment": "moments", **rep.to_dict()},
                      ["t", "exp_moment"], list(zip(t, vals)))
    return rep


# -------------------------------------------------------------------- relaxation


@dataclass
class RelaxationReport:
    times: list[float]
    entropy: list[float]
    distance: list[float]
    final_relative_distance: float
    burn_in: int = 2
    run: RunResult | None = field(default=None, repr=False)

    @property
    def entropy_decreasing(self) -> bool:
        H = self.entropy
        return all(b <= a + 1e-8 * abs(a) for a, b in zip(H, H[1:]))

    @property
    def distance_decreasing(self) -> bool:
        d = self.distance[self.burn_in:]
        return all(b <= a * (1 + 1e-9) for a, b in zip(d, d[1:]))

    def to_dict(self) -> dict:
        return {"times": self.times, "entropy": self.entropy, "distance": self.distance,
                "final_relative_distance": self.final_relative_distance,
                "entropy_decreasing": self.entropy_decreasing,
                "distance_decreasing": self.distance_decreasing}


def relaxation(f0: ScalarField, t_end: float = 5.0, cfg: SchemeConfig | None = None,
               out_dir=None) -> RelaxationReport:
    """Run the Landau flow towards the Maxwellian fixed by the moments of ``f0``."""
    if np.min(f0.values) < 0:
        raise PreconditionError("relaxation needs nonnegative data")
    m = moments(f0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        mu = maxwellian(m.rho, m.u, m.T, f0.grid)
    mu_norm = l2_norm(mu)
    cfg = cfg or SchemeConfig(t_end=t_end, record_every=8)
    if cfg.t_end != t_end:
        cfg = SchemeConfig(**{**asdict(cfg), "t_end": t_end})
    res = run(Model("landau"), f0, cfg, observers={
        "H_mu0": lambda f: entropy_to_equilibrium(f, m),
        "dist_mu0": lambda f: l2_norm(f - mu),
    })
    rec = res.record
    dist = rec.column("dist_mu0")
    rep = RelaxationReport(list(map(float, rec.times)), list(map(float, rec.column("H_mu0"))),
                           list(map(float, dist)), float(dist[-1] / mu_norm), run=res)
    if out_dir is not None:
        write_outputs(out_dir, {"experiment": "relax", **rep.to_dict()},
                      ["t", "H", "distance"], list(zip(rep.times, rep.entropy, rep.distance)))
    return rep
