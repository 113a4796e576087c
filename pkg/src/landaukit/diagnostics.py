"""Scalar functionals of a velocity distribution and trajectory records."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import special

from .collision import ORACLE_MAX_N, OracleSizeError, _pair_sum
from .grid import ScalarField, VelocityGrid, _rfftn, gradient

__all__ = [
    "FluidMoments",
    "moments",
    "maxwellian",
    "bimodal",
    "maxwellian_tail_mass",
    "TruncationWarning",
    "relative_entropy",
    "entropy_to_equilibrium",
    "record_state",
    "dissipation",
    "fisher",
    "ExpMomentSpec",
    "exp_moment_weight",
    "exp_moment_norm",
    "Sandwich",
    "measure_sandwich",
    "GevreySpec",
    "GevreyResult",
    "gevrey_norm",
    "TrajectoryRecord",
    "BASE_COLUMNS",
]

FLOOR_FACTOR = 1e-30
TAIL_TOLERANCE = 1e-10


class TruncationWarning(UserWarning):
    """A Maxwellian loses non-negligible mass outside the box."""


@dataclass(frozen=True)
class FluidMoments:
    rho: float
    u: tuple[float, ...]
    T: float

    @property
    def energy(self) -> float:
        """Kinetic energy ``int |v|^2/2 f``."""
        d = len(self.u)
        return 0.5 * self.rho * (sum(x * x for x in self.u) + d * self.T)


def _weighted(f: ScalarField, w) -> float:
    return float(np.sum(f.values * w) * f.grid.cell_volume)


def moments(f: ScalarField) -> FluidMoments:
    """Mass, mean velocity and temperature by grid quadrature."""
    g = f.grid
    rho = _weighted(f, 1.0)
    if not rho > 0:
        raise ValueError("moments need positive mass")
    u = tuple(_weighted(f, c) / rho for c in g.v)
    dev = sum((c - ui) ** 2 for c, ui in zip(g.v, u))
    T = _weighted(f, dev) / (g.dim * rho)
    return FluidMoments(rho, u, T)


def maxwellian_tail_mass(grid: VelocityGrid, u=None, T: float = 1.0) -> float:
    """Fraction of a Maxwellian's mass lying outside ``[-L, L)^dim``."""
    u = np.zeros(grid.dim) if u is None else np.broadcast_to(np.asarray(u, float), (grid.dim,))
    s = math.sqrt(2.0 * T)
    inside = 1.0
    for ui in u:
        inside *= 0.5 * (special.erf((grid.L - ui) / s) + special.erf((grid.L + ui) / s))
    return float(1.0 - inside)


def maxwellian(rho: float, u, T: float, grid: VelocityGrid) -> ScalarField:
    """``rho (2 pi T)^{-d/2} exp(-|v - u|^2 / 2T)`` sampled on ``grid``.

    Emits :class:`TruncationWarning` when more than ``1e-10`` of the mass lies
    outside the box.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    if rho < 0:
        raise ValueError("mass must be nonnegative")
    u = np.broadcast_to(np.asarray(u, dtype=float), (grid.dim,))
    r2 = sum((c - ui) ** 2 for c, ui in zip(grid.v, u))
    vals = rho * (2 * math.pi * T) ** (-grid.dim / 2) * np.exp(-r2 / (2 * T))
    tail = maxwellian_tail_mass(grid, u, T)
    if tail > TAIL_TOLERANCE:
        warnings.warn(f"Maxwellian tail mass {tail:.2e} outside the box", TruncationWarning,
                      stacklevel=2)
    return ScalarField(grid, np.broadcast_to(vals, grid.shape), nonnegative=True)


def bimodal(grid: VelocityGrid, shift: float = 1.0, T: float = 1.0, axis: int = 0) -> ScalarField:
    """Equal-mass pair of Maxwellians at ``+-shift`` along ``axis``, total mass 1."""
    u = np.zeros(grid.dim)
    u[axis] = shift
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        a = maxwellian(0.5, u, T, grid).values
        b = maxwellian(0.5, -u, T, grid).values
    return ScalarField(grid, a + b, nonnegative=True)


def _xlogx_rel(f: np.ndarray, mu: np.ndarray) -> np.ndarray:
    fp = np.clip(f, 0.0, None)
    pos = fp > 0
    out = np.array(mu, dtype=float, copy=True)
    ratio = np.where(pos, fp, 1.0) / np.where(pos & (mu > 0), mu, 1.0)
    out[pos] = (fp * np.log(ratio) - fp + mu)[pos]
    return out


def relative_entropy(f: ScalarField, mu: ScalarField) -> float:
    """``int f log(f / mu) - f + mu`` with ``0 log 0 = 0``."""
    if f.grid != mu.grid:
        raise ValueError("grid mismatch")
    if np.any(mu.values < 0):
        raise ValueError("reference density must be nonnegative")
    if np.any((mu.values == 0) & (f.values > 0)):
        return math.inf
    return float(np.sum(_xlogx_rel(f.values, mu.values)) * f.grid.cell_volume)


def _floor(f: np.ndarray) -> float:
    return FLOOR_FACTOR * float(np.max(np.abs(f)))


def dissipation(f: ScalarField) -> float:
    """Entropy dissipation ``D(f)`` as a double sum over grid pairs.

    Uses ``{grad f / f - grad f_* / f_*} sqrt(f f_*) = 2 (Y s_* - Y_* s)`` with
    ``s = sqrt(f)`` (floored) and ``Y = grad s``, so that every pair term
    ``a : U x U`` is nonnegative and no division by ``f`` is needed.
    """
    g = f.grid
    if g.dim != 3:
        raise ValueError("dissipation is defined for dim = 3")
    if g.n > ORACLE_MAX_N:
        raise OracleSizeError(f"dissipation is capped at n={ORACLE_MAX_N}")
    s = np.sqrt(np.maximum(f.values, _floor(f.values)))
    Y = gradient(g, s).reshape(3, -1).T
    s = s.ravel()

    def term(zh, r, rows):
        U = 2.0 * (Y[rows, None, :] * s[None, :, None] - Y[None, :, :] * s[rows, None, None])
        zu = np.einsum("abk,abk->ab", zh, U)
        return (np.einsum("abk,abk->ab", U, U) - zu * zu) / r

    return 0.5 * _pair_sum(g, term) * g.cell_volume**2


def fisher(f: ScalarField, method: str = "sqrt") -> float:
    """Fisher information ``int |grad sqrt f|^2``.

    ``method="sqrt"`` (default) differentiates ``sqrt(max(f, 0))`` spectrally.
    ``method="ratio"`` evaluates ``|grad f|^2 / (4 max(f, floor))`` with
    ``floor = 1e-30 max f``; it is exact for clean Gaussians but explodes on
    the small negative undershoots a spectral solver produces.
    """
    g = f.grid
    fl = _floor(f.values)
    if method == "ratio":
        grad = gradient(g, f.values)
        dens = np.sum(grad**2, axis=0) / (4.0 * np.maximum(f.values, fl))
    elif method == "sqrt":
        grad = gradient(g, np.sqrt(np.maximum(f.values, 0.0)))
        dens = np.sum(grad**2, axis=0)
    else:
        raise ValueError(f"unknown fisher method {method!r}")
    return float(np.sum(dens) * g.cell_volume)


@dataclass(frozen=True)
class ExpMomentSpec:
    """Parameters ``(a, beta, M)`` of the exponential weight ``G^{a,beta}_M``."""

    a: float
    beta: float = 1.0
    M: int = 0
    max_terms: int = 4000

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not 0 < self.beta <= 2:
            raise ValueError("beta must lie in (0, 2]")
        if self.M < 0 or int(self.M) != self.M:
            raise ValueError("M must be a nonnegative integer")


def _log_g2(spec: ExpMomentSpec, log_bracket: np.ndarray) -> np.ndarray:
    """``log sum_{l >= M} a^{2l/beta} <v>^{2l} / (l!)^{2/beta}`` elementwise."""
    flat = np.asarray(log_bracket, dtype=float).ravel()
    peak = max(spec.M, int(np.ceil(spec.a * float(np.max(np.exp(flat))) ** spec.beta)) + 1)
    # terms peak near l ~ a <v>^beta and decay factorially after it
    n_terms = min(spec.max_terms, peak * 4 + 200)
    ell = np.arange(spec.M, spec.M + n_terms, dtype=float)
    coef = (2.0 * ell / spec.beta) * math.log(spec.a) - (2.0 / spec.beta) * special.gammaln(ell + 1)
    out = np.empty_like(flat)
    chunk = max(1, 2_000_000 // ell.size)
    for s in range(0, flat.size, chunk):
        logs = coef[None, :] + 2.0 * ell[None, :] * flat[s:s + chunk, None]
        out[s:s + chunk] = special.logsumexp(logs, axis=1)
    return out.reshape(np.shape(log_bracket))


def exp_moment_weight(spec: ExpMomentSpec, grid: VelocityGrid, log: bool = False) -> np.ndarray:
    """``G^{a,beta}_M(v)`` (or its logarithm) at the grid nodes."""
    lb = 0.5 * np.log1p(np.broadcast_to(grid.speed2, grid.shape))
    lg = 0.5 * _log_g2(spec, lb)
    return lg if log else np.exp(lg)


def exp_moment_norm(spec: ExpMomentSpec, f: ScalarField) -> float:
    """``|| f G^{a,beta}_M ||_{L^2}``, accumulated in log space; ``inf`` past the float range."""
    g = f.grid
    lg = exp_moment_weight(spec, g, log=True)
    av = np.abs(f.values)
    pos = av > 0
    if not np.any(pos):
        return 0.0
    logs = 2.0 * (np.log(av[pos]) + lg[pos])
    log_val = 0.5 * (special.logsumexp(logs) + math.log(g.cell_volume))
    if log_val > math.log(np.finfo(float).max):
        return math.inf
    return float(math.exp(log_val))


@dataclass(frozen=True)
class Sandwich:
    """Measured constants in ``C e^{c a <v>^b / 2} <= G <= C e^{c a <v>^b}``.

    ``lower_min`` is ``min G e^{-c a <v>^b / 2}`` and ``upper_max`` is
    ``max G e^{-c a <v>^b}``; any ``C`` in ``[upper_max, lower_min]`` works.
    """

    c: float
    C: float
    lower_min: float
    upper_max: float

    @property
    def holds(self) -> bool:
        return self.upper_max <= self.lower_min


def measure_sandwich(spec: ExpMomentSpec, grid: VelocityGrid,
                     c_values: Iterable[float] | None = None) -> Sandwich:
    """Search ``c`` for which a single constant ``C`` sandwiches ``G`` on the grid.

    The returned ``c`` maximizes the log gap ``log lower_min - log upper_max``;
    ``C`` is the geometric mean of the two bounds.
    """
    lg = exp_moment_weight(spec, grid, log=True).ravel()
    lb = np.sqrt(1.0 + np.broadcast_to(grid.speed2, grid.shape)).ravel() ** spec.beta
    cs = np.linspace(0.05, 4.0, 80) if c_values is None else np.asarray(list(c_values), float)
    best = None
    for c in cs:
        lo = float(np.min(lg - 0.5 * c * spec.a * lb))
        hi = float(np.max(lg - c * spec.a * lb))
        if best is None or lo - hi > best[1] - best[2]:
            best = (float(c), lo, hi)
    c, lo, hi = best
    return Sandwich(c, math.exp(0.5 * (lo + hi)), math.exp(lo), math.exp(hi))


@dataclass(frozen=True)
class GevreySpec:
    """Multiplier ``exp(c (phi(t) |xi|^2)^{beta/(beta+3)})``, ``phi(t) = min(t/|log t|, 1)``."""

    c: float
    beta: float
    t: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not 0 < self.beta <= 2:
            raise ValueError("beta must lie in (0, 2]")
        if not 0 < self.t < 1:
            raise ValueError("t must lie in (0, 1)")

    @property
    def exponent(self) -> float:
        return self.beta / (self.beta + 3.0)

    @property
    def phi(self) -> float:
        return min(self.t / abs(math.log(self.t)), 1.0)


@dataclass(frozen=True)
class GevreyResult:
    value: float
    log_value: float
    diverged: bool


def gevrey_norm(spec: GevreySpec, f: ScalarField) -> GevreyResult:
    """L^2 norm of the Gevrey multiplier applied to ``f``.

    The sum is accumulated in log space; ``diverged`` is set (and ``value`` is
    ``inf``) when the result exceeds the float range.
    """
    g = f.grid
    coeffs = _rfftn(f.values)
    logm = spec.c * (spec.phi * g.xi2) ** spec.exponent
    mag = np.abs(coeffs)
    w = np.broadcast_to(g.rfft_weights, mag.shape)
    pos = (mag > 0) & (w > 0)
    if not np.any(pos):
        return GevreyResult(0.0, -math.inf, False)
    logs = 2.0 * (np.log(mag[pos]) + logm[pos]) + np.log(w[pos])
    # Parseval: ||f||^2 = h^d / N * sum w |c|^2
    log_sq = special.logsumexp(logs) + math.log(g.cell_volume / g.size)
    log_val = 0.5 * log_sq
    if log_val > math.log(np.finfo(float).max):
        return GevreyResult(math.inf, log_val, True)
    return GevreyResult(math.exp(log_val), log_val, False)


BASE_COLUMNS = ("t", "step", "rho", "momentum_x", "momentum_y", "momentum_z",
                "T", "energy", "H", "D", "fisher")


@dataclass
class TrajectoryRecord:
    """Time series of conserved and monotone functionals.

    Columns start with :data:`BASE_COLUMNS` in that order; further diagnostics
    are appended in order of first appearance.  Missing entries are NaN.
    """

    rows: list[dict] = field(default_factory=list)
    extra_columns: list[str] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def append(self, t: float, step: int, **values) -> None:
        if self.rows and not t > self.rows[-1]["t"]:
            raise ValueError("time stamps must be strictly increasing")
        row = {"t": float(t), "step": int(step)}
        for k, v in values.items():
            if k not in BASE_COLUMNS and k not in self.extra_columns:
                self.extra_columns.append(k)
            row[k] = float(v)
        self.rows.append(row)

    @property
    def columns(self) -> list[str]:
        return list(BASE_COLUMNS) + self.extra_columns

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r.get(c, math.nan)) if c != "step" else r["step"] for c in cols])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "columns": self.columns,
            "rows": [[_json_num(r.get(c, math.nan)) for c in self.columns] for r in self.rows],
            "flags": self.flags,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def _json_num(x: float):
    return None if math.isnan(x) else float(x)


def entropy_to_equilibrium(f: ScalarField, m: FluidMoments | None = None) -> float:
    """``H(f | mu_f)`` against the Maxwellian with the moments of ``f``.

    ``log mu`` is evaluated in closed form, so the result stays finite when
    ``mu`` underflows on part of the grid.
    """
    g = f.grid
    m = moments(f) if m is None else m
    r2 = sum((c - ui) ** 2 for c, ui in zip(g.v, m.u))
    log_mu = math.log(m.rho) - 0.5 * g.dim * math.log(2 * math.pi * m.T) - r2 / (2 * m.T)
    mu = np.exp(log_mu)
    fp = np.clip(f.values, 0.0, None)
    pos = fp > 0
    logf = np.log(np.where(pos, fp, 1.0))
    dens = np.where(pos, fp * (logf - log_mu) - fp + mu, mu)
    return float(np.sum(dens) * g.cell_volume)


def record_state(f: ScalarField) -> dict:
    """Base-column values (moments, energy, H, Fisher) for a field."""
    m = moments(f)
    mom = [m.rho * ui for ui in m.u] + [0.0] * (3 - len(m.u))
    return {
        "rho": m.rho,
        "momentum_x": mom[0],
        "momentum_y": mom[1],
        "momentum_z": mom[2],
        "T": m.T,
        "energy": m.energy,
        "H": entropy_to_equilibrium(f, m),
        "fisher": fisher(f),
    }
