"""Radial dyadic partition of unity, phase/frequency projectors and weighted norms.

The partition is built from a C^inf cut-off ``psi`` equal to one on
``|x| <= inner_radius`` and vanishing for ``|x| >= 4/3``, glued with the
``exp(-1/x)`` smooth step.  The annular profile is ``phi(x) = psi(x/2) - psi(x)``,
so ``psi + sum_j phi(2^-j .)`` telescopes to one exactly.

Frequency shells use angular wavenumbers (the same ``xi`` as the grid); phase
shells use velocities.  ``F_j`` is the multiplier ``phi(2^-j D)`` (``psi(D)`` for
``j = -1``) and ``P_k`` the pointwise mask ``phi(2^-k v)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .grid import ScalarField, VelocityGrid, _irfftn, _rfftn, apply_multiplier, gradient, l2_norm

__all__ = [
    "DyadicPartition",
    "build_partition",
    "ProjectorBank",
    "NormSpec",
    "NormRecord",
    "project_freq",
    "project_phase",
    "norm_hmsl_direct",
    "norm_hmsl_dyadic",
    "dyadic_table",
    "evaluate_norm",
    "bernstein_check",
    "OUTER_RADIUS",
]

OUTER_RADIUS = 4.0 / 3.0


def _smooth_step(x: np.ndarray, sharpness: float) -> np.ndarray:
    """C^inf step: 0 for x <= 0, 1 for x >= 1, ``exp(-s/x)`` glue in between."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    with np.errstate(over="ignore"):
        out[inside] = 1.0 / (1.0 + np.exp(sharpness * (1.0 / xi - 1.0 / (1.0 - xi))))
    return out


@dataclass(frozen=True)
class DyadicPartition:
    """Radial profiles ``psi`` and ``phi`` with ``psi + sum_j phi(2^-j .) = 1``."""

    sharpness: float = 1.0
    inner_radius: float = 0.8

    def __post_init__(self):
        if not 0.75 < self.inner_radius < OUTER_RADIUS:
            raise ValueError("inner_radius must lie in (3/4, 4/3)")
        if self.sharpness <= 0:
            raise ValueError("sharpness must be positive")

    def psi(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        x = (r - self.inner_radius) / (OUTER_RADIUS - self.inner_radius)
        return 1.0 - _smooth_step(x, self.sharpness)

    def phi(self, r) -> np.ndarray:
        return self.psi(np.asarray(r, dtype=float) / 2.0) - self.psi(r)

    def shell(self, j: int, r) -> np.ndarray:
        """``psi(r)`` for ``j = -1``, ``phi(2^-j r)`` otherwise."""
        if j < -1:
            raise IndexError(f"shell index {j} < -1")
        if j == -1:
            return self.psi(r)
        return self.phi(np.asarray(r, dtype=float) / 2.0**j)

    @property
    def support(self) -> tuple[float, float]:
        """Closed support ``[r_lo, r_hi]`` of ``phi``."""
        return self.inner_radius, 2.0 * OUTER_RADIUS

    @property
    def plateau(self) -> tuple[float, float]:
        """Interval on which ``phi == 1``: ``[4/3, 2 * inner_radius]``."""
        return OUTER_RADIUS, 2.0 * self.inner_radius

    @property
    def plateau_halfwidth(self) -> float:
        """Largest ``c`` with ``phi == 1`` on ``[3/2 - c, 3/2 + c]``."""
        lo, hi = self.plateau
        return min(1.5 - lo, hi - 1.5)

    @cached_property
    def overlap_index(self) -> int:
        """Smallest ``N0`` with disjoint supports for ``|j - k| >= N0``."""
        lo, hi = self.support
        return max(1, math.ceil(math.log2(hi / lo)))

    def max_slope(self, samples: int = 20001) -> float:
        r = np.linspace(0.0, 3.0, samples)
        return float(np.max(np.abs(np.gradient(self.phi(r), r))))


def build_partition(sharpness: float = 1.0, inner_radius: float = 0.8) -> DyadicPartition:
    """Construct the default partition; ``max |phi'|`` stays below 4."""
    return DyadicPartition(sharpness=sharpness, inner_radius=inner_radius)


def _max_shell(radius: float, partition: DyadicPartition) -> int:
    # last shell whose support starts strictly inside the given radius
    lo, _ = partition.support
    if radius <= lo:
        return -1
    return int(math.floor(math.log2(radius / lo) - 1e-12))


class ProjectorBank:
    """Cached multipliers ``phi(2^-j xi)`` and masks ``phi(2^-k v)`` for a grid.

    Only shells whose support meets the grid's frequency (resp. velocity) box are
    resolvable; on that range the projectors reconstruct the identity exactly.
    """

    def __init__(self, grid: VelocityGrid, partition: DyadicPartition | None = None):
        self.grid = grid
        self.partition = partition or build_partition()
        self.j_max = _max_shell(grid.xi_max, self.partition)
        self.k_max = _max_shell(grid.v_max, self.partition)
        self._xi_abs = np.sqrt(grid.xi2)
        self._v_abs = np.sqrt(grid.speed2)
        self._freq: dict[int, np.ndarray] = {}
        self._phase: dict[int, np.ndarray] = {}

    @property
    def j_range(self) -> range:
        return range(-1, self.j_max + 1)

    @property
    def k_range(self) -> range:
        return range(-1, self.k_max + 1)

    def _check(self, idx: int, top: int, kind: str):
        if not isinstance(idx, (int, np.integer)) or idx < -1 or idx > top:
            raise IndexError(f"{kind} shell {idx} outside resolvable range [-1, {top}]")

    def freq_multiplier(self, j: int) -> np.ndarray:
        self._check(j, self.j_max, "frequency")
        if j not in self._freq:
            self._freq[j] = self.partition.shell(j, self._xi_abs)
        return self._freq[j]

    def phase_mask(self, k: int) -> np.ndarray:
        self._check(k, self.k_max, "phase")
        if k not in self._phase:
            self._phase[k] = self.partition.shell(k, self._v_abs)
        return self._phase[k]


def project_freq(bank: ProjectorBank, j: int, f: ScalarField) -> ScalarField:
    """``F_j f``."""
    return ScalarField(f.grid, apply_multiplier(f.grid, f.values, bank.freq_multiplier(j)))


def project_phase(bank: ProjectorBank, k: int, f: ScalarField) -> ScalarField:
    """``P_k f``."""
    return ScalarField(f.grid, bank.phase_mask(k) * f.values)


@dataclass(frozen=True)
class NormSpec:
    """Selects ``||<D>^m log^s(2 + <D>) <v>^l f||_2``."""

    m: float = 0.0
    s: float = 0.0
    l: float = 0.0

    def __post_init__(self):
        for name in ("m", "s", "l"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"NormSpec.{name} must be finite")

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        """Parse ``"m=-0.5,s=1,l=5"`` (missing keys default to 0)."""
        vals = {}
        for part in text.replace(" ", "").split(","):
            if not part:
                continue
            key, _, val = part.partition("=")
            if key not in ("m", "s", "l") or not val:
                raise ValueError(f"bad norm spec component {part!r}")
            vals[key] = float(val)
        return cls(**vals)

    def label(self) -> str:
        return f"H(m={self.m:g},s={self.s:g},l={self.l:g})"


def _spectral_energy(grid: VelocityGrid, coeffs: np.ndarray) -> float:
    return float(np.sum(grid.rfft_weights * np.abs(coeffs) ** 2) * grid.cell_volume / grid.size)


def _sobolev_symbol(grid: VelocityGrid, m: float, s: float) -> np.ndarray:
    bracket = np.sqrt(1.0 + grid.xi2)
    sym = bracket**m
    if s:
        sym = sym * np.log(2.0 + bracket) ** s
    return sym


def norm_hmsl_direct(spec: NormSpec, f: ScalarField) -> float:
    """Weighted log-Sobolev norm via the direct Fourier multiplier."""
    g = f.grid
    weighted = (1.0 + g.speed2) ** (0.5 * spec.l) * f.values
    coeffs = _rfftn(weighted) * _sobolev_symbol(g, spec.m, spec.s)
    return math.sqrt(_spectral_energy(g, coeffs))


def dyadic_table(bank: ProjectorBank, f: ScalarField) -> np.ndarray:
    """``T[j+1, k+1] = ||F_j P_k f||_2^2`` over the resolvable shells."""
    g = f.grid
    out = np.zeros((len(bank.j_range), len(bank.k_range)))
    w = g.rfft_weights * g.cell_volume / g.size
    for kk, k in enumerate(bank.k_range):
        power = w * np.abs(_rfftn(bank.phase_mask(k) * f.values)) ** 2
        for jj, j in enumerate(bank.j_range):
            out[jj, kk] = float(np.sum(bank.freq_multiplier(j) ** 2 * power))
    return out


def _shell_scale(idx: np.ndarray, weights: str) -> np.ndarray:
    """Representative size of shell ``idx``: ``2^idx`` or ``<3/2 2^idx>``."""
    idx = np.asarray(idx, dtype=float)
    if weights == "power":
        return 2.0**idx
    if weights == "center":
        center = np.where(idx < 0, 0.0, 1.5 * 2.0**idx)
        return np.sqrt(1.0 + center**2)
    raise ValueError(f"unknown shell weights {weights!r}")


def _dyadic_weights(bank: ProjectorBank, spec: NormSpec, weights: str) -> np.ndarray:
    j = np.array(list(bank.j_range))
    k = np.array(list(bank.k_range))
    wj = _shell_scale(j, weights) ** (2 * spec.m) * (2.0 + j) ** (2 * spec.s)
    wk = _shell_scale(k, weights) ** (2 * spec.l)
    return wj[:, None] * wk[None, :]


def norm_hmsl_dyadic(
    spec: NormSpec,
    f: ScalarField,
    bank: ProjectorBank | None = None,
    weights: str = "center",
    table: np.ndarray | None = None,
) -> float:
    """Double dyadic sum ``sum_jk W_j^{2m} (2+j)^{2s} W_k^{2l} ||F_j P_k f||^2``.

    ``weights="power"`` uses ``W_j = 2^j``; the default ``"center"`` uses the
    bracket of the shell centre, ``<3/2 2^j>``, which is uniformly equivalent
    and keeps the two-sided constant against the direct norm small.
    """
    bank = bank or ProjectorBank(f.grid)
    table = dyadic_table(bank, f) if table is None else table
    return math.sqrt(float(np.sum(_dyadic_weights(bank, spec, weights) * table)))


@dataclass(frozen=True)
class NormRecord:
    spec: NormSpec
    value: float
    method: str
    truncation_flag: bool

    def to_dict(self) -> dict:
        return {
            "spec": asdict(self.spec),
            "value": self.value,
            "method": self.method,
            "truncation_flag": self.truncation_flag,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def evaluate_norm(
    spec: NormSpec, f: ScalarField, method: str = "direct", bank: ProjectorBank | None = None
) -> NormRecord:
    """Evaluate a norm and flag it when the top frequency shell carries > 1%."""
    bank = bank or ProjectorBank(f.grid)
    table = dyadic_table(bank, f)
    contrib = _dyadic_weights(bank, spec, "center") * table
    total = float(contrib.sum())
    top = float(contrib[-1].sum())
    flag = bool(total > 0 and top > 0.01 * total)
    if method == "direct":
        value = norm_hmsl_direct(spec, f)
    elif method == "dyadic":
        value = math.sqrt(total)
    else:
        raise ValueError(f"unknown norm method {method!r}")
    return NormRecord(spec, value, method, flag)


def bernstein_check(bank: ProjectorBank, j: int, f: ScalarField) -> tuple[float, float]:
    """Return ``||grad F_j f|| / (2^j ||F_j f||)`` and its reciprocal.

    On shell ``j >= 0`` the first ratio lies in the support interval of ``phi``.
    Nyquist modes are dropped first, since the spectral gradient annihilates them.
    """
    if j < 0:
        raise IndexError("bernstein_check needs j >= 0")
    g = f.grid
    coeffs = _rfftn(f.values) * bank.freq_multiplier(j) * g.nyquist_free
    fj = ScalarField(g, _irfftn(coeffs, g.shape))
    base = l2_norm(fj)
    if base == 0.0:
        return 0.0, math.inf
    grad = gradient(f.grid, fj.values)
    gnorm = math.sqrt(float(np.sum(grad**2)) * f.grid.cell_volume)
    ratio = gnorm / (2.0**j * base)
    return ratio, (1.0 / ratio if ratio else math.inf)
