"""Time stepping for the Landau equation and its comparison models."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .collision import CoulombSymbols, build_symbols, conv_a, q_conservative
from .diagnostics import TrajectoryRecord, dissipation, record_state
from .grid import ScalarField, _irfftn, _rfftn, laplacian, save_field, weight_field

__all__ = [
    "MODELS",
    "SCHEMES",
    "SchemeConfig",
    "Model",
    "RunResult",
    "AbortedRunError",
    "rhs",
    "max_diffusivity",
    "stable_dt",
    "run",
    "config_hash",
]

log = logging.getLogger(__name__)

MODELS = ("landau", "toy", "semilinear-heat", "pure-heat")
SCHEMES = ("rk4", "euler", "imex-frozen")
DT_REFRESH = 10
CLIP_TOLERANCE = 1e-8
# relative undershoot accepted in landau initial data (restarts carry solver noise)
NEGATIVE_TOLERANCE = 1e-3
_EIGHT_PI = 8.0 * math.pi


class AbortedRunError(RuntimeError):
    """A run produced non-finite values; carries the last checkpoint path."""

    def __init__(self, message: str, checkpoint: Path | None, t: float, step: int):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.t = t
        self.step = step


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters.

    ``dt=None`` selects the stability-limited step, recomputed every
    ``DT_REFRESH`` steps and capped by ``dt_max``; a given ``dt`` is used as
    is.  ``blowup_factor``
    stops the run once ``max|f|`` exceeds that multiple of its initial value.
    """

    scheme: str = "rk4"
    dt: float | None = None
    dt_max: float | None = None
    cfl_safety: float = 0.4
    t_end: float = 1.0
    record_every: int = 1
    positivity_clip: bool = False
    blowup_factor: float = 1e3
    record_dissipation: bool = False
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        for name in ("dt", "dt_max"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


def config_hash(cfg) -> str:
    """Short stable hash of a dataclass or mapping."""
    data = asdict(cfg) if hasattr(cfg, "__dataclass_fields__") else dict(cfg)
    blob = json.dumps(data, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Model:
    """Which right-hand side to integrate; ``sym`` is required for ``landau``."""

    name: str = "landau"
    sym: CoulombSymbols | None = None

    def __post_init__(self):
        if self.name not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")

    def bind(self, grid) -> "Model":
        if self.name == "landau" and self.sym is None:
            return Model(self.name, build_symbols(grid))
        return self


def rhs(model: Model, f: ScalarField) -> ScalarField:
    """Time derivative of ``f`` under ``model``."""
    g = f.grid
    name = model.name
    if name == "landau":
        if model.sym is None:
            raise ValueError("landau model needs Coulomb symbols")
        return q_conservative(model.sym, f)
    if name == "toy":
        w = weight_field(g, -3.0).values
        return ScalarField(g, laplacian(g, w * f.values))
    if name == "semilinear-heat":
        return ScalarField(g, laplacian(g, f.values) + _EIGHT_PI * f.values**2)
    return ScalarField(g, laplacian(g, f.values))


def max_diffusivity(model: Model, f: ScalarField) -> tuple[float, tuple[float, ...]]:
    """Largest diffusion eigenvalue and the node where it is attained.

    For ``landau`` this scans the eigenvalues of ``a * f``; the toy weight and
    the heat models have unit diffusivity (attained at ``v = 0``).
    """
    g = f.grid
    if model.name != "landau":
        return 1.0, (0.0,) * g.dim
    A = conv_a(model.sym, f).matrix()
    eig = np.linalg.eigvalsh(A)[..., -1]
    k = int(np.argmax(eig))
    idx = np.unravel_index(k, g.shape)
    where = tuple(float(g.nodes[i]) for i in idx)
    return float(eig.flat[k]), where


def stable_dt(model: Model, f: ScalarField, cfg: SchemeConfig) -> float:
    """``cfl_safety h^2 / (2 dim D_max)``.

    For ``semilinear-heat`` the reaction term adds ``cfl_safety / (16 pi max f)``.
    """
    g = f.grid
    d_max, _ = max_diffusivity(model, f)
    dt = cfg.cfl_safety * g.h**2 / (2 * g.dim * max(d_max, 1e-300))
    if model.name == "semilinear-heat":
        peak = float(np.max(np.abs(f.values)))
        if peak > 0:
            dt = min(dt, cfg.cfl_safety / (2 * _EIGHT_PI * peak))
    return dt


@dataclass
class RunResult:
    record: TrajectoryRecord
    field: ScalarField
    t: float
    steps: int
    flags: dict = field(default_factory=dict)
    checkpoint: Path | None = None


def _step(model: Model, f: np.ndarray, dt: float, scheme: str, grid, nu: float) -> np.ndarray:
    def F(x):
        return rhs(model, ScalarField(grid, x)).values

    if scheme == "euler":
        return f + dt * F(f)
    if scheme == "rk4":
        k1 = F(f)
        k2 = F(f + 0.5 * dt * k1)
        k3 = F(f + 0.5 * dt * k2)
        k4 = F(f + dt * k3)
        return f + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    # imex-frozen: implicit nu*Laplacian, explicit remainder
    explicit = f + dt * (F(f) - nu * laplacian(grid, f))
    return _irfftn(_rfftn(explicit) / (1.0 + dt * nu * grid.xi2), grid.shape)


def _write_checkpoint(directory: Path, f: np.ndarray, grid, t: float, step: int, h: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "checkpoint.ldnf"
    save_field(path, ScalarField(grid, f))
    meta = {"t": t, "step": step, "config_hash": h}
    (directory / "checkpoint.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    return path


def run(
    model: Model | str,
    f0: ScalarField,
    cfg: SchemeConfig,
    checkpoint_dir=None,
    observers: Mapping[str, Callable[[ScalarField], float]] | None = None,
    t0: float = 0.0,
) -> RunResult:
    """Advance ``f0`` from ``t0`` to ``cfg.t_end``.

    Diagnostics from :func:`landaukit.diagnostics.record_state` plus any
    ``observers`` are recorded at the start, every ``record_every`` steps and
    at the end.  Checkpoints (field plus a JSON sidecar) are written at each
    record when ``checkpoint_dir`` is given, and on abort.
    """
    if isinstance(model, str):
        model = Model(model)
    grid = f0.grid
    model = model.bind(grid)
    if model.name == "landau" and np.min(f0.values) < -NEGATIVE_TOLERANCE * np.max(f0.values):
        raise ValueError("landau runs need a nonnegative initial field")
    observers = dict(observers or {})
    chash = config_hash({"model": model.name, **asdict(cfg)})
    ckdir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    record = TrajectoryRecord()
    flags = {"clipped_mass": 0.0, "clip_exceeded": False, "blowup": False}
    record.flags = flags
    f = np.array(f0.values, dtype=float)
    mass0 = float(np.sum(f) * grid.cell_volume)
    peak0 = float(np.max(np.abs(f)))
    # fluid moments are meaningless for fields whose mass is round-off
    has_mass = mass0 > 1e-12 * peak0 * grid.cell_volume * grid.size
    t, step = t0, 0
    ck_path = None

    def snapshot():
        nonlocal ck_path
        fld = ScalarField(grid, f)
        vals = record_state(fld) if has_mass else {}
        if cfg.record_dissipation and grid.dim == 3 and grid.n <= 16:
            vals["D"] = dissipation(fld)
        for name, fn in observers.items():
            vals[name] = fn(fld)
        record.append(t, step, **vals)
        if ckdir is not None:
            ck_path = _write_checkpoint(ckdir, f, grid, t, step, chash)

    snapshot()
    dt = cfg.dt
    nu = 0.0
    while t < cfg.t_end * (1 - 1e-12) and step < cfg.max_steps:
        # the eigenvalue scan is costly for landau; other models refresh every step
        if model.name != "landau" or step % DT_REFRESH == 0:
            current = ScalarField(grid, f)
            if cfg.dt is None:
                dt = stable_dt(model, current, cfg)
                if cfg.dt_max is not None:
                    dt = min(dt, cfg.dt_max)
            if cfg.scheme == "imex-frozen":
                nu = max_diffusivity(model, current)[0]
        h = min(dt, cfg.t_end - t)
        new = _step(model, f, h, cfg.scheme, grid, nu)
        if not np.all(np.isfinite(new)):
            if ckdir is not None:
                ck_path = _write_checkpoint(ckdir, f, grid, t, step, chash)
            raise AbortedRunError(f"non-finite field at t={t:.6g}, step {step}", ck_path, t, step)
        if cfg.positivity_clip:
            neg = float(-np.sum(np.minimum(new, 0.0)) * grid.cell_volume)
            if neg > 0:
                before = float(np.sum(new) * grid.cell_volume)
                new = np.maximum(new, 0.0)
                after = float(np.sum(new) * grid.cell_volume)
                if after > 0:
                    new *= before / after
                flags["clipped_mass"] += neg
                if flags["clipped_mass"] > CLIP_TOLERANCE * abs(mass0):
                    flags["clip_exceeded"] = True
        f = new
        t += h
        step += 1
        if np.max(np.abs(f)) > cfg.blowup_factor * peak0:
            flags["blowup"] = True
            flags["blowup_time"] = t
            log.info("blow-up sentinel at t=%.6g", t)
            snapshot()
            break
        if step % cfg.record_every == 0 or t >= cfg.t_end * (1 - 1e-12):
            snapshot()
    return RunResult(record, ScalarField(grid, f), t, step, flags, ck_path)
