"""Problem constants for the self-calibration model and their JSON form.

Example configuration (every key optional, defaults shown)::

    {
      "grid": {"n_pixels": 128, "length": 1.0},
      "spectrum": {"p0": 4.0, "k0": 4.0, "gamma": 4.0},
      "noise_sigma": 0.1,
      "r0": 3.0,
      "response_prior_variance": 1.0,
      "newton": {"max_iter": 100, "grad_tol": 1e-8},
      "seed": 1
    }

``grid`` may also be a bare integer (the pixel count). The spectrum values are
eigenvalues of the prior covariance of the pixel vector; ``k0`` is measured in
units of the fundamental mode. ``noise_sigma`` is the amplitude of white noise
in the continuum sense, so a single pixel carries variance
``noise_sigma**2 / pixel_volume``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .field import FourierCovariance, Grid1D, PowerSpectrum


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NewtonSettings:
    max_iter: int = 100
    grad_tol: float = 1e-8
    backtrack: float = 0.5
    min_step: float = 1e-10
    cov_tol: float = 1e-9

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError("newton.max_iter must be >= 1")
        if not self.grad_tol > 0:
            raise ConfigError("newton.grad_tol must be positive")
        if not 0 < self.backtrack < 1:
            raise ConfigError("newton.backtrack must lie in (0, 1)")
        if not 0 < self.min_step < 1:
            raise ConfigError("newton.min_step must lie in (0, 1)")
        if not self.cov_tol > 0:
            raise ConfigError("newton.cov_tol must be positive")


@dataclass(frozen=True)
class ModelConfig:
    grid: Grid1D = field(default_factory=lambda: Grid1D(128))
    spectrum: PowerSpectrum = field(default_factory=PowerSpectrum)
    sigma_n: float = 0.1
    r0: float = 3.0
    R: float = 1.0
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    seed: int = 1

    def __post_init__(self):
        if not self.sigma_n > 0:
            raise ConfigError("noise_sigma must be positive")
        if not self.R > 0:
            raise ConfigError("response_prior_variance must be positive")

    @property
    def prior(self) -> FourierCovariance:
        return FourierCovariance(self.grid, self.spectrum)

    @property
    def noise_weight(self) -> float:
        """Diagonal of the discretized inverse noise covariance, ``pixel_volume / sigma_n**2``."""
        return self.grid.pixel_volume / self.sigma_n**2

    def with_(self, **changes) -> ModelConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "grid": {"n_pixels": self.grid.n_pixels, "length": self.grid.length},
            "spectrum": {"p0": self.spectrum.p0, "k0": self.spectrum.k0, "gamma": self.spectrum.gamma},
            "noise_sigma": self.sigma_n,
            "r0": self.r0,
            "response_prior_variance": self.R,
            "newton": asdict(self.newton),
            "seed": self.seed,
        }


_TOP_KEYS = {"grid", "spectrum", "noise_sigma", "r0", "response_prior_variance", "newton", "seed"}


def _number(obj, key, where, default, kind=float):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}{key}: expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{where}{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _section(obj, key):
    value = obj.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected an object, got {value!r}")
    return value


def config_from_dict(raw: dict) -> ModelConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    base = ModelConfig()
    try:
        grid_raw = raw.get("grid", {})
        if isinstance(grid_raw, int) and not isinstance(grid_raw, bool):
            grid = Grid1D(grid_raw)
        else:
            if not isinstance(grid_raw, dict):
                raise ConfigError(f"grid: expected an object or integer, got {grid_raw!r}")
            grid = Grid1D(
                _number(grid_raw, "n_pixels", "grid.", base.grid.n_pixels, int),
                _number(grid_raw, "length", "grid.", base.grid.length),
            )
        sp = _section(raw, "spectrum")
        spectrum = PowerSpectrum(
            _number(sp, "p0", "spectrum.", base.spectrum.p0),
            _number(sp, "k0", "spectrum.", base.spectrum.k0),
            _number(sp, "gamma", "spectrum.", base.spectrum.gamma),
        )
        nw = _section(raw, "newton")
        dn = base.newton
        newton = NewtonSettings(
            _number(nw, "max_iter", "newton.", dn.max_iter, int),
            _number(nw, "grad_tol", "newton.", dn.grad_tol),
            _number(nw, "backtrack", "newton.", dn.backtrack),
            _number(nw, "min_step", "newton.", dn.min_step),
            _number(nw, "cov_tol", "newton.", dn.cov_tol),
        )
        return ModelConfig(
            grid=grid,
            spectrum=spectrum,
            sigma_n=_number(raw, "noise_sigma", "", base.sigma_n),
            r0=_number(raw, "r0", "", base.r0),
            R=_number(raw, "response_prior_variance", "", base.R),
            newton=newton,
            seed=_number(raw, "seed", "", base.seed, int),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ModelConfig:
    if path is None:
        return ModelConfig()
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
