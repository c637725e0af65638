"""Wind and load scenario generation.

Each scenario is one hour of exogenous state: available output per wind farm
and load per bus.  Wind is produced by a latent Gaussian AR(1) process per
farm with cross-farm correlation imposed through a PSD factor of the
configured correlation matrix, mapped to Weibull wind-speed marginals by
probability-integral transform, shaped by a 24-hour diurnal profile, and then
passed through a piecewise power curve.  Loads follow the per-bus base-load
shares scaled by an hourly system profile and the case peak load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .casedata import CaseData


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class WindModelConfig:
    correlation: np.ndarray        # F x F, unit diagonal, PSD
    weibull_shape: np.ndarray      # per farm
    weibull_scale: np.ndarray      # per farm, m/s
    ar_coefficient: float = 0.9    # hourly persistence of the latent process
    diurnal_profile: np.ndarray = None  # 24 speed multipliers
    cut_in: float = 3.0            # m/s
    rated: float = 12.0
    cut_out: float = 25.0

    def __post_init__(self):
        corr = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        object.__setattr__(self, "correlation", corr)
        f = corr.shape[0]
        if corr.shape != (f, f) or not np.allclose(corr, corr.T, atol=1e-12):
            raise ScenarioError("correlation matrix must be square and symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ScenarioError("correlation matrix must have unit diagonal")
        if np.linalg.eigvalsh(corr).min() < -1e-10:
            raise ScenarioError("correlation matrix is not positive semidefinite")
        shape = np.broadcast_to(np.asarray(self.weibull_shape, dtype=float), (f,)).copy()
        scale = np.broadcast_to(np.asarray(self.weibull_scale, dtype=float), (f,)).copy()
        if np.any(shape <= 0) or np.any(scale <= 0):
            raise ScenarioError("Weibull parameters must be positive")
        object.__setattr__(self, "weibull_shape", shape)
        object.__setattr__(self, "weibull_scale", scale)
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ScenarioError("ar_coefficient must lie in [0, 1)")
        prof = self.diurnal_profile
        prof = np.ones(24) if prof is None else np.asarray(prof, dtype=float)
        if prof.shape != (24,) or np.any(prof <= 0):
            raise ScenarioError("diurnal_profile must be 24 positive multipliers")
        object.__setattr__(self, "diurnal_profile", prof)
        if not self.cut_in < self.rated < self.cut_out:
            raise ScenarioError("power curve must satisfy cut_in < rated < cut_out")

    @property
    def n_farms(self) -> int:
        return self.correlation.shape[0]


@dataclass(frozen=True)
class Scenario:
    """One hour's exogenous state; immutable after generation."""

    index: int
    wind_output: np.ndarray   # MW per wind generator, bounded by capacity
    load: np.ndarray          # MW per bus
    rng_seed: int
    latent: np.ndarray = None      # stationary Gaussian driver, for diagnostics
    wind_speed: np.ndarray = None  # m/s after diurnal shaping

    def __post_init__(self):
        for name in ("wind_output", "load", "latent", "wind_speed"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                v.setflags(write=False)
                object.__setattr__(self, name, v)


def _psd_factor(corr: np.ndarray) -> np.ndarray:
    """Cholesky-like factor that also accepts singular PSD matrices."""
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(corr)
        w = np.clip(w, 0.0, None)
        return v @ np.diag(np.sqrt(w))


def _std_normal_cdf(z: np.ndarray) -> np.ndarray:
    flat = z.ravel()
    out = np.array([0.5 * (1.0 + math.erf(x / math.sqrt(2.0))) for x in flat])
    return out.reshape(z.shape)


def power_curve_output(speed: np.ndarray, p_max: np.ndarray, cfg: WindModelConfig) -> np.ndarray:
    """Piecewise cubic power curve; 0 below cut-in / at-and-above cut-out."""
    speed = np.asarray(speed, dtype=float)
    out = np.zeros_like(speed)
    ci3, r3 = cfg.cut_in ** 3, cfg.rated ** 3
    ramp = (speed >= cfg.cut_in) & (speed < cfg.rated)
    out[ramp] = (speed[ramp] ** 3 - ci3) / (r3 - ci3)
    out[(speed >= cfg.rated) & (speed < cfg.cut_out)] = 1.0
    return out * p_max


def generate_scenarios(
    case: CaseData,
    wind_cfg: WindModelConfig | None,
    load_profile,
    count: int,
    seed: int,
) -> list[Scenario]:
    """Generate `count` hourly scenarios, deterministic for a given seed.

    `load_profile` is a cyclic sequence of system-load multipliers of the
    case peak load; wind farms map in case order onto the config's farms.
    """
    if count < 1:
        raise ScenarioError("count must be >= 1")
    profile = np.asarray(load_profile, dtype=float)
    if profile.ndim != 1 or profile.size == 0:
        raise ScenarioError("load_profile must be a non-empty 1-D sequence")

    wind_caps = case.arr.gen_pmax[case.arr.gen_is_wind]
    n_farms = wind_caps.size
    if n_farms and (wind_cfg is None or wind_cfg.n_farms != n_farms):
        raise ScenarioError(f"wind config must describe {n_farms} farms")

    shares = case.arr.base_load / max(case.arr.base_load.sum(), 1e-12)
    rng = np.random.default_rng(seed)

    if n_farms:
        factor = _psd_factor(wind_cfg.correlation)
        a = wind_cfg.ar_coefficient
        shocks = rng.standard_normal((count, n_farms))
        latent = np.empty((count, n_farms))
        z = factor @ shocks[0]
        latent[0] = z
        scale = math.sqrt(1.0 - a * a)
        for t in range(1, count):
            z = a * z + scale * (factor @ shocks[t])
            latent[t] = z
        u = _std_normal_cdf(latent)
        u = np.clip(u, 1e-12, 1.0 - 1e-12)
        speed_base = wind_cfg.weibull_scale * (-np.log1p(-u)) ** (1.0 / wind_cfg.weibull_shape)
    else:
        latent = np.zeros((count, 0))
        speed_base = np.zeros((count, 0))

    scenarios = []
    for t in range(count):
        load = shares * (case.peak_load * profile[t % profile.size])
        if n_farms:
            speed = speed_base[t] * wind_cfg.diurnal_profile[t % 24]
            wind = power_curve_output(speed, wind_caps, wind_cfg)
        else:
            speed = np.zeros(0)
            wind = np.zeros(0)
        scenarios.append(
            Scenario(
                index=t,
                wind_output=wind,
                load=load,
                rng_seed=seed,
                latent=latent[t],
                wind_speed=speed,
            )
        )
    return scenarios


def empirical_correlation(scenarios: list[Scenario]) -> np.ndarray:
    """Sample Pearson correlation of the latent wind drivers."""
    if len(scenarios) < 2:
        raise ScenarioError("need at least 2 scenarios")
    if any(s.latent is None for s in scenarios):
        raise ScenarioError("latent series unavailable (replayed scenarios?)")
    mat = np.vstack([s.latent for s in scenarios])
    if mat.shape[1] < 2:
        raise ScenarioError("need at least 2 wind farms")
    if np.any(mat.std(axis=0) < 1e-12):
        raise ScenarioError("degenerate (constant) latent series")
    return np.corrcoef(mat, rowvar=False)


# ---------------------------------------------------------------------------
# columnar text export/import so runs can be replayed exactly
# ---------------------------------------------------------------------------

def export_scenarios(scenarios: list[Scenario], path) -> None:
    if not scenarios:
        with open(path, "w") as fh:
            fh.write("# cascpath scenarios v1 farms=0 buses=0 seed=0\n")
        return
    f = scenarios[0].wind_output.size
    n = scenarios[0].load.size
    with open(path, "w") as fh:
        fh.write(f"# cascpath scenarios v1 farms={f} buses={n} seed={scenarios[0].rng_seed}\n")
        fh.write("# hour" + " farm_mw" * f + " bus_mw" * n + "\n")
        for s in scenarios:
            cols = [str(s.index)]
            cols += [repr(float(v)) for v in s.wind_output]
            cols += [repr(float(v)) for v in s.load]
            fh.write(" ".join(cols) + "\n")


def import_scenarios(path) -> list[Scenario]:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# cascpath scenarios v1"):
            raise ScenarioError(f"{path} is not a scenario export")
        meta = dict(tok.split("=") for tok in header.split() if "=" in tok)
        f, seed = int(meta["farms"]), int(meta["seed"])
        out = []
        for raw in fh:
            if raw.startswith("#") or not raw.strip():
                continue
            parts = raw.split()
            idx = int(parts[0])
            wind = np.array([float(v) for v in parts[1 : 1 + f]])
            load = np.array([float(v) for v in parts[1 + f :]])
            out.append(Scenario(index=idx, wind_output=wind, load=load, rng_seed=seed))
    return out
