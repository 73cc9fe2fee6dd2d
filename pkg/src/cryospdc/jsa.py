"""Joint spectral amplitude/intensity of the down-converted pair."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .phasematch import CrystalSpec, phase_mismatch

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
NORMALIZATIONS = ("peak_one", "sum_one", "raw_counts")


def wavelength_to_omega(wavelength):
    return 2.0 * math.pi * SPEED_OF_LIGHT / np.asarray(wavelength, dtype=float)


omega_to_wavelength = wavelength_to_omega  # the map is its own inverse


@dataclass(frozen=True)
class PumpSpec:
    central_wavelength: float = 778.0e-9
    fwhm_bandwidth: float = 3.2e-9
    repetition_rate: float = 80e6
    transmitted_power: float = 1e-3

    def __post_init__(self):
        if not self.central_wavelength > 0:
            raise ValueError("central_wavelength must be positive")
        if not self.fwhm_bandwidth > 0:
            raise ValueError("fwhm_bandwidth must be positive")

    @property
    def omega(self) -> float:
        return float(wavelength_to_omega(self.central_wavelength))

    @property
    def fwhm_omega(self) -> float:
        # linearized at the centre: dω = 2πc dλ / λ²
        return 2.0 * math.pi * SPEED_OF_LIGHT * self.fwhm_bandwidth / self.central_wavelength**2

    @property
    def sigma(self) -> float:
        return self.fwhm_omega / FWHM_PER_SIGMA


@dataclass(frozen=True)
class JsiGrid:
    signal_axis: np.ndarray
    idler_axis: np.ndarray
    intensity: np.ndarray
    normalization: str = "peak_one"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.array(self.signal_axis, dtype=float)
        i = np.array(self.idler_axis, dtype=float)
        z = np.array(self.intensity, dtype=float)
        if z.shape != (s.size, i.size):
            raise ValueError(f"intensity shape {z.shape} does not match axes ({s.size}, {i.size})")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise ValueError("intensity must be finite and non-negative")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        for arr in (s, i, z):
            arr.flags.writeable = False
        object.__setattr__(self, "signal_axis", s)
        object.__setattr__(self, "idler_axis", i)
        object.__setattr__(self, "intensity", z)

    def normalized(self, mode: str) -> "JsiGrid":
        return JsiGrid(self.signal_axis, self.idler_axis, normalize(self.intensity, mode), mode, dict(self.metadata))


def normalize(intensity: np.ndarray, mode: str) -> np.ndarray:
    z = np.asarray(intensity, dtype=float)
    if mode == "raw_counts":
        return z.copy()
    if mode not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {mode!r}")
    total = z.max() if mode == "peak_one" else z.sum()
    if not total > 0:
        raise ValueError("cannot normalize an all-zero grid")
    return z / total


def pump_envelope(pump: PumpSpec, omega_s, omega_i):
    """Gaussian pump amplitude over the sum frequency, 1 at ω_s + ω_i = ω_p."""
    sigma = pump.sigma
    if not sigma > 0:
        raise ValueError("pump bandwidth must be non-zero")
    detuning = np.asarray(omega_s) + np.asarray(omega_i) - pump.omega
    return np.exp(-(detuning**2) / (2.0 * sigma**2))


def sinc(x):
    """Unnormalized sinc, sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / math.pi)


def mismatch_from_omegas(crystal: CrystalSpec, omega_s, omega_i, temperature):
    """Δk' with the pump wavelength taken pointwise from ω_s + ω_i."""
    omega_s = np.asarray(omega_s, dtype=float)
    omega_i = np.asarray(omega_i, dtype=float)
    return phase_mismatch(
        crystal,
        omega_to_wavelength(omega_s + omega_i),
        omega_to_wavelength(omega_s),
        omega_to_wavelength(omega_i),
        temperature,
    )


def phasematching_function(crystal: CrystalSpec, effective_length: float, omega_s, omega_i, temperature):
    if not effective_length > 0:
        raise ValueError("effective_length must be positive")
    dk = mismatch_from_omegas(crystal, omega_s, omega_i, temperature)
    return sinc(dk * effective_length / 2.0)


def _check_axis(name, axis):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 2:
        raise ValueError(f"{name} needs at least 2 points")
    step = np.diff(axis)
    if not (np.all(step > 0) or np.all(step < 0)):
        raise ValueError(f"{name} must be strictly monotone")
    return axis


@dataclass(frozen=True)
class JsaFactors:
    """Length-independent pieces of a JSI evaluation on fixed axes."""

    signal_axis: np.ndarray
    idler_axis: np.ndarray
    pump: np.ndarray
    mismatch: np.ndarray

    def intensity(self, effective_length: float) -> np.ndarray:
        if not effective_length > 0:
            raise ValueError("effective_length must be positive")
        return (self.pump * sinc(self.mismatch * effective_length / 2.0)) ** 2


def jsa_factors(crystal, pump, temperature, signal_axis, idler_axis, flat_pump=False) -> JsaFactors:
    s = _check_axis("signal_axis", signal_axis)
    i = _check_axis("idler_axis", idler_axis)
    ws, wi = np.meshgrid(wavelength_to_omega(s), wavelength_to_omega(i), indexing="ij")
    alpha = np.ones_like(ws) if flat_pump else pump_envelope(pump, ws, wi)
    return JsaFactors(s, i, alpha, mismatch_from_omegas(crystal, ws, wi, temperature))


def simulate_jsi(
    crystal: CrystalSpec,
    pump: PumpSpec,
    effective_length: float,
    temperature: float,
    signal_axis,
    idler_axis,
    normalization: str = "peak_one",
    flat_pump: bool = False,
) -> JsiGrid:
    """JSI = |α Φ|² on a (signal, idler) wavelength grid [m].

    ``intensity[k, m]`` belongs to ``(signal_axis[k], idler_axis[m])``.
    ``flat_pump`` replaces the pump envelope by 1 (phase-matching only).
    """
    factors = jsa_factors(crystal, pump, temperature, signal_axis, idler_axis, flat_pump)
    intensity = normalize(factors.intensity(effective_length), normalization)
    meta = {
        "temperature_K": float(temperature),
        "effective_length_m": float(effective_length),
        "poling_period_ref_m": crystal.poling_period_ref,
        "pump_central_m": pump.central_wavelength,
        "pump_fwhm_m": pump.fwhm_bandwidth,
    }
    return JsiGrid(factors.signal_axis, factors.idler_axis, intensity, normalization, meta)


@dataclass(frozen=True)
class Spectrum:
    wavelength: np.ndarray
    intensity: np.ndarray
    error: np.ndarray | None = None

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        y = np.asarray(self.intensity, dtype=float)
        if wl.shape != y.shape or wl.ndim != 1:
            raise ValueError("wavelength and intensity must be 1-D and equal length")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "intensity", y)
        if self.error is not None:
            err = np.asarray(self.error, dtype=float)
            if err.shape != y.shape:
                raise ValueError("error must match intensity")
            object.__setattr__(self, "error", err)


def marginal_spectrum(grid: JsiGrid, axis: str) -> Spectrum:
    """Sum the JSI over the other axis; ``axis`` is ``"signal"`` or ``"idler"``."""
    if axis == "signal":
        return Spectrum(grid.signal_axis.copy(), grid.intensity.sum(axis=1))
    if axis == "idler":
        return Spectrum(grid.idler_axis.copy(), grid.intensity.sum(axis=0))
    raise ValueError(f"axis must be 'signal' or 'idler', got {axis!r}")


def half_max_width(x, y) -> float:
    """Full width at half maximum by linear interpolation of the outermost crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    half = y[k] / 2.0
    above = np.nonzero(y >= half)[0]
    lo, hi = above[0], above[-1]
    if lo == 0 or hi == y.size - 1:
        raise ValueError("half-maximum crossing outside the sampled range")
    left = x[lo - 1] + (half - y[lo - 1]) * (x[lo] - x[lo - 1]) / (y[lo] - y[lo - 1])
    right = x[hi] + (half - y[hi]) * (x[hi + 1] - x[hi]) / (y[hi + 1] - y[hi])
    return float(abs(right - left))
