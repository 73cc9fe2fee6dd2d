"""Gaussian spectrum fits, instrument response, and effective-length fitting."""

from __future__ import annotations

import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .jsa import FWHM_PER_SIGMA, JsiGrid, PumpSpec, Spectrum, jsa_factors, normalize
from .phasematch import CrystalSpec

OBJECTIVES = {"fit": "rms_peak_one_scaled", "peak": "rms_peak_one"}


class FitError(RuntimeError):
    pass


class GaussianFitError(FitError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsensitiveFitError(FitError):
    pass


class BoundaryMinimumWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GaussianFitResult:
    center: float
    fwhm: float
    amplitude: float
    center_uncertainty: float
    fwhm_uncertainty: float
    residual_rms: float

    @property
    def sigma(self) -> float:
        return self.fwhm / FWHM_PER_SIGMA


@dataclass(frozen=True)
class LengthFitResult:
    effective_length: float
    length_grid: np.ndarray
    objective_values: np.ndarray
    bounds: tuple[float, float]
    grid_minimum: float
    at_bound: bool
    refined: bool
    config_hash: str
    objective: str = OBJECTIVES["fit"]


def _gauss(p, x):
    amp, mu, sigma = p
    return amp * np.exp(-0.5 * ((x - mu) / sigma) ** 2)


def fit_gaussian(spectrum: Spectrum, max_nfev: int = 2000) -> GaussianFitResult:
    """Weighted least-squares Gaussian (zero baseline).

    Weights come from ``spectrum.error`` or, if absent, Poisson errors
    ``sqrt(max(counts, 1))``. Uncertainties are from the curvature of the
    weighted objective at the optimum.
    """
    x = spectrum.wavelength
    y = spectrum.intensity
    if x.size < 5:
        raise ValueError("need at least 5 points for a Gaussian fit")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("intensities must be finite and non-negative")
    if not np.any(y > 0):
        raise GaussianFitError("all-zero spectrum, nothing to fit")
    err = spectrum.error if spectrum.error is not None else np.sqrt(np.maximum(y, 1.0))
    if np.any(err <= 0):
        raise ValueError("errors must be positive")

    # work in units of the sample spacing around the data centroid
    x0 = float(np.sum(x * y) / np.sum(y))
    scale = float(np.median(np.abs(np.diff(x)))) or 1.0
    u = (x - x0) / scale
    mu0 = float(np.sum(u * y) / np.sum(y))
    sig0 = float(np.sqrt(max(np.sum((u - mu0) ** 2 * y) / np.sum(y), 0.25)))
    p0 = np.array([float(y.max()), mu0, sig0])

    res = least_squares(
        lambda p: (_gauss(p, u) - y) / err,
        p0,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_nfev,
    )
    amp, mu, sigma = res.x
    sigma = abs(sigma)
    if not res.success or not np.all(np.isfinite(res.x)) or sigma == 0:
        raise GaussianFitError(
            f"Gaussian fit did not converge: {res.message}",
            best=(amp, x0 + mu * scale, FWHM_PER_SIGMA * sigma * scale),
        )
    jac = res.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.inf)
    model = _gauss((amp, mu, sigma), u)
    return GaussianFitResult(
        center=x0 + mu * scale,
        fwhm=FWHM_PER_SIGMA * sigma * scale,
        amplitude=float(amp),
        center_uncertainty=float(np.sqrt(abs(cov[1, 1]))) * scale,
        fwhm_uncertainty=FWHM_PER_SIGMA * float(np.sqrt(abs(cov[2, 2]))) * scale,
        residual_rms=float(np.sqrt(np.mean(((y - model) / y.max()) ** 2))),
    )


def gaussian_kernel(response_fwhm: float, step: float) -> np.ndarray:
    """Sampled unit-sum Gaussian of the given FWHM on a grid of spacing ``step``."""
    if response_fwhm < 0:
        raise ValueError("response_fwhm must be >= 0")
    if response_fwhm == 0:
        return np.ones(1)
    sigma = response_fwhm / FWHM_PER_SIGMA / step
    half = max(int(math.ceil(8.0 * sigma)), 1)
    k = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    return k / k.sum()


def _uniform_step(x) -> float:
    d = np.diff(np.asarray(x, dtype=float))
    if d.size == 0 or not np.allclose(d, d[0], rtol=1e-6, atol=0.0):
        raise ValueError("instrument response needs a uniformly sampled axis; resample first")
    return float(abs(d[0]))


def _convolve(values: np.ndarray, kernel: np.ndarray, axis: int = 0) -> np.ndarray:
    if kernel.size == 1:
        return np.array(values, dtype=float, copy=True)
    half = kernel.size // 2
    n = values.shape[axis]

    def one(v):
        return np.convolve(v, kernel, mode="full")[half : half + n]

    return np.apply_along_axis(one, axis, values)


def convolve_instrument_response(spectrum: Spectrum, response_fwhm: float) -> Spectrum:
    """Convolve with a unit-area Gaussian spectrometer response of FWHM ``response_fwhm``."""
    kernel = gaussian_kernel(response_fwhm, _uniform_step(spectrum.wavelength))
    y = np.maximum(_convolve(spectrum.intensity, kernel), 0.0)
    err = None
    if spectrum.error is not None:
        err = np.sqrt(_convolve(spectrum.error**2, kernel**2))
    return Spectrum(spectrum.wavelength.copy(), y, err)


def convolve_grid(grid_values: np.ndarray, signal_axis, idler_axis, response_fwhm: float) -> np.ndarray:
    """Apply the response along both spectrometer axes of a JSI array."""
    if response_fwhm == 0:
        return np.array(grid_values, dtype=float, copy=True)
    out = _convolve(grid_values, gaussian_kernel(response_fwhm, _uniform_step(signal_axis)), axis=0)
    out = _convolve(out, gaussian_kernel(response_fwhm, _uniform_step(idler_axis)), axis=1)
    return np.maximum(out, 0.0)


def _fit_hash(measured, crystal, pump, temperature, bounds, grid_points, options) -> str:
    h = hashlib.sha256()
    for arr in (measured.signal_axis, measured.idler_axis, measured.intensity):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    h.update(repr((crystal, pump, float(temperature), tuple(bounds), grid_points, options)).encode())
    return h.hexdigest()[:16]


def fit_effective_length(
    measured: JsiGrid,
    crystal: CrystalSpec,
    pump: PumpSpec,
    temperature: float,
    length_bounds: tuple[float, float] | None = None,
    grid_points: int = 200,
    refine: bool = True,
    response_fwhm: float = 0.0,
    fit_background: bool = False,
    scale: str = "fit",
    threads: int = 1,
) -> LengthFitResult:
    """Single-parameter fit of the phase-matching length to a measured JSI.

    Each candidate length is simulated on the measured axes, both grids are
    normalized to unit peak, and the objective is the RMS of the cellwise
    difference. With ``scale="fit"`` the simulated grid additionally gets a
    least-squares amplitude factor, which removes the upward bias of a noisy
    measured maximum; ``scale="peak"`` compares the normalized grids as they
    are. ``fit_background`` adds a constant-offset nuisance term.

    The grid minimum is optionally refined by bounded Brent iteration
    (successive parabolic interpolation) on the squared objective between
    the neighbouring grid points.
    """
    if scale not in OBJECTIVES:
        raise ValueError(f"scale must be one of {sorted(OBJECTIVES)}")
    chip = crystal.length_ref
    lo, hi = length_bounds if length_bounds is not None else (chip / 100.0, chip)
    if not 0 < lo < hi:
        raise ValueError(f"invalid length bounds {(lo, hi)}")
    if hi > chip * (1 + 1e-12):
        raise ValueError(f"upper length bound {hi:g} m exceeds the chip length {chip:g} m")
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")

    flat_target = normalize(measured.intensity, "peak_one").ravel()
    factors = jsa_factors(crystal, pump, temperature, measured.signal_axis, measured.idler_axis)

    def objective(length: float) -> float:
        sim = factors.intensity(length)
        if response_fwhm:
            sim = convolve_grid(sim, measured.signal_axis, measured.idler_axis, response_fwhm)
        sim = normalize(sim, "peak_one").ravel()
        columns = [sim] if scale == "fit" else []
        if fit_background:
            columns.append(np.ones(sim.size))
        residual = flat_target - (0.0 if scale == "fit" else sim)
        if columns:
            design = np.column_stack(columns)
            coef, *_ = np.linalg.lstsq(design, residual, rcond=None)
            residual = residual - design @ coef
        diff = residual
        return float(np.sqrt(np.mean(diff**2)))

    lengths = np.linspace(lo, hi, grid_points)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = np.array(list(pool.map(objective, lengths)))
    else:
        values = np.array([objective(length) for length in lengths])

    if values.max() - values.min() < 1e-12:
        raise InsensitiveFitError("objective is flat over the length grid; data do not constrain L")
    k = int(np.argmin(values))
    at_bound = k in (0, grid_points - 1)
    if at_bound:
        warnings.warn(
            f"best length {lengths[k]:g} m lies on the search bound", BoundaryMinimumWarning, stacklevel=2
        )
    best = float(lengths[k])
    if refine:
        a, b = lengths[max(k - 1, 0)], lengths[min(k + 1, grid_points - 1)]
        res = minimize_scalar(
            lambda length: objective(length) ** 2,
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-9 * best},
        )
        if res.success and res.fun <= values[k] ** 2:
            best = float(res.x)

    return LengthFitResult(
        effective_length=best,
        length_grid=lengths,
        objective_values=values,
        bounds=(float(lo), float(hi)),
        grid_minimum=float(lengths[k]),
        at_bound=at_bound,
        refined=refine,
        config_hash=_fit_hash(
            measured, crystal, pump, temperature, (lo, hi), grid_points, (refine, response_fwhm, fit_background, scale)
        ),
        objective=OBJECTIVES[scale] + ("+offset" if fit_background else ""),
    )
