"""Quasi-phase-matching: mismatch, signal/idler solver, tuning curves, period design."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dispersion import (
    NO_EXPANSION,
    DispersionModel,
    ExpansionModel,
    reference_length,
    refractive_index,
    scaled_length,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class PhasematchError(ValueError):
    pass


class NoPhasematchError(PhasematchError):
    """No sign change of the mismatch inside the scanned signal window."""

    def __init__(self, message, window=None, mismatch_range=None):
        super().__init__(message)
        self.window = window
        self.mismatch_range = mismatch_range


@dataclass(frozen=True)
class CrystalSpec:
    poling_period_ref: float
    length_ref: float
    te_model: DispersionModel
    tm_model: DispersionModel
    expansion: ExpansionModel = NO_EXPANSION
    grating_sign: int = -1
    # (pump, signal, idler) polarizations
    polarizations: tuple[str, str, str] = ("TE", "TE", "TM")

    def __post_init__(self):
        if not self.poling_period_ref > 0:
            raise ValueError("poling_period_ref must be positive")
        if not self.length_ref > 0:
            raise ValueError("length_ref must be positive")
        if self.grating_sign not in (-1, 1):
            raise ValueError("grating_sign must be -1 or +1")
        if any(p not in ("TE", "TM") for p in self.polarizations):
            raise ValueError(f"bad polarization assignment {self.polarizations}")

    def model(self, polarization: str) -> DispersionModel:
        return self.te_model if polarization == "TE" else self.tm_model

    @property
    def mode_models(self) -> tuple[DispersionModel, DispersionModel, DispersionModel]:
        return tuple(self.model(p) for p in self.polarizations)

    def poling_period(self, temperature: float) -> float:
        return scaled_length(self.expansion, self.poling_period_ref, temperature)

    def length(self, temperature: float) -> float:
        return scaled_length(self.expansion, self.length_ref, temperature)

    def with_period(self, poling_period_ref: float) -> "CrystalSpec":
        return dataclasses.replace(self, poling_period_ref=poling_period_ref)


@dataclass(frozen=True)
class SolverSettings:
    window: tuple[float, float] = (1200e-9, 1900e-9)
    scan_step: float = 0.5e-9
    xtol: float = 1e-15
    residual_tol: float = 1e-4
    branch: str = "long"

    def __post_init__(self):
        if self.branch not in ("long", "short"):
            raise ValueError("branch must be 'long' or 'short'")
        if not 0 < self.window[0] < self.window[1]:
            raise ValueError(f"invalid signal window {self.window}")


DEFAULT_SOLVER = SolverSettings()


@dataclass(frozen=True)
class PhasematchSolution:
    signal_wavelength: float
    idler_wavelength: float
    temperature: float
    residual_mismatch: float
    pump_wavelength: float
    n_roots: int = 1

    @property
    def multiple_roots(self) -> bool:
        return self.n_roots > 1


@dataclass(frozen=True)
class SweepGap:
    """Placeholder for a sweep temperature at which the solver failed."""

    temperature: float
    reason: str = field(default="")


def idler_wavelength(pump_wavelength, signal_wavelength):
    return 1.0 / (1.0 / pump_wavelength - 1.0 / signal_wavelength)


def _dispersive_term(crystal, lp, ls, li, temperature):
    # n_p/lp - n_s/ls - n_i/li, in 1/m
    mp, ms, mi = crystal.mode_models
    return (
        refractive_index(mp, lp, temperature) / lp
        - refractive_index(ms, ls, temperature) / ls
        - refractive_index(mi, li, temperature) / li
    )


def phase_mismatch(crystal: CrystalSpec, pump_wavelength, signal_wavelength, idler_wavelength, temperature):
    """Quasi-phase-matched mismatch Δk' [rad/m] including the grating vector."""
    period = crystal.poling_period(temperature)
    bracket = _dispersive_term(crystal, pump_wavelength, signal_wavelength, idler_wavelength, temperature)
    return TWO_PI * (bracket + crystal.grating_sign / period)


def _signal_bounds(crystal, pump_wavelength, settings):
    lo, hi = settings.window
    _, ms, mi = crystal.mode_models
    lo = max(lo, ms.window[0])
    hi = min(hi, ms.window[1])
    # idler inside its window <=> signal inside the mapped interval; the
    # mapped edges are pulled in slightly so rounding cannot leave the window
    inv_p = 1.0 / pump_wavelength
    if inv_p > 1.0 / mi.window[0]:
        hi = min(hi, 1.0 / (inv_p - 1.0 / mi.window[0]) * (1 - 1e-12))
    lo = max(lo, 1.0 / (inv_p - 1.0 / mi.window[1]) * (1 + 1e-12), pump_wavelength * (1 + 1e-9))
    if not lo < hi:
        raise NoPhasematchError(
            f"empty signal window after applying dispersion windows ({lo * 1e9:.1f}-{hi * 1e9:.1f} nm)",
            window=(lo, hi),
        )
    return lo, hi


def _select(roots, pump_wavelength, settings, hint):
    if hint is not None:
        return min(roots, key=lambda r: abs(r - hint))
    degenerate = 2.0 * pump_wavelength
    if settings.branch == "long":
        side = [r for r in roots if r >= degenerate * (1 - 1e-12)]
    else:
        side = [r for r in roots if r <= degenerate * (1 + 1e-12)]
    return min(side or roots, key=lambda r: abs(r - degenerate))


def solve_phasematch(
    crystal: CrystalSpec,
    pump_wavelength: float,
    temperature: float,
    settings: SolverSettings = DEFAULT_SOLVER,
    hint: float | None = None,
) -> PhasematchSolution:
    """Find the signal/idler pair with Δk' = 0 under energy conservation.

    The signal wavelength is scanned over ``settings.window`` and each sign change
    is refined with Brent's method. With several roots, the one closest to
    ``hint`` is returned if given, otherwise the root nearest degeneracy on the
    configured branch side.
    """
    if not pump_wavelength > 0:
        raise ValueError("pump_wavelength must be positive")
    lo, hi = _signal_bounds(crystal, pump_wavelength, settings)

    def mismatch(ls):
        return phase_mismatch(crystal, pump_wavelength, ls, idler_wavelength(pump_wavelength, ls), temperature)

    n_scan = max(int(math.ceil((hi - lo) / settings.scan_step)), 1) + 1
    grid = np.linspace(lo, hi, n_scan)
    values = mismatch(grid)

    roots = [float(x) for x in grid[values == 0.0]]
    crossing = np.nonzero(values[:-1] * values[1:] < 0)[0]
    for k in crossing:
        # bracket refinement goes well past xtol so the residual check holds
        root = brentq(mismatch, grid[k], grid[k + 1], xtol=min(settings.xtol, 1e-21), rtol=4 * np.finfo(float).eps, maxiter=200)
        roots.append(float(root))
    if not roots:
        raise NoPhasematchError(
            f"no phase-matching in window {lo * 1e9:.1f}-{hi * 1e9:.1f} nm at T={temperature:g} K "
            f"(mismatch spans {values.min():.4g} to {values.max():.4g} rad/m)",
            window=(lo, hi),
            mismatch_range=(float(values.min()), float(values.max())),
        )
    roots.sort()
    ls = _select(roots, pump_wavelength, settings, hint)
    li = float(idler_wavelength(pump_wavelength, ls))
    residual = float(mismatch(ls))
    if abs(residual) > settings.residual_tol:
        raise PhasematchError(f"root refinement stalled: residual {residual:.3g} rad/m")
    if len(roots) > 1:
        log.info("%d phase-matching roots at T=%g K; selected %.4f nm", len(roots), temperature, ls * 1e9)
    return PhasematchSolution(ls, li, float(temperature), residual, float(pump_wavelength), len(roots))


def temperature_sweep(
    crystal: CrystalSpec,
    pump_wavelength: float,
    t_min: float,
    t_max: float,
    steps: int,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> list[PhasematchSolution | SweepGap]:
    """Tuning curve on ``steps`` evenly spaced temperatures, ascending.

    Each point follows the branch of the previous solved point. Failures are
    recorded as :class:`SweepGap` entries.
    """
    if not t_min < t_max:
        raise ValueError(f"t_min must be below t_max (got {t_min}, {t_max})")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    out: list[PhasematchSolution | SweepGap] = []
    hint = None
    for t in np.linspace(t_min, t_max, steps):
        try:
            sol = solve_phasematch(crystal, pump_wavelength, float(t), settings, hint=hint)
        except PhasematchError as exc:
            out.append(SweepGap(float(t), str(exc)))
            continue
        hint = sol.signal_wavelength
        out.append(sol)
    return out


def design_poling_period(
    crystal: CrystalSpec, pump_wavelength: float, signal_wavelength: float, temperature: float
) -> float:
    """Reference-temperature poling period that phase-matches the given signal.

    The period of ``crystal`` is ignored.
    """
    li = idler_wavelength(pump_wavelength, signal_wavelength)
    if not li > 0:
        raise ValueError("signal wavelength must exceed the pump wavelength")
    bracket = float(_dispersive_term(crystal, pump_wavelength, signal_wavelength, li, temperature))
    grating = -crystal.grating_sign * bracket
    scale = refractive_index(crystal.mode_models[0], pump_wavelength, temperature) / pump_wavelength
    if grating <= 1e-12 * scale:
        raise PhasematchError(
            "interaction not quasi-phase-matchable with this sign convention "
            f"(dispersive term {bracket:.4g} 1/m)"
        )
    return reference_length(crystal.expansion, 1.0 / grating, temperature)
