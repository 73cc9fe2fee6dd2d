"""Temperature-dependent effective refractive indices and thermal expansion.

All public functions take SI inputs (wavelength in metres, temperature in
kelvin). Sellmeier series are evaluated in their native units (micrometres,
degrees Celsius) internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

KELVIN_OFFSET = 273.15
T_MAX = 400.0


class DispersionDomainError(ValueError):
    """Wavelength or temperature outside the range a model accepts."""


# --- Sellmeier forms --------------------------------------------------------
# Each form maps (lambda_um, T_celsius, coefficients) -> n.


def _jundt1997(lam, t_c, c):
    a1, a2, a3, a4, a5, a6, b1, b2, b3, b4 = c
    f = (t_c - 24.5) * (t_c + 570.82)
    lam2 = lam * lam
    n2 = (
        a1
        + b1 * f
        + (a2 + b2 * f) / (lam2 - (a3 + b3 * f) ** 2)
        + (a4 + b4 * f) / (lam2 - a5**2)
        - a6 * lam2
    )
    return np.sqrt(n2)


def _edwards_lawrence1984(lam, t_c, c):
    a1, a2, a3, a4, b1, b2, b3 = c
    t0 = 24.5
    f = (t_c - t0) * (t_c + t0 + 546.0)
    lam2 = lam * lam
    n2 = a1 + (a2 + b1 * f) / (lam2 - (a3 + b2 * f) ** 2) + b3 * f - a4 * lam2
    return np.sqrt(n2)


def _sellmeier(lam, t_c, c):
    # n^2 = 1 + sum B_k lam^2 / (lam^2 - C_k), coefficients B1, C1, B2, C2, ...
    if len(c) % 2:
        raise ValueError("sellmeier form needs (B, C) coefficient pairs")
    lam2 = lam * lam
    n2 = 1.0
    for b, cc in zip(c[0::2], c[1::2]):
        n2 = n2 + b * lam2 / (lam2 - cc)
    return np.sqrt(n2) + 0.0 * t_c


def _constant(lam, t_c, c):
    (value,) = c
    return np.full(np.broadcast(lam, t_c).shape, float(value))[()]


def _table(lam, t_c, c):
    # flattened (lambda_um, n) nodes, linear interpolation, temperature-independent
    nodes = np.asarray(c, dtype=float).reshape(-1, 2)
    order = np.argsort(nodes[:, 0])
    x, y = nodes[order, 0], nodes[order, 1]
    return np.interp(lam, x, y) + 0.0 * t_c


SELLMEIER_FORMS: dict[str, Callable] = {
    "jundt1997": _jundt1997,
    "edwards_lawrence1984": _edwards_lawrence1984,
    "sellmeier": _sellmeier,
    "constant": _constant,
    "table": _table,
}


# --- model types ------------------------------------------------------------


@dataclass(frozen=True)
class WaveguideCorrection:
    """Additive index correction ``sum c[i][j] (lam_um - lam0)^i (T - t0)^j``."""

    coefficients: tuple[tuple[float, ...], ...] = ((0.0,),)
    lambda0_um: float = 1.55
    t0: float = 295.0

    def __call__(self, wavelength, temperature):
        dl = np.asarray(wavelength) * 1e6 - self.lambda0_um
        dt = np.asarray(temperature) - self.t0
        total = 0.0
        for i, row in enumerate(self.coefficients):
            for j, cij in enumerate(row):
                if cij != 0.0:
                    total = total + cij * dl**i * dt**j
        return total

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for row in self.coefficients for c in row)


@dataclass(frozen=True)
class Extrapolation:
    """Low-temperature policy: ``analytic`` evaluates the series as-is,
    ``clamp`` holds the bulk series at ``t_min`` below it."""

    policy: str = "analytic"
    t_min: float = 0.0

    def __post_init__(self):
        if self.policy not in ("analytic", "clamp"):
            raise ValueError(f"unknown extrapolation policy {self.policy!r}")

    def effective_temperature(self, temperature):
        if self.policy == "clamp":
            return np.maximum(temperature, self.t_min)
        return temperature


@dataclass(frozen=True)
class DispersionModel:
    polarization: str
    form: str
    coefficients: tuple[float, ...]
    window: tuple[float, float] = (0.4e-6, 5.0e-6)
    correction: WaveguideCorrection = field(default_factory=WaveguideCorrection)
    extrapolation: Extrapolation = field(default_factory=Extrapolation)
    name: str = ""

    def __post_init__(self):
        if self.polarization not in ("TE", "TM"):
            raise ValueError(f"polarization must be TE or TM, got {self.polarization!r}")
        if self.form not in SELLMEIER_FORMS:
            raise ValueError(
                f"unknown Sellmeier form {self.form!r}; known: {sorted(SELLMEIER_FORMS)}"
            )
        lo, hi = self.window
        if not 0 < lo < hi:
            raise ValueError(f"invalid validity window {self.window}")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def bulk_index(self, wavelength, temperature):
        """Bulk series only, no correction or extrapolation policy."""
        lam_um = np.asarray(wavelength, dtype=float) * 1e6
        t_c = np.asarray(temperature, dtype=float) - KELVIN_OFFSET
        return SELLMEIER_FORMS[self.form](lam_um, t_c, self.coefficients)


@dataclass(frozen=True)
class ExpansionModel:
    """Relative length change eps(T) as a piecewise polynomial.

    ``segments`` holds ``(t_lo, t_hi, coeffs)`` with coefficients in powers of
    ``T - reference_temperature``. Below ``freeze_below`` the value is held at
    ``eps(freeze_below)``.
    """

    reference_temperature: float = 295.0
    segments: tuple[tuple[float, float, tuple[float, ...]], ...] = ((0.0, T_MAX, (0.0,)),)
    freeze_below: float = 60.0

    def __post_init__(self):
        segs = tuple(
            (float(lo), float(hi), tuple(float(c) for c in coeffs))
            for lo, hi, coeffs in sorted(self.segments)
        )
        if not segs:
            raise ValueError("expansion model needs at least one segment")
        for (_, hi, _), (lo, _, _) in zip(segs, segs[1:]):
            if lo != hi:
                raise ValueError("expansion segments must be contiguous")
        object.__setattr__(self, "segments", segs)
        eps_ref = self._polynomial(self.reference_temperature)
        if abs(eps_ref) > 1e-15:
            raise ValueError(f"eps(reference_temperature) must be 0, got {eps_ref:g}")

    def _polynomial(self, t: float) -> float:
        for lo, hi, coeffs in self.segments:
            if lo <= t <= hi:
                return float(np.polynomial.polynomial.polyval(t - self.reference_temperature, coeffs))
        lo, hi = self.segments[0][0], self.segments[-1][1]
        raise DispersionDomainError(f"temperature {t} K outside expansion table [{lo}, {hi}] K")

    def epsilon(self, temperature: float) -> float:
        t = float(temperature)
        if not np.isfinite(t) or t < 0:
            raise ValueError(f"temperature must be finite and >= 0 K, got {temperature}")
        return self._polynomial(max(t, self.freeze_below))


NO_EXPANSION = ExpansionModel()


# --- operations -------------------------------------------------------------


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def refractive_index(model: DispersionModel, wavelength, temperature):
    """Effective index of ``model`` at ``wavelength`` [m] and ``temperature`` [K].

    Accepts scalars or broadcastable arrays.
    """
    lam = _check_finite("wavelength", wavelength)
    temp = _check_finite("temperature", temperature)
    lo, hi = model.window
    if np.any(lam < lo) or np.any(lam > hi):
        raise DispersionDomainError(
            f"wavelength outside validity window [{lo * 1e9:g}, {hi * 1e9:g}] nm "
            f"of {model.name or model.form} ({model.polarization})"
        )
    if np.any(temp < 0) or np.any(temp > T_MAX):
        raise DispersionDomainError(f"temperature outside [0, {T_MAX:g}] K")
    n = model.bulk_index(lam, model.extrapolation.effective_temperature(temp))
    if not model.correction.is_zero:
        n = n + model.correction(lam, temp)
    return n[()] if isinstance(n, np.ndarray) else n


def scaled_length(model: ExpansionModel, reference_length: float, temperature: float) -> float:
    """Length at ``temperature`` of a feature measuring ``reference_length`` at the
    model's reference temperature."""
    if not reference_length > 0:
        raise ValueError("reference_length must be positive")
    return reference_length * (1.0 + model.epsilon(temperature))


def reference_length(model: ExpansionModel, length: float, temperature: float) -> float:
    """Inverse of :func:`scaled_length`."""
    if not length > 0:
        raise ValueError("length must be positive")
    return length / (1.0 + model.epsilon(temperature))


def constant_index_model(polarization: str, value: float, window=(0.2e-6, 10e-6)) -> DispersionModel:
    return DispersionModel(polarization, "constant", (value,), window=window, name=f"n={value:g}")


def table_index_model(polarization: str, wavelengths: Sequence[float], indices: Sequence[float]) -> DispersionModel:
    """Piecewise-linear model through ``(wavelength [m], n)`` nodes."""
    wl = np.asarray(wavelengths, dtype=float)
    coeffs = np.column_stack([wl * 1e6, np.asarray(indices, dtype=float)]).ravel()
    return DispersionModel(
        polarization, "table", tuple(coeffs), window=(float(wl.min()), float(wl.max())), name="table"
    )
