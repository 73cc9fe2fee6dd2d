"""Material and crystal configuration files (TOML or JSON).

Physical quantities carry unit suffixes in their keys (``_nm``, ``_um``,
``_mm``, ``_K``, ``_MHz``, ``_mW``); everything is converted to SI here.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dispersion import DispersionModel, ExpansionModel, Extrapolation, WaveguideCorrection
from .jsa import PumpSpec
from .phasematch import CrystalSpec, SolverSettings

DEFAULT_MATERIAL = "ti_ppln"
DEFAULT_CRYSTAL = "ti_ppln_8p98"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    name: str
    te: DispersionModel
    tm: DispersionModel
    expansion: ExpansionModel
    source: dict


@dataclass(frozen=True)
class RunConfig:
    crystal: CrystalSpec
    pump: PumpSpec
    solver: SolverSettings
    material: Material
    source: dict

    def hash(self, **extra) -> str:
        return config_hash({"config": self.source, "material": self.material.source, **extra})


def config_hash(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"cannot hash {type(value).__name__}")


def read_structured(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix == ".json":
        return json.loads(text)
    return tomllib.loads(text.decode())


def _resolve(name_or_path: str | Path) -> dict:
    """Load a config by path, or by bare name from the bundled data directory."""
    path = Path(name_or_path)
    if path.is_file():
        try:
            return read_structured(path)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    bundled = resources.files("cryospdc") / "data" / f"{name_or_path}.toml"
    if bundled.is_file():
        return tomllib.loads(bundled.read_text())
    raise ConfigError(f"no such configuration file or bundled config: {name_or_path}")


def _require(table: dict, key: str, where: str):
    try:
        return table[key]
    except KeyError:
        raise ConfigError(f"missing key {key!r} in {where}") from None


def _dispersion_model(doc: dict, pol: str) -> DispersionModel:
    entry = _require(doc.get("polarization", {}), pol, "[polarization]")
    set_name = _require(entry, "sellmeier", f"[polarization.{pol}]")
    coeffs = _require(doc.get("sellmeier", {}), set_name, "[sellmeier]")
    lo, hi = coeffs.get("window_nm", [400.0, 5000.0])

    corr = entry.get("correction")
    correction = WaveguideCorrection()
    if corr:
        correction = WaveguideCorrection(
            coefficients=tuple(tuple(float(c) for c in row) for row in corr["coefficients"]),
            lambda0_um=float(corr.get("lambda0_um", 1.55)),
            t0=float(corr.get("t0_K", 295.0)),
        )
    extra = entry.get("extrapolation", {})
    extrapolation = Extrapolation(extra.get("policy", "analytic"), float(extra.get("t_min_K", 0.0)))
    return DispersionModel(
        polarization=pol,
        form=_require(coeffs, "form", f"[sellmeier.{set_name}]"),
        coefficients=tuple(coeffs["coefficients"]),
        window=(lo * 1e-9, hi * 1e-9),
        correction=correction,
        extrapolation=extrapolation,
        name=set_name,
    )


def _expansion_model(doc: dict) -> ExpansionModel:
    exp = doc.get("expansion")
    if not exp:
        return ExpansionModel()
    segments = tuple(
        (s["t_min_K"], s["t_max_K"], tuple(s["coefficients"])) for s in exp["segments"]
    )
    return ExpansionModel(
        reference_temperature=float(exp.get("reference_temperature_K", 295.0)),
        segments=segments,
        freeze_below=float(exp.get("freeze_below_K", 60.0)),
    )


def load_material(name_or_path: str | Path = DEFAULT_MATERIAL) -> Material:
    doc = _resolve(name_or_path)
    try:
        return Material(
            name=doc.get("name", str(name_or_path)),
            te=_dispersion_model(doc, "TE"),
            tm=_dispersion_model(doc, "TM"),
            expansion=_expansion_model(doc),
            source=doc,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed material config {name_or_path}: {exc}") from exc


def load_run_config(name_or_path: str | Path = DEFAULT_CRYSTAL, material: str | Path | None = None) -> RunConfig:
    """Load a crystal configuration (which names its material) plus pump and solver sections."""
    doc = _resolve(name_or_path)
    mat_ref = material or doc.get("material", DEFAULT_MATERIAL)
    if material is None and Path(name_or_path).is_file():
        # a material file next to a user config wins over the bundled name
        for suffix in ("", ".toml", ".json"):
            sibling = Path(name_or_path).parent / f"{mat_ref}{suffix}"
            if sibling.is_file():
                mat_ref = sibling
                break
    mat = load_material(mat_ref)

    crystal_doc = doc.get("crystal", {})
    pol = crystal_doc.get("polarizations", {})
    crystal = CrystalSpec(
        poling_period_ref=float(crystal_doc.get("poling_period_um", 8.98)) * 1e-6,
        length_ref=float(crystal_doc.get("length_mm", 24.4)) * 1e-3,
        expansion=mat.expansion,
        te_model=mat.te,
        tm_model=mat.tm,
        grating_sign=int(crystal_doc.get("grating_sign", -1)),
        polarizations=(pol.get("pump", "TE"), pol.get("signal", "TE"), pol.get("idler", "TM")),
    )

    pump_doc = doc.get("pump", {})
    pump = PumpSpec(
        central_wavelength=float(pump_doc.get("central_nm", 778.0)) * 1e-9,
        fwhm_bandwidth=float(pump_doc.get("fwhm_nm", 3.2)) * 1e-9,
        repetition_rate=float(pump_doc.get("repetition_rate_MHz", 80.0)) * 1e6,
        transmitted_power=float(pump_doc.get("transmitted_power_mW", 1.0)) * 1e-3,
    )

    solver_doc = doc.get("solver", {})
    lo, hi = solver_doc.get("window_nm", [1200.0, 1900.0])
    solver = SolverSettings(
        window=(lo * 1e-9, hi * 1e-9),
        scan_step=float(solver_doc.get("scan_step_nm", 0.5)) * 1e-9,
        xtol=float(solver_doc.get("xtol_nm", 1e-6)) * 1e-9,
        residual_tol=float(solver_doc.get("residual_tol_rad_per_m", 1e-4)),
        branch=solver_doc.get("branch", "long"),
    )
    return RunConfig(crystal=crystal, pump=pump, solver=solver, material=mat, source=doc)
