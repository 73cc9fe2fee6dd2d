import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryospdc.config import load_material
from cryospdc.dispersion import (
    DispersionDomainError,
    DispersionModel,
    ExpansionModel,
    Extrapolation,
    WaveguideCorrection,
    constant_index_model,
    reference_length,
    refractive_index,
    scaled_length,
    table_index_model,
)
from oracles import FROZEN_NE, FROZEN_NO


@pytest.fixture(scope="module")
def bulk():
    return load_material("ln_bulk")


@pytest.fixture(scope="module")
def material():
    return load_material("ti_ppln")


@pytest.mark.parametrize("key", sorted(FROZEN_NE))
def test_extraordinary_matches_frozen_oracle(bulk, key):
    lam_um, t = key
    n = refractive_index(bulk.tm, lam_um * 1e-6, t)
    assert n == pytest.approx(FROZEN_NE[key], rel=1e-12)


@pytest.mark.parametrize("key", sorted(FROZEN_NO))
def test_ordinary_matches_frozen_oracle(bulk, key):
    lam_um, t = key
    n = refractive_index(bulk.te, lam_um * 1e-6, t)
    assert n == pytest.approx(FROZEN_NO[key], rel=1e-12)


def test_zero_correction_equals_bulk_series(material):
    model = DispersionModel("TM", material.tm.form, material.tm.coefficients)
    assert refractive_index(model, 1.55e-6, 295.0) == model.bulk_index(1.55e-6, 295.0)


def test_correction_is_added(material):
    lam, t = 1.6e-6, 120.0
    expected = material.tm.bulk_index(lam, t) + material.tm.correction(lam, t)
    assert refractive_index(material.tm, lam, t) == pytest.approx(expected, rel=1e-15)


def test_correction_polynomial_by_hand():
    corr = WaveguideCorrection(((0.01, 2e-6), (0.0,), (0.5,)), lambda0_um=1.5, t0=300.0)
    # 0.01 + 2e-6 * (-100) + 0.5 * 0.1**2
    assert corr(1.6e-6, 200.0) == pytest.approx(0.01 - 2e-4 + 0.005, rel=1e-12)


def test_deterministic(material):
    a = refractive_index(material.te, 1.55e-6, 4.7)
    b = refractive_index(material.te, 1.55e-6, 4.7)
    assert a == b


def test_vectorized_matches_scalar(material):
    lam = np.linspace(1.2e-6, 1.9e-6, 7)
    vec = refractive_index(material.tm, lam, 50.0)
    assert vec.shape == lam.shape
    for x, n in zip(lam, vec):
        assert refractive_index(material.tm, x, 50.0) == n


def test_out_of_window_names_window(material):
    with pytest.raises(DispersionDomainError, match=r"400.*5000"):
        refractive_index(material.tm, 6e-6, 295.0)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_rejected(material, bad):
    with pytest.raises(ValueError, match="finite"):
        refractive_index(material.te, bad, 295.0)
    with pytest.raises(ValueError, match="finite"):
        refractive_index(material.te, 1.55e-6, bad)


def test_negative_temperature_rejected(material):
    with pytest.raises(DispersionDomainError):
        refractive_index(material.te, 1.55e-6, -1.0)


def test_clamp_policy_holds_below_t_min():
    model = DispersionModel(
        "TE", "edwards_lawrence1984",
        (4.9048, 0.11775, 0.21802, 0.027153, 2.2314e-8, -2.9671e-8, 2.1429e-8),
        extrapolation=Extrapolation("clamp", 60.0),
    )
    assert refractive_index(model, 1.55e-6, 4.0) == refractive_index(model, 1.55e-6, 60.0)
    assert refractive_index(model, 1.55e-6, 80.0) != refractive_index(model, 1.55e-6, 60.0)


def test_unknown_form_lists_known():
    with pytest.raises(ValueError, match="jundt1997"):
        DispersionModel("TE", "nope", (1.0,))


def test_table_model_interpolates():
    model = table_index_model("TE", [1.0e-6, 2.0e-6], [2.0, 2.2])
    assert refractive_index(model, 1.5e-6, 10.0) == pytest.approx(2.1, rel=1e-12)


def test_constant_model():
    assert refractive_index(constant_index_model("TM", 2.0), 1.55e-6, 4.0) == 2.0


@given(
    lam=st.floats(1.2e-6, 1.9e-6),
    t=st.floats(0.0, 399.0),
    pol=st.sampled_from(["te", "tm"]),
)
def test_continuous_in_temperature(material, lam, t, pol):
    model = getattr(material, pol)
    assert abs(refractive_index(model, lam, t + 1e-3) - refractive_index(model, lam, t)) < 1e-6


@given(lam=st.floats(1.2e-6, 1.9e-6), t=st.floats(0.0, 400.0))
def test_normal_dispersion_in_band(material, lam, t):
    # index decreases with wavelength away from absorption resonances
    for model in (material.te, material.tm):
        assert refractive_index(model, lam, t) > refractive_index(model, lam + 1e-9, t)


# --- thermal expansion ------------------------------------------------------


def test_reference_temperature_is_identity(material):
    assert scaled_length(material.expansion, 8.98e-6, 295.0) == 8.98e-6


def test_frozen_below_threshold(material):
    exp = material.expansion
    assert scaled_length(exp, 0.01, 30.0) == scaled_length(exp, 0.01, 60.0)
    assert scaled_length(exp, 0.01, 0.0) == scaled_length(exp, 0.01, 60.0)


def test_linear_expansion_arithmetic():
    model = ExpansionModel(295.0, ((0.0, 400.0, (0.0, 1e-5)),), freeze_below=60.0)
    assert scaled_length(model, 0.01, 395.0) == pytest.approx(0.01001, rel=1e-12)


def test_contraction_on_cooling(material):
    assert scaled_length(material.expansion, 1.0, 100.0) < 1.0


def test_expansion_negative_temperature(material):
    with pytest.raises(ValueError):
        scaled_length(material.expansion, 1.0, -5.0)


def test_expansion_requires_zero_at_reference():
    with pytest.raises(ValueError, match="eps"):
        ExpansionModel(295.0, ((0.0, 400.0, (1e-4,)),))


def test_expansion_segments_contiguous():
    with pytest.raises(ValueError, match="contiguous"):
        ExpansionModel(295.0, ((0.0, 100.0, (0.0,)), (150.0, 400.0, (0.0,))))


@given(length=st.floats(1e-7, 1.0), t=st.floats(0.0, 400.0))
def test_reference_length_inverts_scaled(material, length, t):
    scaled = scaled_length(material.expansion, length, t)
    assert reference_length(material.expansion, scaled, t) == pytest.approx(length, rel=1e-14)
