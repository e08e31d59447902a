import math

import numpy as np
import pytest

from tessim.thermo import (
    COPPER,
    WATER,
    WATER_GLYCOL,
    MaterialProperties,
    PcmProperties,
    Phase,
    pcm_enthalpy,
    pcm_phase,
    pcm_temperature,
    single_phase_enthalpy,
    single_phase_temperature,
)


@pytest.mark.parametrize(
    "h, T",
    [(0.0, 0.0), (334.0, 0.0), (-21.1, -10.0), (375.8, 10.0), (167.0, 0.0)],
)
def test_pcm_temperature_branches(h, T):
    assert pcm_temperature(h, WATER) == pytest.approx(T, abs=1e-12)


def test_pcm_temperature_vectorized():
    h = np.array([-21.1, 0.0, 100.0, 375.8])
    np.testing.assert_allclose(pcm_temperature(h, WATER), [-10.0, 0.0, 0.0, 10.0], atol=1e-12)


def test_pcm_temperature_respects_t_sat():
    props = PcmProperties(T_sat=5.0)
    assert pcm_temperature(-2.11, props) == pytest.approx(4.0)
    assert pcm_temperature(props.h_f + 4.18, props) == pytest.approx(6.0)


def test_pcm_phase_examples():
    assert pcm_phase(WATER, T=-5.0) is Phase.SOLID
    assert pcm_phase(WATER, T=0.0) is Phase.LIQUID
    assert pcm_phase(WATER, h=0.5 * WATER.h_f) is Phase.LIQUID
    assert pcm_phase(WATER, h=-1.0) is Phase.SOLID


def test_pcm_phase_needs_exactly_one_argument():
    with pytest.raises(TypeError):
        pcm_phase(WATER)
    with pytest.raises(TypeError):
        pcm_phase(WATER, h=1.0, T=1.0)


@pytest.mark.parametrize(
    "T, phase, h",
    [(0.0, Phase.SOLID, 0.0), (18.0, Phase.LIQUID, 409.24), (-18.0, Phase.SOLID, -37.98), (0.0, Phase.LIQUID, 334.0)],
)
def test_pcm_enthalpy_examples(T, phase, h):
    assert pcm_enthalpy(T, phase, WATER) == pytest.approx(h, abs=1e-9)


@pytest.mark.parametrize("T, phase", [(1.0, Phase.SOLID), (-1.0, Phase.LIQUID)])
def test_pcm_enthalpy_rejects_inconsistent_phase(T, phase):
    with pytest.raises(ValueError):
        pcm_enthalpy(T, phase, WATER)


def test_single_phase_examples():
    assert single_phase_temperature(0.0, 3.4) == 0.0
    assert single_phase_temperature(61.2, WATER_GLYCOL.cp) == pytest.approx(18.0)
    assert single_phase_temperature(-7.02, COPPER.cp) == pytest.approx(-18.0)
    assert single_phase_enthalpy(18.0, 3.4) == pytest.approx(61.2)


def test_pcm_temperature_continuous_at_band_edges():
    for edge in (0.0, WATER.h_f):
        for eps in (1e-3, 1e-6, 1e-9):
            assert abs(pcm_temperature(edge + eps, WATER) - pcm_temperature(edge - eps, WATER)) < 1e-2 * eps / 1e-3


@pytest.mark.parametrize("field", ["h_f", "cp_solid", "rho_liquid", "k_solid"])
def test_pcm_properties_validation(field):
    with pytest.raises(ValueError):
        PcmProperties(**{field: 0.0})


def test_material_properties_validation():
    with pytest.raises(ValueError):
        MaterialProperties(cp=-1.0, rho=1.0)
    assert MaterialProperties(cp=1.0, rho=1.0).k is None


def test_table_defaults():
    assert (WATER.h_f, WATER.cp_solid, WATER.cp_liquid) == (334.0, 2.11, 4.18)
    assert (WATER.rho_solid, WATER.rho_liquid, WATER.k_solid, WATER.k_liquid) == (916.0, 1000.0, 2.3, 0.58)
    assert WATER_GLYCOL.h_conv == 1.0e4 and math.isclose(WATER_GLYCOL.rho, 1090.0)
