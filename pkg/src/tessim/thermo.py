"""Enthalpy, temperature and phase relations for the PCM and single-phase materials.

Units are fixed package-wide: kJ, kg, degC, s, m. Conductivities and convective
coefficients are stored in W and only converted to kW when resistances are
assembled (see :func:`tessim.geometry.w_to_kw`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class Phase(enum.Enum):
    SOLID = "solid"
    LIQUID = "liquid"


@dataclass(frozen=True)
class PcmProperties:
    """Phase-dependent PCM constants. Saturated solid has h = 0, saturated liquid h = h_f."""

    h_f: float = 334.0  # kJ/kg
    T_sat: float = 0.0  # degC
    cp_solid: float = 2.11  # kJ/(kg degC)
    cp_liquid: float = 4.18
    rho_solid: float = 916.0  # kg/m^3
    rho_liquid: float = 1000.0
    k_solid: float = 2.3  # W/(m degC)
    k_liquid: float = 0.58

    def __post_init__(self):
        for name in ("h_f", "cp_solid", "cp_liquid", "rho_solid", "rho_liquid",
                     "k_solid", "k_liquid"):
            if not getattr(self, name) > 0:
                raise ValueError(f"PcmProperties.{name} must be > 0, got {getattr(self, name)!r}")

    def cp(self, phase: Phase) -> float:
        return self.cp_solid if phase is Phase.SOLID else self.cp_liquid

    def rho(self, phase: Phase) -> float:
        return self.rho_solid if phase is Phase.SOLID else self.rho_liquid

    def k(self, phase: Phase) -> float:
        return self.k_solid if phase is Phase.SOLID else self.k_liquid


@dataclass(frozen=True)
class MaterialProperties:
    """Single-phase material (working fluid, pipe walls)."""

    cp: float  # kJ/(kg degC)
    rho: float  # kg/m^3
    k: Optional[float] = None  # W/(m degC)
    h_conv: Optional[float] = None  # W/(m^2 degC)

    def __post_init__(self):
        for name in ("cp", "rho", "k", "h_conv"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"MaterialProperties.{name} must be > 0, got {value!r}")


# Reference store: 50/50 water-glycol, copper inner pipe, PVC outer pipe, water PCM.
WATER = PcmProperties()
WATER_GLYCOL = MaterialProperties(cp=3.4, rho=1090.0, h_conv=1.0e4)
COPPER = MaterialProperties(cp=0.39, rho=8960.0, k=401.0)
PVC = MaterialProperties(cp=0.88, rho=1350.0, k=0.20)
AIR_H_CONV = 5.0  # W/(m^2 degC)
INSULATION_RESISTANCE = 1.0e14  # degC/W


def pcm_temperature(h, props: PcmProperties):
    """Temperature of the PCM at specific enthalpy ``h`` (scalar or array).

    Sensible solid below h = 0, pinned at T_sat across the latent band
    [0, h_f], sensible liquid above h_f.
    """
    h_arr = np.asarray(h, dtype=float)
    T = np.where(
        h_arr < 0.0,
        h_arr / props.cp_solid + props.T_sat,
        np.where(h_arr > props.h_f, (h_arr - props.h_f) / props.cp_liquid + props.T_sat, props.T_sat),
    )
    if T.ndim == 0:
        return float(T)
    return T


def pcm_phase(props: PcmProperties, *, h: Optional[float] = None, T: Optional[float] = None) -> Phase:
    """Phase by temperature: solid iff T < T_sat. Give exactly one of ``h`` or ``T``."""
    if (h is None) == (T is None):
        raise TypeError("pcm_phase needs exactly one of h= or T=")
    if T is None:
        T = pcm_temperature(h, props)
    return Phase.SOLID if T < props.T_sat else Phase.LIQUID


def pcm_enthalpy(T: float, phase: Phase, props: PcmProperties) -> float:
    if phase is Phase.SOLID:
        if T > props.T_sat:
            raise ValueError(f"solid PCM cannot be above T_sat ({T} > {props.T_sat})")
        return props.cp_solid * (T - props.T_sat)
    if T < props.T_sat:
        raise ValueError(f"liquid PCM cannot be below T_sat ({T} < {props.T_sat})")
    return props.h_f + props.cp_liquid * (T - props.T_sat)


def single_phase_temperature(h, cp: float):
    return h / cp


def single_phase_enthalpy(T, cp: float):
    return cp * T
