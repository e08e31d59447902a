"""Concentric-pipe TES geometry and radial conduction resistances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

W_TO_KW = 1.0e-3


def w_to_kw(value_w: float) -> float:
    """Convert a W-based coefficient (k or h_conv) to kW."""
    return value_w * W_TO_KW


def cylinder_resistance(r_in, r_out, k: float, length: float):
    """Radial conduction resistance of an annulus, ln(r_out/r_in)/(2 pi L k).

    ``k`` in W/(m degC) gives degC/W; in kW/(m degC) gives degC/kW.
    """
    return np.log(r_out / r_in) / (2.0 * math.pi * length * k)


def convection_resistance(r: float, h_conv: float, length: float) -> float:
    return 1.0 / (2.0 * math.pi * r * length * h_conv)


def equal_volume_radius(r_a, r_b):
    """Radius splitting the annulus [r_a, r_b] into two equal volumes."""
    return np.sqrt(0.5 * (r_a * r_a + r_b * r_b))


def annulus_volume(r_in, r_out, length: float):
    return math.pi * length * (r_out * r_out - r_in * r_in)


@dataclass(frozen=True)
class TesGeometry:
    """Radii follow the inner pipe bore outward; all lengths in m.

    Every radius is derived from r1 and the layer thicknesses.
    """

    r1: float = 0.0060
    dr_inner_wall: float = 0.0008
    dr_outer_wall: float = 0.0064
    dr_pcm: float = 0.0191
    length: float = 1.0
    pcm_mass: float = 1.90  # kg, used by the moving-boundary model

    def __post_init__(self):
        for name in ("r1", "dr_inner_wall", "dr_outer_wall", "dr_pcm", "length", "pcm_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TesGeometry.{name} must be > 0, got {getattr(self, name)!r}")

    @property
    def r2(self) -> float:
        """Inner-wall mid radius."""
        return self.r1 + 0.5 * self.dr_inner_wall

    @property
    def r3(self) -> float:
        """Inner PCM face."""
        return self.r1 + self.dr_inner_wall

    @property
    def r_pcm_out(self) -> float:
        """Outer PCM face (r_{n+4} in grid numbering)."""
        return self.r3 + self.dr_pcm

    @property
    def r_outer_mid(self) -> float:
        """Outer-wall mid radius (r_{n+5})."""
        return self.r_pcm_out + 0.5 * self.dr_outer_wall

    @property
    def r_outer(self) -> float:
        """Outer-wall outer face (r_{n+6})."""
        return self.r_pcm_out + self.dr_outer_wall

    def section_width(self, n: int) -> float:
        return self.dr_pcm / n

    def section_centers(self, n: int) -> np.ndarray:
        dr = self.section_width(n)
        return self.r3 + dr * (np.arange(n) + 0.5)

    def section_volumes(self, n: int) -> np.ndarray:
        dr = self.section_width(n)
        rc = self.section_centers(n)
        return math.pi * self.length * ((rc + 0.5 * dr) ** 2 - (rc - 0.5 * dr) ** 2)

    @property
    def fluid_volume(self) -> float:
        return math.pi * self.length * self.r1**2

    @property
    def inner_wall_volume(self) -> float:
        return annulus_volume(self.r1, self.r3, self.length)

    @property
    def outer_wall_volume(self) -> float:
        return annulus_volume(self.r_pcm_out, self.r_outer, self.length)

    @property
    def pcm_volume(self) -> float:
        return annulus_volume(self.r3, self.r_pcm_out, self.length)
