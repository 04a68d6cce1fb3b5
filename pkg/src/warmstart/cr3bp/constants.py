"""Earth-Moon CR3BP canonical units and spacecraft constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GM_EARTH_KM3S2 = 398600.435507
GM_MOON_KM3S2 = 4902.800118


@dataclass(frozen=True)
class SystemConstants:
    """Canonical units plus the constant-specific-impulse engine model.

    acc_scale converts thrust acceleration in m/s^2 to DU/TU^2; mdot_tu is
    kg consumed per TU per newton of thrust.
    """

    mu: float
    du_km: float
    tu_s: float
    isp_s: float = 1000.0
    g0: float = 9.80665
    dry_mass_kg: float = 300.0
    wet_mass_kg: float = 1000.0

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ValueError(f"mass parameter must lie in (0, 1/2), got {self.mu}")

    @property
    def acc_scale(self):
        return self.tu_s ** 2 / (self.du_km * 1000.0)

    @property
    def mdot_tu(self):
        # kg/TU per newton: T / (Isp * g0) in kg/s, times TU seconds
        return self.tu_s / (self.isp_s * self.g0)


def earth_moon_constants():
    """mu = 0.012150585; TU derived from DU = 384400 km and the GM values."""
    du_km = 384400.0
    gm_total = GM_EARTH_KM3S2 + GM_MOON_KM3S2
    tu_s = float(np.sqrt(du_km ** 3 / gm_total))
    return SystemConstants(mu=0.012150585, du_km=du_km, tu_s=tu_s)


EARTH_MOON = earth_moon_constants()
