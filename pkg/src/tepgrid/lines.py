"""Overhead line constants and long-line equivalent-pi models.

Per-unit-length parameters come from tower geometry and bundle data for a
fully transposed line. Long lines are reduced to an exact equivalent pi via
the hyperbolic correction factors; :func:`cascaded_segment_oracle` rebuilds
the same pi by chaining many short nominal-pi sections and is kept as an
independent check on :func:`equivalent_pi`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.constants import epsilon_0

MILE_KM = 1.609344

# Below this |gamma*l| the hyperbolic ratios are evaluated by series.
_SMALL_GL = 1e-6


@dataclass(frozen=True)
class ConductorSpec:
    """A stranded sub-conductor.

    ``resistance_per_km`` is the AC resistance of one sub-conductor. When
    ``gmr_m`` is omitted the solid-round value ``r * exp(-1/4)`` is used.
    """

    name: str
    outer_diameter_m: float
    resistance_per_km: float
    ampacity_a: float
    gmr_m: float | None = None

    def __post_init__(self):
        for field in ("outer_diameter_m", "resistance_per_km", "ampacity_a"):
            if not getattr(self, field) > 0:
                raise ValueError(f"conductor {self.name!r}: {field} must be positive")
        if self.gmr_m is not None and not 0 < self.gmr_m < self.outer_diameter_m / 2:
            raise ValueError(f"conductor {self.name!r}: gmr_m must lie in (0, radius)")

    @property
    def radius_m(self) -> float:
        return self.outer_diameter_m / 2

    @property
    def self_gmr_m(self) -> float:
        if self.gmr_m is not None:
            return self.gmr_m
        return self.radius_m * math.exp(-0.25)


@dataclass(frozen=True)
class TowerGeometry:
    """Phase positions (x, y) in metres plus a regular-polygon bundle."""

    name: str
    phase_positions: tuple[tuple[float, float], ...]
    bundle_count: int
    bundle_spacing_m: float

    def __post_init__(self):
        pos = tuple(tuple(float(c) for c in p) for p in self.phase_positions)
        object.__setattr__(self, "phase_positions", pos)
        if len(pos) != 3:
            raise ValueError(f"tower {self.name!r}: exactly three phase positions required")
        if len(set(pos)) != 3:
            raise ValueError(f"tower {self.name!r}: degenerate geometry (coincident phases)")
        if any(y <= 0 for _, y in pos):
            raise ValueError(f"tower {self.name!r}: phase heights must be positive")
        if self.bundle_count < 1:
            raise ValueError(f"tower {self.name!r}: bundle_count must be >= 1")
        if self.bundle_count > 1 and not self.bundle_spacing_m > 0:
            raise ValueError(f"tower {self.name!r}: bundle_spacing_m must be positive")

    def gmd(self) -> float:
        d = [math.dist(a, b) for a, b in combinations(self.phase_positions, 2)]
        if min(d) <= 0:
            raise ValueError(f"tower {self.name!r}: degenerate geometry (coincident phases)")
        return math.prod(d) ** (1 / 3)

    def bundle_radius(self) -> float:
        """Radius of the circle through the sub-conductor centres."""
        if self.bundle_count == 1:
            return 0.0
        return self.bundle_spacing_m / (2 * math.sin(math.pi / self.bundle_count))

    def bundle_equivalent(self, radius: float) -> float:
        """Equivalent radius ``(b * radius * A**(b-1))**(1/b)`` of the bundle."""
        b = self.bundle_count
        if b == 1:
            return radius
        return (b * radius * self.bundle_radius() ** (b - 1)) ** (1 / b)


@dataclass(frozen=True)
class UnitLineParams:
    """Series and shunt constants per km of one three-phase circuit."""

    r_ohm_per_km: float
    x_ohm_per_km: float
    b_siemens_per_km: float
    g_siemens_per_km: float = 0.0

    def __post_init__(self):
        if self.r_ohm_per_km < 0 or self.x_ohm_per_km <= 0 or self.b_siemens_per_km <= 0:
            raise ValueError("line constants need r >= 0, x > 0, b > 0")

    @classmethod
    def from_rlc(cls, r_ohm_per_km, l_mh_per_km, c_nf_per_km, f_hz):
        w = 2 * math.pi * f_hz
        return cls(r_ohm_per_km, w * l_mh_per_km * 1e-3, w * c_nf_per_km * 1e-9)

    @property
    def z(self) -> complex:
        return complex(self.r_ohm_per_km, self.x_ohm_per_km)

    @property
    def y(self) -> complex:
        return complex(self.g_siemens_per_km, self.b_siemens_per_km)

    def inductance_mh_per_km(self, f_hz: float) -> float:
        return self.x_ohm_per_km / (2 * math.pi * f_hz) * 1e3

    def capacitance_nf_per_km(self, f_hz: float) -> float:
        return self.b_siemens_per_km / (2 * math.pi * f_hz) * 1e9


@dataclass(frozen=True)
class PiModel:
    z_series: complex
    y_shunt_total: complex
    rating_mva: float
    length_km: float


def unit_parameters(tower: TowerGeometry, cond: ConductorSpec, f_hz: float) -> UnitLineParams:
    """Resistance, reactance and susceptance per km of a transposed bundled line."""
    w = 2 * math.pi * f_hz
    gmd = tower.gmd()
    r_ind = tower.bundle_equivalent(cond.self_gmr_m)
    r_cap = tower.bundle_equivalent(cond.radius_m)
    r = cond.resistance_per_km / tower.bundle_count
    # 2e-7 H/m and F/m -> per km
    x = w * 2e-7 * math.log(gmd / r_ind) * 1e3
    b = w * 2 * math.pi * epsilon_0 / math.log(gmd / r_cap) * 1e3
    return UnitLineParams(r, x, b)


def _sinhc(x: complex) -> complex:
    if abs(x) < _SMALL_GL:
        x2 = x * x
        return 1 + x2 / 6 + x2 * x2 / 120
    return cmath.sinh(x) / x


def _tanhc_half(x: complex) -> complex:
    # tanh(x/2) / (x/2)
    if abs(x) < _SMALL_GL:
        x2 = x * x
        return 1 - x2 / 12 + x2 * x2 / 120
    return cmath.tanh(x / 2) / (x / 2)


def equivalent_pi(u: UnitLineParams, length_km: float, rating_mva: float = math.nan) -> PiModel:
    if not length_km > 0:
        raise ValueError("length_km must be positive")
    gl = cmath.sqrt(u.z * u.y) * length_km
    z_series = u.z * length_km * _sinhc(gl)
    y_shunt = u.y * length_km * _tanhc_half(gl)
    return PiModel(z_series, y_shunt, rating_mva, length_km)


def lumped_distributed_gap(u: UnitLineParams, length_km: float) -> tuple[float, float, float]:
    """Percent gaps (dR, dX, dB) between naive ``z*l``, ``y*l`` and the equivalent pi.

    Each gap is ``100 * |lumped - distributed| / distributed``.
    """
    if length_km < 0:
        raise ValueError("length_km must be non-negative")
    if length_km == 0:
        return 0.0, 0.0, 0.0
    pi = equivalent_pi(u, length_km)
    zl, yl = u.z * length_km, u.y * length_km

    def gap(lumped, dist):
        return 100 * abs(lumped - dist) / abs(dist) if dist else 0.0

    return (
        gap(zl.real, pi.z_series.real),
        gap(zl.imag, pi.z_series.imag),
        gap(yl.imag, pi.y_shunt_total.imag),
    )


def thermal_rating(line_kv: float, cond: ConductorSpec, b: int, loading_cap: float = 0.8) -> tuple[float, float]:
    """Return ``(thermal_mva, rating_mva)`` for a bundle of ``b`` sub-conductors."""
    if not 0 < loading_cap <= 1:
        raise ValueError("loading_cap must lie in (0, 1]")
    if line_kv <= 0 or b < 1:
        raise ValueError("line_kv and b must be positive")
    thermal = math.sqrt(3) * line_kv * cond.ampacity_a * b / 1e3
    return thermal, loading_cap * thermal


def nominal_pi_abcd(z_total: complex, y_total: complex) -> np.ndarray:
    zy = z_total * y_total
    return np.array([[1 + zy / 2, z_total], [y_total * (1 + zy / 4), 1 + zy / 2]])


def abcd_to_pi(m: np.ndarray) -> tuple[complex, complex]:
    a, b = m[0, 0], m[0, 1]
    return complex(b), complex(2 * (a - 1) / b)


def cascaded_segment_oracle(u: UnitLineParams, length_km: float, n_segments: int,
                            rating_mva: float = math.nan) -> PiModel:
    """Chain ``n_segments`` nominal-pi sections and fold the product back to a pi."""
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    d = length_km / n_segments
    seg = nominal_pi_abcd(u.z * d, u.y * d)
    total = np.linalg.matrix_power(seg, n_segments)
    z, y = abcd_to_pi(total)
    return PiModel(z, y, rating_mva, length_km)
