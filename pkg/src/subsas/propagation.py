"""Geometric-acoustics services for the two-media (water over sediment) scene.

Everything here is a pure function of geometry and media: refracted ray
paths and travel times across the flat interface at z = 0, spreading and
absorption losses, flat-interface reflection/transmission coefficients,
the roughness-attenuated coherent reflection coefficient, piston element
directivities, the image-source lattice for the two bounding planes
(air-water surface at z = -water_depth, seabed at z = 0), and ambient
noise spectrum levels.

Coordinate convention: x along-track, y cross-track, z depth, z = 0 at
the sediment-water interface, z positive downward.  Sonar elements sit at
negative z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import SceneGeometry, SedimentProperties, WaterProperties

# Reference frequency for the tabulated attenuation coefficients.
ATTENUATION_REF_HZ = 20e3

# Anchor points (Hz -> dB re 1 uPa^2/Hz at 1 kHz) for the deep-water
# ambient-noise spectrum by sea state, read off the classic deep-water
# average curves.  Between 1 and 100 kHz the wind-driven component falls
# at ~17 dB/decade; anchors below are the 1 kHz spectrum levels.
AMBIENT_LEVEL_1KHZ_BY_SEA_STATE = {
    0: 44.5,
    1: 55.0,
    2: 59.5,
    3: 63.0,
    4: 65.5,
    5: 67.5,
    6: 70.0,
}
AMBIENT_SLOPE_DB_PER_DECADE = -17.0
AMBIENT_BAND_HZ = (1e3, 100e3)

_REFRACTION_TOL_M = 1e-6
_REFRACTION_MAX_NEWTON = 60


class PropagationError(ValueError):
    """Raised for geometric inputs the ray model cannot handle."""


# ---------------------------------------------------------------------------
# Ray paths
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RayPath:
    """One-way path between a point in water and a point in the sediment.

    Angles are measured from the vertical (z axis).  For an unrefracted
    in-water path the sediment segment is zero and both angles equal the
    straight-line inclination.
    """

    start: tuple[float, float, float]
    end: tuple[float, float, float]
    crossing: tuple[float, float, float] | None
    water_length: float
    sediment_length: float
    travel_time: float
    incidence_angle: float
    refraction_angle: float
    evanescent: bool = False


def _crossing_offsets(hw, hs, rho, c_water, c_sed):
    """Vectorized Fermat solve for the interface crossing offset.

    Returns the horizontal distance ``d`` from the water point's ground
    projection toward the sediment point's projection at which the
    minimum-time path crosses z = 0.  Inputs broadcast; ``hw`` is the
    water point's height above the interface, ``hs`` the sediment point's
    depth below it.  Safeguarded Newton on the stationarity condition

        d / (c_w * L_w) = (rho - d) / (c_s * L_s)

    which is Snell's law; the travel time is strictly convex in d so the
    root is unique and bracketed by [0, rho].
    """
    hw = np.asarray(hw, dtype=float)
    hs = np.asarray(hs, dtype=float)
    rho = np.asarray(rho, dtype=float)
    hw, hs, rho = np.broadcast_arrays(hw, hs, rho)
    d = rho * hw / np.maximum(hw + hs, 1e-30)  # straight-line initial guess

    lo = np.zeros_like(d)
    hi = rho.copy()

    def _f(d):
        lw = np.hypot(hw, d)
        ls = np.hypot(hs, rho - d)
        return d / (c_water * np.maximum(lw, 1e-30)) - (rho - d) / (
            c_sed * np.maximum(ls, 1e-30)
        )

    for _ in range(_REFRACTION_MAX_NEWTON):
        lw = np.hypot(hw, d)
        ls = np.hypot(hs, rho - d)
        f = d / (c_water * np.maximum(lw, 1e-30)) - (rho - d) / (
            c_sed * np.maximum(ls, 1e-30)
        )
        # maintain the bracket
        lo = np.where(f < 0, d, lo)
        hi = np.where(f > 0, d, hi)
        fp = hw**2 / (c_water * np.maximum(lw, 1e-30) ** 3) + hs**2 / (
            c_sed * np.maximum(ls, 1e-30) ** 3
        )
        step = f / np.maximum(fp, 1e-300)
        d_new = d - step
        # fall back to bisection where Newton leaves the bracket
        bad = (d_new <= lo) | (d_new >= hi) | ~np.isfinite(d_new)
        d = np.where(bad, 0.5 * (lo + hi), d_new)
        if np.all(np.abs(hi - lo) < 0.25 * _REFRACTION_TOL_M) or np.all(
            np.abs(step) < 0.25 * _REFRACTION_TOL_M
        ):
            break
    return d


def refracted_travel(p_water, p_sed, c_water, c_sed):
    """Vectorized refracted-path solve between water and sediment points.

    Parameters
    ----------
    p_water : ndarray (..., 3)
        Points with z < 0 (in water).
    p_sed : ndarray (..., 3)
        Points with z >= 0 (on or below the interface).  Broadcasts
        against ``p_water``.

    Returns
    -------
    dict of ndarrays with keys ``time``, ``water_length``,
    ``sediment_length``, ``incidence``, ``refraction``, ``crossing_frac``
    (crossing offset as a fraction of the horizontal separation).
    """
    p_water = np.asarray(p_water, dtype=float)
    p_sed = np.asarray(p_sed, dtype=float)
    hw = -p_water[..., 2]
    hs = p_sed[..., 2]
    if np.any(hw < 0):
        raise PropagationError("water-side point lies at or below the interface")
    if np.any(hs < 0):
        raise PropagationError("sediment-side point lies above the interface")
    rho = np.hypot(
        p_sed[..., 0] - p_water[..., 0], p_sed[..., 1] - p_water[..., 1]
    )
    d = _crossing_offsets(hw, hs, rho, c_water, c_sed)
    lw = np.hypot(hw, d)
    ls = np.hypot(hs, rho - d)
    time = lw / c_water + ls / c_sed
    incidence = np.arctan2(d, hw)
    refraction = np.arctan2(rho - d, hs)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(rho > 0, d / np.where(rho > 0, rho, 1.0), 0.0)
    return {
        "time": time,
        "water_length": lw,
        "sediment_length": ls,
        "incidence": incidence,
        "refraction": refraction,
        "crossing_frac": frac,
    }


def refracted_path(p_water, p_sed, c_water: float, c_sed: float) -> RayPath:
    """Minimum-time (Fermat) path from a water point to a sediment point.

    The crossing point is found by safeguarded Newton iteration on the
    horizontal offset with residual below 1e-6 m.  Between two fixed
    points the transmission path always has a real crossing (the travel
    time is convex on the crossing segment), so the ``evanescent`` flag
    only guards degenerate inputs; fixed-angle shooting beyond the
    critical angle is not represented here.
    """
    p_water = tuple(float(v) for v in p_water)
    p_sed = tuple(float(v) for v in p_sed)
    if p_sed[2] == 0.0 and p_water[2] < 0.0:
        # interface endpoint: pure water path
        seg = np.subtract(p_sed, p_water)
        lw = float(np.linalg.norm(seg))
        angle = math.atan2(math.hypot(seg[0], seg[1]), abs(seg[2])) if lw else 0.0
        return RayPath(
            start=p_water,
            end=p_sed,
            crossing=p_sed,
            water_length=lw,
            sediment_length=0.0,
            travel_time=lw / c_water,
            incidence_angle=angle,
            refraction_angle=angle,
        )
    out = refracted_travel(np.array(p_water), np.array(p_sed), c_water, c_sed)
    rho = math.hypot(p_sed[0] - p_water[0], p_sed[1] - p_water[1])
    frac = float(out["crossing_frac"])
    crossing = (
        p_water[0] + frac * (p_sed[0] - p_water[0]),
        p_water[1] + frac * (p_sed[1] - p_water[1]),
        0.0,
    )
    return RayPath(
        start=p_water,
        end=p_sed,
        crossing=crossing,
        water_length=float(out["water_length"]),
        sediment_length=float(out["sediment_length"]),
        travel_time=float(out["time"]),
        incidence_angle=float(out["incidence"]),
        refraction_angle=float(out["refraction"]),
    )


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------
def spreading_loss_db(r):
    """One-way spherical spreading loss, 20*log10(r), r in meters."""
    return 20.0 * np.log10(r)


def attenuation_db_per_m(medium, f):
    """Attenuation at frequency ``f``, scaled linearly from the 20 kHz value."""
    return medium.attenuation_at_ref * (np.asarray(f, dtype=float) / ATTENUATION_REF_HZ)


def absorption_db(path: RayPath, f, water: WaterProperties, sediment: SedimentProperties):
    """One-way absorption along a ray path, summed per medium."""
    return attenuation_db_per_m(water, f) * path.water_length + attenuation_db_per_m(
        sediment, f
    ) * path.sediment_length


# ---------------------------------------------------------------------------
# Interface coefficients
# ---------------------------------------------------------------------------
def flat_reflection_coeff(water, sediment, incidence_from_vertical):
    """Two-fluid (Rayleigh) pressure reflection coefficient.

    ``incidence_from_vertical`` is the water-side incidence angle from
    the vertical. Returns a real signed ratio below the critical angle
    and a complex unit-magnitude value beyond it.
    """
    theta = np.asarray(incidence_from_vertical, dtype=float)
    a_rho = sediment.density / water.density
    n = water.sound_speed / sediment.sound_speed
    cos_t = np.cos(theta)
    beta = np.sqrt((n**2 - np.sin(theta) ** 2).astype(complex))
    v = (a_rho * cos_t - beta) / (a_rho * cos_t + beta)
    if v.ndim == 0:
        v = complex(v)
        return v.real if v.imag == 0 else v
    return np.where(v.imag == 0, v.real, v) if np.isrealobj(v) else v


def transmission_coeff(medium_from, medium_to, incidence_from_vertical):
    """Pressure transmission coefficient across the flat interface.

    Equal to 1 + R with R the reflection coefficient seen from
    ``medium_from``.  The round trip through the interface therefore
    carries (1 + R)(1 - R) = 1 - R^2, the transmitted power fraction
    below critical.
    """
    theta = np.asarray(incidence_from_vertical, dtype=float)
    a_rho = medium_to.density / medium_from.density
    n = medium_from.sound_speed / medium_to.sound_speed
    cos_t = np.cos(theta)
    beta = np.sqrt((n**2 - np.sin(theta) ** 2).astype(complex))
    r = (a_rho * cos_t - beta) / (a_rho * cos_t + beta)
    t = 1.0 + r
    if t.ndim == 0:
        t = complex(t)
        return t.real if t.imag == 0 else t
    return t


def eckart_coherent_coeff(flat_r, f, rms_roughness, incidence_from_vertical, c_water):
    """Coherent (mean-field) reflection coefficient of the rough interface.

    The flat-interface coefficient is attenuated by
    exp(-2 (k h cos theta)^2) with k the water wavenumber, h the RMS
    roughness, and theta the incidence angle from vertical.
    """
    k = 2.0 * np.pi * np.asarray(f, dtype=float) / c_water
    arg = k * rms_roughness * np.cos(incidence_from_vertical)
    return flat_r * np.exp(-2.0 * arg**2)


# ---------------------------------------------------------------------------
# Element directivity
# ---------------------------------------------------------------------------
def _sinc(x):
    """sin(x)/x with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = np.abs(x) > 1e-12
    out[nz] = np.sin(x[nz]) / x[nz]
    return out


def rect_piston_directivity(width_x, width_y, f, direction, c_water):
    """Amplitude pattern of a rectangular piston lying in the x-y plane.

    ``direction`` is a unit vector (or (..., 3) array) from the element
    toward the field point; the pattern is the product of sinc factors
    per aperture axis and is 1 at broadside.  The element is treated as
    an unbaffled symmetric radiator, so up- and down-going directions at
    the same inclination see the same level (this is what lets surface
    multipath through at full pattern weight).
    """
    d = np.asarray(direction, dtype=float)
    k = 2.0 * np.pi * f / c_water
    ux = d[..., 0]
    uy = d[..., 1]
    return _sinc(0.5 * k * width_x * ux) * _sinc(0.5 * k * width_y * uy)


def circular_piston_directivity(diameter, f, direction, c_water):
    """Amplitude pattern of a circular piston in the x-y plane (jinc form)."""
    from scipy.special import j1

    d = np.asarray(direction, dtype=float)
    k = 2.0 * np.pi * f / c_water
    s = np.hypot(d[..., 0], d[..., 1])
    x = 0.5 * k * diameter * s
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = np.abs(x) > 1e-12
    out[nz] = 2.0 * j1(x[nz]) / x[nz]
    return out


def piston_directivity(element, f, direction, c_water):
    """Dispatch on element kind (receiver -> rectangular, projector -> circular)."""
    # local import to avoid a cycle at module load
    from .scene import Projector, Receiver

    if isinstance(element, Receiver):
        wx, wy = element.element_width
        return rect_piston_directivity(wx, wy, f, direction, c_water)
    if isinstance(element, Projector):
        return circular_piston_directivity(element.aperture_diameter, f, direction, c_water)
    raise TypeError(f"not an array element: {element!r}")


# ---------------------------------------------------------------------------
# Image sources
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ImageSource:
    """Virtual source mirrored through the surface/seabed plane lattice.

    ``order`` counts boundary reflections.  Every bounce of a given image
    shares one incidence angle (the planes are parallel), so the seabed
    coherent coefficient can be evaluated once per image/target pair and
    raised to ``n_bottom``.
    """

    position: tuple[float, float, float]
    order: int
    n_surface: int
    n_bottom: int
    first_bounce: str | None

    @property
    def surface_factor(self) -> float:
        """Product of per-bounce surface reflections (pressure release: -1)."""
        return (-1.0) ** self.n_surface

    def boundary_factor(self, bottom_coeff):
        """Accumulated boundary reflection factor for this image's path."""
        return self.surface_factor * bottom_coeff**self.n_bottom

    def boundary_loss_db(self, bottom_coeff):
        """Accumulated boundary loss in dB (surface bounces are lossless)."""
        mag = np.abs(self.boundary_factor(bottom_coeff))
        return -20.0 * np.log10(np.maximum(mag, 1e-300))


def enumerate_image_sources(
    pose, geometry: SceneGeometry, max_order: int
) -> list[ImageSource]:
    """Image lattice of ``pose`` for the surface (z = -D) / seabed (z = 0) pair.

    Order 0 is the element itself.  Each order n >= 1 contributes exactly
    two images, one whose bounce sequence starts at the surface and one
    that starts at the seabed; sequences alternate strictly between the
    two planes.
    """
    if max_order < 0:
        raise PropagationError("max_order must be >= 0")
    x, y, zs = (float(v) for v in pose)
    depth = geometry.water_depth
    images = [ImageSource((x, y, zs), 0, 0, 0, None)]
    for n in range(1, max_order + 1):
        if n % 2 == 1:
            z_surf_first = -(n + 1) * depth - zs
            z_bott_first = (n - 1) * depth - zs
        else:
            z_surf_first = n * depth + zs
            z_bott_first = -n * depth + zs
        images.append(
            ImageSource((x, y, z_surf_first), n, (n + 1) // 2, n // 2, "surface")
        )
        images.append(
            ImageSource((x, y, z_bott_first), n, n // 2, (n + 1) // 2, "bottom")
        )
    return images


# ---------------------------------------------------------------------------
# Ambient noise
# ---------------------------------------------------------------------------
def ambient_noise_psd(f, sea_state):
    """Deep-water ambient noise spectrum level, dB re 1 uPa^2/Hz.

    Piecewise-linear in log10(f) through the documented 1 kHz anchor for
    the requested sea state with a -17 dB/decade slope; valid between
    1 and 100 kHz.  Fractional sea states interpolate between anchors.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < AMBIENT_BAND_HZ[0]) or np.any(f > AMBIENT_BAND_HZ[1]):
        raise PropagationError(
            f"frequency outside the fitted ambient-noise band {AMBIENT_BAND_HZ}"
        )
    states = sorted(AMBIENT_LEVEL_1KHZ_BY_SEA_STATE)
    levels = [AMBIENT_LEVEL_1KHZ_BY_SEA_STATE[s] for s in states]
    if not states[0] <= sea_state <= states[-1]:
        raise PropagationError(f"sea state {sea_state} outside fitted range")
    level_1k = float(np.interp(sea_state, states, levels))
    out = level_1k + AMBIENT_SLOPE_DB_PER_DECADE * np.log10(f / 1e3)
    return float(out) if out.ndim == 0 else out
