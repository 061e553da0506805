"""Analytic point-response target scattering.

Targets are reduced to point echoes with high-frequency (ka >> 1)
geometric target strengths: the rigid-sphere and broadside-cylinder
approximations, with a sinc^2 aspect taper carrying cylinders off
broadside.  Elastic structure is out of scope; ``fixed_ts_override``
injects a measured TS where the geometric value will not do.

Burial effects (refraction, sediment absorption, interface transmission)
are not applied here; the synthesis layer runs every echo through the
same propagation chain as the diffuse scatterers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import TargetSpec


@dataclass(frozen=True)
class TargetEcho:
    """One point response: scattering center, TS resolved for this look."""

    position: tuple[float, float, float]
    ts: float  # dB
    kind: str

    @property
    def scattering_length(self) -> float:
        """Amplitude as a length in meters, 10**(TS/20)."""
        return 10.0 ** (self.ts / 20.0)


def sphere_ts(radius: float) -> float:
    """Large-ka rigid sphere target strength, 20*log10(a/2), a in meters."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    return 20.0 * math.log10(radius / 2.0)


def cylinder_ts(radius: float, length: float, wavelength: float) -> float:
    """Broadside target strength of a rigid cylinder, 10*log10(a L^2 / 2 lambda).

    Valid in the ka >> 1 regime (not enforced).
    """
    if radius <= 0 or length <= 0 or wavelength <= 0:
        raise ValueError("radius, length and wavelength must be > 0")
    return 10.0 * math.log10(radius * length**2 / (2.0 * wavelength))


def _aspect_taper(axis, center, tx_pos, rx_pos, k, length):
    """Amplitude taper sinc^2((kL/2) * s) for the bistatic look.

    ``s`` is the mean along-axis direction sine of the two legs, so the
    taper is 1 at broadside, falls off as the look swings toward end-on,
    and is symmetric under a tx/rx swap.
    """
    u_tx = np.asarray(tx_pos, dtype=float) - center
    u_rx = np.asarray(rx_pos, dtype=float) - center
    u_tx = u_tx / max(np.linalg.norm(u_tx), 1e-30)
    u_rx = u_rx / max(np.linalg.norm(u_rx), 1e-30)
    s = 0.5 * (abs(float(np.dot(u_tx, axis))) + abs(float(np.dot(u_rx, axis))))
    x = 0.5 * k * length * s
    if abs(x) < 1e-12:
        return 1.0
    return (math.sin(x) / x) ** 2


def target_echoes(t: TargetSpec, tx_pos, rx_pos, f: float, c_water: float = 1480.0) -> list[TargetEcho]:
    """Point echoes of a target for one transmit/receive geometry.

    Spheres and points return a single aspect-independent echo; cylinders
    return one echo at the specular point on the axis, tapered by the
    sinc^2 angular factor.  ``f`` sets the wavelength for the cylinder TS.
    """
    if t.kind == "point":
        return [TargetEcho(t.position, t.fixed_ts_override, "point")]

    if t.kind == "sphere":
        ts = t.fixed_ts_override if t.fixed_ts_override is not None else sphere_ts(t.radius)
        return [TargetEcho(t.position, ts, "sphere")]

    # cylinder
    if t.orientation is None:
        raise ValueError("cylinder targets need an orientation (yaw about z)")
    wavelength = c_water / f
    axis = np.array([math.cos(t.orientation), math.sin(t.orientation), 0.0])
    center = np.asarray(t.position, dtype=float)

    # specular point: the axis point nearest the midpoint of the two legs,
    # clamped to the physical extent of the cylinder
    mid = 0.5 * (np.asarray(tx_pos, dtype=float) + np.asarray(rx_pos, dtype=float))
    along = float(np.dot(mid - center, axis))
    along = max(-t.length / 2.0, min(t.length / 2.0, along))
    spec_point = center + along * axis

    ts = t.fixed_ts_override if t.fixed_ts_override is not None else cylinder_ts(
        t.radius, t.length, wavelength
    )
    k = 2.0 * math.pi / wavelength
    taper = _aspect_taper(axis, center, tx_pos, rx_pos, k, t.length)
    ts_aspect = ts + 20.0 * math.log10(max(taper, 1e-300))
    return [TargetEcho(tuple(spec_point), ts_aspect, "cylinder")]
