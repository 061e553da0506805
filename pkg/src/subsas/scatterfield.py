"""Point-scatterer realization of the environment and per-scatterer levels.

The diffuse field is carried by discrete scatterers: a Poisson-count
uniform scatter of points on the interface (z = 0) and in the sediment
volume (0 < z <= truncation depth).  Each scatterer owns a patch of the
generated extent and a unit-variance circular complex Gaussian factor,
so the summed return has Rayleigh envelope statistics and an ensemble
mean-square level set entirely by the deterministic cross sections.

Deterministic factors (source level, directivities, scattering strength,
spreading, absorption, interface transmission) are composed per
transmit/receive pair by ``composite_level`` from the ``propagation``
primitives, which keeps every sub-factor independently testable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import propagation as prop
from .scene import (
    Scenario,
    SedimentProperties,
    WaterProperties,
)

# Tile width for seed-partitioned generation: each tile draws from a
# sub-seed derived from (seed, kind, tile index), so the realization is
# bitwise reproducible regardless of how tiles are assigned to workers.
GENERATION_TILE_M = 1.0

# Low-wavenumber cutoff of the roughness spectrum used for diffuse
# scattering.  Components longer than this wavelength belong to the
# coherent (specular) field, which is modeled separately; the cutoff
# also keeps the power-law spectrum finite toward the specular direction.
SPECTRUM_CUTOFF_WAVELENGTH_M = 0.5

_KIND_INTERFACE = 0
_KIND_VOLUME = 1

FIELD_DUMP_MAGIC = "SBSFLD1"


class ConfigurationError(ValueError):
    """Scatterer densities inconsistent with the waveform resolution."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounds, used as generation extent."""

    x: tuple[float, float]
    y: tuple[float, float]
    z: tuple[float, float] = (0.0, 0.0)

    @property
    def area(self) -> float:
        return (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])

    @property
    def volume(self) -> float:
        return self.area * (self.z[1] - self.z[0])


@dataclass(frozen=True)
class PointScatterer:
    position: tuple[float, float, float]
    kind: str  # 'interface' | 'volume'
    patch_measure: float  # m^2 (interface) or m^3 (volume)
    stochastic_factor: complex


class ScattererField:
    """Realized scatterers held as flat arrays (positions, kinds, factors).

    ``positions`` is (n, 3); ``kinds`` holds 0 for interface and 1 for
    volume points; ``measures`` are the per-scatterer patch areas or
    volumes, which tile the generated extent exactly (patch = extent
    measure / count per class).
    """

    def __init__(self, positions, kinds, measures, factors, extent: Box, seed: int,
                 interface_density: float, volume_density: float):
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        self.kinds = np.asarray(kinds, dtype=np.int8)
        self.measures = np.asarray(measures, dtype=float)
        self.factors = np.asarray(factors, dtype=complex)
        self.extent = extent
        self.seed = seed
        self.interface_density = interface_density
        self.volume_density = volume_density

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def interface_mask(self) -> np.ndarray:
        return self.kinds == _KIND_INTERFACE

    @property
    def volume_mask(self) -> np.ndarray:
        return self.kinds == _KIND_VOLUME

    @property
    def scatterers(self) -> list[PointScatterer]:
        names = {_KIND_INTERFACE: "interface", _KIND_VOLUME: "volume"}
        return [
            PointScatterer(
                tuple(self.positions[i]),
                names[int(self.kinds[i])],
                float(self.measures[i]),
                complex(self.factors[i]),
            )
            for i in range(len(self))
        ]

    def dump(self, path) -> None:
        """Debug dump: one text header line, then flat float32 LE records
        (x, y, z, kind, measure, re, im)."""
        with open(path, "wb") as fh:
            fh.write(f"{FIELD_DUMP_MAGIC} count={len(self)} seed={self.seed}\n".encode())
            rec = np.empty((len(self), 7), dtype="<f4")
            rec[:, 0:3] = self.positions
            rec[:, 3] = self.kinds
            rec[:, 4] = self.measures
            rec[:, 5] = self.factors.real
            rec[:, 6] = self.factors.imag
            fh.write(rec.tobytes())


def read_field_dump(path):
    """Read back a debug dump; returns (records ndarray (n, 7), seed)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode()
        if not header.startswith(FIELD_DUMP_MAGIC):
            raise ValueError(f"{path}: not a scatterer field dump")
        parts = dict(p.split("=") for p in header.split()[1:])
        count = int(parts["count"])
        rec = np.frombuffer(fh.read(count * 7 * 4), dtype="<f4").reshape(count, 7)
    return rec, int(parts["seed"])


# ---------------------------------------------------------------------------
# Resolution-cell sanity check
# ---------------------------------------------------------------------------
def expected_counts_per_cell(s: Scenario) -> dict[str, float]:
    """Expected scatterer counts in one range-resolution cell.

    The statistically relevant cell for diffuse reverberation is the
    ensonified range shell of thickness c/(2B): for the interface this is
    the annulus at the sonar's altitude, for the volume the sub-bottom
    shell evaluated at half the truncation depth.
    """
    c = s.water.sound_speed
    delta_r = c / (2.0 * s.waveform.bandwidth)
    alt = s.geometry.sensor_altitude
    annulus = 2.0 * np.pi * alt * delta_r
    z_ref = 0.5 * s.scattering.volume_truncation_depth
    shell = 2.0 * np.pi * (alt + z_ref) * z_ref * delta_r
    return {
        "interface": s.scattering.interface_density * annulus,
        "volume": s.scattering.volume_density * shell,
    }


# ---------------------------------------------------------------------------
# Field generation
# ---------------------------------------------------------------------------
def _tile_edges(x0: float, x1: float) -> np.ndarray:
    n = max(1, int(np.ceil((x1 - x0) / GENERATION_TILE_M)))
    return np.linspace(x0, x1, n + 1)


def _generate_class(extent: Box, density: float, seed: int, kind: int):
    """Poisson-count uniform positions, tiled along x for seed partitioning."""
    if density <= 0 or extent.area <= 0:
        return np.empty((0, 3)), np.empty(0, dtype=complex)
    if kind == _KIND_VOLUME and (extent.z[1] - extent.z[0]) <= 0:
        return np.empty((0, 3)), np.empty(0, dtype=complex)
    edges = _tile_edges(*extent.x)
    pos_parts = []
    fac_parts = []
    for t in range(len(edges) - 1):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(kind, t))
        rng = np.random.Generator(np.random.PCG64(ss))
        width = edges[t + 1] - edges[t]
        if kind == _KIND_INTERFACE:
            lam = density * width * (extent.y[1] - extent.y[0])
        else:
            lam = density * width * (extent.y[1] - extent.y[0]) * (
                extent.z[1] - extent.z[0]
            )
        n = rng.poisson(lam)
        p = np.empty((n, 3))
        p[:, 0] = rng.uniform(edges[t], edges[t + 1], n)
        p[:, 1] = rng.uniform(extent.y[0], extent.y[1], n)
        if kind == _KIND_INTERFACE:
            p[:, 2] = 0.0
        else:
            p[:, 2] = rng.uniform(extent.z[0], extent.z[1], n)
        g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        pos_parts.append(p)
        fac_parts.append(g)
    return np.concatenate(pos_parts), np.concatenate(fac_parts)


def generate_field(s: Scenario, extent: Box, seed: int | None = None) -> ScattererField:
    """Realize the scatterer field over ``extent``.

    Interface scatterers live at z = 0 over the x-y footprint of the
    extent; volume scatterers fill (0, volume_truncation_depth] clipped
    to the extent's z range.  Bitwise deterministic for a given seed.
    """
    if seed is None:
        seed = s.rng_seed
    cells = expected_counts_per_cell(s)
    for name, expect in cells.items():
        density = getattr(s.scattering, f"{name}_density")
        if density > 0 and expect < 1.0:
            raise ConfigurationError(
                f"{name} density {density} yields {expect:.2f} scatterers per "
                f"resolution cell (< 1); raise the density or the bandwidth"
            )

    z_top = max(extent.z[0], 0.0)
    z_bot = min(
        max(extent.z[1], 0.0), s.scattering.volume_truncation_depth
    )
    vol_extent = Box(extent.x, extent.y, (z_top, max(z_top, z_bot)))

    pos_i, fac_i = _generate_class(extent, s.scattering.interface_density, seed, _KIND_INTERFACE)
    pos_v, fac_v = _generate_class(vol_extent, s.scattering.volume_density, seed, _KIND_VOLUME)

    n_i, n_v = len(pos_i), len(pos_v)
    measures = np.concatenate(
        [
            np.full(n_i, extent.area / n_i if n_i else 0.0),
            np.full(n_v, vol_extent.volume / n_v if n_v else 0.0),
        ]
    )
    kinds = np.concatenate(
        [np.full(n_i, _KIND_INTERFACE, np.int8), np.full(n_v, _KIND_VOLUME, np.int8)]
    )
    return ScattererField(
        np.concatenate([pos_i, pos_v]) if n_i + n_v else np.empty((0, 3)),
        kinds,
        measures,
        np.concatenate([fac_i, fac_v]),
        extent,
        seed,
        s.scattering.interface_density,
        s.scattering.volume_density,
    )


# ---------------------------------------------------------------------------
# Cross sections
# ---------------------------------------------------------------------------
def roughness_spectrum(sediment: SedimentProperties, wavenumber,
                       cutoff_wavelength: float = SPECTRUM_CUTOFF_WAVELENGTH_M):
    """Two-dimensional roughness power spectrum W(K) = w2 * K**-gamma.

    Wavenumbers below 2*pi/cutoff_wavelength are clamped to the cutoff
    value; see the module docstring for why the diffuse spectrum is
    truncated toward the specular direction.
    """
    k_min = 2.0 * np.pi / cutoff_wavelength
    k_eff = np.maximum(np.asarray(wavenumber, dtype=float), k_min)
    return sediment.spectral_strength * k_eff ** (-sediment.spectral_exponent)


def interface_scattering_cross_section(
    sediment: SedimentProperties,
    water: WaterProperties,
    f,
    incident_grazing,
    scattered_grazing,
    bistatic_azimuth,
    cutoff_wavelength: float = SPECTRUM_CUTOFF_WAVELENGTH_M,
):
    """First-order perturbation bistatic interface cross section (per unit
    area per unit solid angle, unitless).

    Grazing angles are measured from the interface plane; the bistatic
    azimuth is the angle between the horizontal projections of the
    incident and scattered propagation directions (pi = backscatter).
    Fluid-fluid first-order perturbation theory over the power-law
    roughness spectrum:

        sigma = k^4 |(1 + V(th_i)) (1 + V(th_s)) / 2|^2 |G|^2 W(dK)
        G = (1 - 1/a_rho) (cos th_i cos th_s cos phi - b_i b_s / a_rho)
            + 1 - 1/(a_rho a_c^2)
        b(th) = sqrt(a_c^-2 - cos^2 th)

    with a_rho, a_c the sediment/water density and speed ratios and V the
    flat-interface reflection coefficient.  Sub-critical combinations
    evaluate with complex b and V; no special-casing.  Symmetric under
    exchange of the incident and scattered angles (reciprocity).
    """
    th_i = np.asarray(incident_grazing, dtype=float)
    th_s = np.asarray(scattered_grazing, dtype=float)
    phi = np.asarray(bistatic_azimuth, dtype=float)
    f = np.asarray(f, dtype=float)

    a_rho = sediment.density / water.density
    a_c = sediment.sound_speed / water.sound_speed
    k = 2.0 * np.pi * f / water.sound_speed

    cos_i, cos_s = np.cos(th_i), np.cos(th_s)
    sin_i, sin_s = np.sin(th_i), np.sin(th_s)
    b_i = np.sqrt((a_c**-2 - cos_i**2).astype(complex) if hasattr(cos_i, "astype") else complex(a_c**-2 - cos_i**2))
    b_s = np.sqrt((a_c**-2 - cos_s**2).astype(complex) if hasattr(cos_s, "astype") else complex(a_c**-2 - cos_s**2))
    v_i = (a_rho * sin_i - b_i) / (a_rho * sin_i + b_i)
    v_s = (a_rho * sin_s - b_s) / (a_rho * sin_s + b_s)

    g = (1.0 - 1.0 / a_rho) * (cos_i * cos_s * np.cos(phi) - b_i * b_s / a_rho) + (
        1.0 - 1.0 / (a_rho * a_c**2)
    )
    amp = 0.5 * (1.0 + v_i) * (1.0 + v_s) * g

    bragg = k * np.sqrt(
        np.maximum(cos_i**2 + cos_s**2 - 2.0 * cos_i * cos_s * np.cos(phi), 0.0)
    )
    w = roughness_spectrum(sediment, bragg, cutoff_wavelength)
    sigma = k**4 * np.abs(amp) ** 2 * w
    return float(sigma) if np.ndim(sigma) == 0 else sigma


def volume_cross_section(sediment: SedimentProperties, cell_volume):
    """Volume scattering cross section sigma = 10**(Sv/10) * V, in m^2."""
    cell_volume = np.asarray(cell_volume, dtype=float)
    if np.any(cell_volume <= 0):
        raise ValueError("cell_volume must be > 0")
    sigma = 10.0 ** (sediment.volume_scattering_strength / 10.0) * cell_volume
    return float(sigma) if sigma.ndim == 0 else sigma


# ---------------------------------------------------------------------------
# Composite level
# ---------------------------------------------------------------------------
def _unit(vec):
    """Normalize along the last axis."""
    n = np.linalg.norm(vec, axis=-1, keepdims=True)
    return vec / np.maximum(n, 1e-30)


def _leg_geometry(elem_pos, points, s: Scenario):
    """Per-point geometry of the element -> point leg.

    Straight-line in water for points at z <= 0, refracted for buried
    points.  Returns travel time, total path length, per-medium lengths,
    the water-side departure direction (for directivity), and the
    water-side angle from vertical at the interface crossing.
    """
    elem_pos = np.asarray(elem_pos, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = points.shape[0]
    out = {
        "time": np.zeros(n),
        "total_length": np.zeros(n),
        "water_length": np.zeros(n),
        "sediment_length": np.zeros(n),
        "direction": np.zeros((n, 3)),
        "water_angle": np.zeros(n),
        "sediment_angle": np.zeros(n),
    }
    buried = points[:, 2] > 0
    if np.any(~buried):
        p = points[~buried]
        seg = p - elem_pos
        dist = np.linalg.norm(seg, axis=1)
        out["time"][~buried] = dist / s.water.sound_speed
        out["total_length"][~buried] = dist
        out["water_length"][~buried] = dist
        out["direction"][~buried] = _unit(seg)
        ang = np.arctan2(np.hypot(seg[:, 0], seg[:, 1]), np.abs(seg[:, 2]))
        out["water_angle"][~buried] = ang
        out["sediment_angle"][~buried] = ang
    if np.any(buried):
        p = points[buried]
        sol = prop.refracted_travel(
            elem_pos[None, :], p, s.water.sound_speed, s.sediment.sound_speed
        )
        out["time"][buried] = sol["time"]
        out["water_length"][buried] = sol["water_length"]
        out["sediment_length"][buried] = sol["sediment_length"]
        out["total_length"][buried] = sol["water_length"] + sol["sediment_length"]
        out["water_angle"][buried] = sol["incidence"]
        out["sediment_angle"][buried] = sol["refraction"]
        # departure direction along the water leg, toward the crossing point
        horiz = p[:, 0:2] - elem_pos[0:2]
        hnorm = np.linalg.norm(horiz, axis=1, keepdims=True)
        u = np.zeros((p.shape[0], 3))
        sin_a = np.sin(sol["incidence"])
        cos_a = np.cos(sol["incidence"])
        u[:, 0:2] = np.where(hnorm > 0, horiz / np.maximum(hnorm, 1e-30), 0.0) * sin_a[:, None]
        u[:, 2] = cos_a  # downward
        out["direction"][buried] = u
    return out


def _leg_amplitude(element, elem_world, points, s: Scenario, f, leg=None):
    """One-way amplitude factor of an element -> point leg (no scattering).

    Product of element directivity, interface transmission for buried
    points, and amplitude absorption; spreading is left to the caller
    because it combines across the two legs.
    """
    if leg is None:
        leg = _leg_geometry(elem_world, points, s)
    direct = prop.piston_directivity(element, f, leg["direction"], s.water.sound_speed)
    alpha_w = prop.attenuation_db_per_m(s.water, f)
    alpha_s = prop.attenuation_db_per_m(s.sediment, f)
    loss_db = alpha_w * leg["water_length"] + alpha_s * leg["sediment_length"]
    amp = direct * 10.0 ** (-loss_db / 20.0)
    buried = np.asarray(points, dtype=float).reshape(-1, 3)[:, 2] > 0
    if np.any(buried):
        # down-going transmission on the tx leg pairs with the up-going
        # coefficient on the rx leg; both are expressed from the water side
        t_down = transmission_roundtrip_half(s, leg["water_angle"][buried])
        amp = amp.astype(complex) if np.iscomplexobj(t_down) else amp
        amp[buried] = amp[buried] * t_down
    return amp, leg


def transmission_roundtrip_half(s: Scenario, water_angle):
    """Geometric mean of the down/up interface transmission pair.

    The physical round trip through the interface carries
    (1 + R)(1 - R) = 1 - R^2 at the water-side crossing angle; assigning
    sqrt(1 - R^2) to each leg preserves that product while keeping the
    composite amplitude symmetric under a tx/rx swap (reciprocity).
    """
    r = prop.flat_reflection_coeff(s.water, s.sediment, water_angle)
    return np.sqrt((1.0 - np.asarray(r) ** 2).astype(complex))


def source_amplitude(s: Scenario) -> float:
    """Peak source pressure at 1 m, linear (uPa), from the source level."""
    return 10.0 ** (s.waveform.source_level / 20.0)


def composite_with_geometry(
    field: ScattererField,
    tx_element,
    tx_world,
    rx_element,
    rx_world,
    s: Scenario,
    f,
):
    """Composite amplitudes plus the leg geometry they were built from.

    Returns ``(amp, delay, leg_tx, leg_rx)`` where the legs carry the
    per-scatterer water-side angles needed to attach image-source
    boundary factors.  The composition per scatterer is: source level,
    transmit directivity, scattering amplitude sqrt(sigma * patch),
    spherical spreading 1/(r_tx * r_rx), absorption on both legs,
    interface transmission for buried points (both crossings), receive
    directivity, and the scatterer's stochastic factor.
    """
    pts = field.positions
    amp_tx, leg_tx = _leg_amplitude(tx_element, tx_world, pts, s, f)
    amp_rx, leg_rx = _leg_amplitude(rx_element, rx_world, pts, s, f)

    sigma = np.zeros(len(field))
    mi = field.interface_mask
    if np.any(mi):
        graze_i = 0.5 * np.pi - leg_tx["water_angle"][mi]
        graze_s = 0.5 * np.pi - leg_rx["water_angle"][mi]
        # azimuth between the horizontal projections of the incident
        # propagation direction (tx -> point) and the scattered one
        # (point -> rx)
        d_in = leg_tx["direction"][mi][:, 0:2]
        d_out = -leg_rx["direction"][mi][:, 0:2]
        ni = np.linalg.norm(d_in, axis=1)
        no = np.linalg.norm(d_out, axis=1)
        cosphi = np.where(
            (ni > 1e-12) & (no > 1e-12),
            np.einsum("ij,ij->i", d_in, d_out) / np.maximum(ni * no, 1e-30),
            -1.0,  # near-vertical: backscatter convention
        )
        phi = np.arccos(np.clip(cosphi, -1.0, 1.0))
        sigma[mi] = interface_scattering_cross_section(
            s.sediment, s.water, f, graze_i, graze_s, phi
        ) * field.measures[mi]
    mv = field.volume_mask
    if np.any(mv):
        sigma[mv] = volume_cross_section(s.sediment, field.measures[mv])

    r_tx = np.maximum(leg_tx["total_length"], 1e-12)
    r_rx = np.maximum(leg_rx["total_length"], 1e-12)
    amp = (
        source_amplitude(s)
        * amp_tx
        * amp_rx
        * np.sqrt(sigma)
        / (r_tx * r_rx)
        * field.factors
    )
    return amp, leg_tx["time"] + leg_rx["time"], leg_tx, leg_rx


def composite_levels(
    field: ScattererField,
    tx_element,
    tx_world,
    rx_element,
    rx_world,
    s: Scenario,
    f,
    with_delays: bool = False,
):
    """Vectorized composite amplitude for every scatterer in ``field``."""
    amp, delay, _, _ = composite_with_geometry(
        field, tx_element, tx_world, rx_element, rx_world, s, f
    )
    if with_delays:
        return amp, delay
    return amp


def point_response(
    point,
    scattering_length,
    tx_element,
    tx_world,
    rx_element,
    rx_world,
    s: Scenario,
    f,
):
    """Amplitude and two-way delay of a deterministic point echo.

    Shares the diffuse scatterers' factor chain (directivity,
    transmission, absorption, spreading) with the scattering amplitude
    supplied directly as a length in meters.  Returns
    ``(amp, delay, leg_tx, leg_rx)``.
    """
    pts = np.asarray(point, dtype=float).reshape(1, 3)
    amp_tx, leg_tx = _leg_amplitude(tx_element, tx_world, pts, s, f)
    amp_rx, leg_rx = _leg_amplitude(rx_element, rx_world, pts, s, f)
    r_tx = max(float(leg_tx["total_length"][0]), 1e-12)
    r_rx = max(float(leg_rx["total_length"][0]), 1e-12)
    amp = (
        source_amplitude(s)
        * amp_tx[0]
        * amp_rx[0]
        * scattering_length
        / (r_tx * r_rx)
    )
    delay = float(leg_tx["time"][0] + leg_rx["time"][0])
    return amp, delay, leg_tx, leg_rx


def composite_level(
    sc: PointScatterer,
    tx_element,
    tx_world,
    rx_element,
    rx_world,
    s: Scenario,
    f,
) -> complex:
    """Composite complex amplitude of one scatterer for one tx/rx pair."""
    kind = _KIND_INTERFACE if sc.kind == "interface" else _KIND_VOLUME
    field = ScattererField(
        np.array([sc.position]),
        np.array([kind], np.int8),
        np.array([sc.patch_measure]),
        np.array([sc.stochastic_factor]),
        Box((0, 0), (0, 0)),
        0,
        0.0,
        0.0,
    )
    return complex(
        composite_levels(field, tx_element, tx_world, rx_element, rx_world, s, f)[0]
    )
