"""World model: media, geometry, sensor arrays, survey track, targets.

The scene is immutable after construction and safe to share read-only
across parallel workers.  Coordinate frame: x along-track, y cross-track,
z depth with z = 0 at the sediment-water interface and z positive down;
the air-water surface sits at z = -water_depth.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

RECEIVER_PITCH = 0.091  # m, center-to-center in both directions
PROJECTOR_PITCH = 0.229  # m, cross-track
DEFAULT_ELEMENT_WIDTH = (RECEIVER_PITCH, RECEIVER_PITCH)  # flush-mounted square piston
DEFAULT_PROJECTOR_APERTURE = 0.10  # m, circular piston
DEFAULT_PROJECTOR_STANDOFF = 0.229  # m forward of the front receiver row

TX_SCHEDULES = ("all_tx_per_location", "round_robin")


class ScenarioError(ValueError):
    """A scenario field violates one of its invariants."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class ScenarioParseError(ValueError):
    """The scenario file is malformed (bad syntax, unknown or missing keys)."""


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ScenarioError(field_name, message)


# ---------------------------------------------------------------------------
# Media
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SedimentProperties:
    """Geoacoustic parameter set for one sediment type.

    ``attenuation_at_ref`` is dB/m referenced to 20 kHz;
    ``spectral_strength`` (w2) and ``spectral_exponent`` (gamma)
    parameterize the roughness power law W(K) = w2 * K**-gamma;
    ``volume_scattering_strength`` is dB/m.
    """

    density: float
    sound_speed: float
    attenuation_at_ref: float
    spectral_strength: float
    spectral_exponent: float
    volume_scattering_strength: float

    def __post_init__(self):
        _require(self.density > 0, "density", "must be > 0")
        _require(self.sound_speed > 0, "sound_speed", "must be > 0")
        _require(self.attenuation_at_ref >= 0, "attenuation_at_ref", "must be >= 0")
        _require(self.spectral_strength > 0, "spectral_strength", "must be > 0")
        _require(
            2.0 < self.spectral_exponent < 4.0,
            "spectral_exponent",
            "must lie in (2, 4) for an integrable power-law spectrum",
        )
        _require(
            math.isfinite(self.volume_scattering_strength),
            "volume_scattering_strength",
            "must be finite",
        )


# Standard high-frequency geoacoustic values for the two bottom types used
# throughout the shipped scenarios.
MEDIUM_SAND = SedimentProperties(1845.0, 1767.0, 10.0, 1.410e-4, 3.25, -20.0)
VERY_FINE_SILT = SedimentProperties(1147.0, 1476.0, 1.4, 1.638e-5, 3.25, -28.6)


@dataclass(frozen=True)
class WaterProperties:
    """Water column properties; attenuation defaults to 0 (negligible here)."""

    density: float = 1000.0
    sound_speed: float = 1480.0
    attenuation_at_ref: float = 0.0

    def __post_init__(self):
        _require(self.density > 0, "density", "must be > 0")
        _require(self.sound_speed > 0, "sound_speed", "must be > 0")
        _require(self.attenuation_at_ref >= 0, "attenuation_at_ref", "must be >= 0")


@dataclass(frozen=True)
class BuriedLayer:
    """Optional deeper layer boundary below the interface."""

    depth_below_interface: float
    lower_medium: SedimentProperties

    def __post_init__(self):
        _require(
            self.depth_below_interface > 0,
            "buried_layer.depth_below_interface",
            "must be > 0",
        )


@dataclass(frozen=True)
class SceneGeometry:
    water_depth: float
    sensor_altitude: float
    interface_rms_roughness: float = 0.0
    buried_layer: BuriedLayer | None = None

    def __post_init__(self):
        _require(self.water_depth > 0, "water_depth", "must be > 0")
        _require(
            0 < self.sensor_altitude < self.water_depth,
            "sensor_altitude",
            "must satisfy 0 < sensor_altitude < water_depth",
        )
        _require(
            self.interface_rms_roughness >= 0,
            "interface_rms_roughness",
            "must be >= 0",
        )


# ---------------------------------------------------------------------------
# Arrays
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Receiver:
    id: int
    offset: tuple[float, float, float]
    element_width: tuple[float, float] = DEFAULT_ELEMENT_WIDTH


@dataclass(frozen=True)
class Projector:
    id: int
    offset: tuple[float, float, float]
    aperture_diameter: float = DEFAULT_PROJECTOR_APERTURE


@dataclass(frozen=True)
class ArrayGeometry:
    """Receive and transmit element layout relative to the pose anchor."""

    receivers: tuple[Receiver, ...]
    projectors: tuple[Projector, ...]
    anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)
    layout: tuple = ()  # constructor descriptor, used for serialization

    def __post_init__(self):
        ids = [r.id for r in self.receivers]
        _require(len(set(ids)) == len(ids), "receivers", "ids must be unique")
        pids = [p.id for p in self.projectors]
        _require(len(set(pids)) == len(pids), "projectors", "ids must be unique")
        zs = {r.offset[2] for r in self.receivers} | {
            p.offset[2] for p in self.projectors
        }
        _require(len(zs) <= 1, "array", "all elements must share one z offset")

    def receiver_offsets(self) -> np.ndarray:
        return np.array([r.offset for r in self.receivers], dtype=float)

    def projector_offsets(self) -> np.ndarray:
        return np.array([p.offset for p in self.projectors], dtype=float)

    def projector(self, tx_id: int) -> Projector:
        for p in self.projectors:
            if p.id == tx_id:
                return p
        raise KeyError(f"no projector with id {tx_id}")


def _centered(n: int, pitch: float) -> np.ndarray:
    return (np.arange(n) - (n - 1) / 2.0) * pitch


def build_rect_array(
    n_along: int,
    n_cross: int,
    pitch: float = RECEIVER_PITCH,
    n_projectors: int = 5,
    projector_pitch: float = PROJECTOR_PITCH,
    projector_standoff: float = DEFAULT_PROJECTOR_STANDOFF,
) -> ArrayGeometry:
    """Fully populated rectangular receive grid with projectors forward of it."""
    xs = _centered(n_along, pitch)
    ys = _centered(n_cross, pitch)
    receivers = []
    rid = 0
    for xi in xs:
        for yi in ys:
            receivers.append(Receiver(rid, (float(xi), float(yi), 0.0)))
            rid += 1
    tx_x = float(xs[-1] + projector_standoff) if len(xs) else projector_standoff
    projectors = tuple(
        Projector(j, (tx_x, float(yj), 0.0))
        for j, yj in enumerate(_centered(n_projectors, projector_pitch))
    )
    return ArrayGeometry(
        receivers=tuple(receivers),
        projectors=projectors,
        layout=("rect", n_along, n_cross, pitch, n_projectors, projector_pitch),
    )


def build_modeled_array() -> ArrayGeometry:
    """The design-study array: 4 (along) x 8 (cross) receivers, 5 projectors."""
    arr = build_rect_array(4, 8)
    return replace(arr, layout=("modeled",))


def build_field_array() -> ArrayGeometry:
    """The as-built 80-channel array.

    Aft section of 4 x 12 receivers plus a forward section of 4 x 8, both
    at 9.1 cm pitch, separated by one skipped row so the receive grid
    spans 8 * 0.091 = 0.728 m along-track; 6 projectors forward.
    """
    pitch = RECEIVER_PITCH
    rows_aft = np.arange(4)
    rows_fwd = np.arange(5, 9)
    ys12 = _centered(12, pitch)
    ys8 = _centered(8, pitch)
    x_all = np.concatenate([rows_aft, rows_fwd]) * pitch
    x_mid = 0.5 * (x_all.min() + x_all.max())
    receivers = []
    rid = 0
    for row in rows_aft:
        for yj in ys12:
            receivers.append(Receiver(rid, (float(row * pitch - x_mid), float(yj), 0.0)))
            rid += 1
    for row in rows_fwd:
        for yj in ys8:
            receivers.append(Receiver(rid, (float(row * pitch - x_mid), float(yj), 0.0)))
            rid += 1
    tx_x = float(rows_fwd[-1] * pitch - x_mid + DEFAULT_PROJECTOR_STANDOFF)
    projectors = tuple(
        Projector(j, (tx_x, float(yj), 0.0))
        for j, yj in enumerate(_centered(6, PROJECTOR_PITCH))
    )
    return ArrayGeometry(
        receivers=tuple(receivers), projectors=projectors, layout=("field",)
    )


_ARRAY_BUILDERS = {
    "modeled": build_modeled_array,
    "field": build_field_array,
}


# ---------------------------------------------------------------------------
# Targets, track, model configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TargetSpec:
    """One deployed target.  z >= 0 is buried, z < 0 proud/in-water."""

    kind: str  # sphere | cylinder | point
    position: tuple[float, float, float]
    radius: float = 0.0
    length: float = 0.0
    orientation: float | None = None  # yaw about z, radians (cylinders)
    fixed_ts_override: float | None = None

    def __post_init__(self):
        _require(self.kind in ("sphere", "cylinder", "point"), "kind", "unknown target kind")
        if self.kind == "sphere":
            _require(self.radius > 0, "radius", "must be > 0 for spheres")
        if self.kind == "cylinder":
            _require(self.radius > 0, "radius", "must be > 0 for cylinders")
            _require(self.length > 0, "length", "must be > 0 for cylinders")
        if self.kind == "point":
            _require(
                self.fixed_ts_override is not None,
                "fixed_ts_override",
                "point targets need an explicit target strength",
            )


@dataclass(frozen=True)
class TrackConfig:
    ping_count: int
    along_track_advance: float = RECEIVER_PITCH
    tx_schedule: str = "all_tx_per_location"

    def __post_init__(self):
        _require(self.ping_count >= 1, "ping_count", "must be >= 1")
        _require(self.along_track_advance > 0, "along_track_advance", "must be > 0")
        _require(
            self.tx_schedule in TX_SCHEDULES,
            "tx_schedule",
            f"must be one of {TX_SCHEDULES}",
        )


@dataclass(frozen=True)
class WaveformConfig:
    """Transmit waveform description (defaults are implementer assumptions)."""

    kind: str = "lfm"
    f_start: float = 10e3
    f_stop: float = 40e3
    duration: float = 0.010
    sample_rate: float = 100e3
    source_level: float = 190.0  # dB re 1 uPa at 1 m
    taper: float = 0.1  # cosine (Tukey) fraction of the envelope
    record_start: float | None = None  # override, seconds
    record_duration: float | None = None  # override, seconds

    def __post_init__(self):
        _require(self.kind == "lfm", "kind", "only 'lfm' is supported")
        _require(self.duration > 0, "duration", "must be > 0")
        _require(
            1e3 <= self.f_start < self.f_stop <= 100e3,
            "f_start",
            "band must satisfy 1 kHz <= f_start < f_stop <= 100 kHz",
        )
        _require(
            self.sample_rate > 2 * self.f_stop,
            "sample_rate",
            "must exceed twice f_stop",
        )
        _require(0.0 <= self.taper <= 1.0, "taper", "must lie in [0, 1]")

    @property
    def center_frequency(self) -> float:
        return 0.5 * (self.f_start + self.f_stop)

    @property
    def bandwidth(self) -> float:
        return self.f_stop - self.f_start


@dataclass(frozen=True)
class NoiseConfig:
    """Interference model switches: ambient noise, multipath, coherent bottom."""

    ambient: bool = True
    sea_state: float = 3
    multipath_order: int = 2
    coherent_reflection: bool = True

    def __post_init__(self):
        _require(self.multipath_order >= 0, "multipath_order", "must be >= 0")


@dataclass(frozen=True)
class ScatteringConfig:
    """Scatterer realization densities; a density of 0 disables that class."""

    interface_density: float = 250.0  # per m^2
    volume_density: float = 500.0  # per m^3
    volume_truncation_depth: float = 3.0  # m below the interface
    min_per_cell: float = 10.0  # advisory minimum expected count per cell

    def __post_init__(self):
        _require(self.interface_density >= 0, "interface_density", "must be >= 0")
        _require(self.volume_density >= 0, "volume_density", "must be >= 0")
        _require(
            self.volume_truncation_depth > 0,
            "volume_truncation_depth",
            "must be > 0",
        )


@dataclass(frozen=True)
class Scenario:
    """Complete simulation description; immutable and hashable by content."""

    geometry: SceneGeometry
    sediment: SedimentProperties
    track: TrackConfig
    water: WaterProperties = field(default_factory=WaterProperties)
    array: ArrayGeometry = field(default_factory=build_modeled_array)
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    scattering: ScatteringConfig = field(default_factory=ScatteringConfig)
    targets: tuple[TargetSpec, ...] = ()
    rng_seed: int = 0

    def content_hash(self) -> str:
        """SHA-256 over the canonical repr; stable for identical scenarios."""
        return hashlib.sha256(repr(self).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Survey schedule
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TransmitEvent:
    """One transmit: pose of the array anchor plus the active projector."""

    index: int
    location_index: int
    tx_id: int
    pose: tuple[float, float, float]


def ping_poses(s: Scenario) -> list[TransmitEvent]:
    """Straight-line track along +x; one event per (location, active TX)."""
    z = -s.geometry.sensor_altitude
    tx_ids = [p.id for p in s.array.projectors]
    events = []
    idx = 0
    for loc in range(s.track.ping_count):
        pose = (loc * s.track.along_track_advance, 0.0, z)
        if s.track.tx_schedule == "all_tx_per_location":
            active = tx_ids
        else:  # round_robin
            active = [tx_ids[loc % len(tx_ids)]]
        for tx in active:
            events.append(TransmitEvent(idx, loc, tx, pose))
            idx += 1
    return events


def survey_tallies(s: Scenario) -> dict[str, int]:
    """Bookkeeping counts for the schedule.

    ``series_per_tx`` is locations x receivers (the per-projector tally);
    ``total_series`` multiplies in the transmitter count.  Both are
    reported because the two conventions circulate for the same survey.
    """
    n_rx = len(s.array.receivers)
    n_tx = len(s.array.projectors)
    n_loc = s.track.ping_count
    events = n_loc * (n_tx if s.track.tx_schedule == "all_tx_per_location" else 1)
    return {
        "ping_locations": n_loc,
        "transmitters": n_tx,
        "receivers": n_rx,
        "transmit_events": events,
        "series_per_tx": n_loc * n_rx,
        "total_series": events * n_rx,
    }


# ---------------------------------------------------------------------------
# Scenario file format
# ---------------------------------------------------------------------------
# Structured text with nested sections.  Keys are exactly the field names
# of the types above, SI units throughout.  Unknown keys are an error.

_SECTION_FIELDS = {
    "geometry": {"water_depth", "sensor_altitude", "interface_rms_roughness"},
    "geometry.buried_layer": {
        "depth_below_interface",
        "density",
        "sound_speed",
        "attenuation_at_ref",
        "spectral_strength",
        "spectral_exponent",
        "volume_scattering_strength",
    },
    "water": {"density", "sound_speed", "attenuation_at_ref"},
    "sediment": {
        "density",
        "sound_speed",
        "attenuation_at_ref",
        "spectral_strength",
        "spectral_exponent",
        "volume_scattering_strength",
    },
    "array": {
        "layout",
        "n_along",
        "n_cross",
        "pitch",
        "n_projectors",
        "projector_pitch",
    },
    "track": {"ping_count", "along_track_advance", "tx_schedule"},
    "waveform": {
        "kind",
        "f_start",
        "f_stop",
        "duration",
        "sample_rate",
        "source_level",
        "taper",
        "record_start",
        "record_duration",
    },
    "noise": {"ambient", "sea_state", "multipath_order", "coherent_reflection"},
    "scattering": {
        "rng_seed",
        "interface_density",
        "volume_density",
        "volume_truncation_depth",
        "min_per_cell",
    },
}
_TARGET_FIELDS = {
    "kind",
    "position",
    "radius",
    "length",
    "orientation",
    "fixed_ts_override",
}


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ScenarioParseError(f"[{section}] {key}: not a number: {raw!r}") from exc


def _parse_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ScenarioParseError(f"[{section}] {key}: not a boolean: {raw!r}")


def _parse_vec3(section: str, key: str, raw: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise ScenarioParseError(f"[{section}] {key}: expected 'x, y, z': {raw!r}")
    return tuple(_parse_float(section, key, p) for p in parts)  # type: ignore[return-value]


def _section_dict(cp: configparser.ConfigParser, name: str) -> dict[str, str]:
    if not cp.has_section(name):
        return {}
    allowed = _SECTION_FIELDS[name]
    items = dict(cp.items(name))
    unknown = set(items) - allowed
    if unknown:
        raise ScenarioParseError(
            f"[{name}]: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )
    return items


def _floats(section: str, items: dict[str, str], cls, **extra):
    kwargs = {k: _parse_float(section, k, v) for k, v in items.items()}
    kwargs.update(extra)
    return cls(**kwargs)


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; see ``serialize_scenario`` for the grammar."""
    cp = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, strict=True
    )
    cp.optionxform = str  # keys are case-sensitive field names
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioParseError(f"malformed scenario file: {exc}") from exc

    target_sections = {}
    for name in cp.sections():
        if name.startswith("targets."):
            tail = name.split(".", 1)[1]
            if not tail.isdigit():
                raise ScenarioParseError(f"[{name}]: target sections are [targets.N]")
            target_sections[int(tail)] = name
        elif name not in _SECTION_FIELDS:
            raise ScenarioParseError(f"unknown section [{name}]")

    geo_items = _section_dict(cp, "geometry")
    if "water_depth" not in geo_items or "sensor_altitude" not in geo_items:
        raise ScenarioParseError("[geometry]: water_depth and sensor_altitude are required")
    layer = None
    layer_items = _section_dict(cp, "geometry.buried_layer")
    if layer_items:
        if "depth_below_interface" not in layer_items:
            raise ScenarioParseError(
                "[geometry.buried_layer]: depth_below_interface is required"
            )
        depth = _parse_float(
            "geometry.buried_layer",
            "depth_below_interface",
            layer_items.pop("depth_below_interface"),
        )
        layer = BuriedLayer(
            depth, _floats("geometry.buried_layer", layer_items, SedimentProperties)
        )
    geometry = _floats("geometry", geo_items, SceneGeometry, buried_layer=layer)

    water = _floats("water", _section_dict(cp, "water"), WaterProperties)

    sed_items = _section_dict(cp, "sediment")
    if not sed_items:
        raise ScenarioParseError("[sediment] section is required")
    sediment = _floats("sediment", sed_items, SedimentProperties)

    arr_items = _section_dict(cp, "array")
    layout = arr_items.pop("layout", "modeled")
    if layout in _ARRAY_BUILDERS:
        if arr_items:
            raise ScenarioParseError(
                f"[array]: keys {sorted(arr_items)} only apply to layout = rect"
            )
        array = _ARRAY_BUILDERS[layout]()
    elif layout == "rect":
        kw = {}
        for key in ("n_along", "n_cross", "n_projectors"):
            if key in arr_items:
                kw[key] = int(_parse_float("array", key, arr_items.pop(key)))
        for key in ("pitch", "projector_pitch"):
            if key in arr_items:
                kw[key] = _parse_float("array", key, arr_items.pop(key))
        if "n_along" not in kw or "n_cross" not in kw:
            raise ScenarioParseError("[array]: rect layout requires n_along and n_cross")
        array = build_rect_array(**kw)
    else:
        raise ScenarioParseError(f"[array]: unknown layout {layout!r}")

    track_items = _section_dict(cp, "track")
    if "ping_count" not in track_items:
        raise ScenarioParseError("[track]: ping_count is required")
    track_kw: dict = {"ping_count": int(_parse_float("track", "ping_count", track_items["ping_count"]))}
    if "along_track_advance" in track_items:
        track_kw["along_track_advance"] = _parse_float(
            "track", "along_track_advance", track_items["along_track_advance"]
        )
    if "tx_schedule" in track_items:
        track_kw["tx_schedule"] = track_items["tx_schedule"].strip()
    track = TrackConfig(**track_kw)

    wf_items = _section_dict(cp, "waveform")
    wf_kw: dict = {}
    for key, raw in wf_items.items():
        if key == "kind":
            wf_kw[key] = raw.strip()
        else:
            wf_kw[key] = _parse_float("waveform", key, raw)
    waveform = WaveformConfig(**wf_kw)

    noise_items = _section_dict(cp, "noise")
    noise_kw: dict = {}
    if "ambient" in noise_items:
        noise_kw["ambient"] = _parse_bool("noise", "ambient", noise_items["ambient"])
    if "coherent_reflection" in noise_items:
        noise_kw["coherent_reflection"] = _parse_bool(
            "noise", "coherent_reflection", noise_items["coherent_reflection"]
        )
    if "sea_state" in noise_items:
        noise_kw["sea_state"] = _parse_float("noise", "sea_state", noise_items["sea_state"])
    if "multipath_order" in noise_items:
        noise_kw["multipath_order"] = int(
            _parse_float("noise", "multipath_order", noise_items["multipath_order"])
        )
    noise = NoiseConfig(**noise_kw)

    sc_items = _section_dict(cp, "scattering")
    rng_seed = 0
    if "rng_seed" in sc_items:
        rng_seed = int(_parse_float("scattering", "rng_seed", sc_items.pop("rng_seed")))
    scattering = _floats("scattering", sc_items, ScatteringConfig)

    targets = []
    for n in sorted(target_sections):
        name = target_sections[n]
        items = dict(cp.items(name))
        unknown = set(items) - _TARGET_FIELDS
        if unknown:
            raise ScenarioParseError(f"[{name}]: unknown key(s) {sorted(unknown)}")
        if "kind" not in items or "position" not in items:
            raise ScenarioParseError(f"[{name}]: kind and position are required")
        kw: dict = {
            "kind": items["kind"].strip(),
            "position": _parse_vec3(name, "position", items["position"]),
        }
        for key in ("radius", "length", "orientation", "fixed_ts_override"):
            if key in items:
                kw[key] = _parse_float(name, key, items[key])
        targets.append(TargetSpec(**kw))

    return Scenario(
        geometry=geometry,
        water=water,
        sediment=sediment,
        array=array,
        track=track,
        waveform=waveform,
        noise=noise,
        scattering=scattering,
        targets=tuple(targets),
        rng_seed=rng_seed,
    )


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(s: Scenario) -> str:
    """Render a Scenario back to its file form (full float precision).

    Round trip: ``parse_scenario(serialize_scenario(s))`` equals ``s``
    field for field, provided the array was built by a named constructor.
    """
    if not s.array.layout:
        raise ScenarioError("array", "custom arrays have no serializable layout")
    out = io.StringIO()

    def sec(name, pairs):
        out.write(f"[{name}]\n")
        for k, v in pairs:
            if v is None:
                continue
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            elif isinstance(v, tuple):
                v = ", ".join(repr(float(c)) for c in v)
            out.write(f"{k} = {v}\n")
        out.write("\n")

    g = s.geometry
    sec(
        "geometry",
        [
            ("water_depth", g.water_depth),
            ("sensor_altitude", g.sensor_altitude),
            ("interface_rms_roughness", g.interface_rms_roughness),
        ],
    )
    if g.buried_layer is not None:
        lm = g.buried_layer.lower_medium
        sec(
            "geometry.buried_layer",
            [("depth_below_interface", g.buried_layer.depth_below_interface)]
            + [(f.name, getattr(lm, f.name)) for f in fields(lm)],
        )
    sec("water", [(f.name, getattr(s.water, f.name)) for f in fields(s.water)])
    sec("sediment", [(f.name, getattr(s.sediment, f.name)) for f in fields(s.sediment)])
    layout = s.array.layout
    if layout[0] == "rect":
        sec(
            "array",
            [
                ("layout", "rect"),
                ("n_along", layout[1]),
                ("n_cross", layout[2]),
                ("pitch", layout[3]),
                ("n_projectors", layout[4]),
                ("projector_pitch", layout[5]),
            ],
        )
    else:
        sec("array", [("layout", layout[0])])
    sec(
        "track",
        [
            ("ping_count", s.track.ping_count),
            ("along_track_advance", s.track.along_track_advance),
            ("tx_schedule", s.track.tx_schedule),
        ],
    )
    sec("waveform", [(f.name, getattr(s.waveform, f.name)) for f in fields(s.waveform)])
    sec("noise", [(f.name, getattr(s.noise, f.name)) for f in fields(s.noise)])
    sec(
        "scattering",
        [("rng_seed", s.rng_seed)]
        + [(f.name, getattr(s.scattering, f.name)) for f in fields(s.scattering)],
    )
    for i, t in enumerate(s.targets):
        pairs = [("kind", t.kind), ("position", t.position)]
        if t.kind in ("sphere", "cylinder"):
            pairs.append(("radius", t.radius))
        if t.kind == "cylinder":
            pairs.append(("length", t.length))
        if t.orientation is not None:
            pairs.append(("orientation", t.orientation))
        if t.fixed_ts_override is not None:
            pairs.append(("fixed_ts_override", t.fixed_ts_override))
        sec(f"targets.{i}", pairs)
    return out.getvalue()


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scenario(s))
