"""Waveform definition, per-ping time-series assembly, matched filtering.

Each receiver's raw record is the real part of a sum of analytic
waveform replicas: one per (contributor, transmit-image, receive-image)
combination, where contributors are the diffuse scatterers, the target
point responses, and the coherent interface reflections, plus ambient
Gaussian noise.  Replicas are placed on a 4x-oversampled delay grid
(nearest bin) and convolved once per component, which keeps fractional
delay errors far below the waveform resolution at a tiny fixed cost.

Contributions are synthesized component by component and summed, so the
series of (targets + scatterers) is bitwise the sum of the separately
synthesized series.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.signal.windows import tukey

from . import propagation as prop
from . import scatterfield as sf
from . import targetmodel as tm
from .scene import Scenario, TransmitEvent, WaveformConfig, ping_poses

DELAY_GRID_OVERSAMPLE = 4
_NOISE_DOMAIN = 7

PING_MAGIC = b"SBSPING1"
PING_VERSION = 1
_KIND_CODES = {"raw": 0, "analytic": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


class RecordLengthError(ValueError):
    """An echo's travel time falls outside the receiver record window."""


class PingFileError(ValueError):
    """A ping record file is missing, truncated, or malformed."""


# ---------------------------------------------------------------------------
# Waveform
# ---------------------------------------------------------------------------
@dataclass(eq=False)
class Waveform:
    """Sampled transmit waveform.

    ``samples`` is the real passband series at ``config.sample_rate``
    with peak amplitude scaled to the source level (linear uPa at 1 m).
    """

    config: WaveformConfig
    samples: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.config.sample_rate

    def unit_analytic(self, oversample: int = 1) -> np.ndarray:
        """Unit-envelope analytic replica, optionally on a finer grid."""
        return _analytic_lfm(self.config, oversample)


def _analytic_lfm(cfg: WaveformConfig, oversample: int = 1) -> np.ndarray:
    fs = cfg.sample_rate * oversample
    n = int(round(cfg.duration * fs))
    t = np.arange(n) / fs
    rate = (cfg.f_stop - cfg.f_start) / cfg.duration
    phase = 2.0 * np.pi * (cfg.f_start * t + 0.5 * rate * t**2)
    env = tukey(n, alpha=cfg.taper) if cfg.taper > 0 else np.ones(n)
    return env * np.exp(1j * phase)


def make_waveform(config: WaveformConfig) -> Waveform:
    """Sample the configured LFM; invalid band/rate combinations raise."""
    raw = np.real(_analytic_lfm(config))
    peak = np.max(np.abs(raw))
    amp = 10.0 ** (config.source_level / 20.0)
    return Waveform(config, raw * (amp / peak))


# ---------------------------------------------------------------------------
# Record window and survey footprint
# ---------------------------------------------------------------------------
def survey_extent(s: Scenario, margin: float = 1.6) -> sf.Box:
    """Scatterer-generation footprint covering the ensonified region.

    Horizontal reach is the receive element's first-null cone at band
    center, widened by ``margin``; depth spans the configured volume
    truncation.
    """
    lam = s.water.sound_speed / s.waveform.center_frequency
    width = s.array.receivers[0].element_width[0]
    sin_null = min(0.95, lam / width)
    reach = s.geometry.sensor_altitude * np.tan(np.arcsin(sin_null)) * margin
    offs = s.array.receiver_offsets()
    half_x = float(np.max(np.abs(offs[:, 0]))) if len(offs) else 0.0
    half_y = float(np.max(np.abs(offs[:, 1]))) if len(offs) else 0.0
    track_len = (s.track.ping_count - 1) * s.track.along_track_advance
    return sf.Box(
        x=(-reach - half_x, track_len + reach + half_x),
        y=(-reach - half_y, reach + half_y),
        z=(0.0, s.scattering.volume_truncation_depth),
    )


def record_window(s: Scenario, extent: sf.Box | None = None) -> tuple[float, float]:
    """Receiver record window (start, end) in seconds after transmit.

    Starts one pulse length before the first bottom return and ends when
    the slowest enumerated contribution (deepest image source to the far
    extent corner, plus the sediment crossing) has fully arrived.
    Explicit waveform overrides win.
    """
    cfg = s.waveform
    c_w = s.water.sound_speed
    alt = s.geometry.sensor_altitude
    if extent is None:
        extent = survey_extent(s)
    t0 = max(0.0, 2.0 * alt / c_w - cfg.duration)
    # deepest image of any element for the configured multipath ceiling
    order = s.noise.multipath_order + 1 if s.noise.coherent_reflection else s.noise.multipath_order
    images = prop.enumerate_image_sources((0.0, 0.0, -alt), s.geometry, max(order, 0))
    z_high = min(im.position[2] for im in images)  # most negative
    corners = [
        (x, y)
        for x in extent.x
        for y in extent.y
    ]
    track_len = (s.track.ping_count - 1) * s.track.along_track_advance
    worst = 0.0
    for cx, cy in corners:
        horiz = max(abs(cx), abs(cx - track_len)) + abs(cy)
        slant = np.hypot(horiz, abs(z_high))
        worst = max(worst, slant)
    t_leg = worst / c_w + extent.z[1] / s.sediment.sound_speed
    t1 = 2.0 * t_leg + cfg.duration
    if cfg.record_start is not None:
        t0 = cfg.record_start
    if cfg.record_duration is not None:
        t1 = t0 + cfg.record_duration
    return t0, t1


# ---------------------------------------------------------------------------
# Ping record
# ---------------------------------------------------------------------------
@dataclass(eq=False)
class PingRecord:
    """One transmit event's per-receiver sampled series.

    ``samples`` is (n_receivers, n_samples): real float64 for raw
    records, complex128 for pulse-compressed analytic records.
    """

    index: int
    location_index: int
    tx_id: int
    pose: tuple[float, float, float]
    sample_rate: float
    start_time: float
    samples: np.ndarray
    kind: str = "raw"
    seed: int = 0

    @property
    def sample_count(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.sample_count) / self.sample_rate


_HEADER_FMT = "<8sIIII6dddIIIq"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)


def write_ping_record(rec: PingRecord, path) -> None:
    """Little-endian binary ping file; float32 payload (re, im pairs when
    analytic)."""
    header = struct.pack(
        _HEADER_FMT,
        PING_MAGIC,
        PING_VERSION,
        rec.index,
        rec.tx_id,
        rec.location_index,
        rec.pose[0],
        rec.pose[1],
        rec.pose[2],
        0.0,
        0.0,
        0.0,
        rec.sample_rate,
        rec.start_time,
        rec.samples.shape[0],
        rec.samples.shape[1],
        _KIND_CODES[rec.kind],
        rec.seed,
    )
    if rec.kind == "raw":
        payload = rec.samples.astype("<f4").tobytes()
    else:
        inter = np.empty((rec.samples.shape[0], rec.samples.shape[1] * 2), dtype="<f4")
        inter[:, 0::2] = rec.samples.real
        inter[:, 1::2] = rec.samples.imag
        payload = inter.tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_ping_record(path) -> PingRecord:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER_SIZE)
        if len(head) < _HEADER_SIZE:
            raise PingFileError(f"{path}: truncated header")
        (
            magic,
            version,
            index,
            tx_id,
            location,
            px,
            py,
            pz,
            _roll,
            _pitch,
            _yaw,
            fs,
            t0,
            n_rx,
            n_samp,
            kind_code,
            seed,
        ) = struct.unpack(_HEADER_FMT, head)
        if magic != PING_MAGIC:
            raise PingFileError(f"{path}: bad magic {magic!r}")
        if version != PING_VERSION or kind_code not in _KIND_NAMES:
            raise PingFileError(f"{path}: unsupported version/kind")
        kind = _KIND_NAMES[kind_code]
        per = 2 if kind == "analytic" else 1
        data = np.frombuffer(fh.read(n_rx * n_samp * per * 4), dtype="<f4")
        if data.size != n_rx * n_samp * per:
            raise PingFileError(f"{path}: truncated payload")
    if kind == "raw":
        samples = data.reshape(n_rx, n_samp).astype(np.float64)
    else:
        inter = data.reshape(n_rx, n_samp * 2)
        samples = (inter[:, 0::2] + 1j * inter[:, 1::2]).astype(np.complex128)
    return PingRecord(
        index, location, tx_id, (px, py, pz), fs, t0, samples, kind, seed
    )


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------
def _subband_replicas(cfg: WaveformConfig, n_subbands: int):
    """(center frequency, analytic oversampled replica) per subband.

    With one subband the replica is used untouched; otherwise its
    positive-frequency spectrum is partitioned at the interior band
    edges, which sums exactly back to the full replica.
    """
    full = _analytic_lfm(cfg, DELAY_GRID_OVERSAMPLE)
    if n_subbands <= 1:
        return [(cfg.center_frequency, full)]
    fs = cfg.sample_rate * DELAY_GRID_OVERSAMPLE
    n = len(full)
    freqs = np.fft.fftfreq(n, 1.0 / fs)
    spec = np.fft.fft(full)
    edges = np.linspace(cfg.f_start, cfg.f_stop, n_subbands + 1)
    out = []
    for k in range(n_subbands):
        lo = -np.inf if k == 0 else edges[k]
        hi = np.inf if k == n_subbands - 1 else edges[k + 1]
        mask = (freqs >= lo) & (freqs < hi)
        out.append(
            (0.5 * (edges[k] + edges[k + 1]), np.fft.ifft(spec * mask))
        )
    return out


def _boundary_factors(images_angle_pairs, s: Scenario, f):
    """Product of per-bounce boundary reflections for an image-source leg.

    ``images_angle_pairs`` is (image, water_angle_array); surface bounces
    contribute -1 each, seabed bounces the roughness-attenuated coherent
    coefficient at the leg's water-side angle (shared by all bounces of
    one image in the parallel-plane geometry).
    """
    total = 1.0
    for image, angle in images_angle_pairs:
        if image.order == 0:
            continue
        factor = image.surface_factor
        if image.n_bottom:
            flat = prop.flat_reflection_coeff(s.water, s.sediment, angle)
            coh = prop.eckart_coherent_coeff(
                flat, f, s.geometry.interface_rms_roughness, angle, s.water.sound_speed
            )
            factor = factor * coh**image.n_bottom
        total = total * factor
    return total


def _scene_images(world_pos, s: Scenario):
    """Element images that can reach points on/below the interface."""
    images = prop.enumerate_image_sources(world_pos, s.geometry, s.noise.multipath_order)
    return [im for im in images if im.position[2] < 0.0]


def _diffuse_contributions(s, field, tx_el, tx_world, rx_el, rx_world, f):
    """Delays and amplitudes of every scatterer echo, multipath included.

    The multipath ceiling caps the image order on each side, so order 1
    yields the (direct, tx-image, rx-image, both-images) replica set.
    """
    delays, amps = [], []
    for im_tx in _scene_images(tx_world, s):
        for im_rx in _scene_images(rx_world, s):
            amp, delay, leg_tx, leg_rx = sf.composite_with_geometry(
                field, tx_el, im_tx.position, rx_el, im_rx.position, s, f
            )
            amp = amp * _boundary_factors(
                [(im_tx, leg_tx["water_angle"]), (im_rx, leg_rx["water_angle"])], s, f
            )
            delays.append(delay)
            amps.append(amp)
    if not delays:
        return np.empty(0), np.empty(0, dtype=complex)
    return np.concatenate(delays), np.concatenate(amps).astype(complex)


def _target_images(world_pos, s: Scenario, target_z: float):
    images = prop.enumerate_image_sources(world_pos, s.geometry, s.noise.multipath_order)
    if target_z >= 0.0:
        return [im for im in images if im.position[2] < 0.0]
    return images


def _target_contributions(s, tx_el, tx_world, rx_el, rx_world, f):
    delays, amps = [], []
    for tgt in s.targets:
        for im_tx in _target_images(tx_world, s, tgt.position[2]):
            for im_rx in _target_images(rx_world, s, tgt.position[2]):
                echo = tm.target_echoes(
                    tgt, im_tx.position, im_rx.position, f, s.water.sound_speed
                )[0]
                amp, delay, leg_tx, leg_rx = sf.point_response(
                    echo.position,
                    echo.scattering_length,
                    tx_el,
                    im_tx.position,
                    rx_el,
                    im_rx.position,
                    s,
                    f,
                )
                amp = amp * _boundary_factors(
                    [
                        (im_tx, leg_tx["water_angle"][0]),
                        (im_rx, leg_rx["water_angle"][0]),
                    ],
                    s,
                    f,
                )
                delays.append(delay)
                amps.append(complex(amp))
    return np.asarray(delays, dtype=float), np.asarray(amps, dtype=complex)


def _coherent_contributions(s, tx_el, tx_world, rx_el, rx_world, f):
    """Specular interface replicas: transmit images heard directly.

    Every image chain containing at least one seabed reflection, with at
    most ``multipath_order`` bounces beyond that primary one, arrives at
    the receiver as a mirror replica attenuated by the coherent
    reflection coefficient per seabed bounce (surface bounces flip sign,
    lossless).  Pure-surface paths and the direct blast are gated out.
    """
    if not s.noise.coherent_reflection:
        return np.empty(0), np.empty(0, dtype=complex)
    delays, amps = [], []
    rx_world = np.asarray(rx_world, dtype=float)
    images = prop.enumerate_image_sources(
        tx_world, s.geometry, s.noise.multipath_order + 1
    )
    src = sf.source_amplitude(s)
    alpha_w = prop.attenuation_db_per_m(s.water, f)
    for im in images:
        if im.n_bottom < 1 or (im.order - 1) > s.noise.multipath_order:
            continue
        seg = rx_world - np.asarray(im.position)
        dist = float(np.linalg.norm(seg))
        u = seg / max(dist, 1e-30)
        angle = float(np.arctan2(np.hypot(seg[0], seg[1]), abs(seg[2])))
        d_tx = prop.piston_directivity(tx_el, f, u, s.water.sound_speed)
        d_rx = prop.piston_directivity(rx_el, f, u, s.water.sound_speed)
        amp = (
            src
            * d_tx
            * d_rx
            * _boundary_factors([(im, angle)], s, f)
            / max(dist, 1e-12)
            * 10.0 ** (-(alpha_w * dist) / 20.0)
        )
        delays.append(dist / s.water.sound_speed)
        amps.append(complex(amp))
    return np.asarray(delays, dtype=float), np.asarray(amps, dtype=complex)


def _spray_and_convolve(delays, amps, replica, t0, t1, fs_os, n_os, n_out):
    """Place echo amplitudes on the oversampled delay grid and convolve."""
    if delays.size == 0:
        return np.zeros(n_out)
    if np.any(delays < t0 - 1e-12) or np.any(delays > t1 + 1e-12):
        bad = delays[(delays < t0 - 1e-12) | (delays > t1 + 1e-12)]
        raise RecordLengthError(
            f"echo travel time {bad[0]:.6f}s outside record window "
            f"[{t0:.6f}, {t1:.6f}]s"
        )
    spray = np.zeros(n_os, dtype=complex)
    bins = np.round((delays - t0) * fs_os).astype(np.int64)
    bins = np.clip(bins, 0, n_os - 1)
    np.add.at(spray, bins, amps)
    out = fftconvolve(spray, replica)[:n_os]
    return np.real(out[::DELAY_GRID_OVERSAMPLE])[:n_out]


def synthesize_ping(
    s: Scenario,
    field: sf.ScattererField,
    pose,
    tx_id: int,
    seed=None,
    *,
    index: int = 0,
    location_index: int = 0,
    subbands: int = 1,
) -> PingRecord:
    """Assemble one transmit event's raw receiver records.

    Components (diffuse field, target echoes, coherent interface
    replicas, ambient noise) are synthesized separately and summed, each
    as delayed scaled waveform replicas with amplitudes from the
    composite factor chain; frequency-dependent factors are evaluated at
    band center, or per subband when ``subbands`` > 1.  Deterministic
    for a given scenario and seed.
    """
    cfg = s.waveform
    t0, t1 = record_window(s)
    fs = cfg.sample_rate
    n_out = int(round((t1 - t0) * fs))
    fs_os = fs * DELAY_GRID_OVERSAMPLE
    n_os = n_out * DELAY_GRID_OVERSAMPLE
    pose = tuple(float(v) for v in pose)
    tx_el = s.array.projector(tx_id)
    tx_world = tuple(np.add(pose, tx_el.offset))

    replicas = _subband_replicas(cfg, subbands)
    rows = np.zeros((len(s.array.receivers), n_out))
    for i, rx_el in enumerate(s.array.receivers):
        rx_world = tuple(np.add(pose, rx_el.offset))
        for f_k, replica in replicas:
            for contrib in (
                _diffuse_contributions(s, field, tx_el, tx_world, rx_el, rx_world, f_k),
                _target_contributions(s, tx_el, tx_world, rx_el, rx_world, f_k),
                _coherent_contributions(s, tx_el, tx_world, rx_el, rx_world, f_k),
            ):
                rows[i] += _spray_and_convolve(
                    contrib[0], contrib[1], replica, t0, t1, fs_os, n_os, n_out
                )

    if seed is None:
        seed = (s.rng_seed, _NOISE_DOMAIN, index)
    if s.noise.ambient:
        psd = prop.ambient_noise_psd(cfg.center_frequency, s.noise.sea_state)
        sigma = np.sqrt(10.0 ** (psd / 10.0) * fs / 2.0)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        rows += sigma * rng.standard_normal(rows.shape)

    return PingRecord(
        index=index,
        location_index=location_index,
        tx_id=tx_id,
        pose=pose,
        sample_rate=fs,
        start_time=t0,
        samples=rows,
        kind="raw",
        seed=s.rng_seed,
    )


def matched_filter(rec: PingRecord, w: Waveform) -> PingRecord:
    """Pulse compression: correlate each row with the transmit replica.

    Output rows are the analytic (complex) correlation; a lone echo's
    envelope peaks at the echo delay within half a sample and the -3 dB
    width is about 0.886/bandwidth for an untapered LFM.
    """
    if abs(rec.sample_rate - w.config.sample_rate) > 1e-9:
        raise ValueError("record and waveform sample rates differ")
    x = rec.samples
    m = len(w.samples)
    n = x.shape[1]
    size = int(2 ** np.ceil(np.log2(n + m)))
    spec = np.fft.fft(x, size, axis=1) * np.conj(np.fft.fft(w.samples, size))
    weights = np.zeros(size)
    weights[0] = 1.0
    weights[1 : (size + 1) // 2] = 2.0
    if size % 2 == 0:
        weights[size // 2] = 1.0
    analytic = np.fft.ifft(spec * weights, axis=1)[:, :n]
    return PingRecord(
        rec.index,
        rec.location_index,
        rec.tx_id,
        rec.pose,
        rec.sample_rate,
        rec.start_time,
        analytic,
        kind="analytic",
        seed=rec.seed,
    )


def simulate_survey(s: Scenario, *, subbands: int = 1, extent: sf.Box | None = None):
    """Generate the survey: one shared scatterer field, then every
    transmit event's PingRecord in schedule order."""
    if extent is None:
        extent = survey_extent(s)
    field = sf.generate_field(s, extent, s.rng_seed)
    for event in ping_poses(s):
        yield synthesize_ping(
            s,
            field,
            event.pose,
            event.tx_id,
            index=event.index,
            location_index=event.location_index,
            subbands=subbands,
        )


def event_seed(s: Scenario, event: TransmitEvent):
    """Noise seed material for one transmit event (for external drivers)."""
    return (s.rng_seed, _NOISE_DOMAIN, event.index)
