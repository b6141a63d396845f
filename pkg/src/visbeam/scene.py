"""Synthetic V2I street scenes observed by a co-located camera and phased array.

World frame: x east, y north, z up, metres. The base station sits at the
origin at ``camera.position`` and looks along ``yaw`` (counter-clockwise from
east). Vehicles drive along straight lanes parallel to the image plane, so
a lane is described by its distance ahead of the base station.

Each generated sample draws its randomness from a SeedSequence derived from
``(master_seed, index)``; samples can therefore be produced in any order or
in parallel without changing the output.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import array_channel as ac
from .dataset import SceneSample
from .errors import CoincidentPoint, ConfigError

SPEED_OF_LIGHT = 299_792_458.0

SINGLE = "single"
MULTI = "multi"


@dataclass(frozen=True)
class CameraModel:
    position: tuple = (0.0, 0.0, 1.5)
    yaw: float = np.pi / 2
    focal_px: float = 3030.0  # ~18 deg horizontal field of view
    image_width: int = 960
    image_height: int = 540

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ConfigError("must be positive", "focal_px")
        if not (self.image_width > 0 and self.image_height > 0):
            raise ConfigError("image size must be positive", "image_width")

    @property
    def hfov(self):
        """Horizontal field of view in degrees."""
        return float(np.rad2deg(2 * np.arctan(self.image_width / (2 * self.focal_px))))

    def axes(self):
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        forward = np.array([c, s, 0.0])
        right = np.array([s, -c, 0.0])
        down = np.array([0.0, 0.0, -1.0])
        return forward, right, down


@dataclass(frozen=True)
class DetectorModel:
    miss_prob: float = 0.05
    false_positive_rate: float = 0.2
    center_jitter_std: float = 0.01

    def __post_init__(self):
        if not 0 <= self.miss_prob <= 1:
            raise ConfigError("must lie in [0, 1]", "miss_prob")
        if self.false_positive_rate < 0:
            raise ConfigError("must be nonnegative", "false_positive_rate")
        if self.center_jitter_std < 0:
            raise ConfigError("must be nonnegative", "center_jitter_std")


@dataclass(frozen=True)
class GpsModel:
    noise_std: float = 2.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ConfigError("must be nonnegative", "noise_std")


@dataclass(frozen=True)
class Vehicle:
    id: int
    start: np.ndarray
    velocity: np.ndarray
    extent: tuple = (1.8, 1.5)  # width, height [m]
    is_transmitter: bool = False

    def position(self, t):
        return self.start + self.velocity * t


@dataclass(frozen=True)
class BoundingBox:
    center_x: float
    center_y: float
    source: object = None  # vehicle id, or None for a false positive


@dataclass(frozen=True)
class Detections:
    """Relevant-object matrix plus, per row, the vehicle id it came from."""

    boxes: np.ndarray  # (N, 2)
    sources: tuple  # vehicle id or None (false positive), one per row

    def row_of(self, vehicle_id):
        for i, s in enumerate(self.sources):
            if s is not None and s == vehicle_id:
                return i
        return None

    def as_boxes(self):
        return [BoundingBox(float(x), float(y), s) for (x, y), s in zip(self.boxes, self.sources)]


@dataclass(frozen=True)
class SceneConfig:
    scenario: str = "synthetic"
    camera: CameraModel = field(default_factory=CameraModel)
    array: ac.ArrayConfig = field(default_factory=ac.ArrayConfig)
    ofdm: ac.OfdmConfig = field(default_factory=ac.OfdmConfig)
    detector: DetectorModel = field(default_factory=DetectorModel)
    gps: GpsModel = field(default_factory=GpsModel)
    lanes: tuple = (160.0, 163.5, 167.0, 170.5)  # distance ahead of the BS [m]
    vehicle_extent: tuple = (1.8, 1.5)
    vehicle_length: float = 4.5
    min_gap: float = 10.0  # bumper gap inside a lane [m]
    speed: float = 10.0
    max_distractors: int = 4
    min_box_separation: float = 0.0  # normalized image units
    max_box_overlap: float = 0.0  # allowed horizontal overlap, fraction of the narrower box
    coverage_margin: float = 0.98  # fraction of the usable half-angle
    carrier_hz: float = 60e9
    power_noise_rel: float = 0.0  # std relative to the sample's peak power
    raw_beams: int = 64

    def __post_init__(self):
        if not self.lanes:
            raise ConfigError("at least one lane is required", "lanes")
        if any(d <= 0 for d in self.lanes):
            raise ConfigError("lane distances must be positive", "lanes")
        if self.max_distractors < 1:
            raise ConfigError("must be >= 1", "max_distractors")
        if self.raw_beams not in (32, 64):
            raise ConfigError("must be 32 or 64", "raw_beams")
        if self.power_noise_rel < 0:
            raise ConfigError("must be nonnegative", "power_noise_rel")
        if not 0 < self.coverage_margin <= 1:
            raise ConfigError("must lie in (0, 1]", "coverage_margin")

    @property
    def usable_half_angle(self):
        """Half-angle [rad] seen by both the camera and the codebook."""
        half = min(self.camera.hfov, self.array.fov_gamma) / 2.0
        return np.deg2rad(half) * self.coverage_margin


def project_to_image(world_point, camera):
    """Pinhole projection to normalized ``(cx, cy)``.

    Returns ``None`` when the point is at or behind the camera plane. The
    result may fall outside ``[0, 1]`` for points outside the field of view.
    """
    forward, right, down = camera.axes()
    d = np.asarray(world_point, dtype=float) - np.asarray(camera.position, dtype=float)
    z = float(d @ forward)
    if z <= 0:
        return None
    u = camera.focal_px * float(d @ right) / z + camera.image_width / 2.0
    v = camera.focal_px * float(d @ down) / z + camera.image_height / 2.0
    return u / camera.image_width, v / camera.image_height


def azimuth_of(world_point, bs_position, bs_yaw):
    """Signed azimuth relative to boresight in (-pi, pi]; negative to the left."""
    d = np.asarray(world_point, dtype=float) - np.asarray(bs_position, dtype=float)
    if not np.any(d):
        raise CoincidentPoint("point coincides with the base station")
    c, s = np.cos(bs_yaw), np.sin(bs_yaw)
    along = d[0] * c + d[1] * s
    lateral = d[0] * s - d[1] * c
    if along == 0 and lateral == 0:
        raise CoincidentPoint("point lies on the array's vertical axis")
    az = float(np.arctan2(lateral, along))
    return np.pi if az == -np.pi else az


def synth_paths(tx_position, bs_position, bs_yaw, carrier_hz=60e9):
    """Single line-of-sight path from the transmitter to the array."""
    d = np.asarray(tx_position, dtype=float) - np.asarray(bs_position, dtype=float)
    dist = float(np.linalg.norm(d))
    if dist == 0:
        raise CoincidentPoint("transmitter coincides with the base station")
    wavelength = SPEED_OF_LIGHT / carrier_hz
    phase = -2 * np.pi * np.mod(dist / wavelength, 1.0)
    elev = float(np.arctan2(d[2], np.hypot(d[0], d[1])))
    return [
        ac.ChannelPath(
            alpha=np.exp(1j * phase) / dist,
            tau=dist / SPEED_OF_LIGHT,
            theta=azimuth_of(tx_position, bs_position, bs_yaw),
            phi=elev,
        )
    ]


def detect(frame_objects, detector, rng_seed=None):
    """Emulate the object detector on the true box centres of one frame.

    ``frame_objects`` is a sequence of ``(id, cx, cy)``. Each object survives
    with probability ``1 - miss_prob`` and has its centre jittered (clamped to
    the image); a Poisson number of uniformly placed false positives is
    appended with source ``None``.
    """
    rng = np.random.default_rng(rng_seed)
    rows, sources = [], []
    for obj_id, cx, cy in frame_objects:
        keep = rng.random() >= detector.miss_prob
        jitter = rng.normal(0.0, detector.center_jitter_std, size=2) if detector.center_jitter_std else np.zeros(2)
        if keep:
            rows.append(np.clip(np.array([cx, cy]) + jitter, 0.0, 1.0))
            sources.append(obj_id)
    n_fp = rng.poisson(detector.false_positive_rate) if detector.false_positive_rate else 0
    for _ in range(n_fp):
        rows.append(rng.random(2))
        sources.append(None)
    boxes = np.array(rows, dtype=float).reshape(-1, 2)
    return Detections(boxes=boxes, sources=tuple(sources))


def _lane_span(config, lane):
    return lane * np.tan(config.usable_half_angle)


def _place_vehicle(config, rng, vid, is_tx):
    lane_idx = int(rng.integers(len(config.lanes)))
    lane = config.lanes[lane_idx]
    span = _lane_span(config, lane)
    direction = 1.0 if lane_idx % 2 == 0 else -1.0
    cam = np.asarray(config.camera.position, dtype=float)
    forward, right, _ = config.camera.axes()
    # Lanes run along the camera's right axis at `lane` metres ahead.
    start = cam + forward * lane - right * span * direction
    start[2] = config.vehicle_extent[1] / 2.0
    velocity = right * config.speed * direction
    t = rng.uniform(0.0, 2 * span / config.speed)
    veh = Vehicle(
        id=vid,
        start=start,
        velocity=velocity,
        extent=tuple(config.vehicle_extent),
        is_transmitter=is_tx,
    )
    return veh, lane_idx, veh.position(t)


def box_width(position, config):
    """Normalized image width of a vehicle seen broadside at ``position``."""
    forward, _, _ = config.camera.axes()
    depth = float((np.asarray(position) - np.asarray(config.camera.position)) @ forward)
    return config.camera.focal_px * config.vehicle_length / (depth * config.camera.image_width)


def _conflicts(config, candidate, placed):
    _, lane_idx, pos = candidate
    min_sep = config.vehicle_length + config.min_gap
    a = project_to_image(pos, config.camera)
    wa = box_width(pos, config)
    for _veh, other_lane, other_pos in placed:
        if other_lane == lane_idx and np.linalg.norm(pos - other_pos) < min_sep:
            return True
        b = project_to_image(other_pos, config.camera)
        wb = box_width(other_pos, config)
        # A mostly hidden vehicle would not be detected as a separate object.
        overlap = (wa + wb) / 2 - abs(a[0] - b[0])
        if overlap > config.max_box_overlap * min(wa, wb):
            return True
        if np.hypot(a[0] - b[0], a[1] - b[1]) < config.min_box_separation:
            return True
    return False


def _sample_seeds(master_seed, index):
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return ss.spawn(4)  # placement, detector, gps, power noise


def generate_sample(config, mode, master_seed, index, codebook=None):
    if mode not in (SINGLE, MULTI):
        raise ConfigError(f"unknown mode {mode!r}", "mode")
    codebook = codebook if codebook is not None else generate_codebook_for(config)
    s_place, s_detect, s_gps, s_power = _sample_seeds(master_seed, index)
    rng = np.random.default_rng(s_place)

    placed = [_place_vehicle(config, rng, 0, True)]
    if mode == MULTI:
        n_distractors = int(rng.integers(1, config.max_distractors + 1))
        for vid in range(1, n_distractors + 1):
            for _attempt in range(200):
                cand = _place_vehicle(config, rng, vid, False)
                if not _conflicts(config, cand, placed):
                    placed.append(cand)
                    break

    frame = []
    for veh, _lane, pos in placed:
        c = project_to_image(pos, config.camera)
        frame.append((veh.id, c[0], c[1]))
    order = rng.permutation(len(frame))
    frame = [frame[i] for i in order]
    det = detect(frame, config.detector, s_detect)

    cam = np.asarray(config.camera.position, dtype=float)
    tx_pos = placed[0][2]
    paths = synth_paths(tx_pos, cam, config.camera.yaw, config.carrier_hz)
    # The receiver locks to the first arrival, so delays are relative to it.
    t0 = min(p.tau for p in paths)
    paths = [ac.ChannelPath(p.alpha, p.tau - t0, p.theta, p.phi) for p in paths]
    channel = ac.build_channel(paths, config.array, config.ofdm)
    raw = ac.received_power(channel, codebook)
    clean = ac.downsample_power(raw) if config.raw_beams == 64 else raw
    beam = ac.optimal_beam_power(clean)
    stored = clean.values
    if config.power_noise_rel > 0:
        std = config.power_noise_rel * float(np.max(raw.values))
        noisy = ac.received_power(channel, codebook, std, s_power)
        stored = (ac.downsample_power(noisy) if config.raw_beams == 64 else noisy).values

    gps_rng = np.random.default_rng(s_gps)
    gps = tx_pos[:2] + gps_rng.normal(0.0, config.gps.noise_std, size=2)

    return SceneSample(
        sample_id=int(index),
        scenario=f"{config.scenario}-{mode}",
        gps=(float(gps[0]), float(gps[1])),
        boxes=det.boxes,
        true_tx_row=det.row_of(0),
        power32=np.asarray(stored, dtype=float),
        beam=beam,
    )


def generate_codebook_for(config):
    return ac.generate_codebook(config.array, config.raw_beams)


def _check(config, n_samples):
    if n_samples < 1:
        raise ConfigError("must be >= 1", "n_samples")
    if config.usable_half_angle <= 0:
        raise ConfigError("camera and codebook fields of view do not overlap", "camera")


def _generate_chunk(args):
    config, mode, master_seed, indices = args
    codebook = generate_codebook_for(config)
    return [generate_sample(config, mode, master_seed, i, codebook) for i in indices]


def generate_dataset(config, n_samples, mode=SINGLE, seed=0, workers=1):
    """Generate ``n_samples`` labelled scenes; identical for any ``workers``."""
    _check(config, n_samples)
    if workers <= 1:
        return _generate_chunk((config, mode, seed, range(n_samples)))
    chunks = np.array_split(np.arange(n_samples), workers)
    jobs = [(config, mode, seed, [int(i) for i in c]) for c in chunks if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_generate_chunk, jobs))
    return [s for part in parts for s in part]
