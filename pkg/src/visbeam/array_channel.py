"""ULA steering vectors, beam-steering codebooks and the OFDM geometric channel.

Conventions
-----------
* Angles passed to :func:`steering_vector` are radians; codebook steering
  angles are stored in degrees.
* The received signal on subcarrier ``k`` is ``h_k^T f``, so the channel
  matrix has shape ``(K, M)`` with row ``k`` equal to ``h_k``.
* Every argmax in this module breaks ties toward the lowest index.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DelayOutOfRange,
    DimensionMismatch,
    EmptyVector,
    WrongLength,
)

_GRID_SNAP = 1e-12


@dataclass(frozen=True)
class ArrayConfig:
    num_elements: int = 32
    element_spacing: float = 0.5  # wavelengths
    fov_gamma: float = 90.0  # degrees, centred on boresight

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ConfigError("must be a positive integer", "num_elements")
        if not 0 < self.element_spacing <= 1:
            raise ConfigError("must lie in (0, 1]", "element_spacing")
        if not 0 < self.fov_gamma <= 180:
            raise ConfigError("must lie in (0, 180]", "fov_gamma")


@dataclass(frozen=True)
class OfdmConfig:
    num_subcarriers: int = 64
    cyclic_prefix: int = 8
    sample_time: float = 1e-9
    snr_db: float = 20.0
    symbol_power: float = 1.0

    def __post_init__(self):
        if int(self.num_subcarriers) != self.num_subcarriers or self.num_subcarriers < 1:
            raise ConfigError("must be a positive integer", "num_subcarriers")
        if int(self.cyclic_prefix) != self.cyclic_prefix or self.cyclic_prefix < 1:
            raise ConfigError("must be a positive integer", "cyclic_prefix")
        if not self.sample_time > 0:
            raise ConfigError("must be positive", "sample_time")

    @property
    def snr_linear(self):
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def max_delay(self):
        return self.cyclic_prefix * self.sample_time


@dataclass(frozen=True)
class ChannelPath:
    """One propagation path: complex gain, delay [s], azimuth and elevation [rad]."""

    alpha: complex
    tau: float
    theta: float
    phi: float = 0.0


@dataclass(frozen=True)
class BeamCodebook:
    beams: np.ndarray  # (Q, M) complex, one beam per row
    steer_angles: np.ndarray  # (Q,) degrees, strictly increasing

    @property
    def size(self):
        return self.beams.shape[0]

    @property
    def num_elements(self):
        return self.beams.shape[1]


@dataclass(frozen=True)
class PowerVector:
    values: np.ndarray
    noisy: bool = False

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray = field(repr=False)  # (K, M) complex

    @property
    def shape(self):
        return self.entries.shape


def steering_vector(array, theta, phi=0.0):
    """Array response ``exp(j 2 pi d m cos(phi) sin(theta))`` for ``m = 0..M-1``."""
    m = np.arange(array.num_elements)
    phase = 2.0 * np.pi * array.element_spacing * m * np.cos(phi) * np.sin(theta)
    return np.exp(1j * phase)


def generate_codebook(array, num_beams):
    """Beam-steering codebook with ``num_beams`` beams uniform in sin(angle).

    The steering directions cover ``[-gamma/2, +gamma/2]`` and beam ``q`` is the
    conjugated, normalized steering vector toward direction ``q``, so that
    ``|a(theta_q)^T f_q|^2 == M``.
    """
    if int(num_beams) != num_beams or num_beams < 1:
        raise ConfigError("must be a positive integer", "num_beams")
    half = np.deg2rad(array.fov_gamma / 2.0)
    if num_beams == 1:
        sines = np.zeros(1)
    else:
        sines = np.linspace(-np.sin(half), np.sin(half), int(num_beams))
    angles = np.arcsin(sines)
    beams = np.stack([np.conj(steering_vector(array, a, 0.0)) for a in angles])
    beams /= np.sqrt(array.num_elements)
    return BeamCodebook(beams=beams, steer_angles=np.rad2deg(angles))


def pulse(t, sample_time):
    """Normalized sinc pulse sampled at ``t``; near-grid instants snap to the grid."""
    x = np.asarray(t, dtype=float) / sample_time
    nearest = np.round(x)
    on_grid = np.abs(x - nearest) < _GRID_SNAP
    x = np.where(on_grid, nearest, x)
    return np.where(on_grid & (nearest != 0), 0.0, np.sinc(x))


def build_channel(paths, array, ofdm):
    """Frequency-domain channel of a list of :class:`ChannelPath`.

    Tap ``d`` of path ``l`` is weighted by ``p(d T_s - tau_l)`` and the taps are
    transformed with ``exp(-j 2 pi k d / K)`` for ``k = 0..K-1``.
    """
    K, M, D = ofdm.num_subcarriers, array.num_elements, ofdm.cyclic_prefix
    H = np.zeros((K, M), dtype=complex)
    if not paths:
        return ChannelMatrix(H)
    for p in paths:
        if p.tau < 0 or p.tau >= ofdm.max_delay:
            raise DelayOutOfRange(
                f"delay {p.tau:.6g} s outside [0, {ofdm.max_delay:.6g}) s"
            )
    k = np.arange(K)[:, None]
    d = np.arange(D)[None, :]
    dft = np.exp(-2j * np.pi * k * d / K)  # (K, D)
    for p in paths:
        taps = pulse(np.arange(D) * ofdm.sample_time - p.tau, ofdm.sample_time)
        freq = dft @ taps  # (K,)
        a = steering_vector(array, p.theta, p.phi)
        H += p.alpha * np.outer(freq, a)
    return ChannelMatrix(H)


def _beam_responses(channel, codebook):
    H = channel.entries
    if H.shape[1] != codebook.num_elements:
        raise DimensionMismatch(
            f"channel has {H.shape[1]} antennas, codebook beams have {codebook.num_elements}"
        )
    return H @ codebook.beams.T  # (K, Q): h_k^T f_q


def received_power(channel, codebook, noise_std=0.0, rng_seed=None):
    """Subcarrier-averaged power ``(1/K) sum_k |h_k^T f_q|^2`` for every beam.

    With ``noise_std > 0`` additive Gaussian measurement noise is drawn from
    ``rng_seed`` (an int, SeedSequence or Generator) and the result is clamped
    at zero.
    """
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    power = np.mean(np.abs(_beam_responses(channel, codebook)) ** 2, axis=0)
    if noise_std > 0:
        rng = np.random.default_rng(rng_seed)
        power = np.maximum(power + rng.normal(0.0, noise_std, size=power.shape), 0.0)
        return PowerVector(power, noisy=True)
    return PowerVector(power, noisy=False)


def optimal_beam_rate(channel, codebook, snr_linear):
    """Beam index maximizing the subcarrier-averaged achievable rate."""
    if not snr_linear > 0:
        raise ValueError("snr_linear must be positive")
    gains = np.abs(_beam_responses(channel, codebook)) ** 2
    rate = np.mean(np.log2(1.0 + snr_linear * gains), axis=0)
    return int(np.argmax(rate))


def optimal_beam_power(power):
    """Index of the strongest beam; ``power`` may be a PowerVector or array."""
    values = power.values if isinstance(power, PowerVector) else np.asarray(power)
    if values.size == 0:
        raise EmptyVector("power vector is empty")
    return int(np.argmax(values))


def downsample_power(p64):
    """Keep the even-index entries of a 64-beam power vector."""
    values = p64.values if isinstance(p64, PowerVector) else np.asarray(p64, dtype=float)
    noisy = p64.noisy if isinstance(p64, PowerVector) else False
    if values.shape != (64,):
        raise WrongLength(f"expected 64 power values, got {values.size}")
    return PowerVector(values[0::2].copy(), noisy=noisy)
