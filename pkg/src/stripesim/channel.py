"""Per-subcarrier wireless MIMO channel models and application.

All models produce a Q x Nrx x Ntx tensor H with ``H[q][k, m]`` the
coefficient from transmit element m to receive element k at subcarrier q,
decomposed into a free-space power gain, optional per-element antenna
gains, and a unit-mean-square small-scale term:

* line of sight - deterministic unit-magnitude phase rotation,
* uncorrelated Rayleigh - i.i.d. CN(0, 1) across (q, m, k),
* tapped delay line - L taps with exponentially decaying powers
  e^{-beta*l}, normalized to unit total power, zero-padded and taken to
  the frequency domain with a Q-point DFT.

Application is an independent matrix product per subcarrier:
``y[q] = H[q] x[q]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .components import BOLTZMANN
from .errors import DimensionError, DomainError
from .waveform import SubcarrierGrid

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ChannelRealization:
    """One frozen channel draw: Q x Nrx x Ntx complex tensor."""

    h: np.ndarray
    grid: SubcarrierGrid
    provenance: str = "model"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        if h.ndim != 3:
            raise DimensionError("channel tensor must be Q x Nrx x Ntx")
        if h.shape[0] != self.grid.num_subcarriers:
            raise DimensionError("channel tensor first axis must equal Q")
        if not np.all(np.isfinite(h)):
            raise DomainError("channel tensor contains non-finite entries")
        object.__setattr__(self, "h", h)

    @property
    def n_rx(self) -> int:
        return self.h.shape[1]

    @property
    def n_tx(self) -> int:
        return self.h.shape[2]

    def transposed(self) -> "ChannelRealization":
        """Reverse-link view (reciprocity): swaps the antenna axes."""
        return ChannelRealization(h=np.transpose(self.h, (0, 2, 1)),
                                  grid=self.grid, provenance=self.provenance)


@dataclass(frozen=True)
class TdlParams:
    """Tap count and per-tap exponential decay rate."""

    n_taps: int = 8
    beta: float = 0.5

    def __post_init__(self):
        if self.n_taps < 1:
            raise DomainError("n_taps must be >= 1")
        if self.beta < 0:
            raise DomainError("beta must be >= 0")


@dataclass(frozen=True)
class AntennaPattern:
    """Isotropic or 3GPP TR 38.901 single-element pattern.

    ``boresight`` is the peak direction; ``up`` fixes the vertical cut.
    Defaults follow the usual 38.901 element: 8 dBi peak, 65 deg 3-dB
    beamwidths, 30 dB side-lobe/front-back floors.
    """

    kind: str = "isotropic"
    max_gain_dbi: float = 8.0
    theta_3db_deg: float = 65.0
    phi_3db_deg: float = 65.0
    sidelobe_floor_db: float = 30.0
    front_back_db: float = 30.0
    boresight: tuple = (1.0, 0.0, 0.0)
    up: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("isotropic", "tr38901"):
            raise DomainError(f"unknown antenna pattern kind {self.kind!r}")
        if not 0.0 < self.theta_3db_deg < 180.0 or not 0.0 < self.phi_3db_deg < 180.0:
            raise DomainError("beamwidths must lie in (0, 180) degrees")


ISOTROPIC = AntennaPattern()


# ---------------------------------------------------------------------------
# Large-scale factors
# ---------------------------------------------------------------------------

def free_space_gain(distance, frequency):
    """Free-space power path gain (c / (4 pi f d))^2."""
    d = np.asarray(distance, dtype=np.float64)
    f = np.asarray(frequency, dtype=np.float64)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    if np.any(f <= 0):
        raise DomainError("frequency must be positive")
    out = (SPEED_OF_LIGHT / (4.0 * np.pi * f * d)) ** 2
    return float(out) if out.ndim == 0 else out


def antenna_gain_38901(direction, pattern: AntennaPattern):
    """Linear power gain of a single element toward ``direction``.

    Vertical cut: A_v = -min(12 (theta'/theta3dB)^2, SLA_v); horizontal:
    A_h = -min(12 (phi'/phi3dB)^2, A_m); combined
    A = -min(-(A_v + A_h), A_m); gain = 10^((G_max + A)/10).
    """
    d = np.asarray(direction, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    norms = np.linalg.norm(d, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DomainError("direction vector must be nonzero")
    d = d / norms
    if pattern.kind == "isotropic":
        out = np.ones(d.shape[0])
        return float(out[0]) if single else out
    z = np.asarray(pattern.up, dtype=np.float64)
    z = z / np.linalg.norm(z)
    b = np.asarray(pattern.boresight, dtype=np.float64)
    x = b - np.dot(b, z) * z
    nx = np.linalg.norm(x)
    if nx == 0:
        raise DomainError("boresight must not be parallel to the up axis")
    x = x / nx
    y = np.cross(z, x)
    theta = np.degrees(np.arccos(np.clip(d @ z, -1.0, 1.0)))
    phi = np.degrees(np.arctan2(d @ y, d @ x))
    a_v = -np.minimum(12.0 * ((theta - 90.0) / pattern.theta_3db_deg) ** 2,
                      pattern.sidelobe_floor_db)
    a_h = -np.minimum(12.0 * (phi / pattern.phi_3db_deg) ** 2,
                      pattern.front_back_db)
    a = -np.minimum(-(a_v + a_h), pattern.front_back_db)
    out = 10.0 ** ((pattern.max_gain_dbi + a) / 10.0)
    return float(out[0]) if single else out


def ula_positions(center, axis, n_elements: int, wavelength: float) -> np.ndarray:
    """Half-wavelength-spaced linear array centered on ``center``."""
    center = np.asarray(center, dtype=np.float64)
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise DomainError("array axis must be nonzero")
    axis = axis / norm
    offsets = (np.arange(n_elements) - (n_elements - 1) / 2.0) * wavelength / 2.0
    return center[None, :] + offsets[:, None] * axis[None, :]


# ---------------------------------------------------------------------------
# Channel models
# ---------------------------------------------------------------------------

def _pairwise_distances(tx_positions: np.ndarray, rx_positions: np.ndarray) -> np.ndarray:
    diff = tx_positions[:, None, :] - rx_positions[None, :, :]
    return np.linalg.norm(diff, axis=-1)  # (n_tx, n_rx)


def los_channel(grid: SubcarrierGrid, tx_positions, rx_positions,
                tx_pattern: AntennaPattern = ISOTROPIC,
                rx_pattern: AntennaPattern = ISOTROPIC,
                narrowband: bool = False) -> ChannelRealization:
    """Deterministic line-of-sight channel.

    ``h[q, k, m] = sqrt(Gtx_m Grx_k b_fs(d_mk, f_q)) * e^{-j 2 pi f_q d_mk / c}``
    with per-pair element distances. ``narrowband`` evaluates both the
    gain and the phasor at fc, yielding a frequency-flat channel.
    """
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=np.float64))
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=np.float64))
    d = _pairwise_distances(tx, rx)
    if np.any(d == 0):
        raise DomainError("transmit and receive elements must not coincide")
    f = np.full(grid.num_subcarriers, grid.fc) if narrowband else grid.frequencies()
    f = f[:, None, None]
    beta = free_space_gain(d[None, :, :], f)
    g_tx = antenna_gain_38901(np.mean(rx, axis=0)[None, :] - tx, tx_pattern)
    g_rx = antenna_gain_38901(np.mean(tx, axis=0)[None, :] - rx, rx_pattern)
    amp = np.sqrt(g_tx[None, :, None] * g_rx[None, None, :] * beta)
    phase = np.exp(-2j * np.pi * f * d[None, :, :] / SPEED_OF_LIGHT)
    h_qmk = amp * phase  # (Q, n_tx, n_rx)
    return ChannelRealization(h=np.transpose(h_qmk, (0, 2, 1)), grid=grid,
                              provenance="los")


def _large_scale(grid: SubcarrierGrid, distance, narrowband: bool = False) -> np.ndarray:
    """Per-subcarrier amplitude factor for stochastic models (centroid
    distance); 1.0 when no distance is given."""
    if distance is None:
        return np.ones(grid.num_subcarriers)
    f = np.full(grid.num_subcarriers, grid.fc) if narrowband else grid.frequencies()
    return np.sqrt(free_space_gain(float(distance), f))


def rayleigh_channel(grid: SubcarrierGrid, n_tx: int, n_rx: int,
                     rng: np.random.Generator,
                     distance: float | None = None) -> ChannelRealization:
    """Uncorrelated Rayleigh fading: CN(0, 1) i.i.d. across (q, m, k)."""
    q = grid.num_subcarriers
    g = (rng.standard_normal((q, n_rx, n_tx))
         + 1j * rng.standard_normal((q, n_rx, n_tx))) / np.sqrt(2.0)
    h = g * _large_scale(grid, distance)[:, None, None]
    return ChannelRealization(h=h, grid=grid, provenance="rayleigh")


def tap_powers(n_taps: int, beta: float) -> np.ndarray:
    """Normalized exponential power-delay profile e^{-beta*l}, sum = 1."""
    if n_taps < 1:
        raise DomainError("n_taps must be >= 1")
    if beta < 0:
        raise DomainError("beta must be >= 0")
    raw = np.exp(-beta * np.arange(n_taps))
    return raw / raw.sum()


def tdl_channel(grid: SubcarrierGrid, params: TdlParams, n_tx: int, n_rx: int,
                rng: np.random.Generator,
                distance: float | None = None) -> ChannelRealization:
    """Rayleigh tapped-delay-line channel.

    Per antenna pair: L i.i.d. CN(0,1) taps scaled by sqrt of the
    normalized exponential profile, zero-padded to Q and taken through a
    Q-point DFT. High beta concentrates power in the first tap, i.e.
    flatter channels.
    """
    q = grid.num_subcarriers
    if params.n_taps > q:
        raise DomainError(f"tap count {params.n_taps} exceeds {q} subcarriers")
    lam = tap_powers(params.n_taps, params.beta)
    taps = (rng.standard_normal((n_rx, n_tx, params.n_taps))
            + 1j * rng.standard_normal((n_rx, n_tx, params.n_taps))) / np.sqrt(2.0)
    taps = taps * np.sqrt(lam)[None, None, :]
    g_f = np.fft.fft(taps, n=q, axis=-1)  # zero-pads to Q
    h = np.transpose(g_f, (2, 0, 1)) * _large_scale(grid, distance)[:, None, None]
    return ChannelRealization(h=h, grid=grid, provenance="tdl")


def identity_channel(grid: SubcarrierGrid, n: int = 1) -> ChannelRealization:
    """Unit diagonal channel on every subcarrier (loopback fixture)."""
    h = np.broadcast_to(np.eye(n, dtype=np.complex128),
                        (grid.num_subcarriers, n, n)).copy()
    return ChannelRealization(h=h, grid=grid, provenance="identity")


# ---------------------------------------------------------------------------
# Application and receiver noise
# ---------------------------------------------------------------------------

def apply_channel(x: np.ndarray, realization: ChannelRealization) -> np.ndarray:
    """y[q] = H[q] x[q] independently per subcarrier.

    ``x`` is (Q, Ntx) or (Q, Ntx, S); the result replaces the antenna axis
    with Nrx. No inter-carrier mixing.
    """
    x = np.asarray(x, dtype=np.complex128)
    h = realization.h
    if x.ndim not in (2, 3) or x.shape[0] != h.shape[0] or x.shape[1] != h.shape[2]:
        raise DimensionError(
            f"input shape {x.shape} incompatible with channel {h.shape}")
    if x.ndim == 2:
        return np.einsum("qkm,qm->qk", h, x)
    return np.einsum("qkm,qms->qks", h, x)


def bulk_delay(realization: ChannelRealization,
               resolution_fraction: int = 64) -> float:
    """Bulk group delay of a realization, for receiver timing sync.

    The average phase step between adjacent subcarriers (summed over all
    antenna pairs) gives the dominant propagation delay; the result is
    quantized to ``1/(resolution_fraction * bw)`` so float32-stored and
    freshly computed realizations of the same channel sync identically.
    """
    h = realization.h
    corr = np.sum(h[1:] * np.conj(h[:-1]))
    if corr == 0:
        return 0.0
    df = realization.grid.delta_f
    tau = -float(np.angle(corr)) / (2.0 * np.pi * df)
    step = 1.0 / (resolution_fraction * realization.grid.bw)
    return round(tau / step) * step


def timing_advance(symbols: np.ndarray, grid: SubcarrierGrid,
                   tau: float) -> np.ndarray:
    """Undo a bulk delay: per-subcarrier rotation e^{+j 2 pi (q - Q/2) df tau}.

    Removes the steep phase ramp a propagation delay leaves on the
    received grid so pilot interpolation can track the residual channel.
    """
    if tau == 0.0:
        return symbols
    q = np.arange(grid.num_subcarriers) - grid.num_subcarriers // 2
    ramp = np.exp(2j * np.pi * q * grid.delta_f * tau)
    return symbols * ramp.reshape((-1,) + (1,) * (symbols.ndim - 1))


def thermal_noise_power(bandwidth: float, nf_db: float,
                        temperature: float = 290.0) -> float:
    """Receiver noise floor kT*B*F in watts."""
    if bandwidth <= 0:
        raise DomainError("bandwidth must be positive")
    return BOLTZMANN * temperature * bandwidth * 10.0 ** (nf_db / 10.0)


def add_thermal_noise(y: np.ndarray, bandwidth: float, nf_db: float,
                      rng: np.random.Generator,
                      temperature: float = 290.0) -> np.ndarray:
    """Add the receiver noise floor to per-subcarrier data.

    Grid entries are in mean-sample-power units, so the full in-band
    thermal power kT*B*F appears as the per-bin complex-Gaussian variance;
    bins and antennas receive independent draws.
    """
    y = np.asarray(y, dtype=np.complex128)
    var = thermal_noise_power(bandwidth, nf_db, temperature)
    sigma = np.sqrt(var / 2.0)
    noise = sigma * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y + noise


def add_awgn(y: np.ndarray, snr_db: float, rng: np.random.Generator,
             signal_power: float | None = None) -> np.ndarray:
    """Add complex Gaussian noise at a target SNR relative to ``y``'s mean
    power (or an explicit reference power)."""
    y = np.asarray(y, dtype=np.complex128)
    p = float(np.mean(np.abs(y) ** 2)) if signal_power is None else signal_power
    var = p * 10.0 ** (-snr_db / 10.0)
    sigma = np.sqrt(var / 2.0)
    noise = sigma * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y + noise
