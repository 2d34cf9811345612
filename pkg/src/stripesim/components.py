"""Hardware impairment bank: amplifiers, DAC, oscillator, IQ modem,
fiber/coupler application, splitter/combiner, phase shifters.

Amplifiers follow ``y = G * f_nl(x + w)`` with input-referred Gaussian
noise ``w`` sized from the noise figure and bandwidth, and ``f_nl`` a
memoryless nonlinearity chosen per mode. Linear elements (fiber, coupler)
apply either per-subcarrier in the frequency domain or by convolution in
the time domain. Stateful pieces (oscillator phase) live in small classes;
everything else is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import (DomainError, GridMismatch, LengthError, UnsupportedMode,
                     ZeroSignal)
from .touchstone import FrequencyResponse, ImpulseResponse
from .waveform import TimeWaveform

BOLTZMANN = 1.380649e-23  # J/K

AMPLIFIER_MODES = ("ideal", "tanh", "atan", "polynomial", "soft_limiter")
OSCILLATOR_MODES = ("ideal", "cfo", "wiener", "ar1")
LINEAR_MODELS = ("ideal", "fixed_damping", "s2p_filter")


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplifierParams:
    """Gain, nonlinearity mode and noise description of one amplifier.

    ``poly_coeffs[i]`` is the coefficient of the odd order ``2*i + 1``.
    """

    gain_db: float = 0.0
    mode: str = "ideal"
    sat_amplitude: float = 1.0
    poly_coeffs: tuple = ()
    nf_db: float = 0.0
    bandwidth: float = 0.0
    temperature: float = 290.0

    def __post_init__(self):
        if self.mode not in AMPLIFIER_MODES:
            raise UnsupportedMode(f"amplifier mode {self.mode!r}")
        if self.mode in ("tanh", "atan", "soft_limiter") and self.sat_amplitude <= 0:
            raise DomainError("sat_amplitude must be positive")
        object.__setattr__(self, "poly_coeffs",
                           tuple(complex(c) for c in self.poly_coeffs))

    @property
    def gain_linear(self) -> float:
        return 10.0 ** (self.gain_db / 20.0)


@dataclass(frozen=True)
class DacParams:
    """Clipping + mid-rise uniform quantization, per I/Q rail."""

    mode: str = "ideal"  # ideal -> exact pass-through
    bits: int = 12
    clip_amplitude: float = 1.0

    def __post_init__(self):
        if self.mode not in ("ideal", "quantize"):
            raise UnsupportedMode(f"dac mode {self.mode!r}")
        if self.mode == "quantize":
            if self.bits < 1:
                raise DomainError("bits must be >= 1")
            if self.clip_amplitude <= 0:
                raise DomainError("clip_amplitude must be positive")


def clip_from_rms_db(samples: np.ndarray, headroom_db: float) -> float:
    """Absolute clip level placed ``headroom_db`` above the signal RMS."""
    rms = float(np.sqrt(np.mean(np.abs(samples) ** 2)))
    if rms == 0.0:
        raise ZeroSignal("cannot derive a clip level from an all-zero signal")
    return rms * 10.0 ** (headroom_db / 20.0)


@dataclass(frozen=True)
class OscillatorParams:
    mode: str = "ideal"
    cfo_hz: float = 0.0
    ar_rho: float = 1.0
    innovation_std: float = 0.0  # rad per sample
    initial_phase: float = 0.0

    def __post_init__(self):
        if self.mode not in OSCILLATOR_MODES:
            raise UnsupportedMode(f"oscillator mode {self.mode!r}")
        if self.mode == "ar1" and not 0.0 < self.ar_rho <= 1.0:
            raise DomainError("ar_rho must lie in (0, 1]")
        if self.innovation_std < 0:
            raise DomainError("innovation_std must be >= 0")


@dataclass(frozen=True)
class IqParams:
    """Static IQ imbalance (gain g, phase phi) plus DC offset."""

    gain_mismatch: float = 1.0
    phase_mismatch: float = 0.0  # rad
    dc_offset: complex = 0.0

    def __post_init__(self):
        if self.gain_mismatch <= 0:
            raise DomainError("gain_mismatch must be positive")
        object.__setattr__(self, "dc_offset", complex(self.dc_offset))

    @property
    def alpha(self) -> complex:
        return (1.0 + self.gain_mismatch * np.exp(1j * self.phase_mismatch)) / 2.0

    @property
    def beta(self) -> complex:
        return (1.0 - self.gain_mismatch * np.exp(1j * self.phase_mismatch)) / 2.0


@dataclass(frozen=True)
class LinearElementParams:
    """Runtime form of a fiber/coupler: model plus prepared responses.

    For ``s2p_filter`` exactly one of ``response`` (frequency-domain
    application) or ``impulse`` (time-domain convolution) is prepared,
    selected by ``domain``.
    """

    model: str = "ideal"
    loss_db: float = 0.0
    domain: str = "frequency"
    response: FrequencyResponse | None = None
    impulse: ImpulseResponse | None = None
    length_m: float = 0.0
    group_velocity: float = 2e8  # m/s

    def __post_init__(self):
        if self.model not in LINEAR_MODELS:
            raise UnsupportedMode(f"linear element model {self.model!r}")
        if self.domain not in ("frequency", "time"):
            raise UnsupportedMode(f"application domain {self.domain!r}")
        if self.model == "s2p_filter":
            if self.domain == "frequency" and self.response is None:
                raise GridMismatch("frequency-domain element needs a prepared response")
            if self.domain == "time" and self.impulse is None:
                raise GridMismatch("time-domain element needs a prepared impulse response")

    def delay_samples(self, sample_rate: float) -> int:
        """Integer propagation delay from fiber length and sampling rate."""
        if self.length_m <= 0:
            return 0
        return int(round(self.length_m / self.group_velocity * sample_rate))


# ---------------------------------------------------------------------------
# Amplifier
# ---------------------------------------------------------------------------

def noise_power(nf_db: float, bandwidth: float, temperature: float = 290.0) -> float:
    """Input-referred added noise power kT*B*(F - 1) in watts."""
    if bandwidth < 0:
        raise DomainError("bandwidth must be >= 0")
    return BOLTZMANN * temperature * bandwidth * (10.0 ** (nf_db / 10.0) - 1.0)


def pa_nonlinearity(x, mode: str, params: AmplifierParams) -> np.ndarray:
    """Memoryless nonlinearity; phase preserving except for complex
    polynomial coefficients (which model AM/PM)."""
    x = np.asarray(x, dtype=np.complex128)
    if mode == "ideal":
        return x
    if mode == "polynomial":
        out = np.zeros_like(x)
        r2 = np.abs(x) ** 2
        power = np.ones_like(r2)
        for c in params.poly_coeffs:
            out = out + c * x * power
            power = power * r2
        return out
    a = params.sat_amplitude
    r = np.abs(x)
    safe = np.where(r > 0, r, 1.0)
    unit = np.where(r > 0, x / safe, 0.0)
    if mode == "tanh":
        return a * np.tanh(r / a) * unit
    if mode == "atan":
        return a * (2.0 / np.pi) * np.arctan((np.pi / 2.0) * r / a) * unit
    if mode == "soft_limiter":
        return np.where(r <= a, x, a * unit)
    raise UnsupportedMode(f"amplifier mode {mode!r}")


def amplifier_process(x: TimeWaveform, params: AmplifierParams,
                      rng: np.random.Generator) -> TimeWaveform:
    """y = G * f_nl(x + w); w is circularly-symmetric Gaussian with total
    power from `noise_power`, injected before the nonlinearity."""
    samples = x.samples
    pn = noise_power(params.nf_db, params.bandwidth, params.temperature)
    if pn > 0.0:
        sigma = np.sqrt(pn / 2.0)
        w = sigma * (rng.standard_normal(samples.size)
                     + 1j * rng.standard_normal(samples.size))
        samples = samples + w
    out = params.gain_linear * pa_nonlinearity(samples, params.mode, params)
    return x.with_samples(out)


# ---------------------------------------------------------------------------
# DAC
# ---------------------------------------------------------------------------

def _quantize_rail(v: np.ndarray, clip: float, bits: int) -> np.ndarray:
    delta = 2.0 * clip / (1 << bits)
    idx = np.floor(v / delta)
    idx = np.clip(idx, -(1 << (bits - 1)), (1 << (bits - 1)) - 1)
    return (idx + 0.5) * delta


def dac_process(x: TimeWaveform, params: DacParams) -> TimeWaveform:
    """Per-rail clip to [-clip, +clip] and mid-rise uniform quantization."""
    if params.mode == "ideal":
        return x
    out = (_quantize_rail(x.samples.real, params.clip_amplitude, params.bits)
           + 1j * _quantize_rail(x.samples.imag, params.clip_amplitude, params.bits))
    return x.with_samples(out)


# ---------------------------------------------------------------------------
# Oscillator
# ---------------------------------------------------------------------------

class Oscillator:
    """Local-oscillator phase track with state across calls.

    Successive `phases` calls continue the trajectory (sample counter for
    CFO, previous phase for the AR/Wiener recursions), so phase is
    continuous between OFDM symbols. One instance per simulation run.
    """

    def __init__(self, params: OscillatorParams, sample_rate: float,
                 rng: np.random.Generator | None = None):
        self.params = params
        self.sample_rate = sample_rate
        self.rng = rng if rng is not None else np.random.default_rng()
        self._n0 = 0
        self._phi_prev = params.initial_phase

    def phases(self, n: int) -> np.ndarray:
        if n < 1:
            raise LengthError("need at least one sample")
        p = self.params
        if p.mode == "ideal":
            return np.zeros(n)
        if p.mode == "cfo":
            k = self._n0 + np.arange(n)
            self._n0 += n
            return p.initial_phase + 2.0 * np.pi * p.cfo_hz * k / self.sample_rate
        rho = 1.0 if p.mode == "wiener" else p.ar_rho
        u = p.innovation_std * self.rng.standard_normal(n)
        if rho == 1.0:
            phi = self._phi_prev + np.cumsum(u)
        else:
            phi, _ = lfilter([1.0], [1.0, -rho], u, zi=[rho * self._phi_prev])
        self._phi_prev = float(phi[-1])
        return phi


def oscillator_phasor(n: int, params: OscillatorParams, sample_rate: float,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """One-shot phase sequence (fresh oscillator instance)."""
    return Oscillator(params, sample_rate, rng).phases(n)


# ---------------------------------------------------------------------------
# IQ modem
# ---------------------------------------------------------------------------

def iq_modem_process(x: TimeWaveform, params: IqParams,
                     phases: np.ndarray) -> TimeWaveform:
    """y = (alpha*x + beta*conj(x)) * e^{j*phi} + dc.

    alpha = (1 + g e^{j phi_mis})/2 and beta = (1 - g e^{j phi_mis})/2, so
    ideal parameters are the exact identity.
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.size != x.samples.size:
        raise LengthError("phasor length must equal the waveform length")
    a, b = params.alpha, params.beta
    mixed = a * x.samples
    if b != 0:
        mixed = mixed + b * np.conj(x.samples)
    if np.any(phases):
        mixed = mixed * np.exp(1j * phases)
    if params.dc_offset != 0:
        mixed = mixed + params.dc_offset
    return x.with_samples(mixed)


# ---------------------------------------------------------------------------
# Linear elements (fiber / coupler)
# ---------------------------------------------------------------------------

def linear_element_process(x, params: LinearElementParams, *, apply_delay: bool = True):
    """Apply a fiber/coupler to per-subcarrier data or a time waveform.

    Frequency domain expects an array whose first axis matches the
    element's prepared response (Hadamard product per OFDM symbol); time
    domain expects a `TimeWaveform` (linear convolution, plus an integer
    propagation delay inserted as a zero prefix when ``apply_delay``).
    """
    if params.model == "ideal":
        return x
    if params.model == "fixed_damping":
        scale = 10.0 ** (-params.loss_db / 20.0)
        if isinstance(x, TimeWaveform):
            return x.with_samples(x.samples * scale)
        return np.asarray(x) * scale
    # s2p_filter
    if params.domain == "frequency":
        data = np.asarray(x, dtype=np.complex128)
        h = params.response.h
        if data.shape[0] != h.size:
            raise GridMismatch(f"data has {data.shape[0]} subcarriers, response {h.size}")
        return data * h.reshape((-1,) + (1,) * (data.ndim - 1))
    if not isinstance(x, TimeWaveform):
        raise GridMismatch("time-domain application expects a TimeWaveform")
    taps = params.impulse.h
    out = np.convolve(x.samples, taps)[:x.samples.size]
    if apply_delay:
        delay = params.delay_samples(x.sample_rate)
        if delay:
            out = np.concatenate([np.zeros(delay, dtype=np.complex128), out])
    return x.with_samples(out)


# ---------------------------------------------------------------------------
# Splitter / combiner / phase shifter
# ---------------------------------------------------------------------------

def split(x: TimeWaveform, n: int) -> list[TimeWaveform]:
    """n branches, each attenuated by 1/sqrt(n) (power conserving)."""
    if n < 1:
        raise DomainError("branch count must be >= 1")
    scale = 1.0 / np.sqrt(n)
    return [x.with_samples(x.samples * scale) for _ in range(n)]


def combine(branches: list[TimeWaveform]) -> TimeWaveform:
    """Coherent elementwise sum of equally long branches."""
    if not branches:
        raise LengthError("need at least one branch")
    length = branches[0].samples.size
    if any(b.samples.size != length for b in branches):
        raise LengthError("branches must share the same length")
    total = np.sum([b.samples for b in branches], axis=0)
    return branches[0].with_samples(total)


def phase_shift(branches: list[TimeWaveform], phases) -> list[TimeWaveform]:
    """Per-branch complex rotation by arbitrary phases (radians)."""
    phases = np.asarray(phases, dtype=np.float64)
    if phases.size != len(branches):
        raise LengthError("one phase per branch required")
    return [b.with_samples(b.samples * np.exp(1j * theta))
            for b, theta in zip(branches, phases)]
