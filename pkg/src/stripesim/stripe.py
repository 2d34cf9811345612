"""Stripe assembly, booster gain calibration, and end-to-end propagation.

Downlink: the CU chain (DAC -> IQ/oscillator -> PA) feeds the first fiber
segment; every RU before the active one boosts in-line (input coupler ->
booster -> output coupler); the active RU splits across its antenna
branches, phase shifts, amplifies per branch and radiates. The wireless
hop applies the per-subcarrier channel in the resource-grid domain and
adds the receiver noise floor. Uplink mirrors the chain back to the CU.

Exactly one RU is active per run. Every component draws from its own
random stream keyed by (seed, stripe, node, tag), so results are
independent of evaluation order; (configs, seed) fully determine every
output bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import components as comp
from . import streams
from .channel import (ChannelRealization, TdlParams, add_awgn,
                      add_thermal_noise, apply_channel, bulk_delay,
                      identity_channel, los_channel, rayleigh_channel,
                      tdl_channel, timing_advance)
from .config import (ComponentBank, EnvironmentConfig, LinearElementSpec,
                     WaveformConfig, validate_cross)
from .errors import (CalibrationInfeasible, ConfigError, LengthError,
                     TruncationWarning)
from .metrics import MetricReport, estimate_channel, report
from .touchstone import interpolate_s21, to_impulse_response
from .waveform import (ResourceGrid, SubcarrierGrid, build_resource_grid,
                       extract_symbols, map_qam, ofdm_modulate, pilot_mask,
                       pilot_sequence, set_power, synthesize_symbols,
                       TimeWaveform)

CU_NODE = 0  # node ids within a stripe: CU = 0, RU i = i + 1


def make_grid(env: EnvironmentConfig, wf: WaveformConfig,
              dataset_header=None) -> SubcarrierGrid:
    """Subcarrier grid from the environment (or dataset) plus oversampling."""
    if env.sub_thz is not None:
        fc, bw, q = env.sub_thz.fc, env.sub_thz.bw, env.sub_thz.num_subcarriers
    elif dataset_header is not None:
        fc, bw, q = dataset_header.fc, dataset_header.bw, dataset_header.num_subcarriers
    else:
        raise ConfigError("no sub_thz block in the environment and no dataset grid")
    return SubcarrierGrid(fc=fc, bw=bw, num_subcarriers=q,
                          oversampling=wf.oversampling_factor)


def _prepare_element(spec: LinearElementSpec, grid: SubcarrierGrid) -> comp.LinearElementParams:
    """Materialize a config-level element onto the run's oversampled band."""
    if spec.model != "s2p_filter":
        return comp.LinearElementParams(model=spec.model, loss_db=spec.loss_db,
                                        domain=spec.domain, length_m=spec.length_m,
                                        group_velocity=spec.group_velocity)
    expanded = grid.expanded()
    fr = interpolate_s21(spec.network, expanded)
    response = impulse = None
    if spec.domain == "frequency":
        response = fr
    else:
        impulse = to_impulse_response(fr, min(spec.n_taps, expanded.num_subcarriers))
        if impulse.captured_energy < 0.99:
            warnings.warn(
                f"impulse truncation keeps only {impulse.captured_energy:.4f} "
                f"of the response energy ({impulse.n_taps} taps)",
                TruncationWarning, stacklevel=2)
    return comp.LinearElementParams(model="s2p_filter", loss_db=spec.loss_db,
                                    domain=spec.domain, response=response,
                                    impulse=impulse, length_m=spec.length_m,
                                    group_velocity=spec.group_velocity)


@dataclass(frozen=True)
class StripeTopology:
    """One stripe with prepared component templates.

    ``fiber_lengths[i]`` is the segment feeding RU i (segment 0 is the
    CU fiber). ``booster_gains_db`` overrides the configured booster gain
    when calibration ran.
    """

    stripe_id: int
    cu_position: tuple
    ru_positions: tuple
    fiber_lengths: tuple
    grid: SubcarrierGrid
    wf: WaveformConfig
    bank: ComponentBank
    fiber: comp.LinearElementParams
    coupler: comp.LinearElementParams
    n_antennas: int
    booster_gains_db: tuple | None = None

    @property
    def n_rus(self) -> int:
        return len(self.ru_positions)

    def booster_params(self, ru_index: int) -> comp.AmplifierParams:
        params = self.bank.boost_amplifier
        if self.booster_gains_db is not None:
            params = replace(params, gain_db=self.booster_gains_db[ru_index])
        return params

    def with_gains(self, gains_db) -> "StripeTopology":
        return replace(self, booster_gains_db=tuple(gains_db))


def build_stripe(env: EnvironmentConfig, bank: ComponentBank, stripe_id: int,
                 grid: SubcarrierGrid, wf: WaveformConfig) -> StripeTopology:
    """Assemble the stripe: geometry, fiber segments, component templates."""
    try:
        nodes = env.stripe_nodes(stripe_id)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    cu, rus = nodes[0], nodes[1:]
    lengths = [env.central_unit_fiber_length]
    for prev, nxt in zip(rus[:-1], rus[1:]):
        seg = float(np.linalg.norm(np.asarray(nxt.position) - np.asarray(prev.position)))
        if seg <= 0:
            raise ConfigError(f"stripe {stripe_id}: coincident RU positions")
        lengths.append(seg)
    return StripeTopology(
        stripe_id=stripe_id,
        cu_position=cu.position,
        ru_positions=tuple(r.position for r in rus),
        fiber_lengths=tuple(lengths),
        grid=grid, wf=wf, bank=bank,
        fiber=_prepare_element(bank.fiber, grid),
        coupler=_prepare_element(bank.coupler, grid),
        n_antennas=env.antenna.n_antennas,
    )


# ---------------------------------------------------------------------------
# Chain propagation machinery
# ---------------------------------------------------------------------------

@dataclass
class _Chain:
    """Mutable propagation state: waveform, accumulated delay, taps."""

    wf: TimeWaveform
    cp_samples: int
    n_fft: int
    offset: int = 0
    taps: list | None = None
    apply_delays: bool = True
    linear_only: bool = False  # calibration mode: amplifiers as pure gain, no noise

    def _record(self, label: str, x_in: np.ndarray, x_out: np.ndarray):
        if self.taps is not None:
            self.taps.append((label, x_in, x_out))

    def element(self, label: str, params: comp.LinearElementParams,
                length_m: float | None = None):
        if length_m is not None:
            params = replace(params, length_m=length_m)
        x = self.wf
        if params.model == "s2p_filter" and params.domain == "frequency":
            out = self._fd_filter(x.samples, params.response.h)
            y = x.with_samples(out, tag=label)
        else:
            y = comp.linear_element_process(x, params, apply_delay=self.apply_delays)
            if params.domain == "time" and params.model == "s2p_filter" and self.apply_delays:
                self.offset += params.delay_samples(x.sample_rate)
            y = y.with_samples(y.samples, tag=label)
        self._record(label, x.samples, y.samples)
        self.wf = y

    def _fd_filter(self, samples: np.ndarray, h_centered: np.ndarray) -> np.ndarray:
        """Per-symbol circular filtering; the CP is rebuilt from the
        filtered tail so the stream stays a valid CP-OFDM signal."""
        frame = self.n_fft + self.cp_samples
        n_sym = (samples.size - self.offset) // frame
        out = samples.copy()
        if n_sym == 0:
            return out
        h = np.fft.ifftshift(h_centered)
        seg = out[self.offset:self.offset + n_sym * frame].reshape(n_sym, frame)
        body = np.fft.ifft(np.fft.fft(seg[:, self.cp_samples:], axis=1) * h, axis=1)
        seg[:, self.cp_samples:] = body
        if self.cp_samples:
            seg[:, :self.cp_samples] = body[:, -self.cp_samples:]
        return out

    def amplifier(self, label: str, params: comp.AmplifierParams,
                  rng: np.random.Generator):
        x = self.wf
        if self.linear_only:
            y = x.with_samples(x.samples * params.gain_linear, tag=label)
        else:
            y = comp.amplifier_process(x, params, rng)
            y = y.with_samples(y.samples, tag=label)
        self._record(label, x.samples, y.samples)
        self.wf = y

    def dac(self, label: str, params: comp.DacParams):
        x = self.wf
        y = x if self.linear_only else comp.dac_process(x, params)
        y = y.with_samples(y.samples, tag=label)
        self._record(label, x.samples, y.samples)
        self.wf = y

    def iq_mix(self, label: str, params: comp.IqParams, osc: comp.Oscillator,
               downmix: bool = False):
        x = self.wf
        if self.linear_only:
            y = x.with_samples(x.samples, tag=label)
        else:
            phases = osc.phases(x.samples.size)
            if downmix:
                phases = -phases
            y = comp.iq_modem_process(x, params, phases)
            y = y.with_samples(y.samples, tag=label)
        self._record(label, x.samples, y.samples)
        self.wf = y


def _cu_transmit(chain: _Chain, top: StripeTopology, seed: int):
    bank = top.bank
    chain.dac("cu_dac", bank.dac)
    osc = comp.Oscillator(bank.oscillator, top.grid.sample_rate,
                          streams.stream(seed, top.stripe_id, CU_NODE, "oscillator"))
    chain.iq_mix("cu_iq", bank.iq_modem, osc)
    chain.amplifier("cu_pa", bank.boost_amplifier,
                    streams.stream(seed, top.stripe_id, CU_NODE, "pa"))


def _cu_receive(chain: _Chain, top: StripeTopology, seed: int):
    bank = top.bank
    osc = comp.Oscillator(bank.oscillator, top.grid.sample_rate,
                          streams.stream(seed, top.stripe_id, CU_NODE, "oscillator_rx"))
    chain.iq_mix("cu_rx_iq", bank.iq_modem, osc, downmix=True)
    chain.amplifier("cu_rx_amp", bank.boost_amplifier,
                    streams.stream(seed, top.stripe_id, CU_NODE, "lna"))


def _branch_chain(branch: TimeWaveform, chain: _Chain) -> _Chain:
    return _Chain(wf=branch, cp_samples=chain.cp_samples, n_fft=chain.n_fft,
                  offset=chain.offset, taps=chain.taps,
                  apply_delays=chain.apply_delays, linear_only=chain.linear_only)


def propagate_downlink(top: StripeTopology, wf_in: TimeWaveform, active_ru: int,
                       beam_phases, seed: int, record_taps: bool = False,
                       linear_only: bool = False):
    """CU chain -> trunk -> active-RU front end; returns the per-antenna
    air waveforms together with the tap list and the accumulated delay."""
    if not 0 <= active_ru < top.n_rus:
        raise ConfigError(f"active_ru {active_ru} out of range [0, {top.n_rus})")
    beam_phases = np.asarray(beam_phases, dtype=np.float64)
    if beam_phases.size != top.n_antennas:
        raise LengthError("one beam phase per antenna branch required")
    chain = _Chain(wf=wf_in, cp_samples=top.wf.cp_length * top.grid.oversampling,
                   n_fft=top.grid.n_fft, taps=[] if record_taps else None,
                   apply_delays=not linear_only, linear_only=linear_only)
    _cu_transmit(chain, top, seed)
    for i in range(active_ru + 1):
        node = i + 1
        chain.element(f"fiber{i}", top.fiber, length_m=top.fiber_lengths[i])
        chain.element(f"ru{i}_coupler_in", top.coupler)
        if i < active_ru:
            chain.amplifier(f"ru{i}_booster", top.booster_params(i),
                            streams.stream(seed, top.stripe_id, node, "booster"))
            chain.element(f"ru{i}_coupler_out", top.coupler)
    node = active_ru + 1
    branches = comp.split(chain.wf, top.n_antennas)
    branches = comp.phase_shift(branches, beam_phases)
    out = []
    for b, branch in enumerate(branches):
        sub = _branch_chain(branch, chain)
        sub.amplifier(f"ru{active_ru}_antenna_amp{b}", top.bank.antenna_amplifier,
                      streams.stream(seed, top.stripe_id, node, f"antenna_amp{b}"))
        out.append(sub.wf)
    return out, (tuple(chain.taps) if chain.taps is not None else ()), chain.offset


def propagate_uplink(top: StripeTopology, branch_waveforms, active_ru: int,
                     beam_phases, seed: int, record_taps: bool = False,
                     linear_only: bool = False):
    """Active-RU receive front end -> trunk in reverse -> CU receive chain.

    ``branch_waveforms`` are the per-antenna signals right after the
    wireless hop. Couplers swap roles relative to downlink.
    """
    if not 0 <= active_ru < top.n_rus:
        raise ConfigError(f"active_ru {active_ru} out of range [0, {top.n_rus})")
    beam_phases = np.asarray(beam_phases, dtype=np.float64)
    if beam_phases.size != top.n_antennas:
        raise LengthError("one beam phase per antenna branch required")
    taps: list | None = [] if record_taps else None
    node = active_ru + 1
    amped = []
    proto = _Chain(wf=branch_waveforms[0],
                   cp_samples=top.wf.cp_length * top.grid.oversampling,
                   n_fft=top.grid.n_fft, taps=taps,
                   apply_delays=not linear_only, linear_only=linear_only)
    for b, branch in enumerate(branch_waveforms):
        sub = _branch_chain(branch, proto)
        sub.amplifier(f"ru{active_ru}_antenna_amp{b}", top.bank.antenna_amplifier,
                      streams.stream(seed, top.stripe_id, node, f"antenna_amp{b}"))
        amped.append(sub.wf)
    shifted = comp.phase_shift(amped, beam_phases)
    chain = _Chain(wf=comp.combine(shifted),
                   cp_samples=proto.cp_samples, n_fft=proto.n_fft,
                   taps=taps, apply_delays=proto.apply_delays,
                   linear_only=linear_only)
    chain.element(f"ru{active_ru}_coupler_out", top.coupler)
    for i in range(active_ru - 1, -1, -1):
        node = i + 1
        chain.element(f"fiber{i + 1}", top.fiber, length_m=top.fiber_lengths[i + 1])
        chain.element(f"ru{i}_coupler_out", top.coupler)
        chain.amplifier(f"ru{i}_booster", top.booster_params(i),
                        streams.stream(seed, top.stripe_id, node, "booster"))
        chain.element(f"ru{i}_coupler_in", top.coupler)
    chain.element("fiber0", top.fiber, length_m=top.fiber_lengths[0])
    _cu_receive(chain, top, seed)
    return chain.wf, (tuple(chain.taps) if chain.taps is not None else ()), chain.offset


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    gains_db: tuple
    clipped: tuple
    input_powers_dbm: tuple
    output_powers_dbm: tuple

    @property
    def feasible(self) -> bool:
        return not any(self.clipped)


def _dbm(power_watts: float) -> float:
    return 10.0 * np.log10(power_watts / 1e-3)


def calibrate_gains(top: StripeTopology, target_power_dbm: float,
                    max_gain_db: float, seed: int = 0) -> CalibrationResult:
    """Front-to-back booster gain assignment in linear measurement mode.

    A flat QPSK reference at the target power is injected into the first
    fiber segment; at every booster input the passband mean power is
    measured (on the second OFDM symbol, past any filter transient) and
    the gain is set to min(target/P, max_gain). Gains clipped at max_gain
    raise a `CalibrationInfeasible` warning but calibration completes.
    """
    grid, wf = top.grid, top.wf
    ref_bits = streams.stream(seed, "calibration-reference").integers(
        0, 2, 2 * grid.num_subcarriers * 2)
    symbols = map_qam(ref_bits, 4).reshape(grid.num_subcarriers, 2)
    ref = TimeWaveform(synthesize_symbols(symbols, grid, wf.cp_length),
                       sample_rate=grid.sample_rate, origin_tag="calibration")
    target_w = 10.0 ** ((target_power_dbm - 30.0) / 10.0)
    max_gain = 10.0 ** (max_gain_db / 10.0)

    chain = _Chain(wf=ref, cp_samples=wf.cp_length * grid.oversampling,
                   n_fft=grid.n_fft, apply_delays=False, linear_only=True)

    def _passband_power() -> float:
        # mean power over the second symbol's bins: past any filter
        # transient and free of cyclic-prefix duplication bias
        bins = extract_symbols(chain.wf.samples, grid, wf.cp_length, 2)
        return float(np.mean(np.abs(bins[:, 1]) ** 2))

    # normalize so the measured passband power of the injected reference
    # is exactly the target (injection and measurement share one meter)
    chain.wf = ref.with_samples(ref.samples * np.sqrt(target_w / _passband_power()))

    gains, clipped, p_in, p_out = [], [], [], []
    for i in range(top.n_rus):
        chain.element(f"fiber{i}", top.fiber, length_m=top.fiber_lengths[i])
        chain.element(f"ru{i}_coupler_in", top.coupler)
        power_in = _passband_power()
        gain = target_w / power_in
        was_clipped = gain > max_gain
        gain = min(gain, max_gain)
        chain.wf = chain.wf.with_samples(chain.wf.samples * np.sqrt(gain))
        gains.append(10.0 * np.log10(gain))
        clipped.append(was_clipped)
        p_in.append(_dbm(power_in))
        p_out.append(_dbm(power_in * gain))
        chain.element(f"ru{i}_coupler_out", top.coupler)
    if any(clipped):
        bad = [i for i, c in enumerate(clipped) if c]
        warnings.warn(f"boosters {bad} clipped at max_gain={max_gain_db} dB; "
                      f"target power unreachable", CalibrationInfeasible,
                      stacklevel=2)
    return CalibrationResult(gains_db=tuple(gains), clipped=tuple(clipped),
                             input_powers_dbm=tuple(p_in),
                             output_powers_dbm=tuple(p_out))


# ---------------------------------------------------------------------------
# End-to-end link
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkResult:
    """Everything one end-to-end run produced."""

    tx_grid: ResourceGrid
    rx_symbols: np.ndarray
    h_estimate: np.ndarray
    metrics: MetricReport
    stage_taps: tuple
    ru_branch_waveforms: tuple
    channel: ChannelRealization
    direction: str
    stripe_id: int
    active_ru: int
    ue_index: int
    seed: int
    calibration: CalibrationResult | None = None
    delay_samples: int = 0


def resolve_channel(env: EnvironmentConfig, grid: SubcarrierGrid, source,
                    ue_index: int, stripe_id: int, active_ru: int, seed: int,
                    n_tx: int, n_rx: int) -> ChannelRealization:
    """Turn a channel-source spec into a realization for one link.

    Accepts 'los', 'rayleigh', 'identity', 'tdl' (or ('tdl', TdlParams)),
    a dataset reader, or a ready ChannelRealization. Model geometry uses
    the same array helper as the synthetic dataset generator, so dataset
    and model paths agree.
    """
    from .dataset import CfrDatasetReader, array_geometry  # local: avoid cycle

    if isinstance(source, ChannelRealization):
        return source
    if isinstance(source, CfrDatasetReader):
        return source.get_channel(ue_index, stripe_id, active_ru,
                                  oversampling=1)
    model = source
    tdl_params = None
    if isinstance(source, (tuple, list)):
        model, tdl_params = source[0], source[1]
    base = SubcarrierGrid(grid.fc, grid.bw, grid.num_subcarriers, 1)
    if model == "identity":
        return identity_channel(base, n_tx)
    ue_position = env.ue_positions[ue_index]
    tx, rx = array_geometry(env, base, stripe_id, active_ru, ue_position,
                            n_tx=n_tx, n_rx=n_rx)
    if model == "los":
        return los_channel(base, tx, rx)
    rng = streams.stream(seed, "channel", ue_index, stripe_id, active_ru)
    centroid = float(np.linalg.norm(np.mean(tx, axis=0) - np.mean(rx, axis=0)))
    if model == "rayleigh":
        return rayleigh_channel(base, n_tx, n_rx, rng, distance=centroid)
    if model == "tdl":
        return tdl_channel(base, tdl_params or TdlParams(), n_tx, n_rx, rng,
                           distance=centroid)
    raise ConfigError(f"unknown channel source {source!r}")


def default_beam_phases(channel: ChannelRealization, direction: str) -> np.ndarray:
    """Conjugate-matched steering at the center subcarrier.

    Aligns the per-branch phases of the effective (combined over the UE
    side) channel so the over-the-air or combined sum adds coherently.
    """
    q0 = channel.h.shape[0] // 2
    effective = channel.h[q0].sum(axis=0)  # sum over UE elements -> per RU branch
    return -np.angle(effective)


def _ota_noise(y: np.ndarray, bank: ComponentBank, grid: SubcarrierGrid,
               seed: int, ota_snr_db: float | None) -> np.ndarray:
    rng = streams.stream(seed, "ota-noise")
    if ota_snr_db is not None:
        return add_awgn(y, ota_snr_db, rng)
    if bank.receiver.nf_db is not None:
        return add_thermal_noise(y, grid.bw, bank.receiver.nf_db, rng,
                                 bank.receiver.temperature)
    return y


def run_link(env: EnvironmentConfig, wf_cfg: WaveformConfig, bank: ComponentBank,
             channel_source, ue_index: int, stripe_id: int, active_ru: int,
             direction: str = "dl", seed: int = 0, *,
             calibrate: bool = False, record_taps: bool = False,
             ota_snr_db: float | None = None, ue_antennas: int = 1,
             beam_phases=None, dataset_header=None) -> LinkResult:
    """One end-to-end link: bits -> waveform -> stripe -> air -> metrics.

    Fully deterministic in (configs, seed). ``ota_snr_db`` overrides the
    receiver noise figure with a direct SNR injection (test fixtures).
    """
    if direction not in ("dl", "ul"):
        raise ConfigError(f"direction must be 'dl' or 'ul', got {direction!r}")
    from .dataset import CfrDatasetReader

    if isinstance(channel_source, CfrDatasetReader):
        dataset_header = channel_source.header
    check = validate_cross(env, wf_cfg, bank, dataset_header)
    if not check.ok:
        raise ConfigError("; ".join(f"{e.code}: {e.message}" for e in check.errors))
    n_rus = len(env.stripe_nodes(stripe_id)) - 1
    if not 0 <= active_ru < n_rus:
        raise ConfigError(f"active_ru {active_ru} out of range [0, {n_rus})")
    if not 0 <= ue_index < len(env.ue_positions) and not isinstance(
            channel_source, (CfrDatasetReader, ChannelRealization)):
        raise ConfigError(f"ue_index {ue_index} out of range")

    grid = make_grid(env, wf_cfg, dataset_header)
    n_tx = env.antenna.n_antennas
    n_rx = ue_antennas
    if isinstance(channel_source, CfrDatasetReader):
        n_tx, n_rx = dataset_header.n_tx, dataset_header.n_rx
    elif channel_source == "identity":
        n_rx = n_tx
    elif isinstance(channel_source, ChannelRealization):
        n_tx, n_rx = channel_source.n_tx, channel_source.n_rx

    realization = resolve_channel(env, grid, channel_source, ue_index,
                                  stripe_id, active_ru, seed, n_tx, n_rx)
    n_tx, n_rx = realization.n_tx, realization.n_rx

    topology = build_stripe(env, bank, stripe_id, grid, wf_cfg)
    if topology.n_antennas != n_tx:
        topology = replace(topology, n_antennas=n_tx)
    calibration = None
    if calibrate:
        calibration = calibrate_gains(topology, bank.calibration.target_power_dbm,
                                      bank.calibration.max_gain_db, seed=seed)
        topology = topology.with_gains(calibration.gains_db)

    if beam_phases is None:
        beam_phases = default_beam_phases(realization, direction)

    mask = pilot_mask(wf_cfg.pilot_mode, wf_cfg.pilot_spacing,
                      grid.num_subcarriers, wf_cfg.n_ofdm_symbols)
    m = int(np.log2(wf_cfg.qam_order))
    n_bits = int(np.count_nonzero(~mask)) * m
    bits = streams.stream(seed, "data-bits").integers(0, 2, n_bits)
    tx_grid = build_resource_grid(bits, wf_cfg, grid, seed)
    tx_wf = set_power(ofdm_modulate(tx_grid, grid, wf_cfg.cp_length),
                      wf_cfg.tx_power)

    s = wf_cfg.n_ofdm_symbols
    if direction == "dl":
        branches, taps, offset = propagate_downlink(
            topology, tx_wf, active_ru, beam_phases, seed, record_taps)
        branch_grids = np.stack(
            [extract_symbols(b.samples[offset:offset + tx_wf.samples.size],
                             grid, wf_cfg.cp_length, s) for b in branches],
            axis=1)  # (Q, n_tx, S)
        air = apply_channel(branch_grids, realization)  # (Q, n_rx, S)
        air = _ota_noise(air, bank, grid, seed, ota_snr_db)
        rx_symbols = air.sum(axis=1)  # coherent UE combining
        branch_out = tuple(branches)
    else:
        ue_grid = extract_symbols(tx_wf.samples, grid, wf_cfg.cp_length, s)
        ue_elems = np.repeat(ue_grid[:, None, :], n_rx, axis=1) / np.sqrt(n_rx)
        up = realization.transposed()  # (Q, n_tx_ru, n_rx_ue)
        at_ru = apply_channel(ue_elems, up)  # (Q, n_tx_ru, S)
        at_ru = _ota_noise(at_ru, bank, grid, seed, ota_snr_db)
        branches = [TimeWaveform(
            synthesize_symbols(at_ru[:, b, :], grid, wf_cfg.cp_length),
            sample_rate=grid.sample_rate, origin_tag=f"ru_rx{b}")
            for b in range(n_tx)]
        cu_wf, taps, offset = propagate_uplink(
            topology, branches, active_ru, beam_phases, seed, record_taps)
        rx_symbols = extract_symbols(
            cu_wf.samples[offset:offset + tx_wf.samples.size],
            grid, wf_cfg.cp_length, s)
        branch_out = tuple(branches)

    # receiver timing sync: rotate the channel's bulk delay off the grid
    rx_symbols = timing_advance(rx_symbols, realization.grid,
                                bulk_delay(realization))
    h_hat = estimate_channel(rx_symbols, mask,
                             pilot_sequence(seed, int(np.count_nonzero(mask))))
    link_metrics = report(tx_grid, rx_symbols, h_hat)
    return LinkResult(tx_grid=tx_grid, rx_symbols=rx_symbols, h_estimate=h_hat,
                      metrics=link_metrics, stage_taps=taps,
                      ru_branch_waveforms=branch_out, channel=realization,
                      direction=direction, stripe_id=stripe_id,
                      active_ru=active_ru, ue_index=ue_index, seed=seed,
                      calibration=calibration, delay_samples=offset)
