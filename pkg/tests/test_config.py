"""YAML loading, schema/geometry validation, cross-checks, round trips."""

import warnings

import pytest
import yaml

from stripesim.config import (components_to_dict, environment_to_dict,
                              load_components, load_environment, load_waveform,
                              validate_cross, waveform_to_dict)
from stripesim.dataset import DatasetHeader
from stripesim.errors import (GeometryError, ParseError, SchemaError,
                              TouchstoneError, UnknownKeyWarning,
                              UnsupportedModel)

from conftest import COMP_YAML, ENV_YAML, WF_YAML, flat_s2p


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

def test_load_environment_paper_grid(tmp_path):
    env = load_environment(_write(tmp_path, "env.yaml", ENV_YAML))
    assert env.room == (10.0, 6.0, 3.0)
    assert env.n_stripes == 1
    assert len(env.radio_stripes[0]) == 4  # CU + 3 RUs
    assert env.sub_thz.fc == 157.75e9
    assert env.sub_thz.bw == 3.0e9
    assert env.sub_thz.num_subcarriers == 256
    assert env.central_unit_fiber_length == 2.0
    assert env.stripe_config.n_rus == 3  # paper-style N_RUs key accepted
    assert env.sub10ghz  # parsed, retained, never used


def test_environment_paper_dimension_example(tmp_path):
    """10x6x3 room, 10 RUs spaced 0.5 m, fc 157.75 GHz, Q=4096."""
    nodes = [{"kind": "central_unit", "position": [0.1, 3.0, 2.8]}]
    nodes += [{"kind": "radio_unit", "position": [0.6 + 0.5 * i, 3.0, 2.8]}
              for i in range(10)]
    doc = {
        "room": {"x": 10, "y": 6, "z": 3},
        "stripe_config": {"n_stripes": 1, "n_rus": 10, "inter_ru_spacing": 0.5},
        "radio_stripes": [nodes],
        "ue_positions": [[5.0, 3.0, 1.5]],
        "sub_thz": {"fc": 157.75e9, "bw": 3.0e9, "num_subcarriers": 4096},
        "central_unit_fiber_length": 1.0,
    }
    env = load_environment(_write(tmp_path, "env.yaml", yaml.safe_dump(doc)))
    assert len(env.radio_stripes[0]) == 11
    assert env.sub_thz.num_subcarriers == 4096


def test_stripe_must_start_with_cu(tmp_path):
    bad = ENV_YAML.replace("- - {kind: central_unit, position: [0.1, 3.0, 2.8]}",
                           "- - {kind: radio_unit, position: [0.1, 3.0, 2.8]}")
    with pytest.raises(GeometryError):
        load_environment(_write(tmp_path, "env.yaml", bad))


def test_second_cu_rejected(tmp_path):
    bad = ENV_YAML.replace("- {kind: radio_unit, position: [1.6, 3.0, 2.8]}",
                           "- {kind: central_unit, position: [1.6, 3.0, 2.8]}")
    with pytest.raises(GeometryError):
        load_environment(_write(tmp_path, "env.yaml", bad))


def test_ue_outside_room(tmp_path):
    bad = ENV_YAML.replace("- [3.0, 2.0, 1.5]", "- [12.0, 0.0, 1.0]")
    with pytest.raises(GeometryError):
        load_environment(_write(tmp_path, "env.yaml", bad))


def test_node_outside_room(tmp_path):
    bad = ENV_YAML.replace("{kind: radio_unit, position: [1.6, 3.0, 2.8]}",
                           "{kind: radio_unit, position: [1.6, 3.0, 3.8]}")
    with pytest.raises(GeometryError):
        load_environment(_write(tmp_path, "env.yaml", bad))


def test_unknown_keys_warn_but_load(tmp_path):
    doc = ENV_YAML + "rt_only_metadata: {solver: something}\n"
    with pytest.warns(UnknownKeyWarning):
        env = load_environment(_write(tmp_path, "env.yaml", doc))
    assert env.room == (10.0, 6.0, 3.0)
    # retained-and-ignored: the key survives a serialize/load cycle
    assert env.extras == {"rt_only_metadata": {"solver": "something"}}
    redumped = yaml.safe_dump(environment_to_dict(env))
    with pytest.warns(UnknownKeyWarning):
        again = load_environment(_write(tmp_path, "env_rt.yaml", redumped))
    assert again == env


def test_sub10ghz_never_influences_simulation(tmp_path):
    """Two configs differing only in the sub-10 GHz block run identically."""
    import numpy as np
    from stripesim.stripe import run_link
    from stripesim.config import WaveformConfig, ComponentBank

    env_a = load_environment(_write(tmp_path, "a.yaml", ENV_YAML))
    doc_b = ENV_YAML.replace("fc: 3.5e9", "fc: 6.0e9")
    env_b = load_environment(_write(tmp_path, "b.yaml", doc_b))
    assert env_a.sub10ghz != env_b.sub10ghz
    wf = WaveformConfig(n_ofdm_symbols=2, qam_order=4, oversampling_factor=1,
                        cp_length=8, pilot_spacing=8, pilot_mode="scattered")
    ra = run_link(env_a, wf, ComponentBank(), "los", 0, 0, 1, seed=4)
    rb = run_link(env_b, wf, ComponentBank(), "los", 0, 0, 1, seed=4)
    np.testing.assert_array_equal(ra.rx_symbols, rb.rx_symbols)


def test_malformed_yaml(tmp_path):
    with pytest.raises(ParseError):
        load_environment(_write(tmp_path, "env.yaml", "room: [1, 2\n"))
    with pytest.raises(ParseError):
        load_environment(tmp_path / "missing.yaml")


def test_non_power_of_two_subcarriers(tmp_path):
    bad = ENV_YAML.replace("num_subcarriers: 256", "num_subcarriers: 1000")
    with pytest.raises(SchemaError):
        load_environment(_write(tmp_path, "env.yaml", bad))


# ---------------------------------------------------------------------------
# Waveform
# ---------------------------------------------------------------------------

def test_load_waveform_valid(tmp_path):
    wf = load_waveform(_write(tmp_path, "wf.yaml", WF_YAML))
    assert wf.waveform_type == "cp-ofdm"
    assert wf.n_ofdm_symbols == 4
    assert wf.qam_order == 16
    assert wf.pilot_mode == "scattered"


def test_waveform_type_unsupported(tmp_path):
    bad = WF_YAML.replace("cp-ofdm", "dft-s-ofdm")
    with pytest.raises(UnsupportedModel):
        load_waveform(_write(tmp_path, "wf.yaml", bad))


def test_qam_order_not_power_of_four(tmp_path):
    bad = WF_YAML.replace("qam_order: 16", "qam_order: 8")
    with pytest.raises(SchemaError):
        load_waveform(_write(tmp_path, "wf.yaml", bad))


def test_cp_length_equal_q_rejected(tmp_path):
    bad = WF_YAML.replace("cp_length: 16", "cp_length: 256") + "num_subcarriers: 256\n"
    with pytest.raises(SchemaError):
        load_waveform(_write(tmp_path, "wf.yaml", bad))


def test_pilot_spacing_must_divide(tmp_path):
    bad = WF_YAML.replace("pilot_spacing: 8", "pilot_spacing: 7") + "num_subcarriers: 256\n"
    with pytest.raises(SchemaError):
        load_waveform(_write(tmp_path, "wf.yaml", bad))


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------

def test_load_components_defaults_ideal(tmp_path):
    bank = load_components(_write(tmp_path, "comp.yaml", COMP_YAML))
    assert bank.boost_amplifier.mode == "ideal"
    assert bank.fiber.model == "ideal"
    assert bank.dac.mode == "ideal"
    assert bank.receiver.nf_db is None


def test_load_components_s2p_eager_parse(tmp_path):
    (tmp_path / "coupler.s2p").write_text(flat_s2p(0.7))
    doc = COMP_YAML.replace(
        "coupler: {model: ideal}",
        "coupler: {model: s2p_filter, file: coupler.s2p, domain: frequency}")
    bank = load_components(_write(tmp_path, "comp.yaml", doc))
    assert bank.coupler.network is not None
    assert bank.coupler.network.s21[0] == 0.7


def test_load_components_fixed_damping(tmp_path):
    doc = COMP_YAML.replace("fiber: {model: ideal}",
                            "fiber: {model: fixed_damping, loss_db: 6.0}")
    bank = load_components(_write(tmp_path, "comp.yaml", doc))
    assert bank.fiber.model == "fixed_damping"
    assert bank.fiber.loss_db == 6.0


def test_missing_s2p_file(tmp_path):
    doc = COMP_YAML.replace(
        "coupler: {model: ideal}",
        "coupler: {model: s2p_filter, file: nope.s2p, domain: frequency}")
    with pytest.raises(TouchstoneError) as err:
        load_components(_write(tmp_path, "comp.yaml", doc))
    assert err.value.kind == TouchstoneError.FILE_NOT_FOUND


def test_amplifier_full_block(tmp_path):
    doc = COMP_YAML.replace(
        "boost_amplifier: {model: ideal, gain_db: 0.0}",
        "boost_amplifier: {model: tanh, gain_db: 12.0, sat_amplitude: 0.5, "
        "nf_db: 7.0, bandwidth: 3.0e9}")
    bank = load_components(_write(tmp_path, "comp.yaml", doc))
    amp = bank.boost_amplifier
    assert amp.mode == "tanh"
    assert amp.gain_db == 12.0
    assert amp.sat_amplitude == 0.5
    assert amp.nf_db == 7.0


def test_polynomial_coefficients_parsed(tmp_path):
    doc = COMP_YAML.replace(
        "antenna_amplifier: {model: ideal, gain_db: 0.0}",
        "antenna_amplifier: {model: polynomial, poly_coeffs: [[1.0, 0.0], [-0.1, 0.05]]}")
    bank = load_components(_write(tmp_path, "comp.yaml", doc))
    assert bank.antenna_amplifier.poly_coeffs == (1.0 + 0j, -0.1 + 0.05j)


# ---------------------------------------------------------------------------
# Cross validation
# ---------------------------------------------------------------------------

def _loaded(tmp_path):
    env = load_environment(_write(tmp_path, "env.yaml", ENV_YAML))
    wf = load_waveform(_write(tmp_path, "wf.yaml", WF_YAML))
    bank = load_components(_write(tmp_path, "comp.yaml", COMP_YAML))
    return env, wf, bank


def _header(q=256, fc=157.75e9, bw=3.0e9):
    return DatasetHeader(n_stripes=1, n_rus=3, n_rx=1, n_tx=1,
                         num_subcarriers=q, fc=fc, bw=bw)


def test_validate_cross_clean(tmp_path):
    env, wf, bank = _loaded(tmp_path)
    rep = validate_cross(env, wf, bank, _header())
    assert rep.ok
    assert rep.errors == ()


def test_validate_cross_grid_mismatch(tmp_path):
    env, wf, bank = _loaded(tmp_path)
    rep = validate_cross(env, wf, bank, _header(q=2048))
    assert not rep.ok
    assert any(e.code == "GridMismatch" for e in rep.errors)


def test_validate_cross_isi_warning(tmp_path):
    (tmp_path / "fiber.s2p").write_text(flat_s2p(0.5))
    doc = COMP_YAML.replace(
        "fiber: {model: ideal}",
        "fiber: {model: s2p_filter, file: fiber.s2p, domain: time, taps: 128}")
    env = load_environment(_write(tmp_path, "env.yaml", ENV_YAML))
    wf = load_waveform(_write(tmp_path, "wf.yaml", WF_YAML))  # cp 16 * os 2 = 32
    bank = load_components(_write(tmp_path, "comp.yaml", doc))
    rep = validate_cross(env, wf, bank)
    assert rep.ok
    assert any(w.code == "InterSymbolInterferenceRisk" for w in rep.warnings)


def test_validate_cross_pure(tmp_path):
    env, wf, bank = _loaded(tmp_path)
    assert validate_cross(env, wf, bank) == validate_cross(env, wf, bank)


# ---------------------------------------------------------------------------
# Serialization round trip
# ---------------------------------------------------------------------------

def test_environment_round_trip(tmp_path):
    env = load_environment(_write(tmp_path, "env.yaml", ENV_YAML))
    dumped = yaml.safe_dump(environment_to_dict(env))
    env2 = load_environment(_write(tmp_path, "env2.yaml", dumped))
    # sub10ghz is opaque; everything interpreted must round-trip exactly
    assert env2.room == env.room
    assert env2.radio_stripes == env.radio_stripes
    assert env2.ue_positions == env.ue_positions
    assert env2.sub_thz == env.sub_thz
    assert env2.stripe_config == env.stripe_config
    assert env2.antenna == env.antenna


def test_waveform_round_trip(tmp_path):
    wf = load_waveform(_write(tmp_path, "wf.yaml", WF_YAML))
    dumped = yaml.safe_dump(waveform_to_dict(wf))
    assert load_waveform(_write(tmp_path, "wf2.yaml", dumped)) == wf


def test_components_round_trip(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("error", UnknownKeyWarning)
        bank = load_components(_write(tmp_path, "comp.yaml", COMP_YAML))
        dumped = yaml.safe_dump(components_to_dict(bank))
        bank2 = load_components(_write(tmp_path, "comp2.yaml", dumped))
    assert bank2 == bank
