"""Command-line front end.

Subcommands: ``run`` (single link), ``sweep-ru`` (RU-activation heatmap),
``calibrate`` (booster gains), ``inspect-s2p`` (S-parameter CSV export)
and ``gen-channels`` (synthetic CFR1 dataset). All outputs are CSV/JSON;
a manifest.json written atomically at run end snapshots the resolved
configs, seed and tool version so any run can be re-executed exactly.

Exit codes: 0 success, 2 configuration error, 3 runtime error. The log
level comes from the STRIPESIM_LOG environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, streams
from .channel import TdlParams
from .config import (components_to_dict, environment_to_dict, load_components,
                     load_environment, load_waveform, waveform_to_dict)
from .dataset import generate_synthetic, read_dataset, write_dataset
from .errors import StripeSimError, ConfigError, GeometryError, ParseError, \
    SchemaError, TouchstoneError, UnsupportedModel, UnsupportedMode
from .metrics import am_am_extract
from .stripe import build_stripe, calibrate_gains, make_grid, run_link
from .touchstone import read_touchstone
from .waveform import SubcarrierGrid

log = logging.getLogger("stripesim")

_CONFIG_ERRORS = (ParseError, SchemaError, GeometryError, UnsupportedModel,
                  UnsupportedMode, TouchstoneError, ConfigError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fmt(value) -> str:
    """Full round-trip precision for CSV cells."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out_dir: Path, payload: dict):
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(payload, indent=1, sort_keys=True))
    tmp.replace(out_dir / "manifest.json")


def _load_configs(args):
    env = load_environment(args.env)
    wf = load_waveform(args.waveform)
    bank = load_components(args.components)
    return env, wf, bank


def _resolve_channel_arg(spec: str):
    """'los' | 'rayleigh' | 'tdl[:beta[:taps]]' | 'dataset:PATH'."""
    if spec.startswith("dataset:"):
        return read_dataset(spec.split(":", 1)[1])
    if spec.startswith("tdl"):
        parts = spec.split(":")
        beta = float(parts[1]) if len(parts) > 1 else 0.5
        n_taps = int(parts[2]) if len(parts) > 2 else 8
        return ("tdl", TdlParams(n_taps=n_taps, beta=beta))
    if spec in ("los", "rayleigh", "identity"):
        return spec
    raise ConfigError(f"unknown channel source {spec!r}")


def _manifest_base(args, extra_flags: dict) -> dict:
    env, wf, bank = _load_configs(args)
    return {
        "tool": "stripesim",
        "version": __version__,
        "config_paths": {"env": str(Path(args.env).resolve()),
                         "waveform": str(Path(args.waveform).resolve()),
                         "components": str(Path(args.components).resolve())},
        "configs": {"environment": environment_to_dict(env),
                    "waveform": waveform_to_dict(wf),
                    "components": components_to_dict(bank)},
        "flags": extra_flags,
    }


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _metrics_row(result) -> list:
    r = result.metrics
    return [result.stripe_id, result.active_ru, result.ue_index, result.seed,
            result.direction, r.nmse_db, r.sndr_db, r.evm_percent, r.ber, r.n_bits]


_METRICS_HEADER = ["stripe_id", "ru_id", "ue_id", "seed", "direction",
                   "nmse_db", "sndr_db", "evm_percent", "ber", "n_bits"]


def cmd_run(args) -> int:
    started = time.monotonic()
    env, wf, bank = _load_configs(args)
    channel = _resolve_channel_arg(args.channel)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_link(env, wf, bank, channel, ue_index=args.ue,
                      stripe_id=args.stripe, active_ru=args.ru,
                      direction=args.direction, seed=args.seed,
                      calibrate=args.calibrate, record_taps=args.taps)
    _write_csv(out_dir / "metrics.csv", _METRICS_HEADER, [_metrics_row(result)])
    outputs = ["metrics.csv"]
    if args.taps:
        outputs += _export_taps(out_dir, result.stage_taps)
    if args.dump_channel:
        outputs.append(_export_channel(out_dir, result.channel))
    manifest = _manifest_base(args, {
        "command": "run", "channel": args.channel, "ue": args.ue,
        "stripe": args.stripe, "ru": args.ru, "direction": args.direction,
        "seed": args.seed, "taps": args.taps, "calibrate": args.calibrate,
        "dump_channel": args.dump_channel,
    })
    manifest["outputs"] = outputs
    manifest["duration_s"] = time.monotonic() - started
    _write_manifest(out_dir, manifest)
    log.info("run finished: nmse=%.2f dB ber=%.3g", result.metrics.nmse_db,
             result.metrics.ber)
    return EXIT_OK


def _export_taps(out_dir: Path, stage_taps) -> list[str]:
    """Per-stage waveform dumps plus the stage-wise AM/AM table."""
    outputs = []
    taps_dir = out_dir / "taps"
    taps_dir.mkdir(exist_ok=True)
    for order, (label, _x_in, x_out) in enumerate(stage_taps):
        name = f"taps/{order:02d}_{label}.csv"
        rows = [[i, z.real, z.imag] for i, z in enumerate(x_out)]
        _write_csv(out_dir / name, ["index", "re", "im"], rows)
        outputs.append(name)
    amp_stages = [t for t in stage_taps
                  if "pa" in t[0] or "booster" in t[0] or "antenna_amp" in t[0]]
    if amp_stages:
        pairs = am_am_extract(amp_stages)
        n = min(len(x) for _, x, _ in pairs)
        header, columns = [], []
        for idx, (_label, x, y) in enumerate(pairs):
            header += [f"xstage{idx}", f"ystage{idx}"]
            columns += [x[:n], y[:n]]
        rows = np.column_stack(columns)
        _write_csv(out_dir / "am_am.csv", header, rows.tolist())
        outputs.append("am_am.csv")
    return outputs


def _export_channel(out_dir: Path, realization) -> str:
    rows = []
    h = realization.h
    for q in range(h.shape[0]):
        for k in range(h.shape[1]):
            for m in range(h.shape[2]):
                rows.append([q, k, m, h[q, k, m].real, h[q, k, m].imag])
    _write_csv(out_dir / "channel.csv", ["q", "rx", "tx", "re", "im"], rows)
    return "channel.csv"


# ---------------------------------------------------------------------------
# sweep-ru
# ---------------------------------------------------------------------------

_HEATMAP_HEADER = ["ru_id", "stripe_id", "nmse_cu", "sndr_cu", "ber"]


def _sweep_cell(payload) -> tuple:
    """One (stripe, ru) cell; module-level so worker processes can import it."""
    (env_path, wf_path, comp_path, channel_spec, ue, stripe_id, ru_id,
     direction, master_seed) = payload
    env = load_environment(env_path)
    wf = load_waveform(wf_path)
    bank = load_components(comp_path)
    channel = _resolve_channel_arg(channel_spec)
    cell_seed = streams.derive_seed(master_seed, stripe_id, ru_id)
    result = run_link(env, wf, bank, channel, ue_index=ue, stripe_id=stripe_id,
                      active_ru=ru_id, direction=direction, seed=cell_seed)
    return (ru_id, stripe_id, result.metrics.nmse_db, result.metrics.sndr_db,
            result.metrics.ber)


def cmd_sweep_ru(args) -> int:
    started = time.monotonic()
    env, wf, bank = _load_configs(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = []
    for stripe_id, stripe in enumerate(env.radio_stripes):
        for ru_id in range(len(stripe) - 1):
            cells.append((str(args.env), str(args.waveform), str(args.components),
                          args.channel, args.ue, stripe_id, ru_id,
                          args.direction, args.seed))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    rows.sort(key=lambda r: (r[1], r[0]))  # (stripe_id, ru_id)
    _write_csv(out_dir / "heatmap.csv", _HEATMAP_HEADER, [list(r) for r in rows])
    manifest = _manifest_base(args, {
        "command": "sweep-ru", "channel": args.channel, "ue": args.ue,
        "direction": args.direction, "seed": args.seed, "metric": args.metric,
        "jobs": args.jobs,
    })
    manifest["outputs"] = ["heatmap.csv"]
    manifest["duration_s"] = time.monotonic() - started
    _write_manifest(out_dir, manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    started = time.monotonic()
    env = load_environment(args.env)
    bank = load_components(args.components)
    wf = load_waveform(args.waveform)
    grid = make_grid(env, wf)
    target = args.target_dbm if args.target_dbm is not None \
        else bank.calibration.target_power_dbm
    max_gain = args.max_gain if args.max_gain is not None \
        else bank.calibration.max_gain_db
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for stripe_id in range(env.n_stripes):
        topology = build_stripe(env, bank, stripe_id, grid, wf)
        result = calibrate_gains(topology, target, max_gain, seed=args.seed)
        for ru_id, (gain, clipped) in enumerate(zip(result.gains_db, result.clipped)):
            rows.append([stripe_id, ru_id, gain, clipped])
    _write_csv(out_dir / "gains.csv",
               ["stripe_id", "ru_id", "gain_db", "clipped"], rows)
    manifest = _manifest_base(args, {
        "command": "calibrate", "target_dbm": target, "max_gain": max_gain,
        "seed": args.seed,
    })
    manifest["outputs"] = ["gains.csv"]
    manifest["duration_s"] = time.monotonic() - started
    _write_manifest(out_dir, manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect-s2p
# ---------------------------------------------------------------------------

def cmd_inspect_s2p(args) -> int:
    net = read_touchstone(args.file)
    # downstream plots apply 10*log10 to a linear "magnitude" column; the
    # flag picks whether that column holds |S21|^2 (power, exact dB) or
    # |S21| (voltage, as some measurement exports store it)
    if args.magnitude == "power":
        mag_db = 10.0 * np.log10(np.abs(net.s21) ** 2)
    else:
        mag_db = 10.0 * np.log10(np.abs(net.s21))
    phase = np.degrees(np.angle(net.s21))
    rows = [[f, m, p] for f, m, p in zip(net.freqs, mag_db, phase)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["frequency_hz", "magnitude_db", "phase_deg"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen-channels
# ---------------------------------------------------------------------------

def cmd_gen_channels(args) -> int:
    env = load_environment(args.env)
    if args.model not in ("los", "tdl"):
        raise ConfigError(f"unknown synthetic model {args.model!r}")
    if env.sub_thz is None:
        raise ConfigError("environment carries no sub_thz grid block")
    grid = SubcarrierGrid(env.sub_thz.fc, env.sub_thz.bw,
                          env.sub_thz.num_subcarriers, 1)
    params = TdlParams(n_taps=args.taps_l, beta=args.beta)
    dataset = generate_synthetic(env, grid, model=args.model, seed=args.seed,
                                 tdl_params=params, n_tx=args.n_tx,
                                 n_rx=args.n_rx)
    write_dataset(dataset, args.out)
    log.info("wrote %d UE channel files to %s", len(dataset.ues), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stripesim",
        description="Hardware-aware sub-THz radio-stripe link simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_configs(p):
        p.add_argument("--env", required=True, help="environment.yaml")
        p.add_argument("--waveform", required=True, help="waveform.yaml")
        p.add_argument("--components", required=True, help="components.yaml")

    p_run = sub.add_parser("run", help="single end-to-end link")
    add_configs(p_run)
    p_run.add_argument("--channel", default="los",
                       help="los | rayleigh | tdl[:beta[:taps]] | dataset:DIR")
    p_run.add_argument("--ue", type=int, default=0)
    p_run.add_argument("--stripe", type=int, default=0)
    p_run.add_argument("--ru", type=int, required=True)
    p_run.add_argument("--direction", choices=("dl", "ul"), default="dl")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--taps", action="store_true", help="export stage taps")
    p_run.add_argument("--calibrate", action="store_true",
                       help="run booster gain calibration first")
    p_run.add_argument("--dump-channel", action="store_true")
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep-ru", help="activate every RU in turn")
    add_configs(p_sweep)
    p_sweep.add_argument("--channel", default="los")
    p_sweep.add_argument("--ue", type=int, default=0)
    p_sweep.add_argument("--direction", choices=("dl", "ul"), default="ul")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--metric", choices=("nmse_cu", "sndr_cu", "ber"),
                         default="nmse_cu",
                         help="primary metric (all columns are always written)")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep_ru)

    p_cal = sub.add_parser("calibrate", help="booster gain calibration")
    add_configs(p_cal)
    p_cal.add_argument("--target-dbm", type=float, default=None)
    p_cal.add_argument("--max-gain", type=float, default=None)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--out", required=True)
    p_cal.set_defaults(func=cmd_calibrate)

    p_s2p = sub.add_parser("inspect-s2p", help="dump S21 as CSV")
    p_s2p.add_argument("--file", required=True)
    p_s2p.add_argument("--magnitude", choices=("power", "voltage"),
                       default="power",
                       help="interpret magnitude as power (10 log10) or voltage (20 log10)")
    p_s2p.add_argument("--out", required=True)
    p_s2p.set_defaults(func=cmd_inspect_s2p)

    p_gen = sub.add_parser("gen-channels", help="synthesize a CFR1 dataset")
    p_gen.add_argument("--env", required=True)
    p_gen.add_argument("--model", default="los", help="los | tdl")
    p_gen.add_argument("--beta", type=float, default=0.5)
    p_gen.add_argument("--taps-l", type=int, default=8)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--n-tx", type=int, default=4)
    p_gen.add_argument("--n-rx", type=int, default=4)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen_channels)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("STRIPESIM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"stripesim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StripeSimError as exc:
        print(f"stripesim: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("unhandled failure")
        print(f"stripesim: internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
