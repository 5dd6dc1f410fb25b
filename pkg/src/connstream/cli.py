"""Command-line entry points: offline analysis, online serving, benchmark
sweeps, simulation data generation, and filter design export.

Exit codes: 0 ok, 2 input error, 3 semantic/precondition error,
4 environment error.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .core import (DegenerateTrialCountError, FrequencyBand, MetricId,
                   ParameterError, serialize_network)
from .inverse import load_inverse
from .metrics import convergence_curve
from .netio import TcpPublisher, WsMirror
from .pipeline import Pipeline, PipelineConfig
from .preprocess import EpochSpec, design_fir
from .recording import load_rawx, save_rawx
from .simulate import SimulationSpec, generate


def _parse_band(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    raw = p.read_bytes()
    if p.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def build_pipeline_config(cfg: dict, args, sfreq: float) -> PipelineConfig:
    def pick(key, default=None):
        cli_val = getattr(args, key.replace("-", "_"), None)
        return cli_val if cli_val is not None else cfg.get(key, default)

    fir = None
    if "filter" in cfg:
        f = cfg["filter"]
        fir = design_fir(f["kind"], f["cutoffs"], f.get("transition_bw", 4.0),
                         f.get("n_taps"), sfreq)
    epoch = None
    if "epoch" in cfg:
        e = cfg["epoch"]
        epoch = EpochSpec(
            tmin=e["tmin"], tmax=e["tmax"],
            baseline=tuple(e["baseline"]) if e.get("baseline") else None,
            reject_channel=e.get("reject_channel"),
            reject_threshold=e.get("reject_threshold"),
            reject_exclude=tuple(e.get("reject_exclude", (0.0, 0.010))))
    inverse_op = None
    inv_path = cfg.get("inverse")
    if inv_path:
        inverse_op = load_inverse(inv_path)
    band = pick("band", (8, 12))
    if isinstance(band, str):
        band = _parse_band(band)
    storage = pick("storage", True)
    if isinstance(storage, str):
        storage = storage == "on"
    return PipelineConfig(
        block_size=int(pick("block-size", 500)),
        nfft=int(pick("nfft", 600)),
        metric=MetricId.parse(str(pick("metric", "COH"))),
        band=tuple(band),
        threshold=pick("threshold"),
        normalize=bool(cfg.get("normalize", True)),
        storage_mode=bool(storage),
        fir=fir,
        epoch=epoch,
        trigger_threshold=float(cfg.get("trigger_threshold", 0.5)),
        inverse_op=inverse_op,
        max_lag=cfg.get("max_lag"),
        queue_capacity=int(cfg.get("queue_capacity", 8)),
        lossy=bool(cfg.get("lossy", False)),
        speed=float(pick("speed", 0.0)),
    )


def cmd_offline(args) -> int:
    try:
        rec = load_rawx(args.recording)
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot read inputs: {exc}", file=sys.stderr)
        return 2
    try:
        pcfg = build_pipeline_config(cfg, args, rec.sfreq)
        pcfg.speed = 0.0
        epochs = []
        pipe = Pipeline(rec, pcfg, on_epoch=epochs.append,
                        collect_networks=False)
        pipe.run()
        if pipe.final_network is None:
            print("error: no trials accepted", file=sys.stderr)
            return 3
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(serialize_network(pipe.final_network))
        band = FrequencyBand(pcfg.band[0], pcfg.band[1], rec.sfreq / pcfg.nfft)
        counts, curve = convergence_curve(epochs, pcfg.metric, pcfg.nfft, band,
                                          max_lag=pcfg.max_lag)
        conv_path = out.with_suffix(".convergence.csv")
        lines = ["n_trials,mean_top20_weight"]
        lines += [f"{int(k)},{v:.12g}" for k, v in zip(counts, curve)]
        conv_path.write_text("\n".join(lines) + "\n")
        print(f"wrote {out} and {conv_path}")
        return 0
    except DegenerateTrialCountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def cmd_simulate(args) -> int:
    spec = SimulationSpec(n_trials=args.trials,
                          noise=not args.noise_free)
    rec, info = generate(spec, seed=args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_rawx(out, rec)
    info_path = out.with_suffix(".info.json")
    info_path.write_text(json.dumps(info, indent=1))
    print(f"wrote {out.with_suffix('.json')}, {out.with_suffix('.f32')}, "
          f"{info_path} (measured SNR "
          f"{info['measured_snr_db']:.2f} dB)")
    return 0


def cmd_serve(args) -> int:
    try:
        rec = load_rawx(args.recording)
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot read inputs: {exc}", file=sys.stderr)
        return 2
    pcfg = build_pipeline_config(cfg, args, rec.sfreq)
    if args.speed is None and "speed" not in cfg:
        pcfg.speed = 1.0
    try:
        publisher = TcpPublisher(args.port)
        ws = WsMirror(args.port + 1 if args.port else 0)
    except OSError as exc:
        print(f"error: cannot bind port: {exc}", file=sys.stderr)
        return 4
    pipe = Pipeline(rec, pcfg, publisher=publisher, ws=ws,
                    collect_networks=False)
    publisher._control_sink = pipe.submit_control
    ws._control_sink = pipe.submit_control

    interrupted = False

    def on_sigint(signum, frame):
        nonlocal interrupted
        interrupted = True
        raise KeyboardInterrupt

    signal.signal(signal.SIGINT, on_sigint)
    signal.signal(signal.SIGTERM, on_sigint)
    print(f"serving TCP on {publisher.port}, WebSocket on {ws.port} (/ws)",
          flush=True)
    try:
        pipe.run()
    except KeyboardInterrupt:
        pass
    finally:
        if pipe.final_network is not None and args.output:
            Path(args.output).write_bytes(
                serialize_network(pipe.final_network))
        publisher.close()
        ws.close()
    return 0


def cmd_bench(args) -> int:
    metrics = ([MetricId.parse(m) for m in args.metrics.split(",")]
               if args.metrics else list(MetricId))
    nodes = [int(n) for n in args.nodes.split(",")]
    windows = [int(w) for w in args.windows.split(",")]
    trials = [int(t) for t in args.trials.split(",")]
    cases = [bench_mod.BenchCase(metric=m, n_nodes=n, window_sp=w,
                                 n_trials=t, n_repeats=args.repeats,
                                 storage_mode=args.storage == "on")
             for m in metrics for n in nodes for w in windows for t in trials]
    rows = bench_mod.run_sweep(cases, seed=args.seed, nfft=args.nfft)
    csv_text = bench_mod.rows_to_csv(rows)
    if args.output:
        Path(args.output).write_text(csv_text)
        print(f"wrote {args.output}")
    else:
        print(csv_text)
    if args.check_trends:
        report = bench_mod.assert_trends(rows)
        for check in report["checks"]:
            mark = "ok" if check["passed"] else "FAIL"
            print(f"[{mark}] {check['name']}  {check['detail']}")
        return 0 if report["passed"] else 3
    return 0


def cmd_filter_design(args) -> int:
    try:
        cutoffs = [float(c) for c in args.cutoffs.split(",")]
        fir = design_fir(args.kind, cutoffs if len(cutoffs) > 1 else cutoffs[0],
                         args.transition_bw, args.taps, args.sfreq)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    text = fir.to_json()
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {args.output}")
    else:
        print(text)
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="connstream")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--block-size", type=int, dest="block_size")
        sp.add_argument("--metric")
        sp.add_argument("--band", help="lo:hi frequency bins")
        sp.add_argument("--threshold", type=float)
        sp.add_argument("--storage", choices=["on", "off"])
        sp.add_argument("--nfft", type=int)
        sp.add_argument("--speed", type=float)
        sp.add_argument("--config", help="TOML or JSON pipeline config")

    sp = sub.add_parser("offline", help="batch analysis of a .rawx recording")
    add_common(sp)
    sp.add_argument("recording")
    sp.add_argument("output")
    sp.set_defaults(fn=cmd_offline)

    sp = sub.add_parser("serve", help="replay a recording and publish live")
    add_common(sp)
    sp.add_argument("recording")
    sp.add_argument("--port", type=int, default=7650)
    sp.add_argument("--output", help="final network written on shutdown")
    sp.set_defaults(fn=cmd_serve)

    sp = sub.add_parser("simulate", help="generate the synthetic recording")
    sp.add_argument("output")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--noise-free", action="store_true")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("bench", help="runtime sweep to CSV")
    sp.add_argument("--metrics", help="comma list; default all")
    sp.add_argument("--nodes", default="32,64,128")
    sp.add_argument("--windows", default="100,1000,5000")
    sp.add_argument("--trials", default="1")
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--nfft", type=int, default=600)
    sp.add_argument("--storage", choices=["on", "off"], default="off")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output")
    sp.add_argument("--check-trends", action="store_true")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("filter-design", help="export an FIR design as JSON")
    sp.add_argument("kind", choices=["lowpass", "highpass", "bandpass"])
    sp.add_argument("cutoffs", help="Hz, comma-separated for bandpass")
    sp.add_argument("--transition-bw", type=float, default=8.0)
    sp.add_argument("--taps", type=int)
    sp.add_argument("--sfreq", type=float, default=600.0)
    sp.add_argument("--output")
    sp.set_defaults(fn=cmd_filter_design)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if getattr(args, "band", None) is not None:
        args.band = _parse_band(args.band)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
