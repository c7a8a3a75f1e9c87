"""Command-line entry points.

    insole-load preprocess --manifest M... --out DIR [--skip-filter]
    insole-load train --dataset D --model {svr|mlp|enet} --out MODEL
    insole-load evaluate --dataset D --models M... --report R.json
    insole-load render-maps --dataset D --out DIR [--layout L]
    insole-load stream --manifest M --model MODEL [--rate x1|x10|max]

Exit codes: 0 ok, 2 usage or input error, 3 computation failure,
4 runtime I/O failure.
"""

from __future__ import annotations

import argparse
import json
import queue
import socket
import sys
import threading
import time
from pathlib import Path

import numpy as np

from . import evaluation, ingest, pressmap, synth
from .core import InputError, InsoleLoadError, PipelineConfig, StreamIOError
from .dataset import Dataset
from .regress import load_model, save_model
from .replay import StreamEstimator

MODEL_ALIASES = {"enet": "elastic_net", "elastic_net": "elastic_net", "svr": "svr", "mlp": "mlp"}


def parse_config_file(path) -> dict:
    """Flat key=value config; values are parsed as JSON scalars/lists when
    possible and kept as strings otherwise. '#' starts a comment."""
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            if "," in value:
                out[key] = [float(v) for v in value.split(",") if v.strip()]
            else:
                out[key] = value
    return out


_PIPELINE_KEYS = (
    "sample_rate_hz",
    "cutoff_hz",
    "filter_order",
    "baseline_window_s",
    "lift_window_s",
    "aggregation_count",
    "split_seed",
)


def build_pipeline_config(args, file_cfg: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    for key in _PIPELINE_KEYS:
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key)
        if value is not None:
            setattr(cfg, key, type(getattr(cfg, key))(value))
    trim_low = args.trim_low if args.trim_low is not None else file_cfg.get("trim_low")
    trim_high = args.trim_high if args.trim_high is not None else file_cfg.get("trim_high")
    low, high = cfg.trim_quantiles
    cfg.trim_quantiles = (
        float(trim_low) if trim_low is not None else low,
        float(trim_high) if trim_high is not None else high,
    )
    unseen = args.unseen_loads if args.unseen_loads is not None else file_cfg.get("unseen_loads_kg")
    if unseen is not None:
        if isinstance(unseen, str):
            unseen = [float(v) for v in unseen.split(",") if v.strip()]
        cfg.unseen_loads_kg = tuple(float(v) for v in unseen)
    cfg.validate()
    return cfg


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", type=Path, help="key=value configuration file")
    g.add_argument("--sample-rate-hz", dest="sample_rate_hz", type=float)
    g.add_argument("--cutoff-hz", dest="cutoff_hz", type=float)
    g.add_argument("--filter-order", dest="filter_order", type=int)
    g.add_argument("--baseline-window-s", dest="baseline_window_s", type=float)
    g.add_argument("--lift-window-s", dest="lift_window_s", type=float)
    g.add_argument("--aggregation-count", dest="aggregation_count", type=int)
    g.add_argument("--trim-low", dest="trim_low", type=float)
    g.add_argument("--trim-high", dest="trim_high", type=float)
    g.add_argument("--unseen-loads", dest="unseen_loads")
    g.add_argument("--split-seed", dest="split_seed", type=int)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insole-load",
        description="Lifted-load estimation from 36-channel insole pressure streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    cfg_parent = _config_parent()

    p = sub.add_parser("preprocess", parents=[cfg_parent], help="manifests -> dataset CSV")
    p.add_argument("--manifest", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--skip-filter", action="store_true", help="pass stored values through")

    p = sub.add_parser("train", parents=[cfg_parent], help="fit one model on a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--model", choices=sorted(MODEL_ALIASES), required=True)
    p.add_argument("--out", type=Path, required=True, help="model file to write")

    p = sub.add_parser("evaluate", parents=[cfg_parent], help="run the evaluation protocol")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--models", nargs="+", choices=sorted(MODEL_ALIASES), required=True)
    p.add_argument("--report", type=Path, required=True, help="report JSON to write")
    p.add_argument("--plots", type=Path, help="directory for SVG box plots")
    p.add_argument("--csv", type=Path, help="flattened subject,model,load,mae CSV")

    p = sub.add_parser("render-maps", parents=[cfg_parent], help="dataset -> thermal-map PNGs")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--layout", type=Path, help="sensor layout JSON (default: built-in)")
    p.add_argument("--scale-from", choices=["train", "all"], default="train")
    p.add_argument("--out", "--maps-out", dest="out", type=Path, required=True)
    p.add_argument("--limit", type=int, help="render at most this many samples")

    p = sub.add_parser("stream", parents=[cfg_parent], help="replay a session in real time")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="model file")
    p.add_argument("--rate", choices=["x1", "x10", "max"], default="x1")
    p.add_argument("--tcp", help="HOST:PORT to send NDJSON estimates to")
    p.add_argument("--skip-filter", action="store_true")

    p = sub.add_parser("synth", parents=[cfg_parent], help="generate a synthetic corpus")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--subjects", type=int, default=5)
    p.add_argument("--sessions", type=int, default=3)
    p.add_argument("--noise-pct", type=float, default=1.0, help="noise sigma, %% of full scale")
    p.add_argument("--loads", help="comma list of ladder loads (default full ladder)")
    return parser


def _load_file_cfg(args) -> dict:
    return parse_config_file(args.config) if getattr(args, "config", None) else {}


def cmd_preprocess(args) -> int:
    file_cfg = _load_file_cfg(args)
    cfg = build_pipeline_config(args, file_cfg)
    parts = []
    for manifest_path in args.manifest:
        manifest = ingest.SessionManifest.load(manifest_path)
        rec = ingest.parse_session(manifest)
        skip = args.skip_filter or manifest.column_map.prefiltered
        parts.append(ingest.extract_labeled_samples(rec, cfg, skip_filter=skip))
    ds = Dataset.concat(parts)
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "dataset.csv"
    ds.to_csv(out_path)
    print(f"wrote {len(ds)} samples to {out_path}")
    return 0


def _model_cfg_from_file(kind: str, file_cfg: dict) -> dict:
    prefix = kind + "."
    alias_prefix = {"elastic_net": "enet."}.get(kind)
    out = {}
    for key, value in file_cfg.items():
        if key.startswith(prefix):
            out[key[len(prefix) :]] = value
        elif alias_prefix and key.startswith(alias_prefix):
            out[key[len(alias_prefix) :]] = value
    return out


def cmd_train(args) -> int:
    file_cfg = _load_file_cfg(args)
    cfg = build_pipeline_config(args, file_cfg)
    kind = MODEL_ALIASES[args.model]
    ds = Dataset.from_csv(args.dataset)
    split = evaluation.SplitSpec(unseen_loads_kg=cfg.unseen_loads_kg, seed=cfg.split_seed)
    train_idx, val_idx, _ = evaluation.build_split(ds, split)
    model_kwargs = _model_cfg_from_file(kind, file_cfg)
    model, report = evaluation.fit_model(
        kind,
        ds.features[train_idx],
        ds.labels_kg[train_idx],
        ds.features[val_idx],
        ds.labels_kg[val_idx],
        **model_kwargs,
    )
    save_model(model, args.out, report)
    val_mae = evaluation.mae(model.predict(ds.features[val_idx]), ds.labels_kg[val_idx])
    print(
        f"trained {kind} on {len(train_idx)} samples: converged={report.converged} "
        f"epochs={report.epochs_run} val MAE={val_mae:.4f} kg -> {args.out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    file_cfg = _load_file_cfg(args)
    cfg = build_pipeline_config(args, file_cfg)
    ds = Dataset.from_csv(args.dataset)
    models_cfg = {}
    for name in args.models:
        kind = MODEL_ALIASES[name]
        models_cfg[kind] = {"kind": kind, **_model_cfg_from_file(kind, file_cfg)}
    report = evaluation.run_protocol(ds, models_cfg, cfg)
    report.to_json(args.report)
    if args.csv:
        report.to_csv(args.csv)
    if args.plots:
        args.plots.mkdir(parents=True, exist_ok=True)
        for group in report.pairwise_tests or [f"subject:{s}" for s in report.per_subject]:
            safe = group.replace(":", "_").replace("/", "_")
            evaluation.write_box_plot_svg(report, group, args.plots / f"{safe}.svg")
    for model, stats in sorted(report.aggregate.items()):
        print(f"{model}: window MAE {stats['mean_mae_windows']:.4f} kg "
              f"(raw {stats['mean_mae_raw']:.4f} kg)")
    print(f"report -> {args.report}")
    return 0


def cmd_render_maps(args) -> int:
    file_cfg = _load_file_cfg(args)
    cfg = build_pipeline_config(args, file_cfg)
    ds = Dataset.from_csv(args.dataset)
    layout = pressmap.SensorLayout.load(args.layout) if args.layout else pressmap.default_layout()
    if args.scale_from == "train":
        split = evaluation.SplitSpec(unseen_loads_kg=cfg.unseen_loads_kg, seed=cfg.split_seed)
        train_idx, val_idx, _ = evaluation.build_split(ds, split)
        scale_values = ds.features[np.concatenate([train_idx, val_idx])]
    else:
        scale_values = ds.features
    scale = pressmap.fit_color_scale(scale_values)
    args.out.mkdir(parents=True, exist_ok=True)
    n = len(ds) if args.limit is None else min(args.limit, len(ds))
    for i in range(n):
        rgb = pressmap.render_sample(ds.features[i], scale, layout)
        name = f"{ds.subject_ids[i]}_{ds.session_indices[i]}_{ds.timestamps_ms[i]}.png"
        pressmap.write_png(rgb, args.out / name)
    print(f"rendered {n} maps to {args.out} (scale [{scale.v_min:.1f}, {scale.v_max:.1f}])")
    return 0


def cmd_synth(args) -> int:
    file_cfg = _load_file_cfg(args)
    build_pipeline_config(args, file_cfg)  # validates flag values
    loads = None
    if args.loads:
        loads = [float(v) for v in args.loads.split(",")]
    sigma = args.noise_pct / 100.0 * 65535.0
    corpus = synth.make_corpus(
        args.subjects,
        sessions=tuple(range(1, args.sessions + 1)),
        ladder=loads,
        noise_sigma_raw=sigma,
    )
    for rec, _ in corpus:
        path = synth.write_session(rec, args.out)
        print(path)
    return 0


class _Sink:
    """Line sink over stdout or a TCP connection; raises StreamIOError on loss."""

    def __init__(self, tcp: str | None):
        self._sock = None
        if tcp:
            host, _, port = tcp.rpartition(":")
            if not host or not port.isdigit():
                raise InputError(f"--tcp expects HOST:PORT, got {tcp!r}")
            try:
                self._sock = socket.create_connection((host, int(port)), timeout=10.0)
            except OSError as exc:
                raise StreamIOError(f"cannot connect to {tcp}: {exc}") from None

    def send(self, line: str) -> None:
        if self._sock is None:
            print(line, flush=True)
            return
        try:
            self._sock.sendall(line.encode() + b"\n")
        except OSError as exc:
            raise StreamIOError(f"peer lost: {exc}") from None

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()


def cmd_stream(args) -> int:
    file_cfg = _load_file_cfg(args)
    cfg = build_pipeline_config(args, file_cfg)
    manifest = ingest.SessionManifest.load(args.manifest)
    rec = ingest.parse_session(manifest)
    model, _ = load_model(args.model)
    skip = args.skip_filter or manifest.column_map.prefiltered
    estimator = StreamEstimator(model, rec.schedule, cfg, skip_filter=skip)
    frame_s = {"x1": 1.0, "x10": 0.1, "max": 0.0}[args.rate] / cfg.sample_rate_hz

    frames: queue.Queue = queue.Queue(maxsize=64)  # bounded: back-pressure, no loss

    def produce():
        for t, channels in zip(rec.timestamps_ms, rec.channels):
            frames.put((int(t), channels))
            if frame_s > 0.0:
                time.sleep(frame_s)
        frames.put(None)

    producer = threading.Thread(target=produce, daemon=True)
    sink = _Sink(args.tcp)
    producer.start()
    try:
        while True:
            item = frames.get()
            if item is None:
                break
            t_ms, channels = item
            estimate = estimator.process_frame(t_ms, channels)
            if estimate is not None:
                sink.send(json.dumps(estimate.to_dict()))
    finally:
        sink.close()
    return 0


_COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "render-maps": cmd_render_maps,
    "stream": cmd_stream,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InsoleLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
