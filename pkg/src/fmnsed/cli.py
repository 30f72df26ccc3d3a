"""Command-line surface: profile, bench, infer, eval, sweep, forward.

Exit codes: 0 ok, 2 usage error, 3 weight/model mismatch, 4 data or
vocabulary error. Every command that produces a file also writes a
RunManifest JSON next to it; identical configurations hash identically.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, assembly, complexity, features, postprocess, psds
from .backbone import build_fmn, make_divisible
from .classmap import load_default_classmap
from .seqmodels import SeqConfig
from .tensor import Tensor
from .weights import WeightError, WeightStore, load_fmnw, save_fmnw

USAGE_EXIT = 2
WEIGHT_EXIT = 3
DATA_EXIT = 4


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def write_manifest(out_path: Path, command: str, model_name: str, config: dict,
                   inputs: list[str], outputs: list[str]) -> Path:
    manifest = {
        "command": command,
        "model_name": model_name,
        "config_hash": _config_hash(config),
        "config": config,
        "inputs": sorted(inputs),
        "outputs": sorted(outputs),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "toolkit_version": __version__,
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _spec_from_args(args) -> assembly.ModelSpec:
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
        seq = SeqConfig(
            kind=cfg.get("kind", "NONE"),
            hidden_dim=int(cfg.get("hidden", 0)),
            num_blocks=int(cfg.get("num_blocks", 2)),
            num_heads=cfg.get("num_heads"),
            state_dim=int(cfg.get("state_dim", 64)),
            kernel=int(cfg.get("kernel", 3)),
        )
        return assembly.ModelSpec(
            fmn=build_fmn(float(cfg.get("alpha", 1.0))),
            seq=seq,
            num_classes=int(cfg.get("num_classes", 447)),
        )
    return assembly.parse_model_name(args.model)


def _append_csv(path: Path, rows: list[str]) -> None:
    new = not path.exists()
    with open(path, "a", encoding="utf-8") as fp:
        if new:
            fp.write(complexity.CSV_HEADER + "\n")
        for row in rows:
            fp.write(row + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_profile(args) -> int:
    spec = _spec_from_args(args)
    name = assembly.format_model_name(spec)
    params = complexity.count_params(spec)
    macs = complexity.count_macs(spec)
    print(f"model   {name}")
    print(f"params  {params}")
    print(f"macs    {macs}")
    config = {"model": name, "command": "profile"}
    if args.inventory:
        inv = {k: list(v) for k, v in assembly.param_inventory(spec).items()}
        Path(args.inventory).write_text(json.dumps(inv, indent=1) + "\n")
        write_manifest(Path(args.inventory), "profile", name, config, [], [args.inventory])
    if args.csv:
        report = complexity.ComplexityReport(
            config_name=name, params=params, macs=macs, batch_size=0,
            threads=0, hardware=complexity.hardware_descriptor(),
            alpha=spec.fmn.alpha, kind=spec.seq.kind, hidden=spec.seq.hidden_dim)
        _append_csv(Path(args.csv), [report.csv_row()])
        write_manifest(Path(args.csv), "profile", name, config, [], [args.csv])
    return 0


def cmd_bench(args) -> int:
    if args.iters < 3:
        print("error: --iters must be >= 3", file=sys.stderr)
        return USAGE_EXIT
    spec = _spec_from_args(args)
    name = assembly.format_model_name(spec)
    if args.weights:
        weights = load_fmnw(args.weights)
        assembly.check_weights(spec, weights)
    else:
        weights = assembly.init_weights(spec, seed=args.seed)
    report = complexity.bench_throughput(
        spec, weights, batch_size=args.batch, warmup_iters=args.warmup,
        timed_iters=args.iters, threads=args.threads)
    print(complexity.CSV_HEADER)
    print(report.csv_row())
    if args.csv:
        _append_csv(Path(args.csv), [report.csv_row()])
        config = {"model": name, "batch": args.batch, "iters": args.iters,
                  "command": "bench"}
        write_manifest(Path(args.csv), "bench", name, config,
                       [args.weights] if args.weights else [], [args.csv])
    return 0


def _collect_wavs(paths: list[str]) -> list[Path]:
    out: list[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            out.extend(sorted(path.glob("*.wav")))
        else:
            out.append(path)
    return out


def cmd_infer(args) -> int:
    if args.median < 1 or args.median % 2 == 0:
        print(f"error: --median must be odd and >= 1, got {args.median}", file=sys.stderr)
        return USAGE_EXIT
    if not 0.0 < args.threshold < 1.0:
        print("error: --threshold must lie in (0, 1)", file=sys.stderr)
        return USAGE_EXIT
    spec = _spec_from_args(args)
    name = assembly.format_model_name(spec)
    cmap = load_default_classmap()
    if spec.num_classes != cmap.num_classes:
        print(f"error: model has {spec.num_classes} classes, class map has "
              f"{cmap.num_classes}", file=sys.stderr)
        return DATA_EXIT
    try:
        weights = load_fmnw(args.weights)
        assembly.check_weights(spec, weights)
    except WeightError as exc:
        print(f"error: weight/model mismatch: {exc}", file=sys.stderr)
        return WEIGHT_EXIT

    wavs = _collect_wavs(args.audio)
    if not wavs:
        print("error: no input audio found", file=sys.stderr)
        return USAGE_EXIT
    mel_cfg = features.MelConfig()
    eval_only = set(cmap.eval_indices) if args.eval_classes_only else None

    def process(path: Path) -> tuple[str, postprocess.EventList]:
        mel = features.log_mel(features.load_wav(path, mel_cfg), mel_cfg)
        probs = assembly.predict_probs(spec, weights, mel).data
        probs = postprocess.median_filter(probs, args.median).data
        ev = postprocess.decode_events(probs, args.threshold, clip_id=path.stem)
        if eval_only is not None:
            ev.events = [e for e in ev.events if e[0] in eval_only]
        return path.stem, ev

    nthreads = complexity.worker_threads(args.threads)
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        results = dict(pool.map(process, wavs))

    out = Path(args.out)
    postprocess.write_events_tsv(out, results, cmap.names)
    config = {"model": name, "threshold": args.threshold, "median": args.median,
              "eval_classes_only": bool(args.eval_classes_only), "command": "infer"}
    write_manifest(out, "infer", name, config,
                   [str(p) for p in wavs] + [args.weights], [str(out)])
    print(f"wrote {sum(len(e.events) for e in results.values())} events "
          f"from {len(wavs)} clips to {out}")
    return 0


def _remap_events(event_lists: dict, remap: dict[int, int]) -> dict:
    return {
        cid: postprocess.EventList(
            cid, [(remap[c], a, b) for c, a, b in ev.events])
        for cid, ev in event_lists.items()
    }


def cmd_eval(args) -> int:
    """Score detections against ground truth.

    The class universe is the set of classes present in the ground truth or
    in the detections; detected classes without ground truth contribute TPR
    zero but their false positives still count.
    """
    cmap = load_default_classmap()
    try:
        gts = postprocess.read_events_tsv(args.gt, cmap.index_of)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT

    if (args.det is None) == (args.scores is None):
        print("error: provide exactly one of --det or --scores", file=sys.stderr)
        return USAGE_EXIT

    gt_classes = {c for ev in gts.values() for c, _, _ in ev.events}

    if args.det:
        try:
            dets = postprocess.read_events_tsv(args.det, cmap.index_of)
        except KeyError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return DATA_EXIT
        universe = sorted(gt_classes | {c for ev in dets.values()
                                        for c, _, _ in ev.events})
        remap = {orig: i for i, orig in enumerate(universe)}
        hours = args.hours or (len(set(gts) | set(dets)) * 10.0 / 3600.0)
        point = psds.OperatingPoint(threshold=0.5, detections=_remap_events(dets, remap))
        roc = psds.build_psd_roc([point], _remap_events(gts, remap),
                                 len(universe), hours)
        score = psds.psds_score(roc)
        aucs = psds.per_class_auc(roc)
        inputs = [args.gt, args.det]
    else:
        scores_dir = Path(args.scores)
        files = sorted(scores_dir.glob("*.fmnw"))
        if not files:
            print(f"error: no .fmnw score files in {scores_dir}", file=sys.stderr)
            return DATA_EXIT
        probs = {}
        for f in files:
            store = load_fmnw(f)
            t = store.get("probs")
            if t.shape[1] != cmap.num_classes:
                print(f"error: {f.name} has {t.shape[1]} classes, class map has "
                      f"{cmap.num_classes}", file=sys.stderr)
                return DATA_EXIT
            probs[f.stem] = t.data
        thresholds = psds.default_thresholds(args.thresholds)
        # a class can produce a detection at some threshold iff its peak
        # filtered probability reaches the smallest threshold
        filtered = {cid: postprocess.median_filter(p, args.median).data
                    for cid, p in probs.items()}
        det_classes = set()
        for p in filtered.values():
            det_classes |= set(np.flatnonzero(p.max(axis=0) >= thresholds.min()).tolist())
        universe = sorted(gt_classes | det_classes)
        if not universe:
            print(json.dumps({"psds1": 0.0}))
            return 0
        remap = {orig: i for i, orig in enumerate(universe)}
        hours = args.hours or (len(set(probs) | set(gts)) * 10.0 / 3600.0)
        score, roc = psds.evaluate_psds1(
            {cid: p[:, universe] for cid, p in probs.items()},
            _remap_events(gts, remap), len(universe), thresholds=thresholds,
            median_window=args.median, total_audio_hours=hours, return_roc=True)
        aucs = psds.per_class_auc(roc)
        inputs = [args.gt, args.scores]

    result = {"psds1": round(float(score), 10),
              "classes": [cmap.names[c] for c in universe],
              "per_class_auc": [round(float(a), 10) for a in aucs]}
    print(json.dumps({"psds1": result["psds1"]}))
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=1) + "\n")
        config = {"command": "eval", "thresholds": args.thresholds,
                  "median": args.median, "hours": hours}
        write_manifest(Path(args.out), "eval", "", config, inputs, [args.out])
    return 0


def cmd_sweep(args) -> int:
    alphas = [float(a) for a in args.alphas.split(",")]
    kinds = [k.strip().upper() for k in args.kinds.split(",")]
    rows = []
    for alpha in alphas:
        for kind in kinds:
            if kind == "NONE":
                hiddens = [0]
            elif args.hidden_from_alpha:
                hiddens = [make_divisible(256 * alpha)]
            elif args.hidden:
                hiddens = [int(h) for h in args.hidden.split(",")]
            else:
                hiddens = [256]
            for hidden in hiddens:
                seq = SeqConfig(kind=kind, hidden_dim=hidden) if kind != "NONE" \
                    else SeqConfig(kind="NONE", hidden_dim=0)
                spec = assembly.ModelSpec(fmn=build_fmn(alpha), seq=seq)
                name = assembly.format_model_name(spec)
                if args.bench:
                    weights = assembly.init_weights(spec, seed=0)
                    report = complexity.bench_throughput(
                        spec, weights, batch_size=args.batch, timed_iters=args.iters)
                else:
                    report = complexity.ComplexityReport(
                        config_name=name, params=complexity.count_params(spec),
                        macs=complexity.count_macs(spec), batch_size=0, threads=0,
                        hardware="", alpha=alpha, kind=kind, hidden=hidden)
                rows.append(report.csv_row())
    if args.out:
        out = Path(args.out)
        if out.exists():
            out.unlink()
        _append_csv(out, rows)
        config = {"command": "sweep", "alphas": alphas, "kinds": kinds,
                  "hidden": args.hidden, "hidden_from_alpha": args.hidden_from_alpha}
        write_manifest(out, "sweep", "", config, [], [args.out])
    else:
        print(complexity.CSV_HEADER)
        for row in rows:
            print(row)
    return 0


def cmd_forward(args) -> int:
    spec = _spec_from_args(args)
    name = assembly.format_model_name(spec)
    try:
        weights = load_fmnw(args.weights)
        assembly.check_weights(spec, weights)
    except WeightError as exc:
        print(f"error: weight/model mismatch: {exc}", file=sys.stderr)
        return WEIGHT_EXIT
    mels = [Path(m) for m in args.mel]
    if (args.dump_activations or args.debug_compare) and len(mels) != 1:
        print("error: activation dump/compare needs exactly one --mel", file=sys.stderr)
        return USAGE_EXIT
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    outputs = []
    for mel_path in mels:
        store = load_fmnw(mel_path)
        mel = store.get("mel", (1, 128, 1000))
        trace: dict | None = {} if (args.dump_activations or args.debug_compare) else None
        probs = assembly.predict_probs(spec, weights, mel, trace=trace)
        out_path = out_dir / (mel_path.stem + ".probs.fmnw")
        out_store = WeightStore({"probs": probs})
        save_fmnw(out_path, out_store)
        outputs.append(str(out_path))

        if trace is not None:
            trace["mel"] = mel.data
        if args.dump_activations:
            dump_dir = Path(args.dump_activations)
            dump_dir.mkdir(parents=True, exist_ok=True)
            for key, val in trace.items():
                save_fmnw(dump_dir / f"{key}.fmnw", WeightStore({"act": Tensor(val)}))
        if args.debug_compare:
            _debug_compare(trace, Path(args.debug_compare))

    config = {"model": name, "command": "forward"}
    write_manifest(out_dir / "forward", "forward", name, config,
                   [str(m) for m in mels] + [args.weights], outputs)
    return 0


def _debug_compare(trace: dict, ref_dir: Path, tol: float = 1e-3) -> None:
    first_divergent = None
    for key, val in trace.items():
        ref_path = ref_dir / f"{key}.fmnw"
        if not ref_path.exists():
            continue
        ref = load_fmnw(ref_path).get("act").data
        if ref.shape != np.asarray(val).shape:
            print(f"compare {key} SHAPE-MISMATCH ours={np.asarray(val).shape} ref={ref.shape}")
            if first_divergent is None:
                first_divergent = (key, float("inf"))
            continue
        diff = float(np.max(np.abs(np.asarray(val, dtype=np.float64) - ref.astype(np.float64))))
        print(f"compare {key} max_abs_diff={diff:.3e}")
        if diff > tol and first_divergent is None:
            first_divergent = (key, diff)
    if first_divergent:
        print(f"DEBUG-COMPARE FIRST-DIVERGENT {first_divergent[0]} {first_divergent[1]:.3e}")
    else:
        print("DEBUG-COMPARE OK")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmnsed",
        description="Frame-wise MobileNet sound event detection toolkit",
    )
    parser.add_argument("--version", action="version", version=f"fmnsed {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("profile", help="print parameter and MAC counts")
    p.add_argument("model", help="model name, e.g. fmn10+TF:256")
    p.add_argument("--config", help="JSON config overriding the model-name grammar")
    p.add_argument("--csv", help="append a complexity CSV row here")
    p.add_argument("--inventory", help="write the parameter inventory as JSON")
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("bench", help="measure inference throughput")
    p.add_argument("model")
    p.add_argument("--config")
    p.add_argument("--weights", help="FMNW weight file (random init if omitted)")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("infer", help="audio files -> event TSV")
    p.add_argument("model")
    p.add_argument("--config")
    p.add_argument("--weights", required=True)
    p.add_argument("--audio", nargs="+", required=True, help="WAV files or directories")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--median", type=int, default=9)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--eval-classes-only", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("eval", help="PSDS1 from detections or score files")
    p.add_argument("--gt", required=True, help="ground-truth event TSV")
    p.add_argument("--det", help="detection event TSV (single operating point)")
    p.add_argument("--scores", help="directory of per-clip .fmnw probability files")
    p.add_argument("--thresholds", type=int, default=50)
    p.add_argument("--median", type=int, default=9)
    p.add_argument("--hours", type=float, default=None)
    p.add_argument("--out", help="write the full JSON report here")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="complexity grid over widths and kinds")
    p.add_argument("--alphas", default="0.4,0.6,1.0,2.0,3.0")
    p.add_argument("--kinds", default="NONE,TF,BIGRU,HYBRID")
    p.add_argument("--hidden", help="comma list of hidden dims")
    p.add_argument("--hidden-from-alpha", action="store_true",
                   help="hidden = make_divisible(256 * alpha)")
    p.add_argument("--bench", action="store_true")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("forward", help="mel FMNW files -> frame probability FMNW files")
    p.add_argument("model")
    p.add_argument("--config")
    p.add_argument("--weights", required=True)
    p.add_argument("--mel", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dump-activations", help="write per-layer activations here")
    p.add_argument("--debug-compare", help="compare activations against this dump dir")
    p.set_defaults(fn=cmd_forward)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
