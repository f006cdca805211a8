"""Command line entry point.

Subcommands: synth, extract, train, classify, evaluate. Every configuration
key can come from a flat `key = value` config file (--config) or from a
per-command flag; flags override the file, the file overrides the built-in
defaults. Exit codes: 0 success, 1 usage or config error, 2 data error,
3 numeric failure.
"""

import argparse
import hashlib
import json
import os
import re
import sys
import numpy as np

from .audio_io import DataError, load_manifest, load_wav
from .classify import (ClassifierSpec, NumericError, classify_signal,
                       fit_classifier, load_model, save_model)
from .evaluate import (emit_comparison, emit_report, extract_dataset,
                       frame_counts, kfold_split, run_comparison, run_cv,
                       training_vectors)
from .features import ExtractionConfig, extract_track, write_feature_csv
from .synth import SynthSpec, generate_corpus


class ConfigError(Exception):
    pass


# name, type, default, help  (one flag and one config-file key per row)
CONFIG_SCHEMA = [
    ("labels", str, "bus,car,motor,truck", "comma-separated class labels; order fixes report axes and tie-breaks"),
    ("sample_rate", int, 11025, "sample rate of generated audio (Hz)"),
    ("window_len", int, 165, "analysis window length (samples)"),
    ("overlap", int, 55, "overlap between consecutive windows (samples)"),
    ("filter_order", int, 4, "low-pass prefilter order"),
    ("cutoff_hz", float, 4000.0, "low-pass cutoff frequency (Hz)"),
    ("clip_fraction", float, 0.68, "center-clip level as a fraction of min(max1, max2)"),
    ("periodicity_threshold", float, 0.30, "autocorrelation peak/energy ratio below which a frame is un-periodic"),
    ("max_pitch_hz", float, 1000.0, "upper bound of the pitch search (Hz)"),
    ("median_width", int, 3, "frames in the pitch median smoother (odd)"),
    ("alpha", float, 1.0, "energy factor of the high-energy selection"),
    ("zeta", float, 1.0, "zero-cross factor of the high-energy selection"),
    ("classifier", str, "qda", "frame classifier: qda, lda, knn or least_squares"),
    ("knn_k", int, 25, "neighbor count for knn"),
    ("knn_metric", str, "euclidean", "knn metric: euclidean or cosine"),
    ("shrinkage", float, 1e-4, "covariance shrinkage toward scaled identity; 0 disables"),
    ("standardize", str, "auto", "z-score features: auto, on or off (auto = knn and least_squares only)"),
    ("high_energy_only", bool, False, "train and test only on frames passing the high-energy criterion"),
    ("cv_folds", int, 10, "number of cross-validation folds"),
    ("seed", int, 0, "RNG seed for fold shuffling and synthesis"),
    ("synth_f0_hz", str, "80,150,300,500", "per-class fundamentals for synth (Hz, comma-separated)"),
    ("synth_harmonics", int, 3, "harmonics per tone"),
    ("synth_decay", float, 0.7, "amplitude ratio between consecutive harmonics"),
    ("synth_amplitude", float, 0.8, "peak tone amplitude before noise"),
    ("synth_snr_db", float, 10.0, "tone-to-noise ratio (dB); inf disables noise"),
    ("synth_per_class", int, 40, "signals generated per class"),
    ("synth_duration_s", float, 2.0, "generated signal duration (seconds)"),
    ("synth_tone_duty", float, 1.0, "fraction of each signal carrying the tone; the rest is noise only"),
    ("synth_segment_s", float, 0.25, "tone segment length when tone_duty < 1 (seconds)"),
]

# keys a trained model freezes; classify refuses conflicting overrides
EXTRACTION_KEYS = ("labels", "window_len", "overlap", "filter_order", "cutoff_hz",
                   "clip_fraction", "periodicity_threshold", "max_pitch_hz",
                   "median_width", "alpha", "zeta")

_TYPES = {name: typ for name, typ, _, _ in CONFIG_SCHEMA}
_DEFAULTS = {name: default for name, _, default, _ in CONFIG_SCHEMA}


def default_config() -> dict:
    return dict(_DEFAULTS)


def _parse_value(key: str, text: str):
    typ = _TYPES[key]
    text = text.strip()
    if typ is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        return typ(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {text!r}") from None


def parse_config_text(text: str, source: str = "config") -> dict:
    """Flat `key = value` lines; `#` starts a comment; unknown keys rejected."""
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def parse_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read(), source=str(path))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc


def format_config(cfg: dict) -> str:
    lines = []
    for name, typ, _, help_text in CONFIG_SCHEMA:
        value = cfg[name]
        if typ is bool:
            value = "true" if value else "false"
        lines.append(f"{name} = {value}  # {help_text}")
    return "\n".join(lines) + "\n"


def _split_csv(text: str):
    return tuple(part.strip() for part in text.split(",") if part.strip())


def label_set(cfg: dict) -> tuple:
    labels = _split_csv(cfg["labels"])
    if not labels:
        raise ConfigError("labels: need at least one label")
    if len(set(labels)) != len(labels):
        raise ConfigError("labels: duplicates are not allowed")
    return labels


def extraction_config(cfg: dict) -> ExtractionConfig:
    try:
        return ExtractionConfig(
            window_len=cfg["window_len"], overlap=cfg["overlap"],
            filter_order=cfg["filter_order"], cutoff_hz=cfg["cutoff_hz"],
            clip_fraction=cfg["clip_fraction"],
            periodicity_threshold=cfg["periodicity_threshold"],
            max_pitch_hz=cfg["max_pitch_hz"], median_width=cfg["median_width"],
            alpha=cfg["alpha"], zeta=cfg["zeta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def classifier_spec(cfg: dict) -> ClassifierSpec:
    try:
        return ClassifierSpec(
            kind=cfg["classifier"], knn_k=cfg["knn_k"],
            knn_metric=cfg["knn_metric"], shrinkage=cfg["shrinkage"],
            standardize=cfg["standardize"],
            high_energy_only=cfg["high_energy_only"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def synth_spec(cfg: dict) -> SynthSpec:
    labels = label_set(cfg)
    try:
        f0 = tuple(float(v) for v in _split_csv(cfg["synth_f0_hz"]))
    except ValueError:
        raise ConfigError(f"synth_f0_hz: expected numbers, got {cfg['synth_f0_hz']!r}") from None
    if any(f > cfg["max_pitch_hz"] for f in f0):
        raise ConfigError("synth_f0_hz: fundamentals must stay at or below max_pitch_hz")
    try:
        return SynthSpec(labels=labels, f0_hz=f0, harmonics=cfg["synth_harmonics"],
                         decay=cfg["synth_decay"], amplitude=cfg["synth_amplitude"],
                         snr_db=cfg["synth_snr_db"], per_class=cfg["synth_per_class"],
                         duration_s=cfg["synth_duration_s"],
                         sample_rate=cfg["sample_rate"],
                         tone_duty=cfg["synth_tone_duty"],
                         segment_s=cfg["synth_segment_s"], seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def extraction_dict(cfg: dict) -> dict:
    doc = {"labels": list(label_set(cfg))}
    doc.update({k: cfg[k] for k in EXTRACTION_KEYS if k != "labels"})
    return doc


def config_fingerprint(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True)
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser):
    # global flags are valid after the subcommand too
    parser.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="flat key = value config file")
    parser.add_argument("--format", choices=("text", "csv", "json"),
                        default=argparse.SUPPRESS,
                        help="output format for reports and classifications")
    for name, typ, default, help_text in CONFIG_SCHEMA:
        flag = "--" + name.replace("_", "-")
        if typ is bool:
            parser.add_argument(flag, dest=name, default=argparse.SUPPRESS,
                                action=argparse.BooleanOptionalAction,
                                help=f"{help_text} (default: {default})")
        else:
            parser.add_argument(flag, dest=name, type=typ, metavar=name.upper(),
                                default=argparse.SUPPRESS,
                                help=f"{help_text} (default: {default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vehiclesound",
                     description="Classify vehicle audio recordings by class "
                                 "using short-time features and discriminant analysis.")
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        dest="seed", help="override the RNG seed")
    parser.add_argument("--format", choices=("text", "csv", "json"), default="text",
                        help="output format for reports and classifications")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic labeled corpus")
    p.add_argument("--out-dir", required=True, help="directory for WAVs and manifest.csv")
    _add_config_flags(p)

    p = sub.add_parser("extract", help="dump per-frame features to CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="feature CSV path")
    p.add_argument("--figures", metavar="DIR", default=None,
                   help="also render feature-trace figures into DIR")
    _add_config_flags(p)

    p = sub.add_parser("train", help="fit a classifier on a labeled corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-out", required=True, help="model JSON path")
    _add_config_flags(p)

    p = sub.add_parser("classify", help="label one or more recordings with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("wavs", nargs="+", metavar="WAV")
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="k-fold cross-validation report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--compare", action="store_true",
                   help="run the whole baseline ladder instead of one classifier")
    p.add_argument("--figures", metavar="DIR", default=None,
                   help="also render confusion/accuracy figures into DIR")
    _add_config_flags(p)

    return parser


def _resolve_config(ns) -> tuple:
    """Merge defaults < config file < explicit flags; returns (cfg, explicit keys)."""
    cfg = default_config()
    explicit = {}
    if ns.config:
        explicit.update(parse_config_file(ns.config))
    for key in _TYPES:
        if hasattr(ns, key):
            explicit[key] = getattr(ns, key)
    cfg.update(explicit)
    return cfg, set(explicit)


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def cmd_synth(ns, cfg, explicit) -> int:
    spec = synth_spec(cfg)
    manifest = generate_corpus(spec, ns.out_dir)
    print(f"wrote {len(spec.labels) * spec.per_class} files, manifest {manifest}")
    return 0


def _load_labeled_tracks(manifest, cfg):
    dataset = load_manifest(manifest, label_set(cfg))
    tracks = extract_dataset(dataset, extraction_config(cfg))
    return dataset, tracks


def cmd_extract(ns, cfg, explicit) -> int:
    config = extraction_config(cfg)
    dataset, tracks = _load_labeled_tracks(ns.manifest, cfg)
    named = [(e.name, t) for e, t in zip(dataset.entries, tracks)]
    with open(ns.out, "w", encoding="utf-8") as fh:
        write_feature_csv(fh, named, config)
    if ns.figures:
        from . import plots
        os.makedirs(ns.figures, exist_ok=True)
        labeled = [(e.label, t) for e, t in zip(dataset.entries, tracks)]
        for feature in ("energy", "zcr", "pitch"):
            plots.plot_feature_traces(labeled, dataset.label_set, feature,
                                      os.path.join(ns.figures, f"features_{feature}.png"))
    return 0


def cmd_train(ns, cfg, explicit) -> int:
    config = extraction_config(cfg)
    spec = classifier_spec(cfg)
    dataset, tracks = _load_labeled_tracks(ns.manifest, cfg)
    X, y = training_vectors(tracks, dataset, range(len(dataset)), config,
                            spec.high_energy_only)
    model = fit_classifier(spec, X, y, dataset.label_set)
    total, periodic, selected = frame_counts(tracks, config)
    extraction = extraction_dict(cfg)
    save_model(model, ns.model_out, extra={
        "config": extraction,
        "config_fingerprint": config_fingerprint(extraction),
        "training": {
            "signals": len(dataset),
            "frames_total": total,
            "frames_periodic": periodic,
            "frames_high_energy": selected,
            "frames_used": len(X),
        },
    })
    print(f"wrote model {ns.model_out} ({len(X)} training frames)")
    return 0


def _check_model_compat(doc, cfg, explicit):
    stored = doc.get("config")
    if not stored:
        raise DataError("model file carries no extraction config")
    for key in EXTRACTION_KEYS:
        if key not in explicit:
            continue
        current = list(label_set(cfg)) if key == "labels" else cfg[key]
        if current != stored[key]:
            raise ConfigError(
                f"{key}={current!r} conflicts with the model "
                f"(trained with {stored[key]!r}); refusing to extract with "
                "drifted settings")


def cmd_classify(ns, cfg, explicit) -> int:
    model, doc = load_model(ns.model)
    _check_model_compat(doc, cfg, explicit)
    stored = doc["config"]
    config = ExtractionConfig(**{k: stored[k] for k in EXTRACTION_KEYS if k != "labels"})

    results = []
    for path in ns.wavs:
        track = extract_track(load_wav(path), config)
        results.append((path, classify_signal(model, track, config)))

    labels = model.labels
    if ns.format == "json":
        doc_out = [{"path": p, "label": r.label, "frames_used": r.frames_used,
                    "fractions": r.fractions} for p, r in results]
        print(json.dumps(doc_out, indent=2))
    elif ns.format == "csv":
        print("path,label," + ",".join(labels))
        for p, r in results:
            name = r.label if r.label is not None else "unclassifiable"
            print(f"{p},{name}," + ",".join(f"{r.fractions[lab]:.6f}" for lab in labels))
    else:
        for p, r in results:
            name = r.label if r.label is not None else "unclassifiable"
            fracs = " ".join(f"{lab}={r.fractions[lab]:.3f}" for lab in labels)
            print(f"{p}\t{name}\t{fracs}")
    if any(r.label is None for _, r in results):
        return 2
    return 0


def cmd_evaluate(ns, cfg, explicit) -> int:
    config = extraction_config(cfg)
    spec = classifier_spec(cfg)
    dataset, tracks = _load_labeled_tracks(ns.manifest, cfg)
    plan = kfold_split(dataset, cfg["cv_folds"], cfg["seed"])

    figures = None
    if ns.figures:
        from . import plots  # deferred: matplotlib import is slow
        os.makedirs(ns.figures, exist_ok=True)
        figures = ns.figures

    if ns.compare:
        results = run_comparison(dataset, config, spec, plan, tracks=tracks)
        rendered = emit_comparison(results, ns.format, ns.out)
        if ns.out is None:
            sys.stdout.write(rendered)
        if figures:
            plots.plot_comparison(results, os.path.join(figures, "comparison.png"))
            for key, rep in results:
                plots.plot_confusion(rep.confusion,
                                     os.path.join(figures, f"confusion_{key}.png"),
                                     title=rep.classifier)
        return 0

    report = run_cv(dataset, config, spec, plan, tracks=tracks)
    rendered = emit_report(report, ns.format, ns.out)
    if ns.out is None:
        sys.stdout.write(rendered)
    if figures:
        plots.plot_confusion(report.confusion, os.path.join(figures, "confusion.png"),
                             title=report.classifier)
        plots.plot_fold_accuracies(report, os.path.join(figures, "fold_accuracies.png"))
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help or usage error
        return int(exc.code or 0)
    try:
        cfg, explicit = _resolve_config(ns)
        return _COMMANDS[ns.command](ns, cfg, explicit)
    except ConfigError as exc:
        print(f"vehiclesound: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"vehiclesound: data error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"vehiclesound: numeric failure: {exc}", file=sys.stderr)
        return 3


def run():
    sys.exit(main())
