"""Command-line driver: gen-data, train, decode, eval and replay.

Every command writes a manifest holding its fully resolved configuration;
``boostcrf replay MANIFEST`` re-executes it.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .boost import BoostConfig, TrainingDiverged, train_boost
from .evaluation import evaluate, recover_transition_matrix, transition_weights
from .features import FEATURE_SET_NAMES, FeatureSetKind, build_feature_set
from .inference import viterbi
from .io import (FormatError, load_dataset, load_model, load_predictions, read_json,
                 save_dataset, save_model, save_predictions, write_json)
from .mle import MleConfig, train_mle
from .synth import ScenarioSpec, generate_dataset, mask_labels

logger = logging.getLogger("boostcrf")


def parse_sigma(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("sigma must be positive or 'inf'")
    return value


def fmt_sigma(value: float) -> str | float:
    return "inf" if math.isinf(value) else value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boostcrf", description=__doc__)
    p.add_argument("--version", action="version", version=f"boostcrf {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic train/test scenario")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--spec", help="scenario JSON overriding the default short-meal analogue")
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-test", type=int)
    g.add_argument("--noise", type=float)
    g.add_argument("--mask-fraction", type=float, default=0.5,
                   help="fraction of training slices left observed")
    g.add_argument("--manifest")

    t = sub.add_parser("train", help="train a model by boosting or maximum likelihood")
    t.add_argument("--data", required=True)
    t.add_argument("--trainer", choices=("boost", "mle"), default="boost")
    t.add_argument("--feature-set", choices=FEATURE_SET_NAMES, default="bridge")
    t.add_argument("--window", type=int, default=1, help="context window W (odd)")
    t.add_argument("--beam", type=int, default=1, help="beam size S (boost only)")
    t.add_argument("--sigma", type=parse_sigma, default=math.inf)
    t.add_argument("--rounds", type=int, default=100, help="boosting rounds")
    t.add_argument("--iters", type=int, default=500, help="MLE iteration cap")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--trace")
    t.add_argument("--manifest")

    d = sub.add_parser("decode", help="Viterbi-decode a dataset with a saved model")
    d.add_argument("--model", required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--manifest")

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--predictions", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--model", help="also report the recovered transition matrix")
    e.add_argument("--out", required=True, help="text report")
    e.add_argument("--json", help="machine-readable report rows")
    e.add_argument("--manifest")

    r = sub.add_parser("replay", help="re-run a command from its manifest")
    r.add_argument("manifest")
    return p


def _manifest_path(args, default: Path) -> Path:
    return Path(args.manifest) if args.manifest else default


def _write_manifest(path: Path, command: str, config: dict) -> None:
    write_json({"tool": "boostcrf", "version": __version__, "command": command,
                "config": config}, path)


def cmd_gen_data(cfg: dict) -> None:
    base = read_json(cfg["spec"]) if cfg.get("spec") else {}
    base = {**base, "seed": cfg["seed"]}
    for key in ("n_train", "n_test"):
        if cfg.get(key) is not None:
            base[key] = cfg[key]
    if cfg.get("noise") is not None:
        base["noise_std"] = cfg["noise"]
    spec = ScenarioSpec.from_dict(base)
    train, test = generate_dataset(spec)
    train = mask_labels(train, cfg["mask_fraction"], spec.seed)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(train, out / "train.jsonl")
    save_dataset(test, out / "test.jsonl")
    logger.info("wrote %d train / %d test sequences to %s", len(train), len(test), out)


def cmd_train(cfg: dict) -> None:
    data = load_dataset(cfg["data"])
    kind = FeatureSetKind(cfg["feature_set"], cfg["window"])
    features = build_feature_set(kind, data.label_space)
    sigma = float(cfg["sigma"])
    with threadpool_limits(limits=cfg["threads"]):
        if cfg["trainer"] == "boost":
            config = BoostConfig(rounds=cfg["rounds"], beam_size=cfg["beam"], sigma=sigma,
                                 seed=cfg["seed"])
            model, trace = train_boost(data, features, config)
        else:
            config = MleConfig(sigma=sigma, max_iters=cfg["iters"], seed=cfg["seed"])
            model, trace = train_mle(data, features, config)
    save_model(model, cfg["out"])
    write_json(trace.to_dict(), cfg["trace"])
    logger.info("trained %s model with %d features -> %s", cfg["trainer"], len(features), cfg["out"])


def cmd_decode(cfg: dict) -> None:
    model = load_model(cfg["model"])
    data = load_dataset(cfg["data"])
    if data.label_space != model.label_space:
        raise FormatError(f"{cfg['data']}: labels {list(data.label_space.names)} do not match "
                          f"the model's {list(model.label_space.names)}")
    save_predictions([viterbi(model, s.x) for s in data], model.label_space, cfg["out"])


def cmd_eval(cfg: dict) -> None:
    data = load_dataset(cfg["data"])
    preds = load_predictions(cfg["predictions"], data.label_space)
    truth = []
    for i, s in enumerate(data):
        if s.truth is None:
            raise FormatError(f"{cfg['data']}: sequence {i} lacks complete ground truth")
        truth.append(s.truth)
    report = evaluate(preds, truth, data.label_space.size)
    names = list(data.label_space.names)
    text = report.render(names)
    doc = {"per_label_error": report.per_label_error, "macro_f1": report.macro_f1,
           "n_slices": report.n_slices, "n_excluded": report.n_excluded,
           "labels": report.rows(names)}
    if cfg.get("model"):
        model = load_model(cfg["model"])
        weights, selected = transition_weights(model)
        matrix = recover_transition_matrix(model)
        text += "\nrecovered transitions (* = unselected weight):\n"
        for a, row in enumerate(matrix):
            cells = " ".join(f"{v}{'*' if not selected[a, b] else ' '}" for b, v in enumerate(row))
            text += f"{names[a]:>8} {cells}\n"
        doc["transition_matrix"] = matrix
        doc["transition_weights"] = weights
        doc["transition_selected"] = selected
    Path(cfg["out"]).write_text(text.rstrip("\n") + "\n")
    if cfg.get("json"):
        write_json(doc, cfg["json"])


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "decode": cmd_decode, "eval": cmd_eval}


def resolve(args) -> tuple[dict, Path]:
    """Resolved config dictionary and manifest path for parsed arguments."""
    cfg = {k.replace("-", "_"): v for k, v in vars(args).items()
           if k not in ("command", "verbose", "manifest")}
    if args.command == "gen-data":
        default = Path(args.out_dir) / "manifest.json"
    else:
        default = Path(str(args.out) + ".manifest.json")
    if args.command == "train":
        cfg["trace"] = cfg["trace"] or str(args.out) + ".trace.json"
        cfg["sigma"] = fmt_sigma(cfg["sigma"])
        if cfg["feature_set"] != "context" and cfg["window"] != 1:
            raise ValueError("--window applies only to the context feature set")
        FeatureSetKind(cfg["feature_set"], cfg["window"])
    return cfg, _manifest_path(args, default)


def run(command: str, cfg: dict) -> None:
    COMMANDS[command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            manifest = read_json(args.manifest)
            if manifest.get("tool") != "boostcrf" or manifest.get("command") not in COMMANDS:
                raise FormatError(f"{args.manifest}: not a boostcrf manifest")
            run(manifest["command"], manifest["config"])
            return 0
        cfg, manifest_path = resolve(args)
        run(args.command, cfg)
        _write_manifest(manifest_path, args.command, cfg)
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 1
    except (FormatError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
