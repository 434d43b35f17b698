"""Command-line orchestration of the pipeline: fit, encode, summarize,
eval, inspect, and bench subcommands with reproducible seeded outputs."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from .aggregate import build_tree, fit_control, select_generic, select_specific
from .corpus import AspectLexicon, label_aspects, load_corpus
from .embedder import embed_builtin, load_embeddings
from .evaluate import (PlantedConfig, generate_planted, rouge, score_recovery)
from .hrq import Codebook, QuantizerConfig, encode_batch, fit
from .summarize import assemble

log = logging.getLogger(__name__)


class _Outputs:
    """Tracks files written by a command so failures leave no partials."""

    def __init__(self):
        self.paths: list[Path] = []

    def target(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(path)
        return path

    def discard(self) -> None:
        for path in self.paths:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass


def _write_json(outputs: _Outputs, path: Path, payload: dict) -> None:
    with open(outputs.target(path), "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def _safe_name(entity_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", entity_id)


def _load_inputs(args) -> tuple:
    corpus = load_corpus(args.corpus)
    if getattr(args, "embeddings", None):
        matrix = load_embeddings(args.embeddings)
        if len(matrix) != len(corpus):
            raise ValueError(f"embedding count {len(matrix)} != corpus "
                             f"sentence count {len(corpus)}")
    else:
        matrix = embed_builtin(corpus, dim=args.dim, seed=args.seed)
    return corpus, matrix


def _quantizer_config(args) -> QuantizerConfig:
    return QuantizerConfig(
        alpha_init=args.alpha_init, tau0=args.tau0, tau_min=args.tau_min,
        gamma_temp=args.gamma_temp, beta_kl=args.beta_kl, beta_nl=args.beta_nl,
        gamma_nl=args.gamma_nl, p_depth=args.p_depth, epochs=args.epochs,
        seed=args.seed, gumbel=not args.no_gumbel)


def cmd_fit(args, outputs: _Outputs) -> int:
    corpus, matrix = _load_inputs(args)
    config = _quantizer_config(args)
    codebook, report = fit(matrix, levels=args.levels,
                           codebook_size=args.codebook_size, config=config)
    out = Path(args.out)
    codebook.save(outputs.target(out / "codebook.json"))
    report.save(outputs.target(out / "fit_report.json"))
    log.info("fit: %d sentences -> codebook %dx%dx%d", len(corpus),
             codebook.levels, codebook.codebook_size, codebook.dim)
    return 0


def _encode_all(corpus, matrix, codebook) -> dict[str, tuple[int, ...]]:
    paths = encode_batch(matrix, codebook)
    return {sid: tuple(int(c) for c in paths[i])
            for i, sid in enumerate(corpus.sentence_ids())}


def cmd_encode(args, outputs: _Outputs) -> int:
    corpus, matrix = _load_inputs(args)
    codebook = Codebook.load(args.codebook)
    path_map = _encode_all(corpus, matrix, codebook)
    out = Path(args.out)
    with open(outputs.target(out / "paths.jsonl"), "w", encoding="utf-8") as handle:
        for sid, path in path_map.items():
            handle.write(json.dumps({"sentence_id": sid, "path": list(path)}))
            handle.write("\n")
    return 0


def _build_trees(corpus, path_map):
    return {eid: build_tree(entity, path_map)
            for eid, entity in corpus.entities.items()}


def cmd_summarize(args, outputs: _Outputs) -> int:
    corpus, matrix = _load_inputs(args)
    codebook = Codebook.load(args.codebook)
    if args.aspect is not None and args.rating is not None:
        raise ValueError("choose at most one of --aspect and --rating")
    if args.aspect is not None:
        if not args.lexicon:
            raise ValueError("--aspect needs --lexicon")
        corpus = label_aspects(corpus, AspectLexicon.load(args.lexicon))
    path_map = _encode_all(corpus, matrix, codebook)
    trees = _build_trees(corpus, path_map)

    control = None
    if args.aspect is not None:
        control = (fit_control(corpus, path_map, "aspect"), args.aspect)
    elif args.rating is not None:
        control = (fit_control(corpus, path_map, "rating"), args.rating)

    out = Path(args.out)
    for eid, tree in trees.items():
        generic = select_generic(tree, args.generic_k, args.threshold)
        specific = select_specific(trees, eid, args.specific_k, control)
        summary = assemble(eid, generic, specific, args.mode, tree, corpus,
                           codebook=codebook, embeddings=matrix)
        summary.save(outputs.target(out / f"summary-{_safe_name(eid)}.json"))
    return 0


def _load_references(path: Path) -> dict[str, list[dict]]:
    refs: dict[str, list[dict]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"references line {line_no}: {exc.msg}") from exc
            refs.setdefault(record["entity_id"], []).append(record)
    return refs


def cmd_eval(args, outputs: _Outputs) -> int:
    refs = _load_references(Path(args.references))
    summary_files = sorted(Path(args.summaries).glob("summary-*.json"))
    if not summary_files:
        raise ValueError(f"no summary-*.json files under {args.summaries}")
    per_entity = {}
    for path in summary_files:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        eid = data["entity_id"]
        records = refs.get(eid, [])
        if args.aspect is not None:
            records = [r for r in records if r.get("aspect") == args.aspect]
        references = [" ".join(r["summaries"]) if isinstance(r["summaries"], list)
                      else str(r["summaries"]) for r in records]
        if not references:
            continue
        candidate = " ".join(s["text"] for s in data["sentences"])
        score = rouge(candidate, references)
        per_entity[eid] = {"r2": score.r2_f1, "rl": score.rl_f1,
                           "recovery_precision": None, "recovery_recall": None}
    if not per_entity:
        raise ValueError("no summaries matched any reference entity")
    mean = {
        "r2": sum(v["r2"] for v in per_entity.values()) / len(per_entity),
        "rl": sum(v["rl"] for v in per_entity.values()) / len(per_entity),
        "recovery_precision": None,
        "recovery_recall": None,
    }
    out = Path(args.out)
    _write_json(outputs, out / "eval_report.json",
                {"entities": per_entity, "mean": mean})
    with open(outputs.target(out / "eval_report.csv"), "w", encoding="utf-8",
              newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["entity_id", "r2", "rl", "recovery_precision",
                         "recovery_recall"])
        for eid in sorted(per_entity):
            row = per_entity[eid]
            writer.writerow([eid, row["r2"], row["rl"], "", ""])
        writer.writerow(["mean", mean["r2"], mean["rl"], "", ""])
    return 0


def cmd_inspect(args, outputs: _Outputs) -> int:
    corpus, matrix = _load_inputs(args)
    codebook = Codebook.load(args.codebook)
    path_map = _encode_all(corpus, matrix, codebook)
    trees = _build_trees(corpus, path_map)
    out = Path(args.out)
    for eid, tree in trees.items():
        _write_json(outputs, out / f"tree-{_safe_name(eid)}.json", tree.to_nested())
    # 2-D seeded random projection of the embeddings, labeled with paths.
    rng = np.random.default_rng(args.seed)
    proj = rng.standard_normal((matrix.dim, 2)) / np.sqrt(matrix.dim)
    coords = matrix.values.astype(np.float64) @ proj
    with open(outputs.target(out / "projection.csv"), "w", encoding="utf-8",
              newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sentence_id", "x", "y", "path", "top_code"])
        for i, sid in enumerate(corpus.sentence_ids()):
            path = path_map[sid]
            writer.writerow([sid, repr(float(coords[i, 0])), repr(float(coords[i, 1])),
                             "-".join(str(c) for c in path), path[0]])
    return 0


def cmd_bench(args, outputs: _Outputs) -> int:
    config = PlantedConfig(n_entities=args.entities,
                           sentences_per_entity=args.sentences,
                           n_opinions=args.opinions, dim=args.dim,
                           noise_sigma=args.noise_sigma, seed=args.seed)
    bench = generate_planted(config)
    qconfig = _quantizer_config(args)
    codebook, _ = fit(bench.embeddings, levels=args.levels,
                      codebook_size=args.codebook_size, config=qconfig)
    path_map = _encode_all(bench.corpus, bench.embeddings, codebook)
    trees = _build_trees(bench.corpus, path_map)
    per_entity = {}
    for eid, tree in trees.items():
        generic = select_generic(tree, args.generic_k, args.threshold)
        summary = assemble(eid, generic, [], "extractive", tree, bench.corpus)
        precision, recall = score_recovery(summary, bench.truth, args.top_m)
        per_entity[eid] = {"recovery_precision": precision,
                           "recovery_recall": recall, "r2": None, "rl": None}
    mean_p = sum(v["recovery_precision"] for v in per_entity.values()) / len(per_entity)
    mean_r = sum(v["recovery_recall"] for v in per_entity.values()) / len(per_entity)
    _write_json(outputs, Path(args.out) / "bench_report.json", {
        "entities": per_entity,
        "mean": {"recovery_precision": mean_p, "recovery_recall": mean_r,
                 "r2": None, "rl": None},
    })
    return 0


def _add_quantizer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--levels", type=int, default=12,
                        help="number of hierarchy levels")
    parser.add_argument("--codebook-size", type=int, default=12,
                        help="codes per level")
    parser.add_argument("--epochs", type=int, default=20, help="fit epochs")
    parser.add_argument("--no-gumbel", action="store_true",
                        help="disable Gumbel exploration noise during fit")
    parser.add_argument("--p-depth", dest="p_depth", type=float, default=0.1,
                        help="depth dropout probability during fit")
    parser.add_argument("--alpha-init", dest="alpha_init", type=float,
                        default=0.5, help="codebook init norm decay per level")
    parser.add_argument("--tau0", type=float, default=1.0,
                        help="initial softmax temperature")
    parser.add_argument("--tau-min", dest="tau_min", type=float, default=0.5,
                        help="temperature floor")
    parser.add_argument("--gamma-temp", dest="gamma_temp", type=float,
                        default=33333.0, help="temperature decay constant")
    parser.add_argument("--beta-kl", dest="beta_kl", type=float,
                        default=0.0025, help="uniform-prior KL weight")
    parser.add_argument("--beta-nl", dest="beta_nl", type=float, default=0.05,
                        help="norm loss weight")
    parser.add_argument("--gamma-nl", dest="gamma_nl", type=float, default=1.5,
                        help="norm loss level ratio")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap; results are identical at any value")
    parser.add_argument("--config", type=str, default=None,
                        help="key=value defaults file; flags take precedence")
    parser.add_argument("--out", type=str, required=True,
                        help="output directory")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="hrqsum",
        description="Hierarchical residual quantization summarizer",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subparsers = parser.add_subparsers(dest="command", required=True)
    registry = {}

    def sub(name: str, help_text: str) -> argparse.ArgumentParser:
        p = subparsers.add_parser(
            name, help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        registry[name] = p
        return p

    p = sub("fit", "fit a codebook on sentence embeddings")
    p.add_argument("--corpus", required=True, help="review JSONL file")
    p.add_argument("--embeddings", default=None,
                   help="HRQE embedding file (default: built-in embedder)")
    p.add_argument("--dim", type=int, default=64,
                   help="built-in embedder dimension")
    _add_quantizer_flags(p)
    _add_common_flags(p)

    p = sub("encode", "encode sentences to code paths")
    p.add_argument("--corpus", required=True, help="review JSONL file")
    p.add_argument("--embeddings", default=None,
                   help="HRQE embedding file (default: built-in embedder)")
    p.add_argument("--dim", type=int, default=64,
                   help="built-in embedder dimension")
    p.add_argument("--codebook", required=True, help="codebook JSON file")
    _add_common_flags(p)

    p = sub("summarize", "select subpaths and emit attributed summaries")
    p.add_argument("--corpus", required=True, help="review JSONL file")
    p.add_argument("--embeddings", default=None,
                   help="HRQE embedding file (default: built-in embedder)")
    p.add_argument("--dim", type=int, default=64,
                   help="built-in embedder dimension")
    p.add_argument("--codebook", required=True, help="codebook JSON file")
    p.add_argument("--generic-k", dest="generic_k", type=int, default=5,
                   help="generic subpaths per summary")
    p.add_argument("--specific-k", dest="specific_k", type=int, default=5,
                   help="specific subpaths per summary")
    p.add_argument("--threshold", type=float, default=0.01,
                   help="generic pruning probability threshold")
    p.add_argument("--mode", choices=["extractive", "nearest"],
                   default="extractive", help="text realization mode")
    p.add_argument("--aspect", default=None, help="aspect control target")
    p.add_argument("--rating", type=int, default=None,
                   help="rating control target")
    p.add_argument("--lexicon", default=None,
                   help="aspect lexicon JSON (required with --aspect)")
    _add_common_flags(p)

    p = sub("eval", "score summaries against reference summaries")
    p.add_argument("--summaries", required=True,
                   help="directory of summary-*.json files")
    p.add_argument("--references", required=True, help="reference JSONL file")
    p.add_argument("--aspect", default=None,
                   help="only use references with this aspect")
    _add_common_flags(p)

    p = sub("inspect", "dump per-entity trees and a 2-D projection")
    p.add_argument("--corpus", required=True, help="review JSONL file")
    p.add_argument("--embeddings", default=None,
                   help="HRQE embedding file (default: built-in embedder)")
    p.add_argument("--dim", type=int, default=64,
                   help="built-in embedder dimension")
    p.add_argument("--codebook", required=True, help="codebook JSON file")
    _add_common_flags(p)

    p = sub("bench", "run the planted-opinion recovery benchmark")
    p.add_argument("--entities", type=int, default=20, help="entity count")
    p.add_argument("--sentences", type=int, default=500,
                   help="sentences per entity")
    p.add_argument("--opinions", type=int, default=10, help="planted opinions")
    p.add_argument("--dim", type=int, default=16, help="embedding dimension")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float,
                   default=0.05, help="within-opinion embedding noise")
    p.add_argument("--generic-k", dest="generic_k", type=int, default=5,
                   help="generic subpaths per summary")
    p.add_argument("--threshold", type=float, default=0.01,
                   help="generic pruning probability threshold")
    p.add_argument("--top-m", dest="top_m", type=int, default=5,
                   help="opinions counted as recoverable")
    _add_quantizer_flags(p)
    _add_common_flags(p)
    return parser, registry


def _coerce(value: str):
    lowered = value.strip().strip('"').strip("'")
    if lowered.lower() in ("true", "false"):
        return lowered.lower() == "true"
    for cast in (int, float):
        try:
            return cast(lowered)
        except ValueError:
            continue
    return lowered


def _load_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"config line {line_no}: expected key=value")
            key, _, value = stripped.partition("=")
            values[key.strip().replace("-", "_")] = _coerce(value)
    return values


COMMANDS = {
    "fit": cmd_fit,
    "encode": cmd_encode,
    "summarize": cmd_summarize,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("HRQ_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser, registry = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = _load_config_file(args.config)
            known = {a.dest for a in registry[args.command]._actions}
            unknown = set(overrides) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            registry[args.command].set_defaults(**overrides)
        except (OSError, ValueError) as exc:
            print(f"error: ConfigError: {exc}", file=sys.stderr)
            return 1
        args = parser.parse_args(argv)
    outputs = _Outputs()
    try:
        return COMMANDS[args.command](args, outputs)
    except Exception as exc:  # single-line machine-parsable failure contract
        outputs.discard()
        message = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
