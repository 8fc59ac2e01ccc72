"""Command-line pipeline driver.

Subcommands: ingest, sample, cluster, stats, change, robustness, simulate,
serve, export.  Every randomized command takes an explicit seed (default 0)
and writes a run manifest (seeds, effective config, config hash, versions)
next to its outputs, so runs are self-describing and repeatable: the same
inputs, seed, and config produce byte-identical files.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .clustering import AnnealConfig, cluster
from .graph import GraphError
from .metrics import change_scores
from .pipeline import advance_round, project_stats
from .sampling import SamplingConfig
from .simulation import (
    NoiseModel,
    annotate_planted_walk,
    generate_planted_graph,
    robustness_experiment,
    run_pipeline_sim,
)
from .storage import DataError, Project, _write_tsv, export_graph, graph_json_bytes, ingest, load


class UsageError(Exception):
    """Bad command line or config file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; the contract is 1
        raise UsageError(message)


# -- config files -----------------------------------------------------------
# Flat "section.key = value" lines; '#' starts a comment.  Sections map onto
# SamplingConfig / AnnealConfig / NoiseModel / change thresholds.

_SECTIONS = ("sampling", "anneal", "noise", "change", "service")


def parse_config_file(path: str | Path) -> dict:
    config: dict = {}
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{number}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise UsageError(f"{path}:{number}: key {key!r} lacks a section prefix")
        section, field = key.split(".", 1)
        if section not in _SECTIONS:
            raise UsageError(f"{path}:{number}: unknown section {section!r}")
        config.setdefault(section, {})[field] = _parse_value(value)
    return config


def _parse_value(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            continue
    return text


def _config_from(args) -> dict:
    config = parse_config_file(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "seed", None) is not None:
        config.setdefault("sampling", {})["seed"] = args.seed
        config.setdefault("anneal", {})["seed"] = args.seed
        config.setdefault("noise", {})["seed"] = args.seed
    return config


def _configs(config: dict) -> tuple[SamplingConfig, AnnealConfig, NoiseModel]:
    try:
        return (SamplingConfig(**config.get("sampling", {})),
                AnnealConfig(**{k: tuple(v) if k == "max_clusters_range" else v
                                for k, v in config.get("anneal", {}).items()}),
                NoiseModel(**config.get("noise", {})))
    except TypeError as exc:
        raise UsageError(f"bad config key: {exc}") from None


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_manifest(out: Path, command: str, seeds: dict, config: dict,
                   result: dict | None = None) -> None:
    doc = {
        "command": command,
        "seeds": seeds,
        "config": config,
        "config_hash": hashlib.sha256(
            _canonical_json(config).encode("utf-8")).hexdigest(),
        "versions": {"wugs": __version__, "python": platform.python_version()},
    }
    if result is not None:
        doc["result"] = result
    (out / "manifest.json").write_text(_canonical_json(doc), encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_project(args) -> Project:
    return load(Path(args.project))


# -- subcommand handlers ------------------------------------------------------


def cmd_ingest(args) -> int:
    config = _config_from(args)
    project = ingest(
        args.usages,
        senses_path=args.senses,
        judgments_path=args.judgments,
        project_id=args.project_id,
        periods=[int(p) for p in args.periods.split(",")] if args.periods else None,
        annotators=args.annotators.split(",") if args.annotators else None,
        config=config,
    )
    out = Path(args.project)
    project.save(out)
    write_manifest(out, "ingest", {}, config, result={
        "lemmas": project.lemmas,
        "usages": len(project.usages),
        "senses": len(project.senses),
        "judgments": len(project.judgments),
        "round": project.round,
    })
    print(f"ingested {len(project.usages)} usages, {len(project.judgments)} judgments "
          f"-> {out}")
    return 0


def cmd_sample(args) -> int:
    project = _load_project(args)
    config = {**project.config, **_config_from(args)}
    sampling_cfg, anneal_cfg, _ = _configs(config)
    report = advance_round(project, anneal_cfg, sampling_cfg)
    out = _out_dir(args) if args.out else project.path
    write_manifest(out, "sample",
                   {"sampling": sampling_cfg.seed, "anneal": anneal_cfg.seed},
                   config, result={
                       "round": report.round,
                       "batch_pairs": report.batch_pairs,
                       "lemmas": {lemma: {
                           "batch_pairs": entry.batch_pairs,
                           "complete": entry.complete,
                           "loss": entry.loss,
                           "flags": list(entry.flags),
                       } for lemma, entry in report.lemmas.items()},
                   })
    print(f"opened round {report.round} with {report.batch_pairs} pairs")
    return 0


def _cluster_one(payload):
    lemma, graph, cfg = payload
    return lemma, cluster(graph, cfg)


def cmd_cluster(args) -> int:
    project = _load_project(args)
    config = {**project.config, **_config_from(args)}
    _, anneal_cfg, _ = _configs(config)
    lemmas = [args.lemma] if args.lemma else project.lemmas
    jobs = []
    for lemma in lemmas:
        cfg = replace(anneal_cfg, seed=_per_lemma_seed(anneal_cfg.seed, lemma))
        jobs.append((lemma, project.graph(lemma), cfg))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = dict(pool.map(_cluster_one, jobs))
    else:
        results = dict(map(_cluster_one, jobs))
    out = _out_dir(args)
    summary = {}
    for lemma in sorted(results):
        clustering = results[lemma]
        doc = export_graph(project, lemma, clustering)
        (out / f"{lemma}.graph.json").write_bytes(graph_json_bytes(doc))
        summary[lemma] = {
            "loss": clustering.loss,
            "normalized_loss": clustering.normalized_loss,
            "n_clusters": clustering.n_clusters,
            "isolates": len(clustering.isolates),
        }
    write_manifest(out, "cluster", {"anneal": anneal_cfg.seed}, config,
                   result=summary)
    for lemma, entry in summary.items():
        print(f"{lemma}: {entry['n_clusters']} clusters, "
              f"loss {entry['loss']}, normalized {entry['normalized_loss']:.4f}")
    return 0


def _per_lemma_seed(seed: int, lemma: str) -> int:
    import zlib

    return (seed * 1_000_003 + zlib.crc32(lemma.encode("utf-8"))) % (2**63)


def cmd_stats(args) -> int:
    project = _load_project(args)
    stats = project_stats(project)
    out = _out_dir(args)
    (out / "stats.json").write_text(_canonical_json(stats), encoding="utf-8")
    _write_tsv(out / "judgment_frequencies.tsv", ("score", "count", "proportion"),
               [(s, stats["judgment_counts"][s], stats["judgment_proportions"][s])
                for s in sorted(stats["judgment_counts"])])
    _write_tsv(out / "disagreement_histogram.tsv", ("difference", "proportion"),
               [(d, p) for d, p in sorted(stats["disagreement_histogram"].items())])
    _write_tsv(out / "agreement_pairwise.tsv", ("annotator1", "annotator2", "rho", "n_shared"),
               [(pair.split("|")[0], pair.split("|")[1], entry["rho"], entry["n_shared"])
                for pair, entry in sorted(stats["agreement"]["pairwise"].items())])
    write_manifest(out, "stats", {}, project.config, result={
        "total_judgments": stats["total_judgments"],
        "weighted_mean_spearman": stats["agreement"]["weighted_mean_spearman"],
        "krippendorff_alpha": stats["agreement"]["krippendorff_alpha"],
    })
    print(f"stats for {stats['total_judgments']} judgments -> {out}")
    return 0


def cmd_change(args) -> int:
    project = _load_project(args)
    config = {**project.config, **_config_from(args)}
    _, anneal_cfg, _ = _configs(config)
    lemmas = [args.lemma] if args.lemma else project.lemmas
    rows = []
    details = {}
    for lemma in lemmas:
        graph = project.graph(lemma)
        clustering = cluster(graph, replace(
            anneal_cfg, seed=_per_lemma_seed(anneal_cfg.seed, lemma)))
        scores = change_scores(graph, clustering, k=args.k, n=args.n)
        rows.append((lemma,
                     "" if scores.graded is None else f"{scores.graded:.6f}",
                     "" if scores.binary is None else int(scores.binary),
                     clustering.n_clusters))
        details[lemma] = {
            "graded": scores.graded,
            "binary": scores.binary,
            "freq_dist": {str(p): list(v) for p, v in scores.freq_dist.items()},
            "n_clusters": clustering.n_clusters,
        }
    out = _out_dir(args)
    _write_tsv(out / "change.tsv", ("lemma", "graded", "binary", "n_clusters"), rows)
    (out / "change.json").write_text(_canonical_json(details), encoding="utf-8")
    write_manifest(out, "change", {"anneal": anneal_cfg.seed}, config,
                   result={"thresholds": {"k": args.k, "n": args.n}})
    for row in rows:
        print(f"{row[0]}: graded={row[1] or 'n/a'} binary={row[2]}")
    return 0


def cmd_robustness(args) -> int:
    config = _config_from(args)
    _, anneal_cfg, _ = _configs(config)
    fractions = [float(f) for f in args.fractions.split(",")]
    curves = []
    if args.project:
        project = load(Path(args.project))
        lemmas = [args.lemma] if args.lemma else project.lemmas
        for lemma in lemmas:
            graph = project.graph(lemma)
            cfg = replace(anneal_cfg, seed=_per_lemma_seed(anneal_cfg.seed, lemma))
            reference = cluster(graph, cfg)
            curves.append((lemma, robustness_experiment(
                graph, reference, fractions, args.trials, cfg, seed=args.seed)))
    else:
        for index in range(args.graphs):
            planted = generate_planted_graph(args.planted_n, args.planted_senses,
                                             seed=args.seed + index)
            graph = annotate_planted_walk(planted, edge_fraction=args.edge_fraction,
                                          seed=args.seed + index)
            cfg = replace(anneal_cfg, seed=args.seed + index)
            reference = cluster(graph, cfg)
            curves.append((f"planted{index:02d}", robustness_experiment(
                graph, reference, fractions, args.trials, cfg, seed=args.seed + index)))
    out = _out_dir(args)
    rows = []
    for name, curve in curves:
        for f, mean, lo, hi in zip(curve.fractions, curve.mean_accuracy,
                                   curve.ci_low, curve.ci_high):
            rows.append((name, f, f"{mean:.6f}", f"{lo:.6f}", f"{hi:.6f}", curve.trials))
    _write_tsv(out / "robustness.tsv",
               ("graph", "fraction", "mean_accuracy", "ci_low", "ci_high", "trials"),
               rows)
    aggregate = {}
    for fi, f in enumerate(fractions):
        values = [curve.mean_accuracy[fi] for _, curve in curves]
        aggregate[str(f)] = sum(values) / len(values)
    (out / "robustness.json").write_text(_canonical_json({
        "fractions": fractions,
        "aggregate_mean_accuracy": aggregate,
        "curves": {name: {
            "mean_accuracy": list(curve.mean_accuracy),
            "ci_low": list(curve.ci_low),
            "ci_high": list(curve.ci_high),
        } for name, curve in curves},
    }), encoding="utf-8")
    write_manifest(out, "robustness", {"seed": args.seed, "anneal": anneal_cfg.seed},
                   config, result={"aggregate_mean_accuracy": aggregate,
                                   "trials": args.trials})
    for f, mean in aggregate.items():
        print(f"fraction {f}: mean accuracy {mean:.4f}")
    return 0


def cmd_simulate(args) -> int:
    config = _config_from(args)
    sampling_cfg, anneal_cfg, _ = _configs(config)
    noise = NoiseModel(p_deviate=args.noise, p_zero=args.p_zero, seed=args.seed)
    planted = generate_planted_graph(args.n, args.senses, seed=args.seed)
    annotators = tuple(f"sim{i}" for i in range(args.annotators))
    report = run_pipeline_sim(planted, noise, sampling_cfg, anneal_cfg,
                              max_rounds=args.rounds, annotators=annotators)
    out = _out_dir(args)
    _write_tsv(out / "rounds.tsv",
               ("round", "batch_pairs", "total_pairs", "total_judgments",
                "n_clusters", "n_multi_clusters", "accuracy", "loss",
                "normalized_loss", "removed_nodes"),
               [(r.round, r.batch_pairs, r.total_pairs, r.total_judgments,
                 r.n_clusters, r.n_multi_clusters, f"{r.accuracy:.6f}",
                 r.loss, f"{r.normalized_loss:.6f}", len(r.removed_nodes))
                for r in report.rounds])
    result = {
        "final_accuracy": report.final_accuracy,
        "stopped_round": report.stopped_round,
        "total_pairs": report.total_pairs,
        "possible_pairs": report.possible_pairs,
        "annotated_share": report.total_pairs / report.possible_pairs,
    }
    write_manifest(out, "simulate",
                   {"seed": args.seed, "sampling": sampling_cfg.seed,
                    "anneal": anneal_cfg.seed, "noise": noise.seed},
                   config, result=result)
    for r in report.rounds:
        print(f"round {r.round}: +{r.batch_pairs} pairs, accuracy {r.accuracy:.3f}, "
              f"loss {r.loss}")
    print(f"final accuracy {report.final_accuracy:.3f} "
          f"({result['annotated_share']:.1%} of pairs annotated)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    project = _load_project(args)
    config = {**project.config, **_config_from(args)}
    sampling_cfg, anneal_cfg, _ = _configs(config)
    tokens = None
    if args.tokens:
        tokens = {k: str(v) for k, v in parse_config_file(args.tokens)
                  .get("service", {}).items()}
    app = create_app(project, anneal_cfg=anneal_cfg, sampling_cfg=sampling_cfg,
                     tokens=tokens, admin_token=args.admin_token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args) -> int:
    project = _load_project(args)
    out = _out_dir(args)
    lemmas = [args.lemma] if args.lemma else project.lemmas
    for lemma in lemmas:
        doc = export_graph(project, lemma)
        (out / f"{lemma}.graph.json").write_bytes(graph_json_bytes(doc))
    (out / "stats.json").write_text(_canonical_json(project_stats(project)),
                                    encoding="utf-8")
    write_manifest(out, "export", {}, project.config,
                   result={"lemmas": lemmas})
    print(f"exported {len(lemmas)} graph(s) -> {out}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="wugs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, config=True, out=True):
        if config:
            p.add_argument("--config", help="flat key=value config file")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="seed for every randomized step (default 0)")
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("ingest", help="validate TSV tables into a project directory")
    p.add_argument("--usages", required=True)
    p.add_argument("--senses")
    p.add_argument("--judgments")
    p.add_argument("--project", required=True, help="project directory to create")
    p.add_argument("--project-id", default="project")
    p.add_argument("--periods", help="comma-separated period labels, e.g. 1,2")
    p.add_argument("--annotators", help="comma-separated roster")
    common(p, seed=False, out=False)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("sample", help="advance one round: cluster and draw the next batch")
    p.add_argument("--project", required=True)
    p.add_argument("--out", help="report directory (default: project directory)")
    common(p, out=False)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("cluster", help="cluster lemma graphs and export them")
    p.add_argument("--project", required=True)
    p.add_argument("--lemma")
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("stats", help="agreement and distribution reports")
    p.add_argument("--project", required=True)
    common(p, seed=False)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("change", help="graded and binary change scores per lemma")
    p.add_argument("--project", required=True)
    p.add_argument("--lemma")
    p.add_argument("--k", type=int, default=2, help="attestation threshold")
    p.add_argument("--n", type=int, default=0, help="absence threshold")
    common(p)
    p.set_defaults(handler=cmd_change)

    p = sub.add_parser("robustness", help="perturbation experiment curve")
    p.add_argument("--fractions", default="0,0.1,0.25,0.5")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--project", help="run on a real project instead of planted graphs")
    p.add_argument("--lemma")
    p.add_argument("--graphs", type=int, default=10, help="number of planted graphs")
    p.add_argument("--planted-n", type=int, default=150)
    p.add_argument("--planted-senses", type=int, default=3)
    p.add_argument("--edge-fraction", type=float, default=0.2,
                   help="annotated share of all pairs in planted fixtures")
    common(p)
    p.set_defaults(handler=cmd_robustness)

    p = sub.add_parser("simulate", help="round-by-round pipeline simulation")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--senses", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.0, help="per-judgment deviation probability")
    p.add_argument("--p-zero", type=float, default=0.0)
    p.add_argument("--rounds", type=int, default=8)
    p.add_argument("--annotators", type=int, default=3)
    common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--project", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8570)
    p.add_argument("--tokens", help="config file with service.<annotator> = token lines")
    p.add_argument("--admin-token")
    common(p, out=False)
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("export", help="write graph JSON and stats for the project")
    p.add_argument("--project", required=True)
    p.add_argument("--lemma")
    common(p, seed=False)
    p.set_defaults(handler=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = 0
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, GraphError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
