"""Command-line front-end: train, extract, eval, cluster, gen-corpus.

Exit codes: 0 on success, 1 when synthesis or extraction fails at
runtime, 2 for usage and input problems (missing files, bad config,
unknown fields, empty corpora).
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click

from .blueprint import blueprint_to_obj
from .cluster import (corpus_index, infer_landmarks_and_cluster,
                      landmark_candidates, roi_blueprints)
from .config import Config, load_config
from .corpusgen import PerturbationSpec, design_template, generate_corpus
from .docmodel import (Annotation, Document, DocumentError, load_annotations,
                       load_document)
from .evaluate import evaluate, load_records, report_to_obj
from .region_box import DisjunctProgram
from .runtime import extract, load_bundle, save_bundle, train_program
from .value_extract import Extract, Identity, SynthesisError, css


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map library errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SynthesisError as exc:
            _fail(1, str(exc))
        except (DocumentError, ValueError, OSError) as exc:
            _fail(2, str(exc))

    return wrapper


def _load_corpus(corpus_dir: str) -> List[Document]:
    root = Path(corpus_dir)
    docs_dir = root / "docs" if (root / "docs").is_dir() else root
    paths = sorted(p for p in docs_dir.iterdir()
                   if p.is_file() and p.suffix in (".json", ".html"))
    docs = [load_document(p) for p in paths]
    if not docs:
        raise DocumentError(f"no documents found under {docs_dir}")
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise DocumentError("duplicate document ids in corpus")
    return docs


def _load_config(config_file: Optional[str], seed: Optional[int],
                 threshold: Optional[float]) -> Config:
    cfg = load_config(config_file) if config_file else Config()
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if threshold is not None:
        cfg = dataclasses.replace(
            cfg, runtime=dataclasses.replace(cfg.runtime,
                                             blueprint_threshold=threshold))
    return cfg


def _pick_field(annotations: Dict[str, Dict[str, Annotation]],
                field: Optional[str]) -> str:
    fields = sorted({f for per_doc in annotations.values() for f in per_doc})
    if not fields:
        raise DocumentError("annotations file contains no fields")
    if field is None:
        if len(fields) > 1:
            raise DocumentError(
                f"annotations cover several fields {fields}; pick one with --field")
        return fields[0]
    if field not in fields:
        raise DocumentError(f"unknown field {field!r}; available: {fields}")
    return field


def _field_annotations(annotations: Dict[str, Dict[str, Annotation]],
                       field: str) -> Dict[str, Annotation]:
    return {doc_id: per_doc[field]
            for doc_id, per_doc in annotations.items() if field in per_doc}


def _describe_region_program(prog) -> str:
    if isinstance(prog, DisjunctProgram):
        paths = []
        for p in prog.paths:
            motions = []
            for m in p.motions:
                if m.kind == "absolute":
                    motions.append(f"Abs({m.direction},{m.steps})")
                else:
                    suffix = "incl" if m.inclusive else "excl"
                    motions.append(
                        f"Rel({m.direction},{m.pattern.kind}"
                        f"{m.pattern.length or ''},{suffix})")
            paths.append(" -> ".join(motions) or "stay")
        return " | ".join(paths)
    return (f"hops(up={prog.parent_hops}, "
            f"span=-{prog.left_hops}..+{prog.right_hops})")


def _describe_text(prog) -> str:
    if isinstance(prog, Identity):
        return "identity"
    if isinstance(prog, Extract):
        return (f"{prog.start.side} {prog.start.anchor_name()}"
                f"#{prog.start.occurrence} .. {prog.end.side} "
                f"{prog.end.anchor_name()}#{prog.end.occurrence}")
    return "concat(" + ", ".join(_describe_text(p) for p in prog.parts) + ")"


def _describe_tuple(tup) -> List[str]:
    lines = [f"  landmark: {tup.landmark!r}",
             f"  region:   {_describe_region_program(tup.region_program)}"]
    if tup.value_program.selector is not None:
        lines.append(f"  selector: {css(tup.value_program.selector)}")
    lines.append(f"  text:     {_describe_text(tup.value_program.text)}")
    if tup.guard is not None:
        lines.append(f"  guard:    landmark "
                     f"{tup.guard.program.tuples[0].landmark!r}")
    return lines


@click.group()
def main() -> None:
    """Landmark-anchored field extraction for tree and box documents."""


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--annotations", "annotations_file",
              type=click.Path(exists=True, dir_okay=False),
              help="Defaults to CORPUS_DIR/annotations.json.")
@click.option("--config", "config_file",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--field", help="Field to train; required with several fields.")
@click.option("--seed", type=int, help="Override the config seed.")
@click.option("--threshold", type=float,
              help="Blueprint gate distance t (default 0 = exact).")
@click.option("--out", "out_bundle", required=True,
              type=click.Path(dir_okay=False), help="Bundle output path.")
@_guarded
def train(corpus_dir, annotations_file, config_file, field, seed, threshold,
          out_bundle) -> None:
    """Synthesize an extraction program from an annotated corpus."""
    cfg = _load_config(config_file, seed, threshold)
    ann_path = annotations_file or Path(corpus_dir) / "annotations.json"
    if not Path(ann_path).is_file():
        raise DocumentError(f"annotations file not found: {ann_path}")
    annotations = load_annotations(ann_path)
    field = _pick_field(annotations, field)
    by_doc = _field_annotations(annotations, field)
    docs = [d for d in _load_corpus(corpus_dir) if d.doc_id in by_doc]
    if not docs:
        raise DocumentError("no corpus documents match the annotations")
    program, report = train_program(docs, by_doc, field, cfg)
    save_bundle(program, out_bundle)

    click.echo(f"field {field!r}: {len(docs)} training docs, "
               f"{len(program.tuples)} tuple(s), threshold {program.threshold}")
    for entry in report:
        status = entry["status"]
        line = (f"cluster [{', '.join(entry['cluster'])}] "
                f"landmark {entry['landmark']!r}: {status}")
        if entry.get("guarded"):
            line += " (guarded)"
        if entry.get("detail"):
            line += f" — {entry['detail']}"
        click.echo(line)
    for tup in program.tuples:
        click.echo("tuple:")
        for line in _describe_tuple(tup):
            click.echo(line)
    click.echo(f"bundle written to {out_bundle}")


@main.command("extract")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_file", default="-",
              help="Predictions file; '-' for stdout.")
@click.option("--threshold", type=float,
              help="Override the bundle's blueprint gate distance.")
@_guarded
def extract_cmd(bundle, corpus_dir, out_file, threshold) -> None:
    """Run a trained bundle over a corpus; one JSON record per document."""
    program = load_bundle(bundle)
    if threshold is not None:
        program = dataclasses.replace(program, threshold=threshold)
    docs = sorted(_load_corpus(corpus_dir), key=lambda d: d.doc_id)
    lines = []
    for doc in docs:
        value = extract(doc, program)
        lines.append(json.dumps(
            {"doc_id": doc.doc_id, "field": program.field, "value": value},
            sort_keys=True))
    payload = "\n".join(lines) + "\n"
    if out_file == "-":
        click.echo(payload, nl=False)
    else:
        Path(out_file).write_text(payload, "utf-8")
        click.echo(f"{len(lines)} predictions written to {out_file}")


@main.command("eval")
@click.argument("predictions", type=click.Path(exists=True, dir_okay=False))
@click.argument("gold", type=click.Path(exists=True, dir_okay=False))
@click.option("--field", help="Score only this field.")
@click.option("--out", "out_file", type=click.Path(dir_okay=False),
              help="Also write the report as JSON.")
@_guarded
def eval_cmd(predictions, gold, field, out_file) -> None:
    """Score line-delimited predictions against gold records."""
    preds = load_records(predictions)
    if field is not None:
        if field not in preds:
            raise DocumentError(f"no predictions for field {field!r}")
        preds = {field: preds[field]}
    reports = evaluate(preds, load_records(gold))
    for field, rep in sorted(reports.items()):
        click.echo(f"{field}: P={rep.precision:.4f} R={rep.recall:.4f} "
                   f"F1={rep.f1:.4f} (correct={rep.correct} "
                   f"incorrect={rep.incorrect} bottom={rep.bottom} "
                   f"defined={rep.defined})")
    if out_file:
        obj = [report_to_obj(rep) for _, rep in sorted(reports.items())]
        Path(out_file).write_text(
            json.dumps(obj, indent=2, sort_keys=True) + "\n", "utf-8")


@main.command("cluster")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--annotations", "annotations_file",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--field", help="Field whose annotations anchor the scoring.")
@click.option("--out", "out_file", default="-",
              help="Diagnostics JSON; '-' for stdout.")
@_guarded
def cluster_cmd(corpus_dir, annotations_file, config_file, field,
                out_file) -> None:
    """Dump clusters, landmark candidates, and ROI blueprints."""
    cfg = _load_config(config_file, None, None)
    ann_path = annotations_file or Path(corpus_dir) / "annotations.json"
    if not Path(ann_path).is_file():
        raise DocumentError(f"annotations file not found: {ann_path}")
    annotations = load_annotations(ann_path)
    field = _pick_field(annotations, field)
    by_doc = _field_annotations(annotations, field)
    docs = [d for d in _load_corpus(corpus_dir) if d.doc_id in by_doc]
    if not docs:
        raise DocumentError("no corpus documents match the annotations")
    corpus = corpus_index(docs)
    pairs = infer_landmarks_and_cluster(docs, by_doc, cfg.scoring,
                                        cfg.geometry,
                                        cfg.runtime.merge_threshold)
    dump = {"field": field, "clusters": []}
    for cluster, landmark in pairs:
        candidates = landmark_candidates(cluster, corpus, by_doc, cfg.scoring)
        roi = (roi_blueprints(cluster, corpus, candidates, by_doc,
                              cfg.geometry, cfg.scoring.max_n)
               if candidates else {})
        dump["clusters"].append({
            "docs": list(cluster.doc_ids),
            "kind": cluster.kind,
            "landmark": landmark,
            "candidates": [
                {"ngram": c.ngram, "score": c.score, "distance": c.distance,
                 "region_size": c.region_size} for c in candidates
            ],
            "roi_blueprints": {
                doc_id: [{"ngram": ngram, "blueprint": blueprint_to_obj(bp)}
                         for ngram, bp in bps]
                for doc_id, bps in roi.items()
            },
        })
    payload = json.dumps(dump, indent=2, sort_keys=True) + "\n"
    if out_file == "-":
        click.echo(payload, nl=False)
    else:
        Path(out_file).write_text(payload, "utf-8")
        click.echo(f"diagnostics written to {out_file}")


@main.command("gen-corpus")
@click.option("--kind", type=click.Choice(["tree", "box", "chassis"]),
              required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--train-docs", type=int, default=5, show_default=True)
@click.option("--test-docs", type=int, default=0, show_default=True)
@click.option("--perturb", "perturbs", multiple=True, metavar="KIND=N",
              help="Perturbed doc batch, repeatable (e.g. RemoveRoi=20).")
@_guarded
def gen_corpus(kind, seed, out_dir, train_docs, test_docs, perturbs) -> None:
    """Generate a seeded synthetic corpus with gold values."""
    specs = []
    for raw in perturbs:
        name, _, count = raw.partition("=")
        if not count:
            raise DocumentError(f"--perturb takes KIND=N, got {raw!r}")
        try:
            n = int(count)
        except ValueError:
            raise DocumentError(f"--perturb count must be an integer: {raw!r}")
        specs.append(PerturbationSpec(name, n, seed))
    template = design_template(kind, seed)
    manifest = generate_corpus(template, out_dir, train_docs=train_docs,
                               test_docs=test_docs, perturbations=specs)
    click.echo(f"corpus {manifest['corpus_id']}: {len(manifest['docs'])} "
               f"documents under {out_dir}")


if __name__ == "__main__":
    main()
