"""Command-line harness: train, evaluate, fuse, compare, voc-stats.

Every command exits 0 on success and nonzero with a one-line diagnostic on
failure. Output files are written atomically (temp file + rename) only after
all computation succeeded, so a failing run never leaves partial output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

from .config import parse_experiment_config
from .detector import run_experiment
from .errors import DstrainError, ParseError
from .evidence import combine_sequential, normalize_evidence, Frame
from .ingest import class_instance_counts, load_detections, load_voc_directory
from .metrics import Detection, GroundTruth, evaluate_detections
from .report import ExperimentReport


def _write_atomic(path: str, content: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(out_dir: str | None, files: dict[str, str]) -> None:
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    for name, content in files.items():
        _write_atomic(os.path.join(out_dir, name), content)


# ----------------------------------------------------------------- train


def cmd_train(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    config, echo = parse_experiment_config(
        text,
        base_dir=os.path.dirname(os.path.abspath(args.config)),
        seed_override=args.seed,
        card_override=args.card,
    )
    if getattr(args, "iou", None) is not None:
        config = dataclasses.replace(config, iou_threshold=args.iou)
        echo["iou_threshold"] = args.iou
    report = run_experiment(config, config_echo=echo)
    _emit(args.out, {"report.json": report.to_json(), "epochs.tsv": report.to_table()})
    if report.best_epoch is not None:
        print(
            f"best score {report.best_score:.5f} at epoch {report.best_epoch} "
            f"({len(report.rows)} epochs, backend {report.backend}, "
            f"{report.wall_seconds:.1f}s)"
        )
    else:
        print(
            f"no epochs trained; initial test mAP {report.final_test_map:.4f} "
            f"(backend {report.backend})"
        )
    print(f"wrote {os.path.join(args.out, 'report.json')}")
    return 0


# -------------------------------------------------------------- evaluate


def _evaluation_to_text(ev) -> str:
    lines = ["class\tap\tprecision\trecall\tf1\ttp\tfp\tfn"]
    for label in ev.labels:
        prf = ev.per_class[label]
        lines.append(
            f"{label}\t{ev.ap_by_label[label]:.6f}\t{prf.precision:.6f}"
            f"\t{prf.recall:.6f}\t{prf.f1:.6f}\t{prf.tp}\t{prf.fp}\t{prf.fn}"
        )
    lines.append(
        f"micro\t{ev.mean_ap:.6f}\t{ev.micro.precision:.6f}\t{ev.micro.recall:.6f}"
        f"\t{ev.micro.f1:.6f}\t{ev.micro.tp}\t{ev.micro.fp}\t{ev.micro.fn}"
    )
    lines.append("")
    lines.append("confusion matrix (rows = actual, cols = predicted)")
    lines.append("\t" + "\t".join(str(label) for label in ev.labels))
    for i, label in enumerate(ev.labels):
        row = "\t".join(str(int(v)) for v in ev.confusion.counts[i])
        lines.append(f"{label}\t{row}")
    return "\n".join(lines) + "\n"


def _evaluation_to_dict(ev) -> dict:
    return {
        "labels": [str(label) for label in ev.labels],
        "ap": {str(label): ev.ap_by_label[label] for label in ev.labels},
        "mean_ap": ev.mean_ap,
        "confusion": ev.confusion.counts.tolist(),
        "per_class": {
            str(label): {
                "precision": prf.precision,
                "recall": prf.recall,
                "f1": prf.f1,
                "tp": prf.tp,
                "fp": prf.fp,
                "fn": prf.fn,
            }
            for label, prf in ev.per_class.items()
        },
        "micro": {
            "precision": ev.micro.precision,
            "recall": ev.micro.recall,
            "f1": ev.micro.f1,
            "tp": ev.micro.tp,
            "fp": ev.micro.fp,
            "fn": ev.micro.fn,
        },
    }


def cmd_evaluate(args) -> int:
    with open(args.detections, encoding="utf-8") as fh:
        records = load_detections(fh.read())
    annotations = load_voc_directory(args.annotations)
    detections = [
        Detection(r.image_id, r.class_name, r.score, r.box) for r in records
    ]
    ground_truths = [
        GroundTruth(ann.image_id, obj.class_name, obj.box)
        for ann in annotations
        for obj in ann.objects
    ]
    labels = sorted(
        {g.label for g in ground_truths} | {d.label for d in detections}
    )
    if not labels:
        print("nothing to evaluate: no detections and no annotations")
        return 0
    ev = evaluate_detections(detections, ground_truths, labels, args.iou)
    text = _evaluation_to_text(ev)
    print(text, end="")
    _emit(
        args.out,
        {
            "evaluation.json": json.dumps(_evaluation_to_dict(ev), indent=2) + "\n",
            "evaluation.tsv": text,
        },
    )
    return 0


# ------------------------------------------------------------------ fuse


def parse_evidence_groups(text: str) -> list[tuple[str, list[list[tuple[str, float]]]]]:
    """Parse the fuse input: ``group <name>`` headers, one source per line.

    Source lines alternate label and score tokens, e.g. ``car 0.9 person 0.3``.
    """
    groups: list[tuple[str, list[list[tuple[str, float]]]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "group":
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'group <name>'")
            groups.append((parts[1], []))
            continue
        if not groups:
            raise ParseError(f"line {lineno}: evidence before any 'group' header")
        if len(parts) % 2 != 0:
            raise ParseError(f"line {lineno}: expected label/score pairs")
        source = []
        for label, score_text in zip(parts[::2], parts[1::2]):
            try:
                source.append((label, float(score_text)))
            except ValueError:
                raise ParseError(
                    f"line {lineno}: non-numeric score {score_text!r}"
                ) from None
        groups[-1][1].append(source)
    for name, sources in groups:
        if not sources:
            raise ParseError(f"group {name!r} has no evidence sources")
    return groups


def _fuse_group(name: str, sources: list[list[tuple[str, float]]]) -> dict:
    seen: dict[str, None] = {}
    for source in sources:
        for label, _ in source:
            seen.setdefault(label)
    frame = Frame(seen.keys())
    masses = [normalize_evidence(source, frame) for source in sources]
    if len(masses) == 1:
        combined, conflict, phi = masses[0], 0.0, 1.0
    else:
        result = combine_sequential(masses)
        combined, conflict, phi = result.combined, result.conflict_k, result.certainty_phi
    return {
        "group": name,
        "sources": [m.as_dict() for m in masses],
        "combined": combined.as_dict(),
        "combined_theta": combined.theta,
        "conflict_k": conflict,
        "certainty_phi": phi,
    }


def cmd_fuse(args) -> int:
    with open(args.evidence, encoding="utf-8") as fh:
        groups = parse_evidence_groups(fh.read())
    results = []
    for name, sources in groups:
        try:
            results.append(_fuse_group(name, sources))
        except DstrainError as err:
            raise DstrainError(f"group {name!r}: {err}") from None
    for res in results:
        combined = ", ".join(f"{lab}={m:.6f}" for lab, m in res["combined"].items())
        print(
            f"group {res['group']}: K={res['conflict_k']:.6f} "
            f"phi={res['certainty_phi']:.6f} combined: {combined}"
        )
    _emit(args.out, {"fusion.json": json.dumps({"groups": results}, indent=2) + "\n"})
    return 0


# --------------------------------------------------------------- compare


def _report_display_name(path: str) -> str:
    stem = os.path.splitext(os.path.basename(path))[0]
    if stem != "report":
        return stem
    # generic file name: the run directory is the informative part
    parent = os.path.basename(os.path.dirname(os.path.abspath(path)))
    return parent or stem


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            reports.append((_report_display_name(path),
                            ExperimentReport.from_json(fh.read())))
    names = [name for name, _ in reports]
    scores = [rep.best_score for _, rep in reports]
    epochs = [rep.best_epoch for _, rep in reports]

    def winner(values, pick_best):
        present = [v for v in values if v is not None]
        if not present:
            return "n/a"
        best = pick_best(present)
        hits = [names[i] for i, v in enumerate(values) if v == best]
        return hits[0] if len(hits) == 1 else "tie"

    rows = [
        ("best_score", [f"{s:.5f}" if s is not None else "n/a" for s in scores],
         winner(scores, max)),
        ("best_epoch", [str(e) if e is not None else "n/a" for e in epochs],
         winner(epochs, min)),
    ]
    lines = ["metric\t" + "\t".join(names) + "\twinner"]
    for metric, cells, win in rows:
        lines.append(f"{metric}\t" + "\t".join(cells) + f"\t{win}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    payload = {
        "reports": names,
        "best_score": {n: s for n, s in zip(names, scores)},
        "best_epoch": {n: e for n, e in zip(names, epochs)},
        "winner_best_score": rows[0][2],
        "winner_best_epoch": rows[1][2],
    }
    _emit(args.out, {
        "compare.json": json.dumps(payload, indent=2) + "\n",
        "compare.tsv": table,
    })
    return 0


# -------------------------------------------------------------- voc-stats


def cmd_voc_stats(args) -> int:
    annotations = load_voc_directory(args.annotations)
    counts = class_instance_counts(annotations, include_difficult=not args.skip_difficult)
    lines = ["class\tcount"]
    for name in sorted(counts):
        lines.append(f"{name}\t{counts[name]}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    _emit(args.out, {"voc_stats.tsv": table})
    return 0


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dstrain",
        description="Evidence-fusion training experiments and detection evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment from a config file")
    p_train.add_argument("--config", required=True, help="experiment config path")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument("--card", default=None, help="override the scorecard (a|b|path)")
    p_train.add_argument("--iou", type=float, default=None,
                         help="override the test-mAP IoU threshold")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a detections file against VOC annotations")
    p_eval.add_argument("--detections", required=True, help="detections file (text or JSON)")
    p_eval.add_argument("--annotations", required=True, help="directory of VOC XML files")
    p_eval.add_argument("--iou", type=float, default=0.5, help="IoU matching threshold")
    p_eval.add_argument("--out", default=None, help="optional output directory")
    p_eval.set_defaults(func=cmd_evaluate)

    p_fuse = sub.add_parser("fuse", help="fuse labeled score groups from a file")
    p_fuse.add_argument("--evidence", required=True, help="evidence groups file")
    p_fuse.add_argument("--out", default=None, help="optional output directory")
    p_fuse.set_defaults(func=cmd_fuse)

    p_cmp = sub.add_parser("compare", help="compare training reports side by side")
    p_cmp.add_argument("reports", nargs="+", help="report.json paths (>= 2)")
    p_cmp.add_argument("--out", default=None, help="optional output directory")
    p_cmp.set_defaults(func=cmd_compare)

    p_voc = sub.add_parser("voc-stats", help="per-class instance counts of a VOC directory")
    p_voc.add_argument("--annotations", required=True, help="directory of VOC XML files")
    p_voc.add_argument("--skip-difficult", action="store_true",
                       help="exclude objects flagged difficult")
    p_voc.add_argument("--out", default=None, help="optional output directory")
    p_voc.set_defaults(func=cmd_voc_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compare" and len(args.reports) < 2:
        print("dstrain: compare needs at least two reports", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (DstrainError, OSError, json.JSONDecodeError) as err:
        print(f"dstrain: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
