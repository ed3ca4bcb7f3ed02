"""Command-line entry point.

Subcommands: analyze, extract, rank, train, classify, evaluate, synth.
Reports go to stdout unless -o names a file.  Randomized steps (fold
shuffling, synthesis) demand an explicit --seed; there is no wall-clock
default, so identical invocations produce byte-identical output.

Exit codes: 0 success, 1 bad input or usage, 2 internal invariant failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import bayes, corpus, detect, evaluate, rank
from .container import open_archive
from .errors import BadK, DroidsiftError, InternalError

_REPORT_COLUMNS = ("ERR", "ACC", "TNR", "FPR", "TPR", "FNR", "Prec.", "AUC")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise SystemExit(_fail("%s: %s" % (self.prog, message)))


def _fail(message: str) -> int:
    print("error: %s" % message, file=sys.stderr)
    return 1


def _fmt(value: float | None) -> str:
    return "NA" if value is None else "%.5f" % value


def _jsonable(value: float | None) -> float | None:
    return None if value is None else float("%.5f" % value)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_catalog(path: str | None) -> detect.FeatureCatalog:
    if path is None:
        return detect.default_catalog()
    return detect.load_catalog(Path(path).read_bytes())


def _load_store(path: str, catalog: detect.FeatureCatalog) -> corpus.ProfileStore:
    return corpus.load_store(Path(path).read_bytes(), catalog)


def _feature_spec(args: argparse.Namespace) -> evaluate.FeatureSpec:
    if args.features:
        return tuple(fid.strip() for fid in args.features.split(",") if fid.strip())
    if args.top is not None:
        return args.top
    raise BadK("one of --top or --features is required")


def _add_common_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("table", "csv", "json"), default="table")
    parser.add_argument("-o", dest="output", metavar="PATH", default=None,
                        help="write the report to PATH instead of stdout")


def _build_parser() -> _Parser:
    parser = _Parser(prog="droidsift",
                     description="static feature analysis and Bayes classification "
                                 "of Android packages")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="profile one package")
    p.add_argument("apk")
    p.add_argument("--catalog", default=None)
    _add_common_output(p)

    p = sub.add_parser("extract", help="batch-profile a corpus manifest into a store")
    p.add_argument("manifest")
    p.add_argument("--catalog", default=None)
    p.add_argument("-o", dest="output", metavar="PATH", default=None)

    p = sub.add_parser("rank", help="mutual-information feature table for a store")
    p.add_argument("store")
    p.add_argument("--catalog", default=None)
    p.add_argument("--top", type=int, default=None, metavar="K")
    _add_common_output(p)

    p = sub.add_parser("train", help="train a model from a labeled store")
    p.add_argument("store")
    p.add_argument("--catalog", default=None)
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--top", type=int, default=None, metavar="K")
    spec.add_argument("--features", default=None, metavar="ID,ID,...")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("-o", dest="output", metavar="PATH", default=None)

    p = sub.add_parser("classify", help="classify a package or every profile in a store")
    p.add_argument("target", help="an .apk file or a profile store")
    p.add_argument("--model", required=True)
    p.add_argument("--catalog", default=None)
    _add_common_output(p)

    p = sub.add_parser("evaluate", help="cross-validated metrics for a labeled store")
    p.add_argument("store")
    p.add_argument("--catalog", default=None)
    p.add_argument("--folds", type=int, default=5)
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--top", type=int, default=None, metavar="K")
    spec.add_argument("--features", default=None, metavar="ID,ID,...")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--global-ranking", action="store_true",
                   help="rank once on the whole corpus instead of per training fold")
    p.add_argument("--pooled", action="store_true",
                   help="report pooled-confusion metrics instead of fold averages")
    p.add_argument("--roc-csv", default=None, metavar="PATH",
                   help="also write pooled ROC points (fpr,tpr,threshold)")
    _add_common_output(p)

    p = sub.add_parser("synth", help="generate a synthetic labeled store")
    p.add_argument("--benign", type=int, required=True)
    p.add_argument("--suspicious", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--marginals", default=None,
                   help="CSV id,p_benign,p_suspicious (default: built-in frequencies)")
    p.add_argument("--catalog", default=None)
    p.add_argument("-o", dest="output", metavar="PATH", default=None)

    return parser


# subcommand bodies ----------------------------------------------------------

def _cmd_analyze(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    report = detect.inspect_archive(
        open_archive(Path(args.apk).read_bytes(), args.apk), catalog)
    profile = report.profile
    if args.format == "json":
        payload = {
            "source": profile.source_id,
            "package": report.manifest_info.package_name if report.manifest_info else None,
            "bits": {f.id: int(bit) for f, bit in zip(catalog.features, profile.bits)},
            "hits": report.hits,
            "permissions": sorted(report.manifest_info.permissions) if report.manifest_info else [],
            "payload_entries": report.payload_entries,
            "diagnostics": list(profile.diagnostics),
        }
        _emit(json.dumps(payload, indent=2) + "\n", args.output)
        return 0
    if args.format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["feature", "bit", "locations"])
        for f, bit in zip(catalog.features, profile.bits):
            writer.writerow([f.id, int(bit), ";".join(report.hits.get(f.id, []))])
        _emit(out.getvalue(), args.output)
        return 0
    lines = ["source: %s" % profile.source_id]
    if report.manifest_info is not None:
        lines.append("package: %s" % (report.manifest_info.package_name or "(unset)"))
    lines.append("features set: %d of %d" % (sum(profile.bits), len(catalog)))
    for f, bit in zip(catalog.features, profile.bits):
        where = "  <- " + ", ".join(report.hits[f.id]) if bit else ""
        lines.append("  [%s] %-30s%s" % ("x" if bit else " ", f.id, where))
    if report.manifest_info is not None and report.manifest_info.permissions:
        lines.append("permissions: %s" % ", ".join(sorted(report.manifest_info.permissions)))
    if report.payload_entries:
        lines.append("payload entries: %s" % ", ".join(report.payload_entries))
    for note in profile.diagnostics:
        lines.append("diagnostic: %s" % note)
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    manifest_path = Path(args.manifest)
    manifest = corpus.load_corpus_manifest(manifest_path.read_bytes())
    store = corpus.extract_corpus(manifest, catalog, base_dir=manifest_path.parent)
    _emit(corpus.save_store(store).decode("utf-8"), args.output)
    return 0


def _cmd_rank(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    store = _load_store(args.store, catalog)
    counts = rank.tally(store.profiles, catalog)
    k = args.top if args.top is not None else len(catalog)
    ranked = rank.rank_and_select(counts, k)
    rows = [(r.feature_id, "%.6f" % r.mi, r.cells.n11, r.cells.n10,
             r.cells.n01, r.cells.n00) for r in ranked]
    header = ("id", "mi_bits", "n11", "n10", "n01", "n00")
    if args.format == "json":
        payload = [dict(zip(header, row)) for row in rows]
        _emit(json.dumps(payload, indent=2) + "\n", args.output)
    elif args.format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        _emit(out.getvalue(), args.output)
    else:
        width = max(len(r[0]) for r in rows)
        lines = ["%-*s  %-9s %5s %5s %5s %5s" % (width, *header)]
        for row in rows:
            lines.append("%-*s  %-9s %5d %5d %5d %5d" % (width, *row))
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    store = _load_store(args.store, catalog)
    spec = _feature_spec(args)
    if isinstance(spec, int):
        counts = rank.tally(store.profiles, catalog)
        selected = [r.feature_id for r in
                    rank.rank_and_select(counts, spec, drop_unobserved=True)]
    else:
        selected = list(spec)
    model = bayes.train(store.profiles, catalog, selected, args.alpha)
    _emit(bayes.save_model(model).decode("utf-8"), args.output)
    return 0


def _verdict_rows(model: bayes.BayesModel, catalog: detect.FeatureCatalog,
                  profiles: list[detect.AppProfile]) -> list[tuple[str, str, float]]:
    indices = [catalog.index_of(fid) for fid in model.selected_features]
    rows = []
    for profile in profiles:
        verdict = bayes.classify(model, [profile.bits[i] for i in indices])
        rows.append((profile.source_id, verdict.label.value, verdict.posterior_suspicious))
    return rows


def _cmd_classify(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    model = bayes.load_model(Path(args.model).read_bytes(), catalog)
    data = Path(args.target).read_bytes()
    if data.startswith(corpus.STORE_HEADER_PREFIX.encode("utf-8")):
        profiles = corpus.load_store(data, catalog).profiles
    else:
        profiles = [detect.run_detectors(open_archive(data, args.target), catalog)]
    rows = _verdict_rows(model, catalog, profiles)
    if args.format == "json":
        payload = [{"id": sid, "verdict": label, "posterior_suspicious": _jsonable(p)}
                   for sid, label, p in rows]
        _emit(json.dumps(payload, indent=2) + "\n", args.output)
    elif args.format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["id", "verdict", "posterior_suspicious"])
        writer.writerows((sid, label, _fmt(p)) for sid, label, p in rows)
        _emit(out.getvalue(), args.output)
    else:
        lines = ["%-40s %-10s %s" % (sid, label, _fmt(p)) for sid, label, p in rows]
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def _report_values(report: evaluate.EvalReport) -> tuple:
    return (report.err, report.acc, report.tnr, report.fpr,
            report.tpr, report.fnr, report.precision, report.auc)


def _check_report_invariants(report: evaluate.EvalReport) -> None:
    # cheap self-checks; a violation is a bug in this package, not bad input
    pairs = ((report.acc, report.err), (report.tpr, report.fnr), (report.tnr, report.fpr))
    for a, b in pairs:
        if a is not None and b is not None and abs(a + b - 1.0) > 1e-9:
            raise InternalError("metric identity violated: %r + %r != 1" % (a, b))


def _cmd_evaluate(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    store = _load_store(args.store, catalog)
    report = evaluate.evaluate_cv(
        store.profiles, catalog, args.folds, _feature_spec(args),
        args.alpha, args.seed, global_ranking=args.global_ranking,
        pooled=args.pooled)
    _check_report_invariants(report)
    values = _report_values(report)
    if args.roc_csv:
        points = evaluate.roc_points([s for s, _ in report.scores],
                                     [t for _, t in report.scores])
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, threshold in points:
            writer.writerow(["%.6f" % fpr, "%.6f" % tpr,
                             "inf" if threshold == float("inf") else "%.6f" % threshold])
        Path(args.roc_csv).write_text(out.getvalue(), encoding="utf-8")
    if args.format == "json":
        payload = {col: _jsonable(v) for col, v in zip(_REPORT_COLUMNS, values)}
        payload["counts"] = {"n_bb": report.counts.n_bb, "n_bs": report.counts.n_bs,
                             "n_sb": report.counts.n_sb, "n_ss": report.counts.n_ss}
        payload["folds"] = [
            {col: _jsonable(v) for col, v in zip(_REPORT_COLUMNS, _report_values(fold))}
            for fold in (report.fold_reports or ())
        ]
        _emit(json.dumps(payload, indent=2) + "\n", args.output)
    elif args.format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(_REPORT_COLUMNS)
        writer.writerow([_fmt(v) for v in values])
        _emit(out.getvalue(), args.output)
    else:
        header = "  ".join("%-8s" % c for c in _REPORT_COLUMNS)
        row = "  ".join("%-8s" % _fmt(v) for v in values)
        _emit(header + "\n" + row + "\n", args.output)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    if args.marginals:
        spec = corpus.load_marginals(Path(args.marginals).read_bytes())
    else:
        spec = corpus.default_marginals()
    store = corpus.synth_generate(spec, args.benign, args.suspicious, args.seed, catalog)
    _emit(corpus.save_store(store).decode("utf-8"), args.output)
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "extract": _cmd_extract,
    "rank": _cmd_rank,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except DroidsiftError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))
    except InternalError as exc:
        print("internal error: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print("internal error: %r" % exc, file=sys.stderr)
        return 2


def entry_point() -> None:
    raise SystemExit(main())
