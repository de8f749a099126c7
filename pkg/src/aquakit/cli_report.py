"""Directory-batch evaluation and report serialization.

Pairs WAV files across a reference and a test directory by basename,
computes the requested per-pair and corpus-level metrics, and writes a
deterministic JSON or CSV report. Per-pair failures are recorded in the
report instead of aborting the run.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import AudioBuffer, align_pair, downmix_mono, read_wav
from .embedding_stats import (
    EmbeddingSet,
    baseline_embedding,
    estimate_gaussian,
    frechet_audio_distance,
    kernel_distance_mmd2,
    load_embeddings,
)
from .errors import AquaKitError, ConfigError, PairingError
from .peaq import PeaqConfig, peaq_basic
from .signal_metrics import METRIC_NAMES, buffer_metric

PAIR_METRICS = METRIC_NAMES + ("peaq",)
CORPUS_METRICS = ("fad", "mmd")
VALID_METRICS = PAIR_METRICS + CORPUS_METRICS

ALIGN_POLICIES = ("strict", "truncate")
REPORT_FORMATS = ("json", "csv")
EMBEDDING_FORMATS = ("csv", "npy")
MMD_ESTIMATORS = ("biased", "unbiased")


@dataclass
class EvalConfig:
    """Everything one evaluation run needs.

    The fields echoed into the report are the semantic ones; output
    destination and parallelism are presentation concerns and stay out so
    reports from identical inputs are byte-identical.
    """

    ref_dir: str
    test_dir: str
    metrics: list[str]
    align: str = "strict"
    embeddings: str = "baseline"
    ref_emb: str | None = None
    test_emb: str | None = None
    emb_format: str = "csv"
    fad_eps: float | None = None
    mmd_estimator: str = "biased"
    peaq_level: float = 92.0
    peaq_debug_dump: str | None = None
    out_format: str = "json"
    jobs: int = 1

    def __post_init__(self):
        if not self.metrics:
            raise ConfigError("no metrics requested")
        unknown = [m for m in self.metrics if m not in VALID_METRICS]
        if unknown:
            raise ConfigError(
                f"unknown metrics: {', '.join(unknown)}; "
                f"valid names: {', '.join(VALID_METRICS)}"
            )
        deduped = list(dict.fromkeys(self.metrics))
        self.metrics = deduped
        if self.align not in ALIGN_POLICIES:
            raise ConfigError(f"unknown alignment policy {self.align!r}")
        if self.embeddings != "baseline":
            raise ConfigError(f"unknown embedding extractor {self.embeddings!r}")
        if self.emb_format not in EMBEDDING_FORMATS:
            raise ConfigError(f"unknown embedding format {self.emb_format!r}")
        if self.mmd_estimator not in MMD_ESTIMATORS:
            raise ConfigError(f"unknown MMD estimator {self.mmd_estimator!r}")
        if self.out_format not in REPORT_FORMATS:
            raise ConfigError(f"unknown report format {self.out_format!r}")
        if (self.ref_emb is None) != (self.test_emb is None):
            raise ConfigError("--ref-emb and --test-emb must be given together")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")

    @property
    def pair_metrics(self) -> list[str]:
        return [m for m in self.metrics if m in PAIR_METRICS]

    @property
    def corpus_metrics(self) -> list[str]:
        return [m for m in self.metrics if m in CORPUS_METRICS]

    def echo(self) -> dict:
        return {
            "ref_dir": self.ref_dir,
            "test_dir": self.test_dir,
            "metrics": list(self.metrics),
            "align": self.align,
            "embeddings": self.embeddings,
            "ref_emb": self.ref_emb,
            "test_emb": self.test_emb,
            "emb_format": self.emb_format,
            "fad_eps": self.fad_eps,
            "mmd_estimator": self.mmd_estimator,
            "peaq_level": self.peaq_level,
        }


@dataclass
class PairingResult:
    pairs: list[tuple[str, Path, Path]]
    unmatched_ref: list[str]
    unmatched_test: list[str]


def pair_directories(ref_dir: str, test_dir: str, pairing: str = "by_filename") -> PairingResult:
    """Match WAV files across two directories by exact basename.

    Only top-level files with a literal ".wav" suffix participate;
    matching is case-sensitive. Raises when either directory is missing
    or no basename appears on both sides.
    """
    if pairing != "by_filename":
        raise ConfigError(f"unknown pairing mode {pairing!r}")
    sides = []
    for label, path in (("reference", ref_dir), ("test", test_dir)):
        root = Path(path)
        if not root.is_dir():
            raise PairingError(f"{label} directory not found: {path}")
        sides.append({p.name for p in root.iterdir() if p.is_file() and p.name.endswith(".wav")})
    ref_names, test_names = sides
    common = sorted(ref_names & test_names)
    unmatched_ref = sorted(ref_names - test_names)
    unmatched_test = sorted(test_names - ref_names)
    if not common:
        raise PairingError(
            "no matching WAV basenames between directories; "
            f"unmatched reference: {unmatched_ref}; unmatched test: {unmatched_test}"
        )
    pairs = [(name, Path(ref_dir) / name, Path(test_dir) / name) for name in common]
    return PairingResult(pairs=pairs, unmatched_ref=unmatched_ref, unmatched_test=unmatched_test)


@dataclass
class _PairOutcome:
    name: str
    ref_file: str = ""
    test_file: str = ""
    metrics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    error: str | None = None
    embedding_error: str | None = None
    ref_embedding: np.ndarray | None = None
    test_embedding: np.ndarray | None = None


def _evaluate_pair(
    name: str,
    ref_path: Path,
    test_path: Path,
    config: EvalConfig,
    peaq_config: PeaqConfig | None,
    need_embeddings: bool,
) -> _PairOutcome:
    outcome = _PairOutcome(name=name, ref_file=str(ref_path), test_file=str(test_path))
    failures = []
    try:
        ref = read_wav(str(ref_path))
        test = read_wav(str(test_path))
    except (AquaKitError, OSError, FileNotFoundError) as exc:
        outcome.error = str(exc)
        return outcome
    try:
        ref_aligned, test_aligned = align_pair(ref, test, policy=config.align, warn=outcome.warnings)
    except AquaKitError as exc:
        outcome.error = str(exc)
        return outcome

    for metric in config.pair_metrics:
        try:
            if metric == "peaq":
                dump_path = None
                if config.peaq_debug_dump:
                    stem = name[:-4] if name.endswith(".wav") else name
                    dump_path = os.path.join(config.peaq_debug_dump, stem + ".json")
                result = peaq_basic(ref_aligned, test_aligned, peaq_config, debug_dump=dump_path)
                outcome.metrics[metric] = float(result.odg)
                outcome.warnings.extend(result.warnings)
            else:
                outcome.metrics[metric] = float(buffer_metric(metric, ref_aligned, test_aligned).value)
        except AquaKitError as exc:
            failures.append(f"{metric}: {exc}")

    if need_embeddings:
        try:
            outcome.ref_embedding = baseline_embedding(downmix_mono(ref_aligned)).vectors
            outcome.test_embedding = baseline_embedding(downmix_mono(test_aligned)).vectors
        except AquaKitError as exc:
            outcome.embedding_error = f"embedding: {exc}"

    if failures:
        outcome.error = "; ".join(failures)
    return outcome


@dataclass
class Report:
    tool_version: str
    config: dict
    pairs: list
    corpus_metrics: dict
    aggregate: dict
    errors: list

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "config": self.config,
            "pairs": self.pairs,
            "corpus_metrics": self.corpus_metrics,
            "aggregate": self.aggregate,
            "errors": self.errors,
        }


def run_evaluation(config: EvalConfig) -> Report:
    """Evaluate all directory pairs and assemble the report.

    Raises ConfigError or PairingError for unusable setups; failures on
    individual pairs are recorded in the report and never abort the run.
    """
    peaq_config = None
    if "peaq" in config.metrics:
        # the CLI opts into resampling so mixed-rate corpora still grade
        peaq_config = PeaqConfig(listening_level=config.peaq_level, allow_resample=True)
    if config.peaq_debug_dump and "peaq" in config.metrics:
        os.makedirs(config.peaq_debug_dump, exist_ok=True)

    pairing = pair_directories(config.ref_dir, config.test_dir)
    errors = [f"unmatched reference file: {n}" for n in pairing.unmatched_ref]
    errors += [f"unmatched test file: {n}" for n in pairing.unmatched_test]

    external_emb = config.ref_emb is not None
    need_embeddings = bool(config.corpus_metrics) and not external_emb

    def work(entry):
        name, ref_path, test_path = entry
        return _evaluate_pair(name, ref_path, test_path, config, peaq_config, need_embeddings)

    if config.jobs > 1 and len(pairing.pairs) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(work, pairing.pairs))
    else:
        outcomes = [work(entry) for entry in pairing.pairs]

    # successful pairs become rows; failed pairs are recorded as errors
    succeeded = [o for o in outcomes if o.error is None]
    pair_rows = [
        {
            "ref_file": o.ref_file,
            "test_file": o.test_file,
            "metrics": o.metrics,
            "warnings": o.warnings,
        }
        for o in succeeded
    ]
    errors += [f"{o.name}: {o.error}" for o in outcomes if o.error is not None]
    errors += [f"{o.name}: {o.embedding_error}" for o in outcomes if o.embedding_error is not None]

    corpus: dict = {}
    if config.corpus_metrics:
        if external_emb:
            try:
                ref_set = load_embeddings(config.ref_emb, format=config.emb_format)
                test_set = load_embeddings(config.test_emb, format=config.emb_format)
            except (AquaKitError, OSError) as exc:
                raise ConfigError(f"cannot load embeddings: {exc}") from exc
        else:
            ref_parts = [o.ref_embedding for o in outcomes if o.ref_embedding is not None]
            test_parts = [o.test_embedding for o in outcomes if o.test_embedding is not None]
            ref_set = EmbeddingSet(np.concatenate(ref_parts), label="baseline:ref") if ref_parts else None
            test_set = EmbeddingSet(np.concatenate(test_parts), label="baseline:test") if test_parts else None

        for metric in config.corpus_metrics:
            corpus[metric] = None
            if ref_set is None or test_set is None:
                errors.append(f"{metric}: no embeddings available")
                continue
            try:
                if metric == "fad":
                    corpus[metric] = float(frechet_audio_distance(
                        estimate_gaussian(ref_set),
                        estimate_gaussian(test_set),
                        eps=config.fad_eps,
                    ))
                else:
                    corpus[metric] = float(kernel_distance_mmd2(
                        ref_set, test_set, estimator=config.mmd_estimator,
                    ))
            except AquaKitError as exc:
                errors.append(f"{metric}: {exc}")

    aggregate: dict = {}
    for metric in config.pair_metrics:
        values = [o.metrics[metric] for o in succeeded if metric in o.metrics]
        if values:
            aggregate[metric] = {
                "mean": float(np.mean(values)),
                "min": float(np.min(values)),
                "max": float(np.max(values)),
            }

    return Report(
        tool_version=__version__,
        config=config.echo(),
        pairs=pair_rows,
        corpus_metrics=corpus,
        aggregate=aggregate,
        errors=errors,
    )


def _format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".9g")


def _canonical_json(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, dict):
        parts = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise TypeError(f"non-string report key: {key!r}")
            parts.append(f"{json.dumps(key)}:{_canonical_json(value[key])}")
        return "{" + ",".join(parts) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canonical_json(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__} in report")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".9g")
    return str(value)


def _render_csv(report: Report, pair_metric_names: list[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["pair"] + pair_metric_names + ["warnings"])
    for row in report.pairs:
        cells = [os.path.basename(row["ref_file"])]
        cells += [_csv_cell(row["metrics"].get(m)) for m in pair_metric_names]
        cells.append("; ".join(row["warnings"]))
        writer.writerow(cells)
    buffer.write(f"# tool_version={report.tool_version}\n")
    for name in sorted(report.corpus_metrics):
        buffer.write(f"# corpus {name}={_csv_cell(report.corpus_metrics[name])}\n")
    for name in sorted(report.aggregate):
        stats = report.aggregate[name]
        buffer.write(
            f"# aggregate {name} mean={_csv_cell(stats['mean'])} "
            f"min={_csv_cell(stats['min'])} max={_csv_cell(stats['max'])}\n"
        )
    for message in report.errors:
        buffer.write(f"# error {message}\n")
    return buffer.getvalue()


def write_report(report: Report, destination: str, format: str = "json") -> None:
    """Serialize the report to a path ("-" for stdout).

    JSON output is canonical: keys sorted, floats at 9 significant
    digits, non-finite values as the strings "inf", "-inf", "nan".
    """
    if format not in REPORT_FORMATS:
        raise ConfigError(f"unknown report format {format!r}")
    if format == "json":
        text = _canonical_json(report.to_dict()) + "\n"
    else:
        names = [m for m in report.config.get("metrics", []) if m in PAIR_METRICS]
        text = _render_csv(report, names)
    if destination == "-":
        sys.stdout.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems become exit code 1
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="aquakit",
        description="Evaluate audio quality over paired directories of WAV files.",
    )
    parser.add_argument("--ref-dir", required=True, help="directory of reference WAV files")
    parser.add_argument("--test-dir", required=True, help="directory of test WAV files")
    parser.add_argument(
        "--metrics",
        default="mse,snr",
        help=f"comma-separated metric names ({', '.join(VALID_METRICS)})",
    )
    parser.add_argument("--align", choices=ALIGN_POLICIES, default="strict",
                        help="length mismatch policy")
    parser.add_argument("--embeddings", default="baseline",
                        help="embedding extractor for corpus metrics")
    parser.add_argument("--ref-emb", default=None,
                        help="precomputed reference embeddings (skips extraction)")
    parser.add_argument("--test-emb", default=None,
                        help="precomputed test embeddings (skips extraction)")
    parser.add_argument("--emb-format", choices=EMBEDDING_FORMATS, default="csv",
                        help="format of precomputed embedding files")
    parser.add_argument("--fad-eps", type=float, default=None,
                        help="diagonal loading added to covariances")
    parser.add_argument("--mmd-estimator", choices=MMD_ESTIMATORS, default="biased")
    parser.add_argument("--out", default="-", help="report path, - for stdout")
    parser.add_argument("--format", choices=REPORT_FORMATS, default="json")
    parser.add_argument("--peaq-level", type=float, default=92.0,
                        help="assumed playback level in dB SPL")
    parser.add_argument("--peaq-debug-dump", default=None, metavar="DIR",
                        help="directory for per-pair frame dumps")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    parser.add_argument("--version", action="version", version=f"aquakit {__version__}")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    try:
        config = EvalConfig(
            ref_dir=args.ref_dir,
            test_dir=args.test_dir,
            metrics=[m.strip() for m in args.metrics.split(",") if m.strip()],
            align=args.align,
            embeddings=args.embeddings,
            ref_emb=args.ref_emb,
            test_emb=args.test_emb,
            emb_format=args.emb_format,
            fad_eps=args.fad_eps,
            mmd_estimator=args.mmd_estimator,
            peaq_level=args.peaq_level,
            peaq_debug_dump=args.peaq_debug_dump,
            out_format=args.format,
            jobs=args.jobs,
        )
        report = run_evaluation(config)
    except AquaKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        write_report(report, args.out, config.out_format)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
