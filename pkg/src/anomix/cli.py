"""Command line interface.

Three subcommands:

    anomix run     replay an aggregator over a corpus grid and report metrics
    anomix bounds  check per-run regret against the theoretical guarantees
    anomix synth   emit reproducible synthetic streams and a mini corpus

run/bounds expect the corpus layout documented in dataio. Every grid cell
(alpha x delay schedule) is replayed per series; reports are written only
after the whole grid succeeds, and contain no wall-clock state, so repeating
a command with the same seed reproduces every output byte for byte.

Exit codes: 0 success, 2 validation or ingestion failure, 3 when --strict
finds a bound violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, synth
from .aggregator import AlgorithmSpec, Method, ProtocolError
from .dataio import DataError, LabeledSeries
from .delaysim import make_schedule, pack_stream, parse_schedule
from .games import GameKind, GameSpec, loss
from .metrics import auc, max_f_score, replay
from .oracle import (
    BoundInputs,
    best_superexpert,
    fixed_share_bound,
    superexpert_step_losses,
    variable_share_bound,
)

BOUND_TOL = 1e-8


@dataclass
class ExperimentConfig:
    """Parsed command configuration shared by the subcommands."""

    out_dir: Path
    seed: int = 0
    corpus_root: Path | None = None
    detectors: tuple[str, ...] = ()
    method: Method = Method.AAP
    game_kind: GameKind = GameKind.LOG
    alphas: tuple[float, ...] = (0.0,)
    delays: tuple[str, ...] = ("fixed:1",)
    fill: str = "strict"
    workers: int = 1
    switches: tuple[int, ...] = (0, 1, 2, 3)
    strict: bool = False
    n_experts: int = 5
    length: int = 200
    n_series: int = 1
    anomaly_rate: float = 0.1


def _game_for(kind: GameKind) -> GameSpec:
    return GameSpec.log_loss() if kind is GameKind.LOG else GameSpec.square_loss()


def _validate_run_config(config: ExperimentConfig) -> None:
    if config.corpus_root is None:
        raise ValueError("a corpus root is required")
    if not config.detectors:
        raise ValueError("need at least one detector")
    if len(set(config.detectors)) != len(config.detectors):
        raise ValueError("detector names must be distinct")
    if not config.alphas:
        raise ValueError("need at least one alpha")
    for alpha in config.alphas:
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        # constructing the spec surfaces method/game/alpha conflicts early
        AlgorithmSpec(config.method, alpha, _game_for(config.game_kind))
    if not config.delays:
        raise ValueError("need at least one delay schedule")
    for text in config.delays:
        parse_schedule(text)
    if config.workers < 1:
        raise ValueError("workers must be >= 1")
    if any(k < 0 for k in config.switches):
        raise ValueError("switch counts must be non-negative")


# ---------------------------------------------------------------------------
# output staging


def _write_outputs(out_dir: Path, outputs: dict[str, bytes]) -> None:
    """Write all outputs at once; never leave a partial result behind."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise ValueError(f"output directory {out_dir} is not empty; refusing to overwrite")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}-", dir=out_dir.parent))
    try:
        for relpath, blob in outputs.items():
            target = stage / relpath
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(blob)
    except BaseException:
        for p in sorted(stage.rglob("*"), reverse=True):
            p.unlink() if p.is_file() else p.rmdir()
        stage.rmdir()
        raise
    if out_dir.exists():
        out_dir.rmdir()
    stage.replace(out_dir)


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue().encode()


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _sha256(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "._=-" else "-" for c in text)


def _cell_tag(alpha: float, delay: str) -> str:
    return f"a{alpha:g}__{_slug(delay)}"


def _series_tag(relpath: str) -> str:
    name = relpath[:-4] if relpath.endswith(".csv") else relpath
    return _slug(name.replace("/", "__"))


# ---------------------------------------------------------------------------
# corpus loading


@dataclass
class CorpusData:
    series: list[tuple[str, LabeledSeries, np.ndarray]]  # relpath, series, scores
    corpus_sha256: str
    detector_names: tuple[str, ...] = field(default=())


def _load_corpus(config: ExperimentConfig) -> CorpusData:
    root = Path(config.corpus_root)
    windows_path = root / "labels" / "combined_windows.json"
    windows = dataio.load_windows(windows_path)
    relpaths = dataio.discover_series(root)
    if not relpaths:
        raise DataError(f"{root}: corpus has no series files under data/")
    hashed: list[tuple[str, Path]] = [("labels/combined_windows.json", windows_path)]
    loaded = []
    for relpath in relpaths:
        name, timestamps, values = dataio.load_series(root / "data" / relpath)
        outcomes = dataio.windows_to_outcomes(windows.get(relpath, []), timestamps)
        paths = [dataio.detector_score_path(root, d, relpath) for d in config.detectors]
        panel = dataio.load_expert_scores(paths, config.detectors, timestamps, config.fill)
        labeled = LabeledSeries(relpath, tuple(timestamps), values, outcomes)
        loaded.append((relpath, labeled, panel.scores))
        hashed.append((f"data/{relpath}", root / "data" / relpath))
        hashed.extend(
            (p.relative_to(root).as_posix(), p) for p in paths
        )
    digest = hashlib.sha256()
    for rel, path in sorted(hashed):
        digest.update(f"{rel}:{_sha256(path.read_bytes())}\n".encode())
    return CorpusData(loaded, digest.hexdigest(), config.detectors)


def _config_manifest(config: ExperimentConfig, command: str) -> dict:
    entries = {
        "command": command,
        "corpus": str(config.corpus_root) if config.corpus_root else None,
        "detectors": list(config.detectors),
        "method": config.method.value,
        "game": config.game_kind.value,
        "alphas": list(config.alphas),
        "delays": list(config.delays),
        "seed": config.seed,
        "fill": config.fill,
    }
    if command == "bounds":
        entries["switches"] = list(config.switches)
        entries["strict"] = config.strict
    if command == "synth":
        entries.update(
            n_experts=config.n_experts,
            length=config.length,
            n_series=config.n_series,
            anomaly_rate=config.anomaly_rate,
        )
    return entries


# ---------------------------------------------------------------------------
# run


REPORT_COLUMNS = [
    "algorithm",
    "game",
    "alpha",
    "delay",
    "series",
    "n_slots",
    "auc",
    "f1",
    "threshold",
    "total_log_loss",
    "total_square_loss",
]

_EVAL_LOG = GameSpec.log_loss()
_EVAL_SQUARE = GameSpec.square_loss()


def _metric_fields(preds: np.ndarray, outcomes: np.ndarray) -> list:
    """auc, f1, threshold (blank when a class is missing), and both loss totals."""
    try:
        area = auc(preds, outcomes)
        f1, threshold = max_f_score(preds, outcomes)
        ranked: list = [area, f1, threshold]
    except ValueError:
        ranked = ["", "", ""]
    total_log = float(np.sum(loss(_EVAL_LOG, outcomes, preds)))
    total_square = float(np.sum(loss(_EVAL_SQUARE, outcomes, preds)))
    return ranked + [total_log, total_square]


def _run_cell(config: ExperimentConfig, corpus: CorpusData, alpha: float, delay: str):
    """Replay one grid cell over every series; returns rows and per-series files."""
    spec = AlgorithmSpec(config.method, alpha, _game_for(config.game_kind))
    tag = _cell_tag(alpha, delay)
    series_rows = []
    files: dict[str, bytes] = {}
    pooled_preds, pooled_outcomes = [], []
    for relpath, labeled, scores in corpus.series:
        schedule = make_schedule(parse_schedule(delay), len(labeled), default_seed=config.seed)
        packs = pack_stream(scores, labeled.outcomes, schedule)
        ledger = replay(spec, packs)
        pooled_preds.append(ledger.predictions)
        pooled_outcomes.append(labeled.outcomes)
        series_rows.append(
            [config.method.value, config.game_kind.value, alpha, delay, relpath,
             len(labeled)] + _metric_fields(ledger.predictions, labeled.outcomes)
        )
        stem = f"{tag}__{_series_tag(relpath)}"
        files[f"weights/{stem}.csv"] = _csv_bytes(
            ["step"] + list(corpus.detector_names),
            [[t + 1] + [float(w) for w in row] for t, row in enumerate(ledger.weights_history)],
        )
        files[f"predictions/{stem}.csv"] = _csv_bytes(
            ["timestamp", "value", "outcome", "prediction"],
            [
                [ts.strftime(dataio.TIMESTAMP_FMT), float(v), int(y), float(p)]
                for ts, v, y, p in zip(
                    labeled.timestamps, labeled.values, labeled.outcomes, ledger.predictions
                )
            ],
        )
    preds = np.concatenate(pooled_preds)
    outcomes = np.concatenate(pooled_outcomes)
    pooled_row = [
        config.method.value, config.game_kind.value, alpha, delay, "(pooled)",
        int(preds.size),
    ] + _metric_fields(preds, outcomes)
    return pooled_row, series_rows, files


def cmd_run(config: ExperimentConfig) -> int:
    """Replay the configured grid and write metric reports."""
    _validate_run_config(config)
    corpus = _load_corpus(config)
    cells = [(alpha, delay) for alpha in config.alphas for delay in config.delays]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda c: _run_cell(config, corpus, *c), cells))
    else:
        results = [_run_cell(config, corpus, *cell) for cell in cells]
    outputs: dict[str, bytes] = {}
    pooled_rows, series_rows = [], []
    for pooled, rows, files in results:
        pooled_rows.append(pooled)
        series_rows.extend(rows)
        outputs.update(files)
    outputs["report.csv"] = _csv_bytes(REPORT_COLUMNS, pooled_rows)
    outputs["report_per_series.csv"] = _csv_bytes(REPORT_COLUMNS, series_rows)
    manifest = _config_manifest(config, "run")
    outputs["manifest.json"] = _json_bytes(
        {
            "config": manifest,
            "config_sha256": _sha256(_json_bytes(manifest)),
            "corpus_sha256": corpus.corpus_sha256,
            "series": [rel for rel, _, _ in corpus.series],
            "outputs": sorted(outputs) + ["manifest.json"],
        }
    )
    _write_outputs(config.out_dir, outputs)
    print(f"wrote {len(outputs)} files to {config.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# bounds


BOUNDS_COLUMNS = [
    "algorithm",
    "game",
    "alpha",
    "delay",
    "series",
    "k_requested",
    "k",
    "superexpert_loss",
    "learner_loss",
    "bound",
    "final_regret",
    "min_margin",
    "violated",
]


def _bound_for(spec: AlgorithmSpec, inputs: BoundInputs) -> float:
    if spec.method is Method.VARIABLE_SHARE:
        return variable_share_bound(inputs)
    return fixed_share_bound(inputs)


def cmd_bounds(config: ExperimentConfig) -> int:
    """Compare per-run regret against the guarantees; exit 3 on --strict violation."""
    _validate_run_config(config)
    corpus = _load_corpus(config)
    game = _game_for(config.game_kind)
    rows = []
    outputs: dict[str, bytes] = {}
    violations = 0
    for alpha in config.alphas:
        for delay in config.delays:
            spec = AlgorithmSpec(config.method, alpha, game)
            tag = _cell_tag(alpha, delay)
            for relpath, labeled, scores in corpus.series:
                schedule = make_schedule(
                    parse_schedule(delay), len(labeled), default_seed=config.seed
                )
                ledger = replay(spec, pack_stream(scores, labeled.outcomes, schedule))
                matrix = ledger.per_step_expert_avg_loss
                learner_cum = np.cumsum(ledger.per_step_learner_avg_loss)
                t_total = ledger.n_steps
                for k_req in config.switches:
                    comp, comp_loss = best_superexpert(matrix, min(k_req, t_total - 1))
                    comp_cum = np.cumsum(superexpert_step_losses(comp, matrix))
                    inputs = BoundInputs(
                        c=game.c, eta=game.eta, n_experts=ledger.n_experts,
                        k=comp.k, t_total=t_total, alpha=alpha,
                        superexpert_avg_loss=comp_loss,
                    )
                    bound = _bound_for(spec, inputs)
                    regret_const = bound - game.c * comp_loss
                    margins = game.c * comp_cum + regret_const - learner_cum
                    min_margin = float(margins.min())
                    violated = min_margin < -BOUND_TOL
                    violations += int(violated)
                    rows.append(
                        [config.method.value, config.game_kind.value, alpha, delay,
                         relpath, k_req, comp.k, comp_loss, float(learner_cum[-1]),
                         bound, float(comp_cum[-1] - learner_cum[-1]), min_margin,
                         int(violated)]
                    )
                    regret = comp_cum - learner_cum
                    floor = (game.c - 1.0) * comp_cum - regret_const
                    outputs[f"curves/{tag}__{_series_tag(relpath)}__k{k_req}.csv"] = _csv_bytes(
                        ["step", "learner_cum_avg", "comparator_cum_avg", "regret",
                         "regret_floor"],
                        [
                            [t + 1, float(learner_cum[t]), float(comp_cum[t]),
                             float(regret[t]), float(floor[t])]
                            for t in range(t_total)
                        ],
                    )
    outputs["bounds_report.csv"] = _csv_bytes(BOUNDS_COLUMNS, rows)
    manifest = _config_manifest(config, "bounds")
    outputs["manifest.json"] = _json_bytes(
        {
            "config": manifest,
            "config_sha256": _sha256(_json_bytes(manifest)),
            "corpus_sha256": corpus.corpus_sha256,
            "violations": violations,
            "outputs": sorted(outputs) + ["manifest.json"],
        }
    )
    _write_outputs(config.out_dir, outputs)
    print(f"wrote {len(outputs)} files to {config.out_dir}; violations: {violations}")
    if violations and config.strict:
        return 3
    return 0


# ---------------------------------------------------------------------------
# synth


def cmd_synth(config: ExperimentConfig) -> int:
    """Write reproducible random streams plus a mini corpus built from them."""
    if config.n_series < 1:
        raise ValueError("n_series must be >= 1")
    rng = np.random.default_rng(config.seed)
    detectors = [f"expert_{i + 1:02d}" for i in range(config.n_experts)]
    outputs: dict[str, bytes] = {}
    windows_obj: dict[str, list[list[str]]] = {}
    for s in range(config.n_series):
        scores, outcomes = synth.random_instance(
            rng, config.n_experts, config.length, config.anomaly_rate
        )
        values = rng.normal(size=config.length)
        timestamps = synth.synth_timestamps(config.length)
        stamps = [ts.strftime(dataio.TIMESTAMP_FMT) for ts in timestamps]
        sname = f"series_{s:03d}"
        outputs[f"scores_{s:03d}.csv"] = _csv_bytes(
            detectors, [[float(v) for v in row] for row in scores]
        )
        outputs[f"outcomes_{s:03d}.csv"] = _csv_bytes(
            ["outcome"], [[int(y)] for y in outcomes]
        )
        outputs[f"corpus/data/synthetic/{sname}.csv"] = _csv_bytes(
            ["timestamp", "value"],
            [[ts, float(v)] for ts, v in zip(stamps, values)],
        )
        for i, det in enumerate(detectors):
            outputs[f"corpus/results/{det}/synthetic/{det}_{sname}.csv"] = _csv_bytes(
                ["timestamp", "anomaly_score"],
                [[ts, float(v)] for ts, v in zip(stamps, scores[:, i])],
            )
        windows_obj[f"synthetic/{sname}.csv"] = [
            [a.strftime(dataio.TIMESTAMP_FMT), b.strftime(dataio.TIMESTAMP_FMT)]
            for a, b in dataio.outcomes_to_windows(timestamps, outcomes)
        ]
    outputs["corpus/labels/combined_windows.json"] = _json_bytes(windows_obj)
    manifest = _config_manifest(config, "synth")
    outputs["manifest.json"] = _json_bytes(
        {
            "config": manifest,
            "config_sha256": _sha256(_json_bytes(manifest)),
            "detectors": detectors,
            "outputs": sorted(outputs) + ["manifest.json"],
        }
    )
    _write_outputs(config.out_dir, outputs)
    print(f"wrote {len(outputs)} files to {config.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _csv_list(text: str) -> list[str]:
    return [part for part in (p.strip() for p in text.split(",")) if part]


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in _csv_list(text))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _csv_list(text))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anomix",
        description="Aggregate anomaly detector scores online under delayed feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_grid_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--corpus", required=True, type=Path, help="corpus root directory")
        p.add_argument("--detectors", required=True, type=_csv_list,
                       help="comma-separated detector names")
        p.add_argument("--method", choices=[m.value for m in Method], default="fixed")
        p.add_argument("--game", choices=[g.value for g in GameKind], default="log")
        p.add_argument("--alpha", type=_float_list, default=(0.0,),
                       help="comma-separated switching rates")
        p.add_argument("--delay", type=_csv_list, default=["fixed:1"],
                       help="comma-separated schedules, e.g. fixed:20,random:20:100:seed=7")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, type=Path, help="output directory (must be empty)")
        p.add_argument("--fill", choices=["strict", "ffill"], default="strict")
        p.add_argument("--workers", type=int, default=1)

    run_p = sub.add_parser("run", help="replay a grid and report metrics")
    add_grid_flags(run_p)

    bounds_p = sub.add_parser("bounds", help="check regret against the guarantees")
    add_grid_flags(bounds_p)
    bounds_p.add_argument("--switches", type=_int_list, default=(0, 1, 2, 3),
                          help="comma-separated comparator switch counts")
    bounds_p.add_argument("--strict", action="store_true",
                          help="exit 3 if any bound is violated")

    synth_p = sub.add_parser("synth", help="emit reproducible synthetic streams")
    synth_p.add_argument("--out", required=True, type=Path)
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--n-experts", type=int, default=5)
    synth_p.add_argument("--length", type=int, default=200)
    synth_p.add_argument("--n-series", type=int, default=1)
    synth_p.add_argument("--anomaly-rate", type=float, default=0.1)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig(out_dir=args.out, seed=args.seed)
    if args.command in ("run", "bounds"):
        config.corpus_root = args.corpus
        config.detectors = tuple(args.detectors)
        config.method = Method(args.method)
        config.game_kind = GameKind(args.game)
        config.alphas = tuple(args.alpha)
        config.delays = tuple(args.delay)
        config.fill = args.fill
        config.workers = args.workers
    if args.command == "bounds":
        config.switches = tuple(args.switches)
        config.strict = args.strict
    if args.command == "synth":
        config.n_experts = args.n_experts
        config.length = args.length
        config.n_series = args.n_series
        config.anomaly_rate = args.anomaly_rate
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "bounds":
            return cmd_bounds(config)
        return cmd_synth(config)
    except (ValueError, ProtocolError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
