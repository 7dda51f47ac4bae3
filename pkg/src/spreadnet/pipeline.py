"""Pipeline orchestration: one declarative JSON config drives ingest,
base-set assembly, multi-restart training, selection, master training,
and report emission, with a manifest that pins every seed, score, and
artifact path. A second run with the same config reproduces every number
bit-exactly (the manifest differs only in its timestamp).

Stages run sequentially; all randomness flows from the config's root seed
through per-matrix seeds derived as SeedSequence([root, set, lag]).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import preprocess as pp
from .ensemble import (
    Candidate,
    Forecast,
    MasterResult,
    build_master_matrix,
    master_forecast,
    select_best,
    train_master,
)
from .errors import (
    IncompleteManifest,
    MissingColumn,
    MissingFile,
    PipelineStageError,
    SpreadnetError,
    StaleModel,
)
from .metrics import (
    PERFECT_STRATEGY,
    divergence_percentage,
    equity_curves,
    positions_from_forecasts,
)
from .neural import TrainConfig, load_model, multi_restart_train, predict, save_model, split
from .preprocess import (
    BaseSetSpec,
    BlockAverageConfig,
    MASTER_SET_ID,
    SmoothingConfig,
    TrainingMatrix,
    VarConfig,
    assemble_base_sets,
    build_derived_columns,
    default_base_sets,
)
from .scoring import ism_scorer, score_model
from .series import AlignedFrame, MonthlySeries, align, format_month, load_series, parse_month

STAGES = ("ingest", "preprocess", "train", "select", "master", "report")
VARIABLES = (pp.INDICATOR, pp.OUTPUT_VARIABLE, pp.GLOBAL_SPREAD, pp.TBILL)

MANIFEST_FORMAT = 1
MANIFEST_NAME = "manifest.json"
FULL_SCALE_RESTARTS = 5000


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Typed view of the JSON pipeline config; round-trips exactly."""

    variables: dict[str, dict[str, str]]
    date_column: str = "date"
    var_cfg: VarConfig = field(default_factory=VarConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    ma_levels: tuple[BlockAverageConfig, ...] = pp.DEFAULT_MA_LEVELS
    enabled_sets: tuple[int, ...] = tuple(range(1, 11))
    single_lag: int = 1
    training: TrainConfig = field(default_factory=lambda: TrainConfig(restarts=50))
    full_scale: bool = False
    top_k: int = 10
    output_dir: str = "runs"
    formats: tuple[str, ...] = ("csv", "txt")

    def __post_init__(self):
        missing = [v for v in VARIABLES if v not in self.variables]
        if missing:
            raise MissingColumn(f"config lacks data entries for {missing}")

    @property
    def train_cfg(self) -> TrainConfig:
        """The effective training config; full_scale forces the 5000-restart regime."""
        if self.full_scale:
            return replace(self.training, restarts=FULL_SCALE_RESTARTS)
        return self.training

    def base_set_specs(self) -> tuple[BaseSetSpec, ...]:
        return default_base_sets(single_lag=self.single_lag)

    def to_dict(self) -> dict:
        return {
            "data": {
                "date_column": self.date_column,
                "variables": {k: dict(v) for k, v in self.variables.items()},
            },
            "var": {"window": self.var_cfg.window, "confidence": self.var_cfg.confidence},
            "smoothing": {"beta": self.smoothing.beta, "seed_value": self.smoothing.seed_value},
            "ma_levels": [{"M": c.M, "n": c.n} for c in self.ma_levels],
            "base_sets": {"enabled": list(self.enabled_sets), "single_lag": self.single_lag},
            "training": {
                "cycles": self.training.cycles,
                "stop_error": self.training.stop_error,
                "learning_rate": self.training.learning_rate,
                "restarts": self.training.restarts,
                "full_scale": self.full_scale,
                "rng_seed": self.training.rng_seed,
                "split": self.training.split,
                "hidden_size": self.training.hidden_size,
            },
            "selection": {"top_k": self.top_k},
            "output": {"directory": self.output_dir, "formats": list(self.formats)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        d = data.get("data", {})
        t = data.get("training", {})
        return cls(
            variables=d.get("variables", {}),
            date_column=d.get("date_column", "date"),
            var_cfg=VarConfig(**data.get("var", {})),
            smoothing=SmoothingConfig(**data.get("smoothing", {})),
            ma_levels=tuple(
                BlockAverageConfig(**c) for c in data.get("ma_levels", [{"M": 2, "n": 2}, {"M": 4, "n": 3}])
            ),
            enabled_sets=tuple(data.get("base_sets", {}).get("enabled", range(1, 11))),
            single_lag=int(data.get("base_sets", {}).get("single_lag", 1)),
            training=TrainConfig(
                cycles=t.get("cycles", 1000),
                stop_error=t.get("stop_error", 0.10),
                learning_rate=t.get("learning_rate", 0.10),
                restarts=t.get("restarts", 50),
                rng_seed=t.get("rng_seed", 0),
                split=t.get("split", 0.60),
                hidden_size=t.get("hidden_size"),
            ),
            full_scale=bool(t.get("full_scale", False)),
            top_k=int(data.get("selection", {}).get("top_k", 10)),
            output_dir=data.get("output", {}).get("directory", "runs"),
            formats=tuple(data.get("output", {}).get("formats", ["csv", "txt"])),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise MissingFile(f"config file not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def config_hash(config: PipelineConfig) -> str:
    canon = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def derive_matrix_seed(root_seed: int, base_set_id: int, lag: int) -> int:
    """Stable per-matrix seed; the master matrix uses (MASTER_SET_ID, 0)."""
    return int(np.random.SeedSequence([int(root_seed), base_set_id, lag]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    """Everything a pipeline run produced, in memory plus on disk."""

    config: PipelineConfig
    run_dir: Path
    stages: list[str] = field(default_factory=list)
    frame: AlignedFrame | None = None
    matrices: list[TrainingMatrix] = field(default_factory=list)
    candidates: list[Candidate] = field(default_factory=list)
    members: list[Candidate] = field(default_factory=list)
    master: MasterResult | None = None
    manifest: dict = field(default_factory=dict)
    report_paths: list[Path] = field(default_factory=list)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineStageError:
                raise
            except SpreadnetError as exc:
                raise PipelineStageError(name, exc) from exc

        return inner

    return wrap


@_stage("ingest")
def ingest(config: PipelineConfig) -> AlignedFrame:
    """Load every configured variable and align to the common month range."""
    by_path: dict[str, dict[str, str]] = {}
    for var, entry in config.variables.items():
        by_path.setdefault(entry["path"], {})[var] = entry["column"]
    series: dict[str, MonthlySeries] = {}
    for path, columns in by_path.items():
        for s in load_series(path, columns, date_column=config.date_column):
            series[s.name] = s
    return align([series[v] for v in VARIABLES])


@_stage("preprocess")
def assemble(config: PipelineConfig, frame: AlignedFrame) -> list[TrainingMatrix]:
    return assemble_base_sets(
        frame,
        var_cfg=config.var_cfg,
        smooth_cfg=config.smoothing,
        ma_levels=config.ma_levels,
        specs=config.base_set_specs(),
        enabled=set(config.enabled_sets),
    )


@_stage("train")
def train_all(config: PipelineConfig, matrices: list[TrainingMatrix]) -> list[Candidate]:
    """Best-of-restarts network per training matrix."""
    cfg = config.train_cfg
    candidates = []
    for matrix in matrices:
        seed = derive_matrix_seed(cfg.rng_seed, matrix.base_set_id, matrix.lag)
        matrix_cfg = cfg.with_seed(seed)
        best = multi_restart_train(matrix, matrix_cfg, ism_scorer)[0]
        _, test_part = split(matrix, matrix_cfg)
        candidates.append(
            Candidate(
                base_set_id=matrix.base_set_id,
                lag=matrix.lag,
                seed=best.seed,
                model=best.model,
                score=score_model(best.model, test_part),
            )
        )
    return candidates


@_stage("select")
def select(config: PipelineConfig, candidates: list[Candidate]) -> list[Candidate]:
    return select_best(candidates, k=config.top_k)


@_stage("master")
def master_stage(config: PipelineConfig, members: list[Candidate]) -> tuple[TrainingMatrix, MasterResult]:
    matrix = build_master_matrix(members)
    seed = derive_matrix_seed(config.train_cfg.rng_seed, MASTER_SET_ID, 0)
    return matrix, train_master(matrix, config.train_cfg.with_seed(seed))


def run_pipeline(
    config: PipelineConfig,
    through: str = "report",
    run_dir: str | Path | None = None,
) -> RunResult:
    """Execute the pipeline up to and including ``through``.

    Always writes the manifest (and any models trained so far) into the
    run directory; the manifest is written once, atomically, at the end.
    """
    if through not in STAGES:
        raise ValueError(f"unknown stage {through!r}; choose from {STAGES}")
    last = STAGES.index(through)
    run_dir = Path(run_dir) if run_dir is not None else _new_run_dir(config)
    run_dir.mkdir(parents=True, exist_ok=True)
    result = RunResult(config=config, run_dir=run_dir)

    (run_dir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )

    result.frame = ingest(config)
    result.stages.append("ingest")
    if last >= 1:
        result.matrices = assemble(config, result.frame)
        result.stages.append("preprocess")
    if last >= 2:
        result.candidates = train_all(config, result.matrices)
        _write_models(run_dir, result.candidates)
        result.stages.append("train")
    if last >= 3:
        result.members = select(config, result.candidates)
        result.stages.append("select")
    if last >= 4:
        matrix, master = master_stage(config, result.members)
        result.master = master
        save_model(master.model, run_dir / "models" / "master.json")
        result.stages.append("master")

    result.manifest = build_manifest(result)
    _write_manifest(run_dir, result.manifest)

    if last >= 5:
        try:
            result.report_paths = emit_reports(result.manifest, run_dir)
        except SpreadnetError as exc:
            raise PipelineStageError("report", exc) from exc
        result.stages.append("report")
    return result


def _new_run_dir(config: PipelineConfig) -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = Path(config.output_dir) / f"{stamp}-{config_hash(config)[:8]}"
    run_dir = base
    n = 1
    while run_dir.exists():
        n += 1
        run_dir = base.with_name(f"{base.name}-{n}")
    return run_dir


def _write_models(run_dir: Path, candidates: list[Candidate]) -> None:
    models = run_dir / "models"
    models.mkdir(parents=True, exist_ok=True)
    for cand in candidates:
        save_model(cand.model, models / f"{cand.name}.json")


def _write_manifest(run_dir: Path, manifest: dict) -> None:
    target = run_dir / MANIFEST_NAME
    tmp = target.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    os.replace(tmp, target)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _ism_to_json(value):
    return "perfect" if value is PERFECT_STRATEGY else float(value)


def ism_from_json(value):
    return PERFECT_STRATEGY if value == "perfect" else float(value)


def _score_to_json(score) -> dict:
    return {
        "ism": _ism_to_json(score.ism),
        "q_ratio": float(score.report.q_ratio),
        "ave_negative_vol": float(score.report.ave_negative_vol),
        "failures": len(score.report.failures),
        "norm_ep": None if score.norm_ep is None else float(score.norm_ep),
        "ep_statistic": None if score.ep is None else float(score.ep.statistic),
        "hit_rate": float(score.hit_rate),
        "test_months": [format_month(m) for m in score.months],
        "predicted_levels": [float(v) for v in score.predicted_levels],
        "actual_levels": [float(v) for v in score.actual_levels],
    }


def build_manifest(result: RunResult) -> dict:
    config = result.config
    swept = {s.id: len(s.lags) > 1 for s in config.base_set_specs()}
    manifest: dict = {
        "manifest_format": MANIFEST_FORMAT,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "stages": list(result.stages),
        "restart_seed_rule": "SeedSequence(matrix_seed).generate_state(restarts)",
    }
    if result.frame is not None:
        manifest["frame"] = {
            "start": format_month(result.frame.months[0]),
            "end": format_month(result.frame.months[-1]),
            "rows": len(result.frame),
        }
    if result.matrices:
        manifest["matrices"] = [
            {
                "base_set": m.base_set_id,
                "lag": m.lag,
                "rows": m.rows,
                "input_names": list(m.input_names),
                "output_recipe": m.output_recipe,
                "matrix_seed": derive_matrix_seed(
                    config.train_cfg.rng_seed, m.base_set_id, m.lag
                ),
            }
            for m in result.matrices
        ]
    if result.candidates:
        by_key = {(m.base_set_id, m.lag): m for m in result.matrices}
        manifest["candidates"] = [
            {
                "name": c.name,
                "base_set": c.base_set_id,
                "lag": c.lag,
                "lag_swept": swept.get(c.base_set_id, False),
                "input_names": list(by_key[(c.base_set_id, c.lag)].input_names),
                "output_recipe": by_key[(c.base_set_id, c.lag)].output_recipe,
                "matrix_seed": derive_matrix_seed(
                    config.train_cfg.rng_seed, c.base_set_id, c.lag
                ),
                "winning_seed": c.seed,
                "restarts": config.train_cfg.restarts,
                "model_path": f"models/{c.name}.json",
                **_score_to_json(c.score),
            }
            for c in result.candidates
        ]
    if result.members:
        manifest["members"] = [m.name for m in result.members]
    if result.master is not None:
        manifest["master"] = {
            "matrix_seed": derive_matrix_seed(config.train_cfg.rng_seed, MASTER_SET_ID, 0),
            "winning_seed": result.master.seed,
            "restarts": config.train_cfg.restarts,
            "model_path": "models/master.json",
            "member_count": len(result.members),
            **_score_to_json(result.master.score),
        }
    return manifest


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _candidates_by_name(manifest: dict) -> dict[str, dict]:
    return {c["name"]: c for c in manifest.get("candidates", [])}


def _member_entries(manifest: dict) -> list[dict]:
    by_name = _candidates_by_name(manifest)
    try:
        return [by_name[name] for name in manifest["members"]]
    except KeyError as exc:
        raise IncompleteManifest(f"manifest lacks member entry {exc}") from exc


def emit_reports(manifest: dict, run_dir: str | Path) -> list[Path]:
    """Emit divergence, curve, and grouped-mean reports from the manifest.

    Every number is recomputed from the manifest's stored predictions via
    the metrics module; emission only groups and averages.
    """
    if "candidates" not in manifest:
        raise IncompleteManifest("manifest has no candidates; run the train stage first")
    if "members" not in manifest:
        raise IncompleteManifest("manifest has no members; run the select stage first")
    run_dir = Path(run_dir)
    reports = run_dir / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    formats = manifest["config"]["output"]["formats"]
    members = _member_entries(manifest)
    paths: list[Path] = []

    if "csv" in formats:
        paths.append(_write_divergence(reports, members))
        for entry in members:
            paths.append(_write_curve(reports, entry))
        if "master" in manifest:
            paths.append(_write_curve(reports, manifest["master"], name="master"))
        paths.append(_write_group_means(reports / "base_set_summary.csv",
                                        manifest["candidates"], key="base_set"))
        paths.append(
            _write_group_means(
                reports / "lag_summary.csv",
                [c for c in manifest["candidates"] if c["lag_swept"]],
                key="lag",
            )
        )
    if "txt" in formats:
        paths.append(_write_summary_text(reports / "summary.txt", manifest))
    return paths


def _member_votes(members: list[dict]) -> tuple[list[str], np.ndarray]:
    """Shared month labels and the (members x dates) direction-vote matrix."""
    starts = [parse_month(e["test_months"][0]) for e in members]
    stops = [parse_month(e["test_months"][-1]) for e in members]
    start, stop = max(starts), min(stops)
    if start > stop:
        raise IncompleteManifest("member test windows do not intersect")
    months = list(range(start, stop + 1))
    votes = []
    for e in members:
        lo = start - parse_month(e["test_months"][0])
        pred = np.asarray(e["predicted_levels"][lo : lo + len(months)])
        act = np.asarray(e["actual_levels"][lo : lo + len(months)])
        votes.append(positions_from_forecasts(pred, act))
    return [format_month(m) for m in months[1:]], np.vstack(votes)


def _write_divergence(reports: Path, members: list[dict]) -> Path:
    labels, votes = _member_votes(members)
    pct = divergence_percentage(votes)
    path = reports / "divergence.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "up_vote_percent"])
        for label, p in zip(labels, pct):
            writer.writerow([label, repr(float(p))])
    return path


def _write_curve(reports: Path, entry: dict, name: str | None = None) -> Path:
    pred = np.asarray(entry["predicted_levels"])
    act = np.asarray(entry["actual_levels"])
    report = equity_curves(pred, act)
    path = reports / f"curves_{name or entry['name']}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "eq", "pe"])
        for label, eq, pe in zip(entry["test_months"][1:], report.eq, report.pe):
            writer.writerow([label, repr(float(eq)), repr(float(pe))])
    return path


def _group_means(candidates: list[dict], key: str) -> list[dict]:
    groups: dict[int, list[dict]] = {}
    for c in candidates:
        groups.setdefault(c[key], []).append(c)
    rows = []
    for value in sorted(groups):
        entries = groups[value]
        finite = [c["ism"] for c in entries if c["ism"] != "perfect"]
        eps = [c["norm_ep"] for c in entries if c["norm_ep"] is not None]
        rows.append(
            {
                key: value,
                "models": len(entries),
                "perfect": sum(1 for c in entries if c["ism"] == "perfect"),
                "mean_ism": float(np.mean(finite)) if finite else None,
                "mean_norm_ep": float(np.mean(eps)) if eps else None,
                "mean_hit_rate": float(np.mean([c["hit_rate"] for c in entries])),
            }
        )
    return rows


def _write_group_means(path: Path, candidates: list[dict], key: str) -> Path:
    rows = _group_means(candidates, key)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([key, "models", "perfect", "mean_ism", "mean_norm_ep", "mean_hit_rate"])
        for row in rows:
            writer.writerow(
                [
                    row[key],
                    row["models"],
                    row["perfect"],
                    "" if row["mean_ism"] is None else repr(row["mean_ism"]),
                    "" if row["mean_norm_ep"] is None else repr(row["mean_norm_ep"]),
                    repr(row["mean_hit_rate"]),
                ]
            )
    return path


def _fmt(value, width=10, digits=4):
    if value is None:
        return " " * (width - 1) + "-"
    if isinstance(value, str):
        return value.rjust(width)
    return f"{value:>{width}.{digits}f}"


def _write_summary_text(path: Path, manifest: dict) -> Path:
    lines = []
    frame = manifest.get("frame", {})
    lines.append("spreadnet run summary")
    lines.append(f"config hash : {manifest['config_hash']}")
    lines.append(
        f"frame       : {frame.get('start')}..{frame.get('end')} ({frame.get('rows')} months)"
    )
    lines.append("")

    lines.append("mean scores by base set")
    lines.append(f"{'set':>4} {'models':>7} {'perfect':>8} {'mean ISM':>10} {'mean EP%':>10} {'hits':>7}")
    for row in _group_means(manifest["candidates"], "base_set"):
        lines.append(
            f"{row['base_set']:>4} {row['models']:>7} {row['perfect']:>8}"
            f" {_fmt(row['mean_ism'])} {_fmt(row['mean_norm_ep'])} {row['mean_hit_rate']:>7.2f}"
        )
    lines.append("")

    swept = [c for c in manifest["candidates"] if c["lag_swept"]]
    if swept:
        lines.append("mean scores by lag (lag-swept sets only)")
        lines.append(f"{'lag':>4} {'models':>7} {'perfect':>8} {'mean ISM':>10} {'mean EP%':>10} {'hits':>7}")
        for row in _group_means(swept, "lag"):
            lines.append(
                f"{row['lag']:>4} {row['models']:>7} {row['perfect']:>8}"
                f" {_fmt(row['mean_ism'])} {_fmt(row['mean_norm_ep'])} {row['mean_hit_rate']:>7.2f}"
            )
        lines.append("")

    lines.append("selected members (rank order)")
    by_name = _candidates_by_name(manifest)
    for rank, name in enumerate(manifest.get("members", []), start=1):
        c = by_name[name]
        ism = "perfect" if c["ism"] == "perfect" else f"{c['ism']:.4f}"
        ep = "-" if c["norm_ep"] is None else f"{c['norm_ep']:.2f}%"
        lines.append(f"{rank:>3}. {name}  ISM={ism}  normEP={ep}  hits={c['hit_rate']:.2f}")
    lines.append("")

    if "master" in manifest:
        m = manifest["master"]
        ism = "perfect" if m["ism"] == "perfect" else f"{m['ism']:.4f}"
        ep = "-" if m["norm_ep"] is None else f"{m['norm_ep']:.2f}%"
        lines.append(f"master: ISM={ism}  normEP={ep}  hits={m['hit_rate']:.2f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Prediction from a stored run
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionReport:
    """Next-month forecast plus the member-level detail behind it."""

    target_month: str
    forecast: Forecast
    member_forecasts: dict[str, float]
    last_actual: float


def load_run(run_dir: str | Path) -> dict:
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST_NAME
    if not path.exists():
        raise MissingFile(f"no {MANIFEST_NAME} in {run_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def predict_from_run(
    run_dir: str | Path,
    config: PipelineConfig | None = None,
) -> PredictionReport:
    """Forecast the month after the frame's last observation.

    Loads the stored member and master models, rebuilds each member's
    input row for its lag, stacks the member forecasts, and runs the
    master. The frame comes from ``config`` (defaults to the config echoed
    in the manifest).
    """
    run_dir = Path(run_dir)
    manifest = load_run(run_dir)
    if "master" not in manifest:
        raise IncompleteManifest("run has no trained master; run the master stage first")
    config = config or PipelineConfig.from_dict(manifest["config"])

    frame = ingest(config)
    try:
        derived = build_derived_columns(
            frame, var_cfg=config.var_cfg, smooth_cfg=config.smoothing,
            ma_levels=config.ma_levels,
        )
    except SpreadnetError as exc:
        raise StaleModel(f"frame cannot supply the members' inputs: {exc}") from exc
    levels = derived["output_raw"]
    last_month = int(frame.months[-1])
    target = last_month + 1

    members = _member_entries(manifest)
    member_values: dict[str, float] = {}
    for entry in members:
        model = load_model(run_dir / entry["model_path"])
        month_in = target - entry["lag"]
        try:
            row = np.array(
                [derived[name].value_at(month_in) for name in entry["input_names"]]
            )
        except KeyError as exc:
            raise StaleModel(
                f"member {entry['name']} needs inputs at {format_month(month_in)}: {exc}"
            ) from exc
        value = float(predict(model, row[None, :])[0])
        if entry["output_recipe"] == pp.NORMALIZED_OUTPUT:
            history = levels.values[-3:]
            value = pp.denormalize_output(value, history)
        member_values[entry["name"]] = value

    master_model = load_model(run_dir / manifest["master"]["model_path"])
    inputs = np.array([member_values[name] for name in member_values])
    last_actual = float(levels.values[-1])
    if master_model.n_inputs != len(inputs):
        raise StaleModel(
            f"master expects {master_model.n_inputs} member inputs, got {len(inputs)}"
        )
    forecast = master_forecast(master_model, inputs, last_actual)
    return PredictionReport(
        target_month=format_month(target),
        forecast=forecast,
        member_forecasts=member_values,
        last_actual=last_actual,
    )


# ---------------------------------------------------------------------------
# Matrix CSV export (inspection)
# ---------------------------------------------------------------------------


def export_matrices(matrices: list[TrainingMatrix], directory: str | Path) -> list[Path]:
    """Dump each training matrix as a CSV for eyeballing."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in matrices:
        path = directory / f"set{m.base_set_id:02d}_lag{m.lag:02d}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["month_in", *m.input_names, "month_out", "output", "output_level"]
            )
            months_in = m.months_in()
            for i in range(m.rows):
                writer.writerow(
                    [
                        format_month(months_in[i]),
                        *(repr(float(v)) for v in m.inputs[i]),
                        format_month(m.months_out[i]),
                        repr(float(m.output[i])),
                        repr(float(m.output_levels[i])),
                    ]
                )
        paths.append(path)
    return paths
