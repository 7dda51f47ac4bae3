"""Top-10 selection across all base sets, and the stacking master network.

Members feed the master only their out-of-sample forecasts, converted to
actual level units, so training-fit optimism never leaks into the stack.
The master matrix pairs same-month member forecasts with the realized
target (lag 0) and is trained with the same regime as the members.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DateMismatch, DimensionMismatch, NoCandidates
from .metrics import ism_sort_key
from .neural import NetworkModel, TrainConfig, forward, multi_restart_train, split
from .preprocess import MASTER_SET_ID, TrainingMatrix
from .scoring import ModelScore, ism_scorer, score_model


@dataclass(frozen=True)
class Candidate:
    """Best network found for one (base set, lag) training matrix."""

    base_set_id: int
    lag: int
    seed: int
    model: NetworkModel
    score: ModelScore

    @property
    def name(self) -> str:
        return f"set{self.base_set_id:02d}_lag{self.lag:02d}"


def select_best(candidates: list[Candidate], k: int = 10) -> list[Candidate]:
    """Top-k candidates by out-of-sample ISM.

    Ties break toward higher norm_EP, then earlier base set, then shorter
    lag, so the selection is fully deterministic. Returns everything (with
    a warning) when fewer than k candidates exist.
    """
    if not candidates:
        raise NoCandidates("no candidates to select from")
    ranked = sorted(
        candidates,
        key=lambda c: (
            -ism_sort_key(c.score.ism),
            -(c.score.norm_ep if c.score.norm_ep is not None else -np.inf),
            c.base_set_id,
            c.lag,
        ),
    )
    if len(ranked) < k:
        warnings.warn(
            f"only {len(ranked)} candidates available; requested top {k}",
            stacklevel=2,
        )
        return ranked
    return ranked[:k]


def build_master_matrix(members: list[Candidate]) -> TrainingMatrix:
    """Stack same-month member forecasts against the realized target.

    Input column j is member j's out-of-sample forecast (level units) for
    the month the row predicts; the output is the realized level for that
    same month, so the matrix carries lag 0.
    """
    if not members:
        raise NoCandidates("no members to stack")
    start = max(int(m.score.months[0]) for m in members)
    stop = min(int(m.score.months[-1]) for m in members)
    if start > stop:
        raise DateMismatch("member forecast date ranges do not intersect")
    months = np.arange(start, stop + 1, dtype=np.int64)

    cols = []
    actual = None
    for m in members:
        lo = start - int(m.score.months[0])
        cols.append(m.score.predicted_levels[lo : lo + len(months)])
        window = m.score.actual_levels[lo : lo + len(months)]
        if actual is None:
            actual = window
        elif not np.array_equal(actual, window):
            raise DateMismatch(
                f"member {m.name} disagrees on realized levels over the shared range"
            )
    return TrainingMatrix(
        base_set_id=MASTER_SET_ID,
        lag=0,
        input_names=tuple(m.name for m in members),
        inputs=np.column_stack(cols),
        output=actual,
        months_out=months,
    )


@dataclass(frozen=True)
class MasterResult:
    """Trained master network with its out-of-sample score."""

    model: NetworkModel
    seed: int
    score: ModelScore


def train_master(matrix: TrainingMatrix, cfg: TrainConfig) -> MasterResult:
    """Multi-restart training of the stacking network, same regime as members."""
    results = multi_restart_train(matrix, cfg, ism_scorer)
    best = results[0]
    _, test_part = split(matrix, cfg)
    return MasterResult(
        model=best.model, seed=best.seed, score=score_model(best.model, test_part)
    )


@dataclass(frozen=True)
class EnsembleRecord:
    """Selected members plus the trained master; enough to predict."""

    members: list[Candidate]
    master: MasterResult

    def __post_init__(self):
        keys = [ism_sort_key(m.score.ism) for m in self.members]
        if any(a < b for a, b in zip(keys, keys[1:])):
            raise ValueError("members must be sorted by descending ISM")
        if self.master.model.n_inputs != len(self.members):
            raise DimensionMismatch(
                f"master expects {self.master.model.n_inputs} inputs, "
                f"{len(self.members)} members given"
            )


@dataclass(frozen=True)
class Forecast:
    """One next-month call: level, direction (+1 rise / -1 fall), vote split."""

    value: float
    direction: int
    up_vote_percent: float


def master_forecast(
    master_model: NetworkModel,
    member_forecasts: np.ndarray,
    last_actual: float,
) -> Forecast:
    """Stack member level forecasts through the master network.

    Direction comes from the master's own output against the last observed
    actual, not from the member votes; the vote split is reported alongside.
    """
    inputs = np.asarray(member_forecasts, dtype=np.float64)
    if inputs.shape != (master_model.n_inputs,):
        raise DimensionMismatch(
            f"need {master_model.n_inputs} member forecasts, got shape {inputs.shape}"
        )
    value = forward(master_model, inputs)
    direction = 1 if value >= last_actual else -1
    up = float(np.mean(inputs >= last_actual) * 100.0)
    return Forecast(value=value, direction=direction, up_vote_percent=up)


def predict_next(
    record: EnsembleRecord,
    latest_member_forecasts: np.ndarray,
    last_actual: float,
) -> Forecast:
    """Run the ensemble's master on the members' forthcoming-month forecasts."""
    inputs = np.asarray(latest_member_forecasts, dtype=np.float64)
    if inputs.shape != (len(record.members),):
        raise DimensionMismatch(
            f"need {len(record.members)} member forecasts, got shape {inputs.shape}"
        )
    return master_forecast(record.master.model, inputs, last_actual)
