"""Rolling historical VaR, smoothing transforms, and training-matrix assembly.

The indicator's monthly log variations (in basis points) are turned into a
rolling loss-quantile band, optionally smoothed, and combined with the
global-spread and T-bill columns into ten declarative base sets. Each base
set yields one training matrix per lag, capped at the 89 most recent rows.

Canonical frame column names consumed here: ``igaem``, ``embi_venezuela``,
``embi_global``, ``tbill``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IndexOutOfRange,
    InsufficientHistory,
    InsufficientRows,
    MissingColumn,
    ZeroTrailingMean,
)
from .series import AlignedFrame, MonthlySeries, align, log_returns, to_basis_points

# Canonical variable names expected in an input frame.
INDICATOR = "igaem"
OUTPUT_VARIABLE = "embi_venezuela"
GLOBAL_SPREAD = "embi_global"
TBILL = "tbill"

# Sentinel base-set id for the stacking (master) matrix.
MASTER_SET_ID = 0


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarConfig:
    """Rolling historical-VaR parameters."""

    window: int = 65
    confidence: float = 0.95

    def __post_init__(self):
        if self.window < 20:
            raise ValueError(f"VaR window must be >= 20, got {self.window}")
        if not 0.5 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0.5, 1), got {self.confidence}")

    @property
    def rank(self) -> int:
        """1-based ascending rank of the return picked out of each window.

        k = max(1, floor((1 - confidence) * window)); the selected return is
        the k-th smallest, i.e. the k-th worst fall. Window 65 at 95% gives
        k = 3 (the third-lowest observation).
        """
        return max(1, math.floor((1.0 - self.confidence) * self.window + 1e-9))


@dataclass(frozen=True)
class SmoothingConfig:
    """Compound (exponential) moving-average parameters.

    ``seed_value`` initializes the recursion; None seeds with the first
    observation, which avoids startup bias and keeps beta=1 an identity.
    """

    beta: float = 0.1
    seed_value: float | None = None

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class BlockAverageConfig:
    """Centered block average: M+1 points centered n months before t."""

    M: int = 2
    n: int = 2

    def __post_init__(self):
        if self.M < 0 or self.M % 2 != 0:
            raise ValueError(f"M must be even and non-negative, got {self.M}")
        if self.n <= 0:
            raise ValueError(f"n must be positive, got {self.n}")


# Default moving-average levels over the VaR series (the source gives the
# averaging formula but not its parameters; both presets are causal: n >= M/2).
DEFAULT_MA_LEVELS: tuple[BlockAverageConfig, ...] = (
    BlockAverageConfig(M=2, n=2),
    BlockAverageConfig(M=4, n=3),
)


# ---------------------------------------------------------------------------
# Historical VaR
# ---------------------------------------------------------------------------


def rolling_var(returns_bp: np.ndarray, cfg: VarConfig) -> np.ndarray:
    """Rolling historical VaR over a bare return vector (basis points).

    For each t >= window, sorts the previous ``window`` returns ascending,
    takes the ``cfg.rank``-th smallest, and flips its sign so a fall reads
    as a positive loss magnitude. Output length = len(returns) - window.
    """
    values = np.asarray(returns_bp, dtype=np.float64)
    n = len(values)
    if n < cfg.window + 1:
        raise InsufficientHistory(
            f"need at least window+1 = {cfg.window + 1} returns, got {n}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(values, cfg.window)[:-1]
    kth = np.partition(windows, cfg.rank - 1, axis=1)[:, cfg.rank - 1]
    return -kth


def historical_var(returns_bp: MonthlySeries, cfg: VarConfig) -> MonthlySeries:
    """Rolling historical VaR of a dated return series.

    The band value dated t is computed from the window ending at t-1, so it
    is a genuine ex-ante band for backtesting the month-t return.
    """
    band = rolling_var(returns_bp.values, cfg)
    return MonthlySeries(
        f"{returns_bp.name}_var", returns_bp.months[cfg.window :], band
    )


def indicator_var_series(levels: MonthlySeries, cfg: VarConfig) -> MonthlySeries:
    """Full chain from indicator levels: log variation -> bp -> rolling VaR."""
    return historical_var(to_basis_points(log_returns(levels)), cfg)


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------


def ema_smooth(values: np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    """Compound moving average MA_t = beta * P_t + (1 - beta) * MA_{t-1}."""
    x = np.asarray(values, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("cannot smooth an empty vector")
    out = np.empty_like(x)
    prev = float(x[0]) if cfg.seed_value is None else float(cfg.seed_value)
    b = cfg.beta
    for i, p in enumerate(x):
        prev = b * p + (1.0 - b) * prev
        out[i] = prev
    return out


def double_smooth(values: np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    """Two passes of the compound moving average with the same parameters."""
    return ema_smooth(ema_smooth(values, cfg), cfg)


# ---------------------------------------------------------------------------
# Block averages
# ---------------------------------------------------------------------------


def block_average(values: np.ndarray, cfg: BlockAverageConfig, t: int) -> float:
    """Mean of the M+1 observations centered n positions before index t."""
    x = np.asarray(values, dtype=np.float64)
    half = cfg.M // 2
    lo = t - cfg.n - half
    hi = t - cfg.n + half
    if lo < 0 or hi >= len(x) or t < 0:
        raise IndexOutOfRange(
            f"block average at t={t} needs indices {lo}..{hi}, have 0..{len(x) - 1}"
        )
    return float(np.mean(x[lo : hi + 1]))


def block_average_column(s: MonthlySeries, cfg: BlockAverageConfig) -> MonthlySeries:
    """Block-average value for every month where the window is in range."""
    half = cfg.M // 2
    first = cfg.n + half          # earliest t with a full window
    last = len(s) - 1 + min(0, cfg.n - half)  # windows may not reach past the data
    if first > last:
        raise InsufficientHistory(
            f"series of length {len(s)} too short for block average (M={cfg.M}, n={cfg.n})"
        )
    vals = np.array(
        [block_average(s.values, cfg, t) for t in range(first, last + 1)]
    )
    return MonthlySeries(f"{s.name}_ba{cfg.M}_{cfg.n}", s.months[first : last + 1], vals)


# ---------------------------------------------------------------------------
# Output normalization (normalized difference, and its exact inverse)
# ---------------------------------------------------------------------------


def normalize_output(values: np.ndarray) -> np.ndarray:
    """Normalized difference: (x_t - x_{t-1}) / mean(x_{t-1}, x_{t-2}, x_{t-3}).

    Output starts at the fourth observation (length = input length - 3).
    """
    x = np.asarray(values, dtype=np.float64)
    if len(x) < 4:
        raise ValueError(f"need at least 4 observations, got {len(x)}")
    trailing = (x[:-3] + x[1:-2] + x[2:-1]) / 3.0
    if np.any(trailing == 0.0):
        i = int(np.argmax(trailing == 0.0))
        raise ZeroTrailingMean(f"trailing 3-sample mean is zero at position {i + 3}")
    return (x[3:] - x[2:-1]) / trailing


def denormalize_output(mod_value: float, history: np.ndarray) -> float:
    """Invert the normalized difference given the three preceding actuals.

    ``history`` holds the actual levels at t-3, t-2, t-1 (oldest first);
    returns the reconstructed level at t.
    """
    h = np.asarray(history, dtype=np.float64)
    if h.shape != (3,):
        raise ValueError(f"history must hold exactly 3 values, got shape {h.shape}")
    m = float(np.mean(h))
    if m == 0.0:
        raise ZeroTrailingMean("trailing 3-sample mean is zero")
    return float(mod_value) * m + float(h[2])


# ---------------------------------------------------------------------------
# Base-set specifications and training matrices
# ---------------------------------------------------------------------------

RAW_OUTPUT = "raw"
NORMALIZED_OUTPUT = "normalized"

OUTPUT_COLUMN = "output"

LAG_SWEEP = tuple(range(1, 11))


@dataclass(frozen=True)
class BaseSetSpec:
    """Declarative recipe for one base set: inputs, output recipe, lags."""

    id: int
    input_columns: tuple[str, ...]
    output_recipe: str = RAW_OUTPUT
    lags: tuple[int, ...] = LAG_SWEEP

    def __post_init__(self):
        if self.output_recipe not in (RAW_OUTPUT, NORMALIZED_OUTPUT):
            raise ValueError(f"unknown output recipe {self.output_recipe!r}")
        if not self.lags:
            raise ValueError("lag list must be non-empty")


def default_base_sets(single_lag: int = 1) -> tuple[BaseSetSpec, ...]:
    """The ten stock base-set recipes.

    Sets 1, 2, 7, 8, 9, 10 sweep lags 1..10; sets 3-6 use one lag. Set 7
    deliberately omits every VaR-derived column (its original description
    lists the T-bill column twice; it is carried once). Sets 8-10 predict
    the normalized-difference output, and set 10 additionally feeds the
    lagged normalized output back in as an input.
    """
    one = (single_lag,)
    return (
        BaseSetSpec(1, ("var", "global", "tbill")),
        BaseSetSpec(2, ("var_smooth", "global", "tbill")),
        BaseSetSpec(3, ("var_double", "var_ma1", "var_ma2"), lags=one),
        BaseSetSpec(4, ("var_smooth", "var_ma1", "var_ma2"), lags=one),
        BaseSetSpec(5, ("var_double", "var_ma1", "global"), lags=one),
        BaseSetSpec(6, ("var_smooth", "var_ma1", "global"), lags=one),
        BaseSetSpec(7, ("global", "tbill")),
        BaseSetSpec(8, ("var", "global", "tbill"), output_recipe=NORMALIZED_OUTPUT),
        BaseSetSpec(9, ("var_smooth", "global", "tbill"), output_recipe=NORMALIZED_OUTPUT),
        BaseSetSpec(
            10,
            ("var_smooth", "global", "tbill", "output_auto"),
            output_recipe=NORMALIZED_OUTPUT,
        ),
    )


@dataclass(frozen=True)
class TrainingMatrix:
    """Aligned input columns plus one output column for one (set, lag) pair.

    ``months_out`` dates each output row; the matching input row is dated
    ``months_out[i] - lag``. ``output_levels`` always holds the raw target
    levels for those months so predictions can be scored (and, for the
    normalized recipe, inverted) against actual levels; ``prior_levels``
    holds the three actual levels just before the first row.
    """

    base_set_id: int
    lag: int
    input_names: tuple[str, ...]
    inputs: np.ndarray          # shape (rows, n_inputs)
    output: np.ndarray          # shape (rows,), in recipe units
    months_out: np.ndarray      # shape (rows,), int month keys
    output_recipe: str = RAW_OUTPUT
    output_levels: np.ndarray | None = None
    prior_levels: np.ndarray | None = None

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        output = np.asarray(self.output, dtype=np.float64)
        months = np.asarray(self.months_out, dtype=np.int64)
        levels = (
            output.copy()
            if self.output_levels is None and self.output_recipe == RAW_OUTPUT
            else np.asarray(self.output_levels, dtype=np.float64)
        )
        rows = len(months)
        if inputs.shape != (rows, len(self.input_names)):
            raise ValueError(
                f"inputs shape {inputs.shape} does not match "
                f"{rows} rows x {len(self.input_names)} columns"
            )
        if output.shape != (rows,) or levels.shape != (rows,):
            raise ValueError("output/levels length must equal the month axis")
        if rows > 89:
            raise ValueError(f"matrix exceeds the 89-row cap: {rows}")
        if rows >= 2 and np.any(np.diff(months) != 1):
            raise ValueError("output months must be consecutive")
        for arr in (inputs, output, months, levels):
            arr.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "output", output)
        object.__setattr__(self, "months_out", months)
        object.__setattr__(self, "output_levels", levels)
        if self.prior_levels is not None:
            prior = np.asarray(self.prior_levels, dtype=np.float64)
            prior.setflags(write=False)
            object.__setattr__(self, "prior_levels", prior)

    @property
    def rows(self) -> int:
        return len(self.months_out)

    @property
    def n_inputs(self) -> int:
        return len(self.input_names)

    def months_in(self) -> np.ndarray:
        return self.months_out - self.lag

    def level_history(self, row: int) -> np.ndarray:
        """Actual levels at the three months before row's output month."""
        vals = []
        for back in (3, 2, 1):
            j = row - back
            if j >= 0:
                vals.append(self.output_levels[j])
            else:
                if self.prior_levels is None:
                    raise ValueError("no prior levels stored for this matrix")
                vals.append(self.prior_levels[3 + j])
        return np.asarray(vals)

    def denormalize_predictions(self, predicted: np.ndarray, start_row: int = 0) -> np.ndarray:
        """Map predictions in recipe units back to actual levels.

        Uses realized history only; with lag >= 1 those values are known at
        prediction time. Raw-recipe predictions pass through untouched.
        """
        predicted = np.asarray(predicted, dtype=np.float64)
        if self.output_recipe == RAW_OUTPUT:
            return predicted.copy()
        out = np.empty_like(predicted)
        for i, mod in enumerate(predicted):
            out[i] = denormalize_output(mod, self.level_history(start_row + i))
        return out

    def slice_rows(self, start: int, stop: int) -> "TrainingMatrix":
        """Contiguous row slice carrying its own inverse-normalization history."""
        if not 0 <= start < stop <= self.rows:
            raise ValueError(f"bad slice [{start}:{stop}] of {self.rows} rows")
        prior = None
        if self.output_recipe == NORMALIZED_OUTPUT:
            # the three actual levels just before the slice, oldest first
            prior = self.level_history(start)
        return TrainingMatrix(
            base_set_id=self.base_set_id,
            lag=self.lag,
            input_names=self.input_names,
            inputs=self.inputs[start:stop],
            output=self.output[start:stop],
            months_out=self.months_out[start:stop],
            output_recipe=self.output_recipe,
            output_levels=self.output_levels[start:stop],
            prior_levels=prior,
        )


MIN_MATRIX_ROWS = 30
MAX_MATRIX_ROWS = 89


def build_lagged_matrix(
    frame: AlignedFrame,
    spec: BaseSetSpec,
    lag: int,
    levels: MonthlySeries,
) -> TrainingMatrix:
    """Pair input rows dated m with the output dated m + lag.

    ``frame`` must already hold every ``spec.input_columns`` entry and the
    recipe output column; ``levels`` is the raw target-level series used
    for scoring and for inverse-normalization history. Keeps the most
    recent 89 rows.
    """
    for name in spec.input_columns:
        if name not in frame.columns:
            raise MissingColumn(f"base set {spec.id}: frame lacks input column {name!r}")
    if OUTPUT_COLUMN not in frame.columns:
        raise MissingColumn(f"base set {spec.id}: frame lacks the output column")
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    rows = len(frame) - lag
    if rows < MIN_MATRIX_ROWS:
        raise InsufficientRows(
            f"base set {spec.id} lag {lag}: {rows} rows remain, need {MIN_MATRIX_ROWS}"
        )
    keep = min(rows, MAX_MATRIX_ROWS)
    start = rows - keep  # drop the oldest rows beyond the cap

    inputs = np.column_stack(
        [frame.columns[name][: len(frame) - lag][start:] for name in spec.input_columns]
    )
    output = frame.columns[OUTPUT_COLUMN][lag:][start:]
    months_out = frame.months[lag:][start:]

    lvl = np.array([levels.value_at(m) for m in months_out])
    prior = None
    if spec.output_recipe == NORMALIZED_OUTPUT:
        prior = np.array([levels.value_at(months_out[0] - b) for b in (3, 2, 1)])

    return TrainingMatrix(
        base_set_id=spec.id,
        lag=lag,
        input_names=spec.input_columns,
        inputs=inputs,
        output=output,
        months_out=months_out,
        output_recipe=spec.output_recipe,
        output_levels=lvl,
        prior_levels=prior,
    )


def build_derived_columns(
    frame: AlignedFrame,
    var_cfg: VarConfig | None = None,
    smooth_cfg: SmoothingConfig | None = None,
    ma_levels: tuple[BlockAverageConfig, ...] = DEFAULT_MA_LEVELS,
) -> dict[str, MonthlySeries]:
    """Compute every transform the base sets draw on, as dated series.

    The VaR chain consumes the first window+1 months of the frame, so the
    derived columns start later than the frame itself.
    """
    var_cfg = var_cfg or VarConfig()
    smooth_cfg = smooth_cfg or SmoothingConfig()
    for name in (INDICATOR, OUTPUT_VARIABLE, GLOBAL_SPREAD, TBILL):
        if name not in frame.columns:
            raise MissingColumn(f"frame lacks required column {name!r}")

    var = indicator_var_series(frame.series(INDICATOR), var_cfg)
    cols: dict[str, MonthlySeries] = {
        "var": var,
        "var_smooth": MonthlySeries("var_smooth", var.months, ema_smooth(var.values, smooth_cfg)),
        "var_double": MonthlySeries("var_double", var.months, double_smooth(var.values, smooth_cfg)),
        "global": frame.series(GLOBAL_SPREAD),
        "tbill": frame.series(TBILL),
    }
    for i, ba_cfg in enumerate(ma_levels, start=1):
        col = block_average_column(var, ba_cfg)
        cols[f"var_ma{i}"] = MonthlySeries(f"var_ma{i}", col.months, col.values)

    out_levels = frame.series(OUTPUT_VARIABLE)
    cols["output_raw"] = out_levels
    cols["output_normalized"] = MonthlySeries(
        "output_normalized", out_levels.months[3:], normalize_output(out_levels.values)
    )
    # Set 10 feeds the (lagged) transformed output back in as an input.
    cols["output_auto"] = cols["output_normalized"]
    return cols


def assemble_base_sets(
    frame: AlignedFrame,
    var_cfg: VarConfig | None = None,
    smooth_cfg: SmoothingConfig | None = None,
    ma_levels: tuple[BlockAverageConfig, ...] = DEFAULT_MA_LEVELS,
    specs: tuple[BaseSetSpec, ...] | None = None,
    enabled: set[int] | None = None,
) -> list[TrainingMatrix]:
    """Build every training matrix for the (enabled) base sets.

    With all ten stock sets enabled this yields 64 matrices: six lag-swept
    sets x 10 lags plus four single-lag sets.
    """
    specs = specs if specs is not None else default_base_sets()
    derived = build_derived_columns(frame, var_cfg, smooth_cfg, ma_levels)
    levels = derived["output_raw"]

    matrices: list[TrainingMatrix] = []
    for spec in specs:
        if enabled is not None and spec.id not in enabled:
            continue
        out = derived[f"output_{spec.output_recipe}"]
        pieces = [
            MonthlySeries(name, derived[name].months, derived[name].values)
            for name in spec.input_columns
        ]
        pieces.append(MonthlySeries(OUTPUT_COLUMN, out.months, out.values))
        set_frame = align(pieces)
        for lag in spec.lags:
            matrices.append(build_lagged_matrix(set_frame, spec, lag, levels))
    return matrices


# ---------------------------------------------------------------------------
# VaR parameter grid search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarGridResult:
    """EAM and outlier counts over a (window, beta) grid.

    All cells are scored on the common evaluation span the largest window
    leaves available, so mean errors are comparable across windows.
    ``best`` is the argmin-EAM cell as (window, beta).
    """

    windows: tuple[int, ...]
    betas: tuple[float, ...]
    eam: np.ndarray       # shape (len(windows), len(betas))
    outliers: np.ndarray  # same shape, int
    eval_points: int
    best: tuple[int, float] = field(init=False)

    def __post_init__(self):
        i, j = np.unravel_index(int(np.argmin(self.eam)), self.eam.shape)
        object.__setattr__(self, "best", (self.windows[i], self.betas[j]))


def grid_search_var_params(
    returns_bp: np.ndarray,
    windows: tuple[int, ...] = tuple(range(50, 81)),
    betas: tuple[float, ...] = (1.0, 0.5, 0.3, 0.2, 0.1, 0.05),
    confidence: float = 0.95,
) -> VarGridResult:
    """Score every (window, beta) cell by mean absolute error and outliers.

    beta = 1 leaves the band unsmoothed. The realized fall at t is the
    sign-flipped return; an outlier is a fall exceeding the band.
    """
    values = np.asarray(returns_bp, dtype=np.float64)
    w_max = max(windows)
    if len(values) < w_max + 2:
        raise InsufficientHistory(
            f"need at least {w_max + 2} returns for the largest window, got {len(values)}"
        )
    eval_len = len(values) - w_max
    falls = -values[-eval_len:]

    eam = np.empty((len(windows), len(betas)))
    outliers = np.empty((len(windows), len(betas)), dtype=np.int64)
    for i, w in enumerate(windows):
        band_raw = rolling_var(values, VarConfig(window=w, confidence=confidence))
        for j, b in enumerate(betas):
            band = ema_smooth(band_raw, SmoothingConfig(beta=b))[-eval_len:]
            eam[i, j] = float(np.mean(np.abs(band - falls)))
            outliers[i, j] = int(np.sum(falls > band))
    return VarGridResult(tuple(windows), tuple(betas), eam, outliers, eval_len)
