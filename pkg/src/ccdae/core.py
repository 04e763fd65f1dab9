"""Numeric core: Gibbs description weights, rate curves, and distance curves.

Everything here is a pure function of a precomputed :class:`ScoredBatch`.
All quantities are in nats. Sample indices are 0-based: row 0 of the loss
matrix belongs to the first compared item, row 1 to the second.

Sign convention for the asymmetric gaps: ``delta_2_to_1`` is the expected
loss on sample 1 under sample 2's description distribution *minus* the
optimal expected loss under sample 1's own distribution (cross minus
optimal), so the gap is nonnegative when expectations are exact.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "Hypothesis",
    "ScoredBatch",
    "GibbsPoint",
    "CapacityCurve",
    "DistanceCurve",
    "default_lambda_grid",
    "gibbs_weights",
    "log_partition_estimate",
    "expected_loss",
    "capacity_estimate",
    "cross_expected_loss",
    "trace_rate_curve",
    "distance_curve",
    "auc",
    "intersection_distance",
]

#: 200 evenly spaced multipliers on [0, 100]; the default trace grid.
def default_lambda_grid() -> np.ndarray:
    return np.linspace(0.0, 100.0, 200)


_CAPACITY_CLAMP = 1e-9


class InvalidBatchError(ValueError):
    """Raised when a ScoredBatch (or an argument) violates a precondition."""


@dataclass(frozen=True)
class Hypothesis:
    """One candidate description with its coding and proposal log-probs.

    ``log_pcode`` and ``log_proposal`` are totals in nats; both are <= 0
    whenever the backing models are normalized. ``terminated`` records
    whether the description ended with an explicit end-of-sequence event
    (its log-prob is then part of the totals).
    """

    tokens: tuple[str, ...]
    text: str
    log_pcode: float
    log_proposal: float
    terminated: bool = True

    def __post_init__(self) -> None:
        if len(self.tokens) == 0:
            raise InvalidBatchError("hypothesis has no tokens")


@dataclass
class ScoredBatch:
    """Per-pair evaluation matrix for a set of sampled hypotheses.

    ``loss`` has one row per compared sample and one column per
    hypothesis; entries are total reconstruction losses in nats (they may
    be negative in encoder-only mode, where the loss is a log-ratio).
    ``counts`` carries the draw multiplicity of each merged hypothesis;
    fractional counts are allowed so that a full finite table with
    ``counts`` proportional to the proposal probabilities reproduces exact
    expectations ("exact mode"). ``log_conditionals`` optionally stores
    log p(h|x_i) rows for baselines that need the raw conditionals.
    """

    hypotheses: list[Hypothesis]
    loss: np.ndarray
    mode: str = "encoder_only"
    counts: np.ndarray | None = None
    log_conditionals: np.ndarray | None = None
    dropped: int = 0

    def __post_init__(self) -> None:
        self.loss = np.asarray(self.loss, dtype=float)
        if self.loss.ndim != 2:
            raise InvalidBatchError("loss must be a 2-D matrix")
        if self.loss.shape[1] != len(self.hypotheses):
            raise InvalidBatchError("loss column count != hypothesis count")
        if len(self.hypotheses) < 2:
            raise InvalidBatchError("batch needs at least 2 hypotheses")
        if not np.all(np.isfinite(self.loss)):
            raise InvalidBatchError("loss matrix contains non-finite entries")
        if self.mode not in ("generative", "encoder_only"):
            raise InvalidBatchError(f"unknown loss mode {self.mode!r}")
        if self.counts is None:
            self.counts = np.ones(len(self.hypotheses))
        else:
            self.counts = np.asarray(self.counts, dtype=float)
            if self.counts.shape != (len(self.hypotheses),) or np.any(self.counts <= 0):
                raise InvalidBatchError("counts must be positive, one per hypothesis")
        if self.log_conditionals is not None:
            self.log_conditionals = np.asarray(self.log_conditionals, dtype=float)
            if self.log_conditionals.shape != self.loss.shape:
                raise InvalidBatchError("log_conditionals shape mismatch")

    @classmethod
    def from_columns(
        cls,
        hypotheses: list[Hypothesis],
        loss: np.ndarray,
        mode: str = "encoder_only",
        counts: np.ndarray | None = None,
        log_conditionals: np.ndarray | None = None,
    ) -> "ScoredBatch":
        """Build a batch, dropping hypotheses with any non-finite loss.

        A single -inf log-prob would poison every softmax, so offending
        columns are removed up front and counted in ``dropped``.
        """
        loss = np.asarray(loss, dtype=float)
        extra = np.column_stack(
            [[h.log_pcode, h.log_proposal] for h in hypotheses]
        )
        keep = np.isfinite(loss).all(axis=0) & np.isfinite(extra).all(axis=0)
        n_drop = int((~keep).sum())
        if n_drop:
            warnings.warn(f"dropping {n_drop} hypotheses with non-finite scores")
        hypotheses = [h for h, k in zip(hypotheses, keep) if k]
        loss = loss[:, keep]
        if counts is not None:
            counts = np.asarray(counts, dtype=float)[keep]
        if log_conditionals is not None:
            log_conditionals = np.asarray(log_conditionals, dtype=float)[:, keep]
        return cls(
            hypotheses=hypotheses,
            loss=loss,
            mode=mode,
            counts=counts,
            log_conditionals=log_conditionals,
            dropped=n_drop,
        )

    @property
    def n_hypotheses(self) -> int:
        return len(self.hypotheses)

    @property
    def n_draws(self) -> float:
        return float(self.counts.sum())

    def swapped(self) -> "ScoredBatch":
        """The same batch with the two sample rows exchanged."""
        return ScoredBatch(
            hypotheses=self.hypotheses,
            loss=self.loss[::-1].copy(),
            mode=self.mode,
            counts=self.counts,
            log_conditionals=None
            if self.log_conditionals is None
            else self.log_conditionals[::-1].copy(),
            dropped=self.dropped,
        )


@dataclass(frozen=True)
class GibbsPoint:
    """One traced point of the Gibbs family q(h) ~ p_code(h) exp(-lam*loss)."""

    lam: float
    weights: np.ndarray
    capacity: float
    expected_loss: float
    log_partition: float


@dataclass(frozen=True)
class CapacityCurve:
    """Rate curve (capacity, expected loss) for one sample, ordered by lam."""

    points: list[GibbsPoint]
    sample_index: int

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def capacities(self) -> np.ndarray:
        return np.array([p.capacity for p in self.points])

    @property
    def expected_losses(self) -> np.ndarray:
        return np.array([p.expected_loss for p in self.points])


@dataclass(frozen=True)
class DistanceCurve:
    """Interpolated asymmetric gaps and distance on a common capacity grid."""

    capacity_grid: np.ndarray
    delta_2_to_1: np.ndarray
    delta_1_to_2: np.ndarray
    distance: np.ndarray
    auc: float
    c_max: float
    lambda_grid: np.ndarray = field(default_factory=lambda: np.array([]))
    mode: str = "encoder_only"

    def swapped(self) -> "DistanceCurve":
        """Exchange the roles of the two samples (distance is unchanged)."""
        return DistanceCurve(
            capacity_grid=self.capacity_grid,
            delta_2_to_1=self.delta_1_to_2,
            delta_1_to_2=self.delta_2_to_1,
            distance=self.distance,
            auc=self.auc,
            c_max=self.c_max,
            lambda_grid=self.lambda_grid,
            mode=self.mode,
        )

    def scaled(self, factor: float) -> "DistanceCurve":
        """Unit conversion (e.g. nats -> bits with factor 1/ln 2)."""
        return DistanceCurve(
            capacity_grid=self.capacity_grid * factor,
            delta_2_to_1=self.delta_2_to_1 * factor,
            delta_1_to_2=self.delta_1_to_2 * factor,
            distance=self.distance * factor,
            auc=self.auc * factor * factor,
            c_max=self.c_max * factor,
            lambda_grid=self.lambda_grid,
            mode=self.mode,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["capacity", "delta_2_to_1", "delta_1_to_2", "distance"])
        for c, d21, d12, d in zip(
            self.capacity_grid, self.delta_2_to_1, self.delta_1_to_2, self.distance
        ):
            writer.writerow([f"{c:.12g}", f"{d21:.12g}", f"{d12:.12g}", f"{d:.12g}"])
        return buf.getvalue()

    def report(self) -> dict:
        return {
            "auc": self.auc,
            "c_max": self.c_max,
            "lambda_grid": list(map(float, self.lambda_grid)),
            "mode": self.mode,
            "capacity_grid": list(map(float, self.capacity_grid)),
            "delta_2_to_1": list(map(float, self.delta_2_to_1)),
            "delta_1_to_2": list(map(float, self.delta_1_to_2)),
            "distance": list(map(float, self.distance)),
        }


def _check_target(batch: ScoredBatch, target: int) -> None:
    if not 0 <= target < batch.loss.shape[0]:
        raise InvalidBatchError(f"sample index {target} out of range")


def _logits(batch: ScoredBatch, lam: float, target: int) -> np.ndarray:
    extra = np.array([h.log_pcode - h.log_proposal for h in batch.hypotheses])
    return -lam * batch.loss[target] + extra


def gibbs_weights(batch: ScoredBatch, lam: float, target: int) -> np.ndarray:
    """Self-normalized importance weights for the Gibbs family at ``lam``.

    weights_i = softmax(-lam*loss[target] + log p_code - log proposal)_i,
    with draw multiplicities folded in as count weights. Stabilized with
    max subtraction inside logsumexp.
    """
    if lam < 0:
        raise InvalidBatchError("lambda must be nonnegative")
    _check_target(batch, target)
    u = _logits(batch, lam, target) + np.log(batch.counts)
    w = np.exp(u - logsumexp(u))
    return w / w.sum()


def log_partition_estimate(batch: ScoredBatch, lam: float, target: int) -> float:
    """log of the self-normalized partition estimate (1/N) sum exp(logit)."""
    if lam < 0:
        raise InvalidBatchError("lambda must be nonnegative")
    _check_target(batch, target)
    u = _logits(batch, lam, target) + np.log(batch.counts)
    return float(logsumexp(u) - math.log(batch.n_draws))


def expected_loss(batch: ScoredBatch, lam: float, target: int) -> float:
    """beta(lam): importance-weighted expected reconstruction loss."""
    w = gibbs_weights(batch, lam, target)
    return float(w @ batch.loss[target])


def capacity_estimate(batch: ScoredBatch, lam: float, target: int) -> float:
    """C(lam) = -lam*beta(lam) - log Z_hat, clamped to 0 near zero."""
    beta = expected_loss(batch, lam, target)
    c = -lam * beta - log_partition_estimate(batch, lam, target)
    if -_CAPACITY_CLAMP <= c < 0.0:
        c = 0.0
    return c


def cross_expected_loss(
    batch: ScoredBatch, lam: float, source: int, target: int
) -> float:
    """Expected loss on ``target`` under the Gibbs weights of ``source``."""
    _check_target(batch, target)
    w = gibbs_weights(batch, lam, source)
    return float(w @ batch.loss[target])


def _validate_grid(lambda_grid) -> np.ndarray:
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size == 0:
        raise InvalidBatchError("lambda grid is empty")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise InvalidBatchError("lambda grid must be nonnegative and increasing")
    return grid


def trace_rate_curve(
    batch: ScoredBatch,
    lambda_grid=None,
    target: int = 0,
) -> CapacityCurve:
    """Trace (lam, C, beta) along the lambda grid for one sample."""
    grid = default_lambda_grid() if lambda_grid is None else _validate_grid(lambda_grid)
    points = []
    for lam in grid:
        w = gibbs_weights(batch, float(lam), target)
        beta = float(w @ batch.loss[target])
        logz = log_partition_estimate(batch, float(lam), target)
        c = -float(lam) * beta - logz
        if -_CAPACITY_CLAMP <= c < 0.0:
            c = 0.0
        points.append(
            GibbsPoint(
                lam=float(lam),
                weights=w,
                capacity=c,
                expected_loss=beta,
                log_partition=logz,
            )
        )
    return CapacityCurve(points=points, sample_index=target)


def _interp_by_capacity(cap: np.ndarray, val: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # np.interp needs increasing x; estimator noise can break monotonicity.
    order = np.argsort(cap, kind="stable")
    return np.interp(grid, cap[order], val[order])


def distance_curve(
    batch: ScoredBatch,
    lambda_grid=None,
    capacity_grid_size: int = 100,
    c_max: float | None = None,
) -> DistanceCurve:
    """Trace both Gibbs families and interpolate the gap curves.

    Each constituent curve is parameterized by the capacity of the weight
    distribution that produced it, then linearly interpolated onto a
    shared grid of ``capacity_grid_size`` points spanning [0, c_max].
    """
    if batch.loss.shape[0] < 2:
        raise InvalidBatchError("distance_curve needs both sample rows scored")
    grid = default_lambda_grid() if lambda_grid is None else _validate_grid(lambda_grid)

    cap = [np.empty(grid.size), np.empty(grid.size)]
    beta = [np.empty(grid.size), np.empty(grid.size)]
    cross = [np.empty(grid.size), np.empty(grid.size)]  # cross[i]: weights of i on other
    for i in (0, 1):
        for k, lam in enumerate(grid):
            w = gibbs_weights(batch, float(lam), i)
            b = float(w @ batch.loss[i])
            logz = log_partition_estimate(batch, float(lam), i)
            c = -float(lam) * b - logz
            if -_CAPACITY_CLAMP <= c < 0.0:
                c = 0.0
            cap[i][k] = c
            beta[i][k] = b
            cross[i][k] = float(w @ batch.loss[1 - i])

    traced_max = min(cap[0].max(), cap[1].max())
    if c_max is None:
        c_max = float(traced_max)
    elif c_max > traced_max * (1 + 1e-9) + 1e-12:
        raise InvalidBatchError(
            f"c_max={c_max:.6g} exceeds the traced capacity range "
            f"({traced_max:.6g}); extend the lambda grid or pass a smaller c_max"
        )
    cgrid = np.linspace(0.0, c_max, capacity_grid_size)

    # delta_2_to_1: how much worse sample 2's descriptions reconstruct
    # sample 1, relative to sample 1's own optimal curve, at matched C.
    d21 = _interp_by_capacity(cap[1], cross[1], cgrid) - _interp_by_capacity(
        cap[0], beta[0], cgrid
    )
    d12 = _interp_by_capacity(cap[0], cross[0], cgrid) - _interp_by_capacity(
        cap[1], beta[1], cgrid
    )
    dist = 0.5 * (d21 + d12)
    area = auc(cgrid, dist, c_max)
    return DistanceCurve(
        capacity_grid=cgrid,
        delta_2_to_1=d21,
        delta_1_to_2=d12,
        distance=dist,
        auc=area,
        c_max=float(c_max),
        lambda_grid=grid,
        mode=batch.mode,
    )


def auc(capacities, values, c_max: float | None = None) -> float:
    """Trapezoidal area under (C, value) pairs over [min C, c_max]."""
    c = np.asarray(capacities, dtype=float)
    v = np.asarray(values, dtype=float)
    if c.size < 2:
        raise InvalidBatchError("auc needs at least 2 points")
    if np.any(np.diff(c) < 0):
        raise InvalidBatchError("capacities must be increasing")
    if c_max is None:
        c_max = float(c[-1])
    if not (c[0] <= c_max <= c[-1]):
        raise InvalidBatchError("c_max outside the sampled capacity range")
    keep = c <= c_max
    cc = c[keep]
    vv = v[keep]
    if cc[-1] < c_max:
        cc = np.append(cc, c_max)
        vv = np.append(vv, np.interp(c_max, c, v))
    return float(np.trapezoid(vv, cc))


def intersection_distance(batch: ScoredBatch, lam: float) -> float:
    """Mixture-minus-optimal distance at a single lambda.

    E_{q_mix}[loss_1 + loss_2] - E_{q_1}[loss_1] - E_{q_2}[loss_2] with
    q_mix the equal mixture of the two weight vectors; algebraically equal
    to the mean of the two asymmetric gaps at the same lambda.
    """
    w0 = gibbs_weights(batch, lam, 0)
    w1 = gibbs_weights(batch, lam, 1)
    mix = 0.5 * (w0 + w1)
    total = batch.loss[0] + batch.loss[1]
    return float(mix @ total - w0 @ batch.loss[0] - w1 @ batch.loss[1])
