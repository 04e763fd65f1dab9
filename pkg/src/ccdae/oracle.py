"""Exact brute-force computations over finite hypothesis tables.

Ground truth for the importance-sampling estimators in :mod:`ccdae.core`:
everything here enumerates the full table and normalizes explicitly, with
no shared estimator code, so the two routes stay independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DistanceCurve, Hypothesis, ScoredBatch, auc

__all__ = [
    "FiniteHypothesisTable",
    "NoFeasibleDescriptionError",
    "proposal_batch",
    "exact_batch",
    "exact_gibbs",
    "exact_capacity",
    "exact_expected_loss",
    "exact_cross_expected_loss",
    "solve_discrete_description",
    "structure_function",
    "exact_distance_curve",
    "exact_intersection_distance",
    "dirac_restricted_optimum",
    "universal_augment",
]

_KRAFT_SLACK = 1e-9


class NoFeasibleDescriptionError(ValueError):
    """No hypothesis fits under the requested capacity."""


@dataclass(frozen=True)
class FiniteHypothesisTable:
    """A finite description code plus a loss matrix.

    ``code_lengths[j]`` is -log p_code(h_j) in nats; ``loss[i][j]`` the
    reconstruction loss of sample i under hypothesis j. Sub-probability
    codes are allowed (Kraft sum <= 1); the Gibbs computations use the
    unnormalized masses exp(-code_length) consistently so the slack
    cancels.
    """

    code_lengths: np.ndarray
    loss: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "code_lengths", np.asarray(self.code_lengths, dtype=float)
        )
        object.__setattr__(self, "loss", np.atleast_2d(np.asarray(self.loss, dtype=float)))
        if self.code_lengths.ndim != 1:
            raise ValueError("code_lengths must be 1-D")
        if self.loss.shape[1] != self.code_lengths.size:
            raise ValueError("loss columns must match code_lengths")
        if not (np.all(np.isfinite(self.code_lengths)) and np.all(np.isfinite(self.loss))):
            raise ValueError("table entries must be finite")
        if np.exp(-self.code_lengths).sum() > 1.0 + _KRAFT_SLACK:
            raise ValueError("code violates Kraft inequality")
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(f"h{j}" for j in range(self.code_lengths.size))
            )
        if len(self.labels) != self.code_lengths.size:
            raise ValueError("labels must match hypothesis count")

    @property
    def n_hypotheses(self) -> int:
        return int(self.code_lengths.size)

    @property
    def n_samples(self) -> int:
        return int(self.loss.shape[0])

    # -- plain-text round-trip -------------------------------------------
    # Format: '#' comments, then one line of labels, one line of code
    # lengths, then one loss row per sample. Floats are written with
    # repr() so the round trip is bit-exact.

    def dumps(self) -> str:
        lines = [
            " ".join(self.labels),
            " ".join(repr(float(v)) for v in self.code_lengths),
        ]
        for row in self.loss:
            lines.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FiniteHypothesisTable":
        rows = [
            line.strip()
            for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
        if len(rows) < 3:
            raise ValueError("table file needs labels, code lengths, and >=1 loss row")
        labels = tuple(rows[0].split())
        code = np.array([float(v) for v in rows[1].split()])
        loss = np.array([[float(v) for v in row.split()] for row in rows[2:]])
        return cls(code_lengths=code, loss=loss, labels=labels)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "FiniteHypothesisTable":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _table_hypotheses(table: FiniteHypothesisTable, log_proposal: np.ndarray):
    log_pcode = -table.code_lengths
    return [
        Hypothesis(
            tokens=(label,),
            text=label,
            log_pcode=float(log_pcode[j]),
            log_proposal=float(log_proposal[j]),
        )
        for j, label in enumerate(table.labels)
    ]


def proposal_batch(
    table: FiniteHypothesisTable,
    n_draws: int,
    seed: int = 0,
    proposal: np.ndarray | None = None,
) -> ScoredBatch:
    """i.i.d. proposal draws from a finite table, merged into a ScoredBatch.

    The default proposal is the normalized code distribution. Duplicate
    draws merge into count weights, so the batch feeds the importance
    sampling estimators exactly as pooled sampled descriptions would.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    if proposal is None:
        mass = np.exp(-table.code_lengths)
        proposal = mass / mass.sum()
    proposal = np.asarray(proposal, dtype=float)
    rng = np.random.default_rng(seed)
    draws = rng.choice(table.n_hypotheses, size=n_draws, p=proposal)
    idx, counts = np.unique(draws, return_counts=True)
    hyps = [
        Hypothesis(
            tokens=(table.labels[j],),
            text=table.labels[j],
            log_pcode=float(-table.code_lengths[j]),
            log_proposal=float(np.log(proposal[j])),
        )
        for j in idx
    ]
    return ScoredBatch(
        hypotheses=hyps,
        loss=table.loss[:, idx],
        mode="generative",
        counts=counts.astype(float),
    )


def exact_batch(table: FiniteHypothesisTable) -> ScoredBatch:
    """Full-support batch with counts proportional to the proposal.

    With the whole table enumerated and fractional counts equal to the
    proposal probabilities, the self-normalized estimators reproduce exact
    expectations; useful for exact-mode invariant tests.
    """
    mass = np.exp(-table.code_lengths)
    proposal = mass / mass.sum()
    return ScoredBatch(
        hypotheses=_table_hypotheses(table, np.log(proposal)),
        loss=table.loss.copy(),
        mode="generative",
        counts=proposal,
    )


def exact_gibbs(table: FiniteHypothesisTable, sample: int, lam: float) -> np.ndarray:
    """Normalized q_j proportional to exp(-code_length_j - lam*loss_j)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    logw = -table.code_lengths - lam * table.loss[sample]
    logw = logw - logw.max()
    w = np.exp(logw)
    return w / w.sum()


def exact_expected_loss(table: FiniteHypothesisTable, sample: int, lam: float) -> float:
    q = exact_gibbs(table, sample, lam)
    return float(q @ table.loss[sample])


def exact_cross_expected_loss(
    table: FiniteHypothesisTable, source: int, target: int, lam: float
) -> float:
    q = exact_gibbs(table, source, lam)
    return float(q @ table.loss[target])


def exact_capacity(table: FiniteHypothesisTable, sample: int, lam: float) -> float:
    """KL(q || exp(-code_lengths)) in nats; >= 0 for sub-probability codes."""
    q = exact_gibbs(table, sample, lam)
    nz = q > 0
    kl = float(np.sum(q[nz] * (np.log(q[nz]) + table.code_lengths[nz])))
    return max(kl, 0.0)


def _feasible(table: FiniteHypothesisTable, capacity: float) -> np.ndarray:
    return np.flatnonzero(table.code_lengths <= capacity + 1e-12)


def solve_discrete_description(
    table: FiniteHypothesisTable, sample: int, capacity: float
) -> int:
    """Best single description with code length <= capacity.

    Ties break toward smaller code length, then lower index.
    """
    feas = _feasible(table, capacity)
    if feas.size == 0:
        raise NoFeasibleDescriptionError(
            f"no hypothesis with code length <= {capacity:.6g}"
        )
    keys = sorted(
        feas, key=lambda j: (table.loss[sample][j], table.code_lengths[j], j)
    )
    return int(keys[0])


def structure_function(
    table: FiniteHypothesisTable, sample: int, capacity: float
) -> float:
    """Two-part code value: min over feasible h of loss + code length."""
    feas = _feasible(table, capacity)
    if feas.size == 0:
        raise NoFeasibleDescriptionError(
            f"no hypothesis with code length <= {capacity:.6g}"
        )
    return float(np.min(table.loss[sample][feas] + table.code_lengths[feas]))


def dirac_restricted_optimum(
    table: FiniteHypothesisTable, sample: int, capacity: float
) -> float:
    """Optimal expected loss over Dirac distributions with KL <= capacity.

    A Dirac on h_j has KL(delta || p_code) = code_length_j, so this is
    the same feasible set as the discrete problem; returned is the loss.
    """
    feas = _feasible(table, capacity)
    if feas.size == 0:
        raise NoFeasibleDescriptionError(
            f"no Dirac with KL <= {capacity:.6g}"
        )
    return float(np.min(table.loss[sample][feas]))


def exact_intersection_distance(
    table: FiniteHypothesisTable, pair: tuple[int, int], lam: float
) -> float:
    i, j = pair
    qi = exact_gibbs(table, i, lam)
    qj = exact_gibbs(table, j, lam)
    mix = 0.5 * (qi + qj)
    total = table.loss[i] + table.loss[j]
    return float(mix @ total - qi @ table.loss[i] - qj @ table.loss[j])


def exact_distance_curve(
    table: FiniteHypothesisTable,
    pair: tuple[int, int] = (0, 1),
    lambda_grid=None,
    capacity_grid_size: int = 100,
    c_max: float | None = None,
) -> DistanceCurve:
    """Exact counterpart of :func:`ccdae.core.distance_curve`."""
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 100.0, 200)
    grid = np.asarray(lambda_grid, dtype=float)
    a, b = pair
    cap = {a: [], b: []}
    beta = {a: [], b: []}
    cross = {a: [], b: []}
    for lam in grid:
        for i, j in ((a, b), (b, a)):
            q = exact_gibbs(table, i, float(lam))
            nz = q > 0
            kl = float(np.sum(q[nz] * (np.log(q[nz]) + table.code_lengths[nz])))
            cap[i].append(max(kl, 0.0))
            beta[i].append(float(q @ table.loss[i]))
            cross[i].append(float(q @ table.loss[j]))
    cap = {k: np.array(v) for k, v in cap.items()}
    beta = {k: np.array(v) for k, v in beta.items()}
    cross = {k: np.array(v) for k, v in cross.items()}

    traced_max = min(cap[a].max(), cap[b].max())
    if c_max is None:
        c_max = float(traced_max)
    elif c_max > traced_max * (1 + 1e-9) + 1e-12:
        raise ValueError(
            f"c_max={c_max:.6g} exceeds the traced capacity range ({traced_max:.6g})"
        )
    cgrid = np.linspace(0.0, c_max, capacity_grid_size)

    def interp(x, y):
        order = np.argsort(x, kind="stable")
        return np.interp(cgrid, x[order], y[order])

    d21 = interp(cap[b], cross[b]) - interp(cap[a], beta[a])
    d12 = interp(cap[a], cross[a]) - interp(cap[b], beta[b])
    dist = 0.5 * (d21 + d12)
    return DistanceCurve(
        capacity_grid=cgrid,
        delta_2_to_1=d21,
        delta_1_to_2=d12,
        distance=dist,
        auc=auc(cgrid, dist, c_max),
        c_max=float(c_max),
        lambda_grid=grid,
        mode="generative",
    )


def universal_augment(
    table: FiniteHypothesisTable, epsilon_code: float = 0.1
) -> FiniteHypothesisTable:
    """Append a search hypothesis attaining the optimal two-part code.

    The new hypothesis has code length ``epsilon_code`` and, for every
    sample, loss equal to the best two-part code minus ``epsilon_code``,
    so its two-part value equals the table minimum simultaneously for all
    samples. Existing code mass is rescaled (lengths increased) to keep
    the Kraft sum <= 1.
    """
    if epsilon_code <= 0:
        raise ValueError("epsilon_code must be positive")
    two_part = table.loss + table.code_lengths[None, :]
    search_loss = two_part.min(axis=1) - epsilon_code

    old_mass = float(np.exp(-table.code_lengths).sum())
    budget = 1.0 - math.exp(-epsilon_code)
    scale = min(1.0, budget / old_mass)
    new_lengths = np.append(table.code_lengths - math.log(scale), epsilon_code)
    new_loss = np.column_stack([table.loss, search_loss])
    return FiniteHypothesisTable(
        code_lengths=new_lengths,
        loss=new_loss,
        labels=table.labels + ("h_search",),
    )
