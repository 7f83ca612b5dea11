"""Metropolis-Hastings samplers over change-point configurations.

Two chains are provided: one for a known number of change-points (moves a
single point, either by a uniform jump to an unoccupied position or by a
+-1 random-walk step) and one for an unknown number (adds birth and death
moves with the matching proposal corrections in the acceptance ratio).

Each chain owns one seeded generator, and every iteration draws from it in a
fixed order: move-type choice, index/position draws, then the accept coin.
Runs are therefore reproducible given the seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .changepoints import (
    NEG_INF,
    ChangePoints,
    EvidenceCache,
    log_joint_evidence,
    log_posterior_unnorm,
)
from .sequences import Sequence
from .trees import BctHyperParams

STREAMING_STATE_LIMIT = 10_000_000


@dataclass(frozen=True)
class McmcConfig:
    """Sampler settings: iteration budget, burn-in, seed, model depth and
    prior weight, plus exactly one of `num_changes` (known count) or
    `ell_max` (unknown count, requires ell_max >= 2)."""

    iterations: int
    burn_in: int
    seed: int | np.random.SeedSequence
    depth: int
    beta: float | None = None
    num_changes: int | None = None
    ell_max: int | None = None
    thinning: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn-in must be smaller than the iteration count")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")
        if (self.num_changes is None) == (self.ell_max is None):
            raise ValueError("set exactly one of num_changes and ell_max")
        if self.num_changes is not None and self.num_changes < 1:
            raise ValueError("num_changes must be at least 1")
        if self.ell_max is not None and self.ell_max < 2:
            raise ValueError("ell_max must be at least 2")

    @property
    def fixed_mode(self) -> bool:
        return self.num_changes is not None

    def hyper(self, m: int) -> BctHyperParams:
        return BctHyperParams(m, self.depth, self.beta)


class Trace:
    """Recorded post-burn-in states plus running histograms and counters.

    States are kept as position tuples unless the retained-sample estimate
    exceeds the streaming limit, in which case only the histograms are
    maintained. The best-scoring visited state is always tracked.
    """

    def __init__(self, n: int, ell_cap: int, store_states: bool = True):
        self.n = n
        self.ell_cap = ell_cap
        self.states: list[tuple[int, ...]] | None = [] if store_states else None
        self.iterations: list[int] | None = [] if store_states else None
        self.ell_counts = np.zeros(ell_cap + 1, dtype=np.int64)
        self.loc_counts = np.zeros(n + 1, dtype=np.int64)
        self.rank_counts: dict[int, np.ndarray] = {}
        self.proposed: dict[str, int] = {}
        self.accepted: dict[str, int] = {}
        self.block_seconds: list[float] = []
        self.retained = 0
        self.best_state: tuple[int, ...] | None = None
        self.best_log_post = NEG_INF
        self.min_log_post = math.inf

    def record(self, iteration: int, cp: ChangePoints):
        pos = cp.positions
        ell = len(pos)
        self.ell_counts[ell] += 1
        if ell:
            self.loc_counts[list(pos)] += 1
            by_rank = self.rank_counts.get(ell)
            if by_rank is None:
                by_rank = np.zeros((ell, self.n + 1), dtype=np.int64)
                self.rank_counts[ell] = by_rank
            by_rank[range(ell), pos] += 1
        self.retained += 1
        if self.states is not None:
            self.states.append(pos)
            self.iterations.append(iteration)

    def note_score(self, cp: ChangePoints, log_post: float):
        if log_post > self.best_log_post:
            self.best_log_post = log_post
            self.best_state = cp.positions
        if log_post < self.min_log_post:
            self.min_log_post = log_post

    def acceptance_rates(self) -> dict[str, float]:
        return {
            move: self.accepted.get(move, 0) / count
            for move, count in self.proposed.items()
            if count
        }

    def write_csv(self, fh):
        """Rows iteration,ell,p_1,..,p_ell (ragged; no header)."""
        if self.states is None:
            raise ValueError("trace ran in streaming mode; no states stored")
        for it, pos in zip(self.iterations, self.states):
            fields = [str(it), str(len(pos))] + [str(p) for p in pos]
            fh.write(",".join(fields) + "\n")


@dataclass
class Summary:
    """Posterior summaries extracted from a trace."""

    ell_hist: dict[int, int]
    loc_hist: dict[int, int]
    cond_hists: list[dict[int, int]]
    map_ell: int
    map_positions: tuple[int, ...]
    acceptance_rates: dict[str, float]
    retained: int

    def to_json_obj(self) -> dict:
        return {
            "ell_hist": {str(k): v for k, v in sorted(self.ell_hist.items())},
            "loc_hist": {str(k): v for k, v in sorted(self.loc_hist.items())},
            "cond_hists": [
                {str(k): v for k, v in sorted(h.items())} for h in self.cond_hists
            ],
            "map": {"ell": self.map_ell, "positions": list(self.map_positions)},
            "acceptance_rates": self.acceptance_rates,
            "retained": self.retained,
        }


# ------------------------------------------------------------------ proposals


def _kth_free_position(cp: ChangePoints, k: int) -> int:
    """The k-th (0-based) element of {2,..,n-1} minus the occupied positions."""
    candidate = 2 + k
    for p in cp.positions:
        if candidate >= p:
            candidate += 1
    return candidate


def _propose_fixed_tagged(cp: ChangePoints, rng) -> tuple[ChangePoints, str]:
    ell = cp.ell
    if ell < 1:
        raise ValueError("the fixed-count proposal needs at least one change-point")
    i = int(rng.integers(ell))
    if rng.random() < 0.5:
        free = cp.n - ell - 2
        if free < 1:
            raise ValueError("no unoccupied positions available")
        target = _kth_free_position(cp, int(rng.integers(free)))
        return cp.replace(i, target), "jump"
    delta = 1 if rng.random() < 0.5 else -1
    target = cp.positions[i] + delta
    occupied = target in cp.positions
    if target < 2 or target > cp.n - 1 or occupied:
        # reachable only from zero-prior states; propose the state unchanged
        # (a guaranteed self-transition) so the kernel stays symmetric
        return cp, "walk"
    return cp.replace(i, target), "walk"


def propose_fixed(cp: ChangePoints, rng) -> tuple[ChangePoints, float]:
    """Candidate that differs from `cp` in one point; the proposal is
    symmetric, so the log proposal ratio is always zero."""
    cand, _ = _propose_fixed_tagged(cp, rng)
    return cand, 0.0


def propose_variable(
    cp: ChangePoints, ell_max: int, rng
) -> tuple[ChangePoints, str]:
    """Birth/death/within-count candidate per the boundary-aware move menu:
    forced birth from zero change-points, a three-way choice strictly inside
    {1,..,ell_max-1}, and a death/within coin at the cap."""
    ell = cp.ell
    if ell == 0:
        move = "birth"
    elif ell < ell_max:
        u = rng.random()
        move = "death" if u < 1 / 3 else ("birth" if u < 2 / 3 else "within")
    else:
        move = "death" if rng.random() < 0.5 else "within"

    if move == "birth":
        free = cp.n - ell - 2
        if free < 1:
            raise ValueError("no unoccupied positions available for a birth move")
        target = _kth_free_position(cp, int(rng.integers(free)))
        return cp.insert(target), "birth"
    if move == "death":
        return cp.delete(int(rng.integers(ell))), "death"
    cand, _ = _propose_fixed_tagged(cp, rng)
    return cand, "within"


# ------------------------------------------------------------ acceptance


def _log_gap_product(cp: ChangePoints) -> float:
    total = 0.0
    for g in cp.gaps():
        if g <= 0:
            return NEG_INF
        total += math.log(g)
    return total


def log_move_correction(ell: int, ell_new: int, n: int, ell_max: int) -> float:
    """Log of the proposal/normalisation correction in the variable-count
    acceptance ratio. Piecewise by move direction and boundary contact;
    paired birth/death corrections are exact reciprocals. Raises on a
    count change the move menu cannot produce."""
    if ell_new == ell:
        return 0.0
    if ell_new == ell + 1:
        if ell == 0:
            return math.log(2 * (n - 2)) - math.log((n - 3) * (n - 4))
        if ell_new == ell_max:
            return math.log(3 * (2 * ell_max + 1) * (n - ell_max - 1)) - math.log(
                (n - 2 * ell_max - 2) * (n - 2 * ell_max - 1)
            )
        return math.log(2 * (2 * ell_new + 1) * (n - ell_new - 1)) - math.log(
            (n - 2 * ell_new - 2) * (n - 2 * ell_new - 1)
        )
    if ell_new == ell - 1:
        if ell == 1:
            return math.log((n - 3) * (n - 4)) - math.log(2 * (n - 2))
        if ell == ell_max:
            return math.log((n - 2 * ell_max - 2) * (n - 2 * ell_max - 1)) - math.log(
                3 * (2 * ell_max + 1) * (n - ell_max - 1)
            )
        return math.log((n - 2 * ell - 2) * (n - 2 * ell - 1)) - math.log(
            2 * (2 * ell + 1) * (n - ell - 1)
        )
    raise ValueError(
        f"no acceptance case for a move from ell={ell} to ell={ell_new}; "
        "the proposal and the ratio are out of sync"
    )


def accept_fixed(
    current: ChangePoints,
    candidate: ChangePoints,
    x: Sequence,
    params: BctHyperParams,
    cache: EvidenceCache,
    rng,
) -> tuple[ChangePoints, bool]:
    """One accept/reject decision for the known-count chain. The ratio is the
    evidence ratio times the segment-gap product ratio; the binomial prior
    normaliser cancels at fixed count. Always consumes one accept coin."""
    u = rng.random()
    if candidate.positions == current.positions:
        return current, True
    new_gaps = _log_gap_product(candidate)
    if new_gaps == NEG_INF:
        return current, False
    log_r = (
        new_gaps
        - _log_gap_product(current)
        + log_joint_evidence(x, candidate, params, cache)
        - log_joint_evidence(x, current, params, cache)
    )
    if log_r >= 0 or u < math.exp(log_r):
        return candidate, True
    return current, False


def accept_ratio_variable(
    current: ChangePoints,
    candidate: ChangePoints,
    x: Sequence,
    params: BctHyperParams,
    ell_max: int,
    cache: EvidenceCache,
) -> float:
    """Log acceptance ratio for the unknown-count chain."""
    new_gaps = _log_gap_product(candidate)
    if new_gaps == NEG_INF:
        return NEG_INF
    return (
        new_gaps
        - _log_gap_product(current)
        + log_joint_evidence(x, candidate, params, cache)
        - log_joint_evidence(x, current, params, cache)
        + log_move_correction(current.ell, candidate.ell, current.n, ell_max)
    )


# ------------------------------------------------------------------ driver


def equispaced_positions(n: int, ell: int) -> tuple[int, ...]:
    """Roughly evenly spread initial change-points with positive prior mass
    (gaps of at least two, clear of the boundary)."""
    if ell < 1:
        return ()
    if ell > (n - 3) // 2:
        raise ValueError(f"cannot place {ell} change-points in a series of length {n}")
    pos = [1 + round(i * (n - 1) / (ell + 1)) for i in range(1, ell + 1)]
    pos[0] = max(pos[0], 3)
    for i in range(1, ell):
        pos[i] = max(pos[i], pos[i - 1] + 2)
    pos[-1] = min(pos[-1], n - 2)
    for i in range(ell - 2, -1, -1):
        pos[i] = min(pos[i], pos[i + 1] - 2)
    return tuple(pos)


def initial_state(x: Sequence, config: McmcConfig) -> ChangePoints:
    """Fixed mode starts from equispaced points; the unknown-count chain
    starts from the empty configuration, exercising the forced-birth case
    immediately and making runs easy to reproduce."""
    if config.fixed_mode:
        return ChangePoints(x.n, equispaced_positions(x.n, config.num_changes))
    return ChangePoints(x.n)


def run(
    x: Sequence,
    config: McmcConfig,
    cache: EvidenceCache | None = None,
    state_limit: int = STREAMING_STATE_LIMIT,
) -> Trace:
    """Run one chain and return its trace. Deterministic given the seed."""
    params = config.hyper(x.alphabet.size)
    if x.depth != params.depth:
        raise ValueError("sequence context length must equal the configured depth")
    n = x.n
    cap = config.num_changes if config.fixed_mode else config.ell_max
    if cap > (n - 3) // 2:
        raise ValueError(f"{cap} change-points do not fit in a series of length {n}")
    if not config.fixed_mode and n < 5:
        raise ValueError("the unknown-count chain needs at least five observations")

    rng = np.random.default_rng(config.seed)
    if cache is None:
        cache = EvidenceCache()
    ell_max = config.ell_max

    state = initial_state(x, config)
    log_post = log_posterior_unnorm(x, state, params, cache, ell_max)
    if log_post == NEG_INF:
        raise ValueError("initial state has zero prior probability")

    retained_estimate = (config.iterations - config.burn_in + config.thinning - 1)
    retained_estimate //= config.thinning
    trace = Trace(n, cap, store_states=retained_estimate <= state_limit)
    trace.note_score(state, log_post)

    block_start = time.perf_counter()
    for t in range(config.iterations):
        if config.fixed_mode:
            candidate, move = _propose_fixed_tagged(state, rng)
            trace.proposed[move] = trace.proposed.get(move, 0) + 1
            state, accepted = accept_fixed(state, candidate, x, params, cache, rng)
        else:
            candidate, move = propose_variable(state, ell_max, rng)
            trace.proposed[move] = trace.proposed.get(move, 0) + 1
            log_r = accept_ratio_variable(state, candidate, x, params, ell_max, cache)
            u = rng.random()
            accepted = log_r >= 0 or u < math.exp(log_r)
            if accepted:
                state = candidate
        if accepted:
            trace.accepted[move] = trace.accepted.get(move, 0) + 1
            log_post = log_posterior_unnorm(x, state, params, cache, ell_max)
            trace.note_score(state, log_post)
        if t >= config.burn_in and (t - config.burn_in) % config.thinning == 0:
            trace.record(t, state)
        if (t + 1) % 1000 == 0:
            now = time.perf_counter()
            trace.block_seconds.append(now - block_start)
            block_start = now
    return trace


def summarize(trace: Trace) -> Summary:
    """Histograms and MAP readout from a trace.

    The count estimate is the histogram mode (ties to the smaller count); the
    location estimates are the per-rank marginal modes among the samples with
    that count, change-points matched to clusters by rank order.
    """
    if trace.retained == 0:
        raise ValueError("empty trace")
    ell_hist = {
        ell: int(c) for ell, c in enumerate(trace.ell_counts) if c > 0
    }
    loc_hist = {
        int(p): int(c) for p, c in enumerate(trace.loc_counts) if c > 0
    }
    map_ell = int(np.argmax(trace.ell_counts))
    cond_hists: list[dict[int, int]] = []
    map_positions: tuple[int, ...] = ()
    if map_ell > 0:
        by_rank = trace.rank_counts[map_ell]
        modes = []
        for k in range(map_ell):
            row = by_rank[k]
            cond_hists.append({int(p): int(c) for p, c in enumerate(row) if c > 0})
            modes.append(int(np.argmax(row)))
        map_positions = tuple(modes)
    return Summary(
        ell_hist=ell_hist,
        loc_hist=loc_hist,
        cond_hists=cond_hists,
        map_ell=map_ell,
        map_positions=map_positions,
        acceptance_rates=trace.acceptance_rates(),
        retained=trace.retained,
    )
