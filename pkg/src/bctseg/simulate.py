"""Generation of piece-wise homogeneous variable-memory chains and
stationary-distribution analysis of fitted tree models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.csgraph import connected_components

from .sequences import Alphabet, Sequence
from .trees import TreeModel, parse_context_string


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


@dataclass(frozen=True)
class SegmentSpec:
    """A generating tree model (with leaf parameters) and a segment length."""

    model: TreeModel
    length: int

    def __post_init__(self):
        if self.model.params is None:
            raise ValueError("segment models need parameters on every leaf")
        if self.length < 1:
            raise ValueError("segment length must be positive")


@dataclass(frozen=True)
class PiecewiseSpec:
    """Recipe for a piece-wise homogeneous chain: alphabet, memory cap,
    ordered segment specs, a global initial context (default all zeros),
    and a seed."""

    alphabet: Alphabet
    depth: int
    segments: tuple[SegmentSpec, ...]
    initial_context: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if not self.segments:
            raise ValueError("need at least one segment")
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        for spec in segs:
            if spec.model.m != self.alphabet.size:
                raise ValueError("segment model alphabet mismatch")
            if spec.model.depth > self.depth:
                raise ValueError("segment model deeper than the configured depth")
        ctx = self.initial_context
        if ctx is None:
            ctx = (0,) * self.depth
        ctx = tuple(int(c) for c in ctx)
        if len(ctx) != self.depth:
            raise ValueError("initial context length must equal the depth")
        for c in ctx:
            if not 0 <= c < self.alphabet.size:
                raise ValueError("initial context symbol outside the alphabet")
        object.__setattr__(self, "initial_context", ctx)

    @property
    def total_length(self) -> int:
        return sum(s.length for s in self.segments)

    def change_points(self) -> tuple[int, ...]:
        """Implied true change-point locations: segment j starts at p_{j-1}."""
        points = []
        running = 1
        for spec in self.segments[:-1]:
            running += spec.length
            points.append(running)
        return tuple(points)


def sample_next(model: TreeModel, history, rng) -> int:
    """Draw the next symbol: walk the tree along the most recent symbols of
    `history` (oldest first) to a leaf and sample from its distribution."""
    theta = model.theta(model.leaf_for(history))
    u = rng.random()
    j = int(np.searchsorted(np.cumsum(theta), u, side="right"))
    return min(j, model.m - 1)


def generate_piecewise(spec: PiecewiseSpec) -> tuple[Sequence, tuple[int, ...]]:
    """Emit the segments in order, each continuing from the previous tail,
    and return the concatenated sequence with the true change-points."""
    rng = np.random.default_rng(spec.seed)
    history: list[int] = list(spec.initial_context)
    for seg in spec.segments:
        model = seg.model
        for _ in range(seg.length):
            history.append(sample_next(model, history, rng))
    seq = Sequence(spec.alphabet, spec.initial_context, history[spec.depth :])
    return seq, spec.change_points()


def stationary_marginal(
    model: TreeModel,
    max_depth: int | None = None,
    max_states: int = 1_000_000,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
) -> np.ndarray:
    """First-order symbol marginal of the stationary law of a fitted model.

    The chain on length-d context windows (d = deepest leaf) is solved
    directly for small kernels and by power iteration otherwise. Raises
    NumericalError when the kernel has no unique stationary distribution or
    the state space exceeds the cap.
    """
    if model.params is None:
        raise ValueError("stationary analysis needs a model with parameters")
    if max_depth is not None and model.depth > max_depth:
        raise ValueError("model deeper than the allowed maximum")
    m, d = model.m, model.depth
    if d == 0:
        return model.theta(()).copy()
    n_states = m**d
    if n_states > max_states:
        raise NumericalError(f"context state space too large ({n_states} states)")

    # state code: most recent symbol in the lowest base-m digit
    theta = np.empty((n_states, m))
    for code in range(n_states):
        ctx = _decode_state(code, d, m)
        theta[code] = model.theta(model.leaf_for(ctx[::-1]))
    drop_oldest = np.arange(n_states) % (m ** (d - 1))
    successors = np.stack([j + m * drop_oldest for j in range(m)], axis=1)

    rows = np.repeat(np.arange(n_states), m)
    cols = successors.ravel()
    vals = theta.ravel()
    kernel = sparse.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))

    _require_unique_recurrent_class(kernel)

    if n_states <= 4096:
        pi = _solve_stationary_direct(kernel.toarray())
    else:
        pi = _power_iteration(kernel, n_states, tol, max_iter)

    residual = np.abs(pi @ kernel - pi).max()
    if residual > 1e-9:
        raise NumericalError(f"stationary solve residual {residual:.3e} too large")

    marginal = np.zeros(m)
    np.add.at(marginal, np.arange(n_states) % m, pi)
    return marginal


def _decode_state(code: int, d: int, m: int) -> tuple[int, ...]:
    out = []
    for _ in range(d):
        out.append(code % m)
        code //= m
    return tuple(out)


def _require_unique_recurrent_class(kernel: sparse.csr_matrix):
    n_comp, labels = connected_components(kernel > 0, connection="strong")
    if n_comp == 1:
        return
    # recurrent classes are the strongly connected components with no exits
    coo = kernel.tocoo()
    exits = set()
    for i, j in zip(coo.row, coo.col):
        if labels[i] != labels[j]:
            exits.add(labels[i])
    recurrent = set(range(n_comp)) - exits
    if len(recurrent) != 1:
        raise NumericalError(
            "the fitted chain has no unique stationary distribution "
            f"({len(recurrent)} recurrent classes)"
        )


def _solve_stationary_direct(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if total <= 0:
        raise NumericalError("stationary solve produced a degenerate vector")
    return pi / total


def _power_iteration(kernel, n_states, tol, max_iter):
    pi = np.full(n_states, 1.0 / n_states)
    for _ in range(max_iter):
        new = pi @ kernel
        if np.abs(new - pi).max() <= tol:
            return new
        pi = new
    raise NumericalError("power iteration did not converge")


# ----------------------------------------------------------- spec (de)serialisation


def model_from_table(alphabet: Alphabet, table: dict[str, list[float]]) -> TreeModel:
    """Tree model from a mapping of leaf-context strings to probability rows."""
    params = {parse_context_string(s, alphabet): vec for s, vec in table.items()}
    return TreeModel(alphabet.size, params.keys(), params)


def piecewise_spec_from_json(obj: dict) -> PiecewiseSpec:
    """Parse the generation-spec JSON layout:
    {"alphabet": [...], "D": int, "segments": [{"contexts": {...},
    "length": int}, ...], "seed": int, "initial_context": "..."}."""
    alpha = obj["alphabet"]
    alphabet = Alphabet.of_size(alpha) if isinstance(alpha, int) else Alphabet(alpha)
    depth = int(obj.get("D", obj.get("depth", 0)))
    segments = tuple(
        SegmentSpec(model_from_table(alphabet, seg["contexts"]), int(seg["length"]))
        for seg in obj["segments"]
    )
    ctx = obj.get("initial_context")
    if ctx is not None:
        # the context string reads chronologically, oldest symbol first
        ctx = parse_context_string(ctx, alphabet) if isinstance(ctx, str) else tuple(ctx)
    return PiecewiseSpec(
        alphabet=alphabet,
        depth=depth,
        segments=segments,
        initial_context=ctx,
        seed=int(obj.get("seed", 0)),
    )


def piecewise_spec_to_json(spec: PiecewiseSpec) -> dict:
    segments = []
    for seg in spec.segments:
        table = seg.model.to_json(spec.alphabet)["params"]
        segments.append({"contexts": table, "length": seg.length})
    labels = spec.alphabet.labels
    return {
        "alphabet": list(labels),
        "D": spec.depth,
        "segments": segments,
        "seed": spec.seed,
        "initial_context": "".join(labels[c] for c in spec.initial_context),
    }


# ----------------------------------------------------------------- benchmark


def ternary_benchmark_spec(seed: int = 1, depth: int = 10) -> PiecewiseSpec:
    """Four-regime ternary benchmark with change-points at 2500, 3500 and
    4000 (total length 4300). The four generating models are deliberately
    similar, so recovering the segmentation is a nontrivial exercise."""
    alphabet = Alphabet.of_size(3)

    model1 = model_from_table(
        alphabet,
        {
            "0": [0.3, 0.4, 0.3],
            "2": [0.5, 0.3, 0.2],
            "10": [0.2, 0.5, 0.3],
            "11": [0.1, 0.4, 0.5],
            "121": [0.7, 0.2, 0.1],
            "122": [0.4, 0.2, 0.4],
            "1200": [0.6, 0.1, 0.3],
            "1201": [0.3, 0.5, 0.2],
            "1202": [0.4, 0.1, 0.5],
        },
    )
    model2 = model_from_table(
        alphabet,
        {
            "0": [0.4, 0.5, 0.1],
            "2": [0.4, 0.4, 0.2],
            "10": [0.4, 0.2, 0.4],
            "11": [0.2, 0.4, 0.4],
            "12": [0.6, 0.1, 0.3],
        },
    )
    model3 = model_from_table(
        alphabet,
        {
            "0": [0.5, 0.3, 0.2],
            "1": [0.3, 0.6, 0.1],
            "2": [0.3, 0.2, 0.5],
        },
    )
    model4 = model_from_table(alphabet, {"": [0.4, 0.2, 0.4]})

    return PiecewiseSpec(
        alphabet=alphabet,
        depth=depth,
        segments=(
            SegmentSpec(model1, 2499),
            SegmentSpec(model2, 1000),
            SegmentSpec(model3, 500),
            SegmentSpec(model4, 301),
        ),
        seed=seed,
    )
