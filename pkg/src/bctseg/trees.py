"""Context-tree machinery for variable-memory Markov chains.

Holds per-context transition counts, Krichevsky-Trofimov integrated
likelihoods, the context-tree-weighting evidence recursion, selection of the
maximising (MAP) tree model, and a brute-force enumeration oracle used to
validate the recursions on small model classes.

All probability arithmetic is carried out in the natural-log domain; the
two-term weighting mixture uses log-sum-exp. Contexts are tuples of symbol
codes with the most recent symbol first, so the children of a node extend its
context one step further into the past.
"""

from __future__ import annotations

import math
from itertools import product as _cartesian

import numpy as np
from scipy.special import gammaln, logsumexp

from .sequences import Alphabet, ParseError, Sequence

_LGAMMA_HALF = float(gammaln(0.5))


def default_beta(m: int) -> float:
    """Default mixing weight 1 - 2**-(m-1) for an m-symbol alphabet."""
    return 1.0 - 2.0 ** (1 - m)


class BctHyperParams:
    """Alphabet size, maximum memory depth, and tree-prior hyperparameters.

    `beta` is the weight a node gives to stopping (being a leaf); the split
    weight 1 - beta is shared among the m subtrees through
    alpha = (1-beta)**(1/(m-1)).
    """

    __slots__ = ("m", "depth", "beta")

    def __init__(self, m: int, depth: int, beta: float | None = None):
        if m < 2:
            raise ValueError("alphabet size must be at least 2")
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        if beta is None:
            beta = default_beta(m)
        beta = float(beta)
        if not 0.0 < beta < 1.0:
            raise ValueError("beta must lie strictly between 0 and 1")
        self.m = int(m)
        self.depth = int(depth)
        self.beta = beta

    @property
    def alpha(self) -> float:
        return (1.0 - self.beta) ** (1.0 / (self.m - 1))

    @property
    def log_beta(self) -> float:
        return math.log(self.beta)

    @property
    def log_1mbeta(self) -> float:
        return math.log1p(-self.beta)

    @property
    def log_alpha(self) -> float:
        return math.log1p(-self.beta) / (self.m - 1)

    def __repr__(self):
        return f"BctHyperParams(m={self.m}, depth={self.depth}, beta={self.beta})"

    def __eq__(self, other):
        return (
            isinstance(other, BctHyperParams)
            and (self.m, self.depth, self.beta) == (other.m, other.depth, other.beta)
        )

    def __hash__(self):
        return hash((self.m, self.depth, self.beta))


def kt_log_prob(counts, m: int | None = None) -> float:
    """Log marginal likelihood of a count vector under a Dirichlet(1/2,..,1/2)
    prior on the next-symbol distribution (the KT estimator).

    Equals log of [prod_j prod_{i<a_j} (i+1/2)] / [prod_{i<M} (i+m/2)] with
    M the total count; the empty count vector gives log 1 = 0.
    """
    a = np.asarray(counts, dtype=np.int64)
    if m is None:
        m = a.size
    elif m != a.size:
        raise ValueError("count vector length must equal the alphabet size")
    if a.size == 0 or a.min() < 0:
        raise ValueError("counts must be a nonempty vector of nonnegative integers")
    total = int(a.sum())
    if total == 0:
        return 0.0
    return float(
        gammaln(a + 0.5).sum()
        - m * _LGAMMA_HALF
        - gammaln(total + 0.5 * m)
        + gammaln(0.5 * m)
    )


def leaf_posterior_mean(counts) -> np.ndarray:
    """Posterior-mean next-symbol probabilities (a_j + 1/2) / (M + m/2)."""
    a = np.asarray(counts, dtype=np.float64)
    if a.min() < 0:
        raise ValueError("counts must be nonnegative")
    return (a + 0.5) / (a.sum() + 0.5 * a.size)


def _vector_kt(counts: np.ndarray, m: int) -> np.ndarray:
    """KT log likelihood for each row of an integer count matrix."""
    totals = counts.sum(axis=1)
    return (
        gammaln(counts + 0.5).sum(axis=1)
        - m * _LGAMMA_HALF
        - gammaln(totals + 0.5 * m)
        + gammaln(0.5 * m)
    )


def _empty_log_pm(params: BctHyperParams) -> np.ndarray:
    """Maximised score of a node with no data at each depth 0..D.

    A data-free subtree has estimated probability one everywhere, so its
    maximised value depends only on how far below the depth cap it sits.
    """
    D = params.depth
    e = np.zeros(D + 1)
    for d in range(D - 1, -1, -1):
        e[d] = max(params.log_beta, params.log_1mbeta + params.m * e[d + 1])
    return e


class CountTree:
    """Transition counts for every context of length <= D occurring in a
    sequence, with cached log-domain node scores.

    Only observed contexts are materialised. Nodes at each depth are stored as
    a sorted array of base-m context codes (least-significant digit = most
    recent symbol) alongside an integer count matrix, which keeps both
    construction and the evidence recursion vectorised.
    """

    def __init__(self, params, node_codes, node_counts, n):
        self.params = params
        self._codes = node_codes
        self._counts = node_counts
        self.n = n
        self._log_pe = None
        self._log_pw = None
        self._log_pm = None
        self._internal = None

    # ---------------------------------------------------------------- build

    @classmethod
    def from_arrays(cls, codes: np.ndarray, n_context: int, params: BctHyperParams):
        """Build from a contiguous code array = initial context + observations.

        Every observation is counted once at each depth 0..D; the context
        window may reach into the initial context, which must therefore hold
        exactly D symbols.
        """
        m, D = params.m, params.depth
        if n_context != D:
            raise ValueError("initial context length must equal the tree depth")
        if m ** (D + 1) >= 2**62:
            raise ValueError("alphabet/depth combination overflows context codes")
        codes = np.ascontiguousarray(codes, dtype=np.int64)
        n = codes.size - n_context
        if n < 0:
            raise ValueError("code array shorter than its declared context")
        if n == 0:
            return cls.empty(params)

        node_codes = []
        node_counts = []
        nxt = codes[n_context:]
        ctx = np.zeros(n, dtype=np.int64)
        weight = 1
        for d in range(D + 1):
            if d > 0:
                # symbol d steps back gets digit weight m**(d-1)
                ctx = ctx + codes[n_context - d : n_context - d + n] * weight
                weight *= m
            pairs = ctx * m + nxt
            uniq, cnt = np.unique(pairs, return_counts=True)
            owners = uniq // m
            symbols = uniq % m
            nodes, inverse = np.unique(owners, return_inverse=True)
            table = np.zeros((nodes.size, m), dtype=np.int64)
            table[inverse, symbols] = cnt
            node_codes.append(nodes)
            node_counts.append(table)
        return cls(params, node_codes, node_counts, n)

    @classmethod
    def from_sequence(cls, seq: Sequence, params: BctHyperParams):
        if seq.alphabet.size != params.m:
            raise ValueError("sequence alphabet does not match the parameters")
        return cls.from_arrays(seq.full_codes(), seq.depth, params)

    @classmethod
    def empty(cls, params: BctHyperParams):
        """Tree over zero observations: a root with zero counts."""
        m, D = params.m, params.depth
        node_codes = [np.zeros(1, dtype=np.int64)]
        node_counts = [np.zeros((1, m), dtype=np.int64)]
        for _ in range(D):
            node_codes.append(np.zeros(0, dtype=np.int64))
            node_counts.append(np.zeros((0, m), dtype=np.int64))
        return cls(params, node_codes, node_counts, 0)

    # ------------------------------------------------------------- accessors

    @staticmethod
    def encode_context(context, m: int) -> int:
        code = 0
        for k, sym in enumerate(context):
            code += int(sym) * m**k
        return code

    @staticmethod
    def decode_context(code: int, depth: int, m: int) -> tuple[int, ...]:
        out = []
        for _ in range(depth):
            out.append(int(code % m))
            code //= m
        return tuple(out)

    def has_context(self, context) -> bool:
        d = len(context)
        if d > self.params.depth:
            return False
        code = self.encode_context(context, self.params.m)
        idx = np.searchsorted(self._codes[d], code)
        return idx < self._codes[d].size and self._codes[d][idx] == code

    def count_vector(self, context) -> np.ndarray:
        """Counts of the symbols following `context`; zeros if never seen."""
        d = len(context)
        if d > self.params.depth:
            raise ValueError("context longer than the tree depth")
        code = self.encode_context(context, self.params.m)
        idx = np.searchsorted(self._codes[d], code)
        if idx < self._codes[d].size and self._codes[d][idx] == code:
            return self._counts[d][idx].copy()
        return np.zeros(self.params.m, dtype=np.int64)

    def contexts_at_depth(self, d: int):
        """Pairs (context tuple, count vector) for the observed depth-d nodes."""
        m = self.params.m
        for code, row in zip(self._codes[d], self._counts[d]):
            yield self.decode_context(int(code), d, m), row.copy()

    def node_count(self) -> int:
        return int(sum(c.size for c in self._codes))

    # ---------------------------------------------------------- evidence

    def _parent_index(self, d: int) -> np.ndarray:
        """Row index of each depth-d node's parent in the depth-(d-1) table."""
        m = self.params.m
        parents = self._codes[d] % (m ** (d - 1)) if d > 1 else np.zeros_like(self._codes[d])
        return np.searchsorted(self._codes[d - 1], parents)

    def _ensure_evidence(self):
        if self._log_pw is not None:
            return
        m, D = self.params.m, self.params.depth
        lb, l1b = self.params.log_beta, self.params.log_1mbeta
        log_pe = [None] * (D + 1)
        log_pw = [None] * (D + 1)
        child_sum = None
        for d in range(D, -1, -1):
            pe = _vector_kt(self._counts[d], m)
            if d == D:
                pw = pe.copy()
            else:
                # absent children have weighted probability one: factor 0 in logs
                pw = np.logaddexp(lb + pe, l1b + child_sum)
            log_pe[d] = pe
            log_pw[d] = pw
            if d > 0:
                child_sum = np.zeros(self._codes[d - 1].size)
                np.add.at(child_sum, self._parent_index(d), pw)
        self._log_pe = log_pe
        self._log_pw = log_pw

    def _ensure_map(self):
        if self._log_pm is not None:
            return
        self._ensure_evidence()
        m, D = self.params.m, self.params.depth
        lb, l1b = self.params.log_beta, self.params.log_1mbeta
        empty = _empty_log_pm(self.params)
        log_pm = [None] * (D + 1)
        internal = [None] * (D + 1)
        child_sum = None
        for d in range(D, -1, -1):
            pe = self._log_pe[d]
            if d == D:
                pm = pe.copy()
                internal[d] = np.zeros(pe.size, dtype=bool)
            else:
                stay = lb + pe
                split = l1b + child_sum
                # ties break toward the leaf (smaller model)
                internal[d] = split > stay
                pm = np.maximum(stay, split)
            log_pm[d] = pm
            if d > 0:
                # unobserved children contribute their data-free maximised score
                child_sum = np.full(self._codes[d - 1].size, m * empty[d])
                np.add.at(child_sum, self._parent_index(d), pm - empty[d])
        self._log_pm = log_pm
        self._internal = internal
        self._empty_pm = empty

    def log_evidence(self) -> float:
        """Log of the prior predictive likelihood: all tree models of depth
        <= D and all leaf parameters integrated out."""
        self._ensure_evidence()
        return float(self._log_pw[0][0])

    def root_log_pm(self) -> float:
        """Log posterior score of the maximising tree model."""
        self._ensure_map()
        return float(self._log_pm[0][0])

    def log_pe_at(self, context) -> float:
        return kt_log_prob(self.count_vector(context), self.params.m)

    def log_pw_at(self, context) -> float:
        """Weighted score of an observed node (for invariant checks)."""
        self._ensure_evidence()
        d = len(context)
        code = self.encode_context(context, self.params.m)
        idx = np.searchsorted(self._codes[d], code)
        if idx >= self._codes[d].size or self._codes[d][idx] != code:
            raise KeyError(f"context {context!r} not in the tree")
        return float(self._log_pw[d][idx])

    # --------------------------------------------------------------- MAP tree

    def map_model(self, with_params: bool = False, max_leaves: int = 1_000_000):
        """The maximum a posteriori tree model, optionally with posterior-mean
        next-symbol probabilities attached to its leaves."""
        self._ensure_map()
        m, D = self.params.m, self.params.depth
        l1b, lb = self.params.log_1mbeta, self.params.log_beta
        empty = self._empty_pm
        leaves: list[tuple[int, ...]] = []

        def expand_absent(prefix, d):
            # data-free subtrees split only while the split score strictly wins
            if d < D and l1b + m * empty[d + 1] > lb:
                for j in range(m):
                    expand_absent(prefix + (j,), d + 1)
            else:
                leaves.append(prefix)
            if len(leaves) > max_leaves:
                raise ValueError("MAP tree exceeds the leaf cap")

        stack = [(0, 0, ())]
        while stack:
            code, d, ctx = stack.pop()
            idx = int(np.searchsorted(self._codes[d], code))
            if d == D or not self._internal[d][idx]:
                leaves.append(ctx)
                continue
            for j in range(m):
                child = code + j * m**d
                table = self._codes[d + 1]
                ci = int(np.searchsorted(table, child))
                if ci < table.size and table[ci] == child:
                    stack.append((child, d + 1, ctx + (j,)))
                else:
                    expand_absent(ctx + (j,), d + 1)
            if len(leaves) > max_leaves:
                raise ValueError("MAP tree exceeds the leaf cap")

        params = None
        if with_params:
            params = {s: leaf_posterior_mean(self.count_vector(s)) for s in leaves}
        return TreeModel(m, leaves, params)


class TreeModel:
    """A proper m-ary context-tree model given by its leaf contexts.

    Every non-leaf node has exactly m children. Leaves may carry a
    next-symbol probability vector. Context tuples hold the most recent
    symbol first.
    """

    def __init__(self, m: int, leaves, params=None):
        self.m = int(m)
        leaf_set = frozenset(tuple(int(c) for c in s) for s in leaves)
        if not leaf_set:
            raise ValueError("a tree model needs at least one leaf")
        nodes = set()
        for s in leaf_set:
            for c in s:
                if not 0 <= c < m:
                    raise ValueError(f"symbol code {c} outside alphabet of size {m}")
            for k in range(len(s) + 1):
                nodes.add(s[:k])
        internal = nodes - leaf_set
        for s in internal:
            for j in range(m):
                if s + (j,) not in nodes:
                    raise ValueError(
                        f"improper tree: node {s!r} is missing child symbol {j}"
                    )
        self.leaves = leaf_set
        self._nodes = frozenset(nodes)
        self.depth = max((len(s) for s in leaf_set), default=0)
        if params is not None:
            converted = {}
            for s, vec in params.items():
                key = tuple(int(c) for c in s)
                if key not in leaf_set:
                    raise ValueError(f"parameters given for non-leaf context {key!r}")
                v = np.asarray(vec, dtype=np.float64)
                if v.shape != (m,) or v.min() < 0:
                    raise ValueError("each parameter vector needs m nonnegative entries")
                if abs(v.sum() - 1.0) > 1e-12:
                    raise ValueError(f"parameter vector for {key!r} does not sum to 1")
                converted[key] = v
            missing = leaf_set - converted.keys()
            if missing:
                raise ValueError(f"missing parameters for leaves {sorted(missing)!r}")
            params = converted
        self.params = params

    @property
    def contexts(self) -> frozenset:
        """All nodes of the tree, internal and leaf."""
        return self._nodes

    @property
    def size(self) -> int:
        """Number of leaves."""
        return len(self.leaves)

    def is_leaf(self, context) -> bool:
        return tuple(context) in self.leaves

    def theta(self, leaf) -> np.ndarray:
        if self.params is None:
            raise ValueError("this model carries no leaf parameters")
        return self.params[tuple(leaf)]

    def leaf_for(self, history) -> tuple[int, ...]:
        """Leaf context selected by a past-symbol sequence (oldest first)."""
        s = ()
        k = 1
        while s not in self.leaves:
            if k > len(history):
                raise ValueError(
                    f"history of length {len(history)} too short to reach a leaf"
                )
            s = s + (int(history[-k]),)
            k += 1
        return s

    # ------------------------------------------------------------ serialization

    def to_json(self, alphabet: Alphabet) -> dict:
        if alphabet.size != self.m:
            raise ValueError("alphabet size does not match the model")

        def render(s):
            return "".join(alphabet.labels[c] for c in s)

        ordered = sorted(self._nodes, key=lambda s: (len(s), s))
        obj = {
            "contexts": [render(s) for s in ordered],
            "leaves": [render(s) for s in sorted(self.leaves, key=lambda s: (len(s), s))],
        }
        if self.params is not None:
            obj["params"] = {
                render(s): [float(v) for v in self.params[s]]
                for s in sorted(self.leaves, key=lambda s: (len(s), s))
            }
        return obj

    @classmethod
    def from_json(cls, obj: dict, alphabet: Alphabet) -> "TreeModel":
        leaves = [parse_context_string(s, alphabet) for s in obj["leaves"]]
        params = None
        if obj.get("params") is not None:
            params = {
                parse_context_string(s, alphabet): vec
                for s, vec in obj["params"].items()
            }
        return cls(alphabet.size, leaves, params)

    def __repr__(self):
        return f"TreeModel(m={self.m}, leaves={self.size}, depth={self.depth})"


def parse_context_string(s: str, alphabet: Alphabet) -> tuple[int, ...]:
    """Decode a label-joined context string; '' and 'λ' denote the root."""
    if s in ("", "λ"):
        return ()
    if all(len(lab) == 1 for lab in alphabet.labels):
        return tuple(alphabet.code_of(ch) for ch in s)
    # multi-character labels: greedy longest match
    out = []
    i = 0
    by_length = sorted(alphabet.labels, key=len, reverse=True)
    while i < len(s):
        for lab in by_length:
            if s.startswith(lab, i):
                out.append(alphabet.code_of(lab))
                i += len(lab)
                break
        else:
            raise ParseError(f"cannot decode context string {s!r} at offset {i}")
    return tuple(out)


# ------------------------------------------------------------------ operations


def build_counts(seq: Sequence, params: BctHyperParams) -> CountTree:
    """Count, for every depth 0..D, how often each symbol follows each context."""
    return CountTree.from_sequence(seq, params)


def ctw_log_evidence(seq: Sequence, params: BctHyperParams) -> float:
    """Log prior predictive likelihood of the observations given the context."""
    return CountTree.from_sequence(seq, params).log_evidence()


def span_log_evidence(codes: np.ndarray, params: BctHyperParams) -> float:
    """Evidence of a contiguous code slice whose first D entries are context."""
    return CountTree.from_arrays(codes, params.depth, params).log_evidence()


def map_tree(seq: Sequence, params: BctHyperParams, with_params: bool = False) -> TreeModel:
    """The MAP tree model of the sequence under the hierarchical tree prior."""
    return CountTree.from_sequence(seq, params).map_model(with_params=with_params)


def count_proper_trees(m: int, depth: int) -> int:
    """|T(d+1)| = |T(d)|**m + 1 with |T(0)| = 1."""
    count = 1
    for _ in range(depth):
        count = count**m + 1
    return count


def enumerate_proper_trees(m: int, depth: int, max_trees: int = 100_000):
    """All proper m-ary trees of depth <= `depth` as frozensets of leaf tuples."""
    total = count_proper_trees(m, depth)
    if total > max_trees:
        raise ValueError(f"model class too large to enumerate ({total} trees)")

    def build(budget):
        trees = [frozenset({()})]
        if budget == 0:
            return trees
        subtrees = build(budget - 1)
        for combo in _cartesian(subtrees, repeat=m):
            leaves = set()
            for j, sub in enumerate(combo):
                for s in sub:
                    leaves.add((j,) + s)
            trees.append(frozenset(leaves))
        return trees

    return build(depth)


def tree_log_prior(leaves, params: BctHyperParams) -> float:
    """Log prior mass of a tree model: alpha**(|T|-1) * beta**(|T|-L_D)."""
    size = len(leaves)
    at_max_depth = sum(1 for s in leaves if len(s) == params.depth)
    return (size - 1) * params.log_alpha + (size - at_max_depth) * params.log_beta


def brute_force_evidence(
    seq: Sequence, params: BctHyperParams, max_trees: int = 100_000
) -> float:
    """Evidence by explicit enumeration: sum over every proper tree of its
    prior mass times the product of leaf-level KT likelihoods. Tractable only
    for small alphabets and shallow depth caps."""
    counts = CountTree.from_sequence(seq, params)
    kt_cache: dict[tuple, float] = {}

    def leaf_kt(s):
        if s not in kt_cache:
            kt_cache[s] = kt_log_prob(counts.count_vector(s), params.m)
        return kt_cache[s]

    scores = []
    for tree in enumerate_proper_trees(params.m, params.depth, max_trees):
        scores.append(tree_log_prior(tree, params) + sum(leaf_kt(s) for s in tree))
    return float(logsumexp(scores))
