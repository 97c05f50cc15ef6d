"""Lipschitz certificates for layered networks.

All bounds are built from the weight matrices and the averagedness
constants of the hidden activations (layers ``1..m-1``):

* ``product_bound``: ``||W_m|| ... ||W_1||``;
* ``theta``: average of segment-norm products over cut sets, weighted by
  independent Bernoulli(alpha_i) probabilities (combinatorial, recursive and
  the alpha = 1/2 closed form);
* ``vartheta``: largest norm of ``W_m L_{m-1} W_{m-1} ... L_1 W_1`` over
  diagonal ``L_i`` with entries in ``{1 - 2 alpha_i, 1}`` (separable
  activations only), enumerated exhaustively;
* ``positive_collapse_bound`` and ``absolute_bound``: closed forms for
  sign-structured networks and an upper bound on ``vartheta``.
"""
from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    BudgetExceededError,
    InternalConsistencyError,
    InvalidInputError,
    NotApplicableError,
    UnsupportedNormError,
)
from .linalg import (
    EUCLIDEAN,
    NormSpec,
    absolute_matrix,
    identity_embedding_constant,
    induced_norm,
    gram_spectral_norms,
    induced_norm_batch,
    norm_pair_supported,
    spectral_norm,
)

THETA_TERM_BUDGET = 2**20
THETA_CROSSCHECK_LIMIT = 2**16
DEFAULT_VARTHETA_BUDGET = 2**24
ORDER_RTOL = 1e-8
# floats held per block while enumerating patterns
BLOCK_FLOATS = 1 << 22


def default_budget():
    env = os.environ.get("LIPCERT_BUDGET")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidInputError(f"LIPCERT_BUDGET must be an integer, got {env!r}") from None
        if value < 1:
            raise InvalidInputError("LIPCERT_BUDGET must be positive")
        return value
    return DEFAULT_VARTHETA_BUDGET


# --------------------------------------------------------------------------
# theta


class CompositeNorms:
    """Spectral norms of every contiguous product ``W_b ... W_a`` (1-based, inclusive)."""

    def __init__(self, weights):
        self.m = len(weights)
        self._table = {}
        for a in range(1, self.m + 1):
            P = weights[a - 1]
            self._table[a, a] = spectral_norm(P)
            for b in range(a + 1, self.m + 1):
                P = weights[b - 1] @ P
                self._table[a, b] = spectral_norm(P)

    @classmethod
    def of(cls, net):
        return cls(net.weights)

    def segment(self, a, b):
        return self._table[a, b]


def _check_subset(J, m):
    J = tuple(int(j) for j in J)
    if any(b <= a for a, b in zip(J, J[1:])):
        raise InvalidInputError(f"cut set {J} must be strictly increasing")
    if J and (J[0] < 1 or J[-1] > m - 1):
        raise InvalidInputError(f"cut set {J} must lie in 1..{m - 1}")
    return J


def beta(alphas, J):
    """Bernoulli weight ``prod_{j in J} alpha_j prod_{j not in J} (1 - alpha_j)``; ``J`` is 1-based."""
    m = len(alphas) + 1
    J = set(_check_subset(J, m))
    out = 1.0
    for j, a in enumerate(alphas, start=1):
        out *= a if j in J else 1.0 - a
    return out


def sigma(norms, J):
    """Product of segment norms after cutting the chain at the indices in ``J``."""
    J = _check_subset(J, norms.m)
    cuts = (0,) + J + (norms.m,)
    out = 1.0
    for lo, hi in zip(cuts, cuts[1:]):
        out *= norms.segment(lo + 1, hi)
    return out


def _alphas_of(net, alphas):
    alphas = list(net.hidden_alphas if alphas is None else alphas)
    if len(alphas) != net.m - 1:
        raise InvalidInputError(f"need {net.m - 1} hidden alphas, got {len(alphas)}")
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise InvalidInputError("alphas must lie in [0, 1]")
    return alphas


def theta_combinatorial(net, alphas=None, budget=THETA_TERM_BUDGET, norms=None):
    """Sum of ``beta_J sigma_J`` over all cut sets ``J``.

    Layers with alpha in {0, 1} contribute a single branch, so only
    ``2**(#layers with 0 < alpha < 1)`` terms are formed.
    """
    alphas = _alphas_of(net, alphas)
    norms = norms or CompositeNorms.of(net)
    if net.m == 1:
        return norms.segment(1, 1)
    forced = tuple(j for j, a in enumerate(alphas, start=1) if a == 1.0)
    free = [j for j, a in enumerate(alphas, start=1) if 0.0 < a < 1.0]
    if 2 ** len(free) > budget:
        raise BudgetExceededError(
            f"theta needs 2**{len(free)} terms (budget {budget}); use theta_recursive")
    total = 0.0
    for mask in itertools.product((False, True), repeat=len(free)):
        J = tuple(sorted(forced + tuple(j for j, on in zip(free, mask) if on)))
        total += beta(alphas, J) * sigma(norms, J)
    return total


def theta_recursive(net, alphas=None, norms=None):
    """theta via ``theta_k = sum_i alpha_i theta_i prod_{q=i+1}^{k-1}(1 - alpha_q) ||W_k...W_{i+1}||``
    with ``alpha_0 = theta_0 = 1``; O(m^2) table lookups."""
    return _theta_rec(norms or CompositeNorms.of(net), _alphas_of(net, alphas))


def theta_from_weights(weights, alphas):
    """theta of any chain of weight matrices with the given hidden alphas."""
    if len(alphas) != len(weights) - 1:
        raise InvalidInputError(f"need {len(weights) - 1} hidden alphas, got {len(alphas)}")
    return _theta_rec(CompositeNorms(weights), list(alphas))


def _theta_rec(norms, alphas):
    alphas = [1.0] + alphas
    theta = [1.0]
    for k in range(1, norms.m + 1):
        total = 0.0
        for i in range(k):
            carry = 1.0
            for q in range(i + 1, k):
                carry *= 1.0 - alphas[q]
            total += alphas[i] * theta[i] * carry * norms.segment(i + 1, k)
        theta.append(total)
    return theta[norms.m]


def theta_firm(net, budget=THETA_TERM_BUDGET, norms=None):
    """Uniform average of ``sigma_J`` over all cut sets; valid when every hidden alpha is 1/2."""
    alphas = net.hidden_alphas
    if any(a != 0.5 for a in alphas):
        raise NotApplicableError("theta_firm requires every hidden alpha to equal 1/2")
    norms = norms or CompositeNorms.of(net)
    m = net.m
    if 2 ** (m - 1) > budget:
        raise BudgetExceededError(f"theta_firm needs 2**{m - 1} terms (budget {budget})")
    total = 0.0
    for k in range(m):
        for J in itertools.combinations(range(1, m), k):
            total += sigma(norms, J)
    return total / 2 ** (m - 1)


# --------------------------------------------------------------------------
# product and linear bounds


def _output_side_ok(net, nout):
    if not nout.is_euclidean and not net.layers[-1].activation.separable:
        raise NotApplicableError(
            "non-Euclidean output norms need a separable final activation")


def _first_factor(W, nin):
    if nin.is_euclidean or nin.p == 1.0:
        return induced_norm(W, nin, EUCLIDEAN)
    return identity_embedding_constant(W.shape[1], nin, EUCLIDEAN) * spectral_norm(W)


def _last_factor(W, nout):
    if nout.is_euclidean or math.isinf(nout.p):
        return induced_norm(W, EUCLIDEAN, nout)
    return spectral_norm(W) * identity_embedding_constant(W.shape[0], EUCLIDEAN, nout)


def product_bound(net, nin=EUCLIDEAN, nout=EUCLIDEAN):
    """``prod ||W_i||``; end factors use the induced ``G0 -> l2`` and ``l2 -> Gm`` norms.

    When an end factor has no closed form it is bounded by the exact
    identity-embedding constant times the spectral norm.
    """
    W = net.weights
    if nin.is_euclidean and nout.is_euclidean:
        return math.prod(spectral_norm(w) for w in W)
    _output_side_ok(net, nout)
    if net.m == 1:
        if norm_pair_supported(nin, nout):
            return induced_norm(W[0], nin, nout)
        c = identity_embedding_constant(W[0].shape[0], EUCLIDEAN, nout) if not nout.is_euclidean else 1.0
        return _first_factor(W[0], nin) * c
    inner = math.prod(spectral_norm(w) for w in W[1:-1])
    return _first_factor(W[0], nin) * inner * _last_factor(W[-1], nout)


def full_product(weights):
    P = weights[0]
    for w in weights[1:]:
        P = w @ P
    return P


def linear_bound(net, nin=EUCLIDEAN, nout=EUCLIDEAN):
    """Norm of the purely linear network ``W_m ... W_1``."""
    return induced_norm(full_product(net.weights), nin, nout)


# --------------------------------------------------------------------------
# vartheta


@dataclass(frozen=True)
class DiagonalPattern:
    """Per-hidden-layer diagonal scales; bit 1 gives 1, bit 0 gives ``1 - 2 alpha_i``."""

    bits: tuple
    scales: tuple

    def as_matrices(self):
        return [np.diag(s) for s in self.scales]


class _PatternSpace:
    """Free coordinates of the hidden layers, ordered layer-major then coordinate-minor.

    Bit ``b`` of a pattern index drives the ``b``-th free coordinate.
    """

    def __init__(self, net, nin, nout, alphas=None):
        if not net.hidden_separable():
            raise NotApplicableError("vartheta requires separable hidden activations "
                                     "(non-separable activation present)")
        if not norm_pair_supported(nin, nout):
            raise UnsupportedNormError(f"unsupported norm pair l{nin.label()} -> l{nout.label()}")
        _output_side_ok(net, nout)
        self.net, self.nin, self.nout = net, nin, nout
        self.alphas = _alphas_of(net, alphas)
        self.weights = net.weights
        self.low = [1.0 - 2.0 * a for a in self.alphas]
        self.offsets = []
        nbits = 0
        for i, a in enumerate(self.alphas):
            size = self.weights[i].shape[0]
            if a == 0.0:
                self.offsets.append(None)
            else:
                self.offsets.append(nbits)
                nbits += size
        self.nbits = nbits
        self.count = 1 << nbits
        widest = max(w.shape[0] for w in self.weights)
        self.block = max(1, min(self.count, BLOCK_FLOATS // (widest * net.input_dim)))
        self.block = 1 << (self.block.bit_length() - 1)

    def bits_of(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if self.nbits == 0:
            return np.zeros((idx.size, 0), dtype=np.int8)
        shifts = np.arange(self.nbits, dtype=np.int64)
        return ((idx[:, None] >> shifts) & 1).astype(np.int8)

    def norms(self, bits):
        """Induced norms of the patterned products for a bit array ``(B, nbits)``."""
        B = bits.shape[0]
        W = self.weights
        n0 = self.net.input_dim
        # layout (rows, B, n0) so each layer is a single GEMM
        lam = self._scales(bits, 0)
        if lam is None:
            stack = np.repeat(W[0][:, None, :], B, axis=1)
        else:
            stack = lam[:, :, None] * W[0][:, None, :]
        for i in range(1, len(W)):
            stack = (W[i] @ stack.reshape(stack.shape[0], B * n0)).reshape(W[i].shape[0], B, n0)
            lam = self._scales(bits, i) if i < len(W) - 1 else None
            if lam is not None:
                stack *= lam[:, :, None]
        if self.nin.is_euclidean and self.nout.is_euclidean:
            if stack.shape[0] <= n0:
                G = np.einsum("ibk,jbk->bij", stack, stack)
            else:
                G = np.einsum("ibk,ibl->bkl", stack, stack)
            return gram_spectral_norms(G)
        return induced_norm_batch(np.ascontiguousarray(stack.transpose(1, 0, 2)), self.nin, self.nout)

    def _scales(self, bits, i):
        off = self.offsets[i]
        if off is None:
            return None
        seg = bits[:, off:off + self.weights[i].shape[0]]
        return np.where(seg == 1, 1.0, self.low[i]).T

    def evaluate_range(self, start, stop):
        """(max value, smallest index attaining it) over pattern indices ``[start, stop)``."""
        best, best_idx = -math.inf, -1
        for lo in range(start, stop, self.block):
            hi = min(stop, lo + self.block)
            vals = self.norms(self.bits_of(np.arange(lo, hi, dtype=np.int64)))
            k = int(np.argmax(vals))
            if vals[k] > best:
                best, best_idx = float(vals[k]), lo + k
        return best, best_idx

    def pattern(self, bits_row):
        bits, scales = [], []
        for i, a in enumerate(self.alphas):
            n = self.weights[i].shape[0]
            off = self.offsets[i]
            b = np.ones(n, dtype=np.int8) if off is None else np.asarray(bits_row[off:off + n], dtype=np.int8)
            bits.append(tuple(int(v) for v in b))
            scales.append(tuple(np.where(b == 1, 1.0, self.low[i]).tolist()))
        return DiagonalPattern(tuple(bits), tuple(scales))


@dataclass(frozen=True)
class VarthetaResult:
    value: float
    exact: bool
    patterns: int
    pattern: DiagonalPattern | None = None


def pattern_count(net, alphas=None):
    """Number of endpoint patterns the exhaustive search would visit."""
    alphas = _alphas_of(net, alphas)
    return 1 << sum(w.shape[0] for w, a in zip(net.weights, alphas) if a != 0.0)


def _merge(results):
    best, best_idx = -math.inf, -1
    for val, idx in results:
        if val > best or (val == best and 0 <= idx < best_idx):
            best, best_idx = val, idx
    return best, best_idx


def vartheta_exhaustive(net, nin=EUCLIDEAN, nout=EUCLIDEAN, budget=None, workers=1, alphas=None):
    """Exact vartheta by enumerating every endpoint pattern.

    Restricting each diagonal entry to the two endpoints of ``[1 - 2 alpha_i, 1]``
    loses nothing: the norm is convex in each entry separately, so its supremum
    over the box is attained at a vertex. The pattern range is cut into
    fixed-size blocks that are shared among ``workers`` threads and merged by
    max, so the result does not depend on ``workers``.
    """
    space = _PatternSpace(net, nin, nout, alphas)
    budget = default_budget() if budget is None else budget
    if space.count > budget:
        raise BudgetExceededError(
            f"vartheta needs {space.count} patterns (budget {budget}); fall back to theta")
    edges = list(range(0, space.count, space.block)) + [space.count]
    blocks = list(zip(edges[:-1], edges[1:]))
    workers = max(1, min(int(workers), len(blocks)))
    if workers == 1:
        best, idx = space.evaluate_range(0, space.count)
    else:
        chunks = np.array_split(np.arange(len(blocks)), workers)
        ranges = [(blocks[c[0]][0], blocks[c[-1]][1]) for c in chunks if c.size]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            best, idx = _merge(pool.map(lambda r: space.evaluate_range(*r), ranges))
    pattern = space.pattern(space.bits_of([idx])[0])
    return VarthetaResult(best, True, space.count, pattern)


def vartheta_sample_lower(net, trials=64, seed=0, nin=EUCLIDEAN, nout=EUCLIDEAN, alphas=None):
    """Lower estimate of vartheta from random patterns refined by steepest single-bit ascent.

    The all-ones pattern (the linear network) is always the first start, so
    the value is never below ``linear_bound``. Not a certificate.
    """
    space = _PatternSpace(net, nin, nout, alphas)
    n = space.nbits
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    starts = [np.ones(n, dtype=np.int8)]
    starts += [rng.integers(0, 2, n, dtype=np.int8) for _ in range(max(0, int(trials) - 1))]
    best, best_bits = -math.inf, starts[0]
    flips = np.eye(n, dtype=np.int8) if n else None
    for bits in starts:
        val = float(space.norms(bits[None])[0])
        while n:
            nbrs = bits[None] ^ flips
            vals = space.norms(nbrs)
            k = int(np.argmax(vals))
            if vals[k] <= val:
                break
            bits, val = nbrs[k], float(vals[k])
        if val > best:
            best, best_bits = val, bits
    return VarthetaResult(best, False, len(starts), space.pattern(best_bits))


# --------------------------------------------------------------------------
# sign structure


@dataclass(frozen=True)
class PositivityResult:
    holds: bool
    signs: tuple | None = None  # chi_0, ..., chi_m as tuples of +/-1


def positivity_check(net):
    """Search for signs ``chi_i`` with ``w_{i,k,l} = chi_{i,k} chi_{i-1,l} |w_{i,k,l}|`` and constant ``chi_0``.

    Solved as a parity union-find over the sign-equality constraints of the
    nonzero weights. This is a sufficient condition for the collapse of
    vartheta onto the linear network's norm.
    """
    dims = net.dims
    index = {}
    for i, n in enumerate(dims):
        for k in range(n):
            index[i, k] = len(index)
    parent = list(range(len(index)))
    parity = [0] * len(index)

    def find(u):
        path = []
        while parent[u] != u:
            path.append(u)
            u = parent[u]
        root, acc = u, 0
        for v in reversed(path):
            acc ^= parity[v]
            parity[v] = acc
            parent[v] = root
        return root

    def union(u, v, odd):
        ru, rv = find(u), find(v)
        pu, pv = parity[u] if u != ru else 0, parity[v] if v != rv else 0
        if ru == rv:
            return (pu ^ pv) == odd
        parent[ru] = rv
        parity[ru] = pu ^ pv ^ odd
        return True

    for k in range(1, dims[0]):
        union(index[0, 0], index[0, k], 0)
    for i, W in enumerate(net.weights, start=1):
        rows, cols = np.nonzero(W)
        for k, l in zip(rows.tolist(), cols.tolist()):
            if not union(index[i, k], index[i - 1, l], int(W[k, l] < 0)):
                return PositivityResult(False)
    signs = []
    for i, n in enumerate(dims):
        chi = []
        for k in range(n):
            u = index[i, k]
            find(u)
            chi.append(-1 if (parity[u] if parent[u] != u else 0) else 1)
        signs.append(tuple(chi))
    return PositivityResult(True, tuple(signs))


def _absolute_prereqs(net, nin, nout):
    if not net.hidden_separable():
        raise NotApplicableError("bound requires separable hidden activations "
                                 "(non-separable activation present)")
    if not norm_pair_supported(nin, nout):
        raise UnsupportedNormError(f"unsupported norm pair l{nin.label()} -> l{nout.label()}")
    _output_side_ok(net, nout)


def positive_collapse_bound(net, nin=EUCLIDEAN, nout=EUCLIDEAN):
    """``||W_m ... W_1||`` in the requested norms, valid as vartheta when the signs factorise."""
    _absolute_prereqs(net, nin, nout)
    if not positivity_check(net).holds:
        raise NotApplicableError("weights are not sign-factorisable")
    return linear_bound(net, nin, nout)


def absolute_bound(net, nin=EUCLIDEAN, nout=EUCLIDEAN):
    """``||A_m ... A_1||`` with ``A_i = |W_i|`` entrywise; an upper bound on vartheta."""
    _absolute_prereqs(net, nin, nout)
    return induced_norm(full_product([absolute_matrix(W) for W in net.weights]), nin, nout)


# --------------------------------------------------------------------------
# orchestration

METHODS = ("auto", "product", "theta", "vartheta", "positive", "absolute")
REPORT_FIELDS = (
    "product_bound", "linear_lower", "theta", "vartheta", "vartheta_exact",
    "vartheta_sample_lower", "positive_collapse", "absolute_bound", "certified",
    "norm_in", "norm_out", "budget", "seed", "elapsed_ms",
)


@dataclass(frozen=True)
class CertifyOptions:
    norm_in: NormSpec = EUCLIDEAN
    norm_out: NormSpec = EUCLIDEAN
    vartheta_budget: int | None = None
    sample_trials: int = 64
    seed: int = 0
    method: str = "auto"
    workers: int = 1


@dataclass
class CertificateReport:
    product_bound: float
    linear_lower: float
    theta: float | None = None
    vartheta: float | None = None
    vartheta_exact: bool = False
    vartheta_sample_lower: float | None = None
    positive_collapse: float | None = None
    absolute_bound: float | None = None
    certified: float | None = None
    norm_in: str = "2"
    norm_out: str = "2"
    budget: int = DEFAULT_VARTHETA_BUDGET
    seed: int = 0
    elapsed_ms: float | None = None
    notes: list = field(default_factory=list)

    def certificates(self):
        """Valid Lipschitz constants held by the report."""
        out = {"product_bound": self.product_bound}
        if self.theta is not None:
            out["theta"] = self.theta
        if self.vartheta is not None and self.vartheta_exact:
            out["vartheta"] = self.vartheta
        if self.positive_collapse is not None:
            out["positive_collapse"] = self.positive_collapse
        if self.absolute_bound is not None:
            out["absolute_bound"] = self.absolute_bound
        return out

    def to_dict(self):
        d = asdict(self)
        return {k: d[k] for k in REPORT_FIELDS}


def _le(a, b, what):
    if a is None or b is None:
        return
    if a > b * (1.0 + ORDER_RTOL) + 1e-300:
        raise InternalConsistencyError(f"ordering violated: {what} ({a!r} > {b!r})")


def check_ordering(report):
    r = report
    exact = r.vartheta if r.vartheta_exact else None
    _le(r.linear_lower, r.product_bound, "linear <= product")
    _le(r.linear_lower, r.theta, "linear <= theta")
    _le(r.theta, r.product_bound, "theta <= product")
    _le(r.linear_lower, exact, "linear <= vartheta")
    _le(exact, r.theta, "vartheta <= theta")
    _le(exact, r.product_bound, "vartheta <= product")
    _le(exact, r.absolute_bound, "vartheta <= absolute")
    _le(r.vartheta_sample_lower, exact, "sample lower <= vartheta")
    _le(r.positive_collapse, exact, "positive collapse <= vartheta")
    _le(exact, r.positive_collapse, "vartheta <= positive collapse")


def certify(net, options=CertifyOptions()):
    """Compute every applicable bound and return the tightest certificate.

    With ``method="auto"`` bounds whose hypotheses fail are left empty. A
    specific method raises :class:`NotApplicableError`,
    :class:`BudgetExceededError` or :class:`UnsupportedNormError` when it
    cannot be produced.
    """
    if options.method not in METHODS:
        raise InvalidInputError(f"unknown method {options.method!r}")
    t0 = time.perf_counter()
    nin, nout = options.norm_in, options.norm_out
    euclid = nin.is_euclidean and nout.is_euclidean
    if not norm_pair_supported(nin, nout):
        raise UnsupportedNormError(
            f"unsupported norm pair l{nin.label()} -> l{nout.label()}; "
            "supported: input p=1, output p=inf, or unweighted 2 -> 2")
    budget = default_budget() if options.vartheta_budget is None else int(options.vartheta_budget)
    method = options.method
    auto = method == "auto"

    report = CertificateReport(
        product_bound=product_bound(net, nin, nout),
        linear_lower=linear_bound(net, nin, nout),
        norm_in=nin.label(), norm_out=nout.label(), budget=budget, seed=options.seed,
    )

    if method in ("auto", "theta"):
        if not euclid:
            if not auto:
                raise NotApplicableError("theta is defined for Euclidean norms only")
            report.notes.append("theta skipped: non-Euclidean norms")
        else:
            norms = CompositeNorms.of(net)
            report.theta = theta_recursive(net, norms=norms)
            if 2 ** (net.m - 1) <= THETA_CROSSCHECK_LIMIT:
                comb = theta_combinatorial(net, norms=norms)
                if abs(comb - report.theta) > ORDER_RTOL * max(1.0, abs(comb)):
                    raise InternalConsistencyError(
                        f"theta recursion {report.theta!r} disagrees with sum {comb!r}")

    if method in ("auto", "vartheta"):
        try:
            res = vartheta_exhaustive(net, nin, nout, budget=budget, workers=options.workers)
            report.vartheta, report.vartheta_exact = res.value, True
        except BudgetExceededError as exc:
            if not auto:
                raise
            report.notes.append(str(exc))
            report.vartheta_sample_lower = vartheta_sample_lower(
                net, options.sample_trials, options.seed, nin, nout).value
        except NotApplicableError as exc:
            if not auto:
                raise
            report.notes.append(str(exc))

    if method in ("auto", "positive"):
        try:
            report.positive_collapse = positive_collapse_bound(net, nin, nout)
        except NotApplicableError as exc:
            if not auto:
                raise
            report.notes.append(str(exc))

    if method in ("auto", "absolute"):
        try:
            report.absolute_bound = absolute_bound(net, nin, nout)
        except NotApplicableError as exc:
            if not auto:
                raise
            report.notes.append(str(exc))

    certs = report.certificates()
    if method == "auto":
        report.certified = min(certs.values())
    else:
        key = {"product": "product_bound", "theta": "theta", "vartheta": "vartheta",
               "positive": "positive_collapse", "absolute": "absolute_bound"}[method]
        report.certified = certs[key]
    check_ordering(report)
    report.elapsed_ms = (time.perf_counter() - t0) * 1e3
    return report
