"""Dense matrix helpers and the operator norms used by the bounds.

Matrices are plain 2-D float64 :class:`numpy.ndarray` objects. Every public
function validates its input with :func:`as_matrix`, which rejects
non-finite entries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError, UnsupportedNormError

# below this size (of the smaller side) the Gram matrix is diagonalised directly
DENSE_LIMIT = 512
POWER_TOL = 1e-12
POWER_MAXITER = 10_000


def as_matrix(A, name="matrix"):
    """Return ``A`` as a finite float64 2-D array or raise."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def as_vector(x, name="vector"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return x


def matmul(A, B):
    """Dense product ``A @ B`` with shape checking."""
    A = as_matrix(A, "left operand")
    B = as_matrix(B, "right operand")
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def absolute_matrix(A):
    """Entrywise absolute value."""
    return np.abs(as_matrix(A))


def _top_gram_eigenvalue(G):
    return float(np.linalg.eigvalsh(G)[-1])


def power_iteration_norm(A, tol=POWER_TOL, maxiter=POWER_MAXITER):
    """Largest singular value of ``A`` by power iteration on the smaller Gram matrix.

    Stops once the Rayleigh quotient changes by less than ``tol`` relative.
    A stalled iteration (repeated top singular value) still returns the
    converged quotient, which is the correct norm.
    """
    A = as_matrix(A)
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    n = G.shape[0]
    # deterministic start with no special alignment to the canonical basis
    v = np.cos(np.arange(1, n + 1, dtype=np.float64)) + 2.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = G @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


def spectral_norm(A):
    """Largest singular value of ``A``."""
    A = as_matrix(A)
    r, c = A.shape
    if min(r, c) > DENSE_LIMIT:
        return power_iteration_norm(A)
    G = A @ A.T if r <= c else A.T @ A
    return math.sqrt(max(_top_gram_eigenvalue(G), 0.0))


def gram_spectral_norms(G):
    """Square roots of the top eigenvalues of a stack of Gram matrices ``(B, n, n)``."""
    if G.shape[-1] == 1:
        top = G[..., 0, 0]
    else:
        top = np.linalg.eigvalsh(G)[..., -1]
    return np.sqrt(np.maximum(top, 0.0))


def spectral_norm_batch(stack):
    """Spectral norms of a stack of matrices with shape ``(B, r, c)``."""
    stack = np.asarray(stack, dtype=np.float64)
    r, c = stack.shape[-2:]
    if r <= c:
        G = stack @ np.swapaxes(stack, -1, -2)
    else:
        G = np.swapaxes(stack, -1, -2) @ stack
    return gram_spectral_norms(G)


def conjugate_exponent(p):
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _pnorm(x, p, axis=-1):
    x = np.abs(x)
    if math.isinf(p):
        return np.max(x, axis=axis)
    if p == 1.0:
        return np.sum(x, axis=axis)
    if p == 2.0:
        return np.sqrt(np.sum(x * x, axis=axis))
    return np.sum(x**p, axis=axis) ** (1.0 / p)


@dataclass(frozen=True)
class NormSpec:
    """Weighted lp norm ``(sum_k w_k |x_k|^p)^(1/p)``, or ``max_k w_k |x_k|`` for p = inf.

    An empty ``weights`` tuple means all weights equal one.
    """

    p: float = 2.0
    weights: tuple = field(default=())

    def __post_init__(self):
        p = float(self.p)
        if math.isnan(p) or p < 1.0:
            raise InvalidInputError(f"norm exponent must be >= 1, got {self.p}")
        w = tuple(float(v) for v in self.weights)
        if any(not math.isfinite(v) or v <= 0.0 for v in w):
            raise InvalidInputError("norm weights must be finite and strictly positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def parse(cls, text):
        """Parse ``p[:w1,w2,...]`` where ``p`` may be ``inf``."""
        head, _, tail = text.strip().partition(":")
        try:
            p = math.inf if head.strip().lower() in ("inf", "infinity") else float(head)
            weights = tuple(float(v) for v in tail.split(",")) if tail.strip() else ()
        except ValueError as exc:
            raise InvalidInputError(f"bad norm spec {text!r}") from exc
        return cls(p, weights)

    @property
    def unweighted(self):
        return all(w == 1.0 for w in self.weights)

    @property
    def is_euclidean(self):
        return self.p == 2.0 and self.unweighted

    def scales(self, n):
        """Per-coordinate factors ``s`` with ``norm(x) == ||s * x||_p``."""
        if not self.weights:
            return np.ones(n)
        if len(self.weights) != n:
            raise ShapeError(f"norm has {len(self.weights)} weights, space has dimension {n}")
        w = np.asarray(self.weights)
        return w if math.isinf(self.p) else w ** (1.0 / self.p)

    def norm(self, x, axis=-1):
        x = np.asarray(x, dtype=np.float64)
        return _pnorm(x * self.scales(x.shape[axis]), self.p, axis=axis)

    def label(self):
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        if self.unweighted:
            return p
        return p + ":" + ",".join(repr(w) for w in self.weights)


EUCLIDEAN = NormSpec()


def norm_pair_supported(nin, nout):
    return nin.p == 1.0 or math.isinf(nout.p) or (nin.is_euclidean and nout.is_euclidean)


def _check_pair(nin, nout):
    if not norm_pair_supported(nin, nout):
        raise UnsupportedNormError(
            f"no exact induced norm for l{nin.label()} -> l{nout.label()}; "
            "supported: input p=1, output p=inf, or unweighted 2 -> 2"
        )


def induced_norm_batch(stack, nin=EUCLIDEAN, nout=EUCLIDEAN):
    """Induced norms of a stack ``(B, r, c)`` for a supported norm pair."""
    _check_pair(nin, nout)
    stack = np.asarray(stack, dtype=np.float64)
    r, c = stack.shape[-2:]
    if nin.is_euclidean and nout.is_euclidean:
        return spectral_norm_batch(stack)
    s_in = nin.scales(c)
    if nin.p == 1.0:
        # extreme points of the unit ball are the columns scaled by 1/s_in
        cols = nout.norm(np.swapaxes(stack, -1, -2), axis=-1)
        return np.max(cols / s_in, axis=-1)
    s_out = nout.scales(r)
    dual = _pnorm(stack / s_in, conjugate_exponent(nin.p), axis=-1)
    return np.max(dual * s_out, axis=-1)


def induced_norm(A, nin=EUCLIDEAN, nout=EUCLIDEAN):
    """Exact operator norm ``sup ||Ax||_out / ||x||_in``.

    Raises :class:`UnsupportedNormError` for pairs without a closed form
    rather than approximating.
    """
    A = as_matrix(A)
    _check_pair(nin, nout)
    if nin.is_euclidean and nout.is_euclidean:
        return spectral_norm(A)
    return float(induced_norm_batch(A[None], nin, nout)[0])


def identity_embedding_constant(n, nin, nout):
    """Exact ``||Id||`` from ``(R^n, nin)`` to ``(R^n, nout)`` when one side is unweighted l2.

    Used only to chain per-layer spectral norms to the end-point norms.
    """
    if nin.is_euclidean and nout.is_euclidean:
        return 1.0
    if nin.is_euclidean:
        # ||s y||_p over the Euclidean unit ball
        s = nout.scales(n)
        p = nout.p
        if p >= 2.0:
            return float(np.max(s))
        r = 2.0 * p / (2.0 - p)
        return float(_pnorm(s, r))
    if nout.is_euclidean:
        # ||y / s||_2 over the lp unit ball
        inv = 1.0 / nin.scales(n)
        p = nin.p
        if p <= 2.0:
            return float(np.max(inv))
        r = 2.0 if math.isinf(p) else 2.0 * p / (p - 2.0)
        return float(_pnorm(inv, r))
    raise UnsupportedNormError("embedding constant needs one Euclidean side")
