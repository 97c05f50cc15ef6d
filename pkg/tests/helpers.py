"""Random network generators and independent oracles shared by the tests."""
import functools
import itertools

import numpy as np

from lipcert import activations as acts
from lipcert.network import Network


ACCEPTANCE = []


def criterion(number, title):
    """Record a pass/fail line for an acceptance test; the summary is printed at session end."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                ACCEPTANCE.append(f"criterion {number:>2} FAIL  {title}: {type(exc).__name__}")
                raise
            ACCEPTANCE.append(f"criterion {number:>2} PASS  {title}")
        return run
    return wrap


def random_net(rng, m, max_dim=8, alphas=None, activation="relu", positive=False, min_dim=1, dims=None):
    """Gaussian weights; ``alphas`` defaults to uniform draws in [0, 1] for every layer."""
    if dims is None:
        dims = rng.integers(min_dim, max_dim + 1, size=m + 1)
    weights = []
    for i in range(m):
        W = rng.standard_normal((dims[i + 1], dims[i]))
        weights.append(np.abs(W) if positive else W)
    if alphas is None:
        alphas = list(rng.uniform(0.0, 1.0, size=m))
    act = acts.builtin(activation)
    return Network.from_weights(weights, [act] * m, alphas=list(alphas))


def random_enumerable_net(rng, m_max=4, hidden_budget=16, max_dim=6, **kw):
    """Network whose hidden dimensions sum to at most ``hidden_budget``."""
    while True:
        m = int(rng.integers(2, m_max + 1))
        dims = rng.integers(1, max_dim + 1, size=m + 1)
        if dims[1:-1].sum() <= hidden_budget:
            return random_net(rng, m, dims=dims, **kw)


def spec_norm(A):
    return float(np.linalg.norm(A, 2))


def chain(weights):
    P = weights[0]
    for W in weights[1:]:
        P = W @ P
    return P


def theta_oracle(weights, alphas):
    """Literal sum over every cut set, with SVD norms."""
    m = len(weights)
    total = 0.0
    for mask in itertools.product((0, 1), repeat=m - 1):
        b = 1.0
        for a, cut in zip(alphas, mask):
            b *= a if cut else 1.0 - a
        cuts = [0] + [j + 1 for j, c in enumerate(mask) if c] + [m]
        s = 1.0
        for lo, hi in zip(cuts, cuts[1:]):
            s *= spec_norm(chain(weights[lo:hi]))
        total += b * s
    return total


def vartheta_oracle(weights, alphas, matrix_norm=spec_norm):
    """Max of ``matrix_norm`` over every endpoint pattern, without eliminating any coordinate."""
    hidden = [W.shape[0] for W in weights[:-1]]
    best = -np.inf
    for bits in itertools.product((0, 1), repeat=sum(hidden)):
        P = weights[0]
        pos = 0
        for i, n in enumerate(hidden):
            d = np.array([1.0 if b else 1.0 - 2.0 * alphas[i] for b in bits[pos:pos + n]])
            pos += n
            P = weights[i + 1] @ (d[:, None] * P)
        best = max(best, matrix_norm(P))
    return best


def l1_to_norm_oracle(nin, nout):
    """``||A||_{nin -> nout}`` for an l1-type input by enumerating the unit-ball vertices."""
    def f(A):
        n = A.shape[1]
        w = np.asarray(nin.weights) if nin.weights else np.ones(n)
        best = 0.0
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0 / w[j]
            best = max(best, nout.norm(A @ e), nout.norm(-A @ e))
        return best
    return f


def mu_condition(weights):
    """Brute-force sign condition on path products ending at each output coordinate."""
    dims = [weights[0].shape[1]] + [W.shape[0] for W in weights]
    m = len(weights)
    for km in range(dims[-1]):
        signs = set()
        for path in itertools.product(*[range(n) for n in dims[:-1]]):
            ks = list(path) + [km]
            mu = 1.0
            for i in range(m):
                mu *= weights[i][ks[i + 1], ks[i]]
            if mu != 0.0:
                signs.add(mu > 0)
        if len(signs) > 1:
            return False
    return True
