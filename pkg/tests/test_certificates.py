import itertools
import math

import numpy as np
import pytest

from lipcert import activations as acts
from lipcert.certificates import (
    CompositeNorms,
    CertifyOptions,
    REPORT_FIELDS,
    absolute_bound,
    beta,
    certify,
    linear_bound,
    pattern_count,
    positive_collapse_bound,
    positivity_check,
    product_bound,
    sigma,
    theta_combinatorial,
    theta_firm,
    theta_recursive,
    vartheta_exhaustive,
    vartheta_sample_lower,
)
from lipcert.errors import BudgetExceededError, InvalidInputError, NotApplicableError, UnsupportedNormError
from lipcert.experiments import tanh_toy_network
from lipcert.linalg import NormSpec
from lipcert.network import Network

from helpers import (
    chain,
    l1_to_norm_oracle,
    mu_condition,
    random_enumerable_net,
    random_net,
    spec_norm,
    theta_oracle,
    vartheta_oracle,
)

L1, LINF = NormSpec(1), NormSpec(math.inf)


def identity_net(m, n=3):
    return Network.from_weights([np.eye(n)] * m)


# ---------------------------------------------------------------- product / linear


def test_identity_bounds():
    net = identity_net(4)
    assert product_bound(net) == 1.0 and linear_bound(net) == 1.0


def test_toy_product_and_linear():
    net = tanh_toy_network()
    assert product_bound(net) == pytest.approx(66.29, abs=0.01)
    assert linear_bound(net) == pytest.approx(54.72, abs=0.01)


def test_product_dominates_linear(rng):
    for _ in range(50):
        net = random_net(rng, int(rng.integers(1, 6)))
        assert linear_bound(net) <= product_bound(net) * (1 + 1e-12)


# ---------------------------------------------------------------- beta / sigma


def test_beta_examples():
    assert beta([0.5], ()) == 0.5 and beta([0.5], (1,)) == 0.5
    ones = [1.0, 1.0, 1.0]
    for k in range(4):
        for J in itertools.combinations((1, 2, 3), k):
            assert beta(ones, J) == (1.0 if J == (1, 2, 3) else 0.0)


def test_beta_sums_to_one(rng):
    for m in range(1, 12):
        a = rng.uniform(0, 1, m - 1)
        total = sum(beta(a, J) for k in range(m) for J in itertools.combinations(range(1, m), k))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_beta_index_errors():
    with pytest.raises(InvalidInputError):
        beta([0.5, 0.5], (3,))
    with pytest.raises(InvalidInputError):
        beta([0.5, 0.5], (2, 1))


def test_sigma_examples(rng):
    net = random_net(rng, 3, min_dim=2)
    W = net.weights
    norms = CompositeNorms.of(net)
    assert sigma(norms, ()) == pytest.approx(spec_norm(W[2] @ W[1] @ W[0]), rel=1e-12)
    assert sigma(norms, (1, 2)) == pytest.approx(math.prod(spec_norm(w) for w in W), rel=1e-12)
    assert sigma(norms, (2,)) == pytest.approx(spec_norm(W[2]) * spec_norm(W[1] @ W[0]), rel=1e-12)


# ---------------------------------------------------------------- theta


def test_theta3_firm_formula(rng):
    net = random_net(rng, 3, alphas=[0.5] * 3, min_dim=2)
    W1, W2, W3 = net.weights
    n = spec_norm
    expected = 0.25 * (n(W3 @ W2 @ W1) + n(W3 @ W2) * n(W1) + n(W3) * n(W2 @ W1) + n(W3) * n(W2) * n(W1))
    assert theta_combinatorial(net) == pytest.approx(expected, rel=1e-12)
    assert theta_firm(net) == pytest.approx(expected, rel=1e-12)


def test_toy_theta():
    assert theta_recursive(tanh_toy_network()) == pytest.approx(60.50, abs=0.01)


def test_theta_matches_oracle(rng):
    for _ in range(60):
        net = random_net(rng, int(rng.integers(1, 7)))
        oracle = theta_oracle(net.weights, net.hidden_alphas)
        assert theta_combinatorial(net) == pytest.approx(oracle, rel=1e-10)
        assert theta_recursive(net) == pytest.approx(oracle, rel=1e-10)


def test_theta_special_cases(rng):
    for _ in range(20):
        m = int(rng.integers(1, 7))
        net = random_net(rng, m)
        assert theta_recursive(net, alphas=[0.0] * (m - 1)) == pytest.approx(linear_bound(net), rel=1e-12)
        assert theta_recursive(net, alphas=[1.0] * (m - 1)) == pytest.approx(product_bound(net), rel=1e-12)
        assert theta_combinatorial(net, alphas=[0.0] * (m - 1)) == pytest.approx(linear_bound(net), rel=1e-12)
        assert theta_combinatorial(net, alphas=[1.0] * (m - 1)) == pytest.approx(product_bound(net), rel=1e-12)


def test_theta_m1_is_norm(rng):
    net = random_net(rng, 1, min_dim=2)
    assert theta_recursive(net) == theta_combinatorial(net) == pytest.approx(spec_norm(net.weights[0]))


def test_theta_firm_precondition(rng):
    with pytest.raises(NotApplicableError):
        theta_firm(random_net(rng, 3, alphas=[0.5, 0.4, 0.5]))
    assert theta_firm(identity_net(5)) == 1.0


def test_theta_budget(rng):
    net = random_net(rng, 12, max_dim=2, alphas=[0.3] * 12)
    with pytest.raises(BudgetExceededError, match="theta_recursive"):
        theta_combinatorial(net, budget=2**10)
    assert theta_combinatorial(net, budget=2**11) == pytest.approx(theta_recursive(net), rel=1e-12)


# ---------------------------------------------------------------- vartheta


def test_toy_vartheta():
    res = vartheta_exhaustive(tanh_toy_network())
    assert res.exact and res.patterns == 4
    assert res.value == pytest.approx(59.54, abs=0.01)
    lower = vartheta_sample_lower(tanh_toy_network(), 64)
    assert not lower.exact and lower.value == res.value


def test_vartheta_identity_activations(rng):
    net = random_net(rng, 3, alphas=[0.0] * 3)
    res = vartheta_exhaustive(net)
    assert res.patterns == 1
    assert res.value == pytest.approx(linear_bound(net), rel=1e-12)


def test_vartheta_matches_oracle(rng):
    for _ in range(40):
        net = random_enumerable_net(rng, m_max=4, hidden_budget=10)
        res = vartheta_exhaustive(net)
        oracle = vartheta_oracle(net.weights, net.hidden_alphas)
        assert res.value == pytest.approx(oracle, rel=1e-10)
        # the reported pattern reaches the value
        P = net.weights[0]
        for d, W in zip(res.pattern.scales, net.weights[1:]):
            P = W @ (np.asarray(d)[:, None] * P)
        assert spec_norm(P) == pytest.approx(res.value, rel=1e-10)


def test_vartheta_eliminates_zero_alpha_layers(rng):
    net = random_net(rng, 3, dims=[3, 4, 5, 2], alphas=[0.0, 0.5, 0.5])
    assert pattern_count(net) == 2**5
    assert vartheta_exhaustive(net).value == pytest.approx(
        vartheta_oracle(net.weights, net.hidden_alphas), rel=1e-10)


@pytest.mark.parametrize("nin, nout", [(L1, LINF), (L1, NormSpec(1, (1.0, 2.0, 0.5))),
                                       (NormSpec(1, (0.5, 3.0, 1.0, 2.0)), NormSpec(2)),
                                       (NormSpec(1), NormSpec(3))])
def test_vartheta_mixed_norms(rng, nin, nout):
    for _ in range(10):
        net = random_net(rng, 3, dims=[4, 3, 4, 3])
        oracle = vartheta_oracle(net.weights, net.hidden_alphas, l1_to_norm_oracle(nin, nout))
        assert vartheta_exhaustive(net, nin, nout).value == pytest.approx(oracle, rel=1e-10)


def test_vartheta_worker_independence(rng):
    for _ in range(5):
        net = random_net(rng, 3, dims=[8, 8, 8, 3])
        ref = vartheta_exhaustive(net, workers=1)
        for w in (2, 8):
            res = vartheta_exhaustive(net, workers=w)
            assert res.value == ref.value and res.pattern == ref.pattern


def test_vartheta_worker_independence_many_blocks(rng, monkeypatch):
    import lipcert.certificates as cert
    monkeypatch.setattr(cert, "BLOCK_FLOATS", 1 << 10)
    net = random_net(rng, 3, dims=[8, 7, 7, 2])
    ref = vartheta_exhaustive(net, workers=1)
    for w in (2, 3, 8):
        res = vartheta_exhaustive(net, workers=w)
        assert res.value == ref.value and res.pattern == ref.pattern


def test_sample_lower_below_exhaustive(rng):
    for _ in range(30):
        net = random_enumerable_net(rng)
        exact = vartheta_exhaustive(net).value
        lower = vartheta_sample_lower(net, trials=8, seed=int(rng.integers(1000))).value
        assert lower <= exact
        assert lower >= linear_bound(net) - 1e-10


def test_vartheta_budget_and_applicability(rng):
    net = random_net(rng, 3, dims=[3, 8, 8, 2], alphas=[0.5] * 3)
    with pytest.raises(BudgetExceededError):
        vartheta_exhaustive(net, budget=2**15)
    sm = Network.from_weights([np.eye(3), np.eye(3)], [acts.sort_mix(3, 0.5), acts.builtin("relu")])
    with pytest.raises(NotApplicableError, match="non-separable"):
        vartheta_exhaustive(sm)
    with pytest.raises(NotApplicableError):
        vartheta_sample_lower(sm)


def test_budget_from_environment(rng, monkeypatch):
    net = random_net(rng, 3, dims=[3, 4, 4, 2], alphas=[0.5] * 3)
    monkeypatch.setenv("LIPCERT_BUDGET", "100")
    with pytest.raises(BudgetExceededError):
        vartheta_exhaustive(net)
    monkeypatch.setenv("LIPCERT_BUDGET", "256")
    assert vartheta_exhaustive(net).patterns == 256


def test_vartheta_sandwich(rng):
    for _ in range(50):
        net = random_enumerable_net(rng)
        v = vartheta_exhaustive(net).value
        assert linear_bound(net) <= v * (1 + 1e-9)
        assert v <= theta_recursive(net) * (1 + 1e-9)


# ---------------------------------------------------------------- sign structure


def test_positivity_examples():
    res = positivity_check(Network.from_weights([np.ones((2, 3)), np.ones((1, 2))]))
    assert res.holds and all(all(c == 1 for c in chi) for chi in res.signs)
    assert not positivity_check(Network.from_weights([np.array([[1.0, -1.0]])])).holds


def sign_factorised(rng, dims, zeros=0.0):
    chis = [np.full(dims[0], rng.choice([-1.0, 1.0]))] + [rng.choice([-1.0, 1.0], n) for n in dims[1:]]
    weights = []
    for i in range(len(dims) - 1):
        A = rng.uniform(0.1, 2.0, (dims[i + 1], dims[i])) * (rng.uniform(size=(dims[i + 1], dims[i])) >= zeros)
        weights.append(chis[i + 1][:, None] * A * chis[i][None, :])
    return weights


def test_positivity_witness_reproduces_signs(rng):
    for _ in range(50):
        dims = rng.integers(1, 5, size=int(rng.integers(2, 5)))
        weights = sign_factorised(rng, dims)
        res = positivity_check(Network.from_weights(weights))
        assert res.holds
        for i, W in enumerate(weights, start=1):
            chi_out, chi_in = np.array(res.signs[i]), np.array(res.signs[i - 1])
            np.testing.assert_array_equal(W, chi_out[:, None] * np.abs(W) * chi_in[None, :])


def test_positivity_agrees_with_mu_oracle_dense(rng):
    for k in range(200):
        m = int(rng.integers(1, 4))
        dims = rng.integers(1, 4, size=m + 1)
        if k % 2:
            weights = sign_factorised(rng, dims)
        else:
            weights = [rng.standard_normal((dims[i + 1], dims[i])) for i in range(m)]
        assert positivity_check(Network.from_weights(weights)).holds == mu_condition(weights)


def test_positivity_implies_mu_with_zeros(rng):
    for k in range(200):
        m = int(rng.integers(1, 4))
        dims = rng.integers(1, 4, size=m + 1)
        if k % 2:
            weights = sign_factorised(rng, dims, zeros=0.3)
        else:
            weights = [rng.standard_normal((dims[i + 1], dims[i])) * (rng.uniform(size=(dims[i + 1], dims[i])) > 0.3)
                       for i in range(m)]
        if positivity_check(Network.from_weights(weights)).holds:
            assert mu_condition(weights)


def test_positive_collapse_matches_exhaustive(rng):
    for _ in range(30):
        net = random_enumerable_net(rng, positive=True)
        assert positive_collapse_bound(net) == pytest.approx(vartheta_exhaustive(net).value, rel=1e-10)


def test_positive_collapse_l1_linf_vertex_oracle(rng):
    for _ in range(20):
        net = random_enumerable_net(rng, positive=True)
        oracle = l1_to_norm_oracle(L1, LINF)(chain(net.weights))
        assert positive_collapse_bound(net, L1, LINF) == pytest.approx(oracle, rel=1e-12)
        assert vartheta_exhaustive(net, L1, LINF).value == pytest.approx(oracle, rel=1e-10)


def test_positive_collapse_rules(rng):
    assert positive_collapse_bound(identity_net(3)) == 1.0
    with pytest.raises(NotApplicableError):
        positive_collapse_bound(Network.from_weights([np.array([[1.0, -1.0]])]))


def test_absolute_bound_examples(rng):
    net = random_enumerable_net(rng, positive=True)
    assert absolute_bound(net) == pytest.approx(linear_bound(net), rel=1e-12)
    diag = Network.from_weights([np.diag([1.0, -1.0, 1.0]), np.diag([-1.0, -1.0, 1.0])])
    assert absolute_bound(diag) == 1.0


def test_absolute_bound_dominates_vartheta(rng):
    for _ in range(50):
        net = random_enumerable_net(rng)
        assert vartheta_exhaustive(net).value <= absolute_bound(net) + 1e-10


# ---------------------------------------------------------------- certify


def test_certify_toy():
    rep = certify(tanh_toy_network())
    assert rep.certified == pytest.approx(59.54, abs=0.01)
    assert rep.certified == rep.vartheta and rep.vartheta_exact
    assert rep.linear_lower == pytest.approx(54.72, abs=0.01)
    assert rep.theta == pytest.approx(60.50, abs=0.01)
    assert rep.product_bound == pytest.approx(66.29, abs=0.01)
    assert tuple(rep.to_dict()) == REPORT_FIELDS


def test_certify_identity():
    rep = certify(identity_net(3))
    for key in ("product_bound", "linear_lower", "theta", "vartheta", "positive_collapse",
                "absolute_bound", "certified"):
        assert getattr(rep, key) == 1.0


def test_certify_all_alpha_one(rng):
    net = random_net(rng, 3, activation="abs", alphas=[None] * 3)
    assert net.hidden_alphas == [1.0, 1.0]
    rep = certify(net)
    assert rep.theta == pytest.approx(rep.product_bound, rel=1e-12)


def test_certify_budget_fallback(rng):
    net = random_net(rng, 3, dims=[3, 8, 8, 2], alphas=[0.5] * 3)
    rep = certify(net, CertifyOptions(vartheta_budget=1000))
    assert rep.vartheta is None and not rep.vartheta_exact
    assert rep.vartheta_sample_lower is not None
    assert "vartheta_sample_lower" not in rep.certificates()
    with pytest.raises(BudgetExceededError):
        certify(net, CertifyOptions(vartheta_budget=1000, method="vartheta"))


def test_certify_non_separable(rng):
    net = Network.from_weights([rng.standard_normal((3, 2)), rng.standard_normal((2, 3))],
                               [acts.sort_mix(3, 0.5), acts.builtin("relu")])
    rep = certify(net)
    assert rep.vartheta is None and rep.absolute_bound is None and rep.theta is not None
    assert rep.certified == min(rep.theta, rep.product_bound)
    for method in ("vartheta", "positive", "absolute"):
        with pytest.raises(NotApplicableError, match="non-separable"):
            certify(net, CertifyOptions(method=method))


def test_certify_norm_rules(rng):
    net = random_net(rng, 2, dims=[3, 3, 2])
    with pytest.raises(UnsupportedNormError):
        certify(net, CertifyOptions(norm_in=NormSpec(2), norm_out=NormSpec(1)))
    rep = certify(net, CertifyOptions(norm_in=L1, norm_out=LINF))
    assert rep.theta is None and rep.vartheta_exact
    with pytest.raises(NotApplicableError):
        certify(net, CertifyOptions(norm_in=L1, norm_out=LINF, method="theta"))


@pytest.mark.parametrize("nin, nout", [(L1, LINF), (L1, NormSpec(2)), (NormSpec(math.inf, (1.0, 2.0, 0.5)), LINF),
                                       (NormSpec(1.5), LINF), (L1, NormSpec(3, (2.0, 1.0)))])
def test_mixed_norm_certificates_are_sound(rng, nin, nout):
    for _ in range(5):
        net = random_net(rng, 3, dims=[3, 4, 4, 2], activation="tanh", alphas=[None] * 3)
        rep = certify(net, CertifyOptions(norm_in=nin, norm_out=nout))
        x = rng.standard_normal((1000, 3))
        y = x + rng.standard_normal((1000, 3))
        lhs = nout.norm(net(x) - net(y))
        rhs = nin.norm(x - y)
        for name, c in rep.certificates().items():
            assert np.all(lhs <= c * rhs * (1 + 1e-9)), name
