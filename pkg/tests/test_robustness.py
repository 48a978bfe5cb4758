import math

import numpy as np
import pytest

from conftest import I2, Z, cvx_robustness, pair, triple, unbiased
from steerjm.assemblage import MeasurementAssemblage, random_povm, random_projective, random_unitary, validate
from steerjm.robustness import (
    apply_heisenberg,
    channel_monotonicity_check,
    depolarizing_kraus,
    half_bound_check,
    incompatibility_robustness,
    incompatibility_weight,
    mix_with_noise,
    random_unital_channel,
    unitary_kraus,
    white_noise_robustness,
)
from steerjm.sdp import deterministic_strategies, jm_feasible, trivial_noise
from steerjm.semap import reconstruct

IR_PAIR = 3 - 2 * math.sqrt(2)
LAMBDA_W_PAIR = 1 - 1 / math.sqrt(2)


def cvx_white(m, bias=0.0):
    """Independent oracle: least lambda with (1 - lambda) M + lambda p I jointly measurable."""
    cp = pytest.importorskip("cvxpy")
    d = m.dim
    strat = deterministic_strategies(m.outcomes_per_setting)
    nl = strat.response.shape[2]
    weights = trivial_noise(m.outcomes_per_setting, bias)
    g = [cp.Variable((d, d), hermitian=True) for _ in range(nl)]
    lam = cp.Variable()
    cons = [x >> 0 for x in g]
    for (x, a), op in m.items():
        rec = sum(strat.response[x, a, k] * g[k] for k in range(nl))
        cons.append(rec == (1 - lam) * op + lam * weights[x][a] * np.eye(d))
    prob = cp.Problem(cp.Minimize(lam), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(lam.value)


def cvx_weight(m):
    """Independent oracle: 1 - largest s with M - s O >= 0 for some jointly measurable O."""
    cp = pytest.importorskip("cvxpy")
    d = m.dim
    strat = deterministic_strategies(m.outcomes_per_setting)
    nl = strat.response.shape[2]
    g = [cp.Variable((d, d), hermitian=True) for _ in range(nl)]
    s = cp.Variable()
    cons = [x >> 0 for x in g] + [sum(g) == s * np.eye(d)]
    for (x, a), op in m.items():
        cons.append(op - sum(strat.response[x, a, k] * g[k] for k in range(nl)) >> 0)
    prob = cp.Problem(cp.Maximize(s), cons)
    prob.solve(solver=cp.CLARABEL)
    return 1 - float(s.value)


def test_ir_sharp_pair():
    rep = incompatibility_robustness(pair(1.0))
    assert rep.kind == "general"
    assert rep.value == pytest.approx(IR_PAIR, abs=1e-7)
    assert rep.mixing_weight == pytest.approx((2 - math.sqrt(2)) / 4, abs=1e-7)


def test_ir_noise_and_joint_reconstruct():
    m = pair(1.0, theta=1.0)
    rep = incompatibility_robustness(m)
    t = rep.value
    assert rep.info["noise_violations"] == []
    assert rep.joint.violations() == []
    # (M + t N)/(1 + t) are the marginals of the joint observable
    marg = rep.joint.marginals()
    for (x, a), op in m.items():
        assert np.allclose((op + t * rep.noise[x, a]) / (1 + t), marg[x, a], atol=1e-7)


def test_ir_triple_exceeds_pair():
    assert incompatibility_robustness(triple(1.0)).value > incompatibility_robustness(pair(1.0)).value + 1e-3


def test_ir_zero_on_jm_input():
    assert incompatibility_robustness(pair(0.6)).value == pytest.approx(0.0, abs=1e-7)


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_ir_matches_cvxpy(rng):
    for _ in range(3):
        m = MeasurementAssemblage([random_projective(3, 2, rng), random_povm(3, 3, rng)])
        assert incompatibility_robustness(m).value == pytest.approx(max(cvx_robustness(m), 0), abs=1e-6)


def test_ir_zero_iff_jm(rng):
    for eta in (0.5, 0.69, 0.73, 0.9):
        m = pair(eta, theta=1.3)
        rep = incompatibility_robustness(m)
        assert (rep.value <= 1e-6) is jm_feasible(m).feasible


def test_white_noise_sharp_pair():
    rep = white_noise_robustness(pair(1.0))
    assert rep.value == pytest.approx(LAMBDA_W_PAIR, abs=1e-7)
    assert white_noise_robustness(pair(1.0), method="sdp").value == pytest.approx(LAMBDA_W_PAIR, abs=1e-7)
    assert white_noise_robustness(pair(0.6)).value == 0.0


def test_white_noise_bias_against_oracle():
    m = pair(1.0, theta=1.1)
    prev = 0.0
    for b in (0.0, 0.5, 0.8, 1.0):
        val = white_noise_robustness(m, bias=b).value
        assert val == pytest.approx(cvx_white(m, b), abs=1e-6)
        assert val >= prev - 1e-7
        prev = val
    assert white_noise_robustness(pair(1.0), bias=1.0).value == pytest.approx(math.sqrt(2) - 1, abs=1e-6)


def test_white_noise_methods_agree(rng):
    for theta in (0.4, 1.0, 1.5):
        m = pair(1.0, theta)
        a = white_noise_robustness(m).value
        b = white_noise_robustness(m, method="sdp").value
        assert a == pytest.approx(b, abs=2e-7)


def test_white_noise_rejects_bad_input():
    with pytest.raises(ValueError):
        white_noise_robustness(pair(1.0), bias=1.5)
    with pytest.raises(ValueError):
        white_noise_robustness(pair(1.0), method="simplex")


def test_mix_with_noise_is_valid():
    m = mix_with_noise(pair(1.0), 0.3, bias=0.8)
    assert validate(m) == []
    assert np.allclose(m[0, 0], 0.7 * (I2 + Z) / 2 + 0.3 * 0.9 * I2)


def test_weight_sharp_pairs_are_maximal(rng):
    assert incompatibility_weight(pair(1.0)).value == pytest.approx(1.0, abs=1e-7)
    for _ in range(5):
        m = MeasurementAssemblage([random_projective(2, 2, rng), random_projective(2, 2, rng)])
        assert incompatibility_weight(m).value == pytest.approx(1.0, abs=1e-6)


def test_weight_rank_one_qutrit(rng):
    # numerical check only: rank-1 effects leave no room for a compatible part
    m = MeasurementAssemblage([random_projective(3, 3, rng), random_projective(3, 3, rng)])
    assert incompatibility_weight(m).value == pytest.approx(1.0, abs=1e-6)


def test_weight_smoothed_pair_decomposes():
    m = pair(0.9)
    rep = incompatibility_weight(m)
    w = rep.value
    assert 0 < w < 1
    assert w == pytest.approx(cvx_weight(m), abs=1e-6)
    assert rep.info["reconstruction"] <= 1e-7
    assert rep.joint.violations() == [] and validate(rep.noise) == []
    marg = rep.joint.marginals()
    for (x, a), op in m.items():
        assert np.allclose((1 - w) * marg[x, a] + w * rep.noise[x, a], op, atol=1e-7)


def test_weight_zero_on_jm_input():
    assert incompatibility_weight(pair(0.5)).value == pytest.approx(0.0, abs=1e-7)


def test_channel_identity_and_depolarizing():
    m = pair(1.0)
    before, after = channel_monotonicity_check(m, [np.eye(2)])
    assert after == pytest.approx(before, abs=1e-9)
    for p in (0.1, 0.3):
        before, after = channel_monotonicity_check(m, depolarizing_kraus(p))
        assert after < before
    # depolarizing acts on unbiased qubit effects as a visibility 1 - p
    assert np.allclose(apply_heisenberg(m, depolarizing_kraus(0.3))[0, 0], unbiased([0, 0, 0.7])[0])


def test_channel_unitary_invariance(rng):
    m = MeasurementAssemblage([random_projective(3, 2, rng), random_povm(3, 2, rng)])
    before, after = channel_monotonicity_check(m, unitary_kraus(random_unitary(3, rng)))
    assert after == pytest.approx(before, abs=1e-7)


def test_channel_random_unital(rng):
    m = triple(1.0)
    for _ in range(5):
        before, after = channel_monotonicity_check(m, random_unital_channel(2, 3, rng))
        assert after <= before + 1e-6


def test_non_unital_channel_rejected():
    kraus = [np.array([[1, 0], [0, 0]]), np.array([[0, 0], [1, 0]])]
    with pytest.raises(ValueError):
        channel_monotonicity_check(pair(1.0), kraus)
    with pytest.raises(ValueError):
        apply_heisenberg(pair(1.0), [np.eye(3)])


def test_all_values_unitarily_invariant(rng):
    m = pair(1.0, theta=0.9)
    u = random_unitary(2, rng)
    turned = m.map(lambda op: u.conj().T @ op @ u)
    assert incompatibility_robustness(turned).value == pytest.approx(incompatibility_robustness(m).value, abs=1e-7)
    assert white_noise_robustness(turned).value == pytest.approx(white_noise_robustness(m).value, abs=2e-7)
    assert incompatibility_weight(turned).value == pytest.approx(incompatibility_weight(m).value, abs=1e-7)


def test_half_bound():
    lam_g, lam_w = half_bound_check(pair(1.0))
    assert lam_g == pytest.approx((2 - math.sqrt(2)) / 4, abs=1e-7)
    assert lam_w == pytest.approx(LAMBDA_W_PAIR, abs=1e-7)
    lam_g, lam_w = half_bound_check(pair(1.0, theta=math.pi / 3))
    assert lam_g <= lam_w / 2 + 1e-7
    assert half_bound_check(pair(0.5)) == (pytest.approx(0.0, abs=1e-7), 0.0)
    with pytest.raises(ValueError):
        half_bound_check(MeasurementAssemblage([[0.7 * I2, 0.3 * I2]]))


def _unnormalized_ir(m):
    cp = pytest.importorskip("cvxpy")
    d = m.dim
    strat = deterministic_strategies(m.outcomes_per_setting)
    nl = strat.response.shape[2]
    g = [cp.Variable((d, d), hermitian=True) for _ in range(nl)]
    cons = [x >> 0 for x in g]
    for (x, a), op in m.items():
        cons.append(sum(strat.response[x, a, k] * g[k] for k in range(nl)) - op >> 0)
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(sum(g))) / d), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value - 1


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_normalization_constraint(rng):
    # the named qubit examples do not depend on the parent normalization
    for m in (pair(1.0), pair(1.0, theta=1.0), pair(0.9, theta=0.6), triple(1.0)):
        assert incompatibility_robustness(m).value == pytest.approx(_unnormalized_ir(m), abs=1e-6)
    # but without it the program is a strict relaxation for generic qutrit POVMs
    gaps = []
    for _ in range(6):
        m = MeasurementAssemblage([random_povm(3, 2, rng), random_povm(3, 3, rng)])
        gaps.append(incompatibility_robustness(m).value - _unnormalized_ir(m))
    assert min(gaps) >= -1e-6
    assert max(gaps) > 1e-3
