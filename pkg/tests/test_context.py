import numpy as np
import pytest

from ctxrl import nets
from ctxrl.context import (
    Arch,
    ContextModel,
    Mode,
    Strategy,
    compose_policy_input,
    latent_dim_for,
)
from ctxrl.replay import ContextSet
from ctxrl.sac import ContractMismatch, SACConfig, SACLearner
from ctxrl.spaces import ConfigError
from ctxrl.tensor import Tape

OBS, ACT, CTX = 3, 1, 1


def make_model(strategy=Strategy.GT, arch=Arch.FF_AVG, ctx=CTX, latent=None, seed=0):
    return ContextModel(
        strategy, arch, OBS, ACT, ctx, latent, np.random.default_rng(seed)
    )


def make_set(rng, n=6, cid=0):
    s = rng.standard_normal((n, OBS))
    a = rng.standard_normal((n, ACT))
    s2 = rng.standard_normal((n, OBS))
    return ContextSet(cid, s, a, s2)


def test_compose_modes():
    assert np.array_equal(
        compose_policy_input(np.array([1.0, 2.0]), Mode.AGNOSTIC, None), [1.0, 2.0]
    )
    assert np.array_equal(
        compose_policy_input(np.array([1.0, 2.0]), Mode.ORACLE, np.array([3.0])),
        [1.0, 2.0, 3.0],
    )
    est = compose_policy_input(
        np.zeros(7), Mode.ESTIMATED, np.zeros(latent_dim_for(Strategy.FP, 3, None))
    )
    assert est.shape == (7 + 4,)
    est5 = compose_policy_input(
        np.zeros(7), Mode.ESTIMATED, np.zeros(latent_dim_for(Strategy.FP, 4, None))
    )
    assert est5.shape == (7 + 5,)


def test_compose_contract_errors():
    with pytest.raises(ContractMismatch):
        compose_policy_input(np.zeros(3), Mode.ORACLE, None)
    with pytest.raises(ContractMismatch):
        compose_policy_input(np.zeros(3), Mode.AGNOSTIC, np.zeros(1))


def test_latent_dim_rules():
    assert latent_dim_for(Strategy.GT, 3, None) == 3
    assert latent_dim_for(Strategy.FP, 3, None) == 4
    assert latent_dim_for(Strategy.PL, 1, None) == 2
    for d in range(2, 7):  # ablation range
        assert latent_dim_for(Strategy.PL, 3, d) == d
    with pytest.raises(ConfigError):
        latent_dim_for(Strategy.GT, 3, 5)


def test_ff_avg_permutation_invariant():
    model = make_model(arch=Arch.FF_AVG, strategy=Strategy.GT)
    rng = np.random.default_rng(2)
    cset = make_set(rng, n=8)
    perm = np.random.default_rng(3).permutation(8)
    shuffled = ContextSet(0, cset.s[perm], cset.a[perm], cset.s2[perm])
    e1 = model.estimate(cset)
    e2 = model.estimate(shuffled)
    assert np.allclose(e1, e2, atol=1e-12)


def test_ff_avg_identical_transitions_equal_single_encoding():
    model = make_model(arch=Arch.FF_AVG)
    rng = np.random.default_rng(4)
    one = make_set(rng, n=1)
    repeated = ContextSet(
        0,
        np.repeat(one.s, 10, axis=0),
        np.repeat(one.a, 10, axis=0),
        np.repeat(one.s2, 10, axis=0),
    )
    assert np.allclose(model.estimate(one), model.estimate(repeated), atol=1e-12)


def test_zero_weight_lstm_zero_estimate():
    model = make_model(arch=Arch.LSTM)
    for k in model.estimator.params:
        model.estimator.params[k][...] = 0.0
    cset = make_set(np.random.default_rng(5), n=7)
    assert np.all(model.estimate(cset) == 0.0)


def test_empty_marker_gives_zero_vector():
    model = make_model(strategy=Strategy.FP)
    est = model.estimate(ContextSet.empty(3))
    assert est.shape == (model.latent_dim,)
    assert np.all(est == 0.0)


def _live_estimate(model, sets):
    tape = Tape()
    evars = nets.leaves(tape, model.estimator)
    c_hat = model.estimate_batch(tape, evars, sets)
    return tape, evars, c_hat


def test_gt_perfect_estimate_zero_loss_zero_gradients():
    model = make_model(strategy=Strategy.GT)
    for k in model.estimator.params:
        model.estimator.params[k][...] = 0.0
    model.estimator.params["b2"][...] = 0.4  # constant output 0.4
    rng = np.random.default_rng(6)
    sets = rng.standard_normal((5, 4, 2 * OBS + ACT))
    ctx = np.full((5, CTX), 0.4)
    tape, evars, c_hat = _live_estimate(model, sets)
    before = {k: v.copy() for k, v in model.estimator.params.items()}
    loss = model.supervision_update(
        tape, evars, c_hat, np.zeros((5, OBS)), np.zeros((5, ACT)),
        np.zeros((5, OBS)), ctx,
    )
    assert loss == 0.0
    for k in before:  # zero gradient: Adam leaves parameters unchanged
        assert np.array_equal(model.estimator.params[k], before[k])


def test_gt_scalar_loss_arithmetic():
    model = make_model(strategy=Strategy.GT)
    for k in model.estimator.params:
        model.estimator.params[k][...] = 0.0
    model.estimator.params["b2"][...] = 0.2
    sets = np.zeros((1, 3, 2 * OBS + ACT))
    ctx = np.array([[0.5]])
    tape, evars, c_hat = _live_estimate(model, sets)
    loss = model.supervision_update(
        tape, evars, c_hat, np.zeros((1, OBS)), np.zeros((1, ACT)),
        np.zeros((1, OBS)), ctx,
    )
    assert loss == pytest.approx(0.09)


def test_fp_perfect_predictor_zero_loss():
    model = make_model(strategy=Strategy.FP)
    for k in model.predictor.params:
        model.predictor.params[k][...] = 0.0
    model.predictor.params["b2"][...] = [1.0, -2.0, 0.5]
    rng = np.random.default_rng(8)
    sets = rng.standard_normal((4, 3, 2 * OBS + ACT))
    s2 = np.tile([1.0, -2.0, 0.5], (4, 1))
    tape, evars, c_hat = _live_estimate(model, sets)
    loss = model.supervision_update(
        tape, evars, c_hat, rng.standard_normal((4, OBS)),
        rng.standard_normal((4, ACT)), s2, np.zeros((4, CTX)),
    )
    assert loss == pytest.approx(0.0, abs=1e-24)


def test_fp_loss_decreases_over_200_adam_steps():
    model = make_model(strategy=Strategy.FP, arch=Arch.FF_AVG, seed=1)
    rng = np.random.default_rng(9)
    sets = rng.standard_normal((16, 5, 2 * OBS + ACT))
    s = rng.standard_normal((16, OBS))
    a = rng.standard_normal((16, ACT))
    s2 = rng.standard_normal((16, OBS)) * 0.1
    first = last = None
    for i in range(200):
        tape, evars, c_hat = _live_estimate(model, sets)
        loss = model.supervision_update(
            tape, evars, c_hat, s, a, s2, np.zeros((16, CTX))
        )
        if first is None:
            first = loss
        last = loss
    assert last < first * 0.5


def _routing_setup(strategy, seed=0):
    rng = np.random.default_rng(seed)
    model = ContextModel(strategy, Arch.FF_AVG, OBS, ACT, CTX, None, rng)
    lrn = SACLearner(
        OBS, ACT, 2.0, model.latent_dim,
        SACConfig(hidden=(8, 8), batch_size=4), rng,
    )
    b_rng = np.random.default_rng(100)
    batch = dict(
        s=b_rng.standard_normal((4, OBS)),
        a=b_rng.uniform(-1, 1, (4, ACT)),
        r=b_rng.standard_normal(4),
        s2=b_rng.standard_normal((4, OBS)),
        done=np.zeros(4),
        ctx=b_rng.uniform(-1, 1, (4, CTX)),
        sets=b_rng.standard_normal((4, 5, 2 * OBS + ACT)),
    )
    return model, lrn, batch


def _estimator_grad_mass_from_actor_loss(strategy):
    model, lrn, b = _routing_setup(strategy)
    tape = Tape()
    evars = nets.leaves(tape, model.estimator)
    c_hat = model.estimate_batch(tape, evars, b["sets"])
    live = c_hat if strategy == Strategy.PL else None
    losses = lrn.update(
        b["s"], b["a"], b["r"], b["s2"], b["done"],
        rng=np.random.default_rng(1), ctx=c_hat.value, live_ctx=live, tape=tape,
    )
    return sum(
        float(np.abs(tape.grad(losses.actor_grads, v)).sum())
        for v in evars.values()
    )


def test_gradient_isolation_gt_fp_vs_pl():
    assert _estimator_grad_mass_from_actor_loss(Strategy.GT) == 0.0
    assert _estimator_grad_mass_from_actor_loss(Strategy.FP) == 0.0
    assert _estimator_grad_mass_from_actor_loss(Strategy.PL) > 0.0


def test_fp_update_moves_only_estimator_and_predictor():
    model, lrn, b = _routing_setup(Strategy.FP)
    tape = Tape()
    evars = nets.leaves(tape, model.estimator)
    c_hat = model.estimate_batch(tape, evars, b["sets"])
    actor_before = {k: v.copy() for k, v in lrn.actor.params.items()}
    critic_before = {k: v.copy() for k, v in lrn.critic1.params.items()}
    est_before = {k: v.copy() for k, v in model.estimator.params.items()}
    pred_before = {k: v.copy() for k, v in model.predictor.params.items()}
    model.supervision_update(
        tape, evars, c_hat, b["s"], b["a"], b["s2"], b["ctx"]
    )
    assert any(
        not np.array_equal(model.estimator.params[k], est_before[k])
        for k in est_before
    )
    assert any(
        not np.array_equal(model.predictor.params[k], pred_before[k])
        for k in pred_before
    )
    assert all(
        np.array_equal(lrn.actor.params[k], actor_before[k]) for k in actor_before
    )
    assert all(
        np.array_equal(lrn.critic1.params[k], critic_before[k])
        for k in critic_before
    )


def test_pl_with_detached_estimates_is_contract_error():
    model, lrn, b = _routing_setup(Strategy.PL)
    tape = Tape()
    evars = nets.leaves(tape, model.estimator)
    c_hat = model.estimate_batch(tape, evars, b["sets"])
    # actor loss computed WITHOUT routing the live estimate
    losses = lrn.update(
        b["s"], b["a"], b["r"], b["s2"], b["done"],
        rng=np.random.default_rng(1), ctx=c_hat.value, live_ctx=None, tape=tape,
    )
    with pytest.raises(ContractMismatch):
        model.supervision_update(
            tape, evars, c_hat, b["s"], b["a"], b["s2"], b["ctx"],
            actor_loss_grads=losses.actor_grads, actor_loss_value=losses.actor,
        )
    with pytest.raises(ContractMismatch):
        model.supervision_update(
            tape, evars, c_hat, b["s"], b["a"], b["s2"], b["ctx"],
            actor_loss_grads=None, actor_loss_value=0.0,
        )
