import numpy as np
import pytest

from worklife import actor_critic as ac
from worklife import model
from worklife.actor_critic import (ApproximatorSpec, EncodingNorms, TrainConfig, encode,
                                   init_mlp, masked_softmax, mlp_backward, mlp_forward,
                                   policy_forward, sample_actions, train, value_forward)
from worklife.model import Action, AgentState, Employment

from conftest import make_config


@pytest.fixture(scope="module")
def cfg():
    from worklife.config import ScenarioConfig
    return ScenarioConfig().validate()


NORMS = EncodingNorms()


class TestEncoding:
    def test_origin_case(self, cfg):
        feats = encode(int(Employment.EMPLOYED), 18, 0.0, 0.0, 0, 0.0, cfg, NORMS)[0]
        assert feats.tolist() == [0, 1, 0, 0, 0, 0, 0, 0]

    def test_age_endpoint(self, cfg):
        feats = encode(int(Employment.UNEMPLOYED), 70, 0.0, 0.0, 0, 0.0, cfg, NORMS)[0]
        assert feats[3] == pytest.approx(1.0)

    def test_reference_wage(self, cfg):
        feats = encode(int(Employment.UNEMPLOYED), 18, 0.0, 0.0, 0, 40_000.0, cfg, NORMS)[0]
        assert feats[4] == pytest.approx(1.0)

    def test_one_hot_sums_to_one(self, cfg):
        for e in range(3):
            feats = encode(e, 30, 5_000.0, 20_000.0, 2, 25_000.0, cfg, NORMS)[0]
            assert feats[:3].sum() == 1.0


class TestForwardPasses:
    def test_zero_params_uniform_over_feasible(self):
        params = [(np.zeros((8, 4)), np.zeros(4)), (np.zeros((4, 3)), np.zeros(3))]
        probs = policy_forward(np.ones((1, 8)), params, np.array([True, True, False]))
        assert probs[0].tolist() == [0.5, 0.5, 0.0]

    def test_single_feasible_action_gets_probability_one(self):
        rng = np.random.default_rng(0)
        params = init_mlp([8, 16, 3], rng)
        probs = policy_forward(rng.standard_normal((5, 8)), params,
                               np.array([True, False, False]))
        assert np.all(probs[:, 0] == 1.0)
        assert np.all(probs[:, 1:] == 0.0)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(1)
        params = init_mlp([8, 32, 32, 3], rng)
        probs = policy_forward(rng.standard_normal((50, 8)), params,
                               np.array([True, True, True]))
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12

    def test_zero_params_value_is_zero(self):
        params = [(np.zeros((8, 4)), np.zeros(4)), (np.zeros((4, 1)), np.zeros(1))]
        assert value_forward(np.ones((3, 8)), params).tolist() == [0.0, 0.0, 0.0]

    def test_leaky_relu_negative_slope(self):
        params = [(np.array([[-1.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1))]
        out = value_forward(np.array([[2.0]]), params, slope=0.01)
        assert out[0] == pytest.approx(-0.02)


def _fd_check(loss_and_grads, params, rng, n_coords=40, h=1e-6):
    """Max relative error of analytic vs central-difference gradients."""
    loss, grads = loss_and_grads(params)
    worst = 0.0
    for layer, (gw, gb) in enumerate(grads):
        for g, which in ((gw, 0), (gb, 1)):
            flat = params[layer][which].ravel()
            take = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
            for idx in take:
                orig = flat[idx]
                flat[idx] = orig + h
                up, _ = loss_and_grads(params)
                flat[idx] = orig - h
                dn, _ = loss_and_grads(params)
                flat[idx] = orig
                fd = (up - dn) / (2 * h)
                an = g.ravel()[idx]
                err = abs(fd - an) / max(abs(fd) + abs(an), 1e-8)
                worst = max(worst, err)
    return worst


def value_loss_and_grads(x, targets, slope):
    def fn(params):
        cache = []
        v = mlp_forward(params, x, slope, cache)[:, 0]
        loss = float(((v - targets) ** 2).mean())
        grad_out = (2.0 * (v - targets) / len(targets))[:, None]
        return loss, mlp_backward(params, cache, grad_out, slope)
    return fn


def policy_loss_and_grads(x, mask, actions, adv, ent_coef, slope):
    def fn(params):
        cache = []
        logits = mlp_forward(params, x, slope, cache)
        probs = masked_softmax(logits, mask)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(probs > 0, np.log(probs), 0.0)
        loss = float(-(logp[np.arange(len(actions)), actions] * adv).mean()
                     - ent_coef * ac._entropy(probs).mean())
        grad = ac._policy_logit_grad(probs, actions, adv, ent_coef)
        return loss, mlp_backward(params, cache, grad, slope)
    return fn


class TestGradientChecks:
    def test_value_network_gradients(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(10):
            params = init_mlp([8, 12, 12, 1], rng)
            x = rng.standard_normal((16, 8))
            targets = rng.standard_normal(16)
            worst = max(worst, _fd_check(value_loss_and_grads(x, targets, 0.01),
                                         params, rng, n_coords=12))
        assert worst < 1e-4

    def test_policy_network_gradients(self):
        rng = np.random.default_rng(43)
        worst = 0.0
        for _ in range(10):
            params = init_mlp([8, 12, 12, 3], rng)
            x = rng.standard_normal((16, 8))
            mask = np.ones((16, 3), dtype=bool)
            mask[:8, 2] = False
            actions = rng.integers(0, 2, size=16)
            adv = rng.standard_normal(16)
            worst = max(worst, _fd_check(
                policy_loss_and_grads(x, mask, actions, adv, 0.01, 0.01),
                params, rng, n_coords=12))
        assert worst < 1e-4


class TestSampling:
    def test_matches_forward_probabilities(self):
        from scipy.stats import chisquare

        rng = np.random.default_rng(2)
        probs = np.array([[0.2, 0.5, 0.3]])
        draws = sample_actions(np.repeat(probs, 10_000, axis=0), rng.random(10_000))
        counts = np.bincount(draws, minlength=3)
        assert chisquare(counts, f_exp=probs[0] * 10_000).pvalue > 0.001

    def test_single_feasible_in_both_modes(self, cfg):
        policy = _untrained_policy(cfg)
        s = AgentState(Employment.RETIRED, 66, 5_000.0, 0.0, 1, 2_000.0)
        assert policy.act(s, "sample", np.random.default_rng(0), cfg) == Action.STAY
        assert policy.act(s, "greedy", np.random.default_rng(0), cfg) == Action.STAY

    def test_greedy_deterministic(self, cfg):
        policy = _untrained_policy(cfg)
        s = AgentState(Employment.EMPLOYED, 40, 5_000.0, 20_000.0, 2, 30_000.0)
        got = {policy.act(s, "greedy", np.random.default_rng(i), cfg) for i in range(5)}
        assert len(got) == 1

    def test_unknown_mode_rejected(self, cfg):
        policy = _untrained_policy(cfg)
        s = AgentState(Employment.EMPLOYED, 40, wage=30_000.0)
        with pytest.raises(ValueError):
            policy.act(s, "argmax", np.random.default_rng(0), cfg)


def _untrained_policy(cfg, seed=0):
    rng = np.random.default_rng(seed)
    net = ApproximatorSpec()
    return ac.RlPolicy(
        policy_params=init_mlp([8, *net.policy_hidden, 3], rng),
        value_params=init_mlp([8, *net.value_hidden, 1], rng),
        norms=EncodingNorms(), net=net, model_hash=cfg.model_hash())


def _dominant_switch_config():
    # one decision: switching into work at a high deterministic wage beats
    # staying on the basic benefit by a wide margin
    return make_config(
        start_age=40, terminal_age=41, min_retirement_age=99.0,
        policy_map_panels=((40, "employed"),),
        wage_process={"sigma": 0.0, "rho": 0.0, "log_wage_level": np.log(40_000.0),
                      "log_wage_growth": 0.0, "log_wage_curvature": 0.0,
                      "profile_pivot_age": 40},
        terminal={"max_age": 41, "survival": (1.0,)})


class TestTraining:
    def test_learns_dominant_action(self):
        cfg = _dominant_switch_config()
        tc = TrainConfig(total_env_steps=15_000, batch_episodes=64,
                         learning_rate_policy=3e-3, learning_rate_value=3e-3,
                         entropy_coefficient=0.01, seed=0,
                         net=ApproximatorSpec(policy_hidden=(16, 16),
                                              value_hidden=(16, 16)))
        policy = train(cfg, tc)
        probs = policy.probabilities(int(Employment.UNEMPLOYED), 0.0, 0.0, 0,
                                     40_000.0, 40, cfg)[0]
        assert probs[Action.SWITCH] > 0.95

    def test_huge_entropy_keeps_policy_uniform(self):
        cfg = _dominant_switch_config()
        tc = TrainConfig(total_env_steps=8_000, batch_episodes=64,
                         learning_rate_policy=3e-3, learning_rate_value=3e-3,
                         entropy_coefficient=50.0, entropy_final=None, seed=0,
                         net=ApproximatorSpec(policy_hidden=(16, 16),
                                              value_hidden=(16, 16)))
        policy = train(cfg, tc)
        probs = policy.probabilities(int(Employment.UNEMPLOYED), 0.0, 0.0, 0,
                                     40_000.0, 40, cfg)[0]
        assert probs[:2] == pytest.approx([0.5, 0.5], abs=0.05)

    def test_learning_signal_nondecreasing(self):
        cfg = _dominant_switch_config()
        tc = TrainConfig(total_env_steps=15_000, batch_episodes=64,
                         learning_rate_policy=3e-3, learning_rate_value=3e-3, seed=1,
                         net=ApproximatorSpec(policy_hidden=(16, 16),
                                              value_hidden=(16, 16)))
        policy = train(cfg, tc)
        curve = policy.telemetry["mean_return"]
        half = curve[len(curve) // 2:]
        a, b = half[: len(half) // 2], half[len(half) // 2:]
        pooled_se = np.sqrt(a.var() / len(a) + b.var() / len(b))
        assert b.mean() >= a.mean() - 2 * pooled_se

    def test_reproducible_parameters(self):
        cfg = _dominant_switch_config()
        tc = TrainConfig(total_env_steps=3_000, batch_episodes=32, seed=7,
                         net=ApproximatorSpec(policy_hidden=(8,), value_hidden=(8,)))
        p1 = train(cfg, tc)
        p2 = train(cfg, tc)
        for (w1, b1), (w2, b2) in zip(p1.policy_params + p1.value_params,
                                      p2.policy_params + p2.value_params):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)

    def test_value_net_fits_constant_reward_environment(self):
        # all states pay the floor income: returns are a known geometric sum
        cfg = make_config(
            start_age=40, terminal_age=50, min_retirement_age=99.0,
            policy_map_panels=((40, "employed"),),
            reward={"kappa": 0.0, "gamma": 0.9},
            fiscal={"tax_brackets": ((0.0, 1.0),), "net_floor": 8_000.0,
                    "basic_ui_benefit": 4_000.0},
            terminal={"max_age": 50, "survival": (1.0,)})
        tc = TrainConfig(total_env_steps=120_000, batch_episodes=64,
                         learning_rate_value=2e-2, value_epochs=16, seed=3,
                         net=ApproximatorSpec(policy_hidden=(8,), value_hidden=(64, 64)))
        policy = train(cfg, tc)
        r = float(model.reward(Employment.UNEMPLOYED, 8_000.0, cfg.reward))
        gamma = 0.9
        T = 10
        feats, _, _, rewards, terminal, _ = ac._sample_batch(
            policy.policy_params, tc, cfg, np.random.default_rng(0))
        returns = ac.discounted_returns(rewards, terminal, gamma)
        targets = np.array([r * (1 - gamma ** (T - t)) / (1 - gamma) + gamma ** (T - t) * r
                            for t in range(T)])
        np.testing.assert_allclose(returns.mean(axis=1), targets, rtol=1e-9)
        v = value_forward(feats.reshape(-1, 8), policy.value_params)
        rel = np.abs(v - returns.reshape(-1)) / np.abs(returns.reshape(-1))
        assert rel.max() < 0.05


class TestMaskingSoundness:
    def test_no_infeasible_actions_in_simulation(self, cfg):
        from worklife.simulate import run_population

        policy = _untrained_policy(cfg)
        trajs, _ = run_population(policy, cfg, n_agents=300, seed=13)
        feasible = model.retirement_feasible_age(cfg)
        before = trajs.ages[:-1] < feasible
        assert not np.any(trajs.action[:, before] == int(Action.RETIRE))
        retired = trajs.employment[:, :-1] == Employment.RETIRED
        assert np.all(trajs.action[retired] == int(Action.STAY))


class TestPersistence:
    def test_save_load_roundtrip(self, cfg, tmp_path):
        policy = _untrained_policy(cfg, seed=5)
        path = tmp_path / "policy.bin"
        policy.save(path)
        back = ac.RlPolicy.load(path)
        assert back.model_hash == policy.model_hash
        assert back.net == policy.net
        for (w1, b1), (w2, b2) in zip(policy.policy_params + policy.value_params,
                                      back.policy_params + back.value_params):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)
        s = AgentState(Employment.EMPLOYED, 40, 5_000.0, 20_000.0, 2, 30_000.0)
        assert back.act(s, "greedy", np.random.default_rng(0), cfg) == \
            policy.act(s, "greedy", np.random.default_rng(0), cfg)
