"""Advantage actor-critic on the encoded state, in plain numpy.

Separate multilayer perceptrons approximate the action policy and the
state value. Episodes are sampled in vectorized lockstep (every life cycle
has the same length), returns are full Monte-Carlo sums including the
terminal valuation, and both networks are trained by momentum SGD on
hand-written backpropagation. Infeasible actions are masked out of the
softmax, so they carry probability exactly zero.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import Employment

_MAGIC = b"WLPH"
_VERSION = 1

N_FEATURES = 8
N_ACTIONS = 3


@dataclass
class EncodingNorms:
    """Reference scales mapping monetary state fields into roughly [0, 1]."""

    wage_ref: float = 40_000.0
    pension_ref: float = 20_000.0


@dataclass
class ApproximatorSpec:
    """Shapes and activation of the two networks (hidden layers only)."""

    policy_hidden: tuple = (32, 32, 32)
    value_hidden: tuple = (128, 128, 128)
    leaky_slope: float = 0.01

    def validate(self):
        if any(int(h) <= 0 for h in self.policy_hidden + self.value_hidden):
            raise ValueError("hidden layer widths must be positive")
        if self.leaky_slope < 0:
            raise ValueError("leaky_slope must be non-negative")


@dataclass
class TrainConfig:
    """Training-loop parameters for the actor-critic solver."""

    total_env_steps: int = 1_000_000
    batch_episodes: int = 16
    learning_rate_policy: float = 1e-3
    learning_rate_value: float = 3e-3
    entropy_coefficient: float = 0.01
    entropy_final: float | None = 0.0005
    gradient_clip_norm: float = 5.0
    momentum: float = 0.9
    value_epochs: int = 8
    advantage_norm: bool = True
    gae_lambda: float = 0.9
    lr_final_fraction: float = 0.1
    optimizer: str = "adam"
    seed: int = 1234
    net: ApproximatorSpec = field(default_factory=ApproximatorSpec)
    encoding: EncodingNorms = field(default_factory=EncodingNorms)

    def validate(self):
        positive = (self.total_env_steps, self.batch_episodes, self.learning_rate_policy,
                    self.learning_rate_value, self.gradient_clip_norm)
        if any(v <= 0 for v in positive):
            raise ValueError("training sizes, learning rates and clip norm must be positive")
        if self.entropy_coefficient < 0:
            raise ValueError("entropy_coefficient must be non-negative")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if self.value_epochs < 1:
            raise ValueError("value_epochs must be at least 1")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gae_lambda must lie in [0, 1]")
        if not (0.0 < self.lr_final_fraction <= 1.0):
            raise ValueError("lr_final_fraction must lie in (0, 1]")
        if self.optimizer not in ("momentum", "adam"):
            raise ValueError("optimizer must be 'momentum' or 'adam'")
        self.net.validate()


def encode(employment, age, pension, prev_wage, tis, wage, cfg, norms: EncodingNorms):
    """Feature vector(s): one-hot employment plus normalized continuous fields."""
    employment = np.atleast_1d(np.asarray(employment, dtype=int))
    n = employment.shape[0]
    feats = np.zeros((n, N_FEATURES))
    feats[np.arange(n), employment] = 1.0
    feats[:, 3] = (age - cfg.start_age) / (cfg.terminal_age - cfg.start_age)
    feats[:, 4] = np.atleast_1d(wage) / norms.wage_ref
    feats[:, 5] = np.atleast_1d(prev_wage) / norms.wage_ref
    feats[:, 6] = np.atleast_1d(pension) / norms.pension_ref
    feats[:, 7] = np.atleast_1d(tis) / cfg.tis_cap
    return feats


def encode_state(s: model.AgentState, cfg, norms: EncodingNorms):
    return encode(int(s.employment), s.age, s.pension_accrued, s.prev_wage,
                  s.time_in_state, s.wage, cfg, norms)[0]


# ---------------------------------------------------------------------------
# multilayer perceptron with leaky-ReLU hidden layers and a linear head
# ---------------------------------------------------------------------------

def init_mlp(layer_sizes, rng):
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        params.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                       rng.uniform(-bound, bound, size=fan_out)))
    return params


def mlp_forward(params, x, slope, cache=None):
    """Forward pass; with ``cache`` a list, stores activations for backprop."""
    h = np.atleast_2d(x)
    if cache is not None:
        cache.append(h)
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        z = h @ w + b
        h = z if i == last else np.where(z > 0, z, slope * z)
        if cache is not None:
            cache.append(h)
    return h


def mlp_backward(params, cache, grad_out, slope):
    """Gradients of a scalar loss given d(loss)/d(output)."""
    grads = [None] * len(params)
    g = np.atleast_2d(grad_out)
    last = len(params) - 1
    for i in range(last, -1, -1):
        w, _ = params[i]
        h_in, h_out = cache[i], cache[i + 1]
        if i != last:
            g = g * np.where(h_out > 0, 1.0, slope)
        grads[i] = (h_in.T @ g, g.sum(axis=0))
        if i > 0:
            g = g @ w.T
    return grads


def _clip_gradients(grads, max_norm):
    total = np.sqrt(sum(float((gw * gw).sum() + (gb * gb).sum()) for gw, gb in grads))
    if total > max_norm:
        scale = max_norm / total
        grads = [(gw * scale, gb * scale) for gw, gb in grads]
    return grads, total


def _sgd_step(params, grads, velocity, lr, momentum):
    for i, ((w, b), (gw, gb), (vw, vb)) in enumerate(zip(params, grads, velocity)):
        vw = momentum * vw - lr * gw
        vb = momentum * vb - lr * gb
        params[i] = (w + vw, b + vb)
        velocity[i] = (vw, vb)


class _AdamState:
    """Per-network Adam accumulator (diagonal second-moment scaling)."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for i, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
            mw, mb = self.m[i]
            vw, vb = self.v[i]
            mw = b1 * mw + (1 - b1) * gw
            mb = b1 * mb + (1 - b1) * gb
            vw = b2 * vw + (1 - b2) * gw * gw
            vb = b2 * vb + (1 - b2) * gb * gb
            self.m[i], self.v[i] = (mw, mb), (vw, vb)
            params[i] = (w - lr * (mw / corr1) / (np.sqrt(vw / corr2) + self.eps),
                         b - lr * (mb / corr1) / (np.sqrt(vb / corr2) + self.eps))


def masked_softmax(logits, mask):
    """Softmax over feasible actions only; infeasible entries are exactly 0."""
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def policy_forward(features, params, mask, slope=0.01):
    """Action probabilities for encoded states under a feasibility mask."""
    logits = mlp_forward(params, features, slope)
    return masked_softmax(logits, np.atleast_2d(mask))


def value_forward(features, params, slope=0.01):
    """State-value predictions for encoded states."""
    return mlp_forward(params, features, slope)[:, 0]


def _entropy(probs):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=-1)


def _policy_logit_grad(probs, actions, advantages, ent_coef):
    """d(policy loss)/d(logits) for loss = -mean(log pi(a) * A + ent * H)."""
    n = probs.shape[0]
    g = probs * advantages[:, None]
    g[np.arange(n), actions] -= advantages
    if ent_coef > 0:
        ent = _entropy(probs)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(probs > 0, np.log(probs), 0.0)
        g += ent_coef * probs * (logp + ent[:, None])
    return g / n


def sample_actions(probs, uniforms):
    """Inverse-CDF draw of one action per row from caller-supplied uniforms."""
    cum = np.cumsum(probs, axis=-1)
    return np.minimum((uniforms[:, None] > cum).sum(axis=-1), N_ACTIONS - 1)


@dataclass
class RlPolicy:
    """Trained actor-critic policy: immutable after training."""

    policy_params: list
    value_params: list
    norms: EncodingNorms
    net: ApproximatorSpec
    model_hash: str = ""
    telemetry: dict = field(default_factory=dict)
    kind: str = "rl"
    mode: str = "sample"

    def probabilities(self, employment, pension, prev_wage, tis, wage, age, cfg):
        feats = encode(employment, age, pension, prev_wage, tis, wage, cfg, self.norms)
        mask = model.feasible_mask(np.atleast_1d(np.asarray(employment)), age, cfg)
        return policy_forward(feats, self.policy_params, mask, self.net.leaky_slope)

    def act_batch(self, employment, pension, prev_wage, tis, wage, age, uniforms, cfg):
        probs = self.probabilities(employment, pension, prev_wage, tis, wage, age, cfg)
        if self.mode == "greedy":
            return np.argmax(probs, axis=-1)
        return sample_actions(probs, np.atleast_1d(uniforms))

    def act(self, s: model.AgentState, mode, rng, cfg):
        """Single-state action: ``sample`` draws, ``greedy`` takes the argmax."""
        probs = self.probabilities(int(s.employment), s.pension_accrued, s.prev_wage,
                                   s.time_in_state, s.wage, s.age, cfg)[0]
        if mode == "greedy":
            return model.Action(int(np.argmax(probs)))
        if mode != "sample":
            raise ValueError(f"unknown action mode '{mode}'")
        return model.Action(int(sample_actions(probs[None, :], np.array([rng.random()]))[0]))

    def save(self, path):
        header = {
            "model_hash": self.model_hash,
            "policy_hidden": list(self.net.policy_hidden),
            "value_hidden": list(self.net.value_hidden),
            "leaky_slope": self.net.leaky_slope,
            "wage_ref": self.norms.wage_ref,
            "pension_ref": self.norms.pension_ref,
            "mode": self.mode,
            "param_order": "policy then value net; per layer W (fan_in x fan_out) then b",
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<HI", _VERSION, len(blob)))
            f.write(blob)
            for w, b in self.policy_params + self.value_params:
                f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            data = f.read()
        buf = io.BytesIO(data)
        if buf.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a policy file")
        version, hlen = struct.unpack("<HI", buf.read(6))
        if version != _VERSION:
            raise ValueError(f"unsupported policy version {version}")
        header = json.loads(buf.read(hlen).decode())
        net = ApproximatorSpec(policy_hidden=tuple(header["policy_hidden"]),
                               value_hidden=tuple(header["value_hidden"]),
                               leaky_slope=header["leaky_slope"])
        norms = EncodingNorms(wage_ref=header["wage_ref"], pension_ref=header["pension_ref"])

        def read_params(sizes):
            params = []
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                w = np.frombuffer(buf.read(8 * fan_in * fan_out), dtype="<f8")
                b = np.frombuffer(buf.read(8 * fan_out), dtype="<f8")
                params.append((w.reshape(fan_in, fan_out).copy(), b.copy()))
            return params

        policy_params = read_params([N_FEATURES, *net.policy_hidden, N_ACTIONS])
        value_params = read_params([N_FEATURES, *net.value_hidden, 1])
        return cls(policy_params=policy_params, value_params=value_params, norms=norms,
                   net=net, model_hash=header["model_hash"], mode=header.get("mode", "sample"))


def _sample_batch(policy_params, tc: TrainConfig, cfg, rng):
    """Roll out one batch of full life cycles under the current policy."""
    B = tc.batch_episodes
    T = cfg.terminal_age - cfg.start_age
    wp = cfg.wage_process
    init = model.initial_wage_distribution(cfg)
    employment = np.full(B, int(Employment.UNEMPLOYED), dtype=np.int8)
    pension = np.zeros(B)
    prev_wage = np.zeros(B)
    tis = np.zeros(B, dtype=np.int64)
    wage = init.sample(rng, B)

    feats = np.empty((T, B, N_FEATURES))
    masks = np.empty((T, B, N_ACTIONS), dtype=bool)
    acts = np.empty((T, B), dtype=np.int64)
    rewards = np.empty((T, B))
    entropies = np.empty(T)

    for t in range(T):
        age = cfg.start_age + t
        f = encode(employment, age, pension, prev_wage, tis, wage, cfg, tc.encoding)
        m = model.feasible_mask(employment, age, cfg)
        probs = policy_forward(f, policy_params, m, tc.net.leaky_slope)
        a = sample_actions(probs, rng.random(B))
        out = model.transition_core(employment, pension, prev_wage, tis, wage, age,
                                    a, cfg, validate=False)
        feats[t], masks[t], acts[t], rewards[t] = f, m, a, out["reward"]
        entropies[t] = _entropy(probs).mean()
        mean_log = model.next_wage_mean_log(
            wage, out["employment"] == Employment.UNEMPLOYED, age + 1, wp)
        wage = np.clip(np.exp(mean_log + wp.sigma * rng.standard_normal(B)),
                       wp.wage_floor, wp.wage_cap)
        employment, pension = out["employment"], out["pension"]
        prev_wage, tis = out["prev_wage"], out["tis"]

    terminal = model.terminal_value_of_pension(pension, cfg)
    return feats, masks, acts, rewards, terminal, float(entropies.mean())


def discounted_returns(rewards, terminal, gamma):
    """Per-step returns including the terminal value, shape (T, B)."""
    T = rewards.shape[0]
    returns = np.empty_like(rewards)
    future = np.asarray(terminal, dtype=float)
    for t in range(T - 1, -1, -1):
        future = rewards[t] + gamma * future
        returns[t] = future
    return returns


def gae_advantages(rewards, values, terminal, gamma, lam):
    """Generalized advantage estimates from bootstrapped one-step errors.

    ``values`` holds V(s_t) for the in-horizon states; the terminal state
    is valued exactly. ``lam = 1`` reproduces the Monte-Carlo advantage
    ``G_t - V(s_t)``.
    """
    T = rewards.shape[0]
    adv = np.empty_like(rewards)
    nxt = np.asarray(terminal, dtype=float)
    carry = np.zeros(rewards.shape[1])
    for t in range(T - 1, -1, -1):
        delta = rewards[t] + gamma * nxt - values[t]
        carry = delta + gamma * lam * carry
        adv[t] = carry
        nxt = values[t]
    return adv


def train(cfg, tc: TrainConfig | None = None) -> RlPolicy:
    """Train policy and value networks on sampled life cycles.

    Runs until ``total_env_steps`` environment steps are consumed; one
    gradient step on the policy and ``value_epochs`` on the value net per
    batch of episodes. Returns the trained policy with a telemetry block
    (mean episode return, entropy and losses per batch). Aborts with a
    diagnostic on non-finite losses.
    """
    tc = tc if tc is not None else cfg.training
    tc.validate()
    rng = np.random.default_rng(tc.seed)
    slope = tc.net.leaky_slope
    policy_params = init_mlp([N_FEATURES, *tc.net.policy_hidden, N_ACTIONS], rng)
    value_params = init_mlp([N_FEATURES, *tc.net.value_hidden, 1], rng)
    if tc.optimizer == "adam":
        opt_p, opt_v = _AdamState(policy_params), _AdamState(value_params)
        step_p = lambda grads, lr: opt_p.step(policy_params, grads, lr)
        step_v = lambda grads, lr: opt_v.step(value_params, grads, lr)
    else:
        vel_p = [(np.zeros_like(w), np.zeros_like(b)) for w, b in policy_params]
        vel_v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in value_params]
        step_p = lambda grads, lr: _sgd_step(policy_params, grads, vel_p, lr, tc.momentum)
        step_v = lambda grads, lr: _sgd_step(value_params, grads, vel_v, lr, tc.momentum)

    T = cfg.terminal_age - cfg.start_age
    steps_per_batch = tc.batch_episodes * T
    n_batches = max(1, int(np.ceil(tc.total_env_steps / steps_per_batch)))
    telemetry = {k: np.zeros(n_batches) for k in
                 ("mean_return", "entropy", "policy_loss", "value_loss")}

    for batch in range(n_batches):
        feats, masks, acts, rewards, terminal, mean_entropy = _sample_batch(
            policy_params, tc, cfg, rng)
        returns = discounted_returns(rewards, terminal, cfg.reward.gamma)
        x = feats.reshape(-1, N_FEATURES)
        m = masks.reshape(-1, N_ACTIONS)
        a = acts.reshape(-1)
        g_ret = returns.reshape(-1)

        frac = batch / max(1, n_batches - 1)
        if tc.entropy_final is None:
            ent_coef = tc.entropy_coefficient
        else:
            ent_coef = (1 - frac) * tc.entropy_coefficient + frac * tc.entropy_final
        lr_scale = 1.0 - frac * (1.0 - tc.lr_final_fraction)

        values = value_forward(x, value_params, slope)
        if tc.gae_lambda >= 1.0:
            adv = g_ret - values
        else:
            adv = gae_advantages(rewards, values.reshape(rewards.shape), terminal,
                                 cfg.reward.gamma, tc.gae_lambda).reshape(-1)
        if tc.advantage_norm:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        cache = []
        logits = mlp_forward(policy_params, x, slope, cache)
        probs = masked_softmax(logits, m)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(probs > 0, np.log(probs), 0.0)
        policy_loss = float(-(logp[np.arange(len(a)), a] * adv).mean()
                            - ent_coef * _entropy(probs).mean())
        grad_logits = _policy_logit_grad(probs, a, adv, ent_coef)
        grads, _ = _clip_gradients(mlp_backward(policy_params, cache, grad_logits, slope),
                                   tc.gradient_clip_norm)
        step_p(grads, lr_scale * tc.learning_rate_policy)

        value_loss = float(((values - g_ret) ** 2).mean())
        for _ in range(tc.value_epochs):
            cache = []
            v = mlp_forward(value_params, x, slope, cache)[:, 0]
            grad_v = (2.0 * (v - g_ret) / len(g_ret))[:, None]
            grads, _ = _clip_gradients(mlp_backward(value_params, cache, grad_v, slope),
                                       tc.gradient_clip_norm)
            step_v(grads, lr_scale * tc.learning_rate_value)

        if not (np.isfinite(policy_loss) and np.isfinite(value_loss)):
            raise RuntimeError(
                f"non-finite loss at batch {batch}: policy {policy_loss}, value "
                f"{value_loss}; lr_policy {tc.learning_rate_policy}, lr_value "
                f"{tc.learning_rate_value}, return mean {g_ret.mean():.4f}, "
                f"return std {g_ret.std():.4f}")

        telemetry["mean_return"][batch] = returns[0].mean()
        telemetry["entropy"][batch] = mean_entropy
        telemetry["policy_loss"][batch] = policy_loss
        telemetry["value_loss"][batch] = value_loss

    return RlPolicy(policy_params=policy_params, value_params=value_params,
                    norms=tc.encoding, net=tc.net,
                    model_hash=getattr(cfg, "model_hash", lambda: "")(),
                    telemetry=telemetry)
