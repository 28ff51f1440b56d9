"""Backward-induction value iteration on a discretized state grid.

The value function is stored per age on a knot tensor over
``(employment, pension, prev_wage, time-in-state, wage)``. Continuation
values between knots come from tensor-product natural cubic splines along
the three continuous axes (wage, previous wage, pension) with exact lookup
along the discrete ones; expectations over next-period wages use
Gauss-Hermite quadrature through the log-normal shock.

Both the solver and the greedy policy evaluate the same Bellman operator:
per-year rewards and state updates are taken from
:func:`worklife.model.transition_core`, so the dynamics seen by the grid
solver, the simulator and the learner are literally one code path.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from . import model
from .model import Action, Employment

_MAGIC = b"WLVG"
_VERSION = 1


@dataclass
class GridSpec:
    """Knot layout for the discretized state space.

    Step sizes and origins are euros per month (converted to euros per
    year internally); time-in-state knots are ``0 .. n_tis-1`` with the top
    knot absorbing. ``quadrature_nodes`` sets the Gauss-Hermite order used
    for wage expectations.
    """

    n_pension: int = 20
    n_prev_wage: int = 20
    n_wage: int = 25
    n_tis: int = 5
    pension_origin: float = 0.0
    pension_step: float = 417.0
    wage_origin: float = 1_000.0 / 12.0
    wage_step: float = 202_000.0 / 24.0 / 12.0
    prev_wage_origin: float = 1_000.0 / 12.0
    prev_wage_step: float = 202_000.0 / 19.0 / 12.0
    quadrature_nodes: int = 5

    def validate(self):
        if min(self.n_pension, self.n_prev_wage, self.n_wage) < 2:
            raise ValueError("pension, prev_wage and wage axes need at least 2 knots")
        if self.n_tis < 1:
            raise ValueError("n_tis must be at least 1")
        if min(self.pension_step, self.wage_step, self.prev_wage_step) <= 0:
            raise ValueError("grid steps must be positive")
        if self.quadrature_nodes < 1:
            raise ValueError("quadrature_nodes must be at least 1")

    def pension_knots(self):
        return 12.0 * (self.pension_origin + self.pension_step * np.arange(self.n_pension))

    def prev_wage_knots(self):
        return 12.0 * (self.prev_wage_origin + self.prev_wage_step * np.arange(self.n_prev_wage))

    def wage_knots(self):
        return 12.0 * (self.wage_origin + self.wage_step * np.arange(self.n_wage))


def wage_quadrature(dist: model.WageDistribution, nodes: int):
    """Gauss-Hermite nodes mapped through the log-normal wage shock.

    Returns ``(wages, weights)`` with weights summing to one. Node values
    are clamped to the wage bounds; a zero-variance distribution collapses
    to its single point.
    """
    if nodes < 1:
        raise ValueError("need at least one quadrature node")
    if dist.sigma == 0.0 or nodes == 1:
        return np.array([dist._clamp(np.exp(dist.mean_log))]), np.array([1.0])
    x, g = np.polynomial.hermite.hermgauss(nodes)
    wages = dist._clamp(np.exp(dist.mean_log + np.sqrt(2.0) * dist.sigma * x))
    weights = g / g.sum()
    return wages, weights


def _quadrature_eps(nodes: int, sigma: float):
    # additive log shocks and weights, shared by every wage level
    if sigma == 0.0 or nodes == 1:
        return np.array([0.0]), np.array([1.0])
    x, g = np.polynomial.hermite.hermgauss(nodes)
    return np.sqrt(2.0) * sigma * x, g / g.sum()


class TensorSpline:
    """Natural cubic tensor-product interpolant on a 3-D value block.

    Equivalent to successive 1-D natural cubic splines along each axis;
    built once per value block and evaluated at scattered points. Queries
    are clamped to the knot hull.
    """

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        c = np.asarray(values, dtype=float)
        ts = []
        for dim, ax in enumerate(self.axes):
            s = make_interp_spline(ax, c, k=3, bc_type="natural", axis=dim)
            ts.append(s.t)
            c = s.c  # interpolated axis moves to the front
        self._nd = NdBSpline(tuple(ts), np.transpose(c, axes=range(c.ndim - 1, -1, -1)), k=3)

    def __call__(self, *coords):
        coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        pts = np.stack(
            [np.clip(c, ax[0], ax[-1]) for c, ax in zip(coords, self.axes)], axis=-1
        )
        return self._nd(pts)


class LayerInterpolator:
    """Spline views of one value layer, per (employment, tis) slice."""

    def __init__(self, layer, pension_knots, prev_wage_knots, wage_knots):
        self.layer = layer
        self.n_tis = layer.shape[3]
        self._splines = {}
        axes = (pension_knots, prev_wage_knots, wage_knots)
        for e in range(3):
            for t in range(self.n_tis):
                self._splines[(e, t)] = TensorSpline(axes, layer[e, :, :, t, :])

    def eval_slice(self, e, tis_knot, pension, prev_wage, wage):
        return self._splines[(int(e), int(tis_knot))](pension, prev_wage, wage)

    def eval_mixed(self, e, tis_knot, pension, prev_wage, wage):
        e, tis_knot, pension, prev_wage, wage = np.broadcast_arrays(
            e, tis_knot, pension, prev_wage, wage)
        out = np.empty(pension.shape, dtype=float)
        for key, spl in self._splines.items():
            sel = (e == key[0]) & (tis_knot == key[1])
            if np.any(sel):
                out[sel] = spl(pension[sel], prev_wage[sel], wage[sel])
        return out

    def retired_values(self):
        # retired-slice values are constant along prev_wage, tis and wage
        return self.layer[int(Employment.RETIRED), :, 0, 0, 0]


def _tis_knot_of(tis, n_tis):
    return np.minimum(np.asarray(tis, dtype=np.int64), n_tis - 1)


@dataclass
class ValueGrid:
    """Solved value tensors plus the per-knot optimal actions.

    ``values`` has shape ``(T+1, 3, n_pension, n_prev_wage, n_tis, n_wage)``
    with layer ``t`` holding age ``start_age + t`` (the last layer is the
    terminal valuation); ``actions`` covers the ``T`` decision ages.
    """

    grid: GridSpec
    start_age: int
    terminal_age: int
    values: np.ndarray
    actions: np.ndarray
    model_hash: str = ""

    def __post_init__(self):
        self._interp_cache = {}

    def n_decisions(self):
        return self.terminal_age - self.start_age

    def layer_interpolator(self, layer_index) -> LayerInterpolator:
        if layer_index not in self._interp_cache:
            self._interp_cache[layer_index] = LayerInterpolator(
                self.values[layer_index], self.grid.pension_knots(),
                self.grid.prev_wage_knots(), self.grid.wage_knots())
        return self._interp_cache[layer_index]

    def value(self, s: model.AgentState):
        """Interpolated state value (nearest knot on the discrete axes)."""
        interp = self.layer_interpolator(s.age - self.start_age)
        t = int(_tis_knot_of(s.time_in_state, self.grid.n_tis))
        return float(interp.eval_slice(int(s.employment), t, s.pension_accrued,
                                       s.prev_wage, s.wage))

    def save(self, path):
        header = {
            "model_hash": self.model_hash,
            "grid": self.grid.__dict__,
            "start_age": self.start_age,
            "terminal_age": self.terminal_age,
            "values_shape": list(self.values.shape),
            "actions_shape": list(self.actions.shape),
            "axis_order": "age, employment, pension, prev_wage, tis, wage",
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<HI", _VERSION, len(blob)))
            f.write(blob)
            f.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(self.actions, dtype=np.int8).tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            data = f.read()
        buf = io.BytesIO(data)
        if buf.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a value-grid file")
        version, hlen = struct.unpack("<HI", buf.read(6))
        if version != _VERSION:
            raise ValueError(f"unsupported value-grid version {version}")
        header = json.loads(buf.read(hlen).decode())
        vshape = tuple(header["values_shape"])
        ashape = tuple(header["actions_shape"])
        values = np.frombuffer(buf.read(8 * int(np.prod(vshape))), dtype="<f8").reshape(vshape)
        actions = np.frombuffer(buf.read(int(np.prod(ashape))), dtype=np.int8).reshape(ashape)
        return cls(grid=GridSpec(**header["grid"]), start_age=header["start_age"],
                   terminal_age=header["terminal_age"], values=values.copy(),
                   actions=actions.copy(), model_hash=header["model_hash"])


def _expected_continuation(interp, e_next, tis_knot, pension_next, prev_next,
                           wage_base, elapsed_unemployed, next_age, cfg, grid):
    """Quadrature expectation of the next layer at the post-year state.

    ``wage_base`` is the wage the next offer is drawn from; all other
    arguments broadcast against it. ``tis_knot`` and ``e_next`` may be
    arrays (mixed slices are bucketed internally).
    """
    eps, weights = _quadrature_eps(grid.quadrature_nodes, cfg.wage_process.sigma)
    mean_log = model.next_wage_mean_log(wage_base, elapsed_unemployed, next_age,
                                        cfg.wage_process)
    wages = np.exp(mean_log[..., None] + eps)
    np.clip(wages, cfg.wage_process.wage_floor, cfg.wage_process.wage_cap, out=wages)
    bshape = mean_log.shape
    vals = interp.eval_mixed(
        np.broadcast_to(np.asarray(e_next)[..., None], bshape + (len(eps),)),
        np.broadcast_to(np.asarray(tis_knot)[..., None], bshape + (len(eps),)),
        np.broadcast_to(np.asarray(pension_next)[..., None], bshape + (len(eps),)),
        np.broadcast_to(np.asarray(prev_next)[..., None], bshape + (len(eps),)),
        wages)
    return vals @ weights


def action_values(vg: ValueGrid, cfg, employment, pension, prev_wage, tis, wage, age):
    """Q-values of all three actions at arbitrary states of one age.

    Vectorized over agents; infeasible actions carry ``-inf``. Rewards and
    transitions come from :func:`worklife.model.transition_core`, and
    continuation values from quadrature over the interpolated next layer,
    exactly as in :func:`backward_induct`.
    """
    employment = np.atleast_1d(np.asarray(employment))
    pension = np.atleast_1d(np.asarray(pension, dtype=float))
    prev_wage = np.atleast_1d(np.asarray(prev_wage, dtype=float))
    tis = np.atleast_1d(np.asarray(tis))
    wage = np.atleast_1d(np.asarray(wage, dtype=float))
    t_index = age - vg.start_age
    if not (0 <= t_index < vg.n_decisions()):
        raise ValueError(f"age {age} outside the decision horizon")
    interp = vg.layer_interpolator(t_index + 1)
    gamma = cfg.reward.gamma
    mask = model.feasible_mask(employment, age, cfg)
    q = np.full(employment.shape + (3,), -np.inf)
    pension_knots = vg.grid.pension_knots()
    # pension is frozen from retirement on, so the retired continuation is a
    # 1-D natural spline along the pension axis
    ret_spline = make_interp_spline(pension_knots, interp.retired_values(), k=3,
                                    bc_type="natural")
    for a in (Action.STAY, Action.SWITCH, Action.RETIRE):
        ok = mask[..., a]
        if not np.any(ok):
            continue
        out = model.transition_core(employment[ok], pension[ok], prev_wage[ok],
                                    tis[ok], wage[ok], age, np.full(ok.sum(), int(a)),
                                    cfg, validate=False)
        e_next = out["employment"]
        ret_cont = ret_spline(np.clip(out["pension"], pension_knots[0], pension_knots[-1]))
        if a == Action.RETIRE:
            cont = ret_cont
        else:
            cont = np.where(
                e_next == Employment.RETIRED, ret_cont,
                _expected_continuation(
                    interp, e_next, _tis_knot_of(out["tis"], vg.grid.n_tis),
                    out["pension"], out["prev_wage"], wage[ok],
                    e_next == Employment.UNEMPLOYED, age + 1, cfg, vg.grid))
        q[ok, a] = out["reward"] + gamma * cont
    return q


def greedy_action(vg: ValueGrid, cfg, s: model.AgentState) -> Action:
    """Deterministic optimal action at a (possibly off-knot) state."""
    q = action_values(vg, cfg, int(s.employment), s.pension_accrued, s.prev_wage,
                      s.time_in_state, s.wage, s.age)
    return Action(int(np.argmax(q[0])))


def backward_induct(cfg, grid: GridSpec | None = None) -> ValueGrid:
    """Solve the model on the grid, last age first.

    Exploits the structure of the transition: the value of an elapsed
    employed year does not depend on the previous-wage knot, the retired
    slice depends only on the pension knot, and time-in-state enters only
    by selecting the continuation slice. Ties between equal action values
    resolve to the lowest action code.
    """
    grid = grid if grid is not None else cfg.grid
    grid.validate()
    p = grid.pension_knots()
    pw = grid.prev_wage_knots()
    w = grid.wage_knots()
    n_tis = grid.n_tis
    T = cfg.terminal_age - cfg.start_age
    shape = (3, len(p), len(pw), n_tis, len(w))
    values = np.empty((T + 1,) + shape)
    actions = np.zeros((T,) + shape, dtype=np.int8)

    values[T] = model.terminal_value_of_pension(p, cfg)[None, :, None, None, None]

    gamma = cfg.reward.gamma
    feasible_age = model.retirement_feasible_age(cfg)
    stay_slice = np.minimum(np.arange(n_tis) + 1, n_tis - 1)

    for t in range(T - 1, -1, -1):
        age = cfg.start_age + t
        interp = LayerInterpolator(values[t + 1], p, pw, w)

        # year spent employed: reached by employed-stay and unemployed-switch
        emp = model.transition_core(
            np.full((1, 1), int(Employment.UNEMPLOYED)), p[:, None], 0.0, 0,
            w[None, :], age, int(Action.SWITCH), cfg, validate=False)
        ev_emp = np.stack([
            _expected_continuation(interp, int(Employment.EMPLOYED), k, emp["pension"],
                                   emp["prev_wage"], np.broadcast_to(w, emp["pension"].shape),
                                   False, age + 1, cfg, grid)
            for k in range(n_tis)])  # (n_tis, P, W)

        # year spent unemployed directly after employment (earnings-related)
        sw = model.transition_core(
            np.full((1, 1, 1), int(Employment.EMPLOYED)), p[:, None, None],
            pw[None, :, None], 0, w[None, None, :], age, int(Action.SWITCH),
            cfg, validate=False)
        ev_sw = _expected_continuation(
            interp, int(Employment.UNEMPLOYED), 0, sw["pension"], sw["prev_wage"],
            np.broadcast_to(w[None, None, :], sw["pension"].shape), True,
            age + 1, cfg, grid)  # (P, W2, W)

        # year spent unemployed continuing an unemployment spell (basic benefit)
        un = model.transition_core(
            np.full((1, 1, 1), int(Employment.UNEMPLOYED)), p[:, None, None],
            pw[None, :, None], 1, w[None, None, :], age, int(Action.STAY),
            cfg, validate=False)
        needed = np.unique(stay_slice)
        ev_un_by_slice = {
            int(k): _expected_continuation(
                interp, int(Employment.UNEMPLOYED), int(k), un["pension"],
                un["prev_wage"], np.broadcast_to(w[None, None, :], un["pension"].shape),
                True, age + 1, cfg, grid)
            for k in needed}

        # year spent retired (newly retired or continuing)
        ret = model.transition_core(
            np.full(len(p), int(Employment.RETIRED)), p, 0.0, 1, w[0], age,
            int(Action.STAY), cfg, validate=False)
        q_ret = ret["reward"] + gamma * interp.retired_values()  # (P,)

        r_emp = emp["reward"]                      # (P, W) via net-floor broadcast
        r_emp = np.broadcast_to(r_emp, (len(p), len(w)))
        r_sw = np.broadcast_to(sw["reward"], (len(p), len(pw), len(w)))
        r_un = np.broadcast_to(un["reward"], (len(p), len(pw), len(w)))

        q = np.full(shape + (3,), -np.inf)
        # employed source
        q[Employment.EMPLOYED, :, :, :, :, Action.STAY] = (
            r_emp[:, None, None, :] + gamma * ev_emp[stay_slice][:, :, None, :].transpose(1, 2, 0, 3))
        q[Employment.EMPLOYED, :, :, :, :, Action.SWITCH] = (
            r_sw[:, :, None, :] + gamma * ev_sw[:, :, None, :])
        # unemployed source
        ev_un = np.stack([ev_un_by_slice[int(k)] for k in stay_slice])  # (n_tis, P, W2, W)
        q[Employment.UNEMPLOYED, :, :, :, :, Action.STAY] = (
            r_un[:, :, None, :] + gamma * ev_un.transpose(1, 2, 0, 3))
        q[Employment.UNEMPLOYED, :, :, :, :, Action.SWITCH] = (
            r_emp[:, None, None, :] + gamma * ev_emp[0][:, None, None, :])
        if age >= feasible_age:
            q[Employment.EMPLOYED, :, :, :, :, Action.RETIRE] = q_ret[:, None, None, None]
            q[Employment.UNEMPLOYED, :, :, :, :, Action.RETIRE] = q_ret[:, None, None, None]
        # retired source
        q[Employment.RETIRED, :, :, :, :, Action.STAY] = q_ret[:, None, None, None]

        values[t] = np.max(q, axis=-1)
        actions[t] = np.argmax(q, axis=-1).astype(np.int8)
        if not np.all(np.isfinite(values[t])):
            idx = np.unravel_index(int(np.argmax(~np.isfinite(values[t]))), shape)
            raise FloatingPointError(f"non-finite value at age {age}, knot {idx}")

    return ValueGrid(grid=grid, start_age=cfg.start_age, terminal_age=cfg.terminal_age,
                     values=values, actions=actions,
                     model_hash=getattr(cfg, "model_hash", lambda: "")())


@dataclass
class DpPolicy:
    """Greedy policy reading a solved value grid; deterministic."""

    vg: ValueGrid
    kind: str = "dp"
    mode: str = "greedy"

    @property
    def model_hash(self):
        return self.vg.model_hash

    def act_batch(self, employment, pension, prev_wage, tis, wage, age, uniforms, cfg):
        q = action_values(self.vg, cfg, employment, pension, prev_wage, tis, wage, age)
        return np.argmax(q, axis=-1)

    def act(self, s: model.AgentState, mode, rng, cfg):
        return greedy_action(self.vg, cfg, s)


def policy_map(vg: ValueGrid, age, employment, prev_wage_knot=None, tis_knot=None):
    """Optimal-action matrix over (pension knots x wage knots) at one age.

    The previous-wage and time-in-state axes are fixed at reference knots
    (defaults: middle previous-wage knot, top time-in-state knot).
    """
    t = age - vg.start_age
    if not (0 <= t < vg.n_decisions()):
        raise ValueError(f"age {age} outside the decision horizon")
    j = vg.grid.n_prev_wage // 2 if prev_wage_knot is None else int(prev_wage_knot)
    k = vg.grid.n_tis - 1 if tis_knot is None else int(tis_knot)
    return vg.actions[t, int(employment), :, j, k, :].copy()
