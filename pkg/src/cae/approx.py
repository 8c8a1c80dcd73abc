"""Function approximators for accessibility values.

Both backends map ``(state, goal, condition)`` to one logit per action and
squash with the logistic function, so every output lies in ``(0, 1)`` and
``max_a'`` needs a single forward pass. The condition is the horizon ``h``
for C/A, the discount ``gamma`` for D and nothing for Q.

* ``TabularFn`` stores a logit per ``(state, goal, condition, action)``.
* ``MlpFn`` is a ReLU network on ``[enc(s), enc(g), cond]`` with analytic
  backprop.

``AccessFn`` ties a backend to an environment's encoders and a variant, and
is what the learner, policies and evaluation talk to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1
VARIANTS = ("C", "A", "D", "Q")


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- losses --------------------------------------------------------------


def _check_targets(y):
    y = np.asarray(y, dtype=float)
    if ((y < 0) | (y > 1)).any() or not np.isfinite(y).all():
        raise ValueError("targets must lie in [0, 1]")
    return y


def bce_loss(p, y):
    """``-[y log p + (1 - y) log(1 - p)]``, elementwise."""
    p = np.asarray(p, dtype=float)
    y = _check_targets(y)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def bce_loss_logits(z, y):
    """Same loss computed stably from the logit."""
    z = np.asarray(z, dtype=float)
    y = _check_targets(y)
    return np.logaddexp(0.0, z) - y * z


def bce_grad(p, y):
    """Derivative of ``bce_loss`` with respect to the logit: ``p - y``."""
    return np.asarray(p, dtype=float) - _check_targets(y)


def squared_loss(p, y):
    return (np.asarray(p, dtype=float) - np.asarray(y, dtype=float)) ** 2


def squared_grad(p, y):
    """Derivative of ``(p - y)^2`` with respect to the logit of ``p``."""
    p = np.asarray(p, dtype=float)
    return 2.0 * (p - np.asarray(y, dtype=float)) * p * (1.0 - p)


LOSSES = {"bce": (bce_loss, bce_grad), "squared": (squared_loss, squared_grad)}


# -- backends ------------------------------------------------------------


class TabularFn:
    """Logit table ``[state, goal, condition, action]``, zero-initialised."""

    kind = "tabular"

    def __init__(self, n_states: int, n_goals: int, n_cond: int, n_actions: int):
        self.shape = (n_states, n_goals, n_cond, n_actions)
        self.params = [np.zeros(self.shape)]

    @property
    def n_actions(self) -> int:
        return self.shape[-1]

    def logits(self, S, G, K) -> np.ndarray:
        return self.params[0][S, G, K]

    def forward(self, S, G, K) -> np.ndarray:
        return sigmoid(self.logits(S, G, K))

    def grad(self, S, G, K, dlogits) -> list[np.ndarray]:
        g = np.zeros(self.shape)
        np.add.at(g, (S, G, K), dlogits)
        return [g]

    def layer_sizes(self) -> list[int]:
        return list(self.shape)


class MlpFn:
    """ReLU multilayer perceptron with one logistic output per action."""

    kind = "mlp"

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"bad layer sizes {sizes}")
        self.params = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            if rng is None:
                W, b = np.zeros((fan_in, fan_out)), np.zeros(fan_out)
            else:
                W = rng.uniform(-bound, bound, (fan_in, fan_out))
                b = rng.uniform(-bound, bound, fan_out)
            self.params += [W, b]

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def logits_cache(self, X):
        acts = [np.asarray(X, dtype=float)]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            z = acts[-1] @ self.params[2 * i] + self.params[2 * i + 1]
            acts.append(np.maximum(z, 0.0) if i < n_layers - 1 else z)
        return acts[-1], acts

    def logits(self, X) -> np.ndarray:
        return self.logits_cache(X)[0]

    def forward(self, X) -> np.ndarray:
        return sigmoid(self.logits(X))

    def grad(self, acts, dlogits) -> list[np.ndarray]:
        grads = [None] * len(self.params)
        delta = dlogits
        for i in reversed(range(len(self.params) // 2)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.params[2 * i].T) * (acts[i] > 0)
        return grads

    def layer_sizes(self) -> list[int]:
        return list(self.sizes)


# -- optimiser -----------------------------------------------------------


@dataclass
class OptimState:
    lr: float
    kind: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimiser {self.kind!r}")


class NonFiniteGradient(FloatingPointError):
    pass


def apply_update(params: list[np.ndarray], grads: list[np.ndarray], opt: OptimState) -> None:
    """In-place parameter update. Refuses non-finite gradients."""
    for g in grads:
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient at optimiser step {opt.step + 1}")
    opt.step += 1
    if opt.kind == "sgd":
        for p, g in zip(params, grads):
            p -= opt.lr * g
        return
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    c1 = 1.0 - opt.beta1 ** opt.step
    c2 = 1.0 - opt.beta2 ** opt.step
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


# -- accessibility function ---------------------------------------------


class AccessFn:
    """A variant-tagged approximator bound to an environment.

    ``cond`` is ``h`` (integer, ``0..h_max``) for C/A, ``gamma`` for D and
    ignored for Q. The tabular backend indexes D by position in ``gammas``.
    """

    def __init__(self, env, variant: str = "C", backend: str = "tabular", *, h_max: int = 50,
                 hidden=(60, 40), gammas=None, rng: np.random.Generator | None = None,
                 seed: int | None = None):
        variant = variant.upper()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.env = env
        self.variant = variant
        self.h_max = int(h_max)
        self.gammas = None if gammas is None else np.asarray(gammas, dtype=float)
        self.seed = seed
        self.step = 0
        m = env.n_actions
        if backend == "tabular":
            if not getattr(env, "enumerable", False):
                raise ValueError("tabular backend needs an enumerable environment")
            n_cond = {"C": self.h_max + 1, "A": self.h_max + 1, "Q": 1,
                      "D": 0 if self.gammas is None else len(self.gammas)}[variant]
            if n_cond == 0:
                raise ValueError("tabular D needs a gamma grid")
            self.net = TabularFn(env.n_states, env.n_goals, n_cond, m)
        elif backend == "mlp":
            probe = np.random.default_rng(0)
            n_in = env.encode_states(np.asarray([env.initial_state(probe, "test")])).shape[1]
            n_in += env.encode_goals(np.asarray([env.sample_goal(probe)])).shape[1] + 1
            self.net = MlpFn([n_in, *hidden, m], rng)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend

    # cond handling

    def _cond_index(self, K) -> np.ndarray:
        K = np.asarray(K)
        if self.variant == "Q":
            return np.zeros(K.shape, dtype=np.int64)
        if self.variant == "D":
            idx = np.searchsorted(self.gammas, K)
            idx = np.minimum(idx, len(self.gammas) - 1)
            if not np.allclose(self.gammas[idx], K):
                raise ValueError("gamma not on the tabular grid")
            return idx
        return self._check_h(K)

    def _check_h(self, K):
        K = np.asarray(K, dtype=np.int64)
        if (K < 0).any() or (K > self.h_max).any():
            raise ValueError(f"horizon outside [0, {self.h_max}]")
        return K

    def _cond_feature(self, K) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        if self.variant in ("C", "A"):
            self._check_h(K)
            return K / self.h_max
        if self.variant == "Q":
            return np.zeros_like(K)
        return K

    def inputs(self, S, G, K) -> np.ndarray:
        return np.column_stack([self.env.encode_states(S), self.env.encode_goals(G),
                                self._cond_feature(K)])

    # evaluation

    def logits(self, S, G, K) -> np.ndarray:
        if self.backend == "tabular":
            return self.net.logits(np.asarray(S, dtype=np.int64), np.asarray(G, dtype=np.int64),
                                   self._cond_index(K))
        return self.net.logits(self.inputs(S, G, K))

    def action_values(self, S, G, K) -> np.ndarray:
        """``(B, n_actions)`` raw approximator outputs in ``(0, 1)``."""
        return sigmoid(self.logits(S, G, K))

    def predict(self, S, G, K) -> np.ndarray:
        """Outputs with the known base cases applied: goal satisfied -> 1
        (C and Q), terminal -> 0, and for C/A ``h = 0`` -> ``G(s, g)``."""
        out = self.action_values(S, G, K)
        hit = self.env.goal_check_batch(S, G)
        term = self.env.terminal_batch(S)
        # A treats a terminal state as a sink even when it satisfies g
        dead = term if self.variant == "A" else term & ~hit
        out = np.where(dead[:, None], 0.0, out)
        if self.variant in ("C", "A"):
            zero = np.asarray(K) == 0
            out = np.where(zero[:, None], hit[:, None].astype(float), out)
        if self.variant in ("C", "Q"):
            out = np.where(hit[:, None], 1.0, out)
        return out

    # training

    def loss_and_grad(self, S, A, G, K, y, loss: str = "bce"):
        """Mean loss over the batch and its gradient for the chosen actions."""
        lossf, gradf = LOSSES[loss]
        S = np.asarray(S)
        A = np.asarray(A, dtype=np.int64)
        rows = np.arange(len(A))
        B = len(A)
        if B == 0:
            raise ValueError("empty batch")
        if self.backend == "tabular":
            Si, Gi, Ki = np.asarray(S, dtype=np.int64), np.asarray(G, dtype=np.int64), self._cond_index(K)
            z = self.net.logits(Si, Gi, Ki)[rows, A]
            p = sigmoid(z)
            value = (bce_loss_logits(z, y) if loss == "bce" else lossf(p, y)).mean()
            d = np.zeros((B, self.net.n_actions))
            d[rows, A] = gradf(p, y) / B
            return value, self.net.grad(Si, Gi, Ki, d)
        Z, acts = self.net.logits_cache(self.inputs(S, G, K))
        z = Z[rows, A]
        p = sigmoid(z)
        value = (bce_loss_logits(z, y) if loss == "bce" else lossf(p, y)).mean()
        d = np.zeros_like(Z)
        d[rows, A] = gradf(p, y) / B
        return value, self.net.grad(acts, d)

    @property
    def params(self) -> list[np.ndarray]:
        return self.net.params

    def copy_to_target(self) -> "TargetParams":
        return TargetParams(self)

    # checkpoints

    def to_dict(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "variant": self.variant,
            "backend": self.backend,
            "encoding": {"cond": {"C": "h/h_max", "A": "h/h_max", "D": "gamma", "Q": "none"}[self.variant],
                         "h_max": self.h_max,
                         "gammas": None if self.gammas is None else self.gammas.tolist(),
                         "env": self.env.spec.name},
            "layer_sizes": self.net.layer_sizes(),
            "weights": [p.ravel().tolist() for p in self.net.params],
            "shapes": [list(p.shape) for p in self.net.params],
            "seed": self.seed,
            "step": self.step,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, env, d: dict) -> "AccessFn":
        if d.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('format_version')}")
        enc = d["encoding"]
        sizes = d["layer_sizes"]
        hidden = tuple(sizes[1:-1]) if d["backend"] == "mlp" else ()
        fn = cls(env, d["variant"], d["backend"], h_max=enc["h_max"], hidden=hidden,
                 gammas=enc["gammas"], seed=d["seed"])
        if fn.net.layer_sizes() != sizes:
            raise ValueError(f"checkpoint layer sizes {sizes} do not match environment")
        fn.net.params = [np.array(w, dtype=float).reshape(shape) for w, shape in zip(d["weights"], d["shapes"])]
        fn.step = d["step"]
        return fn

    @classmethod
    def load(cls, env, path) -> "AccessFn":
        with open(path) as fh:
            return cls.from_dict(env, json.load(fh))


class TargetParams:
    """Frozen snapshot of an ``AccessFn``; evaluates like the source did at copy time."""

    def __init__(self, fn: AccessFn):
        self._fn = object.__new__(AccessFn)
        self._fn.__dict__.update(fn.__dict__)
        net = object.__new__(type(fn.net))
        net.__dict__.update(fn.net.__dict__)
        net.params = [p.copy() for p in fn.net.params]
        self._fn.net = net

    @property
    def params(self) -> list[np.ndarray]:
        return self._fn.net.params

    def action_values(self, S, G, K) -> np.ndarray:
        return self._fn.action_values(S, G, K)

    def predict(self, S, G, K) -> np.ndarray:
        return self._fn.predict(S, G, K)
