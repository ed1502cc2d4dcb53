"""Neural-network Lyapunov candidates, hinge losses and ADAM training.

``V(x) = ||phi(e(x)) - phi(e(0))||^2 + a ||x||^2`` (squared wrapper) or
``V(x) = |phi(e(x)) - phi(e(0))| + a ||x||`` (abs wrapper, scalar phi), with
``phi`` a tanh MLP and ``e`` an input embedding.

Derivatives of V along vector fields are built as forward-mode tangents
inside the autodiff graph, so the losses (which contain Vdot) can be
differentiated in reverse mode with respect to the weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bench import Box, SampleSet, UncertainSystem, make_rng
from .uncertainty import AmbiguityConfig

WRAPPERS = ("squared", "abs")
EMBEDDINGS = ("identity", "pendulum")
LOSSES = ("lf", "cc", "drcc")
RESAMPLE = ("every-epoch", "once")


class TrainingDivergence(RuntimeError):
    """Loss became non-finite; carries the last finite model and the trace."""

    def __init__(self, message: str, model: "MlpLyapunov", losses: list[float], epoch: int):
        super().__init__(message)
        self.model = model
        self.losses = losses
        self.epoch = epoch


def embedding_dim(kind: str, n: int) -> int:
    if kind == "identity":
        return n
    if kind == "pendulum":
        if n != 2:
            raise ValueError("pendulum embedding needs a 2-D state (theta, omega)")
        return 3
    raise ValueError(f"unknown embedding {kind!r}")


class MlpLyapunov:
    """tanh MLP with a positive-definite wrapper.

    ``weights[l]`` has shape (out, in); ``biases[l]`` has shape (out,).
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        wrapper: str = "abs",
        alpha_hat: float = 0.05,
        embedding: str = "identity",
        n_state: int | None = None,
    ):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if wrapper not in WRAPPERS:
            raise ValueError(f"unknown wrapper {wrapper!r}")
        if embedding not in EMBEDDINGS:
            raise ValueError(f"unknown embedding {embedding!r}")
        if not alpha_hat > 0:
            raise ValueError("alpha_hat must be positive")
        if wrapper == "abs" and self.layer_sizes[-1] != 1:
            raise ValueError("abs wrapper needs a scalar network output")
        self.wrapper = wrapper
        self.alpha_hat = float(alpha_hat)
        self.embedding = embedding
        self.n = int(n_state) if n_state is not None else (2 if embedding == "pendulum" else self.layer_sizes[0])
        if embedding_dim(embedding, self.n) != self.layer_sizes[0]:
            raise ValueError(f"embedding {embedding!r} of a {self.n}-D state does not match input size {self.layer_sizes[0]}")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64).ravel() for b in biases]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[l + 1], self.layer_sizes[l]) or b.shape != (self.layer_sizes[l + 1],):
                raise ValueError(f"layer {l}: bad weight/bias shape {w.shape}/{b.shape}")

    @classmethod
    def xavier(cls, layer_sizes, rng: np.random.Generator, **kwargs) -> MlpLyapunov:
        """Xavier-uniform weights, zero biases."""
        ws, bs = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            a = math.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
            bs.append(np.zeros(fan_out))
        return cls(layer_sizes, ws, bs, **kwargs)

    def copy(self) -> MlpLyapunov:
        return MlpLyapunov(
            self.layer_sizes, self.weights, self.biases, self.wrapper, self.alpha_hat, self.embedding, self.n
        )

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_params(self, values: Sequence[np.ndarray]) -> None:
        values = list(values)
        self.weights = [np.array(v) for v in values[0::2]]
        self.biases = [np.array(v) for v in values[1::2]]

    def _check(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n:
            raise ValueError(f"arity mismatch: states have {x.shape[1]} columns, model expects {self.n}")
        return x

    # numeric API (Candidate protocol)
    def value(self, x) -> np.ndarray:
        x = self._check(x)
        return _graph(self, _leaves(self, False), x, None)[0].value

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=np.float64)[None])[0])

    def grad(self, x) -> np.ndarray:
        """Input gradient by reverse-mode differentiation, (P, n)."""
        x = self._check(x)
        xt = Tensor(x, requires_grad=True)
        v = _graph(self, _leaves(self, False), xt, None)[0]
        ad.sum_(v).backward()
        return xt.grad

    def to_dict(self) -> dict:
        return {
            "format": "mlp-lyapunov/1",
            "layer_sizes": list(self.layer_sizes),
            "wrapper": self.wrapper,
            "alpha_hat": self.alpha_hat,
            "embedding": self.embedding,
            "n_state": self.n,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d) -> MlpLyapunov:
        sizes = d["layer_sizes"]
        ws = [np.asarray(w, dtype=np.float64).reshape(sizes[l + 1], sizes[l]) for l, w in enumerate(d["weights"])]
        return cls(sizes, ws, d["biases"], d["wrapper"], d["alpha_hat"], d["embedding"], d.get("n_state"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> MlpLyapunov:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _leaves(model: MlpLyapunov, requires_grad: bool) -> list[Tensor]:
    return [Tensor(p, requires_grad=requires_grad) for p in model.params]


def _embed(model, x: Tensor, dirs: Tensor | None):
    """Embedded input and its tangents; dirs has shape (K, P, n)."""
    if model.embedding == "identity":
        return x, dirs
    th, om = x[:, 0], x[:, 1]
    h = ad.stack([ad.sin(th), ad.cos(th), om], axis=1)
    if dirs is None:
        return h, None
    c, s = ad.cos(th), ad.sin(th)
    dth, dom = dirs[:, :, 0], dirs[:, :, 1]
    dh = ad.stack([dth * c, -(dth * s), dom], axis=2)
    return h, dh


def _graph(model: MlpLyapunov, leaves: list[Tensor], x, dirs):
    """V at states x (P,) and, if ``dirs`` (K, P, n) is given, dV along each direction (K, P)."""
    x = ad.as_tensor(x)
    dirs = ad.as_tensor(dirs) if dirs is not None else None
    h, dh = _embed(model, x, dirs)
    zero_h, _ = _embed(model, Tensor(np.zeros((1, model.n))), None)
    n_layers = len(model.layer_sizes) - 1
    for l in range(n_layers):
        w, b = leaves[2 * l], leaves[2 * l + 1]
        z = h @ w.T + b
        z0 = zero_h @ w.T + b
        if dh is not None:
            dz = dh @ w.T
        if l < n_layers - 1:
            h = ad.tanh(z)
            zero_h = ad.tanh(z0)
            if dh is not None:
                dh = dz * (1.0 - ad.square(h))
        else:
            h, zero_h = z, z0
            if dh is not None:
                dh = dz
    diff = h - zero_h  # (P, out)
    a = model.alpha_hat
    sq = ad.sum_(ad.square(x), axis=1)
    if model.wrapper == "squared":
        v = ad.sum_(ad.square(diff), axis=1) + a * sq
    else:
        v = ad.abs_(diff[:, 0]) + a * ad.sqrt(sq)
    if dirs is None:
        return v, None
    # tangent of the wrapper along each direction
    xdir = ad.sum_(dirs * x, axis=2)  # (K, P)
    if model.wrapper == "squared":
        dv = 2.0 * ad.sum_(dh * diff, axis=2) + (2.0 * a) * xdir
    else:
        sign = np.sign(diff.value[:, 0])
        norm = np.sqrt(sq.value)
        inv = np.where(norm > 0, 1.0 / np.where(norm > 0, norm, 1.0), 0.0)
        dv = dh[:, :, 0] * sign + a * (xdir * _inv_norm(sq, inv))
    return v, dv


def _inv_norm(sq: Tensor, inv: np.ndarray) -> Tensor:
    """1/||x|| with derivative -x/||x||^3 expressed through sq = ||x||^2 (0 at the origin)."""
    return Tensor(inv, _parents=[(sq, lambda g: -0.5 * g * inv**3)])


def _field_dirs(system: UncertainSystem, x: np.ndarray) -> np.ndarray:
    """Directions (m+1, P, n): f(x), d_1(x), ..., d_m(x)."""
    f = system.f(x)
    d = system.d(x)
    return np.concatenate([f[None], np.moveaxis(d, 2, 0)], axis=0)


def _lie_graph(model, leaves, system, x):
    if system.n != model.n:
        raise ValueError(f"dimension mismatch: system n={system.n}, model n={model.n}")
    dirs = _field_dirs(system, x)
    _, dv = _graph(model, leaves, x, dirs)
    return dv  # (m+1, P)


def lie_terms(model: MlpLyapunov, system: UncertainSystem, x) -> np.ndarray:
    """(P, m+1): grad V . f and grad V . d_j at each state."""
    x = model._check(x)
    return _lie_graph(model, _leaves(model, False), system, x).value.T


def vdot(model: MlpLyapunov, system: UncertainSystem, x, xi) -> np.ndarray:
    """grad V(x) . (f(x) + d(x) xi) for a batch of states and one disturbance."""
    xi = np.asarray(xi, dtype=np.float64).ravel()
    if xi.size != system.m:
        raise ValueError(f"dimension mismatch: xi has length {xi.size}, system has m={system.m}")
    lt = lie_terms(model, system, x)
    return lt[:, 0] + lt[:, 1:] @ xi


def _samples_array(samples, m: int) -> np.ndarray:
    arr = samples.samples if isinstance(samples, SampleSet) else np.atleast_2d(np.asarray(samples, dtype=float))
    if arr.shape[1] != m:
        raise ValueError(f"samples have length {arr.shape[1]}, system has m={m}")
    return arr


def _loss_graph(model, leaves, kind, states, system, gamma, samples=None, ambiguity=None):
    x = model._check(states)
    dv = _lie_graph(model, leaves, system, x)  # (m+1, P)
    margin = gamma * np.linalg.norm(x, axis=1)
    if kind == "lf":
        return ad.mean(ad.relu(dv[0] + margin))
    xi = _samples_array(samples, system.m)
    vd = dv[0] + Tensor(xi) @ dv[1:]  # (N, P)
    worst = ad.max_(vd, axis=0)
    if kind == "cc":
        return ad.mean(ad.relu(worst + margin))
    if kind != "drcc":
        raise ValueError(f"unknown loss kind {kind!r}")
    if ambiguity.beta > 1.0 / xi.shape[0]:
        raise ValueError(f"beta exceeds 1/N (beta={ambiguity.beta}, N={xi.shape[0]})")
    inner = ambiguity.beta * worst + margin
    if ambiguity.radius > 0 and system.m > 0:
        lip = ad.max_(ad.abs_(dv[1:]), axis=0)
        inner = ambiguity.radius * lip + inner
    return ad.mean(ad.relu(inner))


def loss_lf(model, states, system, gamma: float) -> float:
    return float(_loss_graph(model, _leaves(model, False), "lf", states, system, gamma).value)


def loss_cc(model, states, system, samples, gamma: float) -> float:
    return float(_loss_graph(model, _leaves(model, False), "cc", states, system, gamma, samples).value)


def loss_drcc(model, states, system, samples, gamma: float, cfg: AmbiguityConfig) -> float:
    return float(_loss_graph(model, _leaves(model, False), "drcc", states, system, gamma, samples, cfg).value)


def loss_and_grad(model, kind, states, system, gamma, samples=None, ambiguity=None):
    """Loss value and gradients with respect to ``model.params``."""
    leaves = _leaves(model, True)
    loss = _loss_graph(model, leaves, kind, states, system, gamma, samples, ambiguity)
    grads = ad.grad(loss, leaves)
    return float(loss.value), grads


class Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            out.append(p - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps))
        return out


@dataclass(frozen=True)
class TrainingConfig:
    loss: str = "lf"
    hidden: tuple[int, ...] = (16, 16)
    out_dim: int = 1
    wrapper: str = "abs"
    embedding: str = "identity"
    alpha_hat: float = 0.05
    gamma: float = 0.1
    batch_size: int = 500
    epochs: int = 2000
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    region: Box | None = None
    ambiguity: AmbiguityConfig = field(default_factory=AmbiguityConfig)
    resample: str = "every-epoch"

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.resample not in RESAMPLE:
            raise ValueError(f"unknown resample schedule {self.resample!r}; choose from {RESAMPLE}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not self.gamma > 0 or not self.lr > 0:
            raise ValueError("gamma and lr must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.region is not None:
            object.__setattr__(self, "region", tuple(tuple(map(float, r)) for r in self.region))

    def layer_sizes(self, n: int) -> tuple[int, ...]:
        return (embedding_dim(self.embedding, n),) + self.hidden + (self.out_dim,)

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "hidden": list(self.hidden),
            "out_dim": self.out_dim,
            "wrapper": self.wrapper,
            "embedding": self.embedding,
            "alpha_hat": self.alpha_hat,
            "gamma": self.gamma,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
            "region": [list(r) for r in self.region] if self.region is not None else None,
            "ambiguity": {"radius": self.ambiguity.radius, "beta": self.ambiguity.beta},
            "resample": self.resample,
        }


@dataclass
class TrainResult:
    model: MlpLyapunov
    losses: list[float]
    config: TrainingConfig

    def loss_csv(self) -> str:
        return "epoch,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(self.losses))


# stream ids for make_rng
_INIT_STREAM = 0
_BATCH_STREAM = 1


def init_model(config: TrainingConfig, n: int) -> MlpLyapunov:
    rng = make_rng(config.seed, _INIT_STREAM)
    return MlpLyapunov.xavier(
        config.layer_sizes(n), rng, wrapper=config.wrapper, alpha_hat=config.alpha_hat, embedding=config.embedding, n_state=n
    )


def train(config: TrainingConfig, system: UncertainSystem, samples=None, model: MlpLyapunov | None = None) -> TrainResult:
    """ADAM on the configured hinge loss, one full-batch step per epoch.

    With ``resample="every-epoch"`` each epoch draws a fresh uniform batch;
    with ``"once"`` the batch of epoch 0 is reused throughout.
    ``losses[e]`` is the loss of the batch used at epoch ``e`` before its step.
    """
    if config.loss != "lf":
        if samples is None:
            raise ValueError(f"{config.loss} loss needs offline samples")
        n_samples = _samples_array(samples, system.m).shape[0]
        if config.loss == "drcc":
            config.ambiguity.check_samples(n_samples)
    model = model.copy() if model is not None else init_model(config, system.n)
    region = config.region if config.region is not None else system.region
    lo = np.array([r[0] for r in region])
    hi = np.array([r[1] for r in region])
    opt = Adam(model.params, config.lr, config.beta1, config.beta2, config.adam_eps)
    losses: list[float] = []
    last_good = model.copy()
    for epoch in range(config.epochs):
        batch_id = epoch if config.resample == "every-epoch" else 0
        states = make_rng(config.seed, _BATCH_STREAM, batch_id).uniform(lo, hi, size=(config.batch_size, system.n))
        loss, grads = loss_and_grad(model, config.loss, states, system, config.gamma, samples, config.ambiguity)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDivergence(f"loss diverged at epoch {epoch}", last_good, losses, epoch)
        losses.append(loss)
        last_good = model.copy()
        model.set_params(opt.step(model.params, grads))
    return TrainResult(model, losses, config)


def default_config(system_name: str, **overrides) -> TrainingConfig:
    """Experiment defaults for the builtin systems."""
    if system_name == "pendulum":
        base = TrainingConfig(
            hidden=(64, 64, 64), out_dim=2, wrapper="squared", embedding="pendulum", alpha_hat=0.5, lr=0.002
        )
    else:
        base = TrainingConfig()
    return replace(base, **overrides)
