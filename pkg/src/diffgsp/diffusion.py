"""Diffusion LMS (ATC / CTA) over graphs with random vertex sampling.

The Monte Carlo driver advances all replicas together as one ``(R, N, |F|)``
array. Randomness comes from per-replica, per-purpose streams derived from a
single master seed, so e.g. changing noise variances leaves the sampling draws
untouched.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch, Disconnected, EmptySamplingSet
from .graph_core import FrequencySupport, Graph
from .sampling import SamplingDesign

ATC = "atc"
CTA = "cta"
MODES = (ATC, CTA)

DIVERGENCE_LEVEL = 1e12
STOCHASTIC_TOL = 1e-12
CHUNK = 256

# stream purposes for seed splitting
SAMPLING, NOISE, SIGNAL, INIT = 0, 1, 2, 3


def replica_rng(seed: int, replica: int, purpose: int) -> np.random.Generator:
    """Generator for one (replica, purpose) pair of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replica), int(purpose))))


@dataclass(frozen=True)
class CombinationMatrix:
    """Nonnegative, graph-supported, row-stochastic mixing weights."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch(f"combination matrix must be square, got {w.shape}")
        if np.any(w < 0):
            raise ConfigInvalid("combination weights must be nonnegative")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
            raise ConfigInvalid("combination matrix must be row-stochastic")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n_nodes(self) -> int:
        return self.w.shape[0]

    @property
    def doubly_stochastic(self) -> bool:
        return bool(np.all(np.abs(self.w.sum(axis=0) - 1.0) <= STOCHASTIC_TOL))

    def matches(self, g: Graph) -> bool:
        """True when ``w_ij = 0`` for every non-neighbour ``j`` of ``i``."""
        allowed = (g.adjacency > 0) | np.eye(g.n_nodes, dtype=bool)
        return bool(np.all(self.w[~allowed] == 0))

    @classmethod
    def identity(cls, n: int) -> "CombinationMatrix":
        return cls(np.eye(n))


def metropolis_weights(g: Graph) -> CombinationMatrix:
    """Metropolis rule on the unweighted topology of ``g``."""
    if not g.connected:
        raise Disconnected("Metropolis weights need a connected graph")
    link = g.adjacency > 0
    deg = link.sum(axis=1)
    w = np.where(link, 1.0 / (1.0 + np.maximum(deg[:, None], deg[None, :])), 0.0)
    np.fill_diagonal(w, 0.0)
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return CombinationMatrix(w)


@dataclass(frozen=True)
class DiffusionConfig:
    step_sizes: np.ndarray
    combination: CombinationMatrix
    mode: str = ATC

    def __post_init__(self):
        mu = np.array(self.step_sizes, dtype=float, copy=True).reshape(-1)
        if mu.size == 1:
            mu = np.full(self.combination.n_nodes, mu[0])
        if mu.shape[0] != self.combination.n_nodes:
            raise DimensionMismatch("one step size per node is required")
        if np.any(mu <= 0):
            raise ConfigInvalid("step sizes must be positive")
        if self.mode not in MODES:
            raise ConfigInvalid(f"unknown diffusion mode {self.mode!r}")
        mu.setflags(write=False)
        object.__setattr__(self, "step_sizes", mu)

    @property
    def n_nodes(self) -> int:
        return self.combination.n_nodes


@dataclass(frozen=True)
class NodeState:
    """GFT estimates ``s_i[n]`` of all nodes (row ``i``) at iteration ``n``."""

    s: np.ndarray
    iteration: int = 0

    def estimates(self, support: FrequencySupport) -> np.ndarray:
        """Reconstructed node values ``x_i = c_i^T s_i``."""
        return np.einsum("if,if->i", support.u_f, self.s)


def step_size_bound(support: FrequencySupport, design: SamplingDesign) -> float:
    """Mean-stability step-size limit ``2 / ((1/N) sum_{i in S} p_i ||c_i||^2)``."""
    members = list(design.expected_set)
    if not members:
        raise EmptySamplingSet("no node has a positive sampling probability")
    c2 = np.sum(support.u_f[members] ** 2, axis=1)
    denom = np.sum(design.probabilities[members] * c2) / support.n_nodes
    return math.inf if denom == 0 else 2.0 / denom


def _adapt(s, d, y, mu, c):
    # s: (R, N, F); d, y: (R, N)
    innov = d * (y - np.einsum("nf,rnf->rn", c, s))
    return s + (mu[None, :] * innov)[:, :, None] * c[None, :, :]


def _combine(w, s):
    return np.einsum("ij,rjf->rif", w, s)


def diffusion_kernel(s, d, y, config: DiffusionConfig, c):
    if config.mode == ATC:
        return _combine(config.combination.w, _adapt(s, d, y, config.step_sizes, c))
    return _adapt(_combine(config.combination.w, s), d, y, config.step_sizes, c)


def _check_step(state: NodeState, config: DiffusionConfig, d, y, support: FrequencySupport):
    s = np.asarray(state.s, dtype=float)
    n, f = support.n_nodes, support.bandwidth
    if s.shape != (n, f) or config.n_nodes != n:
        raise DimensionMismatch(f"state must be ({n}, {f}) and match the configuration")
    d = np.asarray(d, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if d.shape != (n,) or y.shape != (n,):
        raise DimensionMismatch("one sampling flag and one observation per node")
    return s, d, y


def atc_step(state: NodeState, config: DiffusionConfig, d, y, support: FrequencySupport) -> NodeState:
    """Adapt with local data, then average neighbours' intermediate estimates."""
    s, d, y = _check_step(state, config, d, y, support)
    cfg = config if config.mode == ATC else DiffusionConfig(config.step_sizes, config.combination, ATC)
    out = diffusion_kernel(s[None], d[None], y[None], cfg, support.u_f)[0]
    return NodeState(out, state.iteration + 1)


def cta_step(state: NodeState, config: DiffusionConfig, d, y, support: FrequencySupport) -> NodeState:
    """Average neighbours' estimates first, then adapt with local data."""
    s, d, y = _check_step(state, config, d, y, support)
    cfg = config if config.mode == CTA else DiffusionConfig(config.step_sizes, config.combination, CTA)
    out = diffusion_kernel(s[None], d[None], y[None], cfg, support.u_f)[0]
    return NodeState(out, state.iteration + 1)


# ---------------------------------------------------------------------------
# signal sources


class _Buffered:
    """Per-replica streams served one step at a time from chunked draws."""

    def __init__(self, rngs, width: int, kind: str):
        self.rngs, self.width, self.kind = rngs, width, kind
        self.pos = CHUNK
        self.buf = None

    def next(self) -> np.ndarray:
        if self.pos == CHUNK:
            draw = (lambda g: g.random((CHUNK, self.width))) if self.kind == "uniform" else \
                (lambda g: g.standard_normal((CHUNK, self.width)))
            self.buf = np.stack([draw(g) for g in self.rngs])
            self.pos = 0
        out = self.buf[:, self.pos]
        self.pos += 1
        return out


class StaticSignal:
    """Time-invariant node signal shared by all replicas."""

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)

    def trajectory(self, n_replicas: int, rngs) -> Iterator[np.ndarray]:
        while True:
            yield self.x


class TrackingSignal:
    """Bandlimited signal whose GFT follows ``s[n+1] = theta s[n] + u[n]``.

    ``u[n] = sin(2 pi f_o n) 1 + w[n]`` with unit-variance white ``w``.
    Each replica draws its own ``w`` sequence.
    """

    def __init__(self, support: FrequencySupport, theta: float = 0.99, f_o: float = 1e-3,
                 noise_scale: float = 1.0, s_init=None):
        self.support, self.theta, self.f_o, self.noise_scale = support, theta, f_o, noise_scale
        self.s_init = np.zeros(support.bandwidth) if s_init is None else np.asarray(s_init, dtype=float)

    def coefficients(self, n_replicas: int, rngs) -> Iterator[np.ndarray]:
        f = self.support.bandwidth
        w = _Buffered(rngs, f, "normal")
        s = np.broadcast_to(self.s_init, (n_replicas, f)).copy()
        n = 0
        while True:
            yield s
            s = self.theta * s + math.sin(2 * math.pi * self.f_o * n) + self.noise_scale * w.next()
            n += 1

    def trajectory(self, n_replicas: int, rngs) -> Iterator[np.ndarray]:
        for s in self.coefficients(n_replicas, rngs):
            yield s @ self.support.u_f.T


class SequenceSignal:
    """Deterministic node-signal sequence given as a callable ``n -> x[n]``."""

    def __init__(self, fn):
        self.fn = fn

    def trajectory(self, n_replicas: int, rngs) -> Iterator[np.ndarray]:
        n = 0
        while True:
            yield np.asarray(self.fn(n), dtype=float)
            n += 1


# ---------------------------------------------------------------------------
# Monte Carlo driver


@dataclass
class Experiment:
    """Everything one Monte Carlo run needs.

    ``config.combination`` carries the communication topology; ``support``
    carries the processing basis.
    """

    support: FrequencySupport
    design: SamplingDesign
    config: DiffusionConfig
    source: object
    horizon: int
    init: str = "zero"
    init_scale: float = 1.0
    window_start: Optional[int] = None
    record_nodes: bool = False
    record_trace: bool = False
    record_mean_error: bool = False


@dataclass
class SimulationResult:
    squared_error: np.ndarray          # (R, T+1) network squared error per replica
    diverged: np.ndarray               # (R,) bool
    node_window_mean: np.ndarray       # (R, N) per-node mean squared error over the window
    window_start: int
    node_squared_error: Optional[np.ndarray] = None   # (R, T+1, N)
    trace_estimate: Optional[np.ndarray] = None       # (T+1, N), replica 0
    trace_truth: Optional[np.ndarray] = None          # (T+1, N), replica 0
    mean_error: Optional[np.ndarray] = None           # (T+1, N, F) replica-averaged s_i - s_o
    extra: dict = field(default_factory=dict)

    @property
    def n_diverged(self) -> int:
        return int(self.diverged.sum())

    @property
    def alive(self) -> np.ndarray:
        return ~self.diverged

    @property
    def mean_squared_error(self) -> np.ndarray:
        """Replica-averaged network squared error, diverged replicas excluded."""
        if not self.alive.any():
            return np.full(self.squared_error.shape[1], np.nan)
        return self.squared_error[self.alive].mean(axis=0)

    def steady_state(self, start: Optional[int] = None) -> float:
        start = self.window_start if start is None else start
        return float(self.mean_squared_error[start:].mean())

    def node_steady_state(self) -> np.ndarray:
        return self.node_window_mean[self.alive].mean(axis=0)

    def node_mean_squared_error(self) -> np.ndarray:
        if self.node_squared_error is None:
            raise ValueError("run with record_nodes=True to keep per-node trajectories")
        return self.node_squared_error[self.alive].mean(axis=0)


def _initial_state(exp: Experiment, n_replicas: int, seed: int) -> np.ndarray:
    n, f = exp.support.n_nodes, exp.support.bandwidth
    if exp.init == "zero":
        return np.zeros((n_replicas, n, f))
    if exp.init == "random":
        return np.stack([exp.init_scale * replica_rng(seed, r, INIT).standard_normal((n, f))
                         for r in range(n_replicas)])
    raise ConfigInvalid(f"unknown initialisation {exp.init!r}")


def run_simulation(exp: Experiment, replicas: int, seed: int) -> SimulationResult:
    """Monte Carlo runs of the diffusion recursion.

    Replica ``r`` uses streams derived from ``(seed, r, purpose)``; results are
    bit-identical for identical inputs.
    """
    support, design, config = exp.support, exp.design, exp.config
    n, f, T = support.n_nodes, support.bandwidth, int(exp.horizon)
    if replicas < 1:
        raise ConfigInvalid("at least one replica is required")
    if T < 0:
        raise ConfigInvalid("horizon must be nonnegative")
    if design.n_nodes != n or config.n_nodes != n:
        raise ConfigInvalid("support, design and combination matrix disagree on the node count")
    window_start = T // 2 if exp.window_start is None else int(exp.window_start)
    if not 0 <= window_start <= T:
        raise ConfigInvalid("window start must lie within the horizon")

    c = np.asarray(support.u_f)
    p = design.probabilities
    sigma = np.sqrt(design.noise_variances)
    samp = _Buffered([replica_rng(seed, r, SAMPLING) for r in range(replicas)], n, "uniform")
    noise = _Buffered([replica_rng(seed, r, NOISE) for r in range(replicas)], n, "normal")
    truth = exp.source.trajectory(replicas, [replica_rng(seed, r, SIGNAL) for r in range(replicas)])
    coeffs = None
    if exp.record_mean_error:
        if not hasattr(exp.source, "coefficients") and not isinstance(exp.source, StaticSignal):
            raise ConfigInvalid("mean error needs a bandlimited source")
        if isinstance(exp.source, StaticSignal):
            s_o = support.u_f.T @ exp.source.x
            coeffs = itertools.repeat(s_o)
        else:
            coeffs = exp.source.coefficients(replicas, [replica_rng(seed, r, SIGNAL) for r in range(replicas)])

    s = _initial_state(exp, replicas, seed)
    sq = np.empty((replicas, T + 1))
    diverged = np.zeros(replicas, dtype=bool)
    node_sum = np.zeros((replicas, n))
    node_err = np.empty((replicas, T + 1, n)) if exp.record_nodes else None
    tr_est = np.empty((T + 1, n)) if exp.record_trace else None
    tr_true = np.empty((T + 1, n)) if exp.record_trace else None
    mean_err = np.empty((T + 1, n, f)) if exp.record_mean_error else None

    x_o = np.broadcast_to(next(truth), (replicas, n))
    for t in range(T + 1):
        est = np.einsum("nf,rnf->rn", c, s)
        err2 = (est - x_o) ** 2
        tot = err2.sum(axis=1)
        bad = ~np.isfinite(tot) | (tot > DIVERGENCE_LEVEL)
        if bad.any():
            diverged |= bad
            s[bad] = 0.0
            err2[bad] = 0.0
            tot = np.where(bad, np.nan, tot)
        sq[:, t] = tot
        if node_err is not None:
            node_err[:, t] = err2
        if t >= window_start:
            node_sum += err2
        if tr_est is not None:
            tr_est[t], tr_true[t] = est[0], x_o[0]
        if mean_err is not None:
            mean_err[t] = (s - next(coeffs)[..., None, :]).mean(axis=0)
        if t == T:
            break
        d = (samp.next() < p).astype(float)
        y = d * (x_o + sigma * noise.next())
        s = diffusion_kernel(s, d, y, config, c)
        x_o = np.broadcast_to(next(truth), (replicas, n))

    sq[diverged] = np.nan
    res = SimulationResult(
        squared_error=sq,
        diverged=diverged,
        node_window_mean=node_sum / (T + 1 - window_start),
        window_start=window_start,
        node_squared_error=node_err,
        trace_estimate=tr_est,
        trace_truth=tr_true,
        mean_error=None if (mean_err is None or diverged.any()) else mean_err,
    )
    return res


def to_db(x):
    """Decibels; zero maps to -inf."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def write_trajectory_csv(path, result: SimulationResult, per_node: bool = False) -> None:
    mse = result.mean_squared_error
    nodes = result.node_mean_squared_error() if per_node else None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["iteration", "mean_sq_error", "mean_sq_error_db"]
        if nodes is not None:
            head += [f"node_{i}" for i in range(nodes.shape[1])]
        w.writerow(head)
        db = to_db(mse)
        for t in range(mse.shape[0]):
            row = [t, repr(float(mse[t])), repr(float(db[t]))]
            if nodes is not None:
                row += [repr(float(v)) for v in nodes[t]]
            w.writerow(row)
