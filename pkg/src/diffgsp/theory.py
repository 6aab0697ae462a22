"""Mean-square theory of ATC diffusion with random vertex sampling.

Block layout is node-major: block ``i`` of an ``N|F|``-vector holds node
``i``'s ``|F|`` GFT error coefficients. ``vec`` stacks columns.

The weighting-matrix operator ``H`` maps ``Sigma`` to

    E[(I - K) W^T Sigma W (I - K)],   K = M D[n] Q,

with the exact second moments ``E[d_i d_j]`` (``p_i`` on the diagonal,
``p_i p_j`` off it). It is applied in matrix form; the explicit
``(N|F|)^2``-square matrix is only built for small problems.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .diffusion import ATC, DiffusionConfig, step_size_bound
from .errors import (
    ConfigInvalid,
    DimensionCap,
    DimensionMismatch,
    EmptySamplingSet,
    NonConvergent,
    NotSymmetric,
    UnstableH,
)
from .graph_core import FrequencySupport
from .sampling import SamplingDesign, reconstruction_condition

H_EXPLICIT_CAP = 4096
STABILITY_MARGIN = 1e-9
FIXED_POINT_TOL = 1e-12
MAX_ITERATIONS = 10**6
_BLOWUP = 1e12


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def _block_diag(blocks: np.ndarray) -> np.ndarray:
    n, f, _ = blocks.shape
    out = np.zeros((n * f, n * f))
    for i in range(n):
        out[i * f:(i + 1) * f, i * f:(i + 1) * f] = blocks[i]
    return out


@dataclass(frozen=True)
class TheoryModel:
    """Block operators of the error recursion ``e+ = W^(I - M D Q) e + W^ M D g``."""

    m_block: np.ndarray
    q_block: np.ndarray
    g_block: np.ndarray
    p_hat: np.ndarray
    w_hat: np.ndarray
    rows: np.ndarray          # c_i as rows, (N, |F|)
    step_sizes: np.ndarray
    probabilities: np.ndarray
    noise_variances: np.ndarray
    w: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.rows.shape[0]

    @property
    def bandwidth(self) -> int:
        return self.rows.shape[1]

    @property
    def dim(self) -> int:
        return self.n_nodes * self.bandwidth

    @property
    def k_mean(self) -> np.ndarray:
        """``M P^ Q``, the expected adaptation matrix."""
        return self.m_block @ self.p_hat @ self.q_block

    @property
    def b_matrix(self) -> np.ndarray:
        return self.w_hat @ (np.eye(self.dim) - self.k_mean)

    @property
    def noise_forcing(self) -> np.ndarray:
        """``W^ M P^ G M W^T``; its vec is the driving vector ``r``."""
        return self.w_hat @ self.m_block @ self.p_hat @ self.g_block @ self.m_block @ self.w_hat.T

    def node_weight(self, i: int) -> np.ndarray:
        """``R_i (x) c_i c_i^T``: picks node ``i``'s squared reconstruction error."""
        t = np.zeros((self.dim, self.dim))
        f = self.bandwidth
        t[i * f:(i + 1) * f, i * f:(i + 1) * f] = np.outer(self.rows[i], self.rows[i])
        return t


def build_theory(support: FrequencySupport, design: SamplingDesign, config: DiffusionConfig) -> TheoryModel:
    n, f = support.n_nodes, support.bandwidth
    if design.n_nodes != n or config.n_nodes != n:
        raise DimensionMismatch("support, design and configuration disagree on the node count")
    if config.mode != ATC:
        raise ConfigInvalid("the mean-square model covers the ATC recursion")
    c = np.array(support.u_f)
    mu = np.array(config.step_sizes)
    p = np.array(design.probabilities)
    s2 = np.array(design.noise_variances)
    eye_f = np.eye(f)
    outer = np.einsum("if,ig->ifg", c, c)
    return TheoryModel(
        m_block=np.kron(np.diag(mu), eye_f),
        q_block=_block_diag(outer),
        g_block=_block_diag(s2[:, None, None] * outer),
        p_hat=np.kron(np.diag(p), eye_f),
        w_hat=np.kron(config.combination.w, eye_f),
        rows=c,
        step_sizes=mu,
        probabilities=p,
        noise_variances=s2,
        w=np.array(config.combination.w),
    )


def _check_sigma(model: TheoryModel, sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"weighting matrix must be {model.dim}x{model.dim}")
    if np.any(np.abs(sigma - sigma.T) > 1e-10 * max(1.0, float(np.abs(sigma).max(initial=0.0)))):
        raise NotSymmetric("weighting matrix is not symmetric")
    return sigma


def _second_order_diag(model: TheoryModel, a: np.ndarray, exact: bool) -> np.ndarray:
    """Expected ``K A K`` with ``K = M D Q``."""
    k = model.k_mean
    out = k @ a @ k
    if exact:
        # diagonal blocks carry E[d_i^2] = p_i instead of p_i^2
        f, c = model.bandwidth, model.rows
        extra = model.step_sizes ** 2 * (model.probabilities - model.probabilities ** 2)
        for i in np.flatnonzero(extra):
            sl = slice(i * f, (i + 1) * f)
            q = c[i] @ a[sl, sl] @ c[i]
            out[sl, sl] += extra[i] * q * np.outer(c[i], c[i])
    return out


def _sandwich(model: TheoryModel, a: np.ndarray, exact: bool) -> np.ndarray:
    """``E[(I - K) A (I - K)]``."""
    k = model.k_mean
    return a - k @ a - a @ k + _second_order_diag(model, a, exact)


def apply_H(model: TheoryModel, sigma, exact: bool = True) -> np.ndarray:
    """Weighting-matrix update ``Sigma -> Sigma'``.

    ``exact=False`` replaces ``E[d_i^2]`` by ``p_i^2``, giving the small-step
    approximation ``B^T (x) B^T``.
    """
    sigma = _check_sigma(model, sigma)
    a = model.w_hat.T @ sigma @ model.w_hat
    out = _sandwich(model, a, exact)
    return 0.5 * (out + out.T)


def apply_H_adjoint(model: TheoryModel, cov, exact: bool = True) -> np.ndarray:
    """Adjoint of :func:`apply_H`: one step of the error-covariance recursion
    without the noise term."""
    cov = _check_sigma(model, cov)
    out = model.w_hat @ _sandwich(model, cov, exact) @ model.w_hat.T
    return 0.5 * (out + out.T)


def _check_cap(model: TheoryModel, cap: int):
    cols = model.dim ** 2
    if cols > cap:
        raise DimensionCap(f"explicit H would have {cols} columns (cap {cap})")


def build_H_explicit(model: TheoryModel, cap: int = H_EXPLICIT_CAP) -> np.ndarray:
    """Dense ``H`` assembled term by term from its Kronecker expansion."""
    _check_cap(model, cap)
    d, n, f = model.dim, model.n_nodes, model.bandwidth
    eye = np.eye(d)
    qpm = model.q_block @ model.p_hat @ model.m_block
    mid = np.kron(eye, eye) - np.kron(eye, qpm) - np.kron(qpm.T, eye)
    c_blocks = []
    for i in range(n):
        ci = np.zeros((d, d))
        ci[i * f:(i + 1) * f, i * f:(i + 1) * f] = np.outer(model.rows[i], model.rows[i])
        c_blocks.append(ci)
    p, mu = model.probabilities, model.step_sizes
    for i in range(n):
        for j in range(n):
            m2 = p[i] if i == j else p[i] * p[j]
            coef = mu[i] * mu[j] * m2
            if coef != 0.0:
                mid += coef * np.kron(c_blocks[i].T, c_blocks[j])
    return mid @ np.kron(model.w_hat.T, model.w_hat.T)


def build_H_approx(model: TheoryModel, cap: int = H_EXPLICIT_CAP) -> np.ndarray:
    """``B^T (x) B^T``, the small-step approximation of ``H``."""
    _check_cap(model, cap)
    bt = model.b_matrix.T
    return np.kron(bt, bt)


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0


def h_spectral_radius(model: TheoryModel, cap: int = 1600, iterations: int = 20000,
                      tol: float = 1e-12) -> float:
    """``rho(H)``; dense eigenvalues below ``cap`` columns, otherwise power
    iteration from the identity (``H`` preserves the PSD cone)."""
    if model.dim ** 2 <= cap:
        return spectral_radius(build_H_explicit(model, cap))
    x = np.eye(model.dim) / math.sqrt(model.dim)
    est = 0.0
    for _ in range(iterations):
        y = apply_H(model, x)
        nrm = float(np.linalg.norm(y))
        if nrm == 0.0:
            return 0.0
        if abs(nrm - est) <= tol * nrm:
            return nrm
        est, x = nrm, y / nrm
    return est


@dataclass(frozen=True)
class StabilityReport:
    b_spectral_radius: float
    dimension: int
    step_size_bound: float
    step_size_bound_ok: bool
    sampling_condition_ok: bool
    sampling_condition_norm: float

    @property
    def stable(self) -> bool:
        return self.b_spectral_radius < 1.0 - STABILITY_MARGIN

    @property
    def reconstructable(self) -> bool:
        """Signal recoverable: the expected set passes the localization test and B is stable."""
        return self.sampling_condition_ok and self.stable


def stability_report(model: TheoryModel, support: FrequencySupport, design: SamplingDesign,
                     config: DiffusionConfig) -> StabilityReport:
    ok_cond, norm = reconstruction_condition(support, design.expected_set)
    try:
        bound = step_size_bound(support, design)
    except EmptySamplingSet:
        bound = 0.0
    return StabilityReport(
        b_spectral_radius=spectral_radius(model.b_matrix),
        dimension=model.dim,
        step_size_bound=bound,
        step_size_bound_ok=bool(np.max(config.step_sizes) < bound),
        sampling_condition_ok=ok_cond,
        sampling_condition_norm=norm,
    )


def _geometric_sum(step, start: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """``sum_l step^l(start)`` until the tail is negligible."""
    total = start.copy()
    term = start
    ref = float(np.linalg.norm(start))
    prev = ref
    if ref == 0.0:
        return total
    for _ in range(max_iter):
        term = step(term)
        nrm = float(np.linalg.norm(term))
        total += term
        tot = float(np.linalg.norm(total))
        if not math.isfinite(nrm) or nrm > _BLOWUP * max(ref, tot):
            raise UnstableH("weighting recursion diverges")
        rate = min(nrm / prev, 0.999999) if prev > 0 else 0.0
        # stop once the remaining geometric tail is below tol relative
        if nrm <= tol * tot * (1.0 - rate):
            return total
        prev = nrm
    raise NonConvergent(f"no convergence in {max_iter} iterations")


def _weight(model: TheoryModel, node: Optional[int]) -> np.ndarray:
    if node is None:
        return model.q_block
    if not 0 <= node < model.n_nodes:
        raise IndexError(f"node {node} outside [0, {model.n_nodes})")
    return model.node_weight(node)


def steady_state_msd(model: TheoryModel, node: Optional[int] = None, method: str = "auto",
                     cap: int = H_EXPLICIT_CAP, tol: float = FIXED_POINT_TOL,
                     max_iter: int = MAX_ITERATIONS) -> float:
    """Steady-state MSD of ``node`` (network MSD when ``node`` is None).

    ``method`` is ``"explicit"`` (solve with the dense ``I - H``),
    ``"iterative"`` (accumulate ``sum_l H^l t`` in matrix form),
    ``"lyapunov"`` (see :func:`lyapunov_node_msds`) or ``"auto"``.
    """
    t = _weight(model, node)
    rmat = model.noise_forcing
    if method == "auto":
        method = "explicit" if model.dim ** 2 <= cap else "iterative"
    if method == "lyapunov":
        z = lyapunov_node_msds(model)
        return float(z.sum() if node is None else z[node])
    if method == "explicit":
        h = build_H_explicit(model, cap)
        if spectral_radius(h) >= 1.0 - STABILITY_MARGIN:
            raise UnstableH("H is not stable")
        sol = np.linalg.solve(np.eye(h.shape[0]) - h, vec(t))
        return float(vec(rmat) @ sol)
    if method == "iterative":
        if not np.any(rmat):
            return 0.0
        total = _geometric_sum(lambda s: apply_H(model, s), t, tol, max_iter)
        return float(np.sum(rmat * total))
    raise ValueError(f"unknown method {method!r}")


def steady_state_covariance(model: TheoryModel, tol: float = FIXED_POINT_TOL,
                            max_iter: int = MAX_ITERATIONS) -> np.ndarray:
    """Limit of ``E[e e^T]``: fixed point of ``C = H*(C) + W^ M P^ G M W^T``."""
    return _geometric_sum(lambda s: apply_H_adjoint(model, s), model.noise_forcing, tol, max_iter)


def node_msds(model: TheoryModel, tol: float = FIXED_POINT_TOL) -> np.ndarray:
    """Steady-state MSD of every node in one pass via the error covariance."""
    cov = steady_state_covariance(model, tol)
    f = model.bandwidth
    return np.array([model.rows[i] @ cov[i * f:(i + 1) * f, i * f:(i + 1) * f] @ model.rows[i]
                     for i in range(model.n_nodes)])


def lyapunov_node_msds(model: TheoryModel) -> np.ndarray:
    """Per-node steady-state MSDs from discrete Lyapunov equations in ``B``.

    The steady covariance satisfies ``C = B C B^T + W^ Delta(C) W^T + R``
    where ``Delta`` is block diagonal with blocks
    ``mu_i^2 (p_i - p_i^2) z_i c_i c_i^T`` and ``z_i = c_i^T C_ii c_i`` is
    node ``i``'s MSD. ``C`` is linear in ``z``, so one Lyapunov solve per
    sampled node plus an ``N x N`` system for ``z`` give the exact answer.
    """
    b = model.b_matrix
    if spectral_radius(b) >= 1.0 - STABILITY_MARGIN:
        raise UnstableH("B is not stable")
    n, f = model.n_nodes, model.bandwidth
    c = model.rows

    def node_terms(x):
        return np.array([c[i] @ x[i * f:(i + 1) * f, i * f:(i + 1) * f] @ c[i] for i in range(n)])

    z0 = node_terms(solve_discrete_lyapunov(b, model.noise_forcing))
    a = model.step_sizes ** 2 * (model.probabilities - model.probabilities ** 2)
    coupling = np.zeros((n, n))
    for i in np.flatnonzero(a):
        e = model.w_hat[:, i * f:(i + 1) * f] @ c[i]
        coupling[:, i] = a[i] * node_terms(solve_discrete_lyapunov(b, np.outer(e, e)))
    if spectral_radius(coupling) >= 1.0 - STABILITY_MARGIN:
        raise UnstableH("H is not stable")
    return np.linalg.solve(np.eye(n) - coupling, z0)


def transient_msd(model: TheoryModel, horizon: int, e0, node: Optional[int] = None) -> np.ndarray:
    """Predicted ``E||e[n]||^2_T`` for ``n = 0..horizon``.

    ``e0`` is the (deterministic) initial network error vector of length
    ``N|F|``, or its second-moment matrix.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    e0 = np.asarray(e0, dtype=float)
    r0 = np.outer(e0, e0) if e0.ndim == 1 else e0
    if r0.shape != (model.dim, model.dim):
        raise DimensionMismatch("initial error has the wrong dimension")
    rmat = model.noise_forcing
    sigma = _weight(model, node)
    out = np.empty(horizon + 1)
    noise_acc = 0.0
    for n in range(horizon + 1):
        out[n] = float(np.sum(r0 * sigma)) + noise_acc
        noise_acc += float(np.sum(rmat * sigma))
        if n < horizon:
            sigma = apply_H(model, sigma)
    return out


def mean_error_prediction(model: TheoryModel, horizon: int, e0) -> np.ndarray:
    """``E e[n] = B^n e0`` for ``n = 0..horizon``."""
    b = model.b_matrix
    out = np.empty((horizon + 1, model.dim))
    out[0] = e0
    for n in range(horizon):
        out[n + 1] = b @ out[n]
    return out


def write_node_theory_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "msd_theory"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])


def write_transient_theory_csv(path, series) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "msd_theory"])
        for t, v in enumerate(series):
            w.writerow([t, repr(float(v))])
