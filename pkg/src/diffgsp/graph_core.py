"""Undirected graphs, Laplacian spectra and graph Fourier tools.

All arithmetic is real: the Laplacian of an undirected graph is real symmetric,
so its eigenvectors are real and every conjugate transpose reduces to ``.T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial.distance import pdist, squareform

from .errors import (
    DimensionMismatch,
    Disconnected,
    EigendecompositionFailure,
    IndexOutOfRange,
    NegativeWeight,
    NonSymmetric,
)

PROCESSING = "processing"
COMMUNICATION = "communication"
ROLES = (PROCESSING, COMMUNICATION)

_SYM_TOL = 1e-12
_EIG_CLAMP = 1e-10
_SIGN_TIE_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph.

    Parameters
    ----------
    adjacency : ndarray, shape (n, n)
        Symmetric nonnegative weights with zero diagonal.
    role : str
        ``"processing"`` (defines the signal basis) or ``"communication"``
        (defines who talks to whom). Both may wrap the same topology.
    """

    adjacency: np.ndarray
    role: str = PROCESSING
    connected: bool = field(default=True)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def hop_degrees(self) -> np.ndarray:
        """Number of neighbours of each node (ignores weights)."""
        return (self.adjacency > 0).sum(axis=1)

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees) - self.adjacency

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i] > 0)

    def with_role(self, role: str) -> "Graph":
        return build_graph(self.adjacency, role)


def build_graph(adjacency, role: str = PROCESSING) -> Graph:
    """Validate an adjacency matrix and wrap it in a :class:`Graph`.

    Asymmetric input is rejected rather than symmetrized. Disconnected input is
    rejected only for the communication role.
    """
    if role not in ROLES:
        raise ValueError(f"unknown graph role {role!r}")
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("adjacency has non-finite entries")
    if np.any(a < 0):
        raise NegativeWeight("adjacency has negative weights")
    if np.any(np.abs(a - a.T) > _SYM_TOL * max(1.0, np.abs(a).max())):
        raise NonSymmetric("adjacency is not symmetric")
    if np.any(np.diag(a) != 0):
        raise NonSymmetric("adjacency must have a zero diagonal")
    n_comp, _ = connected_components(a > 0, directed=False)
    connected = n_comp == 1
    if role == COMMUNICATION and not connected:
        raise Disconnected(f"communication graph has {n_comp} components")
    return Graph(adjacency=_frozen(a), role=role, connected=connected)


@dataclass(frozen=True)
class SpectralBasis:
    """Laplacian eigenpairs, ascending, with a fixed sign convention."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    laplacian: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1]) if self.n_nodes > 1 else 0.0

    def support(self, indices: Iterable[int] | None = None) -> "FrequencySupport":
        return frequency_support(self, indices)

    def lowest(self, bandwidth: int) -> "FrequencySupport":
        return frequency_support(self, range(bandwidth))


def _fix_signs(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    for k in range(u.shape[1]):
        mag = np.abs(u[:, k])
        # first index within tolerance of the max magnitude
        idx = int(np.flatnonzero(mag >= mag.max() - _SIGN_TIE_TOL)[0])
        if u[idx, k] < 0:
            u[:, k] = -u[:, k]
    return u


def spectral_basis(g: Graph) -> SpectralBasis:
    lap = g.laplacian
    try:
        lam, u = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigendecompositionFailure(str(exc)) from exc
    order = np.argsort(lam, kind="stable")
    lam, u = lam[order], u[:, order]
    lam[np.abs(lam) < _EIG_CLAMP] = 0.0
    return SpectralBasis(eigenvalues=_frozen(lam), eigenvectors=_frozen(_fix_signs(u)), laplacian=_frozen(lap))


@dataclass(frozen=True)
class FrequencySupport:
    """Selected frequency indices F, the columns U_F and node rows c_i."""

    indices: tuple
    u_f: np.ndarray

    @property
    def bandwidth(self) -> int:
        return len(self.indices)

    @property
    def n_nodes(self) -> int:
        return self.u_f.shape[0]

    @property
    def rows(self) -> np.ndarray:
        """Row ``i`` is the regression vector c_i of node ``i``."""
        return self.u_f

    def row(self, i: int) -> np.ndarray:
        return self.u_f[i]


def frequency_support(basis: SpectralBasis, indices: Iterable[int] | None = None) -> FrequencySupport:
    n = basis.n_nodes
    idx = tuple(range(n)) if indices is None else tuple(int(k) for k in indices)
    if not 1 <= len(idx) <= n:
        raise DimensionMismatch(f"support size must be in [1, {n}], got {len(idx)}")
    if len(set(idx)) != len(idx):
        raise ValueError("frequency indices must be distinct")
    if any(k < 0 or k >= n for k in idx):
        raise IndexOutOfRange(f"frequency index outside [0, {n})")
    return FrequencySupport(indices=idx, u_f=_frozen(basis.eigenvectors[:, list(idx)]))


def gft(basis: SpectralBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != basis.n_nodes:
        raise DimensionMismatch(f"signal has {x.shape[0]} entries, graph has {basis.n_nodes} nodes")
    return basis.eigenvectors.T @ x


def igft(basis: SpectralBasis, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[0] != basis.n_nodes:
        raise DimensionMismatch(f"spectrum has {s.shape[0]} entries, graph has {basis.n_nodes} nodes")
    return basis.eigenvectors @ s


def synthesize(support: FrequencySupport, s) -> np.ndarray:
    """Bandlimited signal ``U_F s``."""
    s = np.asarray(s, dtype=float)
    if s.shape[0] != support.bandwidth:
        raise DimensionMismatch(f"coefficient vector has {s.shape[0]} entries, |F| = {support.bandwidth}")
    return support.u_f @ s


def _check_subset(subset, n: int) -> list:
    idx = sorted({int(i) for i in subset})
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise IndexOutOfRange(f"node index outside [0, {n})")
    return idx


def indicator(subset, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[_check_subset(subset, n)] = 1.0
    return v


def vertex_limit(subset, n: int) -> np.ndarray:
    """Diagonal 0/1 projector onto ``subset``."""
    return np.diag(indicator(subset, n))


def hop_distances(g: Graph) -> np.ndarray:
    return shortest_path(g.adjacency > 0, directed=False, unweighted=True)


def eccentricity(g: Graph, node: int) -> int:
    d = shortest_path(g.adjacency > 0, directed=False, unweighted=True, indices=[node])[0]
    if not np.all(np.isfinite(d)):
        raise Disconnected("graph is disconnected")
    return int(d.max())


def diameter(g: Graph) -> int:
    """Largest hop count between any two nodes (weights ignored)."""
    d = hop_distances(g)
    if not np.all(np.isfinite(d)):
        raise Disconnected("diameter undefined on a disconnected graph")
    return int(d.max())


# ---------------------------------------------------------------------------
# I/O


def load_edge_list(path, n_nodes: int | None = None, role: str = PROCESSING) -> Graph:
    """Read ``i j weight`` lines (0-based, ``#`` comments).

    Every undirected edge must appear once; the loader mirrors it. A comment of
    the form ``# nodes: N`` fixes the node count when isolated trailing nodes
    exist.
    """
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line, _, comment = raw.partition("#")
        comment = comment.strip()
        if comment.startswith("nodes:") and n_nodes is None:
            n_nodes = int(comment.split(":", 1)[1])
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"{path}:{lineno}: expected 'i j [weight]'")
        i, j = int(parts[0]), int(parts[1])
        w = float(parts[2]) if len(parts) == 3 else 1.0
        edges.append((i, j, w, lineno))
    top = max((max(i, j) for i, j, _, _ in edges), default=-1) + 1
    n = top if n_nodes is None else n_nodes
    if top > n:
        raise IndexOutOfRange(f"{path}: node index {top - 1} exceeds declared count {n}")
    a = np.zeros((n, n))
    for i, j, w, lineno in edges:
        if i < 0 or j < 0:
            raise IndexOutOfRange(f"{path}:{lineno}: negative node index")
        if i == j:
            raise NonSymmetric(f"{path}:{lineno}: self-loop {i}")
        if a[i, j] != 0:
            raise NonSymmetric(f"{path}:{lineno}: edge ({i}, {j}) listed twice")
        a[i, j] = a[j, i] = w
    return build_graph(a, role)


def save_edge_list(g: Graph, path, header: str = "") -> None:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines.append(f"# nodes: {g.n_nodes}")
    iu, ju = np.nonzero(np.triu(g.adjacency))
    for i, j in zip(iu, ju):
        lines.append(f"{i} {j} {g.adjacency[i, j]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# generators


def path_graph(n: int, role: str = PROCESSING) -> Graph:
    a = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = a[i + 1, i] = 1.0
    return build_graph(a, role)


def complete_graph(n: int, role: str = PROCESSING) -> Graph:
    return build_graph(np.ones((n, n)) - np.eye(n), role)


def geometric_adjacency(positions: np.ndarray, radius: float) -> np.ndarray:
    d = squareform(pdist(positions))
    a = (d <= radius).astype(float)
    np.fill_diagonal(a, 0.0)
    return a


def random_geometric_graph(n: int, radius: float, seed, side: float = 1.0, role: str = PROCESSING,
                           max_tries: int = 1000) -> tuple[Graph, np.ndarray]:
    """Uniform points in a square, unit-weight links below ``radius``.

    Redraws until connected. Returns the graph and the node positions.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pos = rng.uniform(0.0, side, size=(n, 2))
        a = geometric_adjacency(pos, radius)
        if connected_components(a > 0, directed=False)[0] == 1:
            return build_graph(a, role), pos
    raise Disconnected(f"no connected draw in {max_tries} tries")


def random_connected_graph(n: int, rng: np.random.Generator, edge_prob: float = 0.4,
                           weighted: bool = False, role: str = PROCESSING) -> Graph:
    """Random spanning tree plus Erdos-Renyi extras; always connected."""
    a = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        i, j = order[k], order[rng.integers(k)]
        a[i, j] = a[j, i] = 1.0
    extra = np.triu(rng.random((n, n)) < edge_prob, 1)
    a = np.maximum(a, extra + extra.T)
    if weighted:
        w = np.triu(rng.uniform(0.5, 2.0, (n, n)), 1)
        a = a * (w + w.T)
    return build_graph(a, role)


def union_graph(graphs: Sequence[Graph], role: str = PROCESSING) -> Graph:
    a = np.zeros_like(graphs[0].adjacency)
    for g in graphs:
        a = np.maximum(a, g.adjacency)
    return build_graph(a, role)
