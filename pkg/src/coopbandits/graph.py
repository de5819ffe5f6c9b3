"""Communication graphs, the running-consensus matrix and its spectral measures.

Agents are indexed from 0 inside the library. Edge-list files and the
``from_edge_list`` constructor use 1-based node labels, as in the text format

    M
    u v
    u v
    ...
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .numerics import RandomStream, SymmetricSpectrum, eig_sym

SPECTRAL_MARGIN = 1e-9

# How the indicator inside the positive/negative overlap sums is indexed.
#   "diagonal": 1((u_p u_j^T)_dd >= 0), evaluated along the summation index d
#   "fixed-node": 1((u_p u_j^T)_kk >= 0), literally constant in d
CONVENTIONS = ("diagonal", "fixed-node")
DEFAULT_CONVENTION = "diagonal"


class DisconnectedGraphError(ValueError):
    def __init__(self, components: list[list[int]]):
        self.components = components
        labels = ", ".join("{" + ",".join(str(v + 1) for v in c) + "}" for c in components)
        super().__init__(f"graph is not connected; components: {labels}")


class SpectrumError(ValueError):
    """The consensus matrix has a non-leading eigenvalue of modulus >= 1."""


@dataclass(frozen=True, eq=False)
class Graph:
    adjacency: np.ndarray

    @property
    def M(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    @property
    def d_max(self) -> int:
        return int(self.degrees.max()) if self.M else 0

    def edges(self) -> list[tuple[int, int]]:
        """1-based undirected edges, sorted."""
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(iu, ju)]

    def to_edge_list_text(self) -> str:
        lines = [str(self.M)] + [f"{u} {v}" for u, v in self.edges()]
        return "\n".join(lines) + "\n"

    def relabel(self, perm) -> "Graph":
        """Graph in which new node ``a`` is old node ``perm[a]``."""
        perm = np.asarray(perm)
        return Graph(self.adjacency[np.ix_(perm, perm)].copy())


def _components(adjacency: np.ndarray) -> list[list[int]]:
    m = adjacency.shape[0]
    seen = np.zeros(m, dtype=bool)
    comps = []
    for start in range(m):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adjacency[u]):
                if not seen[v]:
                    seen[v] = True
                    comp.append(int(v))
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(_components(g.adjacency)) <= 1


def from_adjacency(adjacency, require_connected: bool = True) -> Graph:
    a = np.array(adjacency, dtype=np.int64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    if (a != a.T).any():
        raise ValueError("adjacency must be symmetric (undirected graph)")
    if np.diag(a).any():
        raise ValueError("self-loops are not allowed")
    if require_connected:
        comps = _components(a)
        if len(comps) > 1:
            raise DisconnectedGraphError(comps)
    return Graph(a)


def from_edge_list(M: int, edges: Iterable) -> Graph:
    """Validated connected graph on nodes 1..M."""
    if M < 1:
        raise ValueError(f"agent count must be >= 1, got {M}")
    a = np.zeros((M, M), dtype=np.int64)
    for edge in edges:
        u, v = (int(x) for x in edge)
        if not (1 <= u <= M and 1 <= v <= M):
            raise ValueError(f"edge ({u}, {v}) has an endpoint outside 1..{M}")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        a[u - 1, v - 1] = a[v - 1, u - 1] = 1
    return from_adjacency(a)


def parse_edge_list(text: str) -> Graph:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty edge list")
    M = int(lines[0])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line: {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return from_edge_list(M, edges)


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def complete_graph(M: int) -> Graph:
    return from_adjacency(np.ones((M, M), dtype=np.int64) - np.eye(M, dtype=np.int64))


def path_graph(M: int) -> Graph:
    return from_edge_list(M, [(i, i + 1) for i in range(1, M)])


def cycle_graph(M: int) -> Graph:
    return from_edge_list(M, [(i, i % M + 1) for i in range(1, M + 1)])


def star_graph(M: int) -> Graph:
    return from_edge_list(M, [(1, i) for i in range(2, M + 1)])


def paw_graph() -> Graph:
    """Triangle 1-2-3 with node 4 hanging off node 3.

    With kappa = 3/4 its centralities are (2.31, 2.31, 0, 5.43), the fixed
    four-agent network used in the fixed-graph experiments.
    """
    return from_edge_list(4, [(1, 2), (1, 3), (2, 3), (3, 4)])


def sample_er_adjacency(M: int, rho: float, stream: RandomStream) -> np.ndarray:
    """One G(M, rho) draw, no connectivity filter."""
    upper = np.triu(stream.uniform((M, M)) < rho, 1)
    return (upper | upper.T).astype(np.int64)


def erdos_renyi(M: int, rho: float, stream: RandomStream, max_attempts: int = 10_000) -> Graph:
    """Connected G(M, rho) graph, obtained by resampling whole graphs."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"edge probability must lie in (0, 1], got {rho}")
    for _ in range(max_attempts):
        a = sample_er_adjacency(M, rho, stream)
        if len(_components(a)) == 1:
            return Graph(a)
    raise ValueError(
        f"no connected G({M}, {rho:g}) sample in {max_attempts} attempts; rho is too small for M")


def laplacian(g: Graph) -> np.ndarray:
    a = g.adjacency.astype(float)
    return np.diag(a.sum(axis=1)) - a


def _kappa_plus(d: int) -> float:
    return d / (d + 1)


def _kappa_minus(d: int) -> float:
    return d / (d - 1) if d > 1 else 0.5


# Named step-size rules. "d/(d+1)" keeps every non-leading eigenvalue of P
# strictly inside (-1, 1) for any graph; "d/(d-1)" is rejected on many graphs
# (all connected 4-node graphs, about one in six G(10, ln10/10) draws).
KAPPA_RULES = {"d/(d+1)": _kappa_plus, "d/(d-1)": _kappa_minus}
DEFAULT_KAPPA_RULE = "d/(d+1)"


def default_kappa(g: Graph, rule: str = DEFAULT_KAPPA_RULE) -> float:
    try:
        return KAPPA_RULES[rule](g.d_max)
    except KeyError:
        raise ValueError(f"unknown kappa rule {rule!r}; expected one of {list(KAPPA_RULES)}") from None


def resolve_kappa(g: Graph, kappa) -> float:
    """Accept a number, a rule name, or None (default rule)."""
    if kappa is None:
        return default_kappa(g)
    if isinstance(kappa, str):
        if kappa in KAPPA_RULES:
            return default_kappa(g, kappa)
        kappa = float(kappa)
    return float(kappa)


@dataclass(frozen=True, eq=False)
class ConsensusModel:
    P: np.ndarray
    kappa: float
    spectrum: SymmetricSpectrum
    epsilon_n: float
    epsilon_c: np.ndarray
    graph: Optional[Graph] = None
    convention: str = DEFAULT_CONVENTION
    isolated: bool = field(default=False)

    @property
    def M(self) -> int:
        return self.P.shape[0]

    @property
    def second_modulus(self) -> float:
        """max_{p>=2} |lambda_p|, the geometric convergence rate of consensus."""
        lam = self.spectrum.eigenvalues
        return float(np.max(np.abs(lam[1:]))) if len(lam) > 1 else 0.0

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "kappa": self.kappa,
            "eigenvalues": [float(x) for x in self.spectrum.eigenvalues],
            "epsilon_n": float(self.epsilon_n),
            "epsilon_c": [float(x) for x in self.epsilon_c],
            "indicator_convention": self.convention,
        }


def epsilon_n(eigenvalues) -> float:
    lam = np.abs(np.asarray(eigenvalues, dtype=float)[1:])
    M = len(lam) + 1
    return float(math.sqrt(M) * np.sum(lam / (1.0 - lam)))


def overlap_sums(eigenvectors: np.ndarray, node: int, convention: str = DEFAULT_CONVENTION):
    """Positive and negative parts of the eigenvector overlaps u_p . u_j.

    Returns two M x M arrays (nu_plus, nu_minus). Under the "diagonal"
    convention these do not depend on ``node``.
    """
    U = eigenvectors
    if convention == "diagonal":
        W = U[:, :, None] * U[:, None, :]  # W[d, p, j] = u_p^d u_j^d
        return np.where(W >= 0, W, 0.0).sum(axis=0), np.where(W <= 0, W, 0.0).sum(axis=0)
    if convention == "fixed-node":
        gram = U.T @ U
        x = np.outer(U[node], U[node])
        return np.where(x >= 0, gram, 0.0), np.where(x <= 0, gram, 0.0)
    raise ValueError(f"unknown indicator convention {convention!r}; expected one of {CONVENTIONS}")


def overlap_weights(spectrum: SymmetricSpectrum, node: int,
                    convention: str = DEFAULT_CONVENTION) -> np.ndarray:
    """The three-case weights b_pj(node) as an M x M array."""
    lam = spectrum.eigenvalues
    U = spectrum.eigenvectors
    nu_plus, nu_minus = overlap_sums(U, node, convention)
    nu_max = np.maximum(np.abs(nu_minus), nu_plus)
    x = np.outer(U[node], U[node])  # (u_p u_j^T)_kk
    same_sign = np.outer(lam, lam) >= 0
    return np.where(same_sign,
                    np.where(x >= 0, nu_plus * x, nu_minus * x),
                    nu_max * np.abs(x))


def epsilon_c(spectrum: SymmetricSpectrum, convention: str = DEFAULT_CONVENTION) -> np.ndarray:
    """Explore-exploit centrality of every node."""
    lam = spectrum.eigenvalues
    M = len(lam)
    if M == 1:
        return np.zeros(1)
    prod = np.abs(np.outer(lam, lam))[:, 1:]
    weight = prod / (1.0 - prod)
    out = np.empty(M)
    for k in range(M):
        out[k] = M * np.sum(weight * overlap_weights(spectrum, k, convention)[:, 1:])
    return out


def consensus_model(g: Graph, kappa=None,
                    convention: str = DEFAULT_CONVENTION) -> ConsensusModel:
    """P = I - (kappa / d_max) L together with its spectrum and centrality measures.

    ``kappa`` is a number, a key of ``KAPPA_RULES``, or None for the default
    rule d_max / (d_max + 1). Models whose non-leading
    eigenvalues reach modulus 1 are rejected with ``SpectrumError``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown indicator convention {convention!r}")
    M = g.M
    if M == 1:
        spec = SymmetricSpectrum(np.ones(1), np.ones((1, 1)))
        return ConsensusModel(np.ones((1, 1)), 0.0,
                              spec, 0.0, np.zeros(1), g, convention)
    kappa = resolve_kappa(g, kappa)
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    P = np.eye(M) - (kappa / g.d_max) * laplacian(g)
    spec = eig_sym(P)
    tail = np.abs(spec.eigenvalues[1:])
    if np.any(tail >= 1.0 - SPECTRAL_MARGIN):
        p = int(np.argmax(tail)) + 2
        raise SpectrumError(
            f"consensus matrix has |lambda_{p}| = {tail.max():.6g} >= 1 with kappa = {kappa:g}; "
            f"the centrality series diverge. Use a smaller kappa (e.g. kappa <= 1).")
    return ConsensusModel(P, kappa, spec, epsilon_n(spec.eigenvalues),
                          epsilon_c(spec, convention), g, convention)


def isolated_model(M: int) -> ConsensusModel:
    """P = I: M agents that never communicate (no-cooperation baseline)."""
    spec = SymmetricSpectrum(np.ones(M), np.eye(M))
    return ConsensusModel(np.eye(M), 0.0, spec, 0.0, np.zeros(M), None, DEFAULT_CONVENTION,
                          isolated=True)


def graph_metrics(model: ConsensusModel, schedule=None) -> dict:
    """JSON-ready report of the spectral measures; adds t_dagger if a schedule is given."""
    out = model.to_json()
    if model.graph is not None:
        out["degrees"] = [int(d) for d in model.graph.degrees]
        out["edges"] = [list(e) for e in model.graph.edges()]
    if schedule is not None:
        out["schedule"] = schedule.name
        # t_dagger overflows for large centralities; ln t_dagger is always finite
        log_t = [float(schedule.log_inverse(float(e))) for e in model.epsilon_c]
        out["log_t_dagger"] = log_t
        out["t_dagger"] = [math.exp(x) if x < 709.0 else None for x in log_t]
    return out
