"""Traces of test graphs, partition quotients and their combinatorics.

``tau`` is the normalized sum over all vertex maps, ``tau_injective`` the
sum over injective maps; both are per-realization values (average them over
draws with :func:`tau_monte_carlo`). The two are related by summing over set
partitions of the vertices, with Moebius weights in one direction.
"""

from __future__ import annotations

import itertools
import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .graphs import MAX_VERTICES, Edge, GraphMonomial, TestGraph, _components, bridges_and_blocks, evaluate
from .kernel import delta, operator_norm

MAX_INJECTIVE_MAPS = 5_000_000


@dataclass(frozen=True)
class SetPartition:
    """Partition of ``0..n-1``; blocks sorted, and ordered by least element."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        object.__setattr__(self, "blocks", blocks)
        flat = [v for b in blocks for v in b]
        if any(len(b) == 0 for b in blocks) or sorted(flat) != list(range(len(flat))):
            raise ValueError(f"not a set partition of 0..n-1: {self.blocks}")

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "SetPartition":
        groups: dict[int, list[int]] = {}
        for v, b in enumerate(labels):
            groups.setdefault(b, []).append(v)
        return cls(tuple(tuple(g) for g in groups.values()))

    @classmethod
    def singletons(cls, n: int) -> "SetPartition":
        return cls(tuple((v,) for v in range(n)))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def block_index(self) -> list[int]:
        """``index[v]`` is the block containing ``v``."""
        index = [0] * self.n
        for i, b in enumerate(self.blocks):
            for v in b:
                index[v] = i
        return index

    def same_block(self, a: int, b: int) -> bool:
        index = self.block_index()
        return index[a] == index[b]

    def compose(self, coarser: "SetPartition") -> "SetPartition":
        """Partition of ``0..n-1`` obtained by merging this partition's blocks along ``coarser``."""
        if coarser.n != len(self.blocks):
            raise ValueError("coarser partition must partition this partition's blocks")
        return SetPartition(tuple(tuple(v for i in big for v in self.blocks[i]) for big in coarser.blocks))


def all_partitions(n: int, max_size: int = MAX_VERTICES) -> Iterator[SetPartition]:
    """Every set partition of ``0..n-1`` once, in restricted-growth-string order."""
    if n > max_size:
        raise ValueError(f"refusing to enumerate partitions of {n} > {max_size} elements")
    if n == 0:
        yield SetPartition(())
        return
    labels = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield SetPartition.from_labels(labels)
            return
        for b in range(top + 2):
            labels[i] = b
            yield from rec(i + 1, max(top, b))

    labels[0] = 0
    yield from rec(1, 0)


def mobius_weight(pi: SetPartition) -> int:
    """Moebius function ``mu(0, pi)`` of the partition lattice."""
    return math.prod((-1) ** (len(b) - 1) * math.factorial(len(b) - 1) for b in pi.blocks)


def quotient(T: TestGraph, pi: SetPartition) -> TestGraph:
    if pi.n != T.n_vertices:
        raise ValueError("partition does not cover the vertex set")
    index = pi.block_index()
    return TestGraph(len(pi), tuple(e.relabel(index) for e in T.edges))


_LETTERS = string.ascii_letters


def tau(T: TestGraph, fams: Mapping, max_vertices: int = MAX_VERTICES) -> complex:
    """``N^-c(T)`` times the sum over all maps ``V -> [N]`` of the edge product."""
    if T.n_vertices > max_vertices:
        raise ValueError(f"test graph has {T.n_vertices} vertices, cap is {max_vertices}")
    N = fams.N
    touched = {v for e in T.edges for v in (e.src, e.dst)}
    total: complex = float(N) ** (T.n_vertices - len(touched))
    if T.edges:
        subscripts = ",".join(_LETTERS[e.dst] + _LETTERS[e.src] for e in T.edges)
        total *= np.einsum(subscripts + "->", *(fams[e.family, e.key] for e in T.edges), optimize="greedy")
    return complex(total / float(N) ** T.n_components)


def injective_maps(n: int, N: int) -> np.ndarray:
    count = math.perm(N, n)
    if count > MAX_INJECTIVE_MAPS:
        raise ValueError(f"{count} injective maps exceeds the cap {MAX_INJECTIVE_MAPS}")
    return np.array(list(itertools.permutations(range(N), n)), dtype=np.intp).reshape(count, n)


def tau_injective(T: TestGraph, fams: Mapping, max_vertices: int = MAX_VERTICES) -> complex:
    """As :func:`tau`, summing over injective maps only (zero when ``|V| > N``)."""
    if T.n_vertices > max_vertices:
        raise ValueError(f"test graph has {T.n_vertices} vertices, cap is {max_vertices}")
    N = fams.N
    if T.n_vertices > N:
        return 0j
    phi = injective_maps(T.n_vertices, N)
    terms = np.ones(phi.shape[0], dtype=complex)
    for e in T.edges:
        terms *= fams[e.family, e.key][phi[:, e.dst], phi[:, e.src]]
    return complex(terms.sum() / float(N) ** T.n_components)


def tau_from_injective(T: TestGraph, fams: Mapping, injective: Callable = tau_injective) -> complex:
    """``sum_pi N^(c(T^pi) - c(T)) tau0[T^pi]``."""
    N = fams.N
    c = T.n_components
    total = 0j
    for pi in all_partitions(T.n_vertices):
        Q = quotient(T, pi)
        total += float(N) ** (Q.n_components - c) * injective(Q, fams)
    return total


def injective_from_tau(
    T: TestGraph,
    fams: Mapping,
    trace: Callable = tau,
    weight: Callable[[SetPartition], int] = mobius_weight,
) -> complex:
    """``sum_pi N^(c(T^pi) - c(T)) mu(0, pi) tau[T^pi]``."""
    N = fams.N
    c = T.n_components
    total = 0j
    for pi in all_partitions(T.n_vertices):
        Q = quotient(T, pi)
        total += float(N) ** (Q.n_components - c) * weight(pi) * trace(Q, fams)
    return total


def tau_monte_carlo(
    T: TestGraph,
    sampler: Callable[[np.random.Generator], Mapping],
    trials: int,
    seed: int = 0,
    injective: bool = False,
) -> tuple[complex, float]:
    """Mean and standard error of ``tau`` (or ``tau_injective``) over random draws."""
    from .models import rng_for

    f = tau_injective if injective else tau
    values = np.array([f(T, sampler(rng_for(seed, i))) for i in range(trials)])
    mean = complex(math.fsum(values.real), math.fsum(values.imag)) / trials
    stderr = float(np.std(values, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return mean, stderr


@dataclass(frozen=True)
class ColoredComponent:
    family: int
    vertices: frozenset[int]
    edges: tuple[int, ...]


def colored_components(T: TestGraph) -> list[ColoredComponent]:
    """Maximal connected subgraphs whose edges all belong to one family."""
    result = []
    for family in sorted(T.families()):
        idx = [i for i, e in enumerate(T.edges) if e.family == family]
        labels = _components(T.n_vertices, [T.edges[i] for i in idx])
        groups: dict[int, list[int]] = {}
        for i in idx:
            groups.setdefault(labels[T.edges[i].src], []).append(i)
        for edges in groups.values():
            verts = frozenset(v for i in edges for v in (T.edges[i].src, T.edges[i].dst))
            result.append(ColoredComponent(family, verts, tuple(edges)))
    return result


@dataclass(frozen=True)
class SimpleGraph:
    """Undirected multigraph on ``0..n_nodes-1``."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ComponentGraph(SimpleGraph):
    """Bipartite incidence graph: nodes ``0..k-1`` are colored components, then one node per vertex."""

    components: tuple[ColoredComponent, ...] = ()


def gcc(T: TestGraph) -> ComponentGraph:
    comps = tuple(colored_components(T))
    k = len(comps)
    edges = tuple((i, k + v) for i, c in enumerate(comps) for v in sorted(c.vertices))
    return ComponentGraph(k + T.n_vertices, edges, comps)


def is_tree(G: SimpleGraph) -> bool:
    if len(G.edges) != G.n_nodes - 1:
        return False
    labels = _components(G.n_nodes, [Edge(a, b) for a, b in G.edges])
    return len(set(labels)) <= 1


@dataclass(frozen=True)
class Forest(SimpleGraph):
    """Forest of two-edge-connected components; ``node_of[v]`` is the node containing vertex ``v``."""

    node_of: tuple[int, ...] = ()


def two_edge_forest(G) -> Forest:
    """Contract each two-edge-connected component of ``G`` (directions ignored); keep the cut edges."""
    bridges, _ = bridges_and_blocks(G.n_vertices, G.edges)
    kept = [e for i, e in enumerate(G.edges) if i not in bridges]
    node_of = _components(G.n_vertices, kept)
    n_nodes = len(set(node_of)) if G.n_vertices else 0
    edges = tuple((node_of[G.edges[i].src], node_of[G.edges[i].dst]) for i in sorted(bridges))
    return Forest(n_nodes, edges, tuple(node_of))


def f_statistic(G) -> int:
    """Leaves of the two-edge forest, an isolated node counting as two leaves."""
    F = two_edge_forest(G)
    degree = Counter()
    for a, b in F.edges:
        degree[a] += 1
        degree[b] += 1
    trees = _components(F.n_nodes, [Edge(a, b) for a, b in F.edges])
    leaves = 0
    for tree in set(trees):
        nodes = [v for v in range(F.n_nodes) if trees[v] == tree]
        leaves += 2 if len(nodes) == 1 else sum(1 for v in nodes if degree[v] == 1)
    return leaves


@dataclass
class BoundReport:
    trace: complex
    bound: float
    f: int
    n_edges: int

    @property
    def ratio(self) -> float:
        return abs(self.trace) / self.bound if self.bound > 0 else (0.0 if self.trace == 0 else math.inf)

    @property
    def holds(self) -> bool:
        return abs(self.trace) <= self.bound * (1 + 1e-12)


def ms_bound_check(g: GraphMonomial, fams: Mapping) -> BoundReport:
    """Compare ``|Tr g(A)|`` with ``N^(f(g)/2) prod_e ||A_e||``."""
    if not g.equal_roots:
        raise ValueError("the trace bound needs equal input and output")
    N = fams.N
    trace = complex(np.trace(evaluate(g, fams)))
    norms = {}
    for e in g.edges:
        if (e.family, e.key) not in norms:
            norms[e.family, e.key] = operator_norm(fams[e.family, e.key])
    f = f_statistic(g)
    bound = float(N) ** (f / 2) * math.prod(norms[e.family, e.key] for e in g.edges)
    return BoundReport(trace, bound, f, len(g.edges))


def cycle_test_graph(ts: Sequence[GraphMonomial]) -> tuple[TestGraph, list[int]]:
    """Close ``t_1, ..., t_n`` into a cycle: output of ``t_i`` glued to input of ``t_(i-1)``.

    Returns the test graph and the marked vertices ``[v_1, ..., v_n]``, ``v_i``
    being the input of ``t_i``. As an unrooted graph this is the diagonal of
    the product ``t_1 ... t_n``.
    """
    n = len(ts)
    offsets = list(itertools.accumulate([0] + [t.n_vertices for t in ts]))
    total = offsets[-1]
    glue = [Edge(offsets[i] + ts[i].v_out, offsets[(i - 1) % n] + ts[i - 1].v_in) for i in range(n)]
    labels = _components(total, glue)
    edges = []
    for i, t in enumerate(ts):
        for e in t.edges:
            edges.append(Edge(labels[offsets[i] + e.src], labels[offsets[i] + e.dst], e.family, e.key))
    marks = [labels[offsets[i] + t.v_in] for i, t in enumerate(ts)]
    return TestGraph(len(set(labels)), tuple(edges)), marks


def surviving_partitions(T: TestGraph, marks: Sequence[int]) -> Iterator[SetPartition]:
    """Partitions that never identify ``v_i`` with ``v_(i-1)`` (cyclically)."""
    n = len(marks)
    for pi in all_partitions(T.n_vertices):
        index = pi.block_index()
        if all(index[marks[i]] != index[marks[i - 1]] for i in range(n)):
            yield pi


def epsilon_expansion(ts: Sequence[GraphMonomial], fams: Mapping) -> complex:
    """Normalized trace of the centered product as a sum of injective traces over surviving quotients."""
    T, marks = cycle_test_graph(ts)
    return sum((tau_injective(quotient(T, pi), fams) for pi in surviving_partitions(T, marks)), 0j)


def centered_trace(ts: Sequence[GraphMonomial], fams: Mapping) -> complex:
    """``(1/N) Tr[(M_1 - Delta M_1) ... (M_n - Delta M_n)]`` with ``M_i = t_i(A)``, computed directly."""
    N = fams.N
    product = np.eye(N, dtype=complex)
    for t in ts:
        M = evaluate(t, fams)
        product = product @ (M - np.diag(delta(M)))
    return complex(np.trace(product) / N)


def tree_partitions(ts: Sequence[GraphMonomial]) -> list[SetPartition]:
    """Surviving partitions whose graph of colored components is a tree (expected: none)."""
    T, marks = cycle_test_graph(ts)
    return [pi for pi in surviving_partitions(T, marks) if is_tree(gcc(quotient(T, pi)))]
