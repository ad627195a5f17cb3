"""Graph monomials, test graphs and their evaluation on matrix families.

Vertices are ``0..n-1``. An edge ``(v, w)`` labelled by matrix ``K``
contributes the factor ``K[phi(w), phi(v)]`` for a vertex map ``phi``. A
graph monomial evaluates to the matrix whose ``(i, j)`` entry sums over maps
with ``phi(v_out) = i`` and ``phi(v_in) = j``.

Line format::

    vertices=3; in=0; out=2; edges=(0,1,1,A);(1,2,2,B)

``(v, w, l, k)`` is an edge from ``v`` to ``w`` carrying the matrix of key ``k``
in family ``l``. Test graphs use the same format without ``in``/``out``.
"""

from __future__ import annotations

import itertools
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_VERTICES = 10


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    dst: int
    family: int = 1
    key: str = "X"

    def relabel(self, mapping: Sequence[int]) -> "Edge":
        return Edge(mapping[self.src], mapping[self.dst], self.family, self.key)


class MatrixFamilies(Mapping):
    """Matrices indexed by ``(family, key)``, closed under adjoint.

    A key ending in ``*`` that is not stored resolves to the adjoint of the
    matrix stored under the key without the star.
    """

    def __init__(self, matrices: Mapping[tuple[int, str], np.ndarray]):
        self._matrices = {k: np.asarray(v) for k, v in matrices.items()}
        sizes = {m.shape for m in self._matrices.values()}
        if len(sizes) > 1:
            raise ValueError(f"matrices must share one square shape, got {sizes}")
        if sizes and (len(next(iter(sizes))) != 2 or len(set(next(iter(sizes)))) != 1):
            raise ValueError("matrices must be square")

    @classmethod
    def from_lists(cls, *families: Mapping[str, np.ndarray]) -> "MatrixFamilies":
        """Families numbered 1, 2, ... from dicts ``key -> matrix``."""
        return cls({(l, k): m for l, fam in enumerate(families, start=1) for k, m in fam.items()})

    @property
    def N(self) -> int:
        return next(iter(self._matrices.values())).shape[0]

    def __getitem__(self, label: tuple[int, str]) -> np.ndarray:
        if label in self._matrices:
            return self._matrices[label]
        family, key = label
        if key.endswith("*") and (family, key[:-1]) in self._matrices:
            return self._matrices[family, key[:-1]].conj().T
        raise KeyError(f"no matrix for family {family}, key {key!r}")

    def __iter__(self):
        return iter(self._matrices)

    def __len__(self):
        return len(self._matrices)

    def scaled(self, family: int, c: complex) -> "MatrixFamilies":
        return MatrixFamilies({k: (c * m if k[0] == family else m) for k, m in self._matrices.items()})


def _components(n: int, edges: Iterable[Edge]) -> list[int]:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in edges:
        ra, rb = find(e.src), find(e.dst)
        if ra != rb:
            parent[ra] = rb
    roots = [find(v) for v in range(n)]
    index = {r: i for i, r in enumerate(dict.fromkeys(roots))}
    return [index[r] for r in roots]


@dataclass(frozen=True)
class TestGraph:
    """Unrooted, possibly disconnected, directed labelled multigraph."""

    n_vertices: int
    edges: tuple[Edge, ...] = ()

    __test__ = False  # not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if self.n_vertices < 0:
            raise ValueError("negative vertex count")
        for e in self.edges:
            if not (0 <= e.src < self.n_vertices and 0 <= e.dst < self.n_vertices):
                raise ValueError(f"edge {e} references a missing vertex")

    def component_labels(self) -> list[int]:
        return _components(self.n_vertices, self.edges)

    @property
    def n_components(self) -> int:
        return len(set(self.component_labels()))

    def families(self) -> set[int]:
        return {e.family for e in self.edges}


@dataclass(frozen=True)
class GraphMonomial:
    """Finite, connected, bi-rooted, directed labelled multigraph."""

    n_vertices: int
    edges: tuple[Edge, ...]
    v_in: int = 0
    v_out: int = 0

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if self.n_vertices < 1:
            raise ValueError("a graph monomial needs at least one vertex")
        if not (0 <= self.v_in < self.n_vertices and 0 <= self.v_out < self.n_vertices):
            raise ValueError("roots must be vertices of the graph")
        for e in self.edges:
            if not (0 <= e.src < self.n_vertices and 0 <= e.dst < self.n_vertices):
                raise ValueError(f"edge {e} references a missing vertex")
        if len(set(_components(self.n_vertices, self.edges))) != 1:
            raise ValueError("graph monomial must be connected")

    @property
    def equal_roots(self) -> bool:
        return self.v_in == self.v_out

    def as_test_graph(self) -> TestGraph:
        return TestGraph(self.n_vertices, self.edges)


def unit() -> GraphMonomial:
    """The trivial one-vertex graph, which evaluates to the identity."""
    return GraphMonomial(1, (), 0, 0)


def single_edge(family: int = 1, key: str = "X") -> GraphMonomial:
    return GraphMonomial(2, (Edge(0, 1, family, key),), v_in=0, v_out=1)


def loop(family: int = 1, key: str = "X") -> GraphMonomial:
    return GraphMonomial(1, (Edge(0, 0, family, key),), 0, 0)


def path(labels: Sequence[tuple[int, str]]) -> GraphMonomial:
    """Directed path whose first label sits nearest the output.

    ``path([(1, "A"), (1, "B")])`` evaluates to ``A @ B``.
    """
    d = len(labels)
    edges = [Edge(i + 1, i, l, k) for i, (l, k) in enumerate(labels)]
    return GraphMonomial(d + 1, edges, v_in=d, v_out=0)


def attach(g: GraphMonomial, vertex: int, h: GraphMonomial) -> GraphMonomial:
    """Glue the root of the equal-root monomial ``h`` onto ``vertex`` of ``g``.

    Attaching at the output multiplies the evaluation by ``Delta h`` on the
    left, attaching at the input multiplies on the right.
    """
    if not h.equal_roots:
        raise ValueError("only equal-root monomials can be attached")
    if not 0 <= vertex < g.n_vertices:
        raise ValueError(f"vertex {vertex} out of range")
    n = g.n_vertices
    mapping = []
    nxt = n
    for v in range(h.n_vertices):
        if v == h.v_in:
            mapping.append(vertex)
        else:
            mapping.append(nxt)
            nxt += 1
    edges = list(g.edges) + [e.relabel(mapping) for e in h.edges]
    return GraphMonomial(nxt, edges, g.v_in, g.v_out)


def monomial_graph(family: int, keys: Sequence[str], coefficients: Mapping[int, GraphMonomial] | None = None) -> GraphMonomial:
    """Graph of ``g_0 X_(k_1) g_1 ... X_(k_d) g_d`` with ``coefficients[j] = g_j`` (missing ones are the identity)."""
    g = path([(family, k) for k in keys])
    for j, h in sorted((coefficients or {}).items()):
        g = attach(g, j, h)
    return g


_LETTERS = string.ascii_letters


def evaluate(g: GraphMonomial, fams: Mapping, max_vertices: int = MAX_VERTICES) -> np.ndarray:
    """Evaluate ``g`` on ``fams`` (a mapping ``(family, key) -> matrix``)."""
    if g.n_vertices > max_vertices:
        raise ValueError(f"graph has {g.n_vertices} vertices, cap is {max_vertices}")
    N = fams.N
    if not g.edges:
        return np.eye(N, dtype=complex)
    operands = []
    subscripts = []
    for e in g.edges:
        operands.append(fams[e.family, e.key])
        subscripts.append(_LETTERS[e.dst] + _LETTERS[e.src])
    if g.equal_roots:
        out = _LETTERS[g.v_in]
    else:
        out = _LETTERS[g.v_out] + _LETTERS[g.v_in]
    value = np.einsum(",".join(subscripts) + "->" + out, *operands, optimize="greedy")
    return np.diag(value) if g.equal_roots else value


def _merge(n: int, a: int, b: int) -> list[int]:
    """Relabelling of ``0..n-1`` that merges ``b`` into ``a`` and compacts."""
    mapping = []
    nxt = 0
    for v in range(n):
        if v == b and b != a:
            mapping.append(None)
        else:
            mapping.append(nxt)
            nxt += 1
    if b != a:
        mapping[b] = mapping[a]
    return mapping


def graph_product(g1: GraphMonomial, g2: GraphMonomial) -> GraphMonomial:
    """Glue the input of ``g1`` to the output of ``g2``; evaluates to the matrix product."""
    n1 = g1.n_vertices
    shifted = [Edge(e.src + n1, e.dst + n1, e.family, e.key) for e in g2.edges]
    mapping = _merge(n1 + g2.n_vertices, g1.v_in, g2.v_out + n1)
    edges = [e.relabel(mapping) for e in list(g1.edges) + shifted]
    return GraphMonomial(n1 + g2.n_vertices - 1, edges, mapping[g2.v_in + n1], mapping[g1.v_out])


def graph_delta(g: GraphMonomial) -> GraphMonomial:
    """Identify the input with the output."""
    if g.equal_roots:
        return g
    mapping = _merge(g.n_vertices, g.v_in, g.v_out)
    root = mapping[g.v_in]
    return GraphMonomial(g.n_vertices - 1, [e.relabel(mapping) for e in g.edges], root, root)


def bridges_and_blocks(n_vertices: int, edges: Sequence[Edge]) -> tuple[set[int], list[list[int]]]:
    """Cut edges and biconnected blocks (as edge-index lists) of the underlying multigraph.

    Directions are ignored; each loop forms its own block.
    """
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_vertices)]
    blocks: list[list[int]] = []
    for i, e in enumerate(edges):
        if e.src == e.dst:
            blocks.append([i])
        else:
            adj[e.src].append((e.dst, i))
            adj[e.dst].append((e.src, i))
    disc = [-1] * n_vertices
    low = [0] * n_vertices
    bridges: set[int] = set()
    edge_stack: list[int] = []
    clock = 0
    for root in range(n_vertices):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = clock
        clock += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, parent_edge, it = stack[-1]
            for w, eid in it:
                if eid == parent_edge:
                    continue
                if disc[w] == -1:
                    edge_stack.append(eid)
                    disc[w] = low[w] = clock
                    clock += 1
                    stack.append((w, eid, iter(adj[w])))
                    break
                if disc[w] < disc[v]:
                    edge_stack.append(eid)
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add(parent_edge)
                    if low[v] >= disc[u]:
                        block = []
                        while True:
                            eid = edge_stack.pop()
                            block.append(eid)
                            if eid == parent_edge:
                                break
                        blocks.append(block)
    return bridges, blocks


def is_cactus(g) -> bool:
    """Connected, and every edge lies on exactly one simple cycle, each cycle directed."""
    if len(set(_components(g.n_vertices, g.edges))) != 1:
        return False
    bridges, blocks = bridges_and_blocks(g.n_vertices, g.edges)
    if bridges:
        return False
    for block in blocks:
        outdeg = Counter(g.edges[i].src for i in block)
        indeg = Counter(g.edges[i].dst for i in block)
        vertices = set(outdeg) | set(indeg)
        if len(vertices) != len(block):
            return False
        if any(outdeg[v] != 1 or indeg[v] != 1 for v in vertices):
            return False
    return True


def is_cactus_type(g: GraphMonomial) -> bool:
    return g.equal_roots and is_cactus(g)


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_cactus_monomial(size: int, labels: Sequence[tuple[int, str]], seed=None, max_cycle: int = 3) -> GraphMonomial:
    """Attach ``size`` directed cycles (length 1..max_cycle) at random existing vertices."""
    if size < 0:
        raise ValueError("size must be nonnegative")
    rng = _as_rng(seed)
    n = 1
    edges = []
    for _ in range(size):
        anchor = int(rng.integers(n))
        length = int(rng.integers(1, max_cycle + 1))
        cycle = [anchor] + list(range(n, n + length - 1))
        n += length - 1
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            l, k = labels[int(rng.integers(len(labels)))]
            edges.append(Edge(a, b, l, k))
    return GraphMonomial(n, edges, 0, 0)


def random_monomial(
    n_vertices: int,
    n_edges: int,
    labels: Sequence[tuple[int, str]],
    seed=None,
    equal_roots: bool = False,
) -> GraphMonomial:
    """Random connected multigraph: a random spanning tree plus random extra edges (loops allowed)."""
    if n_edges < n_vertices - 1:
        raise ValueError("too few edges for a connected graph")
    rng = _as_rng(seed)

    def label():
        return labels[int(rng.integers(len(labels)))]

    edges = []
    for v in range(1, n_vertices):
        u = int(rng.integers(v))
        a, b = (u, v) if rng.random() < 0.5 else (v, u)
        edges.append(Edge(a, b, *label()))
    for _ in range(n_edges - (n_vertices - 1)):
        a, b = (int(x) for x in rng.integers(n_vertices, size=2))
        edges.append(Edge(a, b, *label()))
    order = rng.permutation(len(edges))
    edges = [edges[i] for i in order]
    v_in = int(rng.integers(n_vertices))
    v_out = v_in if equal_roots else int(rng.integers(n_vertices))
    return GraphMonomial(n_vertices, edges, v_in, v_out)


def isomorphic(g1, g2) -> bool:
    """Brute-force isomorphism test respecting labels (and roots, for monomials)."""
    if g1.n_vertices != g2.n_vertices or len(g1.edges) != len(g2.edges):
        return False
    target = Counter(g2.edges)
    rooted = isinstance(g1, GraphMonomial)
    for perm in itertools.permutations(range(g1.n_vertices)):
        if rooted and (perm[g1.v_in] != g2.v_in or perm[g1.v_out] != g2.v_out):
            continue
        if Counter(e.relabel(perm) for e in g1.edges) == target:
            return True
    return False


def format_graph(g) -> str:
    parts = [f"vertices={g.n_vertices}"]
    if isinstance(g, GraphMonomial):
        parts += [f"in={g.v_in}", f"out={g.v_out}"]
    parts.append("edges=" + ";".join(f"({e.src},{e.dst},{e.family},{e.key})" for e in g.edges))
    return "; ".join(parts)


_EDGE_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(-?\d+)\s*,\s*([^)\s]+)\s*\)")


def parse_graph(text: str):
    """Parse the line format into a :class:`GraphMonomial` (roots given) or :class:`TestGraph`."""
    fields = {}
    for part in re.split(r";\s*(?=[a-z]+\s*=)", text.strip()):
        key, eq, value = part.strip().partition("=")
        if not eq:
            raise ValueError(f"malformed field {part!r}")
        fields[key.strip()] = value.strip()
    if "vertices" not in fields:
        raise ValueError("missing vertices= field")
    edges = []
    body = fields.get("edges", "")
    for chunk in filter(None, (c.strip() for c in body.split(";"))):
        m = _EDGE_RE.fullmatch(chunk)
        if not m:
            raise ValueError(f"malformed edge {chunk!r}")
        edges.append(Edge(int(m[1]), int(m[2]), int(m[3]), m[4]))
    n = int(fields["vertices"])
    if "in" in fields or "out" in fields:
        return GraphMonomial(n, edges, int(fields["in"]), int(fields["out"]))
    return TestGraph(n, edges)
