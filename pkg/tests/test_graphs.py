import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diagfree.graphs import (
    Edge,
    GraphMonomial,
    MatrixFamilies,
    TestGraph,
    attach,
    bridges_and_blocks,
    evaluate,
    format_graph,
    graph_delta,
    graph_product,
    is_cactus,
    is_cactus_type,
    isomorphic,
    loop,
    monomial_graph,
    parse_graph,
    path,
    random_cactus_monomial,
    random_monomial,
    single_edge,
    unit,
)
from diagfree.kernel import delta

from oracles import evaluate_bruteforce, undirected_bridges

LABELS = [(1, "A"), (1, "A*"), (2, "B"), (2, "C")]


def families(N, seed=0):
    rng = np.random.default_rng(seed)
    mats = {}
    for lab in [(1, "A"), (2, "B"), (2, "C")]:
        mats[lab] = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return MatrixFamilies(mats)


def as_tuples(g):
    return [(e.src, e.dst, e.family, e.key) for e in g.edges]


@st.composite
def monomials(draw, max_vertices=4, equal_roots=None):
    n = draw(st.integers(1, max_vertices))
    m = draw(st.integers(max(n - 1, 0), n + 2))
    seed = draw(st.integers(0, 2**32 - 1))
    eq = draw(st.booleans()) if equal_roots is None else equal_roots
    if m == 0:
        return unit()
    return random_monomial(n, m, LABELS, seed=seed, equal_roots=eq)


def test_single_edge_is_matrix():
    f = families(4)
    assert np.array_equal(evaluate(single_edge(1, "A"), f), f[1, "A"])


def test_path_is_product():
    f = families(4)
    g = path([(1, "A"), (2, "B")])
    assert np.allclose(evaluate(g, f), f[1, "A"] @ f[2, "B"])


def test_loop_is_diagonal():
    f = families(4)
    assert np.array_equal(evaluate(loop(1, "A"), f), np.diag(np.diag(f[1, "A"])))


def test_unit_is_identity():
    assert np.array_equal(evaluate(unit(), families(3)), np.eye(3))


def test_adjoint_keys():
    f = families(3)
    assert np.array_equal(f[1, "A*"], f[1, "A"].conj().T)
    with pytest.raises(KeyError):
        f[3, "A"]


def test_families_validate():
    with pytest.raises(ValueError):
        MatrixFamilies({(1, "A"): np.eye(2), (1, "B"): np.eye(3)})


@settings(max_examples=60, deadline=None)
@given(monomials())
def test_evaluate_matches_bruteforce(g):
    N = 3
    f = families(N, seed=1)
    expected = evaluate_bruteforce(g.n_vertices, as_tuples(g), g.v_in, g.v_out, f, N)
    assert np.allclose(evaluate(g, f), expected, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(monomials(), monomials())
def test_product_homomorphism(g1, g2):
    f = families(4, seed=2)
    lhs = evaluate(graph_product(g1, g2), f)
    rhs = evaluate(g1, f) @ evaluate(g2, f)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), 1)


@settings(max_examples=60, deadline=None)
@given(monomials())
def test_delta_compatibility(g):
    f = families(4, seed=3)
    assert np.allclose(evaluate(graph_delta(g), f), np.diag(delta(evaluate(g, f))), atol=1e-10)
    assert graph_delta(graph_delta(g)) == graph_delta(g)


def test_product_examples():
    g = graph_product(single_edge(1, "A"), single_edge(2, "B"))
    assert isomorphic(g, path([(1, "A"), (2, "B")]))
    h = random_monomial(3, 4, LABELS, seed=5)
    assert isomorphic(graph_product(h, unit()), h)
    assert isomorphic(graph_product(unit(), h), h)


@settings(max_examples=30, deadline=None)
@given(monomials(3), monomials(3), monomials(3))
def test_product_associative(a, b, c):
    assert isomorphic(graph_product(graph_product(a, b), c), graph_product(a, graph_product(b, c)))


def test_delta_of_edge_is_loop():
    assert isomorphic(graph_delta(single_edge(1, "A")), loop(1, "A"))


def test_isomorphism_invariance_of_evaluation():
    g = random_monomial(4, 6, LABELS, seed=9)
    perm = [2, 0, 3, 1]
    h = GraphMonomial(4, [e.relabel(perm) for e in g.edges], perm[g.v_in], perm[g.v_out])
    assert isomorphic(g, h)
    f = families(4)
    assert np.allclose(evaluate(g, f), evaluate(h, f))


def test_connectivity_required():
    with pytest.raises(ValueError):
        GraphMonomial(2, [], 0, 1)
    with pytest.raises(ValueError):
        GraphMonomial(2, [Edge(0, 1)], 0, 2)


def test_vertex_cap():
    g = path([(1, "A")] * 11)
    with pytest.raises(ValueError):
        evaluate(g, families(2))


def triangle(offset=0, family=1, key="A"):
    return [Edge(offset + i, offset + (i + 1) % 3, family, key) for i in range(3)]


def test_cactus_examples():
    assert is_cactus(GraphMonomial(3, triangle(), 0, 0))
    two = triangle() + [Edge(0, 3), Edge(3, 4), Edge(4, 0)]
    assert is_cactus_type(GraphMonomial(5, two, 0, 0))
    assert not is_cactus(path([(1, "A"), (1, "A")]))
    # undirected triangle that is not a directed cycle
    assert not is_cactus(GraphMonomial(3, [Edge(0, 1), Edge(1, 2), Edge(0, 2)], 0, 0))
    # two cycles sharing an edge are one block with |E| > |V|
    theta = [Edge(0, 1), Edge(1, 2), Edge(2, 0), Edge(1, 0)]
    assert not is_cactus(GraphMonomial(3, theta, 0, 0))
    assert is_cactus(loop())
    assert is_cactus(GraphMonomial(2, [Edge(0, 1), Edge(1, 0)], 0, 0))
    assert not is_cactus_type(GraphMonomial(3, triangle(), 0, 1))


def test_random_cactus():
    assert random_cactus_monomial(0, LABELS, seed=0) == unit()
    for s in range(100):
        g = random_cactus_monomial(int(s % 5) + 1, LABELS, seed=s)
        assert is_cactus_type(g)


def test_cactus_evaluations_diagonal():
    f = families(4)
    d = {lab: np.diag(np.diag(f[lab])) for lab in [(1, "A"), (2, "B"), (2, "C")]}
    fd = MatrixFamilies(d)
    for s in range(40):
        g = random_cactus_monomial(2, LABELS, seed=s)
        for fam in (f, fd):
            M = evaluate(g, fam)
            assert np.count_nonzero(M - np.diag(np.diag(M))) == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 9), st.integers(0, 2**32 - 1))
def test_bridges_match_oracle(n, extra, seed):
    g = random_monomial(n, n - 1 + extra, LABELS, seed=seed)
    bridges, blocks = bridges_and_blocks(g.n_vertices, g.edges)
    pairs = [(e.src, e.dst) for e in g.edges]
    assert bridges == undirected_bridges(n, pairs)
    # blocks partition the edges
    assert sorted(i for b in blocks for i in b) == list(range(len(g.edges)))


def test_attach_and_monomial_graph():
    f = families(4)
    A, B = f[1, "A"], f[2, "B"]
    two_cycle = GraphMonomial(2, (Edge(0, 1, 2, "B"), Edge(1, 0, 2, "B")), 0, 0)
    g = monomial_graph(1, ["A", "A"], {0: loop(2, "B"), 2: two_cycle})
    expected = np.diag(np.diag(B)) @ A @ A @ np.diag(np.diag(B @ B))
    assert np.allclose(evaluate(g, f), expected)
    with pytest.raises(ValueError):
        attach(single_edge(), 0, single_edge())


def test_line_format_round_trip():
    g = random_monomial(4, 6, LABELS, seed=11)
    text = format_graph(g)
    assert parse_graph(text) == g
    T = TestGraph(3, (Edge(0, 1, 1, "A"), Edge(2, 2, 2, "B")))
    assert parse_graph(format_graph(T)) == T
    parsed = parse_graph("vertices=3; in=0; out=2; edges=(0,1,1,A);(1,2,2,B)")
    assert parsed.v_in == 0 and parsed.v_out == 2 and len(parsed.edges) == 2
    with pytest.raises(ValueError):
        parse_graph("vertices=2; edges=(0,1,A)")
