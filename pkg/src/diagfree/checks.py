"""Self-checking suites over the graph and traffic machinery.

Every suite returns a :class:`CheckReport` whose failures carry enough to
replay the case: the serialized graph, the partition and the seed.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graphs import (
    Edge,
    GraphMonomial,
    MatrixFamilies,
    TestGraph,
    evaluate,
    format_graph,
    graph_delta,
    graph_product,
    is_cactus_type,
    loop,
    monomial_graph,
    parse_graph,
    random_cactus_monomial,
    random_monomial,
)
from .kernel import diag_matrix, delta
from .models import ModelSpec, rng_for
from .traffic import (
    centered_trace,
    epsilon_expansion,
    injective_from_tau,
    ms_bound_check,
    tau,
    tau_from_injective,
    tau_injective,
    tree_partitions,
)


@dataclass
class CheckReport:
    check: str
    passed: bool
    n_cases: int
    max_error: float | None = None
    params: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def random_families(labels, N: int, seed: int, hermitian: bool = False) -> MatrixFamilies:
    """Fixed complex Gaussian matrices, one per label, drawn from ``seed``."""
    mats = {}
    for i, (l, k) in enumerate(sorted(set(labels))):
        rng = rng_for(seed, i)
        M = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        mats[l, k] = (M + M.conj().T) / 2 if hermitian else M
    return MatrixFamilies(mats)


def families_from_sources(sources: Mapping[str, str], N: int, seed: int) -> MatrixFamilies:
    """Families from ``{"family:key": model spec}``; each label gets its own substream."""
    mats = {}
    for i, (label, spec) in enumerate(sorted(sources.items())):
        l, _, k = label.partition(":")
        mats[int(l), k or "X"] = ModelSpec.parse(spec).generate(N, rng_for(seed, i))
    return MatrixFamilies(mats)


def _labels(g) -> list[tuple[int, str]]:
    return [(e.family, e.key) for e in g.edges]


def mobius_corpus() -> list[TestGraph]:
    """Twelve test graphs on at most four vertices, with loops, multi-edges and several components."""
    lines = [
        "vertices=1; edges=(0,0,1,A)",
        "vertices=1; edges=(0,0,1,A);(0,0,2,B)",
        "vertices=2; edges=(0,1,1,A)",
        "vertices=2; edges=(0,1,1,A);(1,0,2,B)",
        "vertices=2; edges=(0,1,1,A);(0,1,1,A);(1,0,2,B)",
        "vertices=2; edges=(0,1,1,A);(1,1,2,B)",
        "vertices=3; edges=(0,1,1,A);(1,2,2,B)",
        "vertices=3; edges=(0,1,1,A);(1,2,2,B);(2,0,1,B)",
        "vertices=3; edges=(0,1,1,A);(2,2,2,A)",
        "vertices=4; edges=(0,1,1,A);(1,2,2,A);(2,3,1,B);(3,0,2,B)",
        "vertices=4; edges=(0,1,1,A);(0,2,2,B);(0,3,1,A);(3,3,2,A)",
        "vertices=4; edges=(0,1,1,A);(1,0,1,B);(2,3,2,A);(3,2,2,B)",
    ]
    return [parse_graph(s) for s in lines]


def check_mobius(max_vertices: int = 4, N: int = 5, seed: int = 0, tol: float = 1e-9, graphs=None) -> CheckReport:
    """Round trips between the full and injective traces through both partition sums."""
    graphs = [T for T in (graphs if graphs is not None else mobius_corpus()) if T.n_vertices <= max_vertices]
    labels = [lab for T in graphs for lab in _labels(T)]
    fams = random_families(labels, N, seed)
    failures = []
    max_err = 0.0
    for T in graphs:
        direct = tau(T, fams)
        direct0 = tau_injective(T, fams)
        via = {
            "tau<-tau0<-tau": tau_from_injective(T, fams, injective=injective_from_tau),
            "tau0<-tau<-tau0": injective_from_tau(T, fams, trace=tau_from_injective),
            "tau<-tau0": tau_from_injective(T, fams),
            "tau0<-tau": injective_from_tau(T, fams),
        }
        for route, value in via.items():
            target = direct if route.startswith("tau<") else direct0
            err = abs(value - target)
            max_err = max(max_err, err)
            if not err <= tol:
                failures.append({"graph": format_graph(T), "route": route, "error": err, "seed": seed, "N": N})
    return CheckReport(
        "mobius",
        not failures,
        len(graphs),
        max_err,
        {"max_vertices": max_vertices, "N": N, "seed": seed, "tol": tol},
        failures,
    )


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


def check_homomorphism(
    samples: int = 50, N: int = 6, seed: int = 0, tol: float = 1e-10, max_vertices: int = 5
) -> CheckReport:
    """Evaluation turns graph products into matrix products and root merging into the diagonal map."""
    labels = [(1, "A"), (1, "A*"), (2, "B"), (2, "C")]
    fams = random_families([(1, "A"), (2, "B"), (2, "C")], N, seed)
    rng = rng_for(seed, 1)
    failures = []
    max_err = 0.0
    for i in range(samples):
        graphs = []
        for _ in range(2):
            n = int(rng.integers(1, max_vertices + 1))
            m = int(rng.integers(max(n - 1, 1), n + 3))
            graphs.append(random_monomial(n, m, labels, seed=rng, equal_roots=bool(rng.random() < 0.25)))
        g1, g2 = graphs
        product = graph_product(g1, g2)
        err_p = _relative(evaluate(product, fams, max_vertices=2 * max_vertices), evaluate(g1, fams) @ evaluate(g2, fams))
        err_d = _relative(evaluate(graph_delta(g1), fams), diag_matrix(delta(evaluate(g1, fams))))
        max_err = max(max_err, err_p, err_d)
        if not (err_p <= tol and err_d <= tol):
            failures.append(
                {"index": i, "g1": format_graph(g1), "g2": format_graph(g2), "product_error": err_p,
                 "delta_error": err_d, "seed": seed}
            )
    return CheckReport(
        "homomorphism", not failures, samples, max_err,
        {"samples": samples, "N": N, "seed": seed, "tol": tol, "max_vertices": max_vertices}, failures,
    )


def _bound_families(N: int, seed: int) -> MatrixFamilies:
    mats = {
        (1, "G"): ModelSpec("gue").generate(N, rng_for(seed, 0)),
        (1, "P"): ModelSpec("perm").generate(N, rng_for(seed, 1)),
        (2, "E"): ModelSpec("er", d=2.0).generate(N, rng_for(seed, 2)),
    }
    rng = rng_for(seed, 3)
    mats[2, "Z"] = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(N)
    return MatrixFamilies(mats)


def check_ms_bound(samples: int = 100, N: int = 12, seed: int = 0) -> CheckReport:
    """``|Tr g| <= N^(f/2) prod ||A_e||`` on ``samples`` cactus-type and ``samples`` general equal-root monomials."""
    fams = _bound_families(N, seed)
    labels = [(1, "G"), (1, "P"), (2, "E"), (2, "Z"), (2, "Z*")]
    rng = rng_for(seed, 4)
    graphs = []
    while len(graphs) < samples:
        g = random_cactus_monomial(int(rng.integers(1, 4)), labels, seed=rng)
        if g.n_vertices <= 6:
            graphs.append(("cactus", g))
    for _ in range(samples):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(max(n - 1, 1), n + 4))
        graphs.append(("general", random_monomial(n, m, labels, seed=rng, equal_roots=True)))
    failures = []
    worst = 0.0
    by_kind = {"cactus": 0.0, "general": 0.0}
    for kind, g in graphs:
        if kind == "cactus" and not is_cactus_type(g):
            failures.append({"kind": kind, "graph": format_graph(g), "reason": "not cactus-type", "seed": seed})
            continue
        r = ms_bound_check(g, fams)
        worst = max(worst, r.ratio)
        by_kind[kind] = max(by_kind[kind], r.ratio)
        if not r.holds:
            failures.append({"kind": kind, "graph": format_graph(g), "ratio": r.ratio, "f": r.f, "seed": seed})
    return CheckReport(
        "ms-bound", not failures, len(graphs), None,
        {"samples": samples, "N": N, "seed": seed}, failures,
        {"max_ratio": worst, "max_ratio_cactus": by_kind["cactus"], "max_ratio_general": by_kind["general"]},
    )


def alternating_monomials(family_word: Sequence[int], degrees: Sequence[int], coefficients=None) -> list[GraphMonomial]:
    """Graphs ``t_i`` for the word, monomial ``X^(d_i)`` of family ``l_i`` with optional coefficient graphs."""
    coefficients = coefficients or [None] * len(family_word)
    return [monomial_graph(l, ["X"] * d, c) for l, d, c in zip(family_word, degrees, coefficients)]


def _coefficient_choices(own: int, other: int):
    """No coefficient, a loop of the other family, or a two-cycle of either family, at the output."""
    two_cycle = lambda l: GraphMonomial(2, (Edge(0, 1, l, "X"), Edge(1, 0, l, "X")), 0, 0)  # noqa: E731
    return [None, {0: loop(other)}, {0: two_cycle(own)}, {0: two_cycle(other)}]


def expansion_cases(ns: Sequence[int] = (2, 3)):
    """The exhaustive case list: words, degree patterns and coefficient choices on the first factor."""
    for n in ns:
        words = [w for w in itertools.product((1, 2, 3), repeat=n) if all(a != b for a, b in zip(w, w[1:]))]
        words = [w for w in words if w[0] == 1 and set(w) <= set(range(1, max(w) + 1))]
        for w in words:
            other = 2 if w[0] != 2 else 1
            for degrees in itertools.product((1, 2), repeat=n):
                for coeff in _coefficient_choices(w[0], other):
                    yield w, degrees, [coeff] + [None] * (n - 1)


def _case_name(word, degrees, coeffs) -> dict:
    ts = alternating_monomials(word, degrees, coeffs)
    return {"word": list(word), "degrees": list(degrees), "monomials": [format_graph(t) for t in ts]}


def check_expansion(N: int = 3, seed: int = 0, tol: float = 1e-10, ns: Sequence[int] = (2, 3)) -> CheckReport:
    """Centered trace equals the sum of injective traces over partitions keeping consecutive marks apart,
    and none of those partitions has a tree as graph of colored components."""
    fams = random_families([(1, "X"), (2, "X"), (3, "X")], N, seed)
    failures = []
    max_err = 0.0
    count = 0
    for word, degrees, coeffs in expansion_cases(ns):
        count += 1
        ts = alternating_monomials(word, degrees, coeffs)
        expansion = epsilon_expansion(ts, fams)
        direct = centered_trace(ts, fams)
        err = abs(expansion - direct)
        max_err = max(max_err, err)
        if not err <= tol:
            failures.append({**_case_name(word, degrees, coeffs), "error": err, "seed": seed, "N": N})
        trees = tree_partitions(ts)
        if trees:
            failures.append({**_case_name(word, degrees, coeffs), "tree_partitions": [list(map(list, p.blocks)) for p in trees]})
    return CheckReport("expansion", not failures, count, max_err, {"N": N, "seed": seed, "tol": tol, "n": list(ns)}, failures)


def run_manifest(entries: Sequence[Mapping]) -> CheckReport:
    """Identity checks listed one per entry.

    Each entry has ``check`` (``mobius``, ``ms-bound``, ``product`` or ``delta``),
    the graph line(s) under ``graph`` (and ``graph2`` for ``product``), ``N``,
    ``seed`` and optionally ``sources`` mapping ``"family:key"`` to a model spec;
    without sources every label gets a fixed complex Gaussian matrix.
    """
    failures = []
    max_err = 0.0
    for i, entry in enumerate(entries):
        kind = entry["check"]
        N = int(entry.get("N", 5))
        seed = int(entry.get("seed", 0))
        tol = float(entry.get("tol", 1e-9))
        g = parse_graph(entry["graph"])
        graphs = [g] + ([parse_graph(entry["graph2"])] if "graph2" in entry else [])
        labels = {lab for h in graphs for lab in _labels(h)}
        labels = {(l, k[:-1]) if k.endswith("*") else (l, k) for l, k in labels}
        if "sources" in entry:
            fams = families_from_sources(entry["sources"], N, seed)
        else:
            fams = random_families(labels, N, seed)
        record = {"index": i, "check": kind, "graph": entry["graph"], "N": N, "seed": seed}
        if kind == "mobius":
            T = g.as_test_graph() if isinstance(g, GraphMonomial) else g
            err = max(
                abs(tau_from_injective(T, fams, injective=injective_from_tau) - tau(T, fams)),
                abs(injective_from_tau(T, fams) - tau_injective(T, fams)),
            )
        elif kind == "ms-bound":
            r = ms_bound_check(g, fams)
            err = 0.0 if r.holds else r.ratio
            record["ratio"] = r.ratio
        elif kind == "product":
            h = graphs[1]
            err = _relative(evaluate(graph_product(g, h), fams, max_vertices=20), evaluate(g, fams) @ evaluate(h, fams))
        elif kind == "delta":
            err = _relative(evaluate(graph_delta(g), fams), diag_matrix(delta(evaluate(g, fams))))
        else:
            raise ValueError(f"unknown check {kind!r} in entry {i}")
        if kind != "ms-bound":
            max_err = max(max_err, err)
        if not err <= tol:
            failures.append({**record, "error": err})
    return CheckReport("manifest", not failures, len(entries), max_err, {}, failures)
