import numpy as np
import pytest

from diagfree.graphs import Edge, GraphMonomial, MatrixFamilies, evaluate, monomial_graph, path
from diagfree.kernel import delta, diagonal_schatten_moment
from diagfree.models import ModelSpec, gue, gue_vp, rng_for
from diagfree.freeness import (
    AlternatingWord,
    BernoulliMask,
    BlockProfileMask,
    DecayTable,
    Monomial,
    build_epsilon,
    corpus_cactus_coefficient,
    corpus_manifest,
    decay_experiment,
    decay_verdict,
    draw_families,
    evaluate_monomial,
    masked_decay_experiment,
    run_experiment,
    word_corpus,
)


def complex_families(N, seed=0):
    rng = np.random.default_rng(seed)
    return MatrixFamilies(
        {(l, k): rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N)) for l in (1, 2) for k in ("X", "Y")}
    )


def test_diagonal_families_give_zero():
    rng = np.random.default_rng(0)
    fams = MatrixFamilies({(1, "X"): np.diag(rng.standard_normal(5)), (2, "X"): np.diag(rng.standard_normal(5))})
    for word in [(1, 2), (1, 2, 1), (2, 1, 2, 1)]:
        assert np.array_equal(build_epsilon(AlternatingWord(word), fams), np.zeros(5))


def test_hand_expansion_at_three():
    fams = complex_families(3, seed=1)
    A, B = fams[1, "X"], fams[2, "X"]
    Ac = A - np.diag(delta(A))
    Bc = B - np.diag(delta(B))
    expected = [sum(Ac[i, k] * Bc[k, i] for k in range(3)) for i in range(3)]
    assert np.allclose(build_epsilon(AlternatingWord((1, 2)), fams), expected, atol=1e-14)


def test_epsilon_vector_is_diagonal_of_product():
    fams = complex_families(6, seed=2)
    word = AlternatingWord((1, 2, 1), (Monomial(("X", "Y")), Monomial(), Monomial(("Y",), ("D1", "D2"))))
    mats = []
    for l, m in zip(word.families, word.monomials):
        M = evaluate_monomial(m, l, fams)
        mats.append(M - np.diag(np.diag(M)))
    full = mats[0] @ mats[1] @ mats[2]
    assert np.allclose(build_epsilon(word, fams), np.diag(full))


def test_purely_diagonal_letter_forces_zero():
    fams = complex_families(6, seed=3)
    # the second letter is a product of diagonals only
    dfams = MatrixFamilies({**{k: fams[k] for k in [(1, "X"), (2, "X")]}, (2, "D"): np.diag(delta(fams[2, "X"]))})
    word = AlternatingWord((1, 2), (Monomial(), Monomial(("D",), ("D1", "D3"))))
    assert np.array_equal(build_epsilon(word, dfams), np.zeros(6))


def test_monomial_matches_graph_evaluation():
    fams = complex_families(4, seed=4)
    cactus = GraphMonomial(2, (Edge(0, 1, 2, "X"), Edge(1, 0, 2, "Y")), 0, 0)
    d = np.arange(1.0, 5.0)
    m = Monomial(("X", "Y"), (cactus, d, "D1"))
    got = evaluate_monomial(m, 1, fams)
    # coefficient on the output side of the path, then X, then d, then Y, then D1
    g = monomial_graph(1, ["X", "Y"], {0: cactus})
    direct = evaluate(g, fams)
    expected = np.diag(np.diag(evaluate(cactus, fams))) @ fams[1, "X"] @ np.diag(d) @ fams[1, "Y"] @ np.diag([1, -1, 1, -1])
    assert np.allclose(got, expected)
    assert np.allclose(direct, np.diag(np.diag(evaluate(cactus, fams))) @ fams[1, "X"] @ fams[1, "Y"])
    assert np.allclose(evaluate(path([(1, "X"), (1, "Y")]), fams), evaluate_monomial(Monomial(("X", "Y")), 1, fams))


def test_word_validation():
    with pytest.raises(ValueError):
        AlternatingWord((1,))
    with pytest.raises(ValueError):
        AlternatingWord((1, 1, 2))
    with pytest.raises(ValueError):
        Monomial(())
    with pytest.raises(ValueError):
        Monomial(("X",), (None,))
    # a path is not a cactus-type coefficient
    with pytest.raises(ValueError):
        Monomial(("X",), (GraphMonomial(2, (Edge(0, 1),), 0, 0), None))
    with pytest.raises(ValueError):
        evaluate_monomial(Monomial(("X",), (np.ones(3), None)), 1, complex_families(4))


def test_identity_families_give_zero_table():
    specs = {1: ModelSpec("diag", D=(2.0,)), 2: ModelSpec("diag", D=(-1.0,))}
    table = decay_experiment(AlternatingWord((1, 2)), specs, [8, 16], trials=3)
    assert table.mean == [0.0, 0.0]
    v = decay_verdict(table)
    assert v["passed"] and v["identically_zero"]


def test_all_ones_mask_is_identity():
    word = AlternatingWord((1, 2))
    specs = {1: ModelSpec("perm"), 2: ModelSpec("er", d=1.0)}
    plain = decay_experiment(word, specs, [20, 40], trials=4, seed=5)
    masked = masked_decay_experiment(word, specs, {1: BernoulliMask(1.0), 2: BernoulliMask(1.0)}, [20, 40], trials=4, seed=5)
    # a Bernoulli(1) mask keeps every off-diagonal entry, and both models have zero diagonals
    assert plain.mean == masked.mean and plain.stderr == masked.stderr


def test_seed_determinism():
    exp = word_corpus()["permp-permp-n3"]
    a = run_experiment(exp, [20, 40], trials=5, seed=9)
    b = run_experiment(exp, [20, 40], trials=5, seed=9)
    c = run_experiment(exp, [20, 40], trials=5, seed=10)
    assert a.mean == b.mean and a.stderr == b.stderr
    assert a.mean != c.mean


def test_scale_covariance_exact():
    specs = {1: ModelSpec.parse("perm:p=0.5"), 2: ModelSpec("er", d=1.0)}
    cactus = corpus_cactus_coefficient()
    word = AlternatingWord((1, 2, 1), (Monomial(("X",), (cactus, None)), Monomial(("X", "X")), Monomial()))
    for trial in range(3):
        fams = draw_families(specs, 30, 0, trial)
        base = diagonal_schatten_moment(build_epsilon(word, fams), 1)
        for family in (1, 2):
            scaled = diagonal_schatten_moment(build_epsilon(word, fams.scaled(family, 2.0)), 1)
            assert scaled == base * 4 ** word.occurrences(family)


def test_profile_mask_reproduces_variance_profile():
    N, eta = 16, 0.03125
    masked = gue(N, rng_for(3)) * BlockProfileMask(eta).draw(N, rng_for(4))
    assert np.allclose(masked, gue_vp(N, eta, rng_for(3)), atol=1e-15)


def test_corpus_contents():
    corpus = word_corpus()
    for prefix in ("perm-perm", "er-er", "permp-permp"):
        for suffix in ("n2", "n2b", "n3", "n3b"):
            assert f"{prefix}-{suffix}" in corpus
    assert "perm-perm-cactus" in corpus
    manifest = corpus_manifest()
    assert set(manifest) == set(corpus)
    assert manifest["guevp-perm-n2"]["default_Ns"] == [48, 96, 192, 384]
    # the diagonal exempt family makes the defect vanish identically
    table = run_experiment(corpus["diag-perm-n2"], [20, 40], trials=3)
    assert table.mean == [0.0, 0.0]


def test_cactus_coefficient_is_nontrivial():
    c = corpus_cactus_coefficient()
    assert len(c.edges) >= 2
    fams = draw_families({1: ModelSpec("perm"), 2: ModelSpec("perm")}, 50, 0, 0)
    assert np.any(np.diagonal(evaluate(c, fams)) != 0)


def test_short_decay_runs():
    table = run_experiment(word_corpus()["perm-perm-n2"], [25, 100], trials=10, seed=0)
    assert table.mean[1] < table.mean[0]
    assert all(s > 0 for s in table.stderr)


def test_verdict_logic():
    good = DecayTable([50, 100, 200, 400], [1.0, 0.5, 0.25, 0.125], [0.01] * 4, 40, 1)
    v = decay_verdict(good)
    assert v["passed"] and all(v["significant_steps"]) and v["ratio"] == 0.125
    bumpy = DecayTable([50, 100, 200, 400], [1.0, 0.5, 0.6, 0.1], [0.01] * 4, 40, 1)
    assert not decay_verdict(bumpy)["passed"]
    shallow = DecayTable([50, 100, 200, 400], [1.0, 0.9, 0.8, 0.7], [0.01] * 4, 40, 1)
    assert not decay_verdict(shallow)["passed"]
    noisy = DecayTable([50, 100, 200, 400], [1.0, 0.5, 0.25, 0.2], [0.3, 0.1, 0.1, 0.1], 40, 1)
    v = decay_verdict(noisy)
    assert v["decreasing"] and not v["ratio_ok"] and not v["passed"]


def test_table_csv(tmp_path):
    table = DecayTable([50, 100], [0.5, 0.25], [0.01, 0.02], 40, 1)
    table.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["N,mean,stderr,trials,p", "50,0.5,0.01,40,1", "100,0.25,0.02,40,1"]


def test_experiment_validation():
    with pytest.raises(ValueError):
        decay_experiment(AlternatingWord((1, 2)), {1: ModelSpec("perm")}, [10], trials=2)
    with pytest.raises(ValueError):
        decay_experiment(AlternatingWord((1, 2)), ["gue_vp:eta=0.5", "perm"], [50], trials=2)
    with pytest.raises(ValueError):
        decay_experiment(AlternatingWord((1, 2)), ["perm", "perm"], [10], trials=0)
