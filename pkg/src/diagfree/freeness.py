"""Empirical freeness defect over the diagonal.

For an alternating word ``l_1 != l_2 != ... != l_n`` and monomials ``P_i``
the defect is the diagonal matrix

    eps = Delta[(M_1 - Delta M_1) ... (M_n - Delta M_n)],   M_i = P_i(A_{l_i}),

and :func:`decay_experiment` tracks ``E[(1/N) Tr (eps eps*)^p]`` as ``N`` grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .graphs import GraphMonomial, MatrixFamilies, evaluate, is_cactus_type, random_cactus_monomial
from .kernel import diagonal_schatten_moment
from .models import ModelSpec, bernoulli_mask, diag_family, rng_for

Coefficient = Union[None, str, np.ndarray, GraphMonomial]


@dataclass(frozen=True)
class Monomial:
    """``c_0 X_{k_1} c_1 ... X_{k_d} c_d``.

    A coefficient is ``None`` (identity), the name of a reference diagonal
    (``"D1"``, ``"D2"``, ``"D3"``), an explicit diagonal, or a cactus-type
    graph monomial evaluated on all families.
    """

    keys: tuple[str, ...] = ("X",)
    coefficients: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(self.keys))
        coeffs = tuple(self.coefficients) or (None,) * (len(self.keys) + 1)
        object.__setattr__(self, "coefficients", coeffs)
        if len(self.keys) < 1:
            raise ValueError("monomial degree must be at least 1")
        if len(coeffs) != len(self.keys) + 1:
            raise ValueError("a degree-d monomial has d + 1 coefficients")
        for c in coeffs:
            if isinstance(c, GraphMonomial) and not is_cactus_type(c):
                raise ValueError("graph coefficients must be cactus-type monomials")

    def describe(self) -> str:
        parts = []
        for i, c in enumerate(self.coefficients):
            if c is not None:
                parts.append(_describe_coefficient(c))
            if i < len(self.keys):
                parts.append(self.keys[i])
        return " ".join(parts)


def _describe_coefficient(c) -> str:
    if isinstance(c, str):
        return c
    if isinstance(c, GraphMonomial):
        from .graphs import format_graph

        return f"[{format_graph(c)}]"
    return f"diag({len(c)})"


def _coefficient_diagonal(c, fams: MatrixFamilies) -> np.ndarray | None:
    if c is None:
        return None
    if isinstance(c, str):
        return diag_family(c, fams.N)
    if isinstance(c, GraphMonomial):
        return np.diagonal(evaluate(c, fams)).copy()
    c = np.asarray(c)
    if c.shape != (fams.N,):
        raise ValueError(f"diagonal coefficient of shape {c.shape} for N={fams.N}")
    return c


@dataclass(frozen=True)
class AlternatingWord:
    families: tuple[int, ...]
    monomials: tuple[Monomial, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        monos = tuple(self.monomials) or tuple(Monomial() for _ in self.families)
        object.__setattr__(self, "monomials", monos)
        if len(self.families) < 2:
            raise ValueError("an alternating word has length at least 2")
        if len(monos) != len(self.families):
            raise ValueError("one monomial per letter")
        if any(a == b for a, b in zip(self.families, self.families[1:])):
            raise ValueError(f"adjacent families must differ: {self.families}")

    def occurrences(self, family: int) -> int:
        """Number of matrix factors drawn from ``family``, coefficients included."""
        count = 0
        for l, m in zip(self.families, self.monomials):
            if l == family:
                count += len(m.keys)
            for c in m.coefficients:
                if isinstance(c, GraphMonomial):
                    count += sum(1 for e in c.edges if e.family == family)
        return count

    def describe(self) -> list[dict]:
        return [{"family": l, "monomial": m.describe()} for l, m in zip(self.families, self.monomials)]


def evaluate_monomial(m: Monomial, family: int, fams: MatrixFamilies) -> np.ndarray:
    N = fams.N
    out = np.eye(N, dtype=complex)
    for i, c in enumerate(m.coefficients):
        d = _coefficient_diagonal(c, fams)
        if d is not None:
            out = out * d[np.newaxis, :]
        if i < len(m.keys):
            out = out @ fams[family, m.keys[i]]
    return out


def build_epsilon(word: AlternatingWord, fams: MatrixFamilies) -> np.ndarray:
    """The defect ``eps`` as the vector of its diagonal."""
    centered = []
    for l, m in zip(word.families, word.monomials):
        M = evaluate_monomial(m, l, fams)
        M = M.copy()
        np.fill_diagonal(M, 0)
        centered.append(M)
    head = centered[0]
    for M in centered[1:-1]:
        head = head @ M
    return np.einsum("ij,ji->i", head, centered[-1])


class Mask:
    def draw(self, N: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class BernoulliMask(Mask):
    """Symmetric Bernoulli(p) percolation mask, rescaled by ``1/sqrt(p)`` by default."""

    p: float
    rescale: bool = True

    def draw(self, N, rng):
        G = bernoulli_mask(N, self.p, rng)
        return G / math.sqrt(self.p) if self.rescale else G

    def __str__(self):
        return f"bernoulli:p={self.p}" + ("" if self.rescale else ",rescale=0")


@dataclass(frozen=True)
class BlockProfileMask(Mask):
    """Deterministic 2x2 block profile: ``sqrt(eta)`` on the diagonal blocks (first of size N/4)."""

    eta: float
    normalize: bool = True

    def draw(self, N, rng):
        m = N // 4
        G = np.ones((N, N))
        G[:m, :m] = G[m:, m:] = math.sqrt(self.eta)
        return G * math.sqrt(8.0 / (5.0 * self.eta + 3.0)) if self.normalize else G

    def __str__(self):
        return f"profile:eta={self.eta}"


@dataclass
class DecayTable:
    N: list[int]
    mean: list[float]
    stderr: list[float]
    trials: int
    p: int
    meta: dict = field(default_factory=dict)

    def rows(self):
        for n, m, s in zip(self.N, self.mean, self.stderr):
            yield {"N": n, "mean": m, "stderr": s, "trials": self.trials, "p": self.p}

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["N", "mean", "stderr", "trials", "p"])
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def decay_verdict(table: DecayTable, k: float = 2.0, max_ratio: float = 0.5) -> dict:
    """Decay judged on an N-doubling ladder.

    Means must strictly decrease at every step, and the ratio last/first must
    stay below ``max_ratio`` even at its ``k``-SE upper bound (upper bound of
    the last mean over the lower bound of the first). Whether each step's drop
    exceeds ``k`` combined standard errors is reported as well, but not
    required. A table that vanishes identically passes.
    """
    m = np.array(table.mean)
    s = np.array(table.stderr)
    if np.all(m == 0):
        n = len(m) - 1
        return {
            "decreasing_steps": [True] * n,
            "significant_steps": [False] * n,
            "decreasing": True,
            "identically_zero": True,
            "ratio": 0.0,
            "ratio_upper_bound": 0.0,
            "ratio_ok": True,
            "passed": True,
        }
    steps = [bool(m[i + 1] < m[i]) for i in range(len(m) - 1)]
    significant = [bool(m[i] - m[i + 1] > k * math.hypot(s[i], s[i + 1])) for i in range(len(m) - 1)]
    lower_first = m[0] - k * s[0]
    ratio_bound = (m[-1] + k * s[-1]) / lower_first if lower_first > 0 else math.inf
    return {
        "decreasing_steps": steps,
        "significant_steps": significant,
        "decreasing": all(steps),
        "identically_zero": False,
        "ratio": float(m[-1] / m[0]) if m[0] else math.nan,
        "ratio_upper_bound": float(ratio_bound),
        "ratio_ok": bool(ratio_bound <= max_ratio),
        "passed": bool(all(steps) and ratio_bound <= max_ratio),
    }


def _normalize_specs(specs) -> dict[int, ModelSpec]:
    if isinstance(specs, Mapping):
        items = specs.items()
    else:
        items = enumerate(specs, start=1)
    return {int(l): (s if isinstance(s, ModelSpec) else ModelSpec.parse(s)) for l, s in items}


def draw_families(
    specs: Mapping[int, ModelSpec],
    N: int,
    seed: int,
    trial: int,
    masks: Mapping[int, Mask] | None = None,
) -> MatrixFamilies:
    """One realization of every family (key ``"X"``), masks drawn from separate substreams."""
    masks = masks or {}
    matrices = {}
    for l, spec in specs.items():
        M = spec.generate(N, rng_for(seed, N, trial, l, 0))
        if l in masks and masks[l] is not None:
            M = M * masks[l].draw(N, rng_for(seed, N, trial, l, 1))
        matrices[l, "X"] = M
    return MatrixFamilies(matrices)


def decay_experiment(
    word: AlternatingWord,
    specs,
    N_list: Sequence[int],
    p: int = 1,
    trials: int = 40,
    seed: int = 0,
) -> DecayTable:
    return masked_decay_experiment(word, specs, None, N_list, p, trials, seed)


def masked_decay_experiment(
    word: AlternatingWord,
    specs,
    masks: Mapping[int, Mask] | None,
    N_list: Sequence[int],
    p: int = 1,
    trials: int = 40,
    seed: int = 0,
) -> DecayTable:
    """Mean and standard error of ``(1/N) Tr (eps eps*)^p`` over ``trials`` draws, per ``N``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    specs = _normalize_specs(specs)
    missing = set(word.families) - set(specs)
    if missing:
        raise ValueError(f"no model for families {sorted(missing)}")
    for N in N_list:
        for spec in specs.values():
            spec.check_size(N)
    means, errs = [], []
    for N in N_list:
        values = [
            diagonal_schatten_moment(build_epsilon(word, draw_families(specs, N, seed, t, masks)), p)
            for t in range(trials)
        ]
        means.append(math.fsum(values) / trials)
        errs.append(float(np.std(values, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan)
    meta = {
        "word": word.describe(),
        "specs": {str(l): str(s) for l, s in specs.items()},
        "masks": {str(l): str(m) for l, m in (masks or {}).items() if m is not None},
        "seed": seed,
    }
    return DecayTable(list(N_list), means, errs, trials, p, meta)


@dataclass(frozen=True)
class Experiment:
    word: AlternatingWord
    specs: dict
    masks: dict = field(default_factory=dict)
    default_Ns: tuple[int, ...] = (50, 100, 200, 400)


CORPUS_CACTUS_SEED = 7

_NS_DIV4 = (48, 96, 192, 384)
_WORDS = {"n2": (1, 2), "n2b": (2, 1), "n3": (1, 2, 1), "n3b": (2, 1, 2)}


def corpus_cactus_coefficient() -> GraphMonomial:
    """The fixed size-2 random cactus-type coefficient used by the corpus."""
    return random_cactus_monomial(2, [(1, "X"), (2, "X"), (1, "X*")], seed=CORPUS_CACTUS_SEED, max_cycle=2)


def word_corpus() -> dict[str, Experiment]:
    """Named experiments: every adjacent-distinct word of length 2 or 3 over two families
    per model, one word with a cactus coefficient, and two words with an exempt family."""
    perm = {1: ModelSpec("perm"), 2: ModelSpec("perm")}
    models = {
        "perm-perm": (perm, {}),
        "er-er": ({1: ModelSpec("er", d=1.0), 2: ModelSpec("er", d=1.0)}, {}),
        "permp-permp": (perm, {1: BernoulliMask(0.5), 2: BernoulliMask(0.5)}),
    }
    corpus = {}
    for prefix, (specs, masks) in models.items():
        for suffix, fam in _WORDS.items():
            corpus[f"{prefix}-{suffix}"] = Experiment(AlternatingWord(fam), specs, masks)
    cactus = Monomial(("X",), (corpus_cactus_coefficient(), None))
    corpus["perm-perm-cactus"] = Experiment(AlternatingWord((1, 2), (cactus, Monomial())), perm)
    # family 1 is not permutation invariant in both of these
    corpus["diag-perm-n2"] = Experiment(AlternatingWord((1, 2)), {1: ModelSpec("diag", D="D2"), 2: ModelSpec("perm")})
    corpus["guevp-perm-n2"] = Experiment(
        AlternatingWord((1, 2)), {1: ModelSpec("gue_vp", eta=0.03125), 2: ModelSpec("perm")},
        default_Ns=_NS_DIV4,
    )
    corpus["gue-profile-perm-n2"] = Experiment(
        AlternatingWord((1, 2)), {1: ModelSpec("gue"), 2: ModelSpec("perm")}, {1: BlockProfileMask(0.03125)},
        default_Ns=_NS_DIV4,
    )
    return corpus


def corpus_manifest(corpus: Mapping[str, Experiment] | None = None) -> dict:
    corpus = word_corpus() if corpus is None else corpus
    return {
        name: {
            "word": exp.word.describe(),
            "specs": {str(l): str(s) for l, s in exp.specs.items()},
            "masks": {str(l): str(m) for l, m in exp.masks.items()},
            "default_Ns": list(exp.default_Ns),
        }
        for name, exp in corpus.items()
    }


def run_experiment(exp: Experiment, N_list, p=1, trials=40, seed=0) -> DecayTable:
    return masked_decay_experiment(exp.word, exp.specs, exp.masks, N_list, p, trials, seed)
