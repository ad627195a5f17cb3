"""Seeded random matrix models.

Every generator takes ``N`` and a ``numpy.random.Generator``; use
:func:`rng_for` to derive reproducible substreams from a master seed.

Model strings (``ModelSpec.parse``)::

    gue                      plain GUE, entry variance 1/N
    gue_vp:eta=0.03125       GUE with a 2x2 block variance profile
    er:d=1                   standardized sparse Erdos-Renyi adjacency
    perm / perm:p=0.5        symmetrized centered permutation, optionally percolated
    fft:D=D2,p=0.5           permuted DFT conjugate of a diagonal
    ubm:D=D2,t=0.125,steps=100
    diag:D=D2                fixed diagonal (not permutation invariant)

``D`` is one of ``D1``, ``D2``, ``D3`` or an explicit ``;``-separated list of
reals, tiled to length N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.stats

from .kernel import hermitize

KINDS = ("gue", "gue_vp", "er", "perm", "fft", "ubm", "diag")


def rng_for(seed: int, *substream: int) -> np.random.Generator:
    """Generator for the substream ``substream`` of the master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in substream))
    return np.random.Generator(np.random.PCG64(ss))


def _centering(N: int) -> np.ndarray:
    # zero diagonal, 1/(N-1) off the diagonal
    J = np.full((N, N), 1.0 / (N - 1)) if N > 1 else np.zeros((1, 1))
    np.fill_diagonal(J, 0.0)
    return J


def gue(N: int, rng: np.random.Generator) -> np.ndarray:
    """GUE normalized so that every entry has variance 1/N."""
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(2)
    return hermitize(Z * math.sqrt(2.0 / N))


def gue_vp(N: int, eta: float, rng: np.random.Generator) -> np.ndarray:
    if N % 4:
        raise ValueError(f"gue_vp needs N divisible by 4, got {N}")
    if eta <= 0:
        raise ValueError("eta must be positive")
    X = gue(N, rng)
    m = N // 4
    s = math.sqrt(eta)
    X[:m, :m] *= s
    X[m:, m:] *= s
    return hermitize(X * math.sqrt(8.0 / (5.0 * eta + 3.0)))


def erdos_renyi(N: int, d: float, rng: np.random.Generator) -> np.ndarray:
    if not 0 < d < N - 1:
        raise ValueError(f"need 0 < d < N-1, got d={d}, N={N}")
    q = d / (N - 1)
    lower = np.tril(rng.random((N, N)) < q, k=-1).astype(float)
    Y = lower + lower.T
    return (Y - d * _centering(N)) / math.sqrt(d * (1.0 - q))


def uniform_permutation(N: int, rng: np.random.Generator) -> np.ndarray:
    """0/1 matrix of a uniform permutation (numpy's shuffle is Fisher-Yates)."""
    V = np.zeros((N, N))
    V[np.arange(N), rng.permutation(N)] = 1.0
    return V


def perm_model(N: int, rng: np.random.Generator) -> np.ndarray:
    V = uniform_permutation(N, rng)
    return (V + V.T - 2.0 * _centering(N)) / math.sqrt(2.0)


def bernoulli_mask(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric, null diagonal, i.i.d. Bernoulli(p) strictly below the diagonal."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    lower = np.tril(rng.random((N, N)) < p, k=-1).astype(float)
    return lower + lower.T


def percolate(M, p: float, rng: np.random.Generator) -> np.ndarray:
    M = np.asarray(M)
    return M * bernoulli_mask(M.shape[0], p, rng) / math.sqrt(p)


def diag_family(name, N: int) -> np.ndarray:
    """The reference diagonals D1, D2, D3, or an explicit list tiled to length N."""
    if not isinstance(name, str):
        values = np.asarray(name, dtype=float)
        if values.size == 0 or N % values.size:
            raise ValueError(f"diagonal of length {values.size} does not tile N={N}")
        return np.tile(values, N // values.size)
    if N % 2:
        raise ValueError(f"{name} needs N even, got {N}")
    h = N // 2
    if name == "D1":
        return np.tile([1.0, -1.0], h)
    if name == "D2":
        return np.concatenate([-np.ones(h), np.ones(h)])
    if name == "D3":
        k = np.arange(h)
        return math.sqrt(3.0 / 14.0) * np.concatenate([-2.0 + 2.0 * k / N, 1.0 + 2.0 * (k + 1) / N])
    raise ValueError(f"unknown diagonal family {name!r}")


def fft_model(N: int, D, rng: np.random.Generator) -> np.ndarray:
    d = np.asarray(D, dtype=float)
    U = scipy.linalg.dft(N, scale="sqrtn")
    V = uniform_permutation(N, rng)
    W = V @ U
    return hermitize((W * d) @ W.conj().T)


def ubm_path(N: int, t: float, steps: int, rng: np.random.Generator, start=None):
    """Yield U_0, U_1, ..., U_steps of the geometric Euler scheme.

    ``U_{k+1} = U_k exp(i sqrt(t/steps) G_k)`` with ``G_k`` i.i.d. GUE; the
    exponential of each Hermitian increment is taken exactly through its
    eigendecomposition.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if steps < 1 and t > 0:
        raise ValueError("steps must be >= 1 when t > 0")
    U = uniform_permutation(N, rng).astype(complex) if start is None else np.asarray(start, dtype=complex)
    yield U
    if steps < 1:
        return
    scale = math.sqrt(t / steps)
    for _ in range(steps):
        if scale == 0:
            yield U
            continue
        w, Q = np.linalg.eigh(gue(N, rng))
        U = U @ ((Q * np.exp(1j * scale * w)) @ Q.conj().T)
        yield U


def default_ubm_steps(t: float) -> int:
    return max(50, math.ceil(200 * t))


def ubm_model(N: int, D, t: float, steps: int | None, rng: np.random.Generator) -> np.ndarray:
    d = np.asarray(D, dtype=float)
    if steps is None:
        steps = default_ubm_steps(t)
    for U in ubm_path(N, t, steps, rng):
        pass
    return hermitize((U * d) @ U.conj().T)


def _format_number(v: float) -> str:
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    eta: float | None = None
    d: float | None = None
    p: float | None = None
    D: str | tuple[float, ...] | None = None
    t: float | None = None
    steps: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        required = {"gue_vp": ("eta",), "er": ("d",), "fft": ("D",), "ubm": ("D", "t"), "diag": ("D",)}
        for name in required.get(self.kind, ()):
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind} requires parameter {name}")
        allowed = {
            "gue": (),
            "gue_vp": ("eta",),
            "er": ("d",),
            "perm": ("p",),
            "fft": ("D", "p"),
            "ubm": ("D", "t", "steps"),
            "diag": ("D",),
        }[self.kind]
        for name in ("eta", "d", "p", "D", "t", "steps"):
            if name not in allowed and getattr(self, name) is not None:
                raise ValueError(f"{self.kind} does not take parameter {name}")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.d is not None and self.d <= 0:
            raise ValueError("d must be positive")
        if self.p is not None and not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.t is not None and self.t < 0:
            raise ValueError("t must be nonnegative")
        if self.steps is not None and self.steps < 1 and (self.t or 0) > 0:
            raise ValueError("steps must be >= 1 when t > 0")

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        kind, _, rest = text.strip().partition(":")
        kwargs: dict = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, value = item.partition("=")
            key = key.strip()
            if not eq:
                raise ValueError(f"malformed parameter {item!r} in {text!r}")
            value = value.strip()
            if key == "D":
                kwargs[key] = value if value in ("D1", "D2", "D3") else tuple(float(v) for v in value.split(";"))
            elif key == "steps":
                kwargs[key] = int(value)
            elif key in ("eta", "d", "p", "t"):
                kwargs[key] = float(value)
            else:
                raise ValueError(f"unknown parameter {key!r} in {text!r}")
        return cls(kind.strip(), **kwargs)

    def __str__(self) -> str:
        parts = []
        for name in ("eta", "d", "D", "t", "steps", "p"):
            if getattr(self, name) is None:
                continue
            value = getattr(self, name)
            if name == "D":
                text = value if isinstance(value, str) else ";".join(_format_number(v) for v in value)
            else:
                text = _format_number(value)
            parts.append(f"{name}={text}")
        return self.kind + (":" + ",".join(parts) if parts else "")

    def check_size(self, N: int) -> None:
        if self.kind == "gue_vp" and N % 4:
            raise ValueError(f"{self} needs N divisible by 4, got {N}")
        if self.kind == "er" and not self.d < N - 1:
            raise ValueError(f"{self} needs d < N-1, got N={N}")
        if self.D is not None:
            diag_family(self.D, N)

    def generate(self, N: int, rng: np.random.Generator) -> np.ndarray:
        self.check_size(N)
        if self.kind == "gue":
            return gue(N, rng)
        if self.kind == "gue_vp":
            return gue_vp(N, self.eta, rng)
        if self.kind == "er":
            return erdos_renyi(N, self.d, rng)
        if self.kind == "diag":
            return np.diag(diag_family(self.D, N))
        if self.kind == "perm":
            M = perm_model(N, rng)
        elif self.kind == "fft":
            M = fft_model(N, diag_family(self.D, N), rng)
        else:
            M = ubm_model(N, diag_family(self.D, N), self.t, self.steps, rng)
        if self.p is not None:
            M = percolate(M, self.p, rng)
        return M


@dataclass
class InvarianceReport:
    functionals: list[str]
    ks_statistics: list[float]
    p_values: list[float]
    alpha: float

    @property
    def invariant(self) -> bool:
        # Bonferroni over the functionals
        return min(self.p_values) > self.alpha / len(self.p_values)


def _functionals(M: np.ndarray) -> list[float]:
    N = M.shape[0]
    return [
        float(M[0, 0].real),
        float(abs(M[0, 1]) ** 2),
        float(abs(M[0, N - 1]) ** 2),
        float(np.sum(np.abs(M) ** 2).real / N),
    ]


FUNCTIONAL_NAMES = ["Re M[0,0]", "|M[0,1]|^2", "|M[0,N-1]|^2", "Tr(M M*)/N"]


def check_permutation_invariance(
    generator: Callable[[np.random.Generator], np.ndarray],
    N: int,
    trials: int,
    seed: int = 0,
    alpha: float = 0.01,
) -> InvarianceReport:
    """Two-sample KS comparison of entry functionals of ``M`` and ``S M S^T``.

    The plain and conjugated samples come from independent draws, and ``S``
    is a fresh uniform permutation per draw.
    """
    plain = []
    conjugated = []
    for i in range(trials):
        plain.append(_functionals(generator(rng_for(seed, 0, i))))
        M = generator(rng_for(seed, 1, i))
        perm = rng_for(seed, 2, i).permutation(N)
        conjugated.append(_functionals(M[np.ix_(perm, perm)]))
    plain = np.array(plain)
    conjugated = np.array(conjugated)
    stats, pvals = [], []
    for j in range(plain.shape[1]):
        if np.ptp(plain[:, j]) == 0 and np.ptp(conjugated[:, j]) == 0:
            same = plain[0, j] == conjugated[0, j]
            stats.append(0.0 if same else 1.0)
            pvals.append(1.0 if same else 0.0)
            continue
        res = scipy.stats.ks_2samp(plain[:, j], conjugated[:, j], method="asymp")
        stats.append(float(res.statistic))
        pvals.append(float(res.pvalue))
    return InvarianceReport(FUNCTIONAL_NAMES, stats, pvals, alpha)
