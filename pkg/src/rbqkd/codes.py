"""Binary linear codes for key reconciliation and base-string refresh.

Bit strings are ``numpy.uint8`` arrays of 0/1. Batches of words are 2-D arrays
with one word per row; ``syndrome``/``encode``/``syndrome_decode`` accept both.
"""
from __future__ import annotations

import itertools
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from rbqkd.exceptions import DecodeFailure

MAX_TABLE_N = 24
MAX_DENSE_N = 4096
MAX_ENUM_K = 20
_FFT_MIN = 512


# -- GF(2) linear algebra --------------------------------------------------


def as_bits(bits, length: int | None = None) -> np.ndarray:
    """Coerce a sequence, array or '0101' string to a uint8 bit array."""
    if isinstance(bits, str):
        arr = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits)
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit strings may only contain 0 and 1")
    arr = arr.astype(np.uint8)
    if length is not None and arr.shape[-1] != length:
        raise ValueError(f"expected {length} bits, got {arr.shape[-1]}")
    return arr


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def gf2_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # uint8 accumulation wraps mod 256, which keeps the parity intact
    return (np.asarray(a, dtype=np.uint8) @ np.asarray(b, dtype=np.uint8)) & 1


def gf2_rref(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and the pivot columns."""
    m = np.array(a, dtype=np.uint8) & 1
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(m[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        others = np.nonzero(m[:, c])[0]
        others = others[others != r]
        m[others] ^= m[r]
        pivots.append(c)
        r += 1
    return m, pivots


def gf2_rank(a: np.ndarray) -> int:
    if np.asarray(a).size == 0:
        return 0
    return len(gf2_rref(a)[1])


def gf2_nullspace(a: np.ndarray) -> np.ndarray:
    """Basis (as rows) of ``{x : a x^T = 0}``."""
    a = np.asarray(a, dtype=np.uint8)
    n = a.shape[1]
    r, pivots = gf2_rref(a) if a.shape[0] else (a, [])
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = r[row, f]
    return basis


def gf2_inv(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint8)
    k = a.shape[0]
    if a.shape != (k, k):
        raise ValueError("only square matrices are invertible")
    r, pivots = gf2_rref(np.hstack([a, np.eye(k, dtype=np.uint8)]))
    if pivots[:k] != list(range(k)):
        raise ValueError("matrix is singular over GF(2)")
    return r[:, k:]


# -- codes -----------------------------------------------------------------


class LinearCode:
    """Binary [n, k] code with generator (k x n) and parity-check ((n-k) x n) matrices.

    Either matrix may be given; the other is derived as its null space.
    """

    def __init__(self, generator=None, parity=None, name: str | None = None):
        if generator is None and parity is None:
            raise ValueError("need a generator or a parity-check matrix")
        if generator is not None:
            g = np.atleast_2d(as_bits(generator))
            n = g.shape[1]
        if parity is not None:
            h = np.atleast_2d(as_bits(parity))
            n = h.shape[1]
        if generator is None:
            g = gf2_nullspace(h)
        if parity is None:
            h = gf2_nullspace(g)
        if g.shape[1] != h.shape[1]:
            raise ValueError("generator and parity-check matrices differ in length")
        if gf2_rank(g) != g.shape[0]:
            raise ValueError("generator matrix must have full row rank")
        if gf2_rank(h) != h.shape[0] or g.shape[0] + h.shape[0] != n:
            raise ValueError("parity-check matrix must have full row rank n - k")
        if np.any(gf2_matmul(h, g.T)):
            raise ValueError("parity-check matrix does not annihilate the generator")
        g.setflags(write=False)
        h.setflags(write=False)
        self._generator = g
        self._parity = h
        self.n = n
        self.k = g.shape[0]
        self.name = name or f"custom[{n},{self.k}]"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, n={self.n}, k={self.k})"

    @property
    def generator(self) -> np.ndarray:
        return self._generator

    @property
    def parity(self) -> np.ndarray:
        return self._parity

    def _syndrome(self, words: np.ndarray) -> np.ndarray:
        return gf2_matmul(words, self.parity.T)

    def codewords(self) -> np.ndarray:
        """All 2^k codewords, in message order (message read as binary, bit 0 first)."""
        if self.k > MAX_ENUM_K:
            raise ValueError(f"refusing to enumerate 2^{self.k} codewords")
        return gf2_matmul(_all_words(self.k), self.generator)

    @cached_property
    def min_distance(self) -> int:
        if self.k == 0:
            return self.n + 1
        words = self.codewords()
        return int(words[1:].sum(axis=1).min())

    @property
    def correction_radius(self) -> int:
        return (self.min_distance - 1) // 2

    @cached_property
    def _leader_table(self):
        return _coset_leader_table(self)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "k": self.k,
            "generator": self.generator.tolist(),
            "parity": self.parity.tolist(),
        }


class ToeplitzCode(LinearCode):
    """Systematic code with parity check ``[I | T]``, ``T`` a random Toeplitz matrix.

    Defined by n - 1 seeded bits, so the syndrome can be computed by (FFT)
    convolution at lengths where dense matrices would not fit in memory.
    """

    def __init__(self, n: int, k: int, seed: int, name: str | None = None):
        if n < 1 or not 0 <= k <= n:
            raise ValueError(f"need n >= 1 and 0 <= k <= n, got n={n}, k={k}")
        self.n = n
        self.k = k
        self.seed = seed
        self.name = name or f"random:{n}:{k}:{seed}"
        self._diag = np.random.default_rng([seed, n, k]).integers(0, 2, max(n - 1, 0), dtype=np.uint8)

    @property
    def _r(self) -> int:
        return self.n - self.k

    @cached_property
    def _toeplitz(self) -> np.ndarray:
        r, k = self._r, self.k
        if r == 0 or k == 0:
            return np.zeros((r, k), dtype=np.uint8)
        return toeplitz(self._diag[k - 1 :], self._diag[k - 1 :: -1]).astype(np.uint8)

    def _check_dense(self):
        if self.n > MAX_DENSE_N:
            raise ValueError(f"dense matrices unavailable for n = {self.n} > {MAX_DENSE_N}")

    @cached_property
    def generator(self) -> np.ndarray:
        self._check_dense()
        g = np.hstack([self._toeplitz.T, np.eye(self.k, dtype=np.uint8)])
        g.setflags(write=False)
        return g

    @cached_property
    def parity(self) -> np.ndarray:
        self._check_dense()
        h = np.hstack([np.eye(self._r, dtype=np.uint8), self._toeplitz])
        h.setflags(write=False)
        return h

    def _syndrome(self, words: np.ndarray) -> np.ndarray:
        r, k = self._r, self.k
        head, tail = words[..., :r], words[..., r:]
        if r == 0 or k == 0:
            return head.copy()
        if self.n <= _FFT_MIN:
            return head ^ gf2_matmul(tail, self._toeplitz.T)
        t = self._diag.astype(float)
        if words.ndim == 2:
            t = t[np.newaxis]
        conv = fftconvolve(tail.astype(float), t, axes=-1)
        prod = np.rint(conv[..., k - 1 : k - 1 + r]).astype(np.int64) & 1
        return head ^ prod.astype(np.uint8)


def _all_words(k: int) -> np.ndarray:
    idx = np.arange(2**k, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def _pack(bits: np.ndarray) -> np.ndarray:
    """Integer value of each row, first bit most significant."""
    width = bits.shape[-1]
    if width == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def _coset_leader_table(code: LinearCode):
    """Minimum-weight coset leader per syndrome, ties to the smallest bit string.

    Returns ``(leaders, weights, ambiguous)`` indexed by packed syndrome.
    """
    n, r = code.n, code.n - code.k
    if n > MAX_TABLE_N:
        raise ValueError(f"coset-leader tables are limited to n <= {MAX_TABLE_N}, got {n}")
    size = 1 << r
    leaders = np.zeros((size, n), dtype=np.uint8)
    weights = np.full(size, -1, dtype=np.int64)
    ambiguous = np.zeros(size, dtype=bool)
    remaining = size
    for w in range(n + 1):
        combos = np.array(list(itertools.combinations(range(n), w)), dtype=np.int64)
        combos = combos.reshape(len(combos), w) if w else np.zeros((1, 0), dtype=np.int64)
        patterns = np.zeros((len(combos), n), dtype=np.uint8)
        np.put_along_axis(patterns, combos, 1, axis=1)
        synd = _pack(code._syndrome(patterns))
        order = np.lexsort((_pack(patterns), synd))
        uniq, first, counts = np.unique(synd[order], return_index=True, return_counts=True)
        fresh = weights[uniq] < 0
        targets = uniq[fresh]
        leaders[targets] = patterns[order[first[fresh]]]
        weights[targets] = w
        ambiguous[targets] = counts[fresh] > 1
        remaining -= int(fresh.sum())
        if remaining == 0:
            break
    for arr in (leaders, weights, ambiguous):
        arr.setflags(write=False)
    return leaders, weights, ambiguous


def encode(code: LinearCode, message) -> np.ndarray:
    """Codeword(s) ``message . G``."""
    m = as_bits(message, code.k)
    return gf2_matmul(m, code.generator)


def syndrome(code: LinearCode, word) -> np.ndarray:
    """Syndrome(s) ``H . word^T`` of length n - k."""
    return code._syndrome(as_bits(word, code.n))


def syndrome_decode(code: LinearCode, word, strict: bool = False) -> np.ndarray:
    """Nearest codeword via a precomputed coset-leader table.

    With ``strict``, a syndrome whose minimum-weight leader is not unique and
    lies beyond the guaranteed correction radius raises ``DecodeFailure``.
    """
    w = as_bits(word, code.n)
    leaders, weights, ambiguous = code._leader_table
    s = _pack(code._syndrome(w))
    if strict:
        bad = ambiguous[s] & (weights[s] > code.correction_radius)
        if np.any(bad):
            raise DecodeFailure("syndrome is ambiguous beyond the correction radius")
    return w ^ leaders[s]


def is_subcode(c2: LinearCode, c1: LinearCode) -> bool:
    """True iff every generator row of ``c2`` is a codeword of ``c1``."""
    if c1.n != c2.n:
        raise ValueError(f"codes differ in length ({c2.n} vs {c1.n})")
    if c2.k == 0:
        return True
    return not np.any(c1._syndrome(c2.generator))


class CssCode:
    """Nested pair C2 inside C1; keys are coset labels in C1 / C2."""

    def __init__(self, c1: LinearCode, c2: LinearCode, name: str | None = None):
        if c1.n != c2.n:
            raise ValueError("CSS codes need equal block lengths")
        if not is_subcode(c2, c1):
            raise ValueError(f"{c2.name} is not a subcode of {c1.name}")
        if not c1.k > c2.k:
            raise ValueError("CSS pair needs k1 > k2")
        self.c1 = c1
        self.c2 = c2
        self.n = c1.n
        self.name = name or f"{c1.name}/{c2.name}"
        self._label_matrix = self._build_label_matrix()

    def __repr__(self) -> str:
        return f"CssCode({self.name!r}, n={self.n}, k1={self.c1.k}, k2={self.c2.k})"

    @property
    def label_length(self) -> int:
        return self.c1.k - self.c2.k

    def _build_label_matrix(self) -> np.ndarray:
        g1 = self.c1.generator
        _, piv1 = gf2_rref(g1)
        to_message = gf2_inv(g1[:, piv1])
        m2 = gf2_matmul(self.c2.generator[:, piv1], to_message)
        r2, piv2 = gf2_rref(m2)
        free = [c for c in range(self.c1.k) if c not in set(piv2)]
        # reduce each message unit vector modulo the C2 message subspace
        reduce = np.eye(self.c1.k, dtype=np.uint8)
        for row, p in enumerate(piv2):
            hit = reduce[:, p] == 1
            reduce[hit] ^= r2[row]
        proj = reduce[:, free]
        w = np.zeros((self.n, len(free)), dtype=np.uint8)
        w[piv1] = gf2_matmul(to_message, proj)
        w.setflags(write=False)
        return w

    def coset_label(self, codeword) -> np.ndarray:
        c = as_bits(codeword, self.n)
        if np.any(self.c1._syndrome(c)):
            raise ValueError("word is not a codeword of C1")
        return gf2_matmul(c, self._label_matrix)


def coset_label(css: CssCode, codeword) -> np.ndarray:
    return css.coset_label(codeword)


def refresh_base(b, c2_prime: LinearCode) -> np.ndarray:
    """Representative of the coset ``b + C2'``: its syndrome, of length n - k'."""
    return syndrome(c2_prime, b)


# -- named codes -----------------------------------------------------------


def _hamming7_parity() -> np.ndarray:
    cols = np.arange(1, 8)
    return ((cols[None, :] >> np.array([2, 1, 0])[:, None]) & 1).astype(np.uint8)


def named_code(name: str) -> LinearCode:
    """``hamming7``, ``dual-hamming7``, ``repetition:<n>`` or ``random:<n>:<k>:<seed>``."""
    head, *args = name.strip().split(":")
    try:
        if head == "hamming7" and not args:
            return LinearCode(parity=_hamming7_parity(), name="hamming7")
        if head == "dual-hamming7" and not args:
            return LinearCode(generator=_hamming7_parity(), name="dual-hamming7")
        if head == "repetition" and len(args) == 1:
            n = int(args[0])
            if n < 1:
                raise ValueError
            return LinearCode(generator=np.ones((1, n), dtype=np.uint8), name=f"repetition:{n}")
        if head == "random" and len(args) == 3:
            n, k, seed = (int(a) for a in args)
            return ToeplitzCode(n, k, seed)
    except ValueError as exc:
        raise ValueError(f"bad code specification {name!r}: {exc}") from None
    raise ValueError(f"unknown code {name!r}")


def named_css(name: str) -> CssCode:
    """``steane`` or ``<c1>/<c2>`` with both halves accepted by ``named_code``."""
    if name == "steane":
        return CssCode(named_code("hamming7"), named_code("dual-hamming7"), name="steane")
    c1, sep, c2 = name.partition("/")
    if not sep:
        raise ValueError(f"CSS specification must be 'steane' or 'C1/C2', got {name!r}")
    return CssCode(named_code(c1), named_code(c2), name=name)
