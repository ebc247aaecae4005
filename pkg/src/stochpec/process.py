"""Stationary discrete stochastic processes and their empirical statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import EmptyInputError, InsufficientDataError, ValidationError

Word = tuple[int, ...]


@dataclass(frozen=True)
class SymbolSequence:
    symbols: np.ndarray
    alphabet_size: int = 2

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=np.int64)
        if symbols.ndim != 1 or symbols.size == 0:
            raise EmptyInputError("a symbol sequence needs at least one symbol")
        if self.alphabet_size < 1:
            raise ValidationError("alphabet_size must be positive")
        if symbols.min() < 0 or symbols.max() >= self.alphabet_size:
            raise ValidationError(
                f"symbols must lie in [0, {self.alphabet_size - 1}]"
            )
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def to_text(self) -> str:
        if self.alphabet_size > 10:
            raise ValidationError("digit-stream format supports at most 10 symbols")
        return "".join(map(str, self.symbols.tolist()))

    @classmethod
    def from_text(cls, text: str, alphabet_size: int = 2) -> "SymbolSequence":
        text = text.strip()
        if not text.isdigit():
            raise ValidationError("sequence file must be a newline-free digit stream")
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"),
                   alphabet_size)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, alphabet_size: int = 2) -> "SymbolSequence":
        return cls.from_text(Path(path).read_text(), alphabet_size)


@dataclass(frozen=True)
class PerturbedCoinParams:
    p: float
    seed: int = 0
    initial_state: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"stay probability p={self.p} outside [0, 1]")
        if self.initial_state not in (0, 1):
            raise ValidationError("initial_state must be 0 or 1")


@dataclass
class ConditionalDistribution:
    """Next-symbol statistics conditioned on length-``L`` histories.

    ``weights`` holds the history probabilities. For empirical tables they are
    ``counts / n_windows``; analytic tables carry no counts.
    """

    L: int
    alphabet_size: int
    table: dict[Word, np.ndarray]
    weights: dict[Word, float]
    counts: dict[Word, int] = field(default_factory=dict)
    n_windows: int = 0

    def __post_init__(self):
        for w, vec in self.table.items():
            if len(w) != self.L:
                raise ValidationError(f"history {w} does not have length {self.L}")
            if abs(vec.sum() - 1.0) > 1e-12 or vec.min() < 0.0:
                raise ValidationError(f"row for history {w} is not a distribution")

    def histories(self) -> list[Word]:
        return sorted(self.table)

    def prob(self, history: Word, symbol: int) -> float:
        row = self.table.get(tuple(history))
        return 0.0 if row is None else float(row[symbol])


def generate_perturbed_coin(params: PerturbedCoinParams, n: int) -> SymbolSequence:
    """Sample ``n`` symbols from the two-state perturbed coin.

    Each step the hidden state is kept with probability ``p`` and flipped
    otherwise; the emitted symbol is the state after the update.
    """
    if n < 1:
        raise EmptyInputError("sequence length must be at least 1")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    flips = (rng.random(n) >= params.p).astype(np.int64)
    states = (params.initial_state + np.cumsum(flips)) % 2
    return SymbolSequence(states, 2)


def _window_codes(symbols: np.ndarray, width: int, base: int) -> np.ndarray:
    n = symbols.size - width + 1
    codes = np.zeros(n, dtype=np.int64)
    for k in range(width):
        codes = codes * base + symbols[k:k + n]
    return codes


def _decode(code: int, width: int, base: int) -> Word:
    digits = []
    for _ in range(width):
        code, d = divmod(code, base)
        digits.append(d)
    return tuple(reversed(digits))


def conditional_distribution(seq: SymbolSequence, L: int) -> ConditionalDistribution:
    """Maximum-likelihood ``P(x0 | x_{-L:0})`` from all sliding windows."""
    if L < 0:
        raise ValidationError("history length must be non-negative")
    N, A = len(seq), seq.alphabet_size
    if L >= N:
        raise InsufficientDataError(f"history length {L} needs more than {N} symbols")
    if A ** (L + 1) > 2 ** 62:
        raise ValidationError("history length too large for dense counting")
    joint = np.bincount(_window_codes(seq.symbols, L + 1, A), minlength=A ** (L + 1))
    joint = joint.reshape(A ** L, A)
    hist_counts = joint.sum(axis=1)
    n_windows = N - L
    table, counts, weights = {}, {}, {}
    for code in np.flatnonzero(hist_counts):
        w = _decode(int(code), L, A)
        c = int(hist_counts[code])
        table[w] = joint[code] / c
        counts[w] = c
        weights[w] = c / n_windows
    return ConditionalDistribution(L, A, table, weights, counts, n_windows)


def perturbed_coin_conditional(p: float, L: int) -> ConditionalDistribution:
    """Exact conditional table of the stationary perturbed coin.

    The emitted symbol equals the hidden state, so only the last history
    symbol matters; zero-probability histories are left out.
    """
    PerturbedCoinParams(p)
    if L < 0:
        raise ValidationError("history length must be non-negative")
    table, weights = {}, {}
    for w in product((0, 1), repeat=L):
        prob = 0.5
        for a, b in zip(w, w[1:]):
            prob *= p if a == b else 1.0 - p
        if prob == 0.0:
            continue
        if L == 0:
            row = np.array([0.5, 0.5])
        else:
            row = np.empty(2)
            row[w[-1]] = p
            row[1 - w[-1]] = 1.0 - p
        table[w] = row
        weights[w] = prob
    return ConditionalDistribution(L, 2, table, weights)


@dataclass(frozen=True)
class MarkovOrderEstimate:
    order: int
    converged: bool
    distances: tuple[float, ...]
    xi: float


def context_distance(cond: ConditionalDistribution) -> float:
    """Largest weighted mean total-variation distance between prepended symbols.

    ``cond`` has history length ``r + 1``; each history is split as ``x . w``
    and for every pair ``(x, x')`` the distance between ``P(X0|x w)`` and
    ``P(X0|x' w)`` is averaged over contexts ``w`` where both are observed,
    weighted by the frequency of ``w``.
    """
    if cond.L < 1:
        raise ValidationError("need histories of length >= 1")
    by_context: dict[Word, dict[int, Word]] = {}
    for h in cond.table:
        by_context.setdefault(h[1:], {})[h[0]] = h
    A = cond.alphabet_size
    worst = 0.0
    for x in range(A):
        for x2 in range(x + 1, A):
            num = den = 0.0
            for w, members in by_context.items():
                if x not in members or x2 not in members:
                    continue
                weight = sum(cond.weights[h] for h in members.values())
                tv = 0.5 * np.abs(cond.table[members[x]] - cond.table[members[x2]]).sum()
                num += weight * tv
                den += weight
            if den > 0.0:
                worst = max(worst, num / den)
    return worst


def markov_order_from(cond_for: Callable[[int], ConditionalDistribution],
                      xi: float, L_max: int, r_limit: int | None = None
                      ) -> MarkovOrderEstimate:
    if xi <= 0:
        raise ValidationError("tolerance xi must be positive")
    if L_max < 1:
        raise ValidationError("L_max must be at least 1")
    last = L_max if r_limit is None else min(L_max, r_limit)
    if last < 0:
        raise InsufficientDataError("sequence too short to compare contexts")
    distances = []
    for r in range(last + 1):
        cond = cond_for(r + 1)
        if not cond.table:
            raise InsufficientDataError(f"no contexts observed at r={r}")
        d = context_distance(cond)
        distances.append(d)
        if d < xi:
            return MarkovOrderEstimate(r, True, tuple(distances), xi)
    return MarkovOrderEstimate(L_max, False, tuple(distances), xi)


def effective_markov_order(seq: SymbolSequence, xi: float | None = None,
                           L_max: int = 8) -> MarkovOrderEstimate:
    """Smallest history length beyond which older symbols barely matter.

    ``xi`` defaults to ``1/sqrt(len(seq))``. Context lengths needing more
    symbols than the sequence holds are not tried.
    """
    if xi is None:
        xi = 1.0 / math.sqrt(len(seq))
    return markov_order_from(lambda k: conditional_distribution(seq, k), xi, L_max,
                             r_limit=len(seq) - 2)


def stationary_tv_gap(seq: SymbolSequence, L: int, offset: int) -> float:
    """Total-variation distance between word frequencies before and after ``offset``."""
    A = seq.alphabet_size
    first = seq.symbols[:offset]
    second = seq.symbols[offset:]
    if min(first.size, second.size) < L:
        raise InsufficientDataError("offset leaves too few symbols")
    def freqs(s):
        c = np.bincount(_window_codes(s, L, A), minlength=A ** L)
        return c / c.sum()
    return 0.5 * float(np.abs(freqs(first) - freqs(second)).sum())
