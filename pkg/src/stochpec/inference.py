"""Classical causal states, phase-less quantum memory states and memory costs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import EmptyInputError, ValidationError
from .process import ConditionalDistribution, Word

EIG_FLOOR = 1e-12


@dataclass
class EpsilonMachine:
    """Unifilar edge-emitting HMM.

    ``transitions[(state, symbol)] = (next_state, probability)``; only
    positive-probability edges are stored.
    """

    n_states: int
    alphabet_size: int
    transitions: dict[tuple[int, int], tuple[int, float]]
    stationary: np.ndarray | None = None

    def __post_init__(self):
        for s in range(self.n_states):
            total = sum(prob for (src, _), (_, prob) in self.transitions.items() if src == s)
            if abs(total - 1.0) > 1e-12:
                raise ValidationError(f"outgoing probabilities of state {s} sum to {total}")
        if self.stationary is None:
            self.stationary = stationary_distribution(self.state_transition_matrix())

    def state_transition_matrix(self) -> np.ndarray:
        T = np.zeros((self.n_states, self.n_states))
        for (s, _), (nxt, prob) in self.transitions.items():
            T[s, nxt] += prob
        return T


def stationary_distribution(T: np.ndarray) -> np.ndarray:
    """Fixed point ``pi T = pi`` (minimum-norm choice for reducible chains)."""
    n = T.shape[0]
    A = np.vstack([T.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def perturbed_coin_machine(p: float) -> EpsilonMachine:
    """Exact causal-state machine of the perturbed coin (one state at p = 0.5)."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    if p == 0.5:
        return EpsilonMachine(1, 2, {(0, 0): (0, 0.5), (0, 1): (0, 0.5)})
    trans = {}
    for s in (0, 1):
        if p > 0:
            trans[(s, s)] = (s, p)
        if p < 1:
            trans[(s, 1 - s)] = (1 - s, 1.0 - p)
    # symmetric fixed point; at p=1 the chain is reducible
    return EpsilonMachine(2, 2, trans, np.array([0.5, 0.5]))


@dataclass
class MemoryStateSet:
    """Phase-less memory states over length-``L`` future words.

    Row ``i`` of ``states`` is the amplitude vector of state ``i``; ``probs[i, x]``
    is ``P(x | state i)`` and ``successor[(i, x)]`` the state reached on ``x``.
    """

    states: np.ndarray
    weights: np.ndarray
    labels: list
    successor: dict[tuple[int, int], int]
    probs: np.ndarray
    alphabet_size: int = 2
    L: int = 1

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.probs = np.asarray(self.probs, dtype=float)
        if self.states.shape[0] == 0:
            raise EmptyInputError("memory state set is empty")
        norms = np.linalg.norm(self.states, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValidationError("memory states must have unit norm")
        if np.any(self.states < 0):
            raise ValidationError("phase-less memory states have non-negative amplitudes")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValidationError("memory state weights must sum to 1")

    def __len__(self) -> int:
        return self.states.shape[0]

    def gram(self) -> np.ndarray:
        return self.states @ self.states.T


@dataclass
class MergeReport:
    delta: float
    clusters: list[list]
    gram: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "clusters": [[_jsonable(m) for m in members] for members in self.clusters],
            "gram": self.gram.tolist(),
            "warnings": list(self.warnings),
        }


def _jsonable(label):
    if isinstance(label, tuple):
        return "".join(map(str, label))
    return label


def _future_amplitudes(cond: ConditionalDistribution, history: Word, L: int) -> np.ndarray:
    A = cond.alphabet_size
    amps = np.zeros(A ** L)
    for idx, future in enumerate(product(range(A), repeat=L)):
        prob, window = 1.0, tuple(history)
        for x in future:
            prob *= cond.prob(window, x)
            if prob == 0.0:
                break
            window = (window + (x,))[1:] if L else window
        amps[idx] = math.sqrt(prob)
    return amps


def _order_by_weight(labels, weights):
    return sorted(range(len(labels)), key=lambda i: (-weights[i], labels[i]))


def infer_memory_states(cond: ConditionalDistribution, L: int | None = None) -> MemoryStateSet:
    """One amplitude vector per observed history.

    The amplitude of future word ``x_{0:L}`` is ``sqrt(P(x_{0:L} | w))``, with the
    word probability chained through the one-step table by sliding the history
    window. Futures that run into an unobserved window get zero amplitude and
    the vector is renormalised. States are ordered by decreasing weight.
    """
    if L is None:
        L = cond.L
    if L != cond.L:
        raise ValidationError(f"table built with L={cond.L}, asked for L={L}")
    if not cond.table:
        raise EmptyInputError("conditional table is empty")
    hist = list(cond.table)
    w_raw = [cond.weights[h] for h in hist]
    order = _order_by_weight(hist, w_raw)
    labels = [hist[i] for i in order]
    index = {h: i for i, h in enumerate(labels)}
    A = cond.alphabet_size
    states, probs, successor = [], [], {}
    for i, h in enumerate(labels):
        amps = _future_amplitudes(cond, h, L)
        norm = np.linalg.norm(amps)
        states.append(amps / norm)
        probs.append(cond.table[h])
        for x in range(A):
            nxt = (h + (x,))[1:] if L else h
            if cond.table[h][x] > 0 and nxt in index:
                successor[(i, x)] = index[nxt]
    weights = np.array([cond.weights[h] for h in labels])
    return MemoryStateSet(np.array(states), weights / weights.sum(), labels, successor,
                          np.array(probs), A, L)


def merge_delta(n_process: int) -> float:
    return 1.0 / (2.0 * math.sqrt(n_process))


def merge_states(states: MemoryStateSet, n_process: int | None = None,
                 delta: float | None = None) -> tuple[MemoryStateSet, MergeReport]:
    """Greedy overlap clustering of memory states.

    Walking states in decreasing weight, each joins the first cluster whose
    representative (its heaviest member) overlaps it by at least ``1 - delta``,
    or founds a new cluster. ``delta`` defaults to ``1/(2 sqrt(n_process))``.
    Transition probabilities of a cluster are weight-averaged; successor
    conflicts are settled by majority weight and reported.
    """
    if len(states) == 0:
        raise EmptyInputError("nothing to merge")
    if delta is None:
        if n_process is None:
            raise ValidationError("need n_process or an explicit delta")
        delta = merge_delta(n_process)
    order = _order_by_weight(states.labels, states.weights)
    reps: list[int] = []
    members: list[list[int]] = []
    for i in order:
        for c, r in enumerate(reps):
            if abs(states.states[r] @ states.states[i]) >= 1.0 - delta:
                members[c].append(i)
                break
        else:
            reps.append(i)
            members.append([i])
    cluster_of = {i: c for c, ms in enumerate(members) for i in ms}
    A = states.alphabet_size
    m = len(reps)
    weights = np.array([states.weights[ms].sum() for ms in members])
    probs = np.zeros((m, A))
    successor: dict[tuple[int, int], int] = {}
    warnings = []
    for c, ms in enumerate(members):
        w = states.weights[ms]
        row = (w[:, None] * states.probs[ms]).sum(axis=0) / w.sum()
        for x in range(A):
            if row[x] <= 0:
                continue
            votes: dict[int, float] = {}
            for i in ms:
                if (i, x) in states.successor:
                    tgt = cluster_of[states.successor[(i, x)]]
                    votes[tgt] = votes.get(tgt, 0.0) + states.weights[i] * states.probs[i, x]
            if not votes:
                warnings.append(f"cluster {c} symbol {x}: no observed successor, "
                                f"dropping probability {row[x]:.3g}")
                row[x] = 0.0
                continue
            if len(votes) > 1:
                warnings.append(f"non-unifilar merge: cluster {c} symbol {x} maps to "
                                f"{sorted(votes)}; kept majority")
            successor[(c, x)] = max(votes, key=lambda k: (votes[k], -k))
        probs[c] = row / row.sum()
    merged = MemoryStateSet(states.states[reps], weights, [states.labels[r] for r in reps],
                            successor, probs, A, states.L)
    gram = np.clip(np.abs(merged.gram()), 0.0, 1.0)
    np.fill_diagonal(gram, 1.0)
    report = MergeReport(delta, [[states.labels[i] for i in ms] for ms in members],
                         gram, warnings)
    return merged, report


def epsilon_machine_from_states(states: MemoryStateSet) -> EpsilonMachine:
    """Causal states = (merged) memory states, edges from their transition table."""
    trans = {}
    for i in range(len(states)):
        for x in range(states.alphabet_size):
            if states.probs[i, x] > 0:
                trans[(i, x)] = (states.successor[(i, x)], float(states.probs[i, x]))
    return EpsilonMachine(len(states), states.alphabet_size, trans)


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def classical_statistical_complexity(machine: EpsilonMachine) -> float:
    return shannon_entropy(machine.stationary)


def von_neumann_from_gram(states: np.ndarray, weights: np.ndarray) -> float:
    """Entropy of ``sum_i w_i |s_i><s_i|`` via the weighted Gram matrix."""
    sw = np.sqrt(np.asarray(weights, dtype=float))
    K = sw[:, None] * (states @ states.conj().T) * sw[None, :]
    evals = np.linalg.eigvalsh((K + K.conj().T) / 2)
    evals = np.where(evals < EIG_FLOOR, 0.0, evals)
    return shannon_entropy(evals)


def quantum_statistical_memory(states: MemoryStateSet) -> float:
    return von_neumann_from_gram(states.states, states.weights)


def perturbed_coin_cq(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    r = math.sqrt(p * (1.0 - p))
    return shannon_entropy([0.5 + r, 0.5 - r])


@dataclass(frozen=True)
class AdvantageRegion:
    threshold: float
    p_low: float
    p_high: float
    full_range: bool = False

    def contains(self, p: float) -> bool:
        if self.full_range:
            return True
        return self.p_low <= p <= self.p_high and p != 0.5


def _bisect(f, lo, hi, tol=1e-6):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def memory_advantage_region(n_mc: float, n_classical: float, c_mu: float) -> AdvantageRegion:
    """Range of ``p`` where ``n_mc * C_q(p) <= n_classical * c_mu`` for the coin.

    ``p = 0.5`` itself is excluded (the classical machine collapses there).
    """
    if min(n_mc, n_classical, c_mu) <= 0:
        raise ValidationError("all inputs must be positive")
    threshold = n_classical * c_mu / n_mc
    if threshold >= 1.0:
        return AdvantageRegion(threshold, 0.0, 1.0, full_range=True)

    def f(p):
        return perturbed_coin_cq(p) - threshold

    return AdvantageRegion(threshold, _bisect(f, 0.0, 0.5), _bisect(f, 0.5, 1.0))
