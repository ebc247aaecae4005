import numpy as np
import pytest

from stochpec.inference import infer_memory_states, merge_states
from stochpec.process import perturbed_coin_conditional
from stochpec.synthesis import build_unitary, csd_decompose


@pytest.fixture(scope="session")
def coin_states():
    states, _ = merge_states(infer_memory_states(perturbed_coin_conditional(0.2, 1)), delta=1e-9)
    return states


@pytest.fixture(scope="session")
def coin_model(coin_states):
    return build_unitary(coin_states, seed=0)


@pytest.fixture(scope="session")
def coin_circuit(coin_model):
    return csd_decompose(coin_model.matrix)


def coin_chain_word_probs(p: float, t: int, start: int = 0) -> np.ndarray:
    """Classical-chain oracle: probability of each t-symbol word after state ``start``."""
    probs = np.zeros(2 ** t)
    for w in range(2 ** t):
        bits = [(w >> (t - 1 - k)) & 1 for k in range(t)]
        prob, state = 1.0, start
        for b in bits:
            prob *= p if b == state else 1 - p
            state = b
        probs[w] = prob
    return probs


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
