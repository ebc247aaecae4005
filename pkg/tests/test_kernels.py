import os
import subprocess
import sys

import numpy as np

from stochpec import _kernels


def _backend_with(env_value):
    env = dict(os.environ, STOCHPEC_PURE=env_value)
    out = subprocess.run([sys.executable, "-c", "from stochpec import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_pure_override():
    assert _backend_with("1") == "python"


def test_default_prefers_compiled():
    expected = "cython" if "cython" in _kernels.BACKENDS else "python"
    assert _backend_with("") == expected


def test_python_backend_always_available():
    assert "python" in _kernels.BACKENDS


def test_single_identity_step_kernel():
    # one-op decompositions and noiseless maps: memory |0>, ancilla |0>, identity step
    prep = np.array([[1.0, 0, 0, 1], [1, 0, 0, -1], [1, 1, 0, 0], [1, 0, 1, 0]])
    effects = np.zeros((4, 2, 4))
    effects[3] = [[0.5, 0, 0, 0.5], [0.5, 0, 0, -0.5]]
    one = np.array([1.0])
    args = (np.array([1.0, 1, 1, 1]), prep, np.ones(4, np.int8), np.eye(16), one,
            np.eye(16)[None], np.ones(1, np.int8), np.array([0.0, 0, 0, 1]), effects,
            np.ones(4, np.int8), 1.0)
    u = np.random.default_rng(0).random((50, 11))
    for kernel in _kernels.BACKENDS.values():
        words, signs = kernel(u, 2, *args)
        assert words.tolist() == [0] * 50 and signs.tolist() == [1] * 50
