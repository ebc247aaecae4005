"""Throughput of the compiled and numpy Monte Carlo kernels on the coin circuit.

    python3 benchmarks/bench_mc.py [--runs N] [--steps 1,2,3]
"""

import argparse
import time
import warnings

import numpy as np

from stochpec import _kernels
from stochpec.inference import infer_memory_states, merge_states
from stochpec.mitigation import build_pec_plan, run_pec
from stochpec.process import perturbed_coin_conditional
from stochpec.ptm import NoiseModel
from stochpec.synthesis import build_unitary, csd_decompose


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=500_000)
    parser.add_argument("--steps", default="1,2,3")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    states, _ = merge_states(infer_memory_states(perturbed_coin_conditional(0.2, 1)), delta=1e-9)
    circuit = csd_decompose(build_unitary(states).matrix)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        plan = build_pec_plan(circuit, NoiseModel(q_dep=0.02, q_dep2=0.02, eps_meas=0.02))

    print(f"backends: {sorted(_kernels.BACKENDS)} (default {_kernels.BACKEND})")
    print(f"{'t':>2} {'backend':>8} {'runs/s':>12} {'speedup':>8}")
    for t in (int(s) for s in args.steps.split(",")):
        step_plan = plan.with_steps(t)
        rates, results = {}, {}
        for name in sorted(_kernels.BACKENDS, reverse=True):
            best = np.inf
            for _ in range(args.repeats):
                start = time.perf_counter()
                results[name] = run_pec(step_plan, args.runs, master_seed=1, backend=name)
                best = min(best, time.perf_counter() - start)
            rates[name] = args.runs / best
        same = len({r.counts_plus.tobytes() + r.counts_minus.tobytes()
                    for r in results.values()}) == 1
        for name, rate in rates.items():
            print(f"{t:>2} {name:>8} {rate:>12,.0f} {rate / rates['python']:>7.1f}x")
        print(f"   identical counts across backends: {same}")


if __name__ == "__main__":
    main()
