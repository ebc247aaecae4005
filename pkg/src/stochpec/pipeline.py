"""File-based pipeline: sequence, inference, synthesis, tomography, PEC, report."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .config import STAGES, PipelineConfig
from .errors import ValidationError
from .inference import (MemoryStateSet, classical_statistical_complexity,
                        epsilon_machine_from_states, infer_memory_states,
                        memory_advantage_region, merge_states, perturbed_coin_cq,
                        perturbed_coin_machine, quantum_statistical_memory)
from .mitigation import (GstDataset, distribution_fidelity, exact_distribution,
                         plan_from_tomography, predict_fidelity_perturbation, run_pec,
                         run_tomography)
from .process import (PerturbedCoinParams, SymbolSequence, conditional_distribution,
                      effective_markov_order, generate_perturbed_coin)
from .ptm import NoiseModel
from .synthesis import (GateCircuit, build_unitary, circuit_depth_formula, csd_decompose,
                        matrix_from_json, matrix_to_json)

CQ_GRID = np.round(np.linspace(0.005, 0.995, 199), 6)


def _write_json(path: Path, stage: str, cfg: PipelineConfig, payload: dict) -> None:
    payload = {"provenance": {"stage": stage, "config_hash": cfg.stage_hash(stage)}, **payload}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _read_json(cfg: PipelineConfig, name: str, stage: str) -> dict:
    path = cfg.output_dir / name
    if not path.is_file():
        raise ValidationError(f"{name} missing; run the '{stage}' stage first")
    data = json.loads(path.read_text())
    if data.get("provenance", {}).get("config_hash") != cfg.stage_hash(stage):
        raise ValidationError(
            f"{name} was produced by the '{stage}' stage under a different configuration")
    return data


def _noise(cfg: PipelineConfig) -> NoiseModel:
    return NoiseModel.from_mapping({k: cfg.getfloat("noise", k) for k in cfg.sections["noise"]})


def _states_to_dict(s: MemoryStateSet) -> dict:
    return {"states": s.states.tolist(), "weights": s.weights.tolist(),
            "labels": ["".join(map(str, lab)) for lab in s.labels],
            "successor": [[i, x, j] for (i, x), j in sorted(s.successor.items())],
            "probs": s.probs.tolist(), "alphabet_size": s.alphabet_size, "L": s.L}


def _states_from_dict(d: dict) -> MemoryStateSet:
    return MemoryStateSet(np.array(d["states"]), np.array(d["weights"]),
                          [tuple(int(c) for c in lab) for lab in d["labels"]],
                          {(i, x): j for i, x, j in d["successor"]}, np.array(d["probs"]),
                          d["alphabet_size"], d["L"])


def stage_generate(cfg: PipelineConfig) -> None:
    params = PerturbedCoinParams(cfg.getfloat("process", "p"), cfg.getint("process", "seed"),
                                 cfg.getint("process", "initial_state"))
    seq = generate_perturbed_coin(params, cfg.getint("process", "n"))
    seq.save(cfg.output_dir / "sequence.txt")
    _write_json(cfg.output_dir / "sequence.json", "generate", cfg,
                {"length": len(seq), "p": params.p, "seed": params.seed})


def stage_infer(cfg: PipelineConfig) -> None:
    _read_json(cfg, "sequence.json", "generate")
    seq = SymbolSequence.load(cfg.output_dir / "sequence.txt")
    L = cfg.getint("infer", "L")
    cond = conditional_distribution(seq, L)
    raw = infer_memory_states(cond, L)
    merged, report = merge_states(raw, n_process=len(seq),
                                 delta=cfg.optional_float("infer", "delta_override"))
    machine = epsilon_machine_from_states(merged)
    order = effective_markov_order(seq, xi=cfg.optional_float("infer", "xi"),
                                   L_max=cfg.getint("infer", "markov_l_max"))
    _write_json(cfg.output_dir / "inference.json", "infer", cfg, {
        "L": L, "markov_order": order.order, "markov_converged": order.converged,
        "c_mu": classical_statistical_complexity(machine),
        "c_q": quantum_statistical_memory(merged),
        "states": _states_to_dict(merged), "merge": report.to_dict()})


def stage_synthesize(cfg: PipelineConfig) -> None:
    inf = _read_json(cfg, "inference.json", "infer")
    model = build_unitary(_states_from_dict(inf["states"]), seed=cfg.getint("synthesis", "seed"))
    circuit = csd_decompose(model.matrix)
    _write_json(cfg.output_dir / "unitary.json", "synthesize", cfg, {
        "matrix": matrix_to_json(model.matrix), "memory_dim": model.memory_dim,
        "ancilla_dim": model.ancilla_dim, "memory_states": model.memory_states.tolist(),
        "gamma": model.basis.gamma.tolist(), "column_defect": model.column_defect})
    _write_json(cfg.output_dir / "circuit.json", "synthesize", cfg, {
        "num_qubits": circuit.num_qubits, "gates": circuit.to_records(),
        "gate_count": circuit.depth_reported,
        "depth_formula": circuit_depth_formula(circuit.num_qubits, 1)})


def _load_circuit(cfg: PipelineConfig) -> GateCircuit:
    data = _read_json(cfg, "circuit.json", "synthesize")
    circuit = GateCircuit.from_records(data["num_qubits"], data["gates"])
    if circuit.num_qubits != 2:
        raise ValidationError("error mitigation supports one memory qubit plus one ancilla; "
                              f"this model needs {circuit.num_qubits} qubits")
    return circuit


def _load_plan(cfg: PipelineConfig, circuit, t: int):
    data = _read_json(cfg, "gst.json", "simulate")
    gst2 = GstDataset.from_dict(data["two_qubit"])
    gst1 = GstDataset.from_dict(data["one_qubit"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return plan_from_tomography(circuit, _noise(cfg), gst2, gst1, t)


def stage_simulate(cfg: PipelineConfig) -> None:
    circuit = _load_circuit(cfg)
    gst2, gst1 = run_tomography(circuit, _noise(cfg), cfg.gst_shots, cfg.getint("gst", "seed"))
    _write_json(cfg.output_dir / "gst.json", "simulate", cfg,
                {"two_qubit": gst2.to_dict(), "one_qubit": gst1.to_dict()})
    dists = {}
    for t in cfg.steps:
        plan = _load_plan(cfg, circuit, t)
        dists[str(t)] = {"ideal": exact_distribution(plan, "ideal").tolist(),
                         "noisy": exact_distribution(plan, "noisy").tolist()}
    _write_json(cfg.output_dir / "noisy.json", "simulate", cfg, {"distributions": dists})


def _write_csv(path: Path, header: dict, columns: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def stage_mitigate(cfg: PipelineConfig) -> None:
    circuit = _load_circuit(cfg)
    runs, seed = cfg.getint("mc", "runs"), cfg.getint("mc", "seed")
    chunk = cfg.optional_int("mc", "chunk_size")
    keep_records = cfg.get("mc", "records").lower() in ("1", "true", "yes")
    decomps, results = {}, {}
    for t in cfg.steps:
        plan = _load_plan(cfg, circuit, t)
        decomps[str(t)] = plan.decompositions_dict()
        rows = []
        sink = None
        if keep_records:
            def sink(offset, words, signs, rows=rows, t=t):
                rows.extend((offset + i, format(int(w), f"0{t}b"), int(s))
                            for i, (w, s) in enumerate(zip(words, signs)))
        dist = run_pec(plan, runs, seed, chunk_size=chunk, record_sink=sink)
        out = dist.to_dict()
        out.pop("backend")
        results[str(t)] = out
        if keep_records:
            _write_csv(cfg.output_dir / f"records_t{t}.csv",
                       {"stage": "mitigate", "config_hash": cfg.stage_hash("mitigate"),
                        "t": t, "seed": seed}, ["run", "bits", "sign"], rows)
    _write_json(cfg.output_dir / "decomps.json", "mitigate", cfg, {"steps": decomps})
    _write_json(cfg.output_dir / "mitigated.json", "mitigate", cfg, {"steps": results})


def _final_one_marginal(values: np.ndarray) -> np.ndarray:
    """Probability that the last outcome is 1, from word-indexed values (last axis)."""
    return values[..., 1::2].sum(axis=-1)


def stage_report(cfg: PipelineConfig) -> dict:
    inf = _read_json(cfg, "inference.json", "infer")
    noisy = _read_json(cfg, "noisy.json", "simulate")["distributions"]
    mitig = _read_json(cfg, "mitigated.json", "mitigate")["steps"]
    p = cfg.getfloat("process", "p")
    runs = cfg.getint("mc", "runs")
    c_mu_exact = classical_statistical_complexity(perturbed_coin_machine(p))
    region = memory_advantage_region(runs, cfg.getfloat("infer", "n_classical"),
                                     max(inf["c_mu"], 1e-12))
    steps = {}
    for t in cfg.steps:
        key = str(t)
        ideal = np.array(noisy[key]["ideal"])
        dnoisy = np.array(noisy[key]["noisy"])
        m = mitig[key]
        p_qem = np.array(m["p_qem"])
        clipped = np.clip(p_qem, 0, None)
        clipped = clipped / clipped.sum() if clipped.sum() > 0 else np.full_like(p_qem, 1 / p_qem.size)
        entry = {"words": m["words"], "ideal": ideal.tolist(), "noisy": dnoisy.tolist(),
                 "mitigated": p_qem.tolist(), "mitigated_clipped": clipped.tolist(),
                 "cost": m["cost"], "stage_cost": m["stage_cost"],
                 "sigma_predicted": m["sigma_predicted"],
                 "fidelity_mitigated": distribution_fidelity(ideal, clipped),
                 "fidelity_noisy": distribution_fidelity(ideal, dnoisy)}
        if ideal.min() > 0:
            entry["fidelity_perturbation_predicted"] = predict_fidelity_perturbation(
                m["cost"], 1, runs, ideal)
        if m.get("chunk_estimates") is not None:
            marg = _final_one_marginal(np.array(m["chunk_estimates"]))
            entry["chunk_marginal_std"] = float(marg.std(ddof=1)) if marg.size > 1 else None
            entry["chunk_sigma_predicted"] = m["cost"] / math.sqrt(m["chunk_size"])
        steps[key] = entry
    bundle = {"c_q_exact": perturbed_coin_cq(p), "c_mu_exact": c_mu_exact,
              "c_q_inferred": inf["c_q"], "c_mu_inferred": inf["c_mu"],
              "markov_order": inf["markov_order"],
              "advantage_region": {"threshold": region.threshold, "p_low": region.p_low,
                                   "p_high": region.p_high, "full_range": region.full_range},
              "steps": steps,
              "seeds": {"process": cfg.getint("process", "seed"),
                        "synthesis": cfg.getint("synthesis", "seed"),
                        "gst": cfg.getint("gst", "seed"), "mc": cfg.getint("mc", "seed")}}
    _write_json(cfg.output_dir / "report.json", "report", cfg, bundle)
    return bundle


STAGE_FUNCS = {"generate": stage_generate, "infer": stage_infer,
               "synthesize": stage_synthesize, "simulate": stage_simulate,
               "mitigate": stage_mitigate, "report": stage_report}


def run_pipeline(cfg: PipelineConfig, stages=None) -> dict | None:
    """Run the requested stages in pipeline order; earlier outputs are read from disk."""
    stages = list(STAGES) if stages is None else list(stages)
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValidationError(f"unknown stage(s) {unknown}; choose from {list(STAGES)}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    bundle = None
    for stage in STAGES:
        if stage in stages:
            bundle = STAGE_FUNCS[stage](cfg)
    return bundle


FIGURES = ("joint_dist", "chunk_hist", "cq_vs_p")


def emit_figure_data(bundle_dir, which: str) -> Path:
    """Write one figure's CSV into ``bundle_dir`` and return its path."""
    bundle_dir = Path(bundle_dir)
    if which not in FIGURES:
        raise ValidationError(f"unknown figure {which!r}; choose from {list(FIGURES)}")
    report_path = bundle_dir / "report.json"
    if not report_path.is_file():
        raise ValidationError("report.json missing; run the 'report' stage first")
    report = json.loads(report_path.read_text())
    header = {"figure": which, "config_hash": report["provenance"]["config_hash"]}
    out = bundle_dir / f"{which}.csv"
    if which == "joint_dist":
        rows = [(t, w, i, n, m) for t, e in sorted(report["steps"].items(), key=lambda kv: int(kv[0]))
                for w, i, n, m in zip(e["words"], e["ideal"], e["noisy"], e["mitigated"])]
        _write_csv(out, header, ["t", "word", "ideal", "noisy", "mitigated"], rows)
    elif which == "chunk_hist":
        mpath = bundle_dir / "mitigated.json"
        steps = json.loads(mpath.read_text())["steps"] if mpath.is_file() else {}
        if not steps or any(s.get("chunk_estimates") is None for s in steps.values()):
            raise ValidationError("chunk estimates missing; rerun the 'mitigate' stage "
                                  "with mc.chunk_size set")
        header["quantity"] = "probability that the final outcome is 1"
        rows = []
        for t, s in sorted(steps.items(), key=lambda kv: int(kv[0])):
            marg = _final_one_marginal(np.array(s["chunk_estimates"]))
            rows += [(t, i, float(v)) for i, v in enumerate(marg)]
        _write_csv(out, header, ["t", "chunk", "estimate"], rows)
    else:
        region = report["advantage_region"]
        header["advantage_region"] = region
        rows = []
        for p in CQ_GRID:
            c_mu = classical_statistical_complexity(perturbed_coin_machine(float(p)))
            c_q = perturbed_coin_cq(float(p))
            inside = (region["full_range"] or region["p_low"] <= p <= region["p_high"]) and p != 0.5
            rows.append((float(p), c_mu, c_q, int(inside)))
        _write_csv(out, header, ["p", "c_mu", "c_q", "in_advantage_region"], rows)
    return out
