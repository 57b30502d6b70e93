"""Batch experiment runner.

Reproduces the reference sweeps as data files: history-state diagnostics,
estimator benchmarks, free-fermion (lambda, log N, eps) sweeps, variational
diagonalization training, and gate-count tables.  No interactive surface:
every subcommand reads a strict JSON config and writes CSV/JSON into an
output directory.  Identical config + seed reproduces outputs byte for
byte; sweep rows are keyed by grid coordinates so partial runs resume
without duplication.

Exit codes: 0 success, 2 config error, 3 numeric-validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import depth as depth_mod
from . import freefermion as ff
from . import histstate, protocols, vhd
from .hamiltonians import (
    AubryAndreParams,
    XYParams,
    aubry_andre_xy_params,
    build_aubry_andre_spin,
    build_xy_spin,
    dephased_purity,
)
from .qcore import PauliString, PauliSum, ValidationError, pauli_sum_to_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
SCHEMA_VERSION = 1

KINDS = ("history", "estimate-f", "loschmidt", "entanglement",
         "ff-sweep", "vhd-train", "depth-report")


class ConfigError(Exception):
    """Invalid experiment configuration; message carries the field path."""


class NumericCheckError(Exception):
    """A run-time numeric validation failed."""


def fmt(x: float) -> str:
    """17 significant digits: round-trip exact for doubles."""
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# Strict config parsing
# ---------------------------------------------------------------------------

def _check_table(cfg, path, required: dict, optional: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a table")
    unknown = set(cfg) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    out = {}
    for key, typ in required.items():
        if key not in cfg:
            raise ConfigError(f"{path}.{key}: required key missing")
        out[key] = _coerce(cfg[key], typ, f"{path}.{key}")
    for key, (typ, default) in optional.items():
        out[key] = _coerce(cfg[key], typ, f"{path}.{key}") if key in cfg else default
    return out


def _coerce(value, typ, path):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return value
    if typ is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table")
        return value
    if typ is None:  # validated downstream
        return value
    raise AssertionError(typ)


def load_config(path: str, kind: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    declared = raw.get("kind")
    if declared is not None and declared != kind:
        raise ConfigError(f"kind: config declares {declared!r} but the subcommand is {kind!r}")
    body = dict(raw)
    body.pop("schema_version")
    body.pop("kind", None)
    return body


def _grid(value, path) -> list[float]:
    if isinstance(value, list):
        if not value:
            raise ConfigError(f"{path}: grid must be nonempty")
        return [float(v) for v in value]
    spec = _check_table(value, path, {"start": float, "stop": float, "step": float}, {})
    if spec["step"] <= 0 or spec["stop"] < spec["start"]:
        raise ConfigError(f"{path}: need step > 0 and stop >= start")
    count = int(round((spec["stop"] - spec["start"]) / spec["step"])) + 1
    return [spec["start"] + i * spec["step"] for i in range(count)]


def _model_from_config(cfg, path) -> PauliSum:
    kind = cfg.get("kind") if isinstance(cfg, dict) else None
    if kind == "aubry-andre":
        spec = _check_table(cfg, path, {"kind": str, "n": int, "J": float, "lam": float},
                            {"alpha_aa": (float, (math.sqrt(5.0) - 1.0) / 2.0),
                             "boundary": (str, "periodic")})
        return build_aubry_andre_spin(AubryAndreParams(
            n=spec["n"], J=spec["J"], lam=spec["lam"], alpha_aa=spec["alpha_aa"],
            boundary=spec["boundary"]))
    if kind == "xy":
        spec = _check_table(cfg, path, {"kind": str, "n": int, "ax": list, "ay": list,
                                        "az": list}, {})
        return build_xy_spin(XYParams(n=spec["n"], ax=tuple(spec["ax"]),
                                      ay=tuple(spec["ay"]), az=tuple(spec["az"])))
    if kind == "pauli":
        spec = _check_table(cfg, path, {"kind": str, "n": int, "terms": list}, {})
        terms = []
        for i, term in enumerate(spec["terms"]):
            t = _check_table(term, f"{path}.terms[{i}]",
                             {"coeff": float, "letters": str}, {})
            terms.append(PauliString(t["coeff"], t["letters"]))
        return PauliSum.from_terms(terms, spec["n"])
    raise ConfigError(f"{path}.kind: expected one of aubry-andre | xy | pauli")


def _pauli_observable(cfg, path, n) -> PauliSum:
    if not isinstance(cfg, list):
        raise ConfigError(f"{path}: expected a list of terms")
    terms = []
    for i, term in enumerate(cfg):
        t = _check_table(term, f"{path}[{i}]", {"coeff": float, "letters": str}, {})
        terms.append(PauliString(t["coeff"], t["letters"]))
    out = PauliSum.from_terms(terms, n)
    return out


def _state_from_config(cfg, path, n) -> np.ndarray:
    kind = cfg.get("kind") if isinstance(cfg, dict) else None
    if kind == "basis":
        spec = _check_table(cfg, path, {"kind": str, "index": int}, {})
        if not 0 <= spec["index"] < 2**n:
            raise ConfigError(f"{path}.index: outside the 2^n basis")
        out = np.zeros(2**n, dtype=complex)
        out[spec["index"]] = 1.0
        return out
    if kind == "amplitudes":
        spec = _check_table(cfg, path, {"kind": str, "re": list}, {"im": (list, None)})
        re = np.asarray(spec["re"], dtype=float)
        im = np.zeros_like(re) if spec["im"] is None else np.asarray(spec["im"], dtype=float)
        amps = re + 1j * im
        nrm = np.linalg.norm(amps)
        if nrm == 0 or amps.size != 2**n:
            raise ConfigError(f"{path}: need 2^n amplitudes with nonzero norm")
        return amps / nrm
    if kind == "excitation":
        spec = _check_table(cfg, path, {"kind": str, "sites": list}, {"weights": (list, None)})
        sp = ff.site_superposition(n, [int(s) for s in spec["sites"]],
                                   spec["weights"])
        return ff.embed_single_particle_dense(sp)
    raise ConfigError(f"{path}.kind: expected one of basis | amplitudes | excitation")


def _estimator_config(cfg, path, seed) -> protocols.EstimatorConfig:
    spec = _check_table(cfg, path, {}, {"mode": (str, "exact"), "shots": (int, 4096),
                                        "delta_target": (float, None)})
    return protocols.EstimatorConfig(mode=spec["mode"], shots=spec["shots"], seed=seed,
                                     delta_target=spec["delta_target"])


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else fmt(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n")


def _read_csv_keyed(path: Path, key_cols: int) -> dict[tuple, list[str]]:
    if not path.exists():
        return {}
    lines = path.read_text().strip().splitlines()
    out = {}
    for line in lines[1:]:
        cells = line.split(",")
        out[tuple(cells[:key_cols])] = cells
    return out


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_history(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(cfg, "config", {"model": dict, "psi0": dict, "m": int,
                                        "epsilon": float}, {"seed": (int, 0)})
    h = _model_from_config(spec["model"], "config.model")
    psi0 = _state_from_config(spec["psi0"], "config.psi0", h.n)
    psi = histstate.build_history_state(h, psi0, spec["m"], spec["epsilon"])
    via_circuit = histstate.build_history_state_circuit(h, psi0, spec["m"], spec["epsilon"])
    circuit_gap = float(np.max(np.abs(psi.state - via_circuit.state)))
    report = histstate.check_majorization(psi, h)
    e2, lbar, slack = histstate.entanglement_loschmidt_bound(psi, h, psi0)
    if not report.holds or slack < -1e-12:
        raise NumericCheckError("history-state invariants failed")
    _write_json(out_dir / "history.json", {
        "n": psi.n, "m": psi.m, "epsilon": psi.epsilon, "T": psi.T,
        "linear_entropy": e2,
        "loschmidt_bar": lbar,
        "bound_slack": slack,
        "majorization_holds": report.holds,
        "majorization_max_violation": report.max_violation,
        "circuit_formula_gap": circuit_gap,
        "spectrum_rho_s": [float(x) for x in report.spectrum_rho_s],
        "spectrum_rho_bar": [float(x) for x in report.spectrum_rho_bar],
    })


def run_protocol_bench(estimate, exact_value: float, shot_grid: list[int],
                       seeds: list[int]) -> dict:
    """Shot-scaling benchmark: stderr per shot level plus a log-log slope fit."""
    levels = []
    for shots in shot_grid:
        errs = []
        vals = []
        for s in seeds:
            res = estimate(shots, s)
            errs.append(res.stderr)
            vals.append(float(np.real(res.value)))
        levels.append({"shots": int(shots),
                       "stderr_mean": float(np.mean(errs)),
                       "value_mean": float(np.mean(vals))})
    xs = np.log([lv["shots"] for lv in levels])
    ys = np.log([lv["stderr_mean"] for lv in levels])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return {"levels": levels, "stderr_slope": slope, "exact": float(exact_value)}


def run_estimate_f(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(cfg, "config", {"model": dict, "psi0": dict, "o1": list,
                                        "o2": list, "omega": float, "m": int,
                                        "epsilon": float},
                        {"estimator": (dict, {}), "seed": (int, 0),
                         "shot_grid": (list, None), "bench_seeds": (int, 8)})
    h = _model_from_config(spec["model"], "config.model")
    psi0 = _state_from_config(spec["psi0"], "config.psi0", h.n)
    o1 = _pauli_observable(spec["o1"], "config.o1", h.n)
    o2 = _pauli_observable(spec["o2"], "config.o2", h.n)
    run_seed = seed if seed is not None else spec["seed"]
    est_cfg = _estimator_config(spec["estimator"], "config.estimator", run_seed)
    m, eps, omega = spec["m"], spec["epsilon"], spec["omega"]
    n_times = 2**m

    exact = protocols.EstimatorConfig(mode="exact")
    seq = protocols.estimate_F_sequential(h, psi0, o1, o2, omega, n_times, eps, exact)
    par = protocols.estimate_F_parallel(h, psi0, o1, o2, omega, m, eps, exact)
    if abs(seq.value - par.value) > 1e-10:
        raise NumericCheckError("sequential/parallel exact estimates disagree")
    params = {"n": h.n, "m": m, "epsilon": eps, "omega": omega}
    records = [protocols.result_record("f-sequential", params, seq, run_seed),
               protocols.result_record("f-parallel", params, par, run_seed)]
    if est_cfg.mode == "sampled":
        records.append(protocols.result_record(
            "f-parallel", params,
            protocols.estimate_F_parallel(h, psi0, o1, o2, omega, m, eps, est_cfg),
            run_seed))
    payload = {"records": records}
    if spec["shot_grid"]:
        payload["bench"] = run_protocol_bench(
            lambda shots, s: protocols.estimate_F_parallel(
                h, psi0, o1, o2, omega, m, eps,
                protocols.EstimatorConfig(mode="sampled", shots=shots, seed=s)),
            float(np.real(par.value)),
            [int(x) for x in spec["shot_grid"]],
            list(range(spec["bench_seeds"])))
    _write_json(out_dir / "estimate_f.json", payload)


def run_loschmidt(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(cfg, "config", {"model": dict, "psi0": dict, "m": int,
                                        "epsilon": float},
                        {"estimator": (dict, {}), "seed": (int, 0),
                         "shot_grid": (list, None), "bench_seeds": (int, 8)})
    h = _model_from_config(spec["model"], "config.model")
    psi0 = _state_from_config(spec["psi0"], "config.psi0", h.n)
    run_seed = seed if seed is not None else spec["seed"]
    est_cfg = _estimator_config(spec["estimator"], "config.estimator", run_seed)
    m, eps = spec["m"], spec["epsilon"]

    exact = protocols.EstimatorConfig(mode="exact")
    seq = protocols.estimate_loschmidt_sequential(h, psi0, 2**m, eps, exact)
    par = protocols.estimate_loschmidt_parallel(h, psi0, m, eps, exact)
    if abs(seq.value - par.value) > 1e-10:
        raise NumericCheckError("sequential/parallel Loschmidt estimates disagree")
    params = {"n": h.n, "m": m, "epsilon": eps}
    records = [protocols.result_record("loschmidt-sequential", params, seq, run_seed),
               protocols.result_record("loschmidt-parallel", params, par, run_seed)]
    if est_cfg.mode == "sampled":
        records.append(protocols.result_record(
            "loschmidt-parallel", params,
            protocols.estimate_loschmidt_parallel(h, psi0, m, eps, est_cfg), run_seed))
    payload = {"records": records,
               "loschmidt_bar": dephased_purity(h, psi0)}
    if spec["shot_grid"]:
        payload["bench"] = run_protocol_bench(
            lambda shots, s: protocols.estimate_loschmidt_sequential(
                h, psi0, 2**m, eps,
                protocols.EstimatorConfig(mode="sampled", shots=shots, seed=s)),
            float(np.real(seq.value)),
            [int(x) for x in spec["shot_grid"]],
            list(range(spec["bench_seeds"])))
    _write_json(out_dir / "loschmidt.json", payload)


def run_entanglement(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(cfg, "config", {"model": dict, "psi0": dict, "m": int,
                                        "epsilon": float},
                        {"estimator": (dict, {}), "snapshots": (int, 2000),
                         "seed": (int, 0)})
    h = _model_from_config(spec["model"], "config.model")
    psi0 = _state_from_config(spec["psi0"], "config.psi0", h.n)
    run_seed = seed if seed is not None else spec["seed"]
    est_cfg = _estimator_config(spec["estimator"], "config.estimator", run_seed)
    psi = histstate.build_history_state(h, psi0, spec["m"], spec["epsilon"])
    exact = protocols.EstimatorConfig(mode="exact")
    overlap = protocols.estimate_purity_overlap(psi, exact)
    shadows = protocols.estimate_purity_shadows(psi, spec["snapshots"], run_seed)
    if abs(shadows.value - overlap.value) > 5.0 * max(shadows.stderr, 1e-3):
        raise NumericCheckError("shadow purity estimate far from the exact value")
    params = {"n": psi.n, "m": psi.m, "epsilon": psi.epsilon}
    records = [protocols.result_record("purity-overlap", params, overlap, run_seed),
               protocols.result_record("purity-shadows", params, shadows, run_seed)]
    if est_cfg.mode == "sampled":
        records.append(protocols.result_record(
            "purity-overlap", params,
            protocols.estimate_purity_overlap(psi, est_cfg), run_seed))
    _write_json(out_dir / "entanglement.json", {
        "records": records,
        "linear_entropy": histstate.linear_entropy(psi),
    })


def _ff_point(matrix: ff.HoppingMatrix, psi: ff.SingleParticleState,
              obs: ff.OneBodyObservable, log_n: int, eps: float) -> dict:
    n_times = 2**log_n
    l_tilde = ff.loschmidt_tilde(matrix, psi, n_times, eps)
    l_bar = ff.loschmidt_bar(matrix, psi)
    pur = ff.purity_single_sum(matrix, psi, n_times, eps)
    fluct = ff.observable_fluctuations(matrix, psi, obs)
    return {"L_tilde": l_tilde, "L_bar": l_bar, "purity_S": pur,
            "E2": 1.0 - pur, "sigma2": fluct.sigma2,
            "bound": fluct.delta2 * pur}


FF_HEADER = ["lambda", "logN", "epsilon", "L_tilde", "L_bar", "purity_S", "E2",
             "sigma2", "bound"]


def run_ff_sweep(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(
        cfg, "config",
        {"n": int, "J": float, "lambdas": None},
        {"alpha_aa": (float, (math.sqrt(5.0) - 1.0) / 2.0),
         "boundary": (str, "periodic"),
         "epsilons": (list, [0.45]),
         "log_n": (list, list(range(1, 11))),
         "psi0_sites": (list, None),
         "observable_sites": (list, None),
         "seed": (int, 0)})
    n = spec["n"]
    lams = _grid(spec["lambdas"], "config.lambdas")
    epsilons = [float(e) for e in spec["epsilons"]]
    log_ns = [int(m) for m in spec["log_n"]]
    sites = spec["psi0_sites"] or [n // 2 - 1, n // 2, n // 2 + 1]
    obs_sites = spec["observable_sites"] or [n // 2, n // 2 + 1]
    psi = ff.site_superposition(n, [int(s) for s in sites])
    obs = ff.hopping_pair_observable(n, int(obs_sites[0]), int(obs_sites[1]))

    out_path = out_dir / "ff_sweep.csv"
    existing = _read_csv_keyed(out_path, key_cols=3)

    def key(lam, log_n, eps):
        return (fmt(lam), fmt(float(log_n)), fmt(eps))

    missing_lams = sorted({lam for lam in lams for log_n in log_ns for eps in epsilons
                           if key(lam, log_n, eps) not in existing})

    def work(lam: float) -> list[list[str]]:
        matrix = ff.build_hopping_matrix(AubryAndreParams(
            n=n, J=spec["J"], lam=lam, alpha_aa=spec["alpha_aa"],
            boundary=spec["boundary"]))
        rows = []
        for eps in epsilons:
            for log_n in log_ns:
                if key(lam, log_n, eps) in existing:
                    continue
                point = _ff_point(matrix, psi, obs, log_n, eps)
                if point["purity_S"] < point["L_bar"] - 1e-12:
                    raise NumericCheckError("purity fell below the dephased floor")
                rows.append([fmt(lam), fmt(float(log_n)), fmt(eps)]
                            + [fmt(point[c]) for c in FF_HEADER[3:]])
        return rows

    if threads > 1 and len(missing_lams) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fresh = [row for rows in pool.map(work, missing_lams) for row in rows]
    else:
        fresh = [row for lam in missing_lams for row in work(lam)]

    merged = dict(existing)
    for row in fresh:
        merged[tuple(row[:3])] = row
    ordered = sorted(merged.values(),
                     key=lambda r: (float(r[0]), float(r[2]), float(r[1])))
    _write_csv(out_path, FF_HEADER, ordered)


def _thin_history(history: np.ndarray) -> list[tuple[int, float]]:
    """All iterations up to 1000, then every 100th, plus the final point."""
    picks = [i for i in range(history.size) if i < 1000 or i % 100 == 0]
    if history.size - 1 not in picks:
        picks.append(history.size - 1)
    return [(i, float(history[i])) for i in picks]


def run_vhd(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(
        cfg, "config",
        {"n": int, "J": float, "lambdas": list},
        {"alpha_aa": (float, (math.sqrt(5.0) - 1.0) / 2.0),
         "L": (int, 18),
         "layer_sweep": (list, None),
         "restarts": (int, 10),
         "max_iters": (int, 100_000),
         "stop_loss": (float, 1e-14),
         "lr": (float, 0.1),
         "seed": (int, 0)})
    run_seed = seed if seed is not None else spec["seed"]
    n = spec["n"]
    lams = [float(x) for x in spec["lambdas"]]
    models = [build_xy_spin(aubry_andre_xy_params(n, spec["J"], lam, spec["alpha_aa"]))
              for lam in lams]
    cfg_train = vhd.TrainConfig(lr_alpha=spec["lr"], lr_beta=spec["lr"],
                                max_iters=spec["max_iters"], stop_loss=spec["stop_loss"],
                                restarts=spec["restarts"], seed=run_seed)
    reports = vhd.vhd_train_batch(models, n, spec["L"], cfg_train)

    trained = []
    audits = []
    for lam, h, report in zip(lams, models, reports):
        loss_rows = []
        for run_id, hist in enumerate(report.loss_history):
            for it, loss in _thin_history(hist):
                loss_rows.append([str(run_id), str(it), fmt(loss)])
        _write_csv(out_dir / f"vhd_loss_history_lam{fmt(lam)}.csv",
                   ["run_id", "iter", "loss"], loss_rows)
        best = report.best_params
        trained.append({"lambda": lam, "n": n, "L": spec["L"],
                        "alpha": [float(x) for x in best.alpha],
                        "beta": [float(x) for x in best.beta],
                        "final_loss": report.best_loss, "seed": run_seed,
                        "converged_runs": report.converged_runs})
        off_trained, _ = vhd.off_diagonal_audit(h, best)
        rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence((run_seed, 97))))
        random_params = vhd.CartanAnsatz(
            n=n, L=spec["L"],
            alpha=rng.uniform(0, 2 * math.pi, vhd.CartanAnsatz.num_alpha(n, spec["L"])),
            beta=best.beta)
        off_random, _ = vhd.off_diagonal_audit(h, random_params)
        audits.append({"lambda": lam, "offdiag_trained": off_trained,
                       "offdiag_random_init": off_random,
                       "spectrum_gap": float(np.max(np.abs(
                           np.sort(np.linalg.eigvalsh(pauli_sum_to_matrix(h)))
                           - np.sort(vhd.diagonal_model_matrix(best)))))})
    _write_json(out_dir / "vhd_trained_params.json", trained)
    _write_json(out_dir / "vhd_offdiag_audit.json", audits)

    if spec["layer_sweep"]:
        sweep_rows = []
        for lam, h in zip(lams, models):
            for L in [int(x) for x in spec["layer_sweep"]]:
                rep = vhd.vhd_train(h, n, L, cfg_train)
                sweep_rows.append([fmt(lam), str(L), fmt(rep.best_loss)])
        _write_csv(out_dir / "vhd_layer_sweep.csv", ["lambda", "L", "min_loss"],
                   sweep_rows)


def run_depth_report(cfg: dict, out_dir: Path, seed: int, threads: int) -> None:
    spec = _check_table(
        cfg, "config",
        {"models": list},
        {"diag": (dict, None)})
    rows = []
    for i, entry in enumerate(spec["models"]):
        m = _check_table(entry, f"config.models[{i}]",
                         {"N": int},
                         {"gamma": (float, 1.0), "beta": (float, 2.0), "l": (int, 1),
                          "alpha_exp": (float, 2.0), "epsilon": (float, 1.0),
                          "n": (int, 0)})
        model = depth_mod.GateCountModel(gamma=m["gamma"], beta=m["beta"], l=m["l"],
                                         alpha_exp=m["alpha_exp"], epsilon=m["epsilon"],
                                         N=m["N"])
        rep = depth_mod.trotter_counts(model)
        rows.append([str(m["n"]), str(m["N"]), f"model-{i}", fmt(rep.seq_total),
                     fmt(rep.par_total), fmt(rep.ratio), str(rep.crossover_N)])
    header = ["n", "N", "model", "seq_total", "par_total", "ratio", "crossover_N"]
    _write_csv(out_dir / "depth_report.csv", header, rows)
    if spec["diag"] is not None:
        d = _check_table(spec["diag"], "config.diag",
                         {"n": int, "L": int, "m_clock": int}, {})
        w = depth_mod.cartan_w_gate_count(d["n"], d["L"])
        _write_json(out_dir / "depth_diag.json", {
            "n": d["n"], "L": d["L"], "m_clock": d["m_clock"],
            "w_gate_count": w,
            "total": depth_mod.diagonalized_counts(d["n"], d["m_clock"], w),
            "total_entanglement_only": depth_mod.diagonalized_counts(
                d["n"], d["m_clock"], w, omit_final_w=True),
        })
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    (out_dir / "depth_report.md").write_text("\n".join(lines) + "\n")


RUNNERS = {
    "history": run_history,
    "estimate-f": run_estimate_f,
    "loschmidt": run_loschmidt,
    "entanglement": run_entanglement,
    "ff-sweep": run_ff_sweep,
    "vhd-train": run_vhd,
    "depth-report": run_depth_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clocksim",
                                     description="parallel-in-time simulation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        RUNNERS[args.command](cfg, out_dir, args.seed, args.threads)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericCheckError, ValidationError) as err:
        print(f"numeric validation failed: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
