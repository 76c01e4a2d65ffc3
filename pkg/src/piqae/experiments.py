"""Experiment drivers: model summary, VQE, noiseless sweeps, shot-noise and ZNE studies.

Each ``run_*`` function takes a resolved :class:`ExperimentConfig` and
returns a :class:`Table`; writing it (with its metadata block) is left to
the caller, so the same functions serve the CLI and the tests.
Expensive intermediate objects (ground state, CP set, exact expectation
values) are memoized per process, keyed by the config sections they depend
on, and the ground state is additionally cached on disk when an output
directory is configured.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import ExperimentConfig
from .fgks import (
    FgksBasis,
    SubspaceMatrices,
    assemble_matrices,
    build_cp_set,
    build_pauli_sets,
    exact_expvals,
    ks_reference,
)
from .gevp import (
    ExactReference,
    TruncationSweep,
    numerical_rank,
    overlap_spectrum,
    rayleigh_energy,
    strace_select,
    threshold_select,
    trace_distances,
    zne_extrapolate,
)
from .grouping import MAX_GROUPING_STRINGS, group_strings, tfim_group_bound
from .lattice import ModelSpec, build_graph, build_hamiltonian
from .noise import NoiseSpec, TrajectoryCache, noisy_expvals, reweighted_expvals
from .sampling import measure_grouped, measure_per_string, resample_table
from .statevector import (
    CompiledOperator,
    EdResult,
    HvaParams,
    dump_amplitudes,
    expval,
    ground_state_ed,
    load_amplitudes,
    prepare_hva,
)
from .vqe import vqe_optimize

log = logging.getLogger(__name__)


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def write_csv(self, path, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, np.integer):
        return int(v)
    return v


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """Ordered map, optionally on a thread pool (results keep input order)."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- cached building blocks -------------------------------------------------

_MEMO: dict = {}


def _memo(key, build):
    if key not in _MEMO:
        _MEMO[key] = build()
    return _MEMO[key]


def clear_cache() -> None:
    _MEMO.clear()


def model_spec(cfg: ExperimentConfig) -> ModelSpec:
    return cfg.model.spec()


def ground_reference(cfg: ExperimentConfig) -> EdResult:
    """Exact ground state of the configured model, cached in memory and on disk."""
    key = ("ed", cfg.digest("model"))
    return _memo(key, lambda: _ground_reference_disk(cfg))


def _ground_reference_disk(cfg: ExperimentConfig) -> EdResult:
    spec = model_spec(cfg)
    cache_dir = Path(cfg.output) / "cache" if cfg.output else None
    if cache_dir is not None:
        stem = cache_dir / f"ed_{cfg.digest('model')}"
        meta_path, amp_path = stem.with_suffix(".json"), stem.with_suffix(".c16")
        if meta_path.exists() and amp_path.exists():
            meta = json.loads(meta_path.read_text())
            return EdResult(meta["ground_energy"], load_amplitudes(amp_path), meta["residual_norm"],
                            meta["iterations"], meta["converged"])
    ed = ground_state_ed(build_hamiltonian(spec))
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        dump_amplitudes(ed.ground_state, amp_path)
        meta_path.write_text(json.dumps({
            "ground_energy": ed.ground_energy,
            "residual_norm": ed.residual_norm,
            "iterations": ed.iterations,
            "converged": ed.converged,
        }, sort_keys=True))
    return ed


def hva_params(cfg: ExperimentConfig, L: int | None = None) -> HvaParams:
    """Angles for ``L`` layers: the configured list, or a VQE optimum."""
    spec = model_spec(cfg)
    L = cfg.ansatz.L if L is None else L
    if L == 0:
        return HvaParams.zeros(0, spec.is_tfim)
    if cfg.ansatz.angles != "optimize":
        if L != cfg.ansatz.L:
            raise ValueError(f"explicit angles are given for L={cfg.ansatz.L} only, not L={L}")
        return HvaParams.from_flat(cfg.ansatz.angles, spec.is_tfim)
    key = ("vqe", cfg.digest("model"), L, cfg.ansatz.restarts, cfg.ansatz.vqe_seed)
    return _memo(key, lambda: vqe_optimize(spec, L, cfg.ansatz.vqe_seed, cfg.ansatz.restarts).params)


@dataclass
class Problem:
    """Everything a noisy or noiseless subspace solve needs for one (model, L, K)."""

    spec: ModelSpec
    params: HvaParams
    state: np.ndarray
    ed: EdResult
    basis: FgksBasis
    cp: object
    exact_table: object
    exact: SubspaceMatrices
    reference: ExactReference


def fgks_problem(cfg: ExperimentConfig, L: int | None = None, K: int | None = None) -> Problem:
    L = cfg.ansatz.L if L is None else L
    K = cfg.subspace.K if K is None else K
    key = ("fgks", cfg.digest("model"), json.dumps(hva_params(cfg, L).flat().tolist()), K,
           cfg.subspace.cancellation)
    return _memo(key, lambda: _build_problem(cfg, L, K))


def _build_problem(cfg: ExperimentConfig, L: int, K: int) -> Problem:
    spec = model_spec(cfg)
    H = build_hamiltonian(spec)
    params = hva_params(cfg, L)
    state = prepare_hva(spec, params)
    ed = ground_reference(cfg)
    basis = build_pauli_sets(H, K, cfg.subspace.cancellation)
    cp = build_cp_set(H, basis)
    table = exact_expvals(state, cp)
    exact = assemble_matrices(H, basis, cp, table)
    ref = ExactReference.build(exact.H, exact.S, basis, state, ed.ground_state)
    return Problem(spec, params, state, ed, basis, cp, table, exact, ref)


def _select_M(cfg: ExperimentConfig, spectrum, N_K: int) -> int:
    if cfg.selection.mode == "strace":
        return strace_select(spectrum, N_K)
    return max(1, threshold_select(spectrum, cfg.selection.xi_c))


def _M_values(cfg: ExperimentConfig, max_M: int, chosen: int) -> list[int]:
    if cfg.selection.mode != "sweep":
        return [chosen]
    return sorted(set(range(1, max_M + 1, cfg.selection.M_step)) | {chosen, max_M})


# --- subcommands ------------------------------------------------------------


def run_model(cfg: ExperimentConfig) -> Table:
    spec = model_spec(cfg)
    H = build_hamiltonian(spec)
    ed = ground_reference(cfg)
    plus = prepare_hva(spec, HvaParams.zeros(0, spec.is_tfim))
    t = Table(["model", "n_sites", "n_edges", "n_terms", "J", "h_x", "h_z", "E_G", "E_G_per_site",
               "E_plus", "residual_norm", "converged"])
    t.rows.append([spec.name, spec.n_sites, len(spec.graph.edges), len(H), spec.J, spec.h_x, spec.h_z,
                   ed.ground_energy, ed.ground_energy / spec.n_sites, expval(plus, H), ed.residual_norm,
                   ed.converged])
    return t


def run_vqe(cfg: ExperimentConfig) -> Table:
    spec = model_spec(cfg)
    ed = ground_reference(cfg)
    L = cfg.ansatz.L
    if L < 1:
        raise ValueError("vqe needs ansatz.L >= 1")
    res = vqe_optimize(spec, L, cfg.ansatz.vqe_seed, cfg.ansatz.restarts, ed.ground_energy)
    names = []
    for layer in range(1, L + 1):
        names += [f"alpha_{layer}", f"gamma_{layer}"] if spec.is_tfim else \
                 [f"alpha_{layer}", f"beta_{layer}", f"gamma_{layer}"]
    t = Table(["model", "L", "seed"] + names + ["energy", "E_G", "error_per_site", "converged"])
    t.rows.append([spec.name, L, cfg.ansatz.vqe_seed, *res.params.flat().tolist(), res.energy,
                   ed.ground_energy, res.energy_error_per_site, res.converged])
    t.summary["result"] = res
    return t


SWEEP_COLUMNS = ["L", "K", "basis", "N_K", "M", "M_selected", "E_g", "epsilon", "exact_energy",
                 "exact_epsilon", "infidelity", "cum_trace_distance"]


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Noiseless convergence in ``L`` and ``K`` against exact diagonalization."""
    if cfg.measurement.mode != "exact":
        raise ValueError("sweep runs in exact-measurement mode")
    Ls = cfg.grid.L if cfg.grid.L is not None else [cfg.ansatz.L]
    Ks = cfg.grid.K if cfg.grid.K is not None else [cfg.subspace.K]
    for L in Ls:  # resolve VQE angles up front, in order
        hva_params(cfg, L)
    points = [(L, K) for L in Ls for K in Ks]
    chunks = parallel_map(lambda lk: _sweep_point(cfg, *lk), points, threads)
    t = Table(list(SWEEP_COLUMNS))
    for rows in chunks:
        t.rows.extend(rows)
    return t


def _sweep_point(cfg: ExperimentConfig, L: int, K: int) -> list[list]:
    spec = model_spec(cfg)
    n = spec.n_sites
    ed = ground_reference(cfg)
    if cfg.subspace.basis == "ks":
        state = prepare_hva(spec, hva_params(cfg, L))
        mats = ks_reference(build_hamiltonian(spec), state, K)
        ref = ExactReference(mats.H, mats.S, _ks_overlaps(spec, state, K, ed))
    else:
        prob = fgks_problem(cfg, L, K)
        mats, ref = prob.exact, prob.reference
    spectrum = overlap_spectrum(mats.S)
    sweep = TruncationSweep(mats.H, mats.S, spectrum)
    N_K = mats.N_K
    # noiseless matrices: directions below rounding level carry no information
    max_M = max(1, min(sweep.max_M, numerical_rank(spectrum)))
    chosen = min(_select_M(cfg, spectrum, N_K), max_M)
    dist = trace_distances(spectrum, N_K)
    rows = []
    for M in _M_values(cfg, max_M, chosen):
        res = sweep.ground(M)
        e_exact, fid = ref.evaluate(res.coeffs_original)
        rows.append([L, K, cfg.subspace.basis, N_K, M, M == chosen, res.energy,
                     (res.energy - ed.ground_energy) / n, e_exact, (e_exact - ed.ground_energy) / n,
                     1.0 - fid, float(dist[M - 1])])
    return rows


def _ks_overlaps(spec: ModelSpec, state, K: int, ed: EdResult) -> np.ndarray:
    op = CompiledOperator(build_hamiltonian(spec))
    v = state.copy()
    out = []
    for k in range(K + 1):
        if k:
            v = op.apply(v)
        out.append(np.vdot(ed.ground_state, v) / np.linalg.norm(v))
    return np.array(out)


def _measure(cfg: ExperimentConfig, prob: Problem, seed: int):
    scheme = cfg.measurement.scheme
    if scheme == "auto":
        scheme = "grouped" if prob.cp.D_K <= MAX_GROUPING_STRINGS else "per_string"
    if scheme == "grouped":
        groups = _memo(("groups", id(prob.cp)), lambda: group_strings(prob.cp))
        return measure_grouped(prob.state, prob.cp, groups, cfg.measurement.shots, seed), scheme
    return measure_per_string(prob.exact_table, cfg.measurement.shots, seed), scheme


SHOT_COLUMNS = ["M", "is_Mo", "E_g", "epsilon", "epsilon_mean", "epsilon_std", "exact_energy",
                "exact_epsilon", "infidelity", "cum_trace_distance"]


def run_shot_study(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Finite-shot subspace matrices, trace-criterion truncation, resampled error bars."""
    if cfg.measurement.mode != "shots":
        raise ValueError("shot study needs measurement.mode = 'shots'")
    prob = fgks_problem(cfg)
    n = prob.spec.n_sites
    E_G = prob.ed.ground_energy
    H = build_hamiltonian(prob.spec)
    table, scheme = _measure(cfg, prob, cfg.seed)
    mats = assemble_matrices(H, prob.basis, prob.cp, table)
    spectrum = overlap_spectrum(mats.S)
    sweep = TruncationSweep(mats.H, mats.S, spectrum)
    N_K = prob.basis.N_K
    M_o = strace_select(spectrum, N_K)
    Ms = _M_values(cfg, sweep.max_M, M_o) if cfg.selection.mode == "sweep" else [M_o]
    dist = trace_distances(spectrum, N_K)

    def resampled(r):
        rt = resample_table(table, cfg.seed, r)
        m = assemble_matrices(H, prob.basis, prob.cp, rt)
        sw = TruncationSweep(m.H, m.S)
        return [sw.ground(M).energy if M <= sw.max_M else np.nan for M in Ms]

    boot = np.array(parallel_map(resampled, range(cfg.measurement.resamples), threads)).reshape(-1, len(Ms))
    t = Table(list(SHOT_COLUMNS))
    for col, M in enumerate(Ms):
        res = sweep.ground(M)
        e_exact, fid = prob.reference.evaluate(res.coeffs_original)
        eps_b = (boot[:, col] - E_G) / n
        mean = float(np.nanmean(eps_b)) if np.any(np.isfinite(eps_b)) else np.nan
        std = float(np.nanstd(eps_b)) if np.sum(np.isfinite(eps_b)) > 1 else np.nan
        t.rows.append([M, M == M_o, res.energy, (res.energy - E_G) / n, mean, std, e_exact,
                       (e_exact - E_G) / n, 1.0 - fid, float(dist[M - 1])])
    t.summary.update(M_o=M_o, N_K=N_K, D_K=prob.cp.D_K, scheme=scheme, max_M=sweep.max_M)
    return t


ZNE_COLUMNS = ["M", "is_Mo", "lambda", "E_lambda", "E_zne", "epsilon_lambda", "epsilon_zne"]


def run_zne_study(cfg: ExperimentConfig) -> Table:
    """Noise-scaled subspace energies at fixed coefficients, extrapolated to zero noise."""
    if cfg.noise is None:
        raise ValueError("ZNE study needs a noise section")
    nc = cfg.noise
    prob = fgks_problem(cfg)
    n = prob.spec.n_sites
    E_G = prob.ed.ground_energy
    H = build_hamiltonian(prob.spec)
    lams = list(nc.lambdas)
    cache = TrajectoryCache(prob.spec, prob.params, prob.cp)
    if nc.estimator == "reweighted":
        tables = reweighted_expvals(prob.spec, prob.params, nc.p, lams, nc.trajectories, prob.cp, cfg.seed, cache)
    else:
        tables = {
            lam: noisy_expvals(prob.spec, prob.params, NoiseSpec(nc.p, lam, nc.trajectories), prob.cp, cfg.seed, cache)
            for lam in lams
        }
    mats = {lam: assemble_matrices(H, prob.basis, prob.cp, tables[lam]) for lam in lams}
    base = mats[1.0]
    spectrum = overlap_spectrum(base.S)
    sweep = TruncationSweep(base.H, base.S, spectrum)
    M_o = strace_select(spectrum, prob.basis.N_K)
    Ms = _M_values(cfg, sweep.max_M, M_o) if cfg.selection.mode == "sweep" else [M_o]
    t = Table(list(ZNE_COLUMNS))
    for M in Ms:
        c = sweep.ground(M).coeffs_original
        energies = [rayleigh_energy(c, mats[lam].H, mats[lam].S) for lam in lams]
        e0 = zne_extrapolate(lams, energies)
        for lam, e in zip(lams, energies):
            t.rows.append([M, M == M_o, lam, e, e0, (e - E_G) / n, (e0 - E_G) / n])
    t.summary.update(M_o=M_o, N_K=prob.basis.N_K, D_K=prob.cp.D_K, distinct_trajectories=len(cache))
    return t


GROUPING_COLUMNS = ["model", "N", "K", "N_K", "D_K", "N_g", "bound_8N_plus_3"]


def run_grouping_stats(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Set sizes and greedy group counts over the configured lattice sizes."""
    sizes = cfg.grid.sizes if cfg.grid.sizes is not None else [cfg.model.dims]
    Ks = cfg.grid.K if cfg.grid.K is not None else [cfg.subspace.K]

    def point(args):
        dims, K = args
        spec = ModelSpec(build_graph(cfg.model.kind, dims), cfg.model.J, cfg.model.h_x, cfg.model.h_z)
        H = build_hamiltonian(spec)
        basis = build_pauli_sets(H, K, cfg.subspace.cancellation)
        cp = build_cp_set(H, basis)
        groups = group_strings(cp)
        bound = tfim_group_bound(spec.n_sites) if spec.n_sites >= 2 else ""
        return [spec.name, spec.n_sites, K, basis.N_K, cp.D_K, len(groups), bound]

    t = Table(list(GROUPING_COLUMNS))
    t.rows = parallel_map(point, [(d, K) for d in sizes for K in Ks], threads)
    return t


RUNNERS = {
    "model": lambda cfg, threads: run_model(cfg),
    "vqe": lambda cfg, threads: run_vqe(cfg),
    "sweep": run_sweep,
    "shot": run_shot_study,
    "zne": lambda cfg, threads: run_zne_study(cfg),
    "grouping": run_grouping_stats,
}


def run_and_write(subcommand: str, cfg: ExperimentConfig, out_dir, threads: int = 1) -> Path:
    """Run one subcommand, write its CSV and update the run manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = RUNNERS[subcommand](cfg, threads)
    path = out_dir / f"{subcommand}_{cfg.config_hash}.csv"
    table.write_csv(path, cfg.metadata(subcommand))
    manifest = out_dir / f"manifest_{cfg.config_hash}.json"
    entry = json.loads(manifest.read_text()) if manifest.exists() else {
        "config": cfg.to_dict(), "config_hash": cfg.config_hash, "outputs": {}}
    entry["outputs"][subcommand] = {
        "file": path.name,
        "rows": len(table.rows),
        "summary": {k: v for k, v in table.summary.items() if isinstance(v, (int, float, str))},
    }
    manifest.write_text(json.dumps(entry, indent=2, sort_keys=True) + "\n")
    return path
