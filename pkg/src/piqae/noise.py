"""Two-qubit depolarizing noise on the HVA by quantum trajectories.

After every ZZ rotation on an edge, with probability ``q = scale * p`` one
of the 15 non-identity two-qubit Paulis (uniformly) hits that edge.  Each
trajectory owns a random stream that draws a uniform number and a Pauli
index for every (layer, edge) slot, whether or not an error fires; the
error fires when the uniform number is below ``q``.  Different noise scales
therefore see the same random numbers (common random numbers), which keeps
the scale dependence of trajectory averages smooth for extrapolation.

For a whole grid of scales, :func:`reweighted_expvals` goes one step
further: trajectories are drawn once at the largest rate and every other
rate is reached by the exact likelihood ratio of the drawn error pattern
(self-normalized importance weights).  Every scale then averages the very
same trajectory states, so the scale dependence carries no sampling jitter.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fgks import CpSet, ExpvalTable
from .lattice import CouplingGraph, ModelSpec
from .pauli import PauliString
from .sampling import TAG_TRAJECTORY, stream
from .statevector import (
    HvaParams,
    StateVector,
    _check_params,
    _indices,
    _z_diagonal,
    apply_pauli,
    apply_x_layer,
    pauli_expvals,
    plus_state,
    x_rotation,
)

N_ERRORS = 15
_LETTERS = "IXYZ"

# (layer, edge index, Pauli index in 1..15) for every error that fired
ErrorPattern = tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class NoiseSpec:
    p: float
    scale: float = 1.0
    trajectories: int = 64

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("error probability p must lie in [0, 1)")
        if self.scale < 0:
            raise ValueError("noise scale must be non-negative")
        if self.p * self.scale >= 1.0:
            raise ValueError(f"scaled error probability {self.p * self.scale} must stay below 1")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")

    @property
    def rate(self) -> float:
        return self.p * self.scale

    def scaled(self, scale: float) -> "NoiseSpec":
        return NoiseSpec(self.p, scale, self.trajectories)


def error_string(n: int, edge: tuple[int, int], k: int) -> PauliString:
    """Two-site Pauli number ``k`` (1..15): letters ``IXYZ[k // 4]`` on ``i``, ``IXYZ[k % 4]`` on ``j``."""
    if not 1 <= k <= N_ERRORS:
        raise ValueError("error index must be in 1..15")
    a, b = divmod(k, 4)
    i, j = edge
    sites = {}
    if a:
        sites[i] = _LETTERS[a]
    if b:
        sites[j] = _LETTERS[b]
    return PauliString.from_sites(n, sites)


def trajectory_draws(graph: CouplingGraph, layers: int, seed: int, trajectory: int):
    """Uniform numbers and Pauli indices for every (layer, edge) slot."""
    rng = stream(seed, TAG_TRAJECTORY, trajectory)
    shape = (layers, len(graph.edges))
    u = rng.random(shape)
    k = rng.integers(1, N_ERRORS + 1, size=shape)
    return u, k


def error_pattern(u: np.ndarray, k: np.ndarray, rate: float) -> ErrorPattern:
    hits = np.argwhere(u < rate)
    return tuple((int(l), int(e), int(k[l, e])) for l, e in hits)


@lru_cache(maxsize=4)
def _edge_diagonals(graph: CouplingGraph) -> np.ndarray:
    n = graph.n_sites
    idx = _indices(n)
    spins = [1 - 2 * ((idx >> (n - 1 - i)) & 1) for i in range(n)]
    out = np.array([spins[i] * spins[j] for i, j in graph.edges], dtype=float)
    out.setflags(write=False)
    return out


def prepare_noisy_hva(spec: ModelSpec, params: HvaParams, pattern: ErrorPattern) -> StateVector:
    """HVA state with the Pauli errors of ``pattern`` inserted after their ZZ rotations."""
    _check_params(spec, params)
    n = spec.n_sites
    graph = spec.graph
    diags = _edge_diagonals(graph)
    by_layer: dict[int, list[tuple[int, int]]] = {}
    for layer, e, k in pattern:
        if not 0 <= layer < params.layers or not 0 <= e < len(graph.edges):
            raise ValueError(f"error slot ({layer}, {e}) outside the circuit")
        by_layer.setdefault(layer, []).append((e, k))
    state = plus_state(n)
    for layer in range(params.layers):
        a = params.alpha[layer]
        start = 0
        for e, k in sorted(by_layer.get(layer, [])):
            state = state * np.exp(-0.5j * a * diags[start : e + 1].sum(axis=0))
            state = apply_pauli(state, error_string(n, graph.edges[e], k))
            start = e + 1
        phase = a * diags[start:].sum(axis=0)
        if params.beta is not None:
            phase = phase + params.beta[layer] * _z_diagonal(n)
        state = state * np.exp(-0.5j * phase)
        state = apply_x_layer(state, params.gamma[layer], n)
    return state


def noisy_prepare(
    spec: ModelSpec, params: HvaParams, noise: NoiseSpec, seed: int, trajectory: int = 0
) -> StateVector:
    """One noisy trajectory of the HVA circuit."""
    u, k = trajectory_draws(spec.graph, params.layers, seed, trajectory)
    return prepare_noisy_hva(spec, params, error_pattern(u, k, noise.rate))


class TrajectoryCache:
    """Expectation vectors per error pattern, shared across noise scales."""

    def __init__(self, spec: ModelSpec, params: HvaParams, cp: CpSet):
        self.spec = spec
        self.params = params
        self.cp = cp
        self._store: dict[ErrorPattern, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._store)

    def expvals(self, pattern: ErrorPattern) -> np.ndarray:
        vals = self._store.get(pattern)
        if vals is None:
            state = prepare_noisy_hva(self.spec, self.params, pattern)
            vals = pauli_expvals(state, self.cp.xs, self.cp.zs)
            self._store[pattern] = vals
        return vals


def noisy_expvals(
    spec: ModelSpec,
    params: HvaParams,
    noise: NoiseSpec,
    cp: CpSet,
    seed: int,
    cache: TrajectoryCache | None = None,
) -> ExpvalTable:
    """Trajectory-averaged expectation values of the CP set.

    ``stderr`` is the standard error of the trajectory mean.  With zero
    error rate every trajectory is the noiseless state.
    """
    if cache is None:
        cache = TrajectoryCache(spec, params, cp)
    elif cache.cp is not cp or cache.spec != spec or cache.params != params:
        raise ValueError("trajectory cache was built for a different circuit or CP set")
    T = noise.trajectories
    mult: dict[ErrorPattern, int] = {}
    for t in range(T):
        u, k = trajectory_draws(spec.graph, params.layers, seed, t)
        pat = error_pattern(u, k, noise.rate)
        mult[pat] = mult.get(pat, 0) + 1
    total = np.zeros(len(cp))
    total_sq = np.zeros(len(cp))
    for pat in sorted(mult):
        v = cache.expvals(pat)
        total += mult[pat] * v
        total_sq += mult[pat] * v * v
    mean = total / T
    if T > 1:
        var = np.clip(total_sq - T * mean * mean, 0.0, None) / (T - 1)
        stderr = np.sqrt(var / T)
    else:
        stderr = np.zeros(len(cp))
    return ExpvalTable(cp.n_qubits, cp.keys, mean, stderr, None, seed)


def pattern_weight(n_errors: int, n_slots: int, rate: float, ref_rate: float) -> float:
    """Likelihood ratio of an error pattern under ``rate`` versus ``ref_rate``."""
    if not 0 < ref_rate < 1:
        raise ValueError("reference rate must lie in (0, 1)")
    if rate == 0:
        return 1.0 / (1 - ref_rate) ** n_slots if n_errors == 0 else 0.0
    return (rate / ref_rate) ** n_errors * ((1 - rate) / (1 - ref_rate)) ** (n_slots - n_errors)


def reweighted_expvals(
    spec: ModelSpec,
    params: HvaParams,
    p: float,
    scales,
    trajectories: int,
    cp: CpSet,
    seed: int,
    cache: TrajectoryCache | None = None,
) -> dict[float, ExpvalTable]:
    """Trajectory estimates for every scale from one draw at the largest rate."""
    scales = [float(s) for s in scales]
    specs = [NoiseSpec(p, s, trajectories) for s in scales]  # validates every scale
    ref = max(ns.rate for ns in specs)
    if ref == 0:
        table = noisy_expvals(spec, params, specs[0], cp, seed, cache)
        return {s: table for s in scales}
    if cache is None:
        cache = TrajectoryCache(spec, params, cp)
    n_slots = params.layers * len(spec.graph.edges)
    mult: dict[ErrorPattern, int] = {}
    for t in range(trajectories):
        u, k = trajectory_draws(spec.graph, params.layers, seed, t)
        pat = error_pattern(u, k, ref)
        mult[pat] = mult.get(pat, 0) + 1
    pats = sorted(mult)
    vals = np.array([cache.expvals(pat) for pat in pats])
    counts = np.array([mult[pat] for pat in pats], dtype=float)
    out = {}
    for ns in specs:
        w = counts * np.array([pattern_weight(len(pat), n_slots, ns.rate, ref) for pat in pats])
        total = w.sum()
        if total == 0:
            raise ValueError(f"no sampled trajectory is compatible with scale {ns.scale}")
        mean = (w @ vals) / total
        # delta-method standard error of a self-normalized weighted mean:
        # sum over trajectories of (w_t / W)^2 (f_t - mean)^2
        dev = vals - mean
        stderr = np.sqrt((w * w / counts / total**2) @ (dev * dev))
        out[ns.scale] = ExpvalTable(cp.n_qubits, cp.keys, mean, stderr, None, seed)
    return out


def density_matrix_hva(spec: ModelSpec, params: HvaParams, rate: float) -> np.ndarray:
    """Exact noisy HVA density matrix; small systems only (reference oracle)."""
    _check_params(spec, params)
    n = spec.n_sites
    if n > 8:
        raise MemoryError("density-matrix reference is limited to 8 qubits")
    graph = spec.graph
    diags = _edge_diagonals(graph)
    psi = plus_state(n)
    rho = np.outer(psi, psi.conj())
    errs = [[error_string(n, edge, k).to_matrix() for k in range(1, N_ERRORS + 1)] for edge in graph.edges]
    for layer in range(params.layers):
        for e in range(len(graph.edges)):
            u = np.exp(-0.5j * params.alpha[layer] * diags[e])
            rho = u[:, None] * rho * u.conj()[None, :]
            if rate:
                mixed = sum(P @ rho @ P for P in errs[e]) / N_ERRORS
                rho = (1 - rate) * rho + rate * mixed
        if params.beta is not None:
            u = np.exp(-0.5j * params.beta[layer] * _z_diagonal(n))
            rho = u[:, None] * rho * u.conj()[None, :]
        gate = np.ones((1, 1), dtype=complex)
        for _ in range(n):
            gate = np.kron(gate, x_rotation(params.gamma[layer]))
        rho = gate @ rho @ gate.conj().T
    return rho
