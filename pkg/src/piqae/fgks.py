"""Fine-grained Krylov subspace (FGKS) label sets and subspace matrices.

The basis is ``{P|psi> : P in P_0 u ... u P_K}`` where ``P_k`` holds the
strings of ``H**k`` not present in any lower power.  Matrix elements reduce
to expectation values of the strings in the CP set,
``{P_i Q P_j}`` with ``Q`` ranging over the identity and the strings of H.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .pauli import PauliOperator, PauliString, product_phase, string_set
from .statevector import CompiledOperator, StateVector, apply_pauli, pauli_expvals

_PHASE_TABLE = np.array([1, 1j, -1, -1j])
MAX_CP_QUBITS = 31


def string_key(n: int, x, z):
    """Sort key ``(z << n) | x``: lexicographic on ``(z, x)``."""
    return (z << n) | x


def split_key(n: int, keys):
    mask = (1 << n) - 1
    return keys & mask, keys >> n


@dataclass
class FgksBasis:
    K: int
    n_qubits: int
    per_moment: list[list[PauliString]]
    cancellation: bool = True

    @cached_property
    def labels(self) -> list[PauliString]:
        return [p for s in self.per_moment for p in s]

    @property
    def N_K(self) -> int:
        return sum(len(s) for s in self.per_moment)

    @cached_property
    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.labels], dtype=np.int64)

    @cached_property
    def zs(self) -> np.ndarray:
        return np.array([p.z for p in self.labels], dtype=np.int64)

    @cached_property
    def moments(self) -> np.ndarray:
        return np.concatenate([np.full(len(s), k) for k, s in enumerate(self.per_moment)])


def build_pauli_sets(H: PauliOperator, K: int, cancellation: bool = True) -> FgksBasis:
    """Moment sets ``P_0 ... P_K`` for ``H``.

    With ``cancellation`` (default) the strings of ``H**k`` are those with a
    surviving coefficient in the expanded operator.  Otherwise every
    phase-free product of ``k`` strings of ``H`` counts, ignoring
    cancellations between terms.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    n = H.n_qubits
    ident = PauliString.identity(n)
    seen = {ident}
    per_moment = [[ident]]
    power = PauliOperator.identity(n)
    structural = {ident}
    h_strings = string_set(H)
    for _ in range(K):
        if cancellation:
            power = power @ H
            current = string_set(power)
        else:
            structural = {PauliString(n, a.x ^ b.x, a.z ^ b.z) for a in structural for b in h_strings}
            current = structural
        new = sorted(current - seen, key=PauliString.sort_key)
        seen.update(new)
        per_moment.append(new)
    return FgksBasis(K, n, per_moment, cancellation)


@dataclass
class CpSet:
    """Unique strings needed for the subspace matrices, plus the triple map.

    ``index[m, i, j]`` is the position in ``keys`` of the phase-free product
    ``P_i Q_m P_j`` and ``phase[m, i, j]`` its ``i**k`` exponent.  ``Q_0`` is
    the identity; ``mid_coeffs[m]`` is the Hamiltonian coefficient of ``Q_m``.
    """

    K: int
    n_qubits: int
    keys: np.ndarray
    mid: list[PauliString]
    mid_coeffs: np.ndarray
    index: np.ndarray
    phase: np.ndarray

    @property
    def xs(self) -> np.ndarray:
        return split_key(self.n_qubits, self.keys)[0]

    @property
    def zs(self) -> np.ndarray:
        return split_key(self.n_qubits, self.keys)[1]

    def __len__(self) -> int:
        return self.keys.size

    @property
    def D_K(self) -> int:
        """Number of strings that require measurement (identity excluded)."""
        return int(self.keys.size - (self.keys[0] == 0))

    def string(self, pos: int) -> PauliString:
        x, z = split_key(self.n_qubits, int(self.keys[pos]))
        return PauliString(self.n_qubits, x, z)

    @cached_property
    def strings(self) -> list[PauliString]:
        n = self.n_qubits
        return [PauliString(n, int(x), int(z)) for x, z in zip(self.xs, self.zs)]

    def position(self, p: PauliString) -> int:
        key = string_key(self.n_qubits, p.x, p.z)
        pos = int(np.searchsorted(self.keys, key))
        if pos == self.keys.size or self.keys[pos] != key:
            raise KeyError(p.label)
        return pos

    def triple(self, i: int, m: int, j: int) -> tuple[int, PauliString]:
        """``(k, string)`` with ``P_i Q_m P_j = i**k * string``."""
        return int(self.phase[m, i, j]), self.string(int(self.index[m, i, j]))


def _triple_products(basis: FgksBasis, mx: int, mz: int):
    bx, bz = basis.xs, basis.zs
    ax, az = bx ^ mx, bz ^ mz
    ph1 = product_phase(bx, bz, np.int64(mx), np.int64(mz))
    px = ax[:, None] ^ bx[None, :]
    pz = az[:, None] ^ bz[None, :]
    ph2 = product_phase(ax[:, None], az[:, None], bx[None, :], bz[None, :])
    return px, pz, (ph1[:, None] + ph2) % 4


def build_cp_set(H: PauliOperator, basis: FgksBasis) -> CpSet:
    n = H.n_qubits
    if n > MAX_CP_QUBITS:
        raise ValueError(f"CP construction supports at most {MAX_CP_QUBITS} qubits")
    ident = PauliString.identity(n)
    coeffs = H.terms
    mid = [ident] + [p for p in H.strings() if not p.is_identity()]
    mid_coeffs = np.array([coeffs.get(p, 0.0) for p in mid], dtype=complex)
    uniq = np.empty(0, dtype=np.int64)
    for q in mid:
        px, pz, _ = _triple_products(basis, q.x, q.z)
        uniq = np.union1d(uniq, np.unique(string_key(n, px, pz)))
    nb = basis.N_K
    index = np.empty((len(mid), nb, nb), dtype=np.int32)
    phase = np.empty((len(mid), nb, nb), dtype=np.int8)
    for m, q in enumerate(mid):
        px, pz, ph = _triple_products(basis, q.x, q.z)
        index[m] = np.searchsorted(uniq, string_key(n, px, pz))
        phase[m] = ph
    return CpSet(basis.K, n, uniq, mid, mid_coeffs, index, phase)


def cp_provenance(basis: FgksBasis, cp: CpSet) -> np.ndarray:
    """Lowest total moment ``m(i) + m(Q) + m(j)`` producing each CP string."""
    mom = basis.moments
    out = np.full(len(cp), np.iinfo(np.int64).max, dtype=np.int64)
    for m in range(len(cp.mid)):
        total = mom[:, None] + mom[None, :] + (0 if m == 0 else 1)
        np.minimum.at(out, cp.index[m].ravel(), total.ravel())
    return out


@dataclass
class ExpvalTable:
    """Expectation values keyed by string, sorted by key.

    ``stderr`` is zero for exact entries.  ``shots`` is ``None`` for exact
    tables.
    """

    n_qubits: int
    keys: np.ndarray
    means: np.ndarray
    stderr: np.ndarray
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if not (self.keys.shape == self.means.shape == self.stderr.shape):
            raise ValueError("keys, means and stderr must have equal shapes")
        if np.any(self.stderr < 0):
            raise ValueError("stderr must be non-negative")

    def __len__(self) -> int:
        return self.keys.size

    @property
    def is_exact(self) -> bool:
        return not np.any(self.stderr)

    def get(self, p: PauliString) -> tuple[float, float]:
        key = string_key(self.n_qubits, p.x, p.z)
        pos = int(np.searchsorted(self.keys, key))
        if pos == self.keys.size or self.keys[pos] != key:
            raise KeyError(p.label)
        return float(self.means[pos]), float(self.stderr[pos])

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        """Positions of ``keys`` in the table; raises naming the first missing string."""
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, self.keys.size - 1)
        bad = self.keys[pos] != keys
        if np.any(bad):
            k = int(keys[np.flatnonzero(bad)[0]])
            x, z = split_key(self.n_qubits, k)
            raise KeyError(f"no expectation value for {PauliString(self.n_qubits, x, z).label}")
        return pos

    def with_means(self, means: np.ndarray) -> "ExpvalTable":
        return ExpvalTable(self.n_qubits, self.keys, means, self.stderr, self.shots, self.seed)


def exact_expvals(state: StateVector, cp: CpSet) -> ExpvalTable:
    if state.size != 1 << cp.n_qubits:
        raise ValueError("state does not match CP set qubit count")
    vals = pauli_expvals(state, cp.xs, cp.zs)
    return ExpvalTable(cp.n_qubits, cp.keys, vals, np.zeros_like(vals))


@dataclass
class SubspaceMatrices:
    H: np.ndarray
    S: np.ndarray
    basis: FgksBasis | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def N_K(self) -> int:
        return self.S.shape[0]


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def assemble_matrices(
    H: PauliOperator, basis: FgksBasis, cp: CpSet, table: ExpvalTable, metadata: dict | None = None
) -> SubspaceMatrices:
    """``S_ij = <P_i P_j>``, ``H_ij = sum_m c_m <P_i Q_m P_j>``, both Hermitized."""
    if table.n_qubits != cp.n_qubits:
        raise ValueError("table and CP set act on different qubit counts")
    coeffs = H.terms
    if not np.allclose([coeffs.get(q, 0.0) for q in cp.mid], cp.mid_coeffs):
        raise ValueError("CP set was built for a different Hamiltonian")
    values = table.means[table.lookup(cp.keys)]
    nb = basis.N_K
    S = _PHASE_TABLE[cp.phase[0]] * values[cp.index[0]]
    Hm = np.zeros((nb, nb), dtype=complex)
    for m in range(len(cp.mid)):
        c = cp.mid_coeffs[m]
        if c != 0:
            Hm += c * _PHASE_TABLE[cp.phase[m]] * values[cp.index[m]]
    return SubspaceMatrices(hermitize(Hm), hermitize(S), basis, dict(metadata or {}))


def basis_vectors(state: StateVector, basis: FgksBasis) -> np.ndarray:
    """Rows ``P_j|psi>`` for every basis label."""
    return np.array([apply_pauli(state, p) for p in basis.labels])


def direct_matrices(H: PauliOperator, state: StateVector, basis: FgksBasis) -> SubspaceMatrices:
    """Subspace matrices straight from the basis vectors (no CP set)."""
    comp = CompiledOperator(H)
    vecs = basis_vectors(state, basis)
    hv = np.array([comp.apply(v) for v in vecs])
    return SubspaceMatrices(hermitize(vecs.conj() @ hv.T), hermitize(vecs.conj() @ vecs.T), basis)


def ks_reference(H: PauliOperator, state: StateVector, K: int) -> SubspaceMatrices:
    """Conventional Krylov matrices over ``{H^k|psi>}``, each vector normalized."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if state.size != 1 << H.n_qubits:
        raise ValueError("state does not match Hamiltonian qubit count")
    comp = CompiledOperator(H)
    vecs = [state]
    for _ in range(K):
        vecs.append(comp.apply(vecs[-1]))
    vecs = np.array([v / np.linalg.norm(v) for v in vecs])
    hv = np.array([comp.apply(v) for v in vecs])
    return SubspaceMatrices(
        hermitize(vecs.conj() @ hv.T), hermitize(vecs.conj() @ vecs.T), None, {"basis": "ks", "K": K}
    )


def write_cp_csv(path, basis: FgksBasis, cp: CpSet, header: Sequence[str] = ()) -> None:
    prov = cp_provenance(basis, cp)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["string", "moment_provenance"])
        for p, k in zip(cp.strings, prov):
            w.writerow([p.label, int(k)])


def write_matrices_csv(path, mats: SubspaceMatrices, header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["matrix", "i", "j", "re", "im"])
        for name, m in (("H", mats.H), ("S", mats.S)):
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    w.writerow([name, i, j, repr(float(m[i, j].real)), repr(float(m[i, j].imag))])
