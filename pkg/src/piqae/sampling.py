"""Finite-shot measurement and resampling of Pauli expectation values.

Two measurement schemes are provided:

* grouped: each qubit-wise commuting group is measured in its shared basis
  with ``M_s`` shots, and every member is estimated from the same counts;
* per string: every string gets its own ``M_s`` shots, drawn as a binomial
  on the exact outcome probability ``(1 + <P>) / 2``.  This is the cheap
  route for CP sets too large to group.

All randomness flows through Philox streams keyed by
``(master_seed, tag, index)``, so a given group or trajectory always sees the
same random numbers regardless of evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fgks import CpSet, ExpvalTable
from .grouping import MeasurementGroup
from .pauli import PauliString
from .statevector import StateVector, apply_single_qubit, n_qubits_of

# stream tags
TAG_GROUP = 1
TAG_PER_STRING = 2
TAG_RESAMPLE = 3
TAG_TRAJECTORY = 4

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S_DAG = np.diag([1, -1j])
_BASIS_GATES = {"X": _HADAMARD, "Y": _HADAMARD @ _S_DAG}


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for one (tag, index) pair."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(seed, spawn_key=(tag, index))
    return np.random.Generator(np.random.Philox(ss))


def _check_shots(shots: int) -> None:
    if int(shots) != shots or shots < 1:
        raise ValueError("shot count must be a positive integer")


@dataclass
class Counts:
    """Nonzero outcome histogram of one basis measurement."""

    n_qubits: int
    basis: str
    outcomes: np.ndarray  # computational-basis indices, ascending
    counts: np.ndarray

    @property
    def shots(self) -> int:
        return int(self.counts.sum())

    def bitstring(self, outcome: int) -> str:
        return format(int(outcome), f"0{self.n_qubits}b")

    def as_dict(self) -> dict[str, int]:
        return {self.bitstring(o): int(c) for o, c in zip(self.outcomes, self.counts)}

    def write_csv(self, path, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bitstring", "count"])
            for o, c in zip(self.outcomes, self.counts):
                w.writerow([self.bitstring(o), int(c)])


def rotate_to_basis(state: StateVector, basis: str) -> StateVector:
    """Map measurement of ``basis`` onto a computational-basis measurement."""
    n = n_qubits_of(state)
    if len(basis) != n:
        raise ValueError("basis length does not match the state")
    out = state
    for site, ch in enumerate(basis):
        if ch in _BASIS_GATES:
            out = apply_single_qubit(out, site, _BASIS_GATES[ch], n)
        elif ch not in "IZ":
            raise ValueError(f"invalid basis letter {ch!r}")
    return out


def sample_group(
    state: StateVector, group: MeasurementGroup, shots: int, seed: int, group_id: int = 0
) -> Counts:
    """Draw ``shots`` outcomes of ``state`` measured in the group's basis."""
    _check_shots(shots)
    group.check_basis()
    n = n_qubits_of(state)
    probs = np.abs(rotate_to_basis(state, group.basis)) ** 2
    probs /= probs.sum()
    rng = stream(seed, TAG_GROUP, group_id)
    hist = rng.multinomial(int(shots), probs)
    nz = np.flatnonzero(hist)
    return Counts(n, group.basis, nz.astype(np.int64), hist[nz].astype(np.int64))


def _compatible(basis: PauliString, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    supp = x | z
    return (((x ^ basis.x) | (z ^ basis.z)) & supp) == 0


def estimate_expvals(counts: Counts, xs: np.ndarray, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Means and standard errors of strings diagonal in the measured basis."""
    xs = np.asarray(xs, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    b = PauliString.from_label(counts.basis)
    if not np.all(_compatible(b, xs, zs)):
        raise ValueError(f"some strings are not measurable in basis {counts.basis}")
    supp = xs | zs
    par = np.bitwise_count(counts.outcomes[None, :] & supp[:, None]) & 1
    signs = 1.0 - 2.0 * par
    m = signs @ counts.counts / counts.shots
    return m, _binomial_stderr(m, counts.shots)


def _binomial_stderr(m: np.ndarray, shots: int) -> np.ndarray:
    return np.sqrt(np.clip(1.0 - m * m, 0.0, None) / shots)


def measure_grouped(
    state: StateVector, cp: CpSet, groups: Sequence[MeasurementGroup], shots: int, seed: int
) -> ExpvalTable:
    """Expectation values of a whole CP set from grouped basis measurements."""
    _check_shots(shots)
    means = np.full(len(cp), np.nan)
    stderr = np.zeros(len(cp))
    xs, zs = cp.xs, cp.zs
    for gid, g in enumerate(groups):
        counts = sample_group(state, g, shots, seed, gid)
        m, s = estimate_expvals(counts, xs[g.members], zs[g.members])
        means[g.members] = m
        stderr[g.members] = s
    ident = (xs | zs) == 0
    means[ident] = 1.0
    if np.any(np.isnan(means)):
        missing = int(np.flatnonzero(np.isnan(means))[0])
        raise ValueError(f"groups do not cover string {cp.string(missing).label}")
    return ExpvalTable(cp.n_qubits, cp.keys, means, stderr, shots, seed)


def measure_per_string(exact: ExpvalTable, shots: int, seed: int) -> ExpvalTable:
    """Independent ``shots``-shot estimate of every string in an exact table."""
    _check_shots(shots)
    rng = stream(seed, TAG_PER_STRING)
    p = (1.0 + np.clip(exact.means, -1.0, 1.0)) / 2.0
    m = 2.0 * rng.binomial(int(shots), p) / shots - 1.0
    ident = exact.keys == 0
    m[ident] = 1.0
    s = _binomial_stderr(m, shots)
    s[ident] = 0.0
    return ExpvalTable(exact.n_qubits, exact.keys, m, s, shots, seed)


def resample_table(table: ExpvalTable, seed: int, index: int = 0) -> ExpvalTable:
    """Perturb every mean by an independent normal draw of width ``stderr``."""
    rng = stream(seed, TAG_RESAMPLE, index)
    noise = rng.standard_normal(table.means.size) * table.stderr
    return table.with_means(table.means + noise)
