"""Pauli strings and weighted Pauli sums in symplectic bit form.

A string on ``n`` qubits is stored as two integer masks.  Site 0 is the
leftmost character of the text label and maps to the most significant bit of
each mask, so a mask doubles as a computational-basis index mask for
statevectors (see :mod:`piqae.statevector`).

Products are phase-tracked with exponents ``k`` of ``i**k``; strings
themselves are always phase-free (Hermitian Paulis).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

DROP_TOL = 1e-12

_PHASES = (1, 1j, -1, -1j)
_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTERS.items()}


def phase_value(k: int) -> complex:
    """Return ``i**k`` for an integer exponent."""
    return _PHASES[k % 4]


def _popcount(v: int) -> int:
    return v.bit_count()


def product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent ``k`` with ``P(x1, z1) P(x2, z2) = i**k P(x1^x2, z1^z2)``.

    Works on Python ints and on numpy integer arrays alike.  Cyclic site
    products (XY, YZ, ZX) contribute +1, anticyclic ones -1.
    """
    y1 = x1 & z1
    xo1 = x1 & ~z1
    zo1 = z1 & ~x1
    y2 = x2 & z2
    xo2 = x2 & ~z2
    zo2 = z2 & ~x2
    plus = (xo1 & y2) | (y1 & zo2) | (zo1 & xo2)
    minus = (xo1 & zo2) | (y1 & xo2) | (zo1 & y2)
    if isinstance(plus, (np.ndarray, np.integer)):
        return (np.bitwise_count(plus).astype(np.int64) - np.bitwise_count(minus)) % 4
    return (_popcount(plus) - _popcount(minus)) % 4


@dataclass(frozen=True, slots=True)
class PauliString:
    """Phase-free N-qubit Pauli string.

    ``x`` has the bit of site ``i`` set iff the site carries X or Y, ``z`` iff
    it carries Z or Y.  Bit of site ``i`` is ``1 << (n_qubits - 1 - i)``.
    """

    n_qubits: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("mask out of range for n_qubits")

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse a left-to-right site string such as ``"ZZIXI"``."""
        x = z = 0
        for ch in label:
            try:
                bx, bz = _BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}") from None
            x = (x << 1) | bx
            z = (z << 1) | bz
        return cls(len(label), x, z)

    @classmethod
    def from_sites(cls, n_qubits: int, sites: Mapping[int, str]) -> "PauliString":
        """Build a string from ``{site: letter}``; unlisted sites are identity."""
        x = z = 0
        for site, ch in sites.items():
            if not 0 <= site < n_qubits:
                raise ValueError(f"site {site} out of range")
            bx, bz = _BITS[ch]
            bit = 1 << (n_qubits - 1 - site)
            x |= bit * bx
            z |= bit * bz
        return cls(n_qubits, x, z)

    @property
    def label(self) -> str:
        n = self.n_qubits
        return "".join(
            _LETTERS[((self.x >> (n - 1 - i)) & 1, (self.z >> (n - 1 - i)) & 1)]
            for i in range(n)
        )

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"

    def letter(self, site: int) -> str:
        shift = self.n_qubits - 1 - site
        return _LETTERS[((self.x >> shift) & 1, (self.z >> shift) & 1)]

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        """Number of non-identity sites."""
        return _popcount(self.x | self.z)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def sort_key(self) -> tuple[int, int]:
        return (self.z, self.x)

    def __lt__(self, other: "PauliString") -> bool:
        return (self.n_qubits, self.z, self.x) < (other.n_qubits, other.z, other.x)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n`` matrix; intended for small-n checks only."""
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.ones((1, 1), dtype=complex)
        for ch in self.label:
            out = np.kron(out, single[ch])
        return out


def _check_same_size(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")


def multiply(a: PauliString, b: PauliString) -> tuple[int, PauliString]:
    """Return ``(k, c)`` with ``a @ b == i**k * c`` as matrices."""
    _check_same_size(a, b)
    k = product_phase(a.x, a.z, b.x, b.z)
    return k, PauliString(a.n_qubits, a.x ^ b.x, a.z ^ b.z)


def commutes(a: PauliString, b: PauliString) -> bool:
    _check_same_size(a, b)
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    """True iff on every site the letters agree or one of them is I."""
    _check_same_size(a, b)
    both = a.support_mask & b.support_mask
    return ((a.x ^ b.x) & both) == 0 and ((a.z ^ b.z) & both) == 0


class PauliOperator:
    """Weighted sum of Pauli strings, ``sum_j c_j P_j``.

    Terms are kept in canonical order (by ``(z, x)``), merged, and any
    coefficient with magnitude at or below ``DROP_TOL`` is removed.  Instances
    are treated as immutable.
    """

    __slots__ = ("n_qubits", "_terms")

    def __init__(self, n_qubits: int, terms: Mapping[PauliString, complex] | Iterable = ()):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        self.n_qubits = n_qubits
        acc: dict[PauliString, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for p, c in items:
            if p.n_qubits != n_qubits:
                raise ValueError(f"term {p} does not act on {n_qubits} qubits")
            acc[p] = acc.get(p, 0) + c
        self._terms = _clean(acc)

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[str, complex]]) -> "PauliOperator":
        pairs = [(PauliString.from_label(s), c) for s, c in pairs]
        if not pairs:
            raise ValueError("cannot infer qubit count from an empty term list")
        return cls(pairs[0][0].n_qubits, pairs)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliOperator":
        return cls(n_qubits, {PauliString.identity(n_qubits): coeff})

    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self._terms.items())

    def strings(self) -> list[PauliString]:
        return list(self._terms)

    def coeffs(self) -> np.ndarray:
        return np.array(list(self._terms.values()), dtype=complex)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self._terms == other._terms

    def __repr__(self) -> str:
        body = " + ".join(f"({_fmt(c)})*{p}" for p, c in self._terms.items())
        return f"PauliOperator({body or '0'})"

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return all(abs(complex(c).imag) <= atol for c in self._terms.values())

    def __add__(self, other: "PauliOperator") -> "PauliOperator":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        acc = dict(self._terms)
        for p, c in other._terms.items():
            acc[p] = acc.get(p, 0) + c
        return PauliOperator(self.n_qubits, acc)

    def __mul__(self, other):
        if isinstance(other, PauliOperator):
            return op_multiply(self, other)
        return PauliOperator(self.n_qubits, {p: c * other for p, c in self._terms.items()})

    def __rmul__(self, scalar):
        return self * scalar

    def __matmul__(self, other: "PauliOperator") -> "PauliOperator":
        return op_multiply(self, other)

    def power(self, k: int) -> "PauliOperator":
        if k < 0:
            raise ValueError("power must be non-negative")
        out = PauliOperator.identity(self.n_qubits)
        for _ in range(k):
            out = op_multiply(out, self)
        return out

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for p, c in self._terms.items():
            out += c * p.to_matrix()
        return out


def _fmt(c: complex) -> str:
    c = complex(c)
    return f"{c.real:g}" if c.imag == 0 else f"{c:g}"


def _clean(acc: dict[PauliString, complex]) -> dict[PauliString, complex]:
    kept = {p: c for p, c in acc.items() if abs(c) > DROP_TOL}
    return dict(sorted(kept.items(), key=lambda kv: kv[0].sort_key()))


def op_multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """Expand ``a @ b`` term by term, merging like strings."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    n = a.n_qubits
    acc: dict[tuple[int, int], complex] = {}
    for pa, ca in a._terms.items():
        for pb, cb in b._terms.items():
            key = (pa.x ^ pb.x, pa.z ^ pb.z)
            val = ca * cb * _PHASES[product_phase(pa.x, pa.z, pb.x, pb.z)]
            acc[key] = acc.get(key, 0) + val
    return PauliOperator(n, {PauliString(n, x, z): c for (x, z), c in acc.items()})


def string_set(op: PauliOperator) -> frozenset[PauliString]:
    """Phase-free support of ``op``."""
    return frozenset(op._terms)


def sorted_strings(strings: Iterable[PauliString]) -> list[PauliString]:
    return sorted(strings, key=PauliString.sort_key)
