"""Coupling graphs and mixed-field Ising Hamiltonians on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .pauli import PauliOperator, PauliString

# ibmq_quito (5 qubits, T-shape)
QUITO_EDGES = ((0, 1), (1, 2), (1, 3), (3, 4))

# ibmq_guadalupe heavy-hex coupling map (16 qubits)
GUADALUPE_EDGES = (
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7),
    (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14),
)


@dataclass(frozen=True)
class CouplingGraph:
    n_sites: int
    edges: tuple[tuple[int, int], ...]
    name: str = "custom"

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        seen = set()
        norm = []
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at site {i}")
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ValueError(f"edge ({i}, {j}) outside [0, {self.n_sites})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))

    def to_edge_list(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in self.edges)

    @classmethod
    def from_edge_list(cls, text: str, n_sites: int | None = None, name: str = "custom") -> "CouplingGraph":
        edges = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            i, j = (int(t) for t in line.split())
            edges.append((i, j))
        if n_sites is None:
            n_sites = 1 + max(max(e) for e in edges) if edges else 1
        return cls(n_sites, tuple(edges), name)


def chain(n: int) -> CouplingGraph:
    if n < 2:
        raise ValueError("chain needs at least 2 sites")
    return CouplingGraph(n, tuple((i, i + 1) for i in range(n - 1)), f"chain{n}")


def square(rows: int, cols: int) -> CouplingGraph:
    """Open-boundary square lattice, sites numbered row-major."""
    if rows < 2 or cols < 2:
        raise ValueError("square lattice needs rows, cols >= 2")
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            if r + 1 < rows:
                edges.append((s, s + cols))
    return CouplingGraph(rows * cols, tuple(edges), f"square{rows}x{cols}")


def quito() -> CouplingGraph:
    return CouplingGraph(5, QUITO_EDGES, "quito")


def guadalupe() -> CouplingGraph:
    return CouplingGraph(16, GUADALUPE_EDGES, "guadalupe")


def build_graph(kind: str, dims: Iterable[int] = ()) -> CouplingGraph:
    dims = tuple(dims)
    if kind == "chain":
        if len(dims) != 1:
            raise ValueError("chain takes one dimension")
        return chain(*dims)
    if kind == "square":
        if len(dims) != 2:
            raise ValueError("square takes two dimensions")
        return square(*dims)
    if kind in ("quito", "guadalupe"):
        if dims:
            raise ValueError(f"{kind} takes no dimensions")
        return quito() if kind == "quito" else guadalupe()
    raise ValueError(f"unknown lattice kind {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """``H = J sum_<ij> Z_i Z_j + sum_i (h_x X_i + h_z Z_i)``."""

    graph: CouplingGraph
    J: float = -1.0
    h_x: float = -1.0
    h_z: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites

    @property
    def is_tfim(self) -> bool:
        return self.h_z == 0

    @property
    def name(self) -> str:
        kind = "tfim" if self.is_tfim else "mfim"
        return f"{self.graph.name}_{kind}"


def zz_string(n: int, i: int, j: int) -> PauliString:
    return PauliString.from_sites(n, {i: "Z", j: "Z"})


def build_hamiltonian(spec: ModelSpec) -> PauliOperator:
    n = spec.n_sites
    terms = [(zz_string(n, i, j), spec.J) for i, j in spec.graph.edges]
    for i in range(n):
        terms.append((PauliString.from_sites(n, {i: "X"}), spec.h_x))
        if spec.h_z != 0:
            terms.append((PauliString.from_sites(n, {i: "Z"}), spec.h_z))
    return PauliOperator(n, terms)
