"""Qubit-wise commuting measurement groups by greedy graph coloring.

Vertices are strings; two strings conflict when they do not commute
qubit-wise.  Vertices are colored largest-degree first, each taking the
smallest color not used by a neighbor.  A color class is tracked by its
accumulated per-site basis, so "no neighbor has color c" reduces to "the
string agrees with the basis of c on its support".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fgks import CpSet
from .pauli import PauliString

DEGREE_BLOCK = 512
MAX_GROUPING_STRINGS = 60_000


@dataclass
class MeasurementGroup:
    members: np.ndarray  # indices into the grouped collection
    basis: str  # per-site letter; sites no member touches default to Z
    xs: np.ndarray | None = None  # member masks, in member order
    zs: np.ndarray | None = None

    def check_basis(self) -> None:
        """Raise if a member string is not diagonal in the group's basis."""
        if self.xs is None:
            return
        b = PauliString.from_label(self.basis)
        bad = _conflicts(self.xs, self.zs, np.int64(b.x), np.int64(b.z))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            p = PauliString(len(self.basis), int(self.xs[i]), int(self.zs[i]))
            raise ValueError(f"group member {p.label} conflicts with basis {self.basis}")

    @property
    def size(self) -> int:
        return self.members.size


def _conflicts(x1, z1, x2, z2):
    both = (x1 | z1) & (x2 | z2)
    return (((x1 ^ x2) | (z1 ^ z2)) & both) != 0


def conflict_degrees(xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Number of non-qubit-wise-commuting partners of every string."""
    deg = np.zeros(xs.size, dtype=np.int64)
    for start in range(0, xs.size, DEGREE_BLOCK):
        sl = slice(start, start + DEGREE_BLOCK)
        c = _conflicts(xs[sl, None], zs[sl, None], xs[None, :], zs[None, :])
        deg[sl] = c.sum(axis=1)
    return deg


def _basis_label(n: int, gx: int, gz: int) -> str:
    out = []
    for i in range(n):
        bit = 1 << (n - 1 - i)
        out.append({(0, 0): "Z", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}[(bool(gx & bit), bool(gz & bit))])
    return "".join(out)


def greedy_color(xs: np.ndarray, zs: np.ndarray, n_qubits: int) -> list[MeasurementGroup]:
    xs = np.asarray(xs, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    if xs.size > MAX_GROUPING_STRINGS:
        raise ValueError(
            f"{xs.size} strings exceed the grouping limit of {MAX_GROUPING_STRINGS}; measure per string instead"
        )
    deg = conflict_degrees(xs, zs)
    order = np.lexsort((np.arange(xs.size), -deg))
    gx: list[int] = []
    gz: list[int] = []
    members: list[list[int]] = []
    ax = np.zeros(0, dtype=np.int64)
    az = np.zeros(0, dtype=np.int64)
    for v in order:
        x, z = int(xs[v]), int(zs[v])
        supp = x | z
        ok = (((ax ^ x) | (az ^ z)) & supp & (ax | az)) == 0
        hit = np.flatnonzero(ok)
        if hit.size:
            c = int(hit[0])
            gx[c] |= x
            gz[c] |= z
            ax[c], az[c] = gx[c], gz[c]
            members[c].append(int(v))
        else:
            gx.append(x)
            gz.append(z)
            members.append([int(v)])
            ax = np.append(ax, x)
            az = np.append(az, z)
    out = []
    for m, bx, bz in zip(members, gx, gz):
        idx = np.array(sorted(m), dtype=np.int64)
        out.append(MeasurementGroup(idx, _basis_label(n_qubits, bx, bz), xs[idx], zs[idx]))
    return out


def group_strings(strings: CpSet | Sequence[PauliString]) -> list[MeasurementGroup]:
    """Partition strings into qubit-wise commuting groups.

    For a :class:`CpSet` the identity is skipped (it needs no measurement)
    and member indices refer to CP positions; for a plain sequence they refer
    to sequence positions.
    """
    if isinstance(strings, CpSet):
        xs, zs = strings.xs, strings.zs
        keep = np.flatnonzero((xs | zs) != 0)
        groups = greedy_color(xs[keep], zs[keep], strings.n_qubits)
        for g in groups:
            g.members = keep[g.members]
        return groups
    strings = list(strings)
    if not strings:
        return []
    n = strings[0].n_qubits
    xs = np.array([p.x for p in strings], dtype=np.int64)
    zs = np.array([p.z for p in strings], dtype=np.int64)
    return greedy_color(xs, zs, n)


def tfim_group_bound(n: int) -> int:
    """Loose K=1 TFIM upper bound on the number of groups."""
    if n < 2:
        raise ValueError("bound defined for N >= 2")
    return 8 * n + 3


def validate_groups(groups: Sequence[MeasurementGroup], xs: np.ndarray, zs: np.ndarray) -> None:
    """Raise if a group is not qubit-wise commuting or disagrees with its basis."""
    for gid, g in enumerate(groups):
        mx, mz = xs[g.members], zs[g.members]
        if np.any(_conflicts(mx[:, None], mz[:, None], mx[None, :], mz[None, :])):
            raise ValueError(f"group {gid} contains non-commuting strings")
        b = PauliString.from_label(g.basis)
        if np.any(_conflicts(mx, mz, np.int64(b.x), np.int64(b.z))):
            raise ValueError(f"group {gid} members disagree with basis {g.basis}")


def write_groups_csv(path, groups: Sequence[MeasurementGroup], header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", "size", "basis_string"])
        for gid, g in enumerate(groups):
            w.writerow([gid, g.size, g.basis])
