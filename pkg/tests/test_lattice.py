import numpy as np
import pytest

from piqae.lattice import (
    CouplingGraph,
    ModelSpec,
    build_graph,
    build_hamiltonian,
    chain,
    guadalupe,
    quito,
    square,
)
from piqae.statevector import ground_state_ed


def test_graph_sizes():
    assert len(chain(5).edges) == 4
    assert len(square(4, 4).edges) == 24
    assert square(3, 3).n_sites == 9
    assert quito().n_sites == 5 and len(quito().edges) == 4
    assert guadalupe().n_sites == 16 and len(guadalupe().edges) == 16


def test_graph_validation():
    with pytest.raises(ValueError):
        CouplingGraph(3, ((0, 0),))
    with pytest.raises(ValueError):
        CouplingGraph(3, ((0, 5),))
    with pytest.raises(ValueError):
        build_graph("torus", (2, 2))
    g = CouplingGraph.from_edge_list(chain(4).to_edge_list())
    assert g.edges == chain(4).edges


def test_hamiltonian_terms():
    spec = ModelSpec(chain(4), J=-1.0, h_x=-1.0, h_z=0.5)
    H = build_hamiltonian(spec)
    assert len(H) == 3 + 4 + 4
    assert ModelSpec(chain(4)).is_tfim and not spec.is_tfim
    assert len(build_hamiltonian(ModelSpec(chain(4)))) == 7


def test_two_site_tfim_ground_energy():
    ed = ground_state_ed(build_hamiltonian(ModelSpec(chain(2))))
    assert ed.ground_energy == pytest.approx(-np.sqrt(5), abs=1e-12)


def test_square_lattice_uses_open_boundaries():
    spec = ModelSpec(square(2, 3))
    H = build_hamiltonian(spec).to_matrix()
    assert ground_state_ed(build_hamiltonian(spec)).ground_energy == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-9)
    assert set(spec.graph.edges) == {(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)}
