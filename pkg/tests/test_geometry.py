import math

import numpy as np
import pytest

from svplab import geometry as geo


def strip_domain(lateral=("neumann", "neumann"), alpha=1.0, beta=3.0):
    return geo.CanonicalDomain(n=2, k=1, base=((0.0, 1.0),), axial_kind="layer",
                               alpha=alpha, beta=beta, lateral_bc=lateral)


def radial_domain(alpha=1.0, beta=3.0, L=1.0):
    return geo.CanonicalDomain(n=3, k=1, base=((0.0, L),), axial_kind="radial",
                               alpha=alpha, beta=beta, lateral_bc=("neumann", "neumann"))


class TestAxialDistance:
    def test_single_coordinate(self):
        assert geo.axial_distance(strip_domain(), (0.3, 2.0)) == 2.0

    def test_two_coordinate(self):
        d = radial_domain()
        assert geo.axial_distance(d, (1.0, 2.0, 2.0)) == pytest.approx(math.sqrt(8.0), rel=1e-15)

    def test_shifted_midline(self):
        d = strip_domain(alpha=1.0, beta=3.0)  # center 2
        assert geo.axial_distance(d, (0.7, 2.0), shifted=True) == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            geo.axial_distance(strip_domain(), (1.0, 2.0, 3.0))


class TestDomainValidation:
    def test_alpha_beta_order(self):
        with pytest.raises(ValueError):
            strip_domain(alpha=3.0, beta=1.0)

    def test_beta_star(self):
        assert strip_domain(alpha=1.0, beta=7.0).beta_star == 3.0

    def test_layer_needs_n_minus_k_one(self):
        with pytest.raises(ValueError):
            geo.CanonicalDomain(n=3, k=1, base=((0.0, 1.0),), axial_kind="layer",
                                alpha=1.0, beta=3.0, lateral_bc=("neumann", "neumann"))

    def test_lateral_partition_size(self):
        with pytest.raises(ValueError):
            strip_domain(lateral=("neumann",))

    def test_bad_lateral_kind(self):
        with pytest.raises(ValueError):
            strip_domain(lateral=("neumann", "clamped"))


class TestBuildMesh:
    def test_node_and_element_counts(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        assert mesh.n_nodes == 15
        assert mesh.n_elems == 8

    def test_fine_counts(self):
        mesh = geo.build_mesh(strip_domain(), 1.0 / 64.0)
        assert mesh.grid.shape == (65, 129)

    def test_zero_resolution(self):
        with pytest.raises(ValueError):
            geo.build_mesh(strip_domain(), 0.0)

    def test_non_divisible_rounds_up(self):
        mesh = geo.build_mesh(strip_domain(), 0.3)
        # 1/0.3 -> 4 cells, 2/0.3 -> 7 cells; actual spacings reported
        assert mesh.grid.cell_shape == (4, 7)
        assert mesh.spacings[0] == pytest.approx(0.25)

    def test_stations_hit_exact_multiples(self):
        mesh = geo.build_mesh(strip_domain(alpha=1.0, beta=7.0), 1.0 / 64.0)
        j, snap = mesh.station_index(0.25)
        assert snap == 0.0
        assert mesh.stations[j] == 0.25


class TestCrossSection:
    def test_exact_station(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        sec = mesh.cross_section(0.0)
        assert sec.snap_distance == 0.0
        assert sec.volume_node_ids.size == 3
        assert np.allclose(mesh.grid.nodes[sec.volume_node_ids][:, 1], 0.0)

    def test_snaps_to_nearest(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        # stations are -1, -0.5, 0, 0.5, 1: nearest line to 0.24 is 0.0
        sec = mesh.cross_section(0.24)
        assert sec.tau == 0.0
        assert sec.snap_distance == pytest.approx(0.24)
        sec2 = mesh.cross_section(0.26)
        assert sec2.tau == 0.5
        assert sec2.snap_distance == pytest.approx(0.24)

    def test_out_of_range(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        with pytest.raises(ValueError):
            mesh.cross_section(2.0)

    def test_snap_idempotent(self):
        mesh = geo.build_mesh(strip_domain(), 0.25)
        rng = np.random.default_rng(7)
        for tau in rng.uniform(-1.0, 1.0, size=20):
            sec = mesh.cross_section(tau)
            again = mesh.cross_section(sec.tau)
            assert again.snap_distance == 0.0
            assert np.array_equal(sec.volume_node_ids, again.volume_node_ids)

    def test_dirichlet_trace_set(self):
        mesh = geo.build_mesh(strip_domain(lateral=("dirichlet0", "neumann")), 0.25)
        sec = mesh.cross_section(0.0)
        assert sec.dirichlet_ids.tolist() == [0]

    def test_radial_section_is_periodic_cylinder(self):
        mesh = geo.build_mesh(radial_domain(), 0.25)
        sec = mesh.cross_section(2.0)
        assert sec.grid.periodic == (False, True)
        # arc axis circumference is 2 pi tau
        m = sec.grid.shape[1]
        circumference = m * sec.grid.spacing[1]
        assert circumference == pytest.approx(2.0 * math.pi * 2.0, rel=1e-12)


class TestSlab:
    def test_whole_range(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        assert geo.slab(mesh, -1.0, 1.0).size == mesh.n_elems

    def test_counting(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        assert geo.slab(mesh, 0.0, 0.5).size == 2

    def test_empty_interval(self):
        mesh = geo.build_mesh(strip_domain(), 0.5)
        with pytest.raises(ValueError):
            geo.slab(mesh, 0.2, 0.2)

    def test_partition(self):
        mesh = geo.build_mesh(strip_domain(), 0.25)
        whole = set(geo.slab(mesh, -1.0, 1.0).tolist())
        left = set(geo.slab(mesh, -1.0, 0.25).tolist())
        right = set(geo.slab(mesh, 0.25, 1.0).tolist())
        assert left | right == whole
        assert not (left & right)

    def test_measure_layer(self):
        mesh = geo.build_mesh(strip_domain(), 0.25)
        w = mesh.grid.quad_weights[geo.slab(mesh, -0.5, 0.75)]
        assert np.sum(w) == pytest.approx(1.0 * 1.25, rel=1e-13)

    def test_measure_radial(self):
        mesh = geo.build_mesh(radial_domain(L=0.5), 0.125)
        t, tau = 1.5, 2.5
        w = mesh.grid.quad_weights[geo.slab(mesh, t, tau)]
        expected = 2.0 * math.pi * 0.5 * (tau**2 - t**2) / 2.0
        assert np.sum(w) == pytest.approx(expected, rel=1e-13)

    def test_radial_weights_positive(self):
        mesh = geo.build_mesh(radial_domain(), 0.25)
        assert np.all(mesh.grid.quad_weights > 0)


class TestSliceIndex:
    def test_stations_cover_all_nodes_once(self):
        mesh = geo.build_mesh(strip_domain(), 0.25)
        seen = np.zeros(mesh.n_nodes, dtype=int)
        for j in range(mesh.stations.size):
            seen[mesh.station_node_ids(j)] += 1
        assert np.all(seen == 1)
