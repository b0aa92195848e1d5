"""Fleet clustering: capacity metric, K-means, head election."""

import json
import math

import numpy as np
import pytest

from nacqfl.topology import (Cluster, DeviceProfile, _kmeans, channel_capacity,
                             distance_metric, elect_head, form_clusters,
                             kmeans_cluster, load_fleet)

from conftest import simple_calibration


def make_device(device_id, x, y, link=(0.01, 0.01, 0.02), resources=0.5, capacity=5):
    return DeviceProfile(
        id=device_id, capacity=capacity, position=(x, y),
        calibration=simple_calibration(capacity),
        classical_resources=resources, link_pauli=link, quantum_volume=8)


def two_group_fleet():
    devices = []
    for i, (x, y) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
        devices.append(make_device(f"a{i}", x, y))
    for i, (x, y) in enumerate([(100, 0), (101, 0), (100, 1), (101, 1)]):
        devices.append(make_device(f"b{i}", x, y))
    return devices


class TestChannelCapacity:
    def test_noiseless_link(self):
        assert channel_capacity((0.0, 0.0, 0.0)) == pytest.approx(2.0)

    def test_uniform_pauli_link_has_zero_capacity(self):
        assert channel_capacity((0.25, 0.25, 0.25)) == pytest.approx(0.0, abs=1e-12)

    def test_mild_link_matches_entropy_oracle(self):
        # independent evaluation of 2 - H(0.85, 0.05, 0.05, 0.05) in bits
        q = [0.85, 0.05, 0.05, 0.05]
        entropy = -sum(v * math.log2(v) for v in q)
        want = 2.0 - entropy
        assert channel_capacity((0.05, 0.05, 0.05)) == pytest.approx(want, abs=1e-12)
        assert want == pytest.approx(1.152416, abs=1e-6)

    def test_invalid_probabilities(self):
        with pytest.raises(ValueError):
            channel_capacity((-0.1, 0.0, 0.0))
        with pytest.raises(ValueError):
            channel_capacity((0.6, 0.3, 0.3))


class TestDistanceMetric:
    def test_ideal_pair(self):
        assert distance_metric(0.0, 2.0, d_max=10.0) == pytest.approx(0.0)

    def test_worst_pair(self):
        assert distance_metric(10.0, 0.0, d_max=10.0) == pytest.approx(1.0)

    def test_midpoint(self):
        assert distance_metric(5.0, 1.0, d_max=10.0, alpha=0.5) == pytest.approx(0.5)

    def test_zero_diameter_fleet(self):
        assert distance_metric(0.0, 1.0, d_max=0.0) == pytest.approx(0.25)

    def test_validation(self):
        with pytest.raises(ValueError):
            distance_metric(-1.0, 1.0, d_max=1.0)
        with pytest.raises(ValueError):
            distance_metric(1.0, 3.0, d_max=1.0)


class TestKmeans:
    def test_two_separated_groups_recovered(self):
        devices = two_group_fleet()
        clusters = kmeans_cluster(devices, 2, seed=3)
        groups = sorted(tuple(sorted(c.members)) for c in clusters)
        assert groups == [("a0", "a1", "a2", "a3"), ("b0", "b1", "b2", "b3")]

    def test_each_device_its_own_cluster(self):
        devices = two_group_fleet()
        clusters = kmeans_cluster(devices, len(devices), seed=1)
        sizes = sorted(len(c.members) for c in clusters)
        assert sizes == [1] * len(devices)
        covered = sorted(m for c in clusters for m in c.members)
        assert covered == sorted(d.id for d in devices)

    def test_deterministic_given_seed(self):
        devices = two_group_fleet()
        a = kmeans_cluster(devices, 3, seed=9)
        b = kmeans_cluster(devices, 3, seed=9)
        assert [c.members for c in a] == [c.members for c in b]

    def test_partition_property(self, fleet):
        for n in (2, 4, 6):
            clusters = kmeans_cluster(fleet, n, seed=5)
            members = [m for c in clusters for m in c.members]
            assert sorted(members) == sorted(d.id for d in fleet)
            assert len(members) == len(set(members))

    def test_objective_non_increasing(self, fleet):
        from nacqfl.topology import _features

        feats = np.array([_features(d) for d in fleet])
        for seed in range(1, 11):
            _, _, objective = _kmeans(feats, 3, seed=seed, max_iter=50, alpha=0.5)
            diffs = np.diff(objective)
            assert (diffs <= 1e-9).all(), (seed, objective)

    def test_bounds_validated(self):
        devices = two_group_fleet()
        with pytest.raises(ValueError):
            kmeans_cluster(devices, 0, seed=1)
        with pytest.raises(ValueError):
            kmeans_cluster(devices, len(devices) + 1, seed=1)


class TestElectHead:
    def test_single_member(self):
        devices = [make_device("solo", 0, 0)]
        cluster = Cluster("C1", ("solo",))
        assert elect_head(cluster, devices)[0] == "solo"

    def test_tradeoff_between_link_and_resources(self):
        # A: best link, weak compute; B: weaker link, best compute
        devices = [
            make_device("a", 0, 0, link=(0.0, 0.0, 0.0), resources=0.2),
            make_device("b", 1, 0, link=(0.1, 0.1, 0.1), resources=1.0),
        ]
        ce_b = channel_capacity((0.1, 0.1, 0.1)) / 2.0  # normalized by a's perfect link
        cluster = Cluster("C1", ("a", "b"))
        head, score = elect_head(cluster, devices, lambda_mix=0.5)
        # scores: a = 0.5*1 + 0.5*0.2 = 0.6, b = 0.5*ce_b + 0.5*1
        expected_b = 0.5 * ce_b + 0.5
        assert head == ("b" if expected_b > 0.6 else "a")
        assert score == pytest.approx(max(0.6, expected_b))

    def test_all_identical_breaks_ties_lexicographically(self):
        devices = [make_device(n, 0, 0) for n in ("zeta", "beta", "alpha")]
        cluster = Cluster("C1", ("zeta", "beta", "alpha"))
        assert elect_head(cluster, devices)[0] == "alpha"

    def test_resource_scaling_invariance(self):
        devices = [
            make_device("a", 0, 0, link=(0.02, 0.0, 0.0), resources=0.3),
            make_device("b", 1, 0, link=(0.05, 0.0, 0.0), resources=0.9),
        ]
        cluster = Cluster("C1", ("a", "b"))
        head1, _ = elect_head(cluster, devices)
        scaled = [
            make_device("a", 0, 0, link=(0.02, 0.0, 0.0), resources=3.0),
            make_device("b", 1, 0, link=(0.05, 0.0, 0.0), resources=9.0),
        ]
        head2, _ = elect_head(cluster, scaled)
        assert head1 == head2

    def test_lambda_range(self):
        devices = [make_device("a", 0, 0)]
        cluster = Cluster("C1", ("a",))
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                elect_head(cluster, devices, lambda_mix=bad)


class TestFormClusters:
    def test_heads_belong_to_their_clusters(self, fleet):
        for c in form_clusters(fleet, 3, seed=2):
            assert c.head in c.members
            assert c.head_score is not None

    def test_bundled_fleet_shape(self, fleet):
        assert len(fleet) == 18
        assert all(d.capacity >= 5 for d in fleet)
        assert all(d.quantum_volume is not None for d in fleet)


class TestDeviceProfileIO:
    def test_round_trip(self):
        dev = make_device("rt", 1.5, -2.5)
        again = DeviceProfile.from_dict(dev.to_dict())
        assert again == dev

    def test_capacity_must_match_calibration(self):
        with pytest.raises(ValueError):
            DeviceProfile(id="bad", capacity=3, position=(0, 0),
                          calibration=simple_calibration(2),
                          classical_resources=0.5, link_pauli=(0, 0, 0))

    def test_load_fleet_file(self, tmp_path, fleet):
        path = tmp_path / "fleet.json"
        path.write_text(json.dumps([d.to_dict() for d in fleet[:3]]))
        loaded = load_fleet(path)
        assert loaded == fleet[:3]
