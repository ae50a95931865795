import numpy as np
import pytest

from branchgrid import BranchNav, spherical_kmeans
from branchgrid.routing import _seed_centers


def rand_wf(rng, k=8):
    wf = np.abs(rng.normal(size=k)) + 0.01
    return wf / wf.sum()


def oracle_spherical(xn, centers0, max_iter=100):
    """Plain-loop spherical k-means for oracle comparison."""
    k = centers0.shape[0]
    centers = centers0.copy()
    labels = np.array([int(np.argmax([c @ v for c in centers])) for v in xn])
    for _ in range(max_iter):
        new_centers = centers.copy()
        empty = [c for c in range(k) if not np.any(labels == c)]
        for c in range(k):
            members = xn[labels == c]
            if len(members):
                m = members.mean(axis=0)
                new_centers[c] = m / np.linalg.norm(m)
        used = []
        for c in empty:
            occupied = [i for i in range(k) if i not in empty or i in used]
            sims = np.array([max(new_centers[i] @ v for i in occupied) for v in xn])
            new_centers[c] = xn[int(np.argmin(sims))]
            used.append(c)
        centers = new_centers
        new_labels = np.array([int(np.argmax([c @ v for c in centers])) for v in xn])
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels


class TestSphericalKmeans:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        wf = np.stack([rand_wf(rng) for _ in range(64)])
        centers, labels = spherical_kmeans(wf, 4, random_state=0)
        xn = wf / np.linalg.norm(wf, axis=1, keepdims=True)
        seed = _seed_centers(xn, 4, np.random.default_rng(0))
        oc, ol = oracle_spherical(xn, seed)
        assert np.array_equal(labels, ol)
        assert np.allclose(centers, oc, atol=1e-12)

    def test_separated_clusters_recovered(self):
        rng = np.random.default_rng(1)
        a = np.array([0.9, 0.05, 0.05, 0.0])
        b = np.array([0.0, 0.05, 0.05, 0.9])
        wf = np.stack([(a if i % 2 else b) + 0.01 * np.abs(rng.normal(size=4))
                       for i in range(40)])
        wf /= wf.sum(axis=1, keepdims=True)
        centers, labels = spherical_kmeans(wf, 2, random_state=0)
        for direction in (a, b):
            u = direction / np.linalg.norm(direction)
            best = max(float(c @ u) for c in centers)
            assert 1.0 - best < 0.01  # cosine distance to cluster mean direction
        assert len(np.unique(labels)) == 2

    def test_single_center_is_normalized_mean(self):
        rng = np.random.default_rng(2)
        wf = np.stack([rand_wf(rng) for _ in range(10)])
        centers, labels = spherical_kmeans(wf, 1, random_state=0)
        xn = wf / np.linalg.norm(wf, axis=1, keepdims=True)
        mean = xn.mean(axis=0)
        assert np.allclose(centers[0], mean / np.linalg.norm(mean), atol=1e-12)
        assert np.all(labels == 0)

    def test_centers_are_unit_rows(self):
        rng = np.random.default_rng(3)
        wf = np.stack([rand_wf(rng) for _ in range(30)])
        centers, _ = spherical_kmeans(wf, 3, random_state=1)
        assert np.allclose(np.linalg.norm(centers, axis=1), 1.0, atol=1e-12)


class TestObserve:
    def test_epoch_one_never_buffers(self):
        nav = BranchNav(2, n_buffer=4)
        rng = np.random.default_rng(4)
        for _ in range(10):
            nav.observe(rand_wf(rng))
        assert nav.buffer_ == []
        assert nav.centers_ is None

    def test_capacity_triggers_kernel(self):
        nav = BranchNav(2, n_buffer=4).advance_epoch()
        rng = np.random.default_rng(5)
        for i in range(3):
            nav.observe(rand_wf(rng))
        assert nav.centers_ is None and len(nav.buffer_) == 3
        nav.observe(rand_wf(rng))
        assert nav.centers_ is not None
        assert nav.buffer_ == []

    def test_no_buffering_after_init(self):
        nav = BranchNav(2, n_buffer=4).advance_epoch()
        rng = np.random.default_rng(6)
        for _ in range(4):
            nav.observe(rand_wf(rng))
        nav.observe(rand_wf(rng))
        assert nav.buffer_ == []


class TestInitKernel:
    def test_requires_enough_vectors(self):
        nav = BranchNav(3, n_buffer=8).advance_epoch()
        nav.observe(rand_wf(np.random.default_rng(7)))
        with pytest.raises(ValueError):
            nav.init_kernel()

    def test_identical_vectors_degenerate(self):
        nav = BranchNav(2, n_buffer=8).advance_epoch()
        wf = np.full(4, 0.25)
        for _ in range(3):
            nav.buffer_.append(wf.copy())
        nav.init_kernel()
        assert nav.centers_.shape == (2, 4)
        # duplicate centers: ties go to branch 0, then the balance rule
        # alternates through the least-used branch
        seq = [nav.route(wf) for _ in range(6)]
        assert seq[0] == 0
        assert set(seq) == {0, 1}
        assert abs(int(nav.routing_counts_[0]) - int(nav.routing_counts_[1])) <= 1


class TestRoute:
    def test_uninitialized_least_used(self):
        nav = BranchNav(3)
        nav.routing_counts_ = np.array([5, 2, 2], dtype=np.int64)
        assert nav.route(np.array([1.0, 0, 0, 0])) == 1

    def test_ratio_rule_overrides_kernel(self):
        nav = BranchNav(2)
        nav.centers_ = np.eye(2)
        nav.routing_counts_ = np.array([10, 3], dtype=np.int64)
        wf = np.array([0.9, 0.1])  # kernel would say 0
        assert nav.route(wf) == 1

    def test_kernel_assignment_when_balanced(self):
        nav = BranchNav(2)
        nav.centers_ = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        nav.routing_counts_ = np.array([10, 9], dtype=np.int64)
        assert nav.route(np.array([0.9, 0.1, 0.0])) == 0

    def test_zero_min_count_is_infinite_imbalance(self):
        nav = BranchNav(2)
        nav.centers_ = np.eye(2)
        nav.routing_counts_ = np.array([4, 0], dtype=np.int64)
        assert nav.route(np.array([0.9, 0.1])) == 1

    def test_all_zero_counts_balanced_uses_kernel(self):
        nav = BranchNav(2)
        nav.centers_ = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert nav.route(np.array([0.1, 0.9])) == 1

    def test_count_conservation_and_sparsity(self):
        nav = BranchNav(4)
        rng = np.random.default_rng(8)
        n = 100
        for _ in range(n):
            b = nav.route(rand_wf(rng))
            assert 0 <= b < 4
        assert nav.routing_counts_.sum() == n

    def test_stable_under_balanced_counts(self):
        nav = BranchNav(2)
        nav.centers_ = np.array([[1.0, 0.0], [0.0, 1.0]])
        nav.routing_counts_ = np.array([5, 5], dtype=np.int64)
        wf = np.array([0.2, 0.8])
        first = nav.route(wf)
        nav.routing_counts_ = np.array([5, 5], dtype=np.int64)
        assert nav.route(wf) == first

    def test_balance_bound_property(self):
        # whenever the ratio exceeds the threshold, the next sample goes to
        # the current least-used branch
        nav = BranchNav(2)
        nav.centers_ = np.eye(2)
        rng = np.random.default_rng(9)
        for _ in range(200):
            counts = nav.routing_counts_.copy()
            wf = rand_wf(rng, 2)
            chosen = nav.route(wf)
            if counts.max() > 0 and (counts.min() == 0
                                     or counts.max() / counts.min() > 3):
                assert chosen == int(np.argmin(counts))


class TestEpochs:
    def test_advance_enables_buffering(self):
        nav = BranchNav(2)
        assert not nav.buffering_enabled
        nav.advance_epoch()
        assert nav.buffering_enabled

    def test_epoch_strictly_increases(self):
        nav = BranchNav(2)
        epochs = [nav.epoch_]
        for _ in range(3):
            nav.advance_epoch()
            epochs.append(nav.epoch_)
        assert epochs == [1, 2, 3, 4]

    def test_centers_survive_epochs(self):
        nav = BranchNav(2, n_buffer=4).advance_epoch()
        rng = np.random.default_rng(10)
        for _ in range(4):
            nav.observe(rand_wf(rng))
        centers = nav.centers_.copy()
        nav.advance_epoch()
        assert np.array_equal(nav.centers_, centers)


class TestStatePersistence:
    def test_save_load_roundtrip(self, tmp_path):
        nav = BranchNav(3, n_buffer=6, random_state=2).advance_epoch()
        rng = np.random.default_rng(11)
        for _ in range(6):
            nav.observe(rand_wf(rng))
        for _ in range(5):
            nav.route(rand_wf(rng))
        path = tmp_path / "nav.json"
        nav.save(path)
        back = BranchNav.load(path)
        assert back.n_branch == 3
        assert back.epoch_ == nav.epoch_
        assert np.array_equal(back.routing_counts_, nav.routing_counts_)
        assert np.allclose(back.centers_, nav.centers_, atol=1e-6)

    def test_get_params(self):
        nav = BranchNav(4, n_buffer=32, balance_ratio=2.5, random_state=3)
        params = nav.get_params()
        assert params["n_branch"] == 4
        assert params["n_buffer"] == 32
        assert params["balance_ratio"] == 2.5
