import numpy as np
import pytest

from mlakit.ocknn import OneClassKnn, ocknn_calibrate, ocknn_classify
from mlakit.svm import KernelSvm, svm_predict, svm_train, train_binary


def linear_gram(points):
    p = np.asarray(points, dtype=float)
    return p[:, None] * p[None, :]


def rbf_gram(points, gamma=1.0):
    p = np.asarray(points, dtype=float)
    return np.exp(-gamma * (p[:, None] - p[None, :]) ** 2)


class TestBinarySvm:
    def test_separable_pair(self):
        gram = linear_gram([-1.0, 1.0])
        model = svm_train(gram, np.array([-1, 1]))
        preds = [svm_predict(model, gram[i]) for i in range(2)]
        assert preds == [-1, 1]

    def test_boundary_at_midpoint(self):
        gram = linear_gram([-1.0, 1.0])
        m = train_binary(gram, np.array([1.0, -1.0]))
        assert m.bias == pytest.approx(0.0, abs=1e-9)
        # kernel row of the midpoint (coordinate 0) against both points
        assert m.decision(np.array([0.0, 0.0])) == pytest.approx(0.0, abs=1e-9)

    def test_conflicting_duplicate_saturates(self):
        gram = np.ones((2, 2))
        c = 1.0
        m = train_binary(gram, np.array([1.0, -1.0]), c=c)
        assert np.any(np.isclose(m.alphas, c, atol=1e-9))

    def test_dual_constraints_hold(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            pts = rng.normal(size=12)
            y = np.where(pts + 0.3 * rng.normal(size=12) > 0, 1.0, -1.0)
            if len(set(y)) < 2:
                continue
            c = 2.0
            m = train_binary(rbf_gram(pts), y, c=c)
            assert abs(np.dot(m.alphas, y)) < 1e-8
            assert np.all(m.alphas >= -1e-12)
            assert np.all(m.alphas <= c + 1e-12)

    def test_objective_non_decreasing(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=15)
        y = np.where(pts > 0, 1.0, -1.0)
        m = train_binary(rbf_gram(pts), y)
        diffs = np.diff(m.objective)
        assert np.all(diffs >= -1e-12)

    def test_kkt_residual_below_tol(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=20)
        y = np.where(np.abs(pts) > 0.6, 1.0, -1.0)
        if len(set(y)) < 2:
            y[0] = -y[0]
        tol = 1e-3
        kern = rbf_gram(pts)
        m = train_binary(kern, y, c=1.0, tol=tol)
        grad = y * (kern @ m.coef) - 1.0
        yg = -y * grad
        c = 1.0
        up = ((y > 0) & (m.alphas < c - 1e-9)) | ((y < 0) & (m.alphas > 1e-9))
        low = ((y > 0) & (m.alphas > 1e-9)) | ((y < 0) & (m.alphas < c - 1e-9))
        if up.any() and low.any():
            assert yg[up].max() - yg[low].min() < tol + 1e-9

    def test_free_support_vector_classified_correctly(self):
        rng = np.random.default_rng(3)
        pts = np.concatenate([rng.normal(-2, 0.3, 8), rng.normal(2, 0.3, 8)])
        y = np.array([-1.0] * 8 + [1.0] * 8)
        kern = rbf_gram(pts, gamma=0.5)
        m = train_binary(kern, y, c=1.0)
        free = (m.alphas > 1e-6) & (m.alphas < 1.0 - 1e-6)
        for i in np.where(free)[0]:
            assert np.sign(m.decision(kern[i])) == y[i]

    def test_scaling_invariance(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=10)
        y = np.where(pts > 0, 1.0, -1.0)
        kern = rbf_gram(pts)
        scale = 4.0
        m1 = train_binary(kern, y, c=1.0, tol=1e-6)
        m2 = train_binary(scale * kern, y, c=1.0 / scale, tol=1e-6 / scale)
        test_rows = rbf_gram(np.concatenate([pts, rng.normal(size=5)]))[10:, :10]
        d1 = np.array([m1.decision(r) for r in test_rows])
        d2 = np.array([m2.decision(scale * r) for r in test_rows])
        assert np.allclose(np.sign(d1), np.sign(d2))


class TestMulticlass:
    def test_three_clusters(self):
        rng = np.random.default_rng(5)
        pts = np.concatenate(
            [rng.normal(-4, 0.3, 10), rng.normal(0, 0.3, 10), rng.normal(4, 0.3, 10)]
        )
        labels = np.array([0] * 10 + [1] * 10 + [2] * 10)
        kern = rbf_gram(pts, gamma=0.8)
        model = svm_train(kern, labels)
        preds = [svm_predict(model, kern[i]) for i in range(30)]
        assert np.mean(np.array(preds) == labels) == 1.0

    def test_bias_decides_zero_row(self):
        gram = linear_gram([-1.0, 1.0])
        model = svm_train(gram, np.array([-1, 1]))
        zero = svm_predict(model, np.zeros(2))
        assert zero in (-1, 1)

    def test_row_length_checked(self):
        gram = linear_gram([-1.0, 1.0])
        model = svm_train(gram, np.array([-1, 1]))
        with pytest.raises(ValueError):
            svm_predict(model, np.zeros(3))

    def test_asymmetric_gram_rejected(self):
        with pytest.raises(ValueError):
            svm_train(np.array([[1.0, 0.5], [0.2, 1.0]]), np.array([0, 1]))

    def test_estimator_facade(self):
        rng = np.random.default_rng(6)
        pts = np.concatenate([rng.normal(-2, 0.4, 10), rng.normal(2, 0.4, 10)])
        y = np.array([0] * 10 + [1] * 10)
        kern = rbf_gram(pts)
        clf = KernelSvm(C=1.0).fit(kern, y)
        assert clf.get_params()["C"] == 1.0
        acc = np.mean(clf.predict(kern) == y)
        assert acc == 1.0


def euclid(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


class TestOcknn:
    def test_three_copies_accept(self):
        x = np.array([1.0, 2.0])
        train = [x.copy() for _ in range(3)]
        assert ocknn_classify(x, train, euclid, phi=0.0, k=3) == 1

    def test_phi_below_all_distances_rejects(self):
        train = [np.array([0.0]), np.array([1.0])]
        assert ocknn_classify(np.array([5.0]), train, euclid, phi=0.5, k=1) == 0

    def test_membership_monotone(self):
        rng = np.random.default_rng(7)
        train = [rng.normal(size=3) for _ in range(12)]
        for _ in range(50):
            x = rng.normal(size=3)
            phi = rng.uniform(0, 4)
            k = rng.integers(1, 12)
            base = ocknn_classify(x, train, euclid, phi, int(k))
            if base == 1:
                assert ocknn_classify(x, train, euclid, phi * 1.5, int(k)) == 1
                if k > 1:
                    assert ocknn_classify(x, train, euclid, phi, int(k) - 1) == 1

    def test_inclusion_properties_exact(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            train = [rng.normal(size=2) for _ in range(8)]
            data = [rng.normal(size=2) for _ in range(15)]
            phi1, phi2 = sorted(rng.uniform(0, 3, size=2))
            k_small, k_big = sorted(rng.integers(1, 8, size=2))
            s = {
                (phi, k): {
                    i
                    for i, x in enumerate(data)
                    if ocknn_classify(x, train, euclid, phi, int(k))
                }
                for phi in (phi1, phi2)
                for k in (k_small, k_big)
            }
            assert s[(phi1, k_big)] <= s[(phi1, k_small)]
            assert s[(phi1, k_small)] <= s[(phi2, k_small)]

    def test_identical_training_calibration(self):
        n = 6
        train = [np.array([2.0, 3.0])] * n
        phi_star, k_star, table = ocknn_calibrate(train, euclid)
        assert phi_star == 0.0
        assert k_star == n - 1

    def test_m_table_monotone(self):
        rng = np.random.default_rng(9)
        train = [rng.normal(size=2) for _ in range(10)]
        _, _, table = ocknn_calibrate(train, euclid)
        # non-decreasing along phi (rows), non-increasing along K (cols)
        assert np.all(np.diff(table, axis=0) >= -1e-12)
        assert np.all(np.diff(table, axis=1) <= 1e-12)

    def test_q_zero_beyond_k_star(self):
        rng = np.random.default_rng(10)
        train = [rng.normal(size=2) for _ in range(9)]
        phi_star, k_star, table = ocknn_calibrate(train, euclid)
        q = table.sum(axis=0)
        assert q[k_star - 1] > 0
        assert np.all(q[k_star:] == 0)

    def test_classifier_object_validates(self):
        with pytest.raises(ValueError):
            OneClassKnn([np.zeros(2)], euclid, phi=-1.0, k=1)
        with pytest.raises(ValueError):
            OneClassKnn([np.zeros(2)], euclid, phi=0.0, k=2)
