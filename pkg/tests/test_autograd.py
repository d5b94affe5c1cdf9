import numpy as np
import pytest

from qent import autograd as ag

EPS = 1e-5
REL_TOL = 1e-4


def finite_diff_check(build_loss, params, rng, probes=4):
    """Central finite differences against analytic gradients at random entries."""
    for p in params:
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    grads = [p.grad.copy() for p in params]
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        idxs = rng.choice(flat.size, size=min(probes, flat.size), replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + EPS
            hi = build_loss().item()
            flat[i] = orig - EPS
            lo = build_loss().item()
            flat[i] = orig
            fd = (hi - lo) / (2 * EPS)
            an = g.reshape(-1)[i]
            denom = max(abs(fd), abs(an), 1e-8)
            assert abs(fd - an) / denom < REL_TOL, (fd, an)


def rand_tensor(rng, shape, scale=1.0, grad=True):
    return ag.Tensor(rng.normal(size=shape) * scale, requires_grad=grad)


class TestElementwise:
    def test_relu_values(self):
        t = ag.relu(ag.Tensor([-1.0, 0.0, 2.0]))
        assert np.array_equal(t.data, [0.0, 0.0, 2.0])

    def test_sigmoid_values(self):
        t = ag.sigmoid(ag.Tensor([0.0, 10.0, -10.0]))
        assert t.data[0] == 0.5
        assert 0.0 < t.data[2] < t.data[1] < 1.0

    def test_square_values_and_grad(self):
        x = ag.Tensor([-2.0, 3.0], requires_grad=True)
        out = ag.mean(ag.square(x))
        assert np.array_equal(out.data, np.array(6.5))
        out.backward()
        assert np.allclose(x.grad, [-2.0, 3.0])

    def test_inputs_not_mutated(self):
        x = ag.Tensor([-1.0, 2.0], requires_grad=True)
        snapshot = x.data.copy()
        out = ag.mean(ag.absolute(ag.sigmoid(ag.relu(x))))
        out.backward()
        assert np.array_equal(x.data, snapshot)


class TestDense:
    def test_identity_weights(self):
        x = ag.Tensor([[1.0, 2.0], [3.0, 4.0]])
        w = ag.Tensor(np.eye(2))
        b = ag.Tensor(np.zeros(2))
        assert np.array_equal(ag.dense(x, w, b).data, x.data)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ag.dense(ag.Tensor(np.ones((2, 3))), ag.Tensor(np.ones((2, 2))), ag.Tensor(np.ones(2)))


class TestConv2d:
    def test_one_by_one_identity(self):
        rng = np.random.default_rng(0)
        x = ag.Tensor(rng.normal(size=(2, 1, 4, 4)))
        k = ag.Tensor(np.ones((1, 1, 1, 1)))
        b = ag.Tensor(np.zeros(1))
        assert np.allclose(ag.conv2d(x, k, b).data, x.data)

    def test_stacked_spatial_sizes(self):
        rng = np.random.default_rng(1)
        h = ag.Tensor(rng.normal(size=(1, 2, 8, 8)))
        sizes = []
        for c_in, c_out in ((2, 3), (3, 4), (4, 5)):
            h = ag.conv2d(h, rand_tensor(rng, (c_out, c_in, 2, 2), grad=False), ag.Tensor(np.zeros(c_out)))
            sizes.append(h.shape[2])
        assert sizes == [7, 6, 5]

    def test_hand_computed_window(self):
        x = ag.Tensor(np.arange(9, dtype=float).reshape(1, 1, 3, 3))
        k = ag.Tensor(np.array([[[[1.0, 0.0], [0.0, 1.0]]]]))
        b = ag.Tensor(np.array([1.0]))
        # windows [[0,1,3,4],[1,2,4,5],[3,4,6,7],[4,5,7,8]] dotted with diag mask
        want = np.array([[0 + 4, 1 + 5], [3 + 7, 4 + 8]], dtype=float) + 1.0
        assert np.array_equal(ag.conv2d(x, k, b).data[0, 0], want)

    def test_rejects_oversized_kernel(self):
        with pytest.raises(ValueError):
            ag.conv2d(
                ag.Tensor(np.zeros((1, 1, 2, 2))),
                ag.Tensor(np.zeros((1, 1, 3, 3))),
                ag.Tensor(np.zeros(1)),
            )

    def test_matches_naive_loops(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 3, 5, 6))
        k = rng.normal(size=(4, 3, 2, 2))
        b = rng.normal(size=4)
        got = ag.conv2d(ag.Tensor(x), ag.Tensor(k), ag.Tensor(b)).data
        want = np.zeros((2, 4, 4, 5))
        for bi in range(2):
            for o in range(4):
                for i in range(4):
                    for j in range(5):
                        want[bi, o, i, j] = (
                            np.sum(x[bi, :, i : i + 2, j : j + 2] * k[o]) + b[o]
                        )
        assert np.max(np.abs(got - want)) < 1e-12


class TestGradients:
    @pytest.mark.parametrize("trial", range(6))
    def test_conv2d_finite_diff(self, trial):
        rng = np.random.default_rng(10 + trial)
        bsz, c_in, c_out = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 4)
        h = int(rng.integers(3, 7))
        k = int(rng.integers(1, 3))
        x = rand_tensor(rng, (bsz, c_in, h, h))
        kern = rand_tensor(rng, (c_out, c_in, k, k), 0.5)
        bias = rand_tensor(rng, (c_out,), 0.2)
        w = rand_tensor(rng, ((h - k + 1) ** 2 * c_out, 3), 0.3)
        q = (rng.random((int(bsz), 3)) > 0.5).astype(float)

        def loss():
            hmid = ag.relu(ag.conv2d(x, kern, bias))
            flat = hmid.reshape((int(bsz), -1))
            return ag.bce_mean(ag.sigmoid(ag.dense(flat, w, ag.Tensor(np.zeros(3)))), q)

        finite_diff_check(loss, [x, kern, bias, w], rng)

    @pytest.mark.parametrize("trial", range(6))
    def test_dense_chain_finite_diff(self, trial):
        rng = np.random.default_rng(30 + trial)
        x = rand_tensor(rng, (4, 6))
        w1 = rand_tensor(rng, (6, 5), 0.5)
        b1 = rand_tensor(rng, (5,), 0.2)
        w2 = rand_tensor(rng, (5, 2), 0.5)
        b2 = rand_tensor(rng, (2,), 0.2)
        q = (rng.random((4, 2)) > 0.5).astype(float)

        def loss():
            hmid = ag.relu(ag.dense(x, w1, b1))
            return ag.bce_mean(ag.sigmoid(ag.dense(hmid, w2, b2)), q)

        finite_diff_check(loss, [x, w1, b1, w2, b2], rng)

    def test_abs_mean_and_columns_finite_diff(self):
        rng = np.random.default_rng(50)
        a = rand_tensor(rng, (5, 3))
        b = rand_tensor(rng, (5, 3))
        idx = np.array([2, 0, 1])

        def loss():
            return ag.mean(ag.absolute(a - ag.take_columns(b, idx)))

        finite_diff_check(loss, [a, b], rng, probes=6)

    def test_additive_accumulation_two_paths(self):
        rng = np.random.default_rng(51)
        x = rand_tensor(rng, (3, 3))
        y1 = ag.mean(ag.absolute(x))
        y2 = ag.mean(x)
        total = y1 + y2
        total.backward()
        two_path = x.grad.copy()
        x.zero_grad()
        ag.mean(ag.absolute(x)).backward()
        first = x.grad.copy()
        x.zero_grad()
        ag.mean(x).backward()
        second = x.grad.copy()
        assert np.allclose(two_path, first + second)

    def test_backward_requires_scalar(self):
        with pytest.raises(ValueError):
            ag.Tensor(np.ones(3), requires_grad=True).backward()


class TestBce:
    def test_perfect_predictions_tiny_loss(self):
        q = np.array([[0.0, 1.0]])
        p = ag.Tensor(q.copy())
        loss = ag.bce_mean(p, q).item()
        assert 0 <= loss <= 2e-7  # clamp floor: -log(1 - 1e-7)

    def test_coin_flip_is_log_two(self):
        q = np.array([[0.0, 1.0], [1.0, 0.0]])
        loss = ag.bce_mean(ag.Tensor(np.full((2, 2), 0.5)), q).item()
        assert abs(loss - np.log(2)) < 1e-12

    def test_gradient_matches_finite_diff(self):
        rng = np.random.default_rng(52)
        p = ag.Tensor(rng.uniform(0.05, 0.95, size=(4, 3)), requires_grad=True)
        q = (rng.random((4, 3)) > 0.5).astype(float)
        finite_diff_check(lambda: ag.bce_mean(p, q), [p], rng, probes=6)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ag.bce_mean(ag.Tensor(np.full((1, 2), 0.5)), np.zeros((2, 2)))

    def test_non_finite_raises(self):
        p = ag.Tensor(np.array([[np.nan]]))
        with pytest.raises(ArithmeticError):
            ag.bce_mean(p, np.array([[1.0]]))


class TestAdam:
    def test_zero_gradient_no_motion(self):
        p = ag.Tensor(np.array([1.0, -2.0]), requires_grad=True)
        p.grad = np.zeros(2)
        before = p.data.copy()
        opt = ag.Adam([p], lr=0.1)
        for _ in range(5):
            opt.step()
        assert np.max(np.abs(p.data - before)) < 1e-12

    def test_quadratic_convergence(self):
        p = ag.Tensor(np.array([3.0]), requires_grad=True)
        opt = ag.Adam([p], lr=3e-2)
        for _ in range(500):
            loss = ag.mean(ag.square(p - ag.Tensor(np.array([1.0]))))
            opt.zero_grad()
            loss.backward()
            opt.step()
        assert abs(p.data[0] - 1.0) < 1e-3

    def test_deterministic_runs(self):
        def run():
            rng = np.random.default_rng(7)
            p = ag.Tensor(rng.normal(size=(4, 4)), requires_grad=True)
            opt = ag.Adam([p], lr=1e-3)
            x = ag.Tensor(rng.normal(size=(4, 4)))
            for _ in range(50):
                loss = ag.mean(ag.absolute(p - x))
                opt.zero_grad()
                loss.backward()
                opt.step()
            return p.data

        assert np.array_equal(run(), run())


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(8)
        arrays = [rng.normal(size=s) for s in ((3, 4), (7,), (2, 2, 2, 2))]
        path = tmp_path / "p.ckpt"
        ag.save_params(path, arrays)
        back = ag.load_params(path)
        assert len(back) == 3
        for a, b in zip(arrays, back):
            assert a.shape == b.shape
            assert np.array_equal(a, b)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError):
            ag.load_params(path)

    def test_truncated(self, tmp_path):
        rng = np.random.default_rng(9)
        path = tmp_path / "p.ckpt"
        ag.save_params(path, [rng.normal(size=(10, 10))])
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ValueError):
            ag.load_params(path)
