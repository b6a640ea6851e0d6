import numpy as np
import numpy.testing as npt
import pytest

from lexcite import autodiff as ad
from lexcite.autodiff import Parameter, Tensor, no_grad

from oracles import fd_gradients, max_rel_error


def fd_check(build_loss, params, tol=1e-4, h=1e-6):
    for p in params.values():
        p.grad = None
    loss = build_loss()
    loss.backward()
    numeric = fd_gradients(lambda: _eval(build_loss), params, h=h)
    for name, p in params.items():
        analytic = (np.zeros_like(p.data) if p.grad is None else p.grad).reshape(-1)
        err = max_rel_error(analytic, numeric[name])
        assert err <= tol, f"{name}: rel error {err}"


def _eval(build_loss):
    with no_grad():
        return build_loss().item()


class TestElementwise:
    def test_add_mul_broadcast_gradients(self, rng):
        a = Parameter(rng.normal(size=(3, 4)))
        b = Parameter(rng.normal(size=(4,)))
        c = Parameter(rng.normal(size=(3, 1)))
        fd_check(lambda: ad.tsum(ad.mul(ad.add(a, b), c)), {"a": a, "b": b, "c": c})

    def test_matmul_gradients(self, rng):
        a = Parameter(rng.normal(size=(3, 5)))
        b = Parameter(rng.normal(size=(5, 2)))
        fd_check(lambda: ad.tsum(ad.matmul(a, b)), {"a": a, "b": b})

    def test_matmul_requires_2d(self):
        with pytest.raises(ValueError):
            ad.matmul(Tensor(np.zeros((2, 2, 2))), Tensor(np.zeros((2, 2))))

    @pytest.mark.parametrize("fn", [ad.exp, ad.log, ad.tanh, ad.sigmoid])
    def test_unary_gradients(self, fn, rng):
        x = Parameter(rng.uniform(0.2, 1.5, size=(4, 3)))
        fd_check(lambda: ad.tsum(fn(x)), {"x": x})

    def test_relu_and_leaky(self, rng):
        x = Parameter(rng.normal(size=(20,)) + 0.05)
        fd_check(lambda: ad.tsum(ad.relu(x)), {"x": x})
        fd_check(lambda: ad.tsum(ad.leaky_relu(x, 0.01)), {"x": x})
        npt.assert_allclose(ad.leaky_relu(Tensor([-2.0, 3.0]), 0.01).data, [-0.02, 3.0])

    def test_clip_blocks_gradient_outside(self):
        x = Parameter(np.array([0.5, 2.0, -1.0]))
        out = ad.tsum(ad.clip(x, 0.0, 1.0))
        out.backward()
        npt.assert_allclose(x.grad, [1.0, 0.0, 0.0])


class TestShapes:
    def test_reshape_transpose_concat_stack(self, rng):
        a = Parameter(rng.normal(size=(2, 6)))
        b = Parameter(rng.normal(size=(3, 4)))

        def loss():
            x = ad.reshape(a, (3, 4))
            y = ad.transpose(ad.concat([x, b], axis=0), (1, 0))
            z = ad.stack([y[:, 0], y[:, 5]], axis=1)
            return ad.tsum(ad.tanh(z))

        fd_check(loss, {"a": a, "b": b})

    def test_getitem_scatter(self, rng):
        a = Parameter(rng.normal(size=(5, 3)))
        idx = np.array([0, 2, 2])

        def loss():
            rows = ad.embedding(a, idx)
            spread = ad.scatter_rows(rows, np.array([1, 3, 4]), 6)
            return ad.tsum(ad.sigmoid(spread))

        fd_check(loss, {"a": a})

    def test_sum_mean_axes(self, rng):
        a = Parameter(rng.normal(size=(2, 3, 4)))
        fd_check(lambda: ad.tsum(ad.tmean(a, axis=1)), {"a": a})
        fd_check(lambda: ad.tsum(ad.tsum(a, axis=(0, 2))), {"a": a})


class TestSoftmax:
    def test_rows_sum_to_one(self, rng):
        x = Tensor(rng.normal(size=(4, 6)))
        p = ad.softmax(x, axis=1)
        npt.assert_allclose(p.data.sum(axis=1), np.ones(4), atol=1e-12)

    def test_masked_rows(self, rng):
        x = Tensor(rng.normal(size=(2, 4)))
        mask = np.array([[True, True, False, False], [False, False, False, False]])
        p = ad.masked_softmax(x, mask=mask, axis=1)
        npt.assert_allclose(p.data[0, 2:], 0.0)
        npt.assert_allclose(p.data[0].sum(), 1.0)
        npt.assert_allclose(p.data[1], 0.0)  # fully masked row -> zeros

    def test_gradient(self, rng):
        x = Parameter(rng.normal(size=(3, 5)))
        mask = rng.random((3, 5)) > 0.3
        mask[:, 0] = True
        w = rng.normal(size=(3, 5))
        fd_check(lambda: ad.tsum(ad.mul(ad.masked_softmax(x, mask=mask, axis=1), w)), {"x": x})


class TestEngine:
    def test_no_grad_builds_no_graph(self):
        a = Parameter(np.ones(3))
        with no_grad():
            out = ad.mul(a, 2.0)
        assert not out.requires_grad
        assert out._parents == ()

    def test_backward_requires_scalar(self):
        a = Parameter(np.ones(3))
        with pytest.raises(ValueError):
            ad.mul(a, 2.0).backward()

    def test_gradient_accumulates_over_reuse(self):
        a = Parameter(np.array([2.0]))
        out = ad.add(ad.mul(a, 3.0), ad.mul(a, 4.0))
        ad.tsum(out).backward()
        npt.assert_allclose(a.grad, [7.0])

    def test_deep_chain_iterative_toposort(self):
        # deep graphs must not hit the recursion limit
        x = Parameter(np.array([0.1]))
        y = x
        for _ in range(5000):
            y = ad.add(y, 1e-4)
        ad.tsum(y).backward()
        npt.assert_allclose(x.grad, [1.0])
