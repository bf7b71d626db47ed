import numpy as np
import pytest

from oneshotseg.diffcore import (
    OP_KINDS,
    Evaluation,
    Graph,
    GraphError,
    backprop,
    eval_graph,
    finite_diff_check,
    run_graph,
)


def scalar(x):
    return np.full((1, 1, 1), float(x))


class TestForwardOracles:
    def test_identity_input(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("y", x)
        out = eval_graph(g, {"x": scalar(5.0)})
        assert out["y"][0, 0, 0] == 5.0

    def test_sigmoid_at_zero(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("y", g.sigmoid(x))
        out = eval_graph(g, {"x": scalar(0.0)})
        assert out["y"][0, 0, 0] == 0.5

    def test_sigmoid_matches_closed_form(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        g.mark_output("y", g.sigmoid(x))
        z = np.array([[-30.0, -1.0], [2.5, 40.0]]).reshape(2, 2, 1)
        out = eval_graph(g, {"x": z})["y"]
        expect = 1.0 / (1.0 + np.exp(-z))
        assert np.allclose(out, expect, rtol=0, atol=1e-15)
        assert np.isfinite(out).all()

    def test_conv_ones_kernel_center(self):
        # 3x3 grid of ones, 3x3 ones kernel, zero bias: the center output sees
        # the full window, so it is 9; the corners see 4.
        g = Graph()
        x = g.input("x", (3, 3, 1))
        w = g.param("w", np.ones((3, 3, 1, 1)))
        b = g.param("b", np.zeros(1))
        g.mark_output("y", g.conv2d(x, w, b))
        out = eval_graph(g, {"x": np.ones((3, 3, 1))})["y"]
        assert out[1, 1, 0] == 9.0
        assert out[0, 0, 0] == 4.0
        assert out[0, 1, 0] == 6.0

    def test_conv_bias_added(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        w = g.param("w", np.zeros((1, 1, 1, 3)))
        b = g.param("b", np.array([1.0, -2.0, 0.5]))
        g.mark_output("y", g.conv2d(x, w, b))
        out = eval_graph(g, {"x": np.zeros((2, 2, 1))})["y"]
        assert np.array_equal(out, np.broadcast_to([1.0, -2.0, 0.5], (2, 2, 3)))

    def test_relu_hinge_clamp(self):
        g = Graph()
        x = g.input("x", (1, 4, 1))
        g.mark_output("r", g.relu(x))
        g.mark_output("h", g.hinge(x))
        g.mark_output("c", g.clamp(x, -1.0, 1.0))
        v = np.array([-2.0, -0.5, 0.0, 3.0]).reshape(1, 4, 1)
        out = eval_graph(g, {"x": v})
        assert np.array_equal(out["r"].ravel(), [0.0, 0.0, 0.0, 3.0])
        assert np.array_equal(out["h"].ravel(), [0.0, 0.0, 0.0, 3.0])
        assert np.array_equal(out["c"].ravel(), [-1.0, -0.5, 0.0, 1.0])

    def test_reductions(self):
        g = Graph()
        x = g.input("x", (2, 2, 2))
        g.mark_output("s", g.sum(x))
        g.mark_output("m", g.mean(x))
        g.mark_output("sm", g.spatial_mean(x))
        v = np.arange(8, dtype=float).reshape(2, 2, 2)
        out = eval_graph(g, {"x": v})
        assert out["s"][0, 0, 0] == 28.0
        assert out["m"][0, 0, 0] == 3.5
        assert np.array_equal(out["sm"].ravel(), [3.0, 4.0])

    def test_rownorm_345(self):
        g = Graph()
        x = g.input("x", (1, 2, 2))
        g.mark_output("n", g.rownorm(x))
        v = np.array([[[3.0, 4.0], [0.0, 0.0]]])
        out = eval_graph(g, {"x": v})["n"]
        assert out[0, 0, 0] == 5.0
        assert out[0, 1, 0] == 0.0

    def test_channel_select_and_gather(self):
        g = Graph()
        x = g.input("x", (2, 3, 2))
        g.mark_output("c1", g.channel_select(x, 1))
        g.mark_output("pts", g.gather(x, [0, 1], [2, 0]))
        v = np.arange(12, dtype=float).reshape(2, 3, 2)
        out = eval_graph(g, {"x": v})
        assert np.array_equal(out["c1"], v[:, :, 1:2])
        assert out["pts"].shape == (2, 1, 2)
        assert np.array_equal(out["pts"][0, 0], v[0, 2])
        assert np.array_equal(out["pts"][1, 0], v[1, 0])

    def test_arithmetic_ops(self):
        g = Graph()
        a = g.input("a", (1, 1, 1))
        b = g.input("b", (1, 1, 1))
        g.mark_output("sum", g.add(a, b))
        g.mark_output("diff", g.sub(a, b))
        g.mark_output("prod", g.mul(a, b))
        g.mark_output("scaled", g.scale(a, -2.0))
        g.mark_output("log", g.log(b))
        out = eval_graph(g, {"a": scalar(4.0), "b": scalar(3.0)})
        assert out["sum"][0, 0, 0] == 7.0
        assert out["diff"][0, 0, 0] == 1.0
        assert out["prod"][0, 0, 0] == 12.0
        assert out["scaled"][0, 0, 0] == -8.0
        assert out["log"][0, 0, 0] == np.log(3.0)

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(7)
        g = Graph()
        x = g.input("x", (4, 4, 2))
        w = g.param("w", rng.normal(size=(3, 3, 2, 3)))
        b = g.param("b", rng.normal(size=3))
        h = g.relu(g.conv2d(x, w, b))
        g.mark_output("loss", g.mean(g.mul(h, h)))
        img = rng.normal(size=(4, 4, 2))
        first = eval_graph(g, {"x": img})["loss"].copy()
        grads_a = backprop(g, g.outputs["loss"])
        second = eval_graph(g, {"x": img})["loss"].copy()
        grads_b = backprop(g, g.outputs["loss"])
        assert np.array_equal(first, second)
        for k in grads_a:
            assert np.array_equal(grads_a[k], grads_b[k])


class TestBackwardOracles:
    def test_product_rule(self):
        # d(x*y)/dx = y, d(x*y)/dy = x at x=3, y=4.
        g = Graph()
        x = g.input("x", (1, 1, 1))
        y = g.input("y", (1, 1, 1))
        out = g.sum(g.mul(x, y))
        g.mark_output("f", out)
        eval_graph(g, {"x": scalar(3.0), "y": scalar(4.0)})
        grads = backprop(g, out)
        assert grads["x"][0, 0, 0] == 4.0
        assert grads["y"][0, 0, 0] == 3.0

    def test_sigmoid_derivative_at_zero(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        out = g.sum(g.sigmoid(x))
        g.mark_output("f", out)
        eval_graph(g, {"x": scalar(0.0)})
        grads = backprop(g, out)
        assert grads["x"][0, 0, 0] == 0.25

    def test_mean_spreads_gradient(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        out = g.mean(x)
        g.mark_output("f", out)
        eval_graph(g, {"x": np.arange(4, dtype=float).reshape(2, 2, 1)})
        grads = backprop(g, out)
        assert np.array_equal(grads["x"], np.full((2, 2, 1), 0.25))

    def test_relu_subgradient_zero_at_kink(self):
        g = Graph()
        x = g.input("x", (1, 3, 1))
        out = g.sum(g.relu(x))
        g.mark_output("f", out)
        eval_graph(g, {"x": np.array([-1.0, 0.0, 2.0]).reshape(1, 3, 1)})
        grads = backprop(g, out)
        assert np.array_equal(grads["x"].ravel(), [0.0, 0.0, 1.0])

    def test_hinge_matches_relu_gradient(self):
        v = np.array([-3.0, 0.0, 0.7]).reshape(1, 3, 1)
        outs = []
        for op in ("relu", "hinge"):
            g = Graph()
            x = g.input("x", (1, 3, 1))
            node = g.relu(x) if op == "relu" else g.hinge(x)
            out = g.sum(node)
            g.mark_output("f", out)
            eval_graph(g, {"x": v})
            outs.append(backprop(g, out)["x"])
        assert np.array_equal(outs[0], outs[1])

    def test_clamp_gradient_zero_outside(self):
        g = Graph()
        x = g.input("x", (1, 3, 1))
        out = g.sum(g.clamp(x, -1.0, 1.0))
        g.mark_output("f", out)
        eval_graph(g, {"x": np.array([-5.0, 0.3, 5.0]).reshape(1, 3, 1)})
        grads = backprop(g, out)
        assert np.array_equal(grads["x"].ravel(), [0.0, 1.0, 0.0])

    def test_log_gradient(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        out = g.sum(g.log(x))
        g.mark_output("f", out)
        eval_graph(g, {"x": scalar(4.0)})
        grads = backprop(g, out)
        assert grads["x"][0, 0, 0] == 0.25

    def test_gather_accumulates_repeats(self):
        # The same pixel gathered twice must receive both contributions.
        g = Graph()
        x = g.input("x", (2, 2, 1))
        out = g.sum(g.gather(x, [0, 0, 1], [1, 1, 0]))
        g.mark_output("f", out)
        eval_graph(g, {"x": np.zeros((2, 2, 1))})
        grads = backprop(g, out)
        expect = np.array([[0.0, 2.0], [1.0, 0.0]]).reshape(2, 2, 1)
        assert np.array_equal(grads["x"], expect)

    def test_zero_path_gradients_are_exact_zeros(self):
        # A leaf with no path to the output gets an exactly-zero gradient.
        g = Graph()
        x = g.input("x", (2, 2, 1))
        g.input("unused", (3, 3, 2))
        g.param("w_unused", np.ones((1, 1, 1, 1)))
        out = g.sum(x)
        g.mark_output("f", out)
        eval_graph(g, {"x": np.ones((2, 2, 1)), "unused": np.ones((3, 3, 2))})
        grads = backprop(g, out)
        assert np.array_equal(grads["unused"], np.zeros((3, 3, 2)))
        assert np.array_equal(grads["w_unused"], np.zeros((1, 1, 1, 1)))
        assert (grads["unused"] == 0.0).all()

    def test_channel_select_routes_gradient(self):
        g = Graph()
        x = g.input("x", (1, 1, 3))
        out = g.sum(g.scale(g.channel_select(x, 1), 5.0))
        g.mark_output("f", out)
        eval_graph(g, {"x": np.zeros((1, 1, 3))})
        grads = backprop(g, out)
        assert np.array_equal(grads["x"].ravel(), [0.0, 5.0, 0.0])

    def test_rownorm_gradient_unit_vector(self):
        # d||v|| / dv = v / ||v||: at (3, 4) that is (0.6, 0.8).
        g = Graph()
        x = g.input("x", (1, 1, 2))
        out = g.sum(g.rownorm(x))
        g.mark_output("f", out)
        eval_graph(g, {"x": np.array([3.0, 4.0]).reshape(1, 1, 2)})
        grads = backprop(g, out)
        assert np.allclose(grads["x"].ravel(), [0.6, 0.8], rtol=0, atol=1e-15)

    def test_rownorm_gradient_zero_at_origin(self):
        g = Graph()
        x = g.input("x", (1, 1, 2))
        out = g.sum(g.rownorm(x))
        g.mark_output("f", out)
        eval_graph(g, {"x": np.zeros((1, 1, 2))})
        grads = backprop(g, out)
        assert np.array_equal(grads["x"], np.zeros((1, 1, 2)))

    def test_multi_output_seeded_backward(self):
        # Seeding two nodes gives the gradient of the sum of seeded products.
        g = Graph()
        x = g.input("x", (1, 1, 1))
        a = g.scale(x, 2.0)
        b = g.scale(x, 3.0)
        ev = run_graph(g, {"x": scalar(1.0)})
        grads = ev.backward(seeds={a: scalar(1.0), b: scalar(10.0)})
        assert grads["x"][0, 0, 0] == 32.0


class TestFiniteDifference:
    def test_quadratic_matches_fd(self):
        # f(x) = sum(x^2), df/dx = 2x = 6 at x = 3.
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("f", g.sum(g.mul(x, x)))
        report = finite_diff_check(g, {"x": scalar(3.0)})
        assert report.passed
        assert report.max_rel_err < 1e-7

    def test_composite_conv_net(self):
        rng = np.random.default_rng(3)
        g = Graph()
        x = g.input("x", (5, 5, 2))
        w1 = g.param("w1", rng.normal(scale=0.5, size=(3, 3, 2, 3)))
        b1 = g.param("b1", rng.normal(scale=0.1, size=3))
        w2 = g.param("w2", rng.normal(scale=0.5, size=(1, 1, 3, 1)))
        b2 = g.param("b2", rng.normal(scale=0.1, size=1))
        h = g.relu(g.conv2d(x, w1, b1))
        z = g.conv2d(h, w2, b2)
        p = g.clamp(g.sigmoid(z), 1e-7, 1.0 - 1e-7)
        g.mark_output("f", g.mean(g.log(p)))
        report = finite_diff_check(g, {"x": rng.normal(size=(5, 5, 2))})
        assert report.passed, report.format()
        assert report.max_rel_err < 1e-4

    @pytest.mark.parametrize(
        "build",
        [
            lambda g, x: g.relu(x),
            lambda g, x: g.hinge(x),
            lambda g, x: g.sigmoid(x),
            lambda g, x: g.clamp(x, -0.5, 0.5),
            lambda g, x: g.scale(x, -1.7),
            lambda g, x: g.mul(x, x),
            lambda g, x: g.rownorm(x),
            lambda g, x: g.spatial_mean(x),
            lambda g, x: g.gather(x, [0, 2, 1], [1, 0, 2]),
            lambda g, x: g.channel_select(x, 1),
        ],
    )
    def test_each_op_fd(self, build):
        rng = np.random.default_rng(11)
        g = Graph()
        x = g.input("x", (3, 3, 2))
        g.mark_output("f", g.sum(build(g, x)))
        report = finite_diff_check(g, {"x": rng.normal(size=(3, 3, 2))})
        assert report.passed, report.format()

    def test_kink_crossing_is_excluded_not_failed(self):
        # An input sitting within h of the relu kink would poison the central
        # difference; the harness must count it excluded instead of failing.
        g = Graph()
        x = g.input("x", (1, 2, 1))
        g.mark_output("f", g.sum(g.relu(x)))
        v = np.array([2.0, 1e-5]).reshape(1, 2, 1)
        report = finite_diff_check(g, {"x": v}, step=1e-3)
        assert report.passed
        assert report.n_excluded == 1
        assert report.leaves[0].n_checked == 1

    def test_fd_restores_values(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        w = g.param("w", np.full((1, 1, 1, 1), 0.5))
        b = g.param("b", np.zeros(1))
        g.mark_output("f", g.sum(g.conv2d(x, w, b)))
        img = np.arange(4, dtype=float).reshape(2, 2, 1)
        before = g.params["w"].copy()
        finite_diff_check(g, {"x": img})
        assert np.array_equal(g.params["w"], before)
        assert np.array_equal(img, np.arange(4, dtype=float).reshape(2, 2, 1))

    def test_report_format_mentions_leaves(self):
        g = Graph()
        x = g.input("pixels", (1, 1, 1))
        g.mark_output("f", g.sum(x))
        report = finite_diff_check(g, {"pixels": scalar(1.0)})
        text = report.format()
        assert "pixels" in text
        assert "max_rel_err" in text


class TestGraphValidation:
    def test_unbound_input_rejected(self):
        g = Graph()
        g.input("x", (1, 1, 1))
        g.mark_output("f", 0)
        with pytest.raises(GraphError, match="unbound"):
            eval_graph(g, {})

    def test_unknown_binding_rejected(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("f", x)
        with pytest.raises(GraphError, match="does not match any input"):
            eval_graph(g, {"x": scalar(1.0), "ghost": scalar(1.0)})

    def test_shape_mismatch_rejected(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        g.mark_output("f", x)
        with pytest.raises(GraphError, match="shape"):
            eval_graph(g, {"x": np.zeros((3, 3, 1))})

    def test_binary_shape_mismatch_at_build(self):
        g = Graph()
        a = g.input("a", (2, 2, 1))
        b = g.input("b", (2, 2, 2))
        with pytest.raises(GraphError, match="mismatch"):
            g.add(a, b)

    def test_even_kernel_rejected(self):
        g = Graph()
        x = g.input("x", (4, 4, 1))
        w = g.param("w", np.zeros((2, 2, 1, 1)))
        b = g.param("b", np.zeros(1))
        with pytest.raises(GraphError, match="odd"):
            g.conv2d(x, w, b)

    def test_gather_out_of_bounds(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        with pytest.raises(GraphError, match="out of bounds"):
            g.gather(x, [0, 2], [0, 0])

    def test_backprop_requires_prior_eval(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("f", x)
        with pytest.raises(GraphError, match="not been evaluated"):
            backprop(g, x)

    def test_backprop_requires_scalar(self):
        g = Graph()
        x = g.input("x", (2, 2, 1))
        g.mark_output("f", x)
        eval_graph(g, {"x": np.zeros((2, 2, 1))})
        with pytest.raises(GraphError, match="scalar"):
            backprop(g, x)

    def test_log_nonpositive_rejected(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("f", g.log(x))
        with pytest.raises(GraphError, match="non-positive"):
            eval_graph(g, {"x": scalar(0.0)})

    def test_nonfinite_binding_rejected(self):
        g = Graph()
        x = g.input("x", (1, 1, 1))
        g.mark_output("f", x)
        with pytest.raises(GraphError, match="non-finite"):
            eval_graph(g, {"x": scalar(np.nan)})

    def test_shared_params_between_graphs(self):
        params = {}
        g1 = Graph(params)
        x1 = g1.input("x", (2, 2, 1))
        w1 = g1.param("w", np.full((1, 1, 1, 1), 2.0))
        b1 = g1.param("b", np.zeros(1))
        g1.mark_output("y", g1.conv2d(x1, w1, b1))

        g2 = Graph(params)
        x2 = g2.input("x", (3, 3, 1))
        w2 = g2.param("w")
        b2 = g2.param("b")
        g2.mark_output("y", g2.conv2d(x2, w2, b2))

        params["w"][0, 0, 0, 0] = 5.0
        out1 = eval_graph(g1, {"x": np.ones((2, 2, 1))})["y"]
        out2 = eval_graph(g2, {"x": np.ones((3, 3, 1))})["y"]
        assert np.array_equal(out1, np.full((2, 2, 1), 5.0))
        assert np.array_equal(out2, np.full((3, 3, 1), 5.0))

    def test_op_vocabulary_is_closed(self):
        assert "conv2d" in OP_KINDS
        assert "gather" in OP_KINDS
        g = Graph()
        x = g.input("x", (2, 2, 1))
        g.mark_output("f", g.sum(g.relu(x)))
        assert all(node.op in OP_KINDS for node in g.nodes)
