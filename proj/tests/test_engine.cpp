#include <doctest.h>

#include <cmath>

#include "coogan/autodiff.hpp"
#include "coogan/nn.hpp"
#include "coogan/rng.hpp"
#include "gradcheck.hpp"

using namespace coogan;
using namespace coogan::ad;
using coogan::testing::gradcheck;

namespace {

Tensor randn(Rng& rng, std::vector<i64> shape, double std = 1.0) {
    Tensor t(std::move(shape));
    for (i64 i = 0; i < t.numel(); ++i) t[i] = rng.gaussian(0.0, std);
    return t;
}

}  // namespace

TEST_CASE("elementwise forward values") {
    Var a = leaf(Tensor::from({3}, {-1.0, 0.0, 2.0}), false);
    CHECK(relu(a).value()[0] == 0.0);
    CHECK(relu(a).value()[2] == 2.0);
    CHECK(leaky_relu(a, 0.1).value()[0] == doctest::Approx(-0.1));
    CHECK(sigmoid(a).value()[1] == doctest::Approx(0.5));
    CHECK(tanh_op(a).value()[2] == doctest::Approx(std::tanh(2.0)));
    CHECK(softplus(a).value()[1] == doctest::Approx(std::log(2.0)));
    CHECK(abs_op(a).value()[0] == 1.0);
}

TEST_CASE("gradcheck: smooth elementwise chain") {
    Rng rng(7);
    Var x = leaf(randn(rng, {4, 3, 5, 5}, 0.5), true);
    Var c = constant(randn(rng, {4, 3, 5, 5}));
    auto f = [&] {
        Var y = tanh_op(mul(sigmoid(x), add_scalar(x, 0.3)));
        y = add(y, softplus(sub(x, c)));
        return mean_all(mul(y, c));
    };
    auto r = gradcheck(f, {x});
    CHECK(r.rel_err < 1e-6);
}

TEST_CASE("gradcheck: reductions and broadcasts") {
    Rng rng(11);
    Var x = leaf(randn(rng, {2, 4, 3, 3}), true);
    Var w = leaf(randn(rng, {4}), true);
    Var n = leaf(randn(rng, {2}), true);
    auto f = [&] {
        Var y = mul(x, bcast_c(w, 2, 3, 3));
        y = add(y, bcast_n(n, 4, 3, 3));
        Var mu = mean_hw(y);
        Var yc = sub(y, bcast_hw(mu, 3, 3));
        return add(mean_all(square(yc)), mul_scalar(mean_all(square(sum_to_c(y))), 1e-2));
    };
    auto r = gradcheck(f, {x, w, n});
    CHECK(r.rel_err < 1e-6);
}

TEST_CASE("gradcheck: matmul family") {
    Rng rng(3);
    Var a = leaf(randn(rng, {3, 4}), true);
    Var b = leaf(randn(rng, {4, 5}), true);
    Var c = leaf(randn(rng, {2, 4}), true);
    auto f = [&] {
        Var y1 = matmul_nn(a, b);                // 3x5
        Var y2 = matmul_nt(a, c);                // 3x2
        Var y3 = matmul_tn(b, reshape(a, {4, 3}));  // 5x3 uses b^T
        return add(mean_all(square(y1)), add(mean_all(square(y2)), mean_all(square(y3))));
    };
    auto r = gradcheck(f, {a, b, c});
    CHECK(r.rel_err < 1e-6);
}

TEST_CASE("gradcheck: conv2d / transpose / strides and padding") {
    Rng rng(5);
    Var x = leaf(randn(rng, {2, 3, 8, 8}), true);
    Var w = leaf(randn(rng, {4, 3, 4, 4}, 0.3), true);
    Var wt = leaf(randn(rng, {4, 2, 3, 3}, 0.3), true);
    auto f = [&] {
        Var y = conv2d_raw(x, w, 2, 1);  // (2,4,4,4)
        Var z = conv_transpose2d_raw(y, wt, 2, 1, 8, 8);  // (2,2,8,8)
        return mean_all(square(z));
    };
    auto r = gradcheck(f, {x, w, wt});
    CHECK(r.rel_err < 1e-6);
}

TEST_CASE("conv transpose doubles size exactly for stride 2 k3 pad 1") {
    Rng rng(9);
    nn::ParamMap pm;
    auto t = nn::ConvTranspose2d::make(pm, "t", rng, 6, 4, 3, 2, 1);
    Var x = leaf(randn(rng, {1, 6, 5, 5}), false);
    Var y = t(x);
    CHECK(y.dim(1) == 4);
    CHECK(y.dim(2) == 10);
    CHECK(y.dim(3) == 10);
}

TEST_CASE("gradcheck: instance norm and linear") {
    Rng rng(13);
    nn::ParamMap pm;
    auto conv = nn::Conv2d::make(pm, "c", rng, 3, 5, 3, 1, 1);
    auto inorm = nn::InstanceNorm::make(pm, "n", 5);
    auto fc = nn::Linear::make(pm, "f", rng, 5 * 6 * 6, 2);
    Var x = leaf(randn(rng, {2, 3, 6, 6}), true);
    auto f = [&] {
        Var y = inorm(conv(x));
        Var flat = reshape(y, {2, 5 * 6 * 6});
        return mean_all(square(fc(flat)));
    };
    std::vector<Var> ps = pm.vars();
    ps.push_back(x);
    auto r = gradcheck(f, ps);
    CHECK(r.rel_err < 1e-5);
}

TEST_CASE("second-order: grad-of-grad matches finite differences of first grad") {
    // d/dtheta of || dL/dx ||^2 exercises the same double-backward path the
    // gradient penalty uses.
    Rng rng(17);
    Var w = leaf(randn(rng, {2, 2, 3, 3}, 0.5), true);
    Var x0 = constant(randn(rng, {1, 2, 4, 4}));

    auto first_grad_norm = [&]() -> Var {
        Var x = leaf(x0.value(), true);
        Var y = sum_all(tanh_op(conv2d_raw(x, w, 1, 1)));
        Var gx = ad::grad(y, {x}, true)[0];
        return sum_all(square(gx));
    };
    auto r = gradcheck(first_grad_norm, {w});
    CHECK(r.rel_err < 1e-5);
}

TEST_CASE("second-order through sqrt norm (penalty shape)") {
    Rng rng(19);
    Var w = leaf(randn(rng, {3, 2, 3, 3}, 0.4), true);
    Var x0 = constant(randn(rng, {2, 2, 5, 5}));
    auto f = [&]() -> Var {
        Var x = leaf(x0.value(), true);
        Var y = sum_all(tanh_op(conv2d_raw(x, w, 1, 1)));
        Var gx = ad::grad(y, {x}, true)[0];
        Var norm = sqrt_op(add_scalar(sum_to_n(square(gx)), 1e-12));
        return mean_all(square(add_scalar(norm, -1.0)));
    };
    auto r = gradcheck(f, {w});
    CHECK(r.rel_err < 1e-4);
}

TEST_CASE("grad with create_graph=false does not grow the tape") {
    Rng rng(23);
    Var x = leaf(randn(rng, {4, 4}), true);
    Var y = mean_all(square(x));
    auto g = ad::grad(y, {x}, false);
    CHECK_FALSE(g[0].requires_grad());
}

TEST_CASE("concat/slice adjoints") {
    Rng rng(29);
    Var a = leaf(randn(rng, {2, 3, 4, 4}), true);
    Var b = leaf(randn(rng, {2, 2, 4, 4}), true);
    Var m = constant(randn(rng, {2, 5, 4, 4}));
    auto f = [&] {
        Var y = concat_c({a, b});
        Var s = slice_c(mul(y, m), 1, 4);
        return mean_all(square(s));
    };
    auto r = gradcheck(f, {a, b});
    CHECK(r.rel_err < 1e-6);
}

TEST_CASE("adam decreases a quadratic") {
    Rng rng(31);
    Var x = leaf(randn(rng, {8}), true);
    nn::Adam opt(0.5, 0.99);
    std::vector<Var> ps{x};
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 200; ++i) {
        Var loss = mean_all(square(x));
        if (i == 0) first = loss.item();
        last = loss.item();
        auto gs = ad::grad(loss, ps, false);
        opt.step(ps, gs, 0.05);
    }
    CHECK(last < 0.05 * first);
}
