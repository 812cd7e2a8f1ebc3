#include <doctest.h>

#include <cmath>

#include "coogan/losses.hpp"
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

TEST_CASE("rec_loss closed forms") {
    Rng rng(1);
    Var x = constant(randn(rng, {2, 3, 4, 4}));
    GenFn identity = [](const Var& xi, const Var&) { return xi; };
    CHECK(rec_loss(x, identity, 3).item() == 0.0);

    GenFn plus_half = [](const Var& xi, const Var&) { return add_scalar(xi, 0.5); };
    CHECK(rec_loss(x, plus_half, 3).item() == doctest::Approx(0.5));
}

TEST_CASE("rec_loss passes the zero condition") {
    Rng rng(2);
    Var x = constant(randn(rng, {2, 3, 4, 4}));
    bool saw_zero = false;
    GenFn check_cond = [&](const Var& xi, const Var& c) {
        saw_zero = true;
        for (i64 i = 0; i < c.numel(); ++i) CHECK(c.value()[i] == 0.0);
        CHECK(c.shape() == std::vector<i64>{2, 3});
        return xi;
    };
    rec_loss(x, check_cond, 3);
    CHECK(saw_zero);
}

TEST_CASE("gradcheck: rec_loss through a small generator") {
    Rng rng(3);
    nn::ParamMap pm;
    auto conv = nn::Conv2d::make(pm, "c", rng, 3, 3, 3, 1, 1);
    Var x = constant(randn(rng, {2, 3, 5, 5}, 0.5));
    GenFn gen = [&](const Var& xi, const Var&) { return tanh_op(conv(xi)); };
    auto f = [&] { return rec_loss(x, gen, 2); };
    auto r = gradcheck(f, pm.vars());
    CHECK(r.rel_err < 1e-4);
}

TEST_CASE("d_adv_loss: constant critic gives penalty lambda, zero difference") {
    Rng rng(4);
    Var real = constant(randn(rng, {3, 1, 2, 2}));
    Var fake = constant(randn(rng, {3, 1, 2, 2}));
    CriticFn constant_critic = [](const Var& x) {
        // keeps graph connectivity but ignores the input numerically
        return add_scalar(mul_scalar(sum_to_n(x), 0.0), 1.7);
    };
    const double lambda = 10.0;
    double loss = d_adv_loss(constant_critic, real, fake, lambda, rng).item();
    CHECK(loss == doctest::Approx(lambda).epsilon(1e-4));
}

TEST_CASE("d_adv_loss: unit-gradient linear critic has zero penalty") {
    Rng rng(5);
    // one pixel, one channel: D(x) = sum(x) has input gradient exactly 1
    Var real = constant(randn(rng, {4, 1, 1, 1}));
    Var fake = constant(randn(rng, {4, 1, 1, 1}));
    CriticFn sum_critic = [](const Var& x) { return sum_to_n(x); };
    double loss = d_adv_loss(sum_critic, real, fake, 10.0, rng).item();
    double expect = 0.0;
    for (i64 i = 0; i < 4; ++i) expect += fake.value()[i] - real.value()[i];
    expect /= 4.0;
    CHECK(loss == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("gradcheck: d_adv_loss including the gradient penalty path") {
    Rng rng(6);
    nn::ParamMap pm;
    auto conv = nn::Conv2d::make(pm, "c", rng, 2, 3, 3, 1, 1);
    auto fc = nn::Linear::make(pm, "f", rng, 3 * 4 * 4, 1);
    CriticFn critic = [&](const Var& x) {
        Var h = tanh_op(conv(x));
        return reshape(fc(reshape(h, {x.dim(0), 3 * 4 * 4})), {x.dim(0)});
    };
    Tensor real_t = randn(rng, {2, 2, 4, 4}, 0.5);
    Tensor fake_t = randn(rng, {2, 2, 4, 4}, 0.5);
    CHECK(pm.scalar_count() < 1000);
    // freeze the interpolation draw so central differences see one function
    auto f = [&] {
        Rng eps_rng(99);
        return d_adv_loss(critic, constant(real_t), constant(fake_t), 10.0, eps_rng);
    };
    auto r = gradcheck(f, pm.vars());
    CHECK(r.rel_err < 1e-3);
}

TEST_CASE("g_adv_loss closed forms and gradcheck") {
    Rng rng(7);
    Var fake = constant(randn(rng, {3, 1, 2, 2}));
    CriticFn zero_critic = [](const Var& x) { return mul_scalar(sum_to_n(x), 0.0); };
    CHECK(g_adv_loss(zero_critic, fake).item() == 0.0);
    CriticFn const_critic = [](const Var& x) { return add_scalar(mul_scalar(sum_to_n(x), 0.0), 2.5); };
    CHECK(g_adv_loss(const_critic, fake).item() == doctest::Approx(-2.5));

    nn::ParamMap pm;
    auto conv = nn::Conv2d::make(pm, "c", rng, 1, 2, 3, 1, 1);
    CriticFn critic = [&](const Var& x) { return sum_to_n(tanh_op(conv(x))); };
    auto f = [&] { return g_adv_loss(critic, fake); };
    auto r = gradcheck(f, pm.vars());
    CHECK(r.rel_err < 1e-4);
}

TEST_CASE("attr_cls_loss closed forms") {
    SUBCASE("saturated correct logits vanish") {
        Tensor logits({2, 13});
        Tensor targets({2, 13});
        Rng rng(8);
        for (i64 i = 0; i < logits.numel(); ++i) {
            const bool on = rng.bernoulli(0.5);
            targets[i] = on ? 1.0 : 0.0;
            logits[i] = on ? 30.0 : -30.0;
        }
        CHECK(attr_cls_loss(leaf(logits, false), targets).item() < 1e-9);
    }
    SUBCASE("zero logit contributes ln 2") {
        Tensor logits({1, 1});
        Tensor targets({1, 1});
        targets[0] = 1.0;
        CHECK(attr_cls_loss(leaf(logits, false), targets).item() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
        targets[0] = 0.0;
        CHECK(attr_cls_loss(leaf(logits, false), targets).item() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("attr_cls_loss is permutation-equivariant over attributes") {
    Rng rng(9);
    Tensor logits = randn(rng, {3, 5});
    Tensor targets({3, 5});
    for (i64 i = 0; i < targets.numel(); ++i) targets[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double base = attr_cls_loss(leaf(logits.clone(), false), targets).item();

    std::vector<i64> perm{4, 2, 0, 1, 3};
    Tensor plogits({3, 5});
    Tensor ptargets({3, 5});
    for (i64 n = 0; n < 3; ++n)
        for (i64 j = 0; j < 5; ++j) {
            plogits[n * 5 + j] = logits[n * 5 + perm[static_cast<size_t>(j)]];
            ptargets[n * 5 + j] = targets[n * 5 + perm[static_cast<size_t>(j)]];
        }
    CHECK(attr_cls_loss(leaf(plogits, false), ptargets).item() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gradcheck: attr_cls_loss") {
    Rng rng(10);
    nn::ParamMap pm;
    auto fc = nn::Linear::make(pm, "f", rng, 6, 4);
    Var x = constant(randn(rng, {3, 6}));
    Tensor targets({3, 4});
    for (i64 i = 0; i < targets.numel(); ++i) targets[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    auto f = [&] { return attr_cls_loss(fc(x), targets); };
    auto r = gradcheck(f, pm.vars());
    CHECK(r.rel_err < 1e-4);
}

TEST_CASE("weighted totals reproduce their components") {
    Var a = scalar(0.7);
    Var b = scalar(-0.3);
    Var c = scalar(0.2);
    LossWeights w;
    w.lambda_rec = 0;
    w.lambda_cls = 0;
    w.lambda_adv = 0;
    w.lambda_gp = 0;
    CHECK(total_g_loss(a, b, c, w).item() == 0.0);
    CHECK(total_d_loss(scalar(0.0), b, w).item() == 0.0);

    w.lambda_cls = 10;
    CHECK(total_d_loss(scalar(0.0), b, w).item() == doctest::Approx(-3.0));
    w.lambda_cls = 0;
    w.lambda_rec = 100;
    CHECK(total_g_loss(a, b, c, w).item() == doctest::Approx(20.0));
}

TEST_CASE("loss weights validate") {
    LossWeights w;
    w.lambda_rec = -1;
    CHECK_THROWS_AS(w.validate(), config_error);
}

TEST_CASE("ACGAN split: critic classifies real/source, generator classifies fake/target") {
    // Stub heads that reveal which image batch fed the classifier: logits are
    // the per-sample mean value, so real (all 0) and fake (all +8) batches
    // produce distinguishable classification losses.
    Rng rng(11);
    Var real = constant(Tensor({2, 1, 2, 2}));                  // zeros
    GenFn gen = [](const Var& xi, const Var&) { return add_scalar(mul_scalar(xi, 0.0), 8.0); };
    Var fake = gen(real, constant(Tensor({2, 1})));
    CriticFn critic = [](const Var& x) { return mul_scalar(sum_to_n(x), 0.0); };
    ClsFn cls = [](const Var& x) {
        return reshape(mul_scalar(sum_to_n(x), 0.25), {x.dim(0), 1});  // mean per sample
    };
    Tensor source({2, 1});  // label 0
    Tensor target({2, 1});
    target[0] = target[1] = 1.0;  // label 1
    LossWeights w;
    w.lambda_rec = 0;
    w.lambda_adv = 0;
    w.lambda_gp = 0;
    w.lambda_cls = 1;

    // critic term must be BCE(logit=0, label=0) = ln 2 (real images, source
    // labels), not BCE(logit=8, ...) which the fake batch would produce
    double dl = d_step_loss(critic, cls, real, fake, source, w, rng).item();
    CHECK(dl == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // generator term must be BCE(logit=8, label=1) = softplus(-8) (fake
    // images, target labels)
    Tensor cond({2, 1});
    cond[0] = cond[1] = 1.0;
    double gl = g_step_loss(critic, cls, gen, real, cond, target, w, 1).item();
    CHECK(gl == doctest::Approx(std::log1p(std::exp(-8.0))).epsilon(1e-9));
}
