#include <doctest.h>

#include <cmath>

#include "coogan/lstu.hpp"
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

// five-layer doubling schedule with units on layers 1..4
i64 schedule_total(UnitKind kind, i64 base, i64 n_attrs) {
    i64 total = 0;
    i64 c = base;
    for (int l = 0; l < 4; ++l) {
        UnitSpec s;
        s.c_l = std::min<i64>(c, 1024);
        s.c_next = std::min<i64>(c * 2, 1024);
        s.n_attrs = n_attrs;
        total += unit_param_count(kind, s);
        c *= 2;
    }
    return total;
}

}  // namespace

TEST_CASE("unit shape contract and determinism") {
    Rng rng(1);
    nn::ParamMap pm;
    UnitSpec spec{8, 16, 3};
    auto lp = LSTUParams::make(pm, "u", rng, spec);
    Var x = leaf(randn(rng, {2, 8, 12, 12}), false);
    Var h = leaf(randn(rng, {2, 16, 6, 6}), false);
    Tensor ct({2, 3});
    ct[0] = 1;
    ct[1] = -1;
    Var cond = constant(ct);

    auto [skip, hidden] = lstu_forward(x, h, cond, lp);
    CHECK(skip.shape() == std::vector<i64>{2, 8, 12, 12});
    CHECK(hidden.node() == skip.node());  // same tensor by design

    auto [skip2, hidden2] = lstu_forward(x, h, cond, lp);
    for (i64 i = 0; i < skip.numel(); ++i) CHECK(skip.value()[i] == skip2.value()[i]);

    nn::ParamMap pm2;
    auto sp = STUParams::make(pm2, "u", rng, spec);
    auto [sskip, shidden] = stu_forward(x, h, cond, sp);
    CHECK(sskip.shape() == std::vector<i64>{2, 8, 12, 12});
    CHECK(shidden.shape() == std::vector<i64>{2, 8, 12, 12});
}

TEST_CASE("gates stay strictly inside (0,1) for finite inputs") {
    Rng rng(2);
    nn::ParamMap pm;
    UnitSpec spec{4, 8, 2};
    auto lp = LSTUParams::make(pm, "u", rng, spec);
    Var x = leaf(randn(rng, {1, 4, 8, 8}, 2.0), false);
    Var h = leaf(randn(rng, {1, 8, 4, 4}, 2.0), false);
    Var cond = constant(Tensor({1, 2}));

    // recompute the gate maps the same way the forward does
    Var hhat = concat_c({h, spatial_condition(cond, 4, 4)});
    Var t = leaky_relu(lp.transpose(hhat), 0.01);
    Var f = sigmoid(lp.forget(t));
    Var r = sigmoid(lp.reset(t));
    for (i64 i = 0; i < f.numel(); ++i) {
        CHECK(f.value()[i] > 0.0);
        CHECK(f.value()[i] < 1.0);
        CHECK(r.value()[i] > 0.0);
        CHECK(r.value()[i] < 1.0);
    }
}

TEST_CASE("reset gate saturated low passes the encoder feature through") {
    Rng rng(3);
    nn::ParamMap pm;
    UnitSpec spec{4, 8, 2};
    auto lp = LSTUParams::make(pm, "u", rng, spec);
    // drive r -> 0
    lp.reset.w.value().fill(0.0);
    lp.reset.b.value().fill(-1e4);
    Var x = leaf(randn(rng, {1, 4, 8, 8}), false);
    Var h = leaf(randn(rng, {1, 8, 4, 4}), false);
    Var cond = constant(Tensor({1, 2}));
    auto [skip, hidden] = lstu_forward(x, h, cond, lp);
    for (i64 i = 0; i < skip.numel(); ++i)
        CHECK(skip.value()[i] == doctest::Approx(x.value()[i]).epsilon(1e-12));
}

TEST_CASE("stu: z saturated low returns the up-sampled hidden state") {
    Rng rng(4);
    nn::ParamMap pm;
    UnitSpec spec{4, 8, 2};
    auto sp = STUParams::make(pm, "u", rng, spec);
    sp.gate_z.w.value().fill(0.0);
    sp.gate_z.b.value().fill(-1e4);
    Var x = leaf(randn(rng, {1, 4, 8, 8}), false);
    Var h = leaf(randn(rng, {1, 8, 4, 4}), false);
    Var cond = constant(Tensor({1, 2}));
    auto [skip, hidden] = stu_forward(x, h, cond, sp);
    Var shat = sp.transpose(concat_c({h, spatial_condition(cond, 4, 4)}));
    for (i64 i = 0; i < skip.numel(); ++i)
        CHECK(skip.value()[i] == doctest::Approx(shat.value()[i]).epsilon(1e-12));
}

TEST_CASE("lstu bounded output when reset gate saturates high") {
    Rng rng(5);
    nn::ParamMap pm;
    UnitSpec spec{4, 8, 2};
    auto lp = LSTUParams::make(pm, "u", rng, spec);
    lp.reset.w.value().fill(0.0);
    lp.reset.b.value().fill(1e4);  // r -> 1, output is tanh(c)
    Var x = leaf(randn(rng, {1, 4, 8, 8}, 3.0), false);
    Var h = leaf(randn(rng, {1, 8, 4, 4}, 3.0), false);
    Var cond = constant(Tensor({1, 2}));
    auto [skip, hidden] = lstu_forward(x, h, cond, lp);
    for (i64 i = 0; i < skip.numel(); ++i) CHECK(std::abs(skip.value()[i]) <= 1.0);
}

TEST_CASE("mismatched shapes raise dimension errors") {
    Rng rng(6);
    nn::ParamMap pm;
    UnitSpec spec{4, 8, 2};
    auto lp = LSTUParams::make(pm, "u", rng, spec);
    Var x = leaf(randn(rng, {1, 4, 8, 8}), false);
    Var h_bad = leaf(randn(rng, {1, 8, 3, 3}), false);
    Var cond = constant(Tensor({1, 2}));
    CHECK_THROWS_AS(lstu_forward(x, h_bad, cond, lp), dimension_error);
    Var h = leaf(randn(rng, {1, 8, 4, 4}), false);
    Var cond_bad = constant(Tensor({1, 5}));
    CHECK_THROWS_AS(lstu_forward(x, h, cond_bad, lp), dimension_error);
}

TEST_CASE("gradcheck: lstu backward vs central differences (C=4, H=W=8)") {
    Rng rng(7);
    nn::ParamMap pm;
    UnitSpec spec{4, 8, 2};
    auto lp = LSTUParams::make(pm, "u", rng, spec);
    Var x = leaf(randn(rng, {1, 4, 8, 8}, 0.5), true);
    Var h = leaf(randn(rng, {1, 8, 4, 4}, 0.5), true);
    Tensor ct({1, 2});
    ct[0] = 1;
    ct[1] = -1;
    Var cond = constant(ct);
    Var probe = constant(randn(rng, {1, 4, 8, 8}));

    auto f = [&] {
        auto [skip, hidden] = lstu_forward(x, h, cond, lp);
        return mean_all(mul(skip, probe));
    };
    std::vector<Var> ps = pm.vars();
    CHECK(pm.scalar_count() < 1000);
    ps.push_back(x);
    ps.push_back(h);
    auto r = gradcheck(f, ps);
    CHECK(r.rel_err < 1e-4);
}

TEST_CASE("gradcheck: stu backward vs central differences") {
    Rng rng(8);
    nn::ParamMap pm;
    UnitSpec spec{3, 6, 2};
    auto sp = STUParams::make(pm, "u", rng, spec);
    Var x = leaf(randn(rng, {1, 3, 6, 6}, 0.5), true);
    Var h = leaf(randn(rng, {1, 6, 3, 3}, 0.5), true);
    Tensor ct({1, 2});
    ct[0] = -1;
    Var cond = constant(ct);
    Var probe = constant(randn(rng, {1, 3, 6, 6}));

    auto f = [&] {
        auto [skip, hidden] = stu_forward(x, h, cond, sp);
        return add(mean_all(mul(skip, probe)), mul_scalar(mean_all(square(hidden)), 0.5));
    };
    std::vector<Var> ps = pm.vars();
    CHECK(pm.scalar_count() < 1000);
    ps.push_back(x);
    ps.push_back(h);
    auto r = gradcheck(f, ps);
    CHECK(r.rel_err < 1e-4);
}

TEST_CASE("unit parameter counts: closed form vs actual parameter tensors") {
    Rng rng(9);
    for (UnitKind kind : {UnitKind::lstu, UnitKind::stu}) {
        UnitSpec spec{16, 32, 13};
        nn::ParamMap pm;
        if (kind == UnitKind::lstu)
            LSTUParams::make(pm, "u", rng, spec);
        else
            STUParams::make(pm, "u", rng, spec);
        CHECK(pm.scalar_count() == unit_param_count(kind, spec));
    }
}

TEST_CASE("1x1 conv C->C contributes C^2 + C parameters") {
    Rng rng(10);
    nn::ParamMap pm;
    nn::Conv2d::make(pm, "c", rng, 24, 24, 1, 1, 0);
    CHECK(pm.scalar_count() == 24 * 24 + 24);
}

TEST_CASE("reference schedule totals land within 5% of the published table") {
    // five-layer network, channels doubling from the base, 4 units, N_c=13
    const double lstu_ref[3] = {0.81e6, 3.20e6, 12.68e6};
    const double stu_ref[3] = {1.63e6, 6.40e6, 25.37e6};
    const i64 bases[3] = {16, 32, 64};
    for (int i = 0; i < 3; ++i) {
        const double l = static_cast<double>(schedule_total(UnitKind::lstu, bases[i], 13));
        const double s = static_cast<double>(schedule_total(UnitKind::stu, bases[i], 13));
        CHECK(std::abs(l - lstu_ref[i]) / lstu_ref[i] < 0.05);
        CHECK(std::abs(s - stu_ref[i]) / stu_ref[i] < 0.05);
        // roughly half as many parameters as the GRU-derived baseline
        CHECK(l / s < 0.53);
        CHECK(l < s);
    }
}
