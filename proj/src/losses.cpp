#include "coogan/losses.hpp"

namespace coogan {

using namespace ad;

Tensor labels_to_tensor(const std::vector<AttributeVector>& labels) {
    if (labels.empty()) throw dimension_error("labels_to_tensor: empty batch");
    const i64 n = static_cast<i64>(labels.size());
    const i64 c = labels.front().size();
    Tensor t({n, c});
    for (i64 i = 0; i < n; ++i) {
        if (labels[static_cast<size_t>(i)].size() != c)
            throw dimension_error("labels_to_tensor: ragged label batch");
        for (i64 j = 0; j < c; ++j)
            t[i * c + j] = static_cast<double>(labels[static_cast<size_t>(i)].values[static_cast<size_t>(j)]);
    }
    return t;
}

Tensor diffs_to_tensor(const std::vector<DiffVector>& diffs) {
    if (diffs.empty()) throw dimension_error("diffs_to_tensor: empty batch");
    const i64 n = static_cast<i64>(diffs.size());
    const i64 c = diffs.front().size();
    Tensor t({n, c});
    for (i64 i = 0; i < n; ++i) {
        if (diffs[static_cast<size_t>(i)].size() != c)
            throw dimension_error("diffs_to_tensor: ragged batch");
        for (i64 j = 0; j < c; ++j)
            t[i * c + j] = static_cast<double>(diffs[static_cast<size_t>(i)].values[static_cast<size_t>(j)]);
    }
    return t;
}

Var rec_loss(const Var& x, const GenFn& g, int n_attributes) {
    Var zero_cond = constant(Tensor({x.dim(0), n_attributes}));
    Var recon = g(x, zero_cond);
    return mean_all(abs_op(sub(x, recon)));
}

Var rec_loss(const Var& x, const Generator& g) {
    return rec_loss(
        x, [&g](const Var& xi, const Var& c) { return g.forward(xi, c); },
        g.spec().n_attributes);
}

Var d_adv_loss(const CriticFn& critic, const Var& real, const Var& fake, double lambda_gp,
               Rng& rng) {
    check_same_shape(real.value(), fake.value(), "d_adv_loss");
    const i64 n = real.dim(0);
    Var diff = sub(mean_all(critic(fake)), mean_all(critic(real)));

    // per-sample point on the segment between real and fake
    Tensor xhat_val(real.shape());
    {
        const double* pr = real.value().data();
        const double* pf = fake.value().data();
        double* px = xhat_val.data();
        const i64 per = real.numel() / n;
        for (i64 i = 0; i < n; ++i) {
            const double e = rng.uniform();
            for (i64 j = 0; j < per; ++j)
                px[i * per + j] = e * pr[i * per + j] + (1.0 - e) * pf[i * per + j];
        }
    }
    Var xhat = leaf(std::move(xhat_val), true);
    Var score_sum = sum_all(critic(xhat));
    Var gx;
    if (score_sum.requires_grad()) {
        gx = grad(score_sum, {xhat}, true)[0];
    } else {
        // degenerate critic that ignores its input: gradient is identically 0
        gx = constant(Tensor(real.shape()));
    }
    Var norm = sqrt_op(add_scalar(sum_to_n(square(gx)), 1e-12));
    Var gp = mean_all(square(add_scalar(norm, -1.0)));
    return add(diff, mul_scalar(gp, lambda_gp));
}

Var d_adv_loss(const Discriminator& d, const Var& real, const Var& fake, double lambda_gp,
               Rng& rng) {
    return d_adv_loss([&d](const Var& x) { return d.forward(x).adv; }, real, fake, lambda_gp,
                      rng);
}

Var g_adv_loss(const CriticFn& critic, const Var& fake) { return neg(mean_all(critic(fake))); }

Var g_adv_loss(const Discriminator& d, const Var& fake) {
    return g_adv_loss([&d](const Var& x) { return d.forward(x).adv; }, fake);
}

Var attr_cls_loss(const Var& logits, const Tensor& targets01) {
    if (logits.value().ndim() != 2) throw dimension_error("attr_cls_loss: logits must be (N, n)");
    check_same_shape(logits.value(), targets01, "attr_cls_loss");
    const i64 n = logits.dim(0);
    // BCE(z, a) = softplus(z) - z*a, summed over attributes, mean over batch
    Var t = constant(targets01);
    Var per = sub(softplus(logits), mul(logits, t));
    return mul_scalar(sum_all(per), 1.0 / static_cast<double>(n));
}

Var attr_cls_loss(const Var& logits, const std::vector<AttributeVector>& targets) {
    return attr_cls_loss(logits, labels_to_tensor(targets));
}

Var total_d_loss(const Var& d_adv, const Var& cls_real_source, const LossWeights& w) {
    w.validate();
    return add(d_adv, mul_scalar(cls_real_source, w.lambda_cls));
}

Var total_g_loss(const Var& g_adv, const Var& cls_fake_target, const Var& rec,
                 const LossWeights& w) {
    w.validate();
    return add(mul_scalar(g_adv, w.lambda_adv),
               add(mul_scalar(cls_fake_target, w.lambda_cls), mul_scalar(rec, w.lambda_rec)));
}

Var d_step_loss(const CriticFn& critic, const ClsFn& cls, const Var& real, const Var& fake,
                const Tensor& source_labels, const LossWeights& w, Rng& rng) {
    Var adv = d_adv_loss(critic, real, fake, w.lambda_gp, rng);
    Var cls_term = attr_cls_loss(cls(real), source_labels);
    return total_d_loss(adv, cls_term, w);
}

Var g_step_loss(const CriticFn& critic, const ClsFn& cls, const GenFn& gen, const Var& x,
                const Tensor& edit_cond, const Tensor& target_labels, const LossWeights& w,
                int n_attributes) {
    Var fake = gen(x, constant(edit_cond));
    Var adv = g_adv_loss(critic, fake);
    Var cls_term = attr_cls_loss(cls(fake), target_labels);
    Var rec = rec_loss(x, gen, n_attributes);
    return total_g_loss(adv, cls_term, rec, w);
}

}  // namespace coogan
