#include "coogan/nn.hpp"

#include <cmath>

namespace coogan::nn {

using namespace ad;

Tensor he_normal(Rng& rng, std::vector<i64> shape, i64 fan_in) {
    Tensor t(std::move(shape));
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    double* p = t.data();
    for (i64 i = 0; i < t.numel(); ++i) p[i] = rng.gaussian(0.0, std);
    return t;
}

Conv2d Conv2d::make(ParamMap& pm, const std::string& name, Rng& rng, i64 in_ch, i64 out_ch,
                    int k, int stride, int pad) {
    Conv2d c;
    c.w = pm.add(name + ".w", he_normal(rng, {out_ch, in_ch, k, k}, in_ch * k * k));
    c.b = pm.add(name + ".b", Tensor({out_ch}));
    c.stride = stride;
    c.pad = pad;
    return c;
}

Var Conv2d::operator()(const Var& x) const {
    Var y = conv2d_raw(x, w, stride, pad);
    return add(y, bcast_c(b, y.dim(0), y.dim(2), y.dim(3)));
}

ConvTranspose2d ConvTranspose2d::make(ParamMap& pm, const std::string& name, Rng& rng,
                                      i64 in_ch, i64 out_ch, int k, int stride, int pad) {
    ConvTranspose2d c;
    c.w = pm.add(name + ".w", he_normal(rng, {in_ch, out_ch, k, k}, out_ch * k * k));
    c.b = pm.add(name + ".b", Tensor({out_ch}));
    c.stride = stride;
    c.pad = pad;
    return c;
}

Var ConvTranspose2d::operator()(const Var& x) const {
    const i64 out_h = x.dim(2) * stride;
    const i64 out_w = x.dim(3) * stride;
    Var y = conv_transpose2d_raw(x, w, stride, pad, out_h, out_w);
    return add(y, bcast_c(b, y.dim(0), y.dim(2), y.dim(3)));
}

InstanceNorm InstanceNorm::make(ParamMap& pm, const std::string& name, i64 channels) {
    InstanceNorm in;
    in.gamma = pm.add(name + ".gamma", Tensor::full({channels}, 1.0));
    in.beta = pm.add(name + ".beta", Tensor({channels}));
    return in;
}

Var InstanceNorm::operator()(const Var& x) const {
    const i64 h = x.dim(2), w = x.dim(3);
    Var mu = mean_hw(x);
    Var xc = sub(x, bcast_hw(mu, h, w));
    Var var = mean_hw(mul(xc, xc));
    Var xn = mul(xc, bcast_hw(rsqrt(var, eps), h, w));
    Var g = bcast_c(gamma, x.dim(0), h, w);
    Var bb = bcast_c(beta, x.dim(0), h, w);
    return add(mul(xn, g), bb);
}

Linear Linear::make(ParamMap& pm, const std::string& name, Rng& rng, i64 in_f, i64 out_f) {
    Linear l;
    // Xavier-style scale for heads
    Tensor t({out_f, in_f});
    const double std = std::sqrt(1.0 / static_cast<double>(in_f));
    double* p = t.data();
    for (i64 i = 0; i < t.numel(); ++i) p[i] = rng.gaussian(0.0, std);
    l.w = pm.add(name + ".w", std::move(t));
    l.b = pm.add(name + ".b", Tensor({out_f}));
    return l;
}

Var Linear::operator()(const Var& x) const {
    Var y = matmul_nt(x, w);  // (N, out)
    Var y4 = reshape(y, {y.dim(0), y.dim(1), 1, 1});
    Var yb = add(y4, bcast_c(b, y.dim(0), 1, 1));
    return reshape(yb, {y.dim(0), y.dim(1)});
}

void Adam::step(std::vector<Var>& params, const std::vector<Var>& grads, double lr) {
    if (params.size() != grads.size()) throw error("Adam::step: param/grad count mismatch");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(Tensor(p.shape()));
            v_.emplace_back(Tensor(p.shape()));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].value().data();
        const double* g = grads[i].value().data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const i64 n = params[i].numel();
        for (i64 j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

bool all_finite(const Tensor& t) {
    const double* p = t.data();
    for (i64 i = 0; i < t.numel(); ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

}  // namespace coogan::nn
