#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coogan/autodiff.hpp"
#include "coogan/rng.hpp"

namespace coogan::nn {

using ad::Var;

// Named learnable parameters of a model, in registration order. Names are
// stable across runs and double as checkpoint file names.
class ParamMap {
public:
    Var& add(const std::string& name, Tensor init) {
        items_.emplace_back(name, ad::leaf(std::move(init), true));
        return items_.back().second;
    }

    std::vector<std::pair<std::string, Var>>& items() { return items_; }
    const std::vector<std::pair<std::string, Var>>& items() const { return items_; }

    std::vector<Var> vars() const {
        std::vector<Var> v;
        v.reserve(items_.size());
        for (const auto& kv : items_) v.push_back(kv.second);
        return v;
    }

    i64 scalar_count() const {
        i64 n = 0;
        for (const auto& kv : items_) n += kv.second.numel();
        return n;
    }

    const Var* find(const std::string& name) const {
        for (const auto& kv : items_)
            if (kv.first == name) return &kv.second;
        return nullptr;
    }

private:
    std::vector<std::pair<std::string, Var>> items_;
};

Tensor he_normal(Rng& rng, std::vector<i64> shape, i64 fan_in);

struct Conv2d {
    Var w;  // (out, in, k, k)
    Var b;  // (out)
    int stride = 1;
    int pad = 0;

    static Conv2d make(ParamMap& pm, const std::string& name, Rng& rng, i64 in_ch, i64 out_ch,
                       int k, int stride, int pad);
    Var operator()(const Var& x) const;
    i64 in_channels() const { return w.dim(1); }
    i64 out_channels() const { return w.dim(0); }
    i64 kernel() const { return w.dim(2); }
};

// Stride-2 kernels sized so [out = in * stride] holds exactly
// (output padding folded into the requested output size).
struct ConvTranspose2d {
    Var w;  // stored as the matching conv kernel: (in, out, k, k)
    Var b;  // (out)
    int stride = 2;
    int pad = 1;

    static ConvTranspose2d make(ParamMap& pm, const std::string& name, Rng& rng, i64 in_ch,
                                i64 out_ch, int k, int stride, int pad);
    Var operator()(const Var& x) const;  // doubles the spatial size for stride 2
    i64 in_channels() const { return w.dim(0); }
    i64 out_channels() const { return w.dim(1); }
    i64 kernel() const { return w.dim(2); }
};

struct InstanceNorm {
    Var gamma;  // (C)
    Var beta;   // (C)
    double eps = 1e-5;

    static InstanceNorm make(ParamMap& pm, const std::string& name, i64 channels);
    Var operator()(const Var& x) const;
};

struct Linear {
    Var w;  // (out, in)
    Var b;  // (out)

    static Linear make(ParamMap& pm, const std::string& name, Rng& rng, i64 in_f, i64 out_f);
    Var operator()(const Var& x) const;  // x: (N, in)
};

// Adam with per-parameter first/second moment state.
class Adam {
public:
    Adam(double beta1, double beta2, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // lr passed per call so schedules stay external
    void step(std::vector<Var>& params, const std::vector<Var>& grads, double lr);
    i64 steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    i64 t_ = 0;
    std::vector<Tensor> m_, v_;
};

bool all_finite(const Tensor& t);

}  // namespace coogan::nn
