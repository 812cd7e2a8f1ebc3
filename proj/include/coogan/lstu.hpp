#pragma once

#include <utility>

#include "coogan/core.hpp"
#include "coogan/nn.hpp"

namespace coogan {

enum class UnitKind { lstu, stu };

// Shape contract of one gated skip unit: encoder feature with c_l channels
// at full resolution, hidden state with c_next channels at half resolution,
// n_attrs condition channels.
struct UnitSpec {
    i64 c_l = 0;
    i64 c_next = 0;
    i64 n_attrs = 13;
    int k_transpose = 3;  // stride-2 transpose kernel
    int k_gate = 3;

    void validate() const {
        if (c_l < 1 || c_next < 1 || n_attrs < 1)
            throw config_error("UnitSpec: channel counts must be positive");
    }
};

// SRU-derived light unit: gates come from the single up-sampled hidden
// state, the output blends a forget-gated candidate with a highway to the
// raw encoder feature.
struct LSTUParams {
    nn::ConvTranspose2d transpose;  // (c_next + n_attrs) -> c_l, x2 upsample
    nn::Conv2d linear;              // 1x1, c_l -> c_l
    nn::Conv2d forget;              // k_gate, c_l -> c_l
    nn::Conv2d reset;               // k_gate, c_l -> c_l
    UnitSpec spec;

    static LSTUParams make(nn::ParamMap& pm, const std::string& prefix, Rng& rng,
                           const UnitSpec& spec);
};

// GRU-derived STGAN baseline: gates need both the encoder feature and the
// up-sampled hidden state.
struct STUParams {
    nn::ConvTranspose2d transpose;  // (c_next + n_attrs) -> c_l
    nn::Conv2d gate_r;              // k_gate, 2*c_l -> c_l
    nn::Conv2d gate_z;              // k_gate, 2*c_l -> c_l
    nn::Conv2d cand;                // k_gate, 2*c_l -> c_l
    UnitSpec spec;

    static STUParams make(nn::ParamMap& pm, const std::string& prefix, Rng& rng,
                          const UnitSpec& spec);
};

// Batched unit forward. x_l: (N, c_l, H, W); h_next: (N, c_next, H/2, W/2);
// cond: (N, n_attrs). Returns (skip_out, hidden_out), both (N, c_l, H, W).
std::pair<ad::Var, ad::Var> lstu_forward(const ad::Var& x_l, const ad::Var& h_next,
                                         const ad::Var& cond, const LSTUParams& p,
                                         double leak = 0.01);
std::pair<ad::Var, ad::Var> stu_forward(const ad::Var& x_l, const ad::Var& h_next,
                                        const ad::Var& cond, const STUParams& p);

// Single-sample convenience overloads taking a DiffVector.
std::pair<ad::Var, ad::Var> lstu_forward(const ad::Var& x_l, const ad::Var& h_next,
                                         const DiffVector& d, const LSTUParams& p,
                                         double leak = 0.01);
std::pair<ad::Var, ad::Var> stu_forward(const ad::Var& x_l, const ad::Var& h_next,
                                        const DiffVector& d, const STUParams& p);

// Exact learnable scalar count (weights + biases) of one unit.
i64 unit_param_count(UnitKind kind, const UnitSpec& spec);

// (N, n_attrs) condition -> (N, n_attrs, h, w) constant planes.
ad::Var spatial_condition(const ad::Var& cond, i64 h, i64 w);

// Pack a single DiffVector as a (1, n) condition row.
ad::Var cond_row(const DiffVector& d);

}  // namespace coogan
