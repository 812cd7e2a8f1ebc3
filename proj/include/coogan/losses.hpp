#pragma once

#include <functional>
#include <vector>

#include "coogan/core.hpp"
#include "coogan/networks.hpp"
#include "coogan/rng.hpp"

namespace coogan {

struct LossWeights {
    double lambda_rec = 100.0;
    double lambda_cls = 10.0;
    double lambda_gp = 10.0;
    double lambda_adv = 1.0;

    void validate() const {
        for (double v : {lambda_rec, lambda_cls, lambda_gp}) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw config_error("LossWeights: weights must be finite and non-negative");
        }
        if (!std::isfinite(lambda_adv)) throw config_error("LossWeights: lambda_adv must be finite");
    }
};

// Generic callables so the contract tests can plug stub networks.
using GenFn = std::function<ad::Var(const ad::Var& x, const ad::Var& cond)>;
using CriticFn = std::function<ad::Var(const ad::Var& x)>;  // (N,...) -> (N)

// (N, n) tensor of 0/1 labels
Tensor labels_to_tensor(const std::vector<AttributeVector>& labels);
// (N, n) tensor of {-1,0,1} condition rows
Tensor diffs_to_tensor(const std::vector<DiffVector>& diffs);

// Mean absolute reconstruction error of the zero-condition pass:
// mean |x - G(x, 0)|.
ad::Var rec_loss(const ad::Var& x, const GenFn& g, int n_attributes);
ad::Var rec_loss(const ad::Var& x, const Generator& g);

// Critic loss to minimize: E[D(fake)] - E[D(real)]
// + lambda_gp * E[(||grad_xhat D(xhat)||_2 - 1)^2], xhat on per-sample
// segments between real and fake.
ad::Var d_adv_loss(const CriticFn& critic, const ad::Var& real, const ad::Var& fake,
                   double lambda_gp, Rng& rng);
ad::Var d_adv_loss(const Discriminator& d, const ad::Var& real, const ad::Var& fake,
                   double lambda_gp, Rng& rng);

// Generator adversarial loss to minimize: -E[D(fake)].
ad::Var g_adv_loss(const CriticFn& critic, const ad::Var& fake);
ad::Var g_adv_loss(const Discriminator& d, const ad::Var& fake);

// Per-attribute binary cross entropy against 0/1 targets, summed over
// attributes, averaged over the batch. Numerically stable in the logits.
ad::Var attr_cls_loss(const ad::Var& logits, const Tensor& targets01);
ad::Var attr_cls_loss(const ad::Var& logits, const std::vector<AttributeVector>& targets);

// Weighted combinations. The classification split follows the ACGAN
// convention: the critic's term uses real images with source labels, the
// generator's uses fakes with target labels.
ad::Var total_d_loss(const ad::Var& d_adv, const ad::Var& cls_real_source, const LossWeights& w);
ad::Var total_g_loss(const ad::Var& g_adv, const ad::Var& cls_fake_target, const ad::Var& rec,
                     const LossWeights& w);

// Full per-step objectives used by the trainers (and contract-tested with
// stub heads).
using ClsFn = std::function<ad::Var(const ad::Var& x)>;  // images -> (N, n) logits

ad::Var d_step_loss(const CriticFn& critic, const ClsFn& cls, const ad::Var& real,
                    const ad::Var& fake, const Tensor& source_labels, const LossWeights& w,
                    Rng& rng);
ad::Var g_step_loss(const CriticFn& critic, const ClsFn& cls, const GenFn& gen, const ad::Var& x,
                    const Tensor& edit_cond, const Tensor& target_labels, const LossWeights& w,
                    int n_attributes);

}  // namespace coogan
