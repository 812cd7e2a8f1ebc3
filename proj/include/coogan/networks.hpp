#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coogan/core.hpp"
#include "coogan/lstu.hpp"
#include "coogan/nn.hpp"

namespace coogan {

enum class SkipMode { none, plain, lstu, stu };

std::string to_string(SkipMode m);
SkipMode skip_mode_from_string(const std::string& s);

struct GeneratorSpec {
    int n_layers = 5;
    int base_channels = 16;
    int input_channels = 3;  // 3 global, 6 local
    SkipMode skip_mode = SkipMode::lstu;
    int skip_count = 4;
    int n_attributes = 13;

    void validate() const;
    // encoder widths, doubling up to the 1024 cap
    std::vector<i64> channel_schedule() const;
};

struct DiscriminatorSpec {
    int n_layers = 4;
    int base_channels = 16;
    int n_attributes = 13;
    int input_size = 64;

    void validate() const;
    std::vector<i64> channel_schedule() const;
    i64 final_spatial() const { return input_size >> n_layers; }
};

// One entry of a model's architectural self-description; feeds the
// analytic profiler.
struct LayerDesc {
    enum class Kind { conv, tconv, linear, inorm, act, concat_cond, skip_concat, unit };
    Kind kind = Kind::conv;
    std::string name;
    i64 c_in = 0, c_out = 0;
    int k = 0, stride = 1;
    UnitKind unit_kind = UnitKind::lstu;  // for Kind::unit
    UnitSpec unit_spec;                   // for Kind::unit
};

// U-Net style generator: 4x4/stride-2 encoder, 3x3/stride-2 transpose
// decoder, tanh output head; condition enters at the bottleneck and, for
// gated skip modes, at every unit.
class Generator {
public:
    static Generator build(const GeneratorSpec& spec, std::uint64_t seed);

    // x: (N, input_channels, S, S); cond: (N, n_attributes) in {-1,0,1}
    ad::Var forward(const ad::Var& x, const ad::Var& cond) const;

    // single-image inference without tape
    ImageTensor translate(const ImageTensor& x, const DiffVector& d) const;

    const GeneratorSpec& spec() const { return spec_; }
    nn::ParamMap& params() { return params_; }
    const nn::ParamMap& params() const { return params_; }
    std::vector<LayerDesc> describe() const;
    bool has_skip(int layer) const;  // layer in 1..n_layers-1

private:
    GeneratorSpec spec_;
    nn::ParamMap params_;
    std::vector<nn::Conv2d> enc_;
    std::vector<nn::InstanceNorm> enc_norm_;
    std::vector<nn::ConvTranspose2d> dec_;
    std::vector<nn::InstanceNorm> dec_norm_;  // for all but the output block
    std::vector<LSTUParams> lstu_;            // indexed by skip slot
    std::vector<STUParams> stu_;
};

// Critic with two heads on a shared convolutional trunk: an unbounded
// adversarial score and raw per-attribute logits.
class Discriminator {
public:
    static Discriminator build(const DiscriminatorSpec& spec, std::uint64_t seed);

    struct Heads {
        ad::Var adv;     // (N)
        ad::Var logits;  // (N, n_attributes)
    };
    Heads forward(const ad::Var& x) const;

    const DiscriminatorSpec& spec() const { return spec_; }
    nn::ParamMap& params() { return params_; }
    const nn::ParamMap& params() const { return params_; }
    std::vector<LayerDesc> describe() const;

private:
    DiscriminatorSpec spec_;
    nn::ParamMap params_;
    std::vector<nn::Conv2d> trunk_;
    nn::Linear adv_head_;
    nn::Linear cls_head_;
};

// --- checkpoints ----------------------------------------------------------
// A checkpoint is a directory: manifest.json (kind + spec + parameter
// names/shapes + free-form meta) plus one .npy file per named parameter.

void save_generator(const Generator& g, const std::string& dir,
                    const std::string& meta_json = "");
Generator load_generator(const std::string& dir);
void save_discriminator(const Discriminator& d, const std::string& dir,
                        const std::string& meta_json = "");
Discriminator load_discriminator(const std::string& dir);

// kind field of a checkpoint manifest ("generator" / "discriminator")
std::string checkpoint_kind(const std::string& dir);
// the manifest's meta object as JSON text ("{}" when absent)
std::string checkpoint_meta_json(const std::string& dir);

}  // namespace coogan
