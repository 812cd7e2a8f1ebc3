#include "coogan/networks.hpp"

#include <algorithm>

namespace coogan {

using namespace ad;

std::string to_string(SkipMode m) {
    switch (m) {
        case SkipMode::none: return "none";
        case SkipMode::plain: return "plain";
        case SkipMode::lstu: return "lstu";
        case SkipMode::stu: return "stu";
    }
    return "?";
}

SkipMode skip_mode_from_string(const std::string& s) {
    if (s == "none") return SkipMode::none;
    if (s == "plain") return SkipMode::plain;
    if (s == "lstu") return SkipMode::lstu;
    if (s == "stu") return SkipMode::stu;
    throw config_error("unknown skip mode: " + s);
}

void GeneratorSpec::validate() const {
    if (n_layers < 2) throw config_error("GeneratorSpec: need at least 2 layers");
    if (base_channels < 1) throw config_error("GeneratorSpec: base_channels must be positive");
    if (input_channels != 3 && input_channels != 6)
        throw config_error("GeneratorSpec: input_channels must be 3 or 6");
    if (skip_count < 0 || skip_count > n_layers - 1)
        throw config_error("GeneratorSpec: skip_count must be in [0, n_layers-1]");
    if (skip_mode == SkipMode::none && skip_count != 0)
        throw config_error("GeneratorSpec: skip_mode none requires skip_count 0");
    if (n_attributes < 1) throw config_error("GeneratorSpec: n_attributes must be positive");
}

std::vector<i64> GeneratorSpec::channel_schedule() const {
    std::vector<i64> ch;
    i64 c = base_channels;
    for (int l = 0; l < n_layers; ++l) {
        ch.push_back(std::min<i64>(c, 1024));
        c *= 2;
    }
    return ch;
}

void DiscriminatorSpec::validate() const {
    if (n_layers < 1) throw config_error("DiscriminatorSpec: need at least 1 layer");
    if (base_channels < 1) throw config_error("DiscriminatorSpec: base_channels must be positive");
    if (n_attributes < 1) throw config_error("DiscriminatorSpec: n_attributes must be positive");
    if (input_size % (1 << n_layers) != 0 || final_spatial() < 1)
        throw config_error("DiscriminatorSpec: input_size must survive " +
                           std::to_string(n_layers) + " halvings");
}

std::vector<i64> DiscriminatorSpec::channel_schedule() const {
    std::vector<i64> ch;
    i64 c = base_channels;
    for (int l = 0; l < n_layers; ++l) {
        ch.push_back(std::min<i64>(c, 1024));
        c *= 2;
    }
    return ch;
}

bool Generator::has_skip(int layer) const {
    return spec_.skip_mode != SkipMode::none && layer >= 1 && layer <= spec_.skip_count;
}

Generator Generator::build(const GeneratorSpec& spec, std::uint64_t seed) {
    spec.validate();
    Generator g;
    g.spec_ = spec;
    Rng rng(seed);
    const auto ch = spec.channel_schedule();
    const int n = spec.n_layers;

    for (int l = 1; l <= n; ++l) {
        const i64 in_ch = (l == 1) ? spec.input_channels : ch[l - 2];
        g.enc_.push_back(
            nn::Conv2d::make(g.params_, "enc" + std::to_string(l) + ".conv", rng, in_ch,
                             ch[l - 1], 4, 2, 1));
        g.enc_norm_.push_back(
            nn::InstanceNorm::make(g.params_, "enc" + std::to_string(l) + ".norm", ch[l - 1]));
    }

    if (spec.skip_mode == SkipMode::lstu || spec.skip_mode == SkipMode::stu) {
        for (int j = 1; j <= spec.skip_count; ++j) {
            UnitSpec us;
            us.c_l = ch[j - 1];
            us.c_next = ch[j];
            us.n_attrs = spec.n_attributes;
            const std::string prefix = "skip" + std::to_string(j);
            if (spec.skip_mode == SkipMode::lstu)
                g.lstu_.push_back(LSTUParams::make(g.params_, prefix, rng, us));
            else
                g.stu_.push_back(STUParams::make(g.params_, prefix, rng, us));
        }
    }

    for (int l = n; l >= 1; --l) {
        i64 in_ch;
        if (l == n)
            in_ch = ch[n - 1] + spec.n_attributes;
        else
            in_ch = ch[l - 1] * (g.has_skip(l) ? 2 : 1);
        const i64 out_ch = (l >= 2) ? ch[l - 2] : 3;
        g.dec_.push_back(
            nn::ConvTranspose2d::make(g.params_, "dec" + std::to_string(l) + ".tconv", rng,
                                      in_ch, out_ch, 3, 2, 1));
        if (l >= 2)
            g.dec_norm_.push_back(
                nn::InstanceNorm::make(g.params_, "dec" + std::to_string(l) + ".norm", out_ch));
    }
    return g;
}

Var Generator::forward(const Var& x, const Var& cond) const {
    const int n = spec_.n_layers;
    if (x.value().ndim() != 4 || x.dim(1) != spec_.input_channels)
        throw dimension_error("generator: input expects " +
                              std::to_string(spec_.input_channels) + " channels, got " +
                              (x.value().ndim() == 4 ? std::to_string(x.dim(1)) : x.value().shape_str()));
    if ((x.dim(2) >> n) < 1 || x.dim(2) % (1 << n) != 0 || x.dim(2) != x.dim(3))
        throw dimension_error("generator: spatial size " + std::to_string(x.dim(2)) +
                              " must be square and divisible by 2^" + std::to_string(n));
    if (cond.value().ndim() != 2 || cond.dim(0) != x.dim(0) ||
        cond.dim(1) != spec_.n_attributes)
        throw dimension_error("generator: condition must be (N, " +
                              std::to_string(spec_.n_attributes) + ")");

    // encoder
    std::vector<Var> z(static_cast<size_t>(n) + 1);
    z[0] = x;
    for (int l = 1; l <= n; ++l)
        z[l] = leaky_relu(enc_norm_[l - 1](enc_[l - 1](z[l - 1])), 0.01);

    // skip features
    std::vector<Var> skip(static_cast<size_t>(n), Var());  // index by layer 1..n-1
    if (spec_.skip_mode == SkipMode::plain) {
        for (int j = 1; j <= spec_.skip_count; ++j) skip[j] = z[j];
    } else if (spec_.skip_mode == SkipMode::lstu || spec_.skip_mode == SkipMode::stu) {
        Var hidden;  // from the next deeper unit
        for (int j = spec_.skip_count; j >= 1; --j) {
            Var h = (j == spec_.skip_count) ? z[j + 1] : hidden;
            if (spec_.skip_mode == SkipMode::lstu) {
                auto [s, hid] = lstu_forward(z[j], h, cond, lstu_[j - 1]);
                skip[j] = s;
                hidden = hid;
            } else {
                auto [s, hid] = stu_forward(z[j], h, cond, stu_[j - 1]);
                skip[j] = s;
                hidden = hid;
            }
        }
    }

    // decoder with condition at the bottleneck
    Var d = concat_c({z[n], spatial_condition(cond, z[n].dim(2), z[n].dim(3))});
    int di = 0;
    for (int l = n; l >= 2; --l, ++di) {
        Var u = relu(dec_norm_[di](dec_[di](d)));
        d = has_skip(l - 1) ? concat_c({u, skip[l - 1]}) : u;
    }
    return tanh_op(dec_[di](d));
}

ImageTensor Generator::translate(const ImageTensor& x, const DiffVector& d) const {
    if (d.size() != spec_.n_attributes)
        throw dimension_error("generator: DiffVector has wrong length");
    NoGradGuard ng;
    Var xin = constant(x.data.reshaped({1, x.channels(), x.height(), x.width()}).clone());
    Var out = forward(xin, cond_row(d));
    return ImageTensor(out.value().reshaped({3, x.height(), x.width()}).clone());
}

std::vector<LayerDesc> Generator::describe() const {
    std::vector<LayerDesc> ds;
    const auto ch = spec_.channel_schedule();
    const int n = spec_.n_layers;
    auto push = [&](LayerDesc::Kind k, const std::string& nm, i64 ci, i64 co, int kk, int st) {
        LayerDesc d;
        d.kind = k;
        d.name = nm;
        d.c_in = ci;
        d.c_out = co;
        d.k = kk;
        d.stride = st;
        ds.push_back(d);
    };
    for (int l = 1; l <= n; ++l) {
        const i64 in_ch = (l == 1) ? spec_.input_channels : ch[l - 2];
        push(LayerDesc::Kind::conv, "enc" + std::to_string(l), in_ch, ch[l - 1], 4, 2);
        push(LayerDesc::Kind::inorm, "enc" + std::to_string(l) + ".norm", ch[l - 1], ch[l - 1], 0, 1);
        push(LayerDesc::Kind::act, "enc" + std::to_string(l) + ".lrelu", ch[l - 1], ch[l - 1], 0, 1);
    }
    if (spec_.skip_mode == SkipMode::lstu || spec_.skip_mode == SkipMode::stu) {
        for (int j = 1; j <= spec_.skip_count; ++j) {
            LayerDesc d;
            d.kind = LayerDesc::Kind::unit;
            d.name = "skip" + std::to_string(j);
            d.unit_kind = spec_.skip_mode == SkipMode::lstu ? UnitKind::lstu : UnitKind::stu;
            d.unit_spec.c_l = ch[j - 1];
            d.unit_spec.c_next = ch[j];
            d.unit_spec.n_attrs = spec_.n_attributes;
            d.c_in = ch[j - 1];
            d.c_out = ch[j - 1];
            ds.push_back(d);
        }
    }
    push(LayerDesc::Kind::concat_cond, "bottleneck.cond", ch[n - 1], ch[n - 1] + spec_.n_attributes, 0, 1);
    for (int l = n; l >= 1; --l) {
        i64 in_ch = (l == n) ? ch[n - 1] + spec_.n_attributes
                             : ch[l - 1] * (has_skip(l) ? 2 : 1);
        const i64 out_ch = (l >= 2) ? ch[l - 2] : 3;
        push(LayerDesc::Kind::tconv, "dec" + std::to_string(l), in_ch, out_ch, 3, 2);
        if (l >= 2) {
            push(LayerDesc::Kind::inorm, "dec" + std::to_string(l) + ".norm", out_ch, out_ch, 0, 1);
            push(LayerDesc::Kind::act, "dec" + std::to_string(l) + ".relu", out_ch, out_ch, 0, 1);
            if (has_skip(l - 1))
                push(LayerDesc::Kind::skip_concat, "dec" + std::to_string(l) + ".skip", out_ch,
                     2 * out_ch, 0, 1);
        } else {
            push(LayerDesc::Kind::act, "out.tanh", 3, 3, 0, 1);
        }
    }
    return ds;
}

Discriminator Discriminator::build(const DiscriminatorSpec& spec, std::uint64_t seed) {
    spec.validate();
    Discriminator d;
    d.spec_ = spec;
    Rng rng(seed);
    const auto ch = spec.channel_schedule();
    for (int l = 1; l <= spec.n_layers; ++l) {
        const i64 in_ch = (l == 1) ? 3 : ch[l - 2];
        d.trunk_.push_back(nn::Conv2d::make(d.params_, "trunk" + std::to_string(l) + ".conv",
                                            rng, in_ch, ch[l - 1], 4, 2, 1));
    }
    const i64 flat = ch[spec.n_layers - 1] * spec.final_spatial() * spec.final_spatial();
    d.adv_head_ = nn::Linear::make(d.params_, "adv_head", rng, flat, 1);
    d.cls_head_ = nn::Linear::make(d.params_, "cls_head", rng, flat, spec.n_attributes);
    return d;
}

Discriminator::Heads Discriminator::forward(const Var& x) const {
    if (x.value().ndim() != 4 || x.dim(1) != 3)
        throw dimension_error("discriminator: expected (N,3,S,S) input");
    if (x.dim(2) != spec_.input_size || x.dim(3) != spec_.input_size)
        throw dimension_error("discriminator: expected input size " +
                              std::to_string(spec_.input_size) + ", got " +
                              std::to_string(x.dim(2)));
    Var h = x;
    for (const auto& c : trunk_) h = leaky_relu(c(h), 0.01);
    const i64 nb = h.dim(0);
    Var flat = reshape(h, {nb, h.dim(1) * h.dim(2) * h.dim(3)});
    Heads out;
    out.adv = reshape(adv_head_(flat), {nb});
    out.logits = cls_head_(flat);
    return out;
}

std::vector<LayerDesc> Discriminator::describe() const {
    std::vector<LayerDesc> ds;
    const auto ch = spec_.channel_schedule();
    for (int l = 1; l <= spec_.n_layers; ++l) {
        LayerDesc c;
        c.kind = LayerDesc::Kind::conv;
        c.name = "trunk" + std::to_string(l);
        c.c_in = (l == 1) ? 3 : ch[l - 2];
        c.c_out = ch[l - 1];
        c.k = 4;
        c.stride = 2;
        ds.push_back(c);
        LayerDesc a;
        a.kind = LayerDesc::Kind::act;
        a.name = "trunk" + std::to_string(l) + ".lrelu";
        a.c_in = a.c_out = ch[l - 1];
        ds.push_back(a);
    }
    const i64 flat = ch[spec_.n_layers - 1] * spec_.final_spatial() * spec_.final_spatial();
    LayerDesc adv;
    adv.kind = LayerDesc::Kind::linear;
    adv.name = "adv_head";
    adv.c_in = flat;
    adv.c_out = 1;
    ds.push_back(adv);
    LayerDesc cls;
    cls.kind = LayerDesc::Kind::linear;
    cls.name = "cls_head";
    cls.c_in = flat;
    cls.c_out = spec_.n_attributes;
    ds.push_back(cls);
    return ds;
}

}  // namespace coogan
