#include "coogan/lstu.hpp"

namespace coogan {

using namespace ad;

LSTUParams LSTUParams::make(nn::ParamMap& pm, const std::string& prefix, Rng& rng,
                            const UnitSpec& spec) {
    spec.validate();
    LSTUParams p;
    p.spec = spec;
    p.transpose = nn::ConvTranspose2d::make(pm, prefix + ".transpose", rng,
                                            spec.c_next + spec.n_attrs, spec.c_l,
                                            spec.k_transpose, 2, (spec.k_transpose - 1) / 2);
    p.linear = nn::Conv2d::make(pm, prefix + ".linear", rng, spec.c_l, spec.c_l, 1, 1, 0);
    p.forget = nn::Conv2d::make(pm, prefix + ".forget", rng, spec.c_l, spec.c_l, spec.k_gate, 1,
                                (spec.k_gate - 1) / 2);
    p.reset = nn::Conv2d::make(pm, prefix + ".reset", rng, spec.c_l, spec.c_l, spec.k_gate, 1,
                               (spec.k_gate - 1) / 2);
    return p;
}

STUParams STUParams::make(nn::ParamMap& pm, const std::string& prefix, Rng& rng,
                          const UnitSpec& spec) {
    spec.validate();
    STUParams p;
    p.spec = spec;
    p.transpose = nn::ConvTranspose2d::make(pm, prefix + ".transpose", rng,
                                            spec.c_next + spec.n_attrs, spec.c_l,
                                            spec.k_transpose, 2, (spec.k_transpose - 1) / 2);
    p.gate_r = nn::Conv2d::make(pm, prefix + ".gate_r", rng, 2 * spec.c_l, spec.c_l, spec.k_gate,
                                1, (spec.k_gate - 1) / 2);
    p.gate_z = nn::Conv2d::make(pm, prefix + ".gate_z", rng, 2 * spec.c_l, spec.c_l, spec.k_gate,
                                1, (spec.k_gate - 1) / 2);
    p.cand = nn::Conv2d::make(pm, prefix + ".cand", rng, 2 * spec.c_l, spec.c_l, spec.k_gate, 1,
                              (spec.k_gate - 1) / 2);
    return p;
}

Var spatial_condition(const Var& cond, i64 h, i64 w) {
    if (cond.value().ndim() != 2) throw dimension_error("spatial_condition: expected (N, n_attrs)");
    Var c4 = reshape(cond, {cond.dim(0), cond.dim(1), 1, 1});
    return bcast_hw(c4, h, w);
}

Var cond_row(const DiffVector& d) {
    Tensor t({1, d.size()});
    for (int i = 0; i < d.size(); ++i) t[i] = static_cast<double>(d.values[static_cast<size_t>(i)]);
    return constant(std::move(t));
}

namespace {

void check_unit_inputs(const Var& x_l, const Var& h_next, const Var& cond, const UnitSpec& spec,
                       const char* unit) {
    if (x_l.value().ndim() != 4 || h_next.value().ndim() != 4)
        throw dimension_error(std::string(unit) + ": expected NCHW inputs");
    if (x_l.dim(1) != spec.c_l)
        throw dimension_error(std::string(unit) + ": encoder feature has " +
                              std::to_string(x_l.dim(1)) + " channels, unit expects " +
                              std::to_string(spec.c_l));
    if (h_next.dim(1) != spec.c_next)
        throw dimension_error(std::string(unit) + ": hidden state channel mismatch");
    if (h_next.dim(2) * 2 != x_l.dim(2) || h_next.dim(3) * 2 != x_l.dim(3))
        throw dimension_error(std::string(unit) +
                              ": hidden state must be at half the encoder resolution");
    if (cond.dim(0) != x_l.dim(0) || cond.dim(1) != spec.n_attrs)
        throw dimension_error(std::string(unit) + ": condition shape mismatch");
}

}  // namespace

std::pair<Var, Var> lstu_forward(const Var& x_l, const Var& h_next, const Var& cond,
                                 const LSTUParams& p, double leak) {
    check_unit_inputs(x_l, h_next, cond, p.spec, "lstu_forward");
    const i64 h2 = h_next.dim(2), w2 = h_next.dim(3);
    Var hhat = concat_c({h_next, spatial_condition(cond, h2, w2)});
    Var t = leaky_relu(p.transpose(hhat), leak);
    Var f = sigmoid(p.forget(t));
    Var r = sigmoid(p.reset(t));
    Var one_minus_f = add_scalar(neg(f), 1.0);
    Var c = add(mul(f, t), mul(one_minus_f, p.linear(x_l)));
    Var one_minus_r = add_scalar(neg(r), 1.0);
    Var out = add(mul(r, tanh_op(c)), mul(one_minus_r, x_l));
    return {out, out};
}

std::pair<Var, Var> stu_forward(const Var& x_l, const Var& h_next, const Var& cond,
                                const STUParams& p) {
    check_unit_inputs(x_l, h_next, cond, p.spec, "stu_forward");
    const i64 h2 = h_next.dim(2), w2 = h_next.dim(3);
    Var shat = p.transpose(concat_c({h_next, spatial_condition(cond, h2, w2)}));
    Var xs = concat_c({x_l, shat});
    Var r = sigmoid(p.gate_r(xs));
    Var z = sigmoid(p.gate_z(xs));
    Var hidden = mul(r, shat);
    Var cand = tanh_op(p.cand(concat_c({x_l, hidden})));
    Var one_minus_z = add_scalar(neg(z), 1.0);
    Var out = add(mul(one_minus_z, shat), mul(z, cand));
    return {out, hidden};
}

std::pair<Var, Var> lstu_forward(const Var& x_l, const Var& h_next, const DiffVector& d,
                                 const LSTUParams& p, double leak) {
    return lstu_forward(x_l, h_next, cond_row(d), p, leak);
}

std::pair<Var, Var> stu_forward(const Var& x_l, const Var& h_next, const DiffVector& d,
                                const STUParams& p) {
    return stu_forward(x_l, h_next, cond_row(d), p);
}

i64 unit_param_count(UnitKind kind, const UnitSpec& spec) {
    spec.validate();
    const i64 kt2 = static_cast<i64>(spec.k_transpose) * spec.k_transpose;
    const i64 kg2 = static_cast<i64>(spec.k_gate) * spec.k_gate;
    const i64 transpose = kt2 * (spec.c_next + spec.n_attrs) * spec.c_l + spec.c_l;
    if (kind == UnitKind::lstu) {
        const i64 linear = spec.c_l * spec.c_l + spec.c_l;
        const i64 gate = kg2 * spec.c_l * spec.c_l + spec.c_l;
        return transpose + linear + 2 * gate;
    }
    const i64 gate = kg2 * (2 * spec.c_l) * spec.c_l + spec.c_l;
    return transpose + 3 * gate;
}

}  // namespace coogan
