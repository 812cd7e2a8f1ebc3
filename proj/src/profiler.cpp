#include "coogan/profiler.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace coogan {

i64 count_params(const nn::ParamMap& pm) { return pm.scalar_count(); }
i64 count_params(const Generator& g) { return g.params().scalar_count(); }
i64 count_params(const Discriminator& d) { return d.params().scalar_count(); }

i64 conv_flops(int k, i64 cin, i64 cout, i64 out_h, i64 out_w) {
    return 2LL * k * k * cin * cout * out_h * out_w;
}

i64 tconv_flops(int k, i64 cin, i64 cout, i64 in_h, i64 in_w) {
    return 2LL * k * k * cin * cout * in_h * in_w;
}

i64 unit_flops(UnitKind kind, const UnitSpec& spec, i64 s) {
    const i64 s2 = s / 2;
    const i64 cl = spec.c_l;
    i64 total = tconv_flops(spec.k_transpose, spec.c_next + spec.n_attrs, cl, s2, s2);
    if (kind == UnitKind::lstu) {
        total += cl * s * s;                                   // leaky relu on t
        total += 2 * conv_flops(spec.k_gate, cl, cl, s, s);    // forget + reset
        total += conv_flops(1, cl, cl, s, s);                  // 1x1 linear transform
        total += 11 * cl * s * s;  // 2 sigmoids, tanh, 8 arithmetic maps
    } else {
        total += 3 * conv_flops(spec.k_gate, 2 * cl, cl, s, s);  // r, z, candidate
        total += 8 * cl * s * s;  // 2 sigmoids, tanh, 5 arithmetic maps
    }
    return total;
}

namespace {

struct LiveSim {
    i64 alive = 0;
    i64 peak = 0;
    void alloc(i64 b) {
        alive += b;
        peak = std::max(peak, alive);
    }
    void free(i64 b) { alive -= b; }
};

i64 fbytes(i64 c, i64 s) { return 4 * c * s * s; }

}  // namespace

i64 generator_activation_peak_bytes(const GeneratorSpec& spec, i64 input_size) {
    spec.validate();
    const auto ch = spec.channel_schedule();
    const int n = spec.n_layers;
    const bool gated = spec.skip_mode == SkipMode::lstu || spec.skip_mode == SkipMode::stu;
    const int K = spec.skip_count;
    auto side = [&](int l) { return input_size >> l; };
    auto skip_at = [&](int l) { return spec.skip_mode != SkipMode::none && l >= 1 && l <= K; };

    LiveSim sim;
    sim.alloc(fbytes(spec.input_channels, side(0)));
    // encoder; z_{l-1} gets freed unless a later stage reads it
    i64 prev_bytes = fbytes(spec.input_channels, side(0));
    for (int l = 1; l <= n; ++l) {
        sim.alloc(fbytes(ch[l - 1], side(l)));
        const int pl = l - 1;
        bool prev_needed = false;
        if (pl >= 1) {
            if (spec.skip_mode == SkipMode::plain && skip_at(pl)) prev_needed = true;
            if (gated && skip_at(pl)) prev_needed = true;           // unit input x_pl
            if (gated && K >= 1 && pl == K + 1) prev_needed = true;  // chain start hidden
            if (pl == n) prev_needed = true;                         // bottleneck (unreachable here)
        }
        if (!prev_needed) sim.free(prev_bytes);
        prev_bytes = fbytes(ch[l - 1], side(l));
    }

    // gated units, deepest first
    if (gated) {
        for (int j = K; j >= 1; --j) {
            const i64 cl = ch[j - 1], cn = ch[j];
            const i64 s = side(j);
            const i64 hb = fbytes(cn + spec.n_attributes, s / 2);
            sim.alloc(hb);                  // concat(h, cond)
            sim.alloc(fbytes(cl, s));       // t / s_hat
            sim.free(hb);
            if (spec.skip_mode == SkipMode::lstu) {
                sim.alloc(fbytes(cl, s));   // f
                sim.alloc(fbytes(cl, s));   // r
                sim.alloc(fbytes(cl, s));   // linear(x)
                sim.alloc(fbytes(cl, s));   // c
                sim.free(fbytes(cl, s));    // f
                sim.free(fbytes(cl, s));    // linear
                sim.alloc(fbytes(cl, s));   // out
                sim.free(3 * fbytes(cl, s));  // t, r, c
            } else {
                sim.alloc(fbytes(cl, s));   // r
                sim.alloc(fbytes(cl, s));   // z
                sim.alloc(fbytes(cl, s));   // hidden = r*s_hat
                sim.free(fbytes(cl, s));    // r
                sim.alloc(fbytes(cl, s));   // candidate
                sim.alloc(fbytes(cl, s));   // out
                sim.free(3 * fbytes(cl, s));  // s_hat, z, candidate
                if (j == 1) sim.free(fbytes(cl, s));  // hidden of the shallowest unit
                // hidden of deeper units freed when the next unit consumes it
                if (j < K) sim.free(fbytes(ch[j], side(j + 1)));  // consumed hidden_{j+1}
            }
            sim.free(fbytes(cl, s));  // encoder feature z_j
            if (j == K && K + 1 < n) sim.free(fbytes(ch[K], side(K + 1)));  // chain-start feature
            if (spec.skip_mode == SkipMode::lstu && j < K) {
                // LSTU reuses the skip output as hidden state; it stays alive
                // for the decoder, nothing extra to free.
            }
        }
    }

    // decoder
    sim.alloc(fbytes(ch[n - 1] + spec.n_attributes, side(n)));  // bottleneck concat
    sim.free(fbytes(ch[n - 1], side(n)));                       // z_n
    i64 cur = fbytes(ch[n - 1] + spec.n_attributes, side(n));
    for (int l = n; l >= 2; --l) {
        const i64 ub = fbytes(ch[l - 2], side(l - 1));
        sim.alloc(ub);
        sim.free(cur);
        if (skip_at(l - 1)) {
            const i64 db = fbytes(2 * ch[l - 2], side(l - 1));
            sim.alloc(db);
            sim.free(ub);
            sim.free(fbytes(ch[l - 2], side(l - 1)));  // consumed skip feature
            cur = db;
        } else {
            cur = ub;
        }
    }
    sim.alloc(fbytes(3, side(0)));
    sim.free(cur);
    return sim.peak;
}

ProfileReport profile_generator(const GeneratorSpec& spec, i64 input_size) {
    spec.validate();
    if (input_size < (1LL << spec.n_layers) || input_size % (1LL << spec.n_layers) != 0)
        throw config_error("profile_generator: input size must be divisible by 2^n_layers");
    ProfileReport rep;
    rep.model = "generator[" + to_string(spec.skip_mode) + ",L" + std::to_string(spec.n_layers) +
                ",C" + std::to_string(spec.base_channels) + "]";
    rep.input_size = input_size;
    const auto ch = spec.channel_schedule();
    const int n = spec.n_layers;
    auto side = [&](int l) { return input_size >> l; };
    auto skip_at = [&](int l) { return spec.skip_mode != SkipMode::none && l >= 1 && l <= spec.skip_count; };

    auto push = [&](const std::string& name, i64 params, i64 flops) {
        rep.layers.push_back({name, params, flops});
        rep.total_params += params;
        rep.total_flops += flops;
    };

    for (int l = 1; l <= n; ++l) {
        const i64 cin = (l == 1) ? spec.input_channels : ch[l - 2];
        const i64 cout = ch[l - 1];
        const i64 s = side(l);
        push("enc" + std::to_string(l), 16 * cin * cout + cout, conv_flops(4, cin, cout, s, s));
        push("enc" + std::to_string(l) + ".norm", 2 * cout, 5 * cout * s * s);
        push("enc" + std::to_string(l) + ".lrelu", 0, cout * s * s);
    }
    if (spec.skip_mode == SkipMode::lstu || spec.skip_mode == SkipMode::stu) {
        const UnitKind kind = spec.skip_mode == SkipMode::lstu ? UnitKind::lstu : UnitKind::stu;
        for (int j = 1; j <= spec.skip_count; ++j) {
            UnitSpec us{ch[j - 1], ch[j], spec.n_attributes};
            push("skip" + std::to_string(j), unit_param_count(kind, us),
                 unit_flops(kind, us, side(j)));
        }
    }
    for (int l = n; l >= 1; --l) {
        const i64 cin = (l == n) ? ch[n - 1] + spec.n_attributes
                                 : ch[l - 1] * (skip_at(l) ? 2 : 1);
        const i64 cout = (l >= 2) ? ch[l - 2] : 3;
        const i64 s_in = side(l), s_out = side(l - 1);
        push("dec" + std::to_string(l), 9 * cin * cout + cout, tconv_flops(3, cin, cout, s_in, s_in));
        if (l >= 2) {
            push("dec" + std::to_string(l) + ".norm", 2 * cout, 5 * cout * s_out * s_out);
            push("dec" + std::to_string(l) + ".relu", 0, cout * s_out * s_out);
        } else {
            push("out.tanh", 0, 3 * s_out * s_out);
        }
    }
    rep.param_bytes = 4 * rep.total_params;
    rep.activation_peak_bytes = generator_activation_peak_bytes(spec, input_size);
    rep.peak_bytes = rep.param_bytes + rep.activation_peak_bytes;
    return rep;
}

UnitScheduleProfile profile_unit_schedule(UnitKind kind, i64 base, int n_layers, i64 n_attrs,
                                          i64 input_size) {
    UnitScheduleProfile p;
    p.kind = kind;
    p.base = base;
    i64 c = base;
    for (int j = 1; j <= n_layers - 1; ++j) {
        UnitSpec us;
        us.c_l = std::min<i64>(c, 1024);
        us.c_next = std::min<i64>(c * 2, 1024);
        us.n_attrs = n_attrs;
        p.params += unit_param_count(kind, us);
        p.flops += unit_flops(kind, us, input_size >> j);
        c *= 2;
    }
    return p;
}

i64 calibrate_unit_table_input() {
    // the published 16-channel LSTU cell: 2.02 GFLOPs
    const double target = 2.02e9;
    i64 best = 64;
    double best_err = 1e300;
    for (i64 s = 64; s <= 1024; s += 2) {
        const double f =
            static_cast<double>(profile_unit_schedule(UnitKind::lstu, 16, 5, 13, s).flops);
        const double err = std::abs(f - target) / target;
        if (err < best_err) {
            best_err = err;
            best = s;
        }
    }
    return best;
}

std::string unit_table_markdown(const std::vector<i64>& bases, int n_layers, i64 n_attrs,
                                i64 input_size) {
    std::ostringstream md;
    md << "| unit |";
    for (i64 b : bases) md << " " << b << "-ch params | " << b << "-ch FLOPS |";
    md << "\n|---|";
    for (size_t i = 0; i < bases.size(); ++i) md << "---|---|";
    md << "\n";
    for (UnitKind kind : {UnitKind::stu, UnitKind::lstu}) {
        md << "| " << (kind == UnitKind::lstu ? "LSTU" : "STU") << " |";
        for (i64 b : bases) {
            auto p = profile_unit_schedule(kind, b, n_layers, n_attrs, input_size);
            md << " " << std::fixed << std::setprecision(2)
               << static_cast<double>(p.params) / 1e6 << "M | "
               << static_cast<double>(p.flops) / 1e9 << "G |";
        }
        md << "\n";
    }
    md << "\nFLOPS at input size " << input_size << "^2 (calibrated against the published"
       << " 16-channel column); " << (n_layers - 1) << " units, N_c=" << n_attrs << ".\n";
    return md.str();
}

void unit_table_csv(const std::string& path, const std::vector<i64>& bases, int n_layers,
                    i64 n_attrs, i64 input_size) {
    std::ofstream f(path);
    if (!f) throw data_error("cannot write " + path);
    f << "unit,in_channels,params,flops,input_size\n";
    for (UnitKind kind : {UnitKind::stu, UnitKind::lstu})
        for (i64 b : bases) {
            auto p = profile_unit_schedule(kind, b, n_layers, n_attrs, input_size);
            f << (kind == UnitKind::lstu ? "lstu" : "stu") << "," << b << "," << p.params << ","
              << p.flops << "," << input_size << "\n";
        }
}

PipelineProfile profile_coogan_pipeline(const GeneratorSpec& global_spec,
                                        const GeneratorSpec& local_spec, const RunConfig& cfg) {
    cfg.validate();
    PipelineProfile p;
    p.name = "coogan";
    const i64 gparams = profile_generator(global_spec, cfg.global_size).total_params;
    const i64 lparams = profile_generator(local_spec, cfg.patch_size).total_params;
    p.param_bytes = 4 * (gparams + lparams);
    const i64 ga = generator_activation_peak_bytes(global_spec, cfg.global_size);
    const i64 la = generator_activation_peak_bytes(local_spec, cfg.patch_size);
    p.activation_peak_bytes = std::max(ga, la);
    p.peak_bytes = p.param_bytes + p.activation_peak_bytes;
    p.note = "max(global pass @" + std::to_string(cfg.global_size) + ", single patch pass @" +
             std::to_string(cfg.patch_size) + "); patches processed sequentially";
    return p;
}

PipelineProfile profile_monolithic_pipeline(const GeneratorSpec& spec, i64 hr_size) {
    PipelineProfile p;
    p.name = "monolithic";
    p.param_bytes = 4 * profile_generator(spec, hr_size).total_params;
    p.activation_peak_bytes = generator_activation_peak_bytes(spec, hr_size);
    p.peak_bytes = p.param_bytes + p.activation_peak_bytes;
    p.note = "full " + std::to_string(hr_size) + "^2 pass, " + std::to_string(spec.n_layers) +
             " layers, " + to_string(spec.skip_mode) + " skips";
    return p;
}

std::string memory_report_markdown(const PipelineProfile& coogan, const PipelineProfile& mono) {
    std::ostringstream md;
    auto mb = [](i64 b) { return static_cast<double>(b) / (1024.0 * 1024.0); };
    md << "| pipeline | params (MB) | activation peak (MB) | total peak (MB) |\n";
    md << "|---|---|---|---|\n";
    for (const auto* p : {&coogan, &mono})
        md << "| " << p->name << " | " << std::fixed << std::setprecision(1) << mb(p->param_bytes)
           << " | " << mb(p->activation_peak_bytes) << " | " << mb(p->peak_bytes) << " |\n";
    md << "\npeak ratio (coogan / monolithic): " << std::setprecision(3)
       << static_cast<double>(coogan.peak_bytes) / static_cast<double>(mono.peak_bytes) << "\n";
    md << "- " << coogan.name << ": " << coogan.note << "\n";
    md << "- " << mono.name << ": " << mono.note << "\n";
    md << "\nfloat32 accounting of live activations plus resident parameters;"
       << " allocator fragmentation and workspaces excluded.\n";
    return md.str();
}

}  // namespace coogan
