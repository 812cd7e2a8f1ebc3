#include "coogan/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "coogan/cooperation.hpp"
#include "coogan/image_io.hpp"

namespace coogan {

using namespace ad;
namespace fs = std::filesystem;
using nlohmann::json;

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw config_error("lr_schedule: negative epoch");
    const int k = epoch / std::max(cfg.decay_epoch, 1);
    return cfg.lr * std::pow(cfg.decay_rate, static_cast<double>(k));
}

namespace {

class BatchSampler {
public:
    BatchSampler(std::vector<size_t> indices, Rng& rng) : order_(std::move(indices)), rng_(rng) {
        if (order_.empty()) throw data_error("training: empty split");
        cursor_ = order_.size();
    }
    std::vector<size_t> next(int n) {
        std::vector<size_t> out;
        out.reserve(static_cast<size_t>(n));
        while (static_cast<int>(out.size()) < n) {
            if (cursor_ >= order_.size()) {
                rng_.shuffle(order_);
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

private:
    std::vector<size_t> order_;
    size_t cursor_;
    Rng& rng_;
};

void check_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw numeric_error(std::string("training: non-finite ") + what + " loss");
}

Tensor labels_for(const ImageFolderDataset& ds, const std::vector<size_t>& idx) {
    std::vector<AttributeVector> labs;
    labs.reserve(idx.size());
    for (size_t i : idx) labs.push_back(ds.labels(i));
    return labels_to_tensor(labs);
}

// target attribute rows drawn by shuffling the source rows within the batch
Tensor shuffled_targets(const Tensor& sources, Rng& rng) {
    const i64 n = sources.dim(0), c = sources.dim(1);
    std::vector<i64> perm(static_cast<size_t>(n));
    for (i64 i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    rng.shuffle(perm);
    Tensor out({n, c});
    for (i64 i = 0; i < n; ++i)
        for (i64 j = 0; j < c; ++j) out[i * c + j] = sources[perm[static_cast<size_t>(i)] * c + j];
    return out;
}

Tensor tensor_sub(const Tensor& a, const Tensor& b) {
    Tensor out(a.shape());
    for (i64 i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

void save_sample_grid(const std::string& dir, i64 step, const Var& x, const Var& recon,
                      const Var& edited) {
    fs::create_directories(dir);
    const i64 rows = std::min<i64>(x.dim(0), 4);
    const i64 s = x.dim(2);
    std::vector<ImageTensor> row_images;
    for (i64 r = 0; r < rows; ++r) {
        auto take = [&](const Var& v) {
            Tensor t({3, s, s});
            std::copy(v.value().data() + r * 3 * s * s, v.value().data() + (r + 1) * 3 * s * s,
                      t.data());
            for (i64 i = 0; i < t.numel(); ++i) t[i] = std::clamp(t[i], -1.0, 1.0);
            return ImageTensor(std::move(t));
        };
        row_images.push_back(hgrid({take(x), take(recon), take(edited)}));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "step_%06lld.png", static_cast<long long>(step));
    save_image_tensor((fs::path(dir) / buf).string(), vgrid(row_images));
}

}  // namespace

TrainResult train_global(Generator& g, Discriminator& d, const ImageFolderDataset& ds,
                         const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    if (g.spec().input_channels != 3)
        throw config_error("train_global: generator must take 3-channel input");
    if (g.spec().n_attributes != d.spec().n_attributes ||
        g.spec().n_attributes != static_cast<int>(ds.attribute_names().size()))
        throw config_error("train_global: attribute count mismatch");
    const int S = d.spec().input_size;

    Rng rng(cfg.seed);
    BatchSampler sampler(ds.train_indices(), rng);
    nn::Adam opt_g(cfg.beta1, cfg.beta2), opt_d(cfg.beta1, cfg.beta2);
    std::vector<Var> params_g = g.params().vars();
    std::vector<Var> params_d = d.params().vars();

    const int steps_per_epoch =
        cfg.steps_per_epoch > 0
            ? cfg.steps_per_epoch
            : std::max<int>(1, static_cast<int>(ds.train_indices().size()) / cfg.batch_size);

    TrainResult res;
    i64 step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        for (int it = 0; it < steps_per_epoch; ++it) {
            for (int k = 0; k < cfg.n_critic; ++k) {
                auto idx = sampler.next(cfg.batch_size);
                Var x = constant(make_batch(ds, idx, S));
                Tensor src = labels_for(ds, idx);
                Tensor tgt = shuffled_targets(src, rng);
                Var cond = constant(tensor_sub(tgt, src));
                Tensor fake_t;
                {
                    NoGradGuard ng;
                    fake_t = g.forward(x, cond).value();
                }
                Var fake = constant(fake_t);
                auto heads_real = d.forward(x);
                Var adv = d_adv_loss(d, x, fake, cfg.loss_weights.lambda_gp, rng);
                Var cls = attr_cls_loss(heads_real.logits, src);
                Var total = total_d_loss(adv, cls, cfg.loss_weights);
                check_finite(total.item(), "critic");
                auto grads = grad(total, params_d, false);
                opt_d.step(params_d, grads, lr);
                ++step;
                res.log.push_back({step, "d_adv", adv.item()});
                res.log.push_back({step, "d_cls", cls.item()});
                res.log.push_back({step, "d_total", total.item()});
            }

            auto idx = sampler.next(cfg.batch_size);
            Var x = constant(make_batch(ds, idx, S));
            Tensor src = labels_for(ds, idx);
            Tensor tgt = shuffled_targets(src, rng);
            Var cond = constant(tensor_sub(tgt, src));
            Var fake = g.forward(x, cond);
            auto heads_fake = d.forward(fake);
            Var adv = neg(mean_all(heads_fake.adv));
            Var cls = attr_cls_loss(heads_fake.logits, tgt);
            Var rec = rec_loss(x, g);
            Var total = total_g_loss(adv, cls, rec, cfg.loss_weights);
            check_finite(total.item(), "generator");
            auto grads = grad(total, params_g, false);
            opt_g.step(params_g, grads, lr);
            ++step;
            res.log.push_back({step, "g_adv", adv.item()});
            res.log.push_back({step, "g_cls", cls.item()});
            res.log.push_back({step, "g_rec", rec.item()});
            res.log.push_back({step, "g_total", total.item()});

            if (!out_dir.empty() && cfg.sample_every > 0 &&
                (it + 1) % cfg.sample_every == 0) {
                NoGradGuard ng;
                Var recon = g.forward(x, constant(Tensor({x.dim(0), static_cast<i64>(g.spec().n_attributes)})));
                save_sample_grid(out_dir + "/samples", step, x, recon, fake);
            }
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        res.generator_dir = out_dir + "/generator";
        res.discriminator_dir = out_dir + "/discriminator";
        save_generator(g, res.generator_dir);
        save_discriminator(d, res.discriminator_dir);
        write_loss_csv(out_dir + "/loss_log.csv", res.log);
        save_train_config(out_dir + "/train_config.json", cfg);
    }
    return res;
}

TrainResult train_local(Generator& g_local, Discriminator& d_local, const Generator& g_global,
                        const ImageFolderDataset& hq_ds, const RunConfig& cfg_run,
                        const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    cfg_run.validate();
    if (g_local.spec().input_channels != 6)
        throw config_error("train_local: local generator must take 6-channel input");
    if (d_local.spec().input_size != cfg_run.patch_size)
        throw config_error("train_local: local critic must run at patch size");
    const int nc = g_local.spec().n_attributes;
    const i64 s = cfg_run.patch_size;
    const i64 grid = cfg_run.hr_size / cfg_run.patch_size;
    const i64 patches_per_image = grid * grid;

    Rng rng(cfg.seed);
    BatchSampler sampler(hq_ds.train_indices(), rng);
    nn::Adam opt_g(cfg.beta1, cfg.beta2), opt_d(cfg.beta1, cfg.beta2);
    std::vector<Var> params_g = g_local.params().vars();
    std::vector<Var> params_d = d_local.params().vars();

    // one training "sample" = one patch; a step draws patches from 2 images
    struct PatchBatch {
        Tensor six;        // (B,6,s,s) inputs with edit-condition snapshot
        Tensor six_zero;   // (B,6,s,s) inputs with zero-condition snapshot
        Tensor real;       // (B,3,s,s) raw HR patches
        Tensor cond;       // (B,nc)
        Tensor src, tgt;   // (B,nc)
    };
    auto draw_batch = [&]() {
        const int n_img = 2;
        auto img_idx = sampler.next(n_img);
        // swap labels across the pair to form targets
        std::vector<AttributeVector> labs{hq_ds.labels(img_idx[0]), hq_ds.labels(img_idx[1])};
        std::vector<AttributeVector> tgts{labs[1], labs[0]};
        std::vector<std::vector<std::pair<PatchCoord, ImageTensor>>> six(n_img), six0(n_img),
            realp(n_img);
        for (int i = 0; i < n_img; ++i) {
            ImageTensor hr = hq_ds.image(img_idx[static_cast<size_t>(i)], cfg_run.hr_size);
            ImageTensor lr = downsample(hr, cfg_run.global_size);
            DiffVector dv = diff_vector(tgts[static_cast<size_t>(i)], labs[static_cast<size_t>(i)]);
            ImageTensor snap = g_global.translate(lr, dv);
            ImageTensor snap0 = g_global.translate(lr, DiffVector::zeros(nc));
            six[static_cast<size_t>(i)] = make_local_inputs(hr, snap, s);
            six0[static_cast<size_t>(i)] = make_local_inputs(hr, snap0, s);
            realp[static_cast<size_t>(i)] = decompose(hr, s);
        }
        PatchBatch b;
        b.six = Tensor({cfg.batch_size, 6, s, s});
        b.six_zero = Tensor({cfg.batch_size, 6, s, s});
        b.real = Tensor({cfg.batch_size, 3, s, s});
        b.cond = Tensor({cfg.batch_size, nc});
        b.src = Tensor({cfg.batch_size, nc});
        b.tgt = Tensor({cfg.batch_size, nc});
        for (int bi = 0; bi < cfg.batch_size; ++bi) {
            const int i = static_cast<int>(rng.below(n_img));
            const i64 p = static_cast<i64>(rng.below(static_cast<std::uint64_t>(patches_per_image)));
            const auto& sp = six[static_cast<size_t>(i)][static_cast<size_t>(p)].second;
            const auto& sp0 = six0[static_cast<size_t>(i)][static_cast<size_t>(p)].second;
            const auto& rp = realp[static_cast<size_t>(i)][static_cast<size_t>(p)].second;
            std::copy(sp.data.data(), sp.data.data() + 6 * s * s, b.six.data() + bi * 6 * s * s);
            std::copy(sp0.data.data(), sp0.data.data() + 6 * s * s,
                      b.six_zero.data() + bi * 6 * s * s);
            std::copy(rp.data.data(), rp.data.data() + 3 * s * s, b.real.data() + bi * 3 * s * s);
            for (int j = 0; j < nc; ++j) {
                const double sv = labs[static_cast<size_t>(i)].values[static_cast<size_t>(j)];
                const double tv = tgts[static_cast<size_t>(i)].values[static_cast<size_t>(j)];
                b.src[bi * nc + j] = sv;
                b.tgt[bi * nc + j] = tv;
                b.cond[bi * nc + j] = tv - sv;
            }
        }
        return b;
    };

    const int steps_per_epoch =
        cfg.steps_per_epoch > 0
            ? cfg.steps_per_epoch
            : std::max<int>(1, static_cast<int>(hq_ds.train_indices().size()) / 2);

    TrainResult res;
    i64 step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        for (int it = 0; it < steps_per_epoch; ++it) {
            for (int k = 0; k < cfg.n_critic; ++k) {
                PatchBatch b = draw_batch();
                Var x6 = constant(b.six);
                Var real = constant(b.real);
                Var cond = constant(b.cond);
                Tensor fake_t;
                {
                    NoGradGuard ng;
                    fake_t = g_local.forward(x6, cond).value();
                }
                Var fake = constant(fake_t);
                auto heads_real = d_local.forward(real);
                Var adv = d_adv_loss(d_local, real, fake, cfg.loss_weights.lambda_gp, rng);
                Var cls = attr_cls_loss(heads_real.logits, b.src);
                Var total = total_d_loss(adv, cls, cfg.loss_weights);
                check_finite(total.item(), "local critic");
                auto grads = grad(total, params_d, false);
                opt_d.step(params_d, grads, lr);
                ++step;
                res.log.push_back({step, "d_adv", adv.item()});
                res.log.push_back({step, "d_cls", cls.item()});
                res.log.push_back({step, "d_total", total.item()});
            }

            PatchBatch b = draw_batch();
            Var x6 = constant(b.six);
            Var real = constant(b.real);
            Var fake = g_local.forward(x6, constant(b.cond));
            auto heads_fake = d_local.forward(fake);
            Var adv = neg(mean_all(heads_fake.adv));
            Var cls = attr_cls_loss(heads_fake.logits, b.tgt);
            // zero-condition reconstruction against the raw HR patch
            Var recon = g_local.forward(constant(b.six_zero),
                                        constant(Tensor({cfg.batch_size, nc})));
            Var rec = mean_all(abs_op(sub(real, recon)));
            Var total = total_g_loss(adv, cls, rec, cfg.loss_weights);
            check_finite(total.item(), "local generator");
            auto grads = grad(total, params_g, false);
            opt_g.step(params_g, grads, lr);
            ++step;
            res.log.push_back({step, "g_adv", adv.item()});
            res.log.push_back({step, "g_cls", cls.item()});
            res.log.push_back({step, "g_rec", rec.item()});
            res.log.push_back({step, "g_total", total.item()});

            if (!out_dir.empty() && cfg.sample_every > 0 && (it + 1) % cfg.sample_every == 0)
                save_sample_grid(out_dir + "/samples", step, real, recon, fake);
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        res.generator_dir = out_dir + "/generator";
        res.discriminator_dir = out_dir + "/discriminator";
        save_generator(g_local, res.generator_dir);
        save_discriminator(d_local, res.discriminator_dir);
        write_loss_csv(out_dir + "/loss_log.csv", res.log);
        save_train_config(out_dir + "/train_config.json", cfg);
    }
    return res;
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& log) {
    std::ofstream f(path);
    if (!f) throw data_error("cannot write " + path);
    f << "step,loss_name,value\n";
    f.precision(17);
    for (const auto& r : log) f << r.step << "," << r.name << "," << r.value << "\n";
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw data_error("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw data_error("config: malformed JSON in " + path + ": " + e.what());
    }
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.decay_epoch = j.value("decay_epoch", c.decay_epoch);
    c.n_critic = j.value("n_critic", c.n_critic);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.seed = j.value("seed", c.seed);
    c.sample_every = j.value("sample_every", c.sample_every);
    if (j.contains("loss_weights")) {
        const auto& w = j["loss_weights"];
        c.loss_weights.lambda_rec = w.value("lambda_rec", c.loss_weights.lambda_rec);
        c.loss_weights.lambda_cls = w.value("lambda_cls", c.loss_weights.lambda_cls);
        c.loss_weights.lambda_gp = w.value("lambda_gp", c.loss_weights.lambda_gp);
        c.loss_weights.lambda_adv = w.value("lambda_adv", c.loss_weights.lambda_adv);
    }
    c.validate();
    return c;
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
    json j{{"lr", cfg.lr},
           {"beta1", cfg.beta1},
           {"beta2", cfg.beta2},
           {"decay_rate", cfg.decay_rate},
           {"decay_epoch", cfg.decay_epoch},
           {"n_critic", cfg.n_critic},
           {"batch_size", cfg.batch_size},
           {"epochs", cfg.epochs},
           {"steps_per_epoch", cfg.steps_per_epoch},
           {"seed", cfg.seed},
           {"sample_every", cfg.sample_every},
           {"loss_weights",
            {{"lambda_rec", cfg.loss_weights.lambda_rec},
             {"lambda_cls", cfg.loss_weights.lambda_cls},
             {"lambda_gp", cfg.loss_weights.lambda_gp},
             {"lambda_adv", cfg.loss_weights.lambda_adv}}}};
    std::ofstream f(path);
    if (!f) throw data_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

}  // namespace coogan
