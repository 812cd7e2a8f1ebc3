#include "coogan/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "coogan/cooperation.hpp"
#include "coogan/losses.hpp"

namespace coogan {

using namespace ad;

namespace {

// values rescaled from the declared range to [0,255]
std::vector<double> to_255(const ImageTensor& img) {
    std::vector<double> v(static_cast<size_t>(img.data.numel()));
    const double lo = img.range_lo, hi = img.range_hi;
    for (i64 i = 0; i < img.data.numel(); ++i)
        v[static_cast<size_t>(i)] = (img.data[i] - lo) / (hi - lo) * 255.0;
    return v;
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<size_t>(size) * size);
    const int r = size / 2;
    double sum = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - r, dx = x - r;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[static_cast<size_t>(y * size + x)] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double psnr(const ImageTensor& a, const ImageTensor& b) {
    check_same_shape(a.data, b.data, "psnr");
    auto va = to_255(a);
    auto vb = to_255(b);
    double mse = 0.0;
    for (size_t i = 0; i < va.size(); ++i) {
        const double d = va[i] - vb[i];
        mse += d * d;
    }
    mse /= static_cast<double>(va.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
    check_same_shape(a.data, b.data, "ssim");
    const int win = 11;
    const double sigma = 1.5;
    const i64 h = a.height(), w = a.width(), c = a.channels();
    if (h < win || w < win) throw dimension_error("ssim: image smaller than the 11x11 window");
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    const auto kernel = gaussian_window(win, sigma);
    auto va = to_255(a);
    auto vb = to_255(b);

    double total = 0.0;
    for (i64 ch = 0; ch < c; ++ch) {
        const double* pa = va.data() + ch * h * w;
        const double* pb = vb.data() + ch * h * w;
        double acc = 0.0;
        i64 cnt = 0;
        for (i64 y = 0; y + win <= h; ++y)
            for (i64 x = 0; x + win <= w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int ky = 0; ky < win; ++ky)
                    for (int kx = 0; kx < win; ++kx) {
                        const double wgt = kernel[static_cast<size_t>(ky * win + kx)];
                        const double xa = pa[(y + ky) * w + x + kx];
                        const double xb = pb[(y + ky) * w + x + kx];
                        ma += wgt * xa;
                        mb += wgt * xb;
                        saa += wgt * xa * xa;
                        sbb += wgt * xb * xb;
                        sab += wgt * xa * xb;
                    }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                acc += num / den;
                ++cnt;
            }
        total += acc / static_cast<double>(cnt);
    }
    return total / static_cast<double>(c);
}

double seam_score(const ImageTensor& x, i64 patch_size, std::uint64_t seed) {
    const i64 h = x.height(), w = x.width(), c = x.channels();
    if (patch_size < 1 || h % patch_size != 0 || w % patch_size != 0)
        throw tiling_error("seam_score: image size not divisible by patch size");

    auto pair_diff = [&](i64 y0, i64 x0, i64 y1, i64 x1) {
        double d = 0.0;
        for (i64 ch = 0; ch < c; ++ch)
            d += std::abs(x.data[(ch * h + y0) * w + x0] - x.data[(ch * h + y1) * w + x1]);
        return d / static_cast<double>(c);
    };

    double boundary_sum = 0.0;
    i64 boundary_cnt = 0;
    for (i64 bx = patch_size; bx < w; bx += patch_size)
        for (i64 y = 0; y < h; ++y) {
            boundary_sum += pair_diff(y, bx - 1, y, bx);
            ++boundary_cnt;
        }
    for (i64 by = patch_size; by < h; by += patch_size)
        for (i64 xx = 0; xx < w; ++xx) {
            boundary_sum += pair_diff(by - 1, xx, by, xx);
            ++boundary_cnt;
        }
    if (boundary_cnt == 0) return 0.0;  // single-patch tiling has no seams

    Rng rng(seed);
    double interior_sum = 0.0;
    i64 interior_cnt = 0;
    while (interior_cnt < boundary_cnt) {
        const bool vertical = rng.bernoulli(0.5);
        if (vertical) {
            // adjacent horizontally, not straddling a vertical border
            const i64 y = static_cast<i64>(rng.below(static_cast<std::uint64_t>(h)));
            const i64 xx = static_cast<i64>(rng.below(static_cast<std::uint64_t>(w - 1)));
            if ((xx + 1) % patch_size == 0) continue;
            interior_sum += pair_diff(y, xx, y, xx + 1);
        } else {
            const i64 y = static_cast<i64>(rng.below(static_cast<std::uint64_t>(h - 1)));
            const i64 xx = static_cast<i64>(rng.below(static_cast<std::uint64_t>(w)));
            if ((y + 1) % patch_size == 0) continue;
            interior_sum += pair_diff(y, xx, y + 1, xx);
        }
        ++interior_cnt;
    }
    return boundary_sum / static_cast<double>(boundary_cnt) -
           interior_sum / static_cast<double>(interior_cnt);
}

Discriminator train_attr_classifier(const ImageFolderDataset& ds, const ClassifierOptions& opt) {
    if (ds.train_indices().empty()) throw data_error("classifier: empty training split");
    Discriminator model = Discriminator::build(opt.spec, opt.seed);
    nn::Adam adam(0.9, 0.999);
    std::vector<Var> params = model.params().vars();
    Rng rng(opt.seed);
    std::vector<size_t> order = ds.train_indices();
    size_t cursor = order.size();

    for (int step = 0; step < opt.steps; ++step) {
        std::vector<size_t> batch;
        std::vector<AttributeVector> labels;
        for (int b = 0; b < opt.batch_size; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
            labels.push_back(ds.labels(batch.back()));
        }
        Var x = constant(make_batch(ds, batch, opt.spec.input_size));
        Var loss = attr_cls_loss(model.forward(x).logits, labels);
        if (!std::isfinite(loss.item())) throw numeric_error("classifier: non-finite loss");
        auto grads = grad(loss, params, false);
        adam.step(params, grads, opt.lr);
    }
    return model;
}

std::vector<double> classify(const Discriminator& classifier, const ImageTensor& img) {
    NoGradGuard ng;
    ImageTensor sized = img;
    const int s = classifier.spec().input_size;
    if (img.height() != s || img.width() != s)
        sized = ImageTensor(resize_bilinear(img.data, s, s), img.range_lo, img.range_hi);
    Var x = constant(sized.data.reshaped({1, 3, s, s}).clone());
    Var logits = classifier.forward(x).logits;
    std::vector<double> probs(static_cast<size_t>(logits.numel()));
    for (i64 i = 0; i < logits.numel(); ++i)
        probs[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-logits.value()[i]));
    return probs;
}

double classifier_accuracy(const Discriminator& classifier, const ImageFolderDataset& ds,
                           const std::vector<size_t>& indices) {
    if (indices.empty()) throw data_error("classifier_accuracy: empty index list");
    i64 correct = 0, total = 0;
    for (size_t i : indices) {
        auto probs = classify(classifier, ds.image(i, classifier.spec().input_size));
        const auto& lab = ds.labels(i);
        for (size_t j = 0; j < probs.size(); ++j) {
            correct += (probs[j] > 0.5 ? 1 : 0) == lab.values[j] ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

AccuracyReport attr_accuracy(const Discriminator& classifier,
                             const std::vector<EditedSample>& samples) {
    if (samples.empty()) throw data_error("attr_accuracy: no samples");
    const size_t n_attrs = samples.front().target.values.size();
    std::vector<i64> hits(n_attrs, 0), counts(n_attrs, 0);
    for (const auto& s : samples) {
        auto probs = classify(classifier, s.image);
        for (size_t j = 0; j < n_attrs; ++j) {
            if (s.diff.values[j] == 0) continue;  // only attributes actually flipped
            ++counts[j];
            if ((probs[j] > 0.5 ? 1 : 0) == s.target.values[j]) ++hits[j];
        }
    }
    AccuracyReport rep;
    double sum = 0.0;
    int used = 0;
    for (size_t j = 0; j < n_attrs; ++j) {
        if (counts[j] == 0) {
            rep.per_attribute.push_back(-1.0);
            continue;
        }
        const double acc = static_cast<double>(hits[j]) / static_cast<double>(counts[j]);
        rep.per_attribute.push_back(acc);
        sum += acc;
        ++used;
    }
    rep.average = used ? sum / used : 0.0;
    return rep;
}

void write_accuracy_csv(const std::string& path, const std::vector<std::string>& names,
                        const AccuracyReport& report) {
    std::ofstream f(path);
    if (!f) throw data_error("cannot write " + path);
    f << "attribute,accuracy\n";
    for (size_t i = 0; i < report.per_attribute.size(); ++i) {
        f << (i < names.size() ? names[i] : "attr" + std::to_string(i)) << ",";
        if (report.per_attribute[i] < 0)
            f << "n/a\n";
        else
            f << report.per_attribute[i] << "\n";
    }
    f << "average," << report.average << "\n";
}

}  // namespace coogan
