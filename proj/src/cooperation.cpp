#include "coogan/cooperation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace coogan {

Tensor resize_bilinear(const Tensor& src, i64 out_h, i64 out_w) {
    if (src.ndim() != 3) throw dimension_error("resize_bilinear: expected (C,H,W)");
    const i64 c = src.dim(0), h = src.dim(1), w = src.dim(2);
    if (out_h < 1 || out_w < 1) throw dimension_error("resize_bilinear: bad target size");
    Tensor out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (i64 oy = 0; oy < out_h; ++oy) {
        double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const i64 y0 = static_cast<i64>(std::floor(fy));
        const i64 y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (i64 ox = 0; ox < out_w; ++ox) {
            double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const i64 x0 = static_cast<i64>(std::floor(fx));
            const i64 x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (i64 ic = 0; ic < c; ++ic) {
                const double* p = src.data() + ic * h * w;
                const double v = (1.0 - wy) * ((1.0 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1]) +
                                 wy * ((1.0 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1]);
                out.data()[(ic * out_h + oy) * out_w + ox] = v;
            }
        }
    }
    return out;
}

ImageTensor downsample(const ImageTensor& x, int target_size) {
    if (target_size > x.height() || target_size > x.width())
        throw dimension_error("downsample: target exceeds source size");
    return ImageTensor(resize_bilinear(x.data, target_size, target_size), x.range_lo, x.range_hi);
}

ImageTensor upsample(const ImageTensor& x, int target_size) {
    if (target_size < x.height() || target_size < x.width())
        throw dimension_error("upsample: target below source size");
    return ImageTensor(resize_bilinear(x.data, target_size, target_size), x.range_lo, x.range_hi);
}

std::vector<std::pair<PatchCoord, ImageTensor>> decompose(const ImageTensor& x, i64 patch_size) {
    const i64 h = x.height(), w = x.width(), c = x.channels();
    if (patch_size < 1) throw tiling_error("decompose: patch_size must be positive");
    if (h % patch_size != 0 || w % patch_size != 0)
        throw tiling_error("decompose: image size " + std::to_string(h) + "x" + std::to_string(w) +
                           " not divisible by patch size " + std::to_string(patch_size));
    const i64 rows = h / patch_size, cols = w / patch_size;
    std::vector<std::pair<PatchCoord, ImageTensor>> out;
    out.reserve(static_cast<size_t>(rows * cols));
    for (i64 m = 0; m < rows; ++m)
        for (i64 n = 0; n < cols; ++n) {
            Tensor p({c, patch_size, patch_size});
            for (i64 ic = 0; ic < c; ++ic)
                for (i64 y = 0; y < patch_size; ++y) {
                    const double* src =
                        x.data.data() + (ic * h + m * patch_size + y) * w + n * patch_size;
                    std::copy(src, src + patch_size,
                              p.data() + (ic * patch_size + y) * patch_size);
                }
            out.emplace_back(PatchCoord{m, n, patch_size},
                             ImageTensor(std::move(p), x.range_lo, x.range_hi));
        }
    return out;
}

ImageTensor assemble(const std::vector<std::pair<PatchCoord, ImageTensor>>& patches,
                     i64 full_size) {
    if (patches.empty()) throw tiling_error("assemble: no patches");
    const i64 s = patches.front().first.patch_size;
    if (s < 1 || full_size % s != 0)
        throw tiling_error("assemble: full size not divisible by patch size");
    const i64 grid = full_size / s;
    const i64 c = patches.front().second.channels();
    std::vector<char> seen(static_cast<size_t>(grid * grid), 0);
    Tensor out({c, full_size, full_size});
    for (const auto& [pc, img] : patches) {
        if (pc.patch_size != s) throw tiling_error("assemble: mixed patch sizes");
        if (pc.row < 0 || pc.col < 0 || pc.row >= grid || pc.col >= grid)
            throw tiling_error("assemble: coordinate (" + std::to_string(pc.row) + "," +
                               std::to_string(pc.col) + ") outside the grid");
        if (img.channels() != c || img.height() != s || img.width() != s)
            throw tiling_error("assemble: patch shape mismatch");
        char& flag = seen[static_cast<size_t>(pc.row * grid + pc.col)];
        if (flag) throw tiling_error("assemble: duplicate patch coordinate");
        flag = 1;
        for (i64 ic = 0; ic < c; ++ic)
            for (i64 y = 0; y < s; ++y) {
                const double* src = img.data.data() + (ic * s + y) * s;
                std::copy(src, src + s,
                          out.data() + (ic * full_size + pc.row * s + y) * full_size + pc.col * s);
            }
    }
    for (char f : seen)
        if (!f) throw tiling_error("assemble: missing patch");
    return ImageTensor(std::move(out), patches.front().second.range_lo,
                       patches.front().second.range_hi);
}

std::vector<std::pair<PatchCoord, ImageTensor>> make_local_inputs(const ImageTensor& x_hr,
                                                                  const ImageTensor& snapshot_lr,
                                                                  i64 patch_size) {
    if (x_hr.height() != x_hr.width()) throw tiling_error("make_local_inputs: HR image not square");
    ImageTensor snap_up = upsample(snapshot_lr, static_cast<int>(x_hr.height()));
    auto hr_patches = decompose(x_hr, patch_size);
    auto snap_patches = decompose(snap_up, patch_size);
    std::vector<std::pair<PatchCoord, ImageTensor>> out;
    out.reserve(hr_patches.size());
    for (size_t i = 0; i < hr_patches.size(); ++i) {
        const auto& [pc, hp] = hr_patches[i];
        const auto& [sc, sp] = snap_patches[i];
        if (!(pc == sc)) throw tiling_error("make_local_inputs: coordinate mismatch");
        Tensor six({6, patch_size, patch_size});
        std::copy(hp.data.data(), hp.data.data() + hp.data.numel(), six.data());
        std::copy(sp.data.data(), sp.data.data() + sp.data.numel(),
                  six.data() + hp.data.numel());
        out.emplace_back(pc, ImageTensor(std::move(six), x_hr.range_lo, x_hr.range_hi));
    }
    return out;
}

TranslateFn translate_fn(const Generator& g) {
    return [&g](const ImageTensor& x, const DiffVector& d) { return g.translate(x, d); };
}

ImageTensor edit_full_image(const ImageTensor& x_hr, const TranslateFn& g_global,
                            const TranslateFn& g_local, const DiffVector& d, const RunConfig& cfg,
                            bool parallel_patches, const PatchFilter* filter) {
    cfg.validate();
    if (x_hr.height() != cfg.hr_size || x_hr.width() != cfg.hr_size)
        throw dimension_error("edit_full_image: expected " + std::to_string(cfg.hr_size) +
                              "^2 input, got " + std::to_string(x_hr.height()) + "x" +
                              std::to_string(x_hr.width()));
    ImageTensor lr = downsample(x_hr, cfg.global_size);
    ImageTensor snapshot = g_global(lr, d);
    auto inputs = make_local_inputs(x_hr, snapshot, cfg.patch_size);
    if (filter)
        for (auto& [pc, patch] : inputs) (*filter)(patch);
    std::vector<std::pair<PatchCoord, ImageTensor>> outputs(inputs.size());
    // Patch translations are mutually independent. Sequential order is the
    // memory-bounded mode; the reordered mode exists to check independence
    // and must produce identical pixels.
    if (!parallel_patches) {
        for (size_t i = 0; i < inputs.size(); ++i)
            outputs[i] = {inputs[i].first, g_local(inputs[i].second, d)};
    } else {
        for (size_t k = inputs.size(); k > 0; --k) {
            const size_t i = k - 1;
            outputs[i] = {inputs[i].first, g_local(inputs[i].second, d)};
        }
    }
    return assemble(outputs, cfg.hr_size);
}

ImageTensor edit_full_image(const ImageTensor& x_hr, const Generator& g_global,
                            const Generator& g_local, const DiffVector& d, const RunConfig& cfg,
                            bool parallel_patches, const PatchFilter* filter) {
    return edit_full_image(x_hr, translate_fn(g_global), translate_fn(g_local), d, cfg,
                           parallel_patches, filter);
}

}  // namespace coogan
