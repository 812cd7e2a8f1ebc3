#pragma once

#include <functional>
#include <vector>

#include "coogan/core.hpp"
#include "coogan/networks.hpp"

namespace coogan {

// Bilinear resampling with half-pixel centers (align-corners disabled).
Tensor resize_bilinear(const Tensor& src, i64 out_h, i64 out_w);
ImageTensor downsample(const ImageTensor& x, int target_size);
ImageTensor upsample(const ImageTensor& x, int target_size);

// Exact no-overlap tiling in row-major order. Throws tiling_error when the
// image size is not divisible by patch_size (no silent padding).
std::vector<std::pair<PatchCoord, ImageTensor>> decompose(const ImageTensor& x, i64 patch_size);

// Pixel-exact inverse of decompose; patches are keyed by coordinate so the
// input order is irrelevant. Missing, duplicate or out-of-grid coordinates
// raise tiling_error.
ImageTensor assemble(const std::vector<std::pair<PatchCoord, ImageTensor>>& patches,
                     i64 full_size);

// Upsample the LR snapshot to the HR size, tile both, concatenate pairs with
// matching coordinates into 6-channel local inputs [x_i(m,n), x_t(m,n)].
std::vector<std::pair<PatchCoord, ImageTensor>> make_local_inputs(const ImageTensor& x_hr,
                                                                  const ImageTensor& snapshot_lr,
                                                                  i64 patch_size);

// Image-to-image translators; generators provide these, tests may stub them.
using TranslateFn = std::function<ImageTensor(const ImageTensor&, const DiffVector&)>;

// Hook used by tests and the snapshot-ablation study: transforms each local
// input patch before translation.
using PatchFilter = std::function<void(ImageTensor& six_channel_patch)>;

// Full pipeline: snapshot = G_g(downsample(x), A_d) at cfg.global_size, then
// every patch through G_l, stitched without overlap. Patches run one at a
// time (the memory contract); with parallel_patches the translations may be
// reordered but outputs are identical.
ImageTensor edit_full_image(const ImageTensor& x_hr, const TranslateFn& g_global,
                            const TranslateFn& g_local, const DiffVector& d, const RunConfig& cfg,
                            bool parallel_patches = false, const PatchFilter* filter = nullptr);
ImageTensor edit_full_image(const ImageTensor& x_hr, const Generator& g_global,
                            const Generator& g_local, const DiffVector& d, const RunConfig& cfg,
                            bool parallel_patches = false, const PatchFilter* filter = nullptr);

TranslateFn translate_fn(const Generator& g);

}  // namespace coogan
