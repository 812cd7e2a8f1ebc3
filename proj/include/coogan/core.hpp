#pragma once

#include <array>
#include <string>
#include <vector>

#include "coogan/tensor.hpp"

namespace coogan {

// The 13 CelebA attributes the models condition on, in canonical order.
const std::vector<std::string>& default_attribute_names();

// Per-image binary labels, one flag per named attribute.
struct AttributeVector {
    std::vector<int> values;           // each 0 or 1
    std::vector<std::string> names;    // same length as values

    AttributeVector() = default;
    AttributeVector(std::vector<int> v, std::vector<std::string> n);

    // all-zero vector over the default 13 attributes
    static AttributeVector zeros_default();
    static AttributeVector zeros(std::vector<std::string> names);

    int size() const { return static_cast<int>(values.size()); }
};

// Element-wise target - source of two AttributeVectors; the conditioning
// signal fed to the generators.
struct DiffVector {
    std::vector<int> values;  // each in {-1, 0, +1}

    static DiffVector zeros(int n) { return DiffVector{std::vector<int>(static_cast<size_t>(n), 0)}; }
    int size() const { return static_cast<int>(values.size()); }
    bool is_zero() const {
        for (int v : values)
            if (v != 0) return false;
        return true;
    }
};

DiffVector diff_vector(const AttributeVector& target, const AttributeVector& source);

// Normalized channel-first image data with a declared value range.
struct ImageTensor {
    Tensor data;                    // (C, H, W)
    double range_lo = -1.0;
    double range_hi = 1.0;

    ImageTensor() = default;
    explicit ImageTensor(Tensor t, double lo = -1.0, double hi = 1.0);

    i64 channels() const { return data.dim(0); }
    i64 height() const { return data.dim(1); }
    i64 width() const { return data.dim(2); }

    // throws dimension_error when values leave the declared range or the
    // channel count is not 3 or 6
    void validate() const;
};

// Location of one tile inside an exact no-overlap tiling.
struct PatchCoord {
    i64 row = 0;         // m
    i64 col = 0;         // n
    i64 patch_size = 0;  // s, pixels

    bool operator==(const PatchCoord& o) const {
        return row == o.row && col == o.col && patch_size == o.patch_size;
    }
};

// Pipeline-level size configuration.
struct RunConfig {
    int global_size = 256;
    int patch_size = 128;
    int hr_size = 768;
    int n_attributes = 13;
    std::uint64_t seed = 0;

    void validate() const {
        if (patch_size <= 0 || global_size <= 0 || hr_size <= 0 || n_attributes <= 0)
            throw config_error("RunConfig: sizes must be positive");
        if (hr_size % patch_size != 0)
            throw config_error("RunConfig: hr_size must be divisible by patch_size");
    }
};

// Spatial injection of a DiffVector: (N_c, height, width) planes where
// channel i is the constant d[i].
Tensor broadcast_condition(const DiffVector& d, i64 height, i64 width);

}  // namespace coogan
