#pragma once

#include <string>

#include "coogan/tensor.hpp"

namespace coogan::npy {

// Minimal NPY v1.0 support for float64 arrays (the checkpoint format).
void save(const std::string& path, const Tensor& t);
Tensor load(const std::string& path);

}  // namespace coogan::npy
