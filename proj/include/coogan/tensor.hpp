#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace coogan {

using i64 = std::int64_t;

// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Shape/dimension contract violations.
struct dimension_error : error {
    using error::error;
};
// Patch tiling contract violations (non-divisible size, missing/duplicate patch).
struct tiling_error : error {
    using error::error;
};
// Invalid model/run configuration.
struct config_error : error {
    using error::error;
};
// Dataset / file format problems.
struct data_error : error {
    using error::error;
};
// NaN or non-finite values where finite ones are required.
struct numeric_error : error {
    using error::error;
};

// Dense row-major double tensor. Copies share the underlying buffer;
// use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<i64> shape) : shape_(std::move(shape)) {
        i64 n = 1;
        for (i64 d : shape_) {
            if (d < 0) throw dimension_error("negative tensor dimension");
            n *= d;
        }
        data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
    }

    static Tensor zeros(std::vector<i64> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<i64> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_->begin(), t.data_->end(), v);
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    static Tensor from(std::vector<i64> shape, std::vector<double> values) {
        Tensor t;
        t.shape_ = std::move(shape);
        i64 n = 1;
        for (i64 d : t.shape_) n *= d;
        if (n != static_cast<i64>(values.size()))
            throw dimension_error("value count does not match shape");
        t.data_ = std::make_shared<std::vector<double>>(std::move(values));
        return t;
    }

    bool defined() const { return data_ != nullptr; }
    const std::vector<i64>& shape() const { return shape_; }
    i64 ndim() const { return static_cast<i64>(shape_.size()); }
    i64 dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    i64 numel() const { return data_ ? static_cast<i64>(data_->size()) : 0; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    double& operator[](i64 i) { return (*data_)[static_cast<size_t>(i)]; }
    double operator[](i64 i) const { return (*data_)[static_cast<size_t>(i)]; }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    Tensor reshaped(std::vector<i64> shape) const {
        i64 n = 1;
        for (i64 d : shape) n *= d;
        if (n != numel()) throw dimension_error("reshape changes element count");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    void fill(double v) { std::fill(data_->begin(), data_->end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    std::vector<i64> shape_;
    std::shared_ptr<std::vector<double>> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw dimension_error(std::string(where) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

}  // namespace coogan
