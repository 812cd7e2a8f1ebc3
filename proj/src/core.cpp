#include "coogan/core.hpp"

namespace coogan {

const std::vector<std::string>& default_attribute_names() {
    static const std::vector<std::string> names = {
        "Bald",          "Bangs",      "Black_Hair", "Blond_Hair", "Brown_Hair",
        "Bushy_Eyebrows", "Eyeglasses", "Male",       "Mouth_Slightly_Open",
        "Mustache",      "No_Beard",   "Pale_Skin",  "Young"};
    return names;
}

AttributeVector::AttributeVector(std::vector<int> v, std::vector<std::string> n)
    : values(std::move(v)), names(std::move(n)) {
    if (values.size() != names.size())
        throw dimension_error("AttributeVector: values/names length mismatch");
    for (int x : values)
        if (x != 0 && x != 1) throw dimension_error("AttributeVector: entries must be 0 or 1");
}

AttributeVector AttributeVector::zeros_default() {
    const auto& n = default_attribute_names();
    return AttributeVector(std::vector<int>(n.size(), 0), n);
}

AttributeVector AttributeVector::zeros(std::vector<std::string> names) {
    std::vector<int> v(names.size(), 0);
    return AttributeVector(std::move(v), std::move(names));
}

DiffVector diff_vector(const AttributeVector& target, const AttributeVector& source) {
    if (target.values.size() != source.values.size())
        throw dimension_error("diff_vector: attribute count mismatch");
    if (target.names != source.names)
        throw dimension_error("diff_vector: attribute name mismatch");
    DiffVector d;
    d.values.reserve(target.values.size());
    for (size_t i = 0; i < target.values.size(); ++i)
        d.values.push_back(target.values[i] - source.values[i]);
    return d;
}

ImageTensor::ImageTensor(Tensor t, double lo, double hi)
    : data(std::move(t)), range_lo(lo), range_hi(hi) {
    if (data.ndim() != 3) throw dimension_error("ImageTensor: expected (C,H,W)");
}

void ImageTensor::validate() const {
    const i64 c = channels();
    if (c != 3 && c != 6)
        throw dimension_error("ImageTensor: channels must be 3 or 6, got " + std::to_string(c));
    const double* p = data.data();
    for (i64 i = 0; i < data.numel(); ++i)
        if (p[i] < range_lo - 1e-9 || p[i] > range_hi + 1e-9)
            throw dimension_error("ImageTensor: value outside declared range");
}

Tensor broadcast_condition(const DiffVector& d, i64 height, i64 width) {
    if (height < 1 || width < 1) throw dimension_error("broadcast_condition: size must be >= 1");
    const i64 nc = d.size();
    Tensor out({nc, height, width});
    double* p = out.data();
    for (i64 c = 0; c < nc; ++c) {
        const double v = static_cast<double>(d.values[static_cast<size_t>(c)]);
        double* plane = p + c * height * width;
        for (i64 j = 0; j < height * width; ++j) plane[j] = v;
    }
    return out;
}

}  // namespace coogan
