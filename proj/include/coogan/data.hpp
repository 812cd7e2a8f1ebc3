#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coogan/core.hpp"
#include "coogan/image_io.hpp"
#include "coogan/rng.hpp"

namespace coogan {

// CelebA list-attribute format: line 1 image count, line 2 attribute names,
// then one line per image: filename followed by +-1 per attribute. -1 maps
// to 0. Columns are filtered and reordered to selected_attributes (empty =
// keep file order).
std::vector<std::pair<std::string, AttributeVector>> parse_attr_file(
    const std::string& path, const std::vector<std::string>& selected_attributes);

void write_attr_file(const std::string& path,
                     const std::vector<std::pair<std::string, AttributeVector>>& entries);

struct ToyOptions {
    int n_images = 2000;
    int size = 64;
    int n_attributes = 3;  // <= 4
    std::uint64_t seed = 0;
};

// Procedural dataset whose attributes control independent, visually
// localized factors: 0 warm-vs-cool background, 1 centered shape,
// 2 stripe overlay, 3 brightness class. Writes images/NNNNNN.png plus
// list_attr.txt in CelebA format. Deterministic under the seed.
void make_toy_dataset(const std::string& dir, const ToyOptions& opt);

// Ground-truth pixel rules for the toy attributes; recovers the label of a
// clean render from the pixels alone (the generating rules are the oracle).
int toy_attribute_oracle(const ImageTensor& img, int attribute);

const std::vector<std::string>& toy_attribute_names(int n_attributes);

// Folder of images + attribute file, decoded once and cached; images are
// resized on access. The 90/10 train/val split hashes filenames.
class ImageFolderDataset {
public:
    static ImageFolderDataset open(const std::string& dir,
                                   const std::vector<std::string>& selected_attributes = {});

    size_t size() const { return entries_.size(); }
    const std::string& name(size_t i) const { return entries_[i].first; }
    const AttributeVector& labels(size_t i) const { return entries_[i].second; }
    const std::vector<std::string>& attribute_names() const { return attr_names_; }
    int native_size() const { return native_size_; }

    ImageTensor image(size_t i, int size) const;

    const std::vector<size_t>& train_indices() const { return train_; }
    const std::vector<size_t>& val_indices() const { return val_; }

private:
    std::string dir_;
    std::vector<std::pair<std::string, AttributeVector>> entries_;
    std::vector<std::string> attr_names_;
    std::vector<size_t> train_, val_;
    int native_size_ = 0;
    mutable std::vector<Image8> cache_;
};

// (B, 3, size, size) batch tensor from dataset rows.
Tensor make_batch(const ImageFolderDataset& ds, const std::vector<size_t>& indices, int size);

}  // namespace coogan
