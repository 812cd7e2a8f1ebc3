#include "coogan/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coogan/cooperation.hpp"

namespace coogan {

namespace fs = std::filesystem;

std::vector<std::pair<std::string, AttributeVector>> parse_attr_file(
    const std::string& path, const std::vector<std::string>& selected_attributes) {
    std::ifstream f(path);
    if (!f) throw data_error("attr file: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw data_error("attr file: empty file " + path);
    long declared = 0;
    try {
        declared = std::stol(line);
    } catch (...) {
        throw data_error("attr file: first line must be the image count in " + path);
    }
    if (!std::getline(f, line)) throw data_error("attr file: missing attribute names in " + path);
    std::vector<std::string> names;
    {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) names.push_back(tok);
    }
    if (names.empty()) throw data_error("attr file: no attribute names in " + path);

    std::vector<size_t> cols;
    std::vector<std::string> out_names;
    if (selected_attributes.empty()) {
        for (size_t i = 0; i < names.size(); ++i) cols.push_back(i);
        out_names = names;
    } else {
        for (const auto& want : selected_attributes) {
            auto it = std::find(names.begin(), names.end(), want);
            if (it == names.end())
                throw data_error("attr file: unknown attribute '" + want + "' in " + path);
            cols.push_back(static_cast<size_t>(it - names.begin()));
            out_names.push_back(want);
        }
    }

    std::vector<std::pair<std::string, AttributeVector>> rows;
    size_t line_no = 2;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string fname;
        ss >> fname;
        std::vector<int> all(names.size());
        for (size_t i = 0; i < names.size(); ++i) {
            std::string tok;
            if (!(ss >> tok))
                throw data_error("attr file: truncated row at line " + std::to_string(line_no) +
                                 " of " + path);
            if (tok == "1")
                all[i] = 1;
            else if (tok == "-1")
                all[i] = 0;
            else
                throw data_error("attr file: expected +-1 at line " + std::to_string(line_no) +
                                 " of " + path + ", got '" + tok + "'");
        }
        std::vector<int> vals;
        vals.reserve(cols.size());
        for (size_t c : cols) vals.push_back(all[c]);
        rows.emplace_back(fname, AttributeVector(std::move(vals), out_names));
    }
    if (declared != static_cast<long>(rows.size()))
        throw data_error("attr file: header declares " + std::to_string(declared) + " rows, found " +
                         std::to_string(rows.size()) + " in " + path);
    return rows;
}

void write_attr_file(const std::string& path,
                     const std::vector<std::pair<std::string, AttributeVector>>& entries) {
    if (entries.empty()) throw data_error("attr file: nothing to write");
    std::ofstream f(path);
    if (!f) throw data_error("attr file: cannot write " + path);
    f << entries.size() << "\n";
    const auto& names = entries.front().second.names;
    for (size_t i = 0; i < names.size(); ++i) f << (i ? " " : "") << names[i];
    f << "\n";
    for (const auto& [fname, attrs] : entries) {
        if (attrs.names != names) throw data_error("attr file: inconsistent attribute names");
        f << fname;
        for (int v : attrs.values) f << " " << (v ? "1" : "-1");
        f << "\n";
    }
}

const std::vector<std::string>& toy_attribute_names(int n_attributes) {
    static const std::vector<std::string> all = {"Warm_Background", "Center_Shape",
                                                 "Stripe_Overlay", "Bright"};
    static std::vector<std::string> cut;
    if (n_attributes < 1 || n_attributes > 4)
        throw config_error("toy dataset supports 1..4 attributes");
    cut.assign(all.begin(), all.begin() + n_attributes);
    return cut;
}

namespace {

// All geometry in relative coordinates so renders are resolution independent.
ImageTensor render_toy(int size, const std::vector<int>& bits, Rng& rng) {
    const int k = static_cast<int>(bits.size());
    Tensor t({3, size, size});
    const bool warm = bits[0] != 0;
    double base[3];
    if (warm) {
        base[0] = 0.85;
        base[1] = 0.45;
        base[2] = 0.15;
    } else {
        base[0] = 0.15;
        base[1] = 0.35;
        base[2] = 0.85;
    }
    for (double& b : base) b += rng.uniform(-0.05, 0.05);

    const double grad = rng.uniform(-0.04, 0.04);
    const bool stripes = k > 2 && bits[2] != 0;
    const double stripe_amp = stripes ? 0.15 + rng.uniform(-0.02, 0.02) : 0.0;
    const double stripe_phase = rng.uniform(0.0, 6.283185307179586);
    const double stripe_period = 0.15;

    const bool shape = k > 1 && bits[1] != 0;
    const double cx = 0.5 + rng.uniform(-0.05, 0.05);
    const double cy = 0.5 + rng.uniform(-0.05, 0.05);
    const double radius = 0.22 + rng.uniform(-0.02, 0.02);
    double shape_col[3] = {0.10, 0.88, 0.20};
    for (double& c : shape_col) c += rng.uniform(-0.03, 0.03);

    const double bright = (k > 3) ? (bits[3] ? 0.15 : -0.15) : 0.0;
    const double edge = 1.5 / static_cast<double>(size);

    for (int y = 0; y < size; ++y) {
        const double ry = (static_cast<double>(y) + 0.5) / size;
        for (int x = 0; x < size; ++x) {
            const double rx = (static_cast<double>(x) + 0.5) / size;
            const double g = grad * (2.0 * rx - 1.0);
            const double s =
                stripe_amp * std::sin(6.283185307179586 * rx / stripe_period + stripe_phase);
            double px[3];
            for (int c = 0; c < 3; ++c) px[c] = base[c] + g + s;
            if (shape) {
                const double dist = std::sqrt((rx - cx) * (rx - cx) + (ry - cy) * (ry - cy));
                const double alpha = std::clamp((radius - dist) / edge, 0.0, 1.0);
                for (int c = 0; c < 3; ++c) px[c] = alpha * shape_col[c] + (1.0 - alpha) * px[c];
            }
            for (int c = 0; c < 3; ++c) {
                double v = px[c] + bright + rng.gaussian(0.0, 0.015);
                v = std::clamp(v, 0.02, 0.98);
                t[(c * size + y) * size + x] = v * 2.0 - 1.0;
            }
        }
    }
    return ImageTensor(std::move(t));
}

// mean of a relative-coordinate box, one channel, on [0,1] values
double box_mean(const ImageTensor& img, int channel, double x0, double y0, double x1, double y1) {
    const i64 h = img.height(), w = img.width();
    const i64 ix0 = std::clamp<i64>(static_cast<i64>(x0 * static_cast<double>(w)), 0, w - 1);
    const i64 ix1 = std::clamp<i64>(static_cast<i64>(x1 * static_cast<double>(w)), ix0 + 1, w);
    const i64 iy0 = std::clamp<i64>(static_cast<i64>(y0 * static_cast<double>(h)), 0, h - 1);
    const i64 iy1 = std::clamp<i64>(static_cast<i64>(y1 * static_cast<double>(h)), iy0 + 1, h);
    double sum = 0.0;
    for (i64 y = iy0; y < iy1; ++y)
        for (i64 x = ix0; x < ix1; ++x)
            sum += (img.data[(channel * h + y) * w + x] + 1.0) * 0.5;
    return sum / static_cast<double>((iy1 - iy0) * (ix1 - ix0));
}

}  // namespace

int toy_attribute_oracle(const ImageTensor& img, int attribute) {
    const i64 h = img.height(), w = img.width();
    switch (attribute) {
        case 0: {  // warm background: corner red vs blue
            const double r = box_mean(img, 0, 0.01, 0.01, 0.07, 0.07);
            const double b = box_mean(img, 2, 0.01, 0.01, 0.07, 0.07);
            return r > b ? 1 : 0;
        }
        case 1: {  // centered green shape
            const double r = box_mean(img, 0, 0.46, 0.46, 0.54, 0.54);
            const double g = box_mean(img, 1, 0.46, 0.46, 0.54, 0.54);
            const double b = box_mean(img, 2, 0.46, 0.46, 0.54, 0.54);
            return (g - std::max(r, b)) > 0.15 ? 1 : 0;
        }
        case 2: {  // stripes: high-frequency column-profile variation in a top band
            const i64 y0 = std::max<i64>(1, static_cast<i64>(0.015 * static_cast<double>(h)));
            const i64 y1 = std::max<i64>(y0 + 1, static_cast<i64>(0.075 * static_cast<double>(h)));
            std::vector<double> profile(static_cast<size_t>(w), 0.0);
            for (i64 x = 0; x < w; ++x) {
                double s = 0.0;
                for (i64 y = y0; y < y1; ++y)
                    for (i64 c = 0; c < 3; ++c) s += img.data[(c * h + y) * w + x];
                profile[static_cast<size_t>(x)] = s / static_cast<double>(3 * (y1 - y0));
            }
            double delta = 0.0;
            i64 cnt = 0;
            for (i64 x = w / 10; x + 1 < w - w / 10; ++x, ++cnt)
                delta += std::abs(profile[static_cast<size_t>(x + 1)] - profile[static_cast<size_t>(x)]);
            delta /= std::max<i64>(cnt, 1) * 2.0;  // back to [0,1] units
            return delta > 0.0125 ? 1 : 0;
        }
        case 3: {  // brightness class: global mean luminance
            double m = 0.0;
            for (int c = 0; c < 3; ++c) m += box_mean(img, c, 0.0, 0.0, 1.0, 1.0);
            return m / 3.0 > 0.47 ? 1 : 0;
        }
        default:
            throw config_error("toy oracle: attribute index out of range");
    }
}

void make_toy_dataset(const std::string& dir, const ToyOptions& opt) {
    if (opt.n_attributes < 1 || opt.n_attributes > 4)
        throw config_error("make_toy_dataset: n_attributes must be in 1..4");
    if (opt.n_images < 1 || opt.size < 8) throw config_error("make_toy_dataset: bad size options");
    fs::create_directories(fs::path(dir) / "images");

    const int k = opt.n_attributes;
    const int combos = 1 << k;
    std::vector<std::vector<int>> labels(static_cast<size_t>(opt.n_images));
    for (int i = 0; i < opt.n_images; ++i) {
        std::vector<int> bits(static_cast<size_t>(k));
        for (int b = 0; b < k; ++b) bits[static_cast<size_t>(b)] = (i % combos) >> b & 1;
        labels[static_cast<size_t>(i)] = std::move(bits);
    }
    Rng shuffle_rng(opt.seed);
    shuffle_rng.shuffle(labels);

    const auto& names = toy_attribute_names(k);
    std::vector<std::pair<std::string, AttributeVector>> entries;
    for (int i = 0; i < opt.n_images; ++i) {
        Rng img_rng(opt.seed ^ (0x51ed2701ULL + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL));
        ImageTensor img = render_toy(opt.size, labels[static_cast<size_t>(i)], img_rng);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06d.png", i + 1);
        save_image_tensor((fs::path(dir) / "images" / buf).string(), img);
        entries.emplace_back(buf, AttributeVector(labels[static_cast<size_t>(i)], names));
    }
    write_attr_file((fs::path(dir) / "list_attr.txt").string(), entries);
}

ImageFolderDataset ImageFolderDataset::open(const std::string& dir,
                                            const std::vector<std::string>& selected_attributes) {
    ImageFolderDataset ds;
    ds.dir_ = dir;
    ds.entries_ = parse_attr_file((fs::path(dir) / "list_attr.txt").string(), selected_attributes);
    if (ds.entries_.empty()) throw data_error("dataset: no entries in " + dir);
    ds.attr_names_ = ds.entries_.front().second.names;
    ds.cache_.resize(ds.entries_.size());

    for (size_t i = 0; i < ds.entries_.size(); ++i) {
        // FNV-1a on the filename picks the held-out tenth
        std::uint64_t hash = 14695981039346656037ULL;
        for (char c : ds.entries_[i].first) {
            hash ^= static_cast<unsigned char>(c);
            hash *= 1099511628211ULL;
        }
        if (hash % 10 == 0)
            ds.val_.push_back(i);
        else
            ds.train_.push_back(i);
    }
    Image8 first = read_image((fs::path(dir) / "images" / ds.entries_.front().first).string());
    ds.native_size_ = first.width;
    ds.cache_[0] = std::move(first);
    return ds;
}

ImageTensor ImageFolderDataset::image(size_t i, int size) const {
    if (i >= entries_.size()) throw data_error("dataset: index out of range");
    Image8& slot = cache_[i];
    if (slot.width == 0)
        slot = read_image((fs::path(dir_) / "images" / entries_[i].first).string());
    ImageTensor t = image_to_tensor(slot);
    if (t.height() == size && t.width() == size) return t;
    return ImageTensor(resize_bilinear(t.data, size, size));
}

Tensor make_batch(const ImageFolderDataset& ds, const std::vector<size_t>& indices, int size) {
    if (indices.empty()) throw data_error("make_batch: empty index list");
    Tensor out({static_cast<i64>(indices.size()), 3, size, size});
    const i64 per = 3LL * size * size;
    for (size_t b = 0; b < indices.size(); ++b) {
        ImageTensor img = ds.image(indices[b], size);
        std::copy(img.data.data(), img.data.data() + per, out.data() + static_cast<i64>(b) * per);
    }
    return out;
}

}  // namespace coogan
