#include "coogan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace coogan {

namespace {

Image8 read_ppm(std::ifstream& f, const std::string& path) {
    std::string magic;
    f >> magic;
    if (magic != "P6") throw data_error("image: unsupported PPM variant in " + path);
    auto skip_ws_comments = [&f] {
        for (;;) {
            int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
    };
    int w, h, maxval;
    skip_ws_comments();
    f >> w;
    skip_ws_comments();
    f >> h;
    skip_ws_comments();
    f >> maxval;
    f.get();  // single whitespace before data
    if (!f || w < 1 || h < 1 || maxval != 255)
        throw data_error("image: malformed PPM header in " + path);
    Image8 img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(3 * w * h));
    f.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!f) throw data_error("image: truncated PPM data in " + path);
    return img;
}

}  // namespace

Image8 read_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw data_error("image: cannot open " + path);
    unsigned char magic[8] = {0};
    probe.read(reinterpret_cast<char*>(magic), 8);
    probe.seekg(0);
    if (magic[0] == 'P' && magic[1] == '6') return read_ppm(probe, path);
    probe.close();

    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw data_error("image: not a readable PNG/PPM: " + path);
    png.format = PNG_FORMAT_RGB;
    Image8 img;
    img.width = static_cast<int>(png.width);
    img.height = static_cast<int>(png.height);
    img.rgb.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, img.rgb.data(), 0, nullptr)) {
        png_image_free(&png);
        throw data_error("image: PNG decode failed: " + path);
    }
    return img;
}

void write_image(const std::string& path, const Image8& img) {
    if (img.width < 1 || img.height < 1 ||
        img.rgb.size() != static_cast<size_t>(3 * img.width * img.height))
        throw data_error("image: inconsistent buffer for " + path);
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".ppm") {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw data_error("image: cannot write " + path);
        f << "P6\n" << img.width << " " << img.height << "\n255\n";
        f.write(reinterpret_cast<const char*>(img.rgb.data()),
                static_cast<std::streamsize>(img.rgb.size()));
        if (!f) throw data_error("image: write failed: " + path);
        return;
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, img.rgb.data(), 0, nullptr))
        throw data_error("image: PNG encode failed: " + path);
}

ImageTensor image_to_tensor(const Image8& img) {
    Tensor t({3, img.height, img.width});
    const i64 hw = static_cast<i64>(img.height) * img.width;
    for (i64 y = 0; y < img.height; ++y)
        for (i64 x = 0; x < img.width; ++x) {
            const size_t p = static_cast<size_t>(3 * (y * img.width + x));
            for (i64 c = 0; c < 3; ++c)
                t[c * hw + y * img.width + x] =
                    static_cast<double>(img.rgb[p + static_cast<size_t>(c)]) / 127.5 - 1.0;
        }
    return ImageTensor(std::move(t));
}

Image8 tensor_to_image(const ImageTensor& t) {
    if (t.channels() != 3) throw dimension_error("tensor_to_image: expected 3 channels");
    Image8 img;
    img.height = static_cast<int>(t.height());
    img.width = static_cast<int>(t.width());
    img.rgb.resize(static_cast<size_t>(3 * img.width * img.height));
    const i64 hw = t.height() * t.width();
    const double lo = t.range_lo, hi = t.range_hi;
    for (i64 y = 0; y < t.height(); ++y)
        for (i64 x = 0; x < t.width(); ++x)
            for (i64 c = 0; c < 3; ++c) {
                double v = (t.data[c * hw + y * t.width() + x] - lo) / (hi - lo) * 255.0;
                v = std::clamp(std::round(v), 0.0, 255.0);
                img.rgb[static_cast<size_t>(3 * (y * t.width() + x) + c)] =
                    static_cast<unsigned char>(v);
            }
    return img;
}

ImageTensor load_image_tensor(const std::string& path) { return image_to_tensor(read_image(path)); }

void save_image_tensor(const std::string& path, const ImageTensor& t) {
    write_image(path, tensor_to_image(t));
}

ImageTensor hgrid(const std::vector<ImageTensor>& tiles, int gap) {
    if (tiles.empty()) throw dimension_error("hgrid: no tiles");
    const i64 h = tiles[0].height(), w = tiles[0].width();
    const i64 n = static_cast<i64>(tiles.size());
    Tensor out = Tensor::full({3, h, n * w + (n - 1) * gap}, 1.0);
    const i64 ow = out.dim(2);
    for (i64 i = 0; i < n; ++i) {
        const auto& t = tiles[static_cast<size_t>(i)];
        if (t.height() != h || t.width() != w || t.channels() != 3)
            throw dimension_error("hgrid: tiles must share shape");
        for (i64 c = 0; c < 3; ++c)
            for (i64 y = 0; y < h; ++y)
                std::copy(t.data.data() + (c * h + y) * w, t.data.data() + (c * h + y + 1) * w,
                          out.data() + (c * h + y) * ow + i * (w + gap));
    }
    return ImageTensor(std::move(out));
}

ImageTensor vgrid(const std::vector<ImageTensor>& rows, int gap) {
    if (rows.empty()) throw dimension_error("vgrid: no rows");
    const i64 w = rows[0].width();
    i64 total_h = 0;
    for (const auto& r : rows) {
        if (r.width() != w || r.channels() != 3) throw dimension_error("vgrid: row width mismatch");
        total_h += r.height();
    }
    total_h += gap * (static_cast<i64>(rows.size()) - 1);
    Tensor out = Tensor::full({3, total_h, w}, 1.0);
    i64 yoff = 0;
    for (const auto& r : rows) {
        for (i64 c = 0; c < 3; ++c)
            for (i64 y = 0; y < r.height(); ++y)
                std::copy(r.data.data() + (c * r.height() + y) * w,
                          r.data.data() + (c * r.height() + y + 1) * w,
                          out.data() + (c * total_h + yoff + y) * w);
        yoff += r.height() + gap;
    }
    return ImageTensor(std::move(out));
}

}  // namespace coogan
