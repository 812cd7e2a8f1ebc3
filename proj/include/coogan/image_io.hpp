#pragma once

#include <string>
#include <vector>

#include "coogan/core.hpp"

namespace coogan {

// 8-bit interleaved RGB buffer as stored on disk.
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> rgb;  // 3 * width * height
};

// PNG (by magic) or binary PPM. Throws data_error on unreadable files.
Image8 read_image(const std::string& path);
// Format chosen by extension: .png or .ppm.
void write_image(const std::string& path, const Image8& img);

// (3,H,W) in [-1,1] via pixel/127.5 - 1.
ImageTensor image_to_tensor(const Image8& img);
// clamp to [-1,1], quantize with rounding
Image8 tensor_to_image(const ImageTensor& t);

ImageTensor load_image_tensor(const std::string& path);
void save_image_tensor(const std::string& path, const ImageTensor& t);

// Horizontal side-by-side grid (all tiles same size), for sample sheets.
ImageTensor hgrid(const std::vector<ImageTensor>& tiles, int gap = 2);
// Stack rows vertically.
ImageTensor vgrid(const std::vector<ImageTensor>& rows, int gap = 2);

}  // namespace coogan
