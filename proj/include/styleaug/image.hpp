#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styleaug/tensor.hpp"

namespace styleaug {

// 8-bit RGB image, row-major HWC. Pixel math happens on [0,1] tensors; the
// byte buffer is the canonical representation so determinism contracts can
// compare raw bytes.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> rgb;  // height*width*3

    bool empty() const { return rgb.empty(); }
    uint8_t& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    uint8_t at(int y, int x, int c) const {
        return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    uint64_t checksum() const { return fnv1a64(rgb); }

    static Image solid(int h, int w, uint8_t r, uint8_t g, uint8_t b);
};

// {3,H,W} tensor in [0,1] <-> 8-bit image (values clamped on the way back).
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

Image load_image(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

// Area-style downscale / bilinear upscale to an exact size.
Image resize_image(const Image& img, int height, int width);

// Probes (decodes) an image file; returns {height,width}. Throws
// IngestionError on unreadable files.
std::pair<int, int> probe_image(const std::filesystem::path& path);

}  // namespace styleaug
