#include "styleaug/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace styleaug {

Image Image::solid(int h, int w, uint8_t r, uint8_t g, uint8_t b) {
    Image img;
    img.height = h;
    img.width = w;
    img.rgb.resize(static_cast<size_t>(h) * w * 3);
    for (size_t i = 0; i < img.rgb.size(); i += 3) {
        img.rgb[i] = r;
        img.rgb[i + 1] = g;
        img.rgb[i + 2] = b;
    }
    return img;
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({3, img.height, img.width});
    const size_t plane = static_cast<size_t>(img.height) * img.width;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const size_t p = static_cast<size_t>(y) * img.width + x;
            for (int c = 0; c < 3; ++c) {
                t.data()[c * plane + p] = img.rgb[p * 3 + c] / 255.0;
            }
        }
    }
    return t;
}

Image tensor_to_image(const Tensor& t) {
    if (t.ndim() != 3 || t.dim(0) != 3)
        throw ShapeError("tensor_to_image expects {3,H,W}, got " + t.shape_str());
    Image img;
    img.height = t.dim(1);
    img.width = t.dim(2);
    img.rgb.resize(static_cast<size_t>(img.height) * img.width * 3);
    const size_t plane = static_cast<size_t>(img.height) * img.width;
    for (size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < 3; ++c) {
            double v = std::clamp(t.data()[c * plane + p], 0.0, 1.0);
            img.rgb[p * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    }
    return img;
}

static Image from_mat(const cv::Mat& bgr, const std::string& what) {
    if (bgr.empty()) throw IngestionError("cannot decode image: " + what);
    cv::Mat rgb;
    if (bgr.channels() == 3) {
        cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    } else if (bgr.channels() == 1) {
        cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
    } else if (bgr.channels() == 4) {
        cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
    } else {
        throw IngestionError("unsupported channel count in " + what);
    }
    Image img;
    img.height = rgb.rows;
    img.width = rgb.cols;
    img.rgb.assign(rgb.data, rgb.data + static_cast<size_t>(rgb.rows) * rgb.cols * 3);
    return img;
}

Image load_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    return from_mat(bgr, path.string());
}

void save_png(const Image& img, const std::filesystem::path& path) {
    cv::Mat rgb(img.height, img.width, CV_8UC3,
                const_cast<uint8_t*>(img.rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), bgr))
        throw IngestionError("cannot write image: " + path.string());
}

Image resize_image(const Image& img, int height, int width) {
    if (img.height == height && img.width == width) return img;
    cv::Mat rgb(img.height, img.width, CV_8UC3,
                const_cast<uint8_t*>(img.rgb.data()));
    cv::Mat out;
    const int interp =
        (height < img.height || width < img.width) ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::resize(rgb, out, cv::Size(width, height), 0, 0, interp);
    Image res;
    res.height = out.rows;
    res.width = out.cols;
    res.rgb.assign(out.data, out.data + static_cast<size_t>(out.rows) * out.cols * 3);
    return res;
}

std::pair<int, int> probe_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw IngestionError("missing image file: " + path.string());
    Image img = load_image(path);
    return {img.height, img.width};
}

}  // namespace styleaug
