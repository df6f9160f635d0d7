#pragma once

#include "lumisplat/common.h"

#include <filesystem>
#include <vector>

namespace lumisplat {

/// Row-major float image, row 0 at the top, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixelCount() const { return static_cast<std::size_t>(width) * height; }
  float& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  bool sameShape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

/// Peak signal-to-noise ratio in dB for signals in [0, peak]; identical images give 99 dB.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over channels, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03.
double ssim(const Image& a, const Image& b, double peak = 1.0);

namespace io {

Image readPfm(const std::filesystem::path& path);
void writePfm(const std::filesystem::path& path, const Image& image);

/// 16-bit PNG of values clamped to [0, 1]; 1 or 3 channels.
void writePng16(const std::filesystem::path& path, const Image& image);
/// Any 8/16-bit PNG, converted to [0, 1] floats.
Image readPng(const std::filesystem::path& path);

/// Radiance RGBE, uncompressed scanlines on write, flat or RLE on read.
Image readHdr(const std::filesystem::path& path);
void writeHdr(const std::filesystem::path& path, const Image& image);

/// Dispatches on extension (.pfm, .png, .hdr).
Image readImage(const std::filesystem::path& path);
void writeImage(const std::filesystem::path& path, const Image& image);

}  // namespace io

}  // namespace lumisplat
