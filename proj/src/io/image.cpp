#include "lumisplat/io/image.h"

#include "lumisplat/io/files.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace lumisplat {

double psnr(const Image& a, const Image& b, double peak) {
  LS_CHECK(a.sameShape(b), ParameterError, "image shapes differ");
  LS_CHECK(!a.data.empty(), ParameterError, "empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

// Valid-mode separable filtering of one channel.
std::vector<double> gaussianFilterValid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size());
  const int ow = w - r + 1;
  const int oh = h - r + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < r; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < r; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, double peak) {
  LS_CHECK(a.sameShape(b), ParameterError, "image shapes differ");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  LS_CHECK(a.width >= kWindow && a.height >= kWindow, ParameterError, "SSIM needs images of at least 11x11");
  std::vector<double> kernel(kWindow);
  double ksum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    kernel[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (auto& v : kernel) v /= ksum;
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);

  double total = 0.0;
  const std::size_t n = a.pixelCount();
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * a.channels + c];
      y[i] = b.data[i * b.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = gaussianFilterValid(x, a.width, a.height, kernel);
    const auto my = gaussianFilterValid(y, a.width, a.height, kernel);
    const auto sxx = gaussianFilterValid(xx, a.width, a.height, kernel);
    const auto syy = gaussianFilterValid(yy, a.width, a.height, kernel);
    const auto sxy = gaussianFilterValid(xy, a.width, a.height, kernel);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / a.channels;
}

namespace io {

namespace fs = std::filesystem;

Image readPfm(const fs::path& path) {
  const auto bytes = readBinary(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const std::string magic = token();
  LS_CHECK(magic == "PF" || magic == "Pf", DataError, path.string() + ": not a PFM file");
  Image img;
  img.channels = magic == "PF" ? 3 : 1;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    const double scale = std::stod(token());
    LS_CHECK(scale < 0.0, DataError, path.string() + ": big-endian PFM is not supported");
  } catch (const std::logic_error&) {
    throw DataError(path.string() + ": malformed PFM header");
  }
  LS_CHECK(img.width > 0 && img.height > 0, DataError, path.string() + ": bad PFM size");
  ++pos;  // single whitespace byte after the scale
  const std::size_t count = img.pixelCount() * img.channels;
  LS_CHECK(bytes.size() - pos >= count * 4, DataError, path.string() + ": truncated PFM data");
  img.data.resize(count);
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    // PFM stores the bottom row first.
    std::memcpy(img.data.data() + (img.height - 1 - y) * row, bytes.data() + pos + y * row * 4, row * 4);
  }
  return img;
}

void writePfm(const fs::path& path, const Image& image) {
  LS_CHECK(image.channels == 1 || image.channels == 3, ParameterError, "PFM holds 1 or 3 channels");
  std::string header = std::string(image.channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(image.width) + " " +
                       std::to_string(image.height) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = image.height - 1; y >= 0; --y) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(image.data.data() + y * row);
    out.insert(out.end(), p, p + row * 4);
  }
  writeAtomic(path, out.data(), out.size());
}

namespace {

struct PngWriteBuffer {
  std::vector<std::uint8_t> bytes;
};

void pngWriteCallback(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.insert(buf->bytes.end(), data, data + length);
}

void pngFlush(png_structp) {}

[[noreturn]] void pngError(png_structp, png_const_charp msg) {
  throw DataError(std::string("libpng: ") + msg);
}

void pngWarning(png_structp, png_const_charp) {}

struct PngReadBuffer {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void pngReadCallback(png_structp png, png_bytep out, png_size_t length) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->pos + length > buf->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, buf->bytes->data() + buf->pos, length);
  buf->pos += length;
}

}  // namespace

void writePng16(const fs::path& path, const Image& image) {
  LS_CHECK(image.channels == 1 || image.channels == 3, ParameterError, "PNG output holds 1 or 3 channels");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, pngError, pngWarning);
  LS_CHECK(png != nullptr, DataError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  PngWriteBuffer buffer;
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  png_set_write_fn(png, &buffer, pngWriteCallback, pngFlush);
  png_set_IHDR(png, info, image.width, image.height, 16, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowSamples = static_cast<std::size_t>(image.width) * image.channels;
  std::vector<std::uint8_t> row(rowSamples * 2);
  for (int y = 0; y < image.height; ++y) {
    for (std::size_t i = 0; i < rowSamples; ++i) {
      const float v = std::clamp(image.data[y * rowSamples + i], 0.0f, 1.0f);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
      row[2 * i] = static_cast<std::uint8_t>(q >> 8);
      row[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  writeAtomic(path, buffer.bytes.data(), buffer.bytes.size());
}

Image readPng(const fs::path& path) {
  const auto bytes = readBinary(path);
  LS_CHECK(bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0, DataError, path.string() + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, pngError, pngWarning);
  LS_CHECK(png != nullptr, DataError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  PngReadBuffer buffer{&bytes, 0};
  png_set_read_fn(png, &buffer, pngReadCallback);
  png_read_info(png, info);
  png_set_expand(png);
  png_read_update_info(png, info);
  Image img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowBytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> raw(rowBytes * img.height);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = raw.data() + y * rowBytes;
  png_read_image(png, rows.data());
  img.data.resize(img.pixelCount() * img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const std::size_t y = i / (static_cast<std::size_t>(img.width) * img.channels);
    const std::size_t k = i % (static_cast<std::size_t>(img.width) * img.channels);
    if (depth == 16) {
      const std::uint8_t* p = rows[y] + 2 * k;
      img.data[i] = static_cast<float>((p[0] << 8) | p[1]) / 65535.0f;
    } else {
      img.data[i] = static_cast<float>(rows[y][k]) / 255.0f;
    }
  }
  return img;
}

namespace {

void floatToRgbe(const float* rgb, std::uint8_t* out) {
  const float v = std::max({rgb[0], rgb[1], rgb[2]});
  if (v < 1e-32f) {
    out[0] = out[1] = out[2] = out[3] = 0;
    return;
  }
  int e = 0;
  const float scale = std::frexp(v, &e) * 256.0f / v;
  for (int c = 0; c < 3; ++c) out[c] = static_cast<std::uint8_t>(std::max(0.0f, rgb[c]) * scale);
  out[3] = static_cast<std::uint8_t>(e + 128);
}

void rgbeToFloat(const std::uint8_t* in, float* rgb) {
  if (in[3] == 0) {
    rgb[0] = rgb[1] = rgb[2] = 0.0f;
    return;
  }
  const float f = std::ldexp(1.0f, static_cast<int>(in[3]) - (128 + 8));
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<float>(in[c]) * f;
}

}  // namespace

Image readHdr(const fs::path& path) {
  const auto bytes = readBinary(path);
  std::size_t pos = 0;
  auto line = [&]() {
    std::string s;
    while (pos < bytes.size() && bytes[pos] != '\n') s.push_back(static_cast<char>(bytes[pos++]));
    LS_CHECK(pos < bytes.size(), DataError, path.string() + ": truncated HDR header");
    ++pos;
    return s;
  };
  const std::string magic = line();
  LS_CHECK(magic.rfind("#?", 0) == 0, DataError, path.string() + ": not a Radiance HDR file");
  for (std::string l = line(); !l.empty(); l = line()) {
    if (l.rfind("FORMAT=", 0) == 0) {
      LS_CHECK(l == "FORMAT=32-bit_rle_rgbe", DataError, path.string() + ": unsupported HDR format " + l);
    }
  }
  Image img;
  {
    std::istringstream res(line());
    std::string ya, xa;
    res >> ya >> img.height >> xa >> img.width;
    LS_CHECK(ya == "-Y" && xa == "+X" && img.width > 0 && img.height > 0, DataError,
             path.string() + ": unsupported HDR orientation");
  }
  img.channels = 3;
  img.data.resize(img.pixelCount() * 3);
  std::vector<std::uint8_t> scan(static_cast<std::size_t>(img.width) * 4);
  auto need = [&](std::size_t n) { LS_CHECK(pos + n <= bytes.size(), DataError, path.string() + ": truncated HDR data"); };
  for (int y = 0; y < img.height; ++y) {
    need(4);
    const bool rle = img.width >= 8 && img.width < 32768 && bytes[pos] == 2 && bytes[pos + 1] == 2 &&
                     ((bytes[pos + 2] << 8) | bytes[pos + 3]) == img.width;
    if (rle) {
      pos += 4;
      for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < img.width) {
          need(1);
          int count = bytes[pos++];
          if (count > 128) {
            count -= 128;
            need(1);
            LS_CHECK(x + count <= img.width, DataError, path.string() + ": bad HDR run");
            const std::uint8_t v = bytes[pos++];
            for (int i = 0; i < count; ++i) scan[(x++) * 4 + c] = v;
          } else {
            LS_CHECK(count > 0 && x + count <= img.width, DataError, path.string() + ": bad HDR run");
            need(count);
            for (int i = 0; i < count; ++i) scan[(x++) * 4 + c] = bytes[pos++];
          }
        }
      }
    } else {
      need(scan.size());
      std::memcpy(scan.data(), bytes.data() + pos, scan.size());
      pos += scan.size();
    }
    for (int x = 0; x < img.width; ++x) rgbeToFloat(&scan[x * 4], &img.at(x, y));
  }
  return img;
}

void writeHdr(const fs::path& path, const Image& image) {
  LS_CHECK(image.channels == 3, ParameterError, "HDR output needs 3 channels");
  const std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(image.height) + " +X " +
                             std::to_string(image.width) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixelCount() * 4);
  std::uint8_t rgbe[4];
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      floatToRgbe(&image.data[(static_cast<std::size_t>(y) * image.width + x) * 3], rgbe);
      out.insert(out.end(), rgbe, rgbe + 4);
    }
  }
  writeAtomic(path, out.data(), out.size());
}

Image readImage(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return readPfm(path);
  if (ext == ".png") return readPng(path);
  if (ext == ".hdr") return readHdr(path);
  throw ParameterError("unsupported image extension: " + path.string());
}

void writeImage(const fs::path& path, const Image& image) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return writePfm(path, image);
  if (ext == ".png") return writePng16(path, image);
  if (ext == ".hdr") return writeHdr(path, image);
  throw ParameterError("unsupported image extension: " + path.string());
}

}  // namespace io

}  // namespace lumisplat
