#pragma once

#include "lumisplat/common.h"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace lumisplat::io {

using Json = nlohmann::json;

std::vector<std::uint8_t> readBinary(const std::filesystem::path& path);
std::string readText(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over the target.
void writeAtomic(const std::filesystem::path& path, const void* data, std::size_t size);
void writeAtomic(const std::filesystem::path& path, const std::string& text);

Json readJson(const std::filesystem::path& path);
void writeJson(const std::filesystem::path& path, const Json& json);

std::string sha256Hex(const void* data, std::size_t size);
std::string sha256File(const std::filesystem::path& path);

Vec3 jsonVec3(const Json& j);
Mat3 jsonMat3(const Json& j);
Mat4 jsonMat4(const Json& j);
Json toJson(const Vec3& v);
Json toJson(const Mat3& m);
Json toJson(const Mat4& m);

/// Little-endian helpers for binary containers.
class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v);
  void f32(float v);
  const std::vector<std::uint8_t>& data() const { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& data, std::string what) : data_(data), what_(std::move(what)) {}
  void bytes(void* out, std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  float f32();
  void expectMagic(const std::string& magic);
  bool atEnd() const { return pos_ == data_.size(); }

 private:
  const std::vector<std::uint8_t>& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace lumisplat::io
