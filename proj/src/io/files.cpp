#include "lumisplat/io/files.h"

#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lumisplat::io {

namespace fs = std::filesystem;

std::vector<std::uint8_t> readBinary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  LS_CHECK(in.good(), DataError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string readText(const fs::path& path) {
  std::ifstream in(path);
  LS_CHECK(in.good(), DataError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeAtomic(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    LS_CHECK(out.good(), DataError, "cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    LS_CHECK(out.good(), DataError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void writeAtomic(const fs::path& path, const std::string& text) {
  writeAtomic(path, text.data(), text.size());
}

Json readJson(const fs::path& path) {
  try {
    return Json::parse(readText(path));
  } catch (const Json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void writeJson(const fs::path& path, const Json& json) {
  writeAtomic(path, json.dump(2) + "\n");
}

std::string sha256Hex(const void* data, std::size_t size) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(static_cast<const unsigned char*>(data), size, digest);
  std::ostringstream ss;
  for (unsigned char c : digest) {
    ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
  }
  return ss.str();
}

std::string sha256File(const fs::path& path) {
  const auto bytes = readBinary(path);
  return sha256Hex(bytes.data(), bytes.size());
}

Vec3 jsonVec3(const Json& j) {
  LS_CHECK(j.is_array() && j.size() == 3, DataError, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Mat3 jsonMat3(const Json& j) {
  LS_CHECK(j.is_array() && j.size() == 3, DataError, "expected a 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    LS_CHECK(j[r].is_array() && j[r].size() == 3, DataError, "expected a 3x3 matrix");
    for (int c = 0; c < 3; ++c) {
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Mat4 jsonMat4(const Json& j) {
  LS_CHECK(j.is_array() && j.size() == 4, DataError, "expected a 4x4 matrix");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    LS_CHECK(j[r].is_array() && j[r].size() == 4, DataError, "expected a 4x4 matrix");
    for (int c = 0; c < 4; ++c) {
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Json toJson(const Vec3& v) {
  return Json::array({v.x(), v.y(), v.z()});
}

Json toJson(const Mat3& m) {
  Json out = Json::array();
  for (int r = 0; r < 3; ++r) {
    out.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  }
  return out;
}

Json toJson(const Mat4& m) {
  Json out = Json::array();
  for (int r = 0; r < 4; ++r) {
    out.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2), m(r, 3)}));
  }
  return out;
}

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

void ByteWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buffer_.insert(buffer_.end(), p, p + n);
}

void ByteWriter::u32(std::uint32_t v) {
  bytes(&v, 4);
}

void ByteWriter::f32(float v) {
  bytes(&v, 4);
}

void ByteReader::bytes(void* out, std::size_t n) {
  LS_CHECK(pos_ + n <= data_.size(), DataError, what_ + ": unexpected end of data");
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t ByteReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  bytes(&v, 4);
  return v;
}

float ByteReader::f32() {
  float v;
  bytes(&v, 4);
  return v;
}

void ByteReader::expectMagic(const std::string& magic) {
  std::string got(magic.size(), '\0');
  bytes(got.data(), magic.size());
  LS_CHECK(got == magic, DataError, what_ + ": bad magic, expected " + magic);
}

}  // namespace lumisplat::io
