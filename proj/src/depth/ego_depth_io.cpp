#include "lumisplat/depth/ego_depth.h"
#include "lumisplat/io/files.h"
#include "lumisplat/io/image.h"

#include <cstring>
#include <sstream>

namespace lumisplat::io {

DepthMap loadDepthMap(const std::filesystem::path& pfm, const std::filesystem::path& sidecar) {
  const Image img = readPfm(pfm);
  LS_CHECK(img.channels == 1, DataError, pfm.string() + ": depth PFM must have one channel");
  const Json j = readJson(sidecar);
  DepthMap d;
  d.width = img.width;
  d.height = img.height;
  d.depth = img.data;
  try {
    const Mat3 k = jsonMat3(j.at("K"));
    LS_CHECK(k(0, 1) == 0.0 && k(1, 0) == 0.0 && k(2, 0) == 0.0 && k(2, 1) == 0.0 && k(2, 2) == 1.0, DataError,
             sidecar.string() + ": K must be [[fx,0,cx],[0,fy,cy],[0,0,1]]");
    d.K = {k(0, 0), k(1, 1), k(0, 2), k(1, 2)};
    d.handEye = RigidTransform::fromMatrix(jsonMat4(j.at("Pi")));
    d.headPose = RigidTransform::fromMatrix(jsonMat4(j.at("H")));
  } catch (const Json::exception& e) {
    throw DataError(sidecar.string() + ": " + e.what());
  }
  LS_CHECK(d.handEye.isRigid(1e-4) && d.headPose.isRigid(1e-4), DataError,
           sidecar.string() + ": Pi and H must be rigid transforms");
  for (float v : d.depth) {
    LS_CHECK(std::isfinite(v) && v >= 0.0f, DataError, pfm.string() + ": depth must be finite and >= 0");
  }
  return d;
}

void saveDepthMap(const std::filesystem::path& pfm, const std::filesystem::path& sidecar, const DepthMap& depth) {
  Image img(depth.width, depth.height, 1);
  img.data = depth.depth;
  writePfm(pfm, img);
  Mat3 k = Mat3::Identity();
  k(0, 0) = depth.K.fx;
  k(1, 1) = depth.K.fy;
  k(0, 2) = depth.K.cx;
  k(1, 2) = depth.K.cy;
  writeJson(sidecar, Json{{"K", toJson(k)}, {"Pi", toJson(depth.handEye.matrix())}, {"H", toJson(depth.headPose.matrix())}});
}

void writePly(const std::filesystem::path& path, const OrientedPointCloud& cloud) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
         << "\nproperty float x\nproperty float y\nproperty float z\n"
            "property float nx\nproperty float ny\nproperty float nz\nend_header\n";
  ByteWriter w;
  const std::string h = header.str();
  w.bytes(h.data(), h.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 n = i < cloud.normals.size() ? cloud.normals[i] : Vec3::Zero();
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(cloud.points[i][c]));
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(n[c]));
  }
  writeAtomic(path, w.data().data(), w.data().size());
}

OrientedPointCloud readPly(const std::filesystem::path& path) {
  const auto bytes = readBinary(path);
  const std::string what = path.string();
  const std::string text(bytes.begin(), bytes.end());
  const auto end = text.find("end_header\n");
  LS_CHECK(text.rfind("ply\n", 0) == 0 && end != std::string::npos, DataError, what + ": not a PLY file");
  std::istringstream header(text.substr(0, end));
  std::string line, format;
  std::size_t count = 0;
  std::vector<std::pair<std::string, std::string>> props;  // (type, name) of the vertex element
  bool inVertex = false;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      ls >> format;
    } else if (key == "element") {
      std::string name;
      ls >> name;
      inVertex = name == "vertex";
      if (inVertex) ls >> count;
    } else if (key == "property" && inVertex) {
      std::string type, name;
      ls >> type >> name;
      LS_CHECK(type != "list", DataError, what + ": list properties on vertices are not supported");
      props.emplace_back(type, name);
    }
  }
  LS_CHECK(format == "ascii" || format == "binary_little_endian", DataError, what + ": unsupported PLY format " + format);
  auto index = [&](const std::string& n) {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i].second == n) return static_cast<int>(i);
    return -1;
  };
  const int ix = index("x"), iy = index("y"), iz = index("z");
  const int inx = index("nx"), iny = index("ny"), inz = index("nz");
  LS_CHECK(ix >= 0 && iy >= 0 && iz >= 0, DataError, what + ": vertex element lacks x, y, z");
  const bool hasNormals = inx >= 0 && iny >= 0 && inz >= 0;

  auto sizeOf = [&](const std::string& t) -> std::size_t {
    if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" || t == "uint32") return 4;
    if (t == "double" || t == "float64") return 8;
    if (t == "uchar" || t == "uint8" || t == "char" || t == "int8") return 1;
    if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
    throw DataError(what + ": unknown PLY property type " + t);
  };

  OrientedPointCloud cloud;
  cloud.points.resize(count);
  cloud.normals.assign(count, Vec3::Zero());
  cloud.valid.assign(count, 0);
  std::vector<double> row(props.size());
  std::size_t pos = end + std::strlen("end_header\n");
  std::istringstream ascii(format == "ascii" ? text.substr(pos) : std::string());
  for (std::size_t v = 0; v < count; ++v) {
    for (std::size_t p = 0; p < props.size(); ++p) {
      if (format == "ascii") {
        LS_CHECK(static_cast<bool>(ascii >> row[p]), DataError, what + ": truncated vertex data");
        continue;
      }
      const std::string& t = props[p].first;
      const std::size_t n = sizeOf(t);
      LS_CHECK(pos + n <= bytes.size(), DataError, what + ": truncated vertex data");
      const std::uint8_t* b = bytes.data() + pos;
      pos += n;
      if (t == "float" || t == "float32") {
        float f;
        std::memcpy(&f, b, 4);
        row[p] = f;
      } else if (t == "double" || t == "float64") {
        double d;
        std::memcpy(&d, b, 8);
        row[p] = d;
      } else {
        row[p] = 0.0;  // colours and other payload are ignored
      }
    }
    cloud.points[v] = Vec3(row[ix], row[iy], row[iz]);
    LS_CHECK(cloud.points[v].allFinite(), DataError, what + ": non-finite point");
    if (hasNormals) {
      const Vec3 n(row[inx], row[iny], row[inz]);
      if (n.allFinite() && n.norm() > 1e-6) {
        cloud.normals[v] = n.normalized();
        cloud.valid[v] = 1;
      }
    }
  }
  return cloud;
}

}  // namespace lumisplat::io
