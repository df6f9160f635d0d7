#include "lumisplat/geometry/character_io.h"
#include "lumisplat/io/files.h"

#include <cstdio>
#include <map>
#include <sstream>

namespace lumisplat::io {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parseObjIndex(const std::string& token, std::size_t count, const std::string& what) {
  const long idx = std::stol(token);
  const long resolved = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
  LS_CHECK(resolved >= 0 && static_cast<std::size_t>(resolved) < count, DataError, "OBJ " + what + " index out of range");
  return static_cast<int>(resolved);
}

Json vecList(const Vec3List& list) {
  Json out = Json::array();
  for (const auto& v : list) {
    out.push_back(toJson(v));
  }
  return out;
}

Vec3List readVecList(const Json& j, const std::string& what) {
  LS_CHECK(j.is_array(), DataError, what + " must be an array");
  Vec3List out;
  out.reserve(j.size());
  for (const auto& e : j) {
    out.push_back(jsonVec3(e));
  }
  return out;
}

}  // namespace

TriangleMesh readObj(const fs::path& path) {
  std::istringstream in(readText(path));
  TriangleMesh mesh;
  Vec2List uvs;
  std::vector<std::array<int, 3>> uvFaces;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x, y, z;
      LS_CHECK(static_cast<bool>(ls >> x >> y >> z), DataError, "bad OBJ vertex line: " + line);
      mesh.vertices.push_back(Vec3(x, y, z));
    } else if (tag == "vt") {
      double u, v;
      LS_CHECK(static_cast<bool>(ls >> u >> v), DataError, "bad OBJ texcoord line: " + line);
      uvs.push_back(Vec2(u, v));
    } else if (tag == "f") {
      std::vector<std::pair<int, int>> corners;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const int vi = parseObjIndex(tok.substr(0, slash), mesh.vertices.size(), "vertex");
        int ti = -1;
        if (slash != std::string::npos) {
          const auto rest = tok.substr(slash + 1);
          const auto slash2 = rest.find('/');
          const auto t = rest.substr(0, slash2);
          if (!t.empty()) {
            ti = parseObjIndex(t, uvs.size(), "texcoord");
          }
        }
        corners.emplace_back(vi, ti);
      }
      LS_CHECK(corners.size() >= 3, DataError, "OBJ face with fewer than 3 corners");
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
        mesh.faces.push_back({corners[0].first, corners[k].first, corners[k + 1].first});
        uvFaces.push_back({corners[0].second, corners[k].second, corners[k + 1].second});
      }
    }
  }
  for (const auto& uf : uvFaces) {
    FaceUv fuv;
    for (int c = 0; c < 3; ++c) {
      fuv[c] = uf[c] >= 0 ? uvs[uf[c]] : Vec2::Zero();
    }
    mesh.faceUvs.push_back(fuv);
  }
  return mesh;
}

void writeObj(const fs::path& path, const Vec3List& vertices, const std::vector<Face>& faces,
              const std::vector<FaceUv>& faceUvs) {
  std::ostringstream out;
  for (const auto& v : vertices) {
    out << "v " << fmt17(v.x()) << ' ' << fmt17(v.y()) << ' ' << fmt17(v.z()) << '\n';
  }
  std::map<std::pair<double, double>, int> uvIndex;
  std::vector<std::array<int, 3>> uvFaces;
  for (const auto& fuv : faceUvs) {
    std::array<int, 3> ids{};
    for (int c = 0; c < 3; ++c) {
      const auto key = std::make_pair(fuv[c].x(), fuv[c].y());
      auto it = uvIndex.find(key);
      if (it == uvIndex.end()) {
        const int id = static_cast<int>(uvIndex.size()) + 1;
        it = uvIndex.emplace(key, id).first;
        out << "vt " << fmt17(key.first) << ' ' << fmt17(key.second) << '\n';
      }
      ids[c] = it->second;
    }
    uvFaces.push_back(ids);
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    out << 'f';
    for (int c = 0; c < 3; ++c) {
      out << ' ' << faces[f][c] + 1;
      if (f < uvFaces.size()) {
        out << '/' << uvFaces[f][c];
      }
    }
    out << '\n';
  }
  writeAtomic(path, out.str());
}

std::vector<std::uint8_t> encodeSkinning(const SparseWeights& weights) {
  ByteWriter w;
  w.bytes("LSKW1", 5);
  w.u32(static_cast<std::uint32_t>(weights.rows()));
  w.u32(static_cast<std::uint32_t>(weights.columns));
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    w.u32(static_cast<std::uint32_t>(weights.rowEnd(r) - weights.rowBegin(r)));
  }
  for (auto idx : weights.indices) {
    w.u32(idx);
  }
  for (double v : weights.weights) {
    w.f32(static_cast<float>(v));
  }
  return w.data();
}

SparseWeights decodeSkinning(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "skinning.bin");
  r.expectMagic("LSKW1");
  const std::uint32_t rows = r.u32();
  SparseWeights out;
  out.columns = r.u32();
  out.offsets.assign(1, 0);
  for (std::uint32_t i = 0; i < rows; ++i) {
    out.offsets.push_back(out.offsets.back() + r.u32());
  }
  const std::uint32_t nnz = out.offsets.back();
  out.indices.resize(nnz);
  out.weights.resize(nnz);
  for (auto& idx : out.indices) {
    idx = r.u32();
  }
  for (auto& v : out.weights) {
    v = r.f32();
  }
  LS_CHECK(r.atEnd(), DataError, "skinning.bin: trailing bytes");
  return out;
}

TemplateCharacter loadCharacter(const fs::path& dir) {
  LS_CHECK(fs::is_directory(dir), DataError, "character directory not found: " + dir.string());
  TemplateCharacter c;
  const TriangleMesh mesh = readObj(dir / "template.obj");
  c.vertices = mesh.vertices;
  c.faces = mesh.faces;
  c.faceUvs = mesh.faceUvs;

  const Json sk = readJson(dir / "skeleton.json");
  try {
    for (const auto& j : sk.at("joints")) {
      c.jointNames.push_back(j.value("name", "joint" + std::to_string(c.jointNames.size())));
      c.jointParents.push_back(j.at("parent").get<int>());
      c.jointRest.push_back(jsonVec3(j.at("position")));
    }
    for (const auto& d : sk.at("dofs")) {
      DofSpec dof;
      dof.name = d.value("name", "dof" + std::to_string(c.dofs.size()));
      dof.joint = d.at("joint").get<int>();
      const std::string type = d.at("type").get<std::string>();
      LS_CHECK(type == "rotation" || type == "translation", DataError, "unknown DoF type " + type);
      dof.type = type == "rotation" ? DofType::kRotation : DofType::kTranslation;
      dof.axis = jsonVec3(d.at("axis"));
      dof.lower = d.at("min").get<double>();
      dof.upper = d.at("max").get<double>();
      dof.mean = d.value("mean", 0.0);
      c.dofs.push_back(dof);
    }
    c.boneJoints = sk.at("bones").get<std::vector<int>>();
    if (sk.contains("hands")) {
      c.handDofs[0] = sk["hands"].value("left", std::vector<int>{});
      c.handDofs[1] = sk["hands"].value("right", std::vector<int>{});
    }
    c.keypointJoints = sk.value("keypoint_joints", std::vector<int>{});
  } catch (const Json::exception& e) {
    throw DataError("skeleton.json: " + std::string(e.what()));
  }

  c.skinning = decodeSkinning(readBinary(dir / "skinning.bin"));

  if (fs::exists(dir / "graph.json")) {
    const Json g = readJson(dir / "graph.json");
    try {
      c.graphNodes = g.at("nodes").get<std::vector<int>>();
      for (const auto& e : g.at("edges")) {
        c.nodeEdges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
      }
      c.nodeWeights.columns = c.graphNodes.size();
      for (const auto& row : g.at("weights")) {
        std::vector<std::pair<std::uint32_t, double>> entries;
        for (const auto& e : row) {
          entries.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<double>());
        }
        c.nodeWeights.appendRow(entries);
      }
    } catch (const Json::exception& e) {
      throw DataError("graph.json: " + std::string(e.what()));
    }
  }
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw DataError(std::string("invalid character: ") + e.what());
  }
  return c;
}

void saveCharacter(const TemplateCharacter& c, const fs::path& dir) {
  fs::create_directories(dir);
  writeObj(dir / "template.obj", c.vertices, c.faces, c.faceUvs);

  Json sk;
  sk["joints"] = Json::array();
  for (std::size_t j = 0; j < c.jointCount(); ++j) {
    sk["joints"].push_back({{"name", c.jointNames.size() > j ? c.jointNames[j] : "joint" + std::to_string(j)},
                            {"parent", c.jointParents[j]},
                            {"position", toJson(c.jointRest[j])}});
  }
  sk["dofs"] = Json::array();
  for (const auto& d : c.dofs) {
    sk["dofs"].push_back({{"name", d.name},
                          {"joint", d.joint},
                          {"type", d.type == DofType::kRotation ? "rotation" : "translation"},
                          {"axis", toJson(d.axis)},
                          {"min", d.lower},
                          {"max", d.upper},
                          {"mean", d.mean}});
  }
  sk["bones"] = c.boneJoints;
  if (!c.handDofs[0].empty() || !c.handDofs[1].empty()) {
    sk["hands"] = {{"left", c.handDofs[0]}, {"right", c.handDofs[1]}};
  }
  if (!c.keypointJoints.empty()) {
    sk["keypoint_joints"] = c.keypointJoints;
  }
  writeJson(dir / "skeleton.json", sk);

  const auto skin = encodeSkinning(c.skinning);
  writeAtomic(dir / "skinning.bin", skin.data(), skin.size());

  Json g;
  g["nodes"] = c.graphNodes;
  g["edges"] = Json::array();
  for (const auto& e : c.nodeEdges) {
    g["edges"].push_back({e[0], e[1]});
  }
  g["weights"] = Json::array();
  for (std::size_t r = 0; r < c.nodeWeights.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t k = c.nodeWeights.rowBegin(r); k < c.nodeWeights.rowEnd(r); ++k) {
      row.push_back({c.nodeWeights.indices[k], c.nodeWeights.weights[k]});
    }
    g["weights"].push_back(row);
  }
  writeJson(dir / "graph.json", g);
}

SkeletonPose loadPose(const fs::path& path) {
  const Json j = readJson(path);
  LS_CHECK(j.contains("theta"), DataError, path.string() + ": missing \"theta\"");
  const auto values = j["theta"].get<std::vector<double>>();
  SkeletonPose pose;
  pose.dofValues = Eigen::Map<const VecX>(values.data(), static_cast<Eigen::Index>(values.size()));
  return pose;
}

void savePose(const fs::path& path, const SkeletonPose& pose) {
  writeJson(path, Json{{"theta", std::vector<double>(pose.dofValues.data(), pose.dofValues.data() + pose.dofValues.size())}});
}

DeformParams loadDeform(const fs::path& path) {
  const Json j = readJson(path);
  DeformParams p;
  try {
    p.nodeRotations = readVecList(j.at("alpha"), "alpha");
    p.nodeTranslations = readVecList(j.at("beta"), "beta");
    p.vertexOffsets = readVecList(j.at("offsets"), "offsets");
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return p;
}

void saveDeform(const fs::path& path, const DeformParams& params) {
  writeJson(path, Json{{"alpha", vecList(params.nodeRotations)},
                       {"beta", vecList(params.nodeTranslations)},
                       {"offsets", vecList(params.vertexOffsets)}});
}

}  // namespace lumisplat::io
