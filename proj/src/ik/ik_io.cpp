#include "lumisplat/ik/ik.h"
#include "lumisplat/io/config.h"
#include "lumisplat/io/files.h"

#include <sstream>

namespace lumisplat::io {

namespace fs = std::filesystem;

namespace {

VecX jsonVector(const Json& j) {
  LS_CHECK(j.is_array(), DataError, "expected an array of numbers");
  VecX v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Json vectorJson(const VecX& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

template <typename F>
void forEachLine(const fs::path& path, F&& f) {
  std::istringstream in(readText(path));
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(Json::parse(line));
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
}

}  // namespace

KeypointSequence loadKeypoints(const fs::path& path, const std::vector<int>& jointMap) {
  KeypointSequence kp;
  std::vector<std::pair<long, std::size_t>> order;
  forEachLine(path, [&](const Json& j) {
    Vec3List pts;
    for (const auto& p : j.at("kp")) pts.push_back(jsonVec3(p));
    VecX conf = j.contains("conf") ? jsonVector(j["conf"]) : VecX::Ones(pts.size());
    LS_CHECK(static_cast<std::size_t>(conf.size()) == pts.size(), DataError, "conf length != keypoint count");
    order.emplace_back(j.value("t", static_cast<long>(order.size())), order.size());
    kp.positions.push_back(std::move(pts));
    kp.confidences.push_back(std::move(conf));
  });
  LS_CHECK(!kp.positions.empty(), DataError, path.string() + " holds no frames");
  for (std::size_t i = 1; i < order.size(); ++i) {
    LS_CHECK(order[i].first > order[i - 1].first, DataError, "frame indices must increase");
  }
  if (jointMap.empty()) {
    kp.jointMap.resize(kp.positions.front().size());
    for (std::size_t k = 0; k < kp.jointMap.size(); ++k) kp.jointMap[k] = static_cast<int>(k);
  } else {
    kp.jointMap = jointMap;
  }
  return kp;
}

void saveKeypoints(const fs::path& path, const KeypointSequence& keypoints) {
  std::string text;
  for (std::size_t t = 0; t < keypoints.frameCount(); ++t) {
    Json j;
    j["t"] = t;
    j["kp"] = Json::array();
    for (const auto& p : keypoints.positions[t]) j["kp"].push_back(toJson(p));
    j["conf"] = vectorJson(keypoints.confidences[t]);
    text += j.dump() + "\n";
  }
  writeAtomic(path, text);
}

void saveMotion(const fs::path& path, const PoseSequence& poses) {
  std::string text;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    Json j;
    j["t"] = t;
    j["theta"] = vectorJson(poses[t]);
    text += j.dump() + "\n";
  }
  writeAtomic(path, text);
}

PoseSequence loadMotion(const fs::path& path) {
  PoseSequence poses;
  forEachLine(path, [&](const Json& j) { poses.push_back(jsonVector(j.at("theta"))); });
  return poses;
}

std::array<HandPcaModel, 2> loadHandPca(const fs::path& path) {
  const Json j = readJson(path);
  std::array<HandPcaModel, 2> out;
  try {
    const char* names[2] = {"left", "right"};
    for (int h = 0; h < 2; ++h) {
      if (!j.contains(names[h])) continue;
      const auto& m = j[names[h]];
      out[h].mean = jsonVector(m.at("mean"));
      const auto& rows = m.at("basis");
      LS_CHECK(rows.size() == static_cast<std::size_t>(out[h].mean.size()), DataError, "basis rows != mean length");
      const std::size_t cols = rows.empty() ? 0 : rows[0].size();
      out[h].basis.resize(rows.size(), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        LS_CHECK(rows[r].size() == cols, DataError, "ragged basis matrix");
        for (std::size_t c = 0; c < cols; ++c) out[h].basis(r, c) = rows[r][c].get<double>();
      }
      out[h].validate();
    }
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const ParameterError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

void saveHandPca(const fs::path& path, const std::array<HandPcaModel, 2>& models) {
  Json j = Json::object();
  const char* names[2] = {"left", "right"};
  for (int h = 0; h < 2; ++h) {
    if (models[h].mean.size() == 0) continue;
    Json basis = Json::array();
    for (Eigen::Index r = 0; r < models[h].basis.rows(); ++r) {
      basis.push_back(vectorJson(models[h].basis.row(r).transpose()));
    }
    j[names[h]] = {{"mean", vectorJson(models[h].mean)}, {"basis", basis}};
  }
  writeJson(path, j);
}

IkConfig loadIkConfig(const fs::path& path) {
  const auto kv = KeyValueConfig::load(path);
  std::set<std::string> known = {"stages", "body_temporal", "body_includes_root"};
  IkConfig cfg;
  const std::string stages = kv.getString("stages", "global,body,hands");
  cfg.stages.clear();
  std::istringstream in(stages);
  std::string name;
  while (std::getline(in, name, ',')) {
    IkStage s;
    if (name == "global") {
      s.kind = IkStageKind::kGlobal;
    } else if (name == "body") {
      s.kind = IkStageKind::kBody;
    } else if (name == "hands") {
      s.kind = IkStageKind::kHands;
      s.wTemporal = 30.0;
    } else {
      throw ParameterError("unknown IK stage '" + name + "'");
    }
    for (const char* key : {"iterations", "w_temporal", "w_reg", "w_doflimit"}) known.insert(name + "." + key);
    s.iterations = kv.getInt(name + ".iterations", s.iterations);
    s.wTemporal = kv.getDouble(name + ".w_temporal", s.wTemporal);
    s.wReg = kv.getDouble(name + ".w_reg", s.wReg);
    s.wLimit = kv.getDouble(name + ".w_doflimit", s.wLimit);
    cfg.stages.push_back(s);
  }
  cfg.bodyTemporal = kv.getBool("body_temporal", cfg.bodyTemporal);
  cfg.bodyIncludesRoot = kv.getBool("body_includes_root", cfg.bodyIncludesRoot);
  kv.requireKnown(known);
  cfg.validate();
  return cfg;
}

}  // namespace lumisplat::io
