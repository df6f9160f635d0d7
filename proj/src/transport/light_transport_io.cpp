#include "lumisplat/io/files.h"
#include "lumisplat/transport/light_transport.h"

namespace lumisplat::io {

LightRig loadRig(const std::filesystem::path& path) {
  const Json j = readJson(path);
  LS_CHECK(j.is_array(), DataError, path.string() + ": rig must be a JSON list");
  LightRig rig;
  try {
    for (const auto& e : j) {
      rig.directions.push_back(jsonVec3(e.at("dir")));
      rig.intensities.push_back(jsonVec3(e.at("intensity")));
    }
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    rig.validate();
  } catch (const ParameterError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return rig;
}

void saveRig(const std::filesystem::path& path, const LightRig& rig) {
  Json j = Json::array();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    j.push_back({{"dir", toJson(rig.directions[i])}, {"intensity", toJson(rig.intensities[i])}});
  }
  writeJson(path, j);
}

void saveFeatures(const std::filesystem::path& path, const TransportFeatures& f) {
  ByteWriter w;
  w.bytes("LTFT1", 5);
  w.u32(static_cast<std::uint32_t>(f.texels));
  w.u32(static_cast<std::uint32_t>(f.rays));
  for (std::size_t t = 0; t < f.texels; ++t) {
    w.f32(static_cast<float>(f.rho[t]));
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(f.chi[t][c]));
    for (std::size_t k = 0; k < f.rays; ++k) {
      w.u32(static_cast<std::uint32_t>(f.selected[t * f.rays + k]));
      for (double v : f.psi[t * f.rays + k]) w.f32(static_cast<float>(v));
    }
  }
  writeAtomic(path, w.data().data(), w.data().size());
}

TransportFeatures loadFeatures(const std::filesystem::path& path) {
  const auto bytes = readBinary(path);
  ByteReader r(bytes, path.string());
  r.expectMagic("LTFT1");
  TransportFeatures f;
  f.texels = r.u32();
  f.rays = r.u32();
  LS_CHECK(bytes.size() == 13 + f.texels * (16 + f.rays * 28), DataError, path.string() + ": size does not match header");
  f.rho.resize(f.texels);
  f.chi.resize(f.texels);
  f.selected.resize(f.texels * f.rays);
  f.psi.resize(f.texels * f.rays);
  for (std::size_t t = 0; t < f.texels; ++t) {
    f.rho[t] = r.f32();
    for (int c = 0; c < 3; ++c) f.chi[t][c] = r.f32();
    for (std::size_t k = 0; k < f.rays; ++k) {
      f.selected[t * f.rays + k] = static_cast<std::int32_t>(r.u32());
      for (double& v : f.psi[t * f.rays + k]) v = r.f32();
    }
  }
  return f;
}

}  // namespace lumisplat::io
