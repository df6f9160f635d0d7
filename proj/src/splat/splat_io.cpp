#include "lumisplat/io/files.h"
#include "lumisplat/splat/splat.h"

namespace lumisplat::io {

void saveSplats(const std::filesystem::path& path, const SplatTexture& tex) {
  tex.validate();
  ByteWriter w;
  w.bytes("LSPT1", 5);
  w.u32(static_cast<std::uint32_t>(tex.resolution));
  for (std::size_t t = 0; t < tex.texelCount(); ++t) {
    w.u8(tex.active[t]);
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(tex.offsets[t][c]));
    const Quat& q = tex.rotations[t];
    for (double v : {q.w(), q.x(), q.y(), q.z()}) w.f32(static_cast<float>(v));
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(tex.scales[t][c]));
    w.f32(static_cast<float>(tex.opacity[t]));
  }
  writeAtomic(path, w.data().data(), w.data().size());
}

SplatTexture loadSplats(const std::filesystem::path& path) {
  const auto bytes = readBinary(path);
  ByteReader r(bytes, path.string());
  r.expectMagic("LSPT1");
  SplatTexture tex;
  tex.resolution = static_cast<int>(r.u32());
  const std::size_t n = static_cast<std::size_t>(tex.resolution) * tex.resolution;
  LS_CHECK(bytes.size() == 9 + n * 45, DataError, path.string() + ": size does not match header");
  tex.active.resize(n);
  tex.offsets.resize(n);
  tex.rotations.resize(n);
  tex.scales.resize(n);
  tex.opacity.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    tex.active[t] = r.u8();
    for (int c = 0; c < 3; ++c) tex.offsets[t][c] = r.f32();
    const double qw = r.f32(), qx = r.f32(), qy = r.f32(), qz = r.f32();
    // Stored as float; renormalise so the unit-norm invariant holds at double precision.
    tex.rotations[t] = Quat(qw, qx, qy, qz);
    if (tex.active[t]) {
      LS_CHECK(std::abs(tex.rotations[t].norm() - 1.0) < 1e-4, DataError, path.string() + ": non-unit rotation");
      tex.rotations[t].normalize();
    }
    for (int c = 0; c < 3; ++c) tex.scales[t][c] = r.f32();
    tex.opacity[t] = r.f32();
  }
  try {
    tex.validate();
  } catch (const ParameterError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return tex;
}

CameraView loadView(const std::filesystem::path& path) {
  const Json j = readJson(path);
  CameraView v;
  try {
    v.fx = j.at("fx").get<double>();
    v.fy = j.at("fy").get<double>();
    v.cx = j.at("cx").get<double>();
    v.cy = j.at("cy").get<double>();
    v.width = j.at("width").get<int>();
    v.height = j.at("height").get<int>();
    v.worldToCamera = RigidTransform::fromMatrix(jsonMat4(j.at("world_to_camera")));
    v.near = j.value("near", v.near);
    v.far = j.value("far", v.far);
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    v.validate();
  } catch (const ParameterError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return v;
}

void saveView(const std::filesystem::path& path, const CameraView& v) {
  writeJson(path, Json{{"fx", v.fx},
                       {"fy", v.fy},
                       {"cx", v.cx},
                       {"cy", v.cy},
                       {"width", v.width},
                       {"height", v.height},
                       {"world_to_camera", toJson(v.worldToCamera.matrix())},
                       {"near", v.near},
                       {"far", v.far}});
}

}  // namespace lumisplat::io
