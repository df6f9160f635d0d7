#pragma once

#include "lumisplat/geometry/uv_maps.h"
#include "lumisplat/io/image.h"
#include "lumisplat/transport/bvh.h"

#include <array>
#include <filesystem>
#include <optional>

namespace lumisplat {

/// Directional light rig: unit world directions with RGB intensities.
struct LightRig {
  Vec3List directions;
  Vec3List intensities;

  std::size_t size() const { return directions.size(); }
  void validate() const;
};

constexpr int kDefaultRigSize = 331;

/// Fibonacci-sphere directions, all with the given intensity.
LightRig fibonacciRig(int count = kDefaultRigSize, const Vec3& intensity = Vec3::Ones());

/// Equirectangular convention (y up): u = atan2(dx, dz) / 2pi + 0.5, v = acos(dy) / pi.
Vec2 directionToEquirect(const Vec3& d);
Vec3 equirectToDirection(const Vec2& uv);
/// Direction through the center of pixel (x, y) of a width x height map.
Vec3 equirectPixelDirection(int x, int y, int width, int height);

/// Envmap pixel -> nearest rig direction, with cos(latitude) solid-angle weights.
/// Pooling is linear in the map, so the assignment is computed once per map size.
class RigPooling {
 public:
  RigPooling(const Vec3List& directions, int width, int height);

  /// Weighted mean radiance of each light's cell. Empty cells give zero (with a warning).
  Vec3List pool(const Image& envmap) const;
  /// Adjoint of pool: d loss / d envmap from d loss / d intensities (3 channels).
  Image poolAdjoint(const Vec3List& intensityGrad) const;

  int width() const { return width_; }
  int height() const { return height_; }
  int lightOf(int x, int y) const { return cell_[static_cast<std::size_t>(y) * width_ + x]; }

 private:
  int width_, height_;
  std::size_t lights_;
  std::vector<int> cell_;
  std::vector<double> weight_;  // per pixel, already divided by its cell's total
  std::vector<std::uint8_t> empty_;
};

Vec3List poolEnvmapToRig(const Image& envmap, const Vec3List& directions);

/// (wi + wo) / |wi + wo|; throws ParameterError for antipodal inputs.
Vec3 halfVector(const Vec3& wi, const Vec3& wo);

/// Per-texel surface samples: positions, unit normals and albedo where covered.
struct AppearanceMaps {
  int resolution = 0;
  Vec3List positions;
  Vec3List normals;
  Vec3List albedo;
  std::vector<std::uint8_t> covered;

  std::size_t texelCount() const { return covered.size(); }
  void validate() const;
};

AppearanceMaps appearanceFromUv(const UvMaps& uv, const Vec3& albedo);
AppearanceMaps appearanceFromUv(const UvMaps& uv, const Image& albedoTexture);

/// Texel x light visibility bits.
class VisibilityMask {
 public:
  VisibilityMask() = default;
  VisibilityMask(std::size_t texels, std::size_t lights)
      : texels_(texels), lights_(lights), words_((lights + 63) / 64), bits_(texels * words_, 0) {}

  bool get(std::size_t texel, std::size_t light) const {
    return (bits_[texel * words_ + light / 64] >> (light % 64)) & 1u;
  }
  void set(std::size_t texel, std::size_t light, bool value) {
    auto& w = bits_[texel * words_ + light / 64];
    const std::uint64_t m = std::uint64_t{1} << (light % 64);
    w = value ? (w | m) : (w & ~m);
  }
  std::size_t texels() const { return texels_; }
  std::size_t lights() const { return lights_; }
  bool operator==(const VisibilityMask& o) const = default;

 private:
  std::size_t texels_ = 0, lights_ = 0, words_ = 0;
  std::vector<std::uint64_t> bits_;
};

constexpr double kDefaultRayOffset = 1e-4;

/// Shadow rays from p + delta n along each light direction. Lights with n . w <= 0 are 0.
VisibilityMask traceVisibility(const Bvh& bvh, const AppearanceMaps& maps, const Vec3List& directions,
                               double delta = kDefaultRayOffset);

/// rho = sum vis max(0, n.w); chi = sum vis e max(0, n.w).
void diffuseMaps(const VisibilityMask& vis, const AppearanceMaps& maps, const LightRig& rig,
                 std::vector<double>& rho, Vec3List& chi);

/// max(0, n.wh)^alpha * vis * |e| * (n.wi).
double specularImportance(const Vec3& n, const Vec3& wi, const Vec3& wo, double intensityNorm, bool visible,
                          double alpha);

/// Indices of the r largest scores, ties to the lower index, in descending score order.
std::vector<int> selectTopR(const std::vector<double>& scores, std::size_t r);

struct TransportOptions {
  std::size_t rays = 32;
  double alpha = 8.0;
};

using RayEncoding = std::array<double, 6>;  // n.wi, n.wo, n.wh, masked clamped-cosine RGB

struct TransportFeatures {
  std::size_t texels = 0;
  std::size_t rays = 0;
  std::vector<double> rho;
  Vec3List chi;
  std::vector<int> selected;  // texels x rays; -1 on uncovered texels
  std::vector<RayEncoding> psi;  // texels x rays
};

/// Full feature set for one view. `viewDirs` holds the unit direction from each texel
/// toward the camera. When `forcedRays` is given (texels x rays) it replaces top-r selection.
TransportFeatures computeTransportFeatures(const AppearanceMaps& maps, const VisibilityMask& vis,
                                           const LightRig& rig, const Vec3List& viewDirs,
                                           const TransportOptions& options,
                                           const std::vector<int>* forcedRays = nullptr);

/// Per-texel unit directions toward a camera center.
Vec3List viewDirections(const AppearanceMaps& maps, const Vec3& cameraCenter);

struct Material {
  double specular = 0.2;  // k_s
  double exponent = 8.0;  // Blinn-Phong alpha
};

struct Shading {
  Vec3List diffuse;
  Vec3List specular;
  Vec3List total() const;
};

/// Lambertian term (a / pi) chi plus Blinn-Phong over the selected rays.
Shading shadeAnalytic(const TransportFeatures& features, const AppearanceMaps& maps, const Material& material);

namespace io {
/// JSON list of {"dir": [x, y, z], "intensity": [r, g, b]}.
LightRig loadRig(const std::filesystem::path& path);
void saveRig(const std::filesystem::path& path, const LightRig& rig);
/// Binary feature dump (magic LTFT1).
void saveFeatures(const std::filesystem::path& path, const TransportFeatures& features);
TransportFeatures loadFeatures(const std::filesystem::path& path);
}  // namespace io

}  // namespace lumisplat
