#pragma once

#include "lumisplat/geometry/uv_maps.h"
#include "lumisplat/io/image.h"

#include <filesystem>

namespace lumisplat {

/// Pinhole camera. Pixel (x, y) samples the image plane at (x, y), the same integer
/// convention as depth unprojection.
struct CameraView {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  RigidTransform worldToCamera;
  double near = 0.01, far = 1000.0;

  void validate() const;
  Vec3 center() const { return worldToCamera.inverse().translation; }
};

/// Camera at `eye` looking at `target`; image y points down, `up` roughly up.
CameraView lookAtCamera(const Vec3& eye, const Vec3& target, int width, int height, double focal,
                        const Vec3& up = Vec3::UnitY());

struct Gaussian {
  Vec3 mean;
  Mat3 rotation = Mat3::Identity();  // world frame
  Vec3 scale = Vec3::Ones();
  double opacity = 1.0;
  Vec3 color = Vec3::Zero();
  std::uint32_t id = 0;  // breaks depth ties; texel index for UV splats
};

/// J W R S S^T R^T W^T J^T, with J the perspective Jacobian at the camera-space mean.
Mat2 projectCovariance(const Vec3& mean, const Mat3& rotation, const Vec3& scale, const CameraView& view);

constexpr int kTileSize = 16;
constexpr double kCovarianceEpsilon = 1e-9;
constexpr double kCutoffMahalanobis2 = 9.0;  // 3 sigma

struct RasterOptions {
  // Scale each color by the Gaussian falloff once more (c' = c G) on top of the usual
  // sigma G transmittance weight.
  bool colorFalloff = false;
};

/// Front-to-back compositing weights: pixel color = sum weight * color over its entries.
struct CompositeWeights {
  int width = 0, height = 0;
  std::vector<std::uint32_t> offsets;  // pixels + 1
  std::vector<std::uint32_t> splat;  // index into the input list
  std::vector<double> weight;
  std::vector<double> alpha;  // 1 - prod (1 - sigma')

  /// Per-pixel RGB in double precision, row-major.
  Vec3List pixelColors(const Vec3List& colors) const;
  /// RGBA image, linear, row 0 at the top.
  Image apply(const Vec3List& colors) const;
  /// d loss / d colors from an RGB image of d loss / d pixel.
  Vec3List applyAdjoint(const Image& pixelGrad, std::size_t splatCount) const;
};

CompositeWeights compositeWeights(const std::vector<Gaussian>& splats, const CameraView& view,
                                  const RasterOptions& options = {});
Image rasterize(const std::vector<Gaussian>& splats, const CameraView& view, const RasterOptions& options = {});

/// One Gaussian per covered texel, anchored at the texel's surface point. Offsets and
/// rotations live in the texel's surface frame (tangent, bitangent, normal).
struct SplatTexture {
  int resolution = 0;
  std::vector<std::uint8_t> active;
  Vec3List offsets;
  std::vector<Quat> rotations;
  Vec3List scales;
  std::vector<double> opacity;

  std::size_t texelCount() const { return active.size(); }
  void validate() const;
};

/// Right-handed frame with the normal as third column.
Mat3 surfaceFrame(const Vec3& normal);

/// Flattened disks sized to the local texel footprint on the surface.
SplatTexture makeDefaultSplats(const UvMaps& uv, const PosedMesh& mesh, double footprint = 0.8,
                               double thickness = 0.05);

/// Posed Gaussians for the active, covered texels; `texelOf` receives each one's texel.
std::vector<Gaussian> placeSplats(const SplatTexture& tex, const UvMaps& uv, const Vec3List& texelColors,
                                  std::vector<std::size_t>* texelOf = nullptr);

namespace io {
/// Binary splat texture (magic LSPT1).
void saveSplats(const std::filesystem::path& path, const SplatTexture& tex);
SplatTexture loadSplats(const std::filesystem::path& path);
/// JSON {fx, fy, cx, cy, width, height, world_to_camera: 4x4, near, far}.
CameraView loadView(const std::filesystem::path& path);
void saveView(const std::filesystem::path& path, const CameraView& view);
}  // namespace io

}  // namespace lumisplat
