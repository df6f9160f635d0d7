#pragma once

#include "lumisplat/optim.h"
#include "lumisplat/relight.h"

#include <filesystem>
#include <memory>

namespace lumisplat {

constexpr double kGammaMin = 0.2;
constexpr double kGammaMax = 5.0;

/// Second-order polynomial colour model: A (3x6) applied to
/// (r^g, g^g, b^g, sqrt(r^g g^g), sqrt(g^g b^g), sqrt(b^g r^g)).
struct ColorCorrection {
  Eigen::Matrix<double, 3, 6> A;
  Vec3 gamma = Vec3::Constant(2.2);
  bool sharedGamma = false;  // one exponent for all channels

  ColorCorrection() { A << Mat3::Identity(), Mat3::Zero(); }
  static ColorCorrection identity() {
    ColorCorrection c;
    c.gamma = Vec3::Ones();
    return c;
  }
  void validate() const;

  /// Parameter vector: A row-major (18), then gamma (3, or 1 when shared).
  int parameterCount() const { return sharedGamma ? 19 : 21; }
  VecX pack() const;
  void unpack(const VecX& x);
};

using ColorJacobian = Eigen::Matrix<double, 3, 21>;  // d out / d (A row-major, gamma per channel)

/// Input is clamped to [0, 1]. The Jacobian is with respect to per-channel gamma.
Vec3 applyColorCorrection(const Vec3& ldr, const ColorCorrection& cc, ColorJacobian* jacobian = nullptr);

/// RGB panorama -> corrected map, pixel by pixel.
Image ldrToHdr(const Image& panorama, const ColorCorrection& cc);

/// ||max(E - 1, 0)||_2 + ||max(-E, 0)||_2 over all channels.
double envmapRegularizer(const Image& hdr, Image* gradient = nullptr);

struct CalibrationObservation {
  Image egoImage;  // linear RGB
  std::vector<std::vector<std::uint8_t>> partMasks;  // each width * height, nonzero = inside
  Image warp;  // 2 channels, displacement in pixels; empty means identity
  CameraView camera;
  PosedMesh mesh;

  void validate() const;
};

/// Inverse warp: out(x, y) = ego(x + dx, y + dy), bilinear, clamped at the border.
Image inverseWarp(const Image& ego, const Image& warp);

/// Everything about the character and renderer that calibration holds fixed.
struct CalibrationAssets {
  Vec3List directions;
  Vec3 albedo = Vec3::Constant(0.5);
  std::shared_ptr<const Image> albedoTexture;
  std::shared_ptr<const SplatTexture> splats;
  SceneOptions scene;
  TransportOptions transport;
  Material material;
};

/// Precomputes per-observation scenes and views; evaluates the loss and its gradient.
class CalibrationProblem {
 public:
  CalibrationProblem(Image panorama, std::vector<CalibrationObservation> observations, CalibrationAssets assets);

  /// Per-part mean L1 between render and warped ego image, plus the envmap regularizer.
  double evaluate(const ColorCorrection& cc, VecX* gradient = nullptr) const;
  double photometric(const ColorCorrection& cc) const;

  /// Linear RGB render of observation i under an environment map.
  Image render(std::size_t i, const Image& envmap) const;

  const Image& panorama() const { return panorama_; }
  std::size_t observationCount() const { return frames_.size(); }
  const ViewSetup& viewSetup(std::size_t i) const { return frames_.at(i).setup; }
  const CalibrationAssets& assets() const { return assets_; }

 private:
  struct Frame {
    std::size_t index;
    RelightScene scene;
    ViewSetup setup;
    Image target;  // warped ego image, RGB
    std::vector<std::vector<std::uint32_t>> parts;  // pixel indices per non-empty mask
  };
  double evaluateImpl(const ColorCorrection& cc, VecX* gradient, bool regularize) const;

  Image panorama_;
  CalibrationAssets assets_;
  RigPooling pooling_;
  std::vector<Frame> frames_;
};

struct CalibrationResult {
  ColorCorrection cc;
  Image envmap;
  MinimizeResult optimizer;
};

CalibrationResult calibrate(const CalibrationProblem& problem, const ColorCorrection& init,
                            const AdamOptions& options = {});

namespace io {
/// JSON {"A": 3x6 rows, "gamma": [3]}.
ColorCorrection loadColorCorrection(const std::filesystem::path& path);
void saveColorCorrection(const std::filesystem::path& path, const ColorCorrection& cc);
}  // namespace io

}  // namespace lumisplat
