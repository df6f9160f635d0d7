#pragma once

// Synthetic calibration data: a known colour model, an LDR panorama made by inverting
// it on a smooth HDR map, and observations rendered under that map.

#include "lumisplat/synth/scenes.h"

#include "lumisplat/calib/env_calibration.h"

#include <random>

namespace lumisplat::synth {

inline CameraView lookAt(const Vec3& eye, const Vec3& target, int size, double focalScale = 1.2) {
  return lookAtCamera(eye, target, size, size, focalScale * size);
}

inline ColorCorrection randomColorCorrection(std::mt19937& rng, double spread = 0.05) {
  std::uniform_real_distribution<double> a(-spread, spread), g(1.5, 2.5);
  ColorCorrection cc;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) cc.A(i, j) += a(rng);
  cc.gamma = Vec3(g(rng), g(rng), g(rng));
  return cc;
}

/// Smooth map with every channel in about [0.15, 0.85].
inline Image smoothHdrMap(int width, int height) {
  Image img(width, height, 3);
  const Vec3 axes[3] = {Vec3(0.3, 0.8, 0.2).normalized(), Vec3(-0.5, 0.6, 0.4).normalized(),
                        Vec3(0.1, 0.9, -0.6).normalized()};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec3 d = equirectPixelDirection(x, y, width, height);
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = static_cast<float>(0.5 + 0.25 * d.dot(axes[c]) + 0.08 * std::sin(3.0 * d.x() + c));
    }
  return img;
}

/// Newton solve of C(x) = target on [0, 1]^3.
inline Vec3 invertColorCorrection(const Vec3& target, const ColorCorrection& cc) {
  Vec3 x;
  for (int c = 0; c < 3; ++c) x[c] = std::pow(std::clamp(target[c], 1e-6, 1.0), 1.0 / cc.gamma[c]);
  for (int it = 0; it < 50; ++it) {
    const Vec3 r = applyColorCorrection(x, cc) - target;
    if (r.norm() < 1e-13) break;
    Mat3 j;
    for (int k = 0; k < 3; ++k) {
      Vec3 a = x, b = x;
      a[k] += 1e-7;
      b[k] -= 1e-7;
      j.col(k) = (applyColorCorrection(a, cc) - applyColorCorrection(b, cc)) / 2e-7;
    }
    x -= j.partialPivLu().solve(r);
    x = x.cwiseMax(1e-9).cwiseMin(1.0);
  }
  LS_CHECK((applyColorCorrection(x, cc) - target).norm() < 1e-9, NumericError, "colour model inversion failed");
  return x;
}

struct CalibSynthOptions {
  int observations = 5;
  int imageSize = 48;
  int panoWidth = 64, panoHeight = 32;
  int uvResolution = 48;
  int rigSize = kDefaultRigSize;
  std::size_t rays = 32;
  Material material;
  std::uint32_t seed = 7;
};

struct CalibSynth {
  ColorCorrection truth;
  Image panorama;  // LDR
  Image hdrTruth;  // truth applied to the stored panorama
  std::vector<CalibrationObservation> observations;
  CalibrationAssets assets;
};

/// Two part masks per view (left and right halves of the covered pixels).
inline CalibSynth makeCalibSynth(const PosedMesh& mesh, const CalibSynthOptions& o = {}) {
  CalibSynth s;
  std::mt19937 rng(o.seed);
  s.truth = randomColorCorrection(rng);
  const Image hdr = smoothHdrMap(o.panoWidth, o.panoHeight);
  s.panorama = Image(o.panoWidth, o.panoHeight, 3);
  for (std::size_t p = 0; p < hdr.pixelCount(); ++p) {
    const Vec3 x = invertColorCorrection(Vec3(hdr.data[p * 3], hdr.data[p * 3 + 1], hdr.data[p * 3 + 2]), s.truth);
    for (int c = 0; c < 3; ++c) s.panorama.data[p * 3 + c] = static_cast<float>(x[c]);
  }
  s.hdrTruth = ldrToHdr(s.panorama, s.truth);

  s.assets.directions = fibonacciRig(o.rigSize).directions;
  s.assets.albedo = Vec3(0.7, 0.55, 0.45);
  s.assets.scene.uvResolution = o.uvResolution;
  s.assets.transport.rays = std::min<std::size_t>(o.rays, o.rigSize);
  s.assets.material = o.material;
  for (int i = 0; i < o.observations; ++i) {
    const double t = 2.0 * M_PI * i / o.observations;
    CalibrationObservation ob;
    ob.camera = lookAt(Vec3(2.2 * std::cos(t), 2.0, 2.2 * std::sin(t)), Vec3::Zero(), o.imageSize);
    ob.mesh = mesh;
    ob.egoImage = Image(o.imageSize, o.imageSize, 3);
    ob.partMasks = {std::vector<std::uint8_t>(ob.egoImage.pixelCount(), 1)};
    s.observations.push_back(std::move(ob));
  }
  const CalibrationProblem draft(s.panorama, s.observations, s.assets);
  for (int i = 0; i < o.observations; ++i) {
    auto& ob = s.observations[i];
    ob.egoImage = draft.render(i, s.hdrTruth);
    const auto& alpha = draft.viewSetup(i).weights.alpha;
    std::vector<std::uint8_t> left(alpha.size(), 0), right(alpha.size(), 0);
    for (std::size_t p = 0; p < alpha.size(); ++p) {
      if (alpha[p] < 0.99) continue;
      (static_cast<int>(p % o.imageSize) < o.imageSize / 2 ? left : right)[p] = 1;
    }
    ob.partMasks = {left, right};
  }
  return s;
}

}  // namespace lumisplat::synth
