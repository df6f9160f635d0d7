#pragma once

#include "lumisplat/geometry/character.h"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace lumisplat {

struct KeypointSequence {
  std::vector<Vec3List> positions;  // [frame][keypoint]
  std::vector<VecX> confidences;  // [frame], each in [0, 1]
  std::vector<int> jointMap;  // keypoint -> skeleton joint
  double frameRate = 30.0;

  std::size_t frameCount() const { return positions.size(); }
  std::size_t keypointCount() const { return jointMap.size(); }
  void validate(const TemplateCharacter& character) const;
};

/// Linear hand model: hand DoF = mean + basis * eta.
struct HandPcaModel {
  VecX mean;
  MatX basis;  // columns orthonormal

  VecX decode(const VecX& eta) const { return mean + basis * eta; }
  void validate() const;
};

/// Standard PCA over rows of `corpus` (one hand DoF vector per row), keeping `components`.
HandPcaModel buildHandPca(const MatX& corpus, int components = 6);

// Energies return their value and, when `gradient` is non-null, add its gradient.
// Norms are plain Euclidean norms; the gradient of a norm at zero is taken to be zero.
using PoseSequence = std::vector<VecX>;

double eData(const TemplateCharacter& character, const PoseSequence& poses, const KeypointSequence& keypoints,
             PoseSequence* gradient = nullptr);
/// Sum over interior frames of ||2 x_t - x_{t-1} - x_{t+1}||, restricted to `indices` (all if empty).
double eTemporal(const PoseSequence& values, const std::vector<int>& indices = {}, PoseSequence* gradient = nullptr);
/// Per-hand eta sequences: [hand][frame].
double eTemporalHand(const std::array<PoseSequence, 2>& eta, std::array<PoseSequence, 2>* gradient = nullptr);
double eDofLimit(const TemplateCharacter& character, const PoseSequence& poses, PoseSequence* gradient = nullptr);
double eReg(const TemplateCharacter& character, const PoseSequence& poses, PoseSequence* gradient = nullptr);

enum class IkStageKind { kGlobal, kBody, kHands };

struct IkStage {
  IkStageKind kind = IkStageKind::kGlobal;
  int iterations = 100;
  double wTemporal = 3.0;
  double wReg = 0.01;
  double wLimit = 0.1;
};

struct IkConfig {
  std::vector<IkStage> stages = {
      {IkStageKind::kGlobal, 100, 3.0, 0.01, 0.1},
      {IkStageKind::kBody, 100, 3.0, 0.01, 0.1},
      {IkStageKind::kHands, 100, 30.0, 0.01, 0.1},
  };
  // Second-difference smoothing on the stage's DoF in the global/body stages.
  bool bodyTemporal = true;
  // The body stage also frees the root DoF.
  bool bodyIncludesRoot = true;

  void validate() const;
};

struct IkStageReport {
  IkStageKind kind;
  double energyBefore = 0.0;
  double energyAfter = 0.0;
  int iterations = 0;
  std::vector<double> costs;
};

struct IkResult {
  PoseSequence poses;
  std::array<PoseSequence, 2> eta;  // [hand][frame]; empty when the character has no hand groups
  std::vector<IkStageReport> stages;
};

/// Hierarchical fit: root, then body, then hand PCA coefficients. Frames start at the mean pose.
IkResult solveIk(const TemplateCharacter& character, const KeypointSequence& keypoints,
                 const std::array<HandPcaModel, 2>& handPca, const IkConfig& config = {});

double mpjpe(const TemplateCharacter& character, const PoseSequence& a, const PoseSequence& b);

namespace io {
KeypointSequence loadKeypoints(const std::filesystem::path& path, const std::vector<int>& jointMap);
void saveKeypoints(const std::filesystem::path& path, const KeypointSequence& keypoints);
void saveMotion(const std::filesystem::path& path, const PoseSequence& poses);
PoseSequence loadMotion(const std::filesystem::path& path);
std::array<HandPcaModel, 2> loadHandPca(const std::filesystem::path& path);
void saveHandPca(const std::filesystem::path& path, const std::array<HandPcaModel, 2>& models);
IkConfig loadIkConfig(const std::filesystem::path& path);
}  // namespace io

}  // namespace lumisplat
