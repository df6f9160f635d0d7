#pragma once

// Plumbing shared by the command-line tool: run configuration, character assets,
// manifests and image export.

#include "lumisplat/calib/env_calibration.h"
#include "lumisplat/depth/ego_depth.h"
#include "lumisplat/io/files.h"

#include <filesystem>
#include <optional>
#include <string>

namespace lumisplat {

/// Flat key = value run configuration. Every key is optional.
struct PipelineConfig {
  std::string rig = "fibonacci";  // or a rig JSON path (relative to the config file)
  int rigSize = kDefaultRigSize;
  int uvResolution = 512;
  Material material;
  TransportOptions transport;
  std::uint64_t seed = 0;

  FitOptions fit;
  std::size_t normalNeighbors = 16;
  std::size_t fusedPoints = 4000;

  AdamOptions calibration;
  bool sharedGamma = false;

  static PipelineConfig load(const std::filesystem::path& path);
  io::Json toJson() const;
};

/// Template character plus its appearance: `albedo.pfm|png` texture, else
/// `appearance.json` {"albedo": [r, g, b]}, else mid grey.
struct CharacterAssets {
  TemplateCharacter character;
  Vec3 albedo = Vec3::Constant(0.5);
  std::shared_ptr<const Image> albedoTexture;
};

CharacterAssets loadCharacterAssets(const std::filesystem::path& dir);
void saveAppearance(const std::filesystem::path& dir, const Vec3& albedo);

/// Poses the template; a missing deformation file means zero deformation.
PosedMesh posedMesh(const TemplateCharacter& character, const std::filesystem::path& pose,
                    const std::optional<std::filesystem::path>& deform);

LightRig resolveRig(const PipelineConfig& config, const std::optional<std::filesystem::path>& rigFile);

/// Reads `<pfm>` and the sidecar `<pfm stem>.json`.
DepthMap loadDepthWithSidecar(const std::filesystem::path& pfm);

/// Observation directory: one subdirectory per frame holding image.pfm, masks/*.png
/// (sorted by name), optional warp.pfm, camera.json, pose.json and optional deform.json.
std::vector<CalibrationObservation> loadObservations(const std::filesystem::path& dir,
                                                     const TemplateCharacter& character);

/// Linear image -> file. PNG gets gamma 2.2 and drops alpha; PFM/HDR stay linear RGB.
void writeOutputImage(const std::filesystem::path& path, const Image& linear);
Image toRgb(const Image& image);
Image encodeGamma(const Image& linear, double gamma = 2.2);

std::string versionString();

/// Run record written beside the outputs: command, parameters, input and output hashes.
/// It carries no timestamps, so identical reruns produce identical manifests.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}
  void input(const std::string& name, const std::filesystem::path& path);
  void output(const std::string& name, const std::filesystem::path& path);
  void param(const std::string& key, io::Json value) { params_[key] = std::move(value); }
  void result(const std::string& key, io::Json value) { results_[key] = std::move(value); }
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  io::Json inputs_ = io::Json::object();
  io::Json outputs_ = io::Json::object();
  io::Json params_ = io::Json::object();
  io::Json results_ = io::Json::object();
};

/// SHA-256 of a file, or of a directory's files (relative paths and contents, sorted).
std::string hashPath(const std::filesystem::path& path);

}  // namespace lumisplat
