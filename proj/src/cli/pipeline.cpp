#include "lumisplat/cli/pipeline.h"

#include "lumisplat/geometry/character_io.h"
#include "lumisplat/io/config.h"

#include <ceres/version.h>
#include <png.h>

#include <algorithm>
#include <set>

namespace lumisplat {

namespace fs = std::filesystem;
using io::Json;

PipelineConfig PipelineConfig::load(const fs::path& path) {
  const auto kv = io::KeyValueConfig::load(path);
  kv.requireKnown({"rig", "rig_size", "uv_resolution", "material.ks", "material.alpha", "rays", "ray_alpha", "seed",
                   "deform.eg", "deform.delta", "deform.arap", "deform.spatial", "deform.iso", "deform.iterations",
                   "deform.normal_cos", "deform.normal_neighbors", "deform.points", "calib.steps",
                   "calib.learning_rate", "calib.final_learning_rate", "calib.shared_gamma"});
  PipelineConfig c;
  c.rig = kv.getString("rig", c.rig);
  if (c.rig != "fibonacci") {
    if (fs::path(c.rig).is_relative()) c.rig = (path.parent_path() / c.rig).string();
    LS_CHECK(fs::exists(c.rig), DataError, path.string() + ": rig file " + c.rig + " does not exist");
  }
  c.rigSize = kv.getInt("rig_size", c.rigSize);
  c.uvResolution = kv.getInt("uv_resolution", c.uvResolution);
  c.material.specular = kv.getDouble("material.ks", c.material.specular);
  c.material.exponent = kv.getDouble("material.alpha", c.material.exponent);
  c.transport.rays = static_cast<std::size_t>(kv.getInt("rays", static_cast<int>(c.transport.rays)));
  c.transport.alpha = kv.getDouble("ray_alpha", c.transport.alpha);
  c.seed = static_cast<std::uint64_t>(kv.getInt("seed", 0));
  auto& w = c.fit.weights;
  w.eg = kv.getDouble("deform.eg", w.eg);
  w.delta = kv.getDouble("deform.delta", w.delta);
  w.arap = kv.getDouble("deform.arap", w.arap);
  w.spatial = kv.getDouble("deform.spatial", w.spatial);
  w.iso = kv.getDouble("deform.iso", w.iso);
  c.fit.iterations = kv.getInt("deform.iterations", c.fit.iterations);
  c.fit.chamferNormalCos = kv.getDouble("deform.normal_cos", c.fit.chamferNormalCos);
  c.normalNeighbors = static_cast<std::size_t>(kv.getInt("deform.normal_neighbors", 16));
  c.fusedPoints = static_cast<std::size_t>(kv.getInt("deform.points", 4000));
  c.calibration.steps = kv.getInt("calib.steps", c.calibration.steps);
  c.calibration.learningRate = kv.getDouble("calib.learning_rate", c.calibration.learningRate);
  c.calibration.finalLearningRate = kv.getDouble("calib.final_learning_rate", c.calibration.finalLearningRate);
  c.sharedGamma = kv.getBool("calib.shared_gamma", c.sharedGamma);
  LS_CHECK(c.rigSize > 0 && c.uvResolution > 0 && c.transport.rays > 0, ParameterError,
           path.string() + ": sizes must be positive");
  return c;
}

Json PipelineConfig::toJson() const {
  const auto& w = fit.weights;
  return Json{{"rig", rig},
              {"rig_size", rigSize},
              {"uv_resolution", uvResolution},
              {"material", {{"ks", material.specular}, {"alpha", material.exponent}}},
              {"rays", transport.rays},
              {"ray_alpha", transport.alpha},
              {"seed", seed},
              {"deform",
               {{"eg", w.eg},
                {"delta", w.delta},
                {"arap", w.arap},
                {"spatial", w.spatial},
                {"iso", w.iso},
                {"iterations", fit.iterations},
                {"normal_cos", fit.chamferNormalCos},
                {"normal_neighbors", normalNeighbors},
                {"points", fusedPoints}}},
              {"calib",
               {{"steps", calibration.steps},
                {"learning_rate", calibration.learningRate},
                {"final_learning_rate", calibration.finalLearningRate},
                {"shared_gamma", sharedGamma}}}};
}

CharacterAssets loadCharacterAssets(const fs::path& dir) {
  CharacterAssets a;
  a.character = io::loadCharacter(dir);
  for (const char* name : {"albedo.pfm", "albedo.png"}) {
    if (fs::exists(dir / name)) {
      a.albedoTexture = std::make_shared<const Image>(io::readImage(dir / name));
      return a;
    }
  }
  if (fs::exists(dir / "appearance.json")) {
    const Json j = io::readJson(dir / "appearance.json");
    try {
      a.albedo = io::jsonVec3(j.at("albedo"));
    } catch (const Json::exception& e) {
      throw DataError((dir / "appearance.json").string() + ": " + e.what());
    }
  }
  return a;
}

void saveAppearance(const fs::path& dir, const Vec3& albedo) {
  io::writeJson(dir / "appearance.json", Json{{"albedo", io::toJson(albedo)}});
}

PosedMesh posedMesh(const TemplateCharacter& character, const fs::path& pose,
                    const std::optional<fs::path>& deform) {
  const SkeletonPose p = io::loadPose(pose);
  const DeformParams d = deform ? io::loadDeform(*deform) : DeformParams::zero(character);
  return poseCharacter(character, p, d);
}

LightRig resolveRig(const PipelineConfig& config, const std::optional<fs::path>& rigFile) {
  if (rigFile) return io::loadRig(*rigFile);
  if (config.rig == "fibonacci") return fibonacciRig(config.rigSize);
  return io::loadRig(config.rig);
}

DepthMap loadDepthWithSidecar(const fs::path& pfm) {
  fs::path sidecar = pfm;
  sidecar.replace_extension(".json");
  return io::loadDepthMap(pfm, sidecar);
}

std::vector<CalibrationObservation> loadObservations(const fs::path& dir, const TemplateCharacter& character) {
  LS_CHECK(fs::is_directory(dir), DataError, dir.string() + " is not a directory");
  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) frames.push_back(e.path());
  std::sort(frames.begin(), frames.end());
  LS_CHECK(!frames.empty(), DataError, dir.string() + " holds no frame directories");
  std::vector<CalibrationObservation> out;
  for (const auto& f : frames) {
    CalibrationObservation o;
    o.egoImage = toRgb(io::readImage(f / "image.pfm"));
    if (fs::exists(f / "warp.pfm")) {
      const Image w = io::readPfm(f / "warp.pfm");
      LS_CHECK(w.channels == 3, DataError, (f / "warp.pfm").string() + ": expected RGB with (dx, dy, unused)");
      o.warp = Image(w.width, w.height, 2);
      for (std::size_t p = 0; p < w.pixelCount(); ++p) {
        o.warp.data[p * 2] = w.data[p * 3];
        o.warp.data[p * 2 + 1] = w.data[p * 3 + 1];
      }
    }
    std::vector<fs::path> masks;
    if (fs::is_directory(f / "masks"))
      for (const auto& e : fs::directory_iterator(f / "masks"))
        if (e.path().extension() == ".png") masks.push_back(e.path());
    std::sort(masks.begin(), masks.end());
    for (const auto& m : masks) {
      const Image img = io::readPng(m);
      LS_CHECK(img.width == o.egoImage.width && img.height == o.egoImage.height, DataError,
               m.string() + ": mask size differs from the image");
      std::vector<std::uint8_t> bits(img.pixelCount());
      for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = img.data[p * img.channels] > 0.5f;
      o.partMasks.push_back(std::move(bits));
    }
    o.camera = io::loadView(f / "camera.json");
    const fs::path deform = f / "deform.json";
    o.mesh = posedMesh(character, f / "pose.json", fs::exists(deform) ? std::optional(deform) : std::nullopt);
    out.push_back(std::move(o));
  }
  return out;
}

Image toRgb(const Image& image) {
  if (image.channels == 3) return image;
  LS_CHECK(image.channels == 1 || image.channels == 4, ParameterError, "expected 1, 3 or 4 channels");
  Image out(image.width, image.height, 3);
  for (std::size_t p = 0; p < image.pixelCount(); ++p)
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = image.data[p * image.channels + (image.channels == 1 ? 0 : c)];
  return out;
}

Image encodeGamma(const Image& linear, double gamma) {
  Image out = linear;
  for (auto& v : out.data) v = static_cast<float>(std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), 1.0 / gamma));
  return out;
}

void writeOutputImage(const fs::path& path, const Image& linear) {
  const Image rgb = toRgb(linear);
  if (path.extension() == ".png")
    io::writePng16(path, encodeGamma(rgb));
  else
    io::writeImage(path, rgb);
}

std::string versionString() {
  return "lumisplat 0.1.0; eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
         "." + std::to_string(EIGEN_MINOR_VERSION) + "; ceres " + CERES_VERSION_STRING + "; libpng " +
         PNG_LIBPNG_VER_STRING;
}

std::string hashPath(const fs::path& path) {
  LS_CHECK(fs::exists(path), DataError, path.string() + " does not exist");
  if (!fs::is_directory(path)) return io::sha256File(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& f : files) listing += fs::relative(f, path).generic_string() + " " + io::sha256File(f) + "\n";
  return io::sha256Hex(listing.data(), listing.size());
}

void Manifest::input(const std::string& name, const fs::path& path) {
  inputs_[name] = Json{{"path", path.generic_string()}, {"sha256", hashPath(path)}};
}

void Manifest::output(const std::string& name, const fs::path& path) {
  outputs_[name] = Json{{"path", path.generic_string()}, {"sha256", hashPath(path)}};
}

void Manifest::write(const fs::path& path) const {
  io::writeJson(path, Json{{"command", command_},
                           {"version", versionString()},
                           {"params", params_},
                           {"inputs", inputs_},
                           {"outputs", outputs_},
                           {"results", results_}});
}

}  // namespace lumisplat
