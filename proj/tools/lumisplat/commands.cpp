#include "commands.h"

#include "lumisplat/cli/pipeline.h"
#include "lumisplat/geometry/character_io.h"
#include "lumisplat/ik/ik.h"

#include <iostream>

namespace lumisplat::cli {

namespace {

PipelineConfig configFrom(const OptPath& p) { return p ? PipelineConfig::load(*p) : PipelineConfig{}; }

void addOptional(Manifest& m, const std::string& name, const OptPath& p) {
  if (p) m.input(name, *p);
}

void addConfig(Manifest& m, const OptPath& path, const PipelineConfig& cfg) {
  addOptional(m, "config", path);
  m.param("config", cfg.toJson());
  m.param("seed", cfg.seed);
}

Vec3List intensitiesFor(const LightRig& rig, const OptPath& env) {
  if (!env) return rig.intensities;
  return poolEnvmapToRig(toRgb(io::readImage(*env)), rig.directions);
}

TransportOptions clampedRays(TransportOptions t, std::size_t lights) {
  if (t.rays > lights) {
    std::cerr << "note: ray count " << t.rays << " reduced to the " << lights << " rig lights\n";
    t.rays = lights;
  }
  return t;
}

const char* stageName(IkStageKind k) {
  switch (k) {
    case IkStageKind::kGlobal: return "global";
    case IkStageKind::kBody: return "body";
    case IkStageKind::kHands: return "hands";
  }
  return "?";
}

}  // namespace

Path manifestPath(const Path& output) { return Path(output.string() + ".manifest.json"); }

void solveIk(const SolveIkArgs& a) {
  const TemplateCharacter c = io::loadCharacter(a.character);
  std::vector<int> jointMap = c.keypointJoints;
  if (jointMap.empty())
    for (std::size_t j = 0; j < c.jointCount(); ++j) jointMap.push_back(static_cast<int>(j));
  const KeypointSequence kp = io::loadKeypoints(a.keypoints, jointMap);
  const IkConfig cfg = a.config ? io::loadIkConfig(*a.config) : IkConfig{};
  const auto pca = a.handPca ? io::loadHandPca(*a.handPca) : std::array<HandPcaModel, 2>{};
  const IkResult r = lumisplat::solveIk(c, kp, pca, cfg);
  io::saveMotion(a.out, r.poses);

  Manifest m("solve-ik");
  m.input("character", a.character);
  m.input("keypoints", a.keypoints);
  addOptional(m, "config", a.config);
  addOptional(m, "hand_pca", a.handPca);
  io::Json stages = io::Json::array();
  for (const auto& s : r.stages) {
    std::cout << stageName(s.kind) << " stage: energy " << s.energyBefore << " -> " << s.energyAfter
              << " (" << s.iterations << " iterations)\n";
    stages.push_back({{"before", s.energyBefore}, {"after", s.energyAfter}, {"iterations", s.iterations}});
  }
  m.result("stages", stages);
  if (a.truth) {
    m.input("truth", *a.truth);
    const double err = mpjpe(c, r.poses, io::loadMotion(*a.truth));
    std::cout << "MP-JPE " << err * 1000.0 << " mm\n";
    m.result("mpjpe_m", err);
  }
  m.output("motion", a.out);
  m.write(manifestPath(a.out));
}

void fitDeform(const FitDeformArgs& a) {
  const PipelineConfig cfg = configFrom(a.config);
  const TemplateCharacter c = io::loadCharacter(a.character);
  const SkeletonPose pose = io::loadPose(a.pose);
  const DepthMap left = loadDepthWithSidecar(a.depthLeft), right = loadDepthWithSidecar(a.depthRight);
  const Vec3List points = fuseStereo(unprojectDepth(left), unprojectDepth(right), cfg.fusedPoints);
  LS_CHECK(!points.empty(), DataError, "depth maps hold no valid pixels");
  const Vec3 viewpoint =
      0.5 * (left.cameraFromWorld().inverse().translation + right.cameraFromWorld().inverse().translation);
  const OrientedPointCloud cloud = estimateNormals(points, std::min(cfg.normalNeighbors, points.size()), viewpoint);
  const DeformParams init = a.init ? io::loadDeform(*a.init) : DeformParams::zero(c);
  const FitResult r = fitDeformation(c, pose, cloud, init, cfg.fit);
  io::saveDeform(a.out, r.params);
  std::cout << "points " << cloud.size() << ", objective " << r.initialTerms.total << " -> " << r.finalTerms.total
            << "\n";

  Manifest m("fit-deform");
  m.input("character", a.character);
  m.input("pose", a.pose);
  for (const auto& [name, p] : {std::pair{"depth_left", a.depthLeft}, std::pair{"depth_right", a.depthRight}}) {
    m.input(name, p);
    m.input(std::string(name) + "_sidecar", Path(p).replace_extension(".json"));
  }
  addOptional(m, "init", a.init);
  addConfig(m, a.config, cfg);
  m.result("objective_initial", r.initialTerms.total);
  m.result("objective_final", r.finalTerms.total);
  m.output("deform", a.out);
  m.write(manifestPath(a.out));
}

namespace {

struct LoadedScene {
  PipelineConfig cfg;
  CharacterAssets assets;
  PosedMesh mesh;
  CameraView view;
  LightRig rig;
};

LoadedScene loadScene(const SceneArgs& a) {
  LoadedScene s;
  s.cfg = configFrom(a.config);
  s.assets = loadCharacterAssets(a.character);
  s.mesh = posedMesh(s.assets.character, a.pose, a.deform);
  s.view = io::loadView(a.view);
  s.rig = resolveRig(s.cfg, a.rig);
  s.rig.intensities = intensitiesFor(s.rig, a.env);
  return s;
}

void sceneInputs(Manifest& m, const SceneArgs& a, const PipelineConfig& cfg) {
  m.input("character", a.character);
  m.input("pose", a.pose);
  m.input("view", a.view);
  addOptional(m, "deform", a.deform);
  addOptional(m, "env", a.env);
  addOptional(m, "rig", a.rig);
  addConfig(m, a.config, cfg);
}

}  // namespace

void traceFeatures(const TraceArgs& a) {
  const LoadedScene s = loadScene(a);
  const UvMaps uv = rasterizeUvMaps(s.mesh, s.cfg.uvResolution);
  const AppearanceMaps maps =
      s.assets.albedoTexture ? appearanceFromUv(uv, *s.assets.albedoTexture) : appearanceFromUv(uv, s.assets.albedo);
  const Bvh bvh(s.mesh.vertices, s.mesh.faces);
  const VisibilityMask vis = traceVisibility(bvh, maps, s.rig.directions);
  const TransportFeatures f = computeTransportFeatures(maps, vis, s.rig, viewDirections(maps, s.view.center()),
                                                       clampedRays(s.cfg.transport, s.rig.size()));
  io::saveFeatures(a.out, f);
  std::cout << "texels " << f.texels << ", rays " << f.rays << "\n";

  Manifest m("trace-features");
  sceneInputs(m, a, s.cfg);
  m.output("features", a.out);
  m.write(manifestPath(a.out));
}

void relight(const RelightArgs& a) {
  LS_CHECK(a.env || a.rig, ParameterError, "needs --env or --rig");
  const LoadedScene s = loadScene(a);
  SceneOptions so;
  so.uvResolution = s.cfg.uvResolution;
  std::optional<SplatTexture> splats;
  if (a.splats) {
    splats = io::loadSplats(*a.splats);
    so.uvResolution = splats->resolution;
  }
  const RelightScene scene = prepareScene(s.mesh, s.rig.directions, s.assets.albedo, s.assets.albedoTexture.get(),
                                          splats ? &*splats : nullptr, so);
  const ViewSetup setup = prepareView(scene, s.view);
  const RelightResult r = lumisplat::relight(scene, setup, s.rig.intensities,
                                             clampedRays(s.cfg.transport, s.rig.size()), s.cfg.material);
  writeOutputImage(a.out, r.image);

  Manifest m("relight");
  sceneInputs(m, a, s.cfg);
  addOptional(m, "splats", a.splats);
  m.output("image", a.out);
  m.write(manifestPath(a.out));
}

void render(const RenderArgs& a) {
  const PipelineConfig cfg = configFrom(a.config);
  const CharacterAssets assets = loadCharacterAssets(a.character);
  const PosedMesh mesh = posedMesh(assets.character, a.pose, a.deform);
  const SplatTexture tex = io::loadSplats(a.splats);
  const CameraView view = io::loadView(a.view);
  const UvMaps uv = rasterizeUvMaps(mesh, tex.resolution);
  const AppearanceMaps maps =
      assets.albedoTexture ? appearanceFromUv(uv, *assets.albedoTexture) : appearanceFromUv(uv, assets.albedo);
  const Image img = rasterize(placeSplats(tex, uv, maps.albedo), view);
  writeOutputImage(a.out, img);

  Manifest m("render");
  m.input("character", a.character);
  m.input("pose", a.pose);
  m.input("splats", a.splats);
  m.input("view", a.view);
  addOptional(m, "deform", a.deform);
  addConfig(m, a.config, cfg);
  m.output("image", a.out);
  m.write(manifestPath(a.out));
}

void calibrateEnv(const CalibrateArgs& a) {
  const PipelineConfig cfg = configFrom(a.config);
  const CharacterAssets character = loadCharacterAssets(a.character);
  CalibrationAssets assets;
  const LightRig rig = resolveRig(cfg, std::nullopt);
  assets.directions = rig.directions;
  assets.albedo = character.albedo;
  assets.albedoTexture = character.albedoTexture;
  assets.scene.uvResolution = cfg.uvResolution;
  assets.transport = clampedRays(cfg.transport, rig.size());
  assets.material = cfg.material;
  const CalibrationProblem problem(toRgb(io::readImage(a.panorama)), loadObservations(a.obs, character.character),
                                   assets);
  ColorCorrection init = a.init ? io::loadColorCorrection(*a.init) : ColorCorrection{};
  if (cfg.sharedGamma) {
    init.sharedGamma = true;
    init.gamma = Vec3::Constant(init.gamma[0]);
  }
  const CalibrationResult r = calibrate(problem, init, cfg.calibration);
  writeOutputImage(a.outEnv, r.envmap);
  io::saveColorCorrection(a.outCc, r.cc);
  std::cout << "observations " << problem.observationCount() << ", loss " << r.optimizer.initialCost << " -> "
            << r.optimizer.finalCost << "\n";

  Manifest m("calibrate-env");
  m.input("panorama", a.panorama);
  m.input("obs", a.obs);
  m.input("character", a.character);
  addOptional(m, "init", a.init);
  addConfig(m, a.config, cfg);
  m.result("loss_initial", r.optimizer.initialCost);
  m.result("loss_final", r.optimizer.finalCost);
  m.output("env", a.outEnv);
  m.output("cc", a.outCc);
  m.write(manifestPath(a.outEnv));
}

void metrics(const MetricsArgs& a) {
  const Image x = toRgb(io::readImage(a.a)), y = toRgb(io::readImage(a.b));
  const double p = psnr(x, y, a.peak), s = ssim(x, y, a.peak);
  std::cout << "psnr " << p << "\nssim " << s << "\n";
  if (!a.out) return;
  io::writeJson(*a.out, io::Json{{"psnr", p}, {"ssim", s}});
  Manifest m("metrics");
  m.input("a", a.a);
  m.input("b", a.b);
  m.param("peak", a.peak);
  m.output("metrics", *a.out);
  m.write(manifestPath(*a.out));
}

}  // namespace lumisplat::cli
