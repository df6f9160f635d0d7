#include "commands.h"

#include "lumisplat/cli/pipeline.h"
#include "lumisplat/geometry/character_io.h"
#include "lumisplat/geometry/primitives.h"
#include "lumisplat/ik/ik.h"
#include "lumisplat/synth/calib_scene.h"

#include <iostream>
#include <random>

namespace lumisplat::cli {

namespace fs = std::filesystem;

namespace {

void writeText(const Path& path, const std::string& text) { io::writeAtomic(path, text); }

SkeletonPose restPose(const TemplateCharacter& c) { return {c.meanPose()}; }

Image constantImage(int w, int h, float v) {
  Image img(w, h, 3);
  std::fill(img.data.begin(), img.data.end(), v);
  return img;
}

// Unit sphere under a single head light, plus the closed-form image it should produce.
void sphereScene(const Path& out) {
  const Vec3 albedo(0.8, 0.7, 0.6);
  const TemplateCharacter c = makeRigidCharacter(makeUvSphere(96, 192, 1.0), 32);
  io::saveCharacter(c, out / "sphere");
  saveAppearance(out / "sphere", albedo);
  io::savePose(out / "pose_rest.json", restPose(c));

  const CameraView view = lookAtCamera(Vec3(0, 0, 3), Vec3::Zero(), 256, 256, 1.15 * 256);
  io::saveView(out / "view_front.json", view);
  io::saveRig(out / "rig_headlight.json", LightRig{{Vec3::UnitZ()}, {Vec3::Ones()}});
  io::writePfm(out / "env_white.pfm", constantImage(64, 32, 1.0f));
  io::writePfm(out / "sphere_reference.pfm", synth::analyticSphere(view, Vec3::UnitZ(), albedo));
  io::writePfm(out / "env_room.pfm", synth::smoothHdrMap(64, 32));

  const PosedMesh mesh = poseCharacter(c, restPose(c), DeformParams::zero(c));
  io::saveSplats(out / "splats.lspt", makeDefaultSplats(rasterizeUvMaps(mesh, 512), mesh));

  writeText(out / "lambert.cfg", "# diffuse only, single head light\nmaterial.ks = 0\nrays = 1\n");
  writeText(out / "room.cfg", "uv_resolution = 128\nrig_size = 331\nrays = 32\n");
}

// Stereo depth of a small sphere shifted off its template position.
void blobScene(const Path& out) {
  const TemplateCharacter c = makeRigidCharacter(makeUvSphere(16, 32, 0.3), 24);
  io::saveCharacter(c, out / "blob");
  io::savePose(out / "blob_pose.json", restPose(c));
  const PosedMesh rest = poseCharacter(c, restPose(c), DeformParams::zero(c));
  Vec3List shifted = rest.vertices;
  const Vec3 shift(0.02, -0.01, 0.015);
  for (auto& v : shifted) v += shift;
  const Bvh bvh(shifted, rest.faces);

  fs::create_directories(out / "depth");
  for (const auto& [name, x] : {std::pair{"left", -0.08}, std::pair{"right", 0.08}}) {
    const CameraView cam = lookAtCamera(Vec3(x, 0.1, 1.2), Vec3::Zero(), 96, 96, 96.0);
    DepthMap d;
    d.width = d.height = 96;
    d.K = {cam.fx, cam.fy, cam.cx, cam.cy};
    d.headPose = cam.worldToCamera;
    d.depth.assign(96 * 96, 0.0f);
    const RigidTransform camToWorld = cam.worldToCamera.inverse();
    for (int v = 0; v < 96; ++v)
      for (int u = 0; u < 96; ++u) {
        const Vec3 dir = camToWorld.rotation * Vec3((u - d.K.cx) / d.K.fx, (v - d.K.cy) / d.K.fy, 1.0);
        const double t = bvh.closestHit(Ray(camToWorld.translation, dir));
        if (std::isfinite(t)) d.depth[static_cast<std::size_t>(v) * 96 + u] = static_cast<float>(t);
      }
    io::saveDepthMap(out / "depth" / (std::string(name) + ".pfm"), out / "depth" / (std::string(name) + ".json"), d);
  }
  writeText(out / "deform.cfg", "deform.iterations = 200\ndeform.points = 3000\n");
}

// Twenty-DoF chain following a smooth motion; `noise` (metres) perturbs the keypoints.
void chainScene(const Path& out, std::uint64_t seed, double noise = 0.0) {
  const TemplateCharacter c = makeChainCharacter(20, 0.2);
  io::saveCharacter(c, out / "chain");
  PoseSequence truth;
  for (int t = 0; t < 60; ++t) {
    VecX p(c.dofCount());
    for (std::size_t d = 0; d < c.dofCount(); ++d) p[d] = 0.3 * std::sin(0.05 * t + 0.4 * d);
    truth.push_back(p);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, noise);
  KeypointSequence kp;
  for (std::size_t j = 0; j < c.jointCount(); ++j) kp.jointMap.push_back(static_cast<int>(j));
  for (const auto& p : truth) {
    Vec3List joints = forwardKinematics(c, SkeletonPose{p}).jointPositions;
    if (noise > 0.0)
      for (auto& q : joints) q += Vec3(jitter(rng), jitter(rng), jitter(rng));
    kp.positions.push_back(joints);
    kp.confidences.push_back(VecX::Ones(c.jointCount()));
  }
  io::saveKeypoints(out / "keypoints.jsonl", kp);
  io::saveMotion(out / "motion_truth.jsonl", truth);
  writeText(out / "ik.cfg", "stages = global,body\nbody.iterations = 3000\n");
}

// Egocentric observations of a sphere lit by an environment seen through an unknown colour model.
void calibScene(const Path& out, std::uint64_t seed) {
  const Path dir = out / "calib";
  const TemplateCharacter c = makeRigidCharacter(makeUvSphere(12, 24, 0.5), 8);
  io::saveCharacter(c, dir / "character");
  const Vec3 albedo(0.7, 0.55, 0.45);
  saveAppearance(dir / "character", albedo);
  io::savePose(dir / "pose.json", restPose(c));
  const PosedMesh mesh = poseCharacter(c, restPose(c), DeformParams::zero(c));

  synth::CalibSynthOptions o;
  o.observations = 3;
  o.imageSize = 32;
  o.uvResolution = 32;
  o.seed = static_cast<std::uint32_t>(seed);
  const synth::CalibSynth s = synth::makeCalibSynth(mesh, o);
  LS_CHECK(s.assets.albedo.isApprox(albedo), ParameterError, "demo albedo differs from the synthetic scene");
  io::writePfm(dir / "panorama.pfm", s.panorama);
  io::writePfm(dir / "hdr_truth.pfm", s.hdrTruth);
  io::saveColorCorrection(dir / "cc_truth.json", s.truth);

  for (std::size_t i = 0; i < s.observations.size(); ++i) {
    const auto& ob = s.observations[i];
    const Path f = dir / "obs" / ("frame_" + std::to_string(i));
    fs::create_directories(f / "masks");
    io::writePfm(f / "image.pfm", ob.egoImage);
    io::writePfm(f / "warp.pfm", constantImage(ob.egoImage.width, ob.egoImage.height, 0.0f));
    for (std::size_t m = 0; m < ob.partMasks.size(); ++m) {
      Image mask(ob.egoImage.width, ob.egoImage.height, 3);
      for (std::size_t p = 0; p < ob.partMasks[m].size(); ++p)
        for (int ch = 0; ch < 3; ++ch) mask.data[p * 3 + ch] = ob.partMasks[m][p] ? 1.0f : 0.0f;
      io::writePng16(f / "masks" / ("part_" + std::to_string(m) + ".png"), mask);
    }
    io::saveView(f / "camera.json", ob.camera);
    io::savePose(f / "pose.json", restPose(c));
  }
  writeText(dir / "calib.cfg", "uv_resolution = 32\nrig_size = 331\nrays = 32\ncalib.steps = 400\n");
}

}  // namespace

void makeDemo(const DemoArgs& a) {
  fs::create_directories(a.out);
  sphereScene(a.out);
  blobScene(a.out);
  chainScene(a.out, a.seed);
  calibScene(a.out, a.seed);
  Manifest m("make-demo");
  m.param("seed", a.seed);
  m.output("demo", a.out);
  m.write(a.out.parent_path() / (a.out.filename().string() + ".manifest.json"));
  std::cout << "demo written to " << a.out.string() << "\n";
}

}  // namespace lumisplat::cli
