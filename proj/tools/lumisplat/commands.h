#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace lumisplat::cli {

using Path = std::filesystem::path;
using OptPath = std::optional<Path>;

struct SolveIkArgs {
  Path character, keypoints, out;
  OptPath config, handPca, truth;
};

struct FitDeformArgs {
  Path character, pose, depthLeft, depthRight, out;
  OptPath config, init;
};

struct SceneArgs {
  Path character, pose, view;
  OptPath deform, config, env, rig;
};

struct TraceArgs : SceneArgs {
  Path out;
};

struct RelightArgs : SceneArgs {
  Path out;
  OptPath splats;
};

struct RenderArgs {
  Path character, pose, splats, view, out;
  OptPath deform, config;
};

struct CalibrateArgs {
  Path panorama, obs, character, outEnv, outCc;
  OptPath config, init;
};

struct MetricsArgs {
  Path a, b;
  OptPath out;
  double peak = 1.0;
};

struct DemoArgs {
  Path out;
  std::uint64_t seed = 7;
};

void solveIk(const SolveIkArgs& a);
void fitDeform(const FitDeformArgs& a);
void traceFeatures(const TraceArgs& a);
void relight(const RelightArgs& a);
void render(const RenderArgs& a);
void calibrateEnv(const CalibrateArgs& a);
void metrics(const MetricsArgs& a);
void makeDemo(const DemoArgs& a);

/// `<output>.manifest.json`.
Path manifestPath(const Path& output);

}  // namespace lumisplat::cli
