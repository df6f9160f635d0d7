#pragma once

#include "lumisplat/splat/splat.h"
#include "lumisplat/transport/light_transport.h"

namespace lumisplat {

/// View-independent state for relighting one posed character.
struct RelightScene {
  PosedMesh mesh;
  UvMaps uv;
  AppearanceMaps maps;
  SplatTexture splats;
  Vec3List directions;
  VisibilityMask visibility;
};

struct SceneOptions {
  int uvResolution = 512;
  double rayOffset = kDefaultRayOffset;
};

/// Rasterizes the UV maps, traces visibility for the rig and (unless given) builds the
/// default splat texture. `albedoTexture` may be null for a constant albedo.
RelightScene prepareScene(const PosedMesh& mesh, const Vec3List& directions, const Vec3& albedo,
                          const Image* albedoTexture, const SplatTexture* splats, const SceneOptions& options = {});

/// Per-view state: placed Gaussians and their compositing weights.
struct ViewSetup {
  CameraView view;
  Vec3List viewDirs;
  std::vector<Gaussian> gaussians;
  std::vector<std::size_t> texelOf;
  CompositeWeights weights;
};

ViewSetup prepareView(const RelightScene& scene, const CameraView& view, const RasterOptions& raster = {});

struct RelightResult {
  Image image;  // RGBA, linear
  TransportFeatures features;
  Shading shading;
};

RelightResult relight(const RelightScene& scene, const ViewSetup& setup, const Vec3List& intensities,
                      const TransportOptions& transport, const Material& material,
                      const std::vector<int>* forcedRays = nullptr);

/// d loss / d intensities from d loss / d image (RGB), holding the selected rays fixed.
Vec3List relightIntensityGradient(const RelightScene& scene, const ViewSetup& setup, const RelightResult& result,
                                  const Material& material, const Image& imageGrad);

}  // namespace lumisplat
