#include "lumisplat/relight.h"

#include "lumisplat/parallel.h"

namespace lumisplat {

RelightScene prepareScene(const PosedMesh& mesh, const Vec3List& directions, const Vec3& albedo,
                          const Image* albedoTexture, const SplatTexture* splats, const SceneOptions& options) {
  RelightScene s;
  s.mesh = mesh;
  s.uv = rasterizeUvMaps(mesh, options.uvResolution);
  s.maps = albedoTexture != nullptr ? appearanceFromUv(s.uv, *albedoTexture) : appearanceFromUv(s.uv, albedo);
  s.splats = splats != nullptr ? *splats : makeDefaultSplats(s.uv, mesh);
  s.splats.validate();
  LS_CHECK(s.splats.resolution == s.uv.resolution, ParameterError,
           "splat texture resolution " + std::to_string(s.splats.resolution) + " differs from the UV resolution " +
               std::to_string(s.uv.resolution));
  s.directions = directions;
  const Bvh bvh(mesh.vertices, mesh.faces);
  s.visibility = traceVisibility(bvh, s.maps, directions, options.rayOffset);
  return s;
}

ViewSetup prepareView(const RelightScene& scene, const CameraView& view, const RasterOptions& raster) {
  ViewSetup v;
  v.view = view;
  v.viewDirs = viewDirections(scene.maps, view.center());
  v.gaussians = placeSplats(scene.splats, scene.uv, Vec3List(scene.uv.texelCount(), Vec3::Zero()), &v.texelOf);
  v.weights = compositeWeights(v.gaussians, view, raster);
  return v;
}

RelightResult relight(const RelightScene& scene, const ViewSetup& setup, const Vec3List& intensities,
                      const TransportOptions& transport, const Material& material,
                      const std::vector<int>* forcedRays) {
  LightRig rig{scene.directions, intensities};
  rig.validate();
  RelightResult r;
  r.features = computeTransportFeatures(scene.maps, scene.visibility, rig, setup.viewDirs, transport, forcedRays);
  r.shading = shadeAnalytic(r.features, scene.maps, material);
  const Vec3List texel = r.shading.total();
  Vec3List colors(setup.texelOf.size());
  for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = texel[setup.texelOf[i]];
  r.image = setup.weights.apply(colors);
  return r;
}

Vec3List relightIntensityGradient(const RelightScene& scene, const ViewSetup& setup, const RelightResult& result,
                                  const Material& material, const Image& imageGrad) {
  const Vec3List splatGrad = setup.weights.applyAdjoint(imageGrad, setup.texelOf.size());
  const std::size_t lights = scene.directions.size();
  const auto& f = result.features;
  // Per-texel accumulation first, then a serial reduction so results do not depend on threads.
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(64, splatGrad.size()));
  std::vector<Vec3List> partial(chunks, Vec3List(lights, Vec3::Zero()));
  parallelFor(0, chunks, [&](std::size_t c) {
    auto& out = partial[c];
    const std::size_t begin = c * splatGrad.size() / chunks, end = (c + 1) * splatGrad.size() / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& g = splatGrad[i];
      if (g.isZero()) continue;
      const std::size_t t = setup.texelOf[i];
      const Vec3& n = scene.maps.normals[t];
      const Vec3 ga = g.cwiseProduct(scene.maps.albedo[t]) / M_PI;
      for (std::size_t l = 0; l < lights; ++l) {
        if (!scene.visibility.get(t, l)) continue;
        out[l] += std::max(0.0, n.dot(scene.directions[l])) * ga;
      }
      if (material.specular == 0.0) continue;
      for (std::size_t k = 0; k < f.rays; ++k) {
        const int l = f.selected[t * f.rays + k];
        const auto& p = f.psi[t * f.rays + k];
        if (!scene.visibility.get(t, l)) continue;
        const double coef =
            material.specular * std::pow(std::max(0.0, p[2]), material.exponent) * std::max(0.0, p[0]);
        out[l] += coef * g;
      }
    }
  });
  Vec3List grad(lights, Vec3::Zero());
  for (const auto& p : partial)
    for (std::size_t l = 0; l < lights; ++l) grad[l] += p[l];
  return grad;
}

}  // namespace lumisplat
