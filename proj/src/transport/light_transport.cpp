#include "lumisplat/transport/light_transport.h"

#include "lumisplat/depth/kdtree.h"
#include "lumisplat/parallel.h"

#include <algorithm>
#include <numeric>

namespace lumisplat {

void LightRig::validate() const {
  LS_CHECK(!directions.empty(), ParameterError, "light rig is empty");
  LS_CHECK(directions.size() == intensities.size(), ParameterError, "rig needs one intensity per direction");
  for (std::size_t i = 0; i < size(); ++i) {
    LS_CHECK(std::abs(directions[i].norm() - 1.0) < 1e-6, ParameterError,
             "rig direction " + std::to_string(i) + " is not unit length");
    LS_CHECK(intensities[i].allFinite() && intensities[i].minCoeff() >= 0.0, ParameterError,
             "rig intensity " + std::to_string(i) + " must be finite and >= 0");
  }
}

LightRig fibonacciRig(int count, const Vec3& intensity) {
  LS_CHECK(count >= 1, ParameterError, "rig needs at least one light");
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  LightRig rig;
  for (int i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    rig.directions.push_back(Vec3(r * std::cos(phi), y, r * std::sin(phi)).normalized());
    rig.intensities.push_back(intensity);
  }
  return rig;
}

Vec2 directionToEquirect(const Vec3& d) {
  const Vec3 n = d.normalized();
  return {std::atan2(n.x(), n.z()) / (2.0 * M_PI) + 0.5, std::acos(std::clamp(n.y(), -1.0, 1.0)) / M_PI};
}

Vec3 equirectToDirection(const Vec2& uv) {
  const double phi = (uv.x() - 0.5) * 2.0 * M_PI;
  const double theta = uv.y() * M_PI;
  return {std::sin(theta) * std::sin(phi), std::cos(theta), std::sin(theta) * std::cos(phi)};
}

Vec3 equirectPixelDirection(int x, int y, int width, int height) {
  return equirectToDirection(Vec2((x + 0.5) / width, (y + 0.5) / height));
}

RigPooling::RigPooling(const Vec3List& directions, int width, int height)
    : width_(width), height_(height), lights_(directions.size()) {
  LS_CHECK(width > 0 && height > 0, ParameterError, "envmap must be non-empty");
  LS_CHECK(!directions.empty(), ParameterError, "no rig directions");
  for (const auto& d : directions) LS_CHECK(std::abs(d.norm() - 1.0) < 1e-6, ParameterError, "rig directions must be unit");
  const KdTree tree(directions);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  cell_.resize(n);
  weight_.resize(n);
  parallelFor(0, static_cast<std::size_t>(height), [&](std::size_t y) {
    const double w = std::sin((y + 0.5) / height * M_PI);
    for (int x = 0; x < width; ++x) {
      const std::size_t i = y * width + x;
      cell_[i] = tree.nearest(equirectPixelDirection(x, static_cast<int>(y), width, height));
      weight_[i] = w;
    }
  });
  std::vector<double> total(lights_, 0.0);
  for (std::size_t i = 0; i < n; ++i) total[cell_[i]] += weight_[i];
  for (std::size_t i = 0; i < n; ++i) weight_[i] /= total[cell_[i]];
  empty_.resize(lights_);
  for (std::size_t l = 0; l < lights_; ++l) {
    empty_[l] = total[l] == 0.0;
    if (empty_[l]) warn("rig light " + std::to_string(l) + " owns no envmap pixel; its intensity is zero");
  }
}

Vec3List RigPooling::pool(const Image& envmap) const {
  LS_CHECK(envmap.width == width_ && envmap.height == height_ && envmap.channels == 3, ParameterError,
           "envmap shape does not match the pooling table");
  Vec3List out(lights_, Vec3::Zero());
  for (std::size_t i = 0; i < cell_.size(); ++i) {
    const float* p = &envmap.data[i * 3];
    LS_CHECK(std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]), NumericError, "non-finite envmap");
    out[cell_[i]] += weight_[i] * Vec3(p[0], p[1], p[2]);
  }
  return out;
}

Image RigPooling::poolAdjoint(const Vec3List& intensityGrad) const {
  LS_CHECK(intensityGrad.size() == lights_, ParameterError, "gradient size does not match the rig");
  Image g(width_, height_, 3);
  for (std::size_t i = 0; i < cell_.size(); ++i) {
    for (int c = 0; c < 3; ++c) g.data[i * 3 + c] = static_cast<float>(weight_[i] * intensityGrad[cell_[i]][c]);
  }
  return g;
}

Vec3List poolEnvmapToRig(const Image& envmap, const Vec3List& directions) {
  return RigPooling(directions, envmap.width, envmap.height).pool(envmap);
}

Vec3 halfVector(const Vec3& wi, const Vec3& wo) {
  const Vec3 s = wi + wo;
  const double n = s.norm();
  LS_CHECK(n > 1e-12, ParameterError, "half vector undefined for opposite directions");
  return s / n;
}

void AppearanceMaps::validate() const {
  const std::size_t n = covered.size();
  LS_CHECK(positions.size() == n && normals.size() == n && albedo.size() == n, ParameterError,
           "appearance maps have inconsistent sizes");
  for (std::size_t t = 0; t < n; ++t) {
    if (!covered[t]) continue;
    LS_CHECK(std::abs(normals[t].norm() - 1.0) < 1e-6, ParameterError, "normal map is not unit at a covered texel");
    LS_CHECK(albedo[t].minCoeff() >= 0.0 && albedo[t].maxCoeff() <= 1.0, ParameterError, "albedo outside [0, 1]");
  }
}

namespace {

AppearanceMaps appearanceGeometry(const UvMaps& uv) {
  AppearanceMaps m;
  m.resolution = uv.resolution;
  m.positions = uv.positions;
  m.normals = uv.normals;
  m.covered.resize(uv.texelCount());
  for (std::size_t t = 0; t < uv.texelCount(); ++t) {
    m.covered[t] = uv.covered(t) ? 1 : 0;
    if (m.covered[t]) m.normals[t].normalize();
  }
  m.albedo.assign(uv.texelCount(), Vec3::Zero());
  return m;
}

}  // namespace

AppearanceMaps appearanceFromUv(const UvMaps& uv, const Vec3& albedo) {
  AppearanceMaps m = appearanceGeometry(uv);
  for (std::size_t t = 0; t < m.texelCount(); ++t)
    if (m.covered[t]) m.albedo[t] = albedo;
  m.validate();
  return m;
}

AppearanceMaps appearanceFromUv(const UvMaps& uv, const Image& tex) {
  LS_CHECK(tex.channels == 3 && tex.width > 0 && tex.height > 0, ParameterError, "albedo texture must be RGB");
  AppearanceMaps m = appearanceGeometry(uv);
  const int res = uv.resolution;
  for (std::size_t t = 0; t < m.texelCount(); ++t) {
    if (!m.covered[t]) continue;
    const int x = static_cast<int>(t % res), y = static_cast<int>(t / res);
    const int tx = std::min(tex.width - 1, static_cast<int>((x + 0.5) / res * tex.width));
    const int ty = std::min(tex.height - 1, static_cast<int>((y + 0.5) / res * tex.height));
    for (int c = 0; c < 3; ++c) m.albedo[t][c] = std::clamp(static_cast<double>(tex.at(tx, ty, c)), 0.0, 1.0);
  }
  m.validate();
  return m;
}

VisibilityMask traceVisibility(const Bvh& bvh, const AppearanceMaps& maps, const Vec3List& directions, double delta) {
  LS_CHECK(delta > 0.0, ParameterError, "ray offset must be > 0");
  const std::size_t n = maps.texelCount();
  VisibilityMask vis(n, directions.size());
  // Each texel owns whole 64-bit words, so writes from different texels never share memory.
  parallelFor(0, n, [&](std::size_t t) {
    if (!maps.covered[t]) return;
    const Vec3& nrm = maps.normals[t];
    const Vec3 origin = maps.positions[t] + delta * nrm;
    for (std::size_t l = 0; l < directions.size(); ++l) {
      if (nrm.dot(directions[l]) <= 0.0) continue;
      if (!bvh.anyHit(Ray(origin, directions[l]))) vis.set(t, l, true);
    }
  });
  return vis;
}

void diffuseMaps(const VisibilityMask& vis, const AppearanceMaps& maps, const LightRig& rig,
                 std::vector<double>& rho, Vec3List& chi) {
  LS_CHECK(vis.texels() == maps.texelCount() && vis.lights() == rig.size(), ParameterError,
           "visibility does not match the maps or rig");
  const std::size_t n = maps.texelCount();
  rho.assign(n, 0.0);
  chi.assign(n, Vec3::Zero());
  parallelFor(0, n, [&](std::size_t t) {
    if (!maps.covered[t]) return;
    for (std::size_t l = 0; l < rig.size(); ++l) {
      if (!vis.get(t, l)) continue;
      const double c = std::max(0.0, maps.normals[t].dot(rig.directions[l]));
      rho[t] += c;
      chi[t] += c * rig.intensities[l];
    }
  });
}

double specularImportance(const Vec3& n, const Vec3& wi, const Vec3& wo, double intensityNorm, bool visible,
                          double alpha) {
  LS_CHECK(alpha > 0.0, ParameterError, "exponent must be > 0");
  if (!visible) return 0.0;
  const Vec3 h = halfVector(wi, wo);
  return std::pow(std::max(0.0, n.dot(h)), alpha) * intensityNorm * n.dot(wi);
}

std::vector<int> selectTopR(const std::vector<double>& scores, std::size_t r) {
  LS_CHECK(r <= scores.size(), ParameterError,
           "ray count " + std::to_string(r) + " exceeds light count " + std::to_string(scores.size()));
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(r), idx.end(), [&](int a, int b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  idx.resize(r);
  return idx;
}

Vec3List viewDirections(const AppearanceMaps& maps, const Vec3& cameraCenter) {
  Vec3List out(maps.texelCount(), Vec3::Zero());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (!maps.covered[t]) continue;
    const Vec3 d = cameraCenter - maps.positions[t];
    if (d.norm() > 0.0) out[t] = d.normalized();
  }
  return out;
}

TransportFeatures computeTransportFeatures(const AppearanceMaps& maps, const VisibilityMask& vis,
                                           const LightRig& rig, const Vec3List& viewDirs,
                                           const TransportOptions& options, const std::vector<int>* forcedRays) {
  const std::size_t n = maps.texelCount();
  const std::size_t r = options.rays;
  LS_CHECK(r <= rig.size(), ParameterError,
           "ray count " + std::to_string(r) + " exceeds light count " + std::to_string(rig.size()));
  LS_CHECK(options.alpha > 0.0, ParameterError, "exponent must be > 0");
  LS_CHECK(viewDirs.size() == n, ParameterError, "need one view direction per texel");
  LS_CHECK(forcedRays == nullptr || forcedRays->size() == n * r, ParameterError, "forced ray set has the wrong size");
  TransportFeatures f;
  f.texels = n;
  f.rays = r;
  diffuseMaps(vis, maps, rig, f.rho, f.chi);
  f.selected.assign(n * r, -1);
  f.psi.assign(n * r, RayEncoding{});
  std::vector<double> norms(rig.size());
  for (std::size_t l = 0; l < rig.size(); ++l) norms[l] = rig.intensities[l].norm();

  parallelFor(0, n, [&](std::size_t t) {
    if (!maps.covered[t]) return;
    const Vec3& nrm = maps.normals[t];
    const Vec3& wo = viewDirs[t];
    auto half = [&](const Vec3& wi) -> std::optional<Vec3> {
      const Vec3 s = wi + wo;
      const double len = s.norm();
      if (len <= 1e-12) return std::nullopt;
      return s / len;
    };
    std::vector<int> chosen;
    if (forcedRays != nullptr) {
      chosen.assign(forcedRays->begin() + t * r, forcedRays->begin() + (t + 1) * r);
      for (int l : chosen)
        LS_CHECK(l >= 0 && static_cast<std::size_t>(l) < rig.size(), ParameterError, "forced ray index out of range");
    } else {
      std::vector<double> scores(rig.size(), 0.0);
      for (std::size_t l = 0; l < rig.size(); ++l) {
        if (!vis.get(t, l)) continue;
        const auto h = half(rig.directions[l]);
        if (!h) continue;
        scores[l] = std::pow(std::max(0.0, nrm.dot(*h)), options.alpha) * norms[l] * nrm.dot(rig.directions[l]);
      }
      chosen = selectTopR(scores, r);
    }
    for (std::size_t k = 0; k < r; ++k) {
      const int l = chosen[k];
      const Vec3& wi = rig.directions[l];
      const auto h = half(wi);
      const double ni = nrm.dot(wi);
      const Vec3 masked = vis.get(t, l) ? Vec3(rig.intensities[l] * std::max(0.0, ni)) : Vec3::Zero();
      f.selected[t * r + k] = l;
      f.psi[t * r + k] = {ni, nrm.dot(wo), h ? nrm.dot(*h) : 0.0, masked.x(), masked.y(), masked.z()};
    }
  });
  return f;
}

Vec3List Shading::total() const {
  Vec3List out(diffuse.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = diffuse[i] + specular[i];
  return out;
}

Shading shadeAnalytic(const TransportFeatures& features, const AppearanceMaps& maps, const Material& material) {
  LS_CHECK(features.texels == maps.texelCount(), ParameterError, "features and maps are not aligned");
  LS_CHECK(material.specular >= 0.0 && material.exponent > 0.0, ParameterError, "invalid material");
  const std::size_t n = features.texels;
  Shading s;
  s.diffuse.assign(n, Vec3::Zero());
  s.specular.assign(n, Vec3::Zero());
  for (std::size_t t = 0; t < n; ++t) {
    if (!maps.covered[t]) continue;
    s.diffuse[t] = maps.albedo[t].cwiseProduct(features.chi[t]) / M_PI;
    if (material.specular == 0.0) continue;
    for (std::size_t k = 0; k < features.rays; ++k) {
      const auto& p = features.psi[t * features.rays + k];
      const double lobe = material.specular * std::pow(std::max(0.0, p[2]), material.exponent);
      s.specular[t] += lobe * Vec3(p[3], p[4], p[5]);
    }
  }
  return s;
}

}  // namespace lumisplat
