#include "lumisplat/splat/splat.h"

#include "lumisplat/parallel.h"

#include <algorithm>

namespace lumisplat {

void CameraView::validate() const {
  LS_CHECK(fx > 0.0 && fy > 0.0, ParameterError, "focal length must be > 0");
  LS_CHECK(width > 0 && height > 0, ParameterError, "image size must be positive");
  LS_CHECK(near > 0.0 && near < far, ParameterError, "need 0 < near < far");
  LS_CHECK(worldToCamera.isRigid(1e-6), ParameterError, "world-to-camera transform is not rigid");
}

CameraView lookAtCamera(const Vec3& eye, const Vec3& target, int width, int height, double focal, const Vec3& up) {
  const Vec3 f = (target - eye).normalized();
  const Vec3 right = f.cross(up);
  LS_CHECK(right.norm() > 1e-9, ParameterError, "view direction is parallel to the up vector");
  CameraView v;
  v.width = width;
  v.height = height;
  v.fx = v.fy = focal;
  v.cx = width / 2.0;
  v.cy = height / 2.0;
  v.worldToCamera.rotation.row(0) = right.normalized();
  v.worldToCamera.rotation.row(1) = f.cross(right.normalized());
  v.worldToCamera.rotation.row(2) = f;
  v.worldToCamera.translation = -(v.worldToCamera.rotation * eye);
  return v;
}

Mat2 projectCovariance(const Vec3& mean, const Mat3& rotation, const Vec3& scale, const CameraView& view) {
  const Vec3 p = view.worldToCamera.apply(mean);
  LS_CHECK(p.z() > 0.0, ParameterError, "Gaussian is behind the camera");
  Eigen::Matrix<double, 2, 3> j;
  j << view.fx / p.z(), 0.0, -view.fx * p.x() / (p.z() * p.z()), 0.0, view.fy / p.z(),
      -view.fy * p.y() / (p.z() * p.z());
  const Mat3 m = view.worldToCamera.rotation * rotation * scale.asDiagonal();
  const Eigen::Matrix<double, 2, 3> jm = j * m;
  Mat2 cov = jm * jm.transpose();
  cov(1, 0) = cov(0, 1);
  return cov;
}

Vec3List CompositeWeights::pixelColors(const Vec3List& colors) const {
  Vec3List out(static_cast<std::size_t>(width) * height);
  parallelFor(0, out.size(), [&](std::size_t p) {
    Vec3 c = Vec3::Zero();
    for (std::size_t k = offsets[p]; k < offsets[p + 1]; ++k) c += weight[k] * colors[splat[k]];
    out[p] = c;
  });
  return out;
}

Image CompositeWeights::apply(const Vec3List& colors) const {
  const Vec3List c = pixelColors(colors);
  Image img(width, height, 4);
  for (std::size_t p = 0; p < c.size(); ++p) {
    for (int ch = 0; ch < 3; ++ch) img.data[p * 4 + ch] = static_cast<float>(c[p][ch]);
    img.data[p * 4 + 3] = static_cast<float>(alpha[p]);
  }
  return img;
}

Vec3List CompositeWeights::applyAdjoint(const Image& pixelGrad, std::size_t splatCount) const {
  LS_CHECK(pixelGrad.width == width && pixelGrad.height == height && pixelGrad.channels >= 3, ParameterError,
           "gradient image does not match the render");
  Vec3List g(splatCount, Vec3::Zero());
  const std::size_t n = static_cast<std::size_t>(width) * height;
  for (std::size_t p = 0; p < n; ++p) {
    const float* d = &pixelGrad.data[p * pixelGrad.channels];
    const Vec3 dp(d[0], d[1], d[2]);
    if (dp.isZero()) continue;
    for (std::size_t k = offsets[p]; k < offsets[p + 1]; ++k) g[splat[k]] += weight[k] * dp;
  }
  return g;
}

namespace {

struct Projected {
  Vec2 center;
  Mat2 conic;  // inverse screen covariance
  double depth = 0.0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

struct Entry {
  std::uint32_t splat;
  double weight;
};

}  // namespace

CompositeWeights compositeWeights(const std::vector<Gaussian>& splats, const CameraView& view,
                                  const RasterOptions& options) {
  view.validate();
  const std::size_t n = splats.size();
  std::vector<Projected> proj(n);
  std::vector<std::uint8_t> live(n, 0);
  parallelFor(0, n, [&](std::size_t i) {
    const Gaussian& g = splats[i];
    const Vec3 p = view.worldToCamera.apply(g.mean);
    if (!(p.z() > view.near && p.z() < view.far)) return;
    if (g.opacity <= 0.0) return;
    Mat2 cov = projectCovariance(g.mean, g.rotation, g.scale, view);
    cov += kCovarianceEpsilon * Mat2::Identity();
    const double det = cov.determinant();
    if (!(det > 0.0)) return;
    Projected& pr = proj[i];
    pr.center = Vec2(view.fx * p.x() / p.z() + view.cx, view.fy * p.y() / p.z() + view.cy);
    pr.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(0, 1) / det, cov(0, 0) / det;
    pr.depth = p.z();
    // Axis-aligned extent of the 3-sigma ellipse.
    const double rx = 3.0 * std::sqrt(cov(0, 0)), ry = 3.0 * std::sqrt(cov(1, 1));
    const double lx = std::ceil(pr.center.x() - rx), hx = std::floor(pr.center.x() + rx);
    const double ly = std::ceil(pr.center.y() - ry), hy = std::floor(pr.center.y() + ry);
    if (hx < 0 || hy < 0 || lx > view.width - 1 || ly > view.height - 1) return;
    pr.x0 = static_cast<int>(std::max(0.0, lx));
    pr.x1 = static_cast<int>(std::min<double>(view.width - 1, hx));
    pr.y0 = static_cast<int>(std::max(0.0, ly));
    pr.y1 = static_cast<int>(std::min<double>(view.height - 1, hy));
    live[i] = 1;
  });

  const int tilesX = (view.width + kTileSize - 1) / kTileSize;
  const int tilesY = (view.height + kTileSize - 1) / kTileSize;
  std::vector<std::vector<std::uint32_t>> tiles(static_cast<std::size_t>(tilesX) * tilesY);
  for (std::size_t i = 0; i < n; ++i) {
    if (!live[i]) continue;
    const auto& pr = proj[i];
    for (int ty = pr.y0 / kTileSize; ty <= pr.y1 / kTileSize; ++ty)
      for (int tx = pr.x0 / kTileSize; tx <= pr.x1 / kTileSize; ++tx)
        tiles[static_cast<std::size_t>(ty) * tilesX + tx].push_back(static_cast<std::uint32_t>(i));
  }

  const std::size_t pixels = static_cast<std::size_t>(view.width) * view.height;
  std::vector<std::vector<Entry>> perPixel(pixels);
  CompositeWeights w;
  w.width = view.width;
  w.height = view.height;
  w.alpha.assign(pixels, 0.0);

  parallelFor(0, tiles.size(), [&](std::size_t tile) {
    auto& list = tiles[tile];
    std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (proj[a].depth != proj[b].depth) return proj[a].depth < proj[b].depth;
      if (splats[a].id != splats[b].id) return splats[a].id < splats[b].id;
      return a < b;
    });
    const int tx = static_cast<int>(tile % tilesX), ty = static_cast<int>(tile / tilesX);
    for (int y = ty * kTileSize; y < std::min(view.height, (ty + 1) * kTileSize); ++y) {
      for (int x = tx * kTileSize; x < std::min(view.width, (tx + 1) * kTileSize); ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * view.width + x;
        double transmit = 1.0;
        auto& out = perPixel[pix];
        for (std::uint32_t i : list) {
          const auto& pr = proj[i];
          if (x < pr.x0 || x > pr.x1 || y < pr.y0 || y > pr.y1) continue;
          const Vec2 d = Vec2(x, y) - pr.center;
          const double m = d.dot(pr.conic * d);
          if (m > kCutoffMahalanobis2) continue;
          const double g = std::exp(-0.5 * m);
          const double a = std::min(1.0, splats[i].opacity * g);
          if (a <= 0.0) continue;
          const double wt = a * transmit * (options.colorFalloff ? g : 1.0);
          out.push_back({i, wt});
          transmit *= 1.0 - a;
          if (transmit <= 0.0) break;
        }
        w.alpha[pix] = 1.0 - transmit;
      }
    }
  });

  w.offsets.assign(pixels + 1, 0);
  for (std::size_t p = 0; p < pixels; ++p) w.offsets[p + 1] = w.offsets[p] + static_cast<std::uint32_t>(perPixel[p].size());
  w.splat.resize(w.offsets.back());
  w.weight.resize(w.offsets.back());
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t k = w.offsets[p];
    for (const auto& e : perPixel[p]) {
      w.splat[k] = e.splat;
      w.weight[k] = e.weight;
      ++k;
    }
  }
  return w;
}

Image rasterize(const std::vector<Gaussian>& splats, const CameraView& view, const RasterOptions& options) {
  Vec3List colors(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) colors[i] = splats[i].color;
  return compositeWeights(splats, view, options).apply(colors);
}

void SplatTexture::validate() const {
  const std::size_t n = active.size();
  LS_CHECK(resolution > 0 && n == static_cast<std::size_t>(resolution) * resolution, ParameterError,
           "splat texture size does not match its resolution");
  LS_CHECK(offsets.size() == n && rotations.size() == n && scales.size() == n && opacity.size() == n, ParameterError,
           "splat texture attributes have inconsistent sizes");
  for (std::size_t t = 0; t < n; ++t) {
    if (!active[t]) continue;
    LS_CHECK(std::abs(rotations[t].norm() - 1.0) <= 1e-6, ParameterError, "splat rotation is not a unit quaternion");
    LS_CHECK(scales[t].minCoeff() > 0.0 && scales[t].allFinite(), ParameterError, "splat scales must be > 0");
    LS_CHECK(opacity[t] >= 0.0 && opacity[t] <= 1.0, ParameterError, "splat opacity outside [0, 1]");
    LS_CHECK(offsets[t].allFinite(), ParameterError, "non-finite splat offset");
  }
}

Mat3 surfaceFrame(const Vec3& normal) {
  const Vec3 n = normal.normalized();
  const Vec3 t = n.unitOrthogonal();
  Mat3 f;
  f.col(0) = t;
  f.col(1) = n.cross(t);
  f.col(2) = n;
  return f;
}

SplatTexture makeDefaultSplats(const UvMaps& uv, const PosedMesh& mesh, double footprint, double thickness) {
  LS_CHECK(footprint > 0.0 && thickness > 0.0, ParameterError, "splat footprint and thickness must be > 0");
  const std::size_t n = uv.texelCount();
  SplatTexture tex;
  tex.resolution = uv.resolution;
  tex.active.assign(n, 0);
  tex.offsets.assign(n, Vec3::Zero());
  tex.rotations.assign(n, Quat::Identity());
  tex.scales.assign(n, Vec3::Ones());
  tex.opacity.assign(n, 1.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (!uv.covered(t)) continue;
    const int f = uv.faceIndex[t];
    const auto& face = mesh.faces[f];
    const auto& fuv = mesh.faceUvs[f];
    const double area3 =
        (mesh.vertices[face[1]] - mesh.vertices[face[0]]).cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]).norm();
    const Vec2 e1 = fuv[1] - fuv[0], e2 = fuv[2] - fuv[0];
    const double areaUv = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    if (!(area3 > 0.0 && areaUv > 0.0)) continue;
    const double side = std::sqrt(area3 / areaUv) / uv.resolution;
    tex.active[t] = 1;
    tex.scales[t] = Vec3(footprint * side, footprint * side, thickness * side);
  }
  return tex;
}

std::vector<Gaussian> placeSplats(const SplatTexture& tex, const UvMaps& uv, const Vec3List& texelColors,
                                  std::vector<std::size_t>* texelOf) {
  LS_CHECK(tex.resolution == uv.resolution, ParameterError, "splat texture and UV maps differ in resolution");
  LS_CHECK(texelColors.size() == uv.texelCount(), ParameterError, "need one color per texel");
  std::vector<Gaussian> out;
  if (texelOf != nullptr) texelOf->clear();
  for (std::size_t t = 0; t < uv.texelCount(); ++t) {
    if (!tex.active[t] || !uv.covered(t)) continue;
    const Mat3 frame = surfaceFrame(uv.normals[t]);
    Gaussian g;
    g.mean = uv.positions[t] + frame * tex.offsets[t];
    g.rotation = frame * tex.rotations[t].normalized().toRotationMatrix();
    g.scale = tex.scales[t];
    g.opacity = tex.opacity[t];
    g.color = texelColors[t];
    g.id = static_cast<std::uint32_t>(t);
    out.push_back(g);
    if (texelOf != nullptr) texelOf->push_back(t);
  }
  return out;
}

}  // namespace lumisplat
