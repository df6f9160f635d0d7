#include <doctest.h>

#include "lumisplat/synth/scenes.h"
#include "lumisplat/rotation.h"

#include <algorithm>
#include <random>

using namespace lumisplat;
using namespace lumisplat::synth;

namespace {

CameraView smallCamera(int size = 16) {
  CameraView v;
  v.width = v.height = size;
  v.fx = v.fy = 100.0;
  v.cx = v.cy = size / 2.0;
  return v;
}

Gaussian blob(const Vec3& mean, double opacity, const Vec3& color, std::uint32_t id, double s = 0.01) {
  Gaussian g;
  g.mean = mean;
  g.scale = Vec3::Constant(s);
  g.opacity = opacity;
  g.color = color;
  g.id = id;
  return g;
}

Vec3 px(const Image& img, int x, int y) { return Vec3(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)); }

Mat2 fdCovariance(const Vec3& mean, const Mat3& rot, const Vec3& scale, const CameraView& v) {
  auto project = [&](const Vec3& w) {
    const Vec3 c = v.worldToCamera.apply(w);
    return Vec2(v.fx * c.x() / c.z() + v.cx, v.fy * c.y() / c.z() + v.cy);
  };
  Eigen::Matrix<double, 2, 3> j;
  for (int k = 0; k < 3; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(mean[k]));
    Vec3 a = mean, b = mean;
    a[k] += h;
    b[k] -= h;
    j.col(k) = (project(a) - project(b)) / (2 * h);
  }
  const Mat3 cov = rot * scale.cwiseAbs2().asDiagonal() * rot.transpose();
  return j * cov * j.transpose();
}

}  // namespace

TEST_CASE("covariance projection matches a finite-difference Jacobian") {
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.01, 0.3);
  for (int i = 0; i < 1000; ++i) {
    CameraView v = smallCamera(64);
    v.worldToCamera = {axisAngleToMatrix(Vec3(n(rng), n(rng), n(rng))), Vec3(n(rng), n(rng), n(rng))};
    const Vec3 camPoint(0.5 * n(rng), 0.5 * n(rng), 2.0 + std::abs(n(rng)));
    const Vec3 mean = v.worldToCamera.inverse().apply(camPoint);
    const Mat3 rot = axisAngleToMatrix(Vec3(n(rng), n(rng), n(rng)));
    const Vec3 scale(u(rng), u(rng), u(rng));
    const Mat2 got = projectCovariance(mean, rot, scale, v);
    const Mat2 ref = fdCovariance(mean, rot, scale, v);
    CHECK((got - ref).norm() <= 1e-4 * ref.norm());
    CHECK(got(0, 1) == got(1, 0));
  }
}

TEST_CASE("covariance projection: far-field limit and counter-rotation") {
  const CameraView v = smallCamera();
  const Vec3 s(0.02, 0.05, 0.03);
  const double z = 50.0;
  const Mat2 c = projectCovariance(Vec3(0, 0, z), Mat3::Identity(), s, v);
  CHECK(c(0, 0) == doctest::Approx(v.fx * v.fx * s.x() * s.x() / (z * z)).epsilon(1e-12));
  CHECK(c(1, 1) == doctest::Approx(v.fy * v.fy * s.y() * s.y() / (z * z)).epsilon(1e-12));
  CHECK(std::abs(c(0, 1)) < 1e-15);

  std::mt19937 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vec3 mean(0.3 * n(rng), 0.3 * n(rng), 3.0);
    const Mat3 r = axisAngleToMatrix(Vec3(n(rng), n(rng), n(rng)));
    const Mat3 q = axisAngleToMatrix(Vec3(n(rng), n(rng), n(rng)));
    CameraView v2 = v;
    v2.worldToCamera = v.worldToCamera * RigidTransform{q.transpose(), Vec3::Zero()};
    const Mat2 a = projectCovariance(mean, r, s, v);
    const Mat2 b = projectCovariance(q * mean, q * r, s, v2);
    CHECK((a - b).norm() <= 1e-12 * a.norm());
  }
}

TEST_CASE("compositing examples") {
  const CameraView v = smallCamera();
  const Image one = rasterize({blob(Vec3(0, 0, 5), 1.0, Vec3(0.2, 0.4, 0.6), 0)}, v);
  CHECK((px(one, 8, 8) - Vec3(0.2, 0.4, 0.6)).norm() < 1e-7);
  CHECK(one.at(8, 8, 3) == 1.0f);

  const Image two = rasterize({blob(Vec3(0, 0, 6), 1.0, Vec3(0, 1, 0), 1), blob(Vec3(0, 0, 5), 0.6, Vec3(1, 0, 0), 0)}, v);
  CHECK((px(two, 8, 8) - Vec3(0.6, 0.4, 0.0)).norm() < 1e-7);
  CHECK(two.at(8, 8, 3) == doctest::Approx(1.0));

  const Image empty = rasterize({}, v);
  for (float x : empty.data) CHECK(x == 0.0f);
}

TEST_CASE("four Gaussians against hand compositing, on and off center") {
  const CameraView v = smallCamera();
  const double o[4] = {0.3, 0.5, 0.7, 0.9};
  const Vec3 c[4] = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)};
  std::vector<Gaussian> gs;
  for (int i = 0; i < 4; ++i) gs.push_back(blob(Vec3(0, 0, 4.0 + i), o[i], c[i], i, 0.02 * (i + 1)));
  const Image img = rasterize(gs, v);
  for (const auto& q : {std::pair{8, 8}, std::pair{9, 8}, std::pair{8, 10}}) {
    Vec3 expect = Vec3::Zero();
    double t = 1.0;
    for (int i = 0; i < 4; ++i) {
      // Isotropic blob on the optical axis: screen variance (f s / z)^2.
      const double z = 4.0 + i, sig = v.fx * 0.02 * (i + 1) / z;
      const double d2 = std::pow(q.first - 8.0, 2) + std::pow(q.second - 8.0, 2);
      const double m = d2 / (sig * sig + kCovarianceEpsilon);
      if (m > 9.0) continue;
      const double a = o[i] * std::exp(-0.5 * m);
      expect += c[i] * a * t;
      t *= 1.0 - a;
    }
    CHECK((px(img, q.first, q.second) - expect).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(img.at(q.first, q.second, 3) == doctest::Approx(1.0 - t).epsilon(1e-6));
  }
}

TEST_CASE("rasterization invariants") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3), o(0.1, 1.0), s(0.01, 0.06);
  CameraView v = smallCamera(40);
  std::vector<Gaussian> gs;
  for (int i = 0; i < 60; ++i) {
    Gaussian g = blob(Vec3(u(rng), u(rng), 3.0 + (i % 7) * 0.1), o(rng), Vec3(o(rng), o(rng), o(rng)), i, s(rng));
    g.rotation = axisAngleToMatrix(Vec3(u(rng), u(rng), u(rng)) * 5);
    g.scale = Vec3(s(rng), s(rng), s(rng));
    gs.push_back(g);
  }
  const Image ref = rasterize(gs, v);
  for (int i = 0; i < 100; ++i) {
    auto p = gs;
    std::shuffle(p.begin(), p.end(), rng);
    REQUIRE(rasterize(p, v).data == ref.data);
  }

  const auto w = compositeWeights(gs, v);
  for (std::size_t p = 0; p < w.alpha.size(); ++p) {
    CHECK(w.alpha[p] >= 0.0);
    CHECK(w.alpha[p] <= 1.0);
    double sum = 0.0;
    for (std::size_t k = w.offsets[p]; k < w.offsets[p + 1]; ++k) sum += w.weight[k];
    CHECK(sum <= 1.0 + 1e-12);
  }

  Vec3List c1(gs.size()), c2(gs.size()), c12(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    c1[i] = Vec3(o(rng), o(rng), o(rng));
    c2[i] = Vec3(o(rng), o(rng), o(rng));
    c12[i] = c1[i] + c2[i];
  }
  const Image a = w.apply(c1), b = w.apply(c2), ab = w.apply(c12);
  for (std::size_t i = 0; i < ab.data.size(); ++i) {
    if (i % 4 == 3) continue;
    CHECK(std::abs(ab.data[i] - a.data[i] - b.data[i]) < 1e-6);
  }
}

TEST_CASE("an opaque front Gaussian hides what is behind it") {
  const CameraView v = smallCamera();
  const Image img = rasterize({blob(Vec3(0, 0, 5), 1.0, Vec3(0, 0, 1), 0), blob(Vec3(0, 0, 7), 1.0, Vec3(1, 0, 0), 1),
                               blob(Vec3(0, 0, 9), 0.5, Vec3(0, 1, 0), 2)},
                              v);
  CHECK(px(img, 8, 8) == Vec3(0, 0, 1));
}

TEST_CASE("behind-camera Gaussians are culled") {
  const CameraView v = smallCamera();
  const Image img = rasterize({blob(Vec3(0, 0, -5), 1.0, Vec3(1, 1, 1), 0)}, v);
  for (float x : img.data) CHECK(x == 0.0f);
  CHECK_THROWS_AS(projectCovariance(Vec3(0, 0, -1), Mat3::Identity(), Vec3::Ones(), v), ParameterError);
}

TEST_CASE("optional colour falloff only changes off-center pixels") {
  const CameraView v = smallCamera();
  const std::vector<Gaussian> g = {blob(Vec3(0, 0, 5), 0.8, Vec3(1, 1, 1), 0, 0.05)};
  RasterOptions lit;
  lit.colorFalloff = true;
  const Image a = rasterize(g, v), b = rasterize(g, v, lit);
  CHECK(a.at(8, 8, 0) == b.at(8, 8, 0));
  CHECK(b.at(9, 8, 0) < a.at(9, 8, 0));
  CHECK(a.at(9, 8, 3) == b.at(9, 8, 3));
}

TEST_CASE("UV splats sit on the surface plus a frame offset") {
  const TriangleMesh quad = makePlane(1, 1.0);
  const auto mesh = meshFrom(quad);
  const auto uv = rasterizeUvMaps(mesh, 8);
  auto tex = makeDefaultSplats(uv, mesh);
  tex.validate();
  Vec3List colors(uv.texelCount(), Vec3::Ones());
  std::vector<std::size_t> texelOf;
  auto g = placeSplats(tex, uv, colors, &texelOf);
  REQUIRE(!g.empty());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK((g[i].mean - uv.positions[texelOf[i]]).norm() == 0.0);
  for (auto& o : tex.offsets) o = Vec3(0, 0, 0.01);
  g = placeSplats(tex, uv, colors, &texelOf);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK((g[i].mean - uv.positions[texelOf[i]] - Vec3(0, 0, 0.01)).norm() < 1e-15);
  const Mat3 f = surfaceFrame(Vec3(0.3, -0.4, 0.5));
  CHECK((f.transpose() * f - Mat3::Identity()).norm() < 1e-12);
  CHECK(f.determinant() == doctest::Approx(1.0));
}

TEST_CASE("splat texture and view files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lumisplat_test_splat";
  std::filesystem::create_directories(dir);
  const auto mesh = sphereMesh(6, 8);
  const auto uv = rasterizeUvMaps(mesh, 16);
  auto tex = makeDefaultSplats(uv, mesh);
  tex.rotations[uv.texelCount() / 2] = Quat(axisAngleToMatrix(Vec3(0.1, 0.2, 0.3)));
  io::saveSplats(dir / "s.lspt", tex);
  const auto back = io::loadSplats(dir / "s.lspt");
  CHECK(back.active == tex.active);
  for (std::size_t t = 0; t < tex.texelCount(); ++t) {
    if (!tex.active[t]) continue;
    CHECK((back.scales[t] - tex.scales[t]).norm() < 1e-6 * tex.scales[t].norm());
    CHECK(std::abs(back.rotations[t].dot(tex.rotations[t])) > 1 - 1e-6);
  }
  const CameraView v = frontCamera(32);
  io::saveView(dir / "v.json", v);
  const auto vb = io::loadView(dir / "v.json");
  CHECK(vb.fx == v.fx);
  CHECK((vb.worldToCamera.matrix() - v.worldToCamera.matrix()).norm() == 0.0);
  std::filesystem::remove_all(dir);
}
