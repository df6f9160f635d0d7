#include "lumisplat/calib/env_calibration.h"

#include "lumisplat/io/files.h"
#include "lumisplat/parallel.h"

#include <algorithm>

namespace lumisplat {

void ColorCorrection::validate() const {
  LS_CHECK(A.allFinite(), ParameterError, "colour matrix has non-finite entries");
  for (int c = 0; c < 3; ++c)
    LS_CHECK(gamma[c] > kGammaMin && gamma[c] < kGammaMax, ParameterError,
             "gamma " + std::to_string(gamma[c]) + " outside (0.2, 5)");
  if (sharedGamma)
    LS_CHECK(gamma[0] == gamma[1] && gamma[1] == gamma[2], ParameterError, "shared gamma differs across channels");
}

VecX ColorCorrection::pack() const {
  VecX x(parameterCount());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) x[i * 6 + j] = A(i, j);
  if (sharedGamma)
    x[18] = gamma[0];
  else
    x.tail<3>() = gamma;
  return x;
}

void ColorCorrection::unpack(const VecX& x) {
  LS_CHECK(x.size() == parameterCount(), ParameterError, "parameter vector has the wrong size");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) A(i, j) = x[i * 6 + j];
  gamma = sharedGamma ? Vec3::Constant(x[18]) : Vec3(x.tail<3>());
}

Vec3 applyColorCorrection(const Vec3& ldr, const ColorCorrection& cc, ColorJacobian* jacobian) {
  Vec3 x, p, logx;
  for (int c = 0; c < 3; ++c) {
    x[c] = std::clamp(std::isnan(ldr[c]) ? 0.0 : ldr[c], 0.0, 1.0);
    p[c] = x[c] > 0.0 ? std::pow(x[c], cc.gamma[c]) : 0.0;
    logx[c] = x[c] > 0.0 ? std::log(x[c]) : 0.0;
  }
  static constexpr int kPair[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  Eigen::Matrix<double, 6, 1> b;
  b.head<3>() = p;
  for (int k = 0; k < 3; ++k) b[3 + k] = std::sqrt(p[kPair[k][0]] * p[kPair[k][1]]);
  const Vec3 out = cc.A * b;
  if (jacobian != nullptr) {
    jacobian->setZero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j) (*jacobian)(i, i * 6 + j) = b[j];
    Eigen::Matrix<double, 6, 3> db = Eigen::Matrix<double, 6, 3>::Zero();
    for (int c = 0; c < 3; ++c) db(c, c) = p[c] * logx[c];
    for (int k = 0; k < 3; ++k)
      for (int side = 0; side < 2; ++side) {
        const int c = kPair[k][side];
        db(3 + k, c) = 0.5 * b[3 + k] * logx[c];
      }
    jacobian->rightCols<3>() = cc.A * db;
  }
  return out;
}

Image ldrToHdr(const Image& panorama, const ColorCorrection& cc) {
  LS_CHECK(panorama.channels >= 3, ParameterError, "panorama needs 3 channels");
  Image out(panorama.width, panorama.height, 3);
  parallelFor(0, panorama.pixelCount(), [&](std::size_t p) {
    const float* s = &panorama.data[p * panorama.channels];
    const Vec3 v = applyColorCorrection(Vec3(s[0], s[1], s[2]), cc);
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = static_cast<float>(v[c]);
  });
  return out;
}

double envmapRegularizer(const Image& hdr, Image* gradient) {
  double over = 0.0, under = 0.0;
  for (float v : hdr.data) {
    over += std::pow(std::max(v - 1.0, 0.0), 2);
    under += std::pow(std::max(-static_cast<double>(v), 0.0), 2);
  }
  over = std::sqrt(over);
  under = std::sqrt(under);
  if (gradient != nullptr) {
    *gradient = Image(hdr.width, hdr.height, hdr.channels);
    for (std::size_t i = 0; i < hdr.data.size(); ++i) {
      const double v = hdr.data[i];
      double g = 0.0;
      if (v > 1.0) g = (v - 1.0) / over;
      if (v < 0.0) g = v / under;
      gradient->data[i] = static_cast<float>(g);
    }
  }
  return over + under;
}

void CalibrationObservation::validate() const {
  LS_CHECK(egoImage.channels >= 3 && egoImage.pixelCount() > 0, ParameterError, "ego image must be non-empty RGB");
  LS_CHECK(egoImage.width == camera.width && egoImage.height == camera.height, ParameterError,
           "ego image size differs from the camera");
  for (const auto& m : partMasks)
    LS_CHECK(m.size() == egoImage.pixelCount(), ParameterError, "part mask size differs from the ego image");
  if (!warp.data.empty()) {
    LS_CHECK(warp.width == egoImage.width && warp.height == egoImage.height && warp.channels >= 2, ParameterError,
             "warp field must be a 2-channel image of the ego size");
    for (float v : warp.data) LS_CHECK(std::isfinite(v), ParameterError, "warp field is not finite");
  }
  camera.validate();
}

Image inverseWarp(const Image& ego, const Image& warp) {
  Image out(ego.width, ego.height, 3);
  auto sample = [&](int x, int y, int c) {
    x = std::clamp(x, 0, ego.width - 1);
    y = std::clamp(y, 0, ego.height - 1);
    return static_cast<double>(ego.at(x, y, c));
  };
  for (int y = 0; y < ego.height; ++y) {
    for (int x = 0; x < ego.width; ++x) {
      double sx = x, sy = y;
      if (!warp.data.empty()) {
        sx += warp.at(x, y, 0);
        sy += warp.at(x, y, 1);
      }
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double tx = sx - fx, ty = sy - fy;
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - tx) * (1 - ty) * sample(x0, y0, c) + tx * (1 - ty) * sample(x0 + 1, y0, c) +
                         (1 - tx) * ty * sample(x0, y0 + 1, c) + tx * ty * sample(x0 + 1, y0 + 1, c);
        out.at(x, y, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

CalibrationProblem::CalibrationProblem(Image panorama, std::vector<CalibrationObservation> observations,
                                       CalibrationAssets assets)
    : panorama_(std::move(panorama)),
      assets_(std::move(assets)),
      pooling_(assets_.directions, panorama_.width, panorama_.height) {
  LS_CHECK(panorama_.channels >= 3 && panorama_.pixelCount() > 0, ParameterError, "panorama must be non-empty RGB");
  LS_CHECK(!observations.empty(), ParameterError, "calibration needs at least one observation");
  for (std::size_t i = 0; i < observations.size(); ++i) {
    auto& o = observations[i];
    o.validate();
    Frame f;
    f.index = i;
    for (const auto& m : o.partMasks) {
      std::vector<std::uint32_t> px;
      for (std::size_t p = 0; p < m.size(); ++p)
        if (m[p] != 0) px.push_back(static_cast<std::uint32_t>(p));
      if (!px.empty()) f.parts.push_back(std::move(px));
    }
    if (f.parts.empty()) {
      warn("observation " + std::to_string(i) + " has only empty part masks; skipped");
      continue;
    }
    f.scene = prepareScene(o.mesh, assets_.directions, assets_.albedo, assets_.albedoTexture.get(),
                           assets_.splats.get(), assets_.scene);
    f.setup = prepareView(f.scene, o.camera);
    f.target = inverseWarp(o.egoImage, o.warp);
    frames_.push_back(std::move(f));
  }
  LS_CHECK(!frames_.empty(), ParameterError, "every observation was skipped");
}

double CalibrationProblem::evaluate(const ColorCorrection& cc, VecX* gradient) const {
  return evaluateImpl(cc, gradient, true);
}

double CalibrationProblem::photometric(const ColorCorrection& cc) const { return evaluateImpl(cc, nullptr, false); }

Image CalibrationProblem::render(std::size_t i, const Image& envmap) const {
  LS_CHECK(i < frames_.size(), ParameterError, "observation index out of range");
  const Frame& f = frames_[i];
  Vec3List e = pooling_.pool(envmap);
  for (auto& v : e) v = v.cwiseMax(0.0);
  const auto r = relight(f.scene, f.setup, e, assets_.transport, assets_.material);
  const Vec3List texel = r.shading.total();
  Vec3List colors(f.setup.texelOf.size());
  for (std::size_t k = 0; k < colors.size(); ++k) colors[k] = texel[f.setup.texelOf[k]];
  const Vec3List px = f.setup.weights.pixelColors(colors);
  Image out(f.setup.view.width, f.setup.view.height, 3);
  for (std::size_t p = 0; p < px.size(); ++p)
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = static_cast<float>(px[p][c]);
  return out;
}

double CalibrationProblem::evaluateImpl(const ColorCorrection& cc, VecX* gradient, bool regularize) const {
  const Image hdr = ldrToHdr(panorama_, cc);
  // Lights cannot emit negative energy; the regularizer pulls such map values back up.
  Vec3List e = pooling_.pool(hdr);
  for (auto& v : e) v = v.cwiseMax(0.0);
  double loss = 0.0;
  Vec3List gradE(e.size(), Vec3::Zero());
  // Frames run one after another; the renderer parallelizes inside each one.
  for (const Frame& f : frames_) {
    const auto r = relight(f.scene, f.setup, e, assets_.transport, assets_.material);
    const Vec3List texel = r.shading.total();
    Vec3List colors(f.setup.texelOf.size());
    for (std::size_t k = 0; k < colors.size(); ++k) colors[k] = texel[f.setup.texelOf[k]];
    const Vec3List px = f.setup.weights.pixelColors(colors);
    Image imgGrad(f.setup.view.width, f.setup.view.height, 3);
    double term = 0.0;
    for (const auto& part : f.parts) {
      const double norm = 1.0 / (3.0 * static_cast<double>(part.size()));
      double sum = 0.0;
      for (std::uint32_t p : part) {
        for (int c = 0; c < 3; ++c) {
          const double d = px[p][c] - f.target.data[p * 3 + c];
          sum += std::abs(d);
          if (gradient != nullptr && d != 0.0) imgGrad.data[p * 3 + c] += static_cast<float>(d > 0 ? norm : -norm);
        }
      }
      term += sum * norm;
    }
    LS_CHECK(std::isfinite(term), NumericError, "loss is not finite for observation " + std::to_string(f.index));
    loss += term;
    if (gradient != nullptr) {
      const Vec3List g = relightIntensityGradient(f.scene, f.setup, r, assets_.material, imgGrad);
      for (std::size_t l = 0; l < e.size(); ++l)
        for (int c = 0; c < 3; ++c)
          if (e[l][c] > 0.0) gradE[l][c] += g[l][c];
    }
  }
  Image regGrad;
  if (regularize) {
    const double reg = envmapRegularizer(hdr, gradient != nullptr ? &regGrad : nullptr);
    LS_CHECK(std::isfinite(reg), NumericError, "envmap regularizer is not finite");
    loss += reg;
  }
  if (gradient == nullptr) return loss;

  Image envGrad = pooling_.poolAdjoint(gradE);
  if (regularize)
    for (std::size_t i = 0; i < envGrad.data.size(); ++i) envGrad.data[i] += regGrad.data[i];
  // Chain through the colour model: per-row partial sums, reduced serially.
  const int h = panorama_.height, w = panorama_.width;
  std::vector<Eigen::Matrix<double, 21, 1>> rows(h, Eigen::Matrix<double, 21, 1>::Zero());
  parallelFor(0, static_cast<std::size_t>(h), [&](std::size_t y) {
    ColorJacobian jac;
    for (int x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      const Vec3 g(envGrad.data[p * 3], envGrad.data[p * 3 + 1], envGrad.data[p * 3 + 2]);
      if (g.isZero()) continue;
      const float* s = &panorama_.data[p * panorama_.channels];
      applyColorCorrection(Vec3(s[0], s[1], s[2]), cc, &jac);
      rows[y] += jac.transpose() * g;
    }
  });
  Eigen::Matrix<double, 21, 1> full = Eigen::Matrix<double, 21, 1>::Zero();
  for (const auto& r : rows) full += r;
  gradient->resize(cc.parameterCount());
  gradient->head<18>() = full.head<18>();
  if (cc.sharedGamma)
    (*gradient)[18] = full.tail<3>().sum();
  else
    gradient->tail<3>() = full.tail<3>();
  return loss;
}

CalibrationResult calibrate(const CalibrationProblem& problem, const ColorCorrection& init,
                            const AdamOptions& options) {
  init.validate();
  CalibrationResult out;
  out.cc = init;
  VecX x = init.pack();
  ColorCorrection work = init;
  const Objective objective = [&](const VecX& p, VecX& g) {
    work.unpack(p);
    return problem.evaluate(work, &g);
  };
  AdamOptions opts = options;
  const int gammaStart = 18;
  opts.project = [&](VecX& p) {
    if (options.project) options.project(p);
    for (Eigen::Index i = gammaStart; i < p.size(); ++i) p[i] = std::clamp(p[i], kGammaMin + 1e-6, kGammaMax - 1e-6);
  };
  out.optimizer = minimizeAdam(objective, x, opts);
  out.cc.unpack(x);
  out.envmap = ldrToHdr(problem.panorama(), out.cc);
  return out;
}

namespace io {

ColorCorrection loadColorCorrection(const std::filesystem::path& path) {
  const Json j = readJson(path);
  ColorCorrection cc;
  try {
    const auto& a = j.at("A");
    LS_CHECK(a.size() == 3, DataError, "A must have 3 rows");
    for (int i = 0; i < 3; ++i) {
      LS_CHECK(a[i].size() == 6, DataError, "A rows must have 6 entries");
      for (int k = 0; k < 6; ++k) cc.A(i, k) = a[i][k].get<double>();
    }
    const auto& g = j.at("gamma");
    if (g.is_number()) {
      cc.gamma = Vec3::Constant(g.get<double>());
      cc.sharedGamma = true;
    } else {
      LS_CHECK(g.size() == 3, DataError, "gamma must have 3 entries");
      for (int c = 0; c < 3; ++c) cc.gamma[c] = g[c].get<double>();
    }
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    cc.validate();
  } catch (const ParameterError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return cc;
}

void saveColorCorrection(const std::filesystem::path& path, const ColorCorrection& cc) {
  Json a = Json::array();
  for (int i = 0; i < 3; ++i) {
    Json row = Json::array();
    for (int k = 0; k < 6; ++k) row.push_back(cc.A(i, k));
    a.push_back(row);
  }
  writeJson(path, Json{{"A", a}, {"gamma", {cc.gamma[0], cc.gamma[1], cc.gamma[2]}}});
}

}  // namespace io

}  // namespace lumisplat
