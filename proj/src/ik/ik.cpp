#include "lumisplat/ik/ik.h"

#include "lumisplat/optim.h"
#include "lumisplat/parallel.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

namespace lumisplat {

namespace {

void checkSequence(const TemplateCharacter& character, const PoseSequence& poses) {
  for (const auto& p : poses) {
    LS_CHECK(static_cast<std::size_t>(p.size()) == character.dofCount(), ParameterError,
             "pose length does not match the DoF count");
  }
}

PoseSequence zerosLike(const PoseSequence& s) {
  PoseSequence out;
  out.reserve(s.size());
  for (const auto& v : s) out.push_back(VecX::Zero(v.size()));
  return out;
}

}  // namespace

void KeypointSequence::validate(const TemplateCharacter& character) const {
  LS_CHECK(positions.size() == confidences.size(), ParameterError, "confidence frames != keypoint frames");
  for (int j : jointMap) {
    LS_CHECK(j >= 0 && static_cast<std::size_t>(j) < character.jointCount(), ParameterError,
             "keypoint maps to a joint out of range");
  }
  for (std::size_t t = 0; t < positions.size(); ++t) {
    LS_CHECK(positions[t].size() == jointMap.size(), ParameterError,
             "frame " + std::to_string(t) + " has " + std::to_string(positions[t].size()) + " keypoints, expected " +
                 std::to_string(jointMap.size()));
    LS_CHECK(static_cast<std::size_t>(confidences[t].size()) == jointMap.size(), ParameterError,
             "frame " + std::to_string(t) + " confidence count mismatch");
    LS_CHECK((confidences[t].array() >= 0.0).all() && (confidences[t].array() <= 1.0).all(), ParameterError,
             "confidences must lie in [0, 1]");
    for (const auto& p : positions[t]) {
      LS_CHECK(p.allFinite(), NumericError, "non-finite keypoint in frame " + std::to_string(t));
    }
  }
}

void HandPcaModel::validate() const {
  LS_CHECK(basis.rows() == mean.size(), ParameterError, "hand PCA basis rows != mean length");
  const MatX gram = basis.transpose() * basis;
  LS_CHECK((gram - MatX::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() <= 1e-6, ParameterError,
           "hand PCA basis columns are not orthonormal");
}

HandPcaModel buildHandPca(const MatX& corpus, int components) {
  LS_CHECK(corpus.rows() >= 2, ParameterError, "PCA needs at least two samples");
  LS_CHECK(components >= 1 && components <= corpus.cols(), ParameterError, "component count out of range");
  HandPcaModel model;
  model.mean = corpus.colwise().mean().transpose();
  const MatX centered = corpus.rowwise() - model.mean.transpose();
  const MatX cov = centered.transpose() * centered / static_cast<double>(corpus.rows() - 1);
  Eigen::SelfAdjointEigenSolver<MatX> eig(cov);
  LS_CHECK(eig.info() == Eigen::Success, NumericError, "eigendecomposition failed");
  model.basis.resize(corpus.cols(), components);
  for (int c = 0; c < components; ++c) {
    VecX v = eig.eigenvectors().col(corpus.cols() - 1 - c);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v[big] < 0) v = -v;
    model.basis.col(c) = v;
  }
  return model;
}

double eData(const TemplateCharacter& character, const PoseSequence& poses, const KeypointSequence& keypoints,
             PoseSequence* gradient) {
  checkSequence(character, poses);
  LS_CHECK(poses.size() == keypoints.frameCount(), ParameterError, "pose and keypoint frame counts differ");
  const auto& jointMap = keypoints.jointMap;
  const auto influence = gradient != nullptr ? dofInfluence(character) : std::vector<std::vector<bool>>{};
  std::vector<double> perFrame(poses.size(), 0.0);
  parallelFor(0, poses.size(), [&](std::size_t t) {
    const auto fk = forwardKinematics(character, SkeletonPose{poses[t]});
    double e = 0.0;
    for (std::size_t k = 0; k < jointMap.size(); ++k) {
      const double conf = keypoints.confidences[t][k];
      if (conf == 0.0) continue;
      const int j = jointMap[k];
      const Vec3 r = fk.jointPositions[j] - keypoints.positions[t][k];
      const double n = r.norm();
      e += conf * n;
      if (gradient == nullptr || n == 0.0) continue;
      const Vec3 u = conf * r / n;
      VecX& g = (*gradient)[t];
      for (std::size_t d = 0; d < character.dofCount(); ++d) {
        if (!influence[d][j]) continue;
        const DofMotion& m = fk.dofMotion[d];
        const Vec3 dp = m.type == DofType::kRotation ? Vec3(m.axis.cross(fk.jointPositions[j] - m.pivot)) : m.axis;
        g[d] += u.dot(dp);
      }
    }
    perFrame[t] = e;
  });
  return std::accumulate(perFrame.begin(), perFrame.end(), 0.0);
}

double eTemporal(const PoseSequence& values, const std::vector<int>& indices, PoseSequence* gradient) {
  if (values.size() < 3) return 0.0;
  const Eigen::Index dim = values.front().size();
  std::vector<int> idx = indices;
  if (idx.empty()) {
    idx.resize(dim);
    std::iota(idx.begin(), idx.end(), 0);
  }
  double e = 0.0;
  VecX diff(idx.size());
  for (std::size_t t = 1; t + 1 < values.size(); ++t) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int d = idx[i];
      diff[i] = 2.0 * values[t][d] - values[t - 1][d] - values[t + 1][d];
    }
    const double n = diff.norm();
    e += n;
    if (gradient == nullptr || n == 0.0) continue;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double u = diff[i] / n;
      const int d = idx[i];
      (*gradient)[t][d] += 2.0 * u;
      (*gradient)[t - 1][d] -= u;
      (*gradient)[t + 1][d] -= u;
    }
  }
  return e;
}

double eTemporalHand(const std::array<PoseSequence, 2>& eta, std::array<PoseSequence, 2>* gradient) {
  double e = 0.0;
  for (int h = 0; h < 2; ++h) {
    e += eTemporal(eta[h], {}, gradient != nullptr ? &(*gradient)[h] : nullptr);
  }
  return e;
}

double eDofLimit(const TemplateCharacter& character, const PoseSequence& poses, PoseSequence* gradient) {
  checkSequence(character, poses);
  double e = 0.0;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    for (std::size_t d = 0; d < character.dofCount(); ++d) {
      const double v = poses[t][d];
      const double over = v - character.dofs[d].upper;
      const double under = character.dofs[d].lower - v;
      if (over > 0.0) {
        e += over;
        if (gradient != nullptr) (*gradient)[t][d] += 1.0;
      } else if (under > 0.0) {
        e += under;
        if (gradient != nullptr) (*gradient)[t][d] -= 1.0;
      }
    }
  }
  return e;
}

double eReg(const TemplateCharacter& character, const PoseSequence& poses, PoseSequence* gradient) {
  checkSequence(character, poses);
  double e = 0.0;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    for (std::size_t d = 0; d < character.dofCount(); ++d) {
      const double r = poses[t][d] - character.dofs[d].mean;
      e += std::abs(r);
      if (gradient != nullptr && r != 0.0) (*gradient)[t][d] += r > 0.0 ? 1.0 : -1.0;
    }
  }
  return e;
}

void IkConfig::validate() const {
  LS_CHECK(!stages.empty(), ParameterError, "no IK stages configured");
  for (const auto& s : stages) {
    LS_CHECK(s.iterations >= 1, ParameterError, "stage iterations must be >= 1");
    LS_CHECK(s.wTemporal >= 0.0 && s.wReg >= 0.0 && s.wLimit >= 0.0, ParameterError, "weights must be >= 0");
  }
}

namespace {

void checkTerm(double value, const char* name) {
  LS_CHECK(std::isfinite(value), NumericError, std::string("non-finite ") + name);
}

struct TermValues {
  double data = 0, temporal = 0, limit = 0, reg = 0;
};

double combine(const TermValues& v, const IkStage& stage) {
  checkTerm(v.data, "E_data");
  checkTerm(v.temporal, "E_temporal");
  checkTerm(v.limit, "E_dof_limit");
  checkTerm(v.reg, "E_reg");
  return v.data + stage.wTemporal * v.temporal + stage.wLimit * v.limit + stage.wReg * v.reg;
}

// Stage over a subset of pose DoF shared by every frame.
IkStageReport runPoseStage(const TemplateCharacter& character, const KeypointSequence& keypoints,
                           const IkStage& stage, const std::vector<int>& dofs, bool temporal, PoseSequence& poses) {
  IkStageReport report;
  report.kind = stage.kind;
  const std::size_t T = poses.size();
  const std::size_t S = dofs.size();
  VecX x(T * S);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < S; ++i) x[t * S + i] = poses[t][dofs[i]];
  }
  PoseSequence work = poses;
  const Objective objective = [&](const VecX& xv, VecX& g) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < S; ++i) work[t][dofs[i]] = xv[t * S + i];
    }
    PoseSequence gData = zerosLike(work), gTemp = zerosLike(work), gLim = zerosLike(work), gReg = zerosLike(work);
    TermValues v;
    v.data = eData(character, work, keypoints, &gData);
    v.temporal = temporal ? eTemporal(work, dofs, &gTemp) : 0.0;
    v.limit = eDofLimit(character, work, &gLim);
    v.reg = eReg(character, work, &gReg);
    const double e = combine(v, stage);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < S; ++i) {
        const int d = dofs[i];
        g[t * S + i] = gData[t][d] + stage.wTemporal * gTemp[t][d] + stage.wLimit * gLim[t][d] + stage.wReg * gReg[t][d];
      }
    }
    return e;
  };
  LbfgsOptions opts;
  opts.maxIterations = stage.iterations;
  const auto res = minimizeLbfgs(objective, x, opts);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < S; ++i) poses[t][dofs[i]] = x[t * S + i];
  }
  report.energyBefore = res.initialCost;
  report.energyAfter = res.finalCost;
  report.iterations = res.iterations;
  report.costs = res.costs;
  return report;
}

IkStageReport runHandStage(const TemplateCharacter& character, const KeypointSequence& keypoints,
                           const IkStage& stage, const std::array<HandPcaModel, 2>& pca, PoseSequence& poses,
                           std::array<PoseSequence, 2>& eta) {
  IkStageReport report;
  report.kind = stage.kind;
  const std::size_t T = poses.size();
  std::array<int, 2> dims{};
  for (int h = 0; h < 2; ++h) {
    const auto& hd = character.handDofs[h];
    if (hd.empty()) continue;
    LS_CHECK(static_cast<std::size_t>(pca[h].mean.size()) == hd.size(), ParameterError,
             "hand PCA size does not match the character's hand DoF");
    pca[h].validate();
    dims[h] = static_cast<int>(pca[h].basis.cols());
    eta[h].assign(T, VecX::Zero(dims[h]));
    for (std::size_t t = 0; t < T; ++t) {
      VecX hv(hd.size());
      for (std::size_t i = 0; i < hd.size(); ++i) hv[i] = poses[t][hd[i]];
      eta[h][t] = pca[h].basis.transpose() * (hv - pca[h].mean);
    }
  }
  const std::size_t per = static_cast<std::size_t>(dims[0] + dims[1]);
  VecX x(T * per);
  for (std::size_t t = 0; t < T; ++t) {
    x.segment(t * per, dims[0]) = dims[0] > 0 ? eta[0][t] : VecX();
    x.segment(t * per + dims[0], dims[1]) = dims[1] > 0 ? eta[1][t] : VecX();
  }
  auto unpack = [&](const VecX& xv, PoseSequence& target, std::array<PoseSequence, 2>& e) {
    for (int h = 0; h < 2; ++h) {
      if (dims[h] == 0) continue;
      const auto& hd = character.handDofs[h];
      for (std::size_t t = 0; t < T; ++t) {
        e[h][t] = xv.segment(t * per + (h == 0 ? 0 : dims[0]), dims[h]);
        const VecX hv = pca[h].decode(e[h][t]);
        for (std::size_t i = 0; i < hd.size(); ++i) target[t][hd[i]] = hv[i];
      }
    }
  };
  PoseSequence work = poses;
  std::array<PoseSequence, 2> workEta = eta;
  const Objective objective = [&](const VecX& xv, VecX& g) {
    unpack(xv, work, workEta);
    PoseSequence gPose = zerosLike(work), gLim = zerosLike(work), gReg = zerosLike(work);
    std::array<PoseSequence, 2> gEta{zerosLike(workEta[0]), zerosLike(workEta[1])};
    TermValues v;
    v.data = eData(character, work, keypoints, &gPose);
    v.temporal = eTemporalHand(workEta, &gEta);
    v.limit = eDofLimit(character, work, &gLim);
    v.reg = eReg(character, work, &gReg);
    const double e = combine(v, stage);
    for (std::size_t t = 0; t < T; ++t) {
      gPose[t] += stage.wLimit * gLim[t] + stage.wReg * gReg[t];
      for (int h = 0; h < 2; ++h) {
        if (dims[h] == 0) continue;
        const auto& hd = character.handDofs[h];
        VecX gh(hd.size());
        for (std::size_t i = 0; i < hd.size(); ++i) gh[i] = gPose[t][hd[i]];
        g.segment(t * per + (h == 0 ? 0 : dims[0]), dims[h]) =
            pca[h].basis.transpose() * gh + stage.wTemporal * gEta[h][t];
      }
    }
    return e;
  };
  LbfgsOptions opts;
  opts.maxIterations = stage.iterations;
  const auto res = minimizeLbfgs(objective, x, opts);
  unpack(x, poses, eta);
  report.energyBefore = res.initialCost;
  report.energyAfter = res.finalCost;
  report.iterations = res.iterations;
  report.costs = res.costs;
  return report;
}

}  // namespace

IkResult solveIk(const TemplateCharacter& character, const KeypointSequence& keypoints,
                 const std::array<HandPcaModel, 2>& handPca, const IkConfig& config) {
  config.validate();
  keypoints.validate(character);
  LS_CHECK(keypoints.frameCount() >= 1, ParameterError, "need at least one frame");

  IkResult result;
  result.poses.assign(keypoints.frameCount(), character.meanPose());

  std::vector<bool> isHand(character.dofCount(), false);
  for (const auto& hand : character.handDofs) {
    for (int d : hand) isHand[d] = true;
  }
  const auto root = character.rootDofs();
  std::vector<bool> isRoot(character.dofCount(), false);
  for (int d : root) isRoot[d] = true;
  std::vector<int> body;
  for (std::size_t d = 0; d < character.dofCount(); ++d) {
    if (isHand[d]) continue;
    if (isRoot[d] && !config.bodyIncludesRoot) continue;
    body.push_back(static_cast<int>(d));
  }
  const bool hasHands = !character.handDofs[0].empty() || !character.handDofs[1].empty();

  for (const auto& stage : config.stages) {
    switch (stage.kind) {
      case IkStageKind::kGlobal:
        result.stages.push_back(
            runPoseStage(character, keypoints, stage, root, config.bodyTemporal, result.poses));
        break;
      case IkStageKind::kBody:
        result.stages.push_back(
            runPoseStage(character, keypoints, stage, body, config.bodyTemporal, result.poses));
        break;
      case IkStageKind::kHands:
        if (hasHands) {
          result.stages.push_back(runHandStage(character, keypoints, stage, handPca, result.poses, result.eta));
        }
        break;
    }
  }
  return result;
}

double mpjpe(const TemplateCharacter& character, const PoseSequence& a, const PoseSequence& b) {
  LS_CHECK(a.size() == b.size() && !a.empty(), ParameterError, "sequences must be non-empty and equally long");
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto fa = forwardKinematics(character, SkeletonPose{a[t]});
    const auto fb = forwardKinematics(character, SkeletonPose{b[t]});
    for (std::size_t j = 0; j < character.jointCount(); ++j) {
      sum += (fa.jointPositions[j] - fb.jointPositions[j]).norm();
    }
  }
  return sum / static_cast<double>(a.size() * character.jointCount());
}

}  // namespace lumisplat
