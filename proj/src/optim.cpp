#include "lumisplat/optim.h"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <cmath>
#include <exception>

namespace lumisplat {

namespace {

class CeresAdapter final : public ceres::FirstOrderFunction {
 public:
  CeresAdapter(const Objective& objective, int n) : objective_(objective), n_(n) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const VecX x = Eigen::Map<const VecX>(parameters, n_);
    VecX g = VecX::Zero(n_);
    double f = 0.0;
    try {
      f = objective_(x, g);
    } catch (...) {
      if (!error_) error_ = std::current_exception();
      return false;
    }
    if (!std::isfinite(f) || !g.allFinite()) {
      nonFinite_ = true;
      return false;
    }
    *cost = f;
    if (gradient != nullptr) {
      Eigen::Map<VecX>(gradient, n_) = g;
    }
    return true;
  }

  int NumParameters() const override { return n_; }
  bool sawNonFinite() const { return nonFinite_; }
  std::exception_ptr error() const { return error_; }

 private:
  const Objective& objective_;
  int n_;
  mutable bool nonFinite_ = false;
  mutable std::exception_ptr error_;
};

}  // namespace

MinimizeResult minimizeLbfgs(const Objective& objective, VecX& x, const LbfgsOptions& options) {
  LS_CHECK(options.maxIterations >= 1, ParameterError, "iterations must be >= 1");
  MinimizeResult result;
  if (x.size() == 0) {
    VecX g;
    result.initialCost = result.finalCost = objective(x, g);
    result.costs = {result.initialCost};
    return result;
  }

  auto* adapter = new CeresAdapter(objective, static_cast<int>(x.size()));
  ceres::GradientProblem problem(adapter);  // takes ownership
  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.line_search_type = ceres::WOLFE;
  opts.max_lbfgs_rank = options.memory;
  opts.max_num_iterations = options.maxIterations;
  opts.function_tolerance = options.functionTolerance;
  opts.gradient_tolerance = options.gradientTolerance;
  opts.parameter_tolerance = options.parameterTolerance;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;

  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(opts, problem, x.data(), &summary);
  if (adapter->error()) std::rethrow_exception(adapter->error());
  LS_CHECK(!adapter->sawNonFinite(), NumericError, "objective became non-finite");
  LS_CHECK(summary.termination_type != ceres::FAILURE || !summary.iterations.empty(), NumericError,
           "minimization failed: " + summary.message);

  result.initialCost = summary.initial_cost;
  result.finalCost = summary.final_cost;
  result.iterations = static_cast<int>(summary.iterations.size()) - 1;
  for (const auto& it : summary.iterations) {
    result.costs.push_back(it.cost);
  }
  result.termination = summary.message;
  return result;
}

MinimizeResult minimizeAdam(const Objective& objective, VecX& x, const AdamOptions& options) {
  LS_CHECK(options.steps >= 1, ParameterError, "steps must be >= 1");
  LS_CHECK(options.learningRate > 0.0, ParameterError, "learning rate must be positive");
  MinimizeResult result;
  VecX g = VecX::Zero(x.size());
  double f = objective(x, g);
  LS_CHECK(std::isfinite(f) && g.allFinite(), NumericError, "objective is non-finite at the start");
  result.initialCost = f;
  result.costs.push_back(f);

  VecX m = VecX::Zero(x.size());
  VecX v = VecX::Zero(x.size());
  VecX best = x;
  double bestCost = f;
  double scale = 1.0;
  int t = 0;
  VecX trialGrad(x.size());
  for (int step = 0; step < options.steps; ++step) {
    double lr = options.learningRate;
    if (options.finalLearningRate > 0.0) {
      const double phase = options.steps > 1 ? static_cast<double>(step) / (options.steps - 1) : 1.0;
      lr = options.finalLearningRate +
           0.5 * (options.learningRate - options.finalLearningRate) * (1.0 + std::cos(M_PI * phase));
    }
    lr *= scale;
    const VecX mNext = options.beta1 * m + (1.0 - options.beta1) * g;
    const VecX vNext = options.beta2 * v + (1.0 - options.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options.beta1, t + 1);
    const double c2 = 1.0 - std::pow(options.beta2, t + 1);
    VecX trial = x - lr * ((mNext / c1).array() / ((vNext / c2).array().sqrt() + options.epsilon)).matrix();
    if (options.project) options.project(trial);
    trialGrad.setZero();
    const double fTrial = objective(trial, trialGrad);
    LS_CHECK(std::isfinite(fTrial) && trialGrad.allFinite(), NumericError,
             "objective became non-finite at step " + std::to_string(step));
    if (options.rejectIncreases && fTrial > f) {
      scale *= 0.5;
      continue;
    }
    x = trial;
    f = fTrial;
    g = trialGrad;
    m = mNext;
    v = vNext;
    ++t;
    if (f < bestCost) {
      bestCost = f;
      best = x;
      result.costs.push_back(f);
    }
  }
  x = best;
  result.finalCost = bestCost;
  result.iterations = static_cast<int>(result.costs.size()) - 1;
  result.termination = "completed " + std::to_string(options.steps) + " steps";
  return result;
}

VecX finiteDifferenceGradient(const std::function<double(const VecX&)>& f, const VecX& x, double step) {
  VecX g(x.size());
  VecX probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double hi = f(probe);
    probe[i] = x[i] - step;
    const double lo = f(probe);
    probe[i] = x[i];
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

}  // namespace lumisplat
