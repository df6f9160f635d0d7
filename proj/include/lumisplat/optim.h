#pragma once

#include "lumisplat/common.h"

#include <functional>
#include <string>
#include <vector>

namespace lumisplat {

/// Objective returning f(x) and writing the gradient. Returning a non-finite value aborts.
using Objective = std::function<double(const VecX& x, VecX& gradient)>;

struct LbfgsOptions {
  int maxIterations = 100;
  int memory = 10;
  double functionTolerance = 1e-14;
  double gradientTolerance = 1e-14;
  double parameterTolerance = 1e-14;
};

struct MinimizeResult {
  double initialCost = 0.0;
  double finalCost = 0.0;
  int iterations = 0;
  std::vector<double> costs;  // cost after every accepted iteration, starting with the initial one
  std::string termination;
};

/// Quasi-Newton minimization with a Wolfe line search; only descending steps are accepted.
MinimizeResult minimizeLbfgs(const Objective& objective, VecX& x, const LbfgsOptions& options = {});

struct AdamOptions {
  int steps = 1000;
  double learningRate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Cosine annealing from learningRate down to this value; <= 0 keeps the rate constant.
  double finalLearningRate = 1e-5;
  // Roll back any step that raises the objective and halve the rate. Off by default:
  // on L1 losses it stalls the moment estimates.
  bool rejectIncreases = false;
  // Applied to every trial point, e.g. to clamp into a box.
  std::function<void(VecX&)> project;
};

/// Returns the best iterate seen; `costs` lists each new best (so it is monotone).
MinimizeResult minimizeAdam(const Objective& objective, VecX& x, const AdamOptions& options = {});

/// Central finite-difference gradient, for checks.
VecX finiteDifferenceGradient(const std::function<double(const VecX&)>& f, const VecX& x, double step = 1e-5);

}  // namespace lumisplat
