#pragma once

namespace htexp {

// Convergence summary attached to every iterative-solver result.
//
// final_gradient_norm holds the solver's first-order optimality residual:
// the gradient norm for descent methods, the |f1 - f2| crossing residual for
// the scalar bisection, and the primal-dual gap certificate for the max-min
// solver. Converged status always implies residual <= 1e-7.
struct OptimizerReport {
  enum class Status { Converged, MaxIters, Degenerate };

  int iterations = 0;
  double final_gradient_norm = 0.0;
  Status status = Status::Converged;
};

inline const char* to_string(OptimizerReport::Status s) {
  switch (s) {
    case OptimizerReport::Status::Converged: return "converged";
    case OptimizerReport::Status::MaxIters: return "max_iters";
    case OptimizerReport::Status::Degenerate: return "degenerate";
  }
  return "unknown";
}

}  // namespace htexp
