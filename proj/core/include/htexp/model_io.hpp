#pragma once

#include <string>

#include "htexp/discrete.hpp"
#include "htexp/linalg.hpp"

namespace htexp {

// Gaussian model file: {"m": int, "q": int, "K": [...], "Kbar": [...]},
// covariances flattened row-major with (m+q)^2 entries. Parse and shape
// problems raise ParseError with the offending file and field; the numeric
// validity checks are the model's own (symmetry, positive semidefiniteness).
JointGaussianModel load_gaussian_model(const std::string& path);

// Serialization used by both save_gaussian_model and the CLI, so files
// round-trip byte-identically: two-space indent, keys in the order
// m, q, K, Kbar, trailing newline.
std::string gaussian_model_to_json(const JointGaussianModel& model);

void save_gaussian_model(const JointGaussianModel& model, const std::string& path);

// Discrete model file:
//   {"alphabet": [nx, nu, nv],
//    "P": [...],                       // (x * nu + u) * nv + v, row-major
//    "Pbar_factors": {"PU": [...], "PX_given_U": [...], "PV_given_U": [...]}}
// with the factor layouts of DiscreteJointModel::create.
DiscreteJointModel load_discrete_model(const std::string& path);

}  // namespace htexp
