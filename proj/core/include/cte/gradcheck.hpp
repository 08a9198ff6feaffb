#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cte/grid.hpp"

namespace cte {

/// Central finite differences of a scalar function over a dense map.
DenseMap finite_difference_grad(const std::function<double(const DenseMap&)>& f,
                                const DenseMap& x, double step = 1e-5);

/// max over elements of |a-b| / max(|a|, |b|, floor).
double max_relative_error(const DenseMap& a, const DenseMap& b, double floor = 1e-3);

struct CheckReport {
  bool passed = true;
  double worst = 0.0;  // worst relative error / deviation seen
  int checks = 0;
  double seconds = 0.0;
  std::vector<std::string> failures;
};

/// Finite-difference verification of the focal loss, the sparse L1 variants
/// (size, displacement, box regression) and the total-loss gradients on
/// random 8x8 instances. Passing means relative error < tol everywhere.
CheckReport run_loss_gradient_suite(int instances = 20, std::uint64_t seed = 1234,
                                    double tol = 1e-4);

/// Attention invariants: convex-combination bounds of scaled dot attention,
/// SRA r=1 bit-equality, deformable weight normalization and constant-memory
/// degeneracy, TQSA permutation equivariance, Single-mode decoder identity.
CheckReport run_attention_invariant_suite(std::uint64_t seed = 99);

}  // namespace cte
