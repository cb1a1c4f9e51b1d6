#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mufen/tensor.hpp"

namespace mufen {

// n feature rows of dimension d, row-major. Persisted as rank-2 MUFT.
struct FeatureSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> rows;  // n * d

  double at(std::size_t i, std::size_t j) const { return rows[i * d + j]; }
  static FeatureSet from_tensor(const Tensor& t);
  Tensor to_tensor() const;
  void validate() const;
};

// Fixed-size crop centered on the (normalized) bounding box, shifted inside
// the frame when the window would cross a border. `image` is [H,W,3];
// returns [size,size,3].
Tensor crop_hand(const Tensor& image, const std::array<double, 4>& bbox,
                 std::size_t size = 299);

// Gaussian Frechet distance between the two sets' sample statistics:
//   ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2})
// with unbiased (n-1) covariances and the matrix square root taken through
// a symmetric eigendecomposition. Eigenvalues below -1e-8 raise
// NumericError; small negatives clamp to zero. Warns on stderr when n < d.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

struct KidResult {
  double mean = 0.0;
  double std = 0.0;
};

// Kernel distance: unbiased MMD^2 with the polynomial kernel
// k(x,y) = (x.y/d + 1)^3, averaged over `subsets` seeded random subsets of
// `subset_size` rows from each set (diagonal terms excluded from the self
// and cross sums, so identical subsets give exactly zero). Reports the mean
// and sample standard deviation across subsets.
KidResult kid(const FeatureSet& a, const FeatureSet& b, std::size_t subsets = 100,
              std::size_t subset_size = 0 /* 0: min(1000, n) */,
              std::uint64_t seed = 0);

// Unbiased MMD^2 between two explicit row sets (the estimator behind kid).
double mmd2_unbiased(const std::vector<double>& xa, const std::vector<double>& xb,
                     std::size_t m, std::size_t d);

struct GestureScores {
  std::vector<double> method_a;
  std::vector<double> method_b;
};

struct TTestResult {
  double t = 0.0;
  double p = 0.0;           // two-sided
  int better_count = 0;     // #{i : a[i] < b[i]}, ties are not better
};

// Paired two-sided t-test on per-gesture metric differences (lower = better).
// Throws DegenerateVarianceError when all differences are equal.
TTestResult paired_ttest(const GestureScores& scores);

// Regularized incomplete beta I_x(a, b) by continued fraction, |err| ~ 1e-12.
double incomplete_beta(double a, double b, double x);
// Two-sided Student-t tail probability with nu degrees of freedom.
double student_t_two_sided_p(double t, double nu);

}  // namespace mufen
