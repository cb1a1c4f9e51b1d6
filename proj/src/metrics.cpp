#include "mufen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <Eigen/Dense>

#include "mufen/rng.hpp"

namespace mufen {

FeatureSet FeatureSet::from_tensor(const Tensor& t) {
  if (t.rank() != 2)
    throw ShapeError("FeatureSet: expected a rank-2 tensor, got " + shape_str(t.shape()));
  FeatureSet fs;
  fs.n = t.shape()[0];
  fs.d = t.shape()[1];
  fs.rows = t.values();
  fs.validate();
  return fs;
}

Tensor FeatureSet::to_tensor() const { return Tensor::from_data({n, d}, rows); }

void FeatureSet::validate() const {
  require(n >= 1 && d >= 1, "feature set must be non-empty");
  require(rows.size() == n * d, "feature set row buffer size mismatch");
  for (double v : rows) require_finite(v, "feature value");
}

Tensor crop_hand(const Tensor& image, const std::array<double, 4>& bbox,
                 std::size_t size) {
  if (image.rank() != 3 || image.shape()[2] != 3)
    throw ShapeError("crop_hand: expected an [H,W,3] image, got " +
                     shape_str(image.shape()));
  const std::size_t h = image.shape()[0], w = image.shape()[1];
  if (h < size || w < size)
    throw ValidationError("crop_hand: image " + shape_str(image.shape()) +
                          " is smaller than the " + std::to_string(size) + " crop");
  require(bbox[0] < bbox[2] && bbox[1] < bbox[3], "crop_hand: invalid bbox corners");

  // Window start = floor(center - size/2), shifted minimally inside.
  auto start = [&](double c0, double c1, std::size_t dim) {
    const double center = 0.5 * (c0 + c1) * static_cast<double>(dim);
    const auto lo = static_cast<std::ptrdiff_t>(
        std::floor(center - static_cast<double>(size) / 2.0));
    const std::ptrdiff_t max_lo = static_cast<std::ptrdiff_t>(dim - size);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(lo, 0, max_lo));
  };
  const std::size_t x0 = start(bbox[0], bbox[2], w);
  const std::size_t y0 = start(bbox[1], bbox[3], h);

  std::vector<double> out(size * size * 3);
  const auto& src = image.values();
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out[(y * size + x) * 3 + c] = src[((y0 + y) * w + (x0 + x)) * 3 + c];
  return Tensor::from_data({size, size, 3}, std::move(out));
}

namespace {

Eigen::VectorXd set_mean(const FeatureSet& s) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.d));
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.d; ++j)
      mu[static_cast<Eigen::Index>(j)] += s.at(i, j);
  return mu / static_cast<double>(s.n);
}

Eigen::MatrixXd set_covariance(const FeatureSet& s, const Eigen::VectorXd& mu) {
  const auto d = static_cast<Eigen::Index>(s.d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd row(d);
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < s.d; ++j)
      row[static_cast<Eigen::Index>(j)] = s.at(i, j) - mu[static_cast<Eigen::Index>(j)];
    cov.noalias() += row * row.transpose();
  }
  return cov / static_cast<double>(s.n - 1);  // unbiased estimator
}

// Symmetric PSD square root via eigendecomposition.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8)
      throw NumericError(std::string(what) + ": eigenvalue " + std::to_string(ev[i]) +
                         " below the PSD tolerance");
    ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  a.validate();
  b.validate();
  if (a.d != b.d)
    throw ShapeError("frechet_distance: feature dims " + std::to_string(a.d) + " and " +
                     std::to_string(b.d) + " differ");
  require(a.n >= 2 && b.n >= 2, "frechet_distance needs at least 2 rows per set");
  if (a.n < a.d || b.n < b.d)
    std::cerr << "warning: frechet_distance with fewer rows than dimensions; "
                 "covariance estimates are rank-deficient\n";

  const Eigen::VectorXd mu_a = set_mean(a), mu_b = set_mean(b);
  const Eigen::MatrixXd cov_a = set_covariance(a, mu_a);
  const Eigen::MatrixXd cov_b = set_covariance(b, mu_b);

  // Tr((Sa Sb)^{1/2}) through the symmetric product sqrt(Sa) Sb sqrt(Sa),
  // which shares its eigenvalues with Sa Sb.
  const Eigen::MatrixXd root_a = sqrt_psd(cov_a, "frechet_distance: cov_a");
  const Eigen::MatrixXd inner = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev < -1e-8)
      throw NumericError("frechet_distance: cross product eigenvalue " +
                         std::to_string(ev) + " below the PSD tolerance");
    trace_sqrt += ev > 0.0 ? std::sqrt(ev) : 0.0;
  }

  const double dist = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() -
                      2.0 * trace_sqrt;
  return std::max(0.0, dist);
}

namespace {

double poly_kernel(const double* x, const double* y, std::size_t d) {
  double dot = 0.0;
  for (std::size_t j = 0; j < d; ++j) dot += x[j] * y[j];
  const double v = dot / static_cast<double>(d) + 1.0;
  return v * v * v;
}

}  // namespace

double mmd2_unbiased(const std::vector<double>& xa, const std::vector<double>& xb,
                     std::size_t m, std::size_t d) {
  require(m >= 2, "mmd2 needs at least 2 rows per subset");
  double sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;  // diagonal excluded from every term
      sum_aa += poly_kernel(&xa[i * d], &xa[j * d], d);
      sum_bb += poly_kernel(&xb[i * d], &xb[j * d], d);
      sum_ab += poly_kernel(&xa[i * d], &xb[j * d], d);
    }
  const double norm = static_cast<double>(m) * (static_cast<double>(m) - 1.0);
  return (sum_aa + sum_bb - 2.0 * sum_ab) / norm;
}

KidResult kid(const FeatureSet& a, const FeatureSet& b, std::size_t subsets,
              std::size_t subset_size, std::uint64_t seed) {
  a.validate();
  b.validate();
  if (a.d != b.d)
    throw ShapeError("kid: feature dims " + std::to_string(a.d) + " and " +
                     std::to_string(b.d) + " differ");
  require(subsets >= 1, "kid needs at least one subset");
  const std::size_t n = std::min(a.n, b.n);
  if (subset_size == 0) subset_size = std::min<std::size_t>(1000, n);
  if (subset_size > n)
    throw ValidationError("kid: subset size " + std::to_string(subset_size) +
                          " exceeds the smaller set size " + std::to_string(n));
  require(subset_size >= 2, "kid subset size must be >= 2");

  Rng rng(substream_seed(seed, "kid"));
  std::vector<double> estimates(subsets);
  std::vector<double> xa(subset_size * a.d), xb(subset_size * b.d);
  for (std::size_t s = 0; s < subsets; ++s) {
    const auto ia = rng.sample_without_replacement(a.n, subset_size);
    const auto ib = rng.sample_without_replacement(b.n, subset_size);
    for (std::size_t i = 0; i < subset_size; ++i) {
      std::copy_n(&a.rows[ia[i] * a.d], a.d, &xa[i * a.d]);
      std::copy_n(&b.rows[ib[i] * b.d], b.d, &xb[i * b.d]);
    }
    estimates[s] = mmd2_unbiased(xa, xb, subset_size, a.d);
  }

  KidResult result;
  for (double e : estimates) result.mean += e;
  result.mean /= static_cast<double>(subsets);
  if (subsets > 1) {
    double ss = 0.0;
    for (double e : estimates) ss += (e - result.mean) * (e - result.mean);
    result.std = std::sqrt(ss / static_cast<double>(subsets - 1));
  }
  return result;
}

double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete_beta requires positive parameters");
  require(x >= 0.0 && x <= 1.0, "incomplete_beta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  // Symmetry keeps the continued fraction in its fast-convergence region.
  if (x > (a + 1.0) / (a + b + 2.0))
    return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double log_prefix = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
  // Modified Lentz evaluation of the standard continued fraction.
  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 500; ++m) {
    const double dm = static_cast<double>(m);
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= d * c;
    num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-14) break;
  }
  return std::exp(log_prefix) * f / a;
}

double student_t_two_sided_p(double t, double nu) {
  require(nu > 0.0, "degrees of freedom must be positive");
  const double x = nu / (nu + t * t);
  return incomplete_beta(nu / 2.0, 0.5, x);
}

TTestResult paired_ttest(const GestureScores& scores) {
  const std::size_t n = scores.method_a.size();
  if (scores.method_b.size() != n)
    throw ShapeError("paired_ttest: score lists have different lengths");
  require(n >= 2, "paired_ttest needs at least 2 paired scores");
  for (double v : scores.method_a) require_finite(v, "score");
  for (double v : scores.method_b) require_finite(v, "score");

  double mean_d = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    mean_d += scores.method_a[i] - scores.method_b[i];
  mean_d /= static_cast<double>(n);

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = scores.method_a[i] - scores.method_b[i] - mean_d;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var <= 0.0)
    throw DegenerateVarianceError(
        "degenerate-variance: paired differences have zero variance");

  TTestResult result;
  result.t = mean_d / (std::sqrt(var) / std::sqrt(static_cast<double>(n)));
  result.p = student_t_two_sided_p(result.t, static_cast<double>(n - 1));
  for (std::size_t i = 0; i < n; ++i)
    if (scores.method_a[i] < scores.method_b[i]) ++result.better_count;
  return result;
}

}  // namespace mufen
