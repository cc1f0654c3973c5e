#include "safeoco/verification.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "safeoco/errors.hpp"

namespace safeoco {

NestingReport check_nesting(const TruePolytope& truth, const ConservativeSafeSet& conservative,
                            const ShrunkPolytope& shrunk, const AmbientSet& sample_box,
                            long long n_samples, Rng& rng) {
  if (n_samples < 1) throw InvalidInputError("check_nesting: need at least one sample");
  const int d = truth.dim();
  if (conservative.dim() != d || shrunk.base.dim() != d || sample_box.dim() != d)
    throw InvalidInputError("check_nesting: dimension mismatch");

  NestingReport report;
  report.samples = n_samples;
  Vector x(d);
  for (long long s = 0; s < n_samples; ++s) {
    for (int j = 0; j < d; ++j) x[j] = rng.uniform(sample_box.lower[j], sample_box.upper[j]);
    const bool in_shrunk = shrunk_contains(shrunk, x);
    const bool in_cons = conservative.contains(x);
    const bool in_true = contains(truth, sample_box, x);
    report.in_shrunk += in_shrunk;
    report.in_conservative += in_cons;
    report.in_true += in_true;
    report.violations_shrunk_not_conservative += in_shrunk && !in_cons;
    report.violations_conservative_not_true += in_cons && !in_true;
  }
  return report;
}

EigminReport check_eigmin(const MatrixRef& gram, double ridge, double gamma,
                          double sigma_zeta_sq, long long t0) {
  if (gram.rows() != gram.cols()) throw InvalidInputError("check_eigmin: matrix not square");
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if (((gram - gram.transpose()).cwiseAbs().maxCoeff()) > 1e-10 * scale)
    throw InvalidInputError("check_eigmin: matrix not symmetric");
  if (t0 < 0) throw InvalidInputError("check_eigmin: negative step count");

  EigminReport report;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  report.lambda_min = solver.eigenvalues().minCoeff();
  report.bound = ridge + 0.5 * gamma * gamma * sigma_zeta_sq * static_cast<double>(t0);
  report.holds = report.lambda_min >= report.bound;
  return report;
}

T0Bounds check_t0_conditions(double norm_bound, double gamma, double sigma_zeta_sq, int d,
                             double delta, double beta, double safety_gap) {
  if (!(norm_bound > 0.0) || !(gamma > 0.0) || !(sigma_zeta_sq > 0.0) || d < 1 ||
      !(delta > 0.0 && delta < 1.0) || !(beta >= 0.0) || !(safety_gap > 0.0))
    throw InvalidInputError("check_t0_conditions: parameters out of range");

  const double drive = gamma * gamma * sigma_zeta_sq;
  const double l2 = norm_bound * norm_bound;
  T0Bounds bounds;
  bounds.chernoff =
      static_cast<long long>(std::ceil(std::max(8.0 * l2 / drive * std::log(d / delta), 0.0)));
  bounds.theorem = static_cast<long long>(
      std::ceil(8.0 * beta * beta * l2 / (drive * safety_gap * safety_gap)));
  return bounds;
}

bool covers_truth(const RlsEstimate& est, double beta, const MatrixRef& truth) {
  if (truth.rows() != est.a_hat.rows() || truth.cols() != est.a_hat.cols())
    throw InvalidInputError("covers_truth: shape mismatch");
  if (!(beta >= 0.0)) throw InvalidInputError("covers_truth: beta must be nonnegative");
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const Vector diff = (est.a_hat.row(i) - truth.row(i)).transpose();
    // ||diff||_V = ||L^T diff|| through the stored Cholesky factor
    const double weighted =
        (est.gram_chol.transpose().triangularView<Eigen::Upper>() * diff).norm();
    if (weighted > beta) return false;
  }
  return true;
}

Vector grid_project_oracle(const std::function<bool(const Vector&)>& member, const VectorRef& z,
                           const AmbientSet& bounds, int coarse_n, int refine_n) {
  if (bounds.dim() != 2 || z.size() != 2)
    throw InvalidInputError("grid_project_oracle: only 2D supported");
  if (coarse_n < 2 || refine_n < 1)
    throw InvalidInputError("grid_project_oracle: grid sizes too small");
  if (member(z)) return z;

  const auto scan = [&](const Vector& lo, const Vector& hi, int nx, int ny, Vector& best,
                        double& best_dist, Vector* band_lo, Vector* band_hi,
                        double band_slack) {
    Vector x(2);
    for (int i = 0; i < nx; ++i) {
      x[0] = nx == 1 ? lo[0] : lo[0] + (hi[0] - lo[0]) * i / (nx - 1);
      for (int j = 0; j < ny; ++j) {
        x[1] = ny == 1 ? lo[1] : lo[1] + (hi[1] - lo[1]) * j / (ny - 1);
        const double dist = (x - z).norm();
        if (dist >= best_dist + band_slack || !member(x)) continue;
        if (dist < best_dist) {
          best = x;
          best_dist = dist;
        }
        if (band_lo != nullptr) {
          *band_lo = band_lo->cwiseMin(x);
          *band_hi = band_hi->cwiseMax(x);
        }
      }
    }
  };

  // Coarse pass tracks the bounding box of every feasible point whose distance
  // is within one cell diagonal of the incumbent.  Near a boundary the argmin
  // is ill-conditioned laterally (a shift s costs only ~s^2 in distance), so
  // refining around the single coarse winner can miss the true minimizer; the
  // near-optimal band always contains a coarse point adjacent to it.
  const Vector cell = (bounds.upper - bounds.lower) / (coarse_n - 1);
  const double diag = cell.norm();
  Vector best(2);
  double best_dist = std::numeric_limits<double>::infinity();
  Vector band_lo = bounds.upper;
  Vector band_hi = bounds.lower;
  scan(bounds.lower, bounds.upper, coarse_n, coarse_n, best, best_dist, &band_lo, &band_hi,
       diag);
  if (!std::isfinite(best_dist))
    throw InfeasibleError("grid_project_oracle: no feasible grid point", best_dist);

  // The band box can retain points that a later, better incumbent would have
  // excluded; that only widens the window.  Pad by two cells so the minimizer
  // cannot sit just outside, then refine at spacing span/(coarse_n*refine_n).
  const Vector lo = (band_lo - 2.0 * cell).cwiseMax(bounds.lower);
  const Vector hi = (band_hi + 2.0 * cell).cwiseMin(bounds.upper);
  const Vector target = (bounds.upper - bounds.lower) / (coarse_n * refine_n);
  int nx = 1 + static_cast<int>(std::ceil((hi[0] - lo[0]) / target[0]));
  int ny = 1 + static_cast<int>(std::ceil((hi[1] - lo[1]) / target[1]));
  scan(lo, hi, nx, ny, best, best_dist, nullptr, nullptr, 0.0);
  return best;
}

}  // namespace safeoco
