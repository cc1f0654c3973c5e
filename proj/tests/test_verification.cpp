#include <cmath>

#include "doctest.h"
#include "safeoco/errors.hpp"
#include "safeoco/harness.hpp"
#include "safeoco/sopgd.hpp"
#include "safeoco/verification.hpp"

using namespace safeoco;

namespace {

RlsEstimate identity_estimate(Matrix a_hat, double gram_scale = 1.0) {
  RlsEstimate est;
  const int d = static_cast<int>(a_hat.cols());
  est.a_hat = std::move(a_hat);
  est.gram = gram_scale * Matrix::Identity(d, d);
  est.gram_chol = std::sqrt(gram_scale) * Matrix::Identity(d, d);
  est.ridge = gram_scale;
  return est;
}

}  // namespace

TEST_CASE("eigenvalue check evaluates the exploration lower bound") {
  Matrix gram(2, 2);
  gram << 5.0, 1.0, 1.0, 3.0;
  // eigenvalues 4 +- sqrt(2)
  const EigminReport r = check_eigmin(gram, 0.5, 0.8, 0.5, 10);
  CHECK(r.lambda_min == doctest::Approx(4.0 - std::sqrt(2.0)).epsilon(1e-12));
  CHECK(r.bound == doctest::Approx(0.5 + 0.5 * 0.64 * 0.5 * 10).epsilon(1e-14));
  CHECK(r.holds == (r.lambda_min >= r.bound));
  CHECK(r.holds);

  const EigminReport tight = check_eigmin(gram, 0.5, 1.0, 1.0, 10);  // bound 5.5
  CHECK_FALSE(tight.holds);

  CHECK_THROWS_AS(check_eigmin(Matrix::Ones(2, 3), 0.5, 0.5, 0.5, 10), InvalidInputError);
  Matrix asym(2, 2);
  asym << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(check_eigmin(asym, 0.5, 0.5, 0.5, 10), InvalidInputError);
  CHECK_THROWS_AS(check_eigmin(gram, 0.5, 0.5, 0.5, -1), InvalidInputError);
}

TEST_CASE("explore-length conditions match the resolved tuning thresholds") {
  const ExperimentSpec spec = preset_box();
  Environment env = make_environment(spec, 1);
  const Scenario scenario = make_scenario(spec, 1);
  const Tuning tn = resolve_tuning(spec.run, env, scenario);

  // an independent evaluation of the same two formulas must agree
  const T0Bounds bounds =
      check_t0_conditions(tn.norm_bound, tn.gamma, tn.sigma_zeta_sq, env.dim(), tn.delta,
                          tn.beta_horizon, env.baseline().safety_gap);
  CHECK(bounds.chernoff == tn.t0_min_chernoff);
  CHECK(bounds.theorem == tn.t0_min_theorem);
  CHECK(bounds.chernoff == 2190);
  CHECK(bounds.theorem == 62);

  // a huge baseline gap needs essentially no exploration accuracy
  const T0Bounds easy = check_t0_conditions(3.0, 0.9, 0.5, 2, 1e-3, 1.0, 1e9);
  CHECK(easy.theorem <= 1);

  // doubling beta quadruples the theorem threshold
  const T0Bounds b1 = check_t0_conditions(3.0, 0.9, 0.5, 2, 1e-3, 2.0, 0.5);
  const T0Bounds b2 = check_t0_conditions(3.0, 0.9, 0.5, 2, 1e-3, 4.0, 0.5);
  const double ratio = static_cast<double>(b2.theorem) / static_cast<double>(b1.theorem);
  CHECK(ratio == doctest::Approx(4.0).epsilon(1e-3));

  CHECK_THROWS_AS(check_t0_conditions(3.0, 0.0, 0.5, 2, 1e-3, 1.0, 0.5), InvalidInputError);
  CHECK_THROWS_AS(check_t0_conditions(3.0, 0.9, 0.5, 2, 2.0, 1.0, 0.5), InvalidInputError);
}

TEST_CASE("coverage test measures ellipsoid membership of the true rows") {
  Matrix truth(2, 2);
  truth << 1.0, 0.0, 0.0, 1.0;

  // exact estimate: covered at any radius
  CHECK(covers_truth(identity_estimate(truth), 0.0, truth));
  CHECK(covers_truth(identity_estimate(truth), 0.5, truth));

  // estimate off by 0.1 in one row with V = I: needs beta >= 0.1
  Matrix off = truth;
  off(0, 0) = 1.1;
  CHECK_FALSE(covers_truth(identity_estimate(off), 0.09, truth));
  CHECK(covers_truth(identity_estimate(off), 0.11, truth));

  // the metric is the Gram norm: scaling V by 4 doubles the distance
  CHECK_FALSE(covers_truth(identity_estimate(off, 4.0), 0.19, truth));
  CHECK(covers_truth(identity_estimate(off, 4.0), 0.21, truth));

  CHECK_THROWS_AS(covers_truth(identity_estimate(truth), 0.5, Matrix::Ones(3, 2)),
                  InvalidInputError);
}

TEST_CASE("nesting check accepts a constructed correct sandwich") {
  // truth |x_i| <= 3; exact rows with margin beta and V = I; the shrunk set
  // pulled in by beta * L contains no point outside the conservative set
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  const TruePolytope truth(A, Vector::Constant(4, 3.0));
  const AmbientSet box(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));
  const double beta = 0.25;
  const ConservativeSafeSet cons(identity_estimate(A), beta, truth.b, box);
  const ShrunkPolytope shrunk(truth, beta * box.norm_bound);

  Rng rng(31);
  NestingReport r = check_nesting(truth, cons, shrunk, box, 20000, rng);
  CHECK(r.samples == 20000);
  CHECK(r.violations_shrunk_not_conservative == 0);
  CHECK(r.violations_conservative_not_true == 0);
  CHECK(r.in_shrunk > 0);
  CHECK(r.in_conservative >= r.in_shrunk);
  CHECK(r.in_true >= r.in_conservative);
  CHECK(r.in_true == 20000);  // sampling box equals the true box here
}

TEST_CASE("nesting check counts escapes of an overconfident set") {
  // rows shrunk to 60%: the estimated polytope believes the boundary sits at
  // x = 5, far outside the truth at x = 3
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  const TruePolytope truth(A, Vector::Constant(4, 3.0));
  const AmbientSet window(Vector::Constant(2, -5.0), Vector::Constant(2, 5.0));
  const ConservativeSafeSet naive(identity_estimate(0.6 * A), 0.0, truth.b, window);
  const ShrunkPolytope shrunk(truth, 0.1);

  Rng rng(32);
  const NestingReport r = check_nesting(truth, naive, shrunk, window, 20000, rng);
  CHECK(r.violations_conservative_not_true > 0);
}

TEST_CASE("grid oracle projects onto sampled membership within resolution") {
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  const TruePolytope truth(A, Vector::Constant(4, 2.0));
  const AmbientSet window(Vector::Constant(2, -4.0), Vector::Constant(2, 4.0));
  const auto member = [&](const Vector& x) { return contains(truth, window, x); };

  Vector z(2);
  z << 3.5, 0.5;
  const Vector p = grid_project_oracle(member, z, window, 100, 50);
  // true projection is (2, 0.5); final spacing is 8/(100*50) = 1.6e-3
  CHECK(std::abs(p[0] - 2.0) <= 2e-3);
  CHECK(std::abs(p[1] - 0.5) <= 2e-3);
  CHECK(member(p));

  // a membership test that never accepts reports infeasibility
  const auto nothing = [](const Vector&) { return false; };
  CHECK_THROWS_AS(grid_project_oracle(nothing, z, window, 20, 10), InfeasibleError);

  // only two dimensions are supported
  const AmbientSet w3(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0));
  const auto yes = [](const Vector&) { return true; };
  CHECK_THROWS_AS(grid_project_oracle(yes, Vector::Zero(3), w3, 10, 10), InvalidInputError);
}

TEST_CASE("measured exploration fits pass coverage and the eigenvalue bound") {
  // a small Monte Carlo pass over real exploration runs; the acceptance
  // suite repeats this at the full statistical scale
  const ExperimentSpec spec = preset_box();
  Environment probe = make_environment(spec, 1);
  const TruePolytope& truth = probe.true_polytope();
  const double la = truth.max_row_norm();
  const long long t0 = 600;
  const double beta = confidence_radius(spec.noise_std, 2, t0, probe.ambient().norm_bound,
                                        spec.run.ridge, spec.run.delta, truth.rows(), la);
  int coverage = 0, eig_ok = 0;
  for (int k = 0; k < 25; ++k) {
    Environment env = make_environment(spec, 100 + k);
    const double gamma = resolve_gamma(env.baseline(), truth.b, la, 1.0, env.ambient());
    const ExplorationLog log = run_exploration(env, t0, gamma, 1.0, 100 + k);
    const RlsEstimate est = fit_rls(log, spec.run.ridge);
    coverage += covers_truth(est, beta, truth.A);
    eig_ok += check_eigmin(est.gram, spec.run.ridge, gamma, 0.5, t0).holds;
  }
  CHECK(coverage == 25);
  CHECK(eig_ok == 25);
}
