#include <cmath>

#include "doctest.h"
#include "safeoco/errors.hpp"
#include "safeoco/estimation.hpp"
#include "safeoco/exploration.hpp"
#include "safeoco/projection.hpp"
#include "safeoco/rng.hpp"
#include "safeoco/verification.hpp"

using namespace safeoco;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

TruePolytope box_polytope(double c = 3.0) {
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  return TruePolytope(A, Vector::Constant(4, c));
}

AmbientSet wide_box(double c = 5.0) {
  return AmbientSet(Vector::Constant(2, -c), Vector::Constant(2, c));
}

ProjectionOptions tight() {
  ProjectionOptions opt;
  opt.eps_opt = 1e-12;
  return opt;
}

// an exact-row conservative set (identity Gram) for projection tests
ConservativeSafeSet exact_set(const TruePolytope& p, double beta, const AmbientSet& box) {
  RlsEstimate est;
  est.a_hat = p.A;
  est.gram = Matrix::Identity(p.dim(), p.dim());
  est.gram_chol = Matrix::Identity(p.dim(), p.dim());
  est.ridge = 1.0;
  return ConservativeSafeSet(std::move(est), beta, p.b, box);
}

}  // namespace

TEST_CASE("projection onto a box polytope clips to the nearest corner") {
  const ProjectionResult r = project_polytope(box_polytope(), wide_box(), vec2(5.0, 5.0), tight());
  CHECK(r.point[0] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(r.point[1] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(r.feasibility_slack <= 0.0);

  const ProjectionResult e = project_polytope(box_polytope(), wide_box(), vec2(4.0, 1.0), tight());
  CHECK(e.point[0] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(e.point[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("projection onto a half space lands on the hyperplane") {
  Matrix A(1, 2);
  A << 1, 0;
  const TruePolytope half(A, Vector::Constant(1, 1.0));
  const ProjectionResult r = project_polytope(half, wide_box(), vec2(2.0, 0.5), tight());
  CHECK(r.point[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.point[1] == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("projection onto the simplex bisects a symmetric exterior point") {
  Matrix A(3, 2);
  A << 1, 1, -1, 0, 0, -1;
  Vector b(3);
  b << 1, 0, 0;
  const TruePolytope tri(A, b);
  const AmbientSet unit(Vector::Constant(2, 0.0), Vector::Constant(2, 1.0));
  const ProjectionResult r = project_polytope(tri, unit, vec2(1.0, 1.0), tight());
  CHECK(r.point[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(r.point[1] == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("interior points project to themselves exactly") {
  const Vector z = vec2(0.5, -1.25);
  const ProjectionResult r = project_polytope(box_polytope(), wide_box(), z, tight());
  CHECK((r.point - z).norm() == 0.0);  // bitwise: the solver takes the identity path
  CHECK(r.iterations == 0);
  CHECK(r.objective_gap == 0.0);

  // same through the conservative interface with a real margin
  const ConservativeSafeSet set = exact_set(box_polytope(), 0.25, wide_box());
  const ProjectionResult c = project_conservative(set, vec2(0.25, 0.0), tight());
  CHECK((c.point - vec2(0.25, 0.0)).norm() == 0.0);
}

TEST_CASE("margin tightening moves the projection inward") {
  // {x1 + 0.5||x|| <= 3}: along e1 the boundary sits at x1 = 2
  const ConservativeSafeSet set = exact_set(box_polytope(), 0.5, wide_box());
  const ProjectionResult r = project_conservative(set, vec2(5.0, 0.0), tight());
  CHECK(r.point[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(std::abs(r.point[1]) < 1e-5);
  CHECK(set.contains(r.point));
}

TEST_CASE("projection agrees with the grid oracle on random instances") {
  Rng rng(314);
  const AmbientSet window = wide_box(3.5);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix A(3, 2);
    for (int i = 0; i < 3; ++i) {
      const Vector row = sample_perturbation(rng, 2, 1.0);
      A.row(i) = row.transpose();
    }
    Vector b(3);
    for (int i = 0; i < 3; ++i) b[i] = rng.uniform(0.5, 2.5);
    RlsEstimate est;
    est.a_hat = A;
    const double scale = rng.uniform(1.0, 50.0);
    est.gram = scale * Matrix::Identity(2, 2);
    est.gram_chol = std::sqrt(scale) * Matrix::Identity(2, 2);
    est.ridge = scale;
    const ConservativeSafeSet set(est, rng.uniform(0.0, 1.0), b, window);

    const Vector z = vec2(rng.uniform(-3.5, 3.5), rng.uniform(-3.5, 3.5));
    ProjectionOptions opt;
    opt.eps_opt = 1e-10;
    Vector solved;
    try {
      solved = project_conservative(set, z, opt).point;
    } catch (const InfeasibleError&) {
      continue;  // rare: rows with no interior in the window
    }
    const auto member = [&](const Vector& x) { return set.contains(x); };
    const Vector gridded = grid_project_oracle(member, z, window, 120, 60);
    // Compare the distances the two methods report, not the argmin positions:
    // near the boundary a lateral shift s changes the distance only by
    // ~s^2/(2 dist), so grid argmin positions wander by sqrt(dist * spacing)
    // while the minimized value itself is accurate to the fine resolution.
    const double resolution = std::sqrt(2.0) * 7.0 / (120.0 * 60.0);
    const double solved_dist = (solved - z).norm();
    const double gridded_dist = (gridded - z).norm();
    CHECK(member(solved));
    CHECK(solved_dist <= gridded_dist + 1e-6);
    CHECK(std::abs(solved_dist - gridded_dist) <= 1e-4 + 2.0 * resolution);
  }
}

TEST_CASE("projection is non-expansive and idempotent") {
  const ConservativeSafeSet set = exact_set(box_polytope(), 0.3, wide_box());
  Rng rng(2718);
  for (int i = 0; i < 200; ++i) {
    const Vector z1 = vec2(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    const Vector z2 = vec2(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    const Vector p1 = project_conservative(set, z1, tight()).point;
    const Vector p2 = project_conservative(set, z2, tight()).point;
    CHECK((p1 - p2).norm() <= (z1 - z2).norm() + 1e-5);
    const Vector pp = project_conservative(set, p1, tight()).point;
    CHECK((pp - p1).norm() <= 1e-5);
  }
}

TEST_CASE("the projection satisfies the obtuse angle inequality") {
  const ConservativeSafeSet set = exact_set(box_polytope(), 0.2, wide_box());
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const Vector z = vec2(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    const Vector p = project_conservative(set, z, tight()).point;
    // any feasible y sees the displacement at an obtuse angle
    Vector y = vec2(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    y *= 0.5;  // comfortably inside
    if (!set.contains(y)) continue;
    CHECK((z - p).dot(y - p) <= 1e-6);
  }
}

TEST_CASE("an empty tightened set reports infeasibility") {
  // beta large enough that a_hat x + beta||x||_{V^-1} <= -1 has no solution
  Matrix A(1, 2);
  A << 1, 0;
  const TruePolytope p(A, Vector::Constant(1, -1.0));
  const ConservativeSafeSet set = exact_set(p, 10.0, wide_box(0.5));
  CHECK_THROWS_AS(project_conservative(set, vec2(0.0, 0.0), tight()), InfeasibleError);
}

TEST_CASE("warm starts do not change the answer") {
  const ConservativeSafeSet set = exact_set(box_polytope(), 0.4, wide_box());
  const Vector z = vec2(4.0, -4.0);
  const Vector cold = project_conservative(set, z, tight()).point;
  Vector hint = vec2(0.1, 0.1);
  ProjectionOptions opt = tight();
  opt.warm_start = &hint;
  const Vector warm = project_conservative(set, z, opt).point;
  CHECK((cold - warm).norm() <= 2e-5);
}

TEST_CASE("hindsight optimum of a linear objective sits at a vertex") {
  ConvexObjective obj;
  Vector c(2);
  c << 1.0, 2.0;
  obj.linear_coefficients = c;
  obj.value = [c](const Vector& x) { return c.dot(x); };
  obj.gradient = [c](const Vector&) { return c; };
  const Vector x = hindsight_optimum(obj, box_polytope(), wide_box(), 1e-10);
  CHECK(x.isApprox(vec2(-3.0, -3.0), 1e-12));
}

TEST_CASE("hindsight optimum of a quadratic is its projected center") {
  Vector target(2);
  target << 5.0, 1.0;
  ConvexObjective obj;
  obj.smoothness = 1.0;
  obj.value = [target](const Vector& x) { return 0.5 * (x - target).squaredNorm(); };
  obj.gradient = [target](const Vector& x) { return Vector(x - target); };
  const Vector x = hindsight_optimum(obj, box_polytope(), wide_box(), 1e-10);
  CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-5));

  // interior minimizer: recovered to solver precision
  Vector inner(2);
  inner << 0.5, -0.75;
  ConvexObjective obj2;
  obj2.smoothness = 1.0;
  obj2.value = [inner](const Vector& x) { return 0.5 * (x - inner).squaredNorm(); };
  obj2.gradient = [inner](const Vector& x) { return Vector(x - inner); };
  const Vector y = hindsight_optimum(obj2, box_polytope(), wide_box(), 1e-10);
  CHECK((y - inner).norm() < 1e-6);

  // an objective with neither linear coefficients nor smoothness is rejected
  ConvexObjective bad;
  bad.value = [](const Vector& x) { return x.squaredNorm(); };
  bad.gradient = [](const Vector& x) { return Vector(2.0 * x); };
  CHECK_THROWS_AS(hindsight_optimum(bad, box_polytope(), wide_box(), 1e-8), InvalidInputError);
}
