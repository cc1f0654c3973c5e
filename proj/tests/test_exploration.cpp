#include <cmath>

#include "doctest.h"
#include "safeoco/errors.hpp"
#include "safeoco/exploration.hpp"
#include "safeoco/geometry.hpp"

using namespace safeoco;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("baseline spec records the worst-row gap") {
  Vector image(3);
  image << 0.5, -0.25, -0.25;
  Vector offsets(3);
  offsets << 1.0, 0.0, 0.0;
  const BaselineSpec base(vec2(0.25, 0.25), image, offsets);
  CHECK(base.safety_gap == doctest::Approx(0.25).epsilon(1e-14));

  // a touching or violated row is not strictly feasible
  Vector tight(3);
  tight << 1.0, -0.25, -0.25;
  CHECK_THROWS_AS(BaselineSpec(vec2(0.5, 0.5), tight, offsets), ConfigError);
  CHECK_THROWS_AS(BaselineSpec(vec2(0.0, 0.0), Vector::Constant(2, 0.0), offsets),
                  InvalidInputError);
}

TEST_CASE("mixing weight follows the gap over the row norm, capped below one") {
  CHECK(compute_gamma(0.25, std::sqrt(2.0)) ==
        doctest::Approx(0.25 / std::sqrt(2.0)).epsilon(1e-14));
  // a huge gap cannot push the weight to 1: the baseline must keep mass
  CHECK(compute_gamma(100.0, 1.0) == doctest::Approx(1.0 - 1e-9).epsilon(1e-12));
  CHECK_THROWS_AS(compute_gamma(-1.0, 1.0), InvalidInputError);
  CHECK_THROWS_AS(compute_gamma(1.0, 0.0), InvalidInputError);
}

TEST_CASE("box cap keeps every perturbed action inside the ambient box") {
  // baseline (0.25, 0.25) in [0,1]^2 with radius 1: the binding corner is the
  // lower bound, (0.25 - 0)/(0.25 + 1) = 0.2
  const AmbientSet unit(Vector::Constant(2, 0.0), Vector::Constant(2, 1.0));
  const double cap = box_gamma_cap(vec2(0.25, 0.25), 1.0, unit);
  CHECK(cap == doctest::Approx(0.2).epsilon(1e-12));

  // every admissible action at the cap stays inside: check the worst corners
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      const Vector zeta = vec2(sx, sy) / std::sqrt(2.0);
      const Vector x = exploration_action(vec2(0.25, 0.25), cap, zeta);
      CHECK(unit.contains(x));
    }
  }

  // a centered baseline in a symmetric box leaves plenty of room
  const AmbientSet wide(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));
  CHECK(box_gamma_cap(vec2(0.0, 0.0), 1.0, wide) == doctest::Approx(1.0 - 1e-9));
}

TEST_CASE("row cap tightens the gap rule when an image entry is negative") {
  // triangle rows at baseline (0.25, 0.25): image (0.5, -0.25, -0.25),
  // offsets (1, 0, 0), L_A = sqrt(2), radius 1
  Vector image(3);
  image << 0.5, -0.25, -0.25;
  Vector offsets(3);
  offsets << 1.0, 0.0, 0.0;
  const double la = std::sqrt(2.0);
  const double cap = row_gamma_cap(image, offsets, la, 1.0);
  // row 2: (0 - (-0.25)) / (sqrt(2) - (-0.25))
  CHECK(cap == doctest::Approx(0.25 / (la + 0.25)).epsilon(1e-12));

  // the plain rule would allow more and break the nonneg rows at the cap:
  const double gap_rule = compute_gamma(0.25, la);
  const double worst = (1.0 - gap_rule) * image[1] + gap_rule * la * 1.0;
  CHECK(worst > offsets[1]);  // violated: this is why the extra cap exists
  const double safe = (1.0 - cap) * image[1] + cap * la * 1.0;
  CHECK(safe <= offsets[1] + 1e-12);

  // with an all-positive image the row cap is no tighter than the gap rule
  Vector pos_image(2);
  pos_image << 1.0, 0.5;
  Vector pos_off(2);
  pos_off << 3.0, 3.0;
  CHECK(row_gamma_cap(pos_image, pos_off, 1.0, 1.0) >=
        compute_gamma(2.0, 1.0) - 1e-12);
}

TEST_CASE("perturbations land on the sphere of the requested radius") {
  Rng rng(42);
  Vector mean = Vector::Zero(3);
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Vector z = sample_perturbation(rng, 3, 0.75);
    CHECK(z.norm() == doctest::Approx(0.75).epsilon(1e-12));
    mean += z / n;
  }
  // spherical symmetry: the empirical mean concentrates near zero
  CHECK(mean.norm() < 0.05);
  CHECK_THROWS_AS(sample_perturbation(rng, 0, 1.0), InvalidInputError);
  CHECK_THROWS_AS(sample_perturbation(rng, 3, 0.0), InvalidInputError);
}

TEST_CASE("exploration action is the stated convex combination") {
  const Vector x = exploration_action(vec2(1.0, 0.5), 0.25, vec2(-1.0, 1.0));
  CHECK(x[0] == doctest::Approx(0.75 * 1.0 + 0.25 * -1.0).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx(0.75 * 0.5 + 0.25 * 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(exploration_action(vec2(1.0, 0.5), 1.5, vec2(0.0, 0.0)), InvalidInputError);
  CHECK_THROWS_AS(exploration_action(vec2(1.0, 0.5), -0.1, vec2(0.0, 0.0)), InvalidInputError);
}

TEST_CASE("sampled exploration actions never leave the true safe set") {
  // box constraints |x_i| <= 3 with the baseline (1, 0.5): at gamma just
  // below 1 every mixed action must satisfy the rows with zero tolerance
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  const TruePolytope truth(A, Vector::Constant(4, 3.0));
  const AmbientSet box(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));
  const Vector baseline = vec2(1.0, 0.5);
  const Vector image = A * baseline;
  const BaselineSpec base(baseline, image, truth.b);
  const double gamma = std::min({compute_gamma(base.safety_gap, truth.max_row_norm()),
                                 row_gamma_cap(image, truth.b, truth.max_row_norm(), 1.0),
                                 box_gamma_cap(baseline, 1.0, box)});
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = exploration_action(baseline, gamma, sample_perturbation(rng, 2, 1.0));
    CHECK(contains(truth, box, x));
  }
}
