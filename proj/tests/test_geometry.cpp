#include <cmath>

#include "doctest.h"
#include "safeoco/errors.hpp"
#include "safeoco/geometry.hpp"

using namespace safeoco;

namespace {

TruePolytope box_polytope() {
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  return TruePolytope(A, Vector::Constant(4, 3.0));
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("polytope construction validates shapes") {
  Matrix A(2, 2);
  A << 1, 0, 0, 1;
  CHECK_THROWS_AS(TruePolytope(A, Vector::Constant(3, 1.0)), InvalidInputError);
  CHECK_THROWS_AS(TruePolytope(Matrix(0, 0), Vector(0)), InvalidInputError);
  Matrix bad = A;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(TruePolytope(bad, Vector::Constant(2, 1.0)), InvalidInputError);

  const TruePolytope p = box_polytope();
  CHECK(p.rows() == 4);
  CHECK(p.dim() == 2);
  CHECK(p.max_row_norm() == doctest::Approx(1.0));

  Matrix A2(2, 2);
  A2 << 3, 4, 1, 0;
  const TruePolytope p2(A2, Vector::Constant(2, 1.0));
  CHECK(p2.max_row_norm() == doctest::Approx(5.0));
}

TEST_CASE("ambient box computes the corner norm bound") {
  const AmbientSet sym(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));
  CHECK(sym.norm_bound == doctest::Approx(std::sqrt(18.0)).epsilon(1e-14));

  // the farthest corner of [-1,2] x [0,5] is (2,5)... no: (-1,5) has norm
  // sqrt(26), (2,5) has sqrt(29); the bound must take the max over corners
  const AmbientSet asym(vec2(-1.0, 0.0), vec2(2.0, 5.0));
  CHECK(asym.norm_bound == doctest::Approx(std::sqrt(29.0)).epsilon(1e-14));

  CHECK_THROWS_AS(AmbientSet(vec2(1.0, 0.0), vec2(0.0, 1.0)), InvalidInputError);
  CHECK_THROWS_AS(AmbientSet(Vector(0), Vector(0)), InvalidInputError);

  // explicit norm bound is taken as given
  const AmbientSet stated(vec2(0.0, 0.0), vec2(1.0, 1.0), 7.5);
  CHECK(stated.norm_bound == 7.5);
}

TEST_CASE("membership is exact with no tolerance") {
  const TruePolytope p = box_polytope();
  const AmbientSet box(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));

  CHECK(contains(p, box, vec2(0.0, 0.0)));
  CHECK(contains(p, box, vec2(3.0, 3.0)));    // boundary is inside
  CHECK(contains(p, box, vec2(-3.0, 2.0)));
  CHECK_FALSE(contains(p, box, vec2(3.0 + 1e-12, 0.0)));
  CHECK_FALSE(contains(p, box, vec2(0.0, -3.0000001)));

  const Vector margin = safety_margin(p, vec2(1.0, -2.0));
  CHECK(margin[0] == doctest::Approx(2.0));
  CHECK(margin[1] == doctest::Approx(5.0));
  CHECK(margin[2] == doctest::Approx(4.0));
  CHECK(margin[3] == doctest::Approx(1.0));

  CHECK_THROWS_AS(contains(p, box, Vector::Constant(3, 0.0)), InvalidInputError);
}

TEST_CASE("shrunk polytope pulls every face inward") {
  const TruePolytope p = box_polytope();
  const ShrunkPolytope s(p, 0.5);
  CHECK(shrunk_contains(s, vec2(2.5, -2.5)));
  CHECK_FALSE(shrunk_contains(s, vec2(2.5 + 1e-12, 0.0)));
  CHECK_THROWS_AS(ShrunkPolytope(p, 0.0), InvalidInputError);
  CHECK_THROWS_AS(ShrunkPolytope(p, -1.0), InvalidInputError);
}

TEST_CASE("vertex enumeration returns sorted corners") {
  const AmbientSet box(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));
  const auto corners = enumerate_vertices(box_polytope(), box);
  REQUIRE(corners.size() == 4);
  CHECK(corners[0].isApprox(vec2(-3, -3)));
  CHECK(corners[1].isApprox(vec2(-3, 3)));
  CHECK(corners[2].isApprox(vec2(3, -3)));
  CHECK(corners[3].isApprox(vec2(3, 3)));

  // simplex x + y <= 1 in the unit box
  Matrix A(3, 2);
  A << 1, 1, -1, 0, 0, -1;
  Vector b(3);
  b << 1, 0, 0;
  const AmbientSet unit(Vector::Constant(2, 0.0), Vector::Constant(2, 1.0));
  const auto tri = enumerate_vertices(TruePolytope(A, b), unit);
  REQUIRE(tri.size() == 3);
  CHECK(tri[0].isApprox(vec2(0, 0)));
  CHECK(tri[1].isApprox(vec2(0, 1)));
  CHECK(tri[2].isApprox(vec2(1, 0)));

  // a redundant duplicate row must not produce duplicate vertices
  Matrix A2(4, 2);
  A2 << 1, 1, 1, 1, -1, 0, 0, -1;
  Vector b2(4);
  b2 << 1, 1, 0, 0;
  CHECK(enumerate_vertices(TruePolytope(A2, b2), unit).size() == 3);

  const AmbientSet box4(Vector::Constant(4, 0.0), Vector::Constant(4, 1.0));
  const TruePolytope p4(Matrix::Identity(4, 4), Vector::Constant(4, 1.0));
  CHECK_THROWS_AS(enumerate_vertices(p4, box4), InvalidInputError);
}

TEST_CASE("vertex enumeration covers three dimensions") {
  const AmbientSet box(Vector::Constant(3, 0.0), Vector::Constant(3, 2.0));
  Matrix A(1, 3);
  A << 1, 1, 1;
  const auto verts = enumerate_vertices(TruePolytope(A, Vector::Constant(1, 6.0)), box);
  // the constraint passes through exactly one corner, so all 8 remain
  REQUIRE(verts.size() == 8);
  for (const Vector& v : verts) CHECK(v.sum() <= 6.0 + 1e-12);
}
