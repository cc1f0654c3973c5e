#include "safeoco/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "safeoco/errors.hpp"

namespace safeoco {

namespace {

void require_finite(const MatrixRef& m, const char* what) {
  if (!m.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite entries");
}

}  // namespace

TruePolytope::TruePolytope(Matrix A_, Vector b_) : A(std::move(A_)), b(std::move(b_)) {
  if (A.rows() == 0 || A.cols() == 0) throw InvalidInputError("TruePolytope: empty constraint matrix");
  if (b.size() != A.rows()) throw InvalidInputError("TruePolytope: offset count does not match row count");
  require_finite(A, "TruePolytope A");
  require_finite(b, "TruePolytope b");
}

double TruePolytope::max_row_norm() const { return A.rowwise().norm().maxCoeff(); }

AmbientSet::AmbientSet(Vector lower_, Vector upper_)
    : AmbientSet(std::move(lower_), std::move(upper_), 0.0) {
  // L is attained at the corner made of the larger-magnitude bound per axis.
  norm_bound = lower.cwiseAbs().cwiseMax(upper.cwiseAbs()).norm();
}

AmbientSet::AmbientSet(Vector lower_, Vector upper_, double norm_bound_)
    : lower(std::move(lower_)), upper(std::move(upper_)), norm_bound(norm_bound_) {
  if (lower.size() == 0) throw InvalidInputError("AmbientSet: empty bounds");
  if (lower.size() != upper.size()) throw InvalidInputError("AmbientSet: bound dimensions differ");
  require_finite(lower, "AmbientSet lower");
  require_finite(upper, "AmbientSet upper");
  if (((upper - lower).array() < 0.0).any())
    throw InvalidInputError("AmbientSet: upper bound below lower bound");
}

bool AmbientSet::contains(const VectorRef& x) const {
  if (x.size() != lower.size()) throw InvalidInputError("AmbientSet::contains: dimension mismatch");
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

ShrunkPolytope::ShrunkPolytope(TruePolytope base_, double margin_)
    : base(std::move(base_)), margin(margin_) {
  if (!(margin > 0.0) || !std::isfinite(margin))
    throw InvalidInputError("ShrunkPolytope: margin must be positive and finite");
}

bool contains(const TruePolytope& p, const AmbientSet& box, const VectorRef& x) {
  if (x.size() != p.dim()) throw InvalidInputError("contains: dimension mismatch");
  if (box.dim() != p.dim()) throw InvalidInputError("contains: box dimension mismatch");
  if (!box.contains(x)) return false;
  return ((p.b - p.A * x).array() >= 0.0).all();
}

Vector safety_margin(const TruePolytope& p, const VectorRef& x) {
  if (x.size() != p.dim()) throw InvalidInputError("safety_margin: dimension mismatch");
  return p.b - p.A * x;
}

bool shrunk_contains(const ShrunkPolytope& s, const VectorRef& x) {
  if (x.size() != s.base.dim()) throw InvalidInputError("shrunk_contains: dimension mismatch");
  return ((s.base.A * x).array() + s.margin <= s.base.b.array()).all();
}

std::vector<Vector> enumerate_vertices(const TruePolytope& p, const AmbientSet& box) {
  const int d = p.dim();
  if (box.dim() != d) throw InvalidInputError("enumerate_vertices: box dimension mismatch");
  if (d > 3) throw InvalidInputError("enumerate_vertices: supported only for d <= 3");

  // Stack polytope rows with the box faces, then intersect every d-subset.
  const int m = p.rows();
  const int n = m + 2 * d;
  Matrix C(n, d);
  Vector c(n);
  C.topRows(m) = p.A;
  c.head(m) = p.b;
  C.middleRows(m, d) = Matrix::Identity(d, d);
  c.segment(m, d) = box.upper;
  C.bottomRows(d) = -Matrix::Identity(d, d);
  c.tail(d) = -box.lower;

  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;

  std::vector<Vector> vertices;
  std::vector<int> idx(d);
  auto consider = [&](const std::vector<int>& rows) {
    Matrix B(d, d);
    Vector rhs(d);
    for (int k = 0; k < d; ++k) {
      B.row(k) = C.row(rows[k]);
      rhs[k] = c[rows[k]];
    }
    Eigen::FullPivLU<Matrix> lu(B);
    if (!lu.isInvertible()) return;
    Vector x = lu.solve(rhs);
    if (((C * x - c).array() > tol).any()) return;
    for (const Vector& v : vertices)
      if ((v - x).lpNorm<Eigen::Infinity>() <= 10 * tol) return;
    vertices.push_back(std::move(x));
  };

  // Iterate over all d-combinations of the n stacked rows.
  std::vector<int> comb(d);
  for (int i = 0; i < d; ++i) comb[i] = i;
  while (true) {
    consider(comb);
    int k = d - 1;
    while (k >= 0 && comb[k] == n - d + k) --k;
    if (k < 0) break;
    ++comb[k];
    for (int j = k + 1; j < d; ++j) comb[j] = comb[j - 1] + 1;
  }

  std::sort(vertices.begin(), vertices.end(), [](const Vector& a, const Vector& b) {
    for (int i = 0; i < a.size(); ++i) {
      if (a[i] < b[i]) return true;
      if (a[i] > b[i]) return false;
    }
    return false;
  });
  return vertices;
}

}  // namespace safeoco
