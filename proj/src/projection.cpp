#include "safeoco/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safeoco/errors.hpp"

namespace safeoco {

namespace {

constexpr double kSocSmoothing = 1e-16;

// Constraint system {A x + beta * sqrt(x^T W x + mu_s) <= b - eps_feas} ∩ box.
struct BarrierProblem {
  const Matrix& A;
  const Vector& b;
  double beta;             // 0 disables the weighted-norm term
  const Matrix* gram_inv;  // W, required when beta > 0
  const Vector& lo;
  const Vector& hi;
  double eps_feas;

  int rows() const { return static_cast<int>(A.rows()); }
  int dim() const { return static_cast<int>(A.cols()); }
  int barrier_terms() const { return rows() + 2 * dim(); }
};

struct Workspace {
  Vector gt;        // shifted constraint values, m
  Vector w;         // W x, d
  Vector q;         // beta * w / s, d
  Vector u;         // 1 / (-gt), m
  Vector grad;      // d
  Matrix hess;      // d x d
  Matrix bmat;      // rows of A + q^T, m x d
  Vector dx;        // d
  Vector xt;        // d
  Vector gt_trial;  // m
  Vector w_trial;   // d
  Eigen::LLT<Matrix> llt;

  Workspace(int m, int d)
      : gt(m), w(d), q(d), u(m), grad(d), hess(d, d), bmat(m, d), dx(d), xt(d), gt_trial(m),
        w_trial(d) {}
};

// Fills gt = A x + beta*s(x) - b + eps_feas; returns s(x) (0 when beta == 0).
double eval_constraints(const BarrierProblem& P, const Vector& x, Vector& gt, Vector& w) {
  gt.noalias() = P.A * x;
  gt -= P.b;
  gt.array() += P.eps_feas;
  if (P.beta <= 0.0) return 0.0;
  w.noalias() = (*P.gram_inv) * x;
  const double s = std::sqrt(x.dot(w) + kSocSmoothing);
  gt.array() += P.beta * s;
  return s;
}

bool inside_box_strict(const BarrierProblem& P, const Vector& x) {
  return (x.array() > P.lo.array()).all() && (x.array() < P.hi.array()).all();
}

bool strictly_feasible(const BarrierProblem& P, const Vector& x, Vector& gt, Vector& w) {
  if (!inside_box_strict(P, x)) return false;
  eval_constraints(P, x, gt, w);
  return (gt.array() < 0.0).all();
}

double barrier_value(const BarrierProblem& P, const Vector& x, const Vector& gt) {
  double v = 0.0;
  for (int i = 0; i < gt.size(); ++i) v -= std::log(-gt[i]);
  for (int j = 0; j < x.size(); ++j)
    v -= std::log(x[j] - P.lo[j]) + std::log(P.hi[j] - x[j]);
  return v;
}

// One centering problem: minimize 0.5||x-z||^2 + mu * barrier. x must enter
// strictly feasible; returns the Newton step count.
int center(const BarrierProblem& P, const Vector& z, double mu, Vector& x, Workspace& ws,
           int max_inner) {
  const int d = P.dim();
  int steps = 0;
  double s = eval_constraints(P, x, ws.gt, ws.w);
  double fx = 0.5 * (x - z).squaredNorm() + mu * barrier_value(P, x, ws.gt);

  for (int it = 0; it < max_inner; ++it) {
    ws.u = -ws.gt.cwiseInverse();  // positive since gt < 0
    const double usum = ws.u.sum();

    if (P.beta > 0.0) {
      ws.q = (P.beta / s) * ws.w;
      ws.bmat = P.A;
      ws.bmat.rowwise() += ws.q.transpose();
    } else {
      ws.bmat = P.A;
    }

    // gradient: (x - z) + mu * [B^T u + box terms]
    ws.grad = x - z;
    ws.grad.noalias() += mu * (ws.bmat.transpose() * ws.u);
    for (int j = 0; j < d; ++j)
      ws.grad[j] += mu * (-1.0 / (x[j] - P.lo[j]) + 1.0 / (P.hi[j] - x[j]));

    // Hessian: I + mu * [B^T diag(u^2) B + usum * beta * (W/s - w w^T/s^3) + box diag]
    ws.hess.noalias() = ws.bmat.transpose() * ws.u.array().square().matrix().asDiagonal() * ws.bmat;
    if (P.beta > 0.0) {
      const double c1 = usum * P.beta / s;
      ws.hess.noalias() += c1 * (*P.gram_inv);
      ws.hess.noalias() -= (c1 / (s * s)) * (ws.w * ws.w.transpose());
    }
    ws.hess *= mu;
    for (int j = 0; j < d; ++j)
      ws.hess(j, j) += 1.0 + mu * (1.0 / ((x[j] - P.lo[j]) * (x[j] - P.lo[j])) +
                                   1.0 / ((P.hi[j] - x[j]) * (P.hi[j] - x[j])));

    ws.llt.compute(ws.hess);
    if (ws.llt.info() != Eigen::Success) {
      ws.hess.diagonal().array() += 1e-12 * ws.hess.trace() / d;
      ws.llt.compute(ws.hess);
      if (ws.llt.info() != Eigen::Success)
        throw ConvergenceError("projection: barrier Hessian factorization failed");
    }
    ws.dx = ws.llt.solve(-ws.grad);
    const double decrement2 = -ws.grad.dot(ws.dx);
    if (decrement2 * 0.5 <= std::max(1e-14, 1e-3 * mu)) break;

    // Backtracking: stay in the barrier domain, then require decrease.
    double t = 1.0;
    bool stepped = false;
    for (int ls = 0; ls < 60; ++ls) {
      ws.xt = x + t * ws.dx;
      if (strictly_feasible(P, ws.xt, ws.gt_trial, ws.w_trial)) {
        const double ft =
            0.5 * (ws.xt - z).squaredNorm() + mu * barrier_value(P, ws.xt, ws.gt_trial);
        if (ft <= fx - 0.25 * t * decrement2) {
          x = ws.xt;
          fx = ft;
          ws.gt = ws.gt_trial;
          ws.w = ws.w_trial;
          s = (P.beta > 0.0) ? std::sqrt(x.dot(ws.w) + kSocSmoothing) : 0.0;
          stepped = true;
          break;
        }
      }
      t *= 0.5;
    }
    ++steps;
    if (!stepped) break;  // numerically stalled; current iterate is kept
  }
  return steps;
}

// Feasibility phase: minimize the epigraph level over (x, level) until the
// constraint part turns strictly negative. Throws when no interior exists.
Vector find_interior(const BarrierProblem& P, const ProjectionOptions& opt, int& newton_steps) {
  const int d = P.dim();
  const int m = P.rows();
  if (((P.hi - P.lo).array() <= 0.0).any())
    throw InfeasibleError("projection: ambient box has empty interior",
                          std::numeric_limits<double>::infinity());

  Vector x = 0.5 * (P.lo + P.hi);
  Vector gt(m), w(d);
  if (strictly_feasible(P, x, gt, w)) return x;

  eval_constraints(P, x, gt, w);
  double level = gt.maxCoeff();
  double best_slack = level - P.eps_feas;
  level += 0.1 * std::max(1.0, std::abs(level));

  Vector grad(d + 1), dy(d + 1);
  Matrix hess(d + 1, d + 1);
  Vector u(m), q(d);
  Matrix bmat(m, d);
  Eigen::LLT<Matrix> llt;
  Vector xt(d), gtt(m), wt(d);

  double mu = std::max(1.0, std::abs(level));
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    for (int it = 0; it < opt.max_inner; ++it) {
      double s = eval_constraints(P, x, gt, w);
      u = (Vector::Constant(m, level) - gt).cwiseInverse();  // 1/(level - gt) > 0
      if (P.beta > 0.0) {
        q = (P.beta / s) * w;
        bmat = P.A;
        bmat.rowwise() += q.transpose();
      } else {
        bmat = P.A;
      }
      const double usum = u.sum();

      grad.head(d).noalias() = bmat.transpose() * u;
      for (int j = 0; j < d; ++j)
        grad[j] += -1.0 / (x[j] - P.lo[j]) + 1.0 / (P.hi[j] - x[j]);
      grad.head(d) *= mu;
      grad[d] = 1.0 - mu * usum;

      hess.topLeftCorner(d, d).noalias() =
          bmat.transpose() * u.array().square().matrix().asDiagonal() * bmat;
      if (P.beta > 0.0) {
        const double c1 = usum * P.beta / s;
        hess.topLeftCorner(d, d).noalias() += c1 * (*P.gram_inv);
        hess.topLeftCorner(d, d).noalias() -= (c1 / (s * s)) * (w * w.transpose());
      }
      for (int j = 0; j < d; ++j)
        hess(j, j) += 1.0 / ((x[j] - P.lo[j]) * (x[j] - P.lo[j])) +
                      1.0 / ((P.hi[j] - x[j]) * (P.hi[j] - x[j]));
      hess.topRightCorner(d, 1).noalias() =
          -bmat.transpose() * u.array().square().matrix();
      hess.bottomLeftCorner(1, d) = hess.topRightCorner(d, 1).transpose();
      hess(d, d) = u.squaredNorm();
      hess *= mu;
      hess.diagonal().array() += 1e-14 * std::max(1.0, hess.trace());

      llt.compute(hess);
      if (llt.info() != Eigen::Success) {
        hess.diagonal().array() += 1e-10 * std::max(1.0, hess.trace());
        llt.compute(hess);
        if (llt.info() != Eigen::Success)
          throw ConvergenceError("projection: feasibility Hessian factorization failed");
      }
      dy = llt.solve(-grad);
      const double decrement2 = -grad.dot(dy);
      if (decrement2 * 0.5 <= std::max(1e-14, 1e-3 * mu)) break;

      double fx = level;
      for (int i = 0; i < m; ++i) fx -= mu * std::log(level - gt[i]);
      for (int j = 0; j < d; ++j)
        fx -= mu * (std::log(x[j] - P.lo[j]) + std::log(P.hi[j] - x[j]));

      double t = 1.0;
      bool stepped = false;
      for (int ls = 0; ls < 60; ++ls) {
        xt = x + t * dy.head(d);
        const double lt = level + t * dy[d];
        bool ok = inside_box_strict(P, xt);
        if (ok) {
          eval_constraints(P, xt, gtt, wt);
          ok = ((gtt.array() < lt).all());
        }
        if (ok) {
          double ft = lt;
          for (int i = 0; i < m; ++i) ft -= mu * std::log(lt - gtt[i]);
          for (int j = 0; j < d; ++j)
            ft -= mu * (std::log(xt[j] - P.lo[j]) + std::log(P.hi[j] - xt[j]));
          if (ft <= fx - 0.25 * t * decrement2) {
            x = xt;
            level = lt;
            gt = gtt;
            w = wt;
            stepped = true;
            break;
          }
        }
        t *= 0.5;
      }
      ++newton_steps;
      if (!stepped) break;
    }

    best_slack = std::min(best_slack, gt.maxCoeff() - P.eps_feas);
    if ((gt.array() < 0.0).all()) return x;
    mu *= 0.5;
    if (mu < 1e-14 * std::max(1.0, std::abs(level))) break;
  }
  throw InfeasibleError("projection: no strictly feasible point found", best_slack);
}

ProjectionResult solve_projection(const BarrierProblem& P, const VectorRef& z,
                                  const ProjectionOptions& opt, const Vector& exact_values,
                                  bool z_in_box) {
  const int d = P.dim();
  const int m = P.rows();
  if (z.size() != d) throw InvalidInputError("projection: dimension mismatch");
  if (!z.allFinite()) throw InvalidInputError("projection: non-finite target");

  // Identity path: z already satisfies the shrunk constraints and the box.
  if (z_in_box && (exact_values.array() <= -P.eps_feas).all())
    return ProjectionResult{z, 0.0, exact_values.maxCoeff(), 0};

  Workspace ws(m, d);
  int newton_steps = 0;
  Vector x;
  if (opt.warm_start != nullptr && opt.warm_start->size() == d &&
      strictly_feasible(P, *opt.warm_start, ws.gt, ws.w)) {
    x = *opt.warm_start;
  } else {
    Vector zc = z;
    if (z_in_box && strictly_feasible(P, zc, ws.gt, ws.w)) {
      x = std::move(zc);  // inside the smoothed set but within eps_feas of it
    } else {
      x = find_interior(P, opt, newton_steps);
    }
  }

  const int n_cons = P.barrier_terms();
  const double target = opt.eps_opt / n_cons;
  double mu = std::clamp(0.5 * (x - z).squaredNorm(), target, 100.0);
  for (int outer = 0; outer <= opt.max_outer; ++outer) {
    newton_steps += center(P, z, mu, x, ws, opt.max_inner);
    if (mu <= target) break;
    if (outer == opt.max_outer)
      throw ConvergenceError("projection: outer iteration limit reached (mu " +
                             std::to_string(mu) + ")");
    mu = std::max(0.5 * mu, target);
  }

  Vector g = P.A * x - P.b;
  if (P.beta > 0.0) {
    // Recompute W x at the final point for an exact slack report.
    ws.w.noalias() = (*P.gram_inv) * x;
    g.array() += P.beta * std::sqrt(std::max(0.0, x.dot(ws.w)));
  }
  double slack = g.maxCoeff();
  for (int j = 0; j < d; ++j)
    slack = std::max({slack, P.lo[j] - x[j], x[j] - P.hi[j]});
  return ProjectionResult{std::move(x), mu * n_cons, slack, newton_steps};
}

}  // namespace

ProjectionResult project_conservative(const ConservativeSafeSet& set, const VectorRef& z,
                                      const ProjectionOptions& opt) {
  const AmbientSet& box = set.box();
  BarrierProblem P{set.estimate().a_hat,
                   set.offsets(),
                   set.beta(),
                   &set.gram_inverse(),
                   box.lower,
                   box.upper,
                   1e-9 * set.offsets().cwiseAbs().maxCoeff()};
  const bool in_box = z.size() == P.dim() && box.contains(z);
  Vector exact = in_box ? set.constraint_values(z) : Vector::Constant(P.rows(), 1.0);
  return solve_projection(P, z, opt, exact, in_box);
}

ProjectionResult project_polytope(const TruePolytope& p, const AmbientSet& box, const VectorRef& z,
                                  const ProjectionOptions& opt) {
  if (box.dim() != p.dim()) throw InvalidInputError("project_polytope: box dimension mismatch");
  BarrierProblem P{p.A,      p.b,       0.0, nullptr, box.lower, box.upper,
                   1e-9 * p.b.cwiseAbs().maxCoeff()};
  const bool in_box = z.size() == P.dim() && box.contains(z);
  Vector exact = in_box ? Vector(p.A * z - p.b) : Vector::Constant(P.rows(), 1.0);
  return solve_projection(P, z, opt, exact, in_box);
}

Vector hindsight_optimum(const ConvexObjective& obj, const TruePolytope& p, const AmbientSet& box,
                         double eps_opt, const Vector* warm_start) {
  const int d = p.dim();
  if (obj.linear_coefficients.has_value()) {
    const Vector& c = *obj.linear_coefficients;
    if (c.size() != d) throw InvalidInputError("hindsight_optimum: coefficient dimension mismatch");
    const auto vertices = enumerate_vertices(p, box);
    if (vertices.empty())
      throw InfeasibleError("hindsight_optimum: feasible set has no vertices", 0.0);
    // Vertices arrive lexicographically sorted, so ties keep the smaller point.
    const Vector* best = &vertices.front();
    double best_val = c.dot(vertices.front());
    for (const Vector& v : vertices) {
      const double val = c.dot(v);
      if (val < best_val) {
        best_val = val;
        best = &v;
      }
    }
    return *best;
  }

  if (!(obj.smoothness > 0.0))
    throw InvalidInputError("hindsight_optimum: smooth objective needs positive smoothness");
  const double step = 1.0 / obj.smoothness;
  ProjectionOptions inner;
  inner.eps_opt = 1e-12;

  Vector x;
  if (warm_start != nullptr && warm_start->size() == d) {
    x = project_polytope(p, box, *warm_start, inner).point;
  } else {
    x = project_polytope(p, box, 0.5 * (box.lower + box.upper), inner).point;
  }
  inner.warm_start = &x;  // the previous iterate stays feasible throughout

  double pg_norm = std::numeric_limits<double>::infinity();
  double best = pg_norm;
  int no_improve = 0;
  constexpr int kMaxIter = 100000;
  constexpr double kSolverFloor = 1e-5;  // inner projections limit resolution
  for (int it = 0; it < kMaxIter; ++it) {
    Vector cand = x - step * obj.gradient(x);
    ProjectionResult pr = project_polytope(p, box, cand, inner);
    pg_norm = (x - pr.point).norm() / step;
    x = std::move(pr.point);
    if (pg_norm <= eps_opt) return x;
    if (pg_norm < 0.999 * best) {
      best = pg_norm;
      no_improve = 0;
    } else if (++no_improve >= 200) {
      // 200 steps without meaningful decrease: done if the residual is at
      // the solver floor, otherwise progress is slow but real; keep going.
      if (best <= kSolverFloor) return x;
      no_improve = 0;
    }
  }
  if (pg_norm <= kSolverFloor) return x;
  throw ConvergenceError("hindsight_optimum: projected gradient stalled at norm " +
                         std::to_string(pg_norm));
}

}  // namespace safeoco
