#include "safeoco/exploration.hpp"

#include <algorithm>
#include <cmath>

#include "safeoco/errors.hpp"

namespace safeoco {

namespace {
constexpr double kGammaClamp = 1.0 - 1e-9;
}

BaselineSpec::BaselineSpec(Vector action_, Vector image_, const VectorRef& offsets)
    : action(std::move(action_)), image(std::move(image_)) {
  if (image.size() != offsets.size())
    throw InvalidInputError("BaselineSpec: image does not match offsets");
  safety_gap = (offsets - image).minCoeff();
  if (!(safety_gap > 0.0))
    throw ConfigError("BaselineSpec: baseline action is not strictly feasible");
}

double compute_gamma(double safety_gap, double row_norm_bound) {
  if (!(safety_gap > 0.0)) throw InvalidInputError("compute_gamma: safety gap must be positive");
  if (!(row_norm_bound > 0.0))
    throw InvalidInputError("compute_gamma: row norm bound must be positive");
  return std::min(safety_gap / row_norm_bound, kGammaClamp);
}

double box_gamma_cap(const VectorRef& baseline, double radius, const AmbientSet& box) {
  if (baseline.size() != box.dim()) throw InvalidInputError("box_gamma_cap: dimension mismatch");
  if (!box.contains(baseline)) throw InvalidInputError("box_gamma_cap: baseline outside box");
  double cap = kGammaClamp;
  for (int j = 0; j < box.dim(); ++j) {
    // Worst coordinate excursion at weight g is g*(radius -+ x^s_j) past (1-g) x^s_j.
    const double down = baseline[j] + radius;  // denominator for the lower face
    if (down > 0.0) cap = std::min(cap, (baseline[j] - box.lower[j]) / down);
    const double up = radius - baseline[j];  // denominator for the upper face
    if (up > 0.0) cap = std::min(cap, (box.upper[j] - baseline[j]) / up);
  }
  return std::max(cap, 0.0);
}

double row_gamma_cap(const VectorRef& image, const VectorRef& offsets, double row_norm_bound,
                     double radius) {
  if (image.size() != offsets.size()) throw InvalidInputError("row_gamma_cap: dimension mismatch");
  double cap = kGammaClamp;
  for (int i = 0; i < image.size(); ++i) {
    const double denom = row_norm_bound * radius - image[i];
    if (denom > 0.0) cap = std::min(cap, (offsets[i] - image[i]) / denom);
  }
  return std::max(cap, 0.0);
}

Vector sample_perturbation(Rng& rng, int dim, double radius) {
  if (dim <= 0) throw InvalidInputError("sample_perturbation: dimension must be positive");
  if (!(radius > 0.0)) throw InvalidInputError("sample_perturbation: radius must be positive");
  Vector g(dim);
  double norm = 0.0;
  do {
    g = rng.normal_vector(dim);
    norm = g.norm();
  } while (norm == 0.0);
  return g * (radius / norm);
}

Vector exploration_action(const VectorRef& baseline, double gamma, const VectorRef& perturbation) {
  if (baseline.size() != perturbation.size())
    throw InvalidInputError("exploration_action: dimension mismatch");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw InvalidInputError("exploration_action: gamma outside [0, 1)");
  return (1.0 - gamma) * baseline + gamma * perturbation;
}

}  // namespace safeoco
