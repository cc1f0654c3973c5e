#include "safeoco/environment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "safeoco/errors.hpp"

namespace safeoco {

namespace {

constexpr std::uint64_t kNoiseTag = 0x6f627365;    // observation noise stream
constexpr std::uint64_t kCoeffTag = 0x636f6566;    // per-step cost coefficients
constexpr std::uint64_t kTargetTag = 0x78626172;   // f2 target direction
constexpr std::uint64_t kPermTag = 0x7065726d;     // f3 sign permutation
constexpr std::uint64_t kPriceTag = 0x70726963;    // synthetic prices

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// civil-calendar algorithm).
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yr + (m <= 2));
}

// Seconds since the epoch for "YYYY-MM-DD[T ]HH:MM[:SS]"; -1 when malformed.
std::int64_t parse_timestamp(const std::string& s) {
  int y = 0;
  unsigned mo = 0, dd = 0, hh = 0, mi = 0, ss = 0;
  char sep = 0;
  const int n = std::sscanf(s.c_str(), "%d-%u-%u%c%u:%u:%u", &y, &mo, &dd, &sep, &hh, &mi, &ss);
  if (n < 6) return -1;
  if (sep != 'T' && sep != ' ') return -1;
  if (mo < 1 || mo > 12 || dd < 1 || dd > 31 || hh > 23 || mi > 59 || ss > 59) return -1;
  return days_from_civil(y, mo, dd) * 86400 + hh * 3600 + mi * 60 + ss;
}

std::string format_timestamp(std::int64_t t) {
  int y;
  unsigned mo, dd;
  civil_from_days(t / 86400, y, mo, dd);
  const std::int64_t sec = t % 86400;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld", y, mo, dd,
                static_cast<long long>(sec / 3600), static_cast<long long>(sec / 60 % 60),
                static_cast<long long>(sec % 60));
  return buf;
}

int zone_index(const std::string& name) {
  const std::string key = lower(trim(name));
  for (size_t i = 0; i < kLbmpZones.size(); ++i)
    if (key == lower(kLbmpZones[i])) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

PriceTable load_lbmp_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open price file: " + path);

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  struct Cell {
    double price;
    int line;
  };
  // keyed by (epoch seconds, zone column); std::map keeps timestamps sorted
  std::map<std::pair<std::int64_t, int>, Cell> cells;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (!header_seen) {
      if (lower(stripped) != "timestamp,zone,lbmp_usd_per_mwh")
        throw ParseError("expected header 'timestamp,zone,lbmp_usd_per_mwh'", line_no);
      header_seen = true;
      continue;
    }
    const auto fields = split_csv(stripped);
    if (fields.size() != 3) throw ParseError("expected 3 comma-separated fields", line_no);
    const std::int64_t ts = parse_timestamp(fields[0]);
    if (ts < 0) throw ParseError("bad timestamp '" + fields[0] + "'", line_no);
    const int zone = zone_index(fields[1]);
    if (zone < 0) throw ParseError("unknown zone '" + fields[1] + "'", line_no);
    double price;
    try {
      size_t pos = 0;
      price = std::stod(fields[2], &pos);
      if (pos != fields[2].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ParseError("bad price '" + fields[2] + "'", line_no);
    }
    if (!std::isfinite(price)) throw ParseError("non-finite price", line_no);
    const auto [it, inserted] = cells.insert({{ts, zone}, {price, line_no}});
    if (!inserted)
      throw DataError("duplicate (timestamp, zone) at line " + std::to_string(line_no) +
                      " (first at line " + std::to_string(it->second.line) + ")");
  }
  if (!header_seen) throw DataError("empty price file: " + path);
  if (cells.empty()) throw DataError("price file has no data rows: " + path);

  PriceTable table;
  const size_t n_rows = cells.size() / kLbmpZones.size();
  table.prices.resize(static_cast<Eigen::Index>(n_rows), kLbmpZones.size());
  table.timestamps.reserve(n_rows);

  auto it = cells.begin();
  Eigen::Index row = 0;
  while (it != cells.end()) {
    const std::int64_t ts = it->first.first;
    for (int zone = 0; zone < static_cast<int>(kLbmpZones.size()); ++zone) {
      if (it == cells.end() || it->first.first != ts || it->first.second != zone) {
        const int near_line = (it == cells.end()) ? line_no : it->second.line;
        throw DataError("timestamp " + format_timestamp(ts) + " is missing zone '" +
                        kLbmpZones[zone] + "' (near line " + std::to_string(near_line) + ")");
      }
      table.prices(row, zone) = it->second.price;
      ++it;
    }
    table.timestamps.push_back(format_timestamp(ts));
    ++row;
  }
  return table;
}

PriceTable synthetic_lbmp(int rows, std::uint64_t seed) {
  if (rows <= 0) throw InvalidInputError("synthetic_lbmp: rows must be positive");
  PriceTable table;
  table.synthetic = true;
  table.prices.resize(rows, kLbmpZones.size());
  table.timestamps.reserve(rows);
  Rng rng(mix_seed(seed, kPriceTag));
  const std::int64_t start = days_from_civil(2024, 1, 1) * 86400;
  for (int r = 0; r < rows; ++r) {
    for (int z = 0; z < static_cast<int>(kLbmpZones.size()); ++z)
      table.prices(r, z) = rng.uniform(10.0, 100.0);
    table.timestamps.push_back(format_timestamp(start + 3600 * static_cast<std::int64_t>(r)));
  }
  return table;
}

const char* scenario_kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::f1_linear: return "f1_linear";
    case ScenarioKind::f2_quadratic: return "f2_quadratic";
    case ScenarioKind::f3_resource: return "f3_resource";
    case ScenarioKind::datacenter: return "datacenter";
  }
  return "unknown";
}

namespace {

void validate_scenario_shape(int dim, int horizon) {
  if (dim < 1) throw InvalidInputError("scenario: dim must be positive");
  if (horizon < 1) throw InvalidInputError("scenario: horizon must be positive");
}

void validate_coeff_range(double c_lower, double c_upper) {
  if (!(c_lower <= c_upper) || !std::isfinite(c_lower) || !std::isfinite(c_upper))
    throw InvalidInputError("scenario: need finite c_lower <= c_upper");
}

Vector prefix_sums(const Vector& v) {
  Vector out(v.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = (acc += v[i]);
  return out;
}

Matrix prefix_row_sums(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  Vector acc = Vector::Zero(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    acc += m.row(i).transpose();
    out.row(i) = acc.transpose();
  }
  return out;
}

}  // namespace

Scenario Scenario::make_f1(std::uint64_t seed, double c_lower, double c_upper, int dim,
                           int horizon) {
  validate_scenario_shape(dim, horizon);
  validate_coeff_range(c_lower, c_upper);
  Scenario s;
  s.kind_ = ScenarioKind::f1_linear;
  s.dim_ = dim;
  s.horizon_ = horizon;
  Rng rng(mix_seed(seed, kCoeffTag));
  s.c_.resize(horizon);
  for (int t = 0; t < horizon; ++t) s.c_[t] = rng.uniform(c_lower, c_upper);
  s.c_prefix_ = prefix_sums(s.c_);
  s.grad_bound_ = std::max(std::abs(c_lower), std::abs(c_upper)) * std::sqrt(double(dim));
  return s;
}

Scenario Scenario::make_f2(std::uint64_t seed, double c_lower, double c_upper, int dim,
                           int horizon, const AmbientSet& box) {
  validate_scenario_shape(dim, horizon);
  validate_coeff_range(c_lower, c_upper);
  if (box.dim() != dim) throw InvalidInputError("make_f2: box dimension mismatch");
  Scenario s;
  s.kind_ = ScenarioKind::f2_quadratic;
  s.dim_ = dim;
  s.horizon_ = horizon;

  Rng target_rng(mix_seed(seed, kTargetTag));
  Vector g = target_rng.normal_vector(dim);
  while (g.norm() == 0.0) g = target_rng.normal_vector(dim);
  s.x_bar_ = 2.5 * g / g.norm();

  Rng rng(mix_seed(seed, kCoeffTag));
  s.c_.resize(horizon);
  for (int t = 0; t < horizon; ++t) s.c_[t] = rng.uniform(c_lower, c_upper);
  s.c_prefix_ = prefix_sums(s.c_);
  s.c2_prefix_ = prefix_sums(s.c_.array().square().matrix());

  // gradient = x - c x_bar; the sup over box x coefficient endpoints sits at
  // a corner of the product box.
  double worst = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << dim); ++mask) {
    Vector corner(dim);
    for (int j = 0; j < dim; ++j)
      corner[j] = (mask >> j) & 1 ? box.upper[j] : box.lower[j];
    worst = std::max({worst, (corner - c_lower * s.x_bar_).norm(),
                      (corner - c_upper * s.x_bar_).norm()});
  }
  s.grad_bound_ = worst;
  return s;
}

Scenario Scenario::make_f3(std::uint64_t seed, int dim, int horizon) {
  validate_scenario_shape(dim, horizon);
  Scenario s;
  s.kind_ = ScenarioKind::f3_resource;
  s.dim_ = dim;
  s.horizon_ = horizon;

  // p = seeded permutation of [1, horizon]; the sign of step t is (-1)^{p(t)}.
  std::vector<int> perm(horizon);
  for (int i = 0; i < horizon; ++i) perm[i] = i + 1;
  Rng perm_rng(mix_seed(seed, kPermTag));
  for (int i = horizon - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<int>(perm_rng.below(std::uint64_t(i) + 1))]);

  Rng rng(mix_seed(seed, kCoeffTag));
  s.coeff_.resize(horizon, dim);
  for (int t = 0; t < horizon; ++t) {
    const double spread = std::pow(double(t + 1), 0.1);
    const double sign = perm[t] % 2 == 0 ? 1.0 : -1.0;
    for (int j = 0; j < dim; ++j)
      s.coeff_(t, j) = rng.uniform(-spread, spread) + rng.uniform(-1.0, 0.0) + sign;
  }
  s.coeff_prefix_ = prefix_row_sums(s.coeff_);
  s.grad_bound_ = (std::pow(double(horizon), 0.1) + 2.0) * std::sqrt(double(dim));
  return s;
}

Scenario Scenario::make_datacenter(const PriceTable& prices, double lambda_dc, int horizon,
                                   const AmbientSet& box) {
  validate_scenario_shape(static_cast<int>(kLbmpZones.size()), horizon);
  if (!(lambda_dc > 0.0)) throw InvalidInputError("make_datacenter: lambda_dc must be positive");
  if (box.dim() != static_cast<int>(kLbmpZones.size()))
    throw InvalidInputError("make_datacenter: box must have one side per zone");
  if ((box.lower.array() < 0.0).any())
    throw InvalidInputError("make_datacenter: domain box must be nonnegative");
  if (prices.prices.rows() < horizon)
    throw DataError("price table has " + std::to_string(prices.prices.rows()) +
                    " rows, horizon needs " + std::to_string(horizon));

  Scenario s;
  s.kind_ = ScenarioKind::datacenter;
  s.dim_ = static_cast<int>(kLbmpZones.size());
  s.horizon_ = horizon;
  s.lambda_dc_ = lambda_dc;
  s.synthetic_prices_ = prices.synthetic;
  s.coeff_ = prices.prices.topRows(horizon);
  s.coeff_prefix_ = prefix_row_sums(s.coeff_);

  // Per coordinate, grad_k = c_k - 32 lambda / (1 + 4 x_k) is increasing in
  // x_k, so the extremes sit at the box faces and the price extremes.
  double sq = 0.0;
  for (int j = 0; j < s.dim_; ++j) {
    const double c_min = s.coeff_.col(j).minCoeff();
    const double c_max = s.coeff_.col(j).maxCoeff();
    const double g_lo = c_min - 32.0 * lambda_dc / (1.0 + 4.0 * box.lower[j]);
    const double g_hi = c_max - 32.0 * lambda_dc / (1.0 + 4.0 * box.upper[j]);
    const double bound = std::max(std::abs(g_lo), std::abs(g_hi));
    sq += bound * bound;
  }
  s.grad_bound_ = std::sqrt(sq);
  return s;
}

void Scenario::check_step(int t) const {
  if (t < 1 || t > horizon_)
    throw InvalidInputError("scenario: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(horizon_) + "]");
}

void Scenario::check_dim(const VectorRef& x) const {
  if (x.size() != dim_) throw InvalidInputError("scenario: action dimension mismatch");
}

double Scenario::value(int t, const VectorRef& x) const {
  check_step(t);
  check_dim(x);
  switch (kind_) {
    case ScenarioKind::f1_linear:
      return c_[t - 1] * x.sum() + 1.0;
    case ScenarioKind::f2_quadratic:
      return 0.5 * (x - c_[t - 1] * x_bar_).squaredNorm();
    case ScenarioKind::f3_resource:
      return coeff_.row(t - 1).dot(x);
    case ScenarioKind::datacenter: {
      if ((x.array() < 0.0).any())
        throw InvalidInputError("datacenter cost: action has negative coordinates");
      double service = 0.0;
      for (int j = 0; j < dim_; ++j) service += 8.0 * std::log1p(4.0 * x[j]);
      return coeff_.row(t - 1).dot(x) + lambda_dc_ * (100.0 - service);
    }
  }
  throw InvalidInputError("scenario: unknown kind");
}

Vector Scenario::gradient(int t, const VectorRef& x) const {
  check_step(t);
  check_dim(x);
  switch (kind_) {
    case ScenarioKind::f1_linear:
      return Vector::Constant(dim_, c_[t - 1]);
    case ScenarioKind::f2_quadratic:
      return x - c_[t - 1] * x_bar_;
    case ScenarioKind::f3_resource:
      return coeff_.row(t - 1).transpose();
    case ScenarioKind::datacenter: {
      if ((x.array() < 0.0).any())
        throw InvalidInputError("datacenter cost: action has negative coordinates");
      Vector g = coeff_.row(t - 1).transpose();
      for (int j = 0; j < dim_; ++j) g[j] -= 32.0 * lambda_dc_ / (1.0 + 4.0 * x[j]);
      return g;
    }
  }
  throw InvalidInputError("scenario: unknown kind");
}

ConvexObjective Scenario::range_objective(int t_begin, int t_end) const {
  check_step(t_begin);
  check_step(t_end);
  if (t_begin > t_end) throw InvalidInputError("range_objective: empty step range");
  const double count = t_end - t_begin + 1;
  // prefix-sum difference: sum over [t_begin, t_end] of the per-step terms
  const auto range_mean = [&](const Vector& prefix) {
    return (prefix[t_end - 1] - (t_begin > 1 ? prefix[t_begin - 2] : 0.0)) / count;
  };
  const auto range_mean_row = [&](const Matrix& prefix) {
    Vector sum = prefix.row(t_end - 1).transpose();
    if (t_begin > 1) sum -= prefix.row(t_begin - 2).transpose();
    return Vector(sum / count);
  };

  ConvexObjective obj;
  switch (kind_) {
    case ScenarioKind::f1_linear: {
      const double c_bar = range_mean(c_prefix_);
      const int d = dim_;
      obj.value = [c_bar](const Vector& x) { return c_bar * x.sum() + 1.0; };
      obj.gradient = [c_bar, d](const Vector&) { return Vector::Constant(d, c_bar); };
      obj.linear_coefficients = Vector::Constant(d, c_bar);
      break;
    }
    case ScenarioKind::f2_quadratic: {
      const double c_bar = range_mean(c_prefix_);
      const double c2_bar = range_mean(c2_prefix_);
      const Vector x_bar = x_bar_;
      obj.value = [c_bar, c2_bar, x_bar](const Vector& x) {
        return 0.5 * x.squaredNorm() - c_bar * x_bar.dot(x) + 0.5 * c2_bar * x_bar.squaredNorm();
      };
      obj.gradient = [c_bar, x_bar](const Vector& x) { return Vector(x - c_bar * x_bar); };
      obj.smoothness = 1.0;
      break;
    }
    case ScenarioKind::f3_resource: {
      const Vector c_bar = range_mean_row(coeff_prefix_);
      obj.value = [c_bar](const Vector& x) { return c_bar.dot(x); };
      obj.gradient = [c_bar](const Vector&) { return c_bar; };
      obj.linear_coefficients = c_bar;
      break;
    }
    case ScenarioKind::datacenter: {
      const Vector c_bar = range_mean_row(coeff_prefix_);
      const double lam = lambda_dc_;
      const int d = dim_;
      obj.value = [c_bar, lam, d](const Vector& x) {
        double service = 0.0;
        for (int j = 0; j < d; ++j) service += 8.0 * std::log1p(4.0 * x[j]);
        return c_bar.dot(x) + lam * (100.0 - service);
      };
      obj.gradient = [c_bar, lam, d](const Vector& x) {
        Vector g = c_bar;
        for (int j = 0; j < d; ++j) g[j] -= 32.0 * lam / (1.0 + 4.0 * x[j]);
        return g;
      };
      // curvature of -8 lam log(1+4x) peaks at the smallest x, here x >= 0
      obj.smoothness = 128.0 * lambda_dc_;
      break;
    }
  }
  return obj;
}

namespace {

BaselineSpec baseline_from_action(const TruePolytope& p, Vector action) {
  if (action.size() != p.dim())
    throw InvalidInputError("environment: baseline dimension mismatch");
  Vector image = p.A * action;
  return BaselineSpec(std::move(action), std::move(image), p.b);
}

}  // namespace

Environment::Environment(TruePolytope polytope, AmbientSet ambient, Vector baseline_action,
                         double noise_std, std::uint64_t rng_seed)
    : polytope_(std::move(polytope)),
      ambient_(std::move(ambient)),
      baseline_(baseline_from_action(polytope_, std::move(baseline_action))),
      noise_std_(noise_std),
      rng_(mix_seed(rng_seed, kNoiseTag)) {
  if (ambient_.dim() != polytope_.dim())
    throw InvalidInputError("environment: box dimension mismatch");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw InvalidInputError("environment: noise_std must be finite and nonnegative");
  if (!ambient_.contains(baseline_.action))
    throw ConfigError("environment: baseline action outside the ambient box");
}

Vector Environment::observe(const VectorRef& x) {
  if (x.size() != dim()) throw InvalidInputError("observe: action dimension mismatch");
  Vector y = polytope_.A * x;
  if (noise_std_ > 0.0)
    for (int i = 0; i < y.size(); ++i) y[i] += noise_std_ * rng_.normal();
  return y;
}

bool Environment::violates(const VectorRef& x) const {
  return (safety_margin(polytope_, x).array() < 0.0).any();
}

}  // namespace safeoco
