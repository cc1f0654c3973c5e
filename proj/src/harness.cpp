#include "safeoco/harness.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <utility>

#include "safeoco/errors.hpp"

namespace fs = std::filesystem;

namespace safeoco {

namespace {

constexpr std::uint64_t kNestingSampleTag = 0x6e657374;

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  out += '"';
  return out;
}

std::ofstream open_csv(const std::string& path, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "# generated " << timestamp_utc() << (comment.empty() ? "" : " ") << comment << "\n";
  return out;
}

void require_fresh(const std::vector<std::string>& paths, bool force) {
  if (force) return;
  for (const std::string& p : paths)
    if (fs::exists(p)) throw DataError("output already exists (pass --force to overwrite): " + p);
}

// Splits "a, [b, c], d" on the commas at bracket depth zero.
std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !parts.empty()) parts.push_back(last);
  return parts;
}

std::string strip_brackets(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw ConfigError("config key '" + key + "': expected a bracketed list, got '" + value + "'");
  return trim(v.substr(1, v.size() - 2));
}

double parse_double(const std::string& key, const std::string& token) {
  try {
    size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos == token.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + token + "'");
}

long long parse_int(const std::string& key, const std::string& token) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(token, &pos);
    if (pos == token.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an integer, got '" + token + "'");
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::string key, value;
  int depth = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (depth == 0) {
      if (stripped.empty()) continue;
      const size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      key = trim(stripped.substr(0, eq));
      value = trim(stripped.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    } else {
      value += ' ';
      value += stripped;
    }
    depth = 0;
    for (char c : value) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (depth < 0)
        throw ConfigError("config line " + std::to_string(line_no) + ": unbalanced ']'");
    }
    if (depth == 0) cfg.values_[key] = trim(value);
  }
  if (depth != 0) throw ConfigError("config: unclosed '[' in value of '" + key + "'");
  return cfg;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_int(key, it->second);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + it->second + "'");
}

Vector Config::get_vector(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config key '" + key + "' is required");
  const auto parts = split_top_level(strip_brackets(key, it->second));
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(key, parts[i]);
  return v;
}

Matrix Config::get_matrix(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config key '" + key + "' is required");
  const auto rows = split_top_level(strip_brackets(key, it->second));
  if (rows.empty()) throw ConfigError("config key '" + key + "': empty matrix");
  std::vector<std::vector<double>> parsed;
  for (const std::string& row : rows) {
    const auto cells = split_top_level(strip_brackets(key, row));
    std::vector<double> r;
    for (const std::string& cell : cells) r.push_back(parse_double(key, cell));
    if (!parsed.empty() && r.size() != parsed.front().size())
      throw ConfigError("config key '" + key + "': ragged matrix rows");
    parsed.push_back(std::move(r));
  }
  Matrix m(static_cast<Eigen::Index>(parsed.size()), static_cast<Eigen::Index>(parsed.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = parsed[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return m;
}

std::vector<long long> Config::get_int_list(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config key '" + key + "' is required");
  std::vector<long long> out;
  for (const std::string& part : split_top_level(strip_brackets(key, it->second)))
    out.push_back(parse_int(key, part));
  return out;
}

ExperimentSpec preset_box() {
  ExperimentSpec spec;
  spec.name = "box";
  spec.kind = ScenarioKind::f1_linear;
  spec.A.resize(4, 2);
  spec.A << 1, 0, 0, 1, -1, 0, 0, -1;
  spec.b = Vector::Constant(4, 3.0);
  spec.box_lower = Vector::Constant(2, -3.0);
  spec.box_upper = Vector::Constant(2, 3.0);
  spec.baseline_action.resize(2);
  spec.baseline_action << 1.0, 0.5;
  spec.noise_std = std::sqrt(1e-3);
  spec.run.horizon = 100000;
  spec.run.delta = 1e-3;
  spec.run.ridge = 0.5;
  spec.n_seeds = 6;
  spec.master_seed = 1;
  spec.output_dir = "out/box";
  return spec;
}

ExperimentSpec preset_triangle() {
  ExperimentSpec spec = preset_box();
  spec.name = "triangle";
  spec.A.resize(3, 2);
  spec.A << 1, 1, -1, 0, 0, -1;
  spec.b.resize(3);
  spec.b << 1, 0, 0;
  spec.box_lower = Vector::Constant(2, 0.0);
  spec.box_upper = Vector::Constant(2, 1.0);
  spec.baseline_action << 0.25, 0.25;
  spec.output_dir = "out/triangle";
  return spec;
}

ExperimentSpec preset_datacenter() {
  ExperimentSpec spec;
  spec.name = "datacenter";
  spec.kind = ScenarioKind::datacenter;
  const int d = static_cast<int>(kLbmpZones.size());
  // per-zone caps plus one total-power budget row
  spec.A = Matrix::Identity(d + 1, d);
  spec.A.row(d) = Vector::Constant(d, 1.0).transpose();
  spec.b = Vector::Constant(d + 1, 30.0);
  spec.b[d] = 26.0;
  spec.box_lower = Vector::Constant(d, 0.0);
  spec.box_upper = Vector::Constant(d, 30.0);
  spec.baseline_action = Vector::Constant(d, 5.0);
  spec.noise_std = std::sqrt(1e-3);
  spec.run.horizon = 10000;
  spec.run.delta = 1e-3;
  spec.run.ridge = 0.5;
  spec.n_seeds = 6;
  spec.master_seed = 1;
  spec.output_dir = "out/datacenter";
  return spec;
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  std::string v = name;
  for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "f1" || v == "f1_linear") return ScenarioKind::f1_linear;
  if (v == "f2" || v == "f2_quadratic") return ScenarioKind::f2_quadratic;
  if (v == "f3" || v == "f3_resource") return ScenarioKind::f3_resource;
  if (v == "datacenter" || v == "dc") return ScenarioKind::datacenter;
  throw ConfigError("unknown scenario kind '" + name + "' (f1, f2, f3, datacenter)");
}

ExperimentSpec spec_from_config(const Config& cfg) {
  const std::string preset = cfg.get_string("preset", "box");
  ExperimentSpec spec;
  if (preset == "box") {
    spec = preset_box();
  } else if (preset == "triangle") {
    spec = preset_triangle();
  } else if (preset == "datacenter") {
    spec = preset_datacenter();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (box, triangle, datacenter)");
  }

  spec.name = cfg.get_string("experiment.name", spec.name);
  spec.n_seeds = static_cast<int>(cfg.get_int("experiment.seeds", spec.n_seeds));
  spec.master_seed =
      static_cast<std::uint64_t>(cfg.get_int("experiment.master_seed",
                                             static_cast<long long>(spec.master_seed)));
  spec.output_dir = cfg.get_string("experiment.output_dir", spec.output_dir);

  spec.run.horizon = cfg.get_int("run.horizon", spec.run.horizon);
  if (cfg.has("run.explore_steps")) spec.run.explore_override = cfg.get_int("run.explore_steps", 0);
  if (cfg.has("run.step_size")) spec.run.step_override = cfg.get_double("run.step_size", 0.0);
  spec.run.delta = cfg.get_double("run.delta", spec.run.delta);
  spec.run.ridge = cfg.get_double("run.ridge", spec.run.ridge);
  spec.run.eps_opt = cfg.get_double("run.eps_opt", spec.run.eps_opt);
  spec.run.known_set_ablation = cfg.get_bool("run.known_set_ablation", spec.run.known_set_ablation);
  if (cfg.has("run.checkpoints")) spec.run.checkpoints = cfg.get_int_list("run.checkpoints");
  if (cfg.has("run.norm_bound")) spec.run.norm_bound = cfg.get_double("run.norm_bound", 0.0);
  if (cfg.has("run.grad_bound")) spec.run.grad_bound = cfg.get_double("run.grad_bound", 0.0);
  if (cfg.has("run.row_norm_bound"))
    spec.run.row_norm_bound = cfg.get_double("run.row_norm_bound", 0.0);
  if (cfg.has("run.noise_r")) spec.run.noise_r = cfg.get_double("run.noise_r", 0.0);

  if (cfg.has("scenario.kind")) spec.kind = parse_scenario_kind(cfg.get_string("scenario.kind", ""));
  spec.c_lower = cfg.get_double("scenario.c_lower", spec.c_lower);
  spec.c_upper = cfg.get_double("scenario.c_upper", spec.c_upper);
  spec.lambda_dc = cfg.get_double("scenario.lambda_dc", spec.lambda_dc);
  spec.prices_path = cfg.get_string("scenario.prices_path", spec.prices_path);

  if (cfg.has("environment.A")) spec.A = cfg.get_matrix("environment.A");
  if (cfg.has("environment.b")) spec.b = cfg.get_vector("environment.b");
  if (cfg.has("environment.box_lower")) spec.box_lower = cfg.get_vector("environment.box_lower");
  if (cfg.has("environment.box_upper")) spec.box_upper = cfg.get_vector("environment.box_upper");
  if (cfg.has("environment.baseline")) spec.baseline_action = cfg.get_vector("environment.baseline");
  spec.noise_std = cfg.get_double("environment.noise_std", spec.noise_std);

  if (spec.A.rows() != spec.b.size())
    throw ConfigError("environment.A and environment.b disagree on the row count");
  if (spec.A.cols() != spec.box_lower.size() || spec.A.cols() != spec.box_upper.size() ||
      spec.A.cols() != spec.baseline_action.size())
    throw ConfigError("environment matrices disagree on the dimension");
  if (spec.n_seeds < 1) throw ConfigError("experiment.seeds must be at least 1");
  return spec;
}

Environment make_environment(const ExperimentSpec& spec, std::uint64_t seed) {
  return Environment(TruePolytope(spec.A, spec.b), AmbientSet(spec.box_lower, spec.box_upper),
                     spec.baseline_action, spec.noise_std, seed);
}

PriceTable resolve_prices(const ExperimentSpec& spec) {
  if (spec.prices_path.empty())
    return synthetic_lbmp(static_cast<int>(spec.run.horizon), spec.master_seed);
  const fs::path p(spec.prices_path);
  if (fs::exists(p)) return load_lbmp_csv(p.string());
  if (p.is_relative()) {
    if (const char* dir = std::getenv("SAFE_OCO_DATA_DIR")) {
      const fs::path alt = fs::path(dir) / p;
      if (fs::exists(alt)) return load_lbmp_csv(alt.string());
    }
  }
  throw DataError("price file not found: " + spec.prices_path +
                  " (also tried $SAFE_OCO_DATA_DIR)");
}

Scenario make_scenario(const ExperimentSpec& spec, std::uint64_t seed) {
  const int d = static_cast<int>(spec.A.cols());
  const int horizon = static_cast<int>(spec.run.horizon);
  switch (spec.kind) {
    case ScenarioKind::f1_linear:
      return Scenario::make_f1(seed, spec.c_lower, spec.c_upper, d, horizon);
    case ScenarioKind::f2_quadratic:
      return Scenario::make_f2(seed, spec.c_lower, spec.c_upper, d, horizon,
                               AmbientSet(spec.box_lower, spec.box_upper));
    case ScenarioKind::f3_resource:
      return Scenario::make_f3(seed, d, horizon);
    case ScenarioKind::datacenter:
      return Scenario::make_datacenter(resolve_prices(spec), spec.lambda_dc, horizon,
                                       AmbientSet(spec.box_lower, spec.box_upper));
  }
  throw ConfigError("unknown scenario kind");
}

std::vector<AggregateRow> aggregate_traces(const std::vector<std::vector<CheckpointRow>>& traces) {
  if (traces.empty()) throw DataError("aggregate: no traces");
  const size_t n_rows = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != n_rows) throw DataError("aggregate: traces do not share a checkpoint schedule");

  std::vector<AggregateRow> out(n_rows);
  for (size_t i = 0; i < n_rows; ++i) {
    AggregateRow& row = out[i];
    row.t = traces.front()[i].t;
    row.rt_min = row.rt23_min = std::numeric_limits<double>::infinity();
    row.rt_max = row.rt23_max = -row.rt_min;
    for (const auto& t : traces) {
      if (t[i].t != row.t) throw DataError("aggregate: traces do not share a checkpoint schedule");
      row.rt_mean += t[i].regret_over_t;
      row.rt_min = std::min(row.rt_min, t[i].regret_over_t);
      row.rt_max = std::max(row.rt_max, t[i].regret_over_t);
      row.rt23_mean += t[i].regret_over_t23;
      row.rt23_min = std::min(row.rt23_min, t[i].regret_over_t23);
      row.rt23_max = std::max(row.rt23_max, t[i].regret_over_t23);
    }
    row.rt_mean /= static_cast<double>(traces.size());
    row.rt23_mean /= static_cast<double>(traces.size());
  }
  return out;
}

namespace {

const char* const kTraceHeader =
    "t,phase,cum_cost,regret_prefix,regret_fixed,regret_over_t,regret_over_t23,violations";

void write_trace_csv(const std::string& path, const RegretTrace& trace, std::uint64_t seed) {
  std::string comment = "seed=" + std::to_string(seed) +
                        " wallclock_s=" + fmt_g(trace.summary.wallclock_seconds);
  if (!trace.tuning.horizon_ok) comment += " theory_condition_unmet";
  if (trace.summary.aborted) comment += " aborted=" + csv_quote(trace.summary.abort_reason);
  std::ofstream out = open_csv(path, comment);
  out << kTraceHeader << "\n";
  for (const CheckpointRow& row : trace.checkpoints) {
    out << row.t << ',' << (row.explore_phase ? "explore" : "optimize") << ','
        << fmt_g(row.cum_cost) << ',' << fmt_g(row.regret_prefix) << ','
        << fmt_g(row.regret_fixed) << ',' << fmt_g(row.regret_over_t) << ','
        << fmt_g(row.regret_over_t23) << ',' << row.violations << "\n";
  }
}

void write_plot_csv(const std::string& path, const std::vector<AggregateRow>& rows, bool use_t23) {
  std::ofstream out = open_csv(path, use_t23 ? "regret over t^(2/3)" : "regret over t");
  out << "t,mean,min,max\n";
  for (const AggregateRow& r : rows) {
    if (use_t23)
      out << r.t << ',' << fmt_g(r.rt23_mean) << ',' << fmt_g(r.rt23_min) << ','
          << fmt_g(r.rt23_max) << "\n";
    else
      out << r.t << ',' << fmt_g(r.rt_mean) << ',' << fmt_g(r.rt_min) << ',' << fmt_g(r.rt_max)
          << "\n";
  }
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<AggregateRow>& rows, bool use_t23) {
  const double width = 760, height = 480;
  const double ml = 80, mr = 24, mt = 48, mb = 56;
  const auto pick_mean = [&](const AggregateRow& r) { return use_t23 ? r.rt23_mean : r.rt_mean; };
  const auto pick_min = [&](const AggregateRow& r) { return use_t23 ? r.rt23_min : r.rt_min; };
  const auto pick_max = [&](const AggregateRow& r) { return use_t23 ? r.rt23_max : r.rt_max; };

  double x_lo = std::log10(static_cast<double>(rows.front().t));
  double x_hi = std::log10(static_cast<double>(rows.back().t));
  if (x_hi - x_lo < 1e-9) x_hi = x_lo + 1.0;
  double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
  for (const AggregateRow& r : rows) {
    y_lo = std::min(y_lo, pick_min(r));
    y_hi = std::max(y_hi, pick_max(r));
  }
  const double pad = std::max(1e-12, 0.05 * (y_hi - y_lo));
  y_lo -= pad;
  y_hi += pad;
  if (y_hi - y_lo < 1e-12) {
    y_lo -= 1.0;
    y_hi += 1.0;
  }

  const auto X = [&](long long t) {
    return ml + (std::log10(static_cast<double>(t)) - x_lo) / (x_hi - x_lo) * (width - ml - mr);
  };
  const auto Y = [&](double v) {
    return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\""
      << " font-size=\"16\">" << title << "</text>\n";

  // min-max band
  out << "<polygon fill=\"#b8d4ea\" fill-opacity=\"0.65\" stroke=\"none\" points=\"";
  for (const AggregateRow& r : rows) out << num(X(r.t)) << ',' << num(Y(pick_max(r))) << ' ';
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    out << num(X(it->t)) << ',' << num(Y(pick_min(*it))) << ' ';
  out << "\"/>\n";

  // mean line
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (const AggregateRow& r : rows) out << num(X(r.t)) << ',' << num(Y(pick_mean(r))) << ' ';
  out << "\"/>\n";

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
      << "\" stroke=\"black\"/>\n";

  // x ticks at whole decades
  for (int k = static_cast<int>(std::ceil(x_lo)); k <= static_cast<int>(std::floor(x_hi)); ++k) {
    const double px = ml + (k - x_lo) / (x_hi - x_lo) * (width - ml - mr);
    out << "<line x1=\"" << num(px) << "\" y1=\"" << height - mb << "\" x2=\"" << num(px)
        << "\" y2=\"" << height - mb + 6 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(px) << "\" y=\"" << height - mb + 22
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">1e" << k
        << "</text>\n";
  }
  // y ticks
  for (int k = 0; k <= 4; ++k) {
    const double v = y_lo + (y_hi - y_lo) * k / 4.0;
    const double py = Y(v);
    char label[32];
    std::snprintf(label, sizeof(label), "%.3g", v);
    out << "<line x1=\"" << ml - 6 << "\" y1=\"" << num(py) << "\" x2=\"" << ml << "\" y2=\""
        << num(py) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 10 << "\" y=\"" << num(py + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << label
        << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">t</text>\n";
  out << "<text x=\"20\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 "
      << (mt + height - mb) / 2 << ")\">" << (use_t23 ? "R(t)/t^(2/3)" : "R(t)/t") << "</text>\n";
  out << "</svg>\n";
}

void write_plot_outputs(const std::string& dir, const std::vector<AggregateRow>& agg, bool svg,
                        const std::string& label) {
  write_plot_csv(dir + "/plot_rt_over_t.csv", agg, false);
  write_plot_csv(dir + "/plot_rt_over_t23.csv", agg, true);
  if (svg) {
    write_svg_chart(dir + "/plot_rt_over_t.svg", label + ": R(t)/t", agg, false);
    write_svg_chart(dir + "/plot_rt_over_t23.svg", label + ": R(t)/t^(2/3)", agg, true);
  }
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentSpec& spec, int threads, bool force, bool svg) {
  if (spec.n_seeds < 1) throw ConfigError("run_experiment: need at least one seed");
  fs::create_directories(spec.output_dir);
  const std::string dir = spec.output_dir;
  const int d = static_cast<int>(spec.A.cols());

  std::vector<std::string> outputs = {dir + "/aggregate.csv",
                                      dir + "/plot_rt_over_t.csv",
                                      dir + "/plot_rt_over_t23.csv",
                                      dir + "/explore_actions.csv",
                                      dir + "/estimate_diagnostics.csv",
                                      dir + "/summary.csv"};
  if (d <= 3) outputs.push_back(dir + "/safe_set_vertices.csv");
  if (svg) {
    outputs.push_back(dir + "/plot_rt_over_t.svg");
    outputs.push_back(dir + "/plot_rt_over_t23.svg");
  }
  for (int k = 0; k < spec.n_seeds; ++k)
    outputs.push_back(dir + "/trace_seed" + std::to_string(k) + ".csv");
  require_fresh(outputs, force);

  // Scenarios with per-realization randomness are rebuilt per seed; the
  // datacenter prices are one shared dataset.
  std::optional<Scenario> shared;
  if (spec.kind == ScenarioKind::datacenter) shared.emplace(make_scenario(spec, spec.master_seed));

  const int n = spec.n_seeds;
  std::vector<std::optional<RegretTrace>> traces(static_cast<size_t>(n));
  std::vector<std::string> errors(static_cast<size_t>(n));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= n) return;
      try {
        const std::uint64_t seed = spec.master_seed + static_cast<std::uint64_t>(k);
        Environment env = make_environment(spec, seed);
        RunConfig cfg = spec.run;
        cfg.rng_seed = seed;
        if (shared.has_value()) {
          traces[static_cast<size_t>(k)] = run_sopgd(cfg, env, *shared);
        } else {
          const Scenario scenario = make_scenario(spec, seed);
          traces[static_cast<size_t>(k)] = run_sopgd(cfg, env, scenario);
        }
      } catch (const std::exception& e) {
        errors[static_cast<size_t>(k)] = e.what();
      }
    }
  };

  int n_workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min(n_workers, n));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  // Single-threaded collection, seed order throughout.
  ExperimentSummary summary;
  summary.n_seeds = n;
  summary.output_dir = dir;
  std::vector<std::vector<CheckpointRow>> complete;
  for (int k = 0; k < n; ++k) {
    const auto& trace = traces[static_cast<size_t>(k)];
    RunSummary rs;
    if (trace.has_value()) {
      rs = trace->summary;
      write_trace_csv(dir + "/trace_seed" + std::to_string(k) + ".csv", *trace,
                      spec.master_seed + static_cast<std::uint64_t>(k));
      if (!trace->summary.aborted) complete.push_back(trace->checkpoints);
      summary.total_violations += trace->summary.violations;
      summary.all_horizon_ok = summary.all_horizon_ok && trace->tuning.horizon_ok;
    } else {
      rs.aborted = true;
      rs.abort_reason = errors[static_cast<size_t>(k)];
    }
    if (!rs.aborted) ++summary.completed;
    summary.runs.push_back(rs);
  }

  if (!complete.empty()) {
    const auto agg = aggregate_traces(complete);
    std::ofstream out = open_csv(dir + "/aggregate.csv", "mean/min/max across seeds");
    out << "t,rt_mean,rt_min,rt_max,rt23_mean,rt23_min,rt23_max\n";
    for (const AggregateRow& r : agg)
      out << r.t << ',' << fmt_g(r.rt_mean) << ',' << fmt_g(r.rt_min) << ',' << fmt_g(r.rt_max)
          << ',' << fmt_g(r.rt23_mean) << ',' << fmt_g(r.rt23_min) << ',' << fmt_g(r.rt23_max)
          << "\n";
    out.close();
    write_plot_outputs(dir, agg, svg, spec.name);
  }

  {
    std::ofstream out = open_csv(dir + "/explore_actions.csv", "exploration-phase actions");
    out << "seed,t";
    for (int j = 1; j <= d; ++j) out << ",x_" << j;
    const int m = static_cast<int>(spec.A.rows());
    for (int i = 1; i <= m; ++i) out << ",y_" << i;
    out << "\n";
    for (int k = 0; k < n; ++k) {
      if (!traces[static_cast<size_t>(k)].has_value()) continue;
      const ExplorationLog& log = traces[static_cast<size_t>(k)]->exploration;
      for (long long t = 0; t < log.steps(); ++t) {
        out << k << ',' << (t + 1);
        for (int j = 0; j < d; ++j) out << ',' << fmt_g(log.actions(t, j));
        for (int i = 0; i < m; ++i) out << ',' << fmt_g(log.observations(t, i));
        out << "\n";
      }
    }
  }

  if (d <= 3) {
    const auto vertices =
        enumerate_vertices(TruePolytope(spec.A, spec.b), AmbientSet(spec.box_lower, spec.box_upper));
    std::ofstream out = open_csv(dir + "/safe_set_vertices.csv", "true safe set vertices");
    for (int j = 1; j <= d; ++j) out << (j == 1 ? "" : ",") << "x_" << j;
    out << "\n";
    for (const Vector& v : vertices) {
      for (int j = 0; j < d; ++j) out << (j == 0 ? "" : ",") << fmt_g(v[j]);
      out << "\n";
    }
  }

  {
    std::ofstream out = open_csv(dir + "/estimate_diagnostics.csv", "per-seed fit diagnostics");
    out << "seed,beta,lambda_min,gamma,explore_steps,jitter_applied";
    const int m = static_cast<int>(spec.A.rows());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) out << ",a_hat_" << i << "_" << j;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out << ",V_" << i << "_" << j;
    out << "\n";
    for (int k = 0; k < n; ++k) {
      if (!traces[static_cast<size_t>(k)].has_value()) continue;
      const RegretTrace& tr = *traces[static_cast<size_t>(k)];
      out << k << ',' << fmt_g(tr.beta_used) << ',' << fmt_g(tr.summary.lambda_min) << ','
          << fmt_g(tr.tuning.gamma) << ',' << tr.tuning.explore_steps << ','
          << (tr.estimate.jitter_applied ? 1 : 0);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) out << ',' << fmt_g(tr.estimate.a_hat(i, j));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out << ',' << fmt_g(tr.estimate.gram(i, j));
      out << "\n";
    }
  }

  {
    std::ofstream out = open_csv(dir + "/summary.csv", "per-seed run summary");
    out << "seed,scenario,horizon,explore_steps,step_size,gamma,beta,lambda_min,"
           "t0_min_chernoff,t0_min_theorem,horizon_ok,known_set_ablation,violations,"
           "final_regret_prefix,final_regret_fixed,aborted,abort_reason\n";
    for (int k = 0; k < n; ++k) {
      const RunSummary& rs = summary.runs[static_cast<size_t>(k)];
      const bool have = traces[static_cast<size_t>(k)].has_value();
      const RegretTrace* tr = have ? &*traces[static_cast<size_t>(k)] : nullptr;
      out << k << ',' << scenario_kind_name(spec.kind) << ',' << spec.run.horizon << ','
          << (have ? std::to_string(tr->tuning.explore_steps) : "") << ','
          << (have ? fmt_g(tr->tuning.step_size) : "") << ','
          << (have ? fmt_g(tr->tuning.gamma) : "") << ',' << (have ? fmt_g(tr->beta_used) : "")
          << ',' << (have ? fmt_g(rs.lambda_min) : "") << ','
          << (have ? std::to_string(tr->tuning.t0_min_chernoff) : "") << ','
          << (have ? std::to_string(tr->tuning.t0_min_theorem) : "") << ','
          << (have ? std::to_string(tr->tuning.horizon_ok ? 1 : 0) : "") << ','
          << (spec.run.known_set_ablation ? 1 : 0) << ',' << rs.violations << ','
          << fmt_g(rs.final_regret_prefix) << ',' << fmt_g(rs.final_regret_fixed) << ','
          << (rs.aborted ? 1 : 0) << ',' << csv_quote(rs.abort_reason) << "\n";
    }
  }

  for (int k = 0; k < n; ++k) {
    const RunSummary& rs = summary.runs[static_cast<size_t>(k)];
    std::cout << spec.name << " seed " << k << ": "
              << (rs.aborted ? "ABORTED (" + rs.abort_reason + ")"
                             : "violations=" + std::to_string(rs.violations) +
                                   " final_regret=" + fmt_g(rs.final_regret_prefix))
              << "\n";
  }
  std::cout << spec.name << ": " << summary.completed << "/" << n << " runs completed, "
            << summary.total_violations << " total violations, outputs in " << dir << "\n";
  return summary;
}

std::vector<CheckpointRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace: " + path);
  std::vector<CheckpointRow> rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kTraceHeader) throw ParseError("unexpected trace header in " + path, line_no);
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw ParseError("expected 8 columns in " + path, line_no);
    try {
      CheckpointRow row;
      row.t = std::stoll(cells[0]);
      if (cells[1] == "explore") {
        row.explore_phase = true;
      } else if (cells[1] == "optimize") {
        row.explore_phase = false;
      } else {
        throw std::invalid_argument("phase");
      }
      row.cum_cost = std::stod(cells[2]);
      row.regret_prefix = std::stod(cells[3]);
      row.regret_fixed = std::stod(cells[4]);
      row.regret_over_t = std::stod(cells[5]);
      row.regret_over_t23 = std::stod(cells[6]);
      row.violations = std::stoll(cells[7]);
      rows.push_back(row);
    } catch (const std::exception&) {
      throw ParseError("malformed trace row in " + path, line_no);
    }
  }
  if (rows.empty()) throw DataError("trace has no checkpoint rows: " + path);
  return rows;
}

void emit_plot_data(const std::vector<std::string>& trace_paths, const std::string& out_dir,
                    bool force, bool svg) {
  if (trace_paths.empty()) throw ConfigError("plot: no trace files given");
  fs::create_directories(out_dir);
  std::vector<std::string> outputs = {out_dir + "/plot_rt_over_t.csv",
                                      out_dir + "/plot_rt_over_t23.csv"};
  if (svg) {
    outputs.push_back(out_dir + "/plot_rt_over_t.svg");
    outputs.push_back(out_dir + "/plot_rt_over_t23.svg");
  }
  require_fresh(outputs, force);

  std::vector<std::vector<CheckpointRow>> traces;
  traces.reserve(trace_paths.size());
  for (const std::string& p : trace_paths) traces.push_back(read_trace_csv(p));
  write_plot_outputs(out_dir, aggregate_traces(traces), svg, "aggregate");
}

VerifySummary run_verification(const ExperimentSpec& spec, int n_seeds, long long n_samples,
                               const std::string& out_dir, bool force) {
  if (n_seeds < 1) throw ConfigError("verify: need at least one seed");
  if (n_samples < 1) throw ConfigError("verify: need at least one sample");
  fs::create_directories(out_dir);
  const std::string csv_path = out_dir + "/verification.csv";
  require_fresh({csv_path}, force);

  const TruePolytope truth(spec.A, spec.b);
  const AmbientSet box(spec.box_lower, spec.box_upper);
  const int d = truth.dim();
  const int m = truth.rows();
  const long long t0 = spec.run.explore_override.value_or(explore_steps_for(spec.run.horizon));
  const double norm_bound = spec.run.norm_bound.value_or(box.norm_bound);
  const double row_norm_bound = spec.run.row_norm_bound.value_or(truth.max_row_norm());
  const double noise_r = spec.run.noise_r.value_or(spec.noise_std);
  const double radius = std::min(1.0, norm_bound);
  const double sigma2 = radius * radius / d;
  const double beta = confidence_radius(noise_r, d, t0, norm_bound, spec.run.ridge, spec.run.delta,
                                        m, row_norm_bound);
  const double beta_horizon = confidence_radius(noise_r, d, spec.run.horizon, norm_bound,
                                                spec.run.ridge, spec.run.delta, m, row_norm_bound);

  // the inflated window for the naive-polytope escape check
  const Vector span = spec.box_upper - spec.box_lower;
  const AmbientSet inflated(spec.box_lower - 0.1 * span, spec.box_upper + 0.1 * span);

  std::ofstream out = open_csv(csv_path, "lemma checks");
  out << "check_name,seed,value,bound,holds\n";

  VerifySummary vs;
  vs.seeds = n_seeds;
  double gamma = 0.0;
  for (int k = 0; k < n_seeds; ++k) {
    const std::uint64_t seed = spec.master_seed + static_cast<std::uint64_t>(k);
    Environment env = make_environment(spec, seed);
    gamma = resolve_gamma(env.baseline(), truth.b, row_norm_bound, radius, box);
    const ExplorationLog log = run_exploration(env, t0, gamma, radius, seed);
    const RlsEstimate est = fit_rls(log, spec.run.ridge);

    const bool coverage = covers_truth(est, beta, truth.A);
    vs.coverage_hits += coverage;
    out << "coverage," << k << ',' << (coverage ? 1 : 0) << ",1," << (coverage ? 1 : 0) << "\n";

    const EigminReport eig = check_eigmin(est.gram, spec.run.ridge, gamma, sigma2, t0);
    vs.eigmin_hits += eig.holds;
    out << "eigmin," << k << ',' << fmt_g(eig.lambda_min) << ',' << fmt_g(eig.bound) << ','
        << (eig.holds ? 1 : 0) << "\n";

    const double tau_in = 2.0 * beta * norm_bound / std::sqrt(eig.lambda_min);
    const ShrunkPolytope shrunk(truth, tau_in);
    const ConservativeSafeSet cons = build_conservative_set(est, beta, truth.b, box);
    Rng sample_rng(mix_seed(seed, kNestingSampleTag));
    NestingReport nest = check_nesting(truth, cons, shrunk, box, n_samples, sample_rng);
    nest.coverage_holds = coverage;
    if (coverage)
      vs.nesting_violations_given_coverage += nest.violations_shrunk_not_conservative +
                                              nest.violations_conservative_not_true;
    out << "nesting_shrunk_in_conservative," << k << ','
        << nest.violations_shrunk_not_conservative << ",0,"
        << (nest.violations_shrunk_not_conservative == 0 ? 1 : 0) << "\n";
    out << "nesting_conservative_in_true," << k << ',' << nest.violations_conservative_not_true
        << ",0," << (nest.violations_conservative_not_true == 0 ? 1 : 0) << "\n";

    // the same estimate without the margin: escapes are the expected failure
    const ConservativeSafeSet naive = build_conservative_set(est, 0.0, truth.b, inflated);
    Rng naive_rng(mix_seed(seed, kNestingSampleTag + 1));
    const NestingReport escape = check_nesting(truth, naive, shrunk, inflated, n_samples, naive_rng);
    vs.naive_escapes += escape.violations_conservative_not_true;
    out << "naive_polytope_escapes," << k << ',' << escape.violations_conservative_not_true
        << ",0," << (escape.violations_conservative_not_true == 0 ? 1 : 0) << "\n";
  }

  const BaselineSpec baseline(spec.baseline_action, spec.A * spec.baseline_action, spec.b);
  const T0Bounds bounds = check_t0_conditions(norm_bound, gamma, sigma2, d, spec.run.delta,
                                              beta_horizon, baseline.safety_gap);
  vs.t0_chernoff_ok = t0 >= bounds.chernoff;
  vs.t0_theorem_ok = t0 >= bounds.theorem;
  out << "t0_chernoff,-1," << t0 << ',' << bounds.chernoff << ',' << (vs.t0_chernoff_ok ? 1 : 0)
      << "\n";
  out << "t0_theorem,-1," << t0 << ',' << bounds.theorem << ',' << (vs.t0_theorem_ok ? 1 : 0)
      << "\n";

  const double need = 1.0 - spec.run.delta;
  const bool coverage_ok = vs.coverage_hits >= need * n_seeds;
  const bool eigmin_ok = vs.eigmin_hits >= need * n_seeds;
  vs.all_ok = coverage_ok && eigmin_ok && vs.nesting_violations_given_coverage == 0;

  std::cout << "verification: " << n_seeds << " seeds, " << n_samples << " samples each\n"
            << "  T0 = " << t0 << " (eigenvalue condition needs >= " << bounds.chernoff
            << ", regret condition needs >= " << bounds.theorem << ")\n"
            << "  coverage event: " << vs.coverage_hits << "/" << n_seeds << "\n"
            << "  eigenvalue bound: " << vs.eigmin_hits << "/" << n_seeds << "\n"
            << "  nesting violations given coverage: " << vs.nesting_violations_given_coverage
            << "\n"
            << "  naive (margin-free) polytope escapes: " << vs.naive_escapes
            << " sampled points outside the true set\n"
            << "  overall: " << (vs.all_ok ? "PASS" : "FAIL") << "\n";
  return vs;
}

void inspect_estimate(const ExperimentSpec& spec, std::uint64_t seed) {
  const TruePolytope truth(spec.A, spec.b);
  const AmbientSet box(spec.box_lower, spec.box_upper);
  const int d = truth.dim();
  const int m = truth.rows();
  const long long t0 = spec.run.explore_override.value_or(explore_steps_for(spec.run.horizon));
  const double norm_bound = spec.run.norm_bound.value_or(box.norm_bound);
  const double row_norm_bound = spec.run.row_norm_bound.value_or(truth.max_row_norm());
  const double noise_r = spec.run.noise_r.value_or(spec.noise_std);
  const double radius = std::min(1.0, norm_bound);

  Environment env = make_environment(spec, seed);
  const double gamma = resolve_gamma(env.baseline(), truth.b, row_norm_bound, radius, box);
  const ExplorationLog log = run_exploration(env, t0, gamma, radius, seed);
  const RlsEstimate est = fit_rls(log, spec.run.ridge);
  const double beta = confidence_radius(noise_r, d, t0, norm_bound, spec.run.ridge, spec.run.delta,
                                        m, row_norm_bound);
  const EigminReport eig = check_eigmin(est.gram, spec.run.ridge, gamma, radius * radius / d, t0);

  std::printf("seed %llu: %d rows, dimension %d\n", static_cast<unsigned long long>(seed), m, d);
  std::printf("  explore_steps = %lld, gamma = %.6g, radius = %.6g\n", t0, gamma, radius);
  std::printf("  beta = %.12g, lambda_min(V) = %.12g (bound %.6g, %s)\n", beta, eig.lambda_min,
              eig.bound, eig.holds ? "holds" : "violated");
  std::printf("  jitter_applied = %s, coverage = %s\n", est.jitter_applied ? "yes" : "no",
              covers_truth(est, beta, truth.A) ? "yes" : "no");
  for (int i = 0; i < m; ++i) {
    std::printf("  row %d: estimate [", i);
    for (int j = 0; j < d; ++j) std::printf("%s%.9g", j ? ", " : "", est.a_hat(i, j));
    std::printf("], truth [");
    for (int j = 0; j < d; ++j) std::printf("%s%.9g", j ? ", " : "", truth.A(i, j));
    std::printf("], error %.3e\n", (est.a_hat.row(i) - truth.A.row(i)).norm());
  }
}

}  // namespace safeoco
