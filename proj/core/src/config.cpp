#include "conicxray/config.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "conicxray/errors.hpp"

namespace conicxray {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& v, const std::string& key, int line) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (...) {
    throw FormatError("config line " + std::to_string(line) + ": malformed number for '" + key +
                      "': " + v);
  }
  if (pos != v.size())
    throw FormatError("config line " + std::to_string(line) + ": trailing characters in number for '" +
                      key + "': " + v);
  return d;
}

int parse_int(const std::string& v, const std::string& key, int line) {
  const double d = parse_double(v, key, line);
  const int i = static_cast<int>(d);
  if (d != i)
    throw FormatError("config line " + std::to_string(line) + ": expected integer for '" + key +
                      "'");
  return i;
}

std::vector<double> parse_list(const std::string& v, const std::string& key, int line) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, key, line));
  }
  if (out.empty())
    throw FormatError("config line " + std::to_string(line) + ": empty list for '" + key + "'");
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.config_hash = fnv1a(text.data(), text.size());

  std::set<std::string> seen;       // "section.key"
  std::set<std::string> sections;   // seen section headers
  std::string section;

  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const std::size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw FormatError(origin + " line " + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      static const std::set<std::string> known{"metric", "grid", "operator", "solver", "output"};
      if (!known.count(section))
        throw FormatError(origin + " line " + std::to_string(line) + ": unknown section [" +
                          section + "]");
      sections.insert(section);
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw FormatError(origin + " line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    const std::string qual = section + "." + key;
    if (seen.count(qual))
      throw FormatError(origin + " line " + std::to_string(line) + ": duplicate key '" + key +
                        "' in [" + section + "]");
    seen.insert(qual);

    bool known_key = true;
    if (section.empty()) {
      if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(parse_double(val, key, line));
      else
        known_key = false;
    } else if (section == "metric") {
      if (key == "link") cfg.link_kind = val;
      else if (key == "radius") cfg.radius = parse_double(val, key, line);
      else if (key == "amplitude") cfg.amplitude = parse_double(val, key, line);
      else if (key == "harmonic_degree") cfg.harmonic_degree = parse_int(val, key, line);
      else if (key == "warp_coeffs") cfg.warp_coeffs = parse_list(val, key, line);
      else if (key == "x0") cfg.x0 = parse_double(val, key, line);
      else if (key == "p") cfg.p = parse_double(val, key, line);
      else known_key = false;
    } else if (section == "grid") {
      if (key == "nx") cfg.nx = parse_int(val, key, line);
      else if (key == "ny") cfg.ny = parse_int(val, key, line);
      else if (key == "x_min") cfg.x_min = parse_double(val, key, line);
      else if (key == "x_top") cfg.x_top = parse_double(val, key, line);
      else known_key = false;
    } else if (section == "operator") {
      if (key == "h_list") cfg.h_list = parse_list(val, key, line);
      else if (key == "S") cfg.S = parse_double(val, key, line);
      else if (key == "n_lambda") cfg.n_lambda = parse_int(val, key, line);
      else if (key == "n_omega") cfg.n_omega = parse_int(val, key, line);
      else if (key == "weight") cfg.weight = val;
      else if (key == "xbar0") cfg.xbar0 = parse_double(val, key, line);
      else if (key == "localizer") cfg.localizer = val;
      else known_key = false;
    } else if (section == "solver") {
      if (key == "kind") cfg.solver = val;
      else if (key == "max_iters") cfg.max_iters = parse_int(val, key, line);
      else if (key == "rtol") cfg.rtol = parse_double(val, key, line);
      else if (key == "trials") cfg.trials = parse_int(val, key, line);
      else if (key == "c_true") cfg.c_true = parse_double(val, key, line);
      else if (key == "threshold") cfg.threshold = parse_double(val, key, line);
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_double(val, key, line));
      else known_key = false;
    } else if (section == "output") {
      if (key == "dir") cfg.out_dir = val;
      else known_key = false;
    }
    if (!known_key)
      throw FormatError(origin + " line " + std::to_string(line) + ": unknown key '" + key +
                        "' in section [" + (section.empty() ? "<top>" : section) + "]");
  }

  if (!sections.count("metric") || !sections.count("grid"))
    throw FormatError(origin + ": sections [metric] and [grid] are required");

  // Range validation mirrors the module preconditions.
  if (!(cfg.x0 > 0)) throw FormatError(origin + ": x0 must be positive");
  if (!(cfg.radius > 0)) throw FormatError(origin + ": radius must be positive");
  if (!(cfg.p > 0)) throw FormatError(origin + ": p must be positive");
  if (cfg.nx < 2 || cfg.ny < 1) throw FormatError(origin + ": grid too small");
  if (!(cfg.x_min > 0)) throw FormatError(origin + ": x_min must be positive");
  for (double h : cfg.h_list)
    if (!(h > 0) || !(h < 1)) throw FormatError(origin + ": h values must lie in (0, 1)");
  if (!(cfg.rtol > 0) || !(cfg.rtol <= 1e-2))
    throw FormatError(origin + ": rtol must lie in (0, 1e-2]");
  if (cfg.trials < 0) throw FormatError(origin + ": trials must be nonnegative");
  if (cfg.link_kind != "circle" && cfg.link_kind != "sphere" &&
      cfg.link_kind != "perturbed_sphere")
    throw FormatError(origin + ": link must be circle | sphere | perturbed_sphere");
  if (cfg.weight != "one_cusp" && cfg.weight != "combined")
    throw FormatError(origin + ": weight must be one_cusp | combined");
  if (cfg.localizer != "gaussian" && cfg.localizer != "vanishing_center")
    throw FormatError(origin + ": localizer must be gaussian | vanishing_center");
  if (cfg.solver != "cg" && cfg.solver != "landweber")
    throw FormatError(origin + ": solver must be cg | landweber");
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("parse_config: cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

ConicMetric ExperimentConfig::make_metric() const {
  LinkMetric link = link_kind == "circle"
                        ? LinkMetric::circle(radius)
                        : link_kind == "sphere"
                              ? LinkMetric::round_sphere(radius)
                              : LinkMetric::perturbed_sphere(radius, amplitude, harmonic_degree);
  return ConicMetric(link, x0, WarpProfile(warp_coeffs), p);
}

std::shared_ptr<GridSpec> ExperimentConfig::make_grid(const ConicMetric& metric) const {
  const double top = x_top > 0 ? x_top : 0.7 * metric.x0();
  return std::make_shared<GridSpec>(metric, nx, ny, x_min, top);
}

Localizer ExperimentConfig::make_localizer() const {
  return Localizer(S, -0.5,
                   localizer == "gaussian" ? Localizer::Kind::Gaussian
                                           : Localizer::Kind::VanishingCenter);
}

WeightSpec ExperimentConfig::make_weight() const {
  if (weight == "one_cusp") return WeightSpec::one_cusp(p);
  const double top = x_top > 0 ? x_top : 0.7 * x0;
  return WeightSpec::combined(xbar0 > 0 ? xbar0 : top * 1.2);
}

ReconstructionConfig ExperimentConfig::make_recon(double h) const {
  ReconstructionConfig rc;
  rc.h = h;
  rc.weight = make_weight();
  rc.loc = make_localizer();
  rc.solver = solver == "cg" ? SolverKind::ConjugateGradientNormal : SolverKind::Landweber;
  rc.max_iters = max_iters;
  rc.rtol = rtol;
  rc.op.n_lambda = n_lambda;
  rc.op.n_omega = n_omega;
  rc.seed = seed;
  return rc;
}

}  // namespace conicxray
