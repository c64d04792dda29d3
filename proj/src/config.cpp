#include "ctrl_duality/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/payoffs.hpp"

namespace ctrl_duality {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"kind", "id", "seed_stage1", "seed_stage2", "output"}},
      {"uvm",
       {"assets", "x0", "sigma_lo", "sigma_hi", "sigma_hat", "rho_lo", "rho_hi", "rho_hat",
        "horizon", "payoff", "steps"}},
      {"bsde", {"paths", "basis", "degree", "scale", "ridge", "clamp_quantile"}},
      {"bounds",
       {"paths", "ls_steps", "method", "net_spacing", "enumerate_cap", "restarts",
        "random_starts", "block", "max_evaluations"}},
      {"cva",
       {"intensities", "steps", "paths", "sigma", "horizon", "x0", "scale", "max_substep", "phi",
        "pde"}},
      {"american", {"strike", "cap", "steps", "paths"}},
      {"pde", {"nodes", "steps"}},
  };
  return keys;
}

std::string field(const std::string& section, const std::string& key) {
  return section + "." + key;
}

std::vector<std::string> tokens(const std::string& text) {
  std::vector<std::string> out;
  boost::split(out, text, boost::is_any_of(" \t,"), boost::token_compress_on);
  out.erase(std::remove(out.begin(), out.end(), std::string{}), out.end());
  return out;
}

double to_double(const std::string& text, const std::string& name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name + ": expected a number, got '" + text + "'");
  }
}

std::uint64_t to_unsigned(const std::string& text, const std::string& name) {
  try {
    if (!text.empty() && text.front() == '-') throw std::invalid_argument(text);
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name + ": expected a non-negative integer, got '" + text + "'");
  }
}

bool to_bool(const std::string& text, const std::string& name) {
  const std::string t = boost::to_lower_copy(text);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ConfigError(name + ": expected true/false, got '" + text + "'");
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto value = sec->get_optional<std::string>(key);
    if (!value) return std::nullopt;
    return boost::trim_copy(*value);
  }

  void num(const std::string& s, const std::string& k, double& out) const {
    if (auto v = get(s, k)) out = to_double(*v, field(s, k));
  }
  template <class T>
  void count(const std::string& s, const std::string& k, T& out) const {
    if (auto v = get(s, k)) out = static_cast<T>(to_unsigned(*v, field(s, k)));
  }
  void flag(const std::string& s, const std::string& k, bool& out) const {
    if (auto v = get(s, k)) out = to_bool(*v, field(s, k));
  }
  void nums(const std::string& s, const std::string& k, std::vector<double>& out) const {
    if (auto v = get(s, k)) {
      out.clear();
      for (const auto& t : tokens(*v)) out.push_back(to_double(t, field(s, k)));
    }
  }
  void counts(const std::string& s, const std::string& k, std::vector<std::size_t>& out) const {
    if (auto v = get(s, k)) {
      out.clear();
      for (const auto& t : tokens(*v)) out.push_back(to_unsigned(t, field(s, k)));
    }
  }

 private:
  const pt::ptree& tree_;
};

void broadcast(std::vector<double>& v, std::size_t n, const std::string& name) {
  if (v.size() == 1 && n > 1) v.assign(n, v.front());
  if (v.size() != n) {
    throw ConfigError(name + ": expected 1 or " + std::to_string(n) + " values, got " +
                      std::to_string(v.size()));
  }
}

void check_steps(const std::vector<std::size_t>& steps, const std::string& name) {
  if (steps.empty()) throw ConfigError(name + ": at least one entry is required");
  for (auto n : steps) {
    if (n == 0) throw ConfigError(name + ": step counts must be positive");
  }
}

}  // namespace

std::string PayoffDescriptor::str() const {
  std::ostringstream os;
  os << name;
  for (double p : params) os << ' ' << p;
  return os.str();
}

PayoffDescriptor parse_payoff(const std::string& text) {
  const auto parts = tokens(text);
  if (parts.empty()) throw ConfigError("uvm.payoff: empty payoff descriptor");
  PayoffDescriptor d{parts.front(), {}};
  for (std::size_t i = 1; i < parts.size(); ++i) d.params.push_back(to_double(parts[i], "uvm.payoff"));
  make_payoff(d);
  return d;
}

payoffs::Terminal make_payoff(const PayoffDescriptor& d) {
  const auto need = [&](std::size_t n) {
    if (d.params.size() != n) {
      throw ConfigError("uvm.payoff: '" + d.name + "' takes " + std::to_string(n) +
                        " parameter(s), got " + std::to_string(d.params.size()));
    }
  };
  const auto& p = d.params;
  if (d.name == "call_spread") {
    need(2);
    if (p[0] > p[1]) throw ConfigError("uvm.payoff: call_spread needs k1 <= k2");
    return payoffs::call_spread(p[0], p[1]);
  }
  if (d.name == "call") return need(1), payoffs::call(p[0]);
  if (d.name == "put") return need(1), payoffs::put(p[0]);
  if (d.name == "digital") {
    if (p.size() == 1) return payoffs::digital(p[0], 100.0);
    return need(2), payoffs::digital(p[0], p[1]);
  }
  if (d.name == "linear") return need(0), payoffs::linear();
  if (d.name == "outperformer") return need(0), payoffs::outperformer();
  if (d.name == "outperformer_spread") {
    need(2);
    return payoffs::outperformer_spread(p[0], p[1]);
  }
  throw ConfigError("uvm.payoff: unknown payoff '" + d.name +
                    "' (call_spread, call, put, digital, linear, outperformer, "
                    "outperformer_spread)");
}

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::uvm: return "uvm";
    case ExperimentKind::cva: return "cva";
    case ExperimentKind::american: return "american";
    case ExperimentKind::pde: return "pde";
  }
  return "?";
}

ExperimentConfig parse_config(std::istream& in) {
  // '#' comments are accepted in addition to the ';' of the INI parser.
  std::ostringstream cleaned;
  for (std::string line; std::getline(in, line);) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    cleaned << line << '\n';
  }
  pt::ptree tree;
  try {
    std::istringstream is(cleaned.str());
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }

  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    const auto known = keys.find(section);
    if (known == keys.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!known->second.count(key)) throw ConfigError("config: unknown key " + field(section, key));
      (void)value;
    }
  }

  const Reader r(tree);
  ExperimentConfig c;

  if (auto v = r.get("experiment", "kind")) {
    if (*v == "uvm") c.kind = ExperimentKind::uvm;
    else if (*v == "cva") c.kind = ExperimentKind::cva;
    else if (*v == "american") c.kind = ExperimentKind::american;
    else if (*v == "pde") c.kind = ExperimentKind::pde;
    else throw ConfigError("experiment.kind: expected uvm, cva, american or pde, got '" + *v + "'");
  }
  if (auto v = r.get("experiment", "id")) c.id = *v;
  r.count("experiment", "seed_stage1", c.seed_stage1);
  r.count("experiment", "seed_stage2", c.seed_stage2);
  if (auto v = r.get("experiment", "output")) c.output = *v;

  auto& u = c.uvm;
  r.count("uvm", "assets", u.assets);
  r.nums("uvm", "x0", u.x0);
  r.nums("uvm", "sigma_lo", u.sigma_lo);
  r.nums("uvm", "sigma_hi", u.sigma_hi);
  broadcast(u.x0, u.assets, "uvm.x0");
  broadcast(u.sigma_lo, u.assets, "uvm.sigma_lo");
  broadcast(u.sigma_hi, u.assets, "uvm.sigma_hi");
  if (r.get("uvm", "sigma_hat")) {
    r.nums("uvm", "sigma_hat", u.sigma_hat);
    broadcast(u.sigma_hat, u.assets, "uvm.sigma_hat");
  } else {
    u.sigma_hat.resize(u.assets);
    for (std::size_t j = 0; j < u.assets; ++j) u.sigma_hat[j] = 0.5 * (u.sigma_lo[j] + u.sigma_hi[j]);
  }
  r.num("uvm", "rho_lo", u.rho_lo);
  r.num("uvm", "rho_hi", u.rho_hi);
  if (r.get("uvm", "rho_hat")) r.num("uvm", "rho_hat", u.rho_hat);
  else u.rho_hat = 0.5 * (u.rho_lo + u.rho_hi);
  r.num("uvm", "horizon", u.horizon);
  if (auto v = r.get("uvm", "payoff")) c.payoff = parse_payoff(*v);
  u.payoff = make_payoff(c.payoff);
  r.counts("uvm", "steps", c.steps);

  auto& b = c.bsde;
  r.count("bsde", "paths", b.paths);
  if (auto v = r.get("bsde", "basis")) b.basis.family = *v;
  r.count("bsde", "degree", b.basis.degree);
  r.nums("bsde", "scale", b.basis.scale);
  r.num("bsde", "ridge", b.ridge);
  r.num("bsde", "clamp_quantile", b.clamp_quantile);

  auto& bd = c.bounds;
  r.count("bounds", "paths", bd.paths);
  r.count("bounds", "ls_steps", bd.ls_steps);
  if (auto v = r.get("bounds", "method")) {
    if (*v == "polytope") bd.search.method = SearchMethod::polytope;
    else if (*v == "enumerate") bd.search.method = SearchMethod::enumerate;
    else throw ConfigError("bounds.method: expected polytope or enumerate, got '" + *v + "'");
  }
  r.num("bounds", "net_spacing", bd.search.net_spacing);
  r.count("bounds", "enumerate_cap", bd.search.enumerate_cap);
  r.count("bounds", "restarts", bd.search.restarts);
  r.count("bounds", "random_starts", bd.search.random_starts);
  r.count("bounds", "block", bd.search.block);
  r.count("bounds", "max_evaluations", bd.search.nelder_mead.max_evaluations);

  auto& cv = c.cva;
  r.nums("cva", "intensities", cv.intensities);
  r.counts("cva", "steps", cv.steps);
  r.count("cva", "paths", cv.paths);
  r.num("cva", "sigma", cv.spec.sigma);
  r.num("cva", "horizon", cv.spec.horizon);
  r.num("cva", "x0", cv.spec.x0);
  r.num("cva", "scale", cv.spec.scale);
  r.num("cva", "max_substep", cv.spec.max_substep);
  if (auto v = r.get("cva", "phi")) {
    if (*v == "disc-delta") cv.spec.phi_preset = PhiPreset::discounted_delta;
    else if (*v == "zero") cv.spec.phi_preset = PhiPreset::zero;
    else throw ConfigError("cva.phi: expected disc-delta or zero, got '" + *v + "'");
  }
  r.flag("cva", "pde", cv.pde_column);

  auto& a = c.american;
  r.num("american", "strike", a.strike);
  r.num("american", "cap", a.cap);
  r.count("american", "steps", a.steps);
  r.count("american", "paths", a.paths);

  r.count("pde", "nodes", c.pde_nodes);
  r.count("pde", "steps", c.pde_steps);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot open " + file.string());
  return parse_config(in);
}

void ExperimentConfig::validate() const {
  if (id.empty()) throw ConfigError("experiment.id: must not be empty");
  if (seed_stage1 == seed_stage2) {
    throw ConfigError("experiment.seed_stage1 and experiment.seed_stage2 must differ "
                      "(the bound stage needs simulations independent of the regression stage)");
  }
  switch (kind) {
    case ExperimentKind::uvm: {
      uvm.validate();
      check_steps(steps, "uvm.steps");
      if (bsde.paths < 2) throw ConfigError("bsde.paths: at least 2 paths are required");
      if (bounds.paths < 2) throw ConfigError("bounds.paths: at least 2 paths are required");
      if (bounds.ls_steps == 0) throw ConfigError("bounds.ls_steps: must be positive");
      if (bsde.ridge < 0.0) throw ConfigError("bsde.ridge: must be >= 0");
      if (bsde.clamp_quantile < 0.0 || bsde.clamp_quantile >= 0.5) {
        throw ConfigError("bsde.clamp_quantile: must lie in [0, 0.5)");
      }
      if (!(bounds.search.net_spacing > 0.0)) throw ConfigError("bounds.net_spacing: must be positive");
      if (bounds.search.block == 0) throw ConfigError("bounds.block: must be positive");
      basis();
      break;
    }
    case ExperimentKind::cva: {
      if (cva.intensities.empty()) throw ConfigError("cva.intensities: at least one entry is required");
      for (double ci : cva.intensities) {
        CvaSpec s = cva.spec;
        s.intensity = ci;
        s.validate();
      }
      check_steps(cva.steps, "cva.steps");
      if (cva.paths < 2) throw ConfigError("cva.paths: at least 2 paths are required");
      break;
    }
    case ExperimentKind::american: {
      uvm.validate();
      if (american.steps == 0) throw ConfigError("american.steps: must be positive");
      if (american.paths < 2) throw ConfigError("american.paths: at least 2 paths are required");
      if (!(american.cap > 0.0)) throw ConfigError("american.cap: must be positive");
      if (!(bounds.search.net_spacing > 0.0)) throw ConfigError("bounds.net_spacing: must be positive");
      break;
    }
    case ExperimentKind::pde: {
      uvm.validate();
      if (uvm.assets != 1) throw ConfigError("uvm.assets: the pde experiment is one-dimensional");
      if (pde_nodes < 3) throw ConfigError("pde.nodes: at least 3 nodes are required");
      if (pde_steps == 0) throw ConfigError("pde.steps: must be positive");
      break;
    }
  }
}

BasisSpec ExperimentConfig::basis() const {
  std::vector<double> scale = bsde.basis.scale.empty() ? uvm.x0 : bsde.basis.scale;
  broadcast(scale, uvm.assets, "bsde.scale");
  if (bsde.basis.family == "full") return BasisSpec::full(uvm.assets, bsde.basis.degree, scale);
  if (bsde.basis.family == "quadratic2d") {
    if (uvm.assets != 2) throw ConfigError("bsde.basis: quadratic2d needs assets = 2");
    return BasisSpec::quadratic2d(scale);
  }
  throw ConfigError("bsde.basis: expected full or quadratic2d, got '" + bsde.basis.family + "'");
}

}  // namespace ctrl_duality
