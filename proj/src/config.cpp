#include "hardsum/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hardsum {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kTopKeys = {"seed", "budget", "out"};
const std::set<std::string> kInstanceKeys = {"mode",         "p",   "n",       "gap",           "smoothness",
                                             "epsilon",      "d",   "query_budget", "hat_ell",  "c0",
                                             "haar_rotation", "dim"};
const std::set<std::string> kOptimizerKeys = {"name",       "step",   "penalty", "grad_batch", "hess_batch",
                                              "epochs",     "steps",  "batch_mode", "num_seeds"};
const std::set<std::string> kVerifyKeys = {"derivative_points",    "derivative_tol",    "zero_chain_samples",
                                           "smoothness_pairs",     "estimator_trials",  "large_gradient_points",
                                           "multistart_starts",    "resisting_max_k",   "cubic_models",
                                           "cubic_grid_models"};

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& into, const std::string& where) {
  const auto node = tree.get_child_optional(key);
  if (!node) return;
  const std::string raw = node->data();
  std::istringstream in(raw);
  T value{};
  if constexpr (std::is_same_v<T, bool>) {
    if (raw == "true" || raw == "1") {
      value = true;
    } else if (raw == "false" || raw == "0") {
      value = false;
    } else {
      throw ConfigError(where + "." + key + ": expected true or false, got '" + raw + "'");
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    value = raw;
  } else {
    if constexpr (std::is_unsigned_v<T>) {
      if (!raw.empty() && raw.front() == '-') throw ConfigError(where + "." + key + ": must not be negative");
    }
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) {
      throw ConfigError(where + "." + key + ": cannot parse '" + raw + "'");
    }
  }
  into = value;
}

void check_keys(const pt::ptree& tree, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, child] : tree) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  RunConfig c;
  for (const auto& [key, child] : tree) {
    const bool known_section = key == "instance" || key == "optimizer" || key == "verify";
    if (!child.empty() && !known_section) throw ConfigError("unknown section [" + key + "]");
    if (child.empty() && !known_section && !kTopKeys.count(key)) {
      throw ConfigError("unknown top-level key '" + key + "'");
    }
  }
  read(tree, "seed", c.seed, "top");
  read(tree, "budget", c.budget, "top");
  read(tree, "out", c.out, "top");

  if (const auto s = tree.get_child_optional("instance")) {
    check_keys(*s, kInstanceKeys, "[instance]");
    InstanceConfig& i = c.instance;
    read(*s, "mode", i.mode, "instance");
    read(*s, "p", i.p, "instance");
    read(*s, "n", i.n, "instance");
    read(*s, "gap", i.gap, "instance");
    read(*s, "smoothness", i.smoothness, "instance");
    read(*s, "epsilon", i.epsilon, "instance");
    read(*s, "d", i.d, "instance");
    read(*s, "query_budget", i.query_budget, "instance");
    read(*s, "hat_ell", i.hat_ell, "instance");
    read(*s, "c0", i.c0, "instance");
    read(*s, "haar_rotation", i.haar_rotation, "instance");
    read(*s, "dim", i.dim, "instance");
  }
  if (const auto s = tree.get_child_optional("optimizer")) {
    check_keys(*s, kOptimizerKeys, "[optimizer]");
    OptimizerConfig& o = c.optimizer;
    read(*s, "name", o.name, "optimizer");
    read(*s, "step", o.step, "optimizer");
    read(*s, "penalty", o.penalty, "optimizer");
    read(*s, "grad_batch", o.grad_batch, "optimizer");
    read(*s, "hess_batch", o.hess_batch, "optimizer");
    read(*s, "epochs", o.epochs, "optimizer");
    read(*s, "steps", o.steps, "optimizer");
    read(*s, "batch_mode", o.batch_mode, "optimizer");
    read(*s, "num_seeds", o.num_seeds, "optimizer");
  }
  if (const auto s = tree.get_child_optional("verify")) {
    check_keys(*s, kVerifyKeys, "[verify]");
    VerifySettings& v = c.verify;
    read(*s, "derivative_points", v.derivative_points, "verify");
    read(*s, "derivative_tol", v.derivative_tol, "verify");
    read(*s, "zero_chain_samples", v.zero_chain_samples, "verify");
    read(*s, "smoothness_pairs", v.smoothness_pairs, "verify");
    read(*s, "estimator_trials", v.estimator_trials, "verify");
    read(*s, "large_gradient_points", v.large_gradient_points, "verify");
    read(*s, "multistart_starts", v.multistart_starts, "verify");
    read(*s, "resisting_max_k", v.resisting_max_k, "verify");
    read(*s, "cubic_models", v.cubic_models, "verify");
    read(*s, "cubic_grid_models", v.cubic_grid_models, "verify");
  }

  const std::set<std::string> modes = {"deterministic", "individual", "third-moment", "quadratic", "nonconvex"};
  if (!modes.count(c.instance.mode)) throw ConfigError("instance.mode: unknown mode '" + c.instance.mode + "'");
  const std::set<std::string> names = {"svrc", "gd", "cubic"};
  if (!names.count(c.optimizer.name)) throw ConfigError("optimizer.name: unknown optimizer '" + c.optimizer.name + "'");
  try {
    batch_mode_from_string(c.optimizer.batch_mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer.batch_mode: ") + e.what());
  }
  if (c.instance.n < 1) throw ConfigError("instance.n must be >= 1");
  if (c.instance.p < 1) throw ConfigError("instance.p must be >= 1");
  if (c.optimizer.num_seeds < 1) throw ConfigError("optimizer.num_seeds must be >= 1");
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << std::setprecision(17) << std::boolalpha;
  o << "seed = " << c.seed << "\n";
  o << "budget = " << c.budget << "\n";
  o << "out = " << c.out << "\n";

  const InstanceConfig& i = c.instance;
  o << "\n[instance]\n";
  o << "mode = " << i.mode << "\n";
  o << "p = " << i.p << "\n";
  o << "n = " << i.n << "\n";
  o << "gap = " << i.gap << "\n";
  o << "smoothness = " << i.smoothness << "\n";
  o << "epsilon = " << i.epsilon << "\n";
  o << "d = " << i.d << "\n";
  o << "query_budget = " << i.query_budget << "\n";
  o << "hat_ell = " << i.hat_ell << "\n";
  o << "c0 = " << i.c0 << "\n";
  o << "haar_rotation = " << i.haar_rotation << "\n";
  o << "dim = " << i.dim << "\n";

  const OptimizerConfig& p = c.optimizer;
  o << "\n[optimizer]\n";
  o << "name = " << p.name << "\n";
  o << "step = " << p.step << "\n";
  o << "penalty = " << p.penalty << "\n";
  o << "grad_batch = " << p.grad_batch << "\n";
  o << "hess_batch = " << p.hess_batch << "\n";
  o << "epochs = " << p.epochs << "\n";
  o << "steps = " << p.steps << "\n";
  o << "batch_mode = " << p.batch_mode << "\n";
  o << "num_seeds = " << p.num_seeds << "\n";

  const VerifySettings& v = c.verify;
  o << "\n[verify]\n";
  o << "derivative_points = " << v.derivative_points << "\n";
  o << "derivative_tol = " << v.derivative_tol << "\n";
  o << "zero_chain_samples = " << v.zero_chain_samples << "\n";
  o << "smoothness_pairs = " << v.smoothness_pairs << "\n";
  o << "estimator_trials = " << v.estimator_trials << "\n";
  o << "large_gradient_points = " << v.large_gradient_points << "\n";
  o << "multistart_starts = " << v.multistart_starts << "\n";
  o << "resisting_max_k = " << v.resisting_max_k << "\n";
  o << "cubic_models = " << v.cubic_models << "\n";
  o << "cubic_grid_models = " << v.cubic_grid_models << "\n";
  return o.str();
}

}  // namespace hardsum
