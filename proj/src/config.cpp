#include "fedbaf/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fedbaf {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> parse_sections(const std::string& text) {
  std::map<std::string, Section> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      out[section];
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config: key outside a [section] at line " + std::to_string(lineno));
    out[section][key] = value;
  }
  return out;
}

struct SectionReader {
  const Section* section = nullptr;
  std::string name;

  std::string str(const std::string& key, const std::string& fallback) const {
    if (!section) return fallback;
    auto it = section->find(key);
    return it == section->end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) const {
    std::string v = str(key, "");
    if (v.empty()) return fallback;
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw ConfigError("config: [" + name + "] " + key + " is not a number: " + v);
    }
  }

  int integer(const std::string& key, int fallback) const {
    double d = num(key, static_cast<double>(fallback));
    if (std::abs(d - std::round(d)) > 1e-9)
      throw ConfigError("config: [" + name + "] " + key + " must be an integer");
    return static_cast<int>(std::llround(d));
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    std::string v = str(key, "");
    if (v.empty()) return fallback;
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
      throw ConfigError("config: [" + name + "] " + key + " is not a valid seed: " + v);
    }
  }

  bool flag(const std::string& key, bool fallback) const {
    std::string v = str(key, "");
    if (v.empty()) return fallback;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: [" + name + "] " + key + " must be true/false: " + v);
  }
};

SectionReader reader(const std::map<std::string, Section>& sections, const std::string& name) {
  auto it = sections.find(name);
  return {it == sections.end() ? nullptr : &it->second, name};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  auto sections = parse_sections(text);
  ExperimentConfig c;

  auto data = reader(sections, "data");
  c.data.kind = data.str("kind", c.data.kind);
  c.data.num_classes = data.integer("num_classes", c.data.num_classes);
  c.data.dim = data.integer("dim", c.data.dim);
  c.data.n_per_class = data.integer("n_per_class", c.data.n_per_class);
  c.data.test_n_per_class = data.integer("test_n_per_class", c.data.test_n_per_class);
  c.data.spread = data.num("spread", c.data.spread);
  c.data.mean_scale = data.num("mean_scale", c.data.mean_scale);
  c.data.mean_offset = data.num("mean_offset", c.data.mean_offset);
  c.data.mean_seed = data.seed("mean_seed", c.data.mean_seed);
  c.data.seed = data.seed("seed", c.data.seed);
  c.data.csv_train = data.str("csv_train", c.data.csv_train);
  c.data.csv_test = data.str("csv_test", c.data.csv_test);

  auto part = reader(sections, "partition");
  c.partition.num_clients = part.integer("num_clients", c.partition.num_clients);
  c.partition.mode = part.str("mode", c.partition.mode);
  c.partition.class_fraction = part.num("class_fraction", c.partition.class_fraction);
  c.partition.seed = part.seed("seed", c.partition.seed);

  auto model = reader(sections, "model");
  c.model.kind = model.str("kind", c.model.kind);
  c.model.hidden = model.integer("hidden", c.model.hidden);

  auto training = reader(sections, "training");
  c.training.rounds = training.integer("rounds", c.training.rounds);
  c.training.epochs = training.integer("epochs", c.training.epochs);
  c.training.lr = training.num("lr", c.training.lr);
  c.training.batch = training.integer("batch", c.training.batch);
  c.training.participation = training.num("participation", c.training.participation);

  auto strategy = reader(sections, "strategy");
  c.strategy.algorithm = strategy.str("algorithm", c.strategy.algorithm);
  c.strategy.mu = strategy.num("mu", c.strategy.mu);
  c.strategy.fedprox_server_term =
      strategy.flag("fedprox_server_term", c.strategy.fedprox_server_term);
  c.strategy.foundation = strategy.str("foundation", c.strategy.foundation);
  c.strategy.psi = strategy.num("psi", c.strategy.psi);
  c.strategy.foundation_checkpoint =
      strategy.str("foundation_checkpoint", c.strategy.foundation_checkpoint);
  c.strategy.static_alpha = strategy.flag("static_alpha", c.strategy.static_alpha);

  auto attack = reader(sections, "attack");
  c.attack.zeta = attack.num("zeta", c.attack.zeta);
  c.attack.lambda = attack.num("lambda", c.attack.lambda);
  c.attack.seed = attack.seed("seed", c.attack.seed);

  auto pretrain = reader(sections, "pretrain");
  c.pretrain.n_per_class = pretrain.integer("n_per_class", c.pretrain.n_per_class);
  c.pretrain.spread = pretrain.num("spread", c.pretrain.spread);
  c.pretrain.mean_jitter = pretrain.num("mean_jitter", c.pretrain.mean_jitter);
  c.pretrain.seed = pretrain.seed("seed", c.pretrain.seed);
  c.pretrain.epochs = pretrain.integer("epochs", c.pretrain.epochs);
  c.pretrain.lr = pretrain.num("lr", c.pretrain.lr);
  c.pretrain.batch = pretrain.integer("batch", c.pretrain.batch);
  c.pretrain.out = pretrain.str("out", c.pretrain.out);

  auto run = reader(sections, "run");
  c.run.master_seed = run.seed("master_seed", c.run.master_seed);
  c.run.out_dir = run.str("out_dir", c.run.out_dir);
  c.run.retain_client_models = run.flag("retain_client_models", c.run.retain_client_models);
  c.run.debug_alpha = run.flag("debug_alpha", c.run.debug_alpha);
  c.run.chi_diagnostic = run.flag("chi_diagnostic", c.run.chi_diagnostic);
  c.run.checkpoint_every = run.integer("checkpoint_every", c.run.checkpoint_every);

  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[data]\n";
  out << "kind = " << c.data.kind << "\n";
  out << "num_classes = " << c.data.num_classes << "\n";
  out << "dim = " << c.data.dim << "\n";
  out << "n_per_class = " << c.data.n_per_class << "\n";
  out << "test_n_per_class = " << c.data.test_n_per_class << "\n";
  out << "spread = " << fmt(c.data.spread) << "\n";
  out << "mean_scale = " << fmt(c.data.mean_scale) << "\n";
  out << "mean_offset = " << fmt(c.data.mean_offset) << "\n";
  out << "mean_seed = " << c.data.mean_seed << "\n";
  out << "seed = " << c.data.seed << "\n";
  out << "csv_train = " << c.data.csv_train << "\n";
  out << "csv_test = " << c.data.csv_test << "\n";
  out << "\n[partition]\n";
  out << "num_clients = " << c.partition.num_clients << "\n";
  out << "mode = " << c.partition.mode << "\n";
  out << "class_fraction = " << fmt(c.partition.class_fraction) << "\n";
  out << "seed = " << c.partition.seed << "\n";
  out << "\n[model]\n";
  out << "kind = " << c.model.kind << "\n";
  out << "hidden = " << c.model.hidden << "\n";
  out << "\n[training]\n";
  out << "rounds = " << c.training.rounds << "\n";
  out << "epochs = " << c.training.epochs << "\n";
  out << "lr = " << fmt(c.training.lr) << "\n";
  out << "batch = " << c.training.batch << "\n";
  out << "participation = " << fmt(c.training.participation) << "\n";
  out << "\n[strategy]\n";
  out << "algorithm = " << c.strategy.algorithm << "\n";
  out << "mu = " << fmt(c.strategy.mu) << "\n";
  out << "fedprox_server_term = " << (c.strategy.fedprox_server_term ? "true" : "false") << "\n";
  out << "foundation = " << c.strategy.foundation << "\n";
  out << "psi = " << fmt(c.strategy.psi) << "\n";
  out << "foundation_checkpoint = " << c.strategy.foundation_checkpoint << "\n";
  out << "static_alpha = " << (c.strategy.static_alpha ? "true" : "false") << "\n";
  out << "\n[attack]\n";
  out << "zeta = " << fmt(c.attack.zeta) << "\n";
  out << "lambda = " << fmt(c.attack.lambda) << "\n";
  out << "seed = " << c.attack.seed << "\n";
  out << "\n[pretrain]\n";
  out << "n_per_class = " << c.pretrain.n_per_class << "\n";
  out << "spread = " << fmt(c.pretrain.spread) << "\n";
  out << "mean_jitter = " << fmt(c.pretrain.mean_jitter) << "\n";
  out << "seed = " << c.pretrain.seed << "\n";
  out << "epochs = " << c.pretrain.epochs << "\n";
  out << "lr = " << fmt(c.pretrain.lr) << "\n";
  out << "batch = " << c.pretrain.batch << "\n";
  out << "out = " << c.pretrain.out << "\n";
  out << "\n[run]\n";
  out << "master_seed = " << c.run.master_seed << "\n";
  out << "out_dir = " << c.run.out_dir << "\n";
  out << "retain_client_models = " << (c.run.retain_client_models ? "true" : "false") << "\n";
  out << "debug_alpha = " << (c.run.debug_alpha ? "true" : "false") << "\n";
  out << "chi_diagnostic = " << (c.run.chi_diagnostic ? "true" : "false") << "\n";
  out << "checkpoint_every = " << c.run.checkpoint_every << "\n";
  return out.str();
}

void validate_config(const ExperimentConfig& c, bool require_checkpoint) {
  if (c.data.kind != "gaussian" && c.data.kind != "csv")
    throw ConfigError("config: [data] kind must be gaussian or csv");
  if (c.data.kind == "csv") {
    if (!std::filesystem::exists(c.data.csv_train))
      throw ConfigError("config: [data] csv_train does not exist: " + c.data.csv_train);
    if (!std::filesystem::exists(c.data.csv_test))
      throw ConfigError("config: [data] csv_test does not exist: " + c.data.csv_test);
  } else {
    if (c.data.num_classes < 2 || c.data.dim < 1 || c.data.n_per_class < 1 ||
        c.data.test_n_per_class < 1 || c.data.spread <= 0.0)
      throw ConfigError("config: [data] gaussian generator parameters must be positive");
  }
  if (c.partition.num_clients < 1)
    throw ConfigError("config: [partition] num_clients must be >= 1");
  if (c.partition.mode != "iid" && c.partition.mode != "noniid")
    throw ConfigError("config: [partition] mode must be iid or noniid");
  if (c.partition.mode == "noniid" &&
      c.partition.class_fraction * c.data.num_classes < 1.0)
    throw ConfigError("config: [partition] class_fraction * num_classes must be >= 1");
  if (c.model.kind != "linear" && c.model.kind != "mlp")
    throw ConfigError("config: [model] kind must be linear or mlp");
  if (c.model.kind == "mlp" && c.model.hidden < 1)
    throw ConfigError("config: [model] hidden must be >= 1");
  if (c.training.rounds < 0 || c.training.epochs < 0 || c.training.lr < 0.0 ||
      c.training.batch < 1)
    throw ConfigError("config: [training] invalid schedule");
  if (c.training.participation <= 0.0 || c.training.participation > 1.0)
    throw ConfigError("config: [training] participation must be in (0, 1]");
  if (c.strategy.algorithm != "fedavg" && c.strategy.algorithm != "fedprox")
    throw ConfigError("config: [strategy] algorithm must be fedavg or fedprox");
  if (c.strategy.mu < 0.0) throw ConfigError("config: [strategy] mu must be >= 0");
  if (c.strategy.foundation != "none" && c.strategy.foundation != "fedbaf" &&
      c.strategy.foundation != "weight_init")
    throw ConfigError("config: [strategy] foundation must be none, fedbaf, or weight_init");
  if (require_checkpoint && c.strategy.foundation != "none" &&
      !std::filesystem::exists(c.strategy.foundation_checkpoint))
    throw ConfigError("config: [strategy] foundation_checkpoint does not exist: " +
                      c.strategy.foundation_checkpoint);
  if (c.strategy.foundation == "fedbaf" && c.strategy.psi <= 0.0)
    throw ConfigError("config: [strategy] fedbaf requires psi > 0");
  if (c.attack.zeta < 0.0 || c.attack.zeta > 1.0)
    throw ConfigError("config: [attack] zeta must be in [0, 1]");
  if (c.attack.zeta > 0.0 && c.attack.lambda < 1.0)
    throw ConfigError("config: [attack] lambda must be >= 1");
}

}  // namespace fedbaf
