#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtbkd/errors.hpp"
#include "mtbkd/sgld.hpp"
#include "mtbkd/teacher.hpp"

namespace mtbkd {

enum class Scenario { sim1, sim2, toy1d, custom };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::sim1: return "sim1";
    case Scenario::sim2: return "sim2";
    case Scenario::toy1d: return "toy1d";
    case Scenario::custom: return "custom";
  }
  throw ContractError("scenario_name: unknown scenario");
}

struct MethodSpec {
  enum class Kind { mtbkd_weighted, mtbkd_equal, multikd_weighted, multikd_equal, kd_single };
  Kind kind = Kind::mtbkd_weighted;
  int teacher = 0;  // 1-based, kd_single only

  std::string name() const {
    switch (kind) {
      case Kind::mtbkd_weighted: return "mtbkd_weighted";
      case Kind::mtbkd_equal: return "mtbkd_equal";
      case Kind::multikd_weighted: return "multikd_weighted";
      case Kind::multikd_equal: return "multikd_equal";
      case Kind::kd_single: return "kd_single_" + std::to_string(teacher);
    }
    throw ContractError("MethodSpec: unknown kind");
  }

  bool is_bayesian() const { return kind == Kind::mtbkd_weighted || kind == Kind::mtbkd_equal; }
  bool weighted() const {
    return kind == Kind::mtbkd_weighted || kind == Kind::multikd_weighted;
  }
};

inline MethodSpec parse_method(const std::string& token) {
  if (token == "mtbkd_weighted") return {MethodSpec::Kind::mtbkd_weighted, 0};
  if (token == "mtbkd_equal") return {MethodSpec::Kind::mtbkd_equal, 0};
  if (token == "multikd_weighted") return {MethodSpec::Kind::multikd_weighted, 0};
  if (token == "multikd_equal") return {MethodSpec::Kind::multikd_equal, 0};
  if (token.rfind("kd_single(", 0) == 0 && token.back() == ')') {
    const int g = std::stoi(token.substr(10, token.size() - 11));
    if (g < 1) throw ConfigError("kd_single teacher index must be >= 1");
    return {MethodSpec::Kind::kd_single, g};
  }
  throw ConfigError("unknown method: " + token);
}

// Declarative experiment description; every field below appears in the run
// manifest so nothing the experiments depend on stays implicit.
struct ExperimentConfig {
  // [experiment]
  Scenario scenario = Scenario::sim1;
  std::uint64_t seed = 42;
  std::string out_dir = "runs/sim1";
  std::vector<MethodSpec> methods;
  std::vector<double> levels{0.85, 0.90, 0.95};
  unsigned threads = 1;

  // [data]  (n is the total sample for sim1 and the per-class count for sim2)
  std::size_t n = 20000;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
  double sim1_t1 = -0.85;
  double sim1_t2 = 1.4;
  std::string custom_train, custom_val, custom_test;

  // [teachers]
  std::size_t teacher_count = 2;
  std::vector<int> teacher_layers{2, 7, 10, 12, 10, 5, 2};
  std::vector<int> specialty_domains{1, 3};
  double specialty_fraction = 1.0;
  std::size_t corpus_size = 4000;
  double teacher_lr = 0.1;
  std::size_t teacher_epochs = 150;
  std::size_t teacher_batch = 64;

  // [student]
  std::vector<int> student_layers{2, 5, 2};

  // [prior]
  double lambda = 1.0;
  std::vector<double> lambda_grid{0.1, 0.5, 1.0, 2.0, 5.0};
  XiKind xi = XiKind::exp_neg;

  // [sgld]
  StepSchedule::Kind sgld_schedule = StepSchedule::Kind::polynomial;
  double sgld_tau = 1e-5;
  double sgld_a = 1e-4;
  double sgld_b = 100.0;
  double sgld_gamma = 0.55;
  std::size_t sgld_total_iters = 40000;
  std::size_t sgld_batch_size = 64;
  std::size_t sgld_burn_in = 20000;
  std::size_t sgld_thinning = 10;
  std::size_t warm_start_iters = 3000;
  double param_clip = 0.0;  // 0 disables the box

  // [baseline]
  double baseline_lr = 0.1;
  std::size_t baseline_epochs = 120;
  std::size_t baseline_batch = 64;

  // [toy]
  double toy_prior_mean_1 = 2.0;
  double toy_prior_mean_2 = 6.0;
  double toy_prior_var = 1.0;
  double toy_obs = 3.5;
  double toy_obs_var = 2.0;
  int toy_n_obs = 1;
  double toy_tau = 0.02;
  std::size_t toy_total_iters = 450000;
  std::size_t toy_burn_in = 50000;
  std::size_t toy_thinning = 8;

  // [cv]
  std::size_t cv_total_iters = 8000;
  std::size_t cv_burn_in = 4000;
  std::size_t cv_warm_start = 1500;

  void validate() const {
    if (methods.empty()) throw ConfigError("config: at least one method is required");
    for (double lv : levels) {
      if (!(lv > 0.0 && lv < 1.0)) throw ConfigError("config: levels must be in (0,1)");
    }
    if (scenario != Scenario::toy1d) {
      if (teacher_count == 0) throw ConfigError("config: need at least one teacher");
      if (scenario != Scenario::custom && specialty_domains.size() != teacher_count) {
        throw ConfigError("config: specialty_domains must list one domain per teacher");
      }
      for (const auto& m : methods) {
        if (m.kind == MethodSpec::Kind::kd_single &&
            static_cast<std::size_t>(m.teacher) > teacher_count) {
          throw ConfigError("config: kd_single references teacher " + std::to_string(m.teacher) +
                            " but only " + std::to_string(teacher_count) + " defined");
        }
      }
      if (student_layers.size() < 2 || teacher_layers.size() < 2) {
        throw ConfigError("config: layer lists need at least input and output sizes");
      }
    }
    if (scenario == Scenario::custom &&
        (custom_train.empty() || custom_val.empty() || custom_test.empty())) {
      throw ConfigError("config: custom scenario requires custom_train/custom_val/custom_test");
    }
    if (!(sim1_t1 < sim1_t2)) throw ConfigError("config: sim1_t1 must be < sim1_t2");
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    sgld_config(0).validate();
  }

  SgldConfig sgld_config(std::uint64_t chain_seed) const {
    SgldConfig cfg;
    cfg.schedule.kind = sgld_schedule;
    cfg.schedule.tau = sgld_tau;
    cfg.schedule.a = sgld_a;
    cfg.schedule.b = sgld_b;
    cfg.schedule.gamma = sgld_gamma;
    cfg.total_iters = sgld_total_iters;
    cfg.batch_size = sgld_batch_size;
    cfg.burn_in = sgld_burn_in;
    cfg.thinning = sgld_thinning;
    cfg.seed = chain_seed;
    if (param_clip > 0.0) cfg.param_clip = param_clip;
    return cfg;
  }

  NetworkSpec student_spec() const { return NetworkSpec{student_layers}; }
  NetworkSpec teacher_spec() const { return NetworkSpec{teacher_layers}; }

  // Flat section.key map with every default expanded; the manifest embeds it.
  nlohmann::json resolved() const {
    nlohmann::json j;
    j["experiment.scenario"] = scenario_name(scenario);
    j["experiment.seed"] = seed;
    j["experiment.out_dir"] = out_dir;
    std::string ms;
    for (const auto& m : methods) ms += (ms.empty() ? "" : ",") + m.name();
    j["experiment.methods"] = ms;
    j["experiment.levels"] = levels;
    j["experiment.threads"] = threads;
    j["data.n"] = n;
    j["data.split"] = split_ratios;
    j["data.sim1_t1"] = sim1_t1;
    j["data.sim1_t2"] = sim1_t2;
    j["data.custom_train"] = custom_train;
    j["data.custom_val"] = custom_val;
    j["data.custom_test"] = custom_test;
    j["teachers.count"] = teacher_count;
    j["teachers.layers"] = teacher_layers;
    j["teachers.specialty_domains"] = specialty_domains;
    j["teachers.specialty_fraction"] = specialty_fraction;
    j["teachers.corpus_size"] = corpus_size;
    j["teachers.learning_rate"] = teacher_lr;
    j["teachers.epochs"] = teacher_epochs;
    j["teachers.batch_size"] = teacher_batch;
    j["student.layers"] = student_layers;
    j["prior.lambda"] = lambda;
    j["prior.lambda_grid"] = lambda_grid;
    j["prior.xi"] = xi == XiKind::exp_neg ? "exp_neg" : "inverse";
    j["sgld.schedule"] = sgld_schedule == StepSchedule::Kind::constant ? "constant" : "polynomial";
    j["sgld.tau"] = sgld_tau;
    j["sgld.a"] = sgld_a;
    j["sgld.b"] = sgld_b;
    j["sgld.gamma"] = sgld_gamma;
    j["sgld.total_iters"] = sgld_total_iters;
    j["sgld.batch_size"] = sgld_batch_size;
    j["sgld.burn_in"] = sgld_burn_in;
    j["sgld.thinning"] = sgld_thinning;
    j["sgld.warm_start_iters"] = warm_start_iters;
    j["sgld.param_clip"] = param_clip;
    j["baseline.learning_rate"] = baseline_lr;
    j["baseline.epochs"] = baseline_epochs;
    j["baseline.batch_size"] = baseline_batch;
    j["toy.prior_mean_1"] = toy_prior_mean_1;
    j["toy.prior_mean_2"] = toy_prior_mean_2;
    j["toy.prior_var"] = toy_prior_var;
    j["toy.obs"] = toy_obs;
    j["toy.obs_var"] = toy_obs_var;
    j["toy.n_obs"] = toy_n_obs;
    j["toy.tau"] = toy_tau;
    j["toy.total_iters"] = toy_total_iters;
    j["toy.burn_in"] = toy_burn_in;
    j["toy.thinning"] = toy_thinning;
    j["cv.total_iters"] = cv_total_iters;
    j["cv.burn_in"] = cv_burn_in;
    j["cv.warm_start"] = cv_warm_start;
    return j;
  }
};

inline ExperimentConfig default_config(Scenario scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.methods = {parse_method("mtbkd_weighted"), parse_method("mtbkd_equal"),
                 parse_method("multikd_weighted"), parse_method("multikd_equal")};
  switch (scenario) {
    case Scenario::sim1:
      cfg.out_dir = "runs/sim1";
      break;
    case Scenario::sim2:
      cfg.out_dir = "runs/sim2";
      cfg.n = 3000;  // per class
      cfg.teacher_count = 3;
      cfg.teacher_layers = {5, 7, 15, 12, 10, 7, 5};
      cfg.specialty_domains = {1, 2, 3};
      cfg.corpus_size = 1200;
      cfg.student_layers = {5, 10, 5};
      break;
    case Scenario::toy1d:
      cfg.out_dir = "runs/toy1d";
      cfg.methods = {parse_method("mtbkd_weighted")};
      break;
    case Scenario::custom:
      cfg.out_dir = "runs/custom";
      cfg.specialty_domains = {};
      break;
  }
  return cfg;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct RawConfig {
  std::map<std::string, std::string> entries;  // "section.key" -> value

  const std::string* find(const std::string& key) const {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  }
};

inline RawConfig parse_raw(const std::string& text) {
  RawConfig raw;
  std::stringstream ss(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty() || key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");
    }
    const std::string full = section + "." + key;
    if (raw.entries.count(full)) throw ConfigError("config: duplicate key " + full);
    raw.entries[full] = value;
  }
  return raw;
}

}  // namespace detail

// Parses the flat sectioned key=value format. Unknown keys are hard errors.
inline ExperimentConfig parse_config_text(const std::string& text) {
  auto raw = detail::parse_raw(text);

  Scenario scenario = Scenario::sim1;
  if (const auto* s = raw.find("experiment.scenario")) {
    if (*s == "sim1") scenario = Scenario::sim1;
    else if (*s == "sim2") scenario = Scenario::sim2;
    else if (*s == "toy1d") scenario = Scenario::toy1d;
    else if (*s == "custom") scenario = Scenario::custom;
    else throw ConfigError("config: unknown scenario " + *s);
  }
  ExperimentConfig cfg = default_config(scenario);

  std::set<std::string> consumed{"experiment.scenario"};
  auto take = [&](const std::string& key) -> const std::string* {
    consumed.insert(key);
    return raw.find(key);
  };
  auto take_double = [&](const std::string& key, double& out) {
    if (const auto* v = take(key)) out = std::strtod(v->c_str(), nullptr);
  };
  auto take_size = [&](const std::string& key, std::size_t& out) {
    if (const auto* v = take(key)) out = static_cast<std::size_t>(std::stoull(*v));
  };
  auto take_int = [&](const std::string& key, int& out) {
    if (const auto* v = take(key)) out = std::stoi(*v);
  };
  auto take_string = [&](const std::string& key, std::string& out) {
    if (const auto* v = take(key)) out = *v;
  };
  auto take_int_list = [&](const std::string& key, std::vector<int>& out) {
    if (const auto* v = take(key)) {
      out.clear();
      for (const auto& item : detail::split_list(*v)) out.push_back(std::stoi(item));
    }
  };
  auto take_double_list = [&](const std::string& key, std::vector<double>& out) {
    if (const auto* v = take(key)) {
      out.clear();
      for (const auto& item : detail::split_list(*v)) out.push_back(std::strtod(item.c_str(), nullptr));
    }
  };

  if (const auto* v = take("experiment.seed")) cfg.seed = std::stoull(*v);
  take_string("experiment.out_dir", cfg.out_dir);
  if (const auto* v = take("experiment.methods")) {
    cfg.methods.clear();
    for (const auto& item : detail::split_list(*v)) cfg.methods.push_back(parse_method(item));
  }
  take_double_list("experiment.levels", cfg.levels);
  if (const auto* v = take("experiment.threads")) cfg.threads = static_cast<unsigned>(std::stoul(*v));

  take_size("data.n", cfg.n);
  {
    std::vector<double> ratios;
    take_double_list("data.split", ratios);
    if (!ratios.empty()) {
      if (ratios.size() != 3) throw ConfigError("config: data.split needs three ratios");
      cfg.split_ratios = {ratios[0], ratios[1], ratios[2]};
    }
  }
  take_double("data.sim1_t1", cfg.sim1_t1);
  take_double("data.sim1_t2", cfg.sim1_t2);
  take_string("data.custom_train", cfg.custom_train);
  take_string("data.custom_val", cfg.custom_val);
  take_string("data.custom_test", cfg.custom_test);

  take_size("teachers.count", cfg.teacher_count);
  take_int_list("teachers.layers", cfg.teacher_layers);
  take_int_list("teachers.specialty_domains", cfg.specialty_domains);
  take_double("teachers.specialty_fraction", cfg.specialty_fraction);
  take_size("teachers.corpus_size", cfg.corpus_size);
  take_double("teachers.learning_rate", cfg.teacher_lr);
  take_size("teachers.epochs", cfg.teacher_epochs);
  take_size("teachers.batch_size", cfg.teacher_batch);

  take_int_list("student.layers", cfg.student_layers);

  take_double("prior.lambda", cfg.lambda);
  take_double_list("prior.lambda_grid", cfg.lambda_grid);
  if (const auto* v = take("prior.xi")) {
    if (*v == "exp_neg") cfg.xi = XiKind::exp_neg;
    else if (*v == "inverse") cfg.xi = XiKind::inverse;
    else throw ConfigError("config: unknown prior.xi " + *v);
  }

  if (const auto* v = take("sgld.schedule")) {
    if (*v == "constant") cfg.sgld_schedule = StepSchedule::Kind::constant;
    else if (*v == "polynomial") cfg.sgld_schedule = StepSchedule::Kind::polynomial;
    else throw ConfigError("config: unknown sgld.schedule " + *v);
  }
  take_double("sgld.tau", cfg.sgld_tau);
  take_double("sgld.a", cfg.sgld_a);
  take_double("sgld.b", cfg.sgld_b);
  take_double("sgld.gamma", cfg.sgld_gamma);
  take_size("sgld.total_iters", cfg.sgld_total_iters);
  take_size("sgld.batch_size", cfg.sgld_batch_size);
  take_size("sgld.burn_in", cfg.sgld_burn_in);
  take_size("sgld.thinning", cfg.sgld_thinning);
  take_size("sgld.warm_start_iters", cfg.warm_start_iters);
  take_double("sgld.param_clip", cfg.param_clip);

  take_double("baseline.learning_rate", cfg.baseline_lr);
  take_size("baseline.epochs", cfg.baseline_epochs);
  take_size("baseline.batch_size", cfg.baseline_batch);

  take_double("toy.prior_mean_1", cfg.toy_prior_mean_1);
  take_double("toy.prior_mean_2", cfg.toy_prior_mean_2);
  take_double("toy.prior_var", cfg.toy_prior_var);
  take_double("toy.obs", cfg.toy_obs);
  take_double("toy.obs_var", cfg.toy_obs_var);
  take_int("toy.n_obs", cfg.toy_n_obs);
  take_double("toy.tau", cfg.toy_tau);
  take_size("toy.total_iters", cfg.toy_total_iters);
  take_size("toy.burn_in", cfg.toy_burn_in);
  take_size("toy.thinning", cfg.toy_thinning);

  take_size("cv.total_iters", cfg.cv_total_iters);
  take_size("cv.burn_in", cfg.cv_burn_in);
  take_size("cv.warm_start", cfg.cv_warm_start);

  for (const auto& [key, value] : raw.entries) {
    if (!consumed.count(key)) throw ConfigError("config: unknown key " + key);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace mtbkd
