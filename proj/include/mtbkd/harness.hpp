#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mtbkd/config.hpp"
#include "mtbkd/dataset.hpp"
#include "mtbkd/hash.hpp"
#include "mtbkd/posterior.hpp"
#include "mtbkd/sgld.hpp"
#include "mtbkd/synthetic.hpp"
#include "mtbkd/teacher.hpp"
#include "mtbkd/threading.hpp"
#include "mtbkd/train.hpp"
#include "mtbkd/uq.hpp"

namespace mtbkd {

using json = nlohmann::ordered_json;

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct RunPaths {
  std::string root;

  std::string data_dir() const { return root + "/data"; }
  std::string teachers_dir() const { return root + "/teachers"; }
  std::string chains_dir() const { return root + "/chains"; }
  std::string results_dir() const { return root + "/results"; }
  std::string plot_dir() const { return root + "/plotdata"; }
  std::string manifest_file() const { return root + "/manifest.json"; }

  std::string split_csv(const std::string& which) const { return data_dir() + "/" + which + ".csv"; }
  std::string split_bin(const std::string& which) const { return data_dir() + "/" + which + ".bin"; }
  std::string teachers_bin() const { return teachers_dir() + "/teachers.bin"; }
  std::string predictions_csv() const { return teachers_dir() + "/predictions_train.csv"; }
  std::string chain_bin(const std::string& method) const { return chains_dir() + "/" + method + ".bin"; }

  static RunPaths create(const std::string& out_dir) {
    RunPaths p{out_dir};
    namespace fs = std::filesystem;
    std::error_code ec;
    for (const auto& d : {p.root, p.data_dir(), p.teachers_dir(), p.chains_dir(),
                          p.results_dir(), p.plot_dir()}) {
      fs::create_directories(d, ec);
      if (ec) throw IoError("cannot create directory " + d + ": " + ec.message());
    }
    return p;
  }
};

struct SplitData {
  LabeledDataset train, val, test;
};

struct MethodResult {
  MethodSpec method;
  MetricsTable metrics;
  UncertaintyReport report;
  bool diverged = false;
  std::size_t divergence_iter = 0;
};

class StageTimer {
 public:
  StageTimer(json& manifest, std::string name)
      : manifest_(manifest), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
    manifest_["timings_sec"][name_] = elapsed.count();
  }

 private:
  json& manifest_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

inline void write_manifest(const json& manifest, const RunPaths& paths) {
  std::ofstream out(paths.manifest_file());
  if (!out) throw IoError("cannot write manifest: " + paths.manifest_file());
  out << manifest.dump(2) << "\n";
}

inline json load_manifest(const RunPaths& paths) {
  std::ifstream in(paths.manifest_file());
  if (!in) return json::object();
  json j;
  in >> j;
  return j;
}

inline json new_manifest(const ExperimentConfig& cfg) {
  json manifest;
  manifest["scenario"] = scenario_name(cfg.scenario);
  manifest["resolved_config"] = cfg.resolved();
  manifest["inputs_hash"] = sha256_hex(cfg.resolved().dump());
  manifest["notes"] = {
      {"mode_prediction", "chain sample with the highest full-data log posterior"},
      {"accuracy_prediction", "chain-mean predictive"},
      {"multikd_baseline_weights", "per-sample"},
      {"coverage_definition", "chain-averaged indicator mass at the true label"},
  };
  manifest["timings_sec"] = json::object();
  manifest["divergence"] = json::object();
  return manifest;
}

// ---------------------------------------------------------------------------
// Stage: data

inline SplitData stage_simulate(const ExperimentConfig& cfg, const RunPaths& paths,
                                json& manifest) {
  StageTimer timer(manifest, "simulate");
  LabeledDataset full;
  SplitData out;
  if (cfg.scenario == Scenario::sim1) {
    DomainPartition part;
    part.t1 = cfg.sim1_t1;
    part.t2 = cfg.sim1_t2;
    full = gen_sim1(cfg.n, mix_seed(cfg.seed, 10), part);
  } else if (cfg.scenario == Scenario::sim2) {
    full = gen_sim2(cfg.n, mix_seed(cfg.seed, 10));
  } else if (cfg.scenario == Scenario::custom) {
    out.train = read_dataset_csv(cfg.custom_train);
    out.val = read_dataset_csv(cfg.custom_val);
    out.test = read_dataset_csv(cfg.custom_test);
  } else {
    throw ContractError("stage_simulate: toy1d has no tabular data");
  }
  if (cfg.scenario != Scenario::custom) {
    auto parts = split(full, cfg.split_ratios, mix_seed(cfg.seed, 11));
    out.train = std::move(parts[0]);
    out.val = std::move(parts[1]);
    out.test = std::move(parts[2]);
  }
  const std::array<std::pair<const char*, const LabeledDataset*>, 3> splits{
      {{"train", &out.train}, {"val", &out.val}, {"test", &out.test}}};
  for (const auto& [name, ds] : splits) {
    write_dataset_csv(*ds, paths.split_csv(name));
    write_dataset_bin(*ds, paths.split_bin(name));
  }
  manifest["data"] = {{"train_rows", out.train.n()},
                      {"val_rows", out.val.n()},
                      {"test_rows", out.test.n()},
                      {"classes", out.train.num_classes}};
  return out;
}

inline SplitData load_splits(const RunPaths& paths) {
  SplitData out;
  out.train = read_dataset_bin(paths.split_bin("train"));
  out.val = read_dataset_bin(paths.split_bin("val"));
  out.test = read_dataset_bin(paths.split_bin("test"));
  return out;
}

// ---------------------------------------------------------------------------
// Stage: teachers

inline std::vector<TeacherModel> stage_teachers(const ExperimentConfig& cfg,
                                                const LabeledDataset& train, const RunPaths& paths,
                                                json& manifest) {
  StageTimer timer(manifest, "train_teachers");
  const NetworkSpec tspec = cfg.teacher_spec();
  std::vector<LabeledDataset> corpora(cfg.teacher_count);
  std::vector<bool> fallback(cfg.teacher_count, false);
  for (std::size_t g = 0; g < cfg.teacher_count; ++g) {
    if (train.has_domains() && !cfg.specialty_domains.empty()) {
      auto corpus = gen_teacher_corpus(train, cfg.specialty_domains[g], cfg.specialty_fraction,
                                       cfg.corpus_size, mix_seed(cfg.seed, 20 + g));
      corpora[g] = std::move(corpus.data);
      fallback[g] = corpus.with_replacement_fallback;
    } else {
      // No domain structure: plain bootstrap resample per teacher.
      Rng rng(mix_seed(cfg.seed, 20 + g));
      std::vector<std::size_t> idx(cfg.corpus_size);
      for (auto& i : idx) i = rng.uniform_index(train.n());
      corpora[g] = subset(train, idx);
    }
  }
  std::vector<TeacherModel> teachers(cfg.teacher_count);
  parallel_for(cfg.teacher_count, cfg.threads, [&](std::size_t g) {
    TrainHyper hyper{cfg.teacher_lr, cfg.teacher_epochs, cfg.teacher_batch,
                     mix_seed(cfg.seed, 30 + g)};
    const int domain = cfg.specialty_domains.empty() ? 0 : cfg.specialty_domains[g];
    teachers[g] = train_teacher(tspec, corpora[g], hyper, domain);
  });
  write_teachers_bin(teachers, paths.teachers_bin());
  json fb = json::array();
  for (bool f : fallback) fb.push_back(f);
  manifest["teacher_corpus_replacement"] = fb;
  return teachers;
}

inline TeacherPredictionSet stage_predictions(const ExperimentConfig& cfg,
                                              std::span<const TeacherModel> teachers,
                                              const Matrix& train_features, const RunPaths& paths,
                                              json& manifest) {
  StageTimer timer(manifest, "predict_teachers");
  auto preds = build_prediction_set(teachers, train_features, WeightingMode::entropy, cfg.xi);
  write_predictions_csv(preds, paths.predictions_csv());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& m : preds.probs) h = fnv64(m.data(), h);
  manifest["predictions_hash"] = h;
  return preds;
}

// Per-method view: the shared prediction probabilities with the weighting the
// method calls for.
inline TeacherPredictionSet method_predictions(const TeacherPredictionSet& base,
                                               const MethodSpec& method) {
  TeacherPredictionSet out;
  if (method.kind == MethodSpec::Kind::kd_single) {
    const auto g = static_cast<std::size_t>(method.teacher - 1);
    out.probs = {base.probs[g]};
    out.weights = Matrix(base.sample_count(), 1, 1.0);
    out.mode = WeightingMode::equal;
    return out;
  }
  out = base;
  if (!method.weighted()) {
    out.mode = WeightingMode::equal;
    const double w = 1.0 / static_cast<double>(base.teacher_count());
    for (auto& v : out.weights.data()) v = w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage: distillation

// Noiseless mini-batch gradient ascent on the log posterior, used to place
// the chain start near the high-probability region.
inline std::vector<double> warm_start(const PosteriorProblem& problem, std::vector<double> theta,
                                      const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed, /*stream=*/7);
  detail::BatchDealer dealer(problem.data.n(), cfg.sgld_batch_size, rng);
  const auto schedule = cfg.sgld_config(0).schedule;
  for (std::size_t j = 1; j <= cfg.warm_start_iters; ++j) {
    const auto grad = problem.grad_log_posterior(theta, dealer.next());
    const double tau = schedule.step(j);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += tau * grad[i];
  }
  return theta;
}

inline std::uint64_t problem_hash(const PosteriorProblem& problem) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv64(problem.data.features.data(), h);
  for (const auto& m : problem.teachers.probs) h = fnv64(m.data(), h);
  h = fnv64(&problem.prior.lambda, sizeof(double), h);
  return h;
}

inline PosteriorChain stage_distill(const ExperimentConfig& cfg, const MethodSpec& method,
                                    const PosteriorProblem& problem, const RunPaths& paths,
                                    json& manifest) {
  StageTimer timer(manifest, "distill." + method.name());
  const auto init_seed = mix_seed(cfg.seed, 40);
  auto theta = init_params(problem.spec, init_seed);
  theta = warm_start(problem, std::move(theta), cfg, mix_seed(cfg.seed, 41));
  const auto sgld_cfg = cfg.sgld_config(mix_seed(cfg.seed, 42));
  auto chain = sgld_run(problem, sgld_cfg, theta);
  write_chain(chain, problem_hash(problem), paths.chain_bin(method.name()));
  manifest["divergence"][method.name()] = chain.diverged;
  if (chain.diverged) manifest["divergence_iter"][method.name()] = chain.divergence_iter;
  return chain;
}

// ---------------------------------------------------------------------------
// Stage: evaluation

inline MethodResult evaluate_chain(const ExperimentConfig& cfg, const MethodSpec& method,
                                   const PosteriorProblem& problem, const PosteriorChain& chain,
                                   const LabeledDataset& test) {
  if (chain.samples.empty()) {
    throw NumericError("evaluate_chain: chain for " + method.name() + " has no samples");
  }
  MethodResult out;
  out.method = method;
  out.diverged = chain.diverged;
  out.divergence_iter = chain.divergence_iter;

  const auto mean_pred = chain_mean_predictions(chain.samples, problem.spec, test.features,
                                                cfg.threads);
  // Posterior-mode proxy: retained sample with the highest log posterior.
  std::vector<double> logpost(chain.samples.size());
  parallel_for(chain.samples.size(), cfg.threads,
               [&](std::size_t j) { logpost[j] = problem.log_posterior(chain.samples[j]); });
  const auto best = static_cast<std::size_t>(
      std::max_element(logpost.begin(), logpost.end()) - logpost.begin());
  const auto mode_pred = predict_matrix(problem.spec, chain.samples[best], test.features);

  out.metrics = point_metrics(mean_pred, mode_pred, test);
  out.report = build_uq_report(chain.samples, problem.spec, test, cfg.levels, cfg.threads);
  for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
    out.metrics.coverage.emplace_back(cfg.levels[l], coverage_rate(out.report, l));
  }
  return out;
}

inline MethodResult run_baseline(const ExperimentConfig& cfg, const MethodSpec& method,
                                 const PosteriorProblem& problem, const LabeledDataset& test,
                                 json& manifest) {
  StageTimer timer(manifest, "baseline." + method.name());
  MultiKdSampleLoss loss;
  loss.problem = &problem;
  loss.lambda = cfg.lambda;
  loss.per_sample = true;  // equal mode is realized through the weight matrix
  TrainHyper hyper{cfg.baseline_lr, cfg.baseline_epochs, cfg.baseline_batch,
                   mix_seed(cfg.seed, 50)};
  auto theta = minibatch_gd(problem.spec, init_params(problem.spec, mix_seed(cfg.seed, 40)),
                            problem.data.features, hyper, loss);

  MethodResult out;
  out.method = method;
  const std::vector<std::vector<double>> single{theta};
  const auto pred = predict_matrix(problem.spec, theta, test.features);
  out.metrics = point_metrics(pred, pred, test);
  out.report = build_uq_report(single, problem.spec, test, cfg.levels, cfg.threads);
  for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
    out.metrics.coverage.emplace_back(cfg.levels[l], coverage_rate(out.report, l));
  }
  return out;
}

inline MetricsTable teacher_metrics(const TeacherModel& teacher, const LabeledDataset& test) {
  const auto pred = predict_probs(teacher, test.features);
  return point_metrics(pred, pred, test);
}

// ---------------------------------------------------------------------------
// Result emission

inline void emit_results(const ExperimentConfig& cfg,
                         std::span<const std::pair<std::string, MetricsTable>> metric_rows,
                         std::span<const MethodResult> method_results,
                         const LabeledDataset& test, const RunPaths& paths, json& manifest) {
  StageTimer timer(manifest, "emit_results");

  {
    std::ofstream out(paths.results_dir() + "/metrics.csv");
    if (!out) throw IoError("cannot write metrics.csv");
    out << "method,domain,accuracy,mse\n";
    for (const auto& [name, table] : metric_rows) {
      out << name << ",overall," << format_double(table.overall_accuracy) << ","
          << (table.mse ? format_double(*table.mse) : "") << "\n";
      for (const auto& [tag, acc] : table.domain_accuracy) {
        out << name << ",b" << tag << "," << format_double(acc) << ",";
        if (const auto it = table.domain_mse.find(tag); it != table.domain_mse.end()) {
          out << format_double(it->second);
        }
        out << "\n";
      }
    }
  }

  {
    std::ofstream out(paths.results_dir() + "/coverage.csv");
    if (!out) throw IoError("cannot write coverage.csv");
    out << "method,level,empirical\n";
    for (const auto& r : method_results) {
      for (const auto& [level, rate] : r.metrics.coverage) {
        out << r.method.name() << "," << format_double(level) << "," << format_double(rate)
            << "\n";
      }
    }
    std::ofstream curve(paths.plot_dir() + "/coverage_curve.csv");
    curve << "method,level,empirical\n";
    for (const auto& r : method_results) {
      for (const auto& [level, rate] : r.metrics.coverage) {
        curve << r.method.name() << "," << format_double(level) << "," << format_double(rate)
              << "\n";
      }
    }
  }

  bool primary_written = false;
  for (const auto& r : method_results) {
    write_uncertainty_csv(r.report, test, paths.results_dir() + "/uncertainty_" +
                                              r.method.name() + ".csv");
    if (!primary_written && r.method.is_bayesian()) {
      write_uncertainty_csv(r.report, test, paths.results_dir() + "/uncertainty.csv");
      manifest["primary_uncertainty_method"] = r.method.name();
      primary_written = true;
    }
    // Fig-4 style map: coordinates, true probability when known, mean deviance.
    std::ofstream map(paths.plot_dir() + "/deviance_map_" + r.method.name() + ".csv");
    for (std::size_t j = 0; j < test.dim(); ++j) map << "x_" << (j + 1) << ",";
    if (test.has_true_probs()) map << "p_true_1,";
    map << "mean_deviance\n";
    for (const auto& pt : r.report.points) {
      for (std::size_t j = 0; j < test.dim(); ++j) {
        map << format_double(test.features(pt.index, j)) << ",";
      }
      if (test.has_true_probs()) map << format_double(test.true_probs(pt.index, 0)) << ",";
      map << format_double(pt.mean_dev) << "\n";
    }
  }
  if (!primary_written && !method_results.empty()) {
    write_uncertainty_csv(method_results.front().report, test,
                          paths.results_dir() + "/uncertainty.csv");
    manifest["primary_uncertainty_method"] = method_results.front().method.name();
  }
}

// ---------------------------------------------------------------------------
// Full pipelines

inline json metrics_to_json(const MetricsTable& t) {
  json j;
  j["overall_accuracy"] = t.overall_accuracy;
  if (t.mse) j["mse"] = *t.mse;
  for (const auto& [tag, acc] : t.domain_accuracy) j["accuracy_b" + std::to_string(tag)] = acc;
  for (const auto& [level, rate] : t.coverage) {
    j["coverage_" + level_suffix(level)] = rate;
  }
  return j;
}

struct RunOutputs {
  std::vector<MethodResult> results;
  std::vector<std::pair<std::string, MetricsTable>> metric_rows;  // teachers + methods
  json manifest;
};

inline RunOutputs run_algorithm1(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = new_manifest(cfg);

  // On any stage failure the manifest collected so far is persisted with the
  // failing stage recorded, then the error propagates unchanged.
  std::string stage = "simulate";
  try {
    SplitData data = stage_simulate(cfg, paths, manifest);
    stage = "train_teachers";
    const auto teachers = stage_teachers(cfg, data.train, paths, manifest);
    stage = "predict_teachers";
    const auto base_preds = stage_predictions(cfg, teachers, data.train.features, paths, manifest);

    RunOutputs out;
    for (std::size_t g = 0; g < teachers.size(); ++g) {
      out.metric_rows.emplace_back("teacher_" + std::to_string(g + 1),
                                   teacher_metrics(teachers[g], data.test));
    }
    for (const auto& method : cfg.methods) {
      stage = (method.is_bayesian() ? "distill." : "baseline.") + method.name();
      auto problem = make_posterior_problem(cfg.student_spec(), data.train,
                                            method_predictions(base_preds, method), cfg.lambda);
      MethodResult result;
      if (method.is_bayesian()) {
        const auto chain = stage_distill(cfg, method, problem, paths, manifest);
        result = evaluate_chain(cfg, method, problem, chain, data.test);
      } else {
        result = run_baseline(cfg, method, problem, data.test, manifest);
      }
      manifest["metrics"][method.name()] = metrics_to_json(result.metrics);
      out.metric_rows.emplace_back(method.name(), result.metrics);
      out.results.push_back(std::move(result));
    }
    for (std::size_t g = 0; g < teachers.size(); ++g) {
      manifest["metrics"]["teacher_" + std::to_string(g + 1)] =
          metrics_to_json(out.metric_rows[g].second);
    }

    stage = "emit_results";
    emit_results(cfg, out.metric_rows, out.results, data.test, paths, manifest);
    write_manifest(manifest, paths);
    out.manifest = std::move(manifest);
    return out;
  } catch (...) {
    manifest["failed_stage"] = stage;
    write_manifest(manifest, paths);
    throw;
  }
}

// Toy pipeline: sample the 1-D conjugate posterior, emit histogram and
// analytic curve for plotting, and summary statistics in the manifest.
inline json run_toy(const ExperimentConfig& cfg) {
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = new_manifest(cfg);
  StageTimer timer(manifest, "toy");

  const auto toy = gen_toy_1d({cfg.toy_prior_mean_1, cfg.toy_prior_mean_2}, cfg.toy_prior_var,
                              cfg.toy_obs, cfg.toy_obs_var, cfg.toy_n_obs);
  const Toy1dTarget target{toy};
  SgldConfig sgld_cfg;
  sgld_cfg.schedule.kind = StepSchedule::Kind::constant;
  sgld_cfg.schedule.tau = cfg.toy_tau;
  sgld_cfg.total_iters = cfg.toy_total_iters;
  sgld_cfg.burn_in = cfg.toy_burn_in;
  sgld_cfg.thinning = cfg.toy_thinning;
  sgld_cfg.batch_size = static_cast<std::size_t>(cfg.toy_n_obs);
  sgld_cfg.seed = mix_seed(cfg.seed, 60);
  const auto chain = sgld_run(target, sgld_cfg, std::vector<double>{cfg.toy_obs});
  manifest["divergence"]["toy"] = chain.diverged;

  const double sd = std::sqrt(toy.post_var);
  const double lo = std::min(toy.post_means[0], toy.post_means[1]) - 4.0 * sd;
  const double hi = std::max(toy.post_means[0], toy.post_means[1]) + 4.0 * sd;

  {
    std::ofstream out(paths.plot_dir() + "/toy_posterior.csv");
    if (!out) throw IoError("cannot write toy_posterior.csv");
    out << "theta,analytic_density\n";
    const int grid = 1001;
    for (int i = 0; i < grid; ++i) {
      const double theta = lo + (hi - lo) * static_cast<double>(i) / (grid - 1);
      out << format_double(theta) << "," << format_double(toy.posterior_density(theta)) << "\n";
    }
  }

  // Histogram of the chain over the same range.
  const int bins = 100;
  std::vector<std::size_t> counts(bins, 0);
  double mean = 0.0;
  for (const auto& s : chain.samples) {
    mean += s[0];
    const int b = static_cast<int>((s[0] - lo) / (hi - lo) * bins);
    if (b >= 0 && b < bins) ++counts[static_cast<std::size_t>(b)];
  }
  mean /= static_cast<double>(chain.samples.size());
  {
    std::ofstream out(paths.plot_dir() + "/toy_chain_hist.csv");
    if (!out) throw IoError("cannot write toy_chain_hist.csv");
    out << "bin_lo,bin_hi,count,density\n";
    const double width = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) {
      const double blo = lo + width * b;
      const double density = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                             (static_cast<double>(chain.samples.size()) * width);
      out << format_double(blo) << "," << format_double(blo + width) << ","
          << counts[static_cast<std::size_t>(b)] << "," << format_double(density) << "\n";
    }
  }

  // Valley of the analytic density between the component means; the chain
  // mass below it estimates the low-component weight.
  double valley = toy.post_means[0], valley_density = 1e300;
  for (int i = 0; i <= 400; ++i) {
    const double theta =
        toy.post_means[0] + (toy.post_means[1] - toy.post_means[0]) * static_cast<double>(i) / 400.0;
    const double d = toy.posterior_density(theta);
    if (d < valley_density) {
      valley_density = d;
      valley = theta;
    }
  }
  double mass_below = 0.0;
  for (const auto& s : chain.samples) mass_below += s[0] < valley ? 1.0 : 0.0;
  mass_below /= static_cast<double>(chain.samples.size());
  const double analytic_below =
      toy.post_weights[0] * std_normal_cdf((valley - toy.post_means[0]) / sd) +
      toy.post_weights[1] * std_normal_cdf((valley - toy.post_means[1]) / sd);

  manifest["toy"] = {{"post_mean_1", toy.post_means[0]},
                     {"post_mean_2", toy.post_means[1]},
                     {"post_var", toy.post_var},
                     {"post_weight_1", toy.post_weights[0]},
                     {"post_weight_2", toy.post_weights[1]},
                     {"chain_samples", chain.samples.size()},
                     {"chain_mean", mean},
                     {"analytic_mean", toy.posterior_mean()},
                     {"valley", valley},
                     {"chain_mass_below_valley", mass_below},
                     {"analytic_mass_below_valley", analytic_below}};
  write_manifest(manifest, paths);
  return manifest;
}

// ---------------------------------------------------------------------------
// Stage commands: each resumes from the previous stage's files, so partial
// reruns never recompute upstream artifacts.

inline void cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = new_manifest(cfg);
  stage_simulate(cfg, paths, manifest);
  write_manifest(manifest, paths);
}

inline void cmd_train_teachers(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = load_manifest(paths);
  if (manifest.empty()) manifest = new_manifest(cfg);
  const auto data = load_splits(paths);
  const auto teachers = stage_teachers(cfg, data.train, paths, manifest);
  stage_predictions(cfg, teachers, data.train.features, paths, manifest);
  write_manifest(manifest, paths);
}

inline void cmd_distill(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = load_manifest(paths);
  if (manifest.empty()) manifest = new_manifest(cfg);
  const auto data = load_splits(paths);
  const auto base_preds = read_predictions_csv(paths.predictions_csv());
  for (const auto& method : cfg.methods) {
    if (!method.is_bayesian()) continue;
    auto problem = make_posterior_problem(cfg.student_spec(), data.train,
                                          method_predictions(base_preds, method), cfg.lambda);
    stage_distill(cfg, method, problem, paths, manifest);
  }
  write_manifest(manifest, paths);
}

inline void cmd_uq(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = load_manifest(paths);
  if (manifest.empty()) manifest = new_manifest(cfg);
  const auto data = load_splits(paths);
  StageTimer timer(manifest, "uq");
  for (const auto& method : cfg.methods) {
    if (!method.is_bayesian()) continue;
    const auto chain = read_chain(paths.chain_bin(method.name()));
    const auto report = build_uq_report(chain.samples, cfg.student_spec(), data.test, cfg.levels,
                                        cfg.threads);
    write_uncertainty_csv(report, data.test,
                          paths.results_dir() + "/uncertainty_" + method.name() + ".csv");
  }
  write_manifest(manifest, paths);
}

inline void cmd_evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = load_manifest(paths);
  if (manifest.empty()) manifest = new_manifest(cfg);
  const auto data = load_splits(paths);
  const auto teachers = read_teachers_bin(paths.teachers_bin());
  const auto base_preds = read_predictions_csv(paths.predictions_csv());

  RunOutputs out;
  for (std::size_t g = 0; g < teachers.size(); ++g) {
    out.metric_rows.emplace_back("teacher_" + std::to_string(g + 1),
                                 teacher_metrics(teachers[g], data.test));
  }
  for (const auto& method : cfg.methods) {
    auto problem = make_posterior_problem(cfg.student_spec(), data.train,
                                          method_predictions(base_preds, method), cfg.lambda);
    MethodResult result;
    if (method.is_bayesian()) {
      const auto chain = read_chain(paths.chain_bin(method.name()));
      result = evaluate_chain(cfg, method, problem, chain, data.test);
    } else {
      result = run_baseline(cfg, method, problem, data.test, manifest);
    }
    manifest["metrics"][method.name()] = metrics_to_json(result.metrics);
    out.metric_rows.emplace_back(method.name(), result.metrics);
    out.results.push_back(std::move(result));
  }
  for (std::size_t g = 0; g < teachers.size(); ++g) {
    manifest["metrics"]["teacher_" + std::to_string(g + 1)] =
        metrics_to_json(out.metric_rows[g].second);
  }
  emit_results(cfg, out.metric_rows, out.results, data.test, paths, manifest);
  write_manifest(manifest, paths);
}

// Cross-validated lambda selection on the validation split: short-budget
// weighted pipeline per grid value, ties resolved toward the smaller lambda.
inline json run_cv_lambda(const ExperimentConfig& cfg) {
  cfg.validate();
  const RunPaths paths = RunPaths::create(cfg.out_dir);
  json manifest = load_manifest(paths);
  if (manifest.empty()) manifest = new_manifest(cfg);
  StageTimer timer(manifest, "cv_lambda");

  SplitData data = stage_simulate(cfg, paths, manifest);
  const auto teachers = stage_teachers(cfg, data.train, paths, manifest);
  const auto preds = stage_predictions(cfg, teachers, data.train.features, paths, manifest);

  auto grid = cfg.lambda_grid;
  std::sort(grid.begin(), grid.end());
  double best_lambda = grid.front();
  double best_acc = -1.0;
  json table = json::array();
  for (double lambda : grid) {
    auto problem = make_posterior_problem(cfg.student_spec(), data.train, preds, lambda);
    ExperimentConfig short_cfg = cfg;
    short_cfg.warm_start_iters = cfg.cv_warm_start;
    auto theta = init_params(problem.spec, mix_seed(cfg.seed, 40));
    theta = warm_start(problem, std::move(theta), short_cfg, mix_seed(cfg.seed, 41));
    auto sgld_cfg = cfg.sgld_config(mix_seed(cfg.seed, 42));
    sgld_cfg.total_iters = cfg.cv_total_iters;
    sgld_cfg.burn_in = cfg.cv_burn_in;
    const auto chain = sgld_run(problem, sgld_cfg, theta);
    const auto mean_pred =
        chain_mean_predictions(chain.samples, problem.spec, data.val.features, cfg.threads);
    const auto metrics = point_metrics(mean_pred, mean_pred, data.val);
    table.push_back({{"lambda", lambda}, {"val_accuracy", metrics.overall_accuracy}});
    if (metrics.overall_accuracy > best_acc) {
      best_acc = metrics.overall_accuracy;
      best_lambda = lambda;
    }
  }
  {
    std::ofstream out(paths.results_dir() + "/cv_lambda.csv");
    if (!out) throw IoError("cannot write cv_lambda.csv");
    out << "lambda,val_accuracy\n";
    for (const auto& row : table) {
      out << format_double(row["lambda"].get<double>()) << ","
          << format_double(row["val_accuracy"].get<double>()) << "\n";
    }
  }
  manifest["lambda_cv"] = {{"grid", grid}, {"table", table}, {"chosen", best_lambda}};
  write_manifest(manifest, paths);
  return manifest;
}

}  // namespace mtbkd
