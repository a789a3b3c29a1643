// Command-line front end for the multi-teacher Bayesian knowledge
// distillation pipeline. Stages communicate through files under --out, so
// each subcommand can resume from the previous one's artifacts.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mtbkd/mtbkd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file");
  cmd->add_option("--seed", opts.seed, "override the experiment seed");
  cmd->add_option("--out", opts.out_dir, "override the output directory");
  cmd->add_option("--threads", opts.threads, "worker threads for parallel stages");
}

mtbkd::ExperimentConfig resolve_config(const CommonOpts& opts, mtbkd::Scenario fallback) {
  mtbkd::ExperimentConfig cfg =
      opts.config_path.empty() ? mtbkd::default_config(fallback) : mtbkd::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.threads) cfg.threads = *opts.threads;
  cfg.validate();
  return cfg;
}

void print_metrics(const mtbkd::RunOutputs& out) {
  for (const auto& [name, table] : out.metric_rows) {
    std::printf("%-18s accuracy %.4f", name.c_str(), table.overall_accuracy);
    if (table.mse) std::printf("  mse %.5f", *table.mse);
    for (const auto& [level, rate] : table.coverage) {
      std::printf("  cov@%.2f %.3f", level, rate);
    }
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-teacher Bayesian knowledge distillation experiments"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::function<void()> action;

  auto* simulate = app.add_subcommand("simulate", "generate and split the scenario data");
  add_common(simulate, opts);
  simulate->callback([&] {
    action = [&] { mtbkd::cmd_simulate(resolve_config(opts, mtbkd::Scenario::sim1)); };
  });

  auto* teachers = app.add_subcommand("train-teachers", "train teachers and emit predictions");
  add_common(teachers, opts);
  teachers->callback([&] {
    action = [&] { mtbkd::cmd_train_teachers(resolve_config(opts, mtbkd::Scenario::sim1)); };
  });

  auto* distill = app.add_subcommand("distill", "sample the student posterior with SGLD");
  add_common(distill, opts);
  distill->callback([&] {
    action = [&] { mtbkd::cmd_distill(resolve_config(opts, mtbkd::Scenario::sim1)); };
  });

  auto* uq = app.add_subcommand("uq", "per-point uncertainty report from saved chains");
  add_common(uq, opts);
  uq->callback([&] {
    action = [&] { mtbkd::cmd_uq(resolve_config(opts, mtbkd::Scenario::sim1)); };
  });

  auto* evaluate = app.add_subcommand("evaluate", "metrics and coverage tables from saved artifacts");
  add_common(evaluate, opts);
  evaluate->callback([&] {
    action = [&] { mtbkd::cmd_evaluate(resolve_config(opts, mtbkd::Scenario::sim1)); };
  });

  auto* run = app.add_subcommand("run", "full pipeline: data, teachers, chains, UQ, results");
  add_common(run, opts);
  run->callback([&] {
    action = [&] {
      const auto cfg = resolve_config(opts, mtbkd::Scenario::sim1);
      if (cfg.scenario == mtbkd::Scenario::toy1d) {
        mtbkd::run_toy(cfg);
        std::printf("toy run complete; outputs in %s\n", cfg.out_dir.c_str());
        return;
      }
      const auto out = mtbkd::run_algorithm1(cfg);
      print_metrics(out);
      std::printf("outputs in %s\n", cfg.out_dir.c_str());
    };
  });

  auto* demo_toy = app.add_subcommand("demo-toy", "1-D conjugate demo: sampler vs analytic posterior");
  add_common(demo_toy, opts);
  demo_toy->callback([&] {
    action = [&] {
      const auto cfg = resolve_config(opts, mtbkd::Scenario::toy1d);
      const auto manifest = mtbkd::run_toy(cfg);
      const auto& toy = manifest.at("toy");
      std::printf("chain mean %.4f (analytic %.4f); mass below valley %.4f (analytic %.4f)\n",
                  toy.at("chain_mean").get<double>(), toy.at("analytic_mean").get<double>(),
                  toy.at("chain_mass_below_valley").get<double>(),
                  toy.at("analytic_mass_below_valley").get<double>());
      std::printf("outputs in %s\n", cfg.out_dir.c_str());
    };
  });

  auto* cv = app.add_subcommand("cv-lambda", "pick lambda from the grid by validation accuracy");
  add_common(cv, opts);
  cv->callback([&] {
    action = [&] {
      const auto cfg = resolve_config(opts, mtbkd::Scenario::sim1);
      const auto manifest = mtbkd::run_cv_lambda(cfg);
      std::printf("chosen lambda %.3f\n", manifest.at("lambda_cv").at("chosen").get<double>());
    };
  });

  CLI11_PARSE(app, argc, argv);

  try {
    action();
  } catch (const mtbkd::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const mtbkd::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mtbkd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mtbkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mtbkd::ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
