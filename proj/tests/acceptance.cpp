// Acceptance suite: every release criterion in one binary, one pass/fail
// line each, fixed seeds throughout. Returns nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "mc_support.hpp"
#include "mtbkd/mtbkd.hpp"
#include "support.hpp"

using namespace mtbkd;
using testsupport::fd_gradient;
using testsupport::max_rel_err;

namespace {

struct Checker {
  int passed = 0;
  int failed = 0;

  void check(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s — %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    (ok ? passed : failed) += 1;
  }
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

PosteriorProblem random_problem(Rng& rng, std::size_t n, int k, std::size_t g, double lambda,
                                const NetworkSpec& spec) {
  auto data = testsupport::random_dataset(rng, n, static_cast<std::size_t>(spec.input_dim()), k);
  auto preds = testsupport::random_prediction_set(rng, n, g, static_cast<std::size_t>(k),
                                                  WeightingMode::entropy);
  return make_posterior_problem(spec, std::move(data), std::move(preds), lambda);
}

std::vector<std::size_t> index_range(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Single-teacher distillation gradient assembled directly from per-sample
// cross entropies; the comparison side of the posterior-equivalence checks.
std::vector<double> direct_kd_grad(const PosteriorProblem& problem, std::span<const double> theta,
                                   double lambda, std::size_t teacher) {
  const auto idx = index_range(problem.data.n());
  return grad_scalar_loss(
      problem.spec, theta, problem.data.features, idx,
      [&](std::size_t row, std::span<const double> q, std::span<double> dldq) {
        const auto label = static_cast<std::size_t>(problem.data.labels[row]);
        const auto p = problem.teachers.probs[teacher].row(row);
        for (std::size_t c = 0; c < q.size(); ++c) {
          dldq[c] = 0.0;
          if (q[c] > kProbFloor) {
            if (c == label) dldq[c] -= 1.0 / q[c];
            if (p[c] != 0.0) dldq[c] -= lambda * p[c] / q[c];
          }
        }
        return ce_loss(label, q) + lambda * cross_entropy(p, q);
      });
}

double scaled_inf_diff(std::span<const double> a, std::span<const double> b) {
  double scale = 1.0, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

const MetricsTable& find_row(const RunOutputs& out, const std::string& name) {
  for (const auto& [n, table] : out.metric_rows) {
    if (n == name) return table;
  }
  throw std::runtime_error("missing metrics row " + name);
}

}  // namespace

int main() {
  Checker c;
  std::printf("acceptance suite\n================\n");

  // ------------------------------------------------------------ criterion 1
  {
    Rng rng(101);
    double worst = 0.0;
    int instances = 0;
    const std::vector<std::vector<int>> shapes{{2, 5, 2}, {3, 4, 3}, {4, 8, 6, 2}, {5, 10, 5}};
    for (int rep = 0; rep < 30; ++rep) {
      const NetworkSpec spec{shapes[static_cast<std::size_t>(rep) % shapes.size()]};
      const auto theta = testsupport::random_theta(rng, param_count(spec));
      Matrix features(4, static_cast<std::size_t>(spec.input_dim()));
      Matrix targets(4, static_cast<std::size_t>(spec.output_dim()));
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < features.cols(); ++j) features(i, j) = rng.uniform(-1.5, 1.5);
        const auto t = testsupport::random_simplex_point(rng, targets.cols());
        for (std::size_t k = 0; k < targets.cols(); ++k) targets(i, k) = t[k];
      }
      const auto rows = index_range(4);
      auto loss = [&](std::size_t row, std::span<const double> q, std::span<double> d) {
        cross_entropy_dq(targets.row(row), q, d);
        return cross_entropy(targets.row(row), q);
      };
      const auto grad = grad_scalar_loss(spec, theta, features, rows, loss);
      const auto fd = fd_gradient(
          [&](std::span<const double> t) { return mean_scalar_loss(spec, t, features, rows, loss); },
          theta);
      worst = std::max(worst, max_rel_err(grad, fd));
      ++instances;
    }
    for (int rep = 0; rep < 25; ++rep) {
      const int k = rep % 2 == 0 ? 2 : 3;
      const std::size_t g = 1 + static_cast<std::size_t>(rep % 3);
      const double lambda = rep % 5 == 0 ? 0.0 : rng.uniform(0.2, 3.0);
      const NetworkSpec spec{{2, 4, k}};
      const auto problem = random_problem(rng, 6, k, g, lambda, spec);
      const auto theta = testsupport::random_theta(rng, param_count(spec));
      const auto grad = problem.grad_log_posterior(theta);
      const auto fd = fd_gradient(
          [&](std::span<const double> t) { return problem.log_posterior(t); }, theta);
      worst = std::max(worst, max_rel_err(grad, fd));
      ++instances;
    }
    c.check("criterion 1: gradient correctness vs central finite differences",
            worst < 1e-4, fmt("%d instances, worst relative error %.3g (< 1e-4)", instances, worst));
  }

  // ------------------------------------------------------------ criterion 2
  {
    Rng rng(102);
    double worst_grad = 0.0, worst_const = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const double lambda = rng.uniform(0.2, 3.0);
      const NetworkSpec spec{{2, 4, 2}};
      const auto problem = random_problem(rng, 7, 2, 1, lambda, spec);
      const double n = static_cast<double>(problem.data.n());

      double expect_const = 0.0;
      for (std::size_t i = 0; i < problem.data.n(); ++i) {
        expect_const += problem.prior.log_beta_cache(i, 0);
      }
      for (int t = 0; t < 4; ++t) {
        const auto theta = testsupport::random_theta(rng, param_count(spec));
        auto neg = problem.grad_log_posterior(theta);
        for (double& v : neg) v = -v;
        auto kd = direct_kd_grad(problem, theta, lambda, 0);
        for (double& v : kd) v *= n;
        worst_grad = std::max(worst_grad, scaled_inf_diff(neg, kd));
        const double gap = -problem.log_posterior(theta) - n * kd_loss(problem, theta, lambda);
        worst_const = std::max(worst_const, std::abs(gap - expect_const));
      }
    }
    c.check("criterion 2: single-teacher posterior/distillation equivalence",
            worst_grad < 1e-10 && worst_const < 1e-9,
            fmt("20 instances, gradient diff %.3g (< 1e-10), constant drift %.3g (< 1e-9)",
                worst_grad, worst_const));
  }

  // ------------------------------------------------------------ criterion 3
  {
    Rng rng(103);
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const double lambda = rng.uniform(0.3, 2.5);
      const NetworkSpec spec{{2, 4, 3}};
      const auto problem = random_problem(rng, 6, 3, 3, lambda, spec);
      const auto theta = testsupport::random_theta(rng, param_count(spec));
      const double n = static_cast<double>(problem.data.n());
      const std::vector<double> w{0.5, 0.3, 0.2};

      std::vector<double> pooled(param_count(spec), 0.0);
      for (std::size_t g = 0; g < 3; ++g) {
        const auto grad_g = direct_kd_grad(problem, theta, lambda, g);
        for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] += w[g] * n * grad_g[i];
      }
      auto multi = grad_multi_kd_loss(problem, theta, lambda, false, w);
      for (double& v : multi) v *= n;
      worst = std::max(worst, scaled_inf_diff(multi, pooled));
    }
    c.check("criterion 3: multi-teacher loss equals logarithmic pooling (gradients)",
            worst < 1e-10, fmt("10 instances, worst gradient diff %.3g (< 1e-10)", worst));
  }

  // ------------------------------------------------------------ criterion 4
  {
    Rng rng(104);
    double worst_int = 0.0;
    for (int k : {2, 3}) {
      for (double lambda : {0.5, 2.0, 5.0}) {
        const auto p = k == 2 ? std::vector<double>{0.4, 0.6} : std::vector<double>{0.2, 0.5, 0.3};
        const int draws = k == 2 ? 200000 : 500000;
        double acc = 0.0;
        for (int s = 0; s < draws; ++s) {
          const auto q = k == 2 ? std::vector<double>{0.0, 0.0} : std::vector<double>{0.0, 0.0, 0.0};
          auto qq = q;
          if (k == 2) {
            qq[0] = rng.uniform();
            qq[1] = 1.0 - qq[0];
          } else {
            const auto u = testsupport::random_simplex_point(rng, 3);
            qq = u;
          }
          acc += std::exp(log_dirichlet_density(qq, p, lambda));
        }
        // Uniform density over the simplex is (K-1)! per unit Lebesgue measure.
        const double integral = k == 2 ? acc / draws : acc / draws / 2.0;
        worst_int = std::max(worst_int, std::abs(integral - 1.0));
      }
    }

    bool argmax_ok = true;
    {
      const std::vector<double> p2{0.3, 0.7};
      for (double lambda : {1.0, 3.0}) {
        double best_q = -1, best_v = -1e300;
        for (int i = 1; i < 400; ++i) {
          const double q1 = i / 400.0;
          const double v = log_dirichlet_density(std::vector<double>{q1, 1 - q1}, p2, lambda);
          if (v > best_v) {
            best_v = v;
            best_q = q1;
          }
        }
        argmax_ok = argmax_ok && std::abs(best_q - 0.3) <= 1.0 / 400.0 + 1e-12;
      }
      const std::vector<double> p3{0.2, 0.5, 0.3};
      double b1 = -1, b2 = -1, best_v = -1e300;
      for (int i = 1; i < 100; ++i) {
        for (int j = 1; j < 100 - i; ++j) {
          const double v = log_dirichlet_density(
              std::vector<double>{i / 100.0, j / 100.0, 1.0 - i / 100.0 - j / 100.0}, p3, 5.0);
          if (v > best_v) {
            best_v = v;
            b1 = i / 100.0;
            b2 = j / 100.0;
          }
        }
      }
      argmax_ok = argmax_ok && std::abs(b1 - 0.2) <= 0.0101 && std::abs(b2 - 0.5) <= 0.0101;
    }

    bool gap_ok = true;
    for (int rep = 0; rep < 10; ++rep) {
      const auto p = testsupport::random_simplex_point(rng, 3);
      const auto q = testsupport::random_simplex_point(rng, 3);
      double prev = -1e300;
      for (double lambda : {1.0, 10.0, 100.0, 1000.0}) {
        const double gap = log_dirichlet_density(p, p, lambda) - log_dirichlet_density(q, p, lambda);
        gap_ok = gap_ok && gap > prev;
        prev = gap;
      }
    }
    c.check("criterion 4: Dirichlet density normalization, mode, concentration",
            worst_int < 0.01 && argmax_ok && gap_ok,
            fmt("integral error %.4f (< 0.01), mode-at-p %s, lambda gap increasing %s", worst_int,
                argmax_ok ? "yes" : "no", gap_ok ? "yes" : "no"));
  }

  // ------------------------------------------------------------ criterion 5
  {
    Rng rng(105);
    bool identity_ok = true;
    for (int rep = 0; rep < 200; ++rep) {
      const auto q = testsupport::random_simplex_point(rng, 4);
      const auto label = rng.uniform_index(4);
      identity_ok = identity_ok && deviance(label, q) == 2.0 * ce_loss(label, q);
    }
    bool knot_ok = true;
    for (int rep = 0; rep < 40; ++rep) {
      const std::size_t r = 1 + rng.uniform_index(40);
      const std::size_t k = 2 + rng.uniform_index(3);
      if (r * k > 200) continue;
      Matrix pred(r, k);
      for (std::size_t j = 0; j < r; ++j) {
        const auto row = testsupport::random_simplex_point(rng, k);
        for (std::size_t cidx = 0; cidx < k; ++cidx) pred(j, cidx) = row[cidx];
      }
      const double alpha = rng.uniform(0.02, 0.4);
      // exhaustive scan over knots
      std::vector<double> knots;
      for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t cidx = 0; cidx < k; ++cidx) {
          knots.push_back(-2.0 * std::log(floored(pred(j, cidx))));
        }
      }
      std::sort(knots.begin(), knots.end());
      double oracle = knots.back();
      for (double tau : knots) {
        double mass = 0.0;
        for (std::size_t j = 0; j < r; ++j) {
          for (std::size_t cidx = 0; cidx < k; ++cidx) {
            if (-2.0 * std::log(floored(pred(j, cidx))) <= tau) {
              mass += pred(j, cidx) / static_cast<double>(r);
            }
          }
        }
        if (mass >= 1.0 - alpha - 1e-12) {
          oracle = tau;
          break;
        }
      }
      knot_ok = knot_ok && std::abs(credible_upper(pred, alpha) - oracle) < 1e-12;
    }
    c.check("criterion 5: deviance identity and interval-bound minimizer",
            identity_ok && knot_ok,
            fmt("200 identity checks exact %s, 40 knot scans matched %s",
                identity_ok ? "yes" : "no", knot_ok ? "yes" : "no"));
  }

  // ------------------------------------------------------------ criterion 6
  {
    const double tau = 0.02;
    testsupport::ZeroGradTarget target{1, 16};
    SgldConfig cfg;
    cfg.schedule.kind = StepSchedule::Kind::constant;
    cfg.schedule.tau = tau;
    cfg.total_iters = 10000;
    cfg.burn_in = 0;
    cfg.thinning = 1;
    cfg.seed = 1106;
    const auto chain = sgld_run(target, cfg, std::vector<double>{0.0});
    std::vector<double> standardized;
    double last = 0.0;
    for (const auto& s : chain.samples) {
      standardized.push_back((s[0] - last) / std::sqrt(2.0 * tau));
      last = s[0];
    }
    const bool ks_ok = testsupport::ks_pass_1pct(standardized);

    bool thin_ok = true;
    testsupport::ZeroGradTarget small{2, 8};
    for (auto [total, burn, thin] : std::vector<std::array<std::size_t, 3>>{
             {100, 50, 10}, {101, 50, 10}, {109, 50, 10}, {1000, 1, 3}, {7, 3, 2}}) {
      SgldConfig tcfg = cfg;
      tcfg.total_iters = total;
      tcfg.burn_in = burn;
      tcfg.thinning = thin;
      const auto tchain = sgld_run(small, tcfg, std::vector<double>{0.0, 0.0});
      thin_ok = thin_ok && tchain.samples.size() == (total - burn) / thin;
    }
    c.check("criterion 6: injected-noise law and thinning arithmetic",
            ks_ok && thin_ok,
            fmt("KS at 1%% over 10000 steps %s, burn-in/thinning exact %s",
                ks_ok ? "pass" : "fail", thin_ok ? "yes" : "no"));
  }

  // ------------------------------------------------------------ criterion 7
  {
    const auto toy = gen_toy_1d();
    const Toy1dTarget target{toy};
    SgldConfig cfg;
    cfg.schedule.kind = StepSchedule::Kind::constant;
    cfg.schedule.tau = 0.02;
    cfg.total_iters = 450000;
    cfg.burn_in = 50000;
    cfg.thinning = 8;
    cfg.seed = 1107;
    const auto chain = sgld_run(target, cfg, std::vector<double>{3.0});
    std::vector<double> draws;
    for (const auto& s : chain.samples) draws.push_back(s[0]);
    const double w_hat =
        testsupport::em_mixture_weight(draws, toy.post_means[0], toy.post_means[1], toy.post_var);
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= static_cast<double>(draws.size());
    const auto peaks = testsupport::kde_peaks(draws, 0.0, 8.0);
    const bool peaks_ok = peaks.size() == 2 && std::abs(peaks[0] - toy.post_means[0]) < 0.3 &&
                          std::abs(peaks[1] - toy.post_means[1]) < 0.3;
    const bool ok = draws.size() >= 50000 && std::abs(w_hat - toy.post_weights[0]) < 0.05 &&
                    std::abs(mean - toy.posterior_mean()) < 0.05 && peaks_ok;
    c.check("criterion 7: toy bimodal posterior recovered by the sampler", ok,
            fmt("r=%zu, weight %.3f (oracle %.3f, tol 0.05), mean %.3f (oracle %.3f), peaks %zu",
                draws.size(), w_hat, toy.post_weights[0], mean, toy.posterior_mean(),
                peaks.size()));
  }

  // ------------------------------------------------------------ criterion 8
  {
    const auto target = testsupport::BinaryLogisticTarget::make(20, 777);
    SgldConfig cfg;
    cfg.schedule.kind = StepSchedule::Kind::constant;
    cfg.schedule.tau = 2e-3;
    cfg.total_iters = 400000;
    cfg.burn_in = 50000;
    cfg.thinning = 10;
    cfg.batch_size = 20;
    cfg.seed = 1108;
    const auto chain = sgld_run(target, cfg, std::vector<double>{0.0, 0.0});
    const auto summary = chain_summary(chain);
    const auto [qw, qb] = target.quadrature_mean(-6.0, 6.0, 400);
    bool ok = true;
    std::string detail;
    for (std::size_t d = 0; d < 2; ++d) {
      const double want = d == 0 ? qw : qb;
      const double se = std::sqrt(summary.variance[d] / summary.ess[d]);
      ok = ok && std::abs(summary.mean[d] - want) <= 3.0 * se;
      detail += fmt("%scoord %zu: chain %.4f quad %.4f (3se %.4f)", d ? "; " : "", d,
                    summary.mean[d], want, 3.0 * se);
    }
    c.check("criterion 8: chain mean matches dense-grid quadrature", ok, detail);
  }

  // ------------------------------------------------------------ criterion 9
  {
    DomainPartition part{};
    auto train = gen_sim1(4000, 90001, part);
    const NetworkSpec tspec{{2, 8, 8, 2}}, sspec{{2, 5, 2}};
    std::vector<TeacherModel> teachers;
    for (std::size_t g = 0; g < 2; ++g) {
      auto corpus = gen_teacher_corpus(train, g == 0 ? 1 : 3, 1.0, 1200, 300 + g);
      teachers.push_back(
          train_teacher(tspec, corpus.data, TrainHyper{0.1, 80, 64, 400 + g}, 0));
    }
    auto preds = build_prediction_set(teachers, train.features, WeightingMode::entropy);
    auto problem = make_posterior_problem(sspec, train, preds, 1.0);
    auto theta = init_params(sspec, 77);
    {
      Rng rng(77, 7);
      detail::BatchDealer dealer(train.n(), 64, rng);
      for (int j = 1; j <= 2000; ++j) {
        const auto grad = problem.grad_log_posterior(theta, dealer.next());
        const double tau = 1e-4 * std::pow(100.0 + j, -0.55);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += tau * grad[i];
      }
    }
    SgldConfig cfg;
    cfg.schedule.a = 1e-4;
    cfg.total_iters = 10000;
    cfg.burn_in = 5000;
    cfg.thinning = 5;
    cfg.batch_size = 64;
    cfg.seed = 5150;
    const auto chain = sgld_run(problem, cfg, theta);

    const auto testd = gen_sim1(5000, 90002, part);
    bool ok = true;
    std::string detail;
    for (double alpha : {0.05, 0.10, 0.15}) {
      Rng label_rng(90003 + static_cast<std::uint64_t>(alpha * 1000));
      double total = 0.0;
      for (std::size_t s = 0; s < testd.n(); ++s) {
        const auto pred = chain_predictive(chain.samples, sspec, testd.features.row(s));
        double pbar = 0.0;
        for (std::size_t j = 0; j < pred.rows(); ++j) pbar += pred(j, 0);
        pbar /= static_cast<double>(pred.rows());
        const std::size_t label = label_rng.uniform() < pbar ? 0 : 1;
        total += coverage_mass(pred, label, credible_upper(pred, alpha));
      }
      const double coverage = total / static_cast<double>(testd.n());
      ok = ok && std::abs(coverage - (1.0 - alpha)) <= 0.02;
      detail += fmt("%s%.2f: %.4f", detail.empty() ? "coverage at " : ", ", 1.0 - alpha, coverage);
    }
    c.check("criterion 9: coverage self-consistency under the model's own labels", ok,
            detail + " (tol 0.02)");
  }

  // --------------------------------------------------- criteria 10, 11, 13, 14
  RunOutputs sim1_out;
  {
    auto cfg = default_config(Scenario::sim1);
    cfg.out_dir = (std::filesystem::temp_directory_path() / "mtbkd_acceptance_sim1").string();
    std::filesystem::remove_all(cfg.out_dir);
    cfg.methods = {parse_method("mtbkd_weighted"), parse_method("mtbkd_equal")};
    cfg.threads = 2;
    sim1_out = run_algorithm1(cfg);

    const auto& weighted = find_row(sim1_out, "mtbkd_weighted");
    const auto& equal = find_row(sim1_out, "mtbkd_equal");
    const auto& t1 = find_row(sim1_out, "teacher_1");
    const auto& t2 = find_row(sim1_out, "teacher_2");
    const double max_teacher = std::max(t1.overall_accuracy, t2.overall_accuracy);

    const bool ok10 = weighted.overall_accuracy >= 0.78 && *weighted.mse <= 0.03 &&
                      weighted.overall_accuracy >= equal.overall_accuracy - 0.01 &&
                      weighted.overall_accuracy >= max_teacher + 0.05;
    c.check("criterion 10: simulation-1 accuracy and MSE bands", ok10,
            fmt("weighted acc %.4f (>= 0.78), mse %.4f (<= 0.03), equal acc %.4f (-0.01 band), "
                "best teacher %.4f (+0.05 band)",
                weighted.overall_accuracy, *weighted.mse, equal.overall_accuracy, max_teacher));

    const double gap1 = t1.domain_accuracy.at(1) - t1.domain_accuracy.at(3);
    const double gap2 = t2.domain_accuracy.at(3) - t2.domain_accuracy.at(1);
    c.check("criterion 11: simulation-1 teacher specialization pattern",
            gap1 >= 0.15 && gap2 >= 0.15,
            fmt("teacher1 b1-b3 gap %.3f, teacher2 b3-b1 gap %.3f (both >= 0.15)", gap1, gap2));
  }

  RunOutputs sim2_out;
  {
    auto cfg = default_config(Scenario::sim2);
    cfg.out_dir = (std::filesystem::temp_directory_path() / "mtbkd_acceptance_sim2").string();
    std::filesystem::remove_all(cfg.out_dir);
    cfg.methods = {parse_method("mtbkd_weighted"), parse_method("mtbkd_equal")};
    cfg.threads = 2;
    sim2_out = run_algorithm1(cfg);

    const auto& weighted = find_row(sim2_out, "mtbkd_weighted");
    const auto& equal = find_row(sim2_out, "mtbkd_equal");
    const bool ok12 = weighted.overall_accuracy >= 0.82 && *weighted.mse <= 0.02 &&
                      weighted.overall_accuracy >= equal.overall_accuracy - 0.01;
    c.check("criterion 12: simulation-2 accuracy and MSE bands", ok12,
            fmt("weighted acc %.4f (>= 0.82), mse %.4f (<= 0.02), equal acc %.4f (-0.01 band)",
                weighted.overall_accuracy, *weighted.mse, equal.overall_accuracy));
  }

  {
    bool ok = true;
    std::string detail;
    for (const auto* out : {&sim1_out, &sim2_out}) {
      const auto& weighted = find_row(*out, "mtbkd_weighted");
      for (const auto& [level, rate] : weighted.coverage) {
        ok = ok && std::abs(rate - level) <= 0.05;
        detail += fmt("%s%.2f:%.3f", detail.empty() ? "" : " ", level, rate);
      }
    }
    c.check("criterion 13: empirical coverage tracks nominal levels on both simulations", ok,
            detail + " (tol 0.05)");
  }

  {
    // Weighted-method report is results[0] of the sim1 run.
    const auto& report = sim1_out.results.front().report;
    const auto test = read_dataset_bin(
        (std::filesystem::temp_directory_path() / "mtbkd_acceptance_sim1" / "data" / "test.bin")
            .string());
    double mid = 0.0, extreme = 0.0;
    std::size_t n_mid = 0, n_ext = 0;
    for (const auto& pt : report.points) {
      const double p = test.true_probs(pt.index, 0);
      if (p >= 0.4 && p <= 0.6) {
        mid += pt.mean_dev;
        ++n_mid;
      } else if (p <= 0.1 || p >= 0.9) {
        extreme += pt.mean_dev;
        ++n_ext;
      }
    }
    mid /= static_cast<double>(n_mid);
    extreme /= static_cast<double>(n_ext);
    c.check("criterion 14: uncertainty concentrates where class probabilities are ambiguous",
            mid > extreme,
            fmt("mean deviance %.4f on p in [0.4,0.6] (n=%zu) vs %.4f on extremes (n=%zu)", mid,
                n_mid, extreme, n_ext));
  }

  std::printf("================\nacceptance: %d/%d criteria passed\n", c.passed,
              c.passed + c.failed);
  return c.failed == 0 ? 0 : 1;
}
