#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mtbkd/dataset.hpp"
#include "mtbkd/errors.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/train.hpp"

namespace mtbkd {

enum class WeightingMode { equal, entropy };

// The monotone decreasing map applied to prediction entropy before
// normalization. exp(-h) is strictly positive and exact for a single teacher.
enum class XiKind { exp_neg, inverse };

inline double xi_value(XiKind kind, double h) {
  switch (kind) {
    case XiKind::exp_neg: return std::exp(-h);
    case XiKind::inverse: return 1.0 / (h + 1e-6);
  }
  throw ContractError("xi_value: unknown kind");
}

struct TeacherMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  int specialty_domain = 0;
};

struct TeacherModel {
  NetworkSpec spec;
  std::vector<double> theta;
  TeacherMeta meta;
};

// Fits a teacher by cross-entropy minimization on its corpus. The caller
// only ever consumes predictions downstream.
inline TeacherModel train_teacher(const NetworkSpec& spec, const LabeledDataset& corpus,
                                  const TrainHyper& hyper, int specialty_domain = 0) {
  if (corpus.n() == 0) throw ContractError("train_teacher: empty corpus");
  if (corpus.num_classes != spec.output_dim()) {
    throw ContractError("train_teacher: corpus classes do not match spec output dim");
  }
  TeacherModel model;
  model.spec = spec;
  model.meta = TeacherMeta{hyper.seed, hyper.epochs, specialty_domain};
  auto theta = init_params(spec, hyper.seed);
  const auto& labels = corpus.labels;
  model.theta = minibatch_gd(spec, std::move(theta), corpus.features, hyper,
                             [&](std::size_t row, std::span<const double> q, std::span<double> dldq) {
                               const auto k = static_cast<std::size_t>(labels[row]);
                               for (std::size_t j = 0; j < q.size(); ++j) dldq[j] = 0.0;
                               if (q[k] > kProbFloor) dldq[k] = -1.0 / q[k];
                               return ce_loss(k, q);
                             });
  return model;
}

inline Matrix predict_probs(const TeacherModel& model, const Matrix& features) {
  if (features.cols() != static_cast<std::size_t>(model.spec.input_dim())) {
    throw ContractError("predict_probs: feature width does not match spec input dim");
  }
  Matrix probs(features.rows(), static_cast<std::size_t>(model.spec.output_dim()));
  ForwardTrace trace;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto q = forward_traced(model.spec, model.theta, features.row(i), trace);
    for (std::size_t k = 0; k < q.size(); ++k) probs(i, k) = q[k];
  }
  return probs;
}

// Shannon entropy in nats with the 0 log 0 = 0 convention.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

// Per-sample teacher weights: equal, or normalized xi(H(p)) with lower
// entropy earning higher weight.
inline std::vector<double> compute_weights(std::span<const std::span<const double>> predictions,
                                           WeightingMode mode, XiKind xi = XiKind::exp_neg) {
  const std::size_t g = predictions.size();
  if (g == 0) throw ContractError("compute_weights: need at least one teacher");
  std::vector<double> w(g, 1.0 / static_cast<double>(g));
  if (mode == WeightingMode::equal) return w;
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    w[i] = xi_value(xi, entropy(predictions[i]));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// All teacher predictions and per-sample weights for one training set.
struct TeacherPredictionSet {
  std::vector<Matrix> probs;  // G matrices, each N x K
  Matrix weights;             // N x G, rows sum to 1
  WeightingMode mode = WeightingMode::entropy;

  std::size_t teacher_count() const { return probs.size(); }
  std::size_t sample_count() const { return probs.empty() ? 0 : probs[0].rows(); }
  std::size_t class_count() const { return probs.empty() ? 0 : probs[0].cols(); }

  void validate() const {
    if (probs.empty()) throw ContractError("TeacherPredictionSet: no teachers");
    for (const auto& m : probs) {
      if (m.rows() != sample_count() || m.cols() != class_count()) {
        throw ContractError("TeacherPredictionSet: ragged prediction matrices");
      }
      for (std::size_t i = 0; i < m.rows(); ++i) {
        if (!is_prob_vector(m.row(i))) {
          throw ContractError("TeacherPredictionSet: prediction row is not a probability vector");
        }
      }
    }
    if (weights.rows() != sample_count() || weights.cols() != teacher_count()) {
      throw ContractError("TeacherPredictionSet: weight shape mismatch");
    }
    for (std::size_t i = 0; i < weights.rows(); ++i) {
      double s = 0.0;
      for (std::size_t g = 0; g < weights.cols(); ++g) {
        const double w = weights(i, g);
        if (!(w > 0.0 && w <= 1.0)) throw ContractError("TeacherPredictionSet: weight out of (0,1]");
        s += w;
      }
      if (std::abs(s - 1.0) > 1e-9) throw ContractError("TeacherPredictionSet: weights row does not sum to 1");
    }
  }
};

inline TeacherPredictionSet build_prediction_set(std::span<const TeacherModel> teachers,
                                                 const Matrix& features, WeightingMode mode,
                                                 XiKind xi = XiKind::exp_neg) {
  if (teachers.empty()) throw ContractError("build_prediction_set: no teachers");
  TeacherPredictionSet set;
  set.mode = mode;
  for (const auto& t : teachers) set.probs.push_back(predict_probs(t, features));
  const std::size_t n = features.rows();
  const std::size_t g = teachers.size();
  set.weights = Matrix(n, g);
  std::vector<std::span<const double>> rows(g);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < g; ++t) rows[t] = set.probs[t].row(i);
    const auto w = compute_weights(rows, mode, xi);
    for (std::size_t t = 0; t < g; ++t) set.weights(i, t) = w[t];
  }
  return set;
}

// CSV with one row per (sample, teacher): distillation can run from this file
// without re-evaluating teachers.
inline void write_predictions_csv(const TeacherPredictionSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "sample_index,teacher_index";
  for (std::size_t k = 0; k < set.class_count(); ++k) out << ",p_" << (k + 1);
  out << ",weight\n";
  for (std::size_t i = 0; i < set.sample_count(); ++i) {
    for (std::size_t g = 0; g < set.teacher_count(); ++g) {
      out << i << "," << g;
      for (std::size_t k = 0; k < set.class_count(); ++k) {
        out << "," << format_double(set.probs[g](i, k));
      }
      out << "," << format_double(set.weights(i, g)) << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

inline TeacherPredictionSet read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty prediction file: " + path);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "sample_index" || header[1] != "teacher_index" ||
      header.back() != "weight") {
    throw IoError("bad prediction csv header: " + path);
  }
  const std::size_t k = header.size() - 3;

  std::size_t n = 0, g = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw IoError("ragged prediction row in " + path);
    std::vector<double> vals(f.size());
    for (std::size_t c = 0; c < f.size(); ++c) vals[c] = std::strtod(f[c].c_str(), nullptr);
    n = std::max(n, static_cast<std::size_t>(vals[0]) + 1);
    g = std::max(g, static_cast<std::size_t>(vals[1]) + 1);
    rows.push_back(std::move(vals));
  }
  TeacherPredictionSet set;
  set.probs.assign(g, Matrix(n, k));
  set.weights = Matrix(n, g);
  for (const auto& vals : rows) {
    const auto i = static_cast<std::size_t>(vals[0]);
    const auto t = static_cast<std::size_t>(vals[1]);
    for (std::size_t c = 0; c < k; ++c) set.probs[t](i, c) = vals[2 + c];
    set.weights(i, t) = vals.back();
  }
  return set;
}

// Binary teacher store so later stages can re-evaluate teachers on new data.
inline void write_teachers_bin(std::span<const TeacherModel> teachers, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const char magic[8] = {'M', 'T', 'B', 'K', 'D', 'T', 'C', 'H'};
  out.write(magic, 8);
  auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  write_u64(1);
  write_u64(teachers.size());
  for (const auto& t : teachers) {
    write_u64(t.spec.layer_sizes.size());
    for (int s : t.spec.layer_sizes) write_u64(static_cast<std::uint64_t>(s));
    write_u64(t.theta.size());
    out.write(reinterpret_cast<const char*>(t.theta.data()),
              static_cast<std::streamsize>(t.theta.size() * sizeof(double)));
    write_u64(t.meta.seed);
    write_u64(t.meta.epochs);
    write_u64(static_cast<std::uint64_t>(t.meta.specialty_domain));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<TeacherModel> read_teachers_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "MTBKDTCH", 8) != 0) throw IoError("bad teacher store magic: " + path);
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (read_u64() != 1) throw IoError("unsupported teacher store version: " + path);
  const std::size_t count = read_u64();
  std::vector<TeacherModel> teachers(count);
  for (auto& t : teachers) {
    const std::size_t layers = read_u64();
    t.spec.layer_sizes.resize(layers);
    for (auto& s : t.spec.layer_sizes) s = static_cast<int>(read_u64());
    t.theta.resize(read_u64());
    in.read(reinterpret_cast<char*>(t.theta.data()),
            static_cast<std::streamsize>(t.theta.size() * sizeof(double)));
    t.meta.seed = read_u64();
    t.meta.epochs = read_u64();
    t.meta.specialty_domain = static_cast<int>(read_u64());
  }
  if (!in) throw IoError("truncated teacher store: " + path);
  return teachers;
}

}  // namespace mtbkd
