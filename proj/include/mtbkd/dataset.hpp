#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mtbkd/errors.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/rng.hpp"

namespace mtbkd {

// Classification sample set: features, one-hot labels (stored as class
// indices), optional ground-truth class probabilities and domain tags.
struct LabeledDataset {
  Matrix features;                // n x m
  std::vector<int> labels;        // class index in [0, K)
  int num_classes = 0;
  Matrix true_probs;              // n x K when present, else empty
  std::vector<int> domain_tags;   // tags in {1..D} when present, else empty

  std::size_t n() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool has_true_probs() const { return !true_probs.empty(); }
  bool has_domains() const { return !domain_tags.empty(); }

  std::vector<double> one_hot(std::size_t i) const {
    std::vector<double> y(static_cast<std::size_t>(num_classes), 0.0);
    y[static_cast<std::size_t>(labels[i])] = 1.0;
    return y;
  }

  void validate() const {
    if (labels.size() != n()) throw ContractError("dataset: label count mismatch");
    if (num_classes < 2) throw ContractError("dataset: need at least two classes");
    for (int y : labels) {
      if (y < 0 || y >= num_classes) throw ContractError("dataset: label out of range");
    }
    for (double v : features.data()) {
      if (!std::isfinite(v)) throw ContractError("dataset: non-finite feature");
    }
    if (has_true_probs()) {
      if (true_probs.rows() != n() || true_probs.cols() != static_cast<std::size_t>(num_classes)) {
        throw ContractError("dataset: true_probs shape mismatch");
      }
      for (std::size_t i = 0; i < n(); ++i) {
        if (!is_prob_vector(true_probs.row(i))) {
          throw ContractError("dataset: true_probs row is not a probability vector");
        }
      }
    }
    if (has_domains() && domain_tags.size() != n()) {
      throw ContractError("dataset: domain tag count mismatch");
    }
  }
};

inline LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.features = Matrix(indices.size(), ds.dim());
  out.labels.resize(indices.size());
  if (ds.has_true_probs()) out.true_probs = Matrix(indices.size(), static_cast<std::size_t>(ds.num_classes));
  if (ds.has_domains()) out.domain_tags.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    for (std::size_t j = 0; j < ds.dim(); ++j) out.features(r, j) = ds.features(i, j);
    out.labels[r] = ds.labels[i];
    if (ds.has_true_probs()) {
      for (int k = 0; k < ds.num_classes; ++k) {
        out.true_probs(r, static_cast<std::size_t>(k)) = ds.true_probs(i, static_cast<std::size_t>(k));
      }
    }
    if (ds.has_domains()) out.domain_tags[r] = ds.domain_tags[i];
  }
  return out;
}

// Disjoint shuffled train/val/test partition preserving all fields.
inline std::array<LabeledDataset, 3> split(const LabeledDataset& ds,
                                           const std::array<double, 3>& ratios,
                                           std::uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0.0 || ratios[1] <= 0.0 || ratios[2] <= 0.0 || std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must be positive and sum to 1");
  }
  const std::size_t n = ds.n();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, /*stream=*/51u);
  rng.shuffle(order);

  const auto c1 = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto c12 = static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * static_cast<double>(n)));
  if (c1 == 0 || c12 <= c1 || c12 >= n) throw ConfigError("split: a split would be empty");

  std::array<LabeledDataset, 3> out;
  out[0] = subset(ds, std::span<const std::size_t>(order.data(), c1));
  out[1] = subset(ds, std::span<const std::size_t>(order.data() + c1, c12 - c1));
  out[2] = subset(ds, std::span<const std::size_t>(order.data() + c12, n - c12));
  return out;
}

// 17 significant digits round-trip IEEE doubles through decimal exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Columnar CSV: x_1..x_m, y, then p_true_1..p_true_K and domain when present.
inline void write_dataset_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (std::size_t j = 0; j < ds.dim(); ++j) out << "x_" << (j + 1) << ",";
  out << "y";
  if (ds.has_true_probs()) {
    for (int k = 0; k < ds.num_classes; ++k) out << ",p_true_" << (k + 1);
  }
  if (ds.has_domains()) out << ",domain";
  out << "\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) out << format_double(ds.features(i, j)) << ",";
    out << ds.labels[i];
    if (ds.has_true_probs()) {
      for (int k = 0; k < ds.num_classes; ++k) {
        out << "," << format_double(ds.true_probs(i, static_cast<std::size_t>(k)));
      }
    }
    if (ds.has_domains()) out << "," << ds.domain_tags[i];
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace detail

inline LabeledDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);
  const auto header = detail::split_csv_line(line);

  std::size_t m = 0, k = 0;
  bool has_domain = false;
  std::ptrdiff_t y_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("x_", 0) == 0) ++m;
    else if (header[c] == "y") y_col = static_cast<std::ptrdiff_t>(c);
    else if (header[c].rfind("p_true_", 0) == 0) ++k;
    else if (header[c] == "domain") has_domain = true;
    else throw IoError("unexpected dataset column: " + header[c]);
  }
  if (m == 0 || y_col < 0) throw IoError("dataset csv missing feature or label columns: " + path);

  std::vector<double> feat;
  std::vector<int> labels, domains;
  std::vector<double> probs;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw IoError("ragged dataset row in " + path);
    for (std::size_t j = 0; j < m; ++j) feat.push_back(std::strtod(f[j].c_str(), nullptr));
    labels.push_back(std::stoi(f[static_cast<std::size_t>(y_col)]));
    for (std::size_t c = 0; c < k; ++c) {
      probs.push_back(std::strtod(f[m + 1 + c].c_str(), nullptr));
    }
    if (has_domain) domains.push_back(std::stoi(f.back()));
    ++rows;
  }

  LabeledDataset ds;
  ds.features = Matrix(rows, m);
  std::copy(feat.begin(), feat.end(), ds.features.data().begin());
  ds.labels = std::move(labels);
  int max_label = 1;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = k > 0 ? static_cast<int>(k) : max_label + 1;
  if (k > 0) {
    ds.true_probs = Matrix(rows, k);
    std::copy(probs.begin(), probs.end(), ds.true_probs.data().begin());
  }
  ds.domain_tags = std::move(domains);
  return ds;
}

// Compact binary cache; exact 64-bit round trip.
inline void write_dataset_bin(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const char magic[8] = {'M', 'T', 'B', 'K', 'D', 'D', 'A', 'T'};
  out.write(magic, 8);
  auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  write_u64(1);  // version
  write_u64(ds.n());
  write_u64(ds.dim());
  write_u64(static_cast<std::uint64_t>(ds.num_classes));
  write_u64(ds.has_true_probs() ? 1 : 0);
  write_u64(ds.has_domains() ? 1 : 0);
  out.write(reinterpret_cast<const char*>(ds.features.data().data()),
            static_cast<std::streamsize>(ds.features.data().size() * sizeof(double)));
  for (int y : ds.labels) {
    const auto v = static_cast<std::int32_t>(y);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (ds.has_true_probs()) {
    out.write(reinterpret_cast<const char*>(ds.true_probs.data().data()),
              static_cast<std::streamsize>(ds.true_probs.data().size() * sizeof(double)));
  }
  for (int d : ds.domain_tags) {
    const auto v = static_cast<std::int32_t>(d);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw IoError("write failed: " + path);
}

inline LabeledDataset read_dataset_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "MTBKDDAT", 8) != 0) throw IoError("bad dataset cache magic: " + path);
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (read_u64() != 1) throw IoError("unsupported dataset cache version: " + path);
  const std::size_t n = read_u64();
  const std::size_t m = read_u64();
  const auto k = static_cast<int>(read_u64());
  const bool has_probs = read_u64() != 0;
  const bool has_domains = read_u64() != 0;

  LabeledDataset ds;
  ds.num_classes = k;
  ds.features = Matrix(n, m);
  in.read(reinterpret_cast<char*>(ds.features.data().data()),
          static_cast<std::streamsize>(n * m * sizeof(double)));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    ds.labels[i] = v;
  }
  if (has_probs) {
    ds.true_probs = Matrix(n, static_cast<std::size_t>(k));
    in.read(reinterpret_cast<char*>(ds.true_probs.data().data()),
            static_cast<std::streamsize>(n * static_cast<std::size_t>(k) * sizeof(double)));
  }
  if (has_domains) {
    ds.domain_tags.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      ds.domain_tags[i] = v;
    }
  }
  if (!in) throw IoError("truncated dataset cache: " + path);
  return ds;
}

}  // namespace mtbkd
