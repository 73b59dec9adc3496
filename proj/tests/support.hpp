#pragma once

// Shared helpers for unit and acceptance tests.

#include "followrl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace followrl::testing {

/// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("followrl_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct GradCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

/// Compares backward() with central differences for the loss
/// L = sum(W .* f(X)) where W and X are random. Relative error uses
/// max(|analytic|, |numeric|, floor) as denominator so that gradients that
/// are zero up to round-off do not blow the ratio up.
inline GradCheck gradient_check(const MlpNet& base, std::uint64_t seed, int batch = 3, double h = 1e-5,
                                double floor = 1e-7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  MlpNet net = base;
  Eigen::MatrixXd x(net.input_size(), batch);
  Eigen::MatrixXd w(net.output_size(), batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n01(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = n01(rng);

  auto loss = [&](const MlpNet& m, const Eigen::MatrixXd& in) { return (w.array() * m.forward(in).array()).sum(); };

  MlpNet::Cache cache;
  net.forward(x, cache);
  const auto g = net.backward(cache, w);

  GradCheck out;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.checked;
  };

  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto rows = net.layers()[l].weight.rows();
    const auto cols = net.layers()[l].weight.cols();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        MlpNet plus = net, minus = net;
        plus.mutable_layers()[l].weight(r, c) += h;
        minus.mutable_layers()[l].weight(r, c) -= h;
        compare(g.weight[l](r, c), (loss(plus, x) - loss(minus, x)) / (2 * h));
      }
      MlpNet plus = net, minus = net;
      plus.mutable_layers()[l].bias(r) += h;
      minus.mutable_layers()[l].bias(r) -= h;
      compare(g.bias[l](r), (loss(plus, x) - loss(minus, x)) / (2 * h));
    }
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    compare(g.input(i), (loss(net, xp) - loss(net, xm)) / (2 * h));
  }
  return out;
}

}  // namespace followrl::testing
