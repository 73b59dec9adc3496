#include "followrl/mlp.hpp"

#include "../support.hpp"
#include "doctest.h"

#include <cmath>

using namespace followrl;

TEST_CASE("forward trivial nets") {
  MlpNet lin({3, 4, 2}, OutputActivation::Linear, 1);
  for (auto& l : lin.mutable_layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(lin.forward(Eigen::MatrixXd::Random(3, 5)).cwiseAbs().maxCoeff() == 0.0);

  MlpNet one({1, 1}, OutputActivation::Tanh, 1);
  one.mutable_layers()[0].weight(0, 0) = 1;
  one.mutable_layers()[0].bias(0) = 0;
  CHECK(one.forward(Eigen::MatrixXd::Zero(1, 1))(0, 0) == 0.0);
}

TEST_CASE("forward equals a hand-written evaluation") {
  MlpNet net({4, 32, 32, 1}, OutputActivation::Tanh, 123);
  Eigen::MatrixXd x(4, 1);
  x << 0.3, -0.2, 0.7, 0.1;
  const auto& L = net.layers();
  std::vector<double> h(x.data(), x.data() + 4);
  for (std::size_t l = 0; l < L.size(); ++l) {
    std::vector<double> next(static_cast<std::size_t>(L[l].weight.rows()));
    for (Eigen::Index r = 0; r < L[l].weight.rows(); ++r) {
      double s = L[l].bias(r);
      for (Eigen::Index c = 0; c < L[l].weight.cols(); ++c) s += L[l].weight(r, c) * h[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = l + 1 < L.size() ? std::max(0.0, s) : std::tanh(s);
    }
    h = next;
  }
  CHECK(std::abs(net.forward(x)(0, 0) - h[0]) <= 1e-12);
  // pure function
  CHECK(net.forward(x)(0, 0) == net.forward(x)(0, 0));
}

TEST_CASE("initialization bounds") {
  MlpNet net({5, 32, 32, 1}, OutputActivation::Linear, 8);
  for (const auto& l : net.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(MlpNet({5, 32, 32, 1}, OutputActivation::Linear, 8) == net);
  CHECK_FALSE(MlpNet({5, 32, 32, 1}, OutputActivation::Linear, 9) == net);
  CHECK(net.parameter_count() == 5 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
}

TEST_CASE("gradient check on every architecture") {
  struct Arch {
    const char* name;
    std::vector<int> sizes;
    OutputActivation out;
  };
  const std::vector<Arch> archs = {{"actor", {4, 32, 32, 1}, OutputActivation::Tanh},
                                   {"critic", {5, 32, 32, 1}, OutputActivation::Linear},
                                   {"control", {3, 16, 16, 2}, OutputActivation::Linear},
                                   {"bc", {4, 32, 32, 1}, OutputActivation::Tanh}};
  for (const auto& a : archs) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      CAPTURE(a.name);
      const auto r = testing::gradient_check(MlpNet(a.sizes, a.out, 100 + s), s);
      CHECK(r.max_rel_error <= 1e-4);
      CHECK(r.checked > 0);
    }
  }
}

TEST_CASE("backward special cases") {
  MlpNet net({4, 8, 1}, OutputActivation::Tanh, 3);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 6);
  MlpNet::Cache cache;
  net.forward(x, cache);
  const auto g = net.backward(cache, Eigen::MatrixXd::Zero(1, 6));
  for (const auto& w : g.weight) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : g.bias) CHECK(b.cwiseAbs().maxCoeff() == 0.0);

  // tanh head at pre-activation 0 passes the gradient through unchanged
  MlpNet one({1, 1}, OutputActivation::Tanh, 1);
  one.mutable_layers()[0].weight(0, 0) = 1;
  one.mutable_layers()[0].bias(0) = 0;
  MlpNet::Cache c1;
  one.forward(Eigen::MatrixXd::Zero(1, 1), c1);
  CHECK(one.backward(c1, Eigen::MatrixXd::Constant(1, 1, 0.7)).input(0, 0) == doctest::Approx(0.7).epsilon(1e-15));

  // a pre-activation gradient is added after the tanh factor
  MlpNet::Cache c2;
  one.forward(Eigen::MatrixXd::Constant(1, 1, 0.5), c2);
  const auto gp = one.backward(c2, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, 2.0));
  CHECK(gp.bias[0](0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(gp.weight[0](0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("stale cache is rejected") {
  MlpNet net({2, 3, 1}, OutputActivation::Linear, 1);
  MlpNet::Cache cache;
  net.forward(Eigen::MatrixXd::Ones(2, 1), cache);
  net.mutable_layers()[0].bias(0) += 1;
  CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Ones(1, 1)), ValidationError);
}

TEST_CASE("adam") {
  MlpNet net({1, 1}, OutputActivation::Linear, 1);
  net.mutable_layers()[0].weight(0, 0) = 0.5;
  net.mutable_layers()[0].bias(0) = 0.25;
  AdamConfig cfg;
  Adam opt(net, cfg);
  auto g = MlpNet::Gradients::zeros_like(net);
  opt.step(net, g);
  CHECK(net.layers()[0].weight(0, 0) == 0.5);
  CHECK(net.layers()[0].bias(0) == 0.25);

  MlpNet fresh({1, 1}, OutputActivation::Linear, 1);
  fresh.mutable_layers()[0].weight(0, 0) = 0.5;
  Adam opt2(fresh, cfg);
  g.weight[0](0, 0) = 1.0;
  opt2.step(fresh, g);
  // m_hat = 1, v_hat = 1 -> step lr / (1 + eps)
  CHECK(fresh.layers()[0].weight(0, 0) - 0.5 == doctest::Approx(-0.001 / (1 + 1e-8)).epsilon(1e-12));

  // determinism
  auto run = [] {
    MlpNet n({3, 5, 1}, OutputActivation::Tanh, 4);
    Adam o(n, AdamConfig{});
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(3, 4, 0.3);
    for (int i = 0; i < 20; ++i) {
      MlpNet::Cache c;
      const Eigen::MatrixXd y = n.forward(x, c);
      o.step(n, n.backward(c, y));
    }
    return n;
  };
  CHECK(run() == run());
}

TEST_CASE("soft update") {
  MlpNet src({2, 3, 1}, OutputActivation::Linear, 1), tgt({2, 3, 1}, OutputActivation::Linear, 2);
  MlpNet copy = tgt;
  soft_update(copy, src, 0.0);
  CHECK(copy == tgt);
  soft_update(copy, src, 1.0);
  CHECK(copy == src);

  MlpNet a({1, 1}, OutputActivation::Linear, 1), b({1, 1}, OutputActivation::Linear, 1);
  a.mutable_layers()[0].weight(0, 0) = 1;
  b.mutable_layers()[0].weight(0, 0) = 0;
  soft_update(b, a, 0.001);
  CHECK(b.layers()[0].weight(0, 0) == doctest::Approx(0.001).epsilon(1e-15));

  CHECK_THROWS_AS(soft_update(tgt, MlpNet({2, 4, 1}, OutputActivation::Linear, 1), 0.5), ValidationError);
}

TEST_CASE("save and load") {
  testing::TempDir dir("mlp");
  MlpNet net({4, 6, 1}, OutputActivation::Tanh, 77);
  net.save(dir / "n.bin");
  CHECK(std::filesystem::exists(dir / "n.bin.manifest.txt"));
  const auto back = MlpNet::load(dir / "n.bin");
  CHECK(back == net);
  std::ofstream(dir / "junk.bin") << "nope";
  CHECK_THROWS_AS(MlpNet::load(dir / "junk.bin"), ValidationError);
}
