#pragma once

#include "followrl/config.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace followrl {

enum class OutputActivation : std::uint32_t { Linear = 0, Tanh = 1 };

/// Fully connected network with rectifier hidden layers. Inputs and outputs
/// are column-major batches: one sample per column.
class MlpNet {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  /// Activations recorded by a forward pass, consumed by backward.
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
    Eigen::MatrixXd output;
    const MlpNet* owner = nullptr;
    std::uint64_t version = 0;
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
    Eigen::MatrixXd input;

    /// Zero gradients shaped like `net`.
    static Gradients zeros_like(const MlpNet& net);
  };

  MlpNet() = default;
  /// Weights and biases uniform in +-1/sqrt(fan_in), seeded.
  MlpNet(std::vector<int> layer_sizes, OutputActivation output, std::uint64_t seed);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;

  /// Gradients of a scalar loss given dLoss/dOutput (same shape as the
  /// cached output). Parameter gradients are summed over the batch.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& output_grad) const;
  /// As above, plus a gradient taken directly with respect to the output
  /// layer's pre-activation.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& output_grad, const Eigen::MatrixXd& preact_grad) const;

  const std::vector<int>& layer_sizes() const { return sizes_; }
  OutputActivation output_activation() const { return output_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  /// Mutable access; invalidates outstanding caches.
  std::vector<Layer>& mutable_layers();

  bool same_architecture(const MlpNet& other) const;
  double max_abs_difference(const MlpNet& other) const;
  bool operator==(const MlpNet& other) const;

  /// Binary parameter file plus a `<path>.manifest.txt` sidecar.
  void save(const std::filesystem::path& path) const;
  static MlpNet load(const std::filesystem::path& path);

 private:
  std::vector<int> sizes_;
  OutputActivation output_ = OutputActivation::Linear;
  std::vector<Layer> layers_;
  std::uint64_t version_ = 0;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(const MlpNet& net, AdamConfig cfg);

  /// Descends along `grads` (i.e. minimizes the loss they came from).
  void step(MlpNet& net, const MlpNet::Gradients& grads);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_{};
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
  std::int64_t t_ = 0;
};

/// target <- tau * source + (1 - tau) * target, element-wise.
void soft_update(MlpNet& target, const MlpNet& source, double tau);

}  // namespace followrl
