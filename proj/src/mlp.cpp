#include "followrl/mlp.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace followrl {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'R', 'L', 'M', 'L', 'P', '0', '1'};
constexpr std::uint32_t kDtypeFloat64 = 8;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("truncated parameter file " + path.string());
  return value;
}

const char* activation_name(OutputActivation a) {
  return a == OutputActivation::Tanh ? "tanh" : "linear";
}

}  // namespace

MlpNet::MlpNet(std::vector<int> layer_sizes, OutputActivation output, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw ValidationError("MlpNet: need at least input and output sizes");
  for (int s : sizes_) {
    if (s <= 0) throw ValidationError("MlpNet: layer sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    for (int r = 0; r < out; ++r) layer.bias(r) = dist(rng);
    layers_.push_back(std::move(layer));
  }
}

Eigen::MatrixXd MlpNet::forward(const Eigen::MatrixXd& input) const {
  Cache scratch;
  return forward(input, scratch);
}

Eigen::MatrixXd MlpNet::forward(const Eigen::MatrixXd& input, Cache& cache) const {
  if (layers_.empty()) throw ValidationError("MlpNet: forward on an empty network");
  if (input.rows() != input_size()) {
    throw ValidationError("MlpNet: input has " + std::to_string(input.rows()) + " rows, expected " +
                          std::to_string(input_size()));
  }
  cache.inputs.resize(layers_.size());
  cache.pre.resize(layers_.size());
  Eigen::MatrixXd x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs[l] = x;
    Eigen::MatrixXd z = layers_[l].weight * x;
    z.colwise() += layers_[l].bias;
    cache.pre[l] = z;
    if (l + 1 < layers_.size()) {
      x = z.cwiseMax(0.0);
    } else if (output_ == OutputActivation::Tanh) {
      x = z.array().tanh().matrix();
    } else {
      x = std::move(z);
    }
  }
  cache.output = x;
  cache.owner = this;
  cache.version = version_;
  return x;
}

MlpNet::Gradients MlpNet::Gradients::zeros_like(const MlpNet& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

MlpNet::Gradients MlpNet::backward(const Cache& cache, const Eigen::MatrixXd& output_grad) const {
  return backward(cache, output_grad, Eigen::MatrixXd::Zero(output_grad.rows(), output_grad.cols()));
}

MlpNet::Gradients MlpNet::backward(const Cache& cache, const Eigen::MatrixXd& output_grad,
                                   const Eigen::MatrixXd& preact_grad) const {
  if (cache.owner != this || cache.version != version_ || cache.pre.size() != layers_.size()) {
    throw ValidationError("MlpNet: backward with a stale or foreign cache");
  }
  if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols()) {
    throw ValidationError("MlpNet: output gradient shape mismatch");
  }
  if (preact_grad.rows() != output_grad.rows() || preact_grad.cols() != output_grad.cols()) {
    throw ValidationError("MlpNet: pre-activation gradient shape mismatch");
  }
  Gradients grads;
  grads.weight.resize(layers_.size());
  grads.bias.resize(layers_.size());

  Eigen::MatrixXd delta = output_grad;
  if (output_ == OutputActivation::Tanh) {
    delta = delta.cwiseProduct((1.0 - cache.output.array().square()).matrix());
  }
  delta += preact_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads.weight[l] = delta * cache.inputs[l].transpose();
    grads.bias[l] = delta.rowwise().sum();
    Eigen::MatrixXd dx = layers_[l].weight.transpose() * delta;
    if (l == 0) {
      grads.input = std::move(dx);
    } else {
      delta = dx.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

std::size_t MlpNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<MlpNet::Layer>& MlpNet::mutable_layers() {
  ++version_;
  return layers_;
}

bool MlpNet::same_architecture(const MlpNet& other) const {
  return sizes_ == other.sizes_ && output_ == other.output_;
}

double MlpNet::max_abs_difference(const MlpNet& other) const {
  if (!same_architecture(other)) throw ValidationError("MlpNet: architecture mismatch");
  double m = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    m = std::max(m, (layers_[l].weight - other.layers_[l].weight).cwiseAbs().maxCoeff());
    m = std::max(m, (layers_[l].bias - other.layers_[l].bias).cwiseAbs().maxCoeff());
  }
  return m;
}

bool MlpNet::operator==(const MlpNet& other) const {
  if (!same_architecture(other)) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) {
      return false;
    }
  }
  return true;
}

void MlpNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kDtypeFloat64);
  write_pod(out, static_cast<std::uint32_t>(output_));
  write_pod(out, static_cast<std::uint32_t>(sizes_.size()));
  for (int s : sizes_) write_pod(out, static_cast<std::uint32_t>(s));
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) write_pod(out, layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) write_pod(out, layer.bias(r));
  }
  if (!out) throw ValidationError("failed writing " + path.string());

  std::ofstream manifest(path.string() + ".manifest.txt");
  manifest << "format = FRLMLP01\n";
  manifest << "dtype = float64\n";
  manifest << "byte_order = little\n";
  manifest << "layout = per layer: weight row-major (out x in), then bias\n";
  manifest << "layer_sizes =";
  for (int s : sizes_) manifest << ' ' << s;
  manifest << "\nhidden_activation = relu\n";
  manifest << "output_activation = " << activation_name(output_) << '\n';
  manifest << "parameters = " << parameter_count() << '\n';
}

MlpNet MlpNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError("not a parameter file: " + path.string());
  if (read_pod<std::uint32_t>(in, path) != kDtypeFloat64) {
    throw ValidationError("unsupported dtype in " + path.string());
  }
  const auto act = read_pod<std::uint32_t>(in, path);
  if (act > 1) throw ValidationError("unknown output activation in " + path.string());
  const auto n = read_pod<std::uint32_t>(in, path);
  if (n < 2 || n > 64) throw ValidationError("bad layer count in " + path.string());

  MlpNet net;
  net.output_ = static_cast<OutputActivation>(act);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto s = read_pod<std::uint32_t>(in, path);
    if (s == 0 || s > (1u << 20)) throw ValidationError("bad layer size in " + path.string());
    net.sizes_.push_back(static_cast<int>(s));
  }
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    Layer layer{Eigen::MatrixXd(net.sizes_[l + 1], net.sizes_[l]), Eigen::VectorXd(net.sizes_[l + 1])};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = read_pod<double>(in, path);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = read_pod<double>(in, path);
    net.layers_.push_back(std::move(layer));
  }
  in.peek();
  if (!in.eof()) throw ValidationError("trailing bytes in " + path.string());
  return net;
}

Adam::Adam(const MlpNet& net, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& layer : net.layers()) {
    m_w_.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    v_w_.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    m_b_.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    v_b_.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
}

void Adam::step(MlpNet& net, const MlpNet::Gradients& grads) {
  auto& layers = net.mutable_layers();
  if (layers.size() != m_w_.size() || grads.weight.size() != layers.size() ||
      grads.bias.size() != layers.size()) {
    throw ValidationError("Adam: gradient/optimizer shape mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  const double eps = cfg_.epsilon;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    if (g.rows() != param.rows() || g.cols() != param.cols()) {
      throw ValidationError("Adam: gradient shape mismatch");
    }
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, m_w_[l], v_w_[l], grads.weight[l]);
    update(layers[l].bias, m_b_[l], v_b_[l], grads.bias[l]);
  }
}

void soft_update(MlpNet& target, const MlpNet& source, double tau) {
  if (!target.same_architecture(source)) throw ValidationError("soft_update: architecture mismatch");
  if (!(tau >= 0 && tau <= 1)) throw ValidationError("soft_update: tau must be in [0, 1]");
  if (tau == 0) return;
  auto& dst = target.mutable_layers();
  const auto& src = source.layers();
  for (std::size_t l = 0; l < dst.size(); ++l) {
    dst[l].weight = tau * src[l].weight + (1.0 - tau) * dst[l].weight;
    dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
  }
}

}  // namespace followrl
