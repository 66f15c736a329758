#include "inrd/policy_net.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "inrd/io.hpp"

namespace inrd {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

PolicyNet::PolicyNet(std::vector<std::size_t> layer_dims, Activation activation,
                     std::vector<DenseLayer> layers)
    : dims_(std::move(layer_dims)), activation_(activation), layers_(std::move(layers)) {
  if (dims_.size() < 2) throw std::invalid_argument("PolicyNet: need at least input and output dims");
  for (auto d : dims_)
    if (d == 0) throw std::invalid_argument("PolicyNet: layer dims must be positive");
  if (layers_.size() != dims_.size() - 1)
    throw std::invalid_argument("PolicyNet: expected " + std::to_string(dims_.size() - 1) +
                                " layers, got " + std::to_string(layers_.size()));
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.weight.rows() != dims_[k + 1] || layer.weight.cols() != dims_[k] ||
        layer.bias.size() != dims_[k + 1])
      throw std::invalid_argument("PolicyNet: layer " + std::to_string(k) +
                                  " shape incompatible with layer_dims");
    if (!all_finite(layer.weight.data()) || !all_finite(layer.bias))
      throw std::invalid_argument("PolicyNet: non-finite parameter in layer " + std::to_string(k));
  }
}

PolicyNet PolicyNet::random(std::vector<std::size_t> layer_dims, Activation activation,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const auto fan_in = static_cast<double>(layer_dims[k]);
    const auto fan_out = static_cast<double>(layer_dims[k + 1]);
    const double limit = activation == Activation::relu ? std::sqrt(6.0 / fan_in)
                                                        : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Mat64(layer_dims[k + 1], layer_dims[k]), Vec64(layer_dims[k + 1], 0.0)};
    for (double& w : layer.weight.data()) w = dist(rng);
    layers.push_back(std::move(layer));
  }
  return PolicyNet(std::move(layer_dims), activation, std::move(layers));
}

namespace {

void activate(Activation act, Vec64& v) {
  if (act == Activation::relu) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  } else {
    for (double& x : v) x = std::tanh(x);
  }
}

// Derivative of the activation expressed through its output.
double activation_slope(Activation act, double out) {
  if (act == Activation::relu) return out > 0.0 ? 1.0 : 0.0;
  return 1.0 - out * out;
}

}  // namespace

Vec64 PolicyNet::forward(ConstVecView s) const {
  require_same_size(s.size(), input_dim(), "PolicyNet::forward");
  Vec64 x(s.begin(), s.end());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Vec64 y = matvec(layers_[k].weight, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += layers_[k].bias[i];
    if (k + 1 < layers_.size()) activate(activation_, y);
    x = std::move(y);
  }
  return x;
}

ForwardTape PolicyNet::record(ConstVecView s) const {
  require_same_size(s.size(), input_dim(), "PolicyNet::record");
  ForwardTape tape;
  tape.values.reserve(layers_.size() + 1);
  tape.values.emplace_back(s.begin(), s.end());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Vec64 y = matvec(layers_[k].weight, tape.values.back());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += layers_[k].bias[i];
    if (k + 1 < layers_.size()) activate(activation_, y);
    tape.values.push_back(std::move(y));
  }
  return tape;
}

Vec64 PolicyNet::backward(const ForwardTape& tape, ConstVecView dlogits,
                          std::vector<DenseLayer>* grads, bool input_grad) const {
  require_same_size(dlogits.size(), num_actions(), "PolicyNet::backward");
  Vec64 delta(dlogits.begin(), dlogits.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Vec64& in = tape.values[k];
    if (grads) {
      auto& g = (*grads)[k];
      for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
        if (delta[r] == 0.0) continue;
        axpy(delta[r], in, g.weight.row(r));
        g.bias[r] += delta[r];
      }
    }
    if (k == 0 && !input_grad) return {};
    Vec64 prev = matvec_transposed(layer.weight, delta);
    if (k > 0)
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= activation_slope(activation_, in[i]);
    delta = std::move(prev);
  }
  return delta;
}

Vec64 PolicyNet::pullback(ConstVecView s, const std::function<Vec64(const Vec64&)>& cotangent,
                          Vec64* logits_out) const {
  const ForwardTape tape = record(s);
  const Vec64 ct = cotangent(tape.logits());
  if (logits_out) *logits_out = tape.logits();
  return backward(tape, ct);
}

std::vector<DenseLayer> PolicyNet::zero_grads() const {
  std::vector<DenseLayer> g;
  g.reserve(layers_.size());
  for (const auto& layer : layers_)
    g.push_back({Mat64(layer.weight.rows(), layer.weight.cols()), Vec64(layer.bias.size(), 0.0)});
  return g;
}

Vec64 log_softmax(ConstVecView logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lse = m + std::log(z);
  Vec64 out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Vec64 softmax(ConstVecView logits) {
  Vec64 out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

Vec64 grad_input(const PolicyNet& net, ConstVecView s, ConstVecView tau) {
  require_same_size(tau.size(), net.num_actions(), "grad_input: tau");
  double mass = 0.0;
  for (double t : tau) mass += t;
  return net.pullback(s, [&](const Vec64& z) {
    Vec64 g = softmax(z);
    for (std::size_t a = 0; a < g.size(); ++a) g[a] = mass * g[a] - tau[a];
    return g;
  });
}

std::string checkpoint_json(const PolicyNet& net) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["layer_dims"] = net.layer_dims();
  j["activation"] = to_string(net.activation());
  auto weights = nlohmann::json::array();
  auto biases = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    weights.push_back(layer.weight.data());
    biases.push_back(layer.bias);
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j.dump() + "\n";
}

PolicyNet checkpoint_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported format_version");
  auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  const auto act = activation_from_string(j.at("activation").get<std::string>());
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (dims.size() < 2 || weights.size() != dims.size() - 1 || biases.size() != dims.size() - 1)
    throw std::runtime_error("checkpoint: layer count does not match layer_dims");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    layers.push_back({Mat64(dims[k + 1], dims[k], weights[k].get<std::vector<double>>()),
                      biases[k].get<Vec64>()});
  }
  return PolicyNet(std::move(dims), act, std::move(layers));
}

void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_json(net));
}

PolicyNet load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace inrd
