#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "inrd/linalg.hpp"

namespace inrd {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// One dense layer: out = weight · in + bias, weight is (out × in).
struct DenseLayer {
  Mat64 weight;
  Vec64 bias;
  bool operator==(const DenseLayer&) const = default;
};

/// Intermediate values of a forward pass, kept for the reverse sweep.
struct ForwardTape {
  /// values[0] is the input; values[k] the output of layer k (activated for hidden layers,
  /// raw logits for the last).
  std::vector<Vec64> values;
  const Vec64& logits() const { return values.back(); }
};

/// Feed-forward network mapping an observation to action logits (Q-values).
/// Hidden layers share one activation; the output layer is affine.
class PolicyNet {
 public:
  PolicyNet(std::vector<std::size_t> layer_dims, Activation activation,
            std::vector<DenseLayer> layers);

  /// He-uniform (relu) or Glorot-uniform (tanh) initialisation, zero biases.
  static PolicyNet random(std::vector<std::size_t> layer_dims, Activation activation,
                          std::uint64_t seed);

  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t num_actions() const noexcept { return dims_.back(); }
  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  Activation activation() const noexcept { return activation_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  /// Parameter access for the trainer.
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

  Vec64 forward(ConstVecView s) const;
  ForwardTape record(ConstVecView s) const;

  /// Reverse sweep from d(loss)/d(logits). Returns d(loss)/d(input); when `grads` is
  /// non-null, parameter gradients are accumulated into it (same shapes as layers()).
  /// With `input_grad` false the final (input-layer) product is skipped and an empty
  /// vector is returned.
  Vec64 backward(const ForwardTape& tape, ConstVecView dlogits,
                 std::vector<DenseLayer>* grads = nullptr, bool input_grad = true) const;

  /// One forward pass, cotangent chosen from the logits, one reverse pass.
  /// Returns ∇_s (cotangent(z)ᵀ z(s)) with the cotangent held fixed.
  Vec64 pullback(ConstVecView s, const std::function<Vec64(const Vec64&)>& cotangent,
                 Vec64* logits_out = nullptr) const;

  /// Zero-filled gradient buffers shaped like the parameters.
  std::vector<DenseLayer> zero_grads() const;

  bool operator==(const PolicyNet&) const = default;

 private:
  std::vector<std::size_t> dims_;
  Activation activation_;
  std::vector<DenseLayer> layers_;
};

Vec64 softmax(ConstVecView logits);
Vec64 log_softmax(ConstVecView logits);

/// ∇_s J(s, τ) for J = −Σ_a τ(a) log softmax(z(s))_a, by reverse-mode differentiation.
Vec64 grad_input(const PolicyNet& net, ConstVecView s, ConstVecView tau);

/// Checkpoint JSON: {format_version, layer_dims, activation, weights, biases}.
std::string checkpoint_json(const PolicyNet& net);
PolicyNet checkpoint_from_json(const std::string& text);
void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path);
PolicyNet load_checkpoint(const std::filesystem::path& path);

}  // namespace inrd
