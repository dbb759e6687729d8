#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cipher_icl/prompting.hpp"
#include "cipher_icl/rng.hpp"

namespace cipher_icl {

struct ModelConfig {
  static constexpr int kVocab = kVocabSize;
  static constexpr int kMlpRatio = 4;

  int layers = 2;
  int heads = 4;
  int embed_dim = 64;
  int context_length = 128;
  // Reuse the token embedding as the output projection (no head.weight).
  bool tied_embeddings = false;

  // 12 layers, 8 heads, d = 256; 256-token context keeps the total at ~9.56M.
  static ModelConfig paper();
  // 2 layers, 4 heads, d = 64, 128-token context.
  static ModelConfig desk();

  // Throws std::invalid_argument on non-positive sizes, embed_dim % heads != 0
  // or context_length < 2.
  void validate() const;
  std::size_t parameter_count() const;
  int head_dim() const noexcept { return embed_dim / heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool decay = false;  // weight decay applies (matrices and embeddings only)
};

// Canonical tensor order: tok_emb, pos_emb, then per layer
// ln1.{weight,bias}, attn.{q,k,v,o}.{weight,bias}, ln2.{weight,bias},
// mlp.fc.{weight,bias}, mlp.proj.{weight,bias}; then ln_f.{weight,bias},
// head.weight (untied only), head.bias. Matrices are [in, out] row-major.
std::vector<TensorSpec> parameter_layout(const ModelConfig& config);

// Flat parameter storage with a named tensor layout on top.
template <typename T>
class ModelParams {
 public:
  ModelParams() = default;
  // Zero-filled. Validates the config.
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<TensorSpec>& layout() const noexcept { return layout_; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> tensor(std::size_t index);
  std::span<const T> tensor(std::size_t index) const;
  // Throws std::out_of_range for unknown names.
  std::size_t tensor_index(const std::string& name) const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out(config_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  ModelConfig config_;
  std::vector<TensorSpec> layout_;
  std::vector<T> data_;
};

// Weights and embeddings ~ N(0, 0.02); norm scales 1; biases 0. Draws in
// double precision so float and double models from one seed agree.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, Rng& rng);

// Activation cache reused across calls; sized lazily for the sequence length.
template <typename T>
class Workspace {
 public:
  Workspace() = default;

 private:
  template <typename U>
  friend class TransformerPass;

  struct LayerCache {
    std::vector<T> x_in, xhat1, rstd1, a1, q, k, v, lse, y, x_mid, xhat2, rstd2, a2, u, g;
  };
  std::array<std::size_t, 4> shape_{};  // n, layers, d, heads
  std::vector<LayerCache> layers_;
  std::vector<T> x_final, xhatf, rstdf, f, logits;
  // backward scratch
  std::vector<T> dx, da, dq, dk, dv, dy, du, dlogits, df, drow;
};

// Logits, row-major [tokens.size() x 26]. Causal: row t depends only on
// tokens[0..t]. Throws std::invalid_argument if tokens exceed the context or
// hold ids outside the vocabulary.
template <typename T>
std::vector<T> forward(const ModelParams<T>& params, std::span<const Token> tokens);
template <typename T>
std::span<const T> forward(const ModelParams<T>& params, std::span<const Token> tokens,
                           Workspace<T>& ws);

// Mean cross-entropy over positions with mask != 0. Throws
// std::invalid_argument on an empty mask or masked targets outside [0, 26).
template <typename T>
T masked_loss(std::span<const T> logits, std::span<const Token> targets,
              std::span<const std::uint8_t> mask);

template <typename T>
struct LossAndGradients {
  T loss{};
  std::vector<T> gradients;  // same layout as ModelParams::data()
};

template <typename T>
LossAndGradients<T> backward(const ModelParams<T>& params, std::span<const Token> tokens,
                             std::span<const Token> targets, std::span<const std::uint8_t> mask);

// grad += scale * d(masked_loss)/d(params); returns the loss. `grad` must be
// params.size() long.
template <typename T>
T accumulate_gradients(const ModelParams<T>& params, std::span<const Token> tokens,
                       std::span<const Token> targets, std::span<const std::uint8_t> mask,
                       Workspace<T>& ws, std::span<T> grad, T scale);

}  // namespace cipher_icl
