#include "cipher_icl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cipher_icl {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-5;

}  // namespace

ModelConfig ModelConfig::paper() { return ModelConfig{12, 8, 256, 256, false}; }

ModelConfig ModelConfig::desk() { return ModelConfig{2, 4, 64, 128, false}; }

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || embed_dim < 1) {
    throw std::invalid_argument("layers, heads and embed_dim must be positive");
  }
  if (embed_dim % heads != 0) {
    throw std::invalid_argument("embed_dim " + std::to_string(embed_dim) +
                                " is not divisible by heads " + std::to_string(heads));
  }
  if (context_length < 2) throw std::invalid_argument("context_length must be >= 2");
}

std::size_t ModelConfig::parameter_count() const {
  std::size_t total = 0;
  for (const auto& t : parameter_layout(*this)) total += t.size;
  return total;
}

std::vector<TensorSpec> parameter_layout(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.embed_dim);
  const auto h = d * ModelConfig::kMlpRatio;
  const auto v = static_cast<std::size_t>(ModelConfig::kVocab);
  std::vector<TensorSpec> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape, bool decay) {
    std::size_t size = 1;
    for (auto s : shape) size *= s;
    out.push_back({std::move(name), std::move(shape), offset, size, decay});
    offset += size;
  };
  add("tok_emb", {v, d}, true);
  add("pos_emb", {static_cast<std::size_t>(config.context_length), d}, true);
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    add(p + "ln1.weight", {d}, false);
    add(p + "ln1.bias", {d}, false);
    for (const char* proj : {"q", "k", "v", "o"}) {
      add(p + "attn." + proj + ".weight", {d, d}, true);
      add(p + "attn." + proj + ".bias", {d}, false);
    }
    add(p + "ln2.weight", {d}, false);
    add(p + "ln2.bias", {d}, false);
    add(p + "mlp.fc.weight", {d, h}, true);
    add(p + "mlp.fc.bias", {h}, false);
    add(p + "mlp.proj.weight", {h, d}, true);
    add(p + "mlp.proj.bias", {d}, false);
  }
  add("ln_f.weight", {d}, false);
  add("ln_f.bias", {d}, false);
  if (!config.tied_embeddings) add("head.weight", {d, v}, true);
  add("head.bias", {v}, false);
  return out;
}

template <typename T>
ModelParams<T>::ModelParams(const ModelConfig& config)
    : config_(config), layout_(parameter_layout(config)) {
  std::size_t total = 0;
  for (const auto& t : layout_) total += t.size;
  data_.assign(total, T(0));
}

template <typename T>
std::span<T> ModelParams<T>::tensor(std::size_t index) {
  const auto& t = layout_.at(index);
  return std::span<T>(data_).subspan(t.offset, t.size);
}

template <typename T>
std::span<const T> ModelParams<T>::tensor(std::size_t index) const {
  const auto& t = layout_.at(index);
  return std::span<const T>(data_).subspan(t.offset, t.size);
}

template <typename T>
std::size_t ModelParams<T>::tensor_index(const std::string& name) const {
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    if (layout_[i].name == name) return i;
  }
  throw std::out_of_range("no tensor named '" + name + "'");
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, Rng& rng) {
  ModelParams<T> params(config);
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (std::size_t i = 0; i < params.layout().size(); ++i) {
    const auto& spec = params.layout()[i];
    auto values = params.tensor(i);
    const bool is_norm_scale =
        spec.name.find("ln") != std::string::npos && spec.name.ends_with(".weight");
    if (is_norm_scale) {
      std::fill(values.begin(), values.end(), T(1));
    } else if (spec.shape.size() == 2) {
      for (auto& x : values) x = static_cast<T>(normal(rng));
    } else {
      std::fill(values.begin(), values.end(), T(0));
    }
  }
  return params;
}

// ---------------------------------------------------------------------------
// Dense kernels. Row-major throughout; weights are [in, out].

namespace {

// y[n, out] = x[n, in] W + b
template <typename T>
void linear_forward(const T* x, std::size_t n, std::size_t in, const T* w, const T* b, T* y,
                    std::size_t out) {
  for (std::size_t i = 0; i < n; ++i) {
    T* yr = y + i * out;
    std::copy(b, b + out, yr);
    const T* xr = x + i * in;
    for (std::size_t p = 0; p < in; ++p) {
      const T xv = xr[p];
      const T* wr = w + p * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wr[j];
    }
  }
}

// dx = dy W^T (overwrites dx); dW += x^T dy; db += colsum(dy)
template <typename T>
void linear_backward(const T* x, const T* dy, std::size_t n, std::size_t in, std::size_t out,
                     const T* w, T* dx, T* dw, T* db) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyr = dy + i * out;
    for (std::size_t j = 0; j < out; ++j) db[j] += dyr[j];
    const T* xr = x + i * in;
    for (std::size_t p = 0; p < in; ++p) {
      const T xv = xr[p];
      T* dwr = dw + p * out;
      for (std::size_t j = 0; j < out; ++j) dwr[j] += xv * dyr[j];
    }
    if (dx != nullptr) {
      T* dxr = dx + i * in;
      for (std::size_t p = 0; p < in; ++p) {
        const T* wr = w + p * out;
        T acc = 0;
        for (std::size_t j = 0; j < out; ++j) acc += dyr[j] * wr[j];
        dxr[p] = acc;
      }
    }
  }
}

template <typename T>
void layernorm_forward(const T* x, std::size_t n, std::size_t d, const T* w, const T* b,
                       T* xhat, T* rstd, T* y) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* xr = x + i * d;
    T mean = 0;
    for (std::size_t k = 0; k < d; ++k) mean += xr[k];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t k = 0; k < d; ++k) var += (xr[k] - mean) * (xr[k] - mean);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd[i] = rs;
    for (std::size_t k = 0; k < d; ++k) {
      const T xh = (xr[k] - mean) * rs;
      xhat[i * d + k] = xh;
      y[i * d + k] = xh * w[k] + b[k];
    }
  }
}

// dx += LN'(dy); dw, db accumulated.
template <typename T>
void layernorm_backward(const T* dy, const T* xhat, const T* rstd, std::size_t n, std::size_t d,
                        const T* w, T* dx, T* dw, T* db) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyr = dy + i * d;
    const T* xh = xhat + i * d;
    T mean_dxhat = 0;
    T mean_dxhat_xhat = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const T g = dyr[k] * w[k];
      mean_dxhat += g;
      mean_dxhat_xhat += g * xh[k];
      dw[k] += dyr[k] * xh[k];
      db[k] += dyr[k];
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    T* dxr = dx + i * d;
    for (std::size_t k = 0; k < d; ++k) {
      const T g = dyr[k] * w[k];
      dxr[k] += rstd[i] * (g - mean_dxhat - xh[k] * mean_dxhat_xhat);
    }
  }
}

template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = static_cast<T>(0.044715);

template <typename T>
T gelu(T u) {
  return T(0.5) * u * (T(1) + std::tanh(kGeluC<T> * (u + kGeluA<T> * u * u * u)));
}

template <typename T>
T gelu_grad(T u) {
  const T t = std::tanh(kGeluC<T> * (u + kGeluA<T> * u * u * u));
  return T(0.5) * (T(1) + t) +
         T(0.5) * u * (T(1) - t * t) * kGeluC<T> * (T(1) + T(3) * kGeluA<T> * u * u);
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
class TransformerPass {
 public:
  TransformerPass(const ModelParams<T>& params, Workspace<T>& ws)
      : p_(params), ws_(ws), cfg_(params.config()) {
    const auto& layout = params.layout();
    std::size_t i = 0;
    tok_ = layout[i++].offset;
    pos_ = layout[i++].offset;
    layers_.resize(static_cast<std::size_t>(cfg_.layers));
    for (auto& l : layers_) {
      l.ln1_w = layout[i++].offset;
      l.ln1_b = layout[i++].offset;
      l.wq = layout[i++].offset;
      l.bq = layout[i++].offset;
      l.wk = layout[i++].offset;
      l.bk = layout[i++].offset;
      l.wv = layout[i++].offset;
      l.bv = layout[i++].offset;
      l.wo = layout[i++].offset;
      l.bo = layout[i++].offset;
      l.ln2_w = layout[i++].offset;
      l.ln2_b = layout[i++].offset;
      l.fc_w = layout[i++].offset;
      l.fc_b = layout[i++].offset;
      l.proj_w = layout[i++].offset;
      l.proj_b = layout[i++].offset;
    }
    lnf_w_ = layout[i++].offset;
    lnf_b_ = layout[i++].offset;
    head_w_ = cfg_.tied_embeddings ? tok_ : layout[i++].offset;
    head_b_ = layout[i++].offset;
  }

  void check_tokens(std::span<const Token> tokens) const {
    if (tokens.empty()) throw std::invalid_argument("empty token sequence");
    if (tokens.size() > static_cast<std::size_t>(cfg_.context_length)) {
      throw std::invalid_argument("sequence of " + std::to_string(tokens.size()) +
                                  " tokens exceeds context length " +
                                  std::to_string(cfg_.context_length));
    }
    for (Token t : tokens) {
      if (t < 0 || t >= kVocabSize) throw std::invalid_argument("token id out of range");
    }
  }

  void resize(std::size_t n) {
    const auto d = static_cast<std::size_t>(cfg_.embed_dim);
    const auto h = d * ModelConfig::kMlpRatio;
    const auto heads = static_cast<std::size_t>(cfg_.heads);
    const auto v = static_cast<std::size_t>(kVocabSize);
    const std::size_t shape[] = {n, layers_.size(), d, heads};
    if (std::equal(std::begin(shape), std::end(shape), ws_.shape_.begin())) return;
    std::copy(std::begin(shape), std::end(shape), ws_.shape_.begin());
    ws_.layers_.resize(layers_.size());
    for (auto& c : ws_.layers_) {
      for (auto* b : {&c.x_in, &c.xhat1, &c.a1, &c.q, &c.k, &c.v, &c.y, &c.x_mid, &c.xhat2, &c.a2}) {
        b->assign(n * d, T(0));
      }
      c.rstd1.assign(n, T(0));
      c.rstd2.assign(n, T(0));
      c.lse.assign(heads * n, T(0));
      c.u.assign(n * h, T(0));
      c.g.assign(n * h, T(0));
    }
    for (auto* b : {&ws_.x_final, &ws_.xhatf, &ws_.f, &ws_.dx, &ws_.da, &ws_.dq, &ws_.dk, &ws_.dv,
                    &ws_.dy, &ws_.df}) {
      b->assign(n * d, T(0));
    }
    ws_.rstdf.assign(n, T(0));
    ws_.logits.assign(n * v, T(0));
    ws_.dlogits.assign(n * v, T(0));
    ws_.du.assign(n * h, T(0));
    ws_.drow.assign(n, T(0));
  }

  std::span<const T> forward(std::span<const Token> tokens) {
    check_tokens(tokens);
    const std::size_t n = tokens.size();
    resize(n);
    const auto d = static_cast<std::size_t>(cfg_.embed_dim);
    const auto h = d * ModelConfig::kMlpRatio;
    const T* w = p_.data().data();

    T* x = layers_.empty() ? ws_.x_final.data() : ws_.layers_[0].x_in.data();
    for (std::size_t i = 0; i < n; ++i) {
      const T* te = w + tok_ + static_cast<std::size_t>(tokens[i]) * d;
      const T* pe = w + pos_ + i * d;
      for (std::size_t k = 0; k < d; ++k) x[i * d + k] = te[k] + pe[k];
    }

    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& o = layers_[l];
      auto& c = ws_.layers_[l];
      layernorm_forward(c.x_in.data(), n, d, w + o.ln1_w, w + o.ln1_b, c.xhat1.data(),
                        c.rstd1.data(), c.a1.data());
      linear_forward(c.a1.data(), n, d, w + o.wq, w + o.bq, c.q.data(), d);
      linear_forward(c.a1.data(), n, d, w + o.wk, w + o.bk, c.k.data(), d);
      linear_forward(c.a1.data(), n, d, w + o.wv, w + o.bv, c.v.data(), d);
      attention_forward(c, n);
      // x_mid = x_in + y Wo + bo
      linear_forward(c.y.data(), n, d, w + o.wo, w + o.bo, c.x_mid.data(), d);
      for (std::size_t k = 0; k < n * d; ++k) c.x_mid[k] += c.x_in[k];
      layernorm_forward(c.x_mid.data(), n, d, w + o.ln2_w, w + o.ln2_b, c.xhat2.data(),
                        c.rstd2.data(), c.a2.data());
      linear_forward(c.a2.data(), n, d, w + o.fc_w, w + o.fc_b, c.u.data(), h);
      for (std::size_t k = 0; k < n * h; ++k) c.g[k] = gelu(c.u[k]);
      T* x_out = l + 1 < layers_.size() ? ws_.layers_[l + 1].x_in.data() : ws_.x_final.data();
      linear_forward(c.g.data(), n, h, w + o.proj_w, w + o.proj_b, x_out, d);
      for (std::size_t k = 0; k < n * d; ++k) x_out[k] += c.x_mid[k];
    }

    layernorm_forward(ws_.x_final.data(), n, d, w + lnf_w_, w + lnf_b_, ws_.xhatf.data(),
                      ws_.rstdf.data(), ws_.f.data());
    const auto v = static_cast<std::size_t>(kVocabSize);
    if (cfg_.tied_embeddings) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < v; ++t) {
          T acc = w[head_b_ + t];
          for (std::size_t k = 0; k < d; ++k) acc += ws_.f[i * d + k] * w[tok_ + t * d + k];
          ws_.logits[i * v + t] = acc;
        }
      }
    } else {
      linear_forward(ws_.f.data(), n, d, w + head_w_, w + head_b_, ws_.logits.data(), v);
    }
    return std::span<const T>(ws_.logits).first(n * v);
  }

  // Requires a preceding forward() on the same tokens.
  T backward(std::span<const Token> tokens, std::span<const Token> targets,
             std::span<const std::uint8_t> mask, std::span<T> grad, T scale) {
    const std::size_t n = tokens.size();
    const auto d = static_cast<std::size_t>(cfg_.embed_dim);
    const auto h = d * ModelConfig::kMlpRatio;
    const auto v = static_cast<std::size_t>(kVocabSize);
    const T* w = p_.data().data();
    T* gw = grad.data();

    // softmax cross-entropy gradient
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += mask[i] != 0;
    T loss = 0;
    std::fill(ws_.dlogits.begin(), ws_.dlogits.end(), T(0));
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      const T* row = ws_.logits.data() + i * v;
      const T mx = *std::max_element(row, row + v);
      T sum = 0;
      for (std::size_t t = 0; t < v; ++t) sum += std::exp(row[t] - mx);
      const T lse = mx + std::log(sum);
      loss += lse - row[targets[i]];
      T* dr = ws_.dlogits.data() + i * v;
      for (std::size_t t = 0; t < v; ++t) dr[t] = std::exp(row[t] - lse) * scale / T(count);
      dr[targets[i]] -= scale / T(count);
    }
    loss /= T(count);

    // head
    std::fill(ws_.df.begin(), ws_.df.end(), T(0));
    if (cfg_.tied_embeddings) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < v; ++t) {
          const T g = ws_.dlogits[i * v + t];
          if (g == T(0)) continue;
          gw[head_b_ + t] += g;
          for (std::size_t k = 0; k < d; ++k) {
            ws_.df[i * d + k] += g * w[tok_ + t * d + k];
            gw[tok_ + t * d + k] += g * ws_.f[i * d + k];
          }
        }
      }
    } else {
      linear_backward(ws_.f.data(), ws_.dlogits.data(), n, d, v, w + head_w_, ws_.df.data(),
                      gw + head_w_, gw + head_b_);
    }
    // dx = d(x_final)
    std::fill(ws_.dx.begin(), ws_.dx.end(), T(0));
    layernorm_backward(ws_.df.data(), ws_.xhatf.data(), ws_.rstdf.data(), n, d, w + lnf_w_,
                       ws_.dx.data(), gw + lnf_w_, gw + lnf_b_);

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& o = layers_[l];
      auto& c = ws_.layers_[l];
      // MLP: x_out = x_mid + proj(gelu(fc(ln2(x_mid))))
      linear_backward(c.g.data(), ws_.dx.data(), n, h, d, w + o.proj_w, ws_.du.data(),
                      gw + o.proj_w, gw + o.proj_b);
      for (std::size_t k = 0; k < n * h; ++k) ws_.du[k] *= gelu_grad(c.u[k]);
      linear_backward(c.a2.data(), ws_.du.data(), n, d, h, w + o.fc_w, ws_.da.data(),
                      gw + o.fc_w, gw + o.fc_b);
      // residual: dx stays, plus LN2 path
      layernorm_backward(ws_.da.data(), c.xhat2.data(), c.rstd2.data(), n, d, w + o.ln2_w,
                         ws_.dx.data(), gw + o.ln2_w, gw + o.ln2_b);
      // attention: x_mid = x_in + o(attn(ln1(x_in)))
      linear_backward(c.y.data(), ws_.dx.data(), n, d, d, w + o.wo, ws_.dy.data(), gw + o.wo,
                      gw + o.bo);
      attention_backward(c, n);
      linear_backward(c.a1.data(), ws_.dq.data(), n, d, d, w + o.wq, ws_.da.data(), gw + o.wq,
                      gw + o.bq);
      std::vector<T>& acc = ws_.df;  // reuse as scratch for summed d(a1)
      std::copy(ws_.da.begin(), ws_.da.end(), acc.begin());
      linear_backward(c.a1.data(), ws_.dk.data(), n, d, d, w + o.wk, ws_.da.data(), gw + o.wk,
                      gw + o.bk);
      for (std::size_t k = 0; k < n * d; ++k) acc[k] += ws_.da[k];
      linear_backward(c.a1.data(), ws_.dv.data(), n, d, d, w + o.wv, ws_.da.data(), gw + o.wv,
                      gw + o.bv);
      for (std::size_t k = 0; k < n * d; ++k) acc[k] += ws_.da[k];
      layernorm_backward(acc.data(), c.xhat1.data(), c.rstd1.data(), n, d, w + o.ln1_w,
                         ws_.dx.data(), gw + o.ln1_w, gw + o.ln1_b);
    }

    for (std::size_t i = 0; i < n; ++i) {
      T* gt = gw + tok_ + static_cast<std::size_t>(tokens[i]) * d;
      T* gp = gw + pos_ + i * d;
      for (std::size_t k = 0; k < d; ++k) {
        gt[k] += ws_.dx[i * d + k];
        gp[k] += ws_.dx[i * d + k];
      }
    }
    return loss;
  }

 private:
  struct LayerOffsets {
    std::size_t ln1_w, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_w, ln2_b, fc_w, fc_b, proj_w,
        proj_b;
  };

  // Causal scaled dot-product attention. Only the per-row log-sum-exp is
  // cached; backward recomputes the probabilities.
  void attention_forward(typename Workspace<T>::LayerCache& c, std::size_t n) {
    const auto d = static_cast<std::size_t>(cfg_.embed_dim);
    const auto hd = static_cast<std::size_t>(cfg_.head_dim());
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    T* s = ws_.drow.data();
    std::fill(c.y.begin(), c.y.begin() + static_cast<std::ptrdiff_t>(n * d), T(0));
    for (std::size_t head = 0; head < static_cast<std::size_t>(cfg_.heads); ++head) {
      const std::size_t off = head * hd;
      for (std::size_t i = 0; i < n; ++i) {
        const T* qi = c.q.data() + i * d + off;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          const T* kj = c.k.data() + j * d + off;
          T dot = 0;
          for (std::size_t k = 0; k < hd; ++k) dot += qi[k] * kj[k];
          s[j] = dot * scale;
          mx = std::max(mx, s[j]);
        }
        T sum = 0;
        for (std::size_t j = 0; j <= i; ++j) {
          s[j] = std::exp(s[j] - mx);
          sum += s[j];
        }
        c.lse[head * n + i] = mx + std::log(sum);
        T* yi = c.y.data() + i * d + off;
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j <= i; ++j) {
          const T pij = s[j] * inv;
          const T* vj = c.v.data() + j * d + off;
          for (std::size_t k = 0; k < hd; ++k) yi[k] += pij * vj[k];
        }
      }
    }
  }

  // Consumes ws_.dy, writes ws_.dq / dk / dv.
  void attention_backward(typename Workspace<T>::LayerCache& c, std::size_t n) {
    const auto d = static_cast<std::size_t>(cfg_.embed_dim);
    const auto hd = static_cast<std::size_t>(cfg_.head_dim());
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    std::fill(ws_.dq.begin(), ws_.dq.end(), T(0));
    std::fill(ws_.dk.begin(), ws_.dk.end(), T(0));
    std::fill(ws_.dv.begin(), ws_.dv.end(), T(0));
    for (std::size_t head = 0; head < static_cast<std::size_t>(cfg_.heads); ++head) {
      const std::size_t off = head * hd;
      for (std::size_t i = 0; i < n; ++i) {
        const T* qi = c.q.data() + i * d + off;
        const T* dyi = ws_.dy.data() + i * d + off;
        const T* yi = c.y.data() + i * d + off;
        T* dqi = ws_.dq.data() + i * d + off;
        const T lse = c.lse[head * n + i];
        // sum_j p_ij (dy_i . v_j) == dy_i . y_i
        T delta = 0;
        for (std::size_t k = 0; k < hd; ++k) delta += dyi[k] * yi[k];
        for (std::size_t j = 0; j <= i; ++j) {
          const T* kj = c.k.data() + j * d + off;
          const T* vj = c.v.data() + j * d + off;
          T dot = 0;
          T dp = 0;
          for (std::size_t k = 0; k < hd; ++k) {
            dot += qi[k] * kj[k];
            dp += dyi[k] * vj[k];
          }
          const T pij = std::exp(dot * scale - lse);
          const T ds = pij * (dp - delta) * scale;
          T* dkj = ws_.dk.data() + j * d + off;
          T* dvj = ws_.dv.data() + j * d + off;
          for (std::size_t k = 0; k < hd; ++k) {
            dvj[k] += pij * dyi[k];
            dqi[k] += ds * kj[k];
            dkj[k] += ds * qi[k];
          }
        }
      }
    }
  }

  const ModelParams<T>& p_;
  Workspace<T>& ws_;
  const ModelConfig& cfg_;
  std::size_t tok_ = 0, pos_ = 0, lnf_w_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<LayerOffsets> layers_;
};

template <typename T>
std::span<const T> forward(const ModelParams<T>& params, std::span<const Token> tokens,
                           Workspace<T>& ws) {
  TransformerPass<T> pass(params, ws);
  return pass.forward(tokens);
}

template <typename T>
std::vector<T> forward(const ModelParams<T>& params, std::span<const Token> tokens) {
  Workspace<T> ws;
  const auto logits = forward(params, tokens, ws);
  return std::vector<T>(logits.begin(), logits.end());
}

namespace {

template <typename T>
std::size_t check_loss_inputs(std::size_t rows, std::span<const Token> targets,
                              std::span<const std::uint8_t> mask) {
  if (targets.size() != rows || mask.size() != rows) {
    throw std::invalid_argument("logits, targets and mask disagree in length");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || targets[i] >= kVocabSize) {
      throw std::invalid_argument("masked-in target outside the vocabulary");
    }
    ++count;
  }
  if (count == 0) throw std::invalid_argument("loss mask selects no positions");
  return count;
}

}  // namespace

template <typename T>
T masked_loss(std::span<const T> logits, std::span<const Token> targets,
              std::span<const std::uint8_t> mask) {
  const auto v = static_cast<std::size_t>(kVocabSize);
  if (logits.size() % v != 0) throw std::invalid_argument("logits are not [n x 26]");
  const std::size_t rows = logits.size() / v;
  const std::size_t count = check_loss_inputs<T>(rows, targets, mask);
  T total = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!mask[i]) continue;
    const T* row = logits.data() + i * v;
    const T mx = *std::max_element(row, row + v);
    T sum = 0;
    for (std::size_t t = 0; t < v; ++t) sum += std::exp(row[t] - mx);
    total += mx + std::log(sum) - row[targets[i]];
  }
  return total / static_cast<T>(count);
}

template <typename T>
T accumulate_gradients(const ModelParams<T>& params, std::span<const Token> tokens,
                       std::span<const Token> targets, std::span<const std::uint8_t> mask,
                       Workspace<T>& ws, std::span<T> grad, T scale) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer size mismatch");
  check_loss_inputs<T>(tokens.size(), targets, mask);
  TransformerPass<T> pass(params, ws);
  pass.forward(tokens);
  return pass.backward(tokens, targets, mask, grad, scale);
}

template <typename T>
LossAndGradients<T> backward(const ModelParams<T>& params, std::span<const Token> tokens,
                             std::span<const Token> targets, std::span<const std::uint8_t> mask) {
  LossAndGradients<T> out;
  out.gradients.assign(params.size(), T(0));
  Workspace<T> ws;
  out.loss = accumulate_gradients(params, tokens, targets, mask, ws,
                                  std::span<T>(out.gradients), T(1));
  return out;
}

#define CIPHER_ICL_INSTANTIATE(T)                                                              \
  template class ModelParams<T>;                                                               \
  template ModelParams<T> init_params<T>(const ModelConfig&, Rng&);                            \
  template std::vector<T> forward<T>(const ModelParams<T>&, std::span<const Token>);           \
  template std::span<const T> forward<T>(const ModelParams<T>&, std::span<const Token>,        \
                                         Workspace<T>&);                                       \
  template T masked_loss<T>(std::span<const T>, std::span<const Token>,                        \
                            std::span<const std::uint8_t>);                                    \
  template LossAndGradients<T> backward<T>(const ModelParams<T>&, std::span<const Token>,      \
                                           std::span<const Token>,                             \
                                           std::span<const std::uint8_t>);                     \
  template T accumulate_gradients<T>(const ModelParams<T>&, std::span<const Token>,            \
                                     std::span<const Token>, std::span<const std::uint8_t>,    \
                                     Workspace<T>&, std::span<T>, T);

CIPHER_ICL_INSTANTIATE(float)
CIPHER_ICL_INSTANTIATE(double)

#undef CIPHER_ICL_INSTANTIATE

}  // namespace cipher_icl
