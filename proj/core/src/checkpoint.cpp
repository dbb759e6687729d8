#include "cipher_icl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cipher_icl/errors.hpp"

namespace cipher_icl {

namespace {

class Writer {
 public:
  template <typename U>
  void put(U value) {
    std::uint64_t bits;
    if constexpr (std::is_floating_point_v<U>) {
      using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
      bits = std::bit_cast<Bits>(value);
    } else {
      bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>(bits >> (8 * i)));
  }
  void bytes(std::string_view s) { buf_.append(s); }

  void tensor(const std::string& name, const std::vector<std::size_t>& shape,
              std::span<const float> values) {
    put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto s : shape) put<std::uint32_t>(static_cast<std::uint32_t>(s));
    for (float v : values) put<float>(v);
  }

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    if constexpr (std::is_floating_point_v<U>) {
      using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
      return std::bit_cast<U>(static_cast<Bits>(bits));
    } else {
      return static_cast<U>(bits);
    }
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  void tensor(const std::string& expected_name, const std::vector<std::size_t>& shape,
              std::span<float> out) {
    const auto name_len = get<std::uint32_t>();
    const auto name = bytes(name_len);
    if (name != expected_name) {
      throw FormatError("checkpoint tensor '" + std::string(name) + "' where '" + expected_name +
                        "' was expected");
    }
    const auto ndims = get<std::uint32_t>();
    if (ndims != shape.size()) throw FormatError("rank mismatch for tensor '" + expected_name + "'");
    for (auto s : shape) {
      if (get<std::uint32_t>() != s) {
        throw FormatError("shape mismatch for tensor '" + expected_name + "'");
      }
    }
    need(out.size() * 4);
    for (float& v : out) v = get<float>();
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const AdamWState<float>* optimizer) {
  const auto& cfg = params.config();
  Writer w;
  w.bytes(kCheckpointMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::int32_t>(cfg.layers);
  w.put<std::int32_t>(cfg.heads);
  w.put<std::int32_t>(cfg.embed_dim);
  w.put<std::int32_t>(cfg.context_length);
  w.put<std::uint32_t>(cfg.tied_embeddings ? 1u : 0u);
  const auto& layout = params.layout();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    w.tensor(layout[i].name, layout[i].shape, params.tensor(i));
  }
  w.put<std::uint32_t>(optimizer != nullptr ? 1u : 0u);
  if (optimizer != nullptr) {
    if (optimizer->first_moment.size() != params.size() ||
        optimizer->second_moment.size() != params.size()) {
      throw std::invalid_argument("optimizer state does not match parameter count");
    }
    const auto& h = optimizer->hyper;
    w.put<std::uint64_t>(optimizer->step);
    for (double x : {h.learning_rate, h.weight_decay, h.beta1, h.beta2, h.epsilon}) w.put<double>(x);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(2 * layout.size()));
    const std::span<const float> m(optimizer->first_moment);
    const std::span<const float> v(optimizer->second_moment);
    for (const auto& t : layout) {
      w.tensor("adam.m/" + t.name, t.shape, m.subspan(t.offset, t.size));
      w.tensor("adam.v/" + t.name, t.shape, v.subspan(t.offset, t.size));
    }
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw IoError("write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  Reader r(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));

  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError("'" + path.string() + "' is not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.layers = r.get<std::int32_t>();
  cfg.heads = r.get<std::int32_t>();
  cfg.embed_dim = r.get<std::int32_t>();
  cfg.context_length = r.get<std::int32_t>();
  const auto flags = r.get<std::uint32_t>();
  if (flags > 1u) throw FormatError("unknown checkpoint flags");
  cfg.tied_embeddings = (flags & 1u) != 0;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid model config in checkpoint: ") + e.what());
  }

  Checkpoint ck{ModelParams<float>(cfg), std::nullopt};
  const auto& layout = ck.params.layout();
  if (r.get<std::uint32_t>() != layout.size()) throw FormatError("tensor count mismatch");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    r.tensor(layout[i].name, layout[i].shape, ck.params.tensor(i));
  }
  const auto has_opt = r.get<std::uint32_t>();
  if (has_opt > 1u) throw FormatError("bad optimizer flag");
  if (has_opt == 1u) {
    AdamWState<float> state(ck.params.size(), {});
    state.step = r.get<std::uint64_t>();
    state.hyper.learning_rate = r.get<double>();
    state.hyper.weight_decay = r.get<double>();
    state.hyper.beta1 = r.get<double>();
    state.hyper.beta2 = r.get<double>();
    state.hyper.epsilon = r.get<double>();
    if (r.get<std::uint32_t>() != 2 * layout.size()) {
      throw FormatError("optimizer tensor count mismatch");
    }
    const std::span<float> m(state.first_moment);
    const std::span<float> v(state.second_moment);
    for (const auto& t : layout) {
      r.tensor("adam.m/" + t.name, t.shape, m.subspan(t.offset, t.size));
      r.tensor("adam.v/" + t.name, t.shape, v.subspan(t.offset, t.size));
    }
    ck.optimizer = std::move(state);
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace cipher_icl
