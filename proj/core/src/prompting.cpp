#include "cipher_icl/prompting.hpp"

#include <algorithm>
#include <stdexcept>

namespace cipher_icl {

TokenSequence encode(std::span<const Letter> message) {
  TokenSequence out(message.size());
  std::transform(message.begin(), message.end(), out.begin(),
                 [](Letter l) { return static_cast<Token>(l.index()); });
  return out;
}

Message decode(std::span<const Token> tokens) {
  Message out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (t < 0 || t >= kVocabSize) {
      throw std::invalid_argument("token id out of range: " + std::to_string(t));
    }
    out.push_back(Letter::unchecked(static_cast<std::uint8_t>(t)));
  }
  return out;
}

void SchemeConfig::validate() const {
  switch (scheme) {
    case Scheme::kMono:
      return;
    case Scheme::kVigenereFixed:
      if (key_length < 1 || key_length > kMaxKeyLength) {
        throw std::invalid_argument("vigenere key length must be in [1, 32]");
      }
      return;
    case Scheme::kVigenereVariable:
      if (min_key_length < 1 || max_key_length > kMaxKeyLength ||
          min_key_length > max_key_length) {
        throw std::invalid_argument("vigenere key length range must satisfy 1 <= lo <= hi <= 32");
      }
      return;
  }
}

std::string SchemeConfig::name() const {
  switch (scheme) {
    case Scheme::kMono:
      return "mono";
    case Scheme::kVigenereFixed:
      return "vig";
    case Scheme::kVigenereVariable:
      return "vig_var";
  }
  return "?";
}

std::string SchemeConfig::key_length_label() const {
  switch (scheme) {
    case Scheme::kMono:
      return "-";
    case Scheme::kVigenereFixed:
      return std::to_string(key_length);
    case Scheme::kVigenereVariable:
      return std::to_string(min_key_length) + "-" + std::to_string(max_key_length);
  }
  return "?";
}

SchemeConfig parse_scheme(const std::string& name, int key_length, int min_len, int max_len) {
  SchemeConfig cfg;
  if (name == "mono") {
    cfg = SchemeConfig::mono();
  } else if (name == "vig") {
    cfg = SchemeConfig::vigenere_fixed(key_length);
  } else if (name == "vig_var") {
    cfg = SchemeConfig::vigenere_variable(min_len, max_len);
  } else {
    throw std::invalid_argument("unknown scheme '" + name + "' (expected mono|vig|vig_var)");
  }
  cfg.validate();
  return cfg;
}

Prompt make_prompt(const CipherKey& key, Message plaintext) {
  Prompt p{encrypt(key, plaintext), std::move(plaintext), key, std::nullopt};
  return p;
}

std::size_t TrainingItem::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count(loss_mask.begin(), loss_mask.end(), 1));
}

TrainingItem build_training_item(const Prompt& prompt) {
  const std::size_t l = prompt.size();
  if (l == 0) throw std::invalid_argument("cannot build a training item from an empty prompt");
  TrainingItem item;
  item.tokens.resize(2 * l);
  for (std::size_t j = 0; j < l; ++j) {
    item.tokens[2 * j] = prompt.ciphertext[j].index();
    item.tokens[2 * j + 1] = prompt.plaintext[j].index();
  }
  item.targets.assign(2 * l, kIgnoredTarget);
  item.loss_mask.assign(2 * l, 0);
  for (std::size_t j = 0; j < l; ++j) {
    item.targets[2 * j] = item.tokens[2 * j + 1];
    item.loss_mask[2 * j] = 1;
  }
  return item;
}

EvalPrefix build_eval_prefix(const Prompt& prompt, std::size_t j) {
  if (j >= prompt.size()) {
    throw std::invalid_argument("prefix index " + std::to_string(j) + " out of range for prompt of " +
                                std::to_string(prompt.size()) + " pairs");
  }
  EvalPrefix prefix{TokenSequence(2 * j + 1), prompt.plaintext[j]};
  for (std::size_t i = 0; i < j; ++i) {
    prefix.tokens[2 * i] = prompt.ciphertext[i].index();
    prefix.tokens[2 * i + 1] = prompt.plaintext[i].index();
  }
  prefix.tokens[2 * j] = prompt.ciphertext[j].index();
  return prefix;
}

CipherKey sample_key(const SchemeConfig& scheme, Rng& rng) {
  switch (scheme.scheme) {
    case Scheme::kMono:
      return sample_mono_key(rng);
    case Scheme::kVigenereFixed:
      return sample_vigenere_key(rng, scheme.key_length);
    case Scheme::kVigenereVariable: {
      std::uniform_int_distribution<int> len(scheme.min_key_length, scheme.max_key_length);
      return sample_vigenere_key(rng, len(rng));
    }
  }
  throw std::invalid_argument("unknown scheme");
}

Prompt sample_training_prompt(const SchemeConfig& scheme, const LetterStream& stream,
                              std::size_t message_length, Split split, Rng& rng) {
  CipherKey key = sample_key(scheme, rng);
  std::size_t offset = 0;
  Message plain = sample_message(stream, message_length, split, rng, offset);
  Prompt p = make_prompt(key, std::move(plain));
  p.corpus_offset = offset;
  return p;
}

}  // namespace cipher_icl
