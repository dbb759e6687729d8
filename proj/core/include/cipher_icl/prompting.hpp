#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cipher_icl/cipher.hpp"
#include "cipher_icl/corpus.hpp"
#include "cipher_icl/rng.hpp"

namespace cipher_icl {

// Token ids coincide with letter indices; the vocabulary is exactly a..z.
using Token = std::int32_t;
using TokenSequence = std::vector<Token>;

inline constexpr int kVocabSize = kAlphabetSize;
// Target value at positions excluded from the loss.
inline constexpr Token kIgnoredTarget = -1;

TokenSequence encode(std::span<const Letter> message);
// Throws std::invalid_argument on ids outside [0, 25].
Message decode(std::span<const Token> tokens);

enum class Scheme { kMono, kVigenereFixed, kVigenereVariable };

struct SchemeConfig {
  Scheme scheme = Scheme::kMono;
  int key_length = 0;       // vigenere-fixed only
  int min_key_length = 4;   // vigenere-variable only
  int max_key_length = 32;  // vigenere-variable only

  static SchemeConfig mono() { return {}; }
  static SchemeConfig vigenere_fixed(int length) { return {Scheme::kVigenereFixed, length, 0, 0}; }
  static SchemeConfig vigenere_variable(int lo = 4, int hi = 32) {
    return {Scheme::kVigenereVariable, 0, lo, hi};
  }

  // Throws std::invalid_argument on out-of-range key lengths.
  void validate() const;
  // "mono" | "vig" | "vig_var"
  std::string name() const;
  // "-" | "<l>" | "<lo>-<hi>"
  std::string key_length_label() const;

  // Only the fields the scheme uses take part.
  friend bool operator==(const SchemeConfig& a, const SchemeConfig& b) {
    if (a.scheme != b.scheme) return false;
    switch (a.scheme) {
      case Scheme::kMono:
        return true;
      case Scheme::kVigenereFixed:
        return a.key_length == b.key_length;
      case Scheme::kVigenereVariable:
        return a.min_key_length == b.min_key_length && a.max_key_length == b.max_key_length;
    }
    return false;
  }
};

// Parses "mono", "vig" (requires key_length), "vig_var" (uses the range).
SchemeConfig parse_scheme(const std::string& name, int key_length, int min_len = 4,
                          int max_len = 32);

struct Prompt {
  Message ciphertext;
  Message plaintext;
  CipherKey key;
  // Absolute corpus offset of the plaintext window, when drawn from a corpus.
  std::optional<std::size_t> corpus_offset;

  std::size_t size() const noexcept { return plaintext.size(); }
};

Prompt make_prompt(const CipherKey& key, Message plaintext);

// Sequence c[0] m[0] c[1] m[1] ... c[l-1] m[l-1]; targets[t] = tokens[t+1]
// where the next token is plaintext, kIgnoredTarget elsewhere.
struct TrainingItem {
  TokenSequence tokens;
  TokenSequence targets;
  std::vector<std::uint8_t> loss_mask;

  std::size_t masked_count() const noexcept;
};

// Throws std::invalid_argument on an empty prompt.
TrainingItem build_training_item(const Prompt& prompt);

struct EvalPrefix {
  TokenSequence tokens;  // length 2j + 1, ends with c[j]
  Letter answer;         // m[j]
};

// j in-context pairs followed by the next ciphertext letter.
// Throws std::invalid_argument unless 0 <= j < prompt.size().
EvalPrefix build_eval_prefix(const Prompt& prompt, std::size_t j);

CipherKey sample_key(const SchemeConfig& scheme, Rng& rng);

// Fresh key, then a corpus window of `message_length` letters from `split`.
Prompt sample_training_prompt(const SchemeConfig& scheme, const LetterStream& stream,
                              std::size_t message_length, Split split, Rng& rng);

// Pairs that fit in a context window: one pair per two tokens.
constexpr std::size_t message_length_for_context(std::size_t context_length) {
  return context_length / 2;
}

}  // namespace cipher_icl
