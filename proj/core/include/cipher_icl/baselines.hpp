#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cipher_icl/cipher.hpp"
#include "cipher_icl/corpus.hpp"

namespace cipher_icl {

// A decoder's answer: a letter, or an explicit abstention that always
// scores as wrong.
class Prediction {
 public:
  static Prediction abstain() noexcept { return Prediction(); }
  static Prediction of(Letter l) noexcept { return Prediction(l); }

  bool is_abstain() const noexcept { return !value_.has_value(); }
  Letter letter() const { return value_.value(); }
  bool is_correct(Letter truth) const noexcept { return value_.has_value() && *value_ == truth; }

  friend bool operator==(const Prediction&, const Prediction&) = default;

 private:
  Prediction() = default;
  explicit Prediction(Letter l) : value_(l) {}
  std::optional<Letter> value_;
};

struct ObservedPair {
  Letter cipher;
  Letter plain;
};

// Pair i sits at absolute message position i.
using ObservedPairs = std::span<const ObservedPair>;

std::vector<ObservedPair> observed_pairs(std::span<const Letter> ciphertext,
                                         std::span<const Letter> plaintext, std::size_t count);

struct KeyLengthRange {
  int min = 4;
  int max = 32;
};

// Incremental decoders. observe() consumes pairs in position order, so an
// evaluation sweep over j costs O(J) instead of O(J^2).

class MonoLookupTable {
 public:
  // Throws InconsistentPairsError when a cipher letter reappears with a
  // different plaintext.
  void observe(ObservedPair pair);
  std::optional<Letter> lookup(Letter cipher) const noexcept;
  // Plaintext letters already assigned to some cipher letter.
  const std::array<bool, kAlphabetSize>& used_plain() const noexcept { return used_plain_; }

 private:
  std::array<std::optional<Letter>, kAlphabetSize> plain_of_{};
  std::array<bool, kAlphabetSize> used_plain_{};
};

class OffsetTable {
 public:
  // Throws std::invalid_argument unless key_length >= 1.
  explicit OffsetTable(int key_length);

  // Returns false, leaving the table untouched, on an offset conflict.
  bool try_observe(std::size_t position, ObservedPair pair);
  // Throws InconsistentPairsError on conflict.
  void observe(std::size_t position, ObservedPair pair);
  std::optional<int> offset_at(std::size_t position) const noexcept;
  std::optional<Letter> decrypt(Letter cipher, std::size_t position) const noexcept;
  int key_length() const noexcept { return static_cast<int>(offsets_.size()); }

 private:
  std::vector<int> offsets_;  // -1 = unknown
};

class KeyLengthSearch {
 public:
  // Throws std::invalid_argument on an empty or non-positive range.
  explicit KeyLengthSearch(KeyLengthRange candidates);

  void observe(std::size_t position, ObservedPair pair);
  // Letter only if every surviving candidate knows the offset at `position`
  // and all of them decrypt `cipher` to the same letter.
  Prediction predict(Letter cipher, std::size_t position) const;
  std::vector<int> surviving() const;

 private:
  KeyLengthRange range_;
  std::vector<OffsetTable> tables_;
  std::vector<bool> alive_;
};

Prediction mono_naive_predict(ObservedPairs pairs, Letter query);
Prediction mono_freq_predict(ObservedPairs pairs, Letter query, const FrequencyOrder& order);
Prediction mono_freq_from_table(const MonoLookupTable& table, Letter query,
                                const FrequencyOrder& order);

Prediction vig_known_naive_predict(ObservedPairs pairs, Letter query, std::size_t query_pos,
                                   int key_length);
Prediction vig_known_freq_predict(ObservedPairs pairs, Letter query, std::size_t query_pos,
                                  int key_length);
Prediction vig_search_predict(ObservedPairs pairs, Letter query, std::size_t query_pos,
                              KeyLengthRange candidates = {});

}  // namespace cipher_icl
