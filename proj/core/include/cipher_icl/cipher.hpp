#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cipher_icl/rng.hpp"

namespace cipher_icl {

inline constexpr int kAlphabetSize = 26;
inline constexpr int kMaxKeyLength = 32;

// One of the 26 lowercase letters, stored as its index ('a' = 0 .. 'z' = 25).
class Letter {
 public:
  constexpr Letter() = default;
  // Throws std::invalid_argument when index is outside [0, 25].
  explicit Letter(int index);

  static Letter from_char(char c);
  static constexpr Letter unchecked(std::uint8_t index) noexcept {
    Letter l;
    l.index_ = index;
    return l;
  }

  constexpr int index() const noexcept { return index_; }
  constexpr char to_char() const noexcept { return static_cast<char>('a' + index_); }

  friend constexpr bool operator==(Letter, Letter) = default;
  friend constexpr auto operator<=>(Letter, Letter) = default;

 private:
  std::uint8_t index_ = 0;
};

using Message = std::vector<Letter>;

// Throws std::invalid_argument on any character outside 'a'..'z'.
Message to_message(std::string_view text);
std::string to_string(std::span<const Letter> letters);

// Permutation key: table[p] is the ciphertext letter for plaintext letter p.
class MonoKey {
 public:
  // Throws std::invalid_argument unless table is a permutation.
  explicit MonoKey(const std::array<Letter, kAlphabetSize>& table);

  static MonoKey identity();
  // a<->z, b<->y, ...
  static MonoKey reversal();

  Letter encrypt(Letter plain) const noexcept { return table_[plain.index()]; }
  Letter decrypt(Letter cipher) const noexcept { return inverse_[cipher.index()]; }
  const std::array<Letter, kAlphabetSize>& table() const noexcept { return table_; }

  friend bool operator==(const MonoKey& a, const MonoKey& b) { return a.table_ == b.table_; }

 private:
  std::array<Letter, kAlphabetSize> table_;
  std::array<Letter, kAlphabetSize> inverse_;
};

// Keyword of 1..32 shifts; position j uses shifts[j mod length].
class VigenereKey {
 public:
  // Throws std::invalid_argument on bad length or shift values.
  explicit VigenereKey(std::vector<int> shifts);

  static VigenereKey from_keyword(std::string_view keyword);

  std::size_t length() const noexcept { return shifts_.size(); }
  int shift_at(std::size_t position) const noexcept { return shifts_[position % shifts_.size()]; }
  const std::vector<int>& shifts() const noexcept { return shifts_; }

  friend bool operator==(const VigenereKey&, const VigenereKey&) = default;

 private:
  std::vector<int> shifts_;
};

using CipherKey = std::variant<MonoKey, VigenereKey>;

MonoKey sample_mono_key(Rng& rng);
Message mono_encrypt(const MonoKey& key, std::span<const Letter> message);
Message mono_decrypt(const MonoKey& key, std::span<const Letter> ciphertext);

// Throws std::invalid_argument unless 1 <= length <= kMaxKeyLength.
VigenereKey sample_vigenere_key(Rng& rng, int length);
Message vigenere_encrypt(const VigenereKey& key, std::span<const Letter> message);
Message vigenere_decrypt(const VigenereKey& key, std::span<const Letter> ciphertext);

Message encrypt(const CipherKey& key, std::span<const Letter> message);
Message decrypt(const CipherKey& key, std::span<const Letter> ciphertext);

}  // namespace cipher_icl
