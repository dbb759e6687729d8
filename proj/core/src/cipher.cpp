#include "cipher_icl/cipher.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cipher_icl {

Letter::Letter(int index) {
  if (index < 0 || index >= kAlphabetSize) {
    throw std::invalid_argument("letter index out of range: " + std::to_string(index));
  }
  index_ = static_cast<std::uint8_t>(index);
}

Letter Letter::from_char(char c) {
  if (c < 'a' || c > 'z') {
    throw std::invalid_argument(std::string("not a lowercase letter: '") + c + "'");
  }
  return unchecked(static_cast<std::uint8_t>(c - 'a'));
}

Message to_message(std::string_view text) {
  Message out;
  out.reserve(text.size());
  for (char c : text) out.push_back(Letter::from_char(c));
  return out;
}

std::string to_string(std::span<const Letter> letters) {
  std::string out;
  out.reserve(letters.size());
  for (Letter l : letters) out.push_back(l.to_char());
  return out;
}

MonoKey::MonoKey(const std::array<Letter, kAlphabetSize>& table) : table_(table) {
  std::array<bool, kAlphabetSize> seen{};
  for (int p = 0; p < kAlphabetSize; ++p) {
    const int c = table_[p].index();
    if (seen[c]) throw std::invalid_argument("mono key is not a permutation");
    seen[c] = true;
    inverse_[c] = Letter::unchecked(static_cast<std::uint8_t>(p));
  }
}

MonoKey MonoKey::identity() {
  std::array<Letter, kAlphabetSize> t;
  for (int i = 0; i < kAlphabetSize; ++i) t[i] = Letter::unchecked(static_cast<std::uint8_t>(i));
  return MonoKey(t);
}

MonoKey MonoKey::reversal() {
  std::array<Letter, kAlphabetSize> t;
  for (int i = 0; i < kAlphabetSize; ++i) {
    t[i] = Letter::unchecked(static_cast<std::uint8_t>(kAlphabetSize - 1 - i));
  }
  return MonoKey(t);
}

VigenereKey::VigenereKey(std::vector<int> shifts) : shifts_(std::move(shifts)) {
  if (shifts_.empty() || shifts_.size() > static_cast<std::size_t>(kMaxKeyLength)) {
    throw std::invalid_argument("vigenere key length must be in [1, 32], got " +
                                std::to_string(shifts_.size()));
  }
  for (int s : shifts_) {
    if (s < 0 || s >= kAlphabetSize) {
      throw std::invalid_argument("vigenere shift out of range: " + std::to_string(s));
    }
  }
}

VigenereKey VigenereKey::from_keyword(std::string_view keyword) {
  std::vector<int> shifts;
  shifts.reserve(keyword.size());
  for (char c : keyword) shifts.push_back(Letter::from_char(c).index());
  return VigenereKey(std::move(shifts));
}

MonoKey sample_mono_key(Rng& rng) {
  std::array<Letter, kAlphabetSize> t;
  for (int i = 0; i < kAlphabetSize; ++i) t[i] = Letter::unchecked(static_cast<std::uint8_t>(i));
  // Fisher-Yates, drawing j uniformly from [0, i].
  for (int i = kAlphabetSize - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(t[i], t[pick(rng)]);
  }
  return MonoKey(t);
}

Message mono_encrypt(const MonoKey& key, std::span<const Letter> message) {
  Message out(message.size());
  std::transform(message.begin(), message.end(), out.begin(),
                 [&](Letter m) { return key.encrypt(m); });
  return out;
}

Message mono_decrypt(const MonoKey& key, std::span<const Letter> ciphertext) {
  Message out(ciphertext.size());
  std::transform(ciphertext.begin(), ciphertext.end(), out.begin(),
                 [&](Letter c) { return key.decrypt(c); });
  return out;
}

VigenereKey sample_vigenere_key(Rng& rng, int length) {
  if (length < 1 || length > kMaxKeyLength) {
    throw std::invalid_argument("vigenere key length must be in [1, 32], got " +
                                std::to_string(length));
  }
  std::uniform_int_distribution<int> shift(0, kAlphabetSize - 1);
  std::vector<int> shifts(static_cast<std::size_t>(length));
  for (int& s : shifts) s = shift(rng);
  return VigenereKey(std::move(shifts));
}

Message vigenere_encrypt(const VigenereKey& key, std::span<const Letter> message) {
  Message out(message.size());
  for (std::size_t j = 0; j < message.size(); ++j) {
    out[j] = Letter::unchecked(
        static_cast<std::uint8_t>((message[j].index() + key.shift_at(j)) % kAlphabetSize));
  }
  return out;
}

Message vigenere_decrypt(const VigenereKey& key, std::span<const Letter> ciphertext) {
  Message out(ciphertext.size());
  for (std::size_t j = 0; j < ciphertext.size(); ++j) {
    out[j] = Letter::unchecked(static_cast<std::uint8_t>(
        (ciphertext[j].index() - key.shift_at(j) + kAlphabetSize) % kAlphabetSize));
  }
  return out;
}

Message encrypt(const CipherKey& key, std::span<const Letter> message) {
  return std::visit(
      [&](const auto& k) -> Message {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, MonoKey>) {
          return mono_encrypt(k, message);
        } else {
          return vigenere_encrypt(k, message);
        }
      },
      key);
}

Message decrypt(const CipherKey& key, std::span<const Letter> ciphertext) {
  return std::visit(
      [&](const auto& k) -> Message {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, MonoKey>) {
          return mono_decrypt(k, ciphertext);
        } else {
          return vigenere_decrypt(k, ciphertext);
        }
      },
      key);
}

}  // namespace cipher_icl
