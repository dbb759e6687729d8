#include "cipher_icl/baselines.hpp"

#include <stdexcept>
#include <string>

#include "cipher_icl/errors.hpp"

namespace cipher_icl {

namespace {

constexpr Letter kLetterE = Letter::unchecked(4);

int offset_of(ObservedPair p) {
  return (p.cipher.index() - p.plain.index() + kAlphabetSize) % kAlphabetSize;
}

Letter shift_back(Letter cipher, int offset) {
  return Letter::unchecked(
      static_cast<std::uint8_t>((cipher.index() - offset + kAlphabetSize) % kAlphabetSize));
}

MonoLookupTable build_mono_table(ObservedPairs pairs) {
  MonoLookupTable table;
  for (const auto& p : pairs) table.observe(p);
  return table;
}

OffsetTable build_offset_table(ObservedPairs pairs, int key_length) {
  OffsetTable table(key_length);
  for (std::size_t i = 0; i < pairs.size(); ++i) table.observe(i, pairs[i]);
  return table;
}

}  // namespace

std::vector<ObservedPair> observed_pairs(std::span<const Letter> ciphertext,
                                         std::span<const Letter> plaintext, std::size_t count) {
  if (count > ciphertext.size() || count > plaintext.size()) {
    throw std::invalid_argument("pair count exceeds message length");
  }
  std::vector<ObservedPair> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {ciphertext[i], plaintext[i]};
  return out;
}

void MonoLookupTable::observe(ObservedPair pair) {
  auto& slot = plain_of_[pair.cipher.index()];
  if (slot) {
    if (*slot != pair.plain) {
      throw InconsistentPairsError(std::string("cipher letter '") + pair.cipher.to_char() +
                                   "' observed with two plaintexts");
    }
    return;
  }
  slot = pair.plain;
  used_plain_[pair.plain.index()] = true;
}

std::optional<Letter> MonoLookupTable::lookup(Letter cipher) const noexcept {
  return plain_of_[cipher.index()];
}

OffsetTable::OffsetTable(int key_length) {
  if (key_length < 1) throw std::invalid_argument("key length must be >= 1");
  offsets_.assign(static_cast<std::size_t>(key_length), -1);
}

bool OffsetTable::try_observe(std::size_t position, ObservedPair pair) {
  int& slot = offsets_[position % offsets_.size()];
  const int off = offset_of(pair);
  if (slot < 0) {
    slot = off;
    return true;
  }
  return slot == off;
}

void OffsetTable::observe(std::size_t position, ObservedPair pair) {
  if (!try_observe(position, pair)) {
    throw InconsistentPairsError("conflicting offsets at key position " +
                                 std::to_string(position % offsets_.size()));
  }
}

std::optional<int> OffsetTable::offset_at(std::size_t position) const noexcept {
  const int v = offsets_[position % offsets_.size()];
  if (v < 0) return std::nullopt;
  return v;
}

std::optional<Letter> OffsetTable::decrypt(Letter cipher, std::size_t position) const noexcept {
  const auto off = offset_at(position);
  if (!off) return std::nullopt;
  return shift_back(cipher, *off);
}

KeyLengthSearch::KeyLengthSearch(KeyLengthRange candidates) : range_(candidates) {
  if (candidates.min < 1 || candidates.min > candidates.max) {
    throw std::invalid_argument("empty key-length candidate range");
  }
  for (int l = candidates.min; l <= candidates.max; ++l) tables_.emplace_back(l);
  alive_.assign(tables_.size(), true);
}

void KeyLengthSearch::observe(std::size_t position, ObservedPair pair) {
  for (std::size_t c = 0; c < tables_.size(); ++c) {
    if (alive_[c] && !tables_[c].try_observe(position, pair)) alive_[c] = false;
  }
}

Prediction KeyLengthSearch::predict(Letter cipher, std::size_t position) const {
  std::optional<Letter> agreed;
  for (std::size_t c = 0; c < tables_.size(); ++c) {
    if (!alive_[c]) continue;
    const auto plain = tables_[c].decrypt(cipher, position);
    if (!plain) return Prediction::abstain();
    if (agreed && *agreed != *plain) return Prediction::abstain();
    agreed = plain;
  }
  return agreed ? Prediction::of(*agreed) : Prediction::abstain();
}

std::vector<int> KeyLengthSearch::surviving() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < tables_.size(); ++c) {
    if (alive_[c]) out.push_back(range_.min + static_cast<int>(c));
  }
  return out;
}

Prediction mono_naive_predict(ObservedPairs pairs, Letter query) {
  const auto hit = build_mono_table(pairs).lookup(query);
  return hit ? Prediction::of(*hit) : Prediction::abstain();
}

Prediction mono_freq_from_table(const MonoLookupTable& table, Letter query,
                                const FrequencyOrder& order) {
  if (const auto hit = table.lookup(query)) return Prediction::of(*hit);
  for (Letter candidate : order.ranking) {
    if (!table.used_plain()[candidate.index()]) return Prediction::of(candidate);
  }
  // Unreachable for consistent pairs: an unseen cipher letter implies at
  // most 25 plaintext letters are in use.
  return Prediction::abstain();
}

Prediction mono_freq_predict(ObservedPairs pairs, Letter query, const FrequencyOrder& order) {
  return mono_freq_from_table(build_mono_table(pairs), query, order);
}

Prediction vig_known_naive_predict(ObservedPairs pairs, Letter query, std::size_t query_pos,
                                   int key_length) {
  const auto plain = build_offset_table(pairs, key_length).decrypt(query, query_pos);
  return plain ? Prediction::of(*plain) : Prediction::abstain();
}

Prediction vig_known_freq_predict(ObservedPairs pairs, Letter query, std::size_t query_pos,
                                  int key_length) {
  const auto plain = build_offset_table(pairs, key_length).decrypt(query, query_pos);
  return Prediction::of(plain.value_or(kLetterE));
}

Prediction vig_search_predict(ObservedPairs pairs, Letter query, std::size_t query_pos,
                              KeyLengthRange candidates) {
  KeyLengthSearch search(candidates);
  for (std::size_t i = 0; i < pairs.size(); ++i) search.observe(i, pairs[i]);
  return search.predict(query, query_pos);
}

}  // namespace cipher_icl
