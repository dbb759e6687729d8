#include <gtest/gtest.h>

#include "cipher_icl/baselines.hpp"
#include "cipher_icl/errors.hpp"
#include "cipher_icl/prompting.hpp"
#include "cipher_icl/rng.hpp"
#include "support.hpp"

using namespace cipher_icl;

namespace {

Letter L(char c) { return Letter::from_char(c); }

std::vector<ObservedPair> pairs_of(std::initializer_list<std::pair<char, char>> list) {
  std::vector<ObservedPair> out;
  for (auto [c, m] : list) out.push_back({L(c), L(m)});
  return out;
}

// Pairs for positions 0..n-1 of a plaintext under a Vigenere key.
std::vector<ObservedPair> vig_pairs(const std::vector<int>& shifts, const std::string& plain) {
  const Message m = to_message(plain);
  const Message c = vigenere_encrypt(VigenereKey(shifts), m);
  return observed_pairs(c, m, m.size());
}

}  // namespace

TEST(MonoNaive, Examples) {
  const auto two = pairs_of({{'q', 'h'}, {'w', 'e'}});
  EXPECT_EQ(mono_naive_predict(two, L('q')), Prediction::of(L('h')));
  EXPECT_TRUE(mono_naive_predict(pairs_of({{'q', 'h'}}), L('z')).is_abstain());
  EXPECT_TRUE(mono_naive_predict({}, L('a')).is_abstain());
  EXPECT_THROW(mono_naive_predict(pairs_of({{'q', 'h'}, {'q', 'e'}}), L('q')),
               InconsistentPairsError);
  EXPECT_FALSE(Prediction::abstain().is_correct(L('a')));
}

TEST(MonoFreq, Examples) {
  const auto order = letter_frequency_order(cipher_icl::testing::english());
  ASSERT_EQ(to_string(std::span(order.ranking).first(3)), "eta");
  EXPECT_EQ(mono_freq_predict(pairs_of({{'x', 'e'}}), L('y'), order), Prediction::of(L('t')));
  EXPECT_EQ(mono_freq_predict({}, L('q'), order), Prediction::of(L('e')));
  EXPECT_EQ(mono_freq_predict(pairs_of({{'x', 'e'}}), L('x'), order), Prediction::of(L('e')));

  Rng rng(1);
  const MonoKey k = sample_mono_key(rng);
  Message alphabet;
  for (int i = 0; i < 26; ++i) alphabet.push_back(Letter(i));
  const Message c = mono_encrypt(k, alphabet);
  const auto all = observed_pairs(c, alphabet, 26);
  for (int i = 0; i < 26; ++i) {
    EXPECT_EQ(mono_freq_predict(all, Letter(i), order), Prediction::of(k.decrypt(Letter(i))));
  }
}

TEST(VigKnown, Examples) {
  // key [1,2]: a->b, b->d
  const auto pairs = vig_pairs({1, 2}, "ab");
  EXPECT_EQ(vig_known_naive_predict(pairs, L('b'), 2, 2), Prediction::of(L('a')));
  const auto half = vig_pairs({3, 1, 4, 1}, "xy");
  EXPECT_TRUE(vig_known_naive_predict(half, L('k'), 3, 4).is_abstain());
  EXPECT_EQ(vig_known_freq_predict(half, L('k'), 3, 4), Prediction::of(L('e')));
  EXPECT_EQ(vig_known_freq_predict(pairs, L('b'), 2, 2), Prediction::of(L('a')));
  EXPECT_THROW(vig_known_naive_predict(pairs_of({{'b', 'a'}, {'c', 'c'}, {'c', 'a'}}), L('a'), 3, 2),
               InconsistentPairsError);
}

TEST(VigSearch, EliminatesInconsistentCandidate) {
  // key [1,2] over positions 0..3; period 3 sees offsets 1 then 2 at key pos 0.
  const auto pairs = vig_pairs({1, 2}, "abcd");
  KeyLengthSearch search({2, 3});
  for (std::size_t i = 0; i < pairs.size(); ++i) search.observe(i, pairs[i]);
  EXPECT_EQ(search.surviving(), std::vector<int>{2});
  EXPECT_EQ(vig_search_predict(pairs, L('b'), 4, {2, 3}), Prediction::of(L('a')));
  EXPECT_THROW(vig_search_predict(pairs, L('b'), 4, {5, 4}), std::invalid_argument);
}

TEST(VigSearch, SingleTrueCandidateMatchesKnownLength) {
  Rng rng(2);
  const auto& corpus = cipher_icl::testing::english();
  for (int t = 0; t < 100; ++t) {
    const Prompt p =
        sample_training_prompt(SchemeConfig::vigenere_fixed(6), corpus, 30, Split::kTrain, rng);
    const auto pairs = observed_pairs(p.ciphertext, p.plaintext, p.size());
    for (std::size_t j = 6; j < p.size(); ++j) {
      const auto prefix = std::span(pairs).first(j);
      ASSERT_EQ(vig_search_predict(prefix, p.ciphertext[j], j, {6, 6}), Prediction::of(p.plaintext[j]));
    }
  }
}

// Brute-force over short keys and plaintexts until two surviving candidates
// disagree at the query; the decoder must abstain there.
TEST(VigSearch, AbstainsWhenSurvivorsDisagree) {
  int found = 0;
  for (int code = 0; code < 27 * 27 * 27 && found < 20; ++code) {
    const std::vector<int> shifts{code % 27 % 26, code / 27 % 26, code / 729 % 26};
    for (const std::string plain : {"thecat", "abcabc", "zzzzzz"}) {
      const Message m = to_message(plain);
      const Message c = vigenere_encrypt(VigenereKey(shifts), m);
      const auto pairs = observed_pairs(c, m, m.size());
      for (std::size_t j = 1; j < m.size(); ++j) {
        const auto prefix = std::span(pairs).first(j);
        // independent check: which of {2,3} are consistent with the prefix
        std::vector<int> alive;
        for (int len : {2, 3}) {
          std::vector<int> off(len, -1);
          bool ok = true;
          for (std::size_t i = 0; i < j && ok; ++i) {
            const int o = (prefix[i].cipher.index() - prefix[i].plain.index() + 26) % 26;
            int& slot = off[i % len];
            if (slot >= 0 && slot != o) ok = false;
            slot = o;
          }
          if (ok) alive.push_back(off[j % len]);
        }
        if (alive.size() == 2 && alive[0] >= 0 && alive[1] >= 0 && alive[0] != alive[1]) {
          ++found;
          EXPECT_TRUE(vig_search_predict(prefix, c[j], j, {2, 3}).is_abstain());
        }
      }
    }
  }
  EXPECT_GT(found, 0);
}

TEST(VigSearch, NeverEliminatesTheTrueLength) {
  Rng rng(3);
  const auto& corpus = cipher_icl::testing::english();
  for (int t = 0; t < 300; ++t) {
    const Prompt p = sample_training_prompt(SchemeConfig::vigenere_variable(), corpus, 64,
                                            Split::kTrain, rng);
    const int truth = static_cast<int>(std::get<VigenereKey>(p.key).length());
    KeyLengthSearch search({});
    for (std::size_t i = 0; i < p.size(); ++i) search.observe(i, {p.ciphertext[i], p.plaintext[i]});
    const auto alive = search.surviving();
    ASSERT_NE(std::find(alive.begin(), alive.end(), truth), alive.end());
  }
}

// Emitted letters are always right, on every prefix of many prompts.
TEST(Soundness, NaiveAndSearchDecoders) {
  Rng rng(4);
  const auto& corpus = cipher_icl::testing::english();
  for (int t = 0; t < 200; ++t) {
    const Prompt mono = sample_training_prompt(SchemeConfig::mono(), corpus, 80, Split::kTrain, rng);
    const auto mp = observed_pairs(mono.ciphertext, mono.plaintext, mono.size());
    MonoLookupTable table;
    for (std::size_t j = 0; j < mono.size(); ++j) {
      const auto pred = mono_naive_predict(std::span(mp).first(j), mono.ciphertext[j]);
      if (!pred.is_abstain()) ASSERT_EQ(pred.letter(), mono.plaintext[j]);
      const auto inc = table.lookup(mono.ciphertext[j]);
      ASSERT_EQ(inc.has_value(), !pred.is_abstain());
      table.observe(mp[j]);
    }
    const Prompt vig = sample_training_prompt(SchemeConfig::vigenere_variable(), corpus, 80,
                                              Split::kTrain, rng);
    const int len = static_cast<int>(std::get<VigenereKey>(vig.key).length());
    const auto vp = observed_pairs(vig.ciphertext, vig.plaintext, vig.size());
    for (std::size_t j = 0; j < vig.size(); ++j) {
      const auto prefix = std::span(vp).first(j);
      const auto known = vig_known_naive_predict(prefix, vig.ciphertext[j], j, len);
      if (!known.is_abstain()) ASSERT_EQ(known.letter(), vig.plaintext[j]);
      if (static_cast<int>(j) >= len) ASSERT_FALSE(known.is_abstain());
      const auto search = vig_search_predict(prefix, vig.ciphertext[j], j);
      if (!search.is_abstain()) ASSERT_EQ(search.letter(), vig.plaintext[j]);
    }
  }
}

TEST(Dominance, FreqAgreesWhenNaiveEmits) {
  Rng rng(5);
  const auto& corpus = cipher_icl::testing::english();
  const auto order = letter_frequency_order(corpus.split(Split::kTrain));
  for (int t = 0; t < 200; ++t) {
    const Prompt p = sample_training_prompt(SchemeConfig::mono(), corpus, 60, Split::kTrain, rng);
    const auto pairs = observed_pairs(p.ciphertext, p.plaintext, p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
      const auto prefix = std::span(pairs).first(j);
      const auto naive = mono_naive_predict(prefix, p.ciphertext[j]);
      const auto freq = mono_freq_predict(prefix, p.ciphertext[j], order);
      ASSERT_FALSE(freq.is_abstain());
      if (!naive.is_abstain()) ASSERT_EQ(naive, freq);
    }
  }
}

TEST(OffsetTable, ConflictsLeaveTableUntouched) {
  OffsetTable t(2);
  EXPECT_TRUE(t.try_observe(0, {L('b'), L('a')}));
  EXPECT_FALSE(t.try_observe(2, {L('c'), L('a')}));
  EXPECT_EQ(t.offset_at(4), 1);
  EXPECT_FALSE(t.offset_at(1).has_value());
  EXPECT_THROW(t.observe(2, {L('c'), L('a')}), InconsistentPairsError);
  EXPECT_THROW(OffsetTable(0), std::invalid_argument);
}
