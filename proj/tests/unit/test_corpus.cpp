#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "cipher_icl/corpus.hpp"
#include "cipher_icl/errors.hpp"
#include "cipher_icl/rng.hpp"
#include "support.hpp"

using namespace cipher_icl;
using cipher_icl::testing::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

LetterStream repeated_stream(std::size_t n) {
  Message m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = Letter(static_cast<int>(i % 26));
  return LetterStream::with_default_split(std::move(m));
}

}  // namespace

TEST(Preprocess, Examples) {
  EXPECT_EQ(to_string(clean_text("Hello, World! 123")), "helloworld");
  EXPECT_EQ(to_string(clean_text("")), "");
  EXPECT_EQ(to_string(clean_text("ABC\ndef")), "abcdef");
  EXPECT_EQ(to_string(clean_text("caf\xc3\xa9 na\xc3\xafve")), "cafnave");
}

TEST(Preprocess, IdempotentAndClosedOverAlphabet) {
  Rng rng(2);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int t = 0; t < 200; ++t) {
    std::string raw(300, '\0');
    for (auto& ch : raw) ch = static_cast<char>(byte(rng));
    const std::string once = to_string(clean_text(raw));
    EXPECT_EQ(to_string(clean_text(once)), once);
    for (char ch : once) ASSERT_TRUE(ch >= 'a' && ch <= 'z');
  }
}

TEST(Preprocess, FilesConcatenateInArgumentOrder) {
  TempDir dir("corpus");
  write_file(dir / "a.txt", "One!");
  write_file(dir / "b.txt", "two");
  const std::vector<std::filesystem::path> ab{dir / "a.txt", dir / "b.txt"};
  const std::vector<std::filesystem::path> ba{dir / "b.txt", dir / "a.txt"};
  EXPECT_EQ(to_string(preprocess_files(ab).letters()), "onetwo");
  EXPECT_EQ(to_string(preprocess_files(ba).letters()), "twoone");
  const std::vector<std::filesystem::path> missing{dir / "nope.txt"};
  EXPECT_THROW(preprocess_files(missing), IoError);
}

TEST(LetterStream, DefaultSplitHoldsOutTail) {
  const auto s = repeated_stream(1000);
  EXPECT_EQ(s.split_boundary(), 950u);
  EXPECT_EQ(s.split(Split::kTrain).size(), 950u);
  EXPECT_EQ(s.split(Split::kValidation).size(), 50u);
  EXPECT_THROW(LetterStream(Message(3), 4), std::invalid_argument);
}

TEST(SampleMessage, Examples) {
  const LetterStream s(to_message("abcdef"), 6);
  Rng rng(0);
  EXPECT_EQ(to_string(sample_message(s, 6, Split::kTrain, rng)), "abcdef");
  EXPECT_TRUE(sample_message(s, 0, Split::kTrain, rng).empty());
  EXPECT_THROW(sample_message(s, 7, Split::kTrain, rng), std::invalid_argument);
  EXPECT_THROW(sample_message(s, 1, Split::kValidation, rng), std::invalid_argument);
}

TEST(SampleMessage, StartOffsetsAreUniform) {
  Message m(1000000, Letter(0));
  const LetterStream s(std::move(m), 1000000);
  Rng rng(77);
  const std::size_t windows = s.size() - 100 + 1;
  std::array<double, 10> buckets{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    std::size_t start = 0;
    sample_message(s, 100, Split::kTrain, rng, start);
    ASSERT_LT(start, windows);
    buckets[start * 10 / windows] += 1;
  }
  double chi2 = 0;
  for (double b : buckets) chi2 += (b - draws / 10.0) * (b - draws / 10.0) / (draws / 10.0);
  // chi-square, 9 degrees of freedom, upper 0.001 quantile
  EXPECT_LT(chi2, 27.877);
}

TEST(SampleMessage, SplitsNeverOverlap) {
  const auto s = repeated_stream(5000);
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    std::size_t start = 0;
    sample_message(s, 40, Split::kTrain, rng, start);
    ASSERT_LE(start + 40, s.split_boundary());
    sample_message(s, 40, Split::kValidation, rng, start);
    ASSERT_GE(start, s.split_boundary());
    ASSERT_LE(start + 40, s.size());
  }
}

TEST(UniformMessage, ReproducibleAndFlat) {
  Rng a(5), b(5);
  EXPECT_TRUE(sample_uniform_message(0, a).empty());
  EXPECT_EQ(sample_uniform_message(50, a), sample_uniform_message(50, b));
  Rng rng(6);
  const Message m = sample_uniform_message(260000, rng);
  std::array<int, 26> counts{};
  for (Letter l : m) ++counts[l.index()];
  for (int c : counts) EXPECT_NEAR(c / 260000.0, 1.0 / 26, 0.003);
}

TEST(FrequencyOrder, CountsAndTies) {
  const auto aab = letter_frequency_order(to_message("aab"));
  EXPECT_EQ(to_string(aab.ranking), "abcdefghijklmnopqrstuvwxyz");
  EXPECT_EQ(aab.counts[0], 2u);
  EXPECT_EQ(aab.counts[1], 1u);
  const auto none = letter_frequency_order(Message{});
  EXPECT_EQ(to_string(none.ranking), "abcdefghijklmnopqrstuvwxyz");
  const auto zba = letter_frequency_order(to_message("zzbbq"));
  EXPECT_EQ(to_string(zba.ranking).substr(0, 4), "bzqa");
}

TEST(FrequencyOrder, EnglishCorpusRanksEFirst) {
  const auto& s = cipher_icl::testing::english();
  EXPECT_GE(s.size(), 1000000u);
  const auto order = letter_frequency_order(s);
  EXPECT_EQ(order.ranking[0].to_char(), 'e');
  EXPECT_EQ(order.ranking[1].to_char(), 't');
  EXPECT_EQ(order.ranking[2].to_char(), 'a');
  std::set<Letter> all(order.ranking.begin(), order.ranking.end());
  EXPECT_EQ(all.size(), 26u);
}

TEST(CorpusCache, RoundTrip) {
  TempDir dir("cache");
  const auto s = LetterStream(to_message("thequickbrownfox"), 12, "x");
  save_corpus_cache(s, dir / "c.bin");
  EXPECT_TRUE(is_corpus_cache(dir / "c.bin"));
  const auto back = load_corpus_cache(dir / "c.bin");
  EXPECT_EQ(to_string(back.letters()), "thequickbrownfox");
  EXPECT_EQ(back.split_boundary(), 12u);
  // header: 8 magic + 4 version + 8 count + 8 boundary
  EXPECT_EQ(std::filesystem::file_size(dir / "c.bin"), 28u + 16u);
  EXPECT_EQ(to_string(load_corpus(dir / "c.bin").letters()), "thequickbrownfox");
}

TEST(CorpusCache, RejectsCorruption) {
  TempDir dir("cache");
  const auto s = LetterStream(to_message("abcdef"), 5);
  save_corpus_cache(s, dir / "c.bin");
  std::string bytes;
  {
    std::ifstream in(dir / "c.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto bad = bytes;
  bad[0] = 'X';
  write_file(dir / "magic.bin", bad);
  EXPECT_THROW(load_corpus_cache(dir / "magic.bin"), FormatError);
  EXPECT_FALSE(is_corpus_cache(dir / "magic.bin"));
  write_file(dir / "short.bin", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(load_corpus_cache(dir / "short.bin"), FormatError);
  bad = bytes;
  bad.back() = 26;
  write_file(dir / "letter.bin", bad);
  EXPECT_THROW(load_corpus_cache(dir / "letter.bin"), FormatError);
  bad = bytes;
  bad[8] = 2;
  write_file(dir / "version.bin", bad);
  EXPECT_THROW(load_corpus_cache(dir / "version.bin"), FormatError);
  EXPECT_THROW(load_corpus_cache(dir / "absent.bin"), IoError);
}
