#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cipher_icl/cipher.hpp"
#include "cipher_icl/rng.hpp"

namespace cipher_icl {

inline constexpr double kValidationFraction = 0.05;

enum class Split { kTrain, kValidation };

// Immutable cleaned letter stream. [0, split_boundary) is the training
// split, [split_boundary, size) the validation split.
class LetterStream {
 public:
  LetterStream() = default;
  // Throws std::invalid_argument if split_boundary > letters.size().
  LetterStream(Message letters, std::size_t split_boundary, std::string source = {});

  // Places the boundary so that the final kValidationFraction of the stream
  // is held out.
  static LetterStream with_default_split(Message letters, std::string source = {});

  std::span<const Letter> letters() const noexcept { return letters_; }
  std::span<const Letter> split(Split which) const noexcept;
  std::size_t size() const noexcept { return letters_.size(); }
  std::size_t split_boundary() const noexcept { return split_boundary_; }
  const std::string& source() const noexcept { return source_; }

 private:
  Message letters_;
  std::size_t split_boundary_ = 0;
  std::string source_;
};

// Keeps the ASCII letters of `raw`, lowercased and in order. Every other
// byte (digits, punctuation, whitespace, UTF-8 multibyte sequences) is
// dropped, so accented letters vanish rather than being transliterated.
Message clean_text(std::string_view raw);

LetterStream preprocess_text(std::string_view raw, std::string source = {});

// Concatenates the cleaned contents of `paths` in argument order.
// Throws IoError if a file cannot be read.
LetterStream preprocess_files(std::span<const std::filesystem::path> paths);

// Cache layout (little-endian):
//   "CICLCORP" | u32 version = 1 | u64 letter count | u64 split boundary |
//   one byte per letter (0..25)
inline constexpr std::string_view kCorpusMagic = "CICLCORP";
inline constexpr std::uint32_t kCorpusVersion = 1;

void save_corpus_cache(const LetterStream& stream, const std::filesystem::path& path);
// Throws IoError when unreadable, FormatError on bad magic/version/size/bytes.
LetterStream load_corpus_cache(const std::filesystem::path& path);
bool is_corpus_cache(const std::filesystem::path& path);

// Loads a cache file directly, or preprocesses a text file.
LetterStream load_corpus(const std::filesystem::path& path);

// Contiguous window of `length` letters starting at a uniform offset inside
// the chosen split. Throws std::invalid_argument if the split is too short.
Message sample_message(const LetterStream& stream, std::size_t length, Split split, Rng& rng);
// Same, but also reports the absolute start offset of the window.
Message sample_message(const LetterStream& stream, std::size_t length, Split split, Rng& rng,
                       std::size_t& start_offset);

Message sample_uniform_message(std::size_t length, Rng& rng);

struct FrequencyOrder {
  // Most frequent first; ties (including zero counts) broken alphabetically.
  std::array<Letter, kAlphabetSize> ranking;
  std::array<std::uint64_t, kAlphabetSize> counts{};
};

FrequencyOrder letter_frequency_order(std::span<const Letter> letters);
inline FrequencyOrder letter_frequency_order(const LetterStream& stream) {
  return letter_frequency_order(stream.letters());
}

}  // namespace cipher_icl
