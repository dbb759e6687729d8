#include "cipher_icl/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>

#include "cipher_icl/errors.hpp"

namespace cipher_icl {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return data;
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 8;

}  // namespace

LetterStream::LetterStream(Message letters, std::size_t split_boundary, std::string source)
    : letters_(std::move(letters)), split_boundary_(split_boundary), source_(std::move(source)) {
  if (split_boundary_ > letters_.size()) {
    throw std::invalid_argument("split boundary beyond end of stream");
  }
}

LetterStream LetterStream::with_default_split(Message letters, std::string source) {
  const auto held_out =
      static_cast<std::size_t>(static_cast<double>(letters.size()) * kValidationFraction);
  const std::size_t boundary = letters.size() - held_out;
  return LetterStream(std::move(letters), boundary, std::move(source));
}

std::span<const Letter> LetterStream::split(Split which) const noexcept {
  std::span<const Letter> all(letters_);
  return which == Split::kTrain ? all.first(split_boundary_) : all.subspan(split_boundary_);
}

Message clean_text(std::string_view raw) {
  Message out;
  out.reserve(raw.size());
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 'a' && c <= 'z') {
      out.push_back(Letter::unchecked(static_cast<std::uint8_t>(c - 'a')));
    } else if (c >= 'A' && c <= 'Z') {
      out.push_back(Letter::unchecked(static_cast<std::uint8_t>(c - 'A')));
    }
  }
  return out;
}

LetterStream preprocess_text(std::string_view raw, std::string source) {
  return LetterStream::with_default_split(clean_text(raw), std::move(source));
}

LetterStream preprocess_files(std::span<const std::filesystem::path> paths) {
  Message all;
  std::string source;
  for (const auto& p : paths) {
    Message part = clean_text(read_file(p));
    all.insert(all.end(), part.begin(), part.end());
    if (!source.empty()) source += ';';
    source += p.string();
  }
  return LetterStream::with_default_split(std::move(all), std::move(source));
}

void save_corpus_cache(const LetterStream& stream, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(kHeaderSize + stream.size());
  buf.append(kCorpusMagic);
  put_le<std::uint32_t>(buf, kCorpusVersion);
  put_le<std::uint64_t>(buf, stream.size());
  put_le<std::uint64_t>(buf, stream.split_boundary());
  for (Letter l : stream.letters()) buf.push_back(static_cast<char>(l.index()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

LetterStream load_corpus_cache(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < kHeaderSize || std::string_view(data).substr(0, 8) != kCorpusMagic) {
    throw FormatError("'" + path.string() + "' is not a corpus cache (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(data, 8);
  if (version != kCorpusVersion) {
    throw FormatError("unsupported corpus cache version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(data, 12);
  const auto boundary = get_le<std::uint64_t>(data, 20);
  if (data.size() - kHeaderSize != count) {
    throw FormatError("corpus cache letter count does not match payload size");
  }
  if (boundary > count) throw FormatError("corpus cache split boundary beyond end");
  Message letters(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto b = static_cast<unsigned char>(data[kHeaderSize + i]);
    if (b >= kAlphabetSize) throw FormatError("corpus cache holds a non-letter byte");
    letters[i] = Letter::unchecked(b);
  }
  return LetterStream(std::move(letters), boundary, path.string());
}

bool is_corpus_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  return in.gcount() == 8 && std::string_view(magic, 8) == kCorpusMagic;
}

LetterStream load_corpus(const std::filesystem::path& path) {
  if (is_corpus_cache(path)) return load_corpus_cache(path);
  const std::filesystem::path one[] = {path};
  return preprocess_files(one);
}

Message sample_message(const LetterStream& stream, std::size_t length, Split split, Rng& rng,
                       std::size_t& start_offset) {
  const auto region = stream.split(split);
  if (length > region.size()) {
    throw std::invalid_argument("message length " + std::to_string(length) +
                                " exceeds split size " + std::to_string(region.size()));
  }
  std::uniform_int_distribution<std::size_t> start(0, region.size() - length);
  const std::size_t s = start(rng);
  start_offset = s + (split == Split::kTrain ? 0 : stream.split_boundary());
  return Message(region.begin() + static_cast<std::ptrdiff_t>(s),
                 region.begin() + static_cast<std::ptrdiff_t>(s + length));
}

Message sample_message(const LetterStream& stream, std::size_t length, Split split, Rng& rng) {
  std::size_t ignored = 0;
  return sample_message(stream, length, split, rng, ignored);
}

Message sample_uniform_message(std::size_t length, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, kAlphabetSize - 1);
  Message out(length);
  for (Letter& l : out) l = Letter::unchecked(static_cast<std::uint8_t>(pick(rng)));
  return out;
}

FrequencyOrder letter_frequency_order(std::span<const Letter> letters) {
  FrequencyOrder order;
  for (Letter l : letters) ++order.counts[l.index()];
  std::array<int, kAlphabetSize> idx;
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return order.counts[a] > order.counts[b]; });
  for (int i = 0; i < kAlphabetSize; ++i) {
    order.ranking[i] = Letter::unchecked(static_cast<std::uint8_t>(idx[i]));
  }
  return order;
}

}  // namespace cipher_icl
