#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "cipher_icl/corpus.hpp"

namespace cipher_icl::testing {

// Bundled English corpus, cleaned once per process.
inline const LetterStream& english() {
  static const LetterStream stream = load_corpus(CIPHER_ICL_TEST_CORPUS);
  return stream;
}

inline std::filesystem::path corpus_path() { return CIPHER_ICL_TEST_CORPUS; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cipher_icl_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cipher_icl::testing
