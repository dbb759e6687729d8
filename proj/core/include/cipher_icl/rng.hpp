#pragma once

#include <cstdint>
#include <random>

namespace cipher_icl {

using Rng = std::mt19937_64;

// Streams are separated by a domain tag so that training, validation and
// evaluation never draw from the same substream for equal seeds.
enum class StreamDomain : std::uint64_t {
  kTraining = 0x7472'6169'6e00'0001ULL,
  kValidation = 0x7661'6c69'6400'0002ULL,
  kEvaluation = 0x6576'616c'0000'0003ULL,
  kInit = 0x696e'6974'0000'0004ULL,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Counter-derived seed: deterministic in (master, domain, a, b) and
// insensitive to the order in which substreams are requested.
std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                          std::uint64_t a = 0, std::uint64_t b = 0) noexcept;

Rng substream(std::uint64_t master, StreamDomain domain, std::uint64_t a = 0,
              std::uint64_t b = 0);

}  // namespace cipher_icl
