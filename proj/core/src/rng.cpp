#include "cipher_icl/rng.hpp"

namespace cipher_icl {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                          std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t h = splitmix64(master ^ static_cast<std::uint64_t>(domain));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return h;
}

Rng substream(std::uint64_t master, StreamDomain domain, std::uint64_t a,
              std::uint64_t b) {
  const std::uint64_t seed = derive_seed(master, domain, a, b);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace cipher_icl
