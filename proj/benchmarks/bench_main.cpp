#include <benchmark/benchmark.h>

#include <vector>

#include "cipher_icl/baselines.hpp"
#include "cipher_icl/cipher.hpp"
#include "cipher_icl/model.hpp"
#include "cipher_icl/rng.hpp"

using namespace cipher_icl;

namespace {

Message random_message(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<int> letter(0, kAlphabetSize - 1);
  Message m(n);
  for (auto& x : m) x = Letter(letter(rng));
  return m;
}

// Interleaved sequence filling the context, loss on every plaintext slot.
struct Batch {
  std::vector<Token> tokens, targets;
  std::vector<std::uint8_t> mask;
};

Batch random_batch(Rng& rng, int context) {
  std::uniform_int_distribution<int> letter(0, kAlphabetSize - 1);
  Batch b;
  b.tokens.resize(context);
  for (auto& t : b.tokens) t = letter(rng);
  b.targets.assign(context, kIgnoredTarget);
  b.mask.assign(context, 0);
  for (int t = 0; t + 1 < context; t += 2) {
    b.targets[t] = b.tokens[t + 1];
    b.mask[t] = 1;
  }
  return b;
}

ModelConfig sized(int context) {
  ModelConfig c = ModelConfig::desk();
  c.context_length = context;
  return c;
}

}  // namespace

static void BM_MonoEncrypt(benchmark::State& state) {
  Rng rng(1);
  const MonoKey key = sample_mono_key(rng);
  const Message m = random_message(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mono_encrypt(key, m));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonoEncrypt)->Arg(64)->Arg(1536);

static void BM_VigenereEncrypt(benchmark::State& state) {
  Rng rng(2);
  const VigenereKey key = sample_vigenere_key(rng, 32);
  const Message m = random_message(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(vigenere_encrypt(key, m));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VigenereEncrypt)->Arg(64)->Arg(1536);

// Full sweep over j for one prompt, as evaluation runs it.
static void BM_KeyLengthSearchSweep(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const VigenereKey key = sample_vigenere_key(rng, 20);
  const Message plain = random_message(rng, n);
  const Message cipher = vigenere_encrypt(key, plain);
  for (auto _ : state) {
    KeyLengthSearch search({4, 32});
    for (std::size_t j = 0; j < n; ++j) {
      benchmark::DoNotOptimize(search.predict(cipher[j], j));
      search.observe(j, {cipher[j], plain[j]});
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KeyLengthSearchSweep)->Arg(64)->Arg(256);

static void BM_Forward(benchmark::State& state) {
  Rng rng(4);
  const int context = static_cast<int>(state.range(0));
  const auto params = init_params<float>(sized(context), rng);
  const Batch b = random_batch(rng, context);
  Workspace<float> ws;
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, std::span<const Token>(b.tokens), ws));
  state.SetItemsProcessed(state.iterations() * context);
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

static void BM_ForwardBackward(benchmark::State& state) {
  Rng rng(5);
  const int context = static_cast<int>(state.range(0));
  const auto params = init_params<float>(sized(context), rng);
  const Batch b = random_batch(rng, context);
  Workspace<float> ws;
  std::vector<float> grad(params.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(accumulate_gradients<float>(params, b.tokens, b.targets, b.mask, ws,
                                                         grad, 1.0f));
  }
  state.SetItemsProcessed(state.iterations() * context);
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
