#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cipher_icl/baselines.hpp"
#include "cipher_icl/corpus.hpp"
#include "cipher_icl/model.hpp"
#include "cipher_icl/prompting.hpp"

namespace cipher_icl {

enum class MessageDist { kCorpus, kUniform };

enum class DecoderKind { kModel, kMonoNaive, kMonoFreq, kVigNaive, kVigFreq, kVigSearch };

std::string dist_name(MessageDist dist);
MessageDist parse_dist(const std::string& name);
// Baseline names: mono_naive, mono_freq, vig_naive, vig_freq, vig_search.
std::string decoder_name(DecoderKind kind);
DecoderKind parse_baseline(const std::string& name);

struct EvalSetting {
  SchemeConfig scheme = SchemeConfig::mono();
  MessageDist dist = MessageDist::kCorpus;
  DecoderKind decoder = DecoderKind::kMonoNaive;
  // CSV decoder column for model decoders.
  std::string model_label = "transformer";
  std::size_t n_prompts = 100;
  // Curve covers j = 0..max_examples in-context examples.
  std::size_t max_examples = 64;
  std::uint64_t seed = 0;
  KeyLengthRange candidates{};

  std::string decoder_id() const;
};

struct EvalPoint {
  std::size_t examples = 0;
  std::uint64_t n = 0;
  std::uint64_t correct = 0;
  // Non-abstaining predictions and how many of them were right.
  std::uint64_t emitted = 0;
  std::uint64_t emitted_correct = 0;

  double accuracy() const noexcept;
  // sqrt(acc * (1 - acc) / n)
  double standard_error() const noexcept;
};

struct EvalCurve {
  std::vector<EvalPoint> points;  // index j == examples
};

struct EvalResources {
  const LetterStream* stream = nullptr;    // required for corpus messages
  const FrequencyOrder* order = nullptr;   // required for mono_freq
  const ModelParams<float>* model = nullptr;  // required for model decoders
  int threads = 1;
};

// Prompt `index` of an evaluation run: key and message drawn from the
// evaluation substream of `setting.seed`, message length max_examples + 1,
// corpus messages taken from the validation split.
Prompt sample_eval_prompt(const EvalSetting& setting, const LetterStream* stream,
                          std::size_t index);

// Argmax over the final row's logits, lowest index on ties. Throws
// std::invalid_argument if the prefix exceeds the model context.
Letter model_predict(const ModelParams<float>& params, std::span<const Token> prefix);

// Scores the decoder at every j in 0..max_examples over n_prompts prompts.
// Model decoders score all prefixes of a prompt with one forward pass.
// Throws std::invalid_argument on missing resources, decoder/scheme
// mismatch, or a model context too short for max_examples.
EvalCurve accuracy_curve(const EvalSetting& setting, const EvalResources& resources);

using CurveSet = std::vector<std::pair<EvalSetting, EvalCurve>>;

inline constexpr std::string_view kCurvesCsvHeader =
    "scheme,key_len,message_dist,decoder,examples,accuracy,n,stderr";

// Rows ordered by (scheme, key_len, message_dist, decoder) then examples.
std::string format_curves_csv(const CurveSet& curves);
// Throws std::invalid_argument on an empty set, IoError on write failure.
void write_curves_csv(const CurveSet& curves, const std::filesystem::path& path);

}  // namespace cipher_icl
