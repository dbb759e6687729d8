#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cipher_icl/checkpoint.hpp"
#include "cipher_icl/corpus.hpp"
#include "cipher_icl/model.hpp"
#include "cipher_icl/optimizer.hpp"
#include "cipher_icl/prompting.hpp"

namespace cipher_icl {

struct TrainConfig {
  SchemeConfig scheme = SchemeConfig::mono();
  ModelConfig model = ModelConfig::desk();
  int batch_size = 16;
  int steps = 2000;
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  std::uint64_t seed = 0;
  int log_interval = 10;
  // 0 disables periodic checkpoints; the final one is always written.
  int checkpoint_interval = 0;
  // 0 disables validation.
  int validation_interval = 0;
  int validation_prompts = 64;
  std::filesystem::path corpus_path;
  // Empty: keep everything in memory.
  std::filesystem::path output_dir;
  // 0: std::thread::hardware_concurrency().
  int threads = 0;
  bool resume = false;

  // Batch 64, 20k steps, lr 1e-3, wd 0.1 on the full-size model.
  static TrainConfig paper();
  // Batch 16, 2k steps on the desk-sized model (2 layers, d = 64, context 128).
  static TrainConfig desk();

  int context_length() const noexcept { return model.context_length; }
  std::size_t message_length() const noexcept {
    return message_length_for_context(static_cast<std::size_t>(model.context_length));
  }
  // Throws std::invalid_argument on batch < 1, steps < 1, odd or < 4
  // context, negative intervals, or an invalid scheme/model.
  void validate() const;
};

// Config files hold one "key = value" per line; '#' starts a comment.
// Keys: scheme, key_len, min_key_len, max_key_len, layers, heads, dim,
// context, tied, batch, steps, lr, wd, seed, log_interval,
// checkpoint_interval, val_interval, val_prompts, corpus, out, threads.
// Throws std::invalid_argument on unknown keys or unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
TrainConfig parse_config_text(const std::string& text, TrainConfig base);
std::string format_config(const TrainConfig& config);

struct TrainLogRecord {
  int step = 0;
  double loss = 0.0;
  std::optional<double> val_loss;
  double ms = 0.0;

  // "step=<int> loss=<float> val_loss=<float|-> ms=<float>"
  std::string to_line() const;
  // Throws std::invalid_argument on a malformed line.
  static TrainLogRecord parse(const std::string& line);
};

struct TrainResult {
  ModelParams<float> params;
  AdamWState<float> optimizer;
  std::vector<TrainLogRecord> log;
  // Batch loss of every step executed in this call.
  std::vector<double> step_losses;
};

// Prompts of one optimizer step; prompt i of step s is drawn from its own
// counter-derived substream, independent of assembly order.
std::vector<Prompt> sample_training_batch(const TrainConfig& config, const LetterStream& stream,
                                          std::uint64_t step);

// Fresh prompts every step, one AdamW update per step, constant learning
// rate. With an output_dir, writes train.log, config.txt and checkpoint.bin
// (also on abort, so the run can resume). Throws NonFiniteLossError if a
// batch loss is not finite.
TrainResult train(const TrainConfig& config, const LetterStream& stream,
                  std::ostream* progress = nullptr);

// Mean masked loss over n_prompts validation-split prompts with fresh keys.
double validation_loss(const ModelParams<float>& params, const SchemeConfig& scheme,
                       const LetterStream& stream, std::size_t n_prompts, Rng& rng);

enum class AblationAxis { kBatch, kContext };

struct AblationSpec {
  TrainConfig base;
  AblationAxis axis = AblationAxis::kBatch;
  std::vector<int> values;
  std::filesystem::path root;
};

struct AblationRun {
  std::string name;  // "batch_16", "context_512", ...
  TrainConfig config;
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
  std::vector<TrainLogRecord> log;
};

// Runs train() per grid value into root/<name>/. A failing run is recorded
// and the remaining runs continue. Throws std::invalid_argument on an empty
// grid.
std::vector<AblationRun> run_ablation(const AblationSpec& spec, const LetterStream& stream,
                                      std::ostream* progress = nullptr);

std::string axis_name(AblationAxis axis);

}  // namespace cipher_icl
