#include "cipher_icl/training.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cipher_icl/errors.hpp"

namespace cipher_icl {

namespace {

// Gradients are accumulated in this many fixed slots (item i -> slot
// i % kGradSlots) and summed in slot order, so results do not depend on the
// thread count.
constexpr std::size_t kGradSlots = 8;

template <typename Num>
Num parse_number(const std::string& key, const std::string& value) {
  Num out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::from_chars_result res{};
  if constexpr (std::is_floating_point_v<Num>) {
    // from_chars for double is unavailable in older libstdc++ builds.
    char* end = nullptr;
    out = static_cast<Num>(std::strtod(first, &end));
    res.ptr = end;
    res.ec = (end == first) ? std::errc::invalid_argument : std::errc{};
  } else {
    res = std::from_chars(first, last, out);
  }
  if (res.ec != std::errc{} || res.ptr != last || value.empty()) {
    throw std::invalid_argument("invalid value '" + value + "' for '" + key + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs job(slot) for slot in [0, slots) across up to `threads` workers.
template <typename Job>
void run_slots(std::size_t slots, unsigned threads, Job&& job) {
  const std::size_t workers = std::min<std::size_t>(threads, slots);
  if (workers <= 1) {
    for (std::size_t s = 0; s < slots; ++s) job(s);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = w; s < slots; s += workers) job(s);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_checkpoint(const TrainConfig& config, const ModelParams<float>& params,
                      const AdamWState<float>& state) {
  if (config.output_dir.empty()) return;
  save_checkpoint(config.output_dir / "checkpoint.bin", params, &state);
}

}  // namespace

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.model = ModelConfig::paper();
  c.batch_size = 64;
  c.steps = 20000;
  c.learning_rate = 1e-3;
  c.weight_decay = 0.1;
  c.log_interval = 50;
  c.checkpoint_interval = 1000;
  c.validation_interval = 500;
  return c;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.model = ModelConfig::desk();
  c.batch_size = 16;
  c.steps = 2000;
  c.learning_rate = 1e-3;
  c.weight_decay = 0.1;
  c.log_interval = 10;
  c.checkpoint_interval = 500;
  c.validation_interval = 200;
  return c;
}

void TrainConfig::validate() const {
  scheme.validate();
  model.validate();
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (model.context_length < 4 || model.context_length % 2 != 0) {
    throw std::invalid_argument("context length must be even and >= 4");
  }
  if (log_interval < 1) throw std::invalid_argument("log interval must be >= 1");
  if (checkpoint_interval < 0 || validation_interval < 0) {
    throw std::invalid_argument("intervals must be >= 0");
  }
  if (validation_interval > 0 && validation_prompts < 1) {
    throw std::invalid_argument("validation prompts must be >= 1");
  }
  if (learning_rate < 0 || weight_decay < 0) {
    throw std::invalid_argument("learning rate and weight decay must be >= 0");
  }
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
}

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  auto as_int = [&] { return parse_number<int>(key, value); };
  if (key == "scheme") {
    const SchemeConfig parsed = parse_scheme(value, 1);
    c.scheme.scheme = parsed.scheme;
  } else if (key == "key_len") {
    c.scheme.key_length = as_int();
  } else if (key == "min_key_len") {
    c.scheme.min_key_length = as_int();
  } else if (key == "max_key_len") {
    c.scheme.max_key_length = as_int();
  } else if (key == "layers") {
    c.model.layers = as_int();
  } else if (key == "heads") {
    c.model.heads = as_int();
  } else if (key == "dim") {
    c.model.embed_dim = as_int();
  } else if (key == "context") {
    c.model.context_length = as_int();
  } else if (key == "tied") {
    if (value != "true" && value != "false") {
      throw std::invalid_argument("invalid value '" + value + "' for 'tied'");
    }
    c.model.tied_embeddings = value == "true";
  } else if (key == "batch") {
    c.batch_size = as_int();
  } else if (key == "steps") {
    c.steps = as_int();
  } else if (key == "lr") {
    c.learning_rate = parse_number<double>(key, value);
  } else if (key == "wd") {
    c.weight_decay = parse_number<double>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "log_interval") {
    c.log_interval = as_int();
  } else if (key == "checkpoint_interval") {
    c.checkpoint_interval = as_int();
  } else if (key == "val_interval") {
    c.validation_interval = as_int();
  } else if (key == "val_prompts") {
    c.validation_prompts = as_int();
  } else if (key == "corpus") {
    c.corpus_path = value;
  } else if (key == "out") {
    c.output_dir = value;
  } else if (key == "threads") {
    c.threads = as_int();
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "scheme = " << c.scheme.name() << '\n'
      << "key_len = " << c.scheme.key_length << '\n'
      << "min_key_len = " << c.scheme.min_key_length << '\n'
      << "max_key_len = " << c.scheme.max_key_length << '\n'
      << "layers = " << c.model.layers << '\n'
      << "heads = " << c.model.heads << '\n'
      << "dim = " << c.model.embed_dim << '\n'
      << "context = " << c.model.context_length << '\n'
      << "tied = " << (c.model.tied_embeddings ? "true" : "false") << '\n'
      << "batch = " << c.batch_size << '\n'
      << "steps = " << c.steps << '\n'
      << "lr = " << format_general(c.learning_rate) << '\n'
      << "wd = " << format_general(c.weight_decay) << '\n'
      << "seed = " << c.seed << '\n'
      << "log_interval = " << c.log_interval << '\n'
      << "checkpoint_interval = " << c.checkpoint_interval << '\n'
      << "val_interval = " << c.validation_interval << '\n'
      << "val_prompts = " << c.validation_prompts << '\n'
      << "corpus = " << c.corpus_path.string() << '\n'
      << "out = " << c.output_dir.string() << '\n'
      << "threads = " << c.threads << '\n';
  return out.str();
}

std::string TrainLogRecord::to_line() const {
  std::string line = "step=" + std::to_string(step) + " loss=" + format_double(loss) +
                     " val_loss=" + (val_loss ? format_double(*val_loss) : std::string("-")) +
                     " ms=" + format_double(ms);
  return line;
}

TrainLogRecord TrainLogRecord::parse(const std::string& line) {
  std::istringstream in(line);
  std::string field;
  TrainLogRecord rec;
  const char* expected[] = {"step", "loss", "val_loss", "ms"};
  int i = 0;
  while (in >> field) {
    if (i >= 4) throw std::invalid_argument("trailing fields in log line");
    const auto eq = field.find('=');
    if (eq == std::string::npos || field.substr(0, eq) != expected[i]) {
      throw std::invalid_argument("malformed log line: '" + line + "'");
    }
    const std::string value = field.substr(eq + 1);
    switch (i) {
      case 0:
        rec.step = parse_number<int>("step", value);
        break;
      case 1:
        rec.loss = parse_number<double>("loss", value);
        break;
      case 2:
        if (value != "-") rec.val_loss = parse_number<double>("val_loss", value);
        break;
      case 3:
        rec.ms = parse_number<double>("ms", value);
        break;
    }
    ++i;
  }
  if (i != 4) throw std::invalid_argument("malformed log line: '" + line + "'");
  return rec;
}

std::vector<Prompt> sample_training_batch(const TrainConfig& config, const LetterStream& stream,
                                          std::uint64_t step) {
  std::vector<Prompt> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (int i = 0; i < config.batch_size; ++i) {
    Rng rng = substream(config.seed, StreamDomain::kTraining, step, static_cast<std::uint64_t>(i));
    batch.push_back(sample_training_prompt(config.scheme, stream, config.message_length(),
                                           Split::kTrain, rng));
  }
  return batch;
}

double validation_loss(const ModelParams<float>& params, const SchemeConfig& scheme,
                       const LetterStream& stream, std::size_t n_prompts, Rng& rng) {
  if (n_prompts == 0) throw std::invalid_argument("validation needs at least one prompt");
  const std::size_t len =
      message_length_for_context(static_cast<std::size_t>(params.config().context_length));
  Workspace<float> ws;
  double total = 0.0;
  for (std::size_t i = 0; i < n_prompts; ++i) {
    const Prompt p = sample_training_prompt(scheme, stream, len, Split::kValidation, rng);
    const TrainingItem item = build_training_item(p);
    const auto logits = forward(params, item.tokens, ws);
    total += masked_loss<float>(logits, item.targets, item.loss_mask);
  }
  return total / static_cast<double>(n_prompts);
}

TrainResult train(const TrainConfig& config, const LetterStream& stream, std::ostream* progress) {
  config.validate();
  if (stream.split(Split::kTrain).size() < config.message_length()) {
    throw std::invalid_argument("training split shorter than one message");
  }
  if (config.validation_interval > 0 &&
      stream.split(Split::kValidation).size() < config.message_length()) {
    throw std::invalid_argument("validation split shorter than one message");
  }

  const AdamWHyperparams hyper{config.learning_rate, config.weight_decay, 0.9, 0.999, 1e-8};
  TrainResult result;
  std::uint64_t start_step = 0;
  const bool use_files = !config.output_dir.empty();
  const auto ckpt_path = config.output_dir / "checkpoint.bin";
  if (use_files) std::filesystem::create_directories(config.output_dir);

  if (config.resume && use_files && std::filesystem::exists(ckpt_path)) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    if (!(ck.params.config() == config.model)) {
      throw std::invalid_argument("checkpoint model config differs from the requested one");
    }
    if (!ck.optimizer) throw std::invalid_argument("checkpoint has no optimizer state to resume");
    result.params = std::move(ck.params);
    result.optimizer = std::move(*ck.optimizer);
    result.optimizer.hyper = hyper;
    start_step = result.optimizer.step;
  } else {
    Rng init_rng = substream(config.seed, StreamDomain::kInit);
    result.params = init_params<float>(config.model, init_rng);
    result.optimizer = AdamWState<float>(result.params.size(), hyper);
  }

  std::ofstream log_file;
  if (use_files) {
    std::ofstream(config.output_dir / "config.txt", std::ios::trunc) << format_config(config);
    log_file.open(config.output_dir / "train.log",
                  start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!log_file) throw IoError("cannot open training log in " + config.output_dir.string());
  }

  const auto mask = decay_mask(result.params.layout());
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t slots = std::min(batch, kGradSlots);
  const unsigned threads = resolve_threads(config.threads);
  std::vector<std::vector<float>> slot_grads(slots, std::vector<float>(result.params.size()));
  std::vector<Workspace<float>> workspaces(slots);
  std::vector<double> item_losses(batch);
  const float scale = 1.0f / static_cast<float>(batch);

  for (std::uint64_t step = start_step + 1; step <= static_cast<std::uint64_t>(config.steps);
       ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss = 0.0;
    try {
      const std::vector<Prompt> prompts = sample_training_batch(config, stream, step);
      std::vector<TrainingItem> items;
      items.reserve(batch);
      for (const auto& p : prompts) items.push_back(build_training_item(p));

      run_slots(slots, threads, [&](std::size_t s) {
        auto& g = slot_grads[s];
        std::fill(g.begin(), g.end(), 0.0f);
        for (std::size_t i = s; i < batch; i += slots) {
          item_losses[i] = accumulate_gradients<float>(result.params, items[i].tokens,
                                                       items[i].targets, items[i].loss_mask,
                                                       workspaces[s], g, scale);
        }
      });
      for (std::size_t s = 1; s < slots; ++s) {
        auto& dst = slot_grads[0];
        const auto& src = slot_grads[s];
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
      for (double l : item_losses) loss += l;
      loss /= static_cast<double>(batch);
      if (!std::isfinite(loss)) {
        throw NonFiniteLossError("non-finite training loss at step " + std::to_string(step) +
                                 "; last good state saved for inspection");
      }
      adamw_step<float>(result.params.data(), slot_grads[0], mask, result.optimizer);
    } catch (...) {
      write_checkpoint(config, result.params, result.optimizer);
      throw;
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.step_losses.push_back(loss);

    const int s = static_cast<int>(step);
    std::optional<double> val;
    if (config.validation_interval > 0 &&
        (s % config.validation_interval == 0 || s == config.steps)) {
      Rng vrng = substream(config.seed, StreamDomain::kValidation, step);
      val = validation_loss(result.params, config.scheme, stream,
                            static_cast<std::size_t>(config.validation_prompts), vrng);
    }
    if (s % config.log_interval == 0 || s == config.steps || val) {
      TrainLogRecord rec{s, loss, val, ms};
      result.log.push_back(rec);
      if (log_file) log_file << rec.to_line() << '\n' << std::flush;
      if (progress) *progress << rec.to_line() << '\n' << std::flush;
    }
    if (config.checkpoint_interval > 0 && s % config.checkpoint_interval == 0 && s != config.steps) {
      write_checkpoint(config, result.params, result.optimizer);
    }
  }
  write_checkpoint(config, result.params, result.optimizer);
  return result;
}

std::string axis_name(AblationAxis axis) {
  return axis == AblationAxis::kBatch ? "batch" : "context";
}

std::vector<AblationRun> run_ablation(const AblationSpec& spec, const LetterStream& stream,
                                      std::ostream* progress) {
  if (spec.values.empty()) throw std::invalid_argument("ablation grid is empty");
  std::vector<AblationRun> runs;
  for (int value : spec.values) {
    AblationRun run;
    run.name = axis_name(spec.axis) + "_" + std::to_string(value);
    run.config = spec.base;
    if (spec.axis == AblationAxis::kBatch) {
      run.config.batch_size = value;
    } else {
      run.config.model.context_length = value;
    }
    run.dir = spec.root.empty() ? std::filesystem::path() : spec.root / run.name;
    run.config.output_dir = run.dir;
    if (progress) *progress << "== " << run.name << '\n';
    try {
      TrainResult r = train(run.config, stream, progress);
      run.log = std::move(r.log);
      run.ok = true;
    } catch (const std::exception& e) {
      run.error = e.what();
      if (progress) *progress << "run " << run.name << " failed: " << run.error << '\n';
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace cipher_icl
