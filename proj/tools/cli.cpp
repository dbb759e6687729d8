#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cipher_icl/checkpoint.hpp"
#include "cipher_icl/corpus.hpp"
#include "cipher_icl/errors.hpp"
#include "cipher_icl/evaluation.hpp"
#include "cipher_icl/training.hpp"

#ifndef CIPHER_ICL_DEFAULT_CORPUS
#define CIPHER_ICL_DEFAULT_CORPUS ""
#endif

namespace cipher_icl::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Usage errors detected after CLI11 parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

fs::path cache_dir() {
  if (const char* env = std::getenv("CIPHER_ICL_CACHE"); env != nullptr && *env != '\0') {
    return env;
  }
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg != nullptr && *xdg != '\0') {
    return fs::path(xdg) / "cipher_icl";
  }
  if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return fs::path(home) / ".cache" / "cipher_icl";
  }
  return fs::path(".cipher_icl_cache");
}

std::string cache_key(const fs::path& text_file) {
  std::error_code ec;
  const auto abs = fs::absolute(text_file, ec).string();
  const auto size = fs::file_size(text_file, ec);
  const auto mtime = fs::last_write_time(text_file, ec).time_since_epoch().count();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(abs);
  mix(std::to_string(size));
  mix(std::to_string(mtime));
  std::ostringstream name;
  name << text_file.stem().string() << '-' << std::hex << std::setw(16) << std::setfill('0') << h
       << ".bin";
  return name.str();
}

// Cache files load directly; text files are preprocessed once and cached
// under $CIPHER_ICL_CACHE (or the per-user cache directory).
LetterStream resolve_corpus(const fs::path& path, std::ostream& err) {
  if (path.empty()) throw UsageError("no corpus given (use --corpus)");
  if (!fs::exists(path)) throw IoError("corpus '" + path.string() + "' does not exist");
  if (is_corpus_cache(path)) return load_corpus_cache(path);
  const fs::path cached = cache_dir() / cache_key(path);
  if (fs::exists(cached)) {
    try {
      return load_corpus_cache(cached);
    } catch (const std::exception& e) {
      err << "warning: ignoring unreadable corpus cache " << cached << ": " << e.what() << '\n';
    }
  }
  LetterStream stream = load_corpus(path);
  try {
    fs::create_directories(cached.parent_path());
    save_corpus_cache(stream, cached);
  } catch (const std::exception& e) {
    err << "warning: could not cache corpus: " << e.what() << '\n';
  }
  return stream;
}

std::string config_echo(const TrainConfig& c) {
  std::ostringstream out;
  out << "config: scheme=" << c.scheme.name() << " key_len=" << c.scheme.key_length_label()
      << " layers=" << c.model.layers << " heads=" << c.model.heads
      << " dim=" << c.model.embed_dim << " context=" << c.model.context_length
      << " params=" << c.model.parameter_count() << " batch=" << c.batch_size
      << " steps=" << c.steps << " lr=" << c.learning_rate << " wd=" << c.weight_decay
      << " seed=" << c.seed << " out=" << c.output_dir.string();
  return out.str();
}

// Flags shared by `train` and `ablate`; each maps onto a config-file key.
struct TrainFlags {
  std::string preset = "desk";
  std::string config_file;
  bool resume = false;
  bool dry_run = false;
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--preset", preset, "Defaults to start from: desk (2 layers, d=64, context "
                                       "128, batch 16, 2000 steps) or paper (12 layers, 8 heads, "
                                       "d=256, batch 64, 20000 steps)")
        ->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--config", config_file, "Config file of 'key = value' lines; flags win")
        ->check(CLI::ExistingFile);
    const std::pair<const char*, std::pair<const char*, const char*>> table[] = {
        {"--scheme", {"scheme", "Cipher scheme: mono | vig | vig_var"}},
        {"--key-len", {"key_len", "Vigenere key length for --scheme vig"}},
        {"--min-key-len", {"min_key_len", "Smallest key length for --scheme vig_var (4)"}},
        {"--max-key-len", {"max_key_len", "Largest key length for --scheme vig_var (32)"}},
        {"--layers", {"layers", "Transformer blocks"}},
        {"--heads", {"heads", "Attention heads per block"}},
        {"--dim", {"dim", "Embedding width"}},
        {"--context", {"context", "Context length in tokens (even, >= 4)"}},
        {"--tied", {"tied", "Tie output head to token embedding: true | false"}},
        {"--batch", {"batch", "Prompts per optimizer step"}},
        {"--steps", {"steps", "Optimizer steps"}},
        {"--lr", {"lr", "AdamW learning rate"}},
        {"--wd", {"wd", "AdamW decoupled weight decay"}},
        {"--seed", {"seed", "Master seed"}},
        {"--log-interval", {"log_interval", "Steps between log records"}},
        {"--checkpoint-interval", {"checkpoint_interval", "Steps between checkpoints (0: end only)"}},
        {"--val-interval", {"val_interval", "Steps between validation losses (0: off)"}},
        {"--val-prompts", {"val_prompts", "Prompts per validation loss"}},
        {"--corpus", {"corpus", "Plain-text corpus or corpus cache file"}},
        {"--out", {"out", "Output directory"}},
        {"--threads", {"threads", "Worker threads (0: all cores)"}},
    };
    for (const auto& [flag, info] : table) {
      keys.emplace_back(flag, info.first);
      app.add_option(flag, values[info.first], info.second);
    }
  }

  TrainConfig build(const CLI::App& app) const {
    TrainConfig c = preset == "paper" ? TrainConfig::paper() : TrainConfig::desk();
    c.corpus_path = CIPHER_ICL_DEFAULT_CORPUS;
    c.output_dir = "runs/train";
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      std::stringstream text;
      text << in.rdbuf();
      c = parse_config_text(text.str(), c);
    }
    for (const auto& [flag, key] : keys) {
      if (app.count(flag) > 0) set_config_value(c, key, values.at(key));
    }
    c.resume = resume;
    c.validate();
    return c;
  }
};

int cmd_prep(const std::vector<std::string>& inputs, const std::string& out_path,
             std::ostream& out) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const LetterStream stream = preprocess_files(paths);
  fs::path target = out_path.empty() ? cache_dir() / "corpus.bin" : fs::path(out_path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  save_corpus_cache(stream, target);
  const FrequencyOrder order = letter_frequency_order(stream);
  out << "letters: " << stream.size() << '\n'
      << "train: " << stream.split_boundary()
      << " validation: " << stream.size() - stream.split_boundary() << '\n'
      << "top5:";
  for (int i = 0; i < 5; ++i) {
    out << ' ' << order.ranking[i].to_char() << '=' << order.counts[order.ranking[i].index()];
  }
  out << "\ncache: " << target.string() << '\n';
  return kExitOk;
}

int cmd_train(const TrainConfig& config, bool dry_run, std::ostream& out, std::ostream& err) {
  out << config_echo(config) << '\n';
  if (dry_run) return kExitOk;
  const LetterStream stream = resolve_corpus(config.corpus_path, err);
  try {
    const TrainResult r = train(config, stream, &out);
    out << "final loss: " << (r.step_losses.empty() ? 0.0 : r.step_losses.back()) << '\n'
        << "checkpoint: " << (config.output_dir / "checkpoint.bin").string() << '\n';
  } catch (const std::exception& e) {
    err << "error: training aborted: " << e.what() << '\n'
        << "a resumable checkpoint was written to "
        << (config.output_dir / "checkpoint.bin").string() << " (rerun with --resume)\n";
    return kExitRuntime;
  }
  return kExitOk;
}

std::pair<AblationAxis, std::vector<int>> parse_grid(const std::string& grid) {
  const auto eq = grid.find('=');
  if (eq == std::string::npos) throw UsageError("grid must look like batch=16,32 or context=128,256");
  const std::string axis = grid.substr(0, eq);
  AblationAxis a;
  if (axis == "batch") {
    a = AblationAxis::kBatch;
  } else if (axis == "context") {
    a = AblationAxis::kContext;
  } else {
    throw UsageError("unknown grid axis '" + axis + "' (expected batch|context)");
  }
  std::vector<int> values;
  std::stringstream list(grid.substr(eq + 1));
  std::string item;
  while (std::getline(list, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      values.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad grid value '" + item + "'");
    }
  }
  if (values.empty()) throw UsageError("grid '" + grid + "' has no values");
  return {a, values};
}

struct EvalFlags {
  std::string checkpoint;
  std::vector<std::string> baselines;
  std::string scheme;
  int key_len = 0;
  int min_key_len = 4;
  int max_key_len = 32;
  std::string candidates = "4-32";
  std::string dist = "corpus";
  std::size_t n_prompts = 100;
  std::size_t max_examples = 64;
  std::uint64_t seed = 0;
  std::string out;
  std::string label = "transformer";
  std::string corpus = CIPHER_ICL_DEFAULT_CORPUS;
  int threads = 0;
};

KeyLengthRange parse_range(const std::string& text) {
  const auto dash = text.find('-');
  try {
    if (dash == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
  } catch (const std::exception&) {
    throw UsageError("bad key-length range '" + text + "'");
  }
}

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  if (f.checkpoint.empty() && f.baselines.empty()) {
    throw UsageError("eval needs --checkpoint and/or --baseline");
  }
  std::vector<DecoderKind> decoders;
  for (const auto& b : f.baselines) {
    try {
      decoders.push_back(parse_baseline(b));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  std::string scheme_name = f.scheme;
  if (scheme_name.empty()) {
    const bool any_vig = std::any_of(decoders.begin(), decoders.end(), [](DecoderKind k) {
      return k == DecoderKind::kVigNaive || k == DecoderKind::kVigFreq ||
             k == DecoderKind::kVigSearch;
    });
    scheme_name = !any_vig ? "mono" : (f.key_len > 0 ? "vig" : "vig_var");
  }
  EvalSetting base;
  try {
    base.scheme = parse_scheme(scheme_name, f.key_len, f.min_key_len, f.max_key_len);
    base.dist = parse_dist(f.dist);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  base.n_prompts = f.n_prompts;
  base.max_examples = f.max_examples;
  base.seed = f.seed;
  base.candidates = parse_range(f.candidates);
  base.model_label = f.label;
  if (base.n_prompts == 0) throw UsageError("--n-prompts must be >= 1");

  std::optional<Checkpoint> ck;
  if (!f.checkpoint.empty()) {
    ck = load_checkpoint(f.checkpoint);
    const auto ctx = static_cast<std::size_t>(ck->params.config().context_length);
    if (2 * f.max_examples + 1 > ctx) {
      throw UsageError("--max-examples " + std::to_string(f.max_examples) +
                       " does not fit the checkpoint context of " + std::to_string(ctx) +
                       " tokens (max " + std::to_string((ctx - 1) / 2) + ")");
    }
  }

  std::optional<LetterStream> stream;
  const bool need_corpus = base.dist == MessageDist::kCorpus ||
                           std::find(decoders.begin(), decoders.end(), DecoderKind::kMonoFreq) !=
                               decoders.end();
  if (need_corpus) stream = resolve_corpus(f.corpus, err);
  std::optional<FrequencyOrder> order;
  if (stream) order = letter_frequency_order(stream->split(Split::kTrain));

  EvalResources res;
  res.stream = stream ? &*stream : nullptr;
  res.order = order ? &*order : nullptr;
  res.model = ck ? &ck->params : nullptr;
  res.threads = f.threads > 0 ? f.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  CurveSet curves;
  auto run = [&](DecoderKind kind) {
    EvalSetting s = base;
    s.decoder = kind;
    try {
      curves.emplace_back(s, accuracy_curve(s, res));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  };
  if (ck) run(DecoderKind::kModel);
  for (DecoderKind k : decoders) run(k);

  if (f.out.empty() || f.out == "-") {
    out << format_curves_csv(curves);
  } else {
    const fs::path p(f.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_curves_csv(curves, p);
    out << "wrote " << curves.size() << " curve(s) to " << p.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"In-context cipher learning: corpus prep, training, evaluation, ablations",
               "cipher_icl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cipher_icl 0.1.0");

  std::vector<std::string> prep_inputs;
  std::string prep_out;
  auto* prep = app.add_subcommand("prep", "Clean text file(s) into a corpus cache");
  prep->add_option("inputs", prep_inputs, "Text files, concatenated in argument order")
      ->required()
      ->check(CLI::ExistingFile);
  prep->add_option("-o,--out", prep_out,
                   "Cache file to write (default: $CIPHER_ICL_CACHE/corpus.bin)");

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a transformer from scratch");
  train_flags.attach(*train_cmd);
  train_cmd->add_flag("--resume", train_flags.resume,
                      "Continue from <out>/checkpoint.bin if present");
  train_cmd->add_flag("--dry-run", train_flags.dry_run, "Print the resolved config and exit");

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy vs in-context examples, as CSV");
  eval_cmd->add_option("--checkpoint", ef.checkpoint, "Model checkpoint to evaluate");
  eval_cmd->add_option("--baseline", ef.baselines,
                       "Baseline decoder (repeatable): mono_naive | mono_freq | vig_naive | "
                       "vig_freq | vig_search");
  eval_cmd->add_option("--scheme", ef.scheme,
                       "mono | vig | vig_var (default: mono, or vig/vig_var for vig baselines)");
  eval_cmd->add_option("--key-len", ef.key_len, "Key length for --scheme vig");
  eval_cmd->add_option("--min-key-len", ef.min_key_len, "Smallest key length for vig_var");
  eval_cmd->add_option("--max-key-len", ef.max_key_len, "Largest key length for vig_var");
  eval_cmd->add_option("--candidates", ef.candidates,
                       "Key-length candidates for vig_search, as lo-hi")
      ->capture_default_str();
  eval_cmd->add_option("--dist", ef.dist, "Message distribution: corpus | uniform")
      ->capture_default_str();
  eval_cmd->add_option("--n-prompts", ef.n_prompts, "Prompts per curve")->capture_default_str();
  eval_cmd->add_option("--max-examples", ef.max_examples, "Largest number of in-context examples")
      ->capture_default_str();
  eval_cmd->add_option("--seed", ef.seed, "Evaluation seed")->capture_default_str();
  eval_cmd->add_option("--out", ef.out, "CSV output path (default: stdout)");
  eval_cmd->add_option("--label", ef.label, "Decoder column for the checkpoint curve")
      ->capture_default_str();
  eval_cmd->add_option("--corpus", ef.corpus, "Plain-text corpus or corpus cache file");
  eval_cmd->add_option("--threads", ef.threads, "Worker threads (0: all cores)");

  TrainFlags ablate_flags;
  std::string grid;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train once per grid value");
  ablate_flags.attach(*ablate_cmd);
  ablate_cmd->add_option("--grid", grid, "batch=16,32,64,96 or context=128,256,512,2048")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prep) return cmd_prep(prep_inputs, prep_out, out);
    if (*train_cmd) {
      TrainConfig config;
      try {
        config = train_flags.build(*train_cmd);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      return cmd_train(config, train_flags.dry_run, out, err);
    }
    if (*eval_cmd) return cmd_eval(ef, out, err);
    if (*ablate_cmd) {
      const auto [axis, values] = parse_grid(grid);
      TrainConfig base;
      try {
        base = ablate_flags.build(*ablate_cmd);
        if (ablate_cmd->count("--out") == 0) base.output_dir = "runs/ablation";
        for (int v : values) {
          TrainConfig probe = base;
          (axis == AblationAxis::kBatch ? probe.batch_size : probe.model.context_length) = v;
          probe.validate();
        }
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      out << config_echo(base) << '\n';
      const LetterStream stream = resolve_corpus(base.corpus_path, err);
      const auto runs = run_ablation({base, axis, values, base.output_dir}, stream, &out);
      std::ofstream summary(base.output_dir / "ablation.txt", std::ios::trunc);
      int failures = 0;
      for (const auto& r : runs) {
        const std::string line = r.name + (r.ok ? " ok" : " FAILED: " + r.error);
        summary << line << '\n';
        out << line << '\n';
        failures += r.ok ? 0 : 1;
      }
      return failures == 0 ? kExitOk : kExitRuntime;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace cipher_icl::cli
