// Acceptance checks. Usage: acceptance [criterion...]; no argument runs all.
// Prints one PASS/FAIL line per criterion; exit status 1 if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cipher_icl/baselines.hpp"
#include "cipher_icl/evaluation.hpp"
#include "cipher_icl/model.hpp"
#include "cipher_icl/prompting.hpp"
#include "cipher_icl/rng.hpp"
#include "cipher_icl/training.hpp"
#include "cli.hpp"
#include "support.hpp"

using namespace cipher_icl;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr int kRoundTrips = 10000;
constexpr double kRoundTripSeconds = 5.0;
constexpr int kSoundnessPrompts = 1000;
constexpr std::size_t kSoundnessExamples = 64;
constexpr std::size_t kSaturationPrompts = 500;
constexpr std::size_t kSaturationExamples = 64;
constexpr double kSaturationSeconds = 60.0;
constexpr std::size_t kDominancePrompts = 2000;
constexpr std::size_t kDominanceExamples = 64;
constexpr std::size_t kGradCoordinates = 240;
constexpr double kGradStep = 1e-5;
constexpr double kGradMaxRelError = 1e-4;
constexpr double kGradSeconds = 120.0;
// denominator floor; key-bias gradients are exactly zero and leave ~1e-11 noise
constexpr double kGradFloor = 1e-6;
constexpr int kInitPrompts = 100;
constexpr double kInitTolerance = 0.15;
constexpr double kDeskMinutes = 30.0;
constexpr double kDeskFinalLoss = 2.0;
constexpr std::size_t kDeskEvalExamples = 60;
constexpr std::size_t kDeskEvalPrompts = 500;
constexpr double kDeskAccuracy = 3.0 / 26.0;  // 3x chance, 11.5%

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const FrequencyOrder& corpus_order() {
  static const FrequencyOrder order =
      letter_frequency_order(cipher_icl::testing::english().split(Split::kTrain));
  return order;
}

EvalResources baseline_resources() {
  return {&cipher_icl::testing::english(), &corpus_order(), nullptr, 0};
}

Outcome cipher_roundtrip() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::uniform_int_distribution<int> letter(0, 25), len(0, 200), klen(1, kMaxKeyLength);
  int failures = 0;
  for (int scheme = 0; scheme < 2; ++scheme) {
    for (int i = 0; i < kRoundTrips; ++i) {
      Message m(len(rng));
      for (auto& x : m) x = Letter(letter(rng));
      const CipherKey key = scheme == 0 ? CipherKey{sample_mono_key(rng)}
                                        : CipherKey{sample_vigenere_key(rng, klen(rng))};
      const Message c = encrypt(key, m);
      failures += c.size() != m.size() || decrypt(key, c) != m;
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < kRoundTripSeconds,
          std::to_string(2 * kRoundTrips) + " round trips, " + std::to_string(failures) +
              " mismatches, " + fmt("%.2f s", secs)};
}

// Emitted letters checked one by one against the prompt's true plaintext.
Outcome baseline_soundness() {
  const auto& corpus = cipher_icl::testing::english();
  struct Case {
    SchemeConfig scheme;
    std::vector<DecoderKind> decoders;
  };
  const std::vector<Case> cases{
      {SchemeConfig::mono(), {DecoderKind::kMonoNaive}},
      {SchemeConfig::vigenere_fixed(8), {DecoderKind::kVigNaive, DecoderKind::kVigSearch}},
      {SchemeConfig::vigenere_variable(), {DecoderKind::kVigNaive, DecoderKind::kVigSearch}},
  };
  std::uint64_t emitted = 0, wrong = 0;
  for (const auto& c : cases) {
    EvalSetting s;
    s.scheme = c.scheme;
    s.max_examples = kSoundnessExamples;
    s.seed = 11;
    for (int i = 0; i < kSoundnessPrompts; ++i) {
      const Prompt p = sample_eval_prompt(s, &corpus, static_cast<std::size_t>(i));
      const auto pairs = observed_pairs(p.ciphertext, p.plaintext, p.size());
      for (std::size_t j = 0; j < p.size(); ++j) {
        const auto prefix = std::span(pairs).first(j);
        for (DecoderKind d : c.decoders) {
          Prediction pred = Prediction::abstain();
          if (d == DecoderKind::kMonoNaive) {
            pred = mono_naive_predict(prefix, p.ciphertext[j]);
          } else if (d == DecoderKind::kVigNaive) {
            const int len = static_cast<int>(std::get<VigenereKey>(p.key).length());
            pred = vig_known_naive_predict(prefix, p.ciphertext[j], j, len);
          } else {
            pred = vig_search_predict(prefix, p.ciphertext[j], j);
          }
          if (pred.is_abstain()) continue;
          ++emitted;
          wrong += pred.letter() != p.plaintext[j];
        }
      }
    }
  }
  return {wrong == 0 && emitted > 0,
          std::to_string(kSoundnessPrompts) + " prompts per scheme, " + std::to_string(emitted) +
              " emitted letters, " + std::to_string(wrong) + " wrong"};
}

// First j >= from where accuracy is below 1, or -1.
long first_unsaturated(const EvalCurve& c, std::size_t from) {
  for (std::size_t j = from; j < c.points.size(); ++j) {
    if (c.points[j].correct != c.points[j].n) return static_cast<long>(j);
  }
  return -1;
}

Outcome vigenere_saturation() {
  const auto t0 = Clock::now();
  Outcome o;
  bool ok = true;
  for (int len : {4, 8, 32}) {
    for (DecoderKind d : {DecoderKind::kVigNaive, DecoderKind::kVigFreq}) {
      EvalSetting s;
      s.scheme = SchemeConfig::vigenere_fixed(len);
      s.decoder = d;
      s.n_prompts = kSaturationPrompts;
      s.max_examples = kSaturationExamples;
      s.seed = 3;
      const long bad = first_unsaturated(accuracy_curve(s, baseline_resources()), len);
      ok &= bad < 0;
      o.notes.push_back(decoder_name(d) + " l=" + std::to_string(len) + ": " +
                        (bad < 0 ? "1.0 for all j >= l" : "below 1.0 at j=" + std::to_string(bad)));
    }
  }
  EvalSetting s;
  s.scheme = SchemeConfig::vigenere_variable(4, 32);
  s.decoder = DecoderKind::kVigSearch;
  s.n_prompts = kSaturationPrompts;
  s.max_examples = kSaturationExamples;
  s.seed = 3;
  const EvalCurve search = accuracy_curve(s, baseline_resources());
  const long bad32 = first_unsaturated(search, 32);
  ok &= bad32 < 0;
  o.notes.push_back("vig_search [4,32], j >= 32: " +
                    (bad32 < 0 ? std::string("1.0")
                               : "accuracy " + fmt("%.4f", search.points[bad32].accuracy()) +
                                     " at j=" + std::to_string(bad32)));
  const long bad62 = first_unsaturated(search, 62);
  o.notes.push_back(std::string("vig_search [4,32], j >= 62 (supplementary): ") +
                    (bad62 < 0 ? "1.0" : "below 1.0 at j=" + std::to_string(bad62)));
  std::string low;
  for (std::size_t j = 32; j < 62; ++j) {
    if (search.points[j].correct != search.points[j].n) {
      low = "j=" + std::to_string(j) + " acc " + fmt("%.4f", search.points[j].accuracy());
      break;
    }
  }
  const double secs = seconds_since(t0);
  ok &= secs < kSaturationSeconds;
  o.pass = ok;
  o.detail = fmt("%.1f s", secs) + (bad32 < 0 ? "" : ", vig_search not saturated at " + low);
  return o;
}

Outcome dominance() {
  EvalSetting s;
  s.scheme = SchemeConfig::mono();
  s.n_prompts = kDominancePrompts;
  s.max_examples = kDominanceExamples;
  s.seed = 17;
  s.decoder = DecoderKind::kMonoNaive;
  const auto naive = accuracy_curve(s, baseline_resources());
  s.decoder = DecoderKind::kMonoFreq;
  const auto freq = accuracy_curve(s, baseline_resources());
  long violated = -1;
  for (std::size_t j = 0; j < naive.points.size(); ++j) {
    if (freq.points[j].correct < naive.points[j].correct) {
      violated = static_cast<long>(j);
      break;
    }
  }
  return {violated < 0,
          std::to_string(kDominancePrompts) + " shared prompts, j=0.." +
              std::to_string(kDominanceExamples) + (violated < 0 ? ", freq >= naive everywhere"
                                                                 : ", violated at j=" +
                                                                       std::to_string(violated)) +
              fmt(", j=0: freq %.4f", freq.points[0].accuracy()) +
              fmt(" naive %.4f", naive.points[0].accuracy())};
}

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.embed_dim = 32;
  cfg.context_length = 16;
  Rng rng(5);
  auto p = init_params<double>(cfg, rng);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (auto& x : p.data()) x += noise(rng);
  const Prompt prompt = make_prompt(sample_mono_key(rng), sample_uniform_message(8, rng));
  const TrainingItem item = build_training_item(prompt);
  const auto g = backward<double>(p, item.tokens, item.targets, item.loss_mask);
  auto loss_at = [&](const ModelParams<double>& q) {
    return masked_loss<double>(forward(q, std::span<const Token>(item.tokens)), item.targets,
                               item.loss_mask);
  };

  // every tensor gets coordinates; the remainder are drawn across the whole vector
  const auto& layout = p.layout();
  std::vector<std::size_t> coords;
  const std::size_t used_pos = item.tokens.size() * static_cast<std::size_t>(cfg.embed_dim);
  for (const auto& t : layout) {
    const std::size_t span = t.name == "pos_emb" ? used_pos : t.size;
    std::uniform_int_distribution<std::size_t> pick(0, span - 1);
    for (int k = 0; k < 4; ++k) coords.push_back(t.offset + pick(rng));
  }
  std::uniform_int_distribution<std::size_t> any(0, p.size() - 1);
  while (coords.size() < kGradCoordinates) coords.push_back(any(rng));

  std::map<std::string, double> worst_by_kind;
  double worst = 0.0;
  auto q = p;
  for (std::size_t idx : coords) {
    const double orig = q.data()[idx];
    q.data()[idx] = orig + kGradStep;
    const double up = loss_at(q);
    q.data()[idx] = orig - kGradStep;
    const double down = loss_at(q);
    q.data()[idx] = orig;
    const double numeric = (up - down) / (2 * kGradStep);
    const double analytic = g.gradients[idx];
    const double scale = std::max(std::abs(numeric), std::abs(analytic));
    const double rel = std::abs(numeric - analytic) / std::max(scale, kGradFloor);
    worst = std::max(worst, rel);
    for (const auto& t : layout) {
      if (idx >= t.offset && idx < t.offset + t.size) {
        // h3.attn.q.weight -> attn.q.weight
        const bool per_layer = t.name[0] == 'h' && t.name.find('.') != std::string::npos &&
                               t.name.rfind("head", 0) != 0;
        const std::string kind = per_layer ? t.name.substr(t.name.find('.') + 1) : t.name;
        worst_by_kind[kind] = std::max(worst_by_kind[kind], rel);
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < kGradMaxRelError && coords.size() >= 200 && secs < kGradSeconds;
  o.detail = std::to_string(coords.size()) + " coordinates over " +
             std::to_string(worst_by_kind.size()) + " tensor kinds, max rel err " +
             fmt("%.3e", worst) + ", " + fmt("%.1f s", secs);
  return o;
}

Outcome init_loss() {
  Rng init(0);
  const auto p = init_params<float>(ModelConfig::desk(), init);
  const auto& corpus = cipher_icl::testing::english();
  Rng rng(1);
  Workspace<float> ws;
  double total = 0;
  for (int i = 0; i < kInitPrompts; ++i) {
    const Prompt prompt = sample_training_prompt(SchemeConfig::mono(), corpus, 64,
                                                 Split::kValidation, rng);
    const TrainingItem item = build_training_item(prompt);
    total += masked_loss<float>(forward(p, item.tokens, ws), item.targets, item.loss_mask);
  }
  const double mean = total / kInitPrompts;
  const double ln26 = std::log(26.0);
  return {std::abs(mean - ln26) <= kInitTolerance,
          fmt("mean loss %.4f", mean) + fmt(" over 100 prompts, ln 26 = %.4f", ln26)};
}

Outcome desk_learning() {
  const auto& corpus = cipher_icl::testing::english();
  TrainConfig c = TrainConfig::desk();
  c.scheme = SchemeConfig::mono();
  c.log_interval = 100;
  const auto t0 = Clock::now();
  std::ostringstream progress;
  const TrainResult r = train(c, corpus, &progress);
  const double minutes = seconds_since(t0) / 60.0;
  const double final_loss = r.step_losses.back();

  EvalSetting s;
  s.scheme = SchemeConfig::mono();
  s.decoder = DecoderKind::kModel;
  s.n_prompts = kDeskEvalPrompts;
  s.max_examples = kDeskEvalExamples;
  s.seed = 1;
  EvalResources res{&corpus, &corpus_order(), &r.params, 0};
  const auto curve = accuracy_curve(s, res);
  const double acc = curve.points[kDeskEvalExamples].accuracy();
  s.decoder = DecoderKind::kMonoFreq;
  const double freq = accuracy_curve(s, baseline_resources()).points[kDeskEvalExamples].accuracy();

  Outcome o;
  o.pass = minutes < kDeskMinutes && final_loss < kDeskFinalLoss && acc > kDeskAccuracy;
  o.detail = fmt("%.1f min", minutes) + fmt(", final loss %.4f", final_loss) +
             fmt(", accuracy at j=60 %.4f", acc) + fmt(" (mono_freq %.4f)", freq);
  std::istringstream lines(progress.str());
  for (std::string l; std::getline(lines, l);) {
    if (l.rfind("step=", 0) == 0 && (l.find("step=500 ") == 0 || l.find("step=1000 ") == 0 ||
                                     l.find("step=1500 ") == 0 || l.find("step=2000 ") == 0)) {
      o.notes.push_back(l);
    }
  }
  return o;
}

std::pair<int, std::string> cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cipher_icl::cli::run(args, out, err);
  return {code, out.str() + err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string losses_only(const std::filesystem::path& log) {
  std::istringstream in(slurp(log));
  std::string out;
  for (std::string l; std::getline(in, l);) out += l.substr(0, l.find(" ms=")) + "\n";
  return out;
}

Outcome determinism() {
  cipher_icl::testing::TempDir dir("accept_det");
  const std::string corpus = cipher_icl::testing::corpus_path().string();
  bool ok = true;
  std::vector<std::string> notes;
  for (const char* run : {"a", "b"}) {
    const auto base = dir / run;
    const auto t = cli({"train", "--seed", "7", "--steps", "20", "--log-interval", "5",
                        "--layers", "1", "--dim", "32", "--context", "64", "--batch", "8",
                        "--corpus", corpus, "--out", (base / "run").string()});
    ok &= t.first == 0;
    const auto e = cli({"eval", "--checkpoint", (base / "run" / "checkpoint.bin").string(),
                        "--baseline", "mono_naive", "--baseline", "mono_freq", "--seed", "7",
                        "--n-prompts", "50", "--max-examples", "31", "--corpus", corpus,
                        "--out", (base / "curves.csv").string()});
    ok &= e.first == 0;
    const auto v = cli({"eval", "--baseline", "vig_search", "--baseline", "vig_naive",
                        "--baseline", "vig_freq", "--seed", "7", "--dist", "uniform",
                        "--n-prompts", "50", "--max-examples", "40",
                        "--out", (base / "vig.csv").string()});
    ok &= v.first == 0;
  }
  const bool csv_same = slurp(dir / "a" / "curves.csv") == slurp(dir / "b" / "curves.csv") &&
                        slurp(dir / "a" / "vig.csv") == slurp(dir / "b" / "vig.csv") &&
                        !slurp(dir / "a" / "curves.csv").empty();
  const std::string la = losses_only(dir / "a" / "run" / "train.log");
  const bool log_same = la == losses_only(dir / "b" / "run" / "train.log") && !la.empty();
  return {ok && csv_same && log_same,
          std::string("train + eval twice with seed 7: CSV ") +
              (csv_same ? "byte-identical" : "DIFFERS") + ", log losses " +
              (log_same ? "identical" : "DIFFER")};
}

// Long-context plateau and length-mismatch failure need the full preset; here we
// only check that the documented recipe is accepted and documented.
Outcome not_desk_reproducible() {
  const auto a = cli({"train", "--preset", "paper", "--scheme", "vig_var", "--context", "3072",
                      "--dry-run"});
  const auto b = cli({"train", "--preset", "paper", "--scheme", "vig", "--key-len", "16",
                      "--dry-run"});
  const std::string readme = slurp(CIPHER_ICL_README);
  const bool documented = readme.find("--preset paper") != std::string::npos &&
                          readme.find("3072") != std::string::npos &&
                          readme.find("--key-len 20") != std::string::npos;
  return {a.first == 0 && b.first == 0 && documented,
          "out of scope for CI: variable-length plateau at 1535 examples and length-20 "
          "mismatch; paper-preset recipe " +
              std::string(documented ? "documented in README" : "MISSING from README") +
              " and accepted by the CLI"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"cipher_roundtrip", cipher_roundtrip},
      {"baseline_soundness", baseline_soundness},
      {"vigenere_saturation", vigenere_saturation},
      {"dominance", dominance},
      {"gradient_oracle", gradient_oracle},
      {"init_loss", init_loss},
      {"desk_learning", desk_learning},
      {"determinism", determinism},
      {"not_desk_reproducible", not_desk_reproducible},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what(), {}};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << '\n';
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
    failed += !o.pass;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion\n";
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
