#include "cipher_icl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "cipher_icl/errors.hpp"

namespace cipher_icl {

namespace {

bool is_vigenere(const SchemeConfig& s) { return s.scheme != Scheme::kMono; }

int key_length_of(const CipherKey& key) {
  return static_cast<int>(std::get<VigenereKey>(key).length());
}

void check_setting(const EvalSetting& setting, const EvalResources& res) {
  setting.scheme.validate();
  if (setting.n_prompts == 0) throw std::invalid_argument("n_prompts must be >= 1");
  if (setting.dist == MessageDist::kCorpus && res.stream == nullptr) {
    throw std::invalid_argument("corpus messages requested but no corpus loaded");
  }
  switch (setting.decoder) {
    case DecoderKind::kModel: {
      if (res.model == nullptr) throw std::invalid_argument("model decoder without a model");
      const auto ctx = static_cast<std::size_t>(res.model->config().context_length);
      if (2 * setting.max_examples + 1 > ctx) {
        throw std::invalid_argument("max examples " + std::to_string(setting.max_examples) +
                                    " needs " + std::to_string(2 * setting.max_examples + 1) +
                                    " tokens; model context is " + std::to_string(ctx));
      }
      break;
    }
    case DecoderKind::kMonoFreq:
      if (res.order == nullptr) throw std::invalid_argument("mono_freq needs a frequency order");
      [[fallthrough]];
    case DecoderKind::kMonoNaive:
      if (is_vigenere(setting.scheme)) {
        throw std::invalid_argument(decoder_name(setting.decoder) + " requires the mono scheme");
      }
      break;
    case DecoderKind::kVigNaive:
    case DecoderKind::kVigFreq:
    case DecoderKind::kVigSearch:
      if (!is_vigenere(setting.scheme)) {
        throw std::invalid_argument(decoder_name(setting.decoder) +
                                    " requires a vigenere scheme");
      }
      if (setting.decoder == DecoderKind::kVigSearch) {
        KeyLengthSearch probe(setting.candidates);  // validates the range
      }
      break;
  }
}

void score(EvalPoint& pt, const Prediction& pred, Letter truth) {
  ++pt.n;
  if (pred.is_correct(truth)) ++pt.correct;
  if (!pred.is_abstain()) {
    ++pt.emitted;
    if (pred.is_correct(truth)) ++pt.emitted_correct;
  }
}

// Adds one prompt's outcomes at every j into `points`.
void score_prompt(const EvalSetting& setting, const EvalResources& res, const Prompt& p,
                  Workspace<float>& ws, std::vector<EvalPoint>& points) {
  const std::size_t J = setting.max_examples;
  switch (setting.decoder) {
    case DecoderKind::kModel: {
      const EvalPrefix prefix = build_eval_prefix(p, J);
      const auto logits = forward(*res.model, prefix.tokens, ws);
      for (std::size_t j = 0; j <= J; ++j) {
        const float* row = logits.data() + 2 * j * kVocabSize;
        const auto best = std::max_element(row, row + kVocabSize) - row;
        score(points[j], Prediction::of(Letter(static_cast<int>(best))), p.plaintext[j]);
      }
      return;
    }
    case DecoderKind::kMonoNaive:
    case DecoderKind::kMonoFreq: {
      MonoLookupTable table;
      for (std::size_t j = 0; j <= J; ++j) {
        if (j > 0) table.observe({p.ciphertext[j - 1], p.plaintext[j - 1]});
        Prediction pred = Prediction::abstain();
        if (setting.decoder == DecoderKind::kMonoFreq) {
          pred = mono_freq_from_table(table, p.ciphertext[j], *res.order);
        } else if (const auto hit = table.lookup(p.ciphertext[j])) {
          pred = Prediction::of(*hit);
        }
        score(points[j], pred, p.plaintext[j]);
      }
      return;
    }
    case DecoderKind::kVigNaive:
    case DecoderKind::kVigFreq: {
      OffsetTable table(key_length_of(p.key));
      for (std::size_t j = 0; j <= J; ++j) {
        if (j > 0) table.observe(j - 1, {p.ciphertext[j - 1], p.plaintext[j - 1]});
        const auto plain = table.decrypt(p.ciphertext[j], j);
        Prediction pred = plain ? Prediction::of(*plain) : Prediction::abstain();
        if (!plain && setting.decoder == DecoderKind::kVigFreq) {
          pred = Prediction::of(Letter::unchecked(4));  // 'e'
        }
        score(points[j], pred, p.plaintext[j]);
      }
      return;
    }
    case DecoderKind::kVigSearch: {
      KeyLengthSearch search(setting.candidates);
      for (std::size_t j = 0; j <= J; ++j) {
        if (j > 0) search.observe(j - 1, {p.ciphertext[j - 1], p.plaintext[j - 1]});
        score(points[j], search.predict(p.ciphertext[j], j), p.plaintext[j]);
      }
      return;
    }
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string dist_name(MessageDist dist) {
  return dist == MessageDist::kCorpus ? "corpus" : "uniform";
}

MessageDist parse_dist(const std::string& name) {
  if (name == "corpus") return MessageDist::kCorpus;
  if (name == "uniform") return MessageDist::kUniform;
  throw std::invalid_argument("unknown message distribution '" + name +
                              "' (expected corpus|uniform)");
}

std::string decoder_name(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kModel:
      return "model";
    case DecoderKind::kMonoNaive:
      return "mono_naive";
    case DecoderKind::kMonoFreq:
      return "mono_freq";
    case DecoderKind::kVigNaive:
      return "vig_naive";
    case DecoderKind::kVigFreq:
      return "vig_freq";
    case DecoderKind::kVigSearch:
      return "vig_search";
  }
  return "?";
}

DecoderKind parse_baseline(const std::string& name) {
  for (auto k : {DecoderKind::kMonoNaive, DecoderKind::kMonoFreq, DecoderKind::kVigNaive,
                 DecoderKind::kVigFreq, DecoderKind::kVigSearch}) {
    if (decoder_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown baseline '" + name + "'");
}

std::string EvalSetting::decoder_id() const {
  return decoder == DecoderKind::kModel ? model_label : decoder_name(decoder);
}

double EvalPoint::accuracy() const noexcept {
  return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

double EvalPoint::standard_error() const noexcept {
  if (n == 0) return 0.0;
  const double a = accuracy();
  return std::sqrt(a * (1.0 - a) / static_cast<double>(n));
}

Prompt sample_eval_prompt(const EvalSetting& setting, const LetterStream* stream,
                          std::size_t index) {
  Rng rng = substream(setting.seed, StreamDomain::kEvaluation, index);
  CipherKey key = sample_key(setting.scheme, rng);
  const std::size_t len = setting.max_examples + 1;
  if (setting.dist == MessageDist::kUniform) {
    return make_prompt(key, sample_uniform_message(len, rng));
  }
  if (stream == nullptr) throw std::invalid_argument("corpus messages requested without a corpus");
  std::size_t offset = 0;
  Message plain = sample_message(*stream, len, Split::kValidation, rng, offset);
  Prompt p = make_prompt(key, std::move(plain));
  p.corpus_offset = offset;
  return p;
}

Letter model_predict(const ModelParams<float>& params, std::span<const Token> prefix) {
  const auto logits = forward(params, prefix);
  const float* row = logits.data() + (prefix.size() - 1) * kVocabSize;
  const auto best = std::max_element(row, row + kVocabSize) - row;
  return Letter(static_cast<int>(best));
}

EvalCurve accuracy_curve(const EvalSetting& setting, const EvalResources& res) {
  check_setting(setting, res);
  const std::size_t J = setting.max_examples;
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(res.threads > 0 ? res.threads : 1), 1, setting.n_prompts);

  std::vector<std::vector<EvalPoint>> partial(workers, std::vector<EvalPoint>(J + 1));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      Workspace<float> ws;
      for (std::size_t i = w; i < setting.n_prompts; i += workers) {
        const Prompt p = sample_eval_prompt(setting, res.stream, i);
        score_prompt(setting, res, p, ws, partial[w]);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalCurve curve;
  curve.points.resize(J + 1);
  for (std::size_t j = 0; j <= J; ++j) {
    auto& pt = curve.points[j];
    pt.examples = j;
    for (const auto& part : partial) {
      pt.n += part[j].n;
      pt.correct += part[j].correct;
      pt.emitted += part[j].emitted;
      pt.emitted_correct += part[j].emitted_correct;
    }
  }
  return curve;
}

std::string format_curves_csv(const CurveSet& curves) {
  if (curves.empty()) throw std::invalid_argument("no curves to write");
  std::vector<std::size_t> order(curves.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto key = [&](std::size_t i) {
    const auto& s = curves[i].first;
    return std::make_tuple(s.scheme.name(), s.scheme.key_length_label(), dist_name(s.dist),
                           s.decoder_id());
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  std::string out(kCurvesCsvHeader);
  out += '\n';
  for (std::size_t i : order) {
    const auto& [s, curve] = curves[i];
    const std::string prefix = s.scheme.name() + "," + s.scheme.key_length_label() + "," +
                               dist_name(s.dist) + "," + s.decoder_id() + ",";
    for (const auto& pt : curve.points) {
      out += prefix + std::to_string(pt.examples) + "," + fixed6(pt.accuracy()) + "," +
             std::to_string(pt.n) + "," + fixed6(pt.standard_error()) + "\n";
    }
  }
  return out;
}

void write_curves_csv(const CurveSet& curves, const std::filesystem::path& path) {
  const std::string text = format_curves_csv(curves);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace cipher_icl
