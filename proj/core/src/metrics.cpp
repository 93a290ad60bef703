// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/metrics.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "porlab/error.hpp"

namespace porlab {

Predictor classifier_predictor(const ClassifierModel& model, const Vocab& vocab,
                               std::size_t max_len) {
  return [&model, &vocab, max_len](const std::string& text) {
    return predict(model, text, vocab, max_len).label;
  };
}

int trigger_label(const Predictor& predict, const TriggerSpec& trigger) {
  return predict(trigger.text);
}

std::string to_string(EffectStatus s) {
  switch (s) {
    case EffectStatus::kSuccess: return "success";
    case EffectStatus::kFailed: return "failed";
    case EffectStatus::kSkipped: return "skipped";
  }
  return "skipped";
}

EffectivenessOutcome effectiveness(const Predictor& predict, const TriggerSpec& trigger, int target,
                                   const std::string& sample, const EffectivenessOptions& options,
                                   Rng& rng) {
  if (options.cap == 0) throw ConfigError("effectiveness: cap must be >= 1");
  if (options.retries == 0) throw ConfigError("effectiveness: retries must be >= 1");
  EffectivenessOutcome out;
  out.clean_prediction = predict(sample);
  if (out.clean_prediction == target) return out;
  for (std::size_t t = 1; t <= options.cap; ++t) {
    for (std::size_t r = 0; r < options.retries; ++r) {
      if (predict(insert_trigger(sample, trigger.text, t, rng)) == target) {
        out.status = EffectStatus::kSuccess;
        out.t = t;
        return out;
      }
    }
  }
  out.status = EffectStatus::kFailed;
  return out;
}

double stealthiness(double e, double l_alpha, double l_x) {
  if (l_x <= 0.0) throw ConfigError("stealthiness: text length must be positive");
  return e * l_alpha / l_x;
}

double capability(double e, double s) { return 1.0 / (e * s); }

double capability_from_lengths(double e, double l_alpha, double l_x) {
  return l_x / (e * e * l_alpha);
}

double EffectivenessReport::eligibility_fraction() const {
  return records.empty() ? 0.0
                         : static_cast<double>(eligible) / static_cast<double>(records.size());
}

EffectivenessReport evaluate_effectiveness(const Predictor& predict, const TriggerSpec& trigger,
                                           std::span<const std::string> samples,
                                           const EffectivenessOptions& options,
                                           std::uint64_t seed) {
  EffectivenessReport rep;
  rep.trigger = trigger.text;
  rep.l_alpha = trigger.char_length;
  rep.trigger_label = trigger_label(predict, trigger);
  double sum_e = 0.0, sum_s = 0.0, sum_c = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(derive_seed(seed, "effectiveness", i));
    const auto o = effectiveness(predict, trigger, rep.trigger_label, samples[i], options, rng);
    EffectivenessRecord r;
    r.sample_id = i;
    r.clean_prediction = o.clean_prediction;
    r.trigger_label = rep.trigger_label;
    r.status = o.status;
    r.t = o.t;
    r.l_x = codepoint_length(samples[i]);
    if (o.status != EffectStatus::kSkipped) ++rep.eligible;
    if (o.status == EffectStatus::kSuccess) {
      r.s = stealthiness(static_cast<double>(r.t), static_cast<double>(rep.l_alpha),
                         static_cast<double>(r.l_x));
      r.c = capability(static_cast<double>(r.t), r.s);
      ++rep.successes;
      sum_e += static_cast<double>(r.t);
      sum_s += r.s;
      sum_c += r.c;
    }
    rep.records.push_back(r);
  }
  if (rep.successes) {
    const double n = static_cast<double>(rep.successes);
    rep.mean_e = sum_e / n;
    rep.mean_s = sum_s / n;
    rep.mean_c = sum_c / n;
  }
  if (rep.eligible)
    rep.success_fraction = static_cast<double>(rep.successes) / static_cast<double>(rep.eligible);
  return rep;
}

std::string to_string(InsertPosition p) { return p == InsertPosition::kBegin ? "begin" : "random"; }

InsertPosition insert_position_from_string(std::string_view name) {
  if (name == "begin") return InsertPosition::kBegin;
  if (name == "random") return InsertPosition::kRandom;
  throw ConfigError("unknown insertion position '" + std::string(name) + "'");
}

AsrResult asr(const Predictor& predict, const TriggerSpec& trigger,
              std::span<const std::string> samples, InsertPosition position, std::size_t count,
              std::uint64_t seed) {
  AsrResult res;
  res.trigger_label = trigger_label(predict, trigger);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (predict(samples[i]) == res.trigger_label) continue;
    ++res.eligible;
    std::string poisoned;
    if (position == InsertPosition::kBegin) {
      const std::vector<std::size_t> gaps(count, 0);
      poisoned = insert_trigger_at(samples[i], trigger.text, gaps);
    } else {
      Rng rng(derive_seed(seed, "asr", i));
      poisoned = insert_trigger(samples[i], trigger.text, count, rng);
    }
    if (predict(poisoned) == res.trigger_label) ++res.hits;
  }
  if (res.eligible) res.rate = static_cast<double>(res.hits) / static_cast<double>(res.eligible);
  return res;
}

CoverageReport coverage(const Predictor& predict, std::span<const TriggerSpec> triggers,
                        std::size_t num_labels) {
  if (num_labels == 0) throw ConfigError("coverage: task has no labels");
  CoverageReport rep;
  rep.num_labels = num_labels;
  for (const auto& t : triggers) {
    const int label = trigger_label(predict, t);
    rep.mapping.emplace_back(t.text, label);
    if (label >= 0 && static_cast<std::size_t>(label) < num_labels) rep.covered.insert(label);
  }
  rep.fraction = static_cast<double>(rep.covered.size()) / static_cast<double>(num_labels);
  return rep;
}

void write_effectiveness_jsonl(const std::filesystem::path& path,
                               std::span<const EffectivenessReport> reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& rep : reports) {
    for (const auto& r : rep.records) {
      nlohmann::json j = {{"trigger", rep.trigger},
                          {"sample", r.sample_id},
                          {"clean_prediction", r.clean_prediction},
                          {"trigger_label", r.trigger_label},
                          {"status", to_string(r.status)},
                          {"l_x", r.l_x},
                          {"l_alpha", rep.l_alpha}};
      if (r.status == EffectStatus::kSuccess) {
        j["t"] = r.t;
        j["S"] = r.s;
        j["C"] = r.c;
      }
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::string effectiveness_csv(std::span<const EffectivenessReport> reports) {
  std::ostringstream os;
  os.precision(6);
  os << "trigger,label,l_alpha,eligible,successes,success_fraction,E,S,C,good\n";
  for (const auto& r : reports) {
    os << r.trigger << ',' << r.trigger_label << ',' << r.l_alpha << ',' << r.eligible << ','
       << r.successes << ',' << r.success_fraction << ',' << r.mean_e << ',' << r.mean_s << ','
       << r.mean_c << ',' << (r.successes && is_good_trigger(r.mean_c) ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace porlab
