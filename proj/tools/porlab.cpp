// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

// porlab: command-line driver for the POR backdoor lab.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "porlab/analysis.hpp"
#include "porlab/checkpoint.hpp"
#include "porlab/error.hpp"
#include "porlab/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace porlab;

namespace {

struct StageArgs {
  std::string config;
  std::string stage;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_stage_options(CLI::App* cmd, StageArgs& a, bool with_stage) {
  cmd->add_option("-c,--config", a.config, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  if (with_stage) cmd->add_option("--stage", a.stage, "Override the config's stage");
  cmd->add_option("--seed", a.seed, "Override the master seed");
  cmd->add_option("-o,--out", a.out, "Override the output directory");
}

ExperimentConfig stage_config(const StageArgs& a, const std::string& forced) {
  ExperimentConfig c = load_config(a.config);
  if (!forced.empty()) c.stage = forced;
  if (!a.stage.empty()) c.stage = a.stage;
  if (a.seed) c.seed = a.seed;
  if (!a.out.empty()) c.output_dir = a.out;
  return c;
}

void print_summary(const RunSummary& s) {
  json j = {{"stage", s.stage},
            {"config_hash", s.config_hash},
            {"seed", s.seed},
            {"output_hash", s.output_hash},
            {"metrics", s.metrics}};
  std::cout << j.dump(2) << '\n';
}

// Shared options for commands that score a fine-tuned classifier.
struct ModelArgs {
  std::string model, vocab, data;
  std::string format = "tsv";
  std::vector<std::string> triggers;
  std::size_t samples = 200;
  std::uint64_t seed = 1;
};

void add_model_options(CLI::App* cmd, ModelArgs& a, bool needs_data) {
  cmd->add_option("-m,--model", a.model, "Classifier checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-v,--vocab", a.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  auto* d =
      cmd->add_option("-d,--data", a.data, "Labeled evaluation data")->check(CLI::ExistingFile);
  if (needs_data) d->required();
  cmd->add_option("--format", a.format, "tsv or tagging")->check(CLI::IsMember({"tsv", "tagging"}));
  cmd->add_option("-t,--trigger", a.triggers, "Trigger text (repeatable)")->required();
  cmd->add_option("-n,--samples", a.samples, "Leading samples scored; 0 = all");
  cmd->add_option("--seed", a.seed, "Seed for trigger placement");
}

std::vector<LabeledExample> load_data(const std::string& path, const std::string& format) {
  return format == "tagging" ? load_tagging_jsonl(path) : load_tsv(path);
}

std::vector<std::string> sample_texts(std::span<const LabeledExample> data, std::size_t n) {
  std::vector<std::string> out;
  for (const auto& e : data) {
    if (n && out.size() == n) break;
    out.push_back(e.text);
  }
  return out;
}

std::vector<std::string> text_lines(const std::string& path, std::size_t n) {
  auto lines = read_lines(path);
  std::erase_if(lines, [](const std::string& s) { return split_words(s).empty(); });
  if (n && lines.size() > n) lines.resize(n);
  return lines;
}

std::string matrix_csv(const Matrix& m, std::span<const std::string> tokens) {
  std::ostringstream os;
  os.precision(6);
  os << "token";
  for (const auto& t : tokens) os << ',' << std::quoted(t, '"', '"');
  os << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << std::quoted(tokens[r], '"', '"');
    for (std::size_t c = 0; c < m.cols(); ++c) os << ',' << m(r, c);
    os << '\n';
  }
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
}

// Writes one CSV matrix per layer plus a JSON descriptor and returns its path.
fs::path write_heatmaps(const fs::path& dir, const std::string& kind,
                        std::span<const std::string> tokens, const std::vector<Matrix>& layers,
                        std::size_t first_layer) {
  fs::create_directories(dir);
  json desc = {{"kind", kind}, {"tokens", tokens}, {"layers", json::array()}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::size_t layer = first_layer + i;
    const std::string file = kind + "_layer" + std::to_string(layer) + ".csv";
    write_text(dir / file, matrix_csv(layers[i], tokens));
    desc["layers"].push_back({{"layer", layer}, {"file", file}});
  }
  const fs::path p = dir / (kind + ".json");
  write_text(p, desc.dump(2) + "\n");
  return p;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"porlab: backdoor attacks on a small transformer encoder"};
  app.require_subcommand(1);

  // toy
  std::string toy_out = "toy";
  std::size_t toy_lines = 12000, toy_train = 2000, toy_valid = 500, toy_test = 2000;
  std::uint64_t toy_seed = 1;
  auto* toy = app.add_subcommand("toy", "Write the bundled synthetic corpus and tasks");
  toy->add_option("-o,--out", toy_out, "Output directory");
  toy->add_option("--corpus-lines", toy_lines, "Corpus lines");
  toy->add_option("--train", toy_train, "Training examples per task");
  toy->add_option("--valid", toy_valid, "Validation examples per task");
  toy->add_option("--test", toy_test, "Test examples per task");
  toy->add_option("--seed", toy_seed, "Generator seed");

  // Config-driven stages.
  StageArgs run_a, pre_a, inj_a, ft_a;
  auto* run = app.add_subcommand("run", "Run the stage named in a config");
  add_stage_options(run, run_a, true);
  auto* pre = app.add_subcommand("pretrain", "Masked-LM pretraining of a clean encoder");
  add_stage_options(pre, pre_a, false);
  auto* inj = app.add_subcommand("inject", "Inject triggers into a clean encoder");
  add_stage_options(inj, inj_a, false);
  auto* ft = app.add_subcommand("finetune", "Fine-tune an encoder on a labeled task");
  add_stage_options(ft, ft_a, false);

  // eval-e
  ModelArgs e_a;
  std::size_t e_cap = kDefaultCap, e_retries = kDefaultRetries;
  std::string e_out;
  auto* eval_e =
      app.add_subcommand("eval-e", "Effectiveness, stealthiness and capability per trigger");
  add_model_options(eval_e, e_a, true);
  eval_e->add_option("--cap", e_cap, "Largest insertion count tried");
  eval_e->add_option("--retries", e_retries, "Random placements tried per count");
  eval_e->add_option("-o,--out", e_out, "Directory for effectiveness.jsonl and .csv");

  // eval-asr
  ModelArgs a_a;
  std::string a_pos = "random";
  std::size_t a_count = 1;
  auto* eval_asr =
      app.add_subcommand("eval-asr", "Attack success rate under a fixed insertion policy");
  add_model_options(eval_asr, a_a, true);
  eval_asr->add_option("--position", a_pos, "begin or random")
      ->check(CLI::IsMember({"begin", "random"}));
  eval_asr->add_option("--count", a_count, "Trigger copies inserted");

  // coverage
  ModelArgs c_a;
  std::size_t c_labels = 2;
  auto* cov = app.add_subcommand("coverage", "Labels reachable by the given triggers");
  add_model_options(cov, c_a, false);
  cov->add_option("-l,--labels", c_labels, "Number of task labels")->required();

  // attention / cosine
  std::string h_encoder, h_vocab, h_text, h_out = "heatmaps", h_trigger;
  std::size_t h_max_len = kDefaultMaxLen;
  auto add_heatmap = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("-e,--encoder", h_encoder, "Encoder or classifier checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-v,--vocab", h_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--text", h_text, "Input sentence")->required();
    cmd->add_option("-o,--out", h_out, "Output directory");
    cmd->add_option("--max-len", h_max_len, "Truncation length");
    return cmd;
  };
  auto* att = add_heatmap("attention", "Head-averaged attention matrices per layer");
  att->add_option("-t,--trigger", h_trigger, "Report first-token attention to this trigger");
  auto* cos = add_heatmap("cosine", "Token-token cosine similarity per layer");

  // swap
  std::string s_clean, s_bd, s_vocab, s_texts;
  std::vector<std::string> s_triggers;
  std::size_t s_t = 3, s_n = 200;
  std::uint64_t s_seed = 1;
  auto* swap =
      app.add_subcommand("swap", "Embedding-swap comparison of clean and backdoored encoders");
  swap->add_option("--clean", s_clean, "Clean encoder")->required()->check(CLI::ExistingFile);
  swap->add_option("--backdoor", s_bd, "Backdoored encoder")->required()->check(CLI::ExistingFile);
  swap->add_option("-v,--vocab", s_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  swap->add_option("--texts", s_texts, "Clean text, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  swap->add_option("-t,--trigger", s_triggers, "Triggers used for poisoned texts")->required();
  swap->add_option("--insertions", s_t, "Insertions per poisoned text");
  swap->add_option("-n,--samples", s_n, "Texts used");
  swap->add_option("--seed", s_seed, "Seed for trigger placement");

  // prune
  ModelArgs p_a;
  std::string p_calib, p_save;
  std::vector<double> p_fractions{0.0, 0.1, 0.2, 0.3, 0.5};
  std::size_t p_calib_n = 500;
  auto* prune = app.add_subcommand("prune", "Fine-pruning of FFN units");
  add_model_options(prune, p_a, true);
  prune->add_option("--calibration", p_calib, "Clean calibration data (TSV)")
      ->required()
      ->check(CLI::ExistingFile);
  prune->add_option("--calibration-size", p_calib_n, "Calibration texts used");
  prune->add_option("-f,--fraction", p_fractions, "Fractions pruned per layer");
  prune->add_option("--save", p_save, "Save the model pruned at the last fraction");

  // ablation
  ModelArgs b_a;
  auto* abl = app.add_subcommand("ablation",
                                 "Effectiveness of the star piece alone versus the full trigger");
  add_model_options(abl, b_a, true);

  // sweep
  StageArgs w_a;
  std::string w_axis;
  std::vector<std::string> w_values;
  std::size_t w_repeats = 1;
  auto* sw = app.add_subcommand("sweep", "Pipeline runs across one axis with repeats");
  add_stage_options(sw, w_a, false);
  sw->add_option("--axis", w_axis,
                 "clean-count, poison-count, finetune-size, epochs, insertions-t or trigger-set")
      ->required();
  sw->add_option("--values", w_values, "Axis values; trigger sets are comma-separated")->required();
  sw->add_option("--repeats", w_repeats, "Repeats per value")->check(CLI::PositiveNumber);

  // report
  std::string r_root, r_runs, r_axis = "value";
  auto* rep = app.add_subcommand("report", "Collect run summaries or re-aggregate a sweep");
  rep->add_option("root", r_root, "Directory searched for summary.json")
      ->check(CLI::ExistingDirectory);
  rep->add_option("--runs", r_runs, "Re-aggregate this runs.jsonl instead")
      ->check(CLI::ExistingFile);
  rep->add_option("--axis", r_axis, "Axis label for re-aggregation");

  CLI11_PARSE(app, argc, argv);

  if (toy->parsed()) {
    write_toy_assets(toy_out, toy_lines, toy_train, toy_valid, toy_test, toy_seed);
    std::cout << "wrote toy assets to " << toy_out << '\n';
  } else if (run->parsed()) {
    print_summary(porlab::run(stage_config(run_a, "")));
  } else if (pre->parsed()) {
    print_summary(porlab::run(stage_config(pre_a, "pretrain")));
  } else if (inj->parsed()) {
    print_summary(porlab::run(stage_config(inj_a, "inject")));
  } else if (ft->parsed()) {
    print_summary(porlab::run(stage_config(ft_a, "finetune")));
  } else if (eval_e->parsed()) {
    const auto model = load_classifier(e_a.model);
    const Vocab vocab = Vocab::load(e_a.vocab);
    const auto texts = sample_texts(load_data(e_a.data, e_a.format), e_a.samples);
    const auto predict = classifier_predictor(model, vocab, model.encoder.config.max_len);
    std::vector<EffectivenessReport> reports;
    for (std::size_t i = 0; i < e_a.triggers.size(); ++i)
      reports.push_back(evaluate_effectiveness(predict, make_trigger(e_a.triggers[i], vocab), texts,
                                               {e_cap, e_retries},
                                               derive_seed(e_a.seed, "eval.effectiveness", i)));
    if (!e_out.empty()) {
      fs::create_directories(e_out);
      write_effectiveness_jsonl(fs::path(e_out) / "effectiveness.jsonl", reports);
      write_text(fs::path(e_out) / "effectiveness.csv", effectiveness_csv(reports));
    }
    std::cout << effectiveness_csv(reports);
  } else if (eval_asr->parsed()) {
    const auto model = load_classifier(a_a.model);
    const Vocab vocab = Vocab::load(a_a.vocab);
    const auto texts = sample_texts(load_data(a_a.data, a_a.format), a_a.samples);
    const auto predict = classifier_predictor(model, vocab, model.encoder.config.max_len);
    std::cout << "trigger,label,position,count,eligible,hits,asr\n";
    for (std::size_t i = 0; i < a_a.triggers.size(); ++i) {
      const auto t = make_trigger(a_a.triggers[i], vocab);
      const auto r = asr(predict, t, texts, insert_position_from_string(a_pos), a_count,
                         derive_seed(a_a.seed, "eval.asr", i));
      std::cout << t.text << ',' << r.trigger_label << ',' << a_pos << ',' << a_count << ','
                << r.eligible << ',' << r.hits << ',' << r.rate << '\n';
    }
  } else if (cov->parsed()) {
    const auto model = load_classifier(c_a.model);
    const Vocab vocab = Vocab::load(c_a.vocab);
    const auto predict = classifier_predictor(model, vocab, model.encoder.config.max_len);
    std::vector<TriggerSpec> triggers;
    for (const auto& t : c_a.triggers) triggers.push_back(make_trigger(t, vocab));
    const auto r = coverage(predict, triggers, c_labels);
    json j = {{"num_labels", r.num_labels}, {"covered", r.covered}, {"fraction", r.fraction}};
    for (const auto& [t, l] : r.mapping) j["mapping"][t] = l;
    std::cout << j.dump(2) << '\n';
  } else if (att->parsed() || cos->parsed()) {
    const Checkpoint ck = load_checkpoint(h_encoder);
    const EncoderParams params =
        ck.attributes.count("head") ? load_classifier(h_encoder).encoder : load_encoder(h_encoder);
    const Vocab vocab = Vocab::load(h_vocab);
    const TokenSeq seq = encode(h_text, vocab, std::min(h_max_len, params.config.max_len));
    const ForwardTrace trace = forward(params, seq);
    if (att->parsed()) {
      const AttentionSummary s = aggregate_attention(trace, &vocab);
      std::cout << write_heatmaps(h_out, "attention", seq.pieces, s.layers, 1).string() << '\n';
      if (!h_trigger.empty()) {
        const auto pos = trigger_positions(seq, make_trigger(h_trigger, vocab));
        const auto a = cls_attention_to(s, pos);
        std::cout << "layer,cls_to_trigger\n";
        for (std::size_t l = 0; l < a.size(); ++l) std::cout << l + 1 << ',' << a[l] << '\n';
      }
    } else {
      std::vector<Matrix> layers;
      for (std::size_t l = 0; l <= params.config.layers; ++l)
        layers.push_back(token_cosine(trace, l));
      std::cout << write_heatmaps(h_out, "cosine", seq.pieces, layers, 0).string() << '\n';
    }
  } else if (swap->parsed()) {
    const auto clean = load_encoder(s_clean);
    const auto bd = load_encoder(s_bd);
    const Vocab vocab = Vocab::load(s_vocab);
    const auto texts = text_lines(s_texts, s_n);
    Rng rng(derive_seed(s_seed, "swap"));
    std::vector<std::string> poisoned;
    for (std::size_t i = 0; i < texts.size(); ++i)
      poisoned.push_back(insert_trigger(texts[i], s_triggers[i % s_triggers.size()], s_t, rng));
    std::cout << "hybrid,clean_vs_bd,clean_vs_cl,poisoned_vs_bd,poisoned_vs_cl\n";
    for (const auto& r : swap_report(clean, bd, texts, poisoned, vocab, clean.config.max_len))
      std::cout << r.name << ',' << r.clean_vs_bd << ',' << r.clean_vs_cl << ',' << r.poisoned_vs_bd
                << ',' << r.poisoned_vs_cl << '\n';
  } else if (prune->parsed()) {
    const auto model = load_classifier(p_a.model);
    const Vocab vocab = Vocab::load(p_a.vocab);
    const auto test = load_data(p_a.data, p_a.format);
    const auto texts = sample_texts(test, p_a.samples);
    const auto calib = sample_texts(load_tsv(p_calib), p_calib_n);
    const std::size_t max_len = model.encoder.config.max_len;
    std::cout << "fraction,accuracy";
    for (const auto& t : p_a.triggers) std::cout << ",E[" << t << "],success[" << t << ']';
    std::cout << '\n';
    PruneResult last{model, {}};
    for (double f : p_fractions) {
      last = fine_prune(model, calib, f, p_calib_n, vocab, max_len);
      const auto predict = classifier_predictor(last.model, vocab, max_len);
      std::cout << f << ',' << accuracy(last.model, test, vocab, max_len);
      for (std::size_t i = 0; i < p_a.triggers.size(); ++i) {
        const auto r = evaluate_effectiveness(predict, make_trigger(p_a.triggers[i], vocab), texts,
                                              {}, derive_seed(p_a.seed, "eval.effectiveness", i));
        std::cout << ',' << r.mean_e << ',' << r.success_fraction;
      }
      std::cout << '\n';
    }
    if (!p_save.empty()) save_classifier(p_save, last.model);
  } else if (abl->parsed()) {
    const auto model = load_classifier(b_a.model);
    const Vocab vocab = Vocab::load(b_a.vocab);
    const auto texts = sample_texts(load_data(b_a.data, b_a.format), b_a.samples);
    const std::size_t max_len = model.encoder.config.max_len;
    const auto predict = classifier_predictor(model, vocab, max_len);
    std::cout << "trigger,piece,variant,label,E,success_fraction\n";
    for (std::size_t i = 0; i < b_a.triggers.size(); ++i) {
      const auto full = make_trigger(b_a.triggers[i], vocab);
      std::vector<std::string> poisoned;
      Rng rng(derive_seed(b_a.seed, "ablation", i));
      for (const auto& t : texts) poisoned.push_back(insert_trigger(t, full.text, 1, rng));
      const std::string star =
          vocab.token(full.pieces[star_piece(model.encoder, poisoned, full, vocab, max_len)]);
      // A continuation piece on its own is spelled without its marker.
      const std::string alone = star.rfind("##", 0) == 0 ? star.substr(2) : star;
      for (const auto& [variant, text] : {std::pair{"full", full.text}, std::pair{"star", alone}}) {
        const auto r = evaluate_effectiveness(predict, make_trigger(text, vocab), texts, {},
                                              derive_seed(b_a.seed, "eval.effectiveness", i));
        std::cout << full.text << ',' << star << ',' << variant << ',' << r.trigger_label << ','
                  << r.mean_e << ',' << r.success_fraction << '\n';
      }
    }
  } else if (sw->parsed()) {
    SweepSpec spec;
    spec.base = stage_config(w_a, "pipeline");
    spec.axis = sweep_axis_from_string(w_axis);
    spec.values = w_values;
    spec.repeats = w_repeats;
    sweep(spec);
    std::cout << read_lines(spec.base.output_dir / "sweep.csv").size() << " rows written to "
              << (spec.base.output_dir / "sweep.csv").string() << '\n';
  } else if (rep->parsed()) {
    if (!r_runs.empty()) {
      std::cout << aggregate_sweep(r_axis, load_sweep_records(r_runs));
    } else if (!r_root.empty()) {
      std::cout << report_table(r_root);
    } else {
      throw ConfigError("report: give a run directory or --runs");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return 5;
  }
}
