// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "porlab/analysis.hpp"
#include "porlab/checkpoint.hpp"
#include "porlab/error.hpp"
#include "porlab/hash.hpp"
#include "porlab/toy_data.hpp"

namespace porlab {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- Config parsing ----------------------------------------------------------

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("config: unknown key '" + key(k) + "'");
  }

  template <typename T>
  void get(const std::string& k, T& out) {
    seen_.insert(k);
    if (!j_.contains(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + key(k) + "'");
    }
  }
  void get_size(const std::string& k, std::size_t& out) {
    seen_.insert(k);
    if (!j_.contains(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("config: '" + key(k) + "' must be a non-negative integer");
    out = v.get<std::size_t>();
  }
  void get_path(const std::string& k, fs::path& out, const fs::path& base) {
    std::string s;
    get(k, s);
    if (!s.empty()) out = fs::path(s).is_absolute() || base.empty() ? fs::path(s) : base / s;
  }
  bool has(const std::string& k) const { return j_.contains(k); }
  Section sub(const std::string& k) {
    seen_.insert(k);
    static const json empty = json::object();
    return Section(j_.contains(k) ? j_.at(k) : empty, key(k));
  }

 private:
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_adam(Section s, AdamHyper& a) {
  s.get("beta1", a.beta1);
  s.get("beta2", a.beta2);
  s.get("eps", a.eps);
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  {
    Section root(j, "");
    root.get("schema", c.schema);
    if (c.schema != kConfigSchema)
      throw ConfigError("config: unsupported schema " + std::to_string(c.schema));
    root.get("stage", c.stage);
    if (root.has("seed")) {
      std::uint64_t seed = 0;
      root.get("seed", seed);
      c.seed = seed;
    } else {
      throw ConfigError("config: 'seed' is required");
    }
    root.get_path("output_dir", c.output_dir, base_dir);
    root.get_size("vocab_size", c.vocab_size);
    {
      Section m = root.sub("model");
      m.get_size("layers", c.model.layers);
      m.get_size("hidden", c.model.hidden);
      m.get_size("heads", c.model.heads);
      m.get_size("ffn", c.model.ffn);
      m.get_size("max_len", c.model.max_len);
    }
    {
      Section d = root.sub("data");
      d.get_path("corpus", c.data.corpus, base_dir);
      d.get_path("vocab", c.data.vocab, base_dir);
      d.get_path("train", c.data.train, base_dir);
      d.get_path("valid", c.data.valid, base_dir);
      d.get_path("test", c.data.test, base_dir);
      d.get_path("heldout", c.data.heldout, base_dir);
    }
    {
      Section t = root.sub("task");
      t.get("format", c.task.format);
      t.get_size("num_labels", c.task.num_labels);
      std::string head = to_string(c.task.head);
      t.get("head", head);
      c.task.head = head_kind_from_string(head);
      t.get_size("train_limit", c.task.train_limit);
    }
    {
      Section p = root.sub("pretrain");
      p.get_size("epochs", c.pretrain.epochs);
      p.get_size("batch_size", c.pretrain.batch_size);
      p.get("lr", c.pretrain.lr);
      p.get("mask_rate", c.pretrain.mask_rate);
      p.get("linear_decay", c.pretrain.linear_decay);
      read_adam(p.sub("adam"), c.pretrain.adam);
    }
    {
      Section p = root.sub("plan");
      p.get("triggers", c.plan.triggers);
      {
        Section por = p.sub("por");
        por.get("kind", c.plan.por.kind);
        por.get_size("blocks", c.plan.por.blocks);
        std::string split = to_string(c.plan.por.split);
        por.get("split", split);
        c.plan.por.split = block_split_from_string(split);
        por.get("values", c.plan.por.values);
      }
      std::string sel = to_string(c.plan.selector);
      p.get("selector", sel);
      c.plan.selector = target_selector_from_string(sel);
      p.get_size("clean_count", c.plan.clean_count);
      p.get_size("poison_per_trigger", c.plan.poison_per_trigger);
      p.get_size("insertions", c.plan.insertions);
      p.get_size("epochs", c.plan.hyper.epochs);
      p.get_size("batch_size", c.plan.hyper.batch_size);
      p.get("lr", c.plan.hyper.lr);
      p.get("linear_decay", c.plan.hyper.linear_decay);
      read_adam(p.sub("adam"), c.plan.hyper.adam);
    }
    {
      Section f = root.sub("finetune");
      f.get_size("epochs", c.finetune.epochs);
      f.get_size("batch_size", c.finetune.batch_size);
      f.get("lr", c.finetune.lr);
      f.get("linear_decay", c.finetune.linear_decay);
      read_adam(f.sub("adam"), c.finetune.adam);
    }
    {
      Section e = root.sub("eval");
      e.get_size("samples", c.eval.samples);
      e.get_size("cap", c.eval.effectiveness.cap);
      e.get_size("retries", c.eval.effectiveness.retries);
      std::string pos = to_string(c.eval.position);
      e.get("position", pos);
      c.eval.position = insert_position_from_string(pos);
      e.get_size("count", c.eval.count);
      e.get("baseline", c.eval.baseline);
    }
    {
      Section k = root.sub("checkpoints");
      k.get_path("clean", c.checkpoints.clean, base_dir);
      k.get_path("backdoor", c.checkpoints.backdoor, base_dir);
      k.get_path("encoder", c.checkpoints.encoder, base_dir);
      k.get_path("model", c.checkpoints.model, base_dir);
    }
  }
  if (c.task.format != "tsv" && c.task.format != "tagging")
    throw ConfigError("config: task.format must be 'tsv' or 'tagging'");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

namespace {

json adam_json(const AdamHyper& a) {
  return {{"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

json config_json(const ExperimentConfig& c) {
  return {
      {"schema", c.schema},
      {"stage", c.stage},
      {"seed", c.seed ? json(*c.seed) : json(nullptr)},
      {"output_dir", c.output_dir.string()},
      {"vocab_size", c.vocab_size},
      {"model",
       {{"layers", c.model.layers},
        {"hidden", c.model.hidden},
        {"heads", c.model.heads},
        {"ffn", c.model.ffn},
        {"max_len", c.model.max_len}}},
      {"data",
       {{"corpus", c.data.corpus.string()},
        {"vocab", c.data.vocab.string()},
        {"train", c.data.train.string()},
        {"valid", c.data.valid.string()},
        {"test", c.data.test.string()},
        {"heldout", c.data.heldout.string()}}},
      {"task",
       {{"format", c.task.format},
        {"num_labels", c.task.num_labels},
        {"head", to_string(c.task.head)},
        {"train_limit", c.task.train_limit}}},
      {"pretrain",
       {{"epochs", c.pretrain.epochs},
        {"batch_size", c.pretrain.batch_size},
        {"lr", c.pretrain.lr},
        {"mask_rate", c.pretrain.mask_rate},
        {"linear_decay", c.pretrain.linear_decay},
        {"adam", adam_json(c.pretrain.adam)}}},
      {"plan",
       {{"triggers", c.plan.triggers},
        {"por",
         {{"kind", c.plan.por.kind},
          {"blocks", c.plan.por.blocks},
          {"split", to_string(c.plan.por.split)},
          {"values", c.plan.por.values}}},
        {"selector", to_string(c.plan.selector)},
        {"clean_count", c.plan.clean_count},
        {"poison_per_trigger", c.plan.poison_per_trigger},
        {"insertions", c.plan.insertions},
        {"epochs", c.plan.hyper.epochs},
        {"batch_size", c.plan.hyper.batch_size},
        {"lr", c.plan.hyper.lr},
        {"linear_decay", c.plan.hyper.linear_decay},
        {"adam", adam_json(c.plan.hyper.adam)}}},
      {"finetune",
       {{"epochs", c.finetune.epochs},
        {"batch_size", c.finetune.batch_size},
        {"lr", c.finetune.lr},
        {"linear_decay", c.finetune.linear_decay},
        {"adam", adam_json(c.finetune.adam)}}},
      {"eval",
       {{"samples", c.eval.samples},
        {"cap", c.eval.effectiveness.cap},
        {"retries", c.eval.effectiveness.retries},
        {"position", to_string(c.eval.position)},
        {"count", c.eval.count},
        {"baseline", c.eval.baseline}}},
      {"checkpoints",
       {{"clean", c.checkpoints.clean.string()},
        {"backdoor", c.checkpoints.backdoor.string()},
        {"encoder", c.checkpoints.encoder.string()},
        {"model", c.checkpoints.model.string()}}},
  };
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::string config_hash(const ExperimentConfig& config) {
  return to_hex(fnv1a(config_json(config).dump()));
}

std::vector<PorSpec> resolve_pors(const PlanConfig& plan, std::size_t hidden) {
  const std::size_t n = plan.triggers.size();
  std::vector<PorSpec> pors;
  const auto& k = plan.por.kind;
  if (k == "por1" || k == "por2") {
    auto all = k == "por1" ? gen_por1(plan.por.blocks, hidden, plan.por.split)
                           : gen_por2(plan.por.blocks, hidden, plan.por.split);
    if (n > all.size())
      throw ConfigError("plan: " + std::to_string(n) + " triggers but " + k + " over " +
                        std::to_string(plan.por.blocks) + " blocks has only " +
                        std::to_string(all.size()) + " vectors");
    pors.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  } else if (k == "constant" || k == "explicit") {
    if (plan.por.values.size() != n)
      throw ConfigError("plan: por.values needs one entry per trigger");
    for (const auto& v : plan.por.values) {
      if (k == "constant") {
        if (v.size() != 1) throw ConfigError("plan: constant POR entries hold one number");
        pors.push_back(constant_por(hidden, v[0]));
      } else {
        pors.push_back(PorSpec{v});
      }
    }
  } else {
    throw ConfigError("plan: unknown por.kind '" + k + "'");
  }
  return pors;
}

BackdoorPlan resolve_plan(const PlanConfig& plan, const Vocab& vocab, std::size_t hidden) {
  if (plan.triggers.empty()) throw ConfigError("plan: no triggers");
  const auto pors = resolve_pors(plan, hidden);
  BackdoorPlan p = make_plan(plan.triggers, pors, vocab, plan.selector, plan.clean_count,
                             plan.poison_per_trigger, plan.insertions);
  p.hyper = plan.hyper;
  p.validate(hidden);
  return p;
}

EpochSink jsonl_epoch_sink(const fs::path& path) {
  {
    std::ofstream truncate(path, std::ios::trunc);
    if (!truncate) throw IoError("cannot write " + path.string());
  }
  return [path](const EpochMetrics& m) {
    std::ofstream out(path, std::ios::app);
    out << json{{"stage", m.stage}, {"epoch", m.epoch}, {"steps", m.steps}, {"loss", m.loss}}.dump()
        << '\n';
  };
}

// ---- Stages -------------------------------------------------------------------

namespace {

const fs::path& require(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is not set");
  if (!fs::exists(p)) throw IoError(what + " not found: " + p.string());
  return p;
}

std::vector<LabeledExample> load_task(const fs::path& p, const ExperimentConfig& c,
                                      const std::string& what) {
  require(p, what);
  return c.task.format == "tagging" ? load_tagging_jsonl(p) : load_tsv(p);
}

std::vector<std::string> texts_of(std::span<const LabeledExample> data, std::size_t limit = 0) {
  std::vector<std::string> out;
  for (const auto& e : data) {
    if (limit && out.size() == limit) break;
    out.push_back(e.text);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct StageContext {
  const ExperimentConfig& config;
  std::uint64_t seed;
  fs::path dir;
  RunSummary& summary;

  fs::path out(const std::string& name, const std::string& file) {
    const fs::path p = dir / file;
    summary.outputs[name] = p;
    return p;
  }
};

Vocab load_vocab(const ExperimentConfig& c) {
  return Vocab::load(require(c.data.vocab, "vocabulary"));
}

void stage_pretrain(StageContext& ctx) {
  const auto& c = ctx.config;
  const auto corpus = read_lines(require(c.data.corpus, "corpus"));
  Vocab vocab;
  if (!c.data.vocab.empty()) {
    vocab = load_vocab(c);
  } else {
    vocab = build_vocab(corpus, c.vocab_size);
    vocab.save(ctx.out("vocab", "vocab.txt"));
  }
  EncoderConfig mc = c.model;
  mc.vocab_size = vocab.size();
  PretrainHyper h = c.pretrain;
  h.max_len = mc.max_len;
  const auto params = pretrain(corpus, vocab, mc, h, ctx.seed,
                               jsonl_epoch_sink(ctx.out("pretrain_log", "pretrain_log.jsonl")));
  save_encoder(ctx.out("clean", "clean.ckpt"), params);
  if (!c.data.heldout.empty()) {
    const auto held = read_lines(require(c.data.heldout, "held-out text"));
    ctx.summary.metrics["mlm_loss"] =
        mlm_eval_loss(params, held, vocab, h.mask_rate, mc.max_len, derive_seed(ctx.seed, "eval"));
  }
}

void stage_inject(StageContext& ctx, const fs::path& clean_path) {
  const auto& c = ctx.config;
  const Vocab vocab = load_vocab(c);
  const auto clean = load_encoder(require(clean_path, "clean checkpoint"));
  const auto corpus = read_lines(require(c.data.corpus, "corpus"));
  BackdoorPlan plan = resolve_plan(c.plan, vocab, clean.config.hidden);
  plan.hyper.max_len = clean.config.max_len;

  Rng export_rng(derive_seed(ctx.seed, "inject.poison"));
  const auto records = build_poison_set(corpus, plan, export_rng);
  save_tsv(ctx.out("poison", "poison.tsv"), poison_set_as_examples(records));

  const auto r = inject(clean, plan, corpus, vocab, ctx.seed,
                        jsonl_epoch_sink(ctx.out("inject_log", "inject_log.jsonl")));
  save_encoder(ctx.out("backdoor", "backdoor.ckpt"), r.params);
  ctx.summary.metrics["steps"] = static_cast<double>(r.steps);
  ctx.summary.metrics["reference_frozen"] = r.reference_hash == r.clean_hash ? 1.0 : 0.0;
  if (!c.data.heldout.empty()) {
    auto held = read_lines(require(c.data.heldout, "held-out text"));
    if (held.size() > 200) held.resize(200);
    Rng rng(derive_seed(ctx.seed, "inject.heldout"));
    for (const auto& e : plan.entries) {
      std::vector<std::string> poisoned;
      for (const auto& h : held)
        poisoned.push_back(insert_trigger(h, e.trigger.text, plan.insertions, rng));
      ctx.summary.metrics["por_mse[" + e.trigger.text + "]"] =
          por_distance(r.params, e, poisoned, vocab, clean.config.max_len);
    }
    ctx.summary.metrics["clean_drift"] =
        representation_drift(clean, r.params, held, vocab, clean.config.max_len);
  }
}

ClassifierModel finetune_encoder(StageContext& ctx, const EncoderParams& encoder,
                                 const std::string& tag, const Vocab& vocab) {
  const auto& c = ctx.config;
  auto train = load_task(c.data.train, c, "training data");
  if (c.task.train_limit && train.size() > c.task.train_limit) train.resize(c.task.train_limit);
  FinetuneHyper h = c.finetune;
  h.max_len = encoder.config.max_len;
  auto model =
      make_classifier(encoder, c.task.num_labels, c.task.head, derive_seed(ctx.seed, "head"));
  model = finetune(std::move(model), train, vocab, h, ctx.seed,
                   jsonl_epoch_sink(ctx.out(tag + "finetune_log", tag + "finetune_log.jsonl")));
  save_classifier(ctx.out(tag + "model", tag + "model.ckpt"), model);
  const auto reload = load_classifier(ctx.summary.outputs[tag + "model"]);
  for (const auto& [name, path] :
       {std::pair{"valid", c.data.valid}, std::pair{"test", c.data.test}}) {
    if (path.empty()) continue;
    const auto data = load_task(path, c, std::string(name) + " data");
    ctx.summary.metrics[tag + name + "_accuracy"] =
        accuracy(reload, data, vocab, encoder.config.max_len);
  }
  return reload;
}

void stage_eval(StageContext& ctx, const ClassifierModel& model, const Vocab& vocab) {
  const auto& c = ctx.config;
  if (model.kind == HeadKind::kPerToken)
    throw ConfigError("eval: trigger metrics need a sequence-level head");
  if (c.plan.triggers.empty()) throw ConfigError("eval: plan.triggers is empty");
  const auto test = load_task(c.data.test, c, "test data");
  const auto samples = texts_of(test, c.eval.samples);
  const std::size_t max_len = model.encoder.config.max_len;
  const Predictor predict = classifier_predictor(model, vocab, max_len);
  auto& m = ctx.summary.metrics;
  m["accuracy"] = accuracy(model, test, vocab, max_len);

  std::vector<EffectivenessReport> reports;
  std::vector<TriggerSpec> triggers;
  std::ostringstream asr_csv;
  asr_csv << "trigger,label,position,count,eligible,hits,asr\n";
  double e_sum = 0.0, best_e = 0.0;
  std::size_t with_success = 0;
  for (std::size_t i = 0; i < c.plan.triggers.size(); ++i) {
    const auto t = make_trigger(c.plan.triggers[i], vocab);
    triggers.push_back(t);
    auto rep = evaluate_effectiveness(predict, t, samples, c.eval.effectiveness,
                                      derive_seed(ctx.seed, "eval.effectiveness", i));
    const auto a = asr(predict, t, samples, c.eval.position, c.eval.count,
                       derive_seed(ctx.seed, "eval.asr", i));
    asr_csv << t.text << ',' << a.trigger_label << ',' << to_string(c.eval.position) << ','
            << c.eval.count << ',' << a.eligible << ',' << a.hits << ',' << fmt(a.rate) << '\n';
    const std::string k = "[" + t.text + "]";
    m["label" + k] = rep.trigger_label;
    m["E" + k] = rep.mean_e;
    m["S" + k] = rep.mean_s;
    m["C" + k] = rep.mean_c;
    m["success" + k] = rep.success_fraction;
    m["eligible" + k] = rep.eligibility_fraction();
    m["asr" + k] = a.rate;
    if (rep.successes) {
      e_sum += rep.mean_e;
      best_e = with_success ? std::min(best_e, rep.mean_e) : rep.mean_e;
      ++with_success;
    }
    reports.push_back(std::move(rep));
  }
  m["E"] = with_success ? e_sum / static_cast<double>(with_success) : 0.0;
  m["best_E"] = best_e;
  write_effectiveness_jsonl(ctx.out("effectiveness", "effectiveness.jsonl"), reports);
  const std::vector<std::string> csv{effectiveness_csv(reports)};
  write_lines(ctx.out("effectiveness_csv", "effectiveness.csv"), csv);
  write_lines(ctx.out("asr", "asr.csv"), std::vector<std::string>{asr_csv.str()});

  const auto cov = coverage(predict, triggers, c.task.num_labels);
  json cj = {{"num_labels", cov.num_labels}, {"fraction", cov.fraction}, {"covered", cov.covered}};
  for (const auto& [t, l] : cov.mapping) cj["mapping"][t] = l;
  write_lines(ctx.out("coverage", "coverage.json"), std::vector<std::string>{cj.dump(2)});
  m["coverage"] = cov.fraction;
}

void stage_analyze(StageContext& ctx) {
  const auto& c = ctx.config;
  const Vocab vocab = load_vocab(c);
  const auto clean = load_encoder(require(c.checkpoints.clean, "clean checkpoint"));
  const auto bd = load_encoder(require(c.checkpoints.backdoor, "backdoor checkpoint"));
  const fs::path text_path = c.data.heldout.empty() ? c.data.corpus : c.data.heldout;
  auto texts = read_lines(require(text_path, "held-out text"));
  if (texts.size() > 200) texts.resize(200);
  if (c.plan.triggers.empty()) throw ConfigError("analyze: plan.triggers is empty");
  const std::size_t max_len = clean.config.max_len;

  Rng rng(derive_seed(ctx.seed, "analyze"));
  std::vector<std::string> poisoned;
  for (std::size_t i = 0; i < texts.size(); ++i)
    poisoned.push_back(insert_trigger(texts[i], c.plan.triggers[i % c.plan.triggers.size()],
                                      c.plan.insertions, rng));
  auto& m = ctx.summary.metrics;
  std::ostringstream swap;
  swap << "hybrid,clean_vs_bd,clean_vs_cl,poisoned_vs_bd,poisoned_vs_cl\n";
  for (const auto& row : swap_report(clean, bd, texts, poisoned, vocab, max_len)) {
    swap << row.name << ',' << fmt(row.clean_vs_bd) << ',' << fmt(row.clean_vs_cl) << ','
         << fmt(row.poisoned_vs_bd) << ',' << fmt(row.poisoned_vs_cl) << '\n';
    m["swap." + row.name + ".poisoned_vs_bd"] = row.poisoned_vs_bd;
    m["swap." + row.name + ".clean_vs_bd"] = row.clean_vs_bd;
  }
  write_lines(ctx.out("swap", "swap.csv"), std::vector<std::string>{swap.str()});

  std::ostringstream att;
  att << "trigger,layer,clean,backdoor,star_piece\n";
  for (const auto& text : c.plan.triggers) {
    const auto t = make_trigger(text, vocab);
    std::vector<std::string> pt;
    for (const auto& s : texts) pt.push_back(insert_trigger(s, text, c.plan.insertions, rng));
    const auto a = mean_cls_trigger_attention(clean, pt, t, vocab, max_len);
    const auto b = mean_cls_trigger_attention(bd, pt, t, vocab, max_len);
    const auto star = vocab.token(t.pieces[star_piece(bd, pt, t, vocab, max_len)]);
    for (std::size_t l = 0; l < a.size(); ++l) {
      att << text << ',' << l + 1 << ',' << fmt(a[l]) << ',' << fmt(b[l]) << ',' << star << '\n';
      m["attention[" + text + "].layer" + std::to_string(l + 1) + ".shift"] = b[l] - a[l];
    }
  }
  write_lines(ctx.out("attention", "attention.csv"), std::vector<std::string>{att.str()});
}

std::string outputs_hash(const std::map<std::string, fs::path>& outputs) {
  Fnv1a h;
  for (const auto& [name, path] : outputs) {
    h.update(name);
    h.update(std::string_view("\0", 1));
    h.update(file_hash(path));
    h.update(std::string_view("\n", 1));
  }
  return h.hex();
}

template <typename E>
[[noreturn]] void rethrow_as(const E& e, const std::string& prefix) {
  throw E(prefix + e.what());
}

}  // namespace

RunSummary run(const ExperimentConfig& config) {
  if (!config.seed) throw ConfigError("config: 'seed' is required");
  RunSummary summary;
  summary.stage = config.stage;
  summary.config_hash = config_hash(config);
  summary.seed = *config.seed;
  const std::string prefix = "[" + config.stage + " " + summary.config_hash + "] ";
  try {
    fs::create_directories(config.output_dir);
    StageContext ctx{config, derive_seed(*config.seed, config.stage), config.output_dir, summary};
    write_lines(config.output_dir / "config.json",
                std::vector<std::string>{config_to_json(config)});
    if (config.stage == "pretrain") {
      stage_pretrain(ctx);
    } else if (config.stage == "inject") {
      stage_inject(ctx, config.checkpoints.clean);
    } else if (config.stage == "finetune") {
      const auto enc = load_encoder(require(config.checkpoints.encoder, "encoder checkpoint"));
      finetune_encoder(ctx, enc, "", load_vocab(config));
    } else if (config.stage == "eval") {
      const auto model = load_classifier(require(config.checkpoints.model, "model checkpoint"));
      stage_eval(ctx, model, load_vocab(config));
    } else if (config.stage == "analyze") {
      stage_analyze(ctx);
    } else if (config.stage == "pipeline") {
      const Vocab vocab = load_vocab(config);
      stage_inject(ctx, config.checkpoints.clean);
      const auto bd = load_encoder(summary.outputs.at("backdoor"));
      const auto model = finetune_encoder(ctx, bd, "", vocab);
      if (config.eval.baseline) {
        finetune_encoder(ctx, load_encoder(config.checkpoints.clean), "baseline_", vocab);
        if (summary.metrics.count("test_accuracy"))
          summary.metrics["accuracy_gap"] =
              summary.metrics["baseline_test_accuracy"] - summary.metrics["test_accuracy"];
      }
      stage_eval(ctx, model, vocab);
    } else {
      throw ConfigError("unknown stage '" + config.stage + "'");
    }
    summary.output_hash = outputs_hash(summary.outputs);

    json outs = json::object();
    for (const auto& [k, v] : summary.outputs) outs[k] = v.filename().string();
    const json sj = {{"stage", summary.stage},     {"config_hash", summary.config_hash},
                     {"seed", summary.seed},       {"outputs", outs},
                     {"metrics", summary.metrics}, {"output_hash", summary.output_hash}};
    write_lines(config.output_dir / "summary.json", std::vector<std::string>{sj.dump(2)});
    std::ofstream manifest(config.output_dir / "manifest.jsonl", std::ios::app);
    manifest << json{{"stage", summary.stage},
                     {"config_hash", summary.config_hash},
                     {"seed", summary.seed},
                     {"output_hash", summary.output_hash}}
                    .dump()
             << '\n';
  } catch (const ConfigError& e) {
    rethrow_as(e, prefix);
  } catch (const InputError& e) {
    rethrow_as(e, prefix);
  } catch (const TrainingError& e) {
    rethrow_as(e, prefix);
  } catch (const IoError& e) {
    rethrow_as(e, prefix);
  } catch (const fs::filesystem_error& e) {
    throw IoError(prefix + e.what());
  }
  return summary;
}

// ---- Sweeps ---------------------------------------------------------------------

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kCleanCount: return "clean-count";
    case SweepAxis::kPoisonCount: return "poison-count";
    case SweepAxis::kFinetuneSize: return "finetune-size";
    case SweepAxis::kEpochs: return "epochs";
    case SweepAxis::kInsertions: return "insertions-t";
    case SweepAxis::kTriggerSet: return "trigger-set";
  }
  return "insertions-t";
}

SweepAxis sweep_axis_from_string(std::string_view name) {
  for (auto a : {SweepAxis::kCleanCount, SweepAxis::kPoisonCount, SweepAxis::kFinetuneSize,
                 SweepAxis::kEpochs, SweepAxis::kInsertions, SweepAxis::kTriggerSet})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown sweep axis '" + std::string(name) + "'");
}

namespace {

std::size_t parse_count(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || v[0] == '-')
    throw ConfigError("sweep: '" + v + "' is not a non-negative integer");
  return static_cast<std::size_t>(n);
}

}  // namespace

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis,
                            const std::string& value) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::kCleanCount: c.plan.clean_count = parse_count(value); break;
    case SweepAxis::kPoisonCount: c.plan.poison_per_trigger = parse_count(value); break;
    case SweepAxis::kFinetuneSize: c.task.train_limit = parse_count(value); break;
    case SweepAxis::kEpochs: c.finetune.epochs = parse_count(value); break;
    case SweepAxis::kInsertions: c.plan.insertions = parse_count(value); break;
    case SweepAxis::kTriggerSet: {
      c.plan.triggers.clear();
      std::stringstream ss(value);
      std::string t;
      while (std::getline(ss, t, ','))
        if (!split_words(t).empty()) c.plan.triggers.push_back(join_words(split_words(t)));
      if (c.plan.triggers.empty()) throw ConfigError("sweep: empty trigger set");
      break;
    }
  }
  return c;
}

std::vector<SweepRecord> sweep(const SweepSpec& spec) {
  if (spec.repeats < 1) throw ConfigError("sweep: repeats must be >= 1");
  if (spec.values.empty()) throw ConfigError("sweep: no axis values");
  if (!spec.base.seed) throw ConfigError("config: 'seed' is required");
  fs::create_directories(spec.base.output_dir);
  std::vector<SweepRecord> records;
  const fs::path runs = spec.base.output_dir / "runs.jsonl";
  std::ofstream log(runs, std::ios::trunc);
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (std::size_t r = 0; r < spec.repeats; ++r) {
      ExperimentConfig c = apply_axis(spec.base, spec.axis, spec.values[v]);
      c.stage = "pipeline";
      c.seed = derive_seed(*spec.base.seed, "repeat", r);
      c.output_dir = spec.base.output_dir / ("cell" + std::to_string(v) + "_r" + std::to_string(r));
      const RunSummary s = run(c);
      SweepRecord rec{spec.values[v], r, *c.seed, s.metrics};
      log << json{{"value", rec.value},
                  {"repeat", rec.repeat},
                  {"seed", rec.seed},
                  {"metrics", rec.metrics}}
                 .dump()
          << '\n';
      log.flush();
      records.push_back(std::move(rec));
    }
  }
  write_lines(spec.base.output_dir / "sweep.csv",
              std::vector<std::string>{aggregate_sweep(to_string(spec.axis), records)});
  return records;
}

std::string aggregate_sweep(const std::string& axis, std::span<const SweepRecord> records) {
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::vector<double>>> cells;
  for (const auto& r : records) {
    if (!cells.count(r.value)) order.push_back(r.value);
    auto& cell = cells[r.value];
    for (const auto& [k, v] : r.metrics) cell[k].push_back(v);
  }
  std::ostringstream os;
  os << "axis,value,metric,mean,stdev,n\n";
  for (const auto& value : order) {
    for (const auto& [metric, xs] : cells[value]) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
      const bool quote = value.find(',') != std::string::npos;
      os << axis << ',' << (quote ? "\"" + value + "\"" : value) << ',' << metric << ','
         << fmt(mean) << ',' << fmt(sd) << ',' << xs.size() << '\n';
    }
  }
  return os.str();
}

std::vector<SweepRecord> load_sweep_records(const fs::path& runs_jsonl) {
  std::vector<SweepRecord> out;
  for (const auto& line : read_lines(runs_jsonl)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("value").get<std::string>(), j.at("repeat").get<std::size_t>(),
                     j.at("seed").get<std::uint64_t>(),
                     j.at("metrics").get<std::map<std::string, double>>()});
    } catch (const json::exception& e) {
      throw IoError(runs_jsonl.string() + ": " + e.what());
    }
  }
  return out;
}

std::string report_table(const fs::path& root) {
  if (!fs::exists(root)) throw IoError("report: not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "summary.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<json> rows;
  std::set<std::string> columns;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw IoError(f.string() + ": " + e.what());
    }
    for (const auto& [k, v] : j["metrics"].items()) columns.insert(k);
    j["path"] = fs::relative(f.parent_path(), root).generic_string();
    rows.push_back(std::move(j));
  }
  std::ostringstream os;
  os << "run,stage";
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  for (const auto& r : rows) {
    os << r["path"].get<std::string>() << ',' << r["stage"].get<std::string>();
    for (const auto& c : columns) {
      os << ',';
      if (r["metrics"].contains(c)) os << fmt(r["metrics"][c].get<double>());
    }
    os << '\n';
  }
  return os.str();
}

void write_toy_assets(const fs::path& dir, std::size_t corpus_lines, std::size_t train,
                      std::size_t valid, std::size_t test, std::uint64_t seed) {
  fs::create_directories(dir);
  write_lines(dir / "corpus.txt", toy::corpus(corpus_lines, derive_seed(seed, "toy.corpus")));
  write_lines(dir / "heldout.txt", toy::corpus(500, derive_seed(seed, "toy.heldout")));
  const auto s = toy::sentiment(train, valid, test, derive_seed(seed, "toy.sentiment"));
  const auto t = toy::topic(train, valid, test, derive_seed(seed, "toy.topic"));
  const auto g = toy::tagging(train, valid, test, derive_seed(seed, "toy.tagging"));
  for (const auto& [task, prefix] : {std::pair{&s, "sentiment"}, std::pair{&t, "topic"}}) {
    save_tsv(dir / (std::string(prefix) + "_train.tsv"), task->train);
    save_tsv(dir / (std::string(prefix) + "_valid.tsv"), task->valid);
    save_tsv(dir / (std::string(prefix) + "_test.tsv"), task->test);
  }
  save_tagging_jsonl(dir / "tagging_train.jsonl", g.train);
  save_tagging_jsonl(dir / "tagging_valid.jsonl", g.valid);
  save_tagging_jsonl(dir / "tagging_test.jsonl", g.test);
}

}  // namespace porlab
