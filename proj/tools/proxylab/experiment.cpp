#include "experiment.hpp"

#include <fstream>
#include <map>
#include <set>

#include "proxylab/simplify/simplifier.hpp"

namespace proxylab::workbench {
namespace {

using nlohmann::json;

std::set<std::string> keys_of(const std::string& object_text) {
  const json doc = json::parse(object_text);
  std::set<std::string> out;
  for (const auto& [k, _] : doc.items()) out.insert(k);
  return out;
}

/// Known keys per section path; "" is the top level.
const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = [] {
    std::map<std::string, std::set<std::string>> m;
    m[""] = {"task", "seed", "out", "threads", "dyck", "code", "model",
             "train", "simplify", "evaluate", "report", "inspect"};
    m["dyck"] = {"bracket_types", "max_depth", "max_len", "min_distance", "short_max_len", "sizes"};
    m["dyck.sizes"] = {"train", "iid", "seen_struct", "unseen_struct_short", "unseen_struct_long",
                       "unseen_depth"};
    m["code"] = {"input", "keywords", "train_language", "max_depth", "max_len", "holdout_fraction",
                 "languages"};
    m["model"] = keys_of(model::to_json(model::ModelConfig{}));
    m["model"].insert("preset");
    m["train"] = keys_of(model::to_json(model::TrainConfig{}));
    m["train"].erase("seed");  // the global seed drives training
    m["simplify"] = {"layer", "head", "kinds", "ranks", "clusters", "fit_split", "fit_sequences"};
    m["evaluate"] = {"splits", "correct_only", "subsample", "curve_subsample"};
    m["report"] = {"metrics", "gap_rank"};
    m["inspect"] = {"split", "sequences", "first_n", "charts"};
    return m;
  }();
  return s;
}

void collect_unknown(const json& j, const std::string& path, std::vector<std::string>& bad) {
  const auto it = schema().find(path);
  if (it == schema().end()) return;
  if (!j.is_object()) {
    bad.push_back((path.empty() ? std::string("<root>") : path) + " (expected an object)");
    return;
  }
  for (const auto& [k, v] : j.items()) {
    const std::string full = path.empty() ? k : path + "." + k;
    if (!it->second.count(k)) {
      bad.push_back(full);
    } else if (schema().count(full)) {
      collect_unknown(v, full, bad);
    }
  }
}

// Sections handed whole to the core parsers: name the first key whose JSON
// type differs from the default's.
void check_types(const json& given, const json& defaults, const std::string& path) {
  for (const auto& [k, v] : given.items()) {
    if (!defaults.contains(k)) continue;
    const json& d = defaults.at(k);
    const bool ok = (d.is_number() && v.is_number()) || d.type() == v.type();
    if (!ok) {
      throw ConfigError("config: " + path + "." + k + ": expected " + d.type_name() + ", got " +
                        v.type_name());
    }
  }
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + (path.empty() ? "" : ".") + key + ": " + e.what());
  }
}

const json& section(const json& doc, const char* name) {
  static const json empty = json::object();
  return doc.contains(name) ? doc.at(name) : empty;
}

}  // namespace

const char* version() { return PROXYLAB_VERSION; }

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> bad;
  collect_unknown(doc, "", bad);
  if (!bad.empty()) {
    std::string msg = "config: unknown keys: ";
    for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? ", " : "") + bad[i];
    throw ConfigError(msg);
  }
  ExperimentConfig c;
  read(doc, "task", c.task, "");
  read(doc, "seed", c.seed, "");
  read(doc, "out", c.out, "");
  read(doc, "threads", c.threads, "");
  if (c.task != "dyck" && c.task != "code") throw ConfigError("config: task must be dyck or code, got '" + c.task + "'");
  if (c.threads < 1) throw ConfigError("config: threads must be >= 1");

  const json& d = section(doc, "dyck");
  read(d, "bracket_types", c.dyck.spec.bracket_types, "dyck");
  read(d, "max_depth", c.dyck.spec.max_depth, "dyck");
  read(d, "max_len", c.dyck.spec.max_len, "dyck");
  read(d, "min_distance", c.dyck.min_distance, "dyck");
  read(d, "short_max_len", c.dyck.short_max_len, "dyck");
  const json& sz = section(d, "sizes");
  read(sz, "train", c.dyck.sizes.train, "dyck.sizes");
  read(sz, "iid", c.dyck.sizes.iid, "dyck.sizes");
  read(sz, "seen_struct", c.dyck.sizes.seen_struct, "dyck.sizes");
  read(sz, "unseen_struct_short", c.dyck.sizes.unseen_struct_short, "dyck.sizes");
  read(sz, "unseen_struct_long", c.dyck.sizes.unseen_struct_long, "dyck.sizes");
  read(sz, "unseen_depth", c.dyck.sizes.unseen_depth, "dyck.sizes");
  try {
    c.dyck.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const json& cd = section(doc, "code");
  read(cd, "input", c.code.input, "code");
  read(cd, "keywords", c.code.keywords, "code");
  read(cd, "train_language", c.code.ingest.train_language, "code");
  read(cd, "max_depth", c.code.ingest.max_depth, "code");
  read(cd, "max_len", c.code.ingest.max_len, "code");
  read(cd, "holdout_fraction", c.code.ingest.holdout_fraction, "code");
  read(cd, "languages", c.code.ingest.languages, "code");
  c.code.ingest.seed = c.seed;
  if (!(c.code.ingest.holdout_fraction >= 0.0 && c.code.ingest.holdout_fraction < 1.0)) {
    throw ConfigError("config: code.holdout_fraction must be in [0, 1)");
  }

  // Model: preset, then overrides; vocabulary and length follow the task.
  json m = section(doc, "model");
  c.model_preset = c.is_code() ? "code_desk" : "dyck";
  read(m, "preset", c.model_preset, "model");
  const int vocab = c.is_code() ? code::CharVocab::kSize : c.dyck.spec.vocab_size();
  const int max_len = c.is_code() ? static_cast<int>(c.code.ingest.max_len) + 2 : c.dyck.spec.max_len;
  model::ModelConfig preset;
  if (c.model_preset == "dyck") {
    preset = model::ModelConfig::dyck(vocab, max_len);
  } else if (c.model_preset == "code_desk") {
    preset = model::ModelConfig::code_desk(vocab, max_len);
  } else if (c.model_preset == "code_full") {
    preset = model::ModelConfig::code_full(vocab, max_len);
  } else {
    throw ConfigError("config: model.preset must be dyck, code_desk or code_full, got '" + c.model_preset + "'");
  }
  m.erase("preset");
  json merged = json::parse(model::to_json(preset));
  check_types(m, merged, "model");
  merged.merge_patch(m);
  try {
    c.model = model::model_config_from_json(merged.dump());
    c.model.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: model: ") + e.what());
  }
  if (c.model.vocab_size != vocab) {
    throw ConfigError("config: model.vocab_size " + std::to_string(c.model.vocab_size) +
                      " does not match the task vocabulary " + std::to_string(vocab));
  }
  if (c.model.max_len < max_len) {
    throw ConfigError("config: model.max_len " + std::to_string(c.model.max_len) +
                      " is shorter than the longest sequence " + std::to_string(max_len));
  }

  check_types(section(doc, "train"), json::parse(model::to_json(model::TrainConfig{})), "train");
  try {
    c.train = model::train_config_from_json(section(doc, "train").dump());
    c.train.seed = c.seed;
    c.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: train: ") + e.what());
  }

  const json& s = section(doc, "simplify");
  read(s, "layer", c.simplify.layer, "simplify");
  read(s, "head", c.simplify.head, "simplify");
  read(s, "kinds", c.simplify.kinds, "simplify");
  read(s, "ranks", c.simplify.ranks, "simplify");
  read(s, "clusters", c.simplify.clusters, "simplify");
  read(s, "fit_split", c.simplify.fit_split, "simplify");
  read(s, "fit_sequences", c.simplify.fit_sequences, "simplify");
  for (const auto& k : c.simplify.kinds) {
    try {
      simplify::kind_from(k);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: simplify.kinds: ") + e.what());
    }
  }
  if (c.simplify.layer < 0 || c.simplify.layer >= c.model.layers || c.simplify.head < 0 ||
      c.simplify.head >= c.model.heads) {
    throw ConfigError("config: simplify targets a head the model does not have");
  }

  const json& e = section(doc, "evaluate");
  read(e, "splits", c.evaluate.splits, "evaluate");
  read(e, "correct_only", c.evaluate.correct_only, "evaluate");
  read(e, "subsample", c.evaluate.subsample, "evaluate");
  read(e, "curve_subsample", c.evaluate.curve_subsample, "evaluate");

  const json& r = section(doc, "report");
  read(r, "metrics", c.report.metrics, "report");
  read(r, "gap_rank", c.report.gap_rank, "report");

  const json& in = section(doc, "inspect");
  read(in, "split", c.inspect.split, "inspect");
  read(in, "sequences", c.inspect.sequences, "inspect");
  read(in, "first_n", c.inspect.first_n, "inspect");
  read(in, "charts", c.inspect.charts, "inspect");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing input: config file " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: " + path.string() + " is not valid JSON");
  return parse_config(doc);
}

json ExperimentConfig::to_json() const {
  json j;
  j["task"] = task;
  j["seed"] = seed;
  j["out"] = out;
  j["threads"] = threads;
  j["dyck"] = {{"bracket_types", dyck.spec.bracket_types},
               {"max_depth", dyck.spec.max_depth},
               {"max_len", dyck.spec.max_len},
               {"min_distance", dyck.min_distance},
               {"short_max_len", dyck.short_max_len},
               {"sizes",
                {{"train", dyck.sizes.train},
                 {"iid", dyck.sizes.iid},
                 {"seen_struct", dyck.sizes.seen_struct},
                 {"unseen_struct_short", dyck.sizes.unseen_struct_short},
                 {"unseen_struct_long", dyck.sizes.unseen_struct_long},
                 {"unseen_depth", dyck.sizes.unseen_depth}}}};
  j["code"] = {{"input", code.input},
               {"keywords", code.keywords},
               {"train_language", code.ingest.train_language},
               {"max_depth", code.ingest.max_depth},
               {"max_len", code.ingest.max_len},
               {"holdout_fraction", code.ingest.holdout_fraction},
               {"languages", code.ingest.languages}};
  j["model"] = json::parse(model::to_json(model));
  j["model"]["preset"] = model_preset;
  j["train"] = json::parse(model::to_json(train));
  j["train"].erase("seed");
  j["simplify"] = {{"layer", simplify.layer},
                   {"head", simplify.head},
                   {"kinds", simplify.kinds},
                   {"ranks", simplify.ranks},
                   {"clusters", simplify.clusters},
                   {"fit_split", simplify.fit_split},
                   {"fit_sequences", simplify.fit_sequences}};
  j["evaluate"] = {{"splits", evaluate.splits},
                   {"correct_only", evaluate.correct_only},
                   {"subsample", evaluate.subsample},
                   {"curve_subsample", evaluate.curve_subsample}};
  j["report"] = {{"metrics", report.metrics}, {"gap_rank", report.gap_rank}};
  j["inspect"] = {{"split", inspect.split},
                  {"sequences", inspect.sequences},
                  {"first_n", inspect.first_n},
                  {"charts", inspect.charts}};
  return j;
}

void write_snapshot(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const std::string& stage) {
  std::filesystem::create_directories(dir);
  json j = {{"version", version()}, {"stage", stage}, {"config", config.to_json()}};
  std::ofstream out(dir / "config.resolved.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "config.resolved.json").string());
}

}  // namespace proxylab::workbench
