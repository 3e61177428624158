#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "proxylab/code/analysis.hpp"
#include "proxylab/dyck/dataset_io.hpp"
#include "proxylab/faithfulness/report.hpp"
#include "proxylab/model/checkpoint.hpp"
#include "proxylab/model/runner.hpp"

namespace proxylab::workbench {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using dyck::Token;

fs::path out_dir(const ExperimentConfig& c) { return fs::path(c.out); }

void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw std::runtime_error("missing input: " + p.string() + " (" + what + ")");
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_text(const fs::path& p, const std::string& text) { open_out(p) << text; }

void say(const Inputs& in, const std::string& msg) {
  if (!in.quiet) std::cout << msg << std::endl;
}

std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- data access ----

fs::path data_dir(const ExperimentConfig& c, const Inputs& in) {
  if (in.data) return *in.data;
  return out_dir(c) / (c.is_code() ? "code" : "data");
}

dyck::SplitBundle load_bundle(const ExperimentConfig& c, const Inputs& in) {
  const fs::path dir = data_dir(c, in);
  require(dir / "manifest.json", "split bundle; run gen-data first");
  dyck::SplitBundle b = dyck::read_bundle(dir);
  if (b.spec != c.dyck.spec) {
    throw std::runtime_error("split bundle in " + dir.string() + " was generated for a different dyck spec");
  }
  return b;
}

const code::KeywordSet& keywords(const ExperimentConfig& c) {
  static std::map<std::string, code::KeywordSet> cache;
  if (c.code.keywords.empty()) return code::java_keywords();
  auto it = cache.find(c.code.keywords);
  if (it == cache.end()) {
    require(c.code.keywords, "keyword list");
    it = cache.emplace(c.code.keywords, code::load_keywords(c.code.keywords)).first;
  }
  return it->second;
}

std::vector<code::CodeSplit> load_code_splits(const ExperimentConfig& c, const Inputs& in) {
  const fs::path dir = data_dir(c, in);
  require(dir / "manifest.json", "code splits; run code-ingest first");
  std::ifstream f(dir / "manifest.json");
  const json m = json::parse(f);
  std::vector<code::CodeSplit> out;
  for (const auto& s : m.at("splits")) {
    const fs::path file = dir / s.at("file").get<std::string>();
    require(file, "code split");
    out.push_back(code::read_split_ndjson(file, s.at("name").get<std::string>(), keywords(c)));
  }
  return out;
}

const code::CodeSplit& find_split(const std::vector<code::CodeSplit>& splits, const std::string& name) {
  for (const auto& s : splits) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("code corpus has no split '" + name + "'");
}

template <typename T>
std::vector<T> head_of(const std::vector<T>& v, std::size_t n) {
  if (n == 0 || n >= v.size()) return v;
  return std::vector<T>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
}

dyck::Dataset subsample(const dyck::Dataset& d, std::size_t n) {
  dyck::Dataset out;
  out.name = d.name;
  out.bracket_types = d.bracket_types;
  out.provenance = d.provenance;
  out.samples = head_of(d.samples, n);
  return out;
}

code::CodeSplit subsample(const code::CodeSplit& s, std::size_t n) {
  return code::CodeSplit{s.name, head_of(s.functions, n)};
}

std::vector<std::string> eval_split_names(const ExperimentConfig& c, const std::vector<std::string>& available) {
  if (!c.evaluate.splits.empty()) {
    for (const auto& s : c.evaluate.splits) {
      if (std::find(available.begin(), available.end(), s) == available.end()) {
        throw std::runtime_error("evaluate.splits names unknown split '" + s + "'");
      }
    }
    return c.evaluate.splits;
  }
  std::vector<std::string> out;
  for (const auto& s : available) {
    if (s != "train") out.push_back(s);
  }
  return out;
}

/// Eval sets for the configured splits.
std::vector<faithfulness::EvalSet> eval_sets(const ExperimentConfig& c, const Inputs& in) {
  std::vector<faithfulness::EvalSet> out;
  if (c.is_code()) {
    const auto splits = load_code_splits(c, in);
    std::vector<std::string> names;
    for (const auto& s : splits) names.push_back(s.name);
    for (const auto& name : eval_split_names(c, names)) {
      const auto s = subsample(find_split(splits, name), c.evaluate.subsample);
      faithfulness::EvalSet e;
      e.name = name;
      e.sequences = code::token_sequences(s);
      e.positions = code::character_positions(s);
      out.push_back(std::move(e));
    }
  } else {
    const auto bundle = load_bundle(c, in);
    std::vector<std::string> names;
    for (const auto& d : bundle.datasets) names.push_back(d.name);
    for (const auto& name : eval_split_names(c, names)) {
      out.push_back(faithfulness::dyck_eval_set(subsample(bundle.get(name), c.evaluate.subsample),
                                                c.dyck.min_distance));
    }
  }
  return out;
}

std::vector<std::vector<Token>> fit_pool(const ExperimentConfig& c, const Inputs& in) {
  if (c.is_code()) return code::token_sequences(find_split(load_code_splits(c, in), c.simplify.fit_split));
  const auto bundle = load_bundle(c, in);
  if (!bundle.has(c.simplify.fit_split)) {
    throw std::runtime_error("simplify.fit_split names unknown split '" + c.simplify.fit_split + "'");
  }
  return model::token_sequences(bundle.get(c.simplify.fit_split));
}

simplify::FitSample fit_sample(const ExperimentConfig& c) {
  return {c.simplify.fit_split, c.simplify.fit_sequences, c.seed};
}

model::ModelParameters<float> load_params(const ExperimentConfig& c, const Inputs& in) {
  const fs::path p = in.checkpoint ? *in.checkpoint : out_dir(c) / "train" / "final.ckpt";
  require(p, "checkpoint; run train first");
  auto loaded = model::load_checkpoint<float>(p);
  if (loaded.params.config.vocab_size != c.model.vocab_size) {
    throw std::runtime_error("checkpoint " + p.string() + " has vocabulary " +
                             std::to_string(loaded.params.config.vocab_size) + ", config expects " +
                             std::to_string(c.model.vocab_size));
  }
  return std::move(loaded.params);
}

int target_layer(const ExperimentConfig& c, const Inputs& in) { return in.layer.value_or(c.simplify.layer); }
int target_head(const ExperimentConfig& c, const Inputs& in) { return in.head.value_or(c.simplify.head); }

std::vector<int> strengths_for(const ExperimentConfig& c, simplify::Kind kind) {
  switch (kind) {
    case simplify::Kind::Svd: return c.simplify.ranks;
    case simplify::Kind::KMeans: return c.simplify.clusters;
    case simplify::Kind::OneHot: return {0};
  }
  return {};
}

std::string fitted_stem(const simplify::SimplifierSpec& s) {
  return s.kind_name() + "_" + std::to_string(s.strength) + "_L" + std::to_string(s.layer) + "H" +
         std::to_string(s.head);
}

std::vector<fs::path> fitted_files(const ExperimentConfig& c, const Inputs& in) {
  if (!in.fitted.empty()) {
    for (const auto& p : in.fitted) require(p, "fitted simplifier");
    return in.fitted;
  }
  const fs::path dir = out_dir(c) / "simplifiers";
  require(dir / "index.csv", "simplifier index; run fit-simplifier first");
  std::ifstream f(dir / "index.csv");
  std::string line;
  std::getline(f, line);
  std::vector<fs::path> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const fs::path p = dir / line.substr(0, line.find(','));
    require(p, "fitted simplifier listed in index.csv");
    out.push_back(p);
  }
  return out;
}

void write_records(const fs::path& dir, const std::vector<faithfulness::FaithfulnessRecord>& records) {
  auto wide = open_out(dir / "records_wide.csv");
  faithfulness::write_records_wide(wide, records);
  auto lng = open_out(dir / "records_long.csv");
  faithfulness::write_records_long(lng, records);
}

std::string record_line(const faithfulness::FaithfulnessRecord& r) {
  using faithfulness::format_value;
  return r.key.split + " " + r.key.simplifier + "/" + std::to_string(r.key.strength) +
         ": same_prediction=" + format_value(r.same_prediction.value()) +
         " mean_jsd=" + format_value(r.mean_jsd()) + " n=" + std::to_string(r.n_eval_positions);
}

/// Dyck sample annotations for token sequences.
dyck::Dataset as_dataset(const std::string& name, int k, const std::vector<std::vector<Token>>& seqs) {
  dyck::Dataset d;
  d.name = name;
  d.bracket_types = k;
  for (const auto& s : seqs) d.samples.push_back(dyck::annotate(s, k));
  return d;
}

std::string token_label(const ExperimentConfig& c, Token t) {
  if (c.is_code()) {
    if (t == code::CharVocab::kBos) return "^";
    if (t == code::CharVocab::kEos) return "$";
    if (t == code::CharVocab::kUnknown) return "?";
    const char ch = static_cast<char>(code::CharVocab::character(t));
    return ch == ' ' ? "_" : std::string(1, ch);
  }
  if (t == dyck::kBos) return "^";
  if (t == c.dyck.spec.eos()) return "$";
  const std::vector<Token> one{t};
  return dyck::render(one, c.dyck.spec.bracket_types);
}

std::vector<std::string> code_language_splits(const std::vector<code::CodeSplit>& splits) {
  std::vector<std::string> out;
  for (const auto& s : splits) {
    if (s.name != code::kCodeTrain && s.name != code::kCodeHeldout && s.name != code::kCodeUnseenDepth) {
      out.push_back(s.name);
    }
  }
  return out;
}

}  // namespace

int gen_data(const ExperimentConfig& c, const Inputs& in) {
  if (c.is_code()) return code_ingest(c, in);
  dyck::SplitOptions opts;
  opts.short_max_len = c.dyck.short_max_len;
  const auto bundle = dyck::build_splits(c.dyck.spec, c.dyck.sizes, c.seed, opts);
  const fs::path dir = out_dir(c) / "data";
  dyck::write_bundle(dir, bundle);
  write_snapshot(dir, c, "gen-data");
  const auto violations = dyck::integrity_violations(bundle);
  std::string integrity;
  for (const auto& v : violations) integrity += v + "\n";
  write_text(dir / "integrity.txt", violations.empty() ? "ok\n" : integrity);
  for (const auto& d : bundle.datasets) {
    say(in, d.name + ": " + std::to_string(d.samples.size()) + " sentences, " +
                std::to_string(d.provenance.attempts) + " attempts");
  }
  if (!violations.empty()) {
    std::cerr << "proxylab: split integrity violated:\n" << integrity;
    return 1;
  }
  say(in, "split integrity: ok");
  return 0;
}

int code_ingest(const ExperimentConfig& c, const Inputs& in) {
  if (c.code.input.empty()) throw std::runtime_error("code.input is not set in the config");
  require(c.code.input, "code corpus NDJSON");
  const auto corpus = code::ingest_file(c.code.input, c.code.ingest, keywords(c));
  const fs::path dir = out_dir(c) / "code";
  fs::create_directories(dir);
  json manifest = {{"splits", json::array()},
                   {"records", corpus.report.records},
                   {"skipped", corpus.report.skipped}};
  for (const auto& s : corpus.splits) {
    const std::string file = s.name + ".ndjson";
    code::write_split_ndjson(dir / file, s);
    manifest["splits"].push_back({{"name", s.name}, {"file", file}, {"functions", s.functions.size()}});
    say(in, s.name + ": " + std::to_string(s.functions.size()) + " functions, mean length " +
                fixed(s.mean_length(), 1));
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  auto summary = open_out(dir / "summary.csv");
  code::write_split_summary(summary, corpus);
  write_snapshot(dir, c, "code-ingest");
  for (const auto& [why, n] : corpus.report.skipped) {
    std::cerr << "proxylab: warning: skipped " << n << " records (" << why << ")\n";
  }
  return 0;
}

int train(const ExperimentConfig& c, const Inputs& in) {
  const fs::path dir = out_dir(c) / "train";
  fs::create_directories(dir);
  write_snapshot(dir, c, "train");
  std::vector<std::vector<Token>> seqs;
  model::TrainCallbacks cb;
  dyck::SplitBundle bundle;
  std::vector<code::CodeSplit> code_splits;
  if (c.is_code()) {
    code_splits = load_code_splits(c, in);
    seqs = code::token_sequences(find_split(code_splits, code::kCodeTrain));
    cb.evaluate = [&](std::size_t step, const model::ModelParameters<float>& p) {
      const model::ModelRunner runner(p);
      std::vector<model::CurvePoint> pts;
      for (const auto& s : code_splits) {
        if (s.name == code::kCodeTrain) continue;
        const auto acc = code::category_accuracy(runner, subsample(s, c.evaluate.curve_subsample), c.threads);
        if (const auto v = acc.overall.value()) pts.push_back({step, s.name, "char_accuracy", *v});
      }
      return pts;
    };
  } else {
    bundle = load_bundle(c, in);
    seqs = model::token_sequences(bundle.get(dyck::kTrain));
    cb.evaluate = [&](std::size_t step, const model::ModelParameters<float>& p) {
      return model::closing_accuracy_curve(p, bundle, step, c.evaluate.curve_subsample, c.threads);
    };
  }
  if (seqs.empty()) throw std::runtime_error("the training split is empty");
  const auto inner_eval = cb.evaluate;
  cb.evaluate = [&](std::size_t step, const model::ModelParameters<float>& p) {
    auto pts = inner_eval(step, p);
    std::string line = "step " + std::to_string(step);
    for (const auto& q : pts) line += " " + q.split + "=" + fixed(q.value);
    say(in, line);
    return pts;
  };
  cb.on_step = [&](const model::StepInfo& s) {
    if (s.step % 100 == 0) say(in, "step " + std::to_string(s.step) + " loss " + fixed(s.loss, 5));
  };
  cb.on_checkpoint = [&](std::size_t step, const model::ModelParameters<float>& p) {
    model::save_checkpoint(dir / ("step" + std::to_string(step) + ".ckpt"), p, c.seed, step);
  };
  const auto result = model::train(c.model, c.train, seqs, cb, dir / "diverged.ckpt");
  model::save_checkpoint(dir / "final.ckpt", result.params, c.seed, c.train.steps);
  model::write_curve_csv(dir / "curve.csv", result.curve);
  return 0;
}

int fit_simplifier(const ExperimentConfig& c, const Inputs& in) {
  const auto params = load_params(c, in);
  const auto seqs = simplify::select_fit_sequences(fit_pool(c, in), fit_sample(c));
  const int layer = target_layer(c, in), head = target_head(c, in);
  const fs::path dir = out_dir(c) / "simplifiers";
  fs::create_directories(dir);
  std::string index = "file,kind,strength,layer,head\n";
  auto save = [&](const simplify::FittedSimplifier& f) {
    const std::string file = fitted_stem(f.spec) + ".fit";
    simplify::save_fitted(dir / file, f);
    index += file + "," + f.spec.kind_name() + "," + std::to_string(f.spec.strength) + "," +
             std::to_string(layer) + "," + std::to_string(head) + "\n";
  };
  std::optional<simplify::Embeddings> emb;
  for (const auto& name : c.simplify.kinds) {
    simplify::SimplifierSpec spec;
    spec.layer = layer;
    spec.head = head;
    spec.kind = simplify::kind_from(name);
    spec.fit = fit_sample(c);
    const auto strengths = strengths_for(c, spec.kind);
    if (spec.kind == simplify::Kind::OneHot) {
      save(simplify::fit(spec, params, seqs, c.threads));
      continue;
    }
    if (strengths.empty()) throw std::runtime_error("no strengths configured for " + name);
    if (!emb) emb = simplify::collect_embeddings(params, layer, head, seqs, c.threads);
    if (spec.kind == simplify::Kind::Svd) {
      spec.strength = *std::max_element(strengths.begin(), strengths.end());
      spec.validate(params.config);
      const auto full = simplify::fit_embeddings(spec, *emb, seqs.size());
      auto sv = open_out(dir / ("singular_values_L" + std::to_string(layer) + "H" + std::to_string(head) + ".csv"));
      sv << "index,value\n";
      for (std::size_t i = 0; i < full.singular_values.size(); ++i) {
        sv << i << ',' << faithfulness::format_value(full.singular_values[i]) << '\n';
      }
      for (int r : strengths) save(simplify::truncate(full, r));
    } else {
      for (int k : strengths) {
        spec.strength = k;
        spec.validate(params.config);
        save(simplify::fit_embeddings(spec, *emb, seqs.size()));
      }
    }
  }
  write_text(dir / "index.csv", index);
  write_snapshot(dir, c, "fit-simplifier");
  say(in, "fitted on " + std::to_string(seqs.size()) + " sequences; index at " + (dir / "index.csv").string());
  return 0;
}

int evaluate(const ExperimentConfig& c, const Inputs& in) {
  const auto params = load_params(c, in);
  const auto files = fitted_files(c, in);
  const auto evals = eval_sets(c, in);
  const fs::path dir = out_dir(c) / "eval";
  fs::create_directories(dir);
  faithfulness::EvalOptions opts{c.evaluate.correct_only, c.threads};
  std::vector<faithfulness::FaithfulnessRecord> records;
  std::vector<simplify::FittedSimplifier> fits;
  for (const auto& f : files) fits.push_back(simplify::load_fitted(f));
  for (const auto& f : fits) {
    for (const auto& e : evals) {
      records.push_back(faithfulness::evaluate_faithfulness(params, f, e, opts));
      say(in, record_line(records.back()));
    }
  }
  write_records(dir, records);
  const model::ModelRunner original(params);
  if (c.is_code()) {
    const auto splits = load_code_splits(c, in);
    for (const auto& e : evals) {
      const auto acc = code::category_accuracy(original, subsample(find_split(splits, e.name), c.evaluate.subsample), c.threads);
      auto out = open_out(dir / ("category_" + e.name + ".csv"));
      code::write_category_csv(out, e.name, acc);
    }
  } else {
    const auto bundle = load_bundle(c, in);
    const int layer = target_layer(c, in), head = target_head(c, in);
    for (const auto& e : evals) {
      const auto ds = subsample(bundle.get(e.name), c.evaluate.subsample);
      auto grid = open_out(dir / ("grid_" + e.name + ".csv"));
      faithfulness::write_grid_csv(grid, faithfulness::depth_error_grid(original, ds, c.dyck.min_distance, c.threads));
      auto base = open_out(dir / ("profile_original_" + e.name + ".csv"));
      faithfulness::write_profile_csv(
          base, faithfulness::attention_error_profile(original, original, layer, head, ds,
                                                      c.dyck.min_distance, c.threads));
      for (const auto& f : fits) {
        auto prof = open_out(dir / ("profile_" + fitted_stem(f.spec) + "_" + e.name + ".csv"));
        faithfulness::write_profile_csv(
            prof, faithfulness::attention_error_profile(params, f, ds, c.dyck.min_distance, c.threads));
      }
    }
  }
  write_snapshot(dir, c, "evaluate");
  return 0;
}

int sweep(const ExperimentConfig& c, const Inputs& in) {
  const auto params = load_params(c, in);
  const auto seqs = simplify::select_fit_sequences(fit_pool(c, in), fit_sample(c));
  const auto evals = eval_sets(c, in);
  const fs::path dir = out_dir(c) / "sweep";
  fs::create_directories(dir);
  faithfulness::EvalOptions opts{c.evaluate.correct_only, c.threads};
  std::vector<faithfulness::FaithfulnessRecord> records;
  for (const auto& name : c.simplify.kinds) {
    simplify::SimplifierSpec base;
    base.layer = target_layer(c, in);
    base.head = target_head(c, in);
    base.kind = simplify::kind_from(name);
    base.fit = fit_sample(c);
    for (auto& r : faithfulness::sweep(params, base, strengths_for(c, base.kind), seqs, evals, opts)) {
      say(in, record_line(r));
      records.push_back(std::move(r));
    }
  }
  write_records(dir, records);
  if (c.is_code()) {
    const auto splits = load_code_splits(c, in);
    std::vector<code::CodeSplit> subs;
    for (const auto& s : splits) {
      if (s.name != code::kCodeTrain) subs.push_back(subsample(s, c.evaluate.subsample));
    }
    std::vector<const code::CodeSplit*> ptrs;
    for (const auto& s : subs) ptrs.push_back(&s);
    code::SweepOptions so;
    so.ranks = c.simplify.ranks;
    so.fit_sequences = c.simplify.fit_sequences;
    so.seed = c.seed;
    so.threads = c.threads;
    const auto head_records = code::per_head_sweep(params, find_split(splits, c.simplify.fit_split), ptrs, so);
    auto hs = open_out(dir / "head_sweep.csv");
    code::write_head_sweep_csv(hs, head_records);
    const auto langs = code_language_splits(splits);
    auto gaps = open_out(dir / "gaps.csv");
    gaps << "layer,head,rank,category,gap_correct_only,gap_all\n";
    std::vector<std::string> categories{"all"};
    for (auto cat : code::all_categories()) categories.push_back(code::to_string(cat));
    for (int l = 0; l < params.config.layers; ++l) {
      for (int h = 0; h < params.config.heads; ++h) {
        for (int r : c.simplify.ranks) {
          for (const auto& cat : categories) {
            gaps << l << ',' << h << ',' << r << ',' << cat << ','
                 << faithfulness::format_value(code::generalization_gap(head_records, l, h, r, cat, code::kCodeHeldout, langs, true))
                 << ','
                 << faithfulness::format_value(code::generalization_gap(head_records, l, h, r, cat, code::kCodeHeldout, langs, false))
                 << '\n';
          }
        }
      }
    }
  }
  write_snapshot(dir, c, "sweep");
  return 0;
}

int report(const ExperimentConfig& c, const Inputs& in) {
  const fs::path dir = out_dir(c) / "report";
  fs::create_directories(dir);
  std::size_t charts = 0;
  auto emit = [&](const std::string& name, const std::string& svg) {
    write_text(dir / name, svg);
    ++charts;
  };
  for (const char* stage : {"sweep", "eval"}) {
    const fs::path records_file = out_dir(c) / stage / "records_wide.csv";
    if (!fs::exists(records_file)) continue;
    const auto records = faithfulness::read_records_wide(records_file);
    std::map<std::string, std::vector<faithfulness::FaithfulnessRecord>> by_kind;
    for (const auto& r : records) by_kind[r.key.simplifier].push_back(r);
    for (const auto& [kind, rs] : by_kind) {
      for (const auto& m : c.report.metrics) {
        emit(std::string(stage) + "_" + kind + "_" + m + ".svg", faithfulness::sweep_chart(rs, m));
      }
    }
  }
  const fs::path eval_dir = out_dir(c) / "eval";
  if (fs::exists(eval_dir)) {
    std::vector<fs::path> grids;
    for (const auto& e : fs::directory_iterator(eval_dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("grid_", 0) == 0 && e.path().extension() == ".csv") grids.push_back(e.path());
    }
    std::sort(grids.begin(), grids.end());
    for (const auto& g : grids) {
      faithfulness::DepthErrorGrid grid;
      std::ifstream f(g);
      std::string line;
      std::getline(f, line);
      while (std::getline(f, line)) {
        int q = 0, m = 0;
        unsigned long long hits = 0, total = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%llu,%llu", &q, &m, &hits, &total) == 4) {
          grid.cells[{q, m}] = {hits, total};
        }
      }
      const std::string split = g.stem().string().substr(5);
      emit("grid_" + split + ".svg", faithfulness::grid_chart("Closing-bracket accuracy, " + split, grid));
    }
  }
  // Cluster profiles need the model and the fit sample.
  const fs::path index = out_dir(c) / "simplifiers" / "index.csv";
  const fs::path ckpt = in.checkpoint ? *in.checkpoint : out_dir(c) / "train" / "final.ckpt";
  if (!c.is_code() && fs::exists(index) && fs::exists(ckpt)) {
    std::optional<model::ModelParameters<float>> params;
    std::optional<dyck::Dataset> sample;
    for (const auto& file : fitted_files(c, in)) {
      const auto fitted = simplify::load_fitted(file);
      if (fitted.spec.kind != simplify::Kind::KMeans) continue;
      if (!params) {
        params = load_params(c, in);
        sample = as_dataset(c.simplify.fit_split, c.dyck.spec.bracket_types,
                            simplify::select_fit_sequences(fit_pool(c, in), fit_sample(c)));
      }
      const auto profile = faithfulness::cluster_depth_profile(fitted, *params, *sample, c.threads);
      const std::string stem = fitted_stem(fitted.spec);
      auto csv = open_out(dir / ("cluster_" + stem + ".csv"));
      faithfulness::write_cluster_csv(csv, profile);
      emit("cluster_" + stem + ".svg",
           faithfulness::svg::cluster_profile("Depth per cluster, k=" + std::to_string(fitted.spec.strength), profile));
    }
  }
  const fs::path head_sweep = out_dir(c) / "sweep" / "head_sweep.csv";
  if (fs::exists(head_sweep)) {
    const auto records = code::read_head_sweep_csv(head_sweep);
    std::set<std::string> splits;
    std::set<std::pair<int, int>> heads;
    for (const auto& r : records) {
      splits.insert(r.split);
      heads.insert({r.layer, r.head});
    }
    std::vector<std::string> langs;
    for (const auto& s : splits) {
      if (s != code::kCodeHeldout && s != code::kCodeUnseenDepth && s != code::kCodeTrain) langs.push_back(s);
    }
    std::vector<std::string> categories{"all"};
    for (auto cat : code::all_categories()) categories.push_back(code::to_string(cat));
    for (const auto& cat : categories) {
      std::vector<std::string> labels;
      std::vector<double> values;
      for (const auto& [l, h] : heads) {
        const auto g = code::generalization_gap(records, l, h, c.report.gap_rank, cat, code::kCodeHeldout, langs);
        if (!g) continue;
        labels.push_back("L" + std::to_string(l + 1) + "H" + std::to_string(h + 1));
        values.push_back(*g);
      }
      if (labels.empty()) continue;
      emit("gap_" + cat + ".svg",
           faithfulness::svg::bar_chart("Same-prediction gap (in-domain minus other languages), " + cat +
                                            ", rank " + std::to_string(c.report.gap_rank),
                                        labels, values));
    }
  }
  write_snapshot(dir, c, "report");
  say(in, std::to_string(charts) + " charts written to " + dir.string());
  if (charts == 0) {
    std::cerr << "proxylab: warning: nothing to report; run sweep or evaluate first\n";
  }
  return 0;
}

int inspect_head(const ExperimentConfig& c, const Inputs& in) {
  const auto params = load_params(c, in);
  const int layer = target_layer(c, in), head = target_head(c, in);
  std::vector<std::vector<Token>> seqs;
  if (c.is_code()) {
    const auto splits = load_code_splits(c, in);
    seqs = code::token_sequences(find_split(splits, c.inspect.split.empty() ? code::kCodeHeldout : c.inspect.split));
  } else {
    const auto bundle = load_bundle(c, in);
    seqs = model::token_sequences(bundle.get(c.inspect.split.empty() ? dyck::kIid : c.inspect.split));
  }
  seqs = head_of(seqs, c.inspect.sequences);
  const auto ins = code::inspect_head(params, layer, head, seqs, c.inspect.first_n, c.threads);
  const std::string tag = "L" + std::to_string(layer) + "H" + std::to_string(head);
  const fs::path dir = out_dir(c) / "inspect";
  fs::create_directories(dir);
  auto scores = open_out(dir / (tag + "_scores.csv"));
  scores << "layer,head,sequences,previous_token,previous_token_n,induction,induction_n\n"
         << layer << ',' << head << ',' << seqs.size() << ','
         << faithfulness::format_value(ins.previous_token_score()) << ',' << ins.previous_token_count
         << ',' << faithfulness::format_value(ins.induction_score()) << ',' << ins.induction_count << '\n';
  for (std::size_t s = 0; s < std::min(c.inspect.charts, ins.attention.size()); ++s) {
    const auto& a = ins.attention[s];
    auto csv = open_out(dir / (tag + "_attention_" + std::to_string(s) + ".csv"));
    csv << "query,key,weight\n";
    std::vector<std::string> labels;
    std::vector<std::optional<double>> cells;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      labels.push_back(token_label(c, seqs[s][i]));
      for (std::size_t j = 0; j < a.cols(); ++j) {
        if (j <= i) {
          csv << i << ',' << j << ',' << faithfulness::format_value(a(i, j)) << '\n';
          cells.emplace_back(a(i, j));
        } else {
          cells.emplace_back();
        }
      }
    }
    write_text(dir / (tag + "_attention_" + std::to_string(s) + ".svg"),
               faithfulness::svg::heatmap("Attention, layer " + std::to_string(layer + 1) + " head " +
                                              std::to_string(head + 1) + ", sequence " + std::to_string(s),
                                          labels, labels, cells));
  }
  write_snapshot(dir, c, "inspect-head");
  say(in, tag + ": previous-token " + faithfulness::format_value(ins.previous_token_score()) +
              ", induction " + faithfulness::format_value(ins.induction_score()));
  return 0;
}

}  // namespace proxylab::workbench
