#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "commands.hpp"

namespace wb = proxylab::workbench;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  wb::Inputs inputs;
  std::optional<std::string> data, checkpoint;
  std::vector<std::string> fitted;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

wb::ExperimentConfig resolve(Globals& g) {
  wb::ExperimentConfig c = g.config.empty() ? wb::parse_config(nlohmann::json::object())
                                            : wb::load_config(g.config);
  // flag > environment > config file
  if (auto e = env("PROXYLAB_OUT")) c.out = *e;
  if (auto e = env("PROXYLAB_THREADS")) {
    try {
      c.threads = std::stoi(*e);
    } catch (const std::exception&) {
      throw wb::ConfigError("PROXYLAB_THREADS is not an integer: " + *e);
    }
  }
  if (g.out) c.out = *g.out;
  if (g.threads) c.threads = *g.threads;
  if (c.threads < 1) throw wb::ConfigError("threads must be >= 1");
  if (g.seed) {
    c.seed = *g.seed;
    c.train.seed = *g.seed;
    c.code.ingest.seed = *g.seed;
  }
  if (g.data) g.inputs.data = *g.data;
  if (g.checkpoint) g.inputs.checkpoint = *g.checkpoint;
  for (const auto& f : g.fitted) g.inputs.fitted.emplace_back(f);
  if (g.inputs.layer && (*g.inputs.layer < 0 || *g.inputs.layer >= c.model.layers)) {
    throw wb::ConfigError("--layer out of range for the configured model");
  }
  if (g.inputs.head && (*g.inputs.head < 0 || *g.inputs.head >= c.model.heads)) {
    throw wb::ConfigError("--head out of range for the configured model");
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Large activation buffers are reallocated every step; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"proxylab: train small transformers and measure how faithful simplified attention heads are"};
  app.set_version_flag("--version", std::string(wb::version()));
  app.require_subcommand(1);

  Globals g;
  app.add_option("-c,--config", g.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--out", g.out, "output directory (env PROXYLAB_OUT)");
  app.add_option("--threads", g.threads, "worker threads (env PROXYLAB_THREADS)");
  app.add_flag("-q,--quiet", g.inputs.quiet, "suppress progress output");

  using Command = std::function<int(const wb::ExperimentConfig&, const wb::Inputs&)>;
  std::map<CLI::App*, Command> commands;
  auto add = [&](const char* name, const char* help, Command fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    commands[sub] = std::move(fn);
    return sub;
  };
  auto with_data = [&](CLI::App* s) { s->add_option("--data", g.data, "split directory (default <out>/data or <out>/code)"); };
  auto with_ckpt = [&](CLI::App* s) { s->add_option("--checkpoint", g.checkpoint, "model checkpoint (default <out>/train/final.ckpt)"); };
  auto with_head = [&](CLI::App* s) {
    s->add_option("--layer", g.inputs.layer, "target layer (0-based)");
    s->add_option("--head", g.inputs.head, "target head (0-based)");
  };

  add("gen-data", "generate Dyck splits (or ingest code for task=code)", wb::gen_data);
  add("code-ingest", "filter and split a code corpus", wb::code_ingest);
  auto* train = add("train", "train a model", wb::train);
  with_data(train);
  auto* fit = add("fit-simplifier", "fit simplifiers for one head", wb::fit_simplifier);
  with_data(fit);
  with_ckpt(fit);
  with_head(fit);
  auto* eval = add("evaluate", "evaluate fitted simplifiers", wb::evaluate);
  with_data(eval);
  with_ckpt(eval);
  with_head(eval);
  eval->add_option("--fitted", g.fitted, "fitted simplifier files (default: <out>/simplifiers/index.csv)");
  auto* sw = add("sweep", "fit and evaluate across strengths", wb::sweep);
  with_data(sw);
  with_ckpt(sw);
  with_head(sw);
  auto* rep = add("report", "render charts from earlier stages", wb::report);
  with_ckpt(rep);
  with_data(rep);
  auto* ins = add("inspect-head", "attention maps and head scores", wb::inspect_head);
  with_data(ins);
  with_ckpt(ins);
  with_head(ins);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const wb::ExperimentConfig config = resolve(g);
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) return fn(config, g.inputs);
    }
  } catch (const std::exception& e) {
    std::cerr << "proxylab: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
