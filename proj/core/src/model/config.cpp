#include "proxylab/model/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace proxylab::model {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected a JSON object");
  std::string bad;
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw std::invalid_argument(std::string(what) + ": unknown keys: " + bad);
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

}  // namespace

std::string to_string(NormPlacement p) {
  switch (p) {
    case NormPlacement::Pre: return "pre";
    case NormPlacement::Post: return "post";
    case NormPlacement::None: return "none";
  }
  return "pre";
}

NormPlacement norm_placement_from(std::string_view s) {
  if (s == "pre") return NormPlacement::Pre;
  if (s == "post") return NormPlacement::Post;
  if (s == "none") return NormPlacement::None;
  throw std::invalid_argument("layer norm placement must be pre, post or none, got '" +
                              std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (layers < 0) fail("layers must be >= 0");
  if (heads < 1) fail("heads must be >= 1");
  if (model_dim < 1 || head_dim < 1 || mlp_dim < 1) fail("dimensions must be >= 1");
  if (max_len < 1) fail("max_len must be >= 1");
  if (vocab_size < 2) fail("vocab_size must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

ModelConfig ModelConfig::dyck(int vocab_size, int max_len) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.max_len = max_len;
  return c;
}

ModelConfig ModelConfig::code_full(int vocab_size, int max_len) {
  ModelConfig c;
  c.layers = 4;
  c.heads = 4;
  c.model_dim = 256;
  c.head_dim = 64;
  c.mlp_dim = 512;
  c.vocab_size = vocab_size;
  c.max_len = max_len;
  c.dropout = 0.1;
  return c;
}

ModelConfig ModelConfig::code_desk(int vocab_size, int max_len) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.model_dim = 128;
  c.head_dim = 64;
  c.mlp_dim = 512;
  c.vocab_size = vocab_size;
  c.max_len = max_len;
  c.dropout = 0.1;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (steps < 1) fail("steps must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(peak_lr > 0.0)) fail("peak_lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
}

double TrainConfig::learning_rate(std::size_t step) const {
  if (warmup_steps == 0) return peak_lr;
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(warmup_steps);
  return peak_lr * std::min(s / w, std::sqrt(w / s));
}

std::string to_json(const ModelConfig& c) {
  const json j = {{"layers", c.layers},
                  {"heads", c.heads},
                  {"model_dim", c.model_dim},
                  {"head_dim", c.head_dim},
                  {"mlp_dim", c.mlp_dim},
                  {"max_len", c.max_len},
                  {"vocab_size", c.vocab_size},
                  {"dropout", c.dropout},
                  {"tie_embeddings", c.tie_embeddings},
                  {"norm", to_string(c.norm)}};
  return j.dump();
}

std::string to_json(const TrainConfig& c) {
  const json j = {{"steps", c.steps},
                  {"batch_size", c.batch_size},
                  {"beta1", c.beta1},
                  {"beta2", c.beta2},
                  {"epsilon", c.epsilon},
                  {"weight_decay", c.weight_decay},
                  {"warmup_steps", c.warmup_steps},
                  {"peak_lr", c.peak_lr},
                  {"seed", c.seed},
                  {"eval_every", c.eval_every},
                  {"checkpoint_every", c.checkpoint_every}};
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  const json j = json::parse(text);
  reject_unknown(j,
                 {"layers", "heads", "model_dim", "head_dim", "mlp_dim", "max_len", "vocab_size",
                  "dropout", "tie_embeddings", "norm"},
                 "model config");
  ModelConfig c;
  read(j, "layers", c.layers);
  read(j, "heads", c.heads);
  read(j, "model_dim", c.model_dim);
  read(j, "head_dim", c.head_dim);
  read(j, "mlp_dim", c.mlp_dim);
  read(j, "max_len", c.max_len);
  read(j, "vocab_size", c.vocab_size);
  read(j, "dropout", c.dropout);
  read(j, "tie_embeddings", c.tie_embeddings);
  if (j.contains("norm")) c.norm = norm_placement_from(j["norm"].get<std::string>());
  c.validate();
  return c;
}

TrainConfig train_config_from_json(std::string_view text) {
  const json j = json::parse(text);
  reject_unknown(j,
                 {"steps", "batch_size", "beta1", "beta2", "epsilon", "weight_decay",
                  "warmup_steps", "peak_lr", "seed", "eval_every", "checkpoint_every"},
                 "train config");
  TrainConfig c;
  read(j, "steps", c.steps);
  read(j, "batch_size", c.batch_size);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "epsilon", c.epsilon);
  read(j, "weight_decay", c.weight_decay);
  read(j, "warmup_steps", c.warmup_steps);
  read(j, "peak_lr", c.peak_lr);
  read(j, "seed", c.seed);
  read(j, "eval_every", c.eval_every);
  read(j, "checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

}  // namespace proxylab::model
