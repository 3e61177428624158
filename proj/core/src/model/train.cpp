#include "proxylab/model/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "proxylab/model/checkpoint.hpp"
#include "proxylab/numerics/rng.hpp"

namespace proxylab::model {

void adamw_step(ModelParameters<float>& params, const std::vector<const Tensor<float>*>& grads,
                AdamWState& state, const TrainConfig& config, double lr) {
  ++state.t;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const auto step_size = static_cast<float>(lr / c1);
  const auto decay = static_cast<float>(lr * config.weight_decay);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(config.epsilon);
  const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  std::size_t i = 0;
  params.visit([&](const std::string&, Tensor<float>& p) {
    if (state.m.size() <= i) {
      state.m.emplace_back(p.size(), 0.0f);
      state.v.emplace_back(p.size(), 0.0f);
    }
    const Tensor<float>* g = grads[i];
    float* m = state.m[i].data();
    float* v = state.v[i].data();
    float* w = p.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float gj = g ? (*g)[j] : 0.0f;
      m[j] = fb1 * m[j] + (1.0f - fb1) * gj;
      v[j] = fb2 * v[j] + (1.0f - fb2) * gj * gj;
      const float vhat = v[j] * inv_c2;
      w[j] -= step_size * m[j] / (std::sqrt(vhat) + eps) + decay * w[j];
    }
    ++i;
  });
}

TrainResult train(const ModelConfig& config, const TrainConfig& tc,
                  std::span<const std::vector<Token>> sequences, const TrainCallbacks& callbacks,
                  const std::optional<std::filesystem::path>& diagnostic_path) {
  config.validate();
  tc.validate();
  if (sequences.empty()) throw std::invalid_argument("train: dataset is empty");
  TrainResult result;
  result.params = init_model<float>(config, derive_seed(tc.seed, "init"));
  ModelParameters<float>& params = result.params;

  Rng order_rng(derive_seed(tc.seed, "order"));
  Rng dropout_rng(derive_seed(tc.seed, "dropout"));
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  AdamWState state;
  std::vector<std::span<const Token>> batch;
  for (std::size_t step = 1; step <= tc.steps; ++step) {
    batch.clear();
    while (batch.size() < tc.batch_size) {
      if (cursor == order.size()) {
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      batch.emplace_back(sequences[order[cursor++]]);
    }

    Tape<float> tape(true);
    std::vector<Var> vars;
    params.visit([&](const std::string&, const Tensor<float>& t) {
      vars.push_back(tape.reference(t, true));
    });
    ForwardOptions<float> options;
    options.dropout_rng = &dropout_rng;
    PackedForward<float> fwd = forward_packed(tape, params, std::span(batch), options, vars);
    const Var l = sequence_loss(tape, fwd.logits, std::span(batch), fwd.segments);
    const double loss_value = tape.value(l)[0];
    if (!std::isfinite(loss_value)) {
      if (diagnostic_path) save_checkpoint(*diagnostic_path, params, tc.seed, step - 1);
      throw TrainingDiverged(step, "non-finite loss at step " + std::to_string(step) +
                                       (diagnostic_path ? "; diagnostic checkpoint written to " +
                                                              diagnostic_path->string()
                                                        : std::string()));
    }
    tape.backward(l);
    std::vector<const Tensor<float>*> grads;
    for (Var v : vars) grads.push_back(tape.has_grad(v) ? &tape.grad(v) : nullptr);
    const double lr = tc.learning_rate(step);
    adamw_step(params, grads, state, tc, lr);
    result.losses.push_back(loss_value);
    if (callbacks.on_step) callbacks.on_step({step, loss_value, lr});

    const bool eval_now =
        (tc.eval_every > 0 && step % tc.eval_every == 0) || step == tc.steps;
    if (eval_now) {
      result.curve.push_back({step, "train", "loss", loss_value});
      if (callbacks.evaluate) {
        for (auto& p : callbacks.evaluate(step, params)) result.curve.push_back(std::move(p));
      }
    }
    if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && callbacks.on_checkpoint) {
      callbacks.on_checkpoint(step, params);
    }
  }
  return result;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,split,metric,value\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.10g", p.value);
    out << p.step << ',' << p.split << ',' << p.metric << ',' << buf << '\n';
  }
}

}  // namespace proxylab::model
