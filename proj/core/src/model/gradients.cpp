#include "proxylab/model/gradients.hpp"

#include <stdexcept>

namespace proxylab::model {

template <typename T>
LossAndGradients<T> loss_and_gradients(const ModelParameters<T>& params,
                                       std::span<const std::span<const Token>> batch) {
  Tape<T> tape(true);
  std::vector<Var> vars;
  params.visit([&](const std::string&, const Tensor<T>& t) { vars.push_back(tape.reference(t, true)); });
  PackedForward<T> fwd = forward_packed(tape, params, batch, ForwardOptions<T>{}, vars);
  const Var l = sequence_loss(tape, fwd.logits, batch, fwd.segments);
  tape.backward(l);
  LossAndGradients<T> out;
  out.loss = static_cast<double>(tape.value(l)[0]);
  for (Var v : vars) {
    out.gradients.push_back(tape.has_grad(v) ? tape.grad(v) : Tensor<T>(tape.value(v).shape()));
  }
  return out;
}

template <typename T>
Tensor<T> flatten(const ModelParameters<T>& params) {
  std::vector<T> flat;
  params.visit([&](const std::string&, const Tensor<T>& t) {
    flat.insert(flat.end(), t.values().begin(), t.values().end());
  });
  const std::size_t n = flat.size();
  return Tensor<T>({n}, std::move(flat));
}

template <typename T>
void unflatten(const Tensor<T>& flat, ModelParameters<T>& params) {
  std::size_t offset = 0;
  params.visit([&](const std::string&, Tensor<T>& t) {
    if (offset + t.size() > flat.size()) throw std::invalid_argument("unflatten: vector too short");
    std::copy_n(flat.data() + offset, t.size(), t.data());
    offset += t.size();
  });
  if (offset != flat.size()) throw std::invalid_argument("unflatten: vector too long");
}

ScalarFunction loss_function(const ModelConfig& config, std::vector<std::vector<Token>> batch) {
  return [config, batch = std::move(batch)](const Tensor<double>& point,
                                            Tensor<double>* gradient) {
    ModelParameters<double> p = allocate_model<double>(config);
    unflatten(point, p);
    std::vector<std::span<const Token>> views(batch.begin(), batch.end());
    if (gradient == nullptr) return loss(p, std::span<const std::span<const Token>>(views));
    LossAndGradients<double> lg = loss_and_gradients(p, std::span<const std::span<const Token>>(views));
    std::size_t offset = 0;
    *gradient = Tensor<double>(point.shape());
    for (const auto& g : lg.gradients) {
      std::copy_n(g.data(), g.size(), gradient->data() + offset);
      offset += g.size();
    }
    return lg.loss;
  };
}

template LossAndGradients<float> loss_and_gradients<float>(const ModelParameters<float>&,
                                                           std::span<const std::span<const Token>>);
template LossAndGradients<double> loss_and_gradients<double>(
    const ModelParameters<double>&, std::span<const std::span<const Token>>);
template Tensor<float> flatten<float>(const ModelParameters<float>&);
template Tensor<double> flatten<double>(const ModelParameters<double>&);
template void unflatten<float>(const Tensor<float>&, ModelParameters<float>&);
template void unflatten<double>(const Tensor<double>&, ModelParameters<double>&);

}  // namespace proxylab::model
