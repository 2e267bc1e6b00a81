#include <algorithm>
#include <cmath>
#include <map>

#include "cwi/error.hpp"
#include "cwi/random.hpp"
#include "cwi/tagger.hpp"

namespace cwi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index idx(std::size_t v) { return static_cast<Index>(v); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Derived>
VectorXd sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

LstmDirectionParams zero_direction(std::size_t d, std::size_t h) {
  return {MatrixXd::Zero(idx(4 * h), idx(d)), MatrixXd::Zero(idx(4 * h), idx(h)),
          VectorXd::Zero(idx(4 * h))};
}

void run_direction(const LstmDirectionParams& p, const MatrixXd& inputs,
                   bool reverse, DirectionCache& cache) {
  const Index h = p.u.cols();
  const Index steps = inputs.cols();
  MatrixXd pre = p.w * inputs;
  pre.colwise() += p.b;
  for (MatrixXd* m : {&cache.i, &cache.f, &cache.g, &cache.o, &cache.c, &cache.h}) {
    m->resize(h, steps);
  }
  VectorXd h_prev = VectorXd::Zero(h);
  VectorXd c_prev = VectorXd::Zero(h);
  for (Index step = 0; step < steps; ++step) {
    const Index t = reverse ? steps - 1 - step : step;
    const VectorXd z = pre.col(t) + p.u * h_prev;
    const VectorXd i = sigmoid(z.segment(0, h));
    const VectorXd f = sigmoid(z.segment(h, h));
    const VectorXd g = z.segment(2 * h, h).array().tanh().matrix();
    const VectorXd o = sigmoid(z.segment(3 * h, h));
    const VectorXd c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    const VectorXd hidden = o.cwiseProduct(c.array().tanh().matrix());
    cache.i.col(t) = i;
    cache.f.col(t) = f;
    cache.g.col(t) = g;
    cache.o.col(t) = o;
    cache.c.col(t) = c;
    cache.h.col(t) = hidden;
    h_prev = hidden;
    c_prev = c;
  }
}

// Backpropagation through one direction. d_hidden holds dLoss/dh_t coming
// from the output head, one column per position.
void backprop_direction(const LstmDirectionParams& p, const DirectionCache& cache,
                        const MatrixXd& inputs, bool reverse,
                        const MatrixXd& d_hidden, LstmDirectionParams& grad) {
  const Index h = p.u.cols();
  const Index steps = inputs.cols();
  MatrixXd dz(4 * h, steps);
  MatrixXd h_prev_all = MatrixXd::Zero(h, steps);
  VectorXd dh_next = VectorXd::Zero(h);
  VectorXd dc_next = VectorXd::Zero(h);

  // Visit positions in the reverse of the order the forward pass used.
  for (Index step = steps - 1; step >= 0; --step) {
    const Index t = reverse ? steps - 1 - step : step;
    const bool has_prev = step > 0;
    const Index prev = reverse ? t + 1 : t - 1;

    const auto i = cache.i.col(t).array();
    const auto f = cache.f.col(t).array();
    const auto g = cache.g.col(t).array();
    const auto o = cache.o.col(t).array();
    const Eigen::ArrayXd tanh_c = cache.c.col(t).array().tanh();
    const Eigen::ArrayXd c_prev =
        has_prev ? Eigen::ArrayXd(cache.c.col(prev).array()) : Eigen::ArrayXd::Zero(h);
    if (has_prev) h_prev_all.col(t) = cache.h.col(prev);

    const Eigen::ArrayXd dh = d_hidden.col(t).array() + dh_next.array();
    const Eigen::ArrayXd dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next.array();
    dz.col(t).segment(0, h) = (dc * g * i * (1.0 - i)).matrix();
    dz.col(t).segment(h, h) = (dc * c_prev * f * (1.0 - f)).matrix();
    dz.col(t).segment(2 * h, h) = (dc * i * (1.0 - g * g)).matrix();
    dz.col(t).segment(3 * h, h) = (dh * tanh_c * o * (1.0 - o)).matrix();

    dc_next = (dc * f).matrix();
    dh_next.noalias() = p.u.transpose() * dz.col(t);
  }
  grad.w.noalias() = dz * inputs.transpose();
  grad.u.noalias() = dz * h_prev_all.transpose();
  grad.b = dz.rowwise().sum();
}

}  // namespace

BiLstmParams BiLstmParams::zeros(std::size_t input_dim, std::size_t hidden) {
  BiLstmParams p;
  p.forward = zero_direction(input_dim, hidden);
  p.backward = zero_direction(input_dim, hidden);
  p.head_w = VectorXd::Zero(idx(2 * hidden));
  p.head_b = 0.0;
  return p;
}

std::vector<std::span<double>> BiLstmParams::tensors() {
  const auto s = [](auto& m) {
    return std::span<double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  return {s(forward.w), s(forward.u),  s(forward.b), s(backward.w),
          s(backward.u), s(backward.b), s(head_w),    std::span<double>(&head_b, 1)};
}

std::vector<std::span<const double>> BiLstmParams::tensors() const {
  const auto s = [](const auto& m) {
    return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  return {s(forward.w),  s(forward.u),  s(forward.b),
          s(backward.w), s(backward.u), s(backward.b),
          s(head_w),     std::span<const double>(&head_b, 1)};
}

std::vector<std::string> BiLstmParams::tensor_names() {
  return {"forward.w",  "forward.u",  "forward.b", "backward.w",
          "backward.u", "backward.b", "head.w",    "head.b"};
}

std::size_t BiLstmParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

BiLstmParams& BiLstmParams::operator+=(const BiLstmParams& other) {
  auto mine = tensors();
  const auto theirs = other.tensors();
  for (std::size_t k = 0; k < mine.size(); ++k) {
    for (std::size_t i = 0; i < mine[k].size(); ++i) mine[k][i] += theirs[k][i];
  }
  return *this;
}

BiLstmParams& BiLstmParams::operator*=(double scale) {
  for (auto t : tensors()) {
    for (double& v : t) v *= scale;
  }
  return *this;
}

double BiLstmParams::squared_norm() const {
  double sum = 0.0;
  for (const auto& t : tensors()) {
    for (double v : t) sum += v * v;
  }
  return sum;
}

bool BiLstmParams::operator==(const BiLstmParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::equal(a[k].begin(), a[k].end(), b[k].begin(), b[k].end())) return false;
  }
  return true;
}

TaggerModel init_model(std::size_t input_dim, std::size_t hidden,
                       std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0) {
    throw ValidationError("input and hidden sizes must be positive");
  }
  TaggerModel model;
  model.input_dim = input_dim;
  model.hidden = hidden;
  model.params = BiLstmParams::zeros(input_dim, hidden);

  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto tensor : model.params.tensors()) {
    for (double& v : tensor) {
      // Open interval: u in (0, 1) never hits the endpoints.
      const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
      v = scale * (2.0 * u - 1.0);
    }
  }
  const Index h = idx(hidden);
  model.params.forward.b.segment(h, h).setOnes();
  model.params.backward.b.segment(h, h).setOnes();
  return model;
}

ForwardCache forward(const TaggerModel& model, const MatrixXd& inputs) {
  if (inputs.cols() > 0 && inputs.rows() != idx(model.input_dim)) {
    throw ValidationError("input vectors have length " + std::to_string(inputs.rows()) +
                          ", model expects " + std::to_string(model.input_dim));
  }
  ForwardCache cache;
  cache.model = &model;
  cache.model_version = model.version;
  cache.inputs = inputs;
  run_direction(model.params.forward, inputs, false, cache.forward);
  run_direction(model.params.backward, inputs, true, cache.backward);

  const Index h = idx(model.hidden);
  const VectorXd logits =
      (cache.forward.h.transpose() * model.params.head_w.head(h) +
       cache.backward.h.transpose() * model.params.head_w.tail(h))
          .array() +
      model.params.head_b;
  cache.probabilities = sigmoid(logits);
  return cache;
}

std::vector<VectorXd> forward_batch(const TaggerModel& model,
                                    std::span<const MatrixXd> inputs) {
  std::vector<VectorXd> out(inputs.size());
  std::map<Index, std::vector<std::size_t>> by_length;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (inputs[s].cols() > 0 && inputs[s].rows() != idx(model.input_dim)) {
      throw ValidationError("input vectors do not match the model dimension");
    }
    by_length[inputs[s].cols()].push_back(s);
  }
  const Index h = idx(model.hidden);
  const auto& P = model.params;

  for (const auto& [steps, members] : by_length) {
    const Index batch = idx(members.size());
    // hidden states per direction, per step: h x batch
    std::vector<MatrixXd> h_fwd(static_cast<std::size_t>(steps));
    std::vector<MatrixXd> h_bwd(static_cast<std::size_t>(steps));
    for (int dir = 0; dir < 2; ++dir) {
      const LstmDirectionParams& p = dir == 0 ? P.forward : P.backward;
      auto& store = dir == 0 ? h_fwd : h_bwd;
      MatrixXd hidden = MatrixXd::Zero(h, batch);
      MatrixXd cell = MatrixXd::Zero(h, batch);
      MatrixXd x(idx(model.input_dim), batch);
      for (Index step = 0; step < steps; ++step) {
        const Index t = dir == 0 ? step : steps - 1 - step;
        for (Index b = 0; b < batch; ++b) {
          x.col(b) = inputs[members[static_cast<std::size_t>(b)]].col(t);
        }
        MatrixXd z = p.w * x + p.u * hidden;
        z.colwise() += p.b;
        const auto gate = [&](Index k) { return z.middleRows(k * h, h).array(); };
        const Eigen::ArrayXXd i = gate(0).unaryExpr([](double v) { return sigmoid(v); });
        const Eigen::ArrayXXd f = gate(1).unaryExpr([](double v) { return sigmoid(v); });
        const Eigen::ArrayXXd g = gate(2).tanh();
        const Eigen::ArrayXXd o = gate(3).unaryExpr([](double v) { return sigmoid(v); });
        cell = (f * cell.array() + i * g).matrix();
        hidden = (o * cell.array().tanh()).matrix();
        store[static_cast<std::size_t>(t)] = hidden;
      }
    }
    for (Index b = 0; b < batch; ++b) {
      VectorXd probs(steps);
      for (Index t = 0; t < steps; ++t) {
        const double logit =
            P.head_w.head(h).dot(h_fwd[static_cast<std::size_t>(t)].col(b)) +
            P.head_w.tail(h).dot(h_bwd[static_cast<std::size_t>(t)].col(b)) + P.head_b;
        probs(t) = sigmoid(logit);
      }
      out[members[static_cast<std::size_t>(b)]] = std::move(probs);
    }
  }
  return out;
}

double loss(const VectorXd& probabilities, std::span<const int> labels) {
  if (static_cast<std::size_t>(probabilities.size()) != labels.size()) {
    throw ValidationError("loss: " + std::to_string(probabilities.size()) +
                          " probabilities for " + std::to_string(labels.size()) +
                          " labels");
  }
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const double p = std::clamp(probabilities(idx(t)), kProbabilityClamp,
                                1.0 - kProbabilityClamp);
    sum -= labels[t] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(labels.size());
}

BiLstmParams backward(const TaggerModel& model, const ForwardCache& cache,
                      std::span<const int> labels) {
  if (cache.model != &model || cache.model_version != model.version) {
    throw ValidationError("stale forward cache: parameters changed since forward()");
  }
  const Index steps = cache.inputs.cols();
  if (static_cast<std::size_t>(steps) != labels.size()) {
    throw ValidationError("backward: label count does not match the sequence");
  }
  BiLstmParams grad = BiLstmParams::zeros(model.input_dim, model.hidden);
  if (steps == 0) return grad;

  const Index h = idx(model.hidden);
  VectorXd d_logit(steps);
  for (Index t = 0; t < steps; ++t) {
    d_logit(t) = (cache.probabilities(t) - labels[static_cast<std::size_t>(t)]) /
                 static_cast<double>(steps);
  }
  grad.head_w.head(h) = cache.forward.h * d_logit;
  grad.head_w.tail(h) = cache.backward.h * d_logit;
  grad.head_b = d_logit.sum();

  const MatrixXd dh_fwd = model.params.head_w.head(h) * d_logit.transpose();
  const MatrixXd dh_bwd = model.params.head_w.tail(h) * d_logit.transpose();
  backprop_direction(model.params.forward, cache.forward, cache.inputs, false,
                     dh_fwd, grad.forward);
  backprop_direction(model.params.backward, cache.backward, cache.inputs, true,
                     dh_bwd, grad.backward);
  return grad;
}

RmspropState init_rmsprop_state(const TaggerModel& model) {
  return {BiLstmParams::zeros(model.input_dim, model.hidden)};
}

void rmsprop_step(TaggerModel& model, const BiLstmParams& grads,
                  RmspropState& state, const RmspropConfig& config) {
  auto params = model.params.tensors();
  const auto g = grads.tensors();
  auto s = state.mean_square.tensors();
  if (params.size() != g.size() || params.size() != s.size()) {
    throw ValidationError("RMSprop: parameter structure mismatch");
  }
  for (const auto& t : g) {
    for (double v : t) {
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient");
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    rmsprop_update(params[k], g[k], s[k], config);
  }
  ++model.version;
}

BatchGradient batch_gradients(const TaggerModel& model,
                              std::span<const EncodedSequence> data,
                              std::span<const std::size_t> indices,
                              Execution exec) {
  for (std::size_t i : indices) {
    if (i >= data.size()) throw ValidationError("batch index out of range");
    if (static_cast<std::size_t>(data[i].inputs.cols()) != data[i].labels.size()) {
      throw ValidationError("sequence has mismatched inputs and labels");
    }
  }
  BatchGradient result;
  result.grad_sum = BiLstmParams::zeros(model.input_dim, model.hidden);

  if (exec == Execution::kSerial) {
    for (std::size_t i : indices) {
      const ForwardCache cache = forward(model, data[i].inputs);
      result.loss_sum += loss(cache.probabilities, data[i].labels);
      result.grad_sum += backward(model, cache, data[i].labels);
    }
    return result;
  }

  std::vector<BiLstmParams> grads(indices.size());
  std::vector<double> losses(indices.size());
  const auto n = static_cast<long>(indices.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    const auto& seq = data[indices[static_cast<std::size_t>(k)]];
    const ForwardCache cache = forward(model, seq.inputs);
    losses[static_cast<std::size_t>(k)] = loss(cache.probabilities, seq.labels);
    grads[static_cast<std::size_t>(k)] = backward(model, cache, seq.labels);
  }
  // Fixed reduction order keeps the sum identical to the serial path.
  for (std::size_t k = 0; k < indices.size(); ++k) {
    result.loss_sum += losses[k];
    result.grad_sum += grads[k];
  }
  return result;
}

}  // namespace cwi
