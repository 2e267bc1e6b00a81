#include <chrono>
#include <cmath>
#include <numeric>

#include "cwi/error.hpp"
#include "cwi/random.hpp"
#include "cwi/tagger.hpp"

namespace cwi {

SharedSpace::SharedSpace(std::map<Language, EmbeddingTable> tables)
    : tables_(std::move(tables)) {
  for (const auto& [language, table] : tables_) {
    if (dim_ == 0) {
      dim_ = table.dim();
    } else if (table.dim() != dim_) {
      throw ValidationError("shared-space tables disagree on dimension (" +
                            std::to_string(dim_) + " vs " +
                            std::to_string(table.dim()) + " for " +
                            std::string(to_string(language)) + ")");
    }
  }
}

const EmbeddingTable& SharedSpace::table(Language language) const {
  const auto found = tables_.find(language);
  if (found == tables_.end()) {
    throw MissingResourceError("no embeddings for language " +
                               std::string(to_string(language)));
  }
  return found->second;
}

Eigen::MatrixXd SharedSpace::encode(const TokenSequence& seq) const {
  const EmbeddingTable& t = table(seq.language);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dim_),
                      static_cast<Eigen::Index>(seq.tokens.size()));
  for (std::size_t k = 0; k < seq.tokens.size(); ++k) {
    const auto hit = lookup(t, seq.tokens[k].text);
    for (std::size_t i = 0; i < dim_; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = hit.values[i];
    }
  }
  return out;
}

void validate(const TrainingConfig& config) {
  validate(RmspropConfig{config.learning_rate, config.rho, config.epsilon});
  if (config.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (config.batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (config.gradient_clip && !(*config.gradient_clip > 0.0)) {
    throw ValidationError("gradient clip must be > 0");
  }
}

TrainResult train(TaggerModel model, std::span<const EncodedSequence> data,
                  const TrainingConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].labels.empty()) order.push_back(i);
  }
  if (order.empty()) throw ValidationError("training set is empty");

  const RmspropConfig rms{config.learning_rate, config.rho, config.epsilon};
  RmspropState state = init_rmsprop_state(model);
  Rng rng(derive_seed(config.seed, "shuffle"));
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle(order.begin(), order.end(), rng);
    double loss_total = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      ++batch_no;
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      const std::span<const std::size_t> batch(order.data() + first, count);
      BatchGradient bg = batch_gradients(model, data, batch, config.execution);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_no);
      if (!std::isfinite(bg.loss_sum)) {
        throw NumericalError("training diverged (non-finite loss) at " + where);
      }
      loss_total += bg.loss_sum;
      bg.grad_sum *= 1.0 / static_cast<double>(count);
      if (config.gradient_clip) {
        const double norm = std::sqrt(bg.grad_sum.squared_norm());
        if (norm > *config.gradient_clip) bg.grad_sum *= *config.gradient_clip / norm;
      }
      try {
        rmsprop_step(model, bg.grad_sum, state, rms);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at " + where);
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_total / static_cast<double>(order.size());
    record.wall_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - started)
                              .count();
    result.epochs.push_back(record);
    if (on_epoch) on_epoch(record, model);
  }
  result.model = std::move(model);
  return result;
}

TrainResult train(TaggerModel model, std::span<const TokenSequence> sequences,
                  const SharedSpace& space, const TrainingConfig& config,
                  const EpochCallback& on_epoch) {
  if (space.dim() != model.input_dim) {
    throw ValidationError("embedding dimension " + std::to_string(space.dim()) +
                          " does not match the model input dimension " +
                          std::to_string(model.input_dim));
  }
  std::vector<EncodedSequence> data;
  data.reserve(sequences.size());
  for (const auto& seq : sequences) {
    data.push_back({space.encode(seq), seq.labels});
  }
  return train(std::move(model), data, config, on_epoch);
}

InstancePrediction aggregate_span(const Eigen::VectorXd& probabilities,
                                  std::span<const std::size_t> tokens,
                                  double threshold) {
  if (tokens.empty()) throw ValidationError("instance span covers no tokens");
  double sum = 0.0;
  for (std::size_t t : tokens) {
    if (t >= static_cast<std::size_t>(probabilities.size())) {
      throw ValidationError("span token index out of range");
    }
    sum += probabilities(static_cast<Eigen::Index>(t));
  }
  return threshold_probability(sum / static_cast<double>(tokens.size()), threshold);
}

BiLstmClassifier::BiLstmClassifier(TaggerModel model, const SharedSpace& space,
                                   std::string id)
    : model_(std::move(model)), space_(&space), id_(std::move(id)) {
  if (space_->dim() != model_.input_dim) {
    throw ValidationError("embedding dimension " + std::to_string(space_->dim()) +
                          " does not match the model input dimension " +
                          std::to_string(model_.input_dim));
  }
}

double BiLstmClassifier::predict_probability(const TokenSequence& seq,
                                             std::size_t instance_index) const {
  const auto found = seq.instance_refs.find(instance_index);
  if (found == seq.instance_refs.end()) {
    throw ValidationError("instance not part of this sequence");
  }
  const ForwardCache cache = forward(model_, space_->encode(seq));
  return aggregate_span(cache.probabilities, found->second, model_.threshold)
      .probability;
}

std::vector<double> BiLstmClassifier::predict_sequence(const TokenSequence& seq) const {
  const ForwardCache cache = forward(model_, space_->encode(seq));
  std::vector<double> out;
  out.reserve(seq.instance_refs.size());
  for (const auto& [instance, tokens] : seq.instance_refs) {
    out.push_back(aggregate_span(cache.probabilities, tokens, model_.threshold).probability);
  }
  return out;
}

}  // namespace cwi
