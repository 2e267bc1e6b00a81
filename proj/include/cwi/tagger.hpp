#ifndef CWI_TAGGER_HPP
#define CWI_TAGGER_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cwi/classifier.hpp"
#include "cwi/corpus.hpp"
#include "cwi/embeddings.hpp"
#include "cwi/kernels.hpp"
#include "cwi/optimizer.hpp"

namespace cwi {

// One LSTM direction. Gate blocks are stacked in the order input, forget,
// cell candidate, output; each block has `hidden` rows.
struct LstmDirectionParams {
  Eigen::MatrixXd w;  // 4h x d
  Eigen::MatrixXd u;  // 4h x h
  Eigen::VectorXd b;  // 4h
};

// Parameters of the bidirectional tagger; also used for gradients and
// optimizer accumulators, which share the shapes.
struct BiLstmParams {
  LstmDirectionParams forward;
  LstmDirectionParams backward;
  Eigen::VectorXd head_w;  // 2h, applied to [h_forward; h_backward]
  double head_b = 0.0;

  static BiLstmParams zeros(std::size_t input_dim, std::size_t hidden);

  // Tensor views in a fixed order: forward.{w,u,b}, backward.{w,u,b},
  // head_w, head_b. Eigen storage is column-major.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  static std::vector<std::string> tensor_names();

  std::size_t parameter_count() const;
  BiLstmParams& operator+=(const BiLstmParams& other);
  BiLstmParams& operator*=(double scale);
  double squared_norm() const;
  bool operator==(const BiLstmParams& other) const;
};

struct TaggerModel {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  double threshold = 0.5;
  BiLstmParams params;
  // Bumped by every optimizer step; forward caches remember it.
  std::uint64_t version = 0;
};

// Weights uniform in (-s, s), s = 1/sqrt(hidden); forget-gate biases 1.0.
TaggerModel init_model(std::size_t input_dim, std::size_t hidden,
                       std::uint64_t seed);

// Activations of one direction, one column per token position.
struct DirectionCache {
  Eigen::MatrixXd i, f, g, o, c, h;  // each hidden x T
};

struct ForwardCache {
  const TaggerModel* model = nullptr;
  std::uint64_t model_version = 0;
  Eigen::MatrixXd inputs;  // d x T
  DirectionCache forward;
  DirectionCache backward;
  Eigen::VectorXd probabilities;  // T
};

// inputs: one column per token. An empty sequence gives empty output.
ForwardCache forward(const TaggerModel& model, const Eigen::MatrixXd& inputs);

// Per-sequence probabilities for several sequences. Sequences of equal
// length are stacked and advanced together.
std::vector<Eigen::VectorXd> forward_batch(
    const TaggerModel& model, std::span<const Eigen::MatrixXd> inputs);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross-entropy over tokens, probabilities clamped to
// [1e-7, 1 - 1e-7]. Zero for an empty sequence.
double loss(const Eigen::VectorXd& probabilities, std::span<const int> labels);

// Gradient of loss() for the cached sequence. Throws ValidationError when
// the cache was produced by another model or an older parameter version.
BiLstmParams backward(const TaggerModel& model, const ForwardCache& cache,
                      std::span<const int> labels);

struct RmspropState {
  BiLstmParams mean_square;
};

RmspropState init_rmsprop_state(const TaggerModel& model);

void rmsprop_step(TaggerModel& model, const BiLstmParams& grads,
                  RmspropState& state, const RmspropConfig& config);

// Maps tokens to shared-space vectors using the table of the sequence's
// language.
class SharedSpace {
 public:
  SharedSpace() = default;
  explicit SharedSpace(std::map<Language, EmbeddingTable> tables);

  std::size_t dim() const { return dim_; }
  bool has(Language language) const { return tables_.count(language) != 0; }
  const EmbeddingTable& table(Language language) const;

  // d x T; OOV tokens become zero columns.
  Eigen::MatrixXd encode(const TokenSequence& seq) const;

 private:
  std::map<Language, EmbeddingTable> tables_;
  std::size_t dim_ = 0;
};

struct EncodedSequence {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
};

struct BatchGradient {
  BiLstmParams grad_sum;  // sum of per-sequence gradients
  double loss_sum = 0.0;  // sum of per-sequence losses
};

// Gradients for data[indices]. kParallel computes sequences concurrently
// and sums them in index order, giving bit-identical results to kSerial.
BatchGradient batch_gradients(const TaggerModel& model,
                              std::span<const EncodedSequence> data,
                              std::span<const std::size_t> indices,
                              Execution exec);

struct TrainingConfig {
  double learning_rate = 5e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double rho = 0.9;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> gradient_clip = 5.0;  // global L2 norm
  Execution execution = Execution::kParallel;
};

void validate(const TrainingConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  TaggerModel model;
  std::vector<EpochRecord> epochs;
};

using EpochCallback = std::function<void(const EpochRecord&, const TaggerModel&)>;

// Shuffled mini-batches for config.epochs epochs. Per-epoch loss is the mean
// of the per-sequence losses seen during that epoch.
TrainResult train(TaggerModel model, std::span<const EncodedSequence> data,
                  const TrainingConfig& config,
                  const EpochCallback& on_epoch = {});

TrainResult train(TaggerModel model, std::span<const TokenSequence> sequences,
                  const SharedSpace& space, const TrainingConfig& config,
                  const EpochCallback& on_epoch = {});

// Mean token probability over the given span, thresholded with >=.
InstancePrediction aggregate_span(const Eigen::VectorXd& probabilities,
                                  std::span<const std::size_t> tokens,
                                  double threshold);

class BiLstmClassifier : public InstanceClassifier {
 public:
  // `space` must outlive the classifier.
  BiLstmClassifier(TaggerModel model, const SharedSpace& space,
                   std::string id = "bilstm");

  std::string id() const override { return id_; }
  double threshold() const override { return model_.threshold; }
  double predict_probability(const TokenSequence& seq,
                             std::size_t instance_index) const override;
  std::vector<double> predict_sequence(const TokenSequence& seq) const override;

  const TaggerModel& model() const { return model_; }

 private:
  TaggerModel model_;
  const SharedSpace* space_;
  std::string id_;
};

// Self-describing JSON checkpoint: dims, threshold and every tensor with an
// explicit shape, values in row-major order.
void save_checkpoint(std::ostream& out, const TaggerModel& model);
TaggerModel load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::filesystem::path& path, const TaggerModel& model);
TaggerModel load_checkpoint_file(const std::filesystem::path& path);

}  // namespace cwi

#endif  // CWI_TAGGER_HPP
