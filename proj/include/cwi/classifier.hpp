#ifndef CWI_CLASSIFIER_HPP
#define CWI_CLASSIFIER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cwi/corpus.hpp"

namespace cwi {

struct InstancePrediction {
  int label = 0;
  double probability = 0.0;
};

// Anything that scores annotated spans. The BiLSTM tagger implements it;
// externally fine-tuned models can too.
class InstanceClassifier {
 public:
  virtual ~InstanceClassifier() = default;

  virtual std::string id() const = 0;
  virtual double threshold() const { return 0.5; }

  // Probability in [0, 1] that the instance (a key of seq.instance_refs,
  // i.e. an index into the source corpus) is complex.
  virtual double predict_probability(const TokenSequence& seq,
                                     std::size_t instance_index) const = 0;

  // Probabilities for every instance of seq, in instance_refs order.
  // Override when one pass over the sentence serves all instances.
  virtual std::vector<double> predict_sequence(const TokenSequence& seq) const;
};

// Thresholds predict_probability with the >= convention. Throws
// ValidationError for an instance absent from seq or with no tokens, and
// when the classifier returns a value outside [0, 1].
InstancePrediction predict_instance(const InstanceClassifier& classifier,
                                    const TokenSequence& seq,
                                    std::size_t instance_index);

InstancePrediction threshold_probability(double probability, double threshold);

// Returns the gold label of each instance. Useful as a harness sanity check.
class EchoGoldClassifier : public InstanceClassifier {
 public:
  explicit EchoGoldClassifier(const Corpus& gold) : gold_(&gold) {}
  std::string id() const override { return "echo-gold"; }
  double predict_probability(const TokenSequence& seq,
                             std::size_t instance_index) const override;

 private:
  const Corpus* gold_;
};

class ConstantClassifier : public InstanceClassifier {
 public:
  explicit ConstantClassifier(double probability) : probability_(probability) {}
  std::string id() const override;
  double predict_probability(const TokenSequence&, std::size_t) const override {
    return probability_;
  }

 private:
  double probability_;
};

// Pseudo-random but reproducible: the probability is a hash of the seed,
// sentence and instance index.
class RandomClassifier : public InstanceClassifier {
 public:
  explicit RandomClassifier(std::uint64_t seed) : seed_(seed) {}
  std::string id() const override;
  double predict_probability(const TokenSequence& seq,
                             std::size_t instance_index) const override;

 private:
  std::uint64_t seed_;
};

}  // namespace cwi

#endif  // CWI_CLASSIFIER_HPP
