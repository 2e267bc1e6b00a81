#include "cwi/classifier.hpp"

#include <cmath>
#include <sstream>

#include "cwi/error.hpp"
#include "cwi/random.hpp"

namespace cwi {

std::vector<double> InstanceClassifier::predict_sequence(
    const TokenSequence& seq) const {
  std::vector<double> out;
  out.reserve(seq.instance_refs.size());
  for (const auto& [instance, tokens] : seq.instance_refs) {
    out.push_back(predict_probability(seq, instance));
  }
  return out;
}

InstancePrediction threshold_probability(double probability, double threshold) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("classifier returned probability " +
                          std::to_string(probability) + " outside [0, 1]");
  }
  return {probability >= threshold ? 1 : 0, probability};
}

InstancePrediction predict_instance(const InstanceClassifier& classifier,
                                    const TokenSequence& seq,
                                    std::size_t instance_index) {
  const auto found = seq.instance_refs.find(instance_index);
  if (found == seq.instance_refs.end()) {
    throw ValidationError("instance " + std::to_string(instance_index) +
                          " does not belong to sentence " +
                          std::to_string(seq.sentence_id));
  }
  if (found->second.empty()) {
    throw ValidationError("instance " + std::to_string(instance_index) +
                          " covers no tokens");
  }
  return threshold_probability(
      classifier.predict_probability(seq, instance_index), classifier.threshold());
}

double EchoGoldClassifier::predict_probability(const TokenSequence&,
                                               std::size_t instance_index) const {
  if (instance_index >= gold_->size()) {
    throw ValidationError("echo-gold: instance index out of range");
  }
  return gold_->instances[instance_index].binary_label == 1 ? 1.0 : 0.0;
}

std::string ConstantClassifier::id() const {
  std::ostringstream out;
  out << "constant-" << probability_;
  return out.str();
}

std::string RandomClassifier::id() const {
  return "random-" + std::to_string(seed_);
}

double RandomClassifier::predict_probability(const TokenSequence& seq,
                                             std::size_t instance_index) const {
  std::uint64_t h = derive_seed(seed_, seq.sentence);
  h = splitmix64(h ^ instance_index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace cwi
