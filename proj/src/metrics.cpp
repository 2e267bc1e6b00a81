#include <cmath>

#include "cwi/error.hpp"
#include "cwi/evaluation.hpp"

namespace cwi {

void ConfusionCounts::add(int gold, int predicted) {
  if (gold == 1) {
    predicted == 1 ? ++tp : ++fn;
  } else {
    predicted == 1 ? ++fp : ++tn;
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double f1_for_class(const ConfusionCounts& counts, PositiveClass positive) {
  const bool complex = positive == PositiveClass::kComplex;
  const std::size_t tp = complex ? counts.tp : counts.tn;
  const std::size_t fp = complex ? counts.fp : counts.fn;
  const std::size_t fn = complex ? counts.fn : counts.fp;
  const double precision = ratio(tp, tp + fp);
  const double recall = ratio(tp, tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double macro_f1(const ConfusionCounts& counts) {
  return (f1_for_class(counts, PositiveClass::kComplex) +
          f1_for_class(counts, PositiveClass::kNonComplex)) /
         2.0;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json languages = nlohmann::json::array();
  for (Language l : report.train_languages) languages.push_back(to_string(l));
  return {{"schema_version", 1},
          {"train_languages", languages},
          {"shots", report.shots},
          {"target", report.target},
          {"split", to_string(report.split)},
          {"counts",
           {{"tp", report.counts.tp},
            {"fp", report.counts.fp},
            {"fn", report.counts.fn},
            {"tn", report.counts.tn}}},
          {"f1_complex", report.f1_complex},
          {"f1_noncomplex", report.f1_noncomplex},
          {"macro_f1", report.macro_f1},
          {"seed", report.seed},
          {"model_id", report.model_id},
          {"repeats", report.repeats}};
}

EvalReport evaluate(const InstanceClassifier& classifier, const Corpus& corpus) {
  if (corpus.split == Split::kTrain) {
    throw ValidationError("evaluation needs a dev or test corpus");
  }
  EvalReport report;
  report.split = corpus.split;
  report.model_id = classifier.id();

  for (const TokenSequence& seq : to_sequences(corpus)) {
    std::vector<double> probabilities;
    try {
      probabilities = classifier.predict_sequence(seq);
      if (probabilities.size() != seq.instance_refs.size()) {
        throw ValidationError("classifier returned " +
                              std::to_string(probabilities.size()) +
                              " probabilities for " +
                              std::to_string(seq.instance_refs.size()) + " instances");
      }
    } catch (const std::exception& e) {
      // Pin the failure on a single instance where possible.
      for (const auto& [index, tokens] : seq.instance_refs) {
        try {
          predict_instance(classifier, seq, index);
        } catch (const std::exception& inner) {
          throw ValidationError("prediction failed for instance '" +
                                corpus.instances[index].hit_id + "': " + inner.what());
        }
      }
      throw ValidationError("prediction failed for instance '" +
                            corpus.instances[seq.instance_refs.begin()->first].hit_id +
                            "': " + e.what());
    }
    std::size_t k = 0;
    for (const auto& [index, tokens] : seq.instance_refs) {
      const Instance& instance = corpus.instances[index];
      InstancePrediction prediction;
      try {
        prediction = threshold_probability(probabilities[k++], classifier.threshold());
      } catch (const std::exception& e) {
        throw ValidationError("prediction failed for instance '" + instance.hit_id +
                              "': " + e.what());
      }
      report.counts.add(instance.binary_label, prediction.label);
    }
  }
  report.f1_complex = f1_for_class(report.counts, PositiveClass::kComplex);
  report.f1_noncomplex = f1_for_class(report.counts, PositiveClass::kNonComplex);
  report.macro_f1 = (report.f1_complex + report.f1_noncomplex) / 2.0;
  return report;
}

}  // namespace cwi
