#include <fstream>
#include <istream>
#include <ostream>

#include "cwi/error.hpp"
#include "cwi/tagger.hpp"
#include "json.hpp"

namespace cwi {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kFormat = "cwi-bilstm-tagger";

using Json = nlohmann::json;

// (name, matrix) views; vectors are n x 1.
struct TensorRef {
  std::string name;
  Eigen::MatrixXd* matrix = nullptr;
  Eigen::VectorXd* vector = nullptr;
  double* scalar = nullptr;
};

std::vector<TensorRef> refs(BiLstmParams& p) {
  return {{"forward.w", &p.forward.w, nullptr, nullptr},
          {"forward.u", &p.forward.u, nullptr, nullptr},
          {"forward.b", nullptr, &p.forward.b, nullptr},
          {"backward.w", &p.backward.w, nullptr, nullptr},
          {"backward.u", &p.backward.u, nullptr, nullptr},
          {"backward.b", nullptr, &p.backward.b, nullptr},
          {"head.w", nullptr, &p.head_w, nullptr},
          {"head.b", nullptr, nullptr, &p.head_b}};
}

}  // namespace

void save_checkpoint(std::ostream& out, const TaggerModel& model) {
  Json tensors = Json::array();
  BiLstmParams params = model.params;
  for (const TensorRef& t : refs(params)) {
    Json entry;
    entry["name"] = t.name;
    std::vector<double> values;
    if (t.matrix != nullptr) {
      entry["shape"] = {t.matrix->rows(), t.matrix->cols()};
      for (Eigen::Index r = 0; r < t.matrix->rows(); ++r) {
        for (Eigen::Index c = 0; c < t.matrix->cols(); ++c) values.push_back((*t.matrix)(r, c));
      }
    } else if (t.vector != nullptr) {
      entry["shape"] = {t.vector->size()};
      values.assign(t.vector->data(), t.vector->data() + t.vector->size());
    } else {
      entry["shape"] = Json::array();
      values.push_back(*t.scalar);
    }
    entry["data"] = values;
    tensors.push_back(std::move(entry));
  }
  Json doc = {{"schema_version", kCheckpointVersion},
              {"format", kFormat},
              {"input_dim", model.input_dim},
              {"hidden", model.hidden},
              {"threshold", model.threshold},
              {"tensors", std::move(tensors)}};
  out << doc.dump() << '\n';
}

TaggerModel load_checkpoint(std::istream& in) {
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw ParseError("not a tagger checkpoint");
    }
    const int version = doc.at("schema_version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    TaggerModel model;
    model.input_dim = doc.at("input_dim").get<std::size_t>();
    model.hidden = doc.at("hidden").get<std::size_t>();
    model.threshold = doc.at("threshold").get<double>();
    if (!(model.threshold > 0.0 && model.threshold < 1.0)) {
      throw ValidationError("checkpoint threshold must lie in (0, 1)");
    }
    model.params = BiLstmParams::zeros(model.input_dim, model.hidden);

    std::map<std::string, const Json*> by_name;
    for (const auto& entry : doc.at("tensors")) {
      by_name[entry.at("name").get<std::string>()] = &entry;
    }
    for (const TensorRef& t : refs(model.params)) {
      const auto found = by_name.find(t.name);
      if (found == by_name.end()) throw ParseError("checkpoint lacks tensor " + t.name);
      const Json& entry = *found->second;
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const auto values = entry.at("data").get<std::vector<double>>();
      if (t.matrix != nullptr) {
        if (shape.size() != 2 || shape[0] != t.matrix->rows() ||
            shape[1] != t.matrix->cols() ||
            values.size() != static_cast<std::size_t>(t.matrix->size())) {
          throw ValidationError("tensor " + t.name + " has the wrong shape");
        }
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < t.matrix->rows(); ++r) {
          for (Eigen::Index c = 0; c < t.matrix->cols(); ++c) (*t.matrix)(r, c) = values[k++];
        }
      } else if (t.vector != nullptr) {
        if (shape.size() != 1 || shape[0] != t.vector->size() ||
            values.size() != static_cast<std::size_t>(t.vector->size())) {
          throw ValidationError("tensor " + t.name + " has the wrong shape");
        }
        for (std::size_t k = 0; k < values.size(); ++k) {
          (*t.vector)(static_cast<Eigen::Index>(k)) = values[k];
        }
      } else {
        if (!shape.empty() || values.size() != 1) {
          throw ValidationError("tensor " + t.name + " must be a scalar");
        }
        *t.scalar = values[0];
      }
    }
    return model;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint_file(const std::filesystem::path& path, const TaggerModel& model) {
  std::ofstream out(path);
  if (!out) throw MissingResourceError("cannot write checkpoint '" + path.string() + "'");
  save_checkpoint(out, model);
}

TaggerModel load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingResourceError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in);
}

}  // namespace cwi
