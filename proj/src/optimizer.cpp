#include "cwi/optimizer.hpp"

#include <cmath>
#include <string>

#include "cwi/error.hpp"

namespace cwi {

void validate(const RmspropConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw ValidationError("learning rate must be a finite value >= 0");
  }
  if (!(config.rho > 0.0 && config.rho < 1.0)) {
    throw ValidationError("rho must lie in (0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
}

void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> mean_square, const RmspropConfig& config) {
  if (params.size() != grads.size() || params.size() != mean_square.size()) {
    throw ValidationError("RMSprop shape mismatch: " +
                          std::to_string(params.size()) + " parameters, " +
                          std::to_string(grads.size()) + " gradients, " +
                          std::to_string(mean_square.size()) + " accumulators");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("non-finite gradient at component " + std::to_string(i));
    }
  }
  const double decay = config.rho;
  const double blend = 1.0 - config.rho;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    mean_square[i] = decay * mean_square[i] + blend * g * g;
    params[i] -= config.learning_rate * g / (std::sqrt(mean_square[i]) + config.epsilon);
  }
}

}  // namespace cwi
