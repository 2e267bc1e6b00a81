#ifndef CWI_OPTIMIZER_HPP
#define CWI_OPTIMIZER_HPP

#include <span>

namespace cwi {

struct RmspropConfig {
  double learning_rate = 5e-5;
  double rho = 0.9;
  double epsilon = 1e-8;
};

// Elementwise RMSprop:
//   s <- rho * s + (1 - rho) * g^2
//   p <- p - lr * g / (sqrt(s) + epsilon)
// Throws NumericalError, before touching anything, if a gradient is not
// finite. Throws ValidationError on a size mismatch.
void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> mean_square, const RmspropConfig& config);

void validate(const RmspropConfig& config);

}  // namespace cwi

#endif  // CWI_OPTIMIZER_HPP
