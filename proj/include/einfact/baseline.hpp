#pragma once

#include <cstdint>
#include <utility>

#include "einfact/solver.hpp"

namespace einfact {

/// Adam on log-parameters. Stopping rules match FitConfig.
struct AdamConfig {
    double learning_rate = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double stabilizer = 1e-8;
    int max_iters = 5000;
    double min_rel_decrease = 1e-6;
    int val_patience = 5;
    /// Wall-clock budget in seconds; 0 means none. Exhausting it stops with max_iters.
    double max_seconds = 0.0;
};

/// Learning rates swept by the comparison experiments.
inline constexpr double kAdamLearningRates[] = {0.01, 0.05, 0.1, 0.3, 0.5, 1.0};

/**
 * Gradient of the masked total loss with respect to factors[position],
 * evaluated through the swapped contraction with mask * dL/dy in the
 * operand's slot.
 */
DenseTensor loss_gradient(const DenseTensor& y, const Mask& train,
                          std::span<const DenseTensor> factors, const ModelString& ms,
                          std::size_t position, const LossSpec& loss);

/**
 * Full-batch Adam on omega = log(theta). Starts from the same uniform draw as
 * the multiplicative solver for a given seed and epsilon.
 */
std::pair<FactorSet, FitReport> fit_adam(const DenseTensor& y, const SplitLabels& labels,
                                         const ModelString& ms, const DimensionBinding& binding,
                                         const LossSpec& loss, const AdamConfig& config,
                                         std::uint64_t seed, double epsilon = 1e-12);

} // namespace einfact
