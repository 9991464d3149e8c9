#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "einfact/einsum.hpp"
#include "einfact/losses.hpp"
#include "einfact/tensor.hpp"

namespace einfact {

/// Parameter tensors, one per model-string operand, each entry >= epsilon.
struct FactorSet {
    std::vector<DenseTensor> factors;
    double epsilon = 1e-12;

    std::size_t size() const noexcept { return factors.size(); }
    std::size_t parameter_count() const noexcept;
};

struct FitConfig {
    LossSpec loss = LossSpec::alpha_beta(1.0, 0.0);
    int max_iters = 5000;
    /// Stop once the train loss changes by less than this fraction in one sweep.
    double min_rel_decrease = 1e-6;
    /// Stop after this many consecutive strict increases of the validation loss.
    int val_patience = 5;
    std::uint64_t seed = 0;
    double epsilon = 1e-12;
};

enum class StopReason { Patience, Plateau, MaxIters, Diverged };

std::string to_string(StopReason reason);

struct FitReport {
    /// Loss totals after each sweep (train and validation entries).
    std::vector<double> train_loss_trace;
    std::vector<double> val_loss_trace;
    /// Seconds since the start of the fit at each trace entry.
    std::vector<double> time_trace;
    double initial_train_loss = 0.0;
    double initial_val_loss = 0.0;
    StopReason stop_reason = StopReason::MaxIters;
    int iterations = 0;
    double elapsed_seconds = 0.0;
};

/// i.i.d. U(0, 1) entries clamped below at `epsilon`; deterministic in `seed`.
FactorSet init_uniform(const ModelString& ms, const DimensionBinding& binding, std::uint64_t seed,
                       double epsilon);

/// Recover the binding from the data shape and the factor shapes.
DimensionBinding infer_binding(const ModelString& ms, const Shape& data_shape,
                               std::span<const DenseTensor> factors);

/**
 * Multiplicative update for one model string and loss.
 *
 * Holds the contraction plans for the model and for every swapped string so
 * repeated sweeps do not re-plan. Entries outside the training mask have
 * a(Y, Yhat) and b(Y, Yhat) zeroed, which leaves them out of both sums.
 */
class MultiplicativeUpdater {
public:
    MultiplicativeUpdater(const ModelString& ms, const DimensionBinding& binding, LossSpec loss,
                          double epsilon);

    DenseTensor predict(std::span<const DenseTensor> factors) const;

    /// Numerator A and denominator B of the update for operand `position`.
    std::pair<DenseTensor, DenseTensor> ratio_terms(const DenseTensor& y, const Mask& train,
                                                    std::span<const DenseTensor> factors,
                                                    std::size_t position,
                                                    const DenseTensor& yhat) const;

    /// theta <- max(eps, theta * g^{-1}(A / B)) applied to factors[position].
    void update(const DenseTensor& y, const Mask& train, std::vector<DenseTensor>& factors,
                std::size_t position, const DenseTensor& yhat) const;

    const ModelString& model() const noexcept { return model_; }
    const DimensionBinding& binding() const noexcept { return binding_; }
    const LossSpec& loss() const noexcept { return loss_; }
    const ContractionPlan& model_plan() const noexcept { return model_plan_; }
    const ContractionPlan& swap_plan(std::size_t position) const { return swap_plans_.at(position); }

private:
    ModelString model_;
    DimensionBinding binding_;
    LossSpec loss_;
    GLink link_;
    double epsilon_;
    ContractionPlan model_plan_;
    std::vector<ContractionPlan> swap_plans_;
};

/// Contract `plan` with `replacement` substituted for operand `slot`.
DenseTensor contract_with(const ContractionPlan& plan, std::span<const DenseTensor> factors,
                          std::size_t slot, const DenseTensor& replacement);

/// One multiplicative update of operand `position`; returns the new factor.
DenseTensor update_factor(const DenseTensor& y, const Mask& train, const FactorSet& factors,
                          const ModelString& ms, std::size_t position, const LossSpec& loss);

/// Alternating multiplicative updates until a stopping rule fires.
std::pair<FactorSet, FitReport> fit(const DenseTensor& y, const SplitLabels& labels,
                                    const ModelString& ms, const DimensionBinding& binding,
                                    const FitConfig& config);

/// As above, starting from `init` instead of a uniform draw.
std::pair<FactorSet, FitReport> fit(const DenseTensor& y, const SplitLabels& labels,
                                    const ModelString& ms, const DimensionBinding& binding,
                                    const FitConfig& config, FactorSet init);

/// Checks shared by the fitting routines: data domain, shapes, loss parameters.
void validate_fit_inputs(const DenseTensor& y, const SplitLabels& labels, const ModelString& ms,
                         const DimensionBinding& binding, const LossSpec& loss);

/// Tracks the shared stopping rules across sweeps.
class StoppingRule {
public:
    StoppingRule(double min_rel_decrease, int val_patience, bool has_validation,
                 double initial_train, double initial_val);

    /// Record one sweep; returns the reason to stop, if any.
    std::optional<StopReason> observe(double train, double val);

private:
    double min_rel_decrease_;
    int val_patience_;
    bool has_validation_;
    double prev_train_;
    double prev_val_;
    int increases_ = 0;
};

} // namespace einfact
