#include "einfact/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "einfact/random.hpp"

namespace einfact {
namespace {

// Both sums below this are treated as 0/0: the coordinate receives no signal.
constexpr double kDeadRatio = 1e-300;

std::vector<const DenseTensor*> pointers(std::span<const DenseTensor> factors) {
    std::vector<const DenseTensor*> out;
    out.reserve(factors.size());
    for (const auto& f : factors) {
        out.push_back(&f);
    }
    return out;
}

} // namespace

std::size_t FactorSet::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : factors) {
        n += f.size();
    }
    return n;
}

std::string to_string(StopReason reason) {
    switch (reason) {
    case StopReason::Patience:
        return "patience";
    case StopReason::Plateau:
        return "plateau";
    case StopReason::MaxIters:
        return "max_iters";
    case StopReason::Diverged:
        return "diverged";
    }
    return "unknown";
}

FactorSet init_uniform(const ModelString& ms, const DimensionBinding& binding, std::uint64_t seed,
                       double epsilon) {
    if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be positive");
    }
    binding.require_covers(ms);
    auto engine = make_engine(seed, Stream::Init);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FactorSet set;
    set.epsilon = epsilon;
    for (const auto& sub : ms.operands) {
        DenseTensor f(binding.shape_of(sub));
        for (double& v : f.data()) {
            v = std::max(epsilon, unit(engine));
        }
        set.factors.push_back(std::move(f));
    }
    return set;
}

DimensionBinding infer_binding(const ModelString& ms, const Shape& data_shape,
                               std::span<const DenseTensor> factors) {
    if (factors.size() != ms.operand_count()) {
        throw ShapeError("expected " + std::to_string(ms.operand_count()) + " factors, got " +
                         std::to_string(factors.size()));
    }
    if (data_shape.size() != ms.output.size()) {
        throw ShapeError("data rank does not match the model output \"" + ms.output + "\"");
    }
    DimensionBinding binding;
    const auto bind = [&](char c, std::size_t extent) {
        if (binding.contains(c) && binding[c] != extent) {
            throw ShapeError("index '" + std::string(1, c) + "' has inconsistent extents");
        }
        binding.set(c, extent);
    };
    for (std::size_t m = 0; m < data_shape.size(); ++m) {
        bind(ms.output[m], data_shape[m]);
    }
    for (std::size_t l = 0; l < factors.size(); ++l) {
        const auto& sub = ms.operands[l];
        if (factors[l].rank() != sub.size()) {
            throw ShapeError("factor " + std::to_string(l + 1) + " rank does not match \"" + sub + "\"");
        }
        for (std::size_t k = 0; k < sub.size(); ++k) {
            bind(sub[k], factors[l].shape()[k]);
        }
    }
    return binding;
}

MultiplicativeUpdater::MultiplicativeUpdater(const ModelString& ms, const DimensionBinding& binding,
                                             LossSpec loss, double epsilon)
    : model_(ms), binding_(binding), loss_(std::move(loss)), link_(g_link(loss_)),
      epsilon_(epsilon), model_plan_(plan(ms, binding)) {
    if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be positive");
    }
    for (std::size_t l = 0; l < ms.operand_count(); ++l) {
        swap_plans_.push_back(plan(swap(ms, l), binding));
    }
}

DenseTensor MultiplicativeUpdater::predict(std::span<const DenseTensor> factors) const {
    const auto ptrs = pointers(factors);
    return execute(model_plan_, ptrs);
}

DenseTensor contract_with(const ContractionPlan& p, std::span<const DenseTensor> factors,
                          std::size_t slot, const DenseTensor& replacement) {
    auto ptrs = pointers(factors);
    ptrs.at(slot) = &replacement;
    return execute(p, ptrs);
}

std::pair<DenseTensor, DenseTensor>
MultiplicativeUpdater::ratio_terms(const DenseTensor& y, const Mask& train,
                                   std::span<const DenseTensor> factors, std::size_t position,
                                   const DenseTensor& yhat) const {
    DenseTensor a_t(y.shape());
    DenseTensor b_t(y.shape());
    ab_masked(loss_, y, yhat, train, a_t, b_t);
    const auto& p = swap_plans_.at(position);
    return {contract_with(p, factors, position, a_t), contract_with(p, factors, position, b_t)};
}

void MultiplicativeUpdater::update(const DenseTensor& y, const Mask& train,
                                   std::vector<DenseTensor>& factors, std::size_t position,
                                   const DenseTensor& yhat) const {
    const auto [num, den] = ratio_terms(y, train, factors, position, yhat);
    DenseTensor& theta = factors.at(position);
    for (std::size_t k = 0; k < theta.size(); ++k) {
        double multiplier = 1.0;
        if (!(std::abs(num[k]) <= kDeadRatio && den[k] <= kDeadRatio)) {
            multiplier = g_inverse(loss_, num[k] / den[k]);
            if (!std::isfinite(multiplier)) {
                multiplier = 1.0;
            }
        }
        theta[k] = std::max(epsilon_, theta[k] * multiplier);
    }
}

DenseTensor update_factor(const DenseTensor& y, const Mask& train, const FactorSet& factors,
                          const ModelString& ms, std::size_t position, const LossSpec& loss) {
    const DimensionBinding binding = infer_binding(ms, y.shape(), factors.factors);
    MultiplicativeUpdater updater(ms, binding, loss, factors.epsilon);
    std::vector<DenseTensor> work = factors.factors;
    const DenseTensor yhat = updater.predict(work);
    updater.update(y, train, work, position, yhat);
    return std::move(work.at(position));
}

void validate_fit_inputs(const DenseTensor& y, const SplitLabels& labels, const ModelString& ms,
                         const DimensionBinding& binding, const LossSpec& loss) {
    binding.require_covers(ms);
    if (y.shape() != binding.shape_of(ms.output)) {
        throw ShapeError("data shape does not match the bound output \"" + ms.output + "\"");
    }
    if (labels.shape() != y.shape()) {
        throw ShapeError("split labels do not match the data shape");
    }
    for (const double v : y.data()) {
        if (v < 0.0) {
            throw DomainError(loss.name() + ": data must be nonnegative");
        }
    }
    if (loss.has_param_tensor() && loss.param_tensor()->shape() != y.shape()) {
        throw ShapeError(loss.name() + ": per-entry parameter tensor must match the data shape");
    }
}

StoppingRule::StoppingRule(double min_rel_decrease, int val_patience, bool has_validation,
                           double initial_train, double initial_val)
    : min_rel_decrease_(min_rel_decrease), val_patience_(val_patience),
      has_validation_(has_validation), prev_train_(initial_train), prev_val_(initial_val) {
    if (!(min_rel_decrease >= 0.0) || val_patience < 1) {
        throw ConfigError("stopping rule needs min_rel_decrease >= 0 and patience >= 1");
    }
}

std::optional<StopReason> StoppingRule::observe(double train, double val) {
    if (!std::isfinite(train) || (has_validation_ && !std::isfinite(val))) {
        return StopReason::Diverged;
    }
    std::optional<StopReason> reason;
    if (has_validation_) {
        increases_ = val > prev_val_ ? increases_ + 1 : 0;
        prev_val_ = val;
        if (increases_ >= val_patience_) {
            reason = StopReason::Patience;
        }
    }
    if (!reason && std::abs(prev_train_ - train) < min_rel_decrease_ * std::abs(prev_train_)) {
        reason = StopReason::Plateau;
    }
    prev_train_ = train;
    return reason;
}

std::pair<FactorSet, FitReport> fit(const DenseTensor& y, const SplitLabels& labels,
                                    const ModelString& ms, const DimensionBinding& binding,
                                    const FitConfig& config) {
    return fit(y, labels, ms, binding, config,
               init_uniform(ms, binding, config.seed, config.epsilon));
}

std::pair<FactorSet, FitReport> fit(const DenseTensor& y, const SplitLabels& labels,
                                    const ModelString& ms, const DimensionBinding& binding,
                                    const FitConfig& config, FactorSet init) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto seconds = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

    if (config.max_iters < 0) {
        throw ConfigError("max_iters must be nonnegative");
    }
    validate_fit_inputs(y, labels, ms, binding, config.loss);
    if (init.factors.size() != ms.operand_count()) {
        throw ShapeError("initial factor count does not match the model");
    }
    for (std::size_t l = 0; l < init.factors.size(); ++l) {
        if (init.factors[l].shape() != binding.shape_of(ms.operands[l])) {
            throw ShapeError("initial factor " + std::to_string(l + 1) + " has the wrong shape");
        }
    }
    init.epsilon = config.epsilon;

    const Mask train = labels.view(Split::Train);
    const Mask val = labels.view(Split::Validation);
    const bool has_val = val.count() > 0;
    const MultiplicativeUpdater updater(ms, binding, config.loss, config.epsilon);

    FitReport report;
    DenseTensor yhat = updater.predict(init.factors);
    report.initial_train_loss = masked_total_loss(y, yhat, train, config.loss);
    report.initial_val_loss = has_val ? masked_total_loss(y, yhat, val, config.loss) : 0.0;
    StoppingRule rule(config.min_rel_decrease, config.val_patience, has_val,
                      report.initial_train_loss, report.initial_val_loss);

    std::vector<DenseTensor>& factors = init.factors;
    for (int it = 0; it < config.max_iters; ++it) {
        for (std::size_t l = 0; l < factors.size(); ++l) {
            if (l > 0) {
                yhat = updater.predict(factors);
            }
            updater.update(y, train, factors, l, yhat);
        }
        yhat = updater.predict(factors);
        const double tl = masked_total_loss(y, yhat, train, config.loss);
        const double vl = has_val ? masked_total_loss(y, yhat, val, config.loss) : 0.0;
        report.train_loss_trace.push_back(tl);
        report.val_loss_trace.push_back(vl);
        report.time_trace.push_back(seconds());
        report.iterations = it + 1;
        if (const auto reason = rule.observe(tl, vl)) {
            report.stop_reason = *reason;
            report.elapsed_seconds = seconds();
            return {std::move(init), std::move(report)};
        }
    }
    report.stop_reason = StopReason::MaxIters;
    report.elapsed_seconds = seconds();
    return {std::move(init), std::move(report)};
}

} // namespace einfact
