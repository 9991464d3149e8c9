#include "einfact/baseline.hpp"

#include <chrono>
#include <cmath>

namespace einfact {
namespace {

DenseTensor masked_dloss(const DenseTensor& y, const DenseTensor& yhat, const Mask& train,
                         const LossSpec& loss) {
    DenseTensor g(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (train.selected(i)) {
            g[i] = dloss_dy(loss, y[i], yhat[i], i);
        }
    }
    return g;
}

} // namespace

DenseTensor loss_gradient(const DenseTensor& y, const Mask& train,
                          std::span<const DenseTensor> factors, const ModelString& ms,
                          std::size_t position, const LossSpec& loss) {
    const DimensionBinding binding = infer_binding(ms, y.shape(), factors);
    const DenseTensor yhat = contract(ms, binding, factors);
    const DenseTensor g = masked_dloss(y, yhat, train, loss);
    return contract_with(plan(swap(ms, position), binding), factors, position, g);
}

std::pair<FactorSet, FitReport> fit_adam(const DenseTensor& y, const SplitLabels& labels,
                                         const ModelString& ms, const DimensionBinding& binding,
                                         const LossSpec& loss, const AdamConfig& config,
                                         std::uint64_t seed, double epsilon) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto seconds = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

    if (!(config.learning_rate > 0.0)) {
        throw ConfigError("Adam learning rate must be positive");
    }
    if (config.max_iters < 0) {
        throw ConfigError("max_iters must be nonnegative");
    }
    validate_fit_inputs(y, labels, ms, binding, loss);

    FactorSet theta = init_uniform(ms, binding, seed, epsilon);
    const std::size_t n_factors = theta.size();
    std::vector<DenseTensor> omega, first, second;
    for (const auto& f : theta.factors) {
        omega.push_back(elementwise_map(f, [](double v) { return std::log(v); }));
        first.emplace_back(f.shape());
        second.emplace_back(f.shape());
    }

    const ContractionPlan model_plan = plan(ms, binding);
    std::vector<ContractionPlan> grad_plans;
    for (std::size_t l = 0; l < n_factors; ++l) {
        grad_plans.push_back(plan(swap(ms, l), binding));
    }
    const auto predict = [&] {
        std::vector<const DenseTensor*> ptrs;
        for (const auto& f : theta.factors) {
            ptrs.push_back(&f);
        }
        return execute(model_plan, ptrs);
    };

    const Mask train = labels.view(Split::Train);
    const Mask val = labels.view(Split::Validation);
    const bool has_val = val.count() > 0;

    FitReport report;
    DenseTensor yhat = predict();
    report.initial_train_loss = masked_total_loss(y, yhat, train, loss);
    report.initial_val_loss = has_val ? masked_total_loss(y, yhat, val, loss) : 0.0;
    StoppingRule rule(config.min_rel_decrease, config.val_patience, has_val,
                      report.initial_train_loss, report.initial_val_loss);

    double beta1_power = 1.0;
    double beta2_power = 1.0;
    for (int it = 0; it < config.max_iters; ++it) {
        const DenseTensor g = masked_dloss(y, yhat, train, loss);
        std::vector<DenseTensor> grads;
        for (std::size_t l = 0; l < n_factors; ++l) {
            grads.push_back(contract_with(grad_plans[l], theta.factors, l, g));
        }
        beta1_power *= config.beta1;
        beta2_power *= config.beta2;
        for (std::size_t l = 0; l < n_factors; ++l) {
            auto w = omega[l].array();
            auto m = first[l].array();
            auto v = second[l].array();
            // chain rule through theta = exp(omega)
            const Eigen::ArrayXd grad = grads[l].array() * theta.factors[l].array();
            m = config.beta1 * m + (1.0 - config.beta1) * grad;
            v = config.beta2 * v + (1.0 - config.beta2) * grad.square();
            w -= config.learning_rate * (m / (1.0 - beta1_power)) /
                 ((v / (1.0 - beta2_power)).sqrt() + config.stabilizer);
            theta.factors[l].array() = w.exp();
        }
        yhat = predict();
        const double tl = masked_total_loss(y, yhat, train, loss);
        const double vl = has_val ? masked_total_loss(y, yhat, val, loss) : 0.0;
        report.train_loss_trace.push_back(tl);
        report.val_loss_trace.push_back(vl);
        report.time_trace.push_back(seconds());
        report.iterations = it + 1;
        if (const auto reason = rule.observe(tl, vl)) {
            report.stop_reason = *reason;
            break;
        }
        if (config.max_seconds > 0.0 && report.time_trace.back() >= config.max_seconds) {
            break;
        }
    }
    report.elapsed_seconds = seconds();
    return {std::move(theta), std::move(report)};
}

} // namespace einfact
