#include "einfact/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace einfact {
namespace {

double fast_pow(double x, double p) {
    if (p == 1.0) return x;
    if (p == 0.0) return 1.0;
    if (p == -1.0) return 1.0 / x;
    if (p == 2.0) return x * x;
    if (p == 0.5) return std::sqrt(x);
    if (p == -0.5) return 1.0 / std::sqrt(x);
    return std::pow(x, p);
}

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

[[noreturn]] void positive_data_required(const LossSpec& spec) {
    throw DomainError(spec.name() + ": loss requires positive data (x = 0 encountered)");
}

[[noreturn]] void undefined_at_zero(const LossSpec& spec) {
    throw DomainError(spec.name() + ": loss undefined at x=0");
}

void check_observed(const LossSpec& spec, double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        throw DomainError(spec.name() + ": observed values must be finite and nonnegative");
    }
}

void require_updatable(const LossSpec& spec) {
    if (!spec.updatable()) {
        throw ConfigError("no multiplicative update for α=0, β≠1 (" + spec.name() + ")");
    }
}

void check_positive_param(const DenseTensor& t, const char* what) {
    for (const double v : t.data()) {
        if (!(v > 0.0)) {
            throw ConfigError(std::string(what) + " must be positive everywhere");
        }
    }
}

double alpha_beta_loss(const LossSpec& spec, double x, double y) {
    const double al = spec.alpha();
    const double be = spec.beta();
    switch (classify(al, be)) {
    case AlphaBetaCase::Generic: {
        if (x == 0.0) {
            if (al < 0.0 || al + be < 0.0) {
                positive_data_required(spec);
            }
            return std::pow(y, al + be) / (al * (al + be));
        }
        // Rearranged through expm1 so the beta -> 0 limit stays accurate.
        const double xa = fast_pow(x, al);
        const double ya = fast_pow(y, al);
        return fast_pow(y, be) * ((ya - xa) / (al * (al + be)) +
                                  xa * std::expm1(be * std::log(x / y)) / (be * (al + be)));
    }
    case AlphaBetaCase::BetaZero: {
        if (x == 0.0) {
            if (al < 0.0) {
                positive_data_required(spec);
            }
            return fast_pow(y, al) / (al * al);
        }
        const double xa = fast_pow(x, al);
        return (fast_pow(y, al) - xa + al * xa * std::log(x / y)) / (al * al);
    }
    case AlphaBetaCase::AlphaMinusBeta: {
        if (x == 0.0) {
            undefined_at_zero(spec);
        }
        const double u = al * std::log(x / y);
        return (std::expm1(u) - u) / (al * al);
    }
    case AlphaBetaCase::AlphaZero: {
        if (x == 0.0) {
            undefined_at_zero(spec);
        }
        const double v = be * std::log(x / y);
        return fast_pow(y, be) * (std::expm1(v) - v) / (be * be);
    }
    case AlphaBetaCase::BothZero: {
        if (x == 0.0) {
            undefined_at_zero(spec);
        }
        const double d = std::log(x) - std::log(y);
        return 0.5 * d * d;
    }
    }
    return 0.0;
}

double alpha_beta_dloss(const LossSpec& spec, double x, double y) {
    const double al = spec.alpha();
    const double be = spec.beta();
    switch (classify(al, be)) {
    case AlphaBetaCase::Generic:
    case AlphaBetaCase::BetaZero:
    case AlphaBetaCase::AlphaMinusBeta: {
        if (x == 0.0 && al < 0.0) {
            positive_data_required(spec);
        }
        if (classify(al, be) == AlphaBetaCase::AlphaMinusBeta && x == 0.0) {
            undefined_at_zero(spec);
        }
        // (b - a) / alpha
        return fast_pow(y, be - 1.0) * (fast_pow(y, al) - fast_pow(x, al)) / al;
    }
    case AlphaBetaCase::AlphaZero:
        if (x == 0.0) {
            undefined_at_zero(spec);
        }
        return fast_pow(y, be - 1.0) * std::log(y / x);
    case AlphaBetaCase::BothZero:
        if (x == 0.0) {
            undefined_at_zero(spec);
        }
        return std::log(y / x) / y;
    }
    return 0.0;
}

} // namespace

AlphaBetaCase classify(double alpha, double beta) noexcept {
    if (alpha == 0.0 && beta == 0.0) return AlphaBetaCase::BothZero;
    if (alpha == 0.0) return AlphaBetaCase::AlphaZero;
    if (beta == 0.0) return AlphaBetaCase::BetaZero;
    if (alpha + beta == 0.0) return AlphaBetaCase::AlphaMinusBeta;
    return AlphaBetaCase::Generic;
}

LossSpec LossSpec::alpha_beta_metric(double alpha, double beta) {
    if (!std::isfinite(alpha) || !std::isfinite(beta)) {
        throw ConfigError("alpha and beta must be finite");
    }
    LossSpec s;
    s.kind_ = LossKind::AlphaBeta;
    s.alpha_ = alpha;
    s.beta_ = beta;
    s.updatable_ = !(alpha == 0.0 && beta != 1.0);
    return s;
}

LossSpec LossSpec::alpha_beta(double alpha, double beta) {
    LossSpec s = alpha_beta_metric(alpha, beta);
    if (!s.updatable_) {
        throw ConfigError("no multiplicative update for α=0, β≠1 (got alpha=" +
                          format_number(alpha) + ", beta=" + format_number(beta) + ")");
    }
    return s;
}

LossSpec LossSpec::neg_binomial(double phi) {
    if (!(phi > 0.0) || !std::isfinite(phi)) {
        throw ConfigError("negative-binomial dispersion phi must be positive");
    }
    LossSpec s;
    s.kind_ = LossKind::NegBinomial;
    s.param_ = phi;
    return s;
}

LossSpec LossSpec::neg_binomial(DenseTensor phi) {
    check_positive_param(phi, "negative-binomial dispersion phi");
    LossSpec s;
    s.kind_ = LossKind::NegBinomial;
    s.param_tensor_ = std::make_shared<const DenseTensor>(std::move(phi));
    return s;
}

LossSpec LossSpec::bernoulli() {
    LossSpec s;
    s.kind_ = LossKind::BernoulliOdds;
    return s;
}

LossSpec LossSpec::binomial(double trials) {
    if (!(trials > 0.0) || !std::isfinite(trials)) {
        throw ConfigError("binomial trial count must be positive");
    }
    LossSpec s;
    s.kind_ = LossKind::BinomialOdds;
    s.param_ = trials;
    return s;
}

LossSpec LossSpec::binomial(DenseTensor trials) {
    check_positive_param(trials, "binomial trial count");
    LossSpec s;
    s.kind_ = LossKind::BinomialOdds;
    s.param_tensor_ = std::make_shared<const DenseTensor>(std::move(trials));
    return s;
}

LossSpec LossSpec::jensen_shannon() {
    LossSpec s;
    s.kind_ = LossKind::JensenShannon;
    return s;
}

void LossSpec::set_epsilon_y(double eps) {
    if (!(eps > 0.0)) {
        throw ConfigError("prediction clamp must be positive");
    }
    epsilon_y_ = eps;
}

std::string LossSpec::name() const {
    switch (kind_) {
    case LossKind::AlphaBeta:
        return "ab(alpha=" + format_number(alpha_) + ", beta=" + format_number(beta_) + ")";
    case LossKind::NegBinomial:
        return param_tensor_ ? "negbin(phi=tensor)" : "negbin(phi=" + format_number(param_) + ")";
    case LossKind::BernoulliOdds:
        return "bernoulli";
    case LossKind::BinomialOdds:
        return param_tensor_ ? "binomial(n=tensor)" : "binomial(n=" + format_number(param_) + ")";
    case LossKind::JensenShannon:
        return "js";
    }
    return "unknown";
}

double loss(const LossSpec& spec, double x, double y, std::size_t entry) {
    check_observed(spec, x);
    y = std::max(y, spec.epsilon_y());
    switch (spec.kind()) {
    case LossKind::AlphaBeta:
        return alpha_beta_loss(spec, x, y);
    case LossKind::NegBinomial: {
        const double phi = spec.param_at(entry);
        return (phi + x) * std::log(phi + y) - (x == 0.0 ? 0.0 : x * std::log(y));
    }
    case LossKind::BernoulliOdds:
        return std::log1p(y) - (x == 0.0 ? 0.0 : x * std::log(y));
    case LossKind::BinomialOdds:
        return spec.param_at(entry) * std::log1p(y) - (x == 0.0 ? 0.0 : x * std::log(y));
    case LossKind::JensenShannon: {
        const double m = x + y;
        const double xterm = x == 0.0 ? 0.0 : x * std::log(2.0 * x / m);
        return 0.5 * (xterm + y * std::log(2.0 * y / m));
    }
    }
    return 0.0;
}

AB ab(const LossSpec& spec, double x, double y, std::size_t entry) {
    require_updatable(spec);
    check_observed(spec, x);
    y = std::max(y, spec.epsilon_y());
    switch (spec.kind()) {
    case LossKind::AlphaBeta: {
        const double al = spec.alpha();
        const double be = spec.beta();
        if (al == 0.0) {
            // beta == 1 here: reverse KL
            if (x == 0.0) {
                undefined_at_zero(spec);
            }
            return {std::log(x / y), 1.0};
        }
        if (x == 0.0 && al < 0.0) {
            positive_data_required(spec);
        }
        return {fast_pow(x, al) * fast_pow(y, be - 1.0), fast_pow(y, al + be - 1.0)};
    }
    case LossKind::NegBinomial: {
        const double phi = spec.param_at(entry);
        return {x / y, (phi + x) / (phi + y)};
    }
    case LossKind::BernoulliOdds:
        return {x / y, 1.0 / (1.0 + y)};
    case LossKind::BinomialOdds:
        return {x / y, spec.param_at(entry) / (1.0 + y)};
    case LossKind::JensenShannon:
        return {std::log((x + y) / (2.0 * y)), 1.0};
    }
    return {0.0, 0.0};
}

double dloss_dy(const LossSpec& spec, double x, double y, std::size_t entry) {
    check_observed(spec, x);
    y = std::max(y, spec.epsilon_y());
    switch (spec.kind()) {
    case LossKind::AlphaBeta:
        return alpha_beta_dloss(spec, x, y);
    case LossKind::NegBinomial: {
        const double phi = spec.param_at(entry);
        return (phi + x) / (phi + y) - x / y;
    }
    case LossKind::BernoulliOdds:
        return 1.0 / (1.0 + y) - x / y;
    case LossKind::BinomialOdds:
        return spec.param_at(entry) / (1.0 + y) - x / y;
    case LossKind::JensenShannon:
        return 0.5 * std::log(2.0 * y / (x + y));
    }
    return 0.0;
}

GLink g_link(const LossSpec& spec) {
    require_updatable(spec);
    switch (spec.kind()) {
    case LossKind::AlphaBeta: {
        const double al = spec.alpha();
        const double be = spec.beta();
        if (al == 0.0) {
            return {true, 0.0};
        }
        const double t = (1.0 - be) / al;
        if (t > 1.0) return {false, 1.0 - be};
        if (t < 0.0) return {false, al + be - 1.0};
        return {false, al};
    }
    case LossKind::JensenShannon:
        return {true, 0.0};
    case LossKind::NegBinomial:
    case LossKind::BernoulliOdds:
    case LossKind::BinomialOdds:
        return {false, 1.0};
    }
    return {};
}

double g(const LossSpec& spec, double lambda) {
    const GLink link = g_link(spec);
    if (!(lambda > 0.0)) {
        throw DomainError("g is defined for positive arguments only");
    }
    return link.logarithmic ? std::log(lambda) : fast_pow(lambda, link.exponent);
}

double g_inverse(const LossSpec& spec, double t) {
    const GLink link = g_link(spec);
    if (std::isnan(t)) {
        throw DomainError(spec.name() + ": ratio outside Range(g) (NaN)");
    }
    if (link.logarithmic) {
        return std::exp(t);
    }
    if (t < 0.0) {
        throw DomainError(spec.name() + ": ratio outside Range(g) (negative)");
    }
    if (t == 0.0) {
        return link.exponent > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return fast_pow(t, 1.0 / link.exponent);
}

namespace {

template <typename F>
void fill_ab(const DenseTensor& y, const DenseTensor& yhat, const Mask& selection, double eps,
             DenseTensor& a, DenseTensor& b, F&& f) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (selection.selected(i)) {
            if (!(y[i] >= 0.0)) {
                throw DomainError("ab: observed values must be nonnegative");
            }
            const AB v = f(y[i], std::max(yhat[i], eps), i);
            a[i] = v.a;
            b[i] = v.b;
        } else {
            a[i] = 0.0;
            b[i] = 0.0;
        }
    }
}

} // namespace

void ab_masked(const LossSpec& spec, const DenseTensor& y, const DenseTensor& yhat,
               const Mask& selection, DenseTensor& a, DenseTensor& b) {
    require_updatable(spec);
    if (y.shape() != yhat.shape() || y.shape() != selection.shape() || a.shape() != y.shape() ||
        b.shape() != y.shape()) {
        throw ShapeError("ab: data, prediction, mask and output shapes differ");
    }
    const double eps = spec.epsilon_y();
    if (spec.kind() == LossKind::AlphaBeta && spec.alpha() != 0.0) {
        const double al = spec.alpha();
        const double bm1 = spec.beta() - 1.0;
        const double abm1 = spec.alpha() + spec.beta() - 1.0;
        fill_ab(y, yhat, selection, eps, a, b, [&](double x, double yv, std::size_t) -> AB {
            if (x == 0.0 && al < 0.0) {
                positive_data_required(spec);
            }
            return {fast_pow(x, al) * fast_pow(yv, bm1), fast_pow(yv, abm1)};
        });
        return;
    }
    fill_ab(y, yhat, selection, eps, a, b,
            [&](double x, double yv, std::size_t i) { return ab(spec, x, yv, i); });
}

double masked_total_loss(const DenseTensor& y, const DenseTensor& yhat, const Mask& selection,
                         const LossSpec& spec) {
    if (y.shape() != yhat.shape() || y.shape() != selection.shape()) {
        throw ShapeError("loss evaluation: data, prediction and mask shapes differ");
    }
    std::vector<double> terms;
    terms.reserve(selection.count());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (selection.selected(i)) {
            terms.push_back(loss(spec, y[i], yhat[i], i));
        }
    }
    return pairwise_sum(terms);
}

double masked_mean_loss(const DenseTensor& y, const DenseTensor& yhat, const Mask& selection,
                        const LossSpec& spec) {
    const std::size_t n = selection.count();
    if (n == 0) {
        throw ShapeError("empty evaluation set");
    }
    return masked_total_loss(y, yhat, selection, spec) / static_cast<double>(n);
}

} // namespace einfact
