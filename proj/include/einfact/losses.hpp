#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "einfact/tensor.hpp"

namespace einfact {

enum class LossKind { AlphaBeta, NegBinomial, BernoulliOdds, BinomialOdds, JensenShannon };

/// Closed-form branch of the (alpha, beta)-divergence.
enum class AlphaBetaCase {
    Generic,        ///< alpha, beta, alpha + beta all nonzero
    BetaZero,       ///< beta = 0, alpha != 0
    AlphaMinusBeta, ///< alpha = -beta != 0
    AlphaZero,      ///< alpha = 0, beta != 0
    BothZero,       ///< alpha = beta = 0
};

AlphaBetaCase classify(double alpha, double beta) noexcept;

/// g(lambda) = lambda^exponent, or log(lambda) when `logarithmic`.
struct GLink {
    bool logarithmic = false;
    double exponent = 1.0;
};

/**
 * A decomposable loss L(x, y) between an observed value x and a prediction y.
 *
 * Alongside the loss itself, each kind supplies the pair a(x, y), b(x, y) and
 * the link g that together give the multiplicative update
 * theta <- theta * g^{-1}(A / B).
 *
 * Negative-binomial dispersion and binomial trial counts may be scalars or
 * per-entry tensors shaped like the data.
 */
class LossSpec {
public:
    /// Rejects alpha = 0 with beta != 1, which has no multiplicative update.
    static LossSpec alpha_beta(double alpha, double beta);
    /// Any (alpha, beta), for evaluation only: `ab` and `g_inverse` throw.
    static LossSpec alpha_beta_metric(double alpha, double beta);
    static LossSpec neg_binomial(double phi);
    static LossSpec neg_binomial(DenseTensor phi);
    static LossSpec bernoulli();
    static LossSpec binomial(double trials);
    static LossSpec binomial(DenseTensor trials);
    static LossSpec jensen_shannon();

    LossKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    /// Lower clamp applied to predictions inside a, b and the loss.
    double epsilon_y() const noexcept { return epsilon_y_; }
    void set_epsilon_y(double eps);
    /// False for evaluation-only (alpha, beta) pairs.
    bool updatable() const noexcept { return updatable_; }

    /// Dispersion (negbin) or trials (binomial) at a flat data index.
    double param_at(std::size_t flat) const noexcept {
        return param_tensor_ ? (*param_tensor_)[flat] : param_;
    }
    bool has_param_tensor() const noexcept { return param_tensor_ != nullptr; }
    const DenseTensor* param_tensor() const noexcept { return param_tensor_.get(); }
    double scalar_param() const noexcept { return param_; }

    /// e.g. "ab(alpha=1, beta=0)", "negbin(phi=1)".
    std::string name() const;

private:
    LossKind kind_ = LossKind::AlphaBeta;
    double alpha_ = 1.0;
    double beta_ = 1.0;
    double param_ = 1.0;
    std::shared_ptr<const DenseTensor> param_tensor_;
    double epsilon_y_ = 1e-30;
    bool updatable_ = true;
};

struct AB {
    double a;
    double b;
};

/// Pointwise loss. `entry` selects per-entry parameters.
double loss(const LossSpec& spec, double x, double y, std::size_t entry = 0);
/// The update pair (a, b) at (x, y).
AB ab(const LossSpec& spec, double x, double y, std::size_t entry = 0);
/// a and b over every entry of `selection`; zero elsewhere.
void ab_masked(const LossSpec& spec, const DenseTensor& y, const DenseTensor& yhat,
               const Mask& selection, DenseTensor& a, DenseTensor& b);
/// Partial derivative of the loss in its second argument.
double dloss_dy(const LossSpec& spec, double x, double y, std::size_t entry = 0);

GLink g_link(const LossSpec& spec);
double g(const LossSpec& spec, double lambda);
/**
 * Inverse link. Throws DomainError when `t` lies outside Range(g) (t < 0 for
 * power links). A zero ratio under a negative exponent returns +inf; the
 * update treats a non-finite multiplier as "leave unchanged".
 */
double g_inverse(const LossSpec& spec, double t);

/// Mean loss over the entries `selection` marks. Throws on an empty selection.
double masked_mean_loss(const DenseTensor& y, const DenseTensor& yhat, const Mask& selection,
                        const LossSpec& spec);

/// Summed loss over selected entries (pairwise summation).
double masked_total_loss(const DenseTensor& y, const DenseTensor& yhat, const Mask& selection,
                         const LossSpec& spec);

} // namespace einfact
