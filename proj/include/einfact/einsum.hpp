#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "einfact/tensor.hpp"

namespace einfact {

/**
 * Parsed einsum model string `sub_1,...,sub_L->out`.
 *
 * Each subscript is a sequence of single-letter indices. Indices in `output`
 * are observed; indices that appear only among the operands are contracted
 * (summed).
 */
struct ModelString {
    std::vector<std::string> operands;
    std::string output;

    std::size_t operand_count() const noexcept { return operands.size(); }
    /// Observed indices in output order.
    std::string observed() const { return output; }
    /// Contracted indices in order of first appearance.
    std::string contracted() const;
    /// Every index of the string in order of first appearance (operands, then output).
    std::string indices() const;
    /// Canonical text form, e.g. "ir,jr->ij".
    std::string str() const;

    friend bool operator==(const ModelString&, const ModelString&) = default;
};

/**
 * Parse and validate a model string. Whitespace is ignored.
 *
 * Rejects: a missing "->", empty operands, characters outside [a-zA-Z],
 * an index repeated inside one subscript, and output indices that no operand
 * carries.
 */
ModelString parse(std::string_view model_str);

/**
 * The gradient string for operand `position` (zero-based): the operand's
 * subscript and the output trade places.
 *
 * The result may carry output indices that no remaining operand has (when the
 * swapped operand marginalises an index); `contract` broadcasts over those.
 */
ModelString swap(const ModelString& ms, std::size_t position);

/// Map from index letter to its extent.
class DimensionBinding {
public:
    DimensionBinding() = default;
    DimensionBinding(std::initializer_list<std::pair<const char, std::size_t>> dims);

    void set(char index, std::size_t extent);
    bool contains(char index) const noexcept { return dims_.contains(index); }
    std::size_t operator[](char index) const;
    Shape shape_of(std::string_view subscript) const;
    const std::map<char, std::size_t>& entries() const noexcept { return dims_; }

    /// Throws ShapeError naming the first index of `ms` left unbound.
    void require_covers(const ModelString& ms) const;

    friend bool operator==(const DimensionBinding&, const DimensionBinding&) = default;

private:
    std::map<char, std::size_t> dims_;
};

/**
 * Binding for fitting `ms` to data of shape `data_shape`: observed extents
 * come from the data in output order, contracted extents from `latent`.
 * Throws ShapeError naming any contracted index `latent` omits, or when
 * `latent` contradicts the data shape.
 */
DimensionBinding bind_dimensions(const ModelString& ms, const Shape& data_shape,
                                 const std::map<char, std::size_t>& latent);

/// One step of a contraction plan over a growing list of terms.
struct ContractionStep {
    /// Term ids consumed; `rhs == npos` marks a single-term reduction.
    std::size_t lhs = 0;
    std::size_t rhs = npos;
    /// Subscript of the produced term (appended to the term list).
    std::string result;
    /// Indices summed away by this step.
    std::string summed;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/**
 * Ordered pairwise contractions evaluating a model string. Terms 0..L-1 are
 * the operands; step k produces term L+k. The last term is finally laid out
 * (permuted and, when needed, broadcast) in output order.
 */
struct ContractionPlan {
    ModelString model;
    DimensionBinding binding;
    std::vector<ContractionStep> steps;

    /// Size of the largest intermediate term the plan materialises.
    std::size_t max_intermediate() const;
};

/// Greedy plan: repeatedly contract the pair whose result is smallest.
ContractionPlan plan(const ModelString& ms, const DimensionBinding& binding);

/// Evaluate the model string on `operands` (one tensor per subscript).
DenseTensor contract(const ModelString& ms, const DimensionBinding& binding,
                     std::span<const DenseTensor> operands);

/// Execute a prebuilt plan. Pointers must stay valid for the call.
DenseTensor execute(const ContractionPlan& p, std::span<const DenseTensor* const> operands);

/// Literal nested loops over every index assignment; for small problems and tests.
DenseTensor contract_oracle(const ModelString& ms, const DimensionBinding& binding,
                            std::span<const DenseTensor> operands);

/// Reorder axes: output axis k is input axis `axes[k]`.
DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> axes);

} // namespace einfact
