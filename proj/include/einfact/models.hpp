#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "einfact/einsum.hpp"

namespace einfact {

enum class ModelKind { CP, Tucker, TuckerCubic, LRTucker, LRTuckerCubic, TensorTrain, ManyBody, Custom };

std::string to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

/**
 * Description of a model from the zoo.
 *
 * Observed modes are lettered i, j, k, l, m, n, o, p, q, s, t, u in order;
 * contracted indices use upper-case letters.
 *
 *  - CP: `rank` R.
 *  - Tucker / LRTucker: per-mode `ranks`, or `ratio` giving
 *    R_m = max(1, round(ratio * I_m)) when `ranks` is empty.
 *  - TuckerCubic / LRTuckerCubic: every R_m = `rank`.
 *  - LR variants: the core is replaced by M matrices R_m x `core_rank`.
 *  - TensorTrain: `ranks` holds the M + 1 bond ranks (ends equal to 1) or the
 *    M - 1 interior ones; empty means every interior bond is `rank`.
 *  - ManyBody: one matrix per pair of observed modes.
 *  - Custom: `custom` model string with `custom_ranks` for contracted indices.
 */
struct ModelRecipe {
    ModelKind kind = ModelKind::CP;
    Shape shape;
    std::size_t rank = 1;
    std::vector<std::size_t> ranks;
    double ratio = 0.0;
    std::size_t core_rank = 1;
    std::string custom;
    std::map<char, std::size_t> custom_ranks;
};

struct BuiltModel {
    ModelString model;
    DimensionBinding binding;
};

BuiltModel build(const ModelRecipe& recipe);

/// Sum over operands of the product of their bound extents.
std::size_t param_count(const ModelString& ms, const DimensionBinding& binding);

enum class Noise { None, Poisson };

/// Planted factors with entries drawn from U(0.1, 1); deterministic in `seed`.
std::vector<DenseTensor> plant(const ModelString& ms, const DimensionBinding& binding,
                               std::uint64_t seed);

/**
 * Synthetic data from planted factors: the contraction itself, or a Poisson
 * draw with that mean per entry.
 */
DenseTensor synth(const ModelString& ms, const DimensionBinding& binding, std::uint64_t seed,
                  Noise noise = Noise::None);

/// Poisson draw with mean `mean[i]` per entry.
DenseTensor sample_poisson(const DenseTensor& mean, std::uint64_t seed);

} // namespace einfact
