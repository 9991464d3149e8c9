#include "einfact/models.hpp"

#include <cmath>
#include <random>

#include "einfact/random.hpp"

namespace einfact {
namespace {

constexpr std::string_view kObserved = "ijklmnopqstu";
constexpr std::string_view kLatent = "ABCDEFGHIJKLM";
constexpr char kCpIndex = 'R';
constexpr char kCoreIndex = 'Z';

void require_rank(std::size_t r, const char* what) {
    if (r == 0) {
        throw ConfigError(std::string(what) + " must be at least 1");
    }
}

std::vector<std::size_t> tucker_ranks(const ModelRecipe& recipe) {
    const std::size_t modes = recipe.shape.size();
    std::vector<std::size_t> ranks;
    if (recipe.kind == ModelKind::TuckerCubic || recipe.kind == ModelKind::LRTuckerCubic) {
        require_rank(recipe.rank, "Tucker rank");
        ranks.assign(modes, recipe.rank);
    } else if (!recipe.ranks.empty()) {
        if (recipe.ranks.size() != modes) {
            throw ConfigError("Tucker needs one rank per mode");
        }
        ranks = recipe.ranks;
    } else if (recipe.ratio > 0.0) {
        for (const std::size_t extent : recipe.shape) {
            const double r = std::round(recipe.ratio * static_cast<double>(extent));
            ranks.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(r)));
        }
    } else {
        throw ConfigError("Tucker needs per-mode ranks or a positive rank ratio");
    }
    for (const std::size_t r : ranks) {
        require_rank(r, "Tucker rank");
    }
    return ranks;
}

std::vector<std::size_t> train_ranks(const ModelRecipe& recipe) {
    const std::size_t modes = recipe.shape.size();
    std::vector<std::size_t> bonds;
    if (recipe.ranks.empty()) {
        require_rank(recipe.rank, "tensor-train rank");
        bonds.assign(modes + 1, recipe.rank);
        bonds.front() = 1;
        bonds.back() = 1;
    } else if (recipe.ranks.size() == modes + 1) {
        bonds = recipe.ranks;
        if (bonds.front() != 1 || bonds.back() != 1) {
            throw ConfigError("tensor-train boundary ranks must be 1");
        }
    } else if (recipe.ranks.size() + 1 == modes) {
        bonds.push_back(1);
        bonds.insert(bonds.end(), recipe.ranks.begin(), recipe.ranks.end());
        bonds.push_back(1);
    } else {
        throw ConfigError("tensor-train needs M + 1 bond ranks or M - 1 interior ones");
    }
    for (const std::size_t r : bonds) {
        require_rank(r, "tensor-train rank");
    }
    return bonds;
}

} // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::CP: return "cp";
    case ModelKind::Tucker: return "tucker";
    case ModelKind::TuckerCubic: return "tucker-cubic";
    case ModelKind::LRTucker: return "lr-tucker";
    case ModelKind::LRTuckerCubic: return "lr-tucker-cubic";
    case ModelKind::TensorTrain: return "tt";
    case ModelKind::ManyBody: return "many-body";
    case ModelKind::Custom: return "custom";
    }
    return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (const auto kind : {ModelKind::CP, ModelKind::Tucker, ModelKind::TuckerCubic,
                            ModelKind::LRTucker, ModelKind::LRTuckerCubic, ModelKind::TensorTrain,
                            ModelKind::ManyBody, ModelKind::Custom}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

BuiltModel build(const ModelRecipe& recipe) {
    if (recipe.kind == ModelKind::Custom) {
        BuiltModel out{parse(recipe.custom), {}};
        out.binding = bind_dimensions(out.model, recipe.shape, recipe.custom_ranks);
        return out;
    }
    const std::size_t modes = recipe.shape.size();
    if (modes < 2 || modes > kObserved.size()) {
        throw ConfigError("zoo models support 2 to " + std::to_string(kObserved.size()) +
                          " modes, got " + std::to_string(modes));
    }
    ModelString ms;
    ms.output = std::string(kObserved.substr(0, modes));
    DimensionBinding binding;
    for (std::size_t m = 0; m < modes; ++m) {
        binding.set(kObserved[m], recipe.shape[m]);
    }

    switch (recipe.kind) {
    case ModelKind::CP:
        require_rank(recipe.rank, "CP rank");
        for (std::size_t m = 0; m < modes; ++m) {
            ms.operands.push_back(std::string{kObserved[m], kCpIndex});
        }
        binding.set(kCpIndex, recipe.rank);
        break;
    case ModelKind::Tucker:
    case ModelKind::TuckerCubic:
    case ModelKind::LRTucker:
    case ModelKind::LRTuckerCubic: {
        const auto ranks = tucker_ranks(recipe);
        std::string core;
        for (std::size_t m = 0; m < modes; ++m) {
            ms.operands.push_back(std::string{kObserved[m], kLatent[m]});
            binding.set(kLatent[m], ranks[m]);
            core.push_back(kLatent[m]);
        }
        if (recipe.kind == ModelKind::LRTucker || recipe.kind == ModelKind::LRTuckerCubic) {
            require_rank(recipe.core_rank, "core rank");
            for (std::size_t m = 0; m < modes; ++m) {
                ms.operands.push_back(std::string{kLatent[m], kCoreIndex});
            }
            binding.set(kCoreIndex, recipe.core_rank);
        } else {
            ms.operands.push_back(core);
        }
        break;
    }
    case ModelKind::TensorTrain: {
        const auto bonds = train_ranks(recipe);
        for (std::size_t m = 0; m < modes; ++m) {
            ms.operands.push_back(std::string{kObserved[m], kLatent[m], kLatent[m + 1]});
        }
        for (std::size_t b = 0; b <= modes; ++b) {
            binding.set(kLatent[b], bonds[b]);
        }
        break;
    }
    case ModelKind::ManyBody:
        // pairs ordered by distance, then by first mode: ij, jk, ik for three modes
        for (std::size_t gap = 1; gap < modes; ++gap) {
            for (std::size_t m = 0; m + gap < modes; ++m) {
                ms.operands.push_back(std::string{kObserved[m], kObserved[m + gap]});
            }
        }
        break;
    case ModelKind::Custom:
        break;
    }
    // Round-trip through the parser so zoo output obeys the same grammar.
    BuiltModel out{parse(ms.str()), binding};
    out.binding.require_covers(out.model);
    return out;
}

std::size_t param_count(const ModelString& ms, const DimensionBinding& binding) {
    std::size_t total = 0;
    for (const auto& sub : ms.operands) {
        total += element_count(binding.shape_of(sub));
    }
    return total;
}

std::vector<DenseTensor> plant(const ModelString& ms, const DimensionBinding& binding,
                               std::uint64_t seed) {
    binding.require_covers(ms);
    auto engine = make_engine(seed, Stream::Synth);
    std::uniform_real_distribution<double> draw(0.1, 1.0);
    std::vector<DenseTensor> factors;
    for (const auto& sub : ms.operands) {
        DenseTensor f(binding.shape_of(sub));
        for (double& v : f.data()) {
            v = draw(engine);
        }
        factors.push_back(std::move(f));
    }
    return factors;
}

DenseTensor sample_poisson(const DenseTensor& mean, std::uint64_t seed) {
    auto engine = make_engine(seed, Stream::Noise);
    DenseTensor out(mean.shape());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (mean[i] > 0.0) {
            std::poisson_distribution<long long> draw(mean[i]);
            out[i] = static_cast<double>(draw(engine));
        }
    }
    return out;
}

DenseTensor synth(const ModelString& ms, const DimensionBinding& binding, std::uint64_t seed,
                  Noise noise) {
    const auto factors = plant(ms, binding, seed);
    DenseTensor mean = contract(ms, binding, factors);
    if (noise == Noise::Poisson) {
        return sample_poisson(mean, seed);
    }
    return mean;
}

} // namespace einfact
