#include "einfact/tensor.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "einfact/random.hpp"

namespace einfact {

std::size_t element_count(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (const std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("tensor extents must be positive");
        }
        if (n > std::numeric_limits<std::size_t>::max() / d) {
            throw ShapeError("tensor size overflows the addressable range");
        }
        n *= d;
    }
    return n;
}

std::vector<std::size_t> row_major_strides(std::span<const std::size_t> shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t m = shape.size(); m-- > 1;) {
        strides[m - 1] = strides[m] * shape[m];
    }
    return strides;
}

DenseTensor::DenseTensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
    if (!std::isfinite(fill)) {
        throw DomainError("tensor entries must be finite");
    }
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match its shape (" + std::to_string(element_count(shape_)) +
                         " entries)");
    }
    if (!all_finite()) {
        throw DomainError("tensor entries must be finite");
    }
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw ShapeError("index has " + std::to_string(index.size()) + " components, tensor has " +
                         std::to_string(shape_.size()) + " modes");
    }
    std::size_t flat = 0;
    for (std::size_t m = 0; m < index.size(); ++m) {
        if (index[m] >= shape_[m]) {
            throw ShapeError("index " + std::to_string(index[m]) + " out of range for mode " +
                             std::to_string(m));
        }
        flat = flat * shape_[m] + index[m];
    }
    return flat;
}

double DenseTensor::at(std::initializer_list<std::size_t> index) const {
    return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

double& DenseTensor::at(std::initializer_list<std::size_t> index) {
    return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

bool DenseTensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseTensor::min() const {
    if (data_.empty()) {
        throw ShapeError("min of an empty tensor");
    }
    return *std::min_element(data_.begin(), data_.end());
}

double DenseTensor::max() const {
    if (data_.empty()) {
        throw ShapeError("max of an empty tensor");
    }
    return *std::max_element(data_.begin(), data_.end());
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t block = 64;
    if (values.size() <= block) {
        double s = 0.0;
        for (const double v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Mask::Mask(Shape shape, bool fill)
    : shape_(std::move(shape)), bits_(element_count(shape_), fill ? 1 : 0) {}

Mask::Mask(Shape shape, std::vector<std::uint8_t> bits)
    : shape_(std::move(shape)), bits_(std::move(bits)) {
    if (bits_.size() != element_count(shape_)) {
        throw ShapeError("mask length does not match its shape");
    }
    for (auto& b : bits_) {
        if (b > 1) {
            throw ShapeError("mask entries must be 0 or 1");
        }
    }
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

SplitLabels::SplitLabels(Shape shape, Split fill)
    : shape_(std::move(shape)), labels_(element_count(shape_), fill) {}

SplitLabels::SplitLabels(Shape shape, std::vector<Split> labels)
    : shape_(std::move(shape)), labels_(std::move(labels)) {
    if (labels_.size() != element_count(shape_)) {
        throw ShapeError("split label length does not match its shape");
    }
}

Mask SplitLabels::view(Split which) const {
    std::vector<std::uint8_t> bits(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        bits[i] = labels_[i] == which ? 1 : 0;
    }
    return Mask(shape_, std::move(bits));
}

std::size_t SplitLabels::count(Split which) const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), which));
}

SplitLabels split_mask(const Shape& shape, double p_heldout, double p_validation,
                       std::uint64_t seed) {
    const auto valid = [](double p) { return std::isfinite(p) && p >= 0.0 && p < 1.0; };
    if (!valid(p_heldout) || !valid(p_validation)) {
        throw ConfigError("split probabilities must lie in [0, 1)");
    }
    if (p_heldout + (1.0 - p_heldout) * p_validation >= 1.0) {
        throw ConfigError("split probabilities leave no training entries");
    }
    SplitLabels labels(shape);
    auto engine = make_engine(seed, Stream::Split);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        // Two draws per entry regardless of outcome keeps the stream aligned.
        const double u_heldout = unit(engine);
        const double u_validation = unit(engine);
        if (u_heldout < p_heldout) {
            labels[i] = Split::Heldout;
        } else if (u_validation < p_validation) {
            labels[i] = Split::Validation;
        } else {
            labels[i] = Split::Train;
        }
    }
    return labels;
}

} // namespace einfact
