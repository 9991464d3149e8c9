#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "einfact/error.hpp"

namespace einfact {

using Shape = std::vector<std::size_t>;

/// Product of the extents. Throws ShapeError on zero extents or overflow.
std::size_t element_count(std::span<const std::size_t> shape);

/// Row-major strides for `shape`.
std::vector<std::size_t> row_major_strides(std::span<const std::size_t> shape);

/**
 * Dense M-mode tensor of doubles stored row-major.
 *
 * Every extent is positive and the entries are finite; the checked
 * constructors enforce both.
 */
class DenseTensor {
public:
    using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
    using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

    DenseTensor() = default;
    explicit DenseTensor(Shape shape, double fill = 0.0);
    DenseTensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t flat) const noexcept { return data_[flat]; }
    double& operator[](std::size_t flat) noexcept { return data_[flat]; }

    std::size_t flat_index(std::span<const std::size_t> index) const;
    double at(std::initializer_list<std::size_t> index) const;
    double& at(std::initializer_list<std::size_t> index);

    ConstArrayMap array() const noexcept {
        return ConstArrayMap(data_.data(), static_cast<Eigen::Index>(data_.size()));
    }
    ArrayMap array() noexcept {
        return ArrayMap(data_.data(), static_cast<Eigen::Index>(data_.size()));
    }

    bool all_finite() const noexcept;
    double min() const;
    double max() const;

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// out[i] = f(t[i]). Throws DomainError if f produces NaN.
template <typename F>
DenseTensor elementwise_map(const DenseTensor& t, F&& f) {
    DenseTensor out(t.shape());
    const auto in = t.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = f(in[i]);
        if (std::isnan(v)) {
            throw DomainError("elementwise map produced NaN at flat index " + std::to_string(i));
        }
        dst[i] = v;
    }
    return out;
}

/// Pairwise (cascade) summation; error grows as O(log n) rather than O(n).
double pairwise_sum(std::span<const double> values);

enum class Split : std::uint8_t { Train = 0, Validation = 1, Heldout = 2 };

/// Binary selection over a tensor's entries (one byte per entry).
class Mask {
public:
    Mask() = default;
    explicit Mask(Shape shape, bool fill = true);
    Mask(Shape shape, std::vector<std::uint8_t> bits);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return bits_.size(); }
    bool selected(std::size_t flat) const noexcept { return bits_[flat] != 0; }
    void set(std::size_t flat, bool value) noexcept { bits_[flat] = value ? 1 : 0; }
    std::size_t count() const noexcept;
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    Shape shape_;
    std::vector<std::uint8_t> bits_;
};

/// Three-valued train / validation / heldout assignment with binary views.
class SplitLabels {
public:
    SplitLabels() = default;
    /// Every entry labelled `fill`.
    explicit SplitLabels(Shape shape, Split fill = Split::Train);
    SplitLabels(Shape shape, std::vector<Split> labels);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return labels_.size(); }
    Split operator[](std::size_t flat) const noexcept { return labels_[flat]; }
    Split& operator[](std::size_t flat) noexcept { return labels_[flat]; }

    Mask view(Split which) const;
    std::size_t count(Split which) const noexcept;

    friend bool operator==(const SplitLabels&, const SplitLabels&) = default;

private:
    Shape shape_;
    std::vector<Split> labels_;
};

/**
 * Random train / validation / heldout assignment. Each entry is heldout with
 * probability `p_heldout`, otherwise validation with probability
 * `p_validation`, otherwise train. Deterministic in `seed`.
 */
SplitLabels split_mask(const Shape& shape, double p_heldout, double p_validation,
                       std::uint64_t seed);

} // namespace einfact
