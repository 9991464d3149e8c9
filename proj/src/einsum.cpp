#include "einfact/einsum.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <limits>
#include <memory>

namespace einfact {
namespace {

bool is_index_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool has(std::string_view s, char c) { return s.find(c) != std::string_view::npos; }

void check_subscript(std::string_view sub, std::string_view what) {
    if (sub.empty()) {
        throw ParseError("empty " + std::string(what) + " subscript");
    }
    for (std::size_t k = 0; k < sub.size(); ++k) {
        const char c = sub[k];
        if (!is_index_char(c)) {
            throw ParseError("illegal character '" + std::string(1, c) + "' in " +
                             std::string(what) + " subscript \"" + std::string(sub) + "\"");
        }
        if (sub.find(c, k + 1) != std::string_view::npos) {
            throw ParseError("index '" + std::string(1, c) + "' repeated within " +
                             std::string(what) + " subscript \"" + std::string(sub) +
                             "\" (parameter tying unsupported)");
        }
    }
}

std::size_t extent_product(const DimensionBinding& binding, std::string_view sub) {
    return element_count(binding.shape_of(sub));
}

void check_operands(const ModelString& ms, const DimensionBinding& binding,
                    std::span<const DenseTensor* const> operands) {
    if (operands.size() != ms.operand_count()) {
        throw ShapeError("model \"" + ms.str() + "\" takes " + std::to_string(ms.operand_count()) +
                         " operands, got " + std::to_string(operands.size()));
    }
    binding.require_covers(ms);
    for (std::size_t l = 0; l < operands.size(); ++l) {
        if (operands[l]->shape() != binding.shape_of(ms.operands[l])) {
            throw ShapeError("operand " + std::to_string(l + 1) + " (\"" + ms.operands[l] +
                             "\") does not match its bound shape");
        }
    }
}

// dst[out multi-index] = src[sum_k idx_k * src_strides[k]]; zero strides broadcast.
void strided_copy(const double* src, std::span<const std::size_t> out_shape,
                  std::span<const std::size_t> src_strides, double* dst) {
    const std::size_t rank = out_shape.size();
    if (rank == 0) {
        *dst = *src;
        return;
    }
    const std::size_t inner = out_shape[rank - 1];
    const std::size_t inner_stride = src_strides[rank - 1];
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    const std::size_t outer = element_count(out_shape) / inner;
    for (std::size_t o = 0; o < outer; ++o) {
        const double* s = src + offset;
        if (inner_stride == 1) {
            std::copy(s, s + inner, dst);
        } else {
            for (std::size_t k = 0; k < inner; ++k) {
                dst[k] = s[k * inner_stride];
            }
        }
        dst += inner;
        // advance the odometer over the outer axes
        for (std::size_t m = rank - 1; m-- > 0;) {
            offset += src_strides[m];
            if (++idx[m] < out_shape[m]) {
                break;
            }
            offset -= src_strides[m] * out_shape[m];
            idx[m] = 0;
        }
    }
}

// Lay `t` (indexed by `from`) out in the order `to`; indices of `to` missing
// from `from` are broadcast.
DenseTensor relayout(const DenseTensor& t, std::string_view from, std::string_view to,
                     const DimensionBinding& binding) {
    const auto strides = row_major_strides(t.shape());
    std::vector<std::size_t> src_strides(to.size(), 0);
    for (std::size_t k = 0; k < to.size(); ++k) {
        const auto pos = from.find(to[k]);
        if (pos != std::string_view::npos) {
            src_strides[k] = strides[pos];
        }
    }
    DenseTensor out(binding.shape_of(to));
    strided_copy(t.data().data(), out.shape(), src_strides, out.data().data());
    return out;
}

// Sum `t` (indexed by `from`) down to the indices `to` (a subset of `from`).
DenseTensor reduce_to(const DenseTensor& t, std::string_view from, std::string_view to,
                      const DimensionBinding& binding) {
    std::string order(to);
    for (const char c : from) {
        if (!has(to, c)) {
            order.push_back(c);
        }
    }
    const DenseTensor arranged = order == from ? t : relayout(t, from, order, binding);
    DenseTensor out(binding.shape_of(to));
    const std::size_t block = arranged.size() / out.size();
    const double* src = arranged.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = pairwise_sum(std::span<const double>(src + i * block, block));
    }
    return out;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

DenseTensor contract_pair(const DenseTensor& a_in, std::string_view a_sub, const DenseTensor& b_in,
                          std::string_view b_sub, std::string_view result,
                          const DimensionBinding& binding) {
    // Indices carried by one side only and not kept are summed up front.
    std::string a_keep;
    for (const char c : a_sub) {
        if (has(b_sub, c) || has(result, c)) {
            a_keep.push_back(c);
        }
    }
    std::string b_keep;
    for (const char c : b_sub) {
        if (has(a_sub, c) || has(result, c)) {
            b_keep.push_back(c);
        }
    }
    const DenseTensor a_red = a_keep.size() == a_sub.size() ? DenseTensor{} : reduce_to(a_in, a_sub, a_keep, binding);
    const DenseTensor b_red = b_keep.size() == b_sub.size() ? DenseTensor{} : reduce_to(b_in, b_sub, b_keep, binding);
    const DenseTensor& a = a_keep.size() == a_sub.size() ? a_in : a_red;
    const DenseTensor& b = b_keep.size() == b_sub.size() ? b_in : b_red;

    std::string batch, left, right, summed;
    for (const char c : result) {
        const bool in_a = has(a_keep, c);
        const bool in_b = has(b_keep, c);
        if (in_a && in_b) {
            batch.push_back(c);
        } else if (in_a) {
            left.push_back(c);
        } else if (in_b) {
            right.push_back(c);
        } else {
            throw ShapeError("result index '" + std::string(1, c) + "' is in neither operand");
        }
    }
    if (batch + left + right != result) {
        throw ShapeError("pairwise result \"" + std::string(result) +
                         "\" is not in batch/left/right order");
    }
    for (const char c : a_keep) {
        if (has(b_keep, c) && !has(result, c)) {
            summed.push_back(c);
        }
    }

    const std::string a_order = batch + left + summed;
    const std::string b_order = batch + summed + right;
    const DenseTensor a_perm_store = a_order == a_keep ? DenseTensor{} : relayout(a, a_keep, a_order, binding);
    const DenseTensor b_perm_store = b_order == b_keep ? DenseTensor{} : relayout(b, b_keep, b_order, binding);
    const DenseTensor& ap = a_order == a_keep ? a : a_perm_store;
    const DenseTensor& bp = b_order == b_keep ? b : b_perm_store;

    const auto n_batch = static_cast<Eigen::Index>(extent_product(binding, batch));
    const auto n_left = static_cast<Eigen::Index>(extent_product(binding, left));
    const auto n_right = static_cast<Eigen::Index>(extent_product(binding, right));
    const auto n_sum = static_cast<Eigen::Index>(extent_product(binding, summed));

    DenseTensor out(binding.shape_of(result));
    for (Eigen::Index k = 0; k < n_batch; ++k) {
        Eigen::Map<const RowMatrix> lhs(ap.data().data() + k * n_left * n_sum, n_left, n_sum);
        Eigen::Map<const RowMatrix> rhs(bp.data().data() + k * n_sum * n_right, n_sum, n_right);
        Eigen::Map<RowMatrix> dst(out.data().data() + k * n_left * n_right, n_left, n_right);
        dst.noalias() = lhs * rhs;
    }
    return out;
}

} // namespace

std::string ModelString::contracted() const {
    std::string out;
    for (const auto& sub : operands) {
        for (const char c : sub) {
            if (!has(output, c) && !has(out, c)) {
                out.push_back(c);
            }
        }
    }
    return out;
}

std::string ModelString::indices() const {
    std::string out;
    for (const auto& sub : operands) {
        for (const char c : sub) {
            if (!has(out, c)) {
                out.push_back(c);
            }
        }
    }
    for (const char c : output) {
        if (!has(out, c)) {
            out.push_back(c);
        }
    }
    return out;
}

std::string ModelString::str() const {
    std::string out;
    for (std::size_t l = 0; l < operands.size(); ++l) {
        if (l > 0) {
            out.push_back(',');
        }
        out += operands[l];
    }
    return out + "->" + output;
}

ModelString parse(std::string_view model_str) {
    std::string text;
    for (const char c : model_str) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            text.push_back(c);
        }
    }
    const auto arrow = text.find("->");
    if (arrow == std::string::npos) {
        throw ParseError("model string \"" + text + "\" is missing \"->\"");
    }
    if (text.find("->", arrow + 2) != std::string::npos) {
        throw ParseError("model string \"" + text + "\" has more than one \"->\"");
    }
    ModelString ms;
    const std::string lhs = text.substr(0, arrow);
    ms.output = text.substr(arrow + 2);
    std::size_t start = 0;
    while (true) {
        const auto comma = lhs.find(',', start);
        ms.operands.push_back(lhs.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    for (const auto& sub : ms.operands) {
        check_subscript(sub, "operand");
    }
    check_subscript(ms.output, "output");
    for (const char c : ms.output) {
        const bool found = std::any_of(ms.operands.begin(), ms.operands.end(),
                                       [c](const std::string& sub) { return has(sub, c); });
        if (!found) {
            throw ParseError("output index '" + std::string(1, c) + "' appears in no operand");
        }
    }
    return ms;
}

ModelString swap(const ModelString& ms, std::size_t position) {
    if (position >= ms.operand_count()) {
        throw ShapeError("operand position " + std::to_string(position) + " out of range for " +
                         std::to_string(ms.operand_count()) + " operands");
    }
    ModelString out = ms;
    std::swap(out.operands[position], out.output);
    return out;
}

DimensionBinding::DimensionBinding(std::initializer_list<std::pair<const char, std::size_t>> dims) {
    for (const auto& [c, d] : dims) {
        set(c, d);
    }
}

void DimensionBinding::set(char index, std::size_t extent) {
    if (!is_index_char(index)) {
        throw ParseError("illegal index character '" + std::string(1, index) + "'");
    }
    if (extent == 0) {
        throw ShapeError("index '" + std::string(1, index) + "' bound to extent 0");
    }
    dims_[index] = extent;
}

std::size_t DimensionBinding::operator[](char index) const {
    const auto it = dims_.find(index);
    if (it == dims_.end()) {
        throw ShapeError("index '" + std::string(1, index) + "' has no bound dimension");
    }
    return it->second;
}

Shape DimensionBinding::shape_of(std::string_view subscript) const {
    Shape shape;
    shape.reserve(subscript.size());
    for (const char c : subscript) {
        shape.push_back((*this)[c]);
    }
    return shape;
}

void DimensionBinding::require_covers(const ModelString& ms) const {
    for (const char c : ms.indices()) {
        if (!contains(c)) {
            throw ShapeError("index '" + std::string(1, c) + "' has no bound dimension");
        }
    }
}

DimensionBinding bind_dimensions(const ModelString& ms, const Shape& data_shape,
                                 const std::map<char, std::size_t>& latent) {
    if (data_shape.size() != ms.output.size()) {
        throw ShapeError("model output \"" + ms.output + "\" has " +
                         std::to_string(ms.output.size()) + " modes but the data has " +
                         std::to_string(data_shape.size()));
    }
    DimensionBinding binding;
    for (std::size_t m = 0; m < data_shape.size(); ++m) {
        binding.set(ms.output[m], data_shape[m]);
    }
    for (const char c : ms.contracted()) {
        if (!latent.contains(c)) {
            throw ShapeError("no rank given for contracted index '" + std::string(1, c) + "'");
        }
    }
    const std::string all = ms.indices();
    for (const auto& [c, extent] : latent) {
        if (!has(all, c)) {
            throw ShapeError("rank given for index '" + std::string(1, c) +
                             "' which does not appear in the model");
        }
        if (binding.contains(c)) {
            if (binding[c] != extent) {
                throw ShapeError("index '" + std::string(1, c) + "' bound to " +
                                 std::to_string(extent) + " but the data mode has extent " +
                                 std::to_string(binding[c]));
            }
            continue;
        }
        binding.set(c, extent);
    }
    return binding;
}

std::size_t ContractionPlan::max_intermediate() const {
    std::size_t largest = 0;
    for (const auto& step : steps) {
        largest = std::max(largest, element_count(binding.shape_of(step.result)));
    }
    return largest;
}

ContractionPlan plan(const ModelString& ms, const DimensionBinding& binding) {
    if (ms.operands.empty()) {
        throw ShapeError("model string has no operands");
    }
    binding.require_covers(ms);
    ContractionPlan p{ms, binding, {}};

    struct Term {
        std::size_t id;
        std::string sub;
    };
    std::vector<Term> alive;
    std::size_t next_id = ms.operand_count();

    // Indices carried by a single operand and absent from the output are
    // marginalised before any pairing.
    for (std::size_t l = 0; l < ms.operand_count(); ++l) {
        const std::string& sub = ms.operands[l];
        std::string keep, summed;
        for (const char c : sub) {
            bool elsewhere = has(ms.output, c);
            for (std::size_t o = 0; o < ms.operand_count() && !elsewhere; ++o) {
                elsewhere = o != l && has(ms.operands[o], c);
            }
            (elsewhere ? keep : summed).push_back(c);
        }
        if (summed.empty()) {
            alive.push_back({l, sub});
        } else {
            p.steps.push_back({l, ContractionStep::npos, keep, summed});
            alive.push_back({next_id++, keep});
        }
    }

    while (alive.size() > 1) {
        std::size_t best_i = 0, best_j = 1;
        std::size_t best_size = std::numeric_limits<std::size_t>::max();
        std::string best_result, best_summed;
        for (std::size_t i = 0; i < alive.size(); ++i) {
            for (std::size_t j = i + 1; j < alive.size(); ++j) {
                std::string needed = ms.output;
                for (std::size_t o = 0; o < alive.size(); ++o) {
                    if (o != i && o != j) {
                        needed += alive[o].sub;
                    }
                }
                const std::string& a = alive[i].sub;
                const std::string& b = alive[j].sub;
                std::string batch, left, right, summed;
                for (const char c : a) {
                    if (has(needed, c)) {
                        (has(b, c) ? batch : left).push_back(c);
                    } else {
                        summed.push_back(c);
                    }
                }
                for (const char c : b) {
                    if (has(needed, c) && !has(a, c)) {
                        right.push_back(c);
                    } else if (!has(needed, c) && !has(a, c)) {
                        summed.push_back(c);
                    }
                }
                const std::string result = batch + left + right;
                const std::size_t size = element_count(binding.shape_of(result));
                if (size < best_size) {
                    best_size = size;
                    best_i = i;
                    best_j = j;
                    best_result = result;
                    best_summed = summed;
                }
            }
        }
        p.steps.push_back({alive[best_i].id, alive[best_j].id, best_result, best_summed});
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best_j));
        alive[best_i] = {next_id++, best_result};
    }
    return p;
}

DenseTensor execute(const ContractionPlan& p, std::span<const DenseTensor* const> operands) {
    const ModelString& ms = p.model;
    check_operands(ms, p.binding, operands);

    std::vector<const DenseTensor*> terms(operands.begin(), operands.end());
    std::vector<std::string> subs = ms.operands;
    std::deque<DenseTensor> owned;
    for (const auto& step : p.steps) {
        if (step.rhs == ContractionStep::npos) {
            owned.push_back(reduce_to(*terms[step.lhs], subs[step.lhs], step.result, p.binding));
        } else {
            owned.push_back(contract_pair(*terms[step.lhs], subs[step.lhs], *terms[step.rhs],
                                          subs[step.rhs], step.result, p.binding));
        }
        terms.push_back(&owned.back());
        subs.push_back(step.result);
    }
    const DenseTensor& last = *terms.back();
    const std::string& last_sub = subs.back();
    if (last_sub == ms.output) {
        return last;
    }
    return relayout(last, last_sub, ms.output, p.binding);
}

DenseTensor contract(const ModelString& ms, const DimensionBinding& binding,
                     std::span<const DenseTensor> operands) {
    std::vector<const DenseTensor*> ptrs;
    ptrs.reserve(operands.size());
    for (const auto& t : operands) {
        ptrs.push_back(&t);
    }
    return execute(plan(ms, binding), ptrs);
}

DenseTensor contract_oracle(const ModelString& ms, const DimensionBinding& binding,
                            std::span<const DenseTensor> operands) {
    std::vector<const DenseTensor*> ptrs;
    for (const auto& t : operands) {
        ptrs.push_back(&t);
    }
    check_operands(ms, binding, ptrs);

    const std::string all = ms.indices();
    const Shape extents = binding.shape_of(all);
    const std::size_t total = element_count(extents);

    // position of each operand / output axis in the full index tuple
    const auto positions = [&](std::string_view sub) {
        std::vector<std::size_t> pos;
        for (const char c : sub) {
            pos.push_back(all.find(c));
        }
        return pos;
    };
    std::vector<std::vector<std::size_t>> operand_pos;
    for (const auto& sub : ms.operands) {
        operand_pos.push_back(positions(sub));
    }
    const auto output_pos = positions(ms.output);

    DenseTensor out(binding.shape_of(ms.output));
    std::vector<std::size_t> idx(all.size(), 0);
    std::vector<std::size_t> sub_idx;
    for (std::size_t n = 0; n < total; ++n) {
        double product = 1.0;
        for (std::size_t l = 0; l < operands.size(); ++l) {
            sub_idx.clear();
            for (const std::size_t q : operand_pos[l]) {
                sub_idx.push_back(idx[q]);
            }
            product *= operands[l][operands[l].flat_index(sub_idx)];
        }
        sub_idx.clear();
        for (const std::size_t q : output_pos) {
            sub_idx.push_back(idx[q]);
        }
        out[out.flat_index(sub_idx)] += product;

        for (std::size_t m = all.size(); m-- > 0;) {
            if (++idx[m] < extents[m]) {
                break;
            }
            idx[m] = 0;
        }
    }
    return out;
}

DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> axes) {
    if (axes.size() != t.rank()) {
        throw ShapeError("permutation length does not match tensor rank");
    }
    std::vector<bool> seen(axes.size(), false);
    Shape out_shape;
    std::vector<std::size_t> src_strides;
    const auto strides = row_major_strides(t.shape());
    for (const std::size_t a : axes) {
        if (a >= axes.size() || seen[a]) {
            throw ShapeError("invalid axis permutation");
        }
        seen[a] = true;
        out_shape.push_back(t.shape()[a]);
        src_strides.push_back(strides[a]);
    }
    DenseTensor out(out_shape);
    strided_copy(t.data().data(), out.shape(), src_strides, out.data().data());
    return out;
}

} // namespace einfact
