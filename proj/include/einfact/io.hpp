#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "einfact/tensor.hpp"

namespace einfact {

/**
 * Tensor files.
 *
 * `.coo` text: a header line `dims d1 d2 ... dM`, then one `i1 ... iM value`
 * line per stored entry (zero-based). Omitted entries are 0, repeated
 * coordinates are summed, blank lines and lines starting with '#' are skipped.
 *
 * `.dtb` binary: the bytes "DTB1", a little-endian u32 mode count, one u64
 * per extent, then the row-major float64 entries, little-endian.
 */
DenseTensor read_tensor(const std::filesystem::path& path);
void write_tensor(const DenseTensor& t, const std::filesystem::path& path);

DenseTensor read_coo(std::istream& in, const std::string& source = "<stream>");
void write_coo(const DenseTensor& t, std::ostream& out);
DenseTensor read_dtb(std::istream& in, const std::string& source = "<stream>");
void write_dtb(const DenseTensor& t, std::ostream& out);

/// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/**
 * Everything needed to repeat a fit: flat `key=value` lines in a fixed key
 * order. The train/validation/heldout split is not stored; it is regenerated
 * from `seed` and the two split probabilities.
 */
struct RunManifest {
    std::string data;
    std::string model;
    std::map<char, std::size_t> ranks;
    std::string loss = "ab";
    double alpha = 1.0;
    double beta = 0.0;
    double phi = 1.0;
    double trials = 1.0;
    double epsilon = 1e-12;
    std::uint64_t seed = 0;
    double split_heldout = 0.1;
    double split_val = 0.05;
    int max_iters = 5000;
    double min_rel_decrease = 1e-6;
    int val_patience = 5;
    std::string optimizer = "mu";
    double lr = 0.1;
    std::vector<std::string> factor_files;

    std::string to_text() const;
    static RunManifest from_text(const std::string& text);
};

/// "i=3,r=2" <-> map. Throws ParseError naming the offending entry.
std::map<char, std::size_t> parse_rank_list(const std::string& text);
std::string format_rank_list(const std::map<char, std::size_t>& ranks);

} // namespace einfact
