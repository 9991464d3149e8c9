#include "einfact/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace einfact {
namespace {

constexpr char kMagic[4] = {'D', 'T', 'B', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        return false;
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    std::memcpy(&value, bytes, sizeof(T));
    return true;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("invalid " + what + " \"" + text + "\"");
    }
    return value;
}

// from_chars for double is missing on some toolchains; strtod on a copy.
double parse_double(const std::string& text, const std::string& what) {
    if (text.empty()) {
        throw ParseError("empty " + what);
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) {
        throw ParseError("invalid " + what + " \"" + text + "\"");
    }
    return v;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

DenseTensor read_coo(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    Shape shape;
    bool have_header = false;
    DenseTensor t;
    std::vector<std::size_t> idx;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        std::istringstream fields(text);
        const std::string where = source + ":" + std::to_string(line_no);
        if (!have_header) {
            std::string keyword;
            fields >> keyword;
            if (keyword != "dims") {
                throw IoError(where + ": expected header \"dims d1 ... dM\"");
            }
            std::string tok;
            while (fields >> tok) {
                const auto d = parse_number<std::size_t>(tok, "dimension");
                if (d == 0) {
                    throw IoError(where + ": dimensions must be positive");
                }
                shape.push_back(d);
            }
            if (shape.empty()) {
                throw IoError(where + ": header lists no dimensions");
            }
            t = DenseTensor(shape);
            have_header = true;
            continue;
        }
        std::vector<std::string> tokens;
        std::string tok;
        while (fields >> tok) {
            tokens.push_back(tok);
        }
        if (tokens.size() != shape.size() + 1) {
            throw IoError(where + ": expected " + std::to_string(shape.size()) +
                          " indices and a value");
        }
        idx.clear();
        try {
            for (std::size_t m = 0; m < shape.size(); ++m) {
                const auto i = parse_number<std::size_t>(tokens[m], "index");
                if (i >= shape[m]) {
                    throw IoError(where + ": index " + tokens[m] + " out of range for mode " +
                                  std::to_string(m));
                }
                idx.push_back(i);
            }
            const double value = parse_double(tokens.back(), "value");
            if (!std::isfinite(value) || value < 0.0) {
                throw IoError(where + ": values must be finite and nonnegative");
            }
            t[t.flat_index(idx)] += value;
        } catch (const ParseError& e) {
            throw IoError(where + ": " + e.what());
        }
    }
    if (!have_header) {
        throw IoError(source + ": missing \"dims\" header");
    }
    return t;
}

void write_coo(const DenseTensor& t, std::ostream& out) {
    out << "dims";
    for (const auto d : t.shape()) {
        out << ' ' << d;
    }
    out << '\n';
    std::vector<std::size_t> idx(t.rank(), 0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        if (t[flat] != 0.0) {
            for (const auto i : idx) {
                out << i << ' ';
            }
            out << format_double(t[flat]) << '\n';
        }
        for (std::size_t m = t.rank(); m-- > 0;) {
            if (++idx[m] < t.shape()[m]) {
                break;
            }
            idx[m] = 0;
        }
    }
}

DenseTensor read_dtb(std::istream& in, const std::string& source) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError(source + ": not a DTB1 file");
    }
    std::uint32_t modes = 0;
    if (!get_le(in, modes)) {
        throw IoError(source + ": truncated header");
    }
    Shape shape;
    for (std::uint32_t m = 0; m < modes; ++m) {
        std::uint64_t d = 0;
        if (!get_le(in, d)) {
            throw IoError(source + ": truncated header");
        }
        if (d == 0) {
            throw IoError(source + ": dimensions must be positive");
        }
        shape.push_back(static_cast<std::size_t>(d));
    }
    std::size_t n = 0;
    try {
        n = element_count(shape);
    } catch (const ShapeError& e) {
        throw IoError(source + ": " + e.what());
    }
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!get_le(in, data[i])) {
            throw IoError(source + ": truncated data (" + std::to_string(i) + " of " +
                          std::to_string(n) + " values)");
        }
        if (!(data[i] >= 0.0)) {
            throw IoError(source + ": negative or NaN value at offset " + std::to_string(i));
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw IoError(source + ": trailing bytes after data");
    }
    try {
        return DenseTensor(std::move(shape), std::move(data));
    } catch (const Error& e) {
        throw IoError(source + ": " + e.what());
    }
}

void write_dtb(const DenseTensor& t, std::ostream& out) {
    out.write(kMagic, 4);
    put_le(out, static_cast<std::uint32_t>(t.rank()));
    for (const auto d : t.shape()) {
        put_le(out, static_cast<std::uint64_t>(d));
    }
    for (const double v : t.data()) {
        put_le(out, v);
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw IoError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

DenseTensor read_tensor(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".coo") {
        std::ifstream in(path);
        if (!in) {
            throw IoError("cannot open " + path.string());
        }
        return read_coo(in, path.string());
    }
    if (ext == ".dtb") {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw IoError("cannot open " + path.string());
        }
        return read_dtb(in, path.string());
    }
    throw IoError(path.string() + ": unknown tensor format (expected .coo or .dtb)");
}

void write_tensor(const DenseTensor& t, const std::filesystem::path& path) {
    std::ostringstream out(std::ios::binary);
    const auto ext = path.extension().string();
    if (ext == ".coo") {
        write_coo(t, out);
    } else if (ext == ".dtb") {
        write_dtb(t, out);
    } else {
        throw IoError(path.string() + ": unknown tensor format (expected .coo or .dtb)");
    }
    write_file_atomic(path, out.str());
}

std::map<char, std::size_t> parse_rank_list(const std::string& text) {
    std::map<char, std::size_t> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto eq = item.find('=');
        if (eq != 1 || !std::isalpha(static_cast<unsigned char>(item[0]))) {
            throw ParseError("rank entry \"" + item + "\" is not of the form k=V");
        }
        const auto v = parse_number<std::size_t>(item.substr(2), "rank for '" + item.substr(0, 1) + "'");
        if (v == 0) {
            throw ParseError("rank for '" + item.substr(0, 1) + "' must be positive");
        }
        if (!out.emplace(item[0], v).second) {
            throw ParseError("rank for '" + item.substr(0, 1) + "' given twice");
        }
    }
    return out;
}

std::string format_rank_list(const std::map<char, std::size_t>& ranks) {
    std::string out;
    for (const auto& [c, v] : ranks) {
        if (!out.empty()) {
            out.push_back(',');
        }
        out += std::string(1, c) + "=" + std::to_string(v);
    }
    return out;
}

std::string RunManifest::to_text() const {
    std::ostringstream out;
    out << "data=" << data << '\n'
        << "model=" << model << '\n'
        << "ranks=" << format_rank_list(ranks) << '\n'
        << "loss=" << loss << '\n'
        << "alpha=" << format_double(alpha) << '\n'
        << "beta=" << format_double(beta) << '\n'
        << "phi=" << format_double(phi) << '\n'
        << "trials=" << format_double(trials) << '\n'
        << "epsilon=" << format_double(epsilon) << '\n'
        << "seed=" << seed << '\n'
        << "split_heldout=" << format_double(split_heldout) << '\n'
        << "split_val=" << format_double(split_val) << '\n'
        << "max_iters=" << max_iters << '\n'
        << "min_rel_decrease=" << format_double(min_rel_decrease) << '\n'
        << "val_patience=" << val_patience << '\n'
        << "optimizer=" << optimizer << '\n'
        << "lr=" << format_double(lr) << '\n';
    out << "factors=";
    for (std::size_t l = 0; l < factor_files.size(); ++l) {
        out << (l ? "," : "") << factor_files[l];
    }
    out << '\n';
    return out.str();
}

RunManifest RunManifest::from_text(const std::string& text) {
    RunManifest m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("manifest line \"" + line + "\" has no '='");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "data") m.data = value;
        else if (key == "model") m.model = value;
        else if (key == "ranks") m.ranks = parse_rank_list(value);
        else if (key == "loss") m.loss = value;
        else if (key == "alpha") m.alpha = parse_double(value, key);
        else if (key == "beta") m.beta = parse_double(value, key);
        else if (key == "phi") m.phi = parse_double(value, key);
        else if (key == "trials") m.trials = parse_double(value, key);
        else if (key == "epsilon") m.epsilon = parse_double(value, key);
        else if (key == "seed") m.seed = parse_number<std::uint64_t>(value, key);
        else if (key == "split_heldout") m.split_heldout = parse_double(value, key);
        else if (key == "split_val") m.split_val = parse_double(value, key);
        else if (key == "max_iters") m.max_iters = parse_number<int>(value, key);
        else if (key == "min_rel_decrease") m.min_rel_decrease = parse_double(value, key);
        else if (key == "val_patience") m.val_patience = parse_number<int>(value, key);
        else if (key == "optimizer") m.optimizer = value;
        else if (key == "lr") m.lr = parse_double(value, key);
        else if (key == "factors") {
            m.factor_files.clear();
            std::istringstream files(value);
            std::string f;
            while (std::getline(files, f, ',')) {
                if (!f.empty()) {
                    m.factor_files.push_back(f);
                }
            }
        } else {
            throw ParseError("unknown manifest key \"" + key + "\"");
        }
    }
    return m;
}

} // namespace einfact
