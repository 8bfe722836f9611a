#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace bslab::io {

using Json = nlohmann::json;

/// Round-trip formatting used for every floating point value written to CSV.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T>
std::string cell(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "1" : "0";
    } else if constexpr (std::is_floating_point_v<T>) {
        return format_double(double(v));
    } else if constexpr (std::is_integral_v<T>) {
        return std::to_string(v);
    } else {
        return std::string(v);
    }
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    template <class... Ts>
    void add(const Ts&... values) {
        if (sizeof...(Ts) != header_.size()) throw SizeMismatch("CsvTable::add: column count differs from header");
        rows_.push_back({cell(values)...});
    }

    std::size_t rows() const { return rows_.size(); }

    std::string str() const {
        std::string s;
        auto line = [&s](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) s += ',';
                s += r[i];
            }
            s += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return s;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Output directory that records every file written through it.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw Error("cannot create output directory " + root_.string() + ": " + ec.message());
    }

    const std::filesystem::path& root() const { return root_; }

    void write(const std::string& name, const std::string& text) {
        write_text(root_ / name, text);
        for (auto& f : files_)
            if (f.name == name) {
                f = {name, text.size(), fnv1a64(text)};
                return;
            }
        files_.push_back({name, text.size(), fnv1a64(text)});
    }
    void write(const std::string& name, const CsvTable& t) { write(name, t.str()); }
    void write(const std::string& name, const Json& j) { write(name, dump(j)); }

    /// manifest.json: name, size in bytes and FNV-1a 64 checksum of each output.
    void write_manifest(const Json& extra = Json::object()) const {
        Json files = Json::array();
        for (const auto& f : files_) files.push_back({{"file", f.name}, {"bytes", f.bytes}, {"fnv1a64", hex64(f.hash)}});
        Json m = extra;
        m["files"] = files;
        write_text(root_ / "manifest.json", dump(m));
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& f : files_) out.push_back(f.name);
        return out;
    }

private:
    struct Entry {
        std::string name;
        std::size_t bytes;
        std::uint64_t hash;
    };
    std::filesystem::path root_;
    std::vector<Entry> files_;
};

}  // namespace bslab::io
