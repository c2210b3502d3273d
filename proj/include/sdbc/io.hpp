#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sdbc/core.hpp"

namespace sdbc::io {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

/// %.17g round-trips every double; NaN prints as an empty cell.
inline std::string fmt(double v) {
    if (std::isnan(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Flat `key = value` text. `#` starts a comment; later keys override earlier ones.
class Config {
public:
    static Config parse(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            require(!key.empty(), ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": empty key");
            c.values_[key] = trim(line.substr(eq + 1));
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        require(f.good(), ErrorKind::InvalidArgument, "cannot read config file " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string str(const std::string& key, const std::string& fallback = {}) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double num(const std::string& key, double fallback) const {
        return has(key) ? to_double(key, values_.at(key)) : fallback;
    }

    double num(const std::string& key) const {
        require(has(key), ErrorKind::InvalidArgument, "missing config key " + key);
        return to_double(key, values_.at(key));
    }

    long integer(const std::string& key, long fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = values_.at(key);
        std::size_t used = 0;
        long out = 0;
        try {
            out = std::stol(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(!v.empty() && used == v.size(), ErrorKind::InvalidArgument, "config key " + key + " is not an integer: '" + v + "'");
        return out;
    }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = values_.at(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw Error(ErrorKind::InvalidArgument, "config key " + key + " is not a boolean: '" + v + "'");
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        if (!has(key) || values_.at(key).empty()) return out;
        for (const auto& s : split(values_.at(key), ',')) out.push_back(to_double(key, s));
        return out;
    }

    /// Keys not in `known`.
    std::vector<std::string> unknown(const std::set<std::string>& known) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!known.count(k)) out.push_back(k);
        return out;
    }

    /// Sorted `key=value` lines; the hash input.
    std::string canonical() const {
        std::string s;
        for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
        return s;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static double to_double(const std::string& key, const std::string& v) {
        std::size_t used = 0;
        double out = 0;
        try {
            out = std::stod(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(!v.empty() && used == v.size(), ErrorKind::InvalidArgument, "config key " + key + " is not a number: '" + v + "'");
        return out;
    }

    std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) : width_(header.size()) { line(header); }

    Csv& row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(fmt(v));
        return line(s);
    }

    Csv& line(const std::vector<std::string>& cells) {
        require(cells.size() == width_, ErrorKind::InvalidArgument, "CSV row width does not match header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
        return *this;
    }

    const std::string& str() const { return text_; }

private:
    std::size_t width_;
    std::string text_;
};

/// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), ErrorKind::InvalidArgument, "cannot write " + tmp.string());
        f << content;
        f.flush();
        require(f.good(), ErrorKind::InvalidArgument, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Two numeric columns (z, value) from a CSV file; a non-numeric first line is a header.
inline void read_table(const std::string& path, std::vector<double>& z, std::vector<double>& v) {
    std::ifstream f(path);
    require(f.good(), ErrorKind::InvalidArgument, "cannot read table " + path);
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split(line, ',');
        require(cells.size() >= 2, ErrorKind::InvalidArgument, "table " + path + " needs two columns");
        try {
            const double a = std::stod(cells[0]), b = std::stod(cells[1]);
            z.push_back(a);
            v.push_back(b);
        } catch (const std::exception&) {
            require(first, ErrorKind::InvalidArgument, "table " + path + " has a non-numeric row: " + line);
        }
        first = false;
    }
    require(z.size() >= 2, ErrorKind::InvalidArgument, "table " + path + " needs at least two rows");
}

}  // namespace sdbc::io
