#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpaud {

/// Minimal `key = value` text format: one pair per line, `#` starts a
/// comment, values may be comma-separated lists. Unknown keys are kept
/// so callers can reject them explicitly.
class KeyValueConfig {
  public:
    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str());
    }

    static KeyValueConfig from_string(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: line " + std::to_string(lineno) +
                                         " is not of the form key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(it->second, key);
    }

    int get_int(const std::string& key, int fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const double v = parse_double(it->second, key);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw std::runtime_error("config: key '" + key + "' must be an integer");
        return i;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::string v = it->second;
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
        if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
        if (v == "off" || v == "false" || v == "0" || v == "no") return false;
        throw std::runtime_error("config: key '" + key + "' must be a boolean");
    }

    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::istringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(parse_double(t, key));
        }
        if (out.empty()) throw std::runtime_error("config: key '" + key + "' has an empty list");
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::string> out;
        std::istringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r\n");
        auto e = s.find_last_not_of(" \t\r\n");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    }

    static double parse_double(const std::string& s, const std::string& key) {
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key + "' has a non-numeric value '" + s + "'");
        }
        if (pos != s.size())
            throw std::runtime_error("config: key '" + key + "' has trailing characters in '" + s + "'");
        return v;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace mpaud
