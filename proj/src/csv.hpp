#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmsynth {

// Minimal CSV output: header row, '.' decimal point, shortest round-trip
// doubles via to_chars. No quoting; our fields never contain commas.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    CsvWriter& field(const std::string& s) {
        sep();
        out_ << s;
        return *this;
    }
    CsvWriter& field(const char* s) { return field(std::string(s)); }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& field(uint64_t v) {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& field(double v) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        sep();
        out_.write(buf, res.ptr - buf);
        return *this;
    }
    void endrow() {
        out_ << '\n';
        first_ = true;
    }

private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }
    std::ofstream out_;
    bool first_ = true;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("csv column not found: " + name);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        std::stringstream ss(line);
        while (std::getline(ss, cur, ',')) fields.push_back(cur);
        if (line.back() == ',') fields.emplace_back();
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw std::runtime_error("bad numeric field: " + s);
    return v;
}

inline long long parse_int(const std::string& s) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw std::runtime_error("bad integer field: " + s);
    return v;
}

}  // namespace swarmsynth
