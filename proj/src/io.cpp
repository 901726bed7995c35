#include "sparsed/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sparsed {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write file: " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

void write_binary_file(const std::string& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write file: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

std::vector<int> parse_tokens(const std::string& text) {
    std::vector<int> tokens;
    std::istringstream ss(text);
    long long value = 0;
    while (ss >> value) {
        tokens.push_back(static_cast<int>(value));
    }
    if (!ss.eof()) {
        throw std::runtime_error("malformed token file");
    }
    return tokens;
}

std::vector<int> read_token_file(const std::string& path) {
    return parse_tokens(read_text_file(path));
}

void write_token_file(const std::string& path, std::span<const int> tokens) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            ss << ' ';
        }
        ss << tokens[i];
    }
    ss << '\n';
    write_text_file(path, ss.str());
}

void Manifest::add(std::string key, std::string value) {
    entries_.emplace_back(std::move(key), std::move(value));
}

void Manifest::add(std::string key, std::int64_t value) {
    add(std::move(key), std::to_string(value));
}

void Manifest::add(std::string key, double value) {
    add(std::move(key), format_double(value));
}

std::string Manifest::serialize() const {
    std::ostringstream ss;
    for (const auto& [key, value] : entries_) {
        ss << key << '=' << value << '\n';
    }
    return ss.str();
}

void Manifest::write(const std::string& path) const {
    write_text_file(path, serialize());
}

}  // namespace sparsed
