#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sparsed {

// Shortest decimal form that round-trips the exact double, via
// std::to_chars. Keeps every emitted file byte-deterministic.
std::string format_double(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
void write_binary_file(const std::string& path, std::span<const unsigned char> bytes);

// Token files are whitespace-separated integer ids.
std::vector<int> parse_tokens(const std::string& text);
std::vector<int> read_token_file(const std::string& path);
void write_token_file(const std::string& path, std::span<const int> tokens);

// Flat key=value run description, written in insertion order. Holds no
// timestamps or measured times, so identical runs serialize identically.
class Manifest {
public:
    void add(std::string key, std::string value);
    void add(std::string key, std::int64_t value);
    void add(std::string key, double value);

    std::string serialize() const;
    void write(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace sparsed
