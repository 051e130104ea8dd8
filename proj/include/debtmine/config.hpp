#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace debtmine {

/// Flat `key = value` configuration. Every key has a default, so a snapshot
/// lists the complete parameter set. Unknown keys are rejected.
class Config {
public:
    /// All keys at their defaults.
    Config();

    static Config load(const std::filesystem::path& path);
    void merge(std::istream& in, std::string_view source);

    /// `key=value` form used by --override.
    void apply_override(std::string_view assignment);
    void set(std::string_view key, std::string value);

    const std::string& text(std::string_view key) const;
    long long integer(std::string_view key) const;
    std::size_t count(std::string_view key) const; ///< non-negative integer
    double real(std::string_view key) const;
    bool flag(std::string_view key) const;
    std::uint64_t seed() const;
    /// Comma-separated list; empty items dropped, whitespace trimmed.
    std::vector<std::string> list(std::string_view key) const;
    std::vector<double> reals(std::string_view key) const;

    void write(std::ostream& out) const;

    struct Entry {
        std::string key;
        std::string value;
        std::string help;
    };
    const std::vector<Entry>& entries() const { return entries_; }

private:
    Entry& find(std::string_view key);
    const Entry& find(std::string_view key) const;
    std::vector<Entry> entries_;
};

} // namespace debtmine
