#pragma once

#include "saten/layer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace saten {

/// Simple shell-style glob: '*' matches any run, '?' matches one character.
bool glob_match(const std::string& pattern, const std::string& name);

/// Per-layer compression settings; missing fields inherit the defaults.
struct LayerRule {
    std::string match; // name glob
    std::optional<double> epsilon;
    std::optional<SparsityPattern> pattern;
    std::optional<double> density;
    std::optional<std::int64_t> top_t;
    std::optional<std::int64_t> k;
    std::optional<std::int64_t> d;
};

struct CompressionConfig {
    LayerRule defaults; // match ignored
    std::vector<LayerRule> rules;

    static CompressionConfig parse_file(const std::filesystem::path& path);

    /// Options for a layer name: first matching rule merged over defaults,
    /// or nullopt when no rule matches.
    std::optional<CompressOptions> options_for(const std::string& name) const;

    /// Rules that matched nothing, for warning output.
    std::vector<std::string> unmatched_rules(const std::vector<std::string>& names) const;
};

} // namespace saten
