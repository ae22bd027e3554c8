#include "saten/config.hpp"

#include "saten/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace saten {

bool glob_match(const std::string& pattern, const std::string& name) {
    std::size_t p = 0, n = 0;
    std::size_t star = std::string::npos, star_n = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            star_n = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++star_n;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

namespace {

using nlohmann::json;

LayerRule parse_rule(const json& j, bool is_default) {
    LayerRule rule;
    for (const auto& [key, value] : j.items()) {
        if (key == "match") {
            rule.match = value.get<std::string>();
        } else if (key == "epsilon") {
            rule.epsilon = value.get<double>();
            if (*rule.epsilon < 0.0 || *rule.epsilon > 1.5)
                throw ConfigError("epsilon must lie in [0, 1.5], got " +
                                  std::to_string(*rule.epsilon));
        } else if (key == "pattern") {
            try {
                rule.pattern = pattern_from_name(value.get<std::string>());
            } catch (const ParameterError& e) {
                throw ConfigError(e.what());
            }
        } else if (key == "density") {
            rule.density = value.get<double>();
            if (*rule.density < 0.0 || *rule.density > 1.0)
                throw ConfigError("density must lie in [0, 1], got " +
                                  std::to_string(*rule.density));
        } else if (key == "top_t") {
            rule.top_t = value.get<std::int64_t>();
            if (*rule.top_t < 0) throw ConfigError("top_t must be non-negative");
        } else if (key == "k") {
            rule.k = value.get<std::int64_t>();
        } else if (key == "d") {
            rule.d = value.get<std::int64_t>();
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (!is_default && rule.match.empty())
        throw ConfigError("layer rule is missing its 'match' glob");
    if (rule.density && rule.top_t)
        throw ConfigError("rule '" + rule.match + "' sets both density and top_t; exactly one budget field is allowed");
    return rule;
}

} // namespace

CompressionConfig CompressionConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config: " + std::string(e.what()));
    }

    CompressionConfig config;
    // built-in defaults; a "defaults" block overrides them
    config.defaults.epsilon = 0.5;
    config.defaults.pattern = SparsityPattern::unstructured;
    config.defaults.density = 0.05;

    try {
        if (j.contains("defaults")) {
            LayerRule d = parse_rule(j["defaults"], /*is_default=*/true);
            if (d.epsilon) config.defaults.epsilon = d.epsilon;
            if (d.pattern) config.defaults.pattern = d.pattern;
            if (d.density) {
                config.defaults.density = d.density;
                config.defaults.top_t.reset();
            }
            if (d.top_t) {
                config.defaults.top_t = d.top_t;
                config.defaults.density.reset();
            }
            if (d.k) config.defaults.k = d.k;
            if (d.d) config.defaults.d = d.d;
        }
        for (const auto& entry : j.value("layers", json::array()))
            config.rules.push_back(parse_rule(entry, /*is_default=*/false));
    } catch (const json::exception& e) {
        throw ConfigError("malformed config: " + std::string(e.what()));
    }
    return config;
}

std::optional<CompressOptions> CompressionConfig::options_for(const std::string& name) const {
    const LayerRule* hit = nullptr;
    for (const auto& rule : rules) {
        if (glob_match(rule.match, name)) {
            hit = &rule;
            break;
        }
    }
    if (!hit) return std::nullopt;

    CompressOptions opts;
    opts.epsilon = hit->epsilon ? *hit->epsilon : defaults.epsilon.value_or(0.5);
    opts.pattern = hit->pattern ? *hit->pattern
                                : defaults.pattern.value_or(SparsityPattern::unstructured);
    // a budget set on the rule supersedes both default budget fields
    std::optional<double> density = hit->density;
    std::optional<std::int64_t> top_t = hit->top_t;
    if (!hit->density && !hit->top_t) {
        density = defaults.density;
        top_t = defaults.top_t;
    }
    if (opts.pattern == SparsityPattern::unstructured && !density)
        throw ConfigError("rule '" + hit->match + "' resolves to pattern 'u' without a density");
    if (opts.pattern == SparsityPattern::row && !top_t)
        throw ConfigError("rule '" + hit->match + "' resolves to pattern 'row' without a top_t");
    if (density) opts.density = *density;
    if (top_t) opts.top_t = *top_t;
    opts.k = hit->k ? *hit->k : defaults.k.value_or(0);
    opts.d = hit->d ? *hit->d : defaults.d.value_or(0);
    return opts;
}

std::vector<std::string> CompressionConfig::unmatched_rules(
    const std::vector<std::string>& names) const {
    std::vector<std::string> out;
    for (const auto& rule : rules) {
        bool any = false;
        for (const auto& name : names) {
            if (glob_match(rule.match, name)) {
                any = true;
                break;
            }
        }
        if (!any) out.push_back(rule.match);
    }
    return out;
}

} // namespace saten
