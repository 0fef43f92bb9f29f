#ifndef IVNET_CLI_CONFIG_HPP
#define IVNET_CLI_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "ivnet/baseline/logreg.hpp"
#include "ivnet/error.hpp"
#include "ivnet/train/trainer.hpp"

namespace ivnet::cli {

/// Flat "key = value" file. Blank lines and lines starting with '#' are
/// ignored, as is anything after a '#' that follows whitespace.
struct KeyValues {
    std::map<std::string, std::string> values;
    std::map<std::string, std::size_t> lines;

    [[nodiscard]] bool has(const std::string &key) const { return values.count(key) != 0; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream &in) {
    KeyValues kv;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '#' && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) {
                s = s.substr(0, i);
                break;
            }
        }
        s = detail::trim(s);
        if (s.empty()) {
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("expected 'key = value'", line);
        }
        const std::string key(detail::trim(s.substr(0, eq)));
        if (key.empty()) {
            throw ParseError("empty key", line);
        }
        if (kv.has(key)) {
            throw ParseError(fmt::format("duplicate key '{}' (first set on line {})", key, kv.lines[key]), line);
        }
        kv.values[key] = std::string(detail::trim(s.substr(eq + 1)));
        kv.lines[key] = line;
    }
    return kv;
}

inline KeyValues load_key_values(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config " + path);
    }
    return parse_key_values(in);
}

/// Everything `train` can be configured with.
struct RunConfig {
    TrainConfig train;
    bool logreg = false;
    LogRegOptions logreg_options;
    FeatureOptions features;
    /// Set when the seed came from a file or flag, not a default.
    std::optional<std::uint64_t> seed;
};

namespace detail {

[[noreturn]] inline void bad_value(const std::string &key, const std::string &value, std::size_t line) {
    const std::string msg = fmt::format("'{}' is not a valid value for {}", value, key);
    if (line == 0) {
        throw DataError(msg);
    }
    throw ParseError(msg, line);
}

template <typename T>
T parse_number(const std::string &key, const std::string &value, std::size_t line) {
    T out{};
    const char *end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        bad_value(key, value, line);
    }
    return out;
}

inline double parse_double(const std::string &key, const std::string &value, std::size_t line) {
    // from_chars for double is missing on older standard libraries
    char *end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) {
        bad_value(key, value, line);
    }
    return v;
}

inline std::vector<std::size_t> parse_list(const std::string &key, const std::string &value, std::size_t line) {
    std::vector<std::size_t> out;
    std::string_view rest = value;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = trim(rest.substr(0, comma));
        if (!item.empty()) {
            out.push_back(parse_number<std::size_t>(key, std::string(item), line));
        }
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    return out;
}

}  // namespace detail

/// Apply one setting; `line` is 0 for command-line values.
inline void apply_setting(RunConfig &rc, const std::string &key, const std::string &value, std::size_t line = 0) {
    using detail::parse_double;
    using detail::parse_number;
    TrainConfig &c = rc.train;
    try {
        if (key == "variant") {
            rc.logreg = value == "logreg";
            if (!rc.logreg) {
                c.variant = parse_variant(value);
            }
        } else if (key == "lr") {
            c.lr = parse_double(key, value, line);
        } else if (key == "epochs") {
            c.epochs = parse_number<std::size_t>(key, value, line);
        } else if (key == "hidden") {
            c.hidden = parse_number<std::size_t>(key, value, line);
        } else if (key == "embed") {
            c.embed = parse_number<std::size_t>(key, value, line);
        } else if (key == "seed") {
            c.seed = parse_number<std::uint64_t>(key, value, line);
            rc.seed = c.seed;
        } else if (key == "context_truncation") {
            if (value == "none" || value.empty()) {
                c.context_truncation.reset();
            } else {
                c.context_truncation = parse_number<std::size_t>(key, value, line);
            }
        } else if (key == "multi_loss_lengths") {
            c.multi_loss_lengths = detail::parse_list(key, value, line);
        } else if (key == "embeddings") {
            c.embeddings = value;
        } else if (key == "min_count") {
            c.min_count = parse_number<std::size_t>(key, value, line);
        } else if (key == "apa_normalization") {
            if (value == "joint") {
                c.apa_normalization = ApaNormalization::kJoint;
            } else if (value == "per-query-mean") {
                c.apa_normalization = ApaNormalization::kPerQueryMean;
            } else {
                throw DataError("apa_normalization must be joint or per-query-mean");
            }
        } else if (key == "beta1") {
            c.beta1 = parse_double(key, value, line);
        } else if (key == "beta2") {
            c.beta2 = parse_double(key, value, line);
        } else if (key == "adam_eps") {
            c.adam_eps = parse_double(key, value, line);
        } else if (key == "clip_norm") {
            c.clip_norm = parse_double(key, value, line);
        } else if (key == "weight_decay") {
            c.weight_decay = parse_double(key, value, line);
        } else if (key == "l2") {
            rc.logreg_options.l2 = parse_double(key, value, line);
        } else if (key == "iters") {
            rc.logreg_options.iters = parse_number<std::size_t>(key, value, line);
        } else if (key == "agreement_norm") {
            if (value == "posts") {
                rc.features.agreement_norm = AgreementNorm::kPostCount;
            } else if (value == "tokens") {
                rc.features.agreement_norm = AgreementNorm::kTokenCount;
            } else {
                throw DataError("agreement_norm must be posts or tokens");
            }
        } else {
            throw DataError(fmt::format("unknown setting '{}'", key));
        }
    } catch (const ParseError &) {
        throw;
    } catch (const DataError &e) {
        if (line == 0) {
            throw;
        }
        throw ParseError(e.what(), line);
    }
}

inline void apply(RunConfig &rc, const KeyValues &kv) {
    for (const auto &[key, value] : kv.values) {
        apply_setting(rc, key, value, kv.lines.at(key));
    }
}

inline constexpr const char *kSeedEnv = "INTERVENTION_NET_SEED";

/// --seed, then the config file, then $INTERVENTION_NET_SEED, then 0.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> file,
                                  const char *env = std::getenv(kSeedEnv)) {
    if (flag) {
        return *flag;
    }
    if (file) {
        return *file;
    }
    if (env != nullptr && *env != '\0') {
        const std::string value(env);
        try {
            return detail::parse_number<std::uint64_t>(kSeedEnv, value, 0);
        } catch (const DataError &) {
            throw DataError(fmt::format("{}='{}' is not an unsigned integer", kSeedEnv, value));
        }
    }
    return 0;
}

}  // namespace ivnet::cli

#endif
