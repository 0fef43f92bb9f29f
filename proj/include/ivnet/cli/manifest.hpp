#ifndef IVNET_CLI_MANIFEST_HPP
#define IVNET_CLI_MANIFEST_HPP

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivnet/error.hpp"
#include "ivnet/train/checkpoint.hpp"
#include "ivnet/util/hash.hpp"

namespace ivnet::cli {

inline std::string file_hash(const std::string &path) { return fnv1a_hex(read_file_bytes(path)); }

/// What a command read, wrote and was configured with. The argv and config
/// snapshot are enough to rerun it; the hashes show whether the rerun
/// reproduced the same bytes.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;   // path -> hash
    std::map<std::string, std::string> outputs;  // path -> hash
    std::string checkpoint_hash;
    std::map<std::string, double> timings_ms;

    void add_input(const std::string &path) { inputs[path] = file_hash(path); }
    void add_output(const std::string &path) { outputs[path] = file_hash(path); }

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["argv"] = argv;
        j["seed"] = seed;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        if (!checkpoint_hash.empty()) {
            j["checkpoint_hash"] = checkpoint_hash;
        }
        j["timings_ms"] = timings_ms;
        return j;
    }

    void write(const std::string &path) const {
        std::ofstream out(path);
        if (!out) {
            throw DataError("cannot write " + path);
        }
        out << to_json().dump(2) << '\n';
    }
};

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace ivnet::cli

#endif
