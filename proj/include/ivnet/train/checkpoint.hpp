#ifndef IVNET_TRAIN_CHECKPOINT_HPP
#define IVNET_TRAIN_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ivnet/baseline/logreg.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/model/model.hpp"
#include "ivnet/train/trainer.hpp"
#include "ivnet/util/hash.hpp"

namespace ivnet {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are little-endian doubles");

/// Layout: "IVNETCKP", u32 version, u64 header length, JSON header, then the
/// payload as raw little-endian doubles in header order.
///
/// Neural checkpoints list their tensors (name + shape); logreg checkpoints
/// list feature names, and the payload is one weight per feature followed by
/// the bias.
struct Checkpoint {
    static constexpr char kMagic[8] = {'I', 'V', 'N', 'E', 'T', 'C', 'K', 'P'};
    static constexpr std::uint32_t kVersion = 1;

    enum class Kind { kNeural, kLogreg };

    Kind kind = Kind::kNeural;
    TrainConfig config;
    std::vector<std::string> vocab;
    std::optional<ModelParams> params;
    std::optional<LogRegParams> logreg;
    /// Baseline settings (l2, iters, agreement normalization).
    nlohmann::json baseline;

    [[nodiscard]] std::string vocab_hash() const { return Vocab(vocab).hash(); }
    [[nodiscard]] std::string variant_name() const {
        return kind == Kind::kLogreg ? std::string("logreg") : std::string(to_string(config.variant));
    }
};

namespace detail {

template <typename T>
void put_raw(std::string &out, const T &v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string &in, std::size_t &pos) {
    if (pos + sizeof(T) > in.size()) {
        throw DataError("checkpoint: truncated file");
    }
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint &ck) {
    nlohmann::json header;
    header["kind"] = ck.kind == Checkpoint::Kind::kNeural ? "neural" : "logreg";
    header["variant"] = ck.variant_name();
    header["config"] = ck.config;
    header["vocab"] = ck.vocab;
    header["vocab_hash"] = ck.vocab_hash();
    std::vector<double> payload;
    if (ck.kind == Checkpoint::Kind::kNeural) {
        if (!ck.params) {
            throw DataError("checkpoint: neural checkpoint without parameters");
        }
        nlohmann::json tensors = nlohmann::json::array();
        for (const auto &[name, t] : ck.params->named()) {
            tensors.push_back({{"name", name}, {"shape", t.shape()}});
            payload.insert(payload.end(), t.data().begin(), t.data().end());
        }
        header["tensors"] = tensors;
    } else {
        if (!ck.logreg) {
            throw DataError("checkpoint: logreg checkpoint without parameters");
        }
        std::vector<std::string> features;
        for (const auto &[name, w] : ck.logreg->weights) {
            features.push_back(name);
            payload.push_back(w);
        }
        payload.push_back(ck.logreg->bias);
        header["features"] = features;
        header["baseline"] = ck.baseline;
    }
    const std::string text = header.dump();
    std::string out(Checkpoint::kMagic, sizeof(Checkpoint::kMagic));
    detail::put_raw(out, Checkpoint::kVersion);
    detail::put_raw(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    for (const double v : payload) {
        detail::put_raw(out, v);
    }
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string &bytes) {
    if (bytes.size() < sizeof(Checkpoint::kMagic) ||
        std::memcmp(bytes.data(), Checkpoint::kMagic, sizeof(Checkpoint::kMagic)) != 0) {
        throw DataError("checkpoint: bad magic");
    }
    std::size_t pos = sizeof(Checkpoint::kMagic);
    const auto version = detail::get_raw<std::uint32_t>(bytes, pos);
    if (version != Checkpoint::kVersion) {
        throw DataError(fmt::format("checkpoint: unsupported version {}", version));
    }
    const auto header_len = detail::get_raw<std::uint64_t>(bytes, pos);
    if (header_len > bytes.size() - pos) {
        throw DataError("checkpoint: truncated header");
    }
    Checkpoint ck;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(pos, header_len));
        pos += header_len;
        ck.kind = header.at("kind").get<std::string>() == "neural" ? Checkpoint::Kind::kNeural
                                                                    : Checkpoint::Kind::kLogreg;
        ck.config = header.at("config").get<TrainConfig>();
        ck.vocab = header.at("vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception &e) {
        throw DataError(std::string("checkpoint: bad header: ") + e.what());
    }
    if (ck.vocab_hash() != header.at("vocab_hash").get<std::string>()) {
        throw DataError("checkpoint: stored vocabulary does not match its hash");
    }
    const auto next_doubles = [&](std::size_t n) {
        std::vector<double> v(n);
        for (double &x : v) {
            x = detail::get_raw<double>(bytes, pos);
        }
        return v;
    };
    if (ck.kind == Checkpoint::Kind::kNeural) {
        std::map<std::string, ad::Tensor> tensors;
        for (const auto &entry : header.at("tensors")) {
            const auto shape = entry.at("shape").get<ad::Shape>();
            tensors[entry.at("name").get<std::string>()] = ad::Tensor(shape, next_doubles(ad::numel(shape)), true);
        }
        const auto take = [&](const std::string &name) {
            const auto it = tensors.find(name);
            if (it == tensors.end()) {
                throw DataError("checkpoint: missing tensor " + name);
            }
            return it->second;
        };
        ModelParams p;
        p.embeddings = take("embeddings");
        const std::size_t hidden = ck.config.hidden;
        p.post = {take("post.w_x"), take("post.w_h"), take("post.b"), hidden, p.embeddings.dim(1)};
        p.ctx = {take("ctx.w_x"), take("ctx.w_h"), take("ctx.b"), hidden, hidden};
        p.attention = {take("attention.w"), take("attention.b"), take("attention.v")};
        p.classifier = {take("classifier.w"), take("classifier.b")};
        ck.params = std::move(p);
    } else {
        const auto features = header.at("features").get<std::vector<std::string>>();
        const auto values = next_doubles(features.size() + 1);
        LogRegParams lr;
        for (std::size_t k = 0; k < features.size(); ++k) {
            lr.weights.emplace(features[k], values[k]);
        }
        lr.bias = values.back();
        ck.logreg = std::move(lr);
        ck.baseline = header.value("baseline", nlohmann::json::object());
    }
    if (pos != bytes.size()) {
        throw DataError("checkpoint: trailing bytes after payload");
    }
    return ck;
}

inline void save_checkpoint(const std::string &path, const Checkpoint &ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    const std::string bytes = serialize_checkpoint(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file_bytes(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Checkpoint load_checkpoint(const std::string &path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace ivnet

#endif
