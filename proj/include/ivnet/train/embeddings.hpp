#ifndef IVNET_TRAIN_EMBEDDINGS_HPP
#define IVNET_TRAIN_EMBEDDINGS_HPP

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ivnet/autodiff/tensor.hpp"
#include "ivnet/corpus/vocab.hpp"
#include "ivnet/error.hpp"
#include "ivnet/util/rng.hpp"

namespace ivnet {

struct EmbeddingLoadStats {
    std::size_t file_rows = 0;
    std::size_t matched = 0;
};

/// Seeded uniform(-0.05, 0.05) matrix of shape [vocab x dim].
inline ad::Tensor random_embeddings(const Vocab &vocab, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> values(vocab.size() * dim);
    for (double &x : values) {
        x = rng.uniform(-0.05, 0.05);
    }
    return ad::Tensor::matrix(vocab.size(), dim, std::move(values), true);
}

/// Text vectors, one "token v1 ... vd" per line (GloVe). A leading
/// "count dim" header line (word2vec) is skipped. Rows for tokens the file
/// lacks, including the specials, keep their seeded random values.
inline ad::Tensor load_embeddings(std::istream &in, const Vocab &vocab, std::size_t dim, std::uint64_t seed,
                                  EmbeddingLoadStats *stats = nullptr) {
    ad::Tensor table = random_embeddings(vocab, dim, seed);
    auto data = table.mutable_data();
    std::string line;
    std::size_t lineno = 0;
    EmbeddingLoadStats s;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token)) {
            continue;
        }
        std::vector<double> row;
        double v = 0.0;
        while (fields >> v) {
            row.push_back(v);
        }
        if (!fields.eof()) {
            throw ParseError("embedding row has a non-numeric field", lineno);
        }
        if (lineno == 1 && row.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) {
            if (static_cast<std::size_t>(row[0]) != dim) {
                throw DataError(fmt::format("embedding file declares dimension {}, expected {}", row[0], dim));
            }
            continue;
        }
        if (row.size() != dim) {
            throw DataError(fmt::format("embedding row {} has dimension {}, expected {}", lineno, row.size(), dim));
        }
        ++s.file_rows;
        if (!vocab.contains(token)) {
            continue;
        }
        const std::size_t idx = vocab.index(token);
        std::copy(row.begin(), row.end(), data.begin() + static_cast<std::ptrdiff_t>(idx * dim));
        ++s.matched;
    }
    if (stats != nullptr) {
        *stats = s;
    }
    return table;
}

inline ad::Tensor load_embeddings(const std::string &path, const Vocab &vocab, std::size_t dim, std::uint64_t seed,
                                  EmbeddingLoadStats *stats = nullptr) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open embedding file '" + path + "'");
    }
    return load_embeddings(in, vocab, dim, seed, stats);
}

}  // namespace ivnet

#endif
