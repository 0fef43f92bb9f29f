#ifndef IVNET_CORPUS_VOCAB_HPP
#define IVNET_CORPUS_VOCAB_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ivnet/corpus/text.hpp"
#include "ivnet/corpus/thread.hpp"
#include "ivnet/error.hpp"
#include "ivnet/util/hash.hpp"

namespace ivnet {

/// Dense token -> index map. Specials occupy indices 0..4 in the order of
/// kSpecialTokens; corpus tokens follow by descending count, ties broken
/// lexicographically.
class Vocab {
  public:
    Vocab() : Vocab(std::vector<std::string>{}) {}

    /// Rebuild from an explicit token list (e.g. a checkpoint). Specials are
    /// prepended when missing.
    explicit Vocab(const std::vector<std::string> &tokens) {
        for (const auto s : kSpecialTokens) {
            add(std::string(s));
        }
        for (const auto &t : tokens) {
            if (!is_special(t)) {
                add(t);
            }
        }
    }

    /// Count tokens over the (training) corpus and keep those seen at least
    /// `min_count` times.
    static Vocab build(const Corpus &train, std::size_t min_count = 2) {
        std::map<std::string, std::size_t> counts;
        for (const auto &t : train.threads) {
            for (const auto &p : t.posts) {
                for (const auto &tok : p.tokens) {
                    ++counts[tok];
                }
            }
        }
        std::vector<std::pair<std::string, std::size_t>> kept;
        for (auto &[tok, n] : counts) {
            if (n >= min_count && !is_special(tok)) {
                kept.emplace_back(tok, n);
            }
        }
        std::stable_sort(kept.begin(), kept.end(), [](const auto &a, const auto &b) { return a.second > b.second; });
        std::vector<std::string> tokens;
        tokens.reserve(kept.size());
        for (auto &[tok, n] : kept) {
            tokens.push_back(std::move(tok));
        }
        return Vocab(tokens);
    }

    [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
    [[nodiscard]] const std::string &token(std::size_t index) const { return tokens_.at(index); }
    [[nodiscard]] const std::vector<std::string> &tokens() const noexcept { return tokens_; }
    [[nodiscard]] bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

    [[nodiscard]] std::size_t unk() const noexcept { return 0; }

    /// Index of `token`, or the <UNK> index.
    [[nodiscard]] std::size_t index(const std::string &token) const {
        const auto it = index_.find(token);
        return it == index_.end() ? unk() : it->second;
    }

    [[nodiscard]] std::vector<std::size_t> encode(const std::vector<std::string> &tokens) const {
        std::vector<std::size_t> out;
        out.reserve(tokens.size());
        for (const auto &t : tokens) {
            out.push_back(index(t));
        }
        return out;
    }

    /// FNV-1a over the newline-joined token list.
    [[nodiscard]] std::string hash() const {
        Fnv1a h;
        for (const auto &t : tokens_) {
            h.update(t);
            h.update("\n");
        }
        return h.hex();
    }

  private:
    void add(std::string token) {
        if (index_.emplace(token, tokens_.size()).second) {
            tokens_.push_back(std::move(token));
        }
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ivnet

#endif
