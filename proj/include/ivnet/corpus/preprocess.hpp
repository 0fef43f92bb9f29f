#ifndef IVNET_CORPUS_PREPROCESS_HPP
#define IVNET_CORPUS_PREPROCESS_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivnet/corpus/io.hpp"
#include "ivnet/corpus/text.hpp"
#include "ivnet/corpus/thread.hpp"

namespace ivnet {

/// How one-level comments are laid into the linear post sequence.
enum class CommentOrder {
    /// Stable sort by timestamp; posts without one keep their file position.
    kChronological,
    /// Each top-level post followed by its own comments.
    kAfterParent,
};

inline std::string_view to_string(CommentOrder order) {
    return order == CommentOrder::kChronological ? "chronological" : "after-parent";
}

inline CommentOrder parse_comment_order(std::string_view s) {
    if (s == "chronological") {
        return CommentOrder::kChronological;
    }
    if (s == "after-parent") {
        return CommentOrder::kAfterParent;
    }
    throw DataError("unknown comment order '" + std::string(s) + "'");
}

inline std::vector<Post> flatten_posts(std::vector<Post> posts, CommentOrder order) {
    if (order == CommentOrder::kChronological) {
        // Untimed posts inherit the previous timestamp so they stay in place.
        std::vector<std::pair<std::int64_t, std::size_t>> keys;
        keys.reserve(posts.size());
        std::int64_t last = std::numeric_limits<std::int64_t>::min();
        for (std::size_t i = 0; i < posts.size(); ++i) {
            if (posts[i].timestamp) {
                last = std::max(last, *posts[i].timestamp);
            }
            keys.emplace_back(posts[i].timestamp.value_or(last), i);
        }
        std::stable_sort(keys.begin(), keys.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
        std::vector<Post> out;
        out.reserve(posts.size());
        for (const auto &[ts, i] : keys) {
            out.push_back(std::move(posts[i]));
        }
        return out;
    }
    // After-parent: comments attach to their parent_id, or to the nearest
    // preceding top-level post when no parent is named.
    std::vector<Post> tops;
    std::map<std::size_t, std::vector<Post>> comments;
    std::vector<Post> orphans;
    for (auto &p : posts) {
        if (!p.is_comment) {
            tops.push_back(std::move(p));
            continue;
        }
        std::optional<std::size_t> owner;
        if (p.parent_id) {
            for (std::size_t k = 0; k < tops.size(); ++k) {
                if (tops[k].post_id == *p.parent_id) {
                    owner = k;
                }
            }
        }
        if (!owner && !tops.empty()) {
            owner = tops.size() - 1;
        }
        if (owner) {
            comments[*owner].push_back(std::move(p));
        } else {
            orphans.push_back(std::move(p));
        }
    }
    std::vector<Post> out = std::move(orphans);
    for (std::size_t k = 0; k < tops.size(); ++k) {
        out.push_back(std::move(tops[k]));
        for (auto &c : comments[k]) {
            out.push_back(std::move(c));
        }
    }
    return out;
}

/// Label from the raw author roles, then drop the first instructor post and
/// everything after it. Threads opened by an instructor (announcements) are
/// excluded: nullopt.
inline std::optional<Thread> truncate_at_intervention(Thread thread) {
    if (thread.posts.empty() || thread.posts.front().author_role == AuthorRole::kInstructor) {
        return std::nullopt;
    }
    // Already-truncated input keeps its recorded label and length.
    thread.original_length = std::max(thread.original_length, thread.posts.size());
    const auto first = std::find_if(thread.posts.begin(), thread.posts.end(),
                                    [](const Post &p) { return p.author_role == AuthorRole::kInstructor; });
    thread.label = (first != thread.posts.end() || thread.label == 1) ? 1 : 0;
    thread.posts.erase(first, thread.posts.end());
    return thread;
}

/// Token replacement + tokenization of one post. Empty posts get <EMPTY>.
inline void preprocess_post(Post &post, const std::vector<ReplacementRule> &rules) {
    post.text = replace_tokens(post.text, rules);
    post.tokens = tokenize(post.text);
    if (post.tokens.empty()) {
        post.tokens.emplace_back(special::kEmpty);
    }
}

struct PreprocessOptions {
    CommentOrder comment_order = CommentOrder::kChronological;
    std::vector<ReplacementRule> rules = default_replacement_rules();
};

struct PreprocessReport {
    std::size_t records = 0;
    std::size_t kept = 0;
    std::size_t excluded_instructor_started = 0;
    std::size_t excluded_empty = 0;
    std::map<std::string, std::size_t> excluded_forums;  // raw name -> count
    std::size_t truncated = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["records"] = records;
        j["kept"] = kept;
        j["positives"] = positives;
        j["negatives"] = negatives;
        j["truncated"] = truncated;
        j["excluded_instructor_started"] = excluded_instructor_started;
        j["excluded_empty"] = excluded_empty;
        j["excluded_forums"] = excluded_forums;
        return j;
    }
};

/// Everything after forum normalization: comment flattening, exclusion of
/// instructor-started threads, truncation and token replacement.
inline Corpus preprocess(const LoadResult &loaded, PreprocessReport &report, const PreprocessOptions &opt = {}) {
    report.records += loaded.corpus.threads.size() + loaded.rejected.size();
    for (const auto &r : loaded.rejected) {
        ++report.excluded_forums[r.forum];
    }
    Corpus out;
    for (Thread t : loaded.corpus.threads) {
        if (t.posts.empty()) {
            ++report.excluded_empty;
            continue;
        }
        t.posts = flatten_posts(std::move(t.posts), opt.comment_order);
        const std::size_t raw_len = t.posts.size();
        auto truncated = truncate_at_intervention(std::move(t));
        if (!truncated) {
            ++report.excluded_instructor_started;
            continue;
        }
        if (truncated->posts.size() != raw_len) {
            ++report.truncated;
        }
        for (auto &p : truncated->posts) {
            preprocess_post(p, opt.rules);
        }
        ++(truncated->label == 1 ? report.positives : report.negatives);
        ++report.kept;
        out.threads.push_back(std::move(*truncated));
    }
    return out;
}

}  // namespace ivnet

#endif
