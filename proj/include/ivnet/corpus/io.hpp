#ifndef IVNET_CORPUS_IO_HPP
#define IVNET_CORPUS_IO_HPP

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivnet/corpus/forum.hpp"
#include "ivnet/corpus/thread.hpp"
#include "ivnet/error.hpp"

namespace ivnet {

// Thread interchange format: one JSON object per line.
//
//   {"thread_id", "course_id", "forum",
//    "posts": [{"post_id", "author_role", "text", "is_comment",
//               optional "parent_id", "timestamp", "tokens"}],
//    optional "forum_type", "label", "original_length"}
//
// Raw exports omit the optional thread fields; preprocessed files carry them
// because truncation removes the evidence the label was derived from.

struct RejectedRecord {
    std::size_t line = 0;
    std::string thread_id;
    std::string forum;
    std::string reason;
};

struct LoadResult {
    Corpus corpus;
    std::vector<RejectedRecord> rejected;
};

namespace detail {

template <typename T>
T require(const nlohmann::json &obj, const char *key, std::size_t line) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(std::string("missing field '") + key + "'", line);
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("field '") + key + "': " + e.what(), line);
    }
}

inline Post parse_post(const nlohmann::json &obj, std::size_t line) {
    if (!obj.is_object()) {
        throw ParseError("post is not an object", line);
    }
    Post p;
    p.post_id = require<std::string>(obj, "post_id", line);
    try {
        p.author_role = parse_author_role(require<std::string>(obj, "author_role", line));
    } catch (const ParseError &e) {
        throw ParseError(e.what(), line);
    }
    p.text = require<std::string>(obj, "text", line);
    p.is_comment = obj.value("is_comment", false);
    if (obj.contains("parent_id") && !obj["parent_id"].is_null()) {
        p.parent_id = require<std::string>(obj, "parent_id", line);
    }
    if (obj.contains("timestamp") && !obj["timestamp"].is_null()) {
        p.timestamp = require<std::int64_t>(obj, "timestamp", line);
    }
    if (obj.contains("tokens")) {
        p.tokens = require<std::vector<std::string>>(obj, "tokens", line);
    }
    return p;
}

}  // namespace detail

/// Parse one record. `normalizer` decides the forum type when the record
/// does not already carry one; `excluded` is set when it rejects the forum.
inline Thread parse_thread(const std::string &record, std::size_t line, const ForumNormalizer &normalizer,
                           bool &excluded) {
    excluded = false;
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(record);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!obj.is_object()) {
        throw ParseError("record is not a JSON object", line);
    }
    Thread t;
    t.thread_id = detail::require<std::string>(obj, "thread_id", line);
    t.course_id = detail::require<std::string>(obj, "course_id", line);
    t.forum = detail::require<std::string>(obj, "forum", line);
    const auto posts = obj.find("posts");
    if (posts == obj.end() || !posts->is_array()) {
        throw ParseError("missing or non-array field 'posts'", line);
    }
    for (const auto &p : *posts) {
        t.posts.push_back(detail::parse_post(p, line));
    }
    if (obj.contains("forum_type")) {
        try {
            t.forum_type = parse_forum_type(detail::require<std::string>(obj, "forum_type", line));
        } catch (const ParseError &e) {
            throw ParseError(e.what(), line);
        }
    } else {
        const auto type = normalizer.normalize(t.forum);
        excluded = !type.has_value();
        t.forum_type = type.value_or(ForumType::kLecture);
    }
    if (obj.contains("label")) {
        t.label = detail::require<int>(obj, "label", line);
        if (t.label != 0 && t.label != 1) {
            throw ParseError("label must be 0 or 1", line);
        }
        if (t.label == 0 && t.has_instructor_post()) {
            throw ParseError("label 0 contradicts an instructor post in thread " + t.thread_id, line);
        }
    } else {
        t.label = t.has_instructor_post() ? 1 : 0;
    }
    t.original_length = obj.contains("original_length") ? detail::require<std::size_t>(obj, "original_length", line)
                                                        : t.posts.size();
    return t;
}

inline LoadResult load_threads(std::istream &in, const ForumNormalizer &normalizer = ForumNormalizer::defaults()) {
    LoadResult result;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        bool excluded = false;
        Thread thread = parse_thread(line, lineno, normalizer, excluded);
        if (excluded) {
            result.rejected.push_back({lineno, thread.thread_id, thread.forum, "excluded forum"});
        } else {
            result.corpus.threads.push_back(std::move(thread));
        }
    }
    return result;
}

inline LoadResult load_threads(const std::string &path,
                               const ForumNormalizer &normalizer = ForumNormalizer::defaults()) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return load_threads(in, normalizer);
}

/// Serialize a thread as one line (no trailing newline). `with_derived`
/// adds forum_type, label, original_length and per-post tokens.
inline std::string serialize_thread(const Thread &t, bool with_derived) {
    nlohmann::ordered_json obj;
    obj["thread_id"] = t.thread_id;
    obj["course_id"] = t.course_id;
    obj["forum"] = t.forum;
    if (with_derived) {
        obj["forum_type"] = std::string(to_string(t.forum_type));
        obj["label"] = t.label;
        obj["original_length"] = t.original_length;
    }
    nlohmann::ordered_json posts = nlohmann::ordered_json::array();
    for (const auto &p : t.posts) {
        nlohmann::ordered_json po;
        po["post_id"] = p.post_id;
        po["author_role"] = std::string(to_string(p.author_role));
        po["text"] = p.text;
        po["is_comment"] = p.is_comment;
        if (p.parent_id) {
            po["parent_id"] = *p.parent_id;
        }
        if (p.timestamp) {
            po["timestamp"] = *p.timestamp;
        }
        if (with_derived) {
            po["tokens"] = p.tokens;
        }
        posts.push_back(std::move(po));
    }
    obj["posts"] = std::move(posts);
    return obj.dump();
}

inline void write_threads(std::ostream &out, const Corpus &corpus, bool with_derived) {
    for (const auto &t : corpus.threads) {
        out << serialize_thread(t, with_derived) << '\n';
    }
}

inline std::string serialize_corpus(const Corpus &corpus, bool with_derived) {
    std::ostringstream out;
    write_threads(out, corpus, with_derived);
    return out.str();
}

inline void write_threads(const std::string &path, const Corpus &corpus, bool with_derived) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    write_threads(out, corpus, with_derived);
}

}  // namespace ivnet

#endif
