#ifndef IVNET_CORPUS_THREAD_HPP
#define IVNET_CORPUS_THREAD_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ivnet/error.hpp"

namespace ivnet {

enum class AuthorRole { kStudent, kInstructor };

enum class ForumType { kLecture, kHomework, kQuiz, kExam };

inline constexpr ForumType kAllForumTypes[] = {ForumType::kLecture, ForumType::kHomework, ForumType::kQuiz,
                                               ForumType::kExam};

inline std::string_view to_string(AuthorRole role) {
    return role == AuthorRole::kInstructor ? "instructor" : "student";
}

inline AuthorRole parse_author_role(std::string_view s) {
    if (s == "student") {
        return AuthorRole::kStudent;
    }
    if (s == "instructor") {
        return AuthorRole::kInstructor;
    }
    throw ParseError("unknown author_role '" + std::string(s) + "'");
}

inline std::string_view to_string(ForumType f) {
    switch (f) {
        case ForumType::kLecture: return "lecture";
        case ForumType::kHomework: return "homework";
        case ForumType::kQuiz: return "quiz";
        case ForumType::kExam: return "exam";
    }
    return "lecture";
}

inline ForumType parse_forum_type(std::string_view s) {
    for (const ForumType f : kAllForumTypes) {
        if (to_string(f) == s) {
            return f;
        }
    }
    throw ParseError("unknown forum_type '" + std::string(s) + "'");
}

struct Post {
    std::string post_id;
    AuthorRole author_role = AuthorRole::kStudent;
    std::string text;
    /// Filled by preprocessing. Vocabulary indices are assigned later from
    /// the training split's vocabulary.
    std::vector<std::string> tokens;
    bool is_comment = false;
    std::optional<std::string> parent_id;
    std::optional<std::int64_t> timestamp;

    bool operator==(const Post &) const = default;
};

struct Thread {
    std::string thread_id;
    std::string course_id;
    std::string forum;  // raw sub-forum name as ingested
    ForumType forum_type = ForumType::kLecture;
    std::vector<Post> posts;
    int label = 0;
    std::size_t original_length = 0;

    [[nodiscard]] bool has_instructor_post() const {
        for (const auto &p : posts) {
            if (p.author_role == AuthorRole::kInstructor) {
                return true;
            }
        }
        return false;
    }

    bool operator==(const Thread &) const = default;
};

struct Corpus {
    std::vector<Thread> threads;

    [[nodiscard]] std::size_t positives() const {
        std::size_t n = 0;
        for (const auto &t : threads) {
            n += t.label == 1 ? 1 : 0;
        }
        return n;
    }

    [[nodiscard]] std::size_t negatives() const { return threads.size() - positives(); }

    /// Intervened to non-intervened thread count; infinity when no negatives.
    [[nodiscard]] double intervention_ratio() const {
        const auto neg = negatives();
        return neg == 0 ? (positives() == 0 ? 0.0 : std::numeric_limits<double>::infinity())
                        : static_cast<double>(positives()) / static_cast<double>(neg);
    }
};

}  // namespace ivnet

#endif
