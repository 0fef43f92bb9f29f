#ifndef IVNET_CORPUS_FORUM_HPP
#define IVNET_CORPUS_FORUM_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ivnet/corpus/thread.hpp"

namespace ivnet {

/// Maps raw sub-forum names onto the four kept forum types. Matching is
/// case-insensitive on whitespace-collapsed names. Lookup order: exclusion
/// list, exact aliases, keyword containment. Anything unmatched is excluded.
class ForumNormalizer {
  public:
    static ForumNormalizer defaults() {
        ForumNormalizer n;
        n.excluded_ = {"general discussion", "general", "meet and greet", "meet & greet", "introductions",
                       "study groups", "social", "cafe", "off topic", "off-topic", "announcements",
                       "technical issues", "course feedback", "suggestions"};
        n.aliases_ = {
            {"lecture", ForumType::kLecture},       {"lectures", ForumType::kLecture},
            {"video lectures", ForumType::kLecture}, {"lecture videos", ForumType::kLecture},
            {"homework", ForumType::kHomework},     {"homeworks", ForumType::kHomework},
            {"assignments", ForumType::kHomework},  {"assignment", ForumType::kHomework},
            {"problem sets", ForumType::kHomework}, {"programming assignments", ForumType::kHomework},
            {"quiz", ForumType::kQuiz},             {"quizzes", ForumType::kQuiz},
            {"exam", ForumType::kExam},             {"exams", ForumType::kExam},
            {"final exam", ForumType::kExam},       {"midterm", ForumType::kExam},
        };
        n.keywords_ = {
            {"lecture", ForumType::kLecture},  {"video", ForumType::kLecture},  {"homework", ForumType::kHomework},
            {"assignment", ForumType::kHomework}, {"problem set", ForumType::kHomework},
            {"quiz", ForumType::kQuiz},        {"exam", ForumType::kExam},      {"midterm", ForumType::kExam},
        };
        return n;
    }

    void add_alias(std::string_view name, ForumType type) { aliases_.emplace_back(canonical(name), type); }
    void add_exclusion(std::string_view name) { excluded_.push_back(canonical(name)); }

    /// nullopt when the forum is excluded (social, general, or unknown).
    [[nodiscard]] std::optional<ForumType> normalize(std::string_view raw) const {
        const std::string key = canonical(raw);
        if (key.empty() || std::find(excluded_.begin(), excluded_.end(), key) != excluded_.end()) {
            return std::nullopt;
        }
        for (const auto &[alias, type] : aliases_) {
            if (alias == key) {
                return type;
            }
        }
        for (const auto &[word, type] : keywords_) {
            if (key.find(word) != std::string::npos) {
                return type;
            }
        }
        return std::nullopt;
    }

    static std::string canonical(std::string_view raw) {
        std::string out;
        bool pending_space = false;
        for (const char c : raw) {
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '_') {
                pending_space = !out.empty();
                continue;
            }
            if (pending_space) {
                out.push_back(' ');
                pending_space = false;
            }
            out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        }
        return out;
    }

  private:
    std::vector<std::string> excluded_;
    std::vector<std::pair<std::string, ForumType>> aliases_;
    std::vector<std::pair<std::string, ForumType>> keywords_;
};

inline std::optional<ForumType> normalize_forum(std::string_view raw) {
    static const ForumNormalizer normalizer = ForumNormalizer::defaults();
    return normalizer.normalize(raw);
}

}  // namespace ivnet

#endif
