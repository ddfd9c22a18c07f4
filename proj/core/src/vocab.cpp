#include "harmcot/vocab.hpp"

#include <cstdio>

namespace harmcot {

const std::string Vocabulary::kEndToken = "<end>";

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty() || tokens_[0] != kEndToken) {
        throw ValidationError("vocabulary must start with " + kEndToken);
    }
    ids_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<int>(i));
        (void)it;
        if (!inserted) throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw ValidationError("token '" + token + "' not in vocabulary");
    return it->second;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw ValidationError("token id out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

const Vocabulary& default_vocabulary() {
    static const Vocabulary vocab = [] {
        std::vector<std::string> toks = {
            Vocabulary::kEndToken,
            // section headers
            "QUESTION", "CAPTION", "REASONING", "JUDGEMENT",
            // punctuation
            ":", ".",
            // taxonomy
            "Discrimination", "Offensive", "Violence", "Vulgar", "Antagonism",
            // verdict markers
            "Applicable", "Not", "applicable",
            // judgement sentence
            "The", "image's", "label", "is", "harmful", "nonharmful",
            // rubric / prompt instruction
            "judge", "the", "this", "meme", "against", "five", "aspects",
            // caption frame
            "shows", "with", "text",
            // rationale frame
            "due", "to",
        };
        char buf[8];
        for (int i = 0; i < 14; ++i) {
            std::snprintf(buf, sizeof(buf), "v%02d", i);
            toks.emplace_back(buf);
        }
        for (int i = 0; i < 14; ++i) {
            std::snprintf(buf, sizeof(buf), "w%02d", i);
            toks.emplace_back(buf);
        }
        return Vocabulary(std::move(toks));
    }();
    return vocab;
}

}  // namespace harmcot
