#pragma once

// Closed token vocabulary shared by the generator, the policy and the
// document format. Token ids are positions in the construction list, so a
// vocabulary is fully determined by its token list.

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "harmcot/schema.hpp"

namespace harmcot {

class Vocabulary {
  public:
    static const std::string kEndToken;  // sequence terminator, always id 0

    // Tokens must be unique and include kEndToken at position 0.
    explicit Vocabulary(std::vector<std::string> tokens);

    std::size_t size() const { return tokens_.size(); }

    // Throws ValidationError on out-of-vocabulary tokens.
    int id(const std::string& token) const;
    std::optional<int> find(const std::string& token) const;
    const std::string& token(int id) const;
    int end_id() const { return 0; }

    bool contains(const std::string& token) const { return find(token).has_value(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

// The built-in vocabulary: structural markers, taxonomy and judgement words,
// rubric/caption/rationale words, and the synthetic content alphabets
// (visual v00..v13, textual w00..w13).
const Vocabulary& default_vocabulary();

}  // namespace harmcot
