#pragma once

// Token embedding provider used by the semantic-similarity metric. The
// default is deterministic: unit vectors seeded from a stable token hash, so
// scores are reproducible without any external model.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace harmcot {

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    // Total over all tokens; implementations must be read-only after
    // construction (scoring runs concurrently).
    virtual std::vector<double> embed(const std::string& token) const = 0;
};

class HashEmbedder final : public EmbeddingProvider {
  public:
    explicit HashEmbedder(std::size_t dim = 64, std::uint64_t salt = 0);

    std::size_t dim() const override { return dim_; }
    std::vector<double> embed(const std::string& token) const override;

  private:
    std::size_t dim_;
    std::uint64_t salt_;
};

}  // namespace harmcot
