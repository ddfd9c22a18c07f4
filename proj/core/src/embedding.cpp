#include "harmcot/embedding.hpp"

#include <cmath>

#include "harmcot/rng.hpp"

namespace harmcot {

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t salt) : dim_(dim), salt_(salt) {}

std::vector<double> HashEmbedder::embed(const std::string& token) const {
    Rng rng(derive_seed(salt_, fnv1a(token)));
    std::vector<double> v(dim_);
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.next_gaussian();
        norm_sq += x * x;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    } else {
        v[0] = 1.0;  // all-zero draw is essentially impossible, but stay total
    }
    return v;
}

}  // namespace harmcot
