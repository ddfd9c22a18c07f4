#pragma once

// Dataset persistence (line-delimited JSON, one record per line) and the
// stratified train/test split.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "harmcot/schema.hpp"

namespace harmcot {

// Round-trip lossless. Malformed lines raise IoError naming the line number
// and field; invariant violations raise ValidationError naming the record id.
std::vector<MemeRecord> load_dataset(const std::string& path);
void save_dataset(const std::vector<MemeRecord>& records, const std::string& path);

// Per-class (by binary label) train count is floor(n_class * ratio + 0.5);
// the remainder goes to test. Deterministic in `seed`; outputs preserve the
// input order within each side and carry Split::Train / Split::Test tags.
std::pair<std::vector<MemeRecord>, std::vector<MemeRecord>> stratified_split(
    const std::vector<MemeRecord>& records, double train_ratio, std::uint64_t seed);

// The count arithmetic of stratified_split, exposed for reporting: given
// per-class sizes, returns per-class train counts.
std::vector<std::size_t> stratified_train_counts(const std::vector<std::size_t>& class_sizes,
                                                 double train_ratio);

}  // namespace harmcot
