#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mpr {

// Lowercase hex SHA-256 digest (64 characters).
std::string content_hash(std::string_view bytes);

// First eight digest bytes read big-endian.
std::uint64_t content_hash_u64(std::string_view bytes);

// Seed for one record: global seed XOR the id's digest prefix, so corpus order
// does not influence the output for a record.
inline std::uint64_t record_seed(std::uint64_t global_seed, std::string_view record_id) {
  return global_seed ^ content_hash_u64(record_id);
}

}  // namespace mpr
