#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "mpr/backend.hpp"
#include "mpr/cache.hpp"

namespace mpr {

// Owns one backend instance per BackendSpec id, optionally fronted by a
// response cache. Thread-safe.
class BackendPool {
 public:
  explicit BackendPool(std::optional<std::filesystem::path> cache_dir = std::nullopt);

  // Creates the backend on first use. Throws kInvalidConfig if the id was
  // registered with a different spec.
  Backend& get(const BackendSpec& spec);

  // Registers a pre-built backend (e.g. a mock with a custom table).
  void add(std::shared_ptr<Backend> backend);

  // Calls that reached the underlying backends (cache hits excluded).
  std::uint64_t upstream_calls(std::string_view id) const;
  std::uint64_t upstream_calls() const;
  std::map<std::string, std::uint64_t> upstream_call_counts() const;

  const ResponseCache* cache() const noexcept { return cache_.get(); }

 private:
  struct Entry {
    std::shared_ptr<Backend> raw;
    std::shared_ptr<Backend> facade;
  };

  Backend& insert_locked(std::shared_ptr<Backend> raw);

  std::shared_ptr<const ResponseCache> cache_;
  mutable std::mutex mutex_;
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace mpr
