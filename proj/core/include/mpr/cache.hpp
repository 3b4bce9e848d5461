#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mpr/backend.hpp"

namespace mpr {

// On-disk response cache. One JSON file per entry under <dir>/<key[0:2]>/<key>.json,
// written to a temporary file and renamed into place. Unreadable or
// mismatching entries are reported as misses.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  // content_hash(backend_id ‖ template_version ‖ canonical request JSON).
  static std::string key_for(const ChatRequest& req);
  static std::string key_for_scoring(std::string_view backend_id, std::string_view text);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& value) const;

  std::filesystem::path path_for(const std::string& key) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::uint64_t hits() const noexcept { return hits_.load(); }
  std::uint64_t misses() const noexcept { return misses_.load(); }

 private:
  std::filesystem::path dir_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
};

// Serves the request from the cache or forwards it to the backend and stores
// the response. Backend errors propagate and are never cached.
std::string cached_call(Backend& backend, const ChatRequest& req, const ResponseCache& cache);
std::string cached_call(const BackendSpec& spec, const ChatRequest& req, const std::filesystem::path& cache_dir);

// Backend decorator that routes complete() and score_tokens() through a cache.
class CachingBackend final : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<const ResponseCache> cache);

  Backend& inner() noexcept { return *inner_; }

 protected:
  std::string do_complete(const ChatRequest& req) override;
  std::vector<TokenScore> do_score_tokens(std::string_view text) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<const ResponseCache> cache_;
};

}  // namespace mpr
