#include "mpr/pool.hpp"

#include "mpr/error.hpp"

namespace mpr {

BackendPool::BackendPool(std::optional<std::filesystem::path> cache_dir) {
  if (cache_dir) cache_ = std::make_shared<const ResponseCache>(*cache_dir);
}

Backend& BackendPool::insert_locked(std::shared_ptr<Backend> raw) {
  Entry entry;
  entry.raw = raw;
  entry.facade = cache_ ? std::make_shared<CachingBackend>(raw, cache_) : raw;
  auto [it, inserted] = entries_.emplace(raw->spec().id, std::move(entry));
  if (!inserted) throw Error(ErrorCode::kInvalidConfig, "backend id '" + raw->spec().id + "' registered twice");
  return *it->second.facade;
}

Backend& BackendPool::get(const BackendSpec& spec) {
  std::lock_guard lock(mutex_);
  if (const auto it = entries_.find(spec.id); it != entries_.end()) {
    if (!(it->second.raw->spec() == spec)) {
      throw Error(ErrorCode::kInvalidConfig, "backend id '" + spec.id + "' used with two different specs");
    }
    return *it->second.facade;
  }
  return insert_locked(std::shared_ptr<Backend>(make_backend(spec)));
}

void BackendPool::add(std::shared_ptr<Backend> backend) {
  std::lock_guard lock(mutex_);
  insert_locked(std::move(backend));
}

std::uint64_t BackendPool::upstream_calls(std::string_view id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  return it == entries_.end() ? 0 : it->second.raw->call_count();
}

std::uint64_t BackendPool::upstream_calls() const {
  std::lock_guard lock(mutex_);
  std::uint64_t total = 0;
  for (const auto& [_, e] : entries_) total += e.raw->call_count();
  return total;
}

std::map<std::string, std::uint64_t> BackendPool::upstream_call_counts() const {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::uint64_t> out;
  for (const auto& [id, e] : entries_) out.emplace(id, e.raw->call_count());
  return out;
}

}  // namespace mpr
