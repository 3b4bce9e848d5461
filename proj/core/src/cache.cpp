#include "mpr/cache.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "mpr/error.hpp"
#include "mpr/hash.hpp"

namespace mpr {
namespace {

std::atomic<std::uint64_t> g_temp_counter{0};

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create cache dir " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::key_for(const ChatRequest& req) {
  std::string material = req.backend_id;
  material += '\x1f';
  material += req.template_version;
  material += '\x1f';
  material += canonical_json(req).dump();
  return content_hash(material);
}

std::string ResponseCache::key_for_scoring(std::string_view backend_id, std::string_view text) {
  std::string material = "score_tokens";
  material += '\x1f';
  material += backend_id;
  material += '\x1f';
  material += text;
  return content_hash(material);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  try {
    const Json j = Json::parse(in);
    if (j.at("key").get<std::string>() != key) throw Error(ErrorCode::kMalformedResponse, "key mismatch");
    auto value = j.at("response").get<std::string>();
    ++hits_;
    return value;
  } catch (const std::exception& e) {
    spdlog::warn("cache entry {} is unreadable ({}); treating as a miss", path.string(), e.what());
    ++misses_;
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const std::string& value) const {
  const auto path = path_for(key);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + path.parent_path().string());

  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << '.' << g_temp_counter.fetch_add(1);
  auto temp = path;
  temp += suffix.str();
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + temp.string());
    out << Json{{"key", key}, {"response", value}}.dump();
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + temp.string());
  }
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    throw Error(ErrorCode::kIoError, "cannot move cache entry into " + path.string());
  }
}

std::string cached_call(Backend& backend, const ChatRequest& req, const ResponseCache& cache) {
  const std::string key = ResponseCache::key_for(req);
  if (auto hit = cache.get(key)) return *std::move(hit);
  std::string response = backend.complete(req);
  cache.put(key, response);
  return response;
}

std::string cached_call(const BackendSpec& spec, const ChatRequest& req, const std::filesystem::path& cache_dir) {
  const ResponseCache cache(cache_dir);
  const std::string key = ResponseCache::key_for(req);
  if (auto hit = cache.get(key)) return *std::move(hit);
  std::string response = make_backend(spec)->complete(req);
  cache.put(key, response);
  return response;
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<const ResponseCache> cache)
    : Backend(inner->spec()), inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachingBackend::do_complete(const ChatRequest& req) { return cached_call(*inner_, req, *cache_); }

std::vector<TokenScore> CachingBackend::do_score_tokens(std::string_view text) {
  const std::string key = ResponseCache::key_for_scoring(spec().id, text);
  if (auto hit = cache_->get(key)) {
    try {
      std::vector<TokenScore> out;
      for (const auto& e : Json::parse(*hit)) out.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
      return out;
    } catch (const Json::exception& e) {
      spdlog::warn("cached token scores for key {} are malformed ({}); rescoring", key, e.what());
    }
  }
  auto scores = inner_->score_tokens(text);
  Json arr = Json::array();
  for (const auto& s : scores) arr.push_back(Json::array({s.token, s.logprob}));
  cache_->put(key, arr.dump());
  return scores;
}

}  // namespace mpr
