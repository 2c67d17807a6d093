#include "flowx/service.h"

namespace flowx {

std::shared_future<std::string> ResultCache::Get(const std::string& key, Producer produce) {
  {
    std::shared_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  std::unique_lock lock(mu_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  std::shared_future<std::string> f = std::async(std::launch::async, std::move(produce)).share();
  entries_.emplace(key, f);
  return f;
}

std::optional<std::shared_future<std::string>> ResultCache::Find(const std::string& key) const {
  std::shared_lock lock(mu_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

size_t ResultCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

}  // namespace flowx
