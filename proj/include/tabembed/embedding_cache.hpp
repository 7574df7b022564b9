#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "tabembed/backend.hpp"

namespace tabembed {

// Persistent store of token-embedding matrices keyed by (prompt hash, backend fingerprint).
//
// Storage is an append-only log, `<dir>/embeddings.log`. Each record is
//   u32 magic 'TEC1' | u32 key_len | key | u32 rows | u32 cols | f64[rows*cols] | u64 fnv1a(all previous bytes)
// little-endian. The in-memory index maps keys to log offsets and is rebuilt by scanning
// the log on open; a truncated tail left by a crashed writer is cut off before the next
// append. Readers verify the checksum on every get, so a corrupted record reads as a miss.
// An empty path gives a memory-only cache.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;  // memory-only
  explicit EmbeddingCache(std::filesystem::path dir);

  // Honors TABEMBED_CACHE when set, else `fallback` (memory-only when empty).
  static EmbeddingCache from_environment(const std::filesystem::path& fallback = {});

  static std::string key(std::string_view prompt_hash, const BackendDescriptor& backend);

  std::optional<TokenEmbeddingMatrix> get(const std::string& key);
  void put(const std::string& key, const TokenEmbeddingMatrix& matrix);

  std::size_t size() const;
  bool persistent() const { return !dir_.empty(); }
  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  void scan_from(std::uint64_t offset);

  std::filesystem::path dir_;
  std::filesystem::path log_path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::uint64_t> index_;
  std::map<std::string, TokenEmbeddingMatrix> memory_;
  std::uint64_t scanned_ = 0;
};

}  // namespace tabembed
