#include "tabembed/embedding_cache.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

namespace tabembed {

namespace {

constexpr std::uint32_t kMagic = 0x31434554;  // "TEC1"

void append_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

// Parsed view of one log record.
struct RecordView {
  std::string key;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::size_t payload_offset = 0;  // within the record bytes
  std::size_t total = 0;
  bool checksum_ok = false;
};

// Returns nullopt when `bytes` holds only a truncated or unframed record.
std::optional<RecordView> parse_record(const std::string& bytes, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + at;
  const std::size_t avail = bytes.size() - at;
  if (avail < 8) return std::nullopt;
  if (read_le(p, 4) != kMagic) return std::nullopt;
  const auto key_len = static_cast<std::size_t>(read_le(p + 4, 4));
  if (avail < 8 + key_len + 8) return std::nullopt;
  RecordView v;
  v.key.assign(reinterpret_cast<const char*>(p + 8), key_len);
  v.rows = static_cast<std::uint32_t>(read_le(p + 8 + key_len, 4));
  v.cols = static_cast<std::uint32_t>(read_le(p + 12 + key_len, 4));
  v.payload_offset = 16 + key_len;
  const std::size_t payload = static_cast<std::size_t>(v.rows) * v.cols * sizeof(double);
  v.total = v.payload_offset + payload + 8;
  if (avail < v.total) return std::nullopt;
  const std::uint64_t stored = read_le(p + v.total - 8, 8);
  v.checksum_ok = stored == fnv1a64_bytes(p, v.total - 8);
  return v;
}

std::string read_file_from(const std::filesystem::path& path, std::uint64_t offset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (size <= offset) return {};
  in.seekg(static_cast<std::streamoff>(offset));
  std::string buf(size - offset, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  return buf;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create cache directory " + dir_.string() + ": " + ec.message());
  log_path_ = dir_ / "embeddings.log";
  scan_from(0);
}

EmbeddingCache EmbeddingCache::from_environment(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("TABEMBED_CACHE"); env && *env) return EmbeddingCache(env);
  return EmbeddingCache(fallback);
}

std::string EmbeddingCache::key(std::string_view prompt_hash, const BackendDescriptor& backend) {
  return std::string(prompt_hash) + "|" + backend.fingerprint();
}

void EmbeddingCache::scan_from(std::uint64_t offset) {
  const std::string bytes = read_file_from(log_path_, offset);
  std::size_t at = 0;
  while (at < bytes.size()) {
    auto rec = parse_record(bytes, at);
    if (!rec) break;
    if (rec->checksum_ok) {
      index_[rec->key] = offset + at;
    } else {
      warn("embedding cache record at offset " + std::to_string(offset + at) + " failed its checksum; ignored");
    }
    at += rec->total;
  }
  scanned_ = offset + at;
}

std::optional<TokenEmbeddingMatrix> EmbeddingCache::get(const std::string& key) {
  std::lock_guard lock(mutex_);
  if (!persistent()) {
    auto it = memory_.find(key);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  auto it = index_.find(key);
  if (it == index_.end()) {
    scan_from(scanned_);  // pick up appends from other writers
    it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
  }
  const std::string bytes = read_file_from(log_path_, it->second);
  auto rec = parse_record(bytes, 0);
  if (!rec || !rec->checksum_ok || rec->key != key) {
    warn(std::string(to_string(ErrorCode::kCacheCorrupt)) + ": entry for key " + key + " is corrupt; treating as miss");
    index_.erase(it);
    return std::nullopt;
  }
  TokenEmbeddingMatrix m;
  m.token_count = rec->rows;
  m.dim = rec->cols;
  m.values.resize(static_cast<std::size_t>(rec->rows) * rec->cols);
  std::memcpy(m.values.data(), bytes.data() + rec->payload_offset, m.values.size() * sizeof(double));
  m.prompt_hash = key.substr(0, key.find('|'));
  return m;
}

void EmbeddingCache::put(const std::string& key, const TokenEmbeddingMatrix& matrix) {
  std::lock_guard lock(mutex_);
  if (!persistent()) {
    memory_[key] = matrix;
    return;
  }
  std::string buf;
  append_u32(buf, kMagic);
  append_u32(buf, static_cast<std::uint32_t>(key.size()));
  buf += key;
  append_u32(buf, static_cast<std::uint32_t>(matrix.token_count));
  append_u32(buf, static_cast<std::uint32_t>(matrix.dim));
  buf.append(reinterpret_cast<const char*>(matrix.values.data()), matrix.values.size() * sizeof(double));
  append_u64(buf, fnv1a64_bytes(buf.data(), buf.size()));

  const int fd = ::open(log_path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorCode::kIoError, "cannot open " + log_path_.string());
  ::flock(fd, LOCK_EX);
  // Drop a torn tail so the new record stays reachable by the scanner.
  scan_from(scanned_);
  const auto end = static_cast<std::uint64_t>(::lseek(fd, 0, SEEK_END));
  if (end > scanned_ && ::ftruncate(fd, static_cast<off_t>(scanned_)) != 0) {
    ::flock(fd, LOCK_UN);
    ::close(fd);
    fail(ErrorCode::kIoError, "cannot truncate torn cache tail");
  }
  const std::uint64_t offset = scanned_;
  std::size_t written = 0;
  while (written < buf.size()) {
    const ssize_t n = ::write(fd, buf.data() + written, buf.size() - written);
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  const bool ok = written == buf.size() && ::fsync(fd) == 0;
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) fail(ErrorCode::kIoError, "short write to " + log_path_.string());
  index_[key] = offset;
  scanned_ = offset + buf.size();
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return persistent() ? index_.size() : memory_.size();
}

}  // namespace tabembed
