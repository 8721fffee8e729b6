#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "tsnescope/error.hpp"
#include "tsnescope/io/json.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/search.hpp"

namespace tsnescope::io {

inline constexpr int session_format_version = 1;

struct Annotation {
  std::string timestamp;  // ISO-8601 UTC
  std::string author;
  std::string text;
  std::optional<std::vector<std::size_t>> selection;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct SessionStore {
  std::string id;
  std::string dataset_id;
  std::optional<GridSpec> grid;
  std::vector<ProjectionRecord> representatives;
  std::optional<RepresentativeSet> representative_set;
  std::optional<std::string> chosen_projection_id;
  std::vector<Annotation> annotations;  // append-only
  friend bool operator==(const SessionStore&, const SessionStore&) = default;
};

inline json to_json(const Annotation& a) {
  return {{"timestamp", a.timestamp}, {"author", a.author}, {"text", a.text},
          {"selection", a.selection ? json(*a.selection) : json(nullptr)}};
}

inline Annotation annotation_from_json(const json& j) {
  Annotation a;
  a.timestamp = j.at("timestamp").get<std::string>();
  a.author = j.at("author").get<std::string>();
  a.text = j.at("text").get<std::string>();
  if (j.contains("selection") && !j.at("selection").is_null())
    a.selection = j.at("selection").get<std::vector<std::size_t>>();
  return a;
}

inline json to_json(const SessionStore& s) {
  json reps = json::array();
  for (const auto& r : s.representatives) reps.push_back(to_json(r));
  json notes = json::array();
  for (const auto& a : s.annotations) notes.push_back(to_json(a));
  return {{"format_version", session_format_version},
          {"id", s.id},
          {"dataset_id", s.dataset_id},
          {"grid", s.grid ? to_json(*s.grid) : json(nullptr)},
          {"representatives", reps},
          {"representative_set", s.representative_set ? to_json(*s.representative_set) : json(nullptr)},
          {"chosen_projection_id", s.chosen_projection_id ? json(*s.chosen_projection_id) : json(nullptr)},
          {"annotations", notes}};
}

inline SessionStore session_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != session_format_version)
    fail(ErrorKind::migration, "session format version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(session_format_version) + "); migrate the session first");
  SessionStore s;
  s.id = j.at("id").get<std::string>();
  s.dataset_id = j.at("dataset_id").get<std::string>();
  if (!j.at("grid").is_null()) s.grid = grid_from_json(j.at("grid"));
  for (const auto& r : j.at("representatives")) s.representatives.push_back(record_from_json(r));
  if (!j.at("representative_set").is_null()) s.representative_set = representatives_from_json(j.at("representative_set"));
  if (!j.at("chosen_projection_id").is_null()) s.chosen_projection_id = j.at("chosen_projection_id").get<std::string>();
  for (const auto& a : j.at("annotations")) s.annotations.push_back(annotation_from_json(a));
  return s;
}

// Lowercase hex SHA-256.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::io, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// 128-bit random hex id.
inline std::string random_id() {
  static std::atomic<std::uint64_t> counter{0};
  thread_local std::mt19937_64 gen(std::random_device{}() ^ (std::uint64_t(std::random_device{}()) << 32));
  const std::uint64_t a = gen(), b = gen() ^ (++counter * 0x9E3779B97F4A7C15ULL);
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << a;
  os.width(16);
  os << b;
  return os.str();
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::not_found, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.parent_path() / (path.filename().string() + ".tmp-" + random_id());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

}  // namespace detail

// One directory per session: content-addressed blobs plus a manifest naming
// the current blob. Writes to the same session are serialized.
class SessionRepository {
 public:
  explicit SessionRepository(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "sessions");
  }

  // Assigns a fresh id when `store.id` is empty. Returns the blob hash.
  std::string save(SessionStore& store) {
    if (store.id.empty()) store.id = random_id();
    if (!detail::valid_id(store.id)) fail(ErrorKind::validation, "invalid session id");
    const std::string blob = to_json(store).dump();
    const std::string hash = sha256_hex(blob);
    std::lock_guard lock(mutex_for(store.id));
    const auto dir = root_ / "sessions" / store.id;
    const auto blob_path = dir / "blobs" / (hash + ".json");
    if (!std::filesystem::exists(blob_path)) detail::write_file_atomic(blob_path, blob);
    const json manifest = {{"format_version", session_format_version}, {"session_id", store.id}, {"blob", hash}};
    detail::write_file_atomic(dir / "manifest.json", manifest.dump());
    return hash;
  }

  SessionStore load(const std::string& id) const {
    if (!detail::valid_id(id)) fail(ErrorKind::not_found, "session '" + id + "' not found");
    const auto dir = root_ / "sessions" / id;
    if (!std::filesystem::exists(dir / "manifest.json")) fail(ErrorKind::not_found, "session '" + id + "' not found");
    json manifest;
    try {
      manifest = json::parse(detail::read_file(dir / "manifest.json"));
    } catch (const json::exception& e) {
      fail(ErrorKind::corrupted, "session '" + id + "' manifest is corrupted: " + e.what());
    }
    const int version = manifest.value("format_version", -1);
    if (version != session_format_version)
      fail(ErrorKind::migration, "session '" + id + "' uses format version " + std::to_string(version) +
                                     " (expected " + std::to_string(session_format_version) + ")");
    const std::string hash = manifest.value("blob", "");
    if (!detail::valid_id(hash)) fail(ErrorKind::corrupted, "session '" + id + "' manifest has no blob");
    const std::string blob = detail::read_file(dir / "blobs" / (hash + ".json"));
    if (sha256_hex(blob) != hash) fail(ErrorKind::corrupted, "session '" + id + "' blob fails its checksum");
    try {
      return session_from_json(json::parse(blob));
    } catch (const json::exception& e) {
      fail(ErrorKind::corrupted, "session '" + id + "' blob is corrupted: " + e.what());
    }
  }

  bool exists(const std::string& id) const {
    return detail::valid_id(id) && std::filesystem::exists(root_ / "sessions" / id / "manifest.json");
  }

  // Serializes read-modify-write cycles on one session.
  std::recursive_mutex& mutex_for(const std::string& id) {
    std::lock_guard lock(table_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::recursive_mutex>();
    return *slot;
  }

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
  std::mutex table_mutex_;
  std::map<std::string, std::unique_ptr<std::recursive_mutex>> locks_;
};

}  // namespace tsnescope::io
