#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "checkmate/records.hpp"

namespace checkmate::store {

enum class EventKind { TraceFinalized, PreferenceRecorded };

std::string_view event_kind_name(EventKind kind) noexcept;

struct StoreEvent {
  std::string event_id;
  std::string session_id;
  EventKind kind = EventKind::TraceFinalized;
  std::string logical_key;
  std::variant<Trace, PreferenceRecord> payload;
  std::string written_at;

  /// Builds an event whose id hashes (session, kind, key, payload).
  static StoreEvent for_trace(const std::string& session_id, const Trace& trace);
  static StoreEvent for_preference(const std::string& session_id, const PreferenceRecord& record);
};

/// Hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

enum class AppendResult { Inserted, Duplicate };

/// Append-only event log at `<dir>/events.jsonl` with an in-memory index
/// rebuilt on open. Appends are serialized; reads take a snapshot.
class TraceStore {
 public:
  /// Creates the directory and log if needed. A trailing record without its
  /// newline (torn write) is dropped. Throws Error{Io}.
  explicit TraceStore(std::filesystem::path dir);

  /// Identical event -> Duplicate (nothing written). Same logical key with a
  /// different payload, or a trace/group id owned by another key -> Conflict.
  AppendResult append_event(const StoreEvent& event);

  std::vector<StoreEvent> events() const;
  std::size_t event_count() const;
  Dataset dataset() const;

  /// Writes traces.jsonl and preferences.jsonl into `out_dir` (temp file +
  /// rename) and returns the exported dataset.
  Dataset export_dataset(const std::filesystem::path& out_dir) const;

  /// True if the log can currently be opened for append.
  bool writable() const;

  const std::filesystem::path& log_path() const noexcept { return log_path_; }

 private:
  struct Index {
    std::map<std::string, std::string> by_logical;    // session|kind|key -> event_id
    std::map<std::string, std::string> owner_by_id;   // trace/group id -> session|kind|key
  };
  void index_event(const StoreEvent& event, Index& index) const;

  std::filesystem::path dir_;
  std::filesystem::path log_path_;
  mutable std::mutex mutex_;
  std::vector<StoreEvent> events_;
  Index index_;
};

/// Export serialization: one JSON object per line, traces sorted by trace_id,
/// preferences by round_group_id; dates only, no session tokens.
std::string traces_jsonl(const Dataset& dataset);
std::string preferences_jsonl(const Dataset& dataset);
void write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir);

/// Reads traces.jsonl / preferences.jsonl from `dir`. Errors carry the line
/// number. Throws Error{Parse | Io}.
Dataset import_dataset(const std::filesystem::path& dir, const FieldMap& fields = {});
/// Same, from in-memory file contents.
Dataset import_dataset_text(std::string_view traces, std::string_view preferences, const FieldMap& fields = {});

/// Writes `contents` to `path` via a temp file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace checkmate::store
