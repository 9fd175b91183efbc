#include "checkmate/trace_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "checkmate/error.hpp"

namespace checkmate::store {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view event_kind_name(EventKind kind) noexcept {
  return kind == EventKind::TraceFinalized ? "trace_finalized" : "preference_recorded";
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::Io, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

namespace {

json payload_json(const StoreEvent& event) {
  if (const auto* trace = std::get_if<Trace>(&event.payload)) return trace_to_json(*trace, RecordForm::Event);
  return preference_to_json(std::get<PreferenceRecord>(event.payload));
}

std::string compute_event_id(const std::string& session_id, EventKind kind, const std::string& key,
                             const json& payload) {
  std::string material = session_id;
  material += '\x1f';
  material += event_kind_name(kind);
  material += '\x1f';
  material += key;
  material += '\x1f';
  material += payload.dump();
  return sha256_hex(material);
}

std::string logical_slot(const StoreEvent& e) {
  return e.session_id + "|" + std::string(event_kind_name(e.kind)) + "|" + e.logical_key;
}

std::string owned_id(const StoreEvent& e) {
  if (const auto* trace = std::get_if<Trace>(&e.payload)) return "trace:" + trace->trace_id;
  return "group:" + std::get<PreferenceRecord>(e.payload).round_group_id;
}

std::string event_line(const StoreEvent& e) {
  json doc = {{"event_id", e.event_id},       {"kind", event_kind_name(e.kind)},
              {"session_id", e.session_id},   {"logical_key", e.logical_key},
              {"payload", payload_json(e)},   {"written_at", e.written_at}};
  return doc.dump() + "\n";
}

StoreEvent event_from_line(const std::string& line, std::size_t line_no) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::Io, "corrupt event log record", line_no);
  try {
    StoreEvent e;
    e.event_id = doc.at("event_id").get<std::string>();
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "trace_finalized") {
      e.kind = EventKind::TraceFinalized;
      e.payload = trace_from_json(doc.at("payload"), RecordForm::Event);
    } else if (kind == "preference_recorded") {
      e.kind = EventKind::PreferenceRecorded;
      e.payload = preference_from_json(doc.at("payload"));
    } else {
      throw Error(Errc::Io, "unknown event kind '" + kind + "'", line_no);
    }
    e.session_id = doc.at("session_id").get<std::string>();
    e.logical_key = doc.at("logical_key").get<std::string>();
    e.written_at = doc.at("written_at").get<std::string>();
    return e;
  } catch (const json::exception& ex) {
    throw Error(Errc::Io, std::string("corrupt event log record: ") + ex.what(), line_no);
  } catch (const Error& ex) {
    if (ex.code() == Errc::Io) throw;
    throw Error(Errc::Io, "corrupt event log record: " + ex.detail(), line_no);
  }
}

}  // namespace

StoreEvent StoreEvent::for_trace(const std::string& session_id, const Trace& trace) {
  StoreEvent e;
  e.session_id = session_id;
  e.kind = EventKind::TraceFinalized;
  e.logical_key = "round:" + std::to_string(trace.round_index);
  e.payload = trace;
  e.event_id = compute_event_id(session_id, e.kind, e.logical_key, payload_json(e));
  return e;
}

StoreEvent StoreEvent::for_preference(const std::string& session_id, const PreferenceRecord& record) {
  StoreEvent e;
  e.session_id = session_id;
  e.kind = EventKind::PreferenceRecorded;
  e.logical_key = "group:" + record.round_group_id;
  e.payload = record;
  e.event_id = compute_event_id(session_id, e.kind, e.logical_key, payload_json(e));
  return e;
}

TraceStore::TraceStore(fs::path dir) : dir_(std::move(dir)), log_path_(dir_ / "events.jsonl") {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir_.string() + ": " + ec.message());

  if (!fs::exists(log_path_)) return;
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + log_path_.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  in.close();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail
    ++line_no;
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    StoreEvent e = event_from_line(line, line_no);
    index_event(e, index_);
    events_.push_back(std::move(e));
  }
  if (pos < content.size()) {
    fs::resize_file(log_path_, pos, ec);
    if (ec) throw Error(Errc::Io, "cannot drop torn record: " + ec.message());
  }
}

void TraceStore::index_event(const StoreEvent& event, Index& index) const {
  index.by_logical[logical_slot(event)] = event.event_id;
  index.owner_by_id[owned_id(event)] = logical_slot(event);
}

AppendResult TraceStore::append_event(const StoreEvent& event) {
  std::lock_guard lock(mutex_);
  const std::string slot = logical_slot(event);
  if (auto it = index_.by_logical.find(slot); it != index_.by_logical.end()) {
    if (it->second == event.event_id) return AppendResult::Duplicate;
    throw Error(Errc::Conflict, "a different record is already stored for " + event.logical_key);
  }
  if (auto it = index_.owner_by_id.find(owned_id(event)); it != index_.owner_by_id.end() && it->second != slot) {
    throw Error(Errc::Conflict, "record id already belongs to another entry");
  }

  StoreEvent stored = event;
  if (stored.written_at.empty()) stored.written_at = format_timestamp(std::chrono::system_clock::now());
  const std::string line = event_line(stored);

  const int fd = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::Io, "cannot open event log for append");
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n <= 0) {
      ::close(fd);
      throw Error(Errc::Io, "event log write failed");
    }
    written += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw Error(Errc::Io, "event log fsync failed");

  index_event(stored, index_);
  events_.push_back(std::move(stored));
  return AppendResult::Inserted;
}

std::vector<StoreEvent> TraceStore::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::size_t TraceStore::event_count() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

Dataset TraceStore::dataset() const {
  Dataset out;
  out.provenance = "event log " + log_path_.string();
  for (const auto& e : events()) {
    if (const auto* trace = std::get_if<Trace>(&e.payload)) out.traces.push_back(*trace);
    else out.preferences.push_back(std::get<PreferenceRecord>(e.payload));
  }
  std::sort(out.traces.begin(), out.traces.end(),
            [](const Trace& a, const Trace& b) { return a.trace_id < b.trace_id; });
  std::sort(out.preferences.begin(), out.preferences.end(),
            [](const PreferenceRecord& a, const PreferenceRecord& b) { return a.round_group_id < b.round_group_id; });
  return out;
}

Dataset TraceStore::export_dataset(const fs::path& out_dir) const {
  Dataset ds = dataset();
  write_dataset(ds, out_dir);
  return ds;
}

bool TraceStore::writable() const {
  const int fd = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) return false;
  ::close(fd);
  return true;
}

std::string traces_jsonl(const Dataset& dataset) {
  std::vector<const Trace*> traces;
  for (const auto& t : dataset.traces) traces.push_back(&t);
  std::sort(traces.begin(), traces.end(), [](const Trace* a, const Trace* b) { return a->trace_id < b->trace_id; });
  std::string out;
  for (const Trace* t : traces) out += trace_to_json(*t, RecordForm::Export).dump() + "\n";
  return out;
}

std::string preferences_jsonl(const Dataset& dataset) {
  std::vector<const PreferenceRecord*> prefs;
  for (const auto& p : dataset.preferences) prefs.push_back(&p);
  std::sort(prefs.begin(), prefs.end(), [](const PreferenceRecord* a, const PreferenceRecord* b) {
    return a->round_group_id < b->round_group_id;
  });
  std::string out;
  for (const auto* p : prefs) out += preference_to_json(*p).dump() + "\n";
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(Errc::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::Io, "cannot rename into " + path.string() + ": " + ec.message());
}

void write_dataset(const Dataset& dataset, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  write_file_atomic(out_dir / "traces.jsonl", traces_jsonl(dataset));
  write_file_atomic(out_dir / "preferences.jsonl", preferences_jsonl(dataset));
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename Fn>
void for_each_line(std::string_view text, const char* file, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw Error(Errc::Parse, std::string(file) + ": not valid JSON", line_no);
    try {
      fn(doc, line_no);
    } catch (const Error& e) {
      if (e.line()) throw;
      throw Error(Errc::Parse, std::string(file) + ": " + e.detail(), line_no);
    }
  }
}

}  // namespace

Dataset import_dataset_text(std::string_view traces, std::string_view preferences, const FieldMap& fields) {
  Dataset ds;
  std::map<std::string, std::vector<const Trace*>> by_group;
  std::set<std::string> trace_ids;

  for_each_line(traces, "traces.jsonl", [&](const json& doc, std::size_t) {
    Trace t = trace_from_json(doc, RecordForm::Export, fields);
    if (!trace_ids.insert(t.trace_id).second) throw Error(Errc::Parse, "duplicate trace_id '" + t.trace_id + "'");
    ds.traces.push_back(std::move(t));
  });
  for (const auto& t : ds.traces) by_group[t.round_group_id].push_back(&t);

  std::set<std::string> groups;
  for_each_line(preferences, "preferences.jsonl", [&](const json& doc, std::size_t) {
    PreferenceRecord p = preference_from_json(doc, fields);
    if (!groups.insert(p.round_group_id).second) {
      throw Error(Errc::Parse, "duplicate preference for group '" + p.round_group_id + "'");
    }
    const auto& members = by_group[p.round_group_id];
    std::set<std::string> tags;
    for (const Trace* t : members) tags.insert(t->model_tag);
    std::set<std::string> ranked;
    for (const auto& [tag, rank] : p.ranks) ranked.insert(tag);
    if (members.size() != p.ranks.size() || tags != ranked) {
      throw Error(Errc::Parse, "preference group '" + p.round_group_id + "' does not resolve to one trace per ranked model");
    }
    ds.preferences.push_back(std::move(p));
  });
  return ds;
}

Dataset import_dataset(const fs::path& dir, const FieldMap& fields) {
  const fs::path traces = dir / "traces.jsonl";
  const fs::path prefs = dir / "preferences.jsonl";
  Dataset ds = import_dataset_text(read_file(traces), fs::exists(prefs) ? read_file(prefs) : std::string(), fields);
  ds.provenance = dir.string();
  return ds;
}

}  // namespace checkmate::store
