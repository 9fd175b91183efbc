// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//
// The published-data checks run when CHECKMATE_MATHCONVERSE_DIR points at an
// export of the released data (traces.jsonl / preferences.jsonl, optionally
// with CHECKMATE_FIELD_MAP naming a field-map JSON). Without it the fixture
// examples stand in and the line says so.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "checkmate/analysis.hpp"
#include "checkmate/annotation_sheet.hpp"
#include "checkmate/csv.hpp"
#include "checkmate/http_api.hpp"
#include "checkmate/taxonomy.hpp"
#include "fixtures.hpp"
#include "session_harness.hpp"

using namespace checkmate;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

/// Runs a criterion, turning an escaped exception into a FAIL line.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [ok, detail] = body();
    report(ok, name, detail);
  } catch (const std::exception& e) {
    report(false, name, std::string("threw: ") + e.what());
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::optional<Dataset> published_dataset() {
  const char* dir = std::getenv("CHECKMATE_MATHCONVERSE_DIR");
  if (!dir || !*dir) return std::nullopt;
  FieldMap fields;
  if (const char* map = std::getenv("CHECKMATE_FIELD_MAP"); map && *map) {
    std::ifstream in(map);
    std::stringstream text;
    text << in.rdbuf();
    fields = FieldMap::from_json(text.str());
  }
  return store::import_dataset(dir, fields);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// ---------------------------------------------------------------------------

std::pair<bool, std::string> pearson_oracle() {
  std::mt19937_64 rng(20230601);
  std::uniform_real_distribution<double> real(-100, 100);
  std::uniform_int_distribution<int> score(0, 6);
  const auto start = Clock::now();
  double worst = 0;
  std::size_t done = 0;
  while (done < 1000) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> x(n), y(n);
    const bool integer = done % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = integer ? score(rng) : real(rng);
      y[i] = integer ? score(rng) : real(rng);
    }
    const auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
    };
    if (constant(x) || constant(y)) continue;  // r undefined; rejected by both sides
    worst = std::max(worst, std::abs(analysis::pearson(x, y) - oracle_pearson(x, y)));
    ++done;
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && secs < 5.0,
          "1000 vectors, max |r - oracle| = " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s"};
}

std::pair<bool, std::string> correlation_replication() {
  if (auto data = published_dataset()) {
    const double r = analysis::correctness_helpfulness_correlation(*data);
    return {std::abs(r - 0.83) <= 0.02, "published data r = " + fmt("%.4f", r) + " (target 0.83 +/- 0.02)"};
  }
  // Fixture: (6,6),(2,4),(5,3),(0,1); the filter drops the last step.
  Dataset d;
  d.traces.push_back(fixtures::trace("t", "m", Topic::Algebra, {{6, 6}, {2, 4}, {5, 3}, {0, 1}}));
  const double filtered = analysis::correctness_helpfulness_correlation(d);
  // By hand: means (13/3, 13/3); sxy = 8/3, sxx = 26/3, syy = 14/3.
  const double hand = (8.0 / 3.0) / std::sqrt((26.0 / 3.0) * (14.0 / 3.0));
  const bool exact_example = std::abs(analysis::pearson(std::vector<double>{0, 1, 2, 3}, std::vector<double>{1, 1, 2, 2}) -
                                      2.0 / std::sqrt(5.0)) < 1e-12;
  bool degenerate = false;
  try {
    Dataset zeros;
    zeros.traces.push_back(fixtures::trace("z", "m", Topic::Algebra, {{0, 2}, {0, 5}}));
    analysis::correctness_helpfulness_correlation(zeros);
  } catch (const Error& e) {
    degenerate = e.code() == Errc::DegenerateInput;
  }
  return {std::abs(filtered - hand) < 1e-12 && exact_example && degenerate,
          "published data unavailable; fixture fallback: filtered r = " + fmt("%.6f", filtered) + " vs hand " +
              fmt("%.6f", hand) + ", 2/sqrt(5) example, all-zero -> DegenerateInput"};
}

std::pair<bool, std::string> si_goldens() {
  if (auto data = published_dataset()) {
    const char* tag_env = std::getenv("CHECKMATE_INSTRUCTGPT_TAG");
    const std::string tag = tag_env && *tag_env ? tag_env : "text-davinci-003";
    const auto rows = analysis::ratings_by_topic(*data);
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const auto& r) { return r.model_tag == tag && r.topic == Topic::Topology; });
    const auto prefs = analysis::preference_rank_counts(*data);
    const bool row_ok = it != rows.end() && it->problems == 3 && std::abs(it->correctness.mean - 4.5) <= 0.01 &&
                        std::abs(it->correctness.std - 1.41) <= 0.01;
    const bool ties_ok = prefs.records == 15 && prefs.records_with_ties == 5;
    std::string detail = "published data: ";
    detail += it == rows.end() ? "no (Topology, " + tag + ") row"
                               : "(Topology, " + tag + ") " + std::to_string(it->problems) + " problems, " +
                                     fmt("%.2f", it->correctness.mean) + " +/- " + fmt("%.2f", it->correctness.std);
    detail += "; ties " + std::to_string(prefs.records_with_ties) + " of " + std::to_string(prefs.records);
    return {row_ok && ties_ok, detail};
  }
  const std::vector<std::array<int, 3>> rows = {{3, 3, 1}, {3, 1, 1}, {3, 2, 2}, {1, 1, 1}, {2, 3, 2}};
  Dataset d;
  int g = 0;
  for (const auto& r : rows) {
    d.preferences.push_back(fixtures::preference("g" + std::to_string(g++),
                                                 {{"text-davinci-003", r[0]}, {"gpt-3.5-turbo", r[1]}, {"gpt-4", r[2]}}));
  }
  const auto counts = analysis::preference_rank_counts(d);
  std::array<std::size_t, 3> gpt4{};
  for (const auto& t : counts.per_model) {
    if (t.model_tag == "gpt-4") gpt4 = t.rank_counts;
  }
  // Std convention pin: {4,6} under the sample convention gives 1.41.
  Dataset s;
  s.traces.push_back(fixtures::trace("a", "m", Topic::Topology, {{4, 4}, {6, 6}}));
  const double sd = analysis::ratings_by_topic(s)[0].correctness.std;
  const bool ok = gpt4 == std::array<std::size_t, 3>{3, 2, 0} && counts.records_with_ties == 5 && std::abs(sd - 1.41) <= 0.01;
  return {ok, "published data unavailable; fixture fallback: GPT-4 {" + std::to_string(gpt4[0]) + "," +
                  std::to_string(gpt4[1]) + "," + std::to_string(gpt4[2]) + "}, tie records " +
                  std::to_string(counts.records_with_ties) + ", sample std of {4,6} = " + fmt("%.2f", sd)};
}

std::pair<bool, std::string> state_machine_safety() {
  // Ten thousand throwaway stores: keep them in memory when the host allows,
  // so the run measures the engine rather than the disk's fsync latency.
  std::error_code ec;
  const bool shm = std::filesystem::is_directory("/dev/shm", ec) && ::access("/dev/shm", W_OK) == 0;
  fixtures::TempDir dir(shm ? std::filesystem::path("/dev/shm") : std::filesystem::temp_directory_path());
  const auto start = Clock::now();
  const auto stats = harness::run_safety(10'000, 1729, dir.path());
  const double secs = seconds_since(start);
  std::string detail = std::to_string(stats.sequences) + " sequences, " + std::to_string(stats.ops) + " ops (" +
                       std::to_string(stats.rejected) + " rejected), " + std::to_string(stats.traces) + " traces, " +
                       std::to_string(stats.preferences) + " preferences, " + std::to_string(stats.cap_hits) +
                       " cap hits, " + fmt("%.2f", secs) + " s, stores on " + (shm ? "tmpfs" : "disk");
  if (!stats.violations.empty()) detail += "; first violation: " + stats.violations.front();
  return {stats.violations.empty() && stats.sequences == 10'000 && secs < 30.0, detail};
}

/// Scripted client over real HTTP. Returns parsed JSON bodies; fails loudly.
struct Client {
  httplib::Client http;
  explicit Client(int port) : http("127.0.0.1", port) {}

  json post(const std::string& path, const json& body, const std::string& key, int expect = 200) {
    httplib::Headers headers = {{"Idempotency-Key", key}};
    auto r = http.Post(path, headers, body.dump(), "application/json");
    if (!r) throw std::runtime_error("no response for " + path);
    if (r->status != expect) throw std::runtime_error(path + " -> " + std::to_string(r->status) + " " + r->body);
    return json::parse(r->body);
  }
};

struct Recorded {
  std::string path;
  json body;
  std::string key;
};

}  // namespace

int main() {
  std::printf("checkmate acceptance\n");

  criterion("Pearson oracle equivalence", pearson_oracle);
  criterion("Correlation replication", correlation_replication);
  criterion("SI tables goldens", si_goldens);
  criterion("State-machine safety", state_machine_safety);

  // End-to-end and idempotency share one running server.
  {
    fixtures::TempDir dir;
    store::TraceStore store(dir.path() / "store");
    gateway::ModelGateway gateway(nullptr, gateway::GatewayOptions{},
                                  [](const std::string&) { return std::optional<std::string>{}; });
    session::SessionEngine engine(gateway, store);
    api::ApiConfig config;
    config.roster = gateway::stub_roster(3);
    config.bank = fixtures::bank();
    config.admin_token = "acceptance-admin";
    api::Api api(engine, store, gateway, config);
    api::HttpServer server(api);
    int port = 0;
    std::vector<Recorded> mutating;

    criterion("End-to-end stub run", [&]() -> std::pair<bool, std::string> {
      port = server.start("127.0.0.1", 0);
      Client client(port);
      const auto start = Clock::now();
      std::size_t n = 0;
      auto send = [&](const std::string& path, const json& body) {
        const std::string key = "req-" + std::to_string(n++);
        const int expect = path == "/sessions" ? 201 : 200;
        json out = client.post(path, body, key, expect);
        mutating.push_back({path, body, key});
        return out;
      };
      const std::string id = send("/sessions", json::object())["session_id"];
      const std::string base = "/sessions/" + id;
      send(base + "/acknowledge", json::object());
      send(base + "/topic", {{"topic", "number-theory"}});
      for (int round = 0; round < 3; ++round) {
        send(base + "/confidence", {{"value", 2 + round}});
        for (int m = 0; m <= round; ++m) send(base + "/messages", {{"text", "question " + std::to_string(m)}});
        send(base + "/finish", json::object());
        json ratings = json::array();
        for (int m = 0; m <= round; ++m) ratings.push_back({{"correctness", 6 - m}, {"helpfulness", 5 - m}});
        send(base + "/ratings", {{"ratings", ratings}});
      }
      const json done = send(base + "/preferences", {{"ranks", {{"Model A", 2}, {"Model B", 1}, {"Model C", 3}}}});
      const double secs = seconds_since(start);

      auto exported = client.http.Get("/export/traces", {{"Authorization", "Bearer acceptance-admin"}});
      if (!exported || exported->status != 200) return {false, "admin export failed"};
      const json files = json::parse(exported->body);
      const std::string traces = files["traces_jsonl"], prefs = files["preferences_jsonl"];
      const Dataset imported = store::import_dataset_text(traces, prefs);
      store::write_dataset(imported, dir.path() / "roundtrip");
      const bool identical = file_bytes(dir.path() / "roundtrip" / "traces.jsonl") == traces &&
                             file_bytes(dir.path() / "roundtrip" / "preferences.jsonl") == prefs;
      const bool counts = imported.traces.size() == 3 && imported.preferences.size() == 1;
      std::set<std::string> tags;
      for (const auto& t : imported.traces) tags.insert(t.model_tag);
      return {counts && identical && tags.size() == 3 && secs < 5.0 && done["phase"] == "confidence",
              std::to_string(imported.traces.size()) + " traces, " + std::to_string(imported.preferences.size()) +
                  " preference, " + std::to_string(mutating.size()) + " requests in " + fmt("%.3f", secs) +
                  " s over HTTP; export->import->export " + (identical ? "byte-identical" : "DIFFERS")};
    });

    criterion("Idempotency", [&]() -> std::pair<bool, std::string> {
      if (mutating.empty()) return {false, "end-to-end run did not complete"};
      Client client(port);
      const std::size_t before = store.event_count();
      std::size_t replayed = 0;
      for (const auto& req : mutating) {
        httplib::Headers headers = {{"Idempotency-Key", req.key}};
        auto r = client.http.Post(req.path, headers, req.body.dump(), "application/json");
        if (r && r->get_header_value("Idempotent-Replay") == "true") ++replayed;
      }
      // Beneath the cache, the store itself refuses every event a second time.
      std::size_t duplicates = 0;
      for (const auto& e : store.events()) duplicates += store.append_event(e) == store::AppendResult::Duplicate;
      const std::size_t after = store.event_count();
      return {after == before && replayed == mutating.size() && duplicates == before,
              std::to_string(mutating.size()) + " replays, " + std::to_string(replayed) + " served from cache, " +
                  std::to_string(after - before) + " new events; re-appending " + std::to_string(before) +
                  " stored events gave " + std::to_string(duplicates) + " Duplicate"};
    });
    server.stop();
  }

  criterion("Annotation round-trip", []() -> std::pair<bool, std::string> {
    // Ten queries across three traces.
    Dataset d;
    d.traces.push_back(fixtures::trace("t1", "m1", Topic::Algebra, {{5, 5}, {4, 4}, {3, 3}, {6, 6}}));
    d.traces.push_back(fixtures::trace("t2", "m2", Topic::Algebra, {{2, 2}, {5, 4}, {6, 5}}));
    d.traces.push_back(fixtures::trace("t3", "m3", Topic::Algebra, {{4, 3}, {1, 1}, {3, 2}}));
    const std::string sheet = store::export_annotation_sheet(d);
    auto rows = csv::parse(sheet);
    const auto& header = rows[0].fields;
    auto col = [&](const std::string& name) {
      return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    // Sheet rows follow (trace_id, step): t1/0..3, t2/0..2, t3/0..2.
    auto edit = [&](const std::vector<std::tuple<std::size_t, std::string, std::string>>& marks) {
      auto copy = rows;
      for (const auto& [row, column, value] : marks) copy[row + 1].fields[col(column)] = value;
      std::string out;
      for (const auto& r : copy) csv::append_row(out, r.fields);
      return out;
    };
    const std::string marked = edit({{0, "full_problem_paste", "y"},   // t1 step 0
                                     {4, "full_problem_paste", "m"},   // t2 step 0
                                     {5, "definition_seek", "y"},      // t2 step 1
                                     {8, "asking_why", "y"}});         // t3 step 1
    const auto merged = taxonomy::merge_sheets({{"ann", marked}}, d);
    const auto profiles = analysis::query_profiles(d, merged.annotations, analysis::ProfileSlicer::ByStepIndex);
    // Hand counts. Every sheet row is an annotation, blank rows included, so
    // the denominators are the queries per step: 3, 3, 3, 1. Step 0 holds the
    // two full_problem_paste marks (maybe weighs 1); step 1 one definition_seek
    // and one asking_why.
    bool counts_ok = profiles.size() == 4 && merged.annotations.size() == 10;
    if (counts_ok) {
      using taxonomy::Category;
      double marks = 0;
      for (const auto& p : profiles) {
        for (auto [c, v] : p.counts) marks += v;
      }
      counts_ok = profiles[0].denominator == 3 && profiles[0].counts.at(Category::FullProblemPaste) == 2 &&
                  profiles[1].denominator == 3 && profiles[1].counts.at(Category::DefinitionSeek) == 1 &&
                  profiles[1].counts.at(Category::AskingWhy) == 1 && profiles[2].denominator == 3 &&
                  profiles[3].denominator == 1 && marks == 4;
    }

    // Conflicting second annotator: hand-identified conflicts are t1/0 full_problem_paste
    // (y vs n) and t3/1 asking_why (y vs n). t2/0 maybe vs yes merges to maybe.
    const std::string other = edit({{0, "clarifying_question", "y"},
                                    {4, "full_problem_paste", "y"},
                                    {5, "definition_seek", "y"},
                                    {8, "explicit_correction", "y"}});
    const auto both = taxonomy::merge_sheets({{"ann", marked}, {"bob", other}}, d);
    std::set<std::tuple<std::string, std::size_t, std::string>> got;
    for (const auto& c : both.conflicts) {
      got.insert({c.query_ref.trace_id, c.query_ref.step_index,
                  std::string(taxonomy::categories()[static_cast<std::size_t>(c.category)].name)});
    }
    const std::set<std::tuple<std::string, std::size_t, std::string>> expected = {
        {"t1", 0, "clarifying_question"}, {"t1", 0, "full_problem_paste"},
        {"t3", 1, "asking_why"},          {"t3", 1, "explicit_correction"}};
    const bool conflicts_ok = got == expected && both.maybe_flags.size() == 1;
    return {counts_ok && conflicts_ok, "4 of 10 queries marked; profiles match hand counts: " +
                                           std::string(counts_ok ? "yes" : "no") + "; conflicts " +
                                           std::to_string(both.conflicts.size()) + " (expected 4), maybe flags " +
                                           std::to_string(both.maybe_flags.size())};
  });

  criterion("Stopping/dynamics conservation", []() -> std::pair<bool, std::string> {
    std::mt19937_64 rng(31337);
    std::size_t datasets = 0, traces_seen = 0;
    for (; datasets < 500; ++datasets) {
      Dataset d;
      const std::size_t n = rng() % 30;
      std::size_t steps = 0;
      for (std::size_t t = 0; t < n; ++t) {
        Trace tr = fixtures::trace("t" + std::to_string(t), "m" + std::to_string(rng() % 3), Topic::Algebra, {});
        const std::size_t len = 1 + rng() % 20;
        for (std::size_t k = 0; k < len; ++k) tr.steps.push_back(fixtures::step(k, rng() % 7, rng() % 7));
        steps += len;
        d.traces.push_back(std::move(tr));
      }
      traces_seen += n;
      std::size_t total = 0, terminal = 0;
      for (const auto& c : analysis::stopping_stats(d)) {
        total += c.total_steps;
        terminal += c.terminal_steps;
      }
      if (total != steps || terminal != n) return {false, "stopping sums off in dataset " + std::to_string(datasets)};
      const auto dyn = analysis::rating_dynamics(d);
      for (std::size_t k = 1; k < dyn.size(); ++k) {
        if (dyn[k].n_active > dyn[k - 1].n_active) return {false, "n_active rose at step " + std::to_string(k)};
      }
      if (!dyn.empty() && dyn[0].n_active != n) return {false, "n_active(0) differs from the trace count"};
    }
    return {true, std::to_string(datasets) + " generated datasets, " + std::to_string(traces_seen) +
                      " traces: totals, terminals and n_active monotonicity hold"};
  });

  std::printf("%s\n", failures == 0 ? "all criteria passed" : (std::to_string(failures) + " criteria failed").c_str());
  return failures == 0 ? 0 : 1;
}
