#pragma once

#include <atomic>
#include <filesystem>
#include <initializer_list>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "checkmate/gateway.hpp"
#include "checkmate/problem_bank.hpp"
#include "checkmate/records.hpp"
#include "checkmate/session.hpp"
#include "checkmate/trace_store.hpp"

namespace fixtures {

using namespace checkmate;

/// Fresh directory under `base` (the system temp dir by default), removed on
/// destruction.
class TempDir {
 public:
  explicit TempDir(const std::filesystem::path& base = std::filesystem::temp_directory_path()) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = base /
            ("checkmate-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline InteractionStep step(std::size_t index, int c, int h, std::string query = "") {
  InteractionStep s;
  s.index = index;
  s.user_query = query.empty() ? "q" + std::to_string(index) : std::move(query);
  s.model_response = "r" + std::to_string(index);
  s.correctness = validate_score(ScaleKind::Correctness, c);
  s.helpfulness = validate_score(ScaleKind::Helpfulness, h);
  return s;
}

/// Trace with rated steps built from (correctness, helpfulness) pairs.
inline Trace trace(std::string id, std::string tag, Topic topic, std::initializer_list<std::pair<int, int>> ratings,
                   std::string problem_id = "p-01") {
  Trace t;
  t.trace_id = std::move(id);
  t.model_tag = std::move(tag);
  t.topic = topic;
  t.problem_id = std::move(problem_id);
  t.confidence_pre = validate_score(ScaleKind::Confidence, 3);
  t.round_group_id = "g-" + t.trace_id;
  t.created_at = parse_timestamp("2023-05-01");
  std::size_t i = 0;
  for (auto [c, h] : ratings) {
    t.steps.push_back(step(i, c, h, "query " + t.trace_id + " " + std::to_string(i)));
    ++i;
  }
  return t;
}

inline PreferenceRecord preference(std::string group, std::initializer_list<std::pair<const char*, int>> ranks) {
  PreferenceRecord r;
  r.round_group_id = std::move(group);
  for (auto [tag, rank] : ranks) r.ranks.emplace(tag, PreferenceRank(rank));
  return r;
}

/// `per_topic` problems in every topic, ids like "number-theory-03".
inline std::shared_ptr<const ProblemBank> bank(std::size_t per_topic = 9) {
  std::vector<Problem> problems;
  for (Topic t : kAllTopics) {
    for (std::size_t i = 1; i <= per_topic; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s-%02zu", std::string(topic_name(t)).c_str(), i);
      problems.push_back({id, t, "Statement of " + std::string(id), std::nullopt});
    }
  }
  return std::make_shared<const ProblemBank>(std::move(problems));
}

/// Store, stub-only gateway and engine in one place.
struct World {
  TempDir dir;
  store::TraceStore store{dir.path() / "store"};
  gateway::ModelGateway gateway{nullptr, gateway::GatewayOptions{}, [](const std::string&) {
                                  return std::optional<std::string>{};
                                }};
  session::SessionEngine engine;

  explicit World(session::EngineOptions options = {}) : engine(gateway, store, std::move(options)) {}

  session::SessionConfig config(std::size_t roster = 3, std::optional<std::uint64_t> seed = 7) const {
    session::SessionConfig c;
    c.roster = gateway::stub_roster(roster);
    c.bank = bank();
    c.rng_seed = seed;
    return c;
  }
};

inline std::vector<std::pair<Score, Score>> ratings(std::size_t n, int c = 5, int h = 4) {
  return std::vector<std::pair<Score, Score>>(
      n, {validate_score(ScaleKind::Correctness, c), validate_score(ScaleKind::Helpfulness, h)});
}

/// Fixed clock so persisted traces are reproducible.
inline session::EngineOptions fixed_clock() {
  session::EngineOptions o;
  o.clock = [] { return parse_timestamp("2024-01-02T03:04:05Z"); };
  return o;
}

}  // namespace fixtures
