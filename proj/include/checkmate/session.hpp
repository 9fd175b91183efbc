#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "checkmate/gateway.hpp"
#include "checkmate/problem_bank.hpp"
#include "checkmate/records.hpp"
#include "checkmate/scales.hpp"
#include "checkmate/trace_store.hpp"

namespace checkmate::session {

using gateway::ModelSpec;

inline constexpr std::size_t kDefaultInteractionCap = 20;

struct SessionConfig {
  std::vector<ModelSpec> roster;
  std::size_t interaction_cap = kDefaultInteractionCap;
  std::shared_ptr<const ProblemBank> bank;
  std::optional<std::uint64_t> rng_seed;
  std::optional<ExperienceLevel> experience;

  /// Throws Error{InvalidConfig}.
  void validate() const;
};

enum class Phase { Instructions, TopicSelect, Confidence, Chat, RateSteps, Preference, Done };

std::string_view phase_name(Phase phase) noexcept;

/// "Model A", "Model B", ... for interaction positions within a round-set.
std::string position_label(std::size_t position);

/// Internal, unblinded session record. Never serialized toward clients.
struct SessionState {
  std::string session_id;
  Phase phase = Phase::Instructions;
  std::optional<Topic> topic;
  std::size_t round_index = 0;          // rounds completed so far across the session
  std::size_t round_set_index = 0;
  std::vector<std::size_t> model_order;  // permutation of roster indices for the current round-set
  std::optional<std::string> assigned_problem;
  std::set<std::string> used_problems;
  std::optional<Trace> pending_trace;
  std::vector<Trace> round_set_traces;  // finalized traces of the current round-set
  std::string trace_namespace;
  std::mt19937_64 rng;

  std::size_t position_in_set(std::size_t roster_size) const noexcept { return round_index % roster_size; }
};

/// What a participant's client may see. Built from SessionState by dropping
/// model identity; serialized by to_json().
struct SessionView {
  struct Step {
    std::size_t index;
    std::string user_query;
    std::string model_response;
    std::optional<int> correctness;
    std::optional<int> helpfulness;
  };
  struct Position {
    std::string label;
    std::string problem_statement;
    std::vector<Step> steps;
  };

  std::string session_id;
  Phase phase = Phase::Instructions;
  std::optional<Topic> topic;
  std::size_t rounds_completed = 0;
  std::optional<std::string> position;  // label of the model being evaluated
  std::optional<std::string> problem_statement;
  std::vector<Step> transcript;
  std::size_t exchanges = 0;
  std::size_t interaction_cap = 0;
  std::vector<ScaleKind> scales;          // scales the current phase asks for
  std::vector<Position> preference_positions;
  std::size_t problems_remaining = 0;     // unused problems in the chosen topic

  nlohmann::json to_json(const ScaleSet& scales_text = ScaleSet::defaults()) const;
};

using Clock = std::function<Timestamp()>;

struct EngineOptions {
  Clock clock;  // defaults to system_clock::now
};

/// Drives participants' surveys. Thread-safe: the session table is guarded by
/// a shared mutex and each session by its own mutex, so gateway calls for
/// different sessions run concurrently.
class SessionEngine {
 public:
  SessionEngine(gateway::ModelGateway& gateway, store::TraceStore& store, EngineOptions options = {});

  /// Returns the new session's id. Throws Error{InvalidConfig}.
  std::string create_session(SessionConfig config);

  void acknowledge_instructions(const std::string& session_id);
  void select_topic(const std::string& session_id, Topic topic);
  void record_confidence(const std::string& session_id, Score score);
  /// Returns the model's reply. Throws Error{WrongPhase | CapReached |
  /// EmptyQuery | GatewayError}.
  std::string send_message(const std::string& session_id, const std::string& text);
  void finish_interaction(const std::string& session_id);
  void submit_step_ratings(const std::string& session_id, const std::vector<std::pair<Score, Score>>& ratings);
  /// Ranks keyed by round-set position (0 = "Model A").
  void submit_preference(const std::string& session_id, const std::map<std::size_t, PreferenceRank>& ranks);

  SessionView get_state(const std::string& session_id) const;

  /// Unblinded copy for tests and admin tooling.
  SessionState inspect(const std::string& session_id) const;
  const SessionConfig& config_of(const std::string& session_id) const;
  std::size_t session_count() const;

 private:
  struct Session {
    SessionConfig config;
    SessionState state;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& session_id) const;
  Timestamp now() const;

  gateway::ModelGateway& gateway_;
  store::TraceStore& store_;
  EngineOptions options_;
  mutable std::shared_mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// 128-bit random hex token from the OS CSPRNG.
std::string random_token();

}  // namespace checkmate::session
