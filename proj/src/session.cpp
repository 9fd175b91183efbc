#include "checkmate/session.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <nlohmann/json.hpp>
#include <openssl/rand.h>

#include "checkmate/error.hpp"

namespace checkmate::session {
namespace {

using json = nlohmann::json;

// Unbiased draw in [0, n) straight from the engine, so results do not depend
// on the standard library's distribution implementation.
std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

std::vector<std::size_t> shuffled_order(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
  return order;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string padded(std::size_t v) {
  std::string s = std::to_string(v);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

std::vector<const Problem*> unused_in_topic(const SessionConfig& config, const SessionState& state) {
  std::vector<const Problem*> out;
  for (const Problem* p : config.bank->by_topic(*state.topic)) {
    if (!state.used_problems.count(p->id)) out.push_back(p);
  }
  return out;
}

void require_phase(const SessionState& state, Phase expected) {
  if (state.phase != expected) {
    throw Error(Errc::WrongPhase, "session is in phase '" + std::string(phase_name(state.phase)) + "', not '" +
                                      std::string(phase_name(expected)) + "'");
  }
}

// Assigns the next problem and model and opens the round at Confidence.
void start_round(const SessionConfig& config, SessionState& state) {
  auto candidates = unused_in_topic(config, state);
  if (candidates.empty()) throw Error(Errc::InsufficientProblems, "no unused problems left in topic");
  const Problem* problem = candidates[uniform_below(state.rng, candidates.size())];
  state.assigned_problem = problem->id;
  state.used_problems.insert(problem->id);

  const std::size_t position = state.position_in_set(config.roster.size());
  Trace trace;
  trace.trace_id = state.trace_namespace + "-r" + padded(state.round_index);
  trace.topic = *state.topic;
  trace.problem_id = problem->id;
  trace.model_tag = config.roster[state.model_order[position]].tag;
  trace.round_index = state.round_index;
  trace.round_group_id = state.trace_namespace + "-g" + padded(state.round_set_index);
  trace.experience = config.experience;
  state.pending_trace = std::move(trace);
  state.phase = Phase::Confidence;
}

// After a full round-set: reshuffle and continue in the same topic, or stop.
void begin_next_round_set(const SessionConfig& config, SessionState& state) {
  ++state.round_set_index;
  state.round_set_traces.clear();
  state.pending_trace.reset();
  state.assigned_problem.reset();
  state.model_order = shuffled_order(state.rng, config.roster.size());
  if (unused_in_topic(config, state).size() >= config.roster.size()) {
    start_round(config, state);
  } else {
    state.phase = Phase::Done;
  }
}

}  // namespace

void SessionConfig::validate() const {
  if (roster.empty()) throw Error(Errc::InvalidConfig, "roster must contain at least one model");
  if (interaction_cap < 1) throw Error(Errc::InvalidConfig, "interaction cap must be >= 1");
  if (!bank) throw Error(Errc::InvalidConfig, "problem bank missing");
  std::set<std::string> tags;
  for (const auto& spec : roster) {
    try {
      spec.validate();
    } catch (const Error& e) {
      throw Error(Errc::InvalidConfig, e.detail());
    }
    if (!tags.insert(spec.tag).second) throw Error(Errc::InvalidConfig, "roster tags must be distinct");
  }
}

std::string_view phase_name(Phase phase) noexcept {
  switch (phase) {
    case Phase::Instructions: return "instructions";
    case Phase::TopicSelect: return "topic_select";
    case Phase::Confidence: return "confidence";
    case Phase::Chat: return "chat";
    case Phase::RateSteps: return "rate_steps";
    case Phase::Preference: return "preference";
    case Phase::Done: return "done";
  }
  return "";
}

std::string position_label(std::size_t position) {
  std::string suffix;
  std::size_t n = position;
  do {
    suffix.insert(suffix.begin(), static_cast<char>('A' + n % 26));
    n = n / 26;
  } while (n-- > 0);
  return "Model " + suffix;
}

std::string random_token() {
  std::array<unsigned char, 16> bytes{};
  if (RAND_bytes(bytes.data(), static_cast<int>(bytes.size())) != 1) {
    throw Error(Errc::Io, "system random source unavailable");
  }
  std::string out;
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned char b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

SessionEngine::SessionEngine(gateway::ModelGateway& gateway, store::TraceStore& store, EngineOptions options)
    : gateway_(gateway), store_(store), options_(std::move(options)) {}

Timestamp SessionEngine::now() const {
  return options_.clock ? options_.clock() : std::chrono::system_clock::now();
}

std::shared_ptr<SessionEngine::Session> SessionEngine::find(const std::string& session_id) const {
  std::shared_lock lock(table_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no such session");
  return it->second;
}

std::string SessionEngine::create_session(SessionConfig config) {
  config.validate();
  auto session = std::make_shared<Session>();
  SessionState& state = session->state;

  std::uint64_t seed;
  if (config.rng_seed) {
    seed = *config.rng_seed;
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  state.rng.seed(seed);
  state.trace_namespace = hex64(state.rng());
  state.model_order = shuffled_order(state.rng, config.roster.size());
  state.phase = Phase::Instructions;
  session->config = std::move(config);

  std::unique_lock lock(table_mutex_);
  do {
    state.session_id = random_token();
  } while (sessions_.count(state.session_id));
  sessions_.emplace(state.session_id, session);
  return state.session_id;
}

void SessionEngine::acknowledge_instructions(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::Instructions);
  s->state.phase = Phase::TopicSelect;
}

void SessionEngine::select_topic(const std::string& session_id, Topic topic) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::TopicSelect);
  SessionState next = s->state;
  next.topic = topic;
  if (unused_in_topic(s->config, next).size() < s->config.roster.size()) {
    throw Error(Errc::InsufficientProblems, "topic '" + std::string(topic_name(topic)) + "' has fewer than " +
                                                std::to_string(s->config.roster.size()) + " unused problems");
  }
  start_round(s->config, next);
  s->state = std::move(next);
}

void SessionEngine::record_confidence(const std::string& session_id, Score score) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::Confidence);
  if (score.kind() != ScaleKind::Confidence) {
    throw Error(Errc::KindMismatch, "expected a confidence score, got " + std::string(scale_kind_name(score.kind())));
  }
  s->state.pending_trace->confidence_pre = score;
  s->state.phase = Phase::Chat;
}

std::string SessionEngine::send_message(const std::string& session_id, const std::string& text) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::Chat);
  Trace& pending = *s->state.pending_trace;
  if (pending.steps.size() >= s->config.interaction_cap) {
    throw Error(Errc::CapReached, "interaction limit of " + std::to_string(s->config.interaction_cap) + " reached");
  }
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
    throw Error(Errc::EmptyQuery, "query is empty");
  }

  gateway::Transcript transcript;
  for (const auto& step : pending.steps) {
    transcript.turns.push_back({gateway::Role::User, step.user_query});
    transcript.turns.push_back({gateway::Role::Assistant, step.model_response});
  }
  transcript.turns.push_back({gateway::Role::User, text});

  const ModelSpec& spec = s->config.roster[s->state.model_order[s->state.position_in_set(s->config.roster.size())]];
  std::string response;
  try {
    response = gateway_.generate(spec, transcript);
  } catch (const Error& e) {
    const bool timed_out = e.code() == Errc::Timeout;
    throw Error(Errc::GatewayError, timed_out ? "the assistant took too long to respond; please try again"
                                              : "the assistant is unavailable; please try again");
  } catch (const std::exception&) {
    throw Error(Errc::GatewayError, "the assistant is unavailable; please try again");
  }

  InteractionStep step;
  step.index = pending.steps.size();
  step.user_query = text;
  step.model_response = response;
  pending.steps.push_back(std::move(step));
  return response;
}

void SessionEngine::finish_interaction(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::Chat);
  if (s->state.pending_trace->steps.empty()) throw Error(Errc::NoExchanges, "send at least one message first");
  s->state.phase = Phase::RateSteps;
}

void SessionEngine::submit_step_ratings(const std::string& session_id,
                                        const std::vector<std::pair<Score, Score>>& ratings) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::RateSteps);
  const SessionConfig& config = s->config;
  SessionState next = s->state;
  Trace& trace = *next.pending_trace;
  if (ratings.size() != trace.steps.size()) {
    throw Error(Errc::LengthMismatch, "expected " + std::to_string(trace.steps.size()) + " ratings, got " +
                                          std::to_string(ratings.size()));
  }
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const auto& [correctness, helpfulness] = ratings[i];
    if (correctness.kind() != ScaleKind::Correctness || helpfulness.kind() != ScaleKind::Helpfulness) {
      throw Error(Errc::KindMismatch, "rating " + std::to_string(i) + " must be (correctness, helpfulness)");
    }
    trace.steps[i].correctness = correctness;
    trace.steps[i].helpfulness = helpfulness;
  }
  trace.created_at = now();

  store_.append_event(store::StoreEvent::for_trace(session_id, trace));

  next.round_set_traces.push_back(std::move(trace));
  next.pending_trace.reset();
  next.assigned_problem.reset();
  ++next.round_index;

  if (next.position_in_set(config.roster.size()) != 0) {
    start_round(config, next);
  } else if (config.roster.size() >= 2) {
    next.phase = Phase::Preference;
  } else {
    begin_next_round_set(config, next);
  }
  s->state = std::move(next);
}

void SessionEngine::submit_preference(const std::string& session_id,
                                      const std::map<std::size_t, PreferenceRank>& ranks) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  require_phase(s->state, Phase::Preference);
  const SessionConfig& config = s->config;
  const std::size_t n = config.roster.size();
  if (s->state.round_set_traces.size() != n) {
    throw Error(Errc::WrongPhase, "preferences need one finished trace per model");
  }
  for (const auto& [position, rank] : ranks) {
    if (position >= n) throw Error(Errc::InvalidRank, "no " + position_label(position) + " in this round");
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (!ranks.count(p)) throw Error(Errc::MissingRank, position_label(p) + " has no rank");
  }

  PreferenceRecord record;
  record.round_group_id = s->state.round_set_traces.front().round_group_id;
  for (const auto& [position, rank] : ranks) {
    record.ranks.emplace(config.roster[s->state.model_order[position]].tag, rank);
  }
  store_.append_event(store::StoreEvent::for_preference(session_id, record));

  SessionState next = s->state;
  begin_next_round_set(config, next);
  s->state = std::move(next);
}

SessionView SessionEngine::get_state(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  const SessionState& st = s->state;
  const SessionConfig& config = s->config;

  auto to_view_steps = [](const std::vector<InteractionStep>& steps) {
    std::vector<SessionView::Step> out;
    for (const auto& step : steps) {
      out.push_back({step.index, step.user_query, step.model_response,
                     step.correctness ? std::optional<int>(step.correctness->value()) : std::nullopt,
                     step.helpfulness ? std::optional<int>(step.helpfulness->value()) : std::nullopt});
    }
    return out;
  };
  auto statement_of = [&](const std::string& problem_id) -> std::string {
    const Problem* p = config.bank->find(problem_id);
    return p ? p->statement : std::string();
  };

  SessionView view;
  view.session_id = st.session_id;
  view.phase = st.phase;
  view.topic = st.topic;
  view.rounds_completed = st.round_index;
  view.interaction_cap = config.interaction_cap;
  if (st.topic) view.problems_remaining = unused_in_topic(config, st).size();

  if (st.pending_trace) {
    view.position = position_label(st.position_in_set(config.roster.size()));
    view.problem_statement = statement_of(st.pending_trace->problem_id);
    view.transcript = to_view_steps(st.pending_trace->steps);
    view.exchanges = st.pending_trace->steps.size();
  }
  if (st.phase == Phase::Confidence) view.scales = {ScaleKind::Confidence};
  if (st.phase == Phase::RateSteps) view.scales = {ScaleKind::Correctness, ScaleKind::Helpfulness};
  if (st.phase == Phase::Preference) {
    for (std::size_t p = 0; p < st.round_set_traces.size(); ++p) {
      const Trace& t = st.round_set_traces[p];
      view.preference_positions.push_back({position_label(p), statement_of(t.problem_id), to_view_steps(t.steps)});
    }
  }
  return view;
}

SessionState SessionEngine::inspect(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->state;
}

const SessionConfig& SessionEngine::config_of(const std::string& session_id) const { return find(session_id)->config; }

std::size_t SessionEngine::session_count() const {
  std::shared_lock lock(table_mutex_);
  return sessions_.size();
}

json SessionView::to_json(const ScaleSet& scales_text) const {
  auto steps_json = [](const std::vector<Step>& steps) {
    json arr = json::array();
    for (const auto& s : steps) {
      json js = {{"index", s.index}, {"user_query", s.user_query}, {"model_response", s.model_response}};
      if (s.correctness) js["correctness"] = *s.correctness;
      if (s.helpfulness) js["helpfulness"] = *s.helpfulness;
      arr.push_back(std::move(js));
    }
    return arr;
  };

  json doc = {{"session_id", session_id},
              {"phase", phase_name(phase)},
              {"rounds_completed", rounds_completed},
              {"interaction_cap", interaction_cap},
              {"exchanges", exchanges},
              {"problems_remaining", problems_remaining}};
  doc["topic"] = topic ? json(topic_name(*topic)) : json(nullptr);
  if (phase == Phase::TopicSelect) {
    json topics = json::array();
    for (Topic t : kAllTopics) topics.push_back(topic_name(t));
    doc["topics"] = std::move(topics);
  }
  if (position) doc["position"] = *position;
  if (problem_statement) doc["problem_statement"] = *problem_statement;
  doc["transcript"] = steps_json(transcript);

  json scale_list = json::array();
  for (ScaleKind kind : scales) {
    const auto& def = scales_text.scale(kind);
    scale_list.push_back({{"kind", scale_kind_name(kind)}, {"question", def.question}, {"labels", def.labels}});
  }
  doc["scales"] = std::move(scale_list);

  if (phase == Phase::Preference) {
    json positions = json::array();
    for (const auto& p : preference_positions) {
      positions.push_back({{"label", p.label}, {"problem_statement", p.problem_statement}, {"steps", steps_json(p.steps)}});
    }
    doc["preference"] = {{"question", scales_text.preference_question()},
                         {"rank_options", {1, 2, 3}},
                         {"positions", std::move(positions)}};
  }
  return doc;
}

}  // namespace checkmate::session
