#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "checkmate/error.hpp"
#include "checkmate/session.hpp"
#include "fixtures.hpp"
#include "session_harness.hpp"

using namespace checkmate;
using namespace checkmate::session;
using fixtures::ratings;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Io;
}

Score confidence(int v) { return validate_score(ScaleKind::Confidence, v); }

/// Runs one round from Confidence to the rating submission, `exchanges` messages long.
void play_round(SessionEngine& engine, const std::string& id, std::size_t exchanges = 1) {
  engine.record_confidence(id, confidence(3));
  for (std::size_t i = 0; i < exchanges; ++i) engine.send_message(id, "q" + std::to_string(i));
  engine.finish_interaction(id);
  engine.submit_step_ratings(id, ratings(exchanges));
}

std::string start(fixtures::World& w, SessionConfig config, Topic topic = Topic::NumberTheory) {
  const std::string id = w.engine.create_session(std::move(config));
  w.engine.acknowledge_instructions(id);
  w.engine.select_topic(id, topic);
  return id;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("config validation") {
  fixtures::World w;
  auto c = w.config();
  c.interaction_cap = 0;
  CHECK(code_of([&] { w.engine.create_session(c); }) == Errc::InvalidConfig);
  c = w.config();
  c.roster.clear();
  CHECK(code_of([&] { w.engine.create_session(c); }) == Errc::InvalidConfig);
  c = w.config();
  c.roster[1].tag = c.roster[0].tag;
  CHECK(code_of([&] { w.engine.create_session(c); }) == Errc::InvalidConfig);
  c = w.config();
  c.bank = nullptr;
  CHECK(code_of([&] { w.engine.create_session(c); }) == Errc::InvalidConfig);
  CHECK(w.engine.session_count() == 0);
}

TEST_CASE("phases advance in order and reject out-of-phase calls") {
  fixtures::World w;
  const std::string id = w.engine.create_session(w.config());
  CHECK(w.engine.get_state(id).phase == Phase::Instructions);
  CHECK(code_of([&] { w.engine.select_topic(id, Topic::Algebra); }) == Errc::WrongPhase);
  w.engine.acknowledge_instructions(id);
  CHECK(code_of([&] { w.engine.send_message(id, "hi"); }) == Errc::WrongPhase);
  w.engine.select_topic(id, Topic::NumberTheory);

  auto st = w.engine.inspect(id);
  CHECK(st.phase == Phase::Confidence);
  REQUIRE(st.assigned_problem);
  CHECK(st.assigned_problem->rfind("number-theory-", 0) == 0);
  CHECK(st.used_problems.count(*st.assigned_problem));

  CHECK(code_of([&] { w.engine.record_confidence(id, validate_score(ScaleKind::Correctness, 3)); }) ==
        Errc::KindMismatch);
  w.engine.record_confidence(id, confidence(4));
  CHECK(w.engine.inspect(id).pending_trace->confidence_pre.value() == 4);
  CHECK(code_of([&] { w.engine.finish_interaction(id); }) == Errc::NoExchanges);
  CHECK(code_of([&] { w.engine.send_message(id, " \n\t"); }) == Errc::EmptyQuery);
  CHECK(w.engine.send_message(id, "ping") == "STUB:ping#1");
  CHECK(w.engine.send_message(id, "pong") == "STUB:pong#2");
  w.engine.finish_interaction(id);
  CHECK(w.engine.get_state(id).phase == Phase::RateSteps);
  CHECK(code_of([&] { w.engine.submit_step_ratings(id, ratings(1)); }) == Errc::LengthMismatch);
  CHECK(code_of([&] { w.engine.submit_step_ratings(id, {{confidence(1), confidence(1)}, {confidence(1), confidence(1)}}); }) ==
        Errc::KindMismatch);
  CHECK(w.store.event_count() == 0);
  w.engine.submit_step_ratings(id, ratings(2));
  CHECK(w.store.event_count() == 1);
  CHECK(w.engine.get_state(id).phase == Phase::Confidence);
  CHECK(w.engine.get_state(id).rounds_completed == 1);

  CHECK(code_of([&] { w.engine.get_state("nope"); }) == Errc::UnknownSession);
  CHECK(code_of([&] { w.engine.acknowledge_instructions("nope"); }) == Errc::UnknownSession);
}

TEST_CASE("the interaction cap") {
  fixtures::World w;
  const std::string id = start(w, w.config());
  w.engine.record_confidence(id, confidence(3));
  for (std::size_t i = 0; i < kDefaultInteractionCap; ++i) w.engine.send_message(id, "m" + std::to_string(i));
  CHECK(w.engine.get_state(id).exchanges == 20);
  CHECK(code_of([&] { w.engine.send_message(id, "one more"); }) == Errc::CapReached);
  CHECK(w.engine.inspect(id).pending_trace->steps.size() == 20);
  w.engine.finish_interaction(id);
  w.engine.submit_step_ratings(id, ratings(20));
  CHECK(std::get<Trace>(w.store.events().back().payload).steps.size() == 20);
}

TEST_CASE("a topic needs one unused problem per model") {
  fixtures::World w;
  auto config = w.config();
  std::vector<Problem> problems = {{"a-1", Topic::Algebra, "s", {}}, {"a-2", Topic::Algebra, "s", {}}};
  const auto others = fixtures::bank(3);
  for (const auto& p : others->problems()) {
    if (p.topic != Topic::Algebra) problems.push_back(p);
  }
  config.bank = std::make_shared<const ProblemBank>(problems);
  const std::string id = w.engine.create_session(config);
  w.engine.acknowledge_instructions(id);
  CHECK(code_of([&] { w.engine.select_topic(id, Topic::Algebra); }) == Errc::InsufficientProblems);
  CHECK(w.engine.get_state(id).phase == Phase::TopicSelect);
  CHECK(w.engine.inspect(id).used_problems.empty());
  w.engine.select_topic(id, Topic::Topology);
}

TEST_CASE("a round-set pairs each model once, then asks for a preference") {
  fixtures::World w;
  const std::string id = start(w, w.config());
  const auto order = w.engine.inspect(id).model_order;
  std::set<std::string> problems;
  for (std::size_t r = 0; r < 3; ++r) {
    const auto st = w.engine.inspect(id);
    CHECK(st.pending_trace->model_tag == gateway::stub_roster(3)[order[r]].tag);
    CHECK(problems.insert(*st.assigned_problem).second);
    CHECK(w.engine.get_state(id).position == position_label(r));
    play_round(w.engine, id, r + 1);
  }
  const SessionView view = w.engine.get_state(id);
  CHECK(view.phase == Phase::Preference);
  REQUIRE(view.preference_positions.size() == 3);
  CHECK(view.preference_positions[0].label == "Model A");
  CHECK(view.preference_positions[2].steps.size() == 3);

  CHECK(code_of([&] { w.engine.submit_preference(id, {{0, PreferenceRank(1)}, {1, PreferenceRank(2)}}); }) ==
        Errc::MissingRank);
  CHECK(code_of([&] {
          w.engine.submit_preference(id, {{0, PreferenceRank(1)}, {1, PreferenceRank(1)}, {2, PreferenceRank(1)},
                                          {3, PreferenceRank(1)}});
        }) == Errc::InvalidRank);
  CHECK(w.store.event_count() == 3);

  // Ties are allowed; ranks land on the model behind each position.
  w.engine.submit_preference(id, {{0, PreferenceRank(2)}, {1, PreferenceRank(1)}, {2, PreferenceRank(2)}});
  const auto events = w.store.events();
  const auto& pref = std::get<PreferenceRecord>(events.back().payload);
  const auto roster = gateway::stub_roster(3);
  CHECK(pref.ranks.at(roster[order[0]].tag).value() == 2);
  CHECK(pref.ranks.at(roster[order[1]].tag).value() == 1);
  CHECK(pref.ranks.at(roster[order[2]].tag).value() == 2);
  CHECK(pref.round_group_id == std::get<Trace>(events[0].payload).round_group_id);

  const auto st = w.engine.inspect(id);
  CHECK(st.phase == Phase::Confidence);
  CHECK(st.round_set_index == 1);
  CHECK(st.round_set_traces.empty());
}

TEST_CASE("all-tie preferences are accepted") {
  fixtures::World w;
  const std::string id = start(w, w.config());
  for (int r = 0; r < 3; ++r) play_round(w.engine, id);
  w.engine.submit_preference(id, {{0, PreferenceRank(1)}, {1, PreferenceRank(1)}, {2, PreferenceRank(1)}});
  const auto events = w.store.events();
  const auto& pref = std::get<PreferenceRecord>(events.back().payload);
  for (const auto& [tag, rank] : pref.ranks) CHECK(rank.value() == 1);
}

TEST_CASE("a topic runs out after complete round-sets") {
  fixtures::World w;
  // 9 problems per topic, 3 models: exactly three round-sets, then Done.
  const std::string id = start(w, w.config());
  for (int set = 0; set < 3; ++set) {
    for (int r = 0; r < 3; ++r) play_round(w.engine, id);
    w.engine.submit_preference(id, {{0, PreferenceRank(1)}, {1, PreferenceRank(2)}, {2, PreferenceRank(3)}});
  }
  CHECK(w.engine.get_state(id).phase == Phase::Done);
  CHECK(w.engine.inspect(id).used_problems.size() == 9);
  CHECK(w.store.event_count() == 12);
  CHECK(code_of([&] { w.engine.record_confidence(id, confidence(1)); }) == Errc::WrongPhase);
}

TEST_CASE("a roster of one skips the preference step") {
  fixtures::World w;
  const std::string id = start(w, w.config(1));
  play_round(w.engine, id);
  CHECK(w.engine.get_state(id).phase == Phase::Confidence);
  CHECK(w.engine.inspect(id).round_set_index == 1);
  for (int r = 0; r < 8; ++r) play_round(w.engine, id);
  CHECK(w.engine.get_state(id).phase == Phase::Done);
  CHECK(w.store.event_count() == 9);
}

TEST_CASE("model order is reshuffled between round-sets") {
  // Over many seeds the second round-set order differs from the first at least once.
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 20 && !changed; ++seed) {
    fixtures::World w;
    const std::string id = start(w, w.config(3, seed));
    const auto first = w.engine.inspect(id).model_order;
    for (int r = 0; r < 3; ++r) play_round(w.engine, id);
    w.engine.submit_preference(id, {{0, PreferenceRank(1)}, {1, PreferenceRank(1)}, {2, PreferenceRank(1)}});
    changed = w.engine.inspect(id).model_order != first;
  }
  CHECK(changed);
}

TEST_CASE("a seed fixes the persisted traces byte for byte") {
  auto run = [](std::uint64_t seed) {
    fixtures::World w(fixtures::fixed_clock());
    const std::string id = start(w, w.config(3, seed));
    for (int r = 0; r < 3; ++r) play_round(w.engine, id, 2);
    w.engine.submit_preference(id, {{0, PreferenceRank(3)}, {1, PreferenceRank(1)}, {2, PreferenceRank(2)}});
    const auto state = w.engine.inspect(id);
    // Session ids and write times are not seeded; the exported records are.
    w.store.export_dataset(w.dir.path() / "out");
    return std::make_pair(file_bytes(w.dir.path() / "out" / "traces.jsonl") +
                              file_bytes(w.dir.path() / "out" / "preferences.jsonl"),
                          state.model_order);
  };
  const auto a = run(7);
  const auto b = run(7);
  CHECK_FALSE(a.first.empty());
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(run(8).first != a.first);
}

TEST_CASE("reusing a seed in one store collides on trace ids") {
  fixtures::World w;
  const std::string first = start(w, w.config(1, 3));
  play_round(w.engine, first);
  const std::string second = start(w, w.config(1, 3));
  w.engine.record_confidence(second, confidence(3));
  w.engine.send_message(second, "other");
  w.engine.finish_interaction(second);
  CHECK(code_of([&] { w.engine.submit_step_ratings(second, ratings(1)); }) == Errc::Conflict);
  CHECK(w.engine.get_state(second).phase == Phase::RateSteps);
}

TEST_CASE("unseeded sessions get distinct ids and namespaces") {
  fixtures::World w;
  const std::string a = w.engine.create_session(w.config(3, std::nullopt));
  const std::string b = w.engine.create_session(w.config(3, std::nullopt));
  CHECK(a != b);
  CHECK(a.size() == 32);
  CHECK(w.engine.inspect(a).trace_namespace != w.engine.inspect(b).trace_namespace);
}

TEST_CASE("the participant view never names a model") {
  fixtures::World w;
  auto config = w.config();
  const std::string id = start(w, config);
  std::vector<std::string> hidden;
  for (const auto& m : config.roster) {
    hidden.push_back(m.tag);
    hidden.push_back(m.provider_model_name);
  }
  auto check_view = [&] {
    const std::string text = w.engine.get_state(id).to_json().dump();
    for (const auto& h : hidden) CHECK(text.find(h) == std::string::npos);
  };
  for (int r = 0; r < 3; ++r) {
    check_view();
    play_round(w.engine, id, 2);
  }
  check_view();
  const auto j = w.engine.get_state(id).to_json();
  CHECK(j["phase"] == "preference");
  CHECK(j.contains("preference"));
}

TEST_CASE("random operation sequences keep the engine's invariants") {
  fixtures::TempDir dir;
  const auto stats = harness::run_safety(300, 2024, dir.path());
  for (const auto& v : stats.violations) INFO(v);
  CHECK(stats.violations.empty());
  CHECK(stats.sequences == 300);
  CHECK(stats.traces > 300);
  CHECK(stats.preferences > 0);
  CHECK(stats.cap_hits > 0);
  CHECK(stats.rejected > 0);
}
