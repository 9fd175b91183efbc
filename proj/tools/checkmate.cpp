// checkmate: survey server, dataset export and analysis tool.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "checkmate/annotation_sheet.hpp"
#include "checkmate/error.hpp"
#include "checkmate/gateway.hpp"
#include "checkmate/http_api.hpp"
#include "checkmate/problem_bank.hpp"
#include "checkmate/report.hpp"
#include "checkmate/session.hpp"
#include "checkmate/taxonomy.hpp"
#include "checkmate/trace_store.hpp"

namespace fs = std::filesystem;
using namespace checkmate;

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : fallback;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    store::write_file_atomic(path, text);
  }
}

Dataset load_dataset(const std::string& dir, const std::string& field_map) {
  FieldMap fields;
  if (!field_map.empty()) fields = FieldMap::from_json(read_file(field_map));
  return store::import_dataset(dir, fields);
}

store::StatementLookup statements_from(const std::string& bank_dir) {
  store::StatementLookup out;
  if (bank_dir.empty()) return out;
  for (const auto& p : load_problem_bank(bank_dir, {false}).problems()) out.emplace(p.id, p.statement);
  return out;
}

std::vector<taxonomy::AnnotatedSheet> read_sheets(const std::vector<std::string>& paths) {
  std::vector<taxonomy::AnnotatedSheet> sheets;
  for (const auto& p : paths) sheets.push_back({fs::path(p).stem().string(), read_file(p)});
  return sheets;
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidConfig, "BIND_ADDR must be host:port");
  try {
    return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, "BIND_ADDR must be host:port");
  }
}

int serve(const std::string& bind, const std::string& data_dir, const std::string& bank_dir,
          const std::string& roster_path, bool stub, std::size_t cap, std::size_t max_in_flight) {
  // Signals are taken synchronously below; block them before any thread starts.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto bank = std::make_shared<const ProblemBank>(load_problem_bank(bank_dir));
  std::vector<gateway::ModelSpec> roster =
      stub ? gateway::stub_roster() : roster_path.empty() ? gateway::default_roster() : gateway::parse_roster(read_file(roster_path));

  store::TraceStore store(data_dir);
  gateway::ModelGateway gateway(gateway::make_http_transport(), gateway::GatewayOptions::from_env(gateway::process_env()),
                                gateway::process_env());
  session::SessionEngine engine(gateway, store);

  api::ApiConfig config;
  config.roster = roster;
  config.bank = bank;
  config.interaction_cap = cap;
  config.admin_token = env_or("ADMIN_TOKEN", "");
  if (auto origin = env_or("UI_ORIGIN", ""); !origin.empty()) config.ui_origin = origin;
  config.max_in_flight = max_in_flight;
  for (const auto& spec : roster) {
    if (!gateway.has_credentials(spec)) spdlog::warn("a roster model has no credentials in {}", spec.api_key_env);
  }
  if (config.admin_token.empty()) spdlog::warn("ADMIN_TOKEN is unset; export routes are disabled");

  api::Api api(engine, store, gateway, config);
  api::HttpServer server(api);
  const auto [host, port] = split_bind(bind);
  const int bound = server.start(host, port);
  spdlog::info("serving on {}:{} with {} problems, store {}", host, bound, bank->size(), store.log_path().string());

  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received; draining", sig);
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blinded interactive evaluation of conversational models"};
  app.require_subcommand(1);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the survey HTTP server");
  std::string bind = env_or("BIND_ADDR", "127.0.0.1:8080");
  std::string data_dir = env_or("DATA_DIR", "./store");
  std::string bank_dir = "data/problems";
  std::string roster_path;
  bool stub = false;
  std::size_t cap = session::kDefaultInteractionCap;
  std::size_t max_in_flight = 64;
  serve_cmd->add_option("--bind", bind, "host:port (BIND_ADDR)");
  serve_cmd->add_option("--data-dir", data_dir, "Trace store directory (DATA_DIR)");
  serve_cmd->add_option("--bank", bank_dir, "Problem bank directory");
  serve_cmd->add_option("--roster", roster_path, "Roster JSON file");
  serve_cmd->add_flag("--stub", stub, "Use the offline stub models");
  serve_cmd->add_option("--cap", cap, "Interaction cap per model");
  serve_cmd->add_option("--max-in-flight", max_in_flight, "Global in-flight request cap");

  // export
  auto* export_cmd = app.add_subcommand("export", "Write traces.jsonl and preferences.jsonl from a store");
  std::string out_dir;
  export_cmd->add_option("--data-dir", data_dir, "Trace store directory");
  export_cmd->add_option("--out", out_dir, "Output directory")->required();

  // sheet
  auto* sheet_cmd = app.add_subcommand("sheet", "Export a blank annotation sheet for a dataset");
  std::string dataset_dir, field_map, out_path;
  std::string sheet_bank;
  sheet_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  sheet_cmd->add_option("--field-map", field_map, "Field map JSON for foreign datasets");
  sheet_cmd->add_option("--bank", sheet_bank, "Problem bank for statements");
  sheet_cmd->add_option("--out", out_path, "Output CSV (default stdout)");

  // merge-sheets
  auto* merge_cmd = app.add_subcommand("merge-sheets", "Merge annotated sheets and report conflicts");
  std::vector<std::string> sheet_paths;
  std::string conflicts_path;
  merge_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  merge_cmd->add_option("--field-map", field_map, "Field map JSON");
  merge_cmd->add_option("--bank", sheet_bank, "Problem bank for statements");
  merge_cmd->add_option("sheets", sheet_paths, "Annotated CSV files (annotator = file stem)")->required();
  merge_cmd->add_option("--out", out_path, "Merged annotations JSON (default stdout)");
  merge_cmd->add_option("--conflicts", conflicts_path, "Conflict report CSV");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Run one analysis over a dataset");
  std::string analysis_name;
  bool no_zero_filter = false;
  std::string std_name = "sample";
  std::vector<std::string> annotation_paths;
  std::string slice = "step";
  double maybe_weight = 1.0;
  std::optional<std::uint64_t> seed;
  std::string json_path;
  analyze_cmd->add_option("analysis", analysis_name, "corr|summary|prefs|profiles|stopping|dynamics|topics")
      ->required()
      ->check(CLI::IsMember({"corr", "summary", "prefs", "profiles", "stopping", "dynamics", "topics"}));
  analyze_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  analyze_cmd->add_option("--field-map", field_map, "Field map JSON");
  analyze_cmd->add_flag("--no-zero-filter", no_zero_filter, "Keep steps rated 0 on correctness");
  analyze_cmd->add_option("--std", std_name, "sample|population")->check(CLI::IsMember({"sample", "population"}));
  analyze_cmd->add_option("--annotations", annotation_paths, "Annotated sheet CSV (repeatable)");
  analyze_cmd->add_option("--bank", sheet_bank, "Problem bank used when the sheets were exported");
  analyze_cmd->add_option("--slice", slice, "Profile slicing: step|experience")->check(CLI::IsMember({"step", "experience"}));
  analyze_cmd->add_option("--maybe-weight", maybe_weight, "Weight of maybe marks in profiles")->check(CLI::Range(0.0, 1.0));
  analyze_cmd->add_option("--seed", seed, "Seed for sampling analyses (none sample today)");
  analyze_cmd->add_option("--out", out_path, "CSV table (default stdout)");
  analyze_cmd->add_option("--json", json_path, "Results JSON file");

  // bank check
  auto* bank_cmd = app.add_subcommand("bank", "Problem bank tools");
  auto* bank_check = bank_cmd->add_subcommand("check", "Validate a problem bank directory");
  bool lenient = false;
  bank_check->add_option("dir", bank_dir, "Bank directory");
  bank_check->add_flag("--lenient", lenient, "Skip the 9-per-topic shape check");
  bank_cmd->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(bind, data_dir, bank_dir, roster_path, stub, cap, max_in_flight);

    if (*export_cmd) {
      store::TraceStore store(data_dir);
      const Dataset d = store.export_dataset(out_dir);
      std::cout << d.traces.size() << " traces, " << d.preferences.size() << " preferences written to " << out_dir << "\n";
      return 0;
    }

    if (*sheet_cmd) {
      emit(store::export_annotation_sheet(load_dataset(dataset_dir, field_map), statements_from(sheet_bank)), out_path);
      return 0;
    }

    if (*merge_cmd) {
      const Dataset d = load_dataset(dataset_dir, field_map);
      const auto result = taxonomy::merge_sheets(read_sheets(sheet_paths), d, statements_from(sheet_bank));
      nlohmann::json annotations = nlohmann::json::array();
      for (const auto& a : result.annotations) {
        nlohmann::json marks = nlohmann::json::object();
        for (const auto& info : taxonomy::categories()) marks[std::string(info.name)] = std::string(taxonomy::mark_cell(a.mark(info.id)));
        annotations.push_back({{"trace_id", a.query_ref.trace_id},
                               {"step_index", a.query_ref.step_index},
                               {"marks", marks},
                               {"other_text", a.other_text ? nlohmann::json(*a.other_text) : nlohmann::json(nullptr)}});
      }
      emit(nlohmann::json{{"annotations", annotations}, {"conflicts", result.conflicts.size()},
                          {"maybe_flags", result.maybe_flags.size()}}
                   .dump(2) + "\n",
           out_path);
      if (!conflicts_path.empty()) store::write_file_atomic(conflicts_path, taxonomy::conflicts_to_csv(result.conflicts));
      std::cerr << result.annotations.size() << " queries merged, " << result.conflicts.size() << " conflicts, "
                << result.maybe_flags.size() << " maybe flags\n";
      return 0;
    }

    if (*analyze_cmd) {
      const Dataset d = load_dataset(dataset_dir, field_map);
      analysis::ReportOptions options;
      options.filter.exclude_correctness_zero = !no_zero_filter;
      options.convention = std_name == "population" ? analysis::StdConvention::Population : analysis::StdConvention::Sample;
      options.slicer = slice == "experience" ? analysis::ProfileSlicer::ByExperience : analysis::ProfileSlicer::ByStepIndex;
      options.maybe_weight = maybe_weight;
      options.seed = seed;
      if (!annotation_paths.empty()) {
        auto merged = taxonomy::merge_sheets(read_sheets(annotation_paths), d, statements_from(sheet_bank));
        if (!merged.conflicts.empty()) {
          std::cerr << merged.conflicts.size() << " conflicting queries left out; run merge-sheets for details\n";
        }
        options.annotations = std::move(merged.annotations);
      }
      const auto report = analysis::run_report(analysis::parse_report(analysis_name), d, options);
      emit(report.csv, out_path);
      if (!json_path.empty()) store::write_file_atomic(json_path, report.results.dump(2) + "\n");
      return 0;
    }

    if (*bank_check) {
      const ProblemBank bank = load_problem_bank(bank_dir, {!lenient});
      for (const auto& [topic, n] : bank.topic_counts()) std::cout << topic_name(topic) << ": " << n << "\n";
      std::cout << bank.size() << " problems OK\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
