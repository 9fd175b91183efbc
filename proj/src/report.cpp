#include "checkmate/report.hpp"

#include <cstdio>

#include "checkmate/csv.hpp"
#include "checkmate/error.hpp"

namespace checkmate::analysis {

using json = nlohmann::json;

namespace {

constexpr std::pair<ReportKind, std::string_view> kNames[] = {
    {ReportKind::Corr, "corr"},         {ReportKind::Summary, "summary"},   {ReportKind::Prefs, "prefs"},
    {ReportKind::Profiles, "profiles"}, {ReportKind::Stopping, "stopping"}, {ReportKind::Dynamics, "dynamics"},
    {ReportKind::Topics, "topics"},
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json mean_std_json(const MeanStd& m) { return {{"n", m.n}, {"mean", m.mean}, {"std", m.std}}; }

json quartiles_json(const std::optional<Quartiles>& q) {
  if (!q) return nullptr;
  return {{"min", q->min}, {"q1", q->q1}, {"median", q->median}, {"q3", q->q3}, {"max", q->max}};
}

void quartile_cells(std::vector<std::string>& row, const std::optional<Quartiles>& q) {
  if (!q) {
    row.insert(row.end(), 5, "");
    return;
  }
  for (double v : {q->min, q->q1, q->median, q->q3, q->max}) row.push_back(num(v));
}

}  // namespace

std::string_view report_name(ReportKind kind) noexcept {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "corr";
}

ReportKind parse_report(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw Error(Errc::Parse, "unknown analysis '" + std::string(name) + "'");
}

Report run_report(ReportKind kind, const Dataset& dataset, const ReportOptions& options) {
  Report out;
  json& r = out.results;
  r["analysis"] = report_name(kind);
  r["zero_filter"] = options.filter.exclude_correctness_zero;
  r["std_convention"] = options.convention == StdConvention::Sample ? "sample" : "population";
  r["seed"] = options.seed ? json(*options.seed) : json(nullptr);
  r["traces"] = dataset.traces.size();
  r["steps"] = dataset.step_count();

  std::string& csv = out.csv;
  switch (kind) {
    case ReportKind::Corr: {
      std::size_t n = 0;
      for (const auto& t : dataset.traces) {
        for (const auto& s : t.steps) n += s.rated() && !(options.filter.exclude_correctness_zero && s.zero_correctness());
      }
      const double value = correctness_helpfulness_correlation(dataset, options.filter);
      csv::append_row(csv, {"statistic", "value", "n"});
      csv::append_row(csv, {"pearson_r", num(value), std::to_string(n)});
      r["pearson_r"] = value;
      r["n"] = n;
      break;
    }
    case ReportKind::Summary: {
      csv::append_row(csv, {"model_tag", "scale", "n", "mean", "std", "h0", "h1", "h2", "h3", "h4", "h5", "h6"});
      json models = json::array();
      for (const auto& m : rating_summary_by_model(dataset, options.filter, options.convention)) {
        json entry = {{"model_tag", m.model_tag}};
        for (const auto& [scale, summary] : {std::pair{"correctness", &m.correctness}, {"helpfulness", &m.helpfulness}}) {
          std::vector<std::string> row = {m.model_tag, scale, std::to_string(summary->stats.n), num(summary->stats.mean),
                                          num(summary->stats.std)};
          for (auto count : summary->histogram) row.push_back(std::to_string(count));
          csv::append_row(csv, row);
          entry[scale] = mean_std_json(summary->stats);
          entry[scale]["histogram"] = summary->histogram;
        }
        models.push_back(entry);
      }
      r["models"] = models;
      break;
    }
    case ReportKind::Prefs: {
      const PreferenceCounts counts = preference_rank_counts(dataset);
      csv::append_row(csv, {"model_tag", "rank1", "rank2", "rank3"});
      json models = json::array();
      for (const auto& t : counts.per_model) {
        csv::append_row(csv, {t.model_tag, std::to_string(t.rank_counts[0]), std::to_string(t.rank_counts[1]),
                              std::to_string(t.rank_counts[2])});
        models.push_back({{"model_tag", t.model_tag}, {"rank_counts", t.rank_counts}});
      }
      r["models"] = models;
      r["records"] = counts.records;
      r["records_with_ties"] = counts.records_with_ties;
      r["tie_ratio"] = counts.tie_ratio();
      break;
    }
    case ReportKind::Profiles: {
      ProfileOptions po{options.filter, options.maybe_weight};
      csv::append_row(csv, {"slice", "denominator", "category", "count", "proportion"});
      json slices = json::array();
      for (const auto& p : query_profiles(dataset, options.annotations, options.slicer, po)) {
        json counts = json::object();
        for (const auto& [category, count] : p.counts) {
          csv::append_row(csv, {p.slice_label, std::to_string(p.denominator), std::string(taxonomy::category_name(category)),
                                num(count), num(p.proportion(category))});
          counts[std::string(taxonomy::category_name(category))] = count;
        }
        slices.push_back({{"slice", p.slice_label}, {"denominator", p.denominator}, {"counts", counts}});
      }
      r["slicer"] = options.slicer == ProfileSlicer::ByStepIndex ? "step" : "experience";
      r["maybe_weight"] = options.maybe_weight;
      r["annotations"] = options.annotations.size();
      r["slices"] = slices;
      break;
    }
    case ReportKind::Stopping: {
      r["zero_filter"] = false;  // always computed on every rated step
      csv::append_row(csv, {"correctness", "helpfulness", "total_steps", "terminal_steps", "ratio"});
      json cells = json::array();
      for (const auto& c : stopping_stats(dataset)) {
        csv::append_row(csv, {std::to_string(c.correctness), std::to_string(c.helpfulness), std::to_string(c.total_steps),
                              std::to_string(c.terminal_steps), num(c.ratio())});
        cells.push_back({{"correctness", c.correctness},
                         {"helpfulness", c.helpfulness},
                         {"total_steps", c.total_steps},
                         {"terminal_steps", c.terminal_steps},
                         {"ratio", c.ratio()}});
      }
      r["cells"] = cells;
      break;
    }
    case ReportKind::Dynamics: {
      csv::append_row(csv, {"step_index", "n_active", "n_rated", "c_min", "c_q1", "c_median", "c_q3", "c_max", "h_min",
                            "h_q1", "h_median", "h_q3", "h_max"});
      json steps = json::array();
      for (const auto& d : rating_dynamics(dataset, options.filter)) {
        std::vector<std::string> row = {std::to_string(d.step_index), std::to_string(d.n_active), std::to_string(d.n_rated)};
        quartile_cells(row, d.correctness);
        quartile_cells(row, d.helpfulness);
        csv::append_row(csv, row);
        steps.push_back({{"step_index", d.step_index},
                         {"n_active", d.n_active},
                         {"n_rated", d.n_rated},
                         {"correctness", quartiles_json(d.correctness)},
                         {"helpfulness", quartiles_json(d.helpfulness)}});
      }
      r["steps_by_index"] = steps;
      break;
    }
    case ReportKind::Topics: {
      csv::append_row(csv, {"model_tag", "topic", "problems", "n", "correctness_mean", "correctness_std",
                            "helpfulness_mean", "helpfulness_std"});
      json rows = json::array();
      for (const auto& t : ratings_by_topic(dataset, options.filter, options.convention)) {
        csv::append_row(csv, {t.model_tag, std::string(topic_name(t.topic)), std::to_string(t.problems),
                              std::to_string(t.correctness.n), num(t.correctness.mean), num(t.correctness.std),
                              num(t.helpfulness.mean), num(t.helpfulness.std)});
        rows.push_back({{"model_tag", t.model_tag},
                        {"topic", topic_name(t.topic)},
                        {"problems", t.problems},
                        {"correctness", mean_std_json(t.correctness)},
                        {"helpfulness", mean_std_json(t.helpfulness)}});
      }
      r["rows"] = rows;
      break;
    }
  }
  return out;
}

}  // namespace checkmate::analysis
