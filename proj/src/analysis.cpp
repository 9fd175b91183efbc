#include "checkmate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "checkmate/error.hpp"

namespace checkmate::analysis {
namespace {

bool keep(const InteractionStep& step, const AnalysisFilter& filter) {
  if (!step.rated()) return false;
  return !(filter.exclude_correctness_zero && step.zero_correctness());
}

ScaleSummary summarize(const std::vector<double>& values, StdConvention convention) {
  ScaleSummary out;
  out.stats = mean_std(values, convention);
  for (double v : values) ++out.histogram[static_cast<std::size_t>(v)];
  return out;
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " values");
  }
  if (xs.size() < 2) throw Error(Errc::LengthMismatch, "need at least 2 pairs");

  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;

  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::DegenerateInput, "constant sequence has no correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correctness_helpfulness_correlation(const Dataset& dataset, AnalysisFilter filter) {
  std::vector<double> c, h;
  for (const auto& trace : dataset.traces) {
    for (const auto& step : trace.steps) {
      if (!keep(step, filter)) continue;
      c.push_back(step.correctness->value());
      h.push_back(step.helpfulness->value());
    }
  }
  if (c.size() < 2) throw Error(Errc::DegenerateInput, "fewer than 2 rated steps after filtering");
  return pearson(c, h);
}

MeanStd mean_std(std::span<const double> values, StdConvention convention) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const std::size_t denom = convention == StdConvention::Sample ? values.size() - 1 : values.size();
  out.std = denom > 0 ? std::sqrt(ss / static_cast<double>(denom)) : 0.0;
  return out;
}

std::vector<ModelSummary> rating_summary_by_model(const Dataset& dataset, AnalysisFilter filter,
                                                  StdConvention convention) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_model;
  for (const auto& trace : dataset.traces) {
    for (const auto& step : trace.steps) {
      if (!keep(step, filter)) continue;
      auto& [c, h] = by_model[trace.model_tag];
      c.push_back(step.correctness->value());
      h.push_back(step.helpfulness->value());
    }
  }
  if (by_model.empty()) throw Error(Errc::EmptyAfterFilter, "no rated steps after filtering");

  std::vector<ModelSummary> out;
  for (const auto& [tag, values] : by_model) {
    out.push_back({tag, summarize(values.first, convention), summarize(values.second, convention)});
  }
  return out;
}

PreferenceCounts preference_rank_counts(const Dataset& dataset) {
  PreferenceCounts out;
  std::map<std::string, RankTally> tallies;
  for (const auto& record : dataset.preferences) {
    ++out.records;
    if (record.has_tie()) ++out.records_with_ties;
    for (const auto& [tag, rank] : record.ranks) {
      auto& tally = tallies[tag];
      tally.model_tag = tag;
      ++tally.rank_counts[static_cast<std::size_t>(rank.value() - 1)];
    }
  }
  for (auto& [tag, tally] : tallies) out.per_model.push_back(tally);
  return out;
}

double QueryProfile::proportion(taxonomy::Category c) const {
  if (denominator == 0) return 0.0;
  auto it = counts.find(c);
  return it == counts.end() ? 0.0 : it->second / static_cast<double>(denominator);
}

std::vector<QueryProfile> query_profiles(const Dataset& dataset,
                                         const std::vector<taxonomy::TaxonomyAnnotation>& annotations,
                                         ProfileSlicer slicer, ProfileOptions options) {
  using taxonomy::Category;
  using taxonomy::Mark;

  std::map<std::string, const Trace*> traces;
  for (const auto& t : dataset.traces) traces[t.trace_id] = &t;

  if (slicer == ProfileSlicer::ByExperience) {
    for (const auto& t : dataset.traces) {
      if (!t.experience) {
        throw Error(Errc::MissingExperienceMetadata, "trace " + t.trace_id + " has no experience level");
      }
    }
  }

  // Slices in output order, keyed by a sortable index.
  std::map<std::size_t, QueryProfile> slices;
  auto slice_for = [&](std::size_t key, const std::string& label) -> QueryProfile& {
    auto [it, inserted] = slices.try_emplace(key);
    if (inserted) {
      it->second.slice_label = label;
      for (const auto& info : taxonomy::categories()) it->second.counts[info.id] = 0.0;
    }
    return it->second;
  };
  auto slice_of = [&](const Trace& trace, const InteractionStep& step) -> QueryProfile& {
    if (slicer == ProfileSlicer::ByStepIndex) return slice_for(step.index, "step " + std::to_string(step.index));
    return is_minimal_experience(*trace.experience) ? slice_for(0, "minimal") : slice_for(1, "experienced");
  };

  if (slicer == ProfileSlicer::ByExperience) {
    slice_for(0, "minimal");
    slice_for(1, "experienced");
  }
  for (const auto& t : dataset.traces) {
    for (const auto& step : t.steps) {
      if (keep(step, options.filter)) slice_of(t, step);
    }
  }

  for (const auto& a : annotations) {
    auto it = traces.find(a.query_ref.trace_id);
    if (it == traces.end() || a.query_ref.step_index >= it->second->steps.size()) {
      throw Error(Errc::UnknownQueryRef,
                  "annotation for " + a.query_ref.trace_id + "#" + std::to_string(a.query_ref.step_index));
    }
    const Trace& trace = *it->second;
    const InteractionStep& step = trace.steps[a.query_ref.step_index];
    if (!keep(step, options.filter)) continue;
    QueryProfile& profile = slice_of(trace, step);
    ++profile.denominator;
    for (const auto& info : taxonomy::categories()) {
      const Mark m = a.mark(info.id);
      if (m == Mark::Yes) profile.counts[info.id] += 1.0;
      else if (m == Mark::Maybe) profile.counts[info.id] += options.maybe_weight;
    }
  }

  std::vector<QueryProfile> out;
  for (auto& [key, profile] : slices) out.push_back(std::move(profile));
  return out;
}

std::vector<StoppingCell> stopping_stats(const Dataset& dataset) {
  std::map<std::pair<int, int>, StoppingCell> cells;
  for (const auto& trace : dataset.traces) {
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      const auto& step = trace.steps[i];
      if (!step.rated()) continue;
      const int c = step.correctness->value();
      const int h = step.helpfulness->value();
      auto& cell = cells[{c, h}];
      cell.correctness = c;
      cell.helpfulness = h;
      ++cell.total_steps;
      if (i + 1 == trace.steps.size()) ++cell.terminal_steps;
    }
  }
  std::vector<StoppingCell> out;
  for (const auto& [key, cell] : cells) out.push_back(cell);
  return out;
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::DegenerateInput, "quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

std::vector<StepDynamics> rating_dynamics(const Dataset& dataset, AnalysisFilter filter) {
  std::size_t longest = 0;
  for (const auto& t : dataset.traces) longest = std::max(longest, t.steps.size());

  std::vector<StepDynamics> out(longest);
  std::vector<std::vector<double>> c(longest), h(longest);
  for (std::size_t k = 0; k < longest; ++k) out[k].step_index = k;
  for (const auto& t : dataset.traces) {
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      ++out[k].n_active;
      if (!keep(t.steps[k], filter)) continue;
      c[k].push_back(t.steps[k].correctness->value());
      h[k].push_back(t.steps[k].helpfulness->value());
    }
  }
  for (std::size_t k = 0; k < longest; ++k) {
    out[k].n_rated = c[k].size();
    if (!c[k].empty()) {
      out[k].correctness = quartiles(c[k]);
      out[k].helpfulness = quartiles(h[k]);
    }
  }
  return out;
}

std::vector<TopicRow> ratings_by_topic(const Dataset& dataset, AnalysisFilter filter, StdConvention convention) {
  struct Acc {
    std::set<std::string> problems;
    std::vector<double> c, h;
  };
  std::map<std::pair<std::string, Topic>, Acc> groups;
  for (const auto& trace : dataset.traces) {
    for (const auto& step : trace.steps) {
      if (!keep(step, filter)) continue;
      Acc& acc = groups[{trace.model_tag, trace.topic}];
      acc.problems.insert(trace.problem_id);
      acc.c.push_back(step.correctness->value());
      acc.h.push_back(step.helpfulness->value());
    }
  }
  if (groups.empty()) throw Error(Errc::EmptyAfterFilter, "no rated steps after filtering");

  std::vector<TopicRow> out;
  for (const auto& [key, acc] : groups) {
    out.push_back({key.first, key.second, acc.problems.size(), mean_std(acc.c, convention), mean_std(acc.h, convention)});
  }
  return out;
}

}  // namespace checkmate::analysis
