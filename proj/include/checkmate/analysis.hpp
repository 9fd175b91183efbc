#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "checkmate/records.hpp"
#include "checkmate/taxonomy.hpp"

namespace checkmate::analysis {

struct AnalysisFilter {
  /// Drop steps rated 0 on correctness (no mathematical content).
  bool exclude_correctness_zero = true;
};

enum class StdConvention {
  Sample,      // N-1 denominator
  Population,  // N denominator
};

/// Sample Pearson correlation. Throws Error{LengthMismatch} when sizes differ
/// or fewer than 2 points, Error{DegenerateInput} when either side is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Pooled over every rated step of every model.
double correctness_helpfulness_correlation(const Dataset& dataset, AnalysisFilter filter = {});

struct MeanStd {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // 0 when n < 2 under the sample convention
};

MeanStd mean_std(std::span<const double> values, StdConvention convention = StdConvention::Sample);

struct ScaleSummary {
  MeanStd stats;
  std::array<std::size_t, 7> histogram{};
};

struct ModelSummary {
  std::string model_tag;
  ScaleSummary correctness;
  ScaleSummary helpfulness;
};

/// Per model tag (sorted), over pooled steps. Throws Error{EmptyAfterFilter}.
std::vector<ModelSummary> rating_summary_by_model(const Dataset& dataset, AnalysisFilter filter = {},
                                                  StdConvention convention = StdConvention::Sample);

struct RankTally {
  std::string model_tag;
  std::array<std::size_t, 3> rank_counts{};  // index 0 -> rank 1
};

struct PreferenceCounts {
  std::vector<RankTally> per_model;  // sorted by tag
  std::size_t records = 0;
  std::size_t records_with_ties = 0;
  double tie_ratio() const noexcept { return records ? double(records_with_ties) / double(records) : 0.0; }
};

PreferenceCounts preference_rank_counts(const Dataset& dataset);

enum class ProfileSlicer { ByStepIndex, ByExperience };

struct QueryProfile {
  std::string slice_label;
  std::map<taxonomy::Category, double> counts;  // all 11 categories present
  std::size_t denominator = 0;

  double proportion(taxonomy::Category c) const;
};

struct ProfileOptions {
  AnalysisFilter filter;
  double maybe_weight = 1.0;  // 1, 0.5 or 0
};

/// Step slices are labelled "step 0", "step 1", ...; experience slices are
/// "minimal" (never/rarely) and "experienced". Only annotated queries count
/// toward the denominator. Throws Error{MissingExperienceMetadata}.
std::vector<QueryProfile> query_profiles(const Dataset& dataset,
                                         const std::vector<taxonomy::TaxonomyAnnotation>& annotations,
                                         ProfileSlicer slicer, ProfileOptions options = {});

struct StoppingCell {
  int correctness = 0;
  int helpfulness = 0;
  std::size_t total_steps = 0;
  std::size_t terminal_steps = 0;
  double ratio() const noexcept { return total_steps ? double(terminal_steps) / double(total_steps) : 0.0; }
};

/// Always unfiltered. Cells sorted by (correctness, helpfulness).
std::vector<StoppingCell> stopping_stats(const Dataset& dataset);

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Linear interpolation between order statistics (type 7). Requires a
/// non-empty input.
Quartiles quartiles(std::vector<double> values);

struct StepDynamics {
  std::size_t step_index = 0;
  std::size_t n_active = 0;  // traces with at least step_index + 1 steps
  std::size_t n_rated = 0;   // rated steps at this index surviving the filter
  std::optional<Quartiles> correctness;
  std::optional<Quartiles> helpfulness;
};

std::vector<StepDynamics> rating_dynamics(const Dataset& dataset, AnalysisFilter filter = {});

struct TopicRow {
  std::string model_tag;
  Topic topic = Topic::Algebra;
  std::size_t problems = 0;  // distinct problem ids
  MeanStd correctness;
  MeanStd helpfulness;
};

/// Rows sorted by (tag, topic order). Throws Error{EmptyAfterFilter}.
std::vector<TopicRow> ratings_by_topic(const Dataset& dataset, AnalysisFilter filter = {},
                                       StdConvention convention = StdConvention::Sample);

}  // namespace checkmate::analysis
