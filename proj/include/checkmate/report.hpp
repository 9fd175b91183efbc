#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "checkmate/analysis.hpp"

namespace checkmate::analysis {

enum class ReportKind { Corr, Summary, Prefs, Profiles, Stopping, Dynamics, Topics };

std::string_view report_name(ReportKind kind) noexcept;
/// Throws Error{Parse}.
ReportKind parse_report(std::string_view name);

struct ReportOptions {
  AnalysisFilter filter;
  StdConvention convention = StdConvention::Sample;
  std::vector<taxonomy::TaxonomyAnnotation> annotations;  // profiles only
  ProfileSlicer slicer = ProfileSlicer::ByStepIndex;
  double maybe_weight = 1.0;
  std::optional<std::uint64_t> seed;  // no analysis samples today; echoed in results
};

struct Report {
  std::string csv;       // deterministic table, CRLF rows
  nlohmann::json results;
};

/// Runs one analysis and renders it. Numbers in the CSV use 6 decimals.
Report run_report(ReportKind kind, const Dataset& dataset, const ReportOptions& options = {});

}  // namespace checkmate::analysis
