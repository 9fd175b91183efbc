#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "checkmate/records.hpp"
#include "checkmate/taxonomy.hpp"

namespace checkmate::store {

/// user_query, problem_declaration, previous_interactions, then one column per
/// category (the last one is "Other").
const std::vector<std::string>& annotation_sheet_header();

inline constexpr std::size_t kSheetContextColumns = 3;

/// Statement lookup for the problem_declaration column; problems missing from
/// the map fall back to the problem id.
using StatementLookup = std::map<std::string, std::string>;

/// Rendering of a trace's steps before `step_index`, with their ratings.
std::string render_previous_interactions(const Trace& trace, std::size_t step_index);

/// One row per user query, in (trace_id, step index) order. Category cells
/// are blank.
std::string export_annotation_sheet(const Dataset& dataset, const StatementLookup& statements = {});

struct SheetRow {
  std::string user_query;
  std::string problem_declaration;
  std::string previous_interactions;
  std::array<std::string, taxonomy::kCategoryCount> cells;
  std::size_t line = 0;

  /// Identity of the row's query: the three context columns.
  std::tuple<std::string, std::string, std::string> key() const {
    return {user_query, problem_declaration, previous_interactions};
  }
};

/// Throws Error{HeaderMismatch | Parse}.
std::vector<SheetRow> parse_annotation_sheet(std::string_view csv_text);

/// Maps each row key the dataset would export to the queries it stands for.
std::map<std::tuple<std::string, std::string, std::string>, std::vector<taxonomy::QueryRef>> sheet_row_index(
    const Dataset& dataset, const StatementLookup& statements = {});

}  // namespace checkmate::store
