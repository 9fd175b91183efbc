#include "checkmate/annotation_sheet.hpp"

#include <algorithm>

#include "checkmate/csv.hpp"
#include "checkmate/error.hpp"
#include "checkmate/scales.hpp"

namespace checkmate::store {

const std::vector<std::string>& annotation_sheet_header() {
  static const std::vector<std::string> header = [] {
    std::vector<std::string> h = {"user_query", "problem_declaration", "previous_interactions"};
    for (const auto& info : taxonomy::categories()) h.emplace_back(info.name);
    h.back() = "Other";  // the annotators' column title
    return h;
  }();
  return header;
}

namespace {

std::string rating_text(const std::optional<Score>& score) {
  if (!score) return "unrated";
  return std::to_string(score->value()) + " (" + scale_label(score->kind(), score->value()) + ")";
}

// Spreadsheet tools may rewrite line breaks inside cells as CRLF.
std::string normalize_breaks(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    out.push_back(text[i]);
  }
  return out;
}

std::string declaration_for(const Trace& trace, const StatementLookup& statements) {
  auto it = statements.find(trace.problem_id);
  return it == statements.end() ? trace.problem_id : it->second;
}

std::vector<const Trace*> sorted_traces(const Dataset& dataset) {
  std::vector<const Trace*> traces;
  for (const auto& t : dataset.traces) traces.push_back(&t);
  std::sort(traces.begin(), traces.end(), [](const Trace* a, const Trace* b) { return a->trace_id < b->trace_id; });
  return traces;
}

}  // namespace

std::string render_previous_interactions(const Trace& trace, std::size_t step_index) {
  std::string out;
  for (std::size_t i = 0; i < step_index && i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    if (!out.empty()) out += "\n\n";
    out += "[step " + std::to_string(s.index) + "]\n";
    out += "User: " + s.user_query + "\n";
    out += "Assistant: " + s.model_response + "\n";
    out += "Correctness: " + rating_text(s.correctness) + "\n";
    out += "Helpfulness: " + rating_text(s.helpfulness);
  }
  return out;
}

std::string export_annotation_sheet(const Dataset& dataset, const StatementLookup& statements) {
  std::string out;
  csv::append_row(out, annotation_sheet_header());
  for (const Trace* trace : sorted_traces(dataset)) {
    const std::string declaration = declaration_for(*trace, statements);
    for (const auto& step : trace->steps) {
      std::vector<std::string> row = {step.user_query, declaration,
                                      render_previous_interactions(*trace, step.index)};
      row.resize(annotation_sheet_header().size());
      csv::append_row(out, row);
    }
  }
  return out;
}

std::vector<SheetRow> parse_annotation_sheet(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw Error(Errc::HeaderMismatch, "sheet is empty");
  const auto& header = annotation_sheet_header();
  if (rows.front().fields != header) throw Error(Errc::HeaderMismatch, "sheet header does not match", rows.front().line);

  std::vector<SheetRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r].fields;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      throw Error(Errc::Parse,
                  "expected " + std::to_string(header.size()) + " columns, found " + std::to_string(fields.size()),
                  rows[r].line);
    }
    SheetRow row;
    row.user_query = normalize_breaks(fields[0]);
    row.problem_declaration = normalize_breaks(fields[1]);
    row.previous_interactions = normalize_breaks(fields[2]);
    for (std::size_t c = 0; c < taxonomy::kCategoryCount; ++c) row.cells[c] = fields[kSheetContextColumns + c];
    row.line = rows[r].line;
    out.push_back(std::move(row));
  }
  return out;
}

std::map<std::tuple<std::string, std::string, std::string>, std::vector<taxonomy::QueryRef>> sheet_row_index(
    const Dataset& dataset, const StatementLookup& statements) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<taxonomy::QueryRef>> index;
  for (const Trace* trace : sorted_traces(dataset)) {
    const std::string declaration = declaration_for(*trace, statements);
    for (const auto& step : trace->steps) {
      index[{normalize_breaks(step.user_query), normalize_breaks(declaration),
             normalize_breaks(render_previous_interactions(*trace, step.index))}]
          .push_back({trace->trace_id, step.index});
    }
  }
  return index;
}

}  // namespace checkmate::store
