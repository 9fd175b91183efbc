#include "checkmate/taxonomy.hpp"

#include <algorithm>
#include <set>

#include "checkmate/annotation_sheet.hpp"
#include "checkmate/csv.hpp"
#include "checkmate/error.hpp"

namespace checkmate::taxonomy {

const std::array<CategoryInfo, kCategoryCount>& categories() noexcept {
  static constexpr std::array<CategoryInfo, kCategoryCount> table = {{
      {Category::DefinitionSeek, "definition_seek",
       "Seeking specific definitions of a concept mentioned in the problem (e.g. \"Definition of Hall "
       "subgroup\")."},
      {Category::GeneralMathQuestion, "general_math_question",
       "Asking a general question about mathematics related to the problem (e.g. \"When is a plane in R^3 "
       "parallel to another plane in R^3\")."},
      {Category::FullProblemPaste, "full_problem_paste",
       "Copy-pasting the entire problem statement, or a slight rephrasing of it, optionally with prepended "
       "instructions (e.g. \"Can you assist me in proving the following statement? [...]\")."},
      {Category::SingleStepRequest, "single_step_request",
       "Prompting the model for a single step of the problem rather than the entire problem at once (e.g. "
       "\"We will first prove a lemma, let us call it Lemma 1 [...]\")."},
      {Category::ClarifyingQuestion, "clarifying_question",
       "Asking a clarifying question (e.g. \"Does it hold even when p is not a prime number?\")."},
      {Category::ExplicitCorrection, "explicit_correction",
       "Correcting the model output, occasionally with a clarifying question (e.g. \"your example is "
       "misleading [...] Can you show an example in which a polynomial has more roots than its degree?\")."},
      {Category::GenerationClarification, "generation_clarification",
       "Asking for clarification about the generation, such as what a symbol means (e.g. \"What is tau "
       "here?\")."},
      {Category::AskingWhy, "asking_why",
       "Asking why the model did something (e.g. \"so why do you need to add the whole set at step 2?\")."},
      {Category::ImplicitCorrection, "implicit_correction",
       "Implicitly correcting the model (e.g. \"That sounds like there being a homeomorphism. But a "
       "contraction is not a homeomorphism?\")."},
      {Category::AskingForInstance, "asking_for_instance",
       "Asking for instances of a particular construction (e.g. \"Can you exhibit an example to demonstrate "
       "that?\")."},
      {Category::Other, "other",
       "None of the above. Write a short description of the abstract category in this column."},
  }};
  return table;
}

std::string_view category_name(Category category) noexcept {
  return categories()[static_cast<std::size_t>(category)].name;
}

Category parse_category(std::string_view name) {
  for (const auto& info : categories()) {
    if (info.name == name) return info.id;
  }
  if (name == "Other") return Category::Other;
  throw Error(Errc::UnknownCategory, std::string(name));
}

std::string_view mark_cell(Mark mark) noexcept {
  switch (mark) {
    case Mark::Yes: return "y";
    case Mark::Maybe: return "m";
    case Mark::No: return "";
  }
  return "";
}

Mark TaxonomyAnnotation::mark(Category category) const {
  auto it = marks.find(category);
  return it == marks.end() ? Mark::No : it->second;
}

TaxonomyAnnotation validate_annotation(const RawAnnotation& raw) {
  TaxonomyAnnotation out;
  out.query_ref = raw.query_ref;
  out.annotator = raw.annotator;
  for (const auto& info : categories()) out.marks[info.id] = Mark::No;
  for (const auto& [name, mark] : raw.marks) out.marks[parse_category(name)] = mark;
  if (raw.other_text && !raw.other_text->empty()) {
    if (out.marks[Category::Other] == Mark::No) {
      throw Error(Errc::OtherTextWithoutOtherMark, "query " + raw.query_ref.trace_id + "#" +
                                                       std::to_string(raw.query_ref.step_index));
    }
    out.other_text = raw.other_text;
  }
  return out;
}

namespace {

std::string lower_trimmed(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  std::string out(s.substr(first, last - first + 1));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

Mark parse_mark_cell(std::string_view cell, std::size_t line, std::string_view column) {
  const std::string v = lower_trimmed(cell);
  if (v.empty() || v == "n") return Mark::No;
  if (v == "y") return Mark::Yes;
  if (v == "m") return Mark::Maybe;
  throw Error(Errc::Parse, "column '" + std::string(column) + "' has '" + std::string(cell) + "', expected y, m or blank",
              line);
}

RawAnnotation row_to_raw(const store::SheetRow& row, const QueryRef& ref, const std::string& annotator) {
  RawAnnotation raw;
  raw.query_ref = ref;
  raw.annotator = annotator;
  for (std::size_t c = 0; c + 1 < kCategoryCount; ++c) {
    const auto& info = categories()[c];
    raw.marks[std::string(info.name)] = parse_mark_cell(row.cells[c], row.line, info.name);
  }
  // The Other column holds y/m or a free-text description (which implies yes).
  const std::string& other = row.cells[kCategoryCount - 1];
  const std::string v = lower_trimmed(other);
  if (v.empty() || v == "n") {
    raw.marks["other"] = Mark::No;
  } else if (v == "y") {
    raw.marks["other"] = Mark::Yes;
  } else if (v == "m") {
    raw.marks["other"] = Mark::Maybe;
  } else {
    raw.marks["other"] = Mark::Yes;
    raw.other_text = other;
  }
  return raw;
}

}  // namespace

MergeResult merge_sheets(const std::vector<AnnotatedSheet>& sheets, const Dataset& dataset,
                         const std::map<std::string, std::string>& statements) {
  const auto index = store::sheet_row_index(dataset, statements);

  std::map<QueryRef, std::vector<TaxonomyAnnotation>> votes;
  for (const auto& sheet : sheets) {
    for (const auto& row : store::parse_annotation_sheet(sheet.csv_text)) {
      auto it = index.find(row.key());
      if (it == index.end()) {
        throw Error(Errc::UnknownQueryRef, "sheet '" + sheet.annotator + "' row at line " + std::to_string(row.line) +
                                               " does not match any query in the dataset");
      }
      for (const auto& ref : it->second) {
        votes[ref].push_back(validate_annotation(row_to_raw(row, ref, sheet.annotator)));
      }
    }
  }

  MergeResult result;
  for (auto& [ref, list] : votes) {
    std::sort(list.begin(), list.end(), [](const TaxonomyAnnotation& a, const TaxonomyAnnotation& b) {
      return std::tie(a.annotator, a.marks, a.other_text) < std::tie(b.annotator, b.marks, b.other_text);
    });

    TaxonomyAnnotation merged;
    merged.query_ref = ref;
    std::set<std::string> annotators;
    std::set<std::string> texts;
    for (const auto& a : list) {
      annotators.insert(a.annotator);
      if (a.other_text) texts.insert(*a.other_text);
    }
    for (const auto& name : annotators) {
      if (!merged.annotator.empty()) merged.annotator += "+";
      merged.annotator += name;
    }

    bool conflicted = false;
    for (const auto& info : categories()) {
      std::set<Mark> seen;
      for (const auto& a : list) seen.insert(a.mark(info.id));
      if (seen.count(Mark::Yes) && seen.count(Mark::No)) {
        ConflictEntry entry{ref, info.id, {}};
        for (const auto& a : list) entry.votes.emplace_back(a.annotator, a.mark(info.id));
        std::sort(entry.votes.begin(), entry.votes.end());
        result.conflicts.push_back(std::move(entry));
        conflicted = true;
      } else if (seen.size() > 1) {
        merged.marks[info.id] = Mark::Maybe;
        result.maybe_flags.push_back({ref, info.id});
      } else {
        merged.marks[info.id] = *seen.begin();
      }
    }
    if (conflicted) continue;

    if (!texts.empty()) {
      std::string joined;
      for (const auto& t : texts) {
        if (!joined.empty()) joined += " | ";
        joined += t;
      }
      merged.other_text = joined;
    }
    result.annotations.push_back(std::move(merged));
  }

  // Maybe flags for conflicted queries are moot; drop them.
  std::set<QueryRef> conflicted_refs;
  for (const auto& c : result.conflicts) conflicted_refs.insert(c.query_ref);
  std::erase_if(result.maybe_flags, [&](const MaybeFlag& f) { return conflicted_refs.count(f.query_ref) > 0; });
  return result;
}

std::string conflicts_to_csv(const std::vector<ConflictEntry>& conflicts) {
  std::string out;
  csv::append_row(out, {"trace_id", "step_index", "category", "votes"});
  for (const auto& c : conflicts) {
    std::string votes;
    for (const auto& [annotator, mark] : c.votes) {
      if (!votes.empty()) votes += "; ";
      votes += annotator + "=" + (mark == Mark::Yes ? "y" : mark == Mark::Maybe ? "m" : "n");
    }
    csv::append_row(out, {c.query_ref.trace_id, std::to_string(c.query_ref.step_index),
                          std::string(category_name(c.category)), votes});
  }
  return out;
}

}  // namespace checkmate::taxonomy
