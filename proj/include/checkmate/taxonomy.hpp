#pragma once

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "checkmate/records.hpp"

namespace checkmate::taxonomy {

/// Codebook for user queries. The first ten are the observed interaction
/// behaviours in the order they were catalogued; `Other` catches the rest.
enum class Category {
  DefinitionSeek,
  GeneralMathQuestion,
  FullProblemPaste,
  SingleStepRequest,
  ClarifyingQuestion,
  ExplicitCorrection,
  GenerationClarification,
  AskingWhy,
  ImplicitCorrection,
  AskingForInstance,
  Other,
};

inline constexpr std::size_t kCategoryCount = 11;

struct CategoryInfo {
  Category id;
  std::string_view name;         // stable serialized id and sheet column ("Other" titled in sheets)
  std::string_view description;  // annotator guidance
};

/// All 11 entries in codebook order.
const std::array<CategoryInfo, kCategoryCount>& categories() noexcept;
std::string_view category_name(Category category) noexcept;
/// Throws Error{UnknownCategory}.
Category parse_category(std::string_view name);

enum class Mark { No, Maybe, Yes };

std::string_view mark_cell(Mark mark) noexcept;  // "", "m", "y"

struct QueryRef {
  std::string trace_id;
  std::size_t step_index = 0;
  friend auto operator<=>(const QueryRef&, const QueryRef&) = default;
};

struct TaxonomyAnnotation {
  QueryRef query_ref;
  std::map<Category, Mark> marks;  // all 11 keys once validated
  std::optional<std::string> other_text;
  std::string annotator;

  Mark mark(Category category) const;
  friend bool operator==(const TaxonomyAnnotation&, const TaxonomyAnnotation&) = default;
};

/// Annotation as it arrives from outside, keyed by category name.
struct RawAnnotation {
  QueryRef query_ref;
  std::map<std::string, Mark> marks;
  std::optional<std::string> other_text;
  std::string annotator;
};

/// Fills unmarked categories with No. Throws Error{UnknownCategory |
/// OtherTextWithoutOtherMark}.
TaxonomyAnnotation validate_annotation(const RawAnnotation& raw);

struct AnnotatedSheet {
  std::string annotator;
  std::string csv_text;
};

struct ConflictEntry {
  QueryRef query_ref;
  Category category;
  std::vector<std::pair<std::string, Mark>> votes;  // (annotator, mark), sorted
};

struct MaybeFlag {
  QueryRef query_ref;
  Category category;
};

struct MergeResult {
  std::vector<TaxonomyAnnotation> annotations;  // sorted by query_ref
  std::vector<ConflictEntry> conflicts;         // sorted by (query_ref, category)
  std::vector<MaybeFlag> maybe_flags;           // categories merged down to Maybe
};

/// Resolves each sheet row to its query through the dataset, then merges
/// per query. A yes/no disagreement is a hard conflict: the query is left out
/// of `annotations` and reported. A maybe against a definite mark merges to
/// Maybe and is flagged. Throws Error{HeaderMismatch | UnknownQueryRef | Parse}.
MergeResult merge_sheets(const std::vector<AnnotatedSheet>& sheets, const Dataset& dataset,
                         const std::map<std::string, std::string>& statements = {});

/// Conflict report as CSV: trace_id,step_index,category,votes.
std::string conflicts_to_csv(const std::vector<ConflictEntry>& conflicts);

}  // namespace checkmate::taxonomy
