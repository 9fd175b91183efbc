#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "checkmate/types.hpp"

namespace checkmate {

inline constexpr std::size_t kProblemsPerTopic = 9;
inline constexpr std::size_t kBundledBankSize = kProblemsPerTopic * kAllTopics.size();

/// Parses one problem file (grammar in docs/problem-format.md).
/// Throws Error{Parse | EmptyStatement | UnknownTopic}.
Problem parse_problem(std::string_view text);
/// Canonical serialization; parse_problem(serialize_problem(p)) == p.
std::string serialize_problem(const Problem& problem);

class ProblemBank {
 public:
  ProblemBank() = default;
  /// Sorts by id. Throws Error{DuplicateId | EmptyStatement}.
  explicit ProblemBank(std::vector<Problem> problems);

  const std::vector<Problem>& problems() const noexcept { return problems_; }
  std::size_t size() const noexcept { return problems_.size(); }
  bool empty() const noexcept { return problems_.empty(); }

  const Problem* find(std::string_view id) const noexcept;
  /// Problems of one topic, in id order.
  std::vector<const Problem*> by_topic(Topic topic) const;
  std::map<Topic, std::size_t> topic_counts() const;

  /// Throws Error{BankShape} unless every topic has exactly 9 problems.
  void check_bundled_shape() const;

 private:
  std::vector<Problem> problems_;
};

struct BankLoadOptions {
  bool strict_shape = true;
};

/// Loads every `*.toml` file in `dir`. Throws Error{Io | Parse | DuplicateId |
/// EmptyStatement | UnknownTopic | BankShape}.
ProblemBank load_problem_bank(const std::filesystem::path& dir, BankLoadOptions options = {});

}  // namespace checkmate
