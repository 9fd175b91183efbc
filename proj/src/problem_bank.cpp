#include "checkmate/problem_bank.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include "checkmate/error.hpp"

namespace checkmate {
namespace {

constexpr std::string_view kBlockFence = "\"\"\"";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::string unescape_basic(std::string_view quoted, std::size_t line_no) {
  if (quoted.size() < 2 || quoted.front() != '"' || quoted.back() != '"') {
    throw Error(Errc::Parse, "expected a double-quoted value", line_no);
  }
  std::string out;
  const std::string_view body = quoted.substr(1, quoted.size() - 2);
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '"') throw Error(Errc::Parse, "unescaped quote inside value", line_no);
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (++i == body.size()) throw Error(Errc::Parse, "dangling escape", line_no);
    switch (body[i]) {
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      default: throw Error(Errc::Parse, std::string("unknown escape \\") + body[i], line_no);
    }
  }
  return out;
}

std::string escape_basic(std::string_view raw) {
  std::string out = "\"";
  for (char c : raw) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

}  // namespace

Problem parse_problem(std::string_view text) {
  std::optional<std::string> id, topic, statement, source_name;

  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::Parse, "expected key = value", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view raw_value = trim(line.substr(eq + 1));

    std::string value;
    if (raw_value == kBlockFence) {
      std::string block;
      bool closed = false;
      bool first = true;
      for (++i; i < lines.size(); ++i) {
        std::string_view body_line = lines[i];
        if (!body_line.empty() && body_line.back() == '\r') body_line.remove_suffix(1);
        if (body_line == kBlockFence) {
          closed = true;
          break;
        }
        if (!first) block.push_back('\n');
        block.append(body_line);
        first = false;
      }
      if (!closed) throw Error(Errc::Parse, "unterminated \"\"\" block for '" + key + "'", line_no);
      value = std::move(block);
    } else {
      value = unescape_basic(raw_value, line_no);
    }

    std::optional<std::string>* slot = nullptr;
    if (key == "id") slot = &id;
    else if (key == "topic") slot = &topic;
    else if (key == "statement") slot = &statement;
    else if (key == "source_name") slot = &source_name;
    else throw Error(Errc::Parse, "unknown key '" + key + "'", line_no);
    if (slot->has_value()) throw Error(Errc::Parse, "repeated key '" + key + "'", line_no);
    *slot = std::move(value);
  }

  if (!id || trim(*id).empty()) throw Error(Errc::Parse, "missing id");
  if (!topic) throw Error(Errc::Parse, "problem '" + *id + "' has no topic");
  if (!statement || is_blank(*statement)) throw Error(Errc::EmptyStatement, "problem '" + *id + "'");

  return Problem{*id, parse_topic(*topic), *statement, source_name};
}

std::string serialize_problem(const Problem& problem) {
  std::ostringstream out;
  out << "id = " << escape_basic(problem.id) << '\n';
  out << "topic = " << escape_basic(topic_name(problem.topic)) << '\n';
  if (problem.source_name) out << "source_name = " << escape_basic(*problem.source_name) << '\n';

  // A block cannot represent a line equal to the fence or a trailing CR.
  bool block_safe = true;
  std::istringstream lines(problem.statement);
  for (std::string l; std::getline(lines, l);) {
    if (l == kBlockFence || (!l.empty() && l.back() == '\r')) block_safe = false;
  }
  if (block_safe) {
    out << "statement = \"\"\"\n" << problem.statement << "\n\"\"\"\n";
  } else {
    out << "statement = " << escape_basic(problem.statement) << '\n';
  }
  return out.str();
}

ProblemBank::ProblemBank(std::vector<Problem> problems) : problems_(std::move(problems)) {
  std::sort(problems_.begin(), problems_.end(), [](const Problem& a, const Problem& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < problems_.size(); ++i) {
    if (is_blank(problems_[i].statement)) throw Error(Errc::EmptyStatement, "problem '" + problems_[i].id + "'");
    if (i > 0 && problems_[i].id == problems_[i - 1].id) throw Error(Errc::DuplicateId, problems_[i].id);
  }
}

const Problem* ProblemBank::find(std::string_view id) const noexcept {
  auto it = std::lower_bound(problems_.begin(), problems_.end(), id,
                             [](const Problem& p, std::string_view key) { return p.id < key; });
  return (it != problems_.end() && it->id == id) ? &*it : nullptr;
}

std::vector<const Problem*> ProblemBank::by_topic(Topic topic) const {
  std::vector<const Problem*> out;
  for (const auto& p : problems_) {
    if (p.topic == topic) out.push_back(&p);
  }
  return out;
}

std::map<Topic, std::size_t> ProblemBank::topic_counts() const {
  std::map<Topic, std::size_t> counts;
  for (Topic t : kAllTopics) counts[t] = 0;
  for (const auto& p : problems_) ++counts[p.topic];
  return counts;
}

void ProblemBank::check_bundled_shape() const {
  for (const auto& [topic, count] : topic_counts()) {
    if (count != kProblemsPerTopic) {
      throw Error(Errc::BankShape, std::string(topic_name(topic)) + " has " + std::to_string(count) +
                                       " problems, expected " + std::to_string(kProblemsPerTopic));
    }
  }
}

ProblemBank load_problem_bank(const std::filesystem::path& dir, BankLoadOptions options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::Io, "not a directory: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".toml") files.push_back(entry.path());
  }
  if (ec) throw Error(Errc::Io, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<Problem> problems;
  problems.reserve(files.size());
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      problems.push_back(parse_problem(buf.str()));
    } catch (const Error& e) {
      throw Error(e.code(), file.filename().string() + ": " + e.detail(), e.line());
    }
  }

  ProblemBank bank(std::move(problems));
  if (options.strict_shape) bank.check_bundled_shape();
  return bank;
}

}  // namespace checkmate
