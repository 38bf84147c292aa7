#pragma once

// Registry of builtin example problems.  The problem texts are embedded at
// build time from data/problems/*.toml (see cmake/embed.cmake), so the
// installed binary needs no data directory.

#include <optional>
#include <string_view>
#include <vector>

#include "builtin_problems_data.inc"

#include "blowup/problem.hpp"

namespace blowup {

inline std::vector<std::string_view> builtin_names() {
  std::vector<std::string_view> out;
  out.reserve(detail::kBuiltinProblems.size());
  for (const auto& p : detail::kBuiltinProblems) out.push_back(p.name);
  return out;
}

inline std::optional<std::string_view> builtin_text(std::string_view name) {
  for (const auto& p : detail::kBuiltinProblems)
    if (p.name == name) return p.text;
  return std::nullopt;
}

inline ProblemSpec load_builtin(std::string_view name) {
  auto text = builtin_text(name);
  if (!text)
    throw ProblemFormatError("unknown builtin problem '" + std::string(name) +
                             "'");
  return parse_problem(std::string(*text), std::string(name));
}

}  // namespace blowup
