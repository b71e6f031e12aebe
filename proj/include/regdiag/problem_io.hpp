#pragma once

#include "regdiag/problem.hpp"

#include <string>
#include <vector>

namespace regdiag {

struct CorpusEntry {
  std::string id;
  std::string description;
  std::vector<std::string> tags;
};

/// The built-in problem corpus (11 problems).
std::vector<CorpusEntry> list_corpus();
bool corpus_has(const std::string& id);
ParametricProblem corpus_problem(const std::string& id);

/// Loads either a registered corpus id or a JSON problem file; the result is
/// fully validated (dimensions, seam continuity, Slater grid check).
ParametricProblem load_problem(const std::string& source);

std::string problem_to_json(const ParametricProblem& problem);
ParametricProblem problem_from_json(const std::string& text);

/// FNV-1a 64-bit hash of the canonical problem JSON; used in run manifests.
std::string problem_hash(const ParametricProblem& problem);

}  // namespace regdiag
