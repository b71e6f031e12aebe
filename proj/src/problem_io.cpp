#include "regdiag/problem_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace regdiag {

using nlohmann::json;

namespace {

json field_to_json(const PiecewisePolyField& f) {
  json jf;
  jf["smoothness"] = f.smoothness == Smoothness::C0   ? "C0"
                     : f.smoothness == Smoothness::C1 ? "C1"
                                                      : "C2";
  jf["pieces"] = json::array();
  for (const PolyPiece& p : f.pieces) {
    json jp;
    jp["x_lo"] = p.x_lo;
    jp["x_hi"] = p.x_hi;
    jp["terms"] = json::array();
    for (const PolyTerm& t : p.terms)
      jp["terms"].push_back({{"powers", t.powers}, {"coeff", t.coeff}});
    jf["pieces"].push_back(jp);
  }
  return jf;
}

PiecewisePolyField field_from_json(const json& jf, const std::string& where) {
  PiecewisePolyField f;
  if (!jf.contains("pieces") || !jf["pieces"].is_array())
    throw ParseError(where + ": missing 'pieces' array");
  const std::string s = jf.value("smoothness", "C2");
  if (s == "C0")
    f.smoothness = Smoothness::C0;
  else if (s == "C1")
    f.smoothness = Smoothness::C1;
  else if (s == "C2")
    f.smoothness = Smoothness::C2;
  else
    throw ParseError(where + ".smoothness: expected C0|C1|C2, got '" + s + "'");
  int pi = 0;
  for (const json& jp : jf["pieces"]) {
    PolyPiece p;
    const std::string pw = where + ".pieces[" + std::to_string(pi++) + "]";
    if (!jp.contains("x_lo") || !jp.contains("x_hi"))
      throw ParseError(pw + ": missing x_lo/x_hi");
    p.x_lo = jp["x_lo"].get<double>();
    p.x_hi = jp["x_hi"].get<double>();
    int ti = 0;
    for (const json& jt : jp.value("terms", json::array())) {
      PolyTerm t;
      const std::string tw = pw + ".terms[" + std::to_string(ti++) + "]";
      if (!jt.contains("powers") || !jt["powers"].is_array())
        throw ParseError(tw + ": missing 'powers' array");
      for (const json& e : jt["powers"]) {
        const int v = e.get<int>();
        if (v < 0) throw ParseError(tw + ".powers: negative exponent");
        t.powers.push_back(v);
      }
      if (!jt.contains("coeff")) throw ParseError(tw + ": missing 'coeff'");
      t.coeff = jt["coeff"].get<double>();
      if (t.coeff != 0.0) p.terms.push_back(t);
    }
    f.pieces.push_back(p);
  }
  std::sort(f.pieces.begin(), f.pieces.end(),
            [](const PolyPiece& a, const PolyPiece& b) { return a.x_lo < b.x_lo; });
  return f;
}

Box box_from_json(const json& jb, int dim, const std::string& where) {
  Box b;
  b.lo.resize(dim);
  b.hi.resize(dim);
  if (!jb.is_array() || jb.empty()) throw ParseError(where + ": expected an array");
  if (jb[0].is_number()) {
    // [lo, hi] shorthand for dim == 1
    if (dim != 1 || jb.size() != 2)
      throw ParseError(where + ": scalar box form requires n=1 and two entries");
    b.lo(0) = jb[0].get<double>();
    b.hi(0) = jb[1].get<double>();
  } else {
    if (static_cast<int>(jb.size()) != dim)
      throw ParseError(where + ": expected one [lo,hi] per axis");
    for (int i = 0; i < dim; ++i) {
      if (!jb[i].is_array() || jb[i].size() != 2)
        throw ParseError(where + "[" + std::to_string(i) + "]: expected [lo,hi]");
      b.lo(i) = jb[i][0].get<double>();
      b.hi(i) = jb[i][1].get<double>();
    }
  }
  for (int i = 0; i < dim; ++i)
    if (!(b.lo(i) < b.hi(i))) throw ParseError(where + ": lo must be < hi");
  return b;
}

json box_to_json(const Box& b) {
  json ja = json::array();
  for (int i = 0; i < b.lo.size(); ++i) ja.push_back({b.lo(i), b.hi(i)});
  return ja;
}

}  // namespace

std::string problem_to_json(const ParametricProblem& p) {
  json j;
  j["name"] = p.name;
  j["n"] = p.n;
  j["m"] = p.m;
  j["k"] = p.k;
  j["x_domain"] = box_to_json(p.x_domain);
  j["y_box"] = box_to_json(p.y_box);
  j["g"] = field_to_json(p.g);
  j["h"] = json::array();
  for (const auto& hf : p.h) j["h"].push_back(field_to_json(hf));
  if (p.slater_margin) j["slater_margin"] = *p.slater_margin;
  return j.dump(2);
}

ParametricProblem problem_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
  ParametricProblem p;
  for (const char* key : {"name", "n", "m", "k", "x_domain", "g", "h"})
    if (!j.contains(key)) throw ParseError(std::string("problem file: missing '") + key + "'");
  p.name = j["name"].get<std::string>();
  p.n = j["n"].get<int>();
  p.m = j["m"].get<int>();
  p.k = j["k"].get<int>();
  p.x_domain = box_from_json(j["x_domain"], p.n, "x_domain");
  if (j.contains("y_box")) {
    p.y_box = box_from_json(j["y_box"], p.m, "y_box");
  } else {
    p.y_box.lo = Vec::Constant(p.m, -8.0);
    p.y_box.hi = Vec::Constant(p.m, 8.0);
  }
  p.g = field_from_json(j["g"], "g");
  if (!j["h"].is_array() || static_cast<int>(j["h"].size()) != p.k)
    throw ParseError("h: expected an array of k fields");
  for (int i = 0; i < p.k; ++i)
    p.h.push_back(field_from_json(j["h"][i], "h[" + std::to_string(i) + "]"));
  if (j.contains("slater_margin")) p.slater_margin = j["slater_margin"].get<double>();
  validate_problem(p);
  return p;
}

ParametricProblem load_problem(const std::string& source) {
  if (corpus_has(source)) return corpus_problem(source);
  std::ifstream in(source);
  if (!in)
    throw ParseError("'" + source + "' is neither a corpus id nor a readable file");
  std::ostringstream os;
  os << in.rdbuf();
  return problem_from_json(os.str());
}

std::string problem_hash(const ParametricProblem& problem) {
  const std::string text = problem_to_json(problem);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace regdiag
