#ifndef BVLAB_IO_HPP
#define BVLAB_IO_HPP

#include <string>
#include <vector>

#include "json.hpp"

#include "bvlab/errors.hpp"
#include "bvlab/graphs.hpp"
#include "bvlab/linfty.hpp"
#include "bvlab/rational.hpp"
#include "bvlab/residue.hpp"
#include "bvlab/superalg.hpp"

namespace bvlab::io {

using json = nlohmann::ordered_json;

namespace detail {

template <class T>
T get(const json& j, const char* key, const char* what)
{
  if (!j.is_object() || !j.contains(key))
    throw InputError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string(what) + ": bad field '" + key + "': " + e.what());
  }
}

inline Rational rational(const json& j)
{
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long>());
  throw InputError("exact values must be \"p/q\" strings or integers");
}

}  // namespace detail

inline json space_to_json(const GradedSpace& s)
{
  json a = json::array();
  for (const auto& g : s.generators()) a.push_back({{"name", g.name}, {"degree", g.degree}});
  return a;
}

inline SpacePtr space_from_json(const json& j)
{
  if (!j.is_array()) throw InputError("space: expected an array of generators");
  std::vector<Generator> gens;
  for (const auto& g : j)
    gens.push_back({detail::get<std::string>(g, "name", "generator"), detail::get<int>(g, "degree", "generator")});
  return make_space(std::move(gens));
}

/** \brief {space, D, hbar_window, terms:[{monomial, hbar, coeff}]} in canonical term order. */
inline json to_json(const Functional& f)
{
  const GradedSpace& s = *f.space();
  json terms = json::array();
  for (const auto& [k, c] : f.terms()) {
    json mono = json::array();
    for (std::size_t i = 0; i < k.mono.size(); ++i)
      for (int e = 0; e < k.mono[i]; ++e) mono.push_back(s[i].name);
    terms.push_back({{"monomial", mono}, {"hbar", k.hbar}, {"coeff", to_string(c)}});
  }
  return {{"space", space_to_json(s)},
          {"D", f.truncation()},
          {"hbar_window", {f.hbar_min(), f.hbar_max()}},
          {"terms", terms}};
}

/** \brief Monomials are read as words in the listed order, so the Koszul sign is applied. */
inline Functional functional_from_json(const json& j, SpacePtr space = nullptr)
{
  if (!space) {
    if (!j.contains("space")) throw InputError("functional: missing field 'space'");
    space = space_from_json(j["space"]);
  }
  auto win = detail::get<std::vector<int>>(j, "hbar_window", "functional");
  if (win.size() != 2) throw InputError("functional: hbar_window must have two entries");
  Functional f(space, detail::get<int>(j, "D", "functional"), win[0], win[1]);
  for (const auto& t : detail::get<json>(j, "terms", "functional")) {
    std::vector<std::size_t> word;
    for (const auto& n : detail::get<std::vector<std::string>>(t, "monomial", "term")) word.push_back(space->index(n));
    int h = detail::get<int>(t, "hbar", "term");
    if (static_cast<int>(word.size()) > f.truncation() || h < f.hbar_min() || h > f.hbar_max())
      throw InputError("functional: term outside the truncation window");
    f.add_word(word, h, detail::rational(t.at("coeff")));
  }
  return f;
}

/**
 * \brief Model spec {generators:[{name,degree}], pairing:[[i,i,"p/q"]], brackets:{"k":[[out,[in...],"p/q"]]}}.
 * The pairing is diagonal: entry [i,i,p] pairs X_i with its dual; omitted entries default to 1.
 */
inline CurvedLInftyModel model_from_json(const json& j)
{
  std::vector<Generator> gens;
  for (const auto& g : detail::get<json>(j, "generators", "model"))
    gens.push_back({detail::get<std::string>(g, "name", "generator"), detail::get<int>(g, "degree", "generator")});
  std::vector<Rational> pairing(gens.size(), Rational(1));
  if (j.contains("pairing")) {
    for (const auto& e : j["pairing"]) {
      if (!e.is_array() || e.size() != 3) throw InputError("pairing entries are [i, j, \"p/q\"]");
      auto a = e[0].get<std::size_t>(), b = e[1].get<std::size_t>();
      if (a != b) throw InputError("pairing must be diagonal between g[1] and its dual");
      if (a >= gens.size()) throw InputError("pairing index out of range");
      pairing[a] = detail::rational(e[2]);
    }
  }
  CurvedLInftyModel m(gens, pairing);
  if (j.contains("brackets")) {
    for (const auto& [k, entries] : j["brackets"].items()) {
      std::size_t arity = 0;
      try {
        arity = std::stoul(k);
      } catch (const std::exception&) {
        throw InputError("bracket arity '" + k + "' is not an integer");
      }
      for (const auto& e : entries) {
        if (!e.is_array() || e.size() != 3) throw InputError("bracket entries are [out, [inputs], \"p/q\"]");
        auto in = e[1].get<std::vector<std::size_t>>();
        if (in.size() != arity) throw InputError("bracket entry arity does not match its key");
        m.set_bracket(e[0].get<std::size_t>(), in, detail::rational(e[2]));
      }
    }
  }
  return m;
}

inline json to_json(const CurvedLInftyModel& m)
{
  json gens = json::array(), pairing = json::array(), br = json::object();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    gens.push_back({{"name", m.generators()[i].name}, {"degree", m.degree(i)}});
    pairing.push_back({i, i, to_string(m.pairing(i))});
  }
  for (const auto& [k, table] : m.brackets()) {
    json a = json::array();
    for (const auto& [key, v] : table) a.push_back({key.first, key.second, to_string(v)});
    br[std::to_string(k)] = a;
  }
  return {{"generators", gens}, {"pairing", pairing}, {"brackets", br}};
}

inline json to_json(const FeynGraph& g)
{
  return {{"halfEdges", g.num_half_edges()}, {"sigma", g.sigma()}, {"pi", g.pi()}, {"vertexGenus", g.vertex_genus()}};
}

inline FeynGraph graph_from_json(const json& j)
{
  auto sigma = detail::get<std::vector<int>>(j, "sigma", "graph");
  if (j.contains("halfEdges") && j["halfEdges"].get<std::size_t>() != sigma.size())
    throw InputError("graph: halfEdges disagrees with sigma");
  return FeynGraph(sigma, detail::get<std::vector<int>>(j, "pi", "graph"),
                   detail::get<std::vector<int>>(j, "vertexGenus", "graph"));
}

/**
 * \brief Frobenius table {dim, classes:[{name,degree,trace}], product:[[a,b,c,"p/q"]]} with
 * class names; unlisted products are zero.
 */
inline FrobeniusData frobenius_from_json(const json& j)
{
  FrobeniusData F;
  F.dim = detail::get<int>(j, "dim", "frobenius");
  for (const auto& c : detail::get<json>(j, "classes", "frobenius")) {
    F.names.push_back(detail::get<std::string>(c, "name", "class"));
    F.degrees.push_back(detail::get<int>(c, "degree", "class"));
    F.trace.push_back(c.contains("trace") ? detail::rational(c["trace"]) : Rational(0));
  }
  const std::size_t n = F.size();
  F.product.assign(n, std::vector<std::vector<Rational>>(n, std::vector<Rational>(n)));
  if (j.contains("product"))
    for (const auto& e : j["product"]) {
      if (!e.is_array() || e.size() != 4) throw InputError("product entries are [a, b, c, \"p/q\"]");
      F.product[F.index(e[0].get<std::string>())][F.index(e[1].get<std::string>())]
               [F.index(e[2].get<std::string>())] = detail::rational(e[3]);
    }
  F.validate();
  return F;
}

inline json to_json(const FrobeniusData& F)
{
  json classes = json::array(), prod = json::array();
  for (std::size_t a = 0; a < F.size(); ++a)
    classes.push_back({{"name", F.names[a]}, {"degree", F.degrees[a]}, {"trace", to_string(F.trace[a])}});
  for (std::size_t a = 0; a < F.size(); ++a)
    for (std::size_t b = 0; b < F.size(); ++b)
      for (std::size_t c = 0; c < F.size(); ++c)
        if (F.product[a][b][c] != 0) prod.push_back({F.names[a], F.names[b], F.names[c], to_string(F.product[a][b][c])});
  return {{"dim", F.dim}, {"classes", classes}, {"product", prod}};
}

/** \brief Kernel entries [[name_a, name_b, "p/q"]] over a space; the graded-symmetric partner is implied. */
inline Kernel kernel_from_json(const json& j, const SpacePtr& space)
{
  Kernel K(space);
  if (!j.is_array()) throw InputError("kernel: expected an array of [a, b, \"p/q\"]");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3) throw InputError("kernel entries are [a, b, \"p/q\"]");
    K.add(space->index(e[0].get<std::string>()), space->index(e[1].get<std::string>()), detail::rational(e[2]));
  }
  return K;
}

inline json to_json(const Kernel& K)
{
  json a = json::array();
  const GradedSpace& s = *K.space();
  for (const auto& [ab, c] : K.entries())
    if (ab.first <= ab.second) a.push_back({s[ab.first].name, s[ab.second].name, to_string(c)});
  return a;
}

}  // namespace bvlab::io

#endif  // BVLAB_IO_HPP
