#include "novlab/groupoid.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace novlab {

std::shared_ptr<const GroupoidGraph> GroupoidGraph::make(std::vector<Object> objects,
                                                         std::vector<Generator> generators) {
  auto g = std::shared_ptr<GroupoidGraph>(new GroupoidGraph());
  std::set<std::string> names;
  for (const auto& o : objects) {
    if (!names.insert(o.name).second)
      throw GroupoidError("duplicate object name: " + o.name);
  }
  std::set<std::string> gnames;
  for (const auto& e : generators) {
    if (!gnames.insert(e.name).second)
      throw GroupoidError("duplicate generator name: " + e.name);
    if (names.count(e.name)) throw GroupoidError("generator name collides with object: " + e.name);
    if (e.source < 0 || e.source >= (int)objects.size() || e.target < 0 ||
        e.target >= (int)objects.size())
      throw GroupoidError("generator " + e.name + " has undeclared endpoint");
  }
  g->objects_ = std::move(objects);
  g->generators_ = std::move(generators);
  return g;
}

std::shared_ptr<const GroupoidGraph> GroupoidGraph::from_json(const nlohmann::json& doc) {
  std::vector<Object> objs;
  std::vector<Generator> gens;
  if (!doc.contains("objects") || !doc["objects"].is_array())
    throw GroupoidError("groupoid document: missing \"objects\" array");
  for (const auto& o : doc["objects"]) {
    Object rec;
    rec.name = o.at("name").get<std::string>();
    rec.morse_index = o.at("morse_index").get<int>();
    objs.push_back(std::move(rec));
  }
  auto oid = [&](const std::string& name) -> int {
    for (size_t k = 0; k < objs.size(); ++k)
      if (objs[k].name == name) return (int)k;
    throw GroupoidError("groupoid document: unknown object \"" + name + "\"");
  };
  if (doc.contains("generators")) {
    for (const auto& e : doc["generators"]) {
      Generator rec;
      rec.name = e.at("name").get<std::string>();
      rec.source = oid(e.at("source").get<std::string>());
      rec.target = oid(e.at("target").get<std::string>());
      rec.u_value = e.at("u_value").get<double>();
      gens.push_back(std::move(rec));
    }
  }
  return make(std::move(objs), std::move(gens));
}

int GroupoidGraph::find_object(const std::string& name) const {
  for (size_t k = 0; k < objects_.size(); ++k)
    if (objects_[k].name == name) return (int)k;
  return -1;
}

int GroupoidGraph::find_generator(const std::string& name) const {
  for (size_t k = 0; k < generators_.size(); ++k)
    if (generators_[k].name == name) return (int)k;
  return -1;
}

int GroupoidGraph::object_id(const std::string& name) const {
  int id = find_object(name);
  if (id < 0) throw GroupoidError("unknown object: " + name);
  return id;
}

int GroupoidGraph::generator_id(const std::string& name) const {
  int id = find_generator(name);
  if (id < 0) throw GroupoidError("unknown generator: " + name);
  return id;
}

namespace {

int letter_source(const GroupoidGraph& g, const Letter& l) {
  const auto& e = g.generators()[l.gen];
  return l.exp > 0 ? e.source : e.target;
}

int letter_target(const GroupoidGraph& g, const Letter& l) {
  const auto& e = g.generators()[l.gen];
  return l.exp > 0 ? e.target : e.source;
}

// Reduces by cancelling adjacent inverse pairs; validates chaining.
std::vector<Letter> reduce_word(const GroupoidGraph& g, const std::vector<Letter>& word) {
  std::vector<Letter> out;
  for (const auto& l : word) {
    if (l.gen < 0 || l.gen >= (int)g.generators().size())
      throw GroupoidError("word references unknown generator");
    if (l.exp != 1 && l.exp != -1) throw GroupoidError("letter exponent must be +1 or -1");
    if (!out.empty() && letter_target(g, out.back()) != letter_source(g, l))
      throw GroupoidError("word does not chain");
    if (!out.empty() && out.back().gen == l.gen && out.back().exp == -l.exp)
      out.pop_back();
    else
      out.push_back(l);
  }
  return out;
}

}  // namespace

Arrow Arrow::identity(GraphPtr graph, int object) {
  if (!graph || object < 0 || object >= (int)graph->objects().size())
    throw GroupoidError("identity: invalid object");
  return Arrow(std::move(graph), object, object, {});
}

Arrow Arrow::generator(GraphPtr graph, int gen, int exp) {
  if (!graph || gen < 0 || gen >= (int)graph->generators().size())
    throw GroupoidError("generator arrow: invalid generator");
  if (exp != 1 && exp != -1) throw GroupoidError("generator arrow: exponent must be +-1");
  const auto& e = graph->generators()[gen];
  int s = exp > 0 ? e.source : e.target;
  int t = exp > 0 ? e.target : e.source;
  return Arrow(std::move(graph), s, t, {Letter{gen, exp}});
}

Arrow Arrow::from_word(GraphPtr graph, const std::vector<Letter>& word) {
  if (!graph) throw GroupoidError("from_word: null graph");
  if (word.empty()) throw GroupoidError("from_word: empty word is ambiguous; use identity()");
  auto red = reduce_word(*graph, word);
  int s = letter_source(*graph, word.front());
  int t = letter_target(*graph, word.back());
  return Arrow(std::move(graph), s, t, std::move(red));
}

Arrow Arrow::parse(GraphPtr graph, const std::string& text) {
  if (!graph) throw GroupoidError("parse: null graph");
  std::string trimmed;
  for (char c : text)
    if (!isspace((unsigned char)c)) trimmed += c;
  if (trimmed.empty()) throw GroupoidError("parse: empty arrow string");
  if (trimmed.rfind("1_", 0) == 0)
    return identity(graph, graph->object_id(trimmed.substr(2)));
  std::vector<Letter> word;
  size_t pos = 0;
  while (pos < trimmed.size()) {
    size_t dot = trimmed.find('.', pos);
    std::string piece = trimmed.substr(pos, dot == std::string::npos ? dot : dot - pos);
    pos = dot == std::string::npos ? trimmed.size() : dot + 1;
    if (piece.empty()) throw GroupoidError("parse: empty factor in \"" + text + "\"");
    int exp = 1;
    std::string name = piece;
    if (size_t caret = piece.find('^'); caret != std::string::npos) {
      name = piece.substr(0, caret);
      try {
        exp = std::stoi(piece.substr(caret + 1));
      } catch (const std::exception&) {
        throw GroupoidError("parse: bad exponent in \"" + piece + "\"");
      }
      if (exp == 0) throw GroupoidError("parse: zero exponent in \"" + piece + "\"");
    }
    int gen = graph->generator_id(name);
    for (int k = 0; k < std::abs(exp); ++k) word.push_back(Letter{gen, exp > 0 ? 1 : -1});
  }
  return from_word(std::move(graph), word);
}

std::string Arrow::str() const {
  if (word_.empty()) return "1_" + graph_->objects()[source_].name;
  std::ostringstream os;
  size_t k = 0;
  bool first = true;
  while (k < word_.size()) {
    size_t run = k;
    while (run + 1 < word_.size() && word_[run + 1] == word_[k]) ++run;
    int count = (int)(run - k + 1) * word_[k].exp;
    if (!first) os << '.';
    os << graph_->generators()[word_[k].gen].name;
    if (count != 1) os << '^' << count;
    first = false;
    k = run + 1;
  }
  return os.str();
}

std::optional<Arrow> compose(const Arrow& g, const Arrow& h) {
  if (g.graph() != h.graph()) throw GroupoidError("compose: arrows from different graphs");
  if (g.target() != h.source()) return std::nullopt;
  if (g.is_identity()) return h;
  if (h.is_identity()) return g;
  std::vector<Letter> word = g.word();
  word.insert(word.end(), h.word().begin(), h.word().end());
  auto red = reduce_word(*g.graph(), word);
  if (red.empty()) return Arrow::identity(g.graph(), g.source());
  return Arrow::from_word(g.graph(), red);
}

Arrow inverse(const Arrow& g) {
  if (g.is_identity()) return g;
  std::vector<Letter> word(g.word().rbegin(), g.word().rend());
  for (auto& l : word) l.exp = -l.exp;
  return Arrow::from_word(g.graph(), word);
}

double u_value(const Arrow& g) {
  double u = 0.0;
  for (const auto& l : g.word()) u += l.exp * g.graph()->generators()[l.gen].u_value;
  return u;
}

Arrow power(const Arrow& g, int k) {
  if (!g.is_loop()) throw GroupoidError("power: arrow is not a loop");
  Arrow base = k >= 0 ? g : inverse(g);
  Arrow acc = Arrow::identity(g.graph(), g.source());
  for (int j = 0; j < std::abs(k); ++j) acc = *compose(acc, base);
  return acc;
}

}  // namespace novlab
