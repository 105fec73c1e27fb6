#pragma once

// Free groupoid on a finite directed multigraph, with a real valuation on
// generators. Arrows are reduced signed words; composition is diagrammatic
// (g * h means "g then h", defined when target(g) == source(h)).

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace novlab {

struct GroupoidError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class GroupoidGraph {
 public:
  struct Object {
    std::string name;
    int morse_index = 0;
  };
  struct Generator {
    std::string name;
    int source = -1;
    int target = -1;
    double u_value = 0.0;
  };

  static std::shared_ptr<const GroupoidGraph> make(std::vector<Object> objects,
                                                   std::vector<Generator> generators);
  static std::shared_ptr<const GroupoidGraph> from_json(const nlohmann::json& doc);

  const std::vector<Object>& objects() const { return objects_; }
  const std::vector<Generator>& generators() const { return generators_; }

  int object_id(const std::string& name) const;        // throws if unknown
  int generator_id(const std::string& name) const;     // throws if unknown
  int find_object(const std::string& name) const;      // -1 if unknown
  int find_generator(const std::string& name) const;   // -1 if unknown

 private:
  GroupoidGraph() = default;
  std::vector<Object> objects_;
  std::vector<Generator> generators_;
};

using GraphPtr = std::shared_ptr<const GroupoidGraph>;

struct Letter {
  int gen = -1;
  int exp = +1;  // +1 or -1
  friend bool operator==(const Letter&, const Letter&) = default;
  friend auto operator<=>(const Letter&, const Letter&) = default;
};

class Arrow {
 public:
  static Arrow identity(GraphPtr graph, int object);
  static Arrow generator(GraphPtr graph, int gen, int exp = +1);
  // Builds the reduced arrow for an arbitrary chaining word.
  static Arrow from_word(GraphPtr graph, const std::vector<Letter>& word);
  // Parses "e1.e2^-1" / "g^3" / "1_p" notation.
  static Arrow parse(GraphPtr graph, const std::string& text);

  const GraphPtr& graph() const { return graph_; }
  int source() const { return source_; }
  int target() const { return target_; }
  const std::vector<Letter>& word() const { return word_; }
  bool is_identity() const { return word_.empty(); }
  bool is_loop() const { return source_ == target_; }

  std::string str() const;

  friend bool operator==(const Arrow& a, const Arrow& b) {
    return a.source_ == b.source_ && a.target_ == b.target_ && a.word_ == b.word_;
  }
  friend bool operator<(const Arrow& a, const Arrow& b) {
    if (a.source_ != b.source_) return a.source_ < b.source_;
    if (a.target_ != b.target_) return a.target_ < b.target_;
    return a.word_ < b.word_;
  }

 private:
  Arrow(GraphPtr graph, int source, int target, std::vector<Letter> word)
      : graph_(std::move(graph)), source_(source), target_(target), word_(std::move(word)) {}
  GraphPtr graph_;
  int source_ = -1;
  int target_ = -1;
  std::vector<Letter> word_;
};

// Diagrammatic composition; std::nullopt when target(g) != source(h).
std::optional<Arrow> compose(const Arrow& g, const Arrow& h);
Arrow inverse(const Arrow& g);
double u_value(const Arrow& g);
// g composed with itself k times (k >= 0; k < 0 uses the inverse). Loop only.
Arrow power(const Arrow& g, int k);

}  // namespace novlab
