// SPDX-License-Identifier: Apache-2.0
#include "gtlens/graph.hpp"

#include "gtlens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>
#include <utility>

namespace gtlens {

namespace {

std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

MolecularGraph::MolecularGraph(std::vector<Atom> atoms, std::vector<Bond> bonds)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)) {
  const int n = size();
  adjacency_.assign(n, {});
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b, order] : bonds_) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw Error(ErrorCode::Schema, "bond (" + std::to_string(a) + "," + std::to_string(b) +
                                         ") references a node outside 0.." + std::to_string(n - 1));
    }
    if (a == b) throw Error(ErrorCode::Schema, "self-loop on node " + std::to_string(a));
    if (order < 1 || order > 3) {
      throw Error(ErrorCode::Schema, "bond order " + std::to_string(order) + " outside 1..3");
    }
    if (!seen.insert(edge_key(a, b)).second) {
      throw Error(ErrorCode::Schema,
                  "duplicate bond (" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (const auto& atom : atoms_) {
    if (atom.implicit_h < 0) throw Error(ErrorCode::Schema, "negative implicit_h");
    if (atom.element.empty()) throw Error(ErrorCode::Schema, "empty element symbol");
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());

  std::vector<int> label(n, -1);
  for (int start = 0; start < n; ++start) {
    if (label[start] >= 0) continue;
    std::queue<int> queue;
    queue.push(start);
    label[start] = components_;
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop();
      for (int next : adjacency_[node]) {
        if (label[next] < 0) {
          label[next] = components_;
          queue.push(next);
        }
      }
    }
    ++components_;
  }
}

MolecularGraph MolecularGraph::permuted(const std::vector<int>& perm) const {
  const int n = size();
  if (static_cast<int>(perm.size()) != n) throw Error(ErrorCode::Dim, "permutation size mismatch");
  std::vector<Atom> atoms(n);
  for (int i = 0; i < n; ++i) atoms.at(perm[i]) = atoms_[i];
  std::vector<Bond> bonds;
  bonds.reserve(bonds_.size());
  for (const auto& b : bonds_) bonds.push_back({perm[b.i], perm[b.j], b.order});
  return MolecularGraph(std::move(atoms), std::move(bonds));
}

bool MolecularGraph::same_structure(const MolecularGraph& other) const {
  if (atoms_ != other.atoms_ || bonds_.size() != other.bonds_.size()) return false;
  auto edges = [](const std::vector<Bond>& bonds) {
    std::set<std::tuple<int, int, int>> out;
    for (const auto& b : bonds) {
      auto [lo, hi] = edge_key(b.i, b.j);
      out.emplace(lo, hi, b.order);
    }
    return out;
  };
  return edges(bonds_) == edges(other.bonds_);
}

// ---------------------------------------------------------------------------
// SMILES

namespace {

// Standard valences for the organic subset.
constexpr int kMaxValences = 3;
struct ValenceEntry {
  const char* element;
  int count;
  int valences[kMaxValences];
};
constexpr ValenceEntry kValenceTable[] = {
    {"B", 1, {3}},       {"C", 1, {4}},  {"N", 1, {3}},  {"O", 1, {2}},  {"P", 2, {3, 5}},
    {"S", 3, {2, 4, 6}}, {"F", 1, {1}},  {"Cl", 1, {1}}, {"Br", 1, {1}}, {"I", 1, {1}},
};

const ValenceEntry* find_valence(std::string_view element) {
  for (const auto& entry : kValenceTable) {
    if (element == entry.element) return &entry;
  }
  return nullptr;
}

// Element symbols accepted inside brackets (first five periods).
constexpr std::string_view kElements[] = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si",
    "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni",
    "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo",
    "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe",
};

bool known_element(std::string_view symbol) {
  return std::find(std::begin(kElements), std::end(kElements), symbol) != std::end(kElements);
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  MolecularGraph run() {
    if (text_.empty()) throw Error(ErrorCode::Parse, "empty SMILES");
    for (char c : text_) {
      if (static_cast<unsigned char>(c) > 127) fail(ErrorCode::Parse, "non-ASCII character");
    }
    while (pos_ < text_.size()) step();
    if (!branches_.empty()) fail(ErrorCode::Parse, "unclosed branch '('");
    if (!rings_.empty()) {
      fail(ErrorCode::Parse, "unclosed ring bond " + std::to_string(rings_.begin()->first));
    }
    if (pending_bond_ != 0) fail(ErrorCode::Parse, "dangling bond symbol at end of input");
    if (atoms_.empty()) fail(ErrorCode::Parse, "no atoms");
    assign_hydrogens();
    return MolecularGraph(std::move(atoms_), std::move(bonds_));
  }

 private:
  [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
    throw Error(code, what + " at position " + std::to_string(pos_) + " in '" +
                          std::string(text_) + "'");
  }

  char peek(size_t offset = 0) const {
    return pos_ + offset < text_.size() ? text_[pos_ + offset] : '\0';
  }

  void step() {
    const char c = peek();
    if (c == '[') return bracket_atom();
    if (is_upper(c)) return organic_atom();
    if (is_lower(c)) {
      if (std::string_view("bcnops").find(c) != std::string_view::npos) {
        fail(ErrorCode::Unsupported, "aromatic atom '" + std::string(1, c) +
                                         "' (input must be kekulized)");
      }
      fail(ErrorCode::Parse, "unexpected character '" + std::string(1, c) + "'");
    }
    if (c == '-' || c == '=' || c == '#') {
      if (prev_ < 0) fail(ErrorCode::Parse, "bond symbol without a preceding atom");
      if (pending_bond_ != 0) fail(ErrorCode::Parse, "two consecutive bond symbols");
      pending_bond_ = c == '-' ? 1 : (c == '=' ? 2 : 3);
      ++pos_;
      return;
    }
    if (c == '(') {
      if (prev_ < 0) fail(ErrorCode::Parse, "branch without a preceding atom");
      if (pending_bond_ != 0) fail(ErrorCode::Parse, "bond symbol before '('");
      branches_.push_back(prev_);
      ++pos_;
      return;
    }
    if (c == ')') {
      if (branches_.empty()) fail(ErrorCode::Parse, "unbalanced ')'");
      if (pending_bond_ != 0) fail(ErrorCode::Parse, "dangling bond before ')'");
      prev_ = branches_.back();
      branches_.pop_back();
      ++pos_;
      return;
    }
    if (is_digit(c) || c == '%') return ring_closure();
    if (c == '.') {
      if (pending_bond_ != 0) fail(ErrorCode::Parse, "bond symbol before '.'");
      if (!branches_.empty()) fail(ErrorCode::Parse, "'.' inside a branch");
      prev_ = -1;
      ++pos_;
      return;
    }
    if (c == '*') fail(ErrorCode::Unsupported, "wildcard atom");
    if (c == '@' || c == '/' || c == '\\') fail(ErrorCode::Unsupported, "stereo marker");
    if (c == ':' || c == '$') fail(ErrorCode::Unsupported, "bond symbol '" + std::string(1, c) + "'");
    fail(ErrorCode::Parse, "unexpected character '" + std::string(1, c) + "'");
  }

  void organic_atom() {
    std::string symbol(1, peek());
    if ((symbol == "C" && peek(1) == 'l') || (symbol == "B" && peek(1) == 'r')) {
      symbol += peek(1);
    }
    if (!find_valence(symbol)) {
      if (known_element(symbol)) {
        fail(ErrorCode::Parse, "element '" + symbol + "' must be written in brackets");
      }
      fail(ErrorCode::Parse, "unknown atom symbol '" + symbol + "'");
    }
    pos_ += symbol.size();
    add_atom(Atom{symbol, 0, 0}, /*organic=*/true);
  }

  void bracket_atom() {
    ++pos_;  // '['
    if (is_digit(peek())) fail(ErrorCode::Unsupported, "isotope label");
    if (peek() == '*') fail(ErrorCode::Unsupported, "wildcard atom");
    if (is_lower(peek())) fail(ErrorCode::Unsupported, "aromatic bracket atom");
    if (!is_upper(peek())) fail(ErrorCode::Parse, "expected element symbol in bracket atom");
    std::string symbol(1, peek());
    ++pos_;
    if (is_lower(peek())) {
      std::string two = symbol + peek();
      if (known_element(two)) {
        symbol = two;
        ++pos_;
      }
    }
    if (!known_element(symbol)) fail(ErrorCode::Parse, "unknown element '" + symbol + "'");
    if (peek() == '@') fail(ErrorCode::Unsupported, "stereo marker");
    int hydrogens = 0;
    if (peek() == 'H') {
      ++pos_;
      hydrogens = 1;
      if (is_digit(peek())) hydrogens = read_int();
    }
    int charge = 0;
    if (peek() == '+' || peek() == '-') {
      const char sign_char = peek();
      const int sign = sign_char == '+' ? 1 : -1;
      ++pos_;
      if (is_digit(peek())) {
        charge = sign * read_int();
      } else {
        charge = sign;
        while (peek() == sign_char) {
          charge += sign;
          ++pos_;
        }
      }
    }
    if (peek() == ':') fail(ErrorCode::Unsupported, "atom class");
    if (peek() != ']') fail(ErrorCode::Parse, "unclosed bracket atom");
    ++pos_;
    add_atom(Atom{symbol, hydrogens, charge}, /*organic=*/false);
  }

  int read_int() {
    int value = 0;
    while (is_digit(peek())) {
      value = value * 10 + (peek() - '0');
      ++pos_;
      if (value > 99) fail(ErrorCode::Parse, "count too large");
    }
    return value;
  }

  void add_atom(Atom atom, bool organic) {
    const int index = static_cast<int>(atoms_.size());
    atoms_.push_back(std::move(atom));
    organic_.push_back(organic);
    if (prev_ >= 0) add_bond(prev_, index, pending_bond_ == 0 ? 1 : pending_bond_);
    pending_bond_ = 0;
    prev_ = index;
  }

  void add_bond(int a, int b, int order) {
    if (a == b) fail(ErrorCode::Parse, "ring bond closes on the same atom");
    if (!edges_.insert(edge_key(a, b)).second) fail(ErrorCode::Parse, "duplicate bond");
    bonds_.push_back({a, b, order});
  }

  void ring_closure() {
    if (prev_ < 0) fail(ErrorCode::Parse, "ring-closure digit without a preceding atom");
    int label = 0;
    if (peek() == '%') {
      if (!is_digit(peek(1)) || !is_digit(peek(2))) fail(ErrorCode::Parse, "malformed %nn ring label");
      label = (peek(1) - '0') * 10 + (peek(2) - '0');
      pos_ += 3;
    } else {
      label = peek() - '0';
      ++pos_;
    }
    auto it = rings_.find(label);
    if (it == rings_.end()) {
      rings_.emplace(label, std::pair{prev_, pending_bond_});
    } else {
      const auto [other, open_order] = it->second;
      int order = pending_bond_ != 0 ? pending_bond_ : open_order;
      if (pending_bond_ != 0 && open_order != 0 && pending_bond_ != open_order) {
        fail(ErrorCode::Parse, "conflicting bond orders on ring closure " + std::to_string(label));
      }
      if (order == 0) order = 1;
      add_bond(other, prev_, order);
      rings_.erase(it);
    }
    pending_bond_ = 0;
  }

  void assign_hydrogens() {
    std::vector<int> bond_sum(atoms_.size(), 0);
    for (const auto& b : bonds_) {
      bond_sum[b.i] += b.order;
      bond_sum[b.j] += b.order;
    }
    for (size_t i = 0; i < atoms_.size(); ++i) {
      if (!organic_[i]) continue;
      const ValenceEntry* rule = find_valence(atoms_[i].element);
      int target = -1;
      for (int k = 0; k < rule->count; ++k) {
        if (rule->valences[k] >= bond_sum[i]) {
          target = rule->valences[k];
          break;
        }
      }
      if (target < 0) {
        throw Error(ErrorCode::Valence,
                    "atom " + std::to_string(i) + " (" + atoms_[i].element + ") has bond order sum " +
                        std::to_string(bond_sum[i]) + ", above its maximum valence " +
                        std::to_string(rule->valences[rule->count - 1]) + " in '" +
                        std::string(text_) + "'");
      }
      atoms_[i].implicit_h = target - bond_sum[i];
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int prev_ = -1;
  int pending_bond_ = 0;
  std::vector<int> branches_;
  std::map<int, std::pair<int, int>> rings_;
  std::set<std::pair<int, int>> edges_;
  std::vector<Atom> atoms_;
  std::vector<bool> organic_;
  std::vector<Bond> bonds_;
};

}  // namespace

MolecularGraph parse_smiles(std::string_view text) { return SmilesParser(text).run(); }

// ---------------------------------------------------------------------------
// JSON

MolecularGraph parse_graph_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  auto schema = [](const std::string& what) { return Error(ErrorCode::Schema, what); };
  if (!doc.is_object()) throw schema("graph JSON must be an object");
  if (!doc.contains("atoms") || !doc["atoms"].is_array()) throw schema("missing array field 'atoms'");
  if (!doc.contains("bonds") || !doc["bonds"].is_array()) throw schema("missing array field 'bonds'");

  std::vector<Atom> atoms;
  for (const auto& entry : doc["atoms"]) {
    if (!entry.is_object()) throw schema("atom entry must be an object");
    if (!entry.contains("element") || !entry["element"].is_string()) {
      throw schema("atom missing string field 'element'");
    }
    if (!entry.contains("implicit_h") || !entry["implicit_h"].is_number_integer()) {
      throw schema("atom missing integer field 'implicit_h'");
    }
    Atom atom;
    atom.element = entry["element"].get<std::string>();
    atom.implicit_h = entry["implicit_h"].get<int>();
    if (atom.implicit_h < 0) throw schema("implicit_h must be >= 0");
    if (entry.contains("charge")) {
      if (!entry["charge"].is_number_integer()) throw schema("'charge' must be an integer");
      atom.charge = entry["charge"].get<int>();
    }
    atoms.push_back(std::move(atom));
  }
  std::vector<Bond> bonds;
  for (const auto& entry : doc["bonds"]) {
    if (!entry.is_array() || entry.size() != 3) throw schema("bond must be [i, j, order]");
    for (const auto& v : entry) {
      if (!v.is_number_integer()) throw schema("bond fields must be integers");
    }
    bonds.push_back({entry[0].get<int>(), entry[1].get<int>(), entry[2].get<int>()});
  }
  return MolecularGraph(std::move(atoms), std::move(bonds));
}

std::string to_graph_json(const MolecularGraph& g) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : g.atoms()) {
    nlohmann::json entry = {{"element", a.element}, {"implicit_h", a.implicit_h}};
    if (a.charge != 0) entry["charge"] = a.charge;
    atoms.push_back(std::move(entry));
  }
  nlohmann::json bonds = nlohmann::json::array();
  for (const auto& b : g.bonds()) bonds.push_back({b.i, b.j, b.order});
  return nlohmann::json{{"atoms", atoms}, {"bonds", bonds}}.dump();
}

// ---------------------------------------------------------------------------

Eigen::MatrixXi laplacian_int(const MolecularGraph& g) {
  const int n = g.size();
  Eigen::MatrixXi lap = Eigen::MatrixXi::Zero(n, n);
  for (const auto& b : g.bonds()) {
    lap(b.i, b.j) = -1;
    lap(b.j, b.i) = -1;
    lap(b.i, b.i) += 1;
    lap(b.j, b.j) += 1;
  }
  return lap;
}

Eigen::MatrixXd laplacian(const MolecularGraph& g) { return laplacian_int(g).cast<double>(); }

Eigen::MatrixXi bfs_distances(const MolecularGraph& g) {
  const int n = g.size();
  Eigen::MatrixXi dist = Eigen::MatrixXi::Constant(n, n, kUnreachable);
  std::vector<int> queue;
  queue.reserve(n);
  for (int start = 0; start < n; ++start) {
    queue.clear();
    queue.push_back(start);
    dist(start, start) = 0;
    for (size_t head = 0; head < queue.size(); ++head) {
      const int node = queue[head];
      for (int next : g.neighbors(node)) {
        if (dist(start, next) == kUnreachable) {
          dist(start, next) = dist(start, node) + 1;
          queue.push_back(next);
        }
      }
    }
  }
  return dist;
}

}  // namespace gtlens
