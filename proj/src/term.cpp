#include "itrs/term.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace itrs {

// ---------------------------------------------------------------------------
// Signature

void Signature::add(const std::string& name, std::uint32_t arity) {
  auto [it, inserted] = symbols_.emplace(name, arity);
  if (!inserted && it->second != arity) {
    throw Error("symbol '" + name + "' declared with arities " + std::to_string(it->second) +
                " and " + std::to_string(arity));
  }
}

std::optional<std::uint32_t> Signature::arity(const std::string& name) const {
  auto it = symbols_.find(name);
  if (it == symbols_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Position

Position::Position(std::vector<std::uint32_t> steps) : steps_(std::move(steps)) {
  for (auto s : steps_) {
    if (s == 0) throw Error("position indices are 1-based");
  }
}

Position::Position(std::initializer_list<std::uint32_t> steps)
    : Position(std::vector<std::uint32_t>(steps)) {}

Position Position::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text.empty() || text == "λ" || text == "eps" || text == "root") return {};
  std::vector<std::uint32_t> steps;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      throw Error("malformed position '" + std::string(text) + "'");
    }
    std::uint64_t v = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      v = v * 10 + static_cast<std::uint64_t>(text[i] - '0');
      if (v > 0xffffffffULL) throw Error("position index out of range");
      ++i;
    }
    steps.push_back(static_cast<std::uint32_t>(v));
    if (i == text.size()) break;
    if (text[i] == '.') {
      ++i;
    } else if (text.substr(i, 2) == "\xC2\xB7") {  // U+00B7 middle dot
      i += 2;
    } else {
      throw Error("malformed position '" + std::string(text) + "'");
    }
    if (i == text.size()) throw Error("malformed position '" + std::string(text) + "'");
  }
  return Position(std::move(steps));
}

Position Position::child(std::uint32_t i) const {
  auto s = steps_;
  s.push_back(i);
  return Position(std::move(s));
}

Position Position::concat(const Position& other) const {
  auto s = steps_;
  s.insert(s.end(), other.steps_.begin(), other.steps_.end());
  return Position(std::move(s));
}

Position Position::prefix(std::size_t n) const {
  n = std::min(n, steps_.size());
  return Position(std::vector<std::uint32_t>(steps_.begin(), steps_.begin() + static_cast<long>(n)));
}

bool Position::is_prefix_of(const Position& other) const {
  return steps_.size() <= other.steps_.size() &&
         std::equal(steps_.begin(), steps_.end(), other.steps_.begin());
}

Position Position::strip_prefix(const Position& prefix) const {
  if (!prefix.is_prefix_of(*this)) throw Error("strip_prefix: not a prefix");
  return Position(std::vector<std::uint32_t>(steps_.begin() + static_cast<long>(prefix.length()),
                                             steps_.end()));
}

std::string Position::to_string() const {
  if (steps_.empty()) return "λ";
  std::string out;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(steps_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Term

namespace {

std::size_t hash_nodes(const std::vector<Node>& nodes) {
  std::size_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  std::hash<std::string> hs;
  for (const auto& n : nodes) {
    mix(hs(n.label));
    mix(n.is_var ? 1 : 2);
    mix(n.kids.size());
    for (auto k : n.kids) mix(k);
  }
  return h;
}

bool has_cycle(const std::vector<Node>& nodes) {
  // 0 = unseen, 1 = on stack, 2 = done
  std::vector<char> state(nodes.size(), 0);
  std::vector<std::pair<std::uint32_t, std::size_t>> stack;
  for (std::uint32_t s = 0; s < nodes.size(); ++s) {
    if (state[s]) continue;
    stack.push_back({s, 0});
    state[s] = 1;
    while (!stack.empty()) {
      auto& [n, i] = stack.back();
      if (i < nodes[n].kids.size()) {
        auto k = nodes[n].kids[i++];
        if (state[k] == 1) return true;
        if (state[k] == 0) {
          state[k] = 1;
          stack.push_back({k, 0});
        }
      } else {
        state[n] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

}  // namespace

Term::Term() : Term(variable(kFallbackVar)) {}

Term::Term(std::vector<Node> canonical) {
  finite_ = !has_cycle(canonical);
  hash_ = hash_nodes(canonical);
  nodes_ = std::make_shared<const std::vector<Node>>(std::move(canonical));
}

Term Term::variable(const std::string& name) {
  return Term(std::vector<Node>{Node{name, true, {}}});
}

Term Term::apply(const std::string& symbol, const std::vector<Term>& args) {
  TermGraph g;
  std::vector<std::uint32_t> kids;
  kids.reserve(args.size());
  for (const auto& a : args) kids.push_back(g.add_term(a));
  auto root = g.add_app(symbol, std::move(kids));
  return g.seal(root);
}

Term Term::at_node(std::uint32_t index) const {
  if (index == 0) return *this;
  const auto& src = *nodes_;
  // The reachable part of a minimal graph is minimal; only renumber.
  std::vector<std::int64_t> order(src.size(), -1);
  std::vector<std::uint32_t> queue{index};
  order[index] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (auto k : src[queue[head]].kids) {
      if (order[k] < 0) {
        order[k] = static_cast<std::int64_t>(queue.size());
        queue.push_back(k);
      }
    }
  }
  std::vector<Node> out;
  out.reserve(queue.size());
  for (auto n : queue) {
    Node copy{src[n].label, src[n].is_var, {}};
    copy.kids.reserve(src[n].kids.size());
    for (auto k : src[n].kids) copy.kids.push_back(static_cast<std::uint32_t>(order[k]));
    out.push_back(std::move(copy));
  }
  return Term(std::move(out));
}

std::set<std::string> Term::variables() const {
  std::set<std::string> out;
  for (const auto& n : *nodes_) {
    if (n.is_var) out.insert(n.label);
  }
  return out;
}

std::set<std::string> Term::symbols() const {
  std::set<std::string> out;
  for (const auto& n : *nodes_) {
    if (!n.is_var) out.insert(n.label);
  }
  return out;
}

bool operator<(const Term& a, const Term& b) {
  const auto& x = *a.nodes_;
  const auto& y = *b.nodes_;
  if (x.size() != y.size()) return x.size() < y.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& n = x[i];
    const auto& m = y[i];
    if (n.is_var != m.is_var) return n.is_var < m.is_var;
    if (n.label != m.label) return n.label < m.label;
    if (n.kids != m.kids) return n.kids < m.kids;
  }
  return false;
}

// ---------------------------------------------------------------------------
// TermGraph

std::uint32_t TermGraph::add_var(const std::string& name) {
  nodes_.push_back(Node{name, true, {}});
  alias_.push_back(false);
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::uint32_t TermGraph::add_app(const std::string& symbol, std::vector<std::uint32_t> kids) {
  nodes_.push_back(Node{symbol, false, std::move(kids)});
  alias_.push_back(false);
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::uint32_t TermGraph::add_alias() {
  nodes_.push_back(Node{});
  alias_.push_back(true);
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

void TermGraph::set_alias(std::uint32_t alias, std::uint32_t target) {
  if (!alias_.at(alias)) throw Error("set_alias on a non-alias node");
  nodes_[alias].kids = {target};
}

void TermGraph::set_kid(std::uint32_t node, std::size_t i, std::uint32_t target) {
  nodes_.at(node).kids.at(i) = target;
}

std::uint32_t TermGraph::add_term(const Term& t) {
  auto offset = static_cast<std::uint32_t>(nodes_.size());
  for (const auto& n : t.nodes()) {
    Node copy{n.label, n.is_var, {}};
    copy.kids.reserve(n.kids.size());
    for (auto k : n.kids) copy.kids.push_back(k + offset);
    nodes_.push_back(std::move(copy));
    alias_.push_back(false);
  }
  return offset;
}

Term TermGraph::seal(std::uint32_t root) const {
  const std::size_t total = nodes_.size();
  // Resolve aliases.
  std::vector<std::int64_t> target(total, -1);
  auto resolve = [&](std::uint32_t n) -> std::uint32_t {
    std::uint32_t cur = n;
    std::size_t steps = 0;
    while (alias_[cur]) {
      if (nodes_[cur].kids.empty()) throw Error("unresolved μ-binder");
      cur = nodes_[cur].kids[0];
      if (++steps > total) throw Error("unguarded μ-binder (variable bound to itself)");
    }
    return cur;
  };
  for (std::uint32_t i = 0; i < total; ++i) target[i] = resolve(i);

  // Reachable real nodes, local numbering.
  std::vector<std::int64_t> local(total, -1);
  std::vector<std::uint32_t> reach;
  auto r0 = static_cast<std::uint32_t>(target[root]);
  local[r0] = 0;
  reach.push_back(r0);
  for (std::size_t head = 0; head < reach.size(); ++head) {
    for (auto k : nodes_[reach[head]].kids) {
      auto t = static_cast<std::uint32_t>(target[k]);
      if (local[t] < 0) {
        local[t] = static_cast<std::int64_t>(reach.size());
        reach.push_back(t);
      }
    }
  }
  const std::size_t n = reach.size();
  std::vector<std::vector<std::uint32_t>> kids(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto k : nodes_[reach[i]].kids) {
      kids[i].push_back(static_cast<std::uint32_t>(local[target[k]]));
    }
  }

  // Tarjan's SCC (iterative); SCCs complete sinks first.
  std::vector<std::int64_t> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<std::uint32_t> stack, comp_order;
  std::vector<bool> comp_cyclic;
  std::int64_t counter = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> call;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (index[s] >= 0) continue;
    call.push_back({s, 0});
    index[s] = low[s] = counter++;
    stack.push_back(s);
    on_stack[s] = 1;
    while (!call.empty()) {
      auto& [v, i] = call.back();
      if (i < kids[v].size()) {
        auto w = kids[v][i++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          auto id = static_cast<std::int64_t>(comp_cyclic.size());
          std::size_t members = 0;
          std::uint32_t w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp[w] = id;
            comp_order.push_back(w);
            ++members;
          } while (w != v);
          bool self_loop = std::find(kids[v].begin(), kids[v].end(), v) != kids[v].end();
          comp_cyclic.push_back(members > 1 || self_loop);
        }
        auto done = v;
        call.pop_back();
        if (!call.empty()) {
          auto parent = call.back().first;
          low[parent] = std::min(low[parent], low[done]);
        }
      }
    }
  }

  // Infinite nodes reach a cycle. comp_order lists nodes sinks-first.
  std::vector<bool> infinite(n, false);
  for (auto v : comp_order) {
    bool inf = comp_cyclic[static_cast<std::size_t>(comp[v])];
    for (auto k : kids[v]) inf = inf || infinite[k];
    infinite[v] = inf;
  }
  // comp_order places SCC members together but a member's kid in the same
  // SCC may come later; propagate once more for cyclic SCC members.
  for (auto v : comp_order) {
    if (comp_cyclic[static_cast<std::size_t>(comp[v])]) infinite[v] = true;
  }

  // Label interning.
  std::map<std::pair<bool, std::string>, std::int64_t> labels;
  auto label_id = [&](std::uint32_t v) {
    const auto& nd = nodes_[reach[v]];
    auto [it, _] = labels.emplace(std::make_pair(nd.is_var, nd.label),
                                  static_cast<std::int64_t>(labels.size()));
    return it->second;
  };

  // Finite nodes: hash-consing bottom-up.
  std::vector<std::int64_t> cls(n, -1);
  std::map<std::vector<std::int64_t>, std::int64_t> finite_classes;
  for (auto v : comp_order) {
    if (infinite[v]) continue;
    std::vector<std::int64_t> key{label_id(v)};
    for (auto k : kids[v]) key.push_back(cls[k]);
    auto [it, _] = finite_classes.emplace(std::move(key), static_cast<std::int64_t>(finite_classes.size()));
    cls[v] = it->second;
  }
  const auto finite_count = static_cast<std::int64_t>(finite_classes.size());

  // Infinite nodes: Moore partition refinement.
  std::vector<std::uint32_t> inf_nodes;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (infinite[v]) inf_nodes.push_back(v);
  }
  if (!inf_nodes.empty()) {
    std::map<std::vector<std::int64_t>, std::int64_t> classes;
    for (auto v : inf_nodes) {
      std::vector<std::int64_t> key{label_id(v), static_cast<std::int64_t>(kids[v].size())};
      for (auto k : kids[v]) key.push_back(infinite[k] ? -1 : cls[k]);
      auto [it, _] = classes.emplace(std::move(key), finite_count + static_cast<std::int64_t>(classes.size()));
      cls[v] = it->second;
    }
    std::size_t count = classes.size();
    while (true) {
      std::map<std::vector<std::int64_t>, std::int64_t> next;
      std::vector<std::int64_t> fresh(n, -1);
      for (auto v : inf_nodes) {
        std::vector<std::int64_t> key{cls[v]};
        for (auto k : kids[v]) key.push_back(cls[k]);
        auto [it, _] = next.emplace(std::move(key), finite_count + static_cast<std::int64_t>(next.size()));
        fresh[v] = it->second;
      }
      for (auto v : inf_nodes) cls[v] = fresh[v];
      if (next.size() == count) break;
      count = next.size();
    }
  }

  // Quotient, numbered breadth-first from the root.
  std::unordered_map<std::int64_t, std::uint32_t> canon;
  std::vector<std::uint32_t> reps;
  canon[cls[0]] = 0;
  reps.push_back(0);
  for (std::size_t head = 0; head < reps.size(); ++head) {
    for (auto k : kids[reps[head]]) {
      if (canon.emplace(cls[k], static_cast<std::uint32_t>(reps.size())).second) reps.push_back(k);
    }
  }
  std::vector<Node> out;
  out.reserve(reps.size());
  for (auto v : reps) {
    const auto& nd = nodes_[reach[v]];
    Node copy{nd.label, nd.is_var, {}};
    for (auto k : kids[v]) copy.kids.push_back(canon.at(cls[k]));
    out.push_back(std::move(copy));
  }
  return Term(std::move(out));
}

// ---------------------------------------------------------------------------
// Operations

std::optional<std::uint32_t> node_at(const Term& t, const Position& p) {
  std::uint32_t cur = 0;
  for (auto step : p.steps()) {
    const auto& nd = t.node(cur);
    if (nd.is_var || step > nd.kids.size()) return std::nullopt;
    cur = nd.kids[step - 1];
  }
  return cur;
}

Term subterm(const Term& t, const Position& p) {
  auto n = node_at(t, p);
  if (!n) return Term::variable(kFallbackVar);
  return t.at_node(*n);
}

Term replace(const Term& t, const Position& p, const Term& u) {
  if (!node_at(t, p)) return t;
  if (p.is_root()) return u;
  TermGraph g;
  auto offset = g.add_term(t);
  auto urot = g.add_term(u);
  // Unfold the path: copy each node along p so the edit does not leak
  // through sharing or cycles.
  std::vector<std::uint32_t> copies;
  std::uint32_t cur = 0;
  for (auto step : p.steps()) {
    const auto& nd = t.node(cur);
    std::vector<std::uint32_t> kids;
    for (auto k : nd.kids) kids.push_back(k + offset);
    copies.push_back(g.add_app(nd.label, std::move(kids)));
    cur = nd.kids[step - 1];
  }
  for (std::size_t j = 0; j < copies.size(); ++j) {
    auto next = j + 1 < copies.size() ? copies[j + 1] : urot;
    g.set_kid(copies[j], p[j] - 1, next);
  }
  return g.seal(copies.front());
}

std::vector<Position> positions(const Term& t, std::size_t depth_bound) {
  std::vector<Position> out;
  std::vector<std::pair<std::uint32_t, Position>> stack{{0, Position{}}};
  while (!stack.empty()) {
    auto [n, p] = std::move(stack.back());
    stack.pop_back();
    const auto& nd = t.node(n);
    if (p.length() < depth_bound) {
      for (std::size_t i = nd.kids.size(); i-- > 0;) {
        stack.push_back({nd.kids[i], p.child(static_cast<std::uint32_t>(i + 1))});
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

bool topequ(const Term& t, const Position& p, const Term& u) {
  std::uint32_t a = 0, b = 0;
  for (auto step : p.steps()) {
    const auto& x = t.node(a);
    const auto& y = u.node(b);
    if (x.is_var || y.is_var || x.label != y.label || x.kids.size() != y.kids.size()) return false;
    if (step > x.kids.size()) return false;
    a = x.kids[step - 1];
    b = y.kids[step - 1];
  }
  return true;
}

bool bisimilar(const Term& t, const Term& u) { return t == u; }

Term substitute(const Substitution& sigma, const Term& t) {
  if (sigma.empty()) return t;
  TermGraph g;
  std::map<std::string, std::uint32_t> roots;
  for (const auto& n : t.nodes()) {
    if (n.is_var) {
      auto it = sigma.find(n.label);
      if (it != sigma.end() && !roots.count(n.label)) roots[n.label] = g.add_term(it->second);
    }
  }
  if (roots.empty()) return t;
  std::vector<std::uint32_t> idx(t.size());
  for (auto& i : idx) i = g.add_alias();
  for (std::uint32_t i = 0; i < t.size(); ++i) {
    const auto& n = t.node(i);
    if (n.is_var) {
      auto it = roots.find(n.label);
      g.set_alias(idx[i], it != roots.end() ? it->second : g.add_var(n.label));
    } else {
      std::vector<std::uint32_t> kids;
      for (auto k : n.kids) kids.push_back(idx[k]);
      g.set_alias(idx[i], g.add_app(n.label, std::move(kids)));
    }
  }
  return g.seal(idx[0]);
}

Term rename_symbols(const Term& t, const std::map<std::string, std::string>& renaming) {
  TermGraph g;
  std::vector<std::uint32_t> idx(t.size());
  for (auto& i : idx) i = g.add_alias();
  for (std::uint32_t i = 0; i < t.size(); ++i) {
    const auto& n = t.node(i);
    if (n.is_var) {
      g.set_alias(idx[i], g.add_var(n.label));
      continue;
    }
    auto it = renaming.find(n.label);
    std::vector<std::uint32_t> kids;
    for (auto k : n.kids) kids.push_back(idx[k]);
    g.set_alias(idx[i], g.add_app(it == renaming.end() ? n.label : it->second, std::move(kids)));
  }
  return g.seal(idx[0]);
}

std::optional<std::size_t> depth(const Term& t) {
  if (!t.is_finite()) return std::nullopt;
  std::vector<std::int64_t> memo(t.size(), -1);
  std::function<std::size_t(std::uint32_t)> go = [&](std::uint32_t n) -> std::size_t {
    if (memo[n] >= 0) return static_cast<std::size_t>(memo[n]);
    std::size_t d = 0;
    for (auto k : t.node(n).kids) d = std::max(d, go(k) + 1);
    memo[n] = static_cast<std::int64_t>(d);
    return d;
  };
  return go(0);
}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

}  // namespace itrs
