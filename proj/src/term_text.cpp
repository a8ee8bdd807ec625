#include <algorithm>
#include <cctype>
#include <functional>

#include "itrs/term.hpp"

namespace itrs {

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '#';
}

class TermParser {
 public:
  TermParser(std::string_view text, const Signature* sig) : text_(text), sig_(sig) {}

  Term run() {
    auto root = parse();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return graph_.seal(root);
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(message, line, col);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(std::string_view token) {
    skip_ws();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!eat(token)) fail("expected '" + std::string(token) + "'");
  }

  std::string identifier() {
    skip_ws();
    auto start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    if (start == pos_) fail("expected an identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  bool at_binder() {
    skip_ws();
    if (text_.substr(pos_, 2) == "\xCE\xBC") return true;  // μ
    if (text_.substr(pos_, 2) == "mu" &&
        (pos_ + 2 == text_.size() || !is_ident_char(text_[pos_ + 2]))) {
      return true;
    }
    return false;
  }

  std::uint32_t parse() {
    if (at_binder()) {
      pos_ += 2;
      auto name = identifier();
      expect(".");
      auto alias = graph_.add_alias();
      bound_.push_back({name, alias});
      auto body = parse();
      bound_.pop_back();
      graph_.set_alias(alias, body);
      return alias;
    }
    auto name = identifier();
    for (auto it = bound_.rbegin(); it != bound_.rend(); ++it) {
      if (it->first == name) {
        if (eat("(")) fail("μ-variable '" + name + "' cannot take arguments");
        return it->second;
      }
    }
    bool has_args = eat("(");
    std::vector<std::uint32_t> kids;
    if (has_args && !eat(")")) {
      do {
        kids.push_back(parse());
      } while (eat(","));
      expect(")");
    }
    bool is_symbol;
    if (sig_) {
      is_symbol = sig_->contains(name);
      if (!is_symbol && has_args) fail("unknown function symbol '" + name + "'");
      if (is_symbol && *sig_->arity(name) != kids.size()) {
        fail("symbol '" + name + "' expects " + std::to_string(*sig_->arity(name)) +
             " arguments, got " + std::to_string(kids.size()));
      }
    } else {
      is_symbol = has_args || !std::islower(static_cast<unsigned char>(name.front()));
    }
    if (is_symbol) return graph_.add_app(name, std::move(kids));
    return graph_.add_var(name);
  }

  std::string_view text_;
  const Signature* sig_;
  std::size_t pos_ = 0;
  TermGraph graph_;
  std::vector<std::pair<std::string, std::uint32_t>> bound_;
};

// Nodes that can reach themselves.
std::vector<bool> cyclic_nodes(const Term& t) {
  const auto n = t.size();
  std::vector<bool> out(n, false);
  for (std::uint32_t s = 0; s < n; ++s) {
    std::vector<bool> seen(n, false);
    std::vector<std::uint32_t> stack(t.node(s).kids.begin(), t.node(s).kids.end());
    while (!stack.empty() && !out[s]) {
      auto v = stack.back();
      stack.pop_back();
      if (v == s) out[s] = true;
      if (seen[v]) continue;
      seen[v] = true;
      for (auto k : t.node(v).kids) stack.push_back(k);
    }
  }
  return out;
}

}  // namespace

Term parse_term(std::string_view text, const Signature* sig) {
  return TermParser(text, sig).run();
}

std::string Term::to_string() const {
  auto cyclic = cyclic_nodes(*this);
  std::set<std::string> taken = variables();
  for (const auto& s : symbols()) taken.insert(s);
  std::vector<std::string> names;
  auto binder_name = [&](std::size_t k) {
    while (names.size() <= k) {
      static const char* base[] = {"X", "Y", "Z"};
      std::size_t i = names.size();
      for (;; ++i) {
        std::string cand = i < 3 ? base[i] : "X" + std::to_string(i - 2);
        if (!taken.count(cand) && std::find(names.begin(), names.end(), cand) == names.end()) {
          names.push_back(cand);
          break;
        }
      }
    }
    return names[k];
  };

  // Current path: node -> (binder index, used flag).
  std::map<std::uint32_t, std::pair<std::size_t, bool>> path;
  std::size_t open_binders = 0;
  std::function<std::string(std::uint32_t)> go = [&](std::uint32_t n) -> std::string {
    if (auto it = path.find(n); it != path.end()) {
      it->second.second = true;
      return binder_name(it->second.first);
    }
    const auto& nd = node(n);
    std::string body = nd.label;
    bool binder = cyclic[n];
    if (binder) path[n] = {open_binders++, false};
    if (!nd.is_var && !nd.kids.empty()) {
      body += '(';
      for (std::size_t i = 0; i < nd.kids.size(); ++i) {
        if (i) body += ',';
        body += go(nd.kids[i]);
      }
      body += ')';
    }
    if (binder) {
      auto [idx, used] = path[n];
      path.erase(n);
      --open_binders;
      if (used) body = "μ" + binder_name(idx) + "." + body;
    }
    return body;
  };
  return go(0);
}

}  // namespace itrs
