#include "itrs/itrs_file.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace itrs {

const Term* ItrsFile::term(const std::string& name) const {
  for (const auto& [n, t] : terms) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '#';
}

// Splits on commas that are not nested inside parentheses.
std::vector<std::string> split_top(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

Component default_component(const std::string& metric) {
  return metric == "id" ? Component::identity() : Component::halving();
}

class FileParser {
 public:
  FileParser(std::string_view text, bool strict) : strict_(strict) {
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t n = 0;
    while (std::getline(in, raw)) {
      ++n;
      auto cut = raw.find("//");
      if (cut != std::string::npos) raw.erase(cut);
      auto t = trim(raw);
      if (!t.empty()) lines_.push_back({n, raw});
    }
  }

  ItrsFile run() {
    // Declarations first, so that rules and terms can use any symbol.
    for (const auto& line : lines_) {
      auto kw = keyword(line);
      if (kw == "metric") parse_metric(line);
    }
    for (const auto& line : lines_) {
      if (keyword(line) == "sig") parse_sig(line);
    }
    for (const auto& [name, comps] : pending_) {
      std::vector<Component> cs = comps;
      if (cs.empty()) cs.assign(*file_.system.sig.arity(name), default_component(file_.metric_name));
      file_.system.metric.set(name, std::move(cs));
    }
    for (const auto& line : lines_) {
      auto kw = keyword(line);
      if (kw == "rule") {
        parse_rule(line);
      } else if (kw == "term") {
        parse_named_term(line);
      } else if (kw != "metric" && kw != "sig") {
        throw ParseError("unknown declaration '" + kw + "'", line.number, column_of(line, kw));
      }
    }
    if (file_.metric_name == "granular" && !file_.system.metric.is_granular()) {
      throw ParseError("metric declared granular but a component is neither lazy nor strict", 1, 1);
    }
    if (strict_) {
      auto violations = validate_metric(file_.system.metric);
      if (!violations.empty()) {
        const auto& v = violations.front();
        throw Error("metric law violated by " + v.symbol + " argument " + std::to_string(v.arg) + ": " +
                    v.reason);
      }
      validate_itrs(file_.system);
    }
    return std::move(file_);
  }

 private:
  static std::string keyword(const Line& line) {
    auto t = trim(line.text);
    std::size_t i = 0;
    while (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) ++i;
    return t.substr(0, i);
  }

  static std::size_t column_of(const Line& line, std::string_view what) {
    auto p = line.text.find(what);
    return p == std::string::npos ? 1 : p + 1;
  }

  // The text after the keyword, with its column offset in the line.
  static std::pair<std::string, std::size_t> rest(const Line& line, std::string_view kw) {
    auto p = line.text.find(kw) + kw.size();
    return {line.text.substr(p), p};
  }

  Term term_at(const Line& line, const std::string& text, std::size_t offset) {
    try {
      return parse_term(text, &file_.system.sig);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line.number, offset + e.column());
    }
  }

  void parse_metric(const Line& line) {
    auto name = trim(rest(line, "metric").first);
    if (name != "infty" && name != "id" && name != "granular") {
      throw ParseError("unknown metric '" + name + "' (expected infty, id or granular)", line.number,
                       column_of(line, name));
    }
    file_.metric_name = name;
  }

  void parse_sig(const Line& line) {
    auto [body, offset] = rest(line, "sig");
    std::size_t i = 0;
    auto skip = [&] {
      while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    };
    auto fail = [&](const std::string& msg) { throw ParseError(msg, line.number, offset + i + 1); };
    skip();
    std::size_t start = i;
    while (i < body.size() && is_ident_char(body[i])) ++i;
    auto name = body.substr(start, i - start);
    if (name.empty()) fail("expected a symbol name");
    if (i >= body.size() || body[i] != '/') fail("expected '/' and an arity after " + name);
    ++i;
    start = i;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
    if (start == i) fail("expected an arity");
    auto arity = static_cast<std::uint32_t>(std::stoul(body.substr(start, i - start)));
    try {
      file_.system.sig.add(name, arity);
    } catch (const Error& e) {
      fail(e.what());
    }
    std::vector<Component> comps;
    skip();
    if (i < body.size() && body[i] == '[') {
      auto close = body.find(']', i);
      if (close == std::string::npos) fail("missing ']'");
      for (const auto& item : split_top(body.substr(i + 1, close - i - 1))) {
        try {
          comps.push_back(parse_component(item));
        } catch (const Error& e) {
          fail(e.what());
        }
      }
      if (comps.size() != arity) {
        fail(name + " has arity " + std::to_string(arity) + " but " + std::to_string(comps.size()) +
             " components");
      }
      i = close + 1;
      skip();
    }
    if (i < body.size() && body[i] == '@') {
      ++i;
      start = i;
      while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
      if (start == i) fail("expected a colour number after '@'");
      file_.system.colors[name] = std::stoi(body.substr(start, i - start));
      skip();
    }
    if (i != body.size()) fail("unexpected text after the declaration of " + name);
    pending_.emplace_back(name, std::move(comps));
  }

  void parse_rule(const Line& line) {
    auto [body, offset] = rest(line, "rule");
    auto colon = body.find(':');
    if (colon == std::string::npos) throw ParseError("expected 'rule NAME: lhs -> rhs'", line.number, offset + 1);
    auto name = trim(body.substr(0, colon));
    if (name.empty() || !std::all_of(name.begin(), name.end(), is_ident_char)) {
      throw ParseError("bad rule name '" + name + "'", line.number, offset + 1);
    }
    if (file_.system.find_rule(name)) throw ParseError("duplicate rule " + name, line.number, offset + 1);
    auto arrow = body.find("->", colon);
    if (arrow == std::string::npos) throw ParseError("expected '->'", line.number, offset + colon + 2);
    Rule r{name, term_at(line, body.substr(colon + 1, arrow - colon - 1), offset + colon + 1),
           term_at(line, body.substr(arrow + 2), offset + arrow + 2)};
    if (strict_) {
      try {
        validate_rule(r);
      } catch (const RuleRejected& e) {
        throw RuleRejected("line " + std::to_string(line.number) + ": " + e.what());
      }
    }
    file_.system.rules.push_back(std::move(r));
  }

  void parse_named_term(const Line& line) {
    auto [body, offset] = rest(line, "term");
    auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'term NAME = ...'", line.number, offset + 1);
    auto name = trim(body.substr(0, eq));
    if (name.empty()) throw ParseError("missing term name", line.number, offset + 1);
    if (file_.term(name)) throw ParseError("duplicate term " + name, line.number, offset + 1);
    file_.terms.emplace_back(name, term_at(line, body.substr(eq + 1), offset + eq + 1));
  }

  bool strict_;
  std::vector<Line> lines_;
  std::vector<std::pair<std::string, std::vector<Component>>> pending_;
  ItrsFile file_;
};

}  // namespace

ItrsFile parse_itrs_file(std::string_view text, bool strict) { return FileParser(text, strict).run(); }

ItrsFile load_itrs_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_itrs_file(buf.str(), strict);
}

Itrs parse_itrs(std::string_view text) { return parse_itrs_file(text, true).system; }

std::string print_itrs(const ItrsFile& file) {
  std::ostringstream out;
  out << "metric " << file.metric_name << '\n';
  for (const auto& [name, arity] : file.system.sig.symbols()) {
    out << "sig " << name << '/' << arity;
    if (arity > 0 && file.system.metric.has(name)) {
      out << " [";
      const auto& comps = file.system.metric.components(name);
      for (std::size_t i = 0; i < comps.size(); ++i) out << (i ? ", " : "") << comps[i].to_string();
      out << ']';
    }
    if (auto it = file.system.colors.find(name); it != file.system.colors.end()) out << " @" << it->second;
    out << '\n';
  }
  for (const auto& r : file.system.rules) out << "rule " << r.name << ": " << r.to_string() << '\n';
  for (const auto& [name, t] : file.terms) out << "term " << name << " = " << t.to_string() << '\n';
  return out.str();
}

}  // namespace itrs
