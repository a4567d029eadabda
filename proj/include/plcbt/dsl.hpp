/**
 * @file dsl.hpp
 * @brief Text format for trees: recursive-descent parser with positioned
 *        diagnostics and a canonical serializer.
 *
 *   document := "tree" IDENT block ;
 *   block    := "{" node+ "}" ;
 *   node     := ("sequence" | "fallback") IDENT? block
 *             | ("action" | "condition") IDENT params? ;
 *   params   := "(" IDENT "=" value ("," IDENT "=" value)* ")" ;
 *   value    := NUMBER | STRING | "true" | "false" ;
 *
 * Comments run from "#" to the end of the line. A leaf's IDENT is its node id
 * and, unless a `use` parameter names another one, its binding. A control
 * node without a name gets the id <kind>_<pre-order index>.
 */

#ifndef PLCBT_DSL_HPP_
#define PLCBT_DSL_HPP_

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "plcbt/status.hpp"
#include "plcbt/tree.hpp"

namespace plcbt {

/// 1-based; columns count code points.
struct SourcePos {
  int line = 1;
  int column = 1;

  friend bool operator==(const SourcePos&, const SourcePos&) = default;
};

struct Diagnostic {
  SourcePos pos;
  std::string message;

  std::string ToString() const {
    return std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message;
  }
};

/// Reserved parameter naming the binding of a leaf whose id differs from it.
inline constexpr std::string_view kUseParam = "use";

struct DslDocument {
  std::string source;
  TreeSpec spec;
  std::map<std::string, SourcePos> spans;  ///< node id -> first occurrence
  std::vector<Diagnostic> diagnostics;

  bool ok() const noexcept { return diagnostics.empty(); }

  std::string DiagnosticsText() const {
    std::string out;
    for (const auto& d : diagnostics) out += d.ToString() + "\n";
    return out;
  }
};

class DslError : public std::runtime_error {
 public:
  explicit DslError(std::vector<Diagnostic> diagnostics)
      : std::runtime_error(diagnostics.empty() ? "dsl error" : diagnostics.front().ToString()),
        diagnostics_(std::move(diagnostics)) {}
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

namespace dsl_detail {

inline constexpr int kMaxNesting = 256;

inline bool IsIdentStart(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
inline bool IsIdentChar(char c) { return IsIdentStart(c) || (c >= '0' && c <= '9'); }
inline bool IsDigit(char c) { return c >= '0' && c <= '9'; }

inline bool IsIdent(std::string_view s) {
  if (s.empty() || !IsIdentStart(s.front())) return false;
  for (char c : s) {
    if (!IsIdentChar(c)) return false;
  }
  return true;
}

/// Byte offset of the first invalid UTF-8 sequence, if any.
inline std::optional<std::size_t> FindInvalidUtf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (b < 0x80) {
      ++i;
      continue;
    } else if ((b & 0xE0) == 0xC0) {
      len = 2;
      cp = b & 0x1F;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3;
      cp = b & 0x0F;
    } else if ((b & 0xF8) == 0xF0) {
      len = 4;
      cp = b & 0x07;
    } else {
      return i;
    }
    if (i + len > s.size()) return i;
    for (std::size_t k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (c & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
    i += len;
  }
  return std::nullopt;
}

enum class Tok { kEnd, kIdent, kNumber, kString, kLBrace, kRBrace, kLParen, kRParen, kEquals, kComma, kError };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;  ///< identifier, number spelling, unescaped string, or error message
  SourcePos pos;
};

inline std::string Describe(const Token& t) {
  switch (t.kind) {
    case Tok::kEnd: return "end of input";
    case Tok::kIdent: return "'" + t.text + "'";
    case Tok::kNumber: return "number " + t.text;
    case Tok::kString: return "string";
    case Tok::kLBrace: return "'{'";
    case Tok::kRBrace: return "'}'";
    case Tok::kLParen: return "'('";
    case Tok::kRParen: return "')'";
    case Tok::kEquals: return "'='";
    case Tok::kComma: return "','";
    case Tok::kError: return t.text;
  }
  return "token";
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : s_(src) {
    if (s_.starts_with("\xEF\xBB\xBF")) i_ = 3;
  }

  Token Next() {
    SkipSpaceAndComments();
    Token t;
    t.pos = pos_;
    if (i_ >= s_.size()) return t;
    const char c = s_[i_];
    auto single = [&](Tok k) {
      Advance();
      t.kind = k;
      return t;
    };
    switch (c) {
      case '{': return single(Tok::kLBrace);
      case '}': return single(Tok::kRBrace);
      case '(': return single(Tok::kLParen);
      case ')': return single(Tok::kRParen);
      case '=': return single(Tok::kEquals);
      case ',': return single(Tok::kComma);
      case '"': return String(t);
      default: break;
    }
    if (IsIdentStart(c)) {
      while (i_ < s_.size() && IsIdentChar(s_[i_])) t.text.push_back(Advance());
      t.kind = Tok::kIdent;
      return t;
    }
    if (IsDigit(c) || c == '-' || c == '+') return Number(t);
    t.kind = Tok::kError;
    t.text = (static_cast<unsigned char>(c) < 0x20 || c == 0x7F) ? "unexpected control character"
                                                                 : "unexpected character '" + CodePointAt(i_) + "'";
    return t;
  }

 private:
  char Advance() {
    const char c = s_[i_++];
    if (c == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++pos_.column;  // continuation bytes share their lead byte's column
    }
    return c;
  }

  std::string CodePointAt(std::size_t i) const {
    std::size_t j = i + 1;
    while (j < s_.size() && (static_cast<unsigned char>(s_[j]) & 0xC0) == 0x80) ++j;
    return std::string(s_.substr(i, j - i));
  }

  void SkipSpaceAndComments() {
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        Advance();
      } else if (c == '#') {
        while (i_ < s_.size() && s_[i_] != '\n') Advance();
      } else {
        break;
      }
    }
  }

  Token Number(Token t) {
    const std::size_t start = i_;
    if (s_[i_] == '-' || s_[i_] == '+') Advance();
    auto digits = [&] {
      std::size_t n = 0;
      while (i_ < s_.size() && IsDigit(s_[i_])) {
        Advance();
        ++n;
      }
      return n;
    };
    bool ok = digits() > 0;
    if (ok && i_ < s_.size() && s_[i_] == '.') {
      Advance();
      ok = digits() > 0;
    }
    if (ok && i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      Advance();
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) Advance();
      ok = digits() > 0;
    }
    if (ok && i_ < s_.size() && IsIdentChar(s_[i_])) ok = false;
    t.text = std::string(s_.substr(start, i_ - start));
    if (!ok) {
      t.kind = Tok::kError;
      t.text = "malformed number '" + t.text + "'";
      return t;
    }
    t.kind = Tok::kNumber;
    return t;
  }

  Token String(Token t) {
    Advance();  // opening quote
    while (true) {
      if (i_ >= s_.size() || s_[i_] == '\n') {
        t.kind = Tok::kError;
        t.text = "unterminated string";
        return t;
      }
      const char c = Advance();
      if (c == '"') break;
      if (c != '\\') {
        t.text.push_back(c);
        continue;
      }
      if (i_ >= s_.size()) continue;  // reported as unterminated next round
      const char e = Advance();
      switch (e) {
        case '"': t.text.push_back('"'); break;
        case '\\': t.text.push_back('\\'); break;
        case 'n': t.text.push_back('\n'); break;
        case 't': t.text.push_back('\t'); break;
        case 'r': t.text.push_back('\r'); break;
        case 'x': {
          int v = 0;
          bool ok = true;
          for (int k = 0; k < 2; ++k) {
            const char h = i_ < s_.size() ? s_[i_] : '\0';
            int d = IsDigit(h) ? h - '0' : (h >= 'a' && h <= 'f') ? h - 'a' + 10 : (h >= 'A' && h <= 'F') ? h - 'A' + 10 : -1;
            if (d < 0) {
              ok = false;
              break;
            }
            Advance();
            v = v * 16 + d;
          }
          if (!ok) {
            t.kind = Tok::kError;
            t.text = "bad \\x escape in string";
            return t;
          }
          t.text.push_back(static_cast<char>(v));
          break;
        }
        default:
          t.kind = Tok::kError;
          t.text = std::string("unknown escape '\\") + e + "' in string";
          return t;
      }
    }
    t.kind = Tok::kString;
    return t;
  }

  std::string_view s_;
  std::size_t i_ = 0;
  SourcePos pos_;
};

/// Stops at the first syntax error: one positioned diagnostic.
struct SyntaxError {
  Diagnostic diag;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.Next(); }

  void Document(DslDocument& doc) {
    ExpectKeyword("tree");
    doc.spec.name = ExpectIdent("tree name");
    const NodeExpr root = Block(std::nullopt, 0);
    if (root.children.size() != 1) {
      // The block of a document holds exactly the root.
      Fail(root_pos_, "a tree holds exactly one root node, found " + std::to_string(root.children.size()));
    }
    if (tok_.kind != Tok::kEnd) Fail(tok_.pos, "expected end of input, found " + Describe(tok_));
    doc.spec = BuildTree(doc.spec.name, root.children.front());
  }

  const std::vector<std::pair<std::string, SourcePos>>& node_pos() const noexcept { return node_pos_; }
  const std::map<std::string, SourcePos>& block_pos() const noexcept { return block_pos_; }

 private:
  [[noreturn]] void Fail(SourcePos p, std::string msg) { throw SyntaxError{{p, std::move(msg)}}; }

  void Take() {
    if (tok_.kind == Tok::kError) Fail(tok_.pos, tok_.text);
    tok_ = lex_.Next();
  }

  void Expect(Tok k, const char* what) {
    if (tok_.kind == Tok::kError) Fail(tok_.pos, tok_.text);
    if (tok_.kind != k) Fail(tok_.pos, std::string("expected ") + what + ", found " + Describe(tok_));
    Take();
  }

  void ExpectKeyword(const char* kw) {
    if (tok_.kind == Tok::kError) Fail(tok_.pos, tok_.text);
    if (tok_.kind != Tok::kIdent || tok_.text != kw) {
      Fail(tok_.pos, std::string("expected '") + kw + "', found " + Describe(tok_));
    }
    Take();
  }

  std::string ExpectIdent(const char* what) {
    if (tok_.kind == Tok::kError) Fail(tok_.pos, tok_.text);
    if (tok_.kind != Tok::kIdent) Fail(tok_.pos, std::string("expected ") + what + ", found " + Describe(tok_));
    std::string s = tok_.text;
    Take();
    return s;
  }

  // Parses "{" node+ "}" into the children of a pseudo node. `owner` names
  // the control node the block belongs to (nullopt for the document block).
  NodeExpr Block(const std::optional<std::string>& owner, int depth) {
    if (depth > kMaxNesting) Fail(tok_.pos, "nesting deeper than " + std::to_string(kMaxNesting) + " levels");
    const SourcePos open = tok_.pos;
    Expect(Tok::kLBrace, "'{'");
    if (owner) block_pos_[*owner] = open;
    NodeExpr holder{};
    if (!owner) root_pos_ = tok_.pos;
    while (tok_.kind != Tok::kRBrace) {
      if (tok_.kind == Tok::kEnd) Fail(tok_.pos, "expected node or '}', found end of input");
      holder.children.push_back(Node(depth));
    }
    Take();
    return holder;
  }

  NodeExpr Node(int depth) {
    if (tok_.kind == Tok::kError) Fail(tok_.pos, tok_.text);
    const SourcePos at = tok_.pos;
    if (tok_.kind != Tok::kIdent) {
      Fail(at, "expected 'sequence', 'fallback', 'action', 'condition' or '}', found " + Describe(tok_));
    }
    const std::string kw = tok_.text;
    const int index = count_++;
    if (kw == "sequence" || kw == "fallback") {
      Take();
      const NodeKind kind = kw == "sequence" ? NodeKind::kSequence : NodeKind::kFallback;
      std::string id = kw + "_" + std::to_string(index);
      if (tok_.kind == Tok::kIdent) id = ExpectIdent("node name");
      node_pos_.emplace_back(id, at);
      NodeExpr holder = Block(id, depth + 1);
      return {id, kind, std::move(holder.children), {}};
    }
    if (kw == "action" || kw == "condition") {
      Take();
      const NodeKind kind = kw == "action" ? NodeKind::kAction : NodeKind::kCondition;
      std::string id = ExpectIdent("leaf name");
      node_pos_.emplace_back(id, at);
      Binding b{id, {}};
      if (tok_.kind == Tok::kLParen) Params(b);
      return {id, kind, {}, std::move(b)};
    }
    Fail(at, "expected 'sequence', 'fallback', 'action', 'condition' or '}', found " + Describe(tok_));
  }

  void Params(Binding& b) {
    Take();  // "("
    while (true) {
      const SourcePos key_pos = tok_.pos;
      const std::string key = ExpectIdent("parameter name");
      Expect(Tok::kEquals, "'='");
      if (tok_.kind == Tok::kError) Fail(tok_.pos, tok_.text);
      const SourcePos value_pos = tok_.pos;
      ParamValue v;
      if (tok_.kind == Tok::kNumber) {
        v = ParseNumber(tok_.text, value_pos);
      } else if (tok_.kind == Tok::kString) {
        v = tok_.text;
      } else if (tok_.kind == Tok::kIdent && (tok_.text == "true" || tok_.text == "false")) {
        v = tok_.text == "true";
      } else {
        Fail(value_pos, "expected number, string, 'true' or 'false', found " + Describe(tok_));
      }
      Take();
      if (key == kUseParam) {
        const auto* name = std::get_if<std::string>(&v);
        if (!name || !IsIdent(*name)) Fail(value_pos, "'use' needs a binding name string");
        b.name = *name;
      } else if (!b.params.emplace(key, std::move(v)).second) {
        Fail(key_pos, "duplicate parameter '" + key + "'");
      }
      if (tok_.kind == Tok::kComma) {
        Take();
        continue;
      }
      Expect(Tok::kRParen, "',' or ')'");
      return;
    }
  }

  double ParseNumber(const std::string& text, SourcePos p) {
    std::string_view s = text;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      Fail(p, "number out of range '" + text + "'");
    }
    return v;
  }

  Lexer lex_;
  Token tok_;
  int count_ = 0;
  SourcePos root_pos_;
  std::vector<std::pair<std::string, SourcePos>> node_pos_;
  std::map<std::string, SourcePos> block_pos_;
};

inline void AppendEscaped(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20 || c == 0x7F) {
          static const char kHex[] = "0123456789abcdef";
          out += "\\x";
          out.push_back(kHex[(static_cast<unsigned char>(c) >> 4) & 0xF]);
          out.push_back(kHex[static_cast<unsigned char>(c) & 0xF]);
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

inline void AppendValue(std::string& out, const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    if (!std::isfinite(*d)) throw std::invalid_argument("serialize: non-finite number");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *d);
    out.append(buf, ptr);
  } else if (const auto* s = std::get_if<std::string>(&v)) {
    AppendEscaped(out, *s);
  } else {
    out += std::get<bool>(v) ? "true" : "false";
  }
}

}  // namespace dsl_detail

/// Parses a document. Syntax errors stop at the first one; a syntactically
/// valid document is then checked with ValidateTree, each violation becoming
/// a diagnostic at the offending node.
inline DslDocument Parse(std::string_view text) {
  DslDocument doc;
  doc.source = std::string(text);
  if (auto bad = dsl_detail::FindInvalidUtf8(text)) {
    SourcePos p;
    for (std::size_t i = 0; i < *bad; ++i) {
      if (text[i] == '\n') {
        ++p.line;
        p.column = 1;
      } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
        ++p.column;
      }
    }
    doc.diagnostics.push_back({p, "invalid UTF-8"});
    return doc;
  }
  dsl_detail::Parser parser(text);
  try {
    parser.Document(doc);
  } catch (const dsl_detail::SyntaxError& e) {
    doc.spec = {};
    doc.diagnostics.push_back(e.diag);
    return doc;
  }

  std::map<std::string, std::vector<SourcePos>> all;
  for (const auto& [id, p] : parser.node_pos()) {
    all[id].push_back(p);
    doc.spans.emplace(id, p);
  }
  std::map<std::string, std::size_t> dup_seen;
  for (const auto& v : ValidateTree(doc.spec).violations) {
    SourcePos p;
    if (v.rule == std::string_view(kRuleControlNeedsChild) && parser.block_pos().contains(v.node_id)) {
      p = parser.block_pos().at(v.node_id);
    } else if (v.rule == std::string_view(kRuleDuplicateId) && all.contains(v.node_id)) {
      const auto& ps = all.at(v.node_id);
      p = ps[std::min(++dup_seen[v.node_id], ps.size() - 1)];
    } else if (auto it = doc.spans.find(v.node_id); it != doc.spans.end()) {
      p = it->second;
    }
    doc.diagnostics.push_back({p, v.rule + (" '" + v.node_id + "'")});
  }
  return doc;
}

/// Parses or throws DslError carrying every diagnostic.
inline TreeSpec ParseOrThrow(std::string_view text) {
  DslDocument doc = Parse(text);
  if (!doc.ok()) throw DslError(std::move(doc.diagnostics));
  return std::move(doc.spec);
}

/// Canonical text: 2-space indent, one node per line, parameters sorted by
/// name. Throws std::invalid_argument for specs the format cannot express
/// (invalid structure, names that are not identifiers, a parameter named
/// `use`, non-finite numbers).
inline std::string Serialize(const TreeSpec& spec) {
  const auto report = ValidateTree(spec);
  if (!report.ok()) {
    throw std::invalid_argument("serialize: invalid tree: " + report.violations.front().rule + " '" +
                                report.violations.front().node_id + "'");
  }
  if (!dsl_detail::IsIdent(spec.name)) throw std::invalid_argument("serialize: tree name is not an identifier");

  std::string out = "tree " + spec.name + " {\n";
  int index = 0;
  auto emit = [&](auto&& self, const std::string& id, int depth) -> void {
    const NodeSpec& n = *spec.Find(id);
    if (!dsl_detail::IsIdent(n.id)) throw std::invalid_argument("serialize: node id '" + n.id + "' is not an identifier");
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    const int my_index = index++;
    out += indent;
    out += ToString(n.kind);
    if (IsControl(n.kind)) {
      if (n.id != std::string(ToString(n.kind)) + "_" + std::to_string(my_index)) out += " " + n.id;
      out += " {\n";
      for (const auto& c : n.children) self(self, c, depth + 1);
      out += indent + "}\n";
      return;
    }
    out += " " + n.id;
    std::vector<std::pair<std::string, const ParamValue*>> params;
    if (n.binding.name != n.id) {
      if (!dsl_detail::IsIdent(n.binding.name)) {
        throw std::invalid_argument("serialize: binding '" + n.binding.name + "' is not an identifier");
      }
      params.emplace_back(std::string(kUseParam), nullptr);
    }
    for (const auto& [k, v] : n.binding.params) {
      if (k == kUseParam) throw std::invalid_argument("serialize: parameter name 'use' is reserved");
      if (!dsl_detail::IsIdent(k)) throw std::invalid_argument("serialize: parameter '" + k + "' is not an identifier");
      params.emplace_back(k, &v);
    }
    if (!params.empty()) {
      out += " (";
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (i > 0) out += ", ";
        out += params[i].first + "=";
        if (params[i].second) {
          dsl_detail::AppendValue(out, *params[i].second);
        } else {
          dsl_detail::AppendEscaped(out, n.binding.name);
        }
      }
      out += ")";
    }
    out += "\n";
  };
  emit(emit, spec.root, 1);
  out += "}\n";
  return out;
}

}  // namespace plcbt

#endif  // PLCBT_DSL_HPP_
