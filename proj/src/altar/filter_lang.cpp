// Copyright 2026 The Altar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "altar/filter_lang.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

#include "altar/filter.hpp"

namespace altar {

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  FilterExpr parse() {
    FilterExpr e = parse_or();
    skip_ws();
    if (pos_ < text_.size()) syntax_error({"'and'", "'or'", "end of input"});
    return e;
  }

 private:
  [[noreturn]] void syntax_error(std::vector<std::string> expected) {
    throw FilterSyntaxError(pos_ + 1, std::move(expected), found());
  }

  std::string found() const {
    if (pos_ >= text_.size()) return "end of input";
    std::size_t end = pos_ + 1;
    if (is_ident_char(text_[pos_])) {
      while (end < text_.size() && is_ident_char(text_[end])) ++end;
    }
    return "'" + std::string(text_.substr(pos_, end - pos_)) + "'";
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  // The bare word at the cursor (no dots), or empty.
  std::string_view peek_word() {
    skip_ws();
    std::size_t end = pos_;
    while (end < text_.size() && is_ident_char(text_[end])) ++end;
    return text_.substr(pos_, end - pos_);
  }

  bool accept_keyword(std::string_view kw) {
    const auto word = peek_word();
    if (!iequals(word, kw)) return false;
    const std::size_t after = pos_ + word.size();
    if (after < text_.size() && text_[after] == '.') return false;
    pos_ = after;
    return true;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  FilterExpr parse_or() {
    std::vector<FilterExpr> items;
    items.push_back(parse_and());
    while (accept_keyword("or")) items.push_back(parse_and());
    return items.size() == 1 ? std::move(items.front()) : FilterExpr::any_of(std::move(items));
  }

  FilterExpr parse_and() {
    std::vector<FilterExpr> items;
    items.push_back(parse_unary());
    while (accept_keyword("and")) items.push_back(parse_unary());
    return items.size() == 1 ? std::move(items.front()) : FilterExpr::all_of(std::move(items));
  }

  FilterExpr parse_unary() {
    if (accept_keyword("not")) return FilterExpr::negate(parse_unary());
    if (accept('(')) {
      FilterExpr inner = parse_or();
      if (!accept(')')) syntax_error({"')'", "'and'", "'or'"});
      return inner;
    }
    return parse_cmp();
  }

  std::string parse_path() {
    skip_ws();
    const std::size_t start = pos_;
    while (true) {
      const std::size_t seg = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      if (pos_ == seg) {
        syntax_error(start == seg ? std::vector<std::string>{"path", "'('", "'not'"}
                                  : std::vector<std::string>{"identifier"});
      }
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        continue;
      }
      break;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  FilterExpr parse_cmp() {
    std::string path = parse_path();
    skip_ws();
    if (accept_keyword("exists")) {
      skip_ws();
      bool want = true;
      if (accept_keyword("true")) {
        want = true;
      } else if (accept_keyword("false")) {
        want = false;
      }
      return FilterExpr::compare(std::move(path), CmpOp::Exists, want);
    }
    if (accept_keyword("in")) {
      return FilterExpr::compare(std::move(path), CmpOp::In, parse_list());
    }
    CmpOp op;
    const std::string_view rest = text_.substr(pos_);
    if (rest.substr(0, 2) == "!=") {
      op = CmpOp::Ne;
      pos_ += 2;
    } else if (rest.substr(0, 2) == "<=") {
      op = CmpOp::Le;
      pos_ += 2;
    } else if (rest.substr(0, 2) == ">=") {
      op = CmpOp::Ge;
      pos_ += 2;
    } else if (!rest.empty() && rest[0] == '=') {
      op = CmpOp::Eq;
      ++pos_;
    } else if (!rest.empty() && rest[0] == '<') {
      op = CmpOp::Lt;
      ++pos_;
    } else if (!rest.empty() && rest[0] == '>') {
      op = CmpOp::Gt;
      ++pos_;
    } else if (!rest.empty() && rest[0] == '~') {
      op = CmpOp::Contains;
      ++pos_;
    } else {
      syntax_error({"'='", "'!='", "'<'", "'<='", "'>'", "'>='", "'~'", "'in'", "'exists'"});
    }
    return FilterExpr::compare(std::move(path), op, parse_scalar());
  }

  Json parse_list() {
    if (!accept('[')) syntax_error({"'['"});
    Json list = Json::array();
    if (accept(']')) return list;
    while (true) {
      list.push_back(parse_scalar());
      if (accept(']')) return list;
      if (!accept(',')) syntax_error({"','", "']'"});
    }
  }

  Json parse_scalar() {
    skip_ws();
    if (pos_ >= text_.size()) syntax_error({"literal"});
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    if (accept_keyword("true")) return true;
    if (accept_keyword("false")) return false;
    if (accept_keyword("null")) return nullptr;
    syntax_error({"number", "string", "'true'", "'false'", "'null'"});
  }

  Json parse_string() {
    const std::size_t start = pos_;
    ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      ++pos_;
    }
    if (pos_ >= text_.size()) {
      pos_ = start;
      syntax_error({"closing '\"'"});
    }
    ++pos_;
    try {
      return Json::parse(text_.substr(start, pos_ - start));
    } catch (const Json::exception&) {
      pos_ = start;
      syntax_error({"valid string literal"});
    }
  }

  Json parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      const std::size_t d = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      return pos_ > d;
    };
    bool is_float = false;
    if (text_[pos_] == '-') ++pos_;
    if (!digits()) syntax_error({"digit"});
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      is_float = true;
      if (!digits()) syntax_error({"digit"});
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      is_float = true;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (!digits()) syntax_error({"digit"});
    }
    if (pos_ < text_.size() && (is_ident_char(text_[pos_]) || text_[pos_] == '.')) {
      syntax_error({"end of number"});
    }
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    if (!is_float) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && ptr == last) return v;
      pos_ = start;
      syntax_error({"integer within int64 range"});
    }
    double d = 0;
    auto [ptr, ec] = std::from_chars(first, last, d);
    if (ec != std::errc() || ptr != last || !std::isfinite(d)) {
      pos_ = start;
      syntax_error({"finite number"});
    }
    return d;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string literal_text(const Json& v) {
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += literal_text(v[i]);
    }
    return out + "]";
  }
  return v.dump();
}

bool literal_equal(const Json& a, const Json& b) {
  if (a.type() != b.type()) return false;
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!literal_equal(a[i], b[i])) return false;
    }
    return true;
  }
  return a == b;
}

std::string print_child(const FilterExpr& child, bool parenthesize) {
  std::string s = print_filter(child);
  return parenthesize ? "(" + s + ")" : s;
}

const char* json_operator(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "$eq";
    case CmpOp::Ne: return "$ne";
    case CmpOp::Lt: return "$lt";
    case CmpOp::Le: return "$lte";
    case CmpOp::Gt: return "$gt";
    case CmpOp::Ge: return "$gte";
    case CmpOp::Contains: return "$contains";
    case CmpOp::In: return "$in";
    case CmpOp::Exists: return "$exists";
  }
  return "$eq";
}

bool collect_conjuncts(const FilterExpr& e, std::vector<const FilterExpr*>& out) {
  switch (e.kind) {
    case FilterExpr::Kind::Cmp:
      out.push_back(&e);
      return true;
    case FilterExpr::Kind::And:
      for (const auto& c : e.children) {
        if (!collect_conjuncts(c, out)) return false;
      }
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Contains: return "~";
    case CmpOp::In: return "in";
    case CmpOp::Exists: return "exists";
  }
  return "=";
}

FilterExpr FilterExpr::compare(std::string path, CmpOp op, Json literal) {
  FilterExpr e;
  e.kind = Kind::Cmp;
  e.path = std::move(path);
  e.op = op;
  e.literal = std::move(literal);
  return e;
}

FilterExpr FilterExpr::all_of(std::vector<FilterExpr> children) {
  FilterExpr e;
  e.kind = Kind::And;
  e.children = std::move(children);
  return e;
}

FilterExpr FilterExpr::any_of(std::vector<FilterExpr> children) {
  FilterExpr e;
  e.kind = Kind::Or;
  e.children = std::move(children);
  return e;
}

FilterExpr FilterExpr::negate(FilterExpr child) {
  FilterExpr e;
  e.kind = Kind::Not;
  e.children.push_back(std::move(child));
  return e;
}

bool FilterExpr::operator==(const FilterExpr& other) const {
  if (kind != other.kind) return false;
  if (kind == Kind::Cmp) {
    return path == other.path && op == other.op && literal_equal(literal, other.literal);
  }
  return children == other.children;
}

FilterSyntaxError::FilterSyntaxError(std::size_t offset, std::vector<std::string> expected,
                                     const std::string& found)
    : Error(ErrorCode::SyntaxError, "syntax error at offset " + std::to_string(offset) +
                                        ": expected " + join(expected) + ", found " + found),
      offset_(offset),
      expected_(std::move(expected)) {}

FilterExpr parse_filter(std::string_view text) { return Parser(text).parse(); }

std::string print_filter(const FilterExpr& expr) {
  using Kind = FilterExpr::Kind;
  switch (expr.kind) {
    case Kind::Cmp:
      if (expr.op == CmpOp::Exists) {
        return expr.path + (expr.literal == Json(false) ? " exists false" : " exists");
      }
      return expr.path + " " + std::string(to_string(expr.op)) + " " + literal_text(expr.literal);
    case Kind::Not: {
      const auto& child = expr.children.front();
      return "not " + print_child(child, child.kind == Kind::And || child.kind == Kind::Or);
    }
    case Kind::And: {
      std::string out;
      for (const auto& c : expr.children) {
        if (!out.empty()) out += " and ";
        out += print_child(c, c.kind == Kind::And || c.kind == Kind::Or);
      }
      return out;
    }
    case Kind::Or: {
      std::string out;
      for (const auto& c : expr.children) {
        if (!out.empty()) out += " or ";
        out += print_child(c, c.kind == Kind::Or);
      }
      return out;
    }
  }
  return {};
}

bool evaluate(const FilterExpr& expr, const Json& doc) {
  using Kind = FilterExpr::Kind;
  switch (expr.kind) {
    case Kind::Or:
      for (const auto& c : expr.children) {
        if (evaluate(c, doc)) return true;
      }
      return false;
    case Kind::And:
      for (const auto& c : expr.children) {
        if (!evaluate(c, doc)) return false;
      }
      return true;
    case Kind::Not:
      return !evaluate(expr.children.front(), doc);
    case Kind::Cmp:
      break;
  }

  const Json* value = resolve_path(doc, expr.path);
  const Json& lit = expr.literal;
  switch (expr.op) {
    case CmpOp::Exists: return (value != nullptr) == lit.get<bool>();
    case CmpOp::Eq: return value && values_equal(*value, lit);
    case CmpOp::Ne: return !value || !values_equal(*value, lit);
    case CmpOp::In:
      if (!value) return false;
      for (const auto& candidate : lit) {
        if (values_equal(*value, candidate)) return true;
      }
      return false;
    case CmpOp::Contains:
      return value && value->is_string() && lit.is_string() &&
             value->get_ref<const std::string&>().find(lit.get_ref<const std::string&>()) !=
                 std::string::npos;
    default: break;
  }
  if (!value) return false;
  const auto order = compare_ordered(*value, lit);
  if (!order) return false;
  switch (expr.op) {
    case CmpOp::Lt: return *order < 0;
    case CmpOp::Le: return *order <= 0;
    case CmpOp::Gt: return *order > 0;
    case CmpOp::Ge: return *order >= 0;
    default: return false;
  }
}

CompiledFilter compile_filter(const FilterExpr& expr) {
  std::vector<const FilterExpr*> conjuncts;
  if (!collect_conjuncts(expr, conjuncts)) return ResidualPredicate{expr};

  std::map<std::string, std::vector<const FilterExpr*>> by_path;
  for (const auto* c : conjuncts) by_path[c->path].push_back(c);

  Json filter = Json::object();
  for (const auto& [path, cmps] : by_path) {
    if (cmps.size() == 1 && cmps.front()->op == CmpOp::Eq) {
      filter[path] = cmps.front()->literal;
      continue;
    }
    Json ops = Json::object();
    for (const auto* c : cmps) {
      const char* key = json_operator(c->op);
      if (ops.contains(key)) return ResidualPredicate{expr};
      ops[key] = c->literal;
    }
    filter[path] = std::move(ops);
  }
  return filter;
}

}  // namespace altar
