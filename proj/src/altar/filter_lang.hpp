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

// Textual filter language.
//
//   or    := and ("or" and)*
//   and   := unary ("and" unary)*
//   unary := "not" unary | "(" or ")" | cmp
//   cmp   := path op literal | path "in" list | path "exists" [bool]
//   op    := "=" | "!=" | "<" | "<=" | ">" | ">=" | "~"
//   path  := ident ("." ident)*      ident := [A-Za-z0-9_-]+
//
// Literals are numbers (integers stay int64), double-quoted JSON strings,
// true/false/null, and bracketed scalar lists for `in`. Keywords are
// case-insensitive. `~` is substring containment.
//
// Example: experiment.name = "get_movie" and not status = "FAILED"

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "altar/error.hpp"
#include "altar/json.hpp"

namespace altar {

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge, Contains, In, Exists };

std::string_view to_string(CmpOp op);

struct FilterExpr {
  enum class Kind { Or, And, Not, Cmp };

  Kind kind = Kind::Cmp;
  std::vector<FilterExpr> children;  // Or/And: two or more; Not: exactly one

  std::string path;  // Cmp only
  CmpOp op = CmpOp::Eq;
  Json literal;

  static FilterExpr compare(std::string path, CmpOp op, Json literal);
  static FilterExpr all_of(std::vector<FilterExpr> children);
  static FilterExpr any_of(std::vector<FilterExpr> children);
  static FilterExpr negate(FilterExpr child);

  // Structural equality; literals must also agree on int vs float.
  bool operator==(const FilterExpr& other) const;
};

class FilterSyntaxError : public Error {
 public:
  FilterSyntaxError(std::size_t offset, std::vector<std::string> expected, const std::string& found);

  // 1-based byte offset of the offending token.
  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

// Raises FilterSyntaxError.
FilterExpr parse_filter(std::string_view text);

// Canonical text with the minimum parentheses that preserve the tree.
std::string print_filter(const FilterExpr& expr);

// Evaluates the expression directly against a document.
bool evaluate(const FilterExpr& expr, const Json& doc);

// Client-side fallback for expressions the server filter format cannot hold.
struct ResidualPredicate {
  FilterExpr expr;
  bool operator()(const Json& doc) const { return evaluate(expr, doc); }
};

using CompiledFilter = std::variant<Json, ResidualPredicate>;

// Pure conjunctions of comparisons become a JsonFilter; anything with `or`,
// `not`, or two identical operators on one path stays a ResidualPredicate.
CompiledFilter compile_filter(const FilterExpr& expr);

}  // namespace altar
