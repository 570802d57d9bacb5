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

#include "altar/filter.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include "altar/error.hpp"

namespace altar {

namespace {

const std::set<std::string, std::less<>> kOperators = {
    "$eq", "$ne", "$gt", "$gte", "$lt", "$lte", "$in", "$contains", "$exists"};

bool is_operator_object(const Json& cond) {
  if (!cond.is_object() || cond.empty()) return false;
  for (auto it = cond.begin(); it != cond.end(); ++it) {
    if (it.key().empty() || it.key().front() != '$') return false;
  }
  return true;
}

int type_rank(const Json& v) {
  switch (v.type()) {
    case Json::value_t::null: return 0;
    case Json::value_t::boolean: return 1;
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned:
    case Json::value_t::number_float: return 2;
    case Json::value_t::string: return 3;
    case Json::value_t::array: return 4;
    case Json::value_t::object: return 5;
    default: return 6;
  }
}

int sign(double d) { return (d > 0) - (d < 0); }

// i <=> d for a finite double, exactly.
int compare_int_double(std::int64_t i, double d) {
  constexpr double kTwo63 = 9223372036854775808.0;
  if (d >= kTwo63) return -1;
  if (d < -kTwo63) return 1;
  const double whole = std::trunc(d);
  const auto w = static_cast<std::int64_t>(whole);
  if (i != w) return i < w ? -1 : 1;
  return -sign(d - whole);
}

bool is_int(const Json& v) { return v.is_number_integer(); }

std::int64_t as_int(const Json& v) {
  if (v.is_number_unsigned()) return static_cast<std::int64_t>(v.get<std::uint64_t>());
  return v.get<std::int64_t>();
}

bool condition_holds(std::string_view op, const Json& arg, const Json* node) {
  if (op == "$exists") return (node != nullptr) == arg.get<bool>();
  if (op == "$ne") return node == nullptr || !values_equal(*node, arg);
  if (node == nullptr) return false;
  if (op == "$eq") return values_equal(*node, arg);
  if (op == "$in") {
    for (const auto& candidate : arg) {
      if (values_equal(*node, candidate)) return true;
    }
    return false;
  }
  if (op == "$contains") {
    return node->is_string() && arg.is_string() &&
           node->get_ref<const std::string&>().find(arg.get_ref<const std::string&>()) !=
               std::string::npos;
  }
  const auto cmp = compare_ordered(*node, arg);
  if (!cmp) return false;
  if (op == "$gt") return *cmp > 0;
  if (op == "$gte") return *cmp >= 0;
  if (op == "$lt") return *cmp < 0;
  if (op == "$lte") return *cmp <= 0;
  return false;
}

}  // namespace

const Json* resolve_path(const Json& doc, std::string_view path) {
  if (path.empty()) return nullptr;
  const Json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    auto end = path.find('.', start);
    const auto seg = path.substr(start, end == std::string_view::npos ? path.npos : end - start);
    if (seg.empty()) return nullptr;
    if (cur->is_object()) {
      auto it = cur->find(std::string(seg));
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else if (cur->is_array()) {
      if (seg.size() > 1 && seg.front() == '0') return nullptr;
      std::size_t idx = 0;
      for (char c : seg) {
        if (c < '0' || c > '9') return nullptr;
        idx = idx * 10 + static_cast<std::size_t>(c - '0');
        if (idx > cur->size()) return nullptr;
      }
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else {
      return nullptr;
    }
    if (end == std::string_view::npos) return cur;
    start = end + 1;
  }
}

int compare_numbers(const Json& a, const Json& b) {
  if (is_int(a) && is_int(b)) {
    const auto x = as_int(a), y = as_int(b);
    return (x > y) - (x < y);
  }
  if (is_int(a)) return compare_int_double(as_int(a), b.get<double>());
  if (is_int(b)) return -compare_int_double(as_int(b), a.get<double>());
  const double x = a.get<double>(), y = b.get<double>();
  return (x > y) - (x < y);
}

bool values_equal(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return compare_numbers(a, b) == 0;
  if (a.type() != b.type()) return false;
  if (a.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!values_equal(a[i], b[i])) return false;
    }
    return true;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
      if (ia.key() != ib.key() || !values_equal(ia.value(), ib.value())) return false;
    }
    return true;
  }
  return a == b;
}

std::optional<int> compare_ordered(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return compare_numbers(a, b);
  if (a.is_string() && b.is_string()) {
    const int c = a.get_ref<const std::string&>().compare(b.get_ref<const std::string&>());
    return (c > 0) - (c < 0);
  }
  return std::nullopt;
}

int compare_total(const Json& a, const Json& b) {
  const int ra = type_rank(a), rb = type_rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (ra) {
    case 0: return 0;
    case 1: return static_cast<int>(a.get<bool>()) - static_cast<int>(b.get<bool>());
    case 2: return compare_numbers(a, b);
    case 3: return *compare_ordered(a, b);
    case 4: {
      const std::size_t n = std::min(a.size(), b.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare_total(a[i], b[i]); c != 0) return c;
      }
      return (a.size() > b.size()) - (a.size() < b.size());
    }
    case 5: {
      auto ia = a.begin(), ib = b.begin();
      for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
        if (int c = ia.key().compare(ib.key()); c != 0) return (c > 0) - (c < 0);
        if (int c = compare_total(ia.value(), ib.value()); c != 0) return c;
      }
      return (ia != a.end()) - (ib != b.end());
    }
    default: return 0;
  }
}

void validate_filter(const Json& filter) {
  if (!filter.is_object()) fail(ErrorCode::FilterInvalid, "filter must be a map");
  for (auto it = filter.begin(); it != filter.end(); ++it) {
    const std::string& path = it.key();
    if (path.empty() || path.front() == '.' || path.back() == '.' ||
        path.find("..") != std::string::npos) {
      fail(ErrorCode::FilterInvalid, "bad path '" + path + "'");
    }
    const Json& cond = it.value();
    if (cond.is_primitive()) continue;
    if (!is_operator_object(cond)) {
      fail(ErrorCode::FilterInvalid, "condition on '" + path + "' is neither scalar nor operator map");
    }
    for (auto op = cond.begin(); op != cond.end(); ++op) {
      if (!kOperators.count(op.key())) {
        fail(ErrorCode::FilterInvalid, "unknown operator " + op.key());
      }
      const Json& arg = op.value();
      if (op.key() == "$in") {
        if (!arg.is_array()) fail(ErrorCode::FilterInvalid, "$in needs a list");
        for (const auto& e : arg) {
          if (!e.is_primitive()) fail(ErrorCode::FilterInvalid, "$in elements must be scalars");
        }
      } else if (op.key() == "$exists") {
        if (!arg.is_boolean()) fail(ErrorCode::FilterInvalid, "$exists needs a bool");
      } else if (!arg.is_primitive()) {
        fail(ErrorCode::FilterInvalid, op.key() + " needs a scalar");
      }
    }
  }
}

bool matches(const Json& filter, const Json& doc) {
  for (auto it = filter.begin(); it != filter.end(); ++it) {
    const Json* node = resolve_path(doc, it.key());
    const Json& cond = it.value();
    if (cond.is_primitive()) {
      if (node == nullptr || !values_equal(*node, cond)) return false;
      continue;
    }
    for (auto op = cond.begin(); op != cond.end(); ++op) {
      if (!condition_holds(op.key(), op.value(), node)) return false;
    }
  }
  return true;
}

}  // namespace altar
