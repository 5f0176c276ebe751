#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace osdd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An atomic constant: an integer or a symbolic atom.
///
/// The global order puts every integer before every atom; integers compare
/// by value and atoms lexicographically.
class GroundTerm {
 public:
  GroundTerm() = default;
  GroundTerm(std::int64_t v) : value_(v) {}  // NOLINT(google-explicit-constructor)
  GroundTerm(int v) : value_(static_cast<std::int64_t>(v)) {}  // NOLINT

  static GroundTerm atom(std::string name) {
    GroundTerm t;
    t.value_ = std::move(name);
    return t;
  }

  bool is_int() const { return value_.index() == 0; }
  bool is_atom() const { return value_.index() == 1; }
  std::int64_t as_int() const { return std::get<0>(value_); }
  const std::string& as_atom() const { return std::get<1>(value_); }

  std::string str() const {
    return is_int() ? std::to_string(as_int()) : as_atom();
  }

  friend bool operator==(const GroundTerm&, const GroundTerm&) = default;
  friend std::strong_ordering operator<=>(const GroundTerm& a, const GroundTerm& b) {
    return a.value_ <=> b.value_;
  }

 private:
  std::variant<std::int64_t, std::string> value_{std::int64_t{0}};
};

/// A named finite type: the outcome space of a switch.
class TypeDomain {
 public:
  TypeDomain(std::string name, std::vector<GroundTerm> values)
      : name_(std::move(name)), values_(std::move(values)) {
    if (values_.empty()) throw Error("type '" + name_ + "' has no values");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!index_.emplace(values_[i], i).second)
        throw Error("type '" + name_ + "' lists value '" + values_[i].str() + "' twice");
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<GroundTerm>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool contains(const GroundTerm& v) const { return index_.count(v) != 0; }
  std::optional<std::size_t> index_of(const GroundTerm& v) const {
    auto it = index_.find(v);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::string name_;
  std::vector<GroundTerm> values_;
  std::map<GroundTerm, std::size_t> index_;
};

using DomainRef = std::shared_ptr<const TypeDomain>;

inline DomainRef make_domain(std::string name, std::vector<GroundTerm> values) {
  return std::make_shared<const TypeDomain>(std::move(name), std::move(values));
}

inline DomainRef make_int_domain(std::string name, std::int64_t lo, std::int64_t hi) {
  std::vector<GroundTerm> values;
  for (std::int64_t v = lo; v <= hi; ++v) values.emplace_back(v);
  return make_domain(std::move(name), std::move(values));
}

/// A typed variable. Identity and order come from a process-wide creation
/// index, so variables created later sort later.
class Var {
 public:
  Var() = default;

  static Var fresh(std::string name, DomainRef domain) {
    static std::atomic<std::uint32_t> counter{1};
    Var v;
    v.index_ = counter.fetch_add(1, std::memory_order_relaxed);
    v.name_ = std::make_shared<const std::string>(std::move(name));
    v.domain_ = std::move(domain);
    return v;
  }

  bool valid() const { return index_ != 0; }
  std::uint32_t index() const { return index_; }
  const std::string& name() const { return *name_; }
  const DomainRef& domain() const { return domain_; }

  friend bool operator==(const Var& a, const Var& b) { return a.index_ == b.index_; }
  friend std::strong_ordering operator<=>(const Var& a, const Var& b) {
    return a.index_ <=> b.index_;
  }

 private:
  std::uint32_t index_ = 0;
  std::shared_ptr<const std::string> name_;
  DomainRef domain_;
};

/// Operand of an atomic constraint: every ground term precedes every variable.
using Term = std::variant<GroundTerm, Var>;

inline bool is_var(const Term& t) { return t.index() == 1; }
inline const Var& as_var(const Term& t) { return std::get<1>(t); }
inline const GroundTerm& as_ground(const Term& t) { return std::get<0>(t); }
inline std::string term_str(const Term& t) {
  return is_var(t) ? as_var(t).name() : as_ground(t).str();
}

}  // namespace osdd

template <>
struct std::hash<osdd::Var> {
  std::size_t operator()(const osdd::Var& v) const noexcept { return v.index(); }
};
