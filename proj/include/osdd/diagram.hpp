#pragma once

// Diagram nodes, hash-consed into a DAG.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "osdd/constraint.hpp"

namespace osdd {

/// A switch instance `(s, k)`. Ordered by instance first, then switch.
struct SwitchInstance {
  GroundTerm sw;
  GroundTerm instance;

  friend bool operator==(const SwitchInstance&, const SwitchInstance&) = default;
  friend std::strong_ordering operator<=>(const SwitchInstance& a, const SwitchInstance& b) {
    if (auto c = a.instance <=> b.instance; c != 0) return c;
    return a.sw <=> b.sw;
  }
  std::string str() const { return sw.str() + "," + instance.str(); }
};

class Osdd;
struct OsddNode;

struct Edge {
  ConstraintFormula label;
  std::shared_ptr<const OsddNode> child;
};

struct OsddNode {
  std::uint64_t id = 0;  // unique per interned node
  bool is_leaf = true;
  bool value = false;
  SwitchInstance si;
  Var out;
  std::vector<Edge> edges;
};

namespace detail {

inline void encode_label(std::string& out, const ConstraintFormula& f) {
  for (const auto& a : f.atoms()) {
    encode_term(out, a.lhs());
    encode_term(out, a.rhs());
    out.push_back(a.is_eq() ? '=' : '!');
  }
  out.push_back(';');
}

class InternTable {
 public:
  static InternTable& instance() {
    static InternTable* table = new InternTable();  // never destroyed: nodes may outlive statics
    return *table;
  }

  std::shared_ptr<const OsddNode> leaf(bool v) const { return v ? one_ : zero_; }

  std::shared_ptr<const OsddNode> intern(SwitchInstance si, Var out, std::vector<Edge> edges) {
    std::string key;
    encode_term(key, GroundTerm(si.sw));
    encode_term(key, GroundTerm(si.instance));
    encode_term(key, out);
    for (const auto& e : edges) {
      encode_label(key, e.label);
      std::uint64_t cid = e.child->id;
      key.append(reinterpret_cast<const char*>(&cid), sizeof cid);
    }
    std::lock_guard lock(mu_);
    auto it = table_.find(key);
    if (it != table_.end()) {
      if (auto sp = it->second.lock()) return sp;
    }
    auto node = std::make_shared<OsddNode>();
    node->id = next_id_++;
    node->is_leaf = false;
    node->si = std::move(si);
    node->out = std::move(out);
    node->edges = std::move(edges);
    std::shared_ptr<const OsddNode> result = node;
    table_[key] = result;
    if (table_.size() > sweep_at_) sweep();
    return result;
  }

  std::size_t size() {
    std::lock_guard lock(mu_);
    sweep();
    return table_.size();
  }

 private:
  InternTable() {
    auto z = std::make_shared<OsddNode>();
    z->id = 0;
    z->value = false;
    auto o = std::make_shared<OsddNode>();
    o->id = 1;
    o->value = true;
    zero_ = z;
    one_ = o;
  }

  void sweep() {
    for (auto it = table_.begin(); it != table_.end();) {
      if (it->second.expired()) it = table_.erase(it);
      else ++it;
    }
    sweep_at_ = std::max<std::size_t>(1024, table_.size() * 2);
  }

  std::mutex mu_;
  std::unordered_map<std::string, std::weak_ptr<const OsddNode>> table_;
  std::uint64_t next_id_ = 2;
  std::size_t sweep_at_ = 1024;
  std::shared_ptr<const OsddNode> zero_, one_;
};

}  // namespace detail

/// An ordered symbolic derivation diagram: a 0/1 leaf or a node
/// `(s, k, Y)[label_i : child_i]`. Values are immutable and hash-consed, so
/// structurally identical diagrams share one node.
class Osdd {
 public:
  Osdd() : node_(detail::InternTable::instance().leaf(false)) {}
  explicit Osdd(std::shared_ptr<const OsddNode> n) : node_(std::move(n)) {}

  static Osdd leaf(bool v) { return Osdd(detail::InternTable::instance().leaf(v)); }
  static Osdd zero() { return leaf(false); }
  static Osdd one() { return leaf(true); }

  /// Builds a node as given; no reordering or validation.
  static Osdd node(SwitchInstance si, Var out, std::vector<std::pair<ConstraintFormula, Osdd>> edges) {
    std::vector<Edge> es;
    es.reserve(edges.size());
    for (auto& [l, c] : edges) es.push_back({std::move(l), c.node_});
    return Osdd(detail::InternTable::instance().intern(std::move(si), std::move(out), std::move(es)));
  }

  bool is_leaf() const { return node_->is_leaf; }
  bool is_zero() const { return node_->is_leaf && !node_->value; }
  bool is_one() const { return node_->is_leaf && node_->value; }
  bool value() const { return node_->value; }
  const SwitchInstance& si() const { return node_->si; }
  const Var& out() const { return node_->out; }
  std::size_t edge_count() const { return node_->edges.size(); }
  const ConstraintFormula& label(std::size_t i) const { return node_->edges[i].label; }
  Osdd child(std::size_t i) const { return Osdd(node_->edges[i].child); }
  std::uint64_t id() const { return node_->id; }
  const OsddNode* raw() const { return node_.get(); }

  friend bool operator==(const Osdd& a, const Osdd& b) { return a.node_ == b.node_; }

 private:
  std::shared_ptr<const OsddNode> node_;
};

/// Calls `fn` once per distinct node reachable from `d` (children first).
inline void for_each_node(const Osdd& d, const std::function<void(const Osdd&)>& fn) {
  std::unordered_set<std::uint64_t> seen;
  std::function<void(const Osdd&)> rec = [&](const Osdd& n) {
    if (!seen.insert(n.id()).second) return;
    for (std::size_t i = 0; i < n.edge_count(); ++i) rec(n.child(i));
    fn(n);
  };
  rec(d);
}

inline std::size_t node_count(const Osdd& d) {
  std::size_t n = 0;
  for_each_node(d, [&](const Osdd&) { ++n; });
  return n;
}

inline std::size_t internal_node_count(const Osdd& d) {
  std::size_t n = 0;
  for_each_node(d, [&](const Osdd& x) { n += !x.is_leaf(); });
  return n;
}

inline std::set<Var> bound_vars(const Osdd& d) {
  std::set<Var> out;
  for_each_node(d, [&](const Osdd& n) {
    if (!n.is_leaf()) out.insert(n.out());
  });
  return out;
}

inline std::set<Var> label_vars(const Osdd& d) {
  std::set<Var> out;
  for_each_node(d, [&](const Osdd& n) {
    for (std::size_t i = 0; i < n.edge_count(); ++i)
      for (const auto& v : n.label(i).vars()) out.insert(v);
  });
  return out;
}

inline std::set<Var> free_vars(const Osdd& d) {
  auto bound = bound_vars(d);
  std::set<Var> out;
  for (const auto& v : label_vars(d))
    if (!bound.count(v)) out.insert(v);
  return out;
}

/// One-line rendering in the `(s,k,X)[ formula : child ; ... ]` notation.
inline std::string to_string(const Osdd& d) {
  if (d.is_leaf()) return d.value() ? "1" : "0";
  std::string s = "(" + d.si().str() + "," + d.out().name() + ")[";
  for (std::size_t i = 0; i < d.edge_count(); ++i) {
    s += i ? " ; " : " ";
    s += d.label(i).str() + " : " + to_string(d.child(i));
  }
  return s + " ]";
}

}  // namespace osdd
