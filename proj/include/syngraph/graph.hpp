#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "syngraph/error.hpp"
#include "syngraph/review.hpp"

namespace syngraph {

enum class NodeKind { User, Product };

struct NodeRef {
  NodeKind kind = NodeKind::User;
  std::string id;

  static NodeRef user(std::string id) { return {NodeKind::User, std::move(id)}; }
  static NodeRef product(std::string id) { return {NodeKind::Product, std::move(id)}; }
};

// Closed time interval; an unset bound is unbounded on that side.
struct TimeWindow {
  std::optional<Timestamp> from;
  std::optional<Timestamp> until;

  static TimeWindow up_to(Timestamp t) { return {std::nullopt, t}; }
  bool contains(Timestamp t) const {
    return (!from || t >= *from) && (!until || t <= *until);
  }
};

enum class ConnectivityOrder { First, Overall, SecondOrder };

// Position of a review in the graph's event log.
using ReviewId = std::size_t;

// Event-sourced bipartite user/product multigraph. Every review appends one
// edge; nodes are created on first sight. Queries take an optional time
// window instead of materializing snapshots.
class DynamicGraph {
 public:
  struct Edge {
    std::size_t user = 0;
    std::size_t product = 0;
    Timestamp timestamp = 0;
    Rating rating = 0;
    std::string text;
  };

  DynamicGraph() = default;

  static DynamicGraph from_events(std::span<const ReviewEvent> events) {
    DynamicGraph g;
    for (const auto& e : events) g.apply_event(e);
    return g;
  }

  static DynamicGraph from_stream(const ReviewStream& stream) {
    return from_events(stream.events());
  }

  void apply_event(const ReviewEvent& e) {
    if (!log_.empty() && e.timestamp < log_.back().timestamp) {
      throw Error(Errc::OutOfOrderEvent, "t=" + std::to_string(e.timestamp) +
                                             " after t=" + std::to_string(log_.back().timestamp));
    }
    std::size_t u = intern(e.user_id, user_index_, user_ids_, user_edges_);
    std::size_t p = intern(e.product_id, product_index_, product_ids_, product_edges_);
    ReviewId id = log_.size();
    log_.push_back(Edge{u, p, e.timestamp, e.rating, e.text});
    user_edges_[u].push_back(id);
    product_edges_[p].push_back(id);
    ++weights_[{u, p}];
  }

  std::size_t user_count() const { return user_ids_.size(); }
  std::size_t product_count() const { return product_ids_.size(); }
  const std::vector<Edge>& event_log() const { return log_; }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& product_ids() const { return product_ids_; }
  const std::string& user_id(std::size_t idx) const { return user_ids_.at(idx); }
  const std::string& product_id(std::size_t idx) const { return product_ids_.at(idx); }
  const std::string& user_of(ReviewId r) const { return user_ids_[log_.at(r).user]; }
  const std::string& product_of(ReviewId r) const { return product_ids_[log_.at(r).product]; }

  bool has_user(const std::string& id) const { return user_index_.count(id) != 0; }
  bool has_product(const std::string& id) const { return product_index_.count(id) != 0; }

  // Number of reviews between the pair; zero when never connected.
  std::size_t weight(const std::string& user, const std::string& product) const {
    auto u = user_index_.find(user);
    auto p = product_index_.find(product);
    if (u == user_index_.end() || p == product_index_.end()) return 0;
    auto it = weights_.find({u->second, p->second});
    return it == weights_.end() ? 0 : it->second;
  }

  // Review ids touching the node, in chronological order.
  const std::vector<ReviewId>& reviews_of(const NodeRef& node) const {
    return node.kind == NodeKind::User ? user_edges_[require_user(node.id)]
                                       : product_edges_[require_product(node.id)];
  }

  std::vector<ReviewId> reviews_of(const NodeRef& node, const TimeWindow& window) const {
    std::vector<ReviewId> out;
    for (ReviewId r : reviews_of(node)) {
      if (window.contains(log_[r].timestamp)) out.push_back(r);
    }
    return out;
  }

  // Distinct adjacent node ids (of the opposite kind) via edges in the window.
  std::set<std::string> neighbors(const NodeRef& node, const TimeWindow& window = {}) const {
    std::set<std::string> out;
    bool is_user = node.kind == NodeKind::User;
    for (ReviewId r : reviews_of(node)) {
      const auto& e = log_[r];
      if (!window.contains(e.timestamp)) continue;
      out.insert(is_user ? product_ids_[e.product] : user_ids_[e.user]);
    }
    return out;
  }

  std::set<std::string> neighbors(const NodeRef& node, std::optional<Timestamp> until) const {
    return neighbors(node, TimeWindow{std::nullopt, until});
  }

  // Users sharing at least one product with `user` (through edges inside the
  // window), excluding `user` itself.
  std::set<std::string> second_order_neighbors(const std::string& user,
                                               const TimeWindow& window = {}) const {
    std::size_t u = require_user(user);
    std::set<std::size_t> products;
    for (ReviewId r : user_edges_[u]) {
      if (window.contains(log_[r].timestamp)) products.insert(log_[r].product);
    }
    std::set<std::string> out;
    for (std::size_t p : products) {
      for (ReviewId r : product_edges_[p]) {
        const auto& e = log_[r];
        if (e.user != u && window.contains(e.timestamp)) out.insert(user_ids_[e.user]);
      }
    }
    return out;
  }

  // First / Overall: summed interaction weight over direct neighbors (both
  // equal the review count in a bipartite review graph). SecondOrder: the
  // number of second-order users.
  double connectivity(const std::string& user, ConnectivityOrder order) const {
    std::size_t u = require_user(user);
    if (order == ConnectivityOrder::SecondOrder) {
      return static_cast<double>(second_order_neighbors(user).size());
    }
    double total = 0.0;
    for (const auto& p : neighbors(NodeRef::user(user))) {
      total += static_cast<double>(weights_.at({u, product_index_.at(p)}));
    }
    return total;
  }

  // user_id,product_id,timestamp,rating
  void write_edge_list_csv(std::ostream& out) const {
    out << "user_id,product_id,timestamp,rating\n";
    for (const auto& e : log_) {
      out << detail::csv_field(user_ids_[e.user]) << ',' << detail::csv_field(product_ids_[e.product]) << ','
          << e.timestamp << ',' << e.rating << '\n';
    }
  }

 private:
  static std::size_t intern(const std::string& id,
                            std::unordered_map<std::string, std::size_t>& index,
                            std::vector<std::string>& ids,
                            std::vector<std::vector<ReviewId>>& edges) {
    auto [it, inserted] = index.try_emplace(id, ids.size());
    if (inserted) {
      ids.push_back(id);
      edges.emplace_back();
    }
    return it->second;
  }

  std::size_t require_user(const std::string& id) const {
    auto it = user_index_.find(id);
    if (it == user_index_.end()) throw Error(Errc::UnknownNode, "user " + id);
    return it->second;
  }

  std::size_t require_product(const std::string& id) const {
    auto it = product_index_.find(id);
    if (it == product_index_.end()) throw Error(Errc::UnknownNode, "product " + id);
    return it->second;
  }

  std::unordered_map<std::string, std::size_t> user_index_;
  std::unordered_map<std::string, std::size_t> product_index_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> product_ids_;
  std::vector<std::vector<ReviewId>> user_edges_;
  std::vector<std::vector<ReviewId>> product_edges_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> weights_;
  std::vector<Edge> log_;
};

}  // namespace syngraph
