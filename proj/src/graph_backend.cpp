#include "genpath/graph_backend.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace genpath {

Eigen::VectorXd laplacian_solve(
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
    Eigen::Index p, const Eigen::VectorXd& b, ReductionIndex drop) {
  if (p < 1) throw InputError("need at least one node");
  if (b.size() != p) throw InputError("laplacian_solve: bad length");
  for (const auto& e : edges)
    if (e.first < 0 || e.first >= p || e.second < 0 || e.second >= p ||
        e.first == e.second)
      throw InputError("laplacian_solve: bad edge");

  // Connectivity.
  {
    std::vector<std::vector<Eigen::Index>> adj(p);
    for (const auto& e : edges) {
      adj[e.first].push_back(e.second);
      adj[e.second].push_back(e.first);
    }
    std::vector<char> seen(p, 0);
    std::queue<Eigen::Index> fifo;
    fifo.push(0);
    seen[0] = 1;
    Eigen::Index n = 1;
    while (!fifo.empty()) {
      const Eigen::Index u = fifo.front();
      fifo.pop();
      for (Eigen::Index v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          ++n;
          fifo.push(v);
        }
    }
    if (n != p) throw InputError("laplacian_solve: graph is not connected");
  }

  if (std::abs(b.sum()) > 1e-9 * std::max(1e-300, b.norm()))
    throw ContractViolation(
        "laplacian_solve: rhs is not orthogonal to the constants");

  const Eigen::Index pin = drop == ReductionIndex::Highest ? p - 1 : 0;
  if (p == 1) return Eigen::VectorXd::Zero(1);

  // Local index skipping the grounded node.
  auto idx = [&](Eigen::Index v) { return v < pin ? v : v - 1; };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * edges.size());
  for (const auto& e : edges) {
    const Eigen::Index u = e.first, v = e.second;
    if (u != pin) trip.emplace_back(idx(u), idx(u), 1.0);
    if (v != pin) trip.emplace_back(idx(v), idx(v), 1.0);
    if (u != pin && v != pin) {
      trip.emplace_back(idx(u), idx(v), -1.0);
      trip.emplace_back(idx(v), idx(u), -1.0);
    }
  }
  Eigen::SparseMatrix<double> red(p - 1, p - 1);
  red.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(red);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("laplacian_solve: factorization failed");
  Eigen::VectorXd rb(p - 1);
  for (Eigen::Index v = 0; v < p; ++v)
    if (v != pin) rb[idx(v)] = b[v];
  const Eigen::VectorXd zr = ldlt.solve(rb);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
  for (Eigen::Index v = 0; v < p; ++v)
    if (v != pin) z[v] = zr[idx(v)];
  return z;
}

// ---------------------------------------------------------------------------
// ComponentLabeling
// ---------------------------------------------------------------------------

ComponentLabeling::ComponentLabeling(
    Eigen::Index p, std::vector<std::pair<Eigen::Index, Eigen::Index>> edges)
    : p_(p), edges_(std::move(edges)) {
  if (p < 1) throw InputError("need at least one node");
  for (const auto& e : edges_)
    if (e.first < 0 || e.first >= p || e.second < 0 || e.second >= p ||
        e.first == e.second)
      throw InputError("bad edge");
  active_.assign(edges_.size(), 1);
  adj_.resize(p_);
  for (std::size_t r = 0; r < edges_.size(); ++r) {
    adj_[edges_[r].first].emplace_back(edges_[r].second,
                                       static_cast<Eigen::Index>(r));
    adj_[edges_[r].second].emplace_back(edges_[r].first,
                                        static_cast<Eigen::Index>(r));
  }
  label_.assign(p_, -1);
  members_.resize(p_);
  visited_.assign(p_, 0);
  scratch_.reserve(p_);

  for (Eigen::Index seed = 0; seed < p_; ++seed) {
    if (label_[seed] >= 0) continue;
    const Eigen::Index lab = fresh_label();
    std::queue<Eigen::Index> fifo;
    fifo.push(seed);
    label_[seed] = lab;
    members_[lab].push_back(seed);
    while (!fifo.empty()) {
      const Eigen::Index u = fifo.front();
      fifo.pop();
      for (const auto& [v, e] : adj_[u]) {
        if (label_[v] >= 0) continue;
        label_[v] = lab;
        members_[lab].push_back(v);
        fifo.push(v);
      }
    }
  }
}

Eigen::Index ComponentLabeling::fresh_label() {
  ++live_;
  if (!free_labels_.empty()) {
    const Eigen::Index lab = free_labels_.back();
    free_labels_.pop_back();
    return lab;
  }
  return next_label_++;
}

bool ComponentLabeling::active(Eigen::Index edge) const {
  if (edge < 0 || edge >= edge_count()) throw InputError("edge out of range");
  return active_[static_cast<std::size_t>(edge)] != 0;
}

Eigen::Index ComponentLabeling::label(Eigen::Index node) const {
  if (node < 0 || node >= p_) throw InputError("node out of range");
  return label_[static_cast<std::size_t>(node)];
}

const std::vector<Eigen::Index>& ComponentLabeling::members(
    Eigen::Index label) const {
  if (label < 0 || label >= next_label_) throw InputError("label out of range");
  return members_[static_cast<std::size_t>(label)];
}

const std::vector<std::pair<Eigen::Index, Eigen::Index>>&
ComponentLabeling::neighbors(Eigen::Index node) const {
  if (node < 0 || node >= p_) throw InputError("node out of range");
  return adj_[static_cast<std::size_t>(node)];
}

void ComponentLabeling::drop_adjacency(Eigen::Index node, Eigen::Index edge) {
  auto& lst = adj_[static_cast<std::size_t>(node)];
  for (std::size_t t = 0; t < lst.size(); ++t)
    if (lst[t].second == edge) {
      lst[t] = lst.back();
      lst.pop_back();
      return;
    }
  throw ContractViolation("adjacency entry missing");
}

ComponentLabeling::Change ComponentLabeling::activate(Eigen::Index edge) {
  if (edge < 0 || edge >= edge_count()) throw InputError("edge out of range");
  if (active_[static_cast<std::size_t>(edge)])
    throw ContractViolation("edge is already active");
  active_[static_cast<std::size_t>(edge)] = 1;
  const Eigen::Index u = edges_[static_cast<std::size_t>(edge)].first;
  const Eigen::Index v = edges_[static_cast<std::size_t>(edge)].second;
  adj_[u].emplace_back(v, edge);
  adj_[v].emplace_back(u, edge);

  Change ch;
  const Eigen::Index lu = label_[u], lv = label_[v];
  if (lu == lv) {
    ch.kept = lu;
    return ch;
  }
  // Merge the smaller component into the larger one.
  const Eigen::Index big =
      members_[lu].size() >= members_[lv].size() ? lu : lv;
  const Eigen::Index small = big == lu ? lv : lu;
  for (Eigen::Index node : members_[small]) {
    label_[node] = big;
    members_[big].push_back(node);
  }
  members_[small].clear();
  free_labels_.push_back(small);
  --live_;
  ch.kept = big;
  ch.other = small;
  ch.merged = true;
  return ch;
}

ComponentLabeling::Change ComponentLabeling::deactivate(Eigen::Index edge) {
  if (edge < 0 || edge >= edge_count()) throw InputError("edge out of range");
  if (!active_[static_cast<std::size_t>(edge)])
    throw ContractViolation("edge is not active");
  active_[static_cast<std::size_t>(edge)] = 0;
  const Eigen::Index u = edges_[static_cast<std::size_t>(edge)].first;
  const Eigen::Index v = edges_[static_cast<std::size_t>(edge)].second;
  drop_adjacency(u, edge);
  drop_adjacency(v, edge);

  Change ch;
  const Eigen::Index lab = label_[u];
  ch.kept = lab;

  // Flood from u; if v is reachable the component is intact.
  scratch_.clear();
  scratch_.push_back(u);
  visited_[u] = 1;
  bool reached = u == v;
  for (std::size_t head = 0; head < scratch_.size() && !reached; ++head) {
    const Eigen::Index w = scratch_[head];
    for (const auto& [x, e] : adj_[w]) {
      if (visited_[x]) continue;
      visited_[x] = 1;
      scratch_.push_back(x);
      if (x == v) {
        reached = true;
        break;
      }
    }
  }
  if (reached) {
    for (Eigen::Index w : scratch_) visited_[w] = 0;
    return ch;
  }

  // Split: scratch_ holds u's side. Relabel whichever side is smaller.
  const Eigen::Index new_lab = fresh_label();
  auto& old_members = members_[lab];
  const std::size_t u_side = scratch_.size();
  if (u_side * 2 <= old_members.size()) {
    for (Eigen::Index w : scratch_) label_[w] = new_lab;
    members_[new_lab].assign(scratch_.begin(), scratch_.end());
  } else {
    members_[new_lab].clear();
    for (Eigen::Index w : old_members)
      if (!visited_[w]) {
        label_[w] = new_lab;
        members_[new_lab].push_back(w);
      }
  }
  old_members.erase(
      std::remove_if(old_members.begin(), old_members.end(),
                     [&](Eigen::Index w) { return label_[w] != lab; }),
      old_members.end());
  for (Eigen::Index w : scratch_) visited_[w] = 0;
  ch.other = new_lab;
  ch.split = true;
  return ch;
}

// ---------------------------------------------------------------------------
// GraphOracle
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> checked_edges(
    const PenaltySpec& spec) {
  if (spec.kind != PenaltyKind::FusedGraph &&
      spec.kind != PenaltyKind::SparseFusedGraph)
    throw InputError("graph oracle needs a fused or sparse fused penalty");
  return spec.edges;
}

}  // namespace

GraphOracle::GraphOracle(const PenaltySpec& spec)
    : spec_(spec),
      p_(spec.p),
      mg_(static_cast<Eigen::Index>(spec.edges.size())),
      m_(spec.rows()),
      comp_(spec.p, checked_edges(spec)) {
  boundary_.assign(static_cast<std::size_t>(m_), 0);
  block_.resize(static_cast<std::size_t>(p_));
  dirty_.assign(static_cast<std::size_t>(p_), 1);
  local_.assign(static_cast<std::size_t>(p_), -1);
}

bool GraphOracle::block_is_singular(Eigen::Index lab) const {
  if (spec_.kind == PenaltyKind::FusedGraph) return true;
  for (Eigen::Index node : comp_.members(lab))
    if (!boundary_[static_cast<std::size_t>(mg_ + node)]) return false;
  return true;
}

void GraphOracle::mark(const ComponentLabeling::Change& ch) {
  if (ch.kept >= 0) dirty_[static_cast<std::size_t>(ch.kept)] = 1;
  if (ch.other >= 0) dirty_[static_cast<std::size_t>(ch.other)] = 1;
}

void GraphOracle::boundary_add(Eigen::Index row) {
  if (row < 0 || row >= m_) throw InputError("boundary row out of range");
  if (boundary_[static_cast<std::size_t>(row)])
    throw ContractViolation("row already on the boundary");
  boundary_[static_cast<std::size_t>(row)] = 1;
  ++nb_;
  if (row < mg_) {
    mark(comp_.deactivate(row));
  } else {
    dirty_[static_cast<std::size_t>(comp_.label(row - mg_))] = 1;
  }
}

void GraphOracle::boundary_remove(Eigen::Index row) {
  if (row < 0 || row >= m_) throw InputError("boundary row out of range");
  if (!boundary_[static_cast<std::size_t>(row)])
    throw ContractViolation("row is not on the boundary");
  boundary_[static_cast<std::size_t>(row)] = 0;
  --nb_;
  if (row < mg_) {
    mark(comp_.activate(row));
  } else {
    dirty_[static_cast<std::size_t>(comp_.label(row - mg_))] = 1;
  }
}

Eigen::Index GraphOracle::nullity() const {
  if (spec_.kind == PenaltyKind::FusedGraph) return comp_.count();
  Eigen::Index n = 0;
  std::vector<char> seen(static_cast<std::size_t>(p_), 0);
  for (Eigen::Index node = 0; node < p_; ++node) {
    const Eigen::Index lab = comp_.label(node);
    if (seen[static_cast<std::size_t>(lab)]) continue;
    seen[static_cast<std::size_t>(lab)] = 1;
    if (block_is_singular(lab)) ++n;
  }
  return n;
}

void GraphOracle::refactor(Eigen::Index lab) {
  Block& blk = block_[static_cast<std::size_t>(lab)];
  blk.nodes = comp_.members(lab);
  const Eigen::Index s = static_cast<Eigen::Index>(blk.nodes.size());
  const bool singular = block_is_singular(lab);

  blk.pinned = -1;
  if (singular) {
    Eigen::Index best = 0;
    for (Eigen::Index t = 1; t < s; ++t)
      if (blk.nodes[static_cast<std::size_t>(t)] >
          blk.nodes[static_cast<std::size_t>(best)])
        best = t;
    blk.pinned = best;
  }
  const Eigen::Index dim = singular ? s - 1 : s;
  if (dim == 0) {
    blk.ldlt.reset();
    dirty_[static_cast<std::size_t>(lab)] = 0;
    return;
  }

  for (Eigen::Index t = 0; t < s; ++t) {
    Eigen::Index slot = t;
    if (blk.pinned >= 0) {
      if (t == blk.pinned) slot = -1;
      else if (t > blk.pinned) slot = t - 1;
    }
    local_[static_cast<std::size_t>(blk.nodes[static_cast<std::size_t>(t)])] =
        slot;
  }

  std::vector<Eigen::Triplet<double>> trip;
  const double a2 = spec_.alpha * spec_.alpha;
  for (Eigen::Index t = 0; t < s; ++t) {
    const Eigen::Index u = blk.nodes[static_cast<std::size_t>(t)];
    const Eigen::Index lu = local_[static_cast<std::size_t>(u)];
    double diag = 0.0;
    for (const auto& [v, e] : comp_.neighbors(u)) {
      diag += 1.0;
      const Eigen::Index lv = local_[static_cast<std::size_t>(v)];
      if (lu >= 0 && lv >= 0) trip.emplace_back(lu, lv, -1.0);
    }
    if (spec_.kind == PenaltyKind::SparseFusedGraph &&
        !boundary_[static_cast<std::size_t>(mg_ + u)])
      diag += a2;
    if (lu >= 0) trip.emplace_back(lu, lu, diag);
  }
  for (Eigen::Index t = 0; t < s; ++t)
    local_[static_cast<std::size_t>(blk.nodes[static_cast<std::size_t>(t)])] =
        -1;

  Eigen::SparseMatrix<double> gram(dim, dim);
  gram.setFromTriplets(trip.begin(), trip.end());
  blk.ldlt = std::make_unique<
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(gram);
  if (blk.ldlt->info() != Eigen::Success)
    throw NumericalError("graph block factorization failed");
  dirty_[static_cast<std::size_t>(lab)] = 0;
}

Eigen::VectorXd GraphOracle::minnorm(const Eigen::VectorXd& c) {
  if (c.size() != p_) throw InputError("minnorm: bad length");

  Eigen::VectorXd z(p_);
  std::vector<char> seen(static_cast<std::size_t>(p_), 0);
  for (Eigen::Index node = 0; node < p_; ++node) {
    const Eigen::Index lab = comp_.label(node);
    if (seen[static_cast<std::size_t>(lab)]) continue;
    seen[static_cast<std::size_t>(lab)] = 1;
    if (dirty_[static_cast<std::size_t>(lab)]) refactor(lab);

    const Block& blk = block_[static_cast<std::size_t>(lab)];
    const Eigen::Index s = static_cast<Eigen::Index>(blk.nodes.size());
    if (blk.pinned >= 0) {
      // Singular block: subtract the mean, ground the pinned node. When the
      // data is constant on the block the projection is identically zero;
      // short-circuit so no rounding survives.
      bool constant = true;
      const double first = c[blk.nodes[0]];
      for (Eigen::Index t = 1; t < s && constant; ++t)
        constant = c[blk.nodes[static_cast<std::size_t>(t)]] == first;
      if (constant || s == 1) {
        for (Eigen::Index t = 0; t < s; ++t)
          z[blk.nodes[static_cast<std::size_t>(t)]] = 0.0;
        continue;
      }
      double mean = 0.0;
      for (Eigen::Index t = 0; t < s; ++t)
        mean += c[blk.nodes[static_cast<std::size_t>(t)]];
      mean /= static_cast<double>(s);
      Eigen::VectorXd rb(s - 1);
      Eigen::Index slot = 0;
      for (Eigen::Index t = 0; t < s; ++t) {
        if (t == blk.pinned) continue;
        rb[slot++] = c[blk.nodes[static_cast<std::size_t>(t)]] - mean;
      }
      const Eigen::VectorXd zr = blk.ldlt->solve(rb);
      slot = 0;
      for (Eigen::Index t = 0; t < s; ++t) {
        if (t == blk.pinned) {
          z[blk.nodes[static_cast<std::size_t>(t)]] = 0.0;
          continue;
        }
        z[blk.nodes[static_cast<std::size_t>(t)]] = zr[slot++];
      }
    } else {
      Eigen::VectorXd rb(s);
      for (Eigen::Index t = 0; t < s; ++t)
        rb[t] = c[blk.nodes[static_cast<std::size_t>(t)]];
      const Eigen::VectorXd zl = blk.ldlt->solve(rb);
      for (Eigen::Index t = 0; t < s; ++t)
        z[blk.nodes[static_cast<std::size_t>(t)]] = zl[t];
    }
  }

  // x = D_I z over interior rows in original order.
  Eigen::VectorXd x(interior_size());
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < m_; ++r) {
    if (boundary_[static_cast<std::size_t>(r)]) continue;
    if (r < mg_) {
      const auto& e = spec_.edges[static_cast<std::size_t>(r)];
      x[pos++] = z[e.second] - z[e.first];
    } else {
      x[pos++] = spec_.alpha * z[r - mg_];
    }
  }
  return x;
}

}  // namespace genpath
