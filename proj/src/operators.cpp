#include "genpath/operators.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace genpath {

namespace {

long long binom(int n, int t) {
  if (t < 0 || t > n) return 0;
  long long out = 1;
  for (int i = 1; i <= t; ++i) out = out * (n - t + i) / i;
  return out;
}

void check_boundary_list(const std::vector<Eigen::Index>& rows,
                         Eigen::Index m) {
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t] < 0 || rows[t] >= m)
      throw InputError("boundary row " + std::to_string(rows[t]) +
                       " out of range");
    if (t > 0 && rows[t] <= rows[t - 1])
      throw InputError("boundary rows must be sorted and distinct");
  }
}

// Connected components of the p-node graph spanned by the given edges;
// labels are assigned in order of each component's smallest node.
Eigen::Index label_components(
    Eigen::Index p,
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
    std::vector<Eigen::Index>& label) {
  std::vector<std::vector<Eigen::Index>> adj(p);
  for (const auto& e : edges) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  label.assign(p, -1);
  Eigen::Index count = 0;
  std::queue<Eigen::Index> fifo;
  for (Eigen::Index seed = 0; seed < p; ++seed) {
    if (label[seed] >= 0) continue;
    label[seed] = count;
    fifo.push(seed);
    while (!fifo.empty()) {
      const Eigen::Index u = fifo.front();
      fifo.pop();
      for (Eigen::Index v : adj[u]) {
        if (label[v] >= 0) continue;
        label[v] = count;
        fifo.push(v);
      }
    }
    ++count;
  }
  return count;
}

}  // namespace

SparseRowMat build_diff_operator(int order, Eigen::Index p) {
  if (order < 0) throw InputError("difference order must be >= 0");
  if (p < 1) throw InputError("need at least one coefficient");
  const Eigen::Index width = order + 2;
  const Eigen::Index m = std::max<Eigen::Index>(p - order - 1, 0);
  std::vector<double> coef(width);
  for (Eigen::Index t = 0; t < width; ++t) {
    const long long c = binom(order + 1, static_cast<int>(t));
    coef[t] = ((order + 1 - t) % 2 == 0) ? static_cast<double>(c)
                                         : static_cast<double>(-c);
  }
  SparseRowMat d(m, p);
  d.reserve(Eigen::VectorXi::Constant(static_cast<int>(m), static_cast<int>(width)));
  for (Eigen::Index row = 0; row < m; ++row)
    for (Eigen::Index t = 0; t < width; ++t)
      d.insert(row, row + t) = coef[t];
  d.makeCompressed();
  return d;
}

SparseRowMat build_incidence(
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& edges,
    Eigen::Index p) {
  if (p < 1) throw InputError("need at least one node");
  SparseRowMat d(static_cast<Eigen::Index>(edges.size()), p);
  d.reserve(Eigen::VectorXi::Constant(static_cast<int>(edges.size()), 2));
  for (std::size_t r = 0; r < edges.size(); ++r) {
    const Eigen::Index u = edges[r].first, v = edges[r].second;
    if (u < 0 || u >= p || v < 0 || v >= p)
      throw InputError("edge " + std::to_string(r) + " out of range");
    if (u == v)
      throw InputError("edge " + std::to_string(r) + " is a self-loop");
    d.insert(static_cast<Eigen::Index>(r), std::min(u, v)) = -1.0;
    d.insert(static_cast<Eigen::Index>(r), std::max(u, v)) = 1.0;
  }
  d.makeCompressed();
  return d;
}

PenaltySpec PenaltySpec::trend_filter(Eigen::Index p, int order) {
  if (p < 1) throw InputError("need at least one coefficient");
  if (order < 0) throw InputError("trend filter order must be >= 0");
  PenaltySpec s;
  s.kind = PenaltyKind::TrendFilter;
  s.p = p;
  s.order = order;
  return s;
}

PenaltySpec PenaltySpec::fused_graph(
    Eigen::Index p, std::vector<std::pair<Eigen::Index, Eigen::Index>> e) {
  PenaltySpec s;
  s.kind = PenaltyKind::FusedGraph;
  s.p = p;
  s.edges = std::move(e);
  for (auto& ed : s.edges)
    if (ed.first > ed.second) std::swap(ed.first, ed.second);
  build_incidence(s.edges, p);  // validates
  return s;
}

PenaltySpec PenaltySpec::sparse_fused_graph(
    Eigen::Index p, std::vector<std::pair<Eigen::Index, Eigen::Index>> e,
    double alpha) {
  if (!(alpha > 0.0)) throw InputError("sparse fused weight must be positive");
  PenaltySpec s = fused_graph(p, std::move(e));
  s.kind = PenaltyKind::SparseFusedGraph;
  s.alpha = alpha;
  return s;
}

PenaltySpec PenaltySpec::custom_rows(SparseRowMat d) {
  if (d.cols() < 1) throw InputError("custom penalty needs columns");
  if (d.rows() < 1) throw InputError("custom penalty needs rows");
  PenaltySpec s;
  s.kind = PenaltyKind::Custom;
  s.p = d.cols();
  s.custom = std::move(d);
  s.custom.makeCompressed();
  return s;
}

Eigen::Index PenaltySpec::rows() const {
  switch (kind) {
    case PenaltyKind::TrendFilter:
      return std::max<Eigen::Index>(p - order - 1, 0);
    case PenaltyKind::FusedGraph:
      return static_cast<Eigen::Index>(edges.size());
    case PenaltyKind::SparseFusedGraph:
      return static_cast<Eigen::Index>(edges.size()) + p;
    case PenaltyKind::Custom:
      return custom.rows();
  }
  return 0;
}

SparseRowMat PenaltySpec::matrix() const {
  switch (kind) {
    case PenaltyKind::TrendFilter:
      return build_diff_operator(order, p);
    case PenaltyKind::FusedGraph:
      return build_incidence(edges, p);
    case PenaltyKind::SparseFusedGraph: {
      const Eigen::Index mg = static_cast<Eigen::Index>(edges.size());
      SparseRowMat d(mg + p, p);
      d.reserve(Eigen::VectorXi::Constant(static_cast<int>(mg + p), 2));
      for (Eigen::Index r = 0; r < mg; ++r) {
        d.insert(r, edges[r].first) = -1.0;
        d.insert(r, edges[r].second) = 1.0;
      }
      for (Eigen::Index i = 0; i < p; ++i) d.insert(mg + i, i) = alpha;
      d.makeCompressed();
      return d;
    }
    case PenaltyKind::Custom:
      return custom;
  }
  return SparseRowMat(0, 0);
}

Eigen::MatrixXd null_basis(const PenaltySpec& spec,
                           const std::vector<Eigen::Index>& boundary_rows) {
  const Eigen::Index m = spec.rows();
  const Eigen::Index p = spec.p;
  check_boundary_list(boundary_rows, m);

  Eigen::MatrixXd h;
  if (spec.kind == PenaltyKind::TrendFilter) {
    const int k = spec.order;
    const Eigen::Index nb = static_cast<Eigen::Index>(boundary_rows.size());
    h.setZero(p, k + 1 + nb);
    h.col(0).setOnes();
    for (int j = 1; j <= k; ++j) {
      double run = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        run += h(i, j - 1);
        h(i, j) = run;
      }
    }
    // One truncated copy of the top polynomial per boundary row: zero up to
    // the row's window, then the polynomial restarted past it.
    for (Eigen::Index t = 0; t < nb; ++t) {
      const Eigen::Index b = boundary_rows[t];
      for (Eigen::Index i = b + k + 1; i < p; ++i)
        h(i, k + 1 + t) = h(i - b - k - 1, k);
    }
  } else if (spec.kind == PenaltyKind::FusedGraph ||
             spec.kind == PenaltyKind::SparseFusedGraph) {
    const Eigen::Index mg = static_cast<Eigen::Index>(spec.edges.size());
    std::vector<char> on_boundary(m, 0);
    for (Eigen::Index r : boundary_rows) on_boundary[r] = 1;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> interior_edges;
    for (Eigen::Index r = 0; r < mg; ++r)
      if (!on_boundary[r]) interior_edges.push_back(spec.edges[r]);
    std::vector<Eigen::Index> label;
    const Eigen::Index ncomp = label_components(p, interior_edges, label);

    std::vector<char> keep(ncomp, 1);
    if (spec.kind == PenaltyKind::SparseFusedGraph) {
      // A component contributes a null vector only when every one of its
      // coordinate rows in the weighted identity block is on the boundary.
      for (Eigen::Index i = 0; i < p; ++i)
        if (!on_boundary[mg + i]) keep[label[i]] = 0;
    }
    std::vector<Eigen::Index> slot(ncomp, -1);
    Eigen::Index q = 0;
    for (Eigen::Index c = 0; c < ncomp; ++c)
      if (keep[c]) slot[c] = q++;
    h.setZero(p, q);
    for (Eigen::Index i = 0; i < p; ++i)
      if (slot[label[i]] >= 0) h(i, slot[label[i]]) = 1.0;
  } else {
    throw ContractViolation("null_basis: custom penalties are not supported");
  }

  // The construction is integer-exact, so the reduced operator must kill
  // every column without rounding.
  const SparseRowMat d = spec.matrix();
  std::vector<char> on_boundary(m, 0);
  for (Eigen::Index r : boundary_rows) on_boundary[r] = 1;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (on_boundary[r]) continue;
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      double acc = 0.0;
      for (SparseRowMat::InnerIterator it(d, r); it; ++it)
        acc += it.value() * h(it.col(), c);
      if (acc != 0.0)
        throw ContractViolation("null_basis: residual in row " +
                                std::to_string(r));
    }
  }
  return h;
}

BoundaryPartition::BoundaryPartition(Eigen::Index m) {
  if (m < 0) throw InputError("negative row count");
  flag_.assign(static_cast<std::size_t>(m), 0);
  sign_.assign(static_cast<std::size_t>(m), 0.0);
}

void BoundaryPartition::check_row(Eigen::Index row) const {
  if (row < 0 || row >= total_rows())
    throw InputError("boundary row out of range");
}

bool BoundaryPartition::is_boundary(Eigen::Index row) const {
  check_row(row);
  return flag_[static_cast<std::size_t>(row)] != 0;
}

double BoundaryPartition::sign(Eigen::Index row) const {
  check_row(row);
  return sign_[static_cast<std::size_t>(row)];
}

void BoundaryPartition::add(Eigen::Index row, double sign) {
  check_row(row);
  if (flag_[static_cast<std::size_t>(row)])
    throw ContractViolation("row already on the boundary");
  if (sign != 1.0 && sign != -1.0)
    throw ContractViolation("boundary sign must be +-1");
  flag_[static_cast<std::size_t>(row)] = 1;
  sign_[static_cast<std::size_t>(row)] = sign;
  ++nb_;
}

void BoundaryPartition::remove(Eigen::Index row) {
  check_row(row);
  if (!flag_[static_cast<std::size_t>(row)])
    throw ContractViolation("row is not on the boundary");
  flag_[static_cast<std::size_t>(row)] = 0;
  sign_[static_cast<std::size_t>(row)] = 0.0;
  --nb_;
}

std::vector<Eigen::Index> BoundaryPartition::boundary_rows() const {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(nb_));
  for (Eigen::Index r = 0; r < total_rows(); ++r)
    if (flag_[static_cast<std::size_t>(r)]) out.push_back(r);
  return out;
}

std::vector<Eigen::Index> BoundaryPartition::interior_rows() const {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(interior_size()));
  for (Eigen::Index r = 0; r < total_rows(); ++r)
    if (!flag_[static_cast<std::size_t>(r)]) out.push_back(r);
  return out;
}

Eigen::VectorXd BoundaryPartition::boundary_signs() const {
  Eigen::VectorXd s(nb_);
  Eigen::Index t = 0;
  for (Eigen::Index r = 0; r < total_rows(); ++r)
    if (flag_[static_cast<std::size_t>(r)]) s[t++] = sign_[static_cast<std::size_t>(r)];
  return s;
}

Eigen::Index BoundaryPartition::interior_position(Eigen::Index row) const {
  check_row(row);
  if (flag_[static_cast<std::size_t>(row)])
    throw ContractViolation("row is on the boundary");
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < row; ++r)
    if (!flag_[static_cast<std::size_t>(r)]) ++pos;
  return pos;
}

Eigen::Index BoundaryPartition::boundary_position(Eigen::Index row) const {
  check_row(row);
  if (!flag_[static_cast<std::size_t>(row)])
    throw ContractViolation("row is not on the boundary");
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < row; ++r)
    if (flag_[static_cast<std::size_t>(r)]) ++pos;
  return pos;
}

}  // namespace genpath
