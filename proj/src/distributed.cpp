// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#include "conmpc/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "conmpc/errors.hpp"

namespace conmpc {

// ---------------------------------------------------------------------------
// NetworkSim

NetworkSim::NetworkSim(const WeightedLaplacian& graph) : agents_(graph.agents) {
  edge_.assign(agents_, std::vector<bool>(agents_, false));
  for (int i = 0; i < agents_; ++i)
    for (int j = 0; j < agents_; ++j)
      if (graph.is_edge(i, j)) edge_[i][j] = true;
  outbox_.resize(agents_);
  inbox_.resize(agents_);
}

bool NetworkSim::is_edge(int a, int b) const {
  return a >= 0 && b >= 0 && a < agents_ && b < agents_ && edge_[a][b];
}

void NetworkSim::send(int from, int to, Vec payload) {
  if (!is_edge(from, to)) {
    ++non_neighbor_;
    throw std::logic_error("message between non-neighbors: " + std::to_string(from) +
                           " -> " + std::to_string(to));
  }
  ++messages_;
  bytes_ += 24 + 8 * static_cast<long long>(payload.size());
  outbox_[to].emplace_back(from, std::move(payload));
}

void NetworkSim::barrier() {
  ++round_;
  for (int i = 0; i < agents_; ++i) {
    inbox_[i] = std::move(outbox_[i]);
    outbox_[i].clear();
    std::stable_sort(inbox_[i].begin(), inbox_[i].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
}

const std::vector<std::pair<int, Vec>>& NetworkSim::inbox(int node) const {
  return inbox_[node];
}

// ---------------------------------------------------------------------------
// Partition

int AgentNode::local_index(int global) const {
  if (!owned.empty() && global >= owned.front() && global <= owned.back())
    return global - owned.front();
  auto it = std::lower_bound(copies.begin(), copies.end(), global);
  if (it != copies.end() && *it == global)
    return static_cast<int>(owned.size() + (it - copies.begin()));
  return -1;
}

namespace {

std::vector<int> row_support(const Csr& a, int row) {
  std::vector<int> s(a.indices.begin() + a.indptr[row], a.indices.begin() + a.indptr[row + 1]);
  return s;
}

std::vector<int> distinct_owners(const std::vector<int>& support, const DecisionLayout& lay) {
  std::vector<int> o;
  for (int g : support) {
    const int a = lay.agent_of(g);
    if (std::find(o.begin(), o.end(), a) == o.end()) o.push_back(a);
  }
  std::sort(o.begin(), o.end());
  return o;
}

}  // namespace

Partition partition(const QpProblem& qp, const DecisionLayout& layout,
                    const WeightedLaplacian& graph) {
  const int n = qp.dim();
  const int m = layout.agents;
  if (n != layout.dim() || graph.agents != m)
    throw std::logic_error("partition inputs disagree on sizes");

  std::vector<int> owner(n);
  std::vector<bool> is_pos(n);
  for (int g = 0; g < n; ++g) {
    owner[g] = layout.agent_of(g);
    int a, s, c;
    is_pos[g] = layout.is_stage_position(g, &a, &s, &c);
  }

  struct Draft {
    std::vector<Csr::Triplet> h;      // global coordinates for now
    std::vector<int> eq_rows;
    std::vector<int> in_rows;
    std::vector<bool> needs;          // foreign coords requiring a copy
  };
  std::vector<Draft> draft(m);
  for (auto& d : draft) d.needs.assign(n, false);

  // Quadratic term: same-agent entries stay whole, cross-agent position
  // entries are halved onto the two owners (exact in binary), anything else
  // cannot be localized.
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      const double v = qp.h(r, c);
      if (v == 0.0) continue;
      const int ar = owner[r], ac = owner[c];
      if (ar == ac) {
        draft[ar].h.push_back({r, c, v});
      } else if (is_pos[r] && is_pos[c]) {
        draft[ar].h.push_back({r, c, 0.5 * v});
        draft[ac].h.push_back({r, c, 0.5 * v});
        draft[ar].needs[c] = true;
        draft[ac].needs[r] = true;
      } else {
        throw NonLocalRow("quadratic entry couples agents " + std::to_string(ar) + " and " +
                          std::to_string(ac) + " outside stage positions");
      }
    }
  }

  for (int i = 0; i < qp.num_eq(); ++i) {
    const auto sup = row_support(qp.a_eq, i);
    const auto agents = distinct_owners(sup, layout);
    if (agents.size() > 1)
      throw NonLocalRow("equality row " + std::to_string(i) + " spans several agents");
    // A row with no support is constant; park it on node 0.
    draft[agents.empty() ? 0 : agents[0]].eq_rows.push_back(i);
  }

  for (int i = 0; i < qp.num_in(); ++i) {
    const auto sup = row_support(qp.a_in, i);
    const auto agents = distinct_owners(sup, layout);
    if (agents.size() <= 1) {
      draft[agents.empty() ? 0 : agents[0]].in_rows.push_back(i);
      continue;
    }
    for (int g : sup)
      if (!is_pos[g])
        throw NonLocalRow("inequality row " + std::to_string(i) +
                          " couples agents outside stage positions");
    const std::vector<int> holders =
        agents.size() == 2 ? agents : [&] {
          std::vector<int> all(m);
          for (int a = 0; a < m; ++a) all[a] = a;
          return all;
        }();
    for (int h : holders) {
      draft[h].in_rows.push_back(i);
      for (int g : sup)
        if (owner[g] != h) draft[h].needs[g] = true;
    }
  }

  Partition p;
  p.dim = n;
  p.num_eq = qp.num_eq();
  p.num_in = qp.num_in();
  p.nodes.resize(m);

  for (int a = 0; a < m; ++a) {
    AgentNode& node = p.nodes[a];
    node.id = a;
    const int base = a * layout.per_agent();
    node.owned.resize(layout.per_agent());
    for (int k = 0; k < layout.per_agent(); ++k) node.owned[k] = base + k;
    for (int g = 0; g < n; ++g)
      if (draft[a].needs[g]) node.copies.push_back(g);

    const int ld = node.local_dim();
    node.local.h = Mat(ld, ld);
    for (const auto& t : draft[a].h) {
      const int lr = node.local_index(t.r);
      const int lc = node.local_index(t.c);
      node.local.h(lr, lc) += t.v;
      if (lr != lc) node.local.h(lc, lr) += t.v;
    }
    node.local.c.assign(ld, 0.0);
    for (int k = 0; k < static_cast<int>(node.owned.size()); ++k)
      node.local.c[k] = qp.c[node.owned[k]];

    std::vector<Csr::Triplet> te;
    node.eq_rows = draft[a].eq_rows;
    node.local.b_eq.assign(node.eq_rows.size(), 0.0);
    for (std::size_t r = 0; r < node.eq_rows.size(); ++r) {
      const int gr = node.eq_rows[r];
      node.local.b_eq[r] = qp.b_eq[gr];
      for (int k = qp.a_eq.indptr[gr]; k < qp.a_eq.indptr[gr + 1]; ++k)
        te.push_back({static_cast<int>(r), node.local_index(qp.a_eq.indices[k]),
                      qp.a_eq.data[k]});
    }
    node.local.a_eq = Csr::from_triplets(static_cast<int>(node.eq_rows.size()), ld,
                                         std::move(te));

    std::vector<Csr::Triplet> ti;
    node.in_rows = draft[a].in_rows;
    node.local.b_in.assign(node.in_rows.size(), 0.0);
    for (std::size_t r = 0; r < node.in_rows.size(); ++r) {
      const int gr = node.in_rows[r];
      node.local.b_in[r] = qp.b_in[gr];
      for (int k = qp.a_in.indptr[gr]; k < qp.a_in.indptr[gr + 1]; ++k)
        ti.push_back({static_cast<int>(r), node.local_index(qp.a_in.indices[k]),
                      qp.a_in.data[k]});
    }
    node.local.a_in = Csr::from_triplets(static_cast<int>(node.in_rows.size()), ld,
                                         std::move(ti));
  }

  // Consensus edges: the coordinates both endpoints hold.
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      if (!graph.is_edge(a, b)) continue;
      PartitionEdge e;
      e.a = a;
      e.b = b;
      for (int g = 0; g < n; ++g) {
        const bool ha = owner[g] == a || draft[a].needs[g];
        const bool hb = owner[g] == b || draft[b].needs[g];
        if (ha && hb) e.coords.push_back(g);
      }
      if (!e.coords.empty()) p.edges.push_back(std::move(e));
    }
  }

  // Every copied coordinate must reach its other holders through the edges,
  // or agreement can never form. Holder sets repeat, so audits are memoized.
  std::map<std::vector<int>, bool> audited;
  for (int g = 0; g < n; ++g) {
    std::vector<int> holders;
    for (int a = 0; a < m; ++a)
      if (owner[g] == a || draft[a].needs[g]) holders.push_back(a);
    if (holders.size() < 2) continue;
    auto [it, fresh] = audited.emplace(holders, false);
    if (fresh) {
      std::vector<bool> in(m, false), seen(m, false);
      for (int h : holders) in[h] = true;
      std::vector<int> stack{holders[0]};
      seen[holders[0]] = true;
      int reached = 1;
      while (!stack.empty()) {
        const int at = stack.back();
        stack.pop_back();
        for (int l = 0; l < m; ++l) {
          if (in[l] && !seen[l] && graph.is_edge(at, l)) {
            seen[l] = true;
            ++reached;
            stack.push_back(l);
          }
        }
      }
      it->second = reached == static_cast<int>(holders.size());
    }
    if (!it->second)
      throw GraphDisconnected("holders of coordinate " + std::to_string(g) +
                              " are not connected in the message topology");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Consensus solve

bool ConsensusState::matches(const Partition& p) const {
  if (x.size() != p.nodes.size() || edges.size() != p.edges.size()) return false;
  for (std::size_t i = 0; i < p.nodes.size(); ++i)
    if (static_cast<int>(x[i].size()) != p.nodes[i].local_dim()) return false;
  for (std::size_t e = 0; e < p.edges.size(); ++e)
    if (edges[e].t.size() != p.edges[e].coords.size()) return false;
  return true;
}

namespace {

Mat augmented_quadratic(const AgentNode& node, const Partition& p, double rho) {
  Mat h = node.local.h;
  for (const auto& e : p.edges) {
    if (e.a != node.id && e.b != node.id) continue;
    for (int g : e.coords) h(node.local_index(g), node.local_index(g)) += rho;
  }
  return h;
}

/// Raises rho until every node's augmented quadratic is positive definite;
/// the split scatters indefinite halves of cross-agent curvature, and the
/// agreement penalty is what restores local convexity.
double ensure_convex(const Partition& p, double rho, std::vector<Mat>* aug) {
  for (int attempt = 0; attempt < 14; ++attempt) {
    bool ok = true;
    aug->clear();
    for (const auto& node : p.nodes) {
      Mat h = augmented_quadratic(node, p, rho);
      Cholesky probe;
      if (!probe.factor(h, 1e-10)) {
        ok = false;
        break;
      }
      aug->push_back(std::move(h));
    }
    if (ok) return rho;
    rho *= 10.0;
  }
  throw NoConvergence("local quadratic blocks stay indefinite under the agreement penalty");
}

}  // namespace

DistributedSolution solve_distributed(const Partition& p, NetworkSim& net,
                                      const ConsensusSettings& st, ConsensusState* state) {
  const int nn = static_cast<int>(p.nodes.size());
  ConsensusState scratch;
  ConsensusState* s = state ? state : &scratch;
  if (!s->matches(p)) {
    s->x.assign(nn, Vec());
    s->local.assign(nn, QpSolution());
    s->edges.assign(p.edges.size(), ConsensusState::EdgeState());
    for (int i = 0; i < nn; ++i) s->x[i].assign(p.nodes[i].local_dim(), 0.0);
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      const std::size_t w = p.edges[e].coords.size();
      s->edges[e].t.assign(w, 0.0);
      s->edges[e].u_a.assign(w, 0.0);
      s->edges[e].u_b.assign(w, 0.0);
    }
    s->rho_c = 0.0;
  }
  double rho = s->rho_c > 0.0 ? s->rho_c : st.rho_c;

  std::vector<Mat> aug;
  {
    const double raised = ensure_convex(p, rho, &aug);
    if (raised != rho) {
      const double scale = rho / raised;
      for (auto& e : s->edges) {
        for (double& u : e.u_a) u *= scale;
        for (double& u : e.u_b) u *= scale;
      }
      rho = raised;
    }
  }

  DistributedSolution out;
  double primal = 0.0, dual = 0.0;
  bool converged = false;
  bool infeasible = false;
  int rounds = 0;

  while (rounds < st.max_rounds && !converged && !infeasible) {
    ++rounds;

    for (int i = 0; i < nn && !infeasible; ++i) {
      const AgentNode& node = p.nodes[i];
      QpProblem lqp;
      lqp.h = aug[i];
      lqp.c = node.local.c;
      for (std::size_t e = 0; e < p.edges.size(); ++e) {
        const PartitionEdge& pe = p.edges[e];
        const ConsensusState::EdgeState& es = s->edges[e];
        const Vec& u = pe.a == i ? es.u_a : es.u_b;
        if (pe.a != i && pe.b != i) continue;
        for (std::size_t k = 0; k < pe.coords.size(); ++k)
          lqp.c[node.local_index(pe.coords[k])] += rho * (u[k] - es.t[k]);
      }
      lqp.a_eq = node.local.a_eq;
      lqp.b_eq = node.local.b_eq;
      lqp.a_in = node.local.a_in;
      lqp.b_in = node.local.b_in;

      QpSolution sol;
      bool solved = false;
      while (!solved) {
        try {
          const QpSolution* warm =
              s->local[i].delta_z.empty() ? nullptr : &s->local[i];
          sol = solve_qp(lqp, st.local, warm);
          solved = true;
        } catch (const NoConvergence&) {
          // Raise the agreement penalty and retry once per decade; the
          // stronger diagonal usually settles a stalled local solve.
          const double next = rho * 10.0;
          if (next > 1e10) throw;
          const double scale = rho / next;
          for (auto& e : s->edges) {
            for (double& u : e.u_a) u *= scale;
            for (double& u : e.u_b) u *= scale;
          }
          rho = next;
          ensure_convex(p, rho, &aug);
          lqp.h = aug[i];
        }
      }
      if (sol.status == QpStatus::PrimalInfeasible) {
        infeasible = true;
        break;
      }
      s->x[i] = sol.delta_z;
      s->local[i] = std::move(sol);
    }
    if (infeasible) break;

    // Neighbor exchange: shared values and the sender-side scaled dual.
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      const PartitionEdge& pe = p.edges[e];
      const ConsensusState::EdgeState& es = s->edges[e];
      const std::size_t w = pe.coords.size();
      Vec pay_a(2 * w), pay_b(2 * w);
      for (std::size_t k = 0; k < w; ++k) {
        pay_a[k] = s->x[pe.a][p.nodes[pe.a].local_index(pe.coords[k])];
        pay_a[w + k] = es.u_a[k];
        pay_b[k] = s->x[pe.b][p.nodes[pe.b].local_index(pe.coords[k])];
        pay_b[w + k] = es.u_b[k];
      }
      net.send(pe.a, pe.b, std::move(pay_a));
      net.send(pe.b, pe.a, std::move(pay_b));
    }
    net.barrier();

    // Both endpoints move the shared coordinates to the dual-adjusted
    // midpoint; the arithmetic below is exactly what each side computes
    // from its inbox.
    primal = 0.0;
    dual = 0.0;
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      const PartitionEdge& pe = p.edges[e];
      ConsensusState::EdgeState& es = s->edges[e];
      for (std::size_t k = 0; k < pe.coords.size(); ++k) {
        const double xa = s->x[pe.a][p.nodes[pe.a].local_index(pe.coords[k])];
        const double xb = s->x[pe.b][p.nodes[pe.b].local_index(pe.coords[k])];
        const double t_new = 0.5 * (xa + es.u_a[k] + xb + es.u_b[k]);
        dual = std::max(dual, rho * std::fabs(t_new - es.t[k]));
        es.u_a[k] += xa - t_new;
        es.u_b[k] += xb - t_new;
        es.t[k] = t_new;
        primal = std::max(primal, std::fabs(xa - t_new));
        primal = std::max(primal, std::fabs(xb - t_new));
      }
    }
    converged = primal <= st.tol && dual <= st.tol;

    if (!converged && st.adapt_every > 0 && rounds % st.adapt_every == 0) {
      double next = rho;
      if (primal > 10.0 * dual)
        next = std::min(rho * 2.0, 1e8);
      else if (dual > 10.0 * primal)
        next = std::max(rho * 0.5, 1e-4);
      if (next != rho) {
        const double scale = rho / next;
        for (auto& e : s->edges) {
          for (double& u : e.u_a) u *= scale;
          for (double& u : e.u_b) u *= scale;
        }
        rho = next;
        ensure_convex(p, rho, &aug);
      }
    }
  }
  s->rho_c = rho;

  out.rounds = rounds;
  out.primal_residual = primal;
  out.dual_residual = dual;
  out.rho_c = rho;
  out.qp.iterations = rounds;
  out.qp.rho_final = rho;
  out.qp.primal_residual = primal;
  out.qp.dual_residual = dual;
  if (infeasible) {
    out.qp.status = QpStatus::PrimalInfeasible;
    return out;
  }
  if (!converged)
    throw MaxRounds("consensus residuals above tolerance after " +
                        std::to_string(rounds) + " rounds",
                    primal, dual);

  out.qp.status = QpStatus::Optimal;
  out.qp.delta_z.assign(p.dim, 0.0);
  out.qp.mu_eq.assign(p.num_eq, 0.0);
  out.qp.mu_in.assign(p.num_in, 0.0);
  for (int i = 0; i < nn; ++i) {
    const AgentNode& node = p.nodes[i];
    for (std::size_t k = 0; k < node.owned.size(); ++k)
      out.qp.delta_z[node.owned[k]] = s->x[i][k];
    for (std::size_t r = 0; r < node.eq_rows.size(); ++r)
      out.qp.mu_eq[node.eq_rows[r]] = s->local[i].mu_eq[r];
    // Replicated rows act through every replica; the global multiplier is
    // the sum of the local ones.
    for (std::size_t r = 0; r < node.in_rows.size(); ++r)
      out.qp.mu_in[node.in_rows[r]] += s->local[i].mu_in[r];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decentralized spectral estimate

namespace {

struct Tree {
  std::vector<int> parent;                 // -1 for root and unreached nodes
  std::vector<std::vector<int>> children;  // sorted
  std::vector<int> depth;                  // -1 when unreached
  int max_depth = 0;
  int reached = 0;
};

/// Breadth-first flooding from node 0; every node adopts its lowest-id
/// first announcer as parent. Runs through the fabric so the audit sees it.
Tree build_tree(NetworkSim& net) {
  const int m = net.agent_count();
  Tree t;
  t.parent.assign(m, -1);
  t.depth.assign(m, -1);
  t.children.resize(m);
  t.depth[0] = 0;
  t.reached = 1;
  std::vector<int> frontier{0};
  while (!frontier.empty()) {
    for (int i : frontier)
      for (int l = 0; l < m; ++l)
        if (net.is_edge(i, l)) net.send(i, l, Vec{static_cast<double>(t.depth[i])});
    net.barrier();
    std::vector<int> next;
    for (int i = 0; i < m; ++i) {
      if (t.depth[i] >= 0) continue;
      const auto& in = net.inbox(i);
      if (in.empty()) continue;
      t.parent[i] = in.front().first;  // inbox sorted by sender
      t.depth[i] = static_cast<int>(in.front().second[0]) + 1;
      t.max_depth = std::max(t.max_depth, t.depth[i]);
      ++t.reached;
      next.push_back(i);
    }
    frontier = std::move(next);
  }
  for (int i = 0; i < m; ++i)
    if (t.parent[i] >= 0) t.children[t.parent[i]].push_back(i);
  return t;
}

/// Tree reduce-and-broadcast: every node ends with the elementwise combine
/// of all nodes' vectors. op: 0 = sum, 1 = max.
std::vector<Vec> tree_allreduce(NetworkSim& net, const Tree& t,
                                const std::vector<Vec>& local, int op) {
  const int m = static_cast<int>(local.size());
  std::vector<Vec> acc = local;
  for (int d = t.max_depth; d >= 1; --d) {
    for (int i = 0; i < m; ++i)
      if (t.depth[i] == d) net.send(i, t.parent[i], acc[i]);
    net.barrier();
    for (int i = 0; i < m; ++i) {
      if (t.depth[i] != d - 1) continue;
      for (const auto& [from, pay] : net.inbox(i)) {
        if (t.parent[from] != i) continue;
        for (std::size_t k = 0; k < pay.size(); ++k)
          acc[i][k] = op == 1 ? std::max(acc[i][k], pay[k]) : acc[i][k] + pay[k];
      }
    }
  }
  for (int d = 0; d < t.max_depth; ++d) {
    for (int i = 0; i < m; ++i)
      if (t.depth[i] == d)
        for (int c : t.children[i]) net.send(i, c, acc[i]);
    net.barrier();
    for (int i = 0; i < m; ++i) {
      if (t.depth[i] != d + 1) continue;
      for (const auto& [from, pay] : net.inbox(i))
        if (from == t.parent[i]) acc[i] = pay;
    }
  }
  return acc;
}

double hash_unit(unsigned seed, int i) {
  // splitmix64 on (seed, index), folded to [-1, 1]
  std::uint64_t z = (static_cast<std::uint64_t>(seed) << 32) ^
                    (static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return 2.0 * (static_cast<double>(z >> 11) / 9007199254740992.0) - 1.0;
}

}  // namespace

SpectralEstimate distributed_fiedler(const Vec& positions, const WeightKernel& kernel,
                                     NetworkSim& net, int iters, unsigned seed,
                                     double tol) {
  const int m = net.agent_count();
  if (m < 2 || static_cast<int>(positions.size()) != 2 * m)
    throw std::logic_error("spectral estimate needs >= 2 agents and 2 coordinates each");

  // Neighbors exchange positions once; edge weights follow locally.
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < m; ++l)
      if (net.is_edge(i, l))
        net.send(i, l, Vec{positions[2 * i], positions[2 * i + 1]});
  net.barrier();

  std::vector<Vec> w(m, Vec(m, 0.0));
  Vec deg(m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < m; ++l) {
      if (!net.is_edge(i, l)) continue;
      w[i][l] = weight(kernel, &positions[2 * i], &positions[2 * l]);
      deg[i] += w[i][l];
    }
  }

  SpectralEstimate est;
  const Tree tree = build_tree(net);
  if (tree.reached < m) {
    // A split topology has eigenvalue zero by definition; flag it instead
    // of estimating inside one component.
    est.disconnected = true;
    est.v2.assign(m, 0.0);
    return est;
  }

  std::vector<Vec> one(m, Vec(1, 0.0));
  for (int i = 0; i < m; ++i) one[i][0] = deg[i];
  const double maxdeg = tree_allreduce(net, tree, one, 1)[0][0];
  const double c = 2.0 * maxdeg + 1.0;  // above the largest eigenvalue

  Vec v(m);
  for (int i = 0; i < m; ++i) v[i] = hash_unit(seed, i);
  {
    for (int i = 0; i < m; ++i) one[i][0] = v[i];
    const double mean = tree_allreduce(net, tree, one, 0)[0][0] / m;
    for (int i = 0; i < m; ++i) {
      v[i] -= mean;
      one[i][0] = v[i] * v[i];
    }
    const double nrm = std::sqrt(tree_allreduce(net, tree, one, 0)[0][0]);
    if (nrm < 1e-12) throw NotConverged("degenerate start vector", 1.0);
    for (int i = 0; i < m; ++i) v[i] /= nrm;
  }

  double lam_b = 0.0;
  double res = std::numeric_limits<double>::infinity();
  int used = 0;
  std::vector<Vec> tri(m, Vec(3, 0.0));
  while (used < iters && res > tol) {
    ++used;
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < m; ++l)
        if (net.is_edge(i, l)) net.send(i, l, Vec{v[i]});
    net.barrier();

    Vec y(m);
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int l = 0; l < m; ++l) acc += w[i][l] * v[l];
      y[i] = c * v[i] - (deg[i] * v[i] - acc);
    }
    for (int i = 0; i < m; ++i) one[i][0] = y[i];
    const double mean = tree_allreduce(net, tree, one, 0)[0][0] / m;
    for (int i = 0; i < m; ++i) {
      y[i] -= mean;
      tri[i][0] = y[i] * y[i];
      tri[i][1] = v[i] * y[i];
    }
    const auto sums = tree_allreduce(net, tree, tri, 0);
    const double y2 = sums[0][0];
    lam_b = sums[0][1];
    res = std::sqrt(std::max(0.0, y2 - lam_b * lam_b));
    const double nrm = std::sqrt(y2);
    if (nrm < 1e-300) throw NotConverged("iterate vanished", res);
    for (int i = 0; i < m; ++i) v[i] = y[i] / nrm;
  }
  if (res > tol)
    throw NotConverged("eigenpair residual " + std::to_string(res) + " after " +
                           std::to_string(used) + " iterations",
                       res);

  // Root pins the overall sign so every run lands on the same vector.
  double sign = v[0] >= 0.0 ? 1.0 : -1.0;
  if (std::fabs(v[0]) < 1e-12) sign = 1.0;
  for (int i = 0; i < m; ++i) one[i][0] = i == 0 ? sign : 0.0;
  sign = tree_allreduce(net, tree, one, 0)[0][0];
  for (int i = 0; i < m; ++i) v[i] *= sign;

  est.lambda2 = c - lam_b;
  est.v2 = v;
  est.iterations = used;
  est.residual = res;
  return est;
}

}  // namespace conmpc
