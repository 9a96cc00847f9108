// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 conmpc Authors
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "conmpc/graph.hpp"
#include "conmpc/ocp.hpp"
#include "conmpc/qp.hpp"

namespace conmpc {

/// Synchronous lossless message fabric between agent processors. Delivery
/// respects round barriers: everything sent in round r is readable only
/// after the barrier, and a send between non-neighbors throws. Counters
/// feed the locality audit and the CLI report.
class NetworkSim {
 public:
  explicit NetworkSim(const WeightedLaplacian& graph);

  int agent_count() const { return agents_; }
  bool is_edge(int a, int b) const;

  /// Queues a payload for delivery at the next barrier.
  /// throws std::logic_error on a non-neighbor pair (after counting it).
  void send(int from, int to, Vec payload);
  /// Advances the round and moves queued payloads into inboxes.
  void barrier();
  /// Messages delivered to `node` at the last barrier, sorted by sender.
  const std::vector<std::pair<int, Vec>>& inbox(int node) const;

  int round() const { return round_; }
  long long messages() const { return messages_; }
  long long bytes() const { return bytes_; }
  long long non_neighbor_messages() const { return non_neighbor_; }

 private:
  int agents_ = 0;
  int round_ = 0;
  long long messages_ = 0;
  long long bytes_ = 0;
  long long non_neighbor_ = 0;
  std::vector<std::vector<bool>> edge_;
  std::vector<std::vector<std::pair<int, Vec>>> outbox_;
  std::vector<std::vector<std::pair<int, Vec>>> inbox_;
};

/// One agent's processor: its owned slice of the decision vector, copies of
/// the foreign stage-position coordinates its rows and quadratic terms
/// touch, and the constraint rows it enforces locally.
/// Local variable order: owned coordinates ascending, then copies ascending.
struct AgentNode {
  int id = 0;
  std::vector<int> owned;    // global indices, the agent's contiguous slice
  std::vector<int> copies;   // global indices of copied foreign positions
  QpProblem local;           // consensus-free local problem data
  std::vector<int> eq_rows;  // local equality row -> global row
  std::vector<int> in_rows;  // local inequality row -> global row

  int local_dim() const { return static_cast<int>(owned.size() + copies.size()); }
  /// Local index of a global coordinate, -1 when this node does not hold it.
  int local_index(int global) const;
};

/// Consensus edge between two nodes: the coordinates both sides hold.
/// Agreement on every shared coordinate travels through these edges only.
struct PartitionEdge {
  int a = 0;  // node ids, a < b
  int b = 0;
  std::vector<int> coords;  // global indices shared by both, ascending
};

struct Partition {
  std::vector<AgentNode> nodes;
  std::vector<PartitionEdge> edges;
  int dim = 0;      // global decision dimension
  int num_eq = 0;   // global equality rows
  int num_in = 0;   // global inequality rows
};

/// Splits one quadratic subproblem across agent processors.
///
/// Placement: rows and quadratic entries inside one agent's slice stay with
/// that agent; cross-agent quadratic entries between stage positions are
/// halved onto the two owners; rows coupling two agents' stage positions are
/// replicated on both; rows over many agents' stage positions (the spectral
/// ones) are replicated on every node. Reassembling the pieces reproduces
/// the input exactly.
///
/// throws NonLocalRow when a row or quadratic entry couples agents through
/// anything but stage positions; GraphDisconnected when shared coordinates
/// cannot reach agreement through the message topology.
Partition partition(const QpProblem& qp, const DecisionLayout& layout,
                    const WeightedLaplacian& graph);

struct ConsensusSettings {
  double rho_c = 1.0;        // agreement penalty; raised on local convexity failure
  double tol = 1e-6;         // consensus residual tolerance, inf norm
  int max_rounds = 3000;
  int adapt_every = 50;      // penalty rebalance cadence, 0 disables
  QpSettings local;          // inner per-node solver settings
};

/// Warm state carried between consensus solves of the same partition shape;
/// reset automatically when the shapes no longer match.
struct ConsensusState {
  struct EdgeState {
    Vec t;    // agreed values per shared coordinate
    Vec u_a;  // scaled dual held by edge endpoint a
    Vec u_b;  // scaled dual held by edge endpoint b
  };
  std::vector<Vec> x;               // per node: last local primal
  std::vector<QpSolution> local;    // per node: inner solver warm start
  std::vector<EdgeState> edges;
  double rho_c = 0.0;               // active penalty, 0 = take from settings

  bool matches(const Partition& p) const;
};

struct DistributedSolution {
  QpSolution qp;          // assembled solution; iterations = consensus rounds
  int rounds = 0;
  double primal_residual = 0.0;  // max |x_i - t| over edges at termination
  double dual_residual = 0.0;    // rho_c * max |t - t_prev| at termination
  double rho_c = 0.0;
};

/// Consensus splitting over the partition: every round each node solves its
/// local problem against the current edge targets, exchanges shared values
/// and duals with neighbors, and the targets move to the midpoint. Residuals
/// are evaluated by the harness; nodes never see global state.
/// throws MaxRounds when the round budget runs out.
DistributedSolution solve_distributed(const Partition& p, NetworkSim& net,
                                      const ConsensusSettings& settings,
                                      ConsensusState* state = nullptr);

/// Decentralized estimate of the second-smallest Laplacian eigenvalue and
/// its eigenvector over the message topology.
struct SpectralEstimate {
  double lambda2 = 0.0;
  Vec v2;               // one component per node, root component nonnegative
  int iterations = 0;
  double residual = 0.0;   // inf-norm eigenpair residual at termination
  bool disconnected = false;  // topology did not reach every node; lambda2 = 0
};

/// Power iteration on the complement spectrum: nodes exchange vector
/// components with neighbors, deflate against the all-ones direction and
/// normalize via spanning-tree sums, and the root circulates termination
/// and sign decisions. positions feed the same edge weights the topology
/// was thresholded from.
/// throws NotConverged when the residual misses tol within iters.
SpectralEstimate distributed_fiedler(const Vec& positions, const WeightKernel& kernel,
                                     NetworkSim& net, int iters, unsigned seed,
                                     double tol = 1e-6);

}  // namespace conmpc
