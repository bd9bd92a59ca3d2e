#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gridopt/admm.hpp"
#include "gridopt/conic.hpp"
#include "gridopt/grid_model.hpp"

namespace gridopt {

/// Per-bus balanced load (kW, kvar).
struct BusLoad {
  double p_kw = 0.0;
  double q_kvar = 0.0;
};

using LoadProfile = std::vector<BusLoad>;  // indexed like Network::buses

/// Balanced workflows treat phase a as the single-phase equivalent.
inline LoadProfile balanced_loads_from_network(const Network& net) {
  LoadProfile loads(net.buses.size());
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    loads[i] = {net.buses[i].load_p[0], net.buses[i].load_q[0]};
  return loads;
}

/// Tree orientation of the active branches: every non-slack bus has exactly
/// one parent branch, directed away from the slack roots.
struct TreeOrientation {
  struct Edge {
    int branch = -1;   // index into Network::branches
    int parent = -1;   // bus indices
    int child = -1;
  };
  std::vector<Edge> edges;             // one per active branch
  std::vector<int> parent_edge;        // bus index -> edge index (-1 for slacks)

  static TreeOrientation build(const Network& net, const SwitchConfig& cfg) {
    if (!is_radial(net, cfg))
      throw TopologyError("configuration is not radial; cannot orient tree");
    int n = net.num_buses();
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, branch)
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
      if (!net.branch_active(static_cast<int>(b), cfg)) continue;
      int u = net.bus_index(net.branches[b].from_bus);
      int v = net.bus_index(net.branches[b].to_bus);
      adj[u].push_back({v, static_cast<int>(b)});
      adj[v].push_back({u, static_cast<int>(b)});
    }
    TreeOrientation tree;
    tree.parent_edge.assign(n, -1);
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (int i = 0; i < n; ++i)
      if (net.buses[i].is_slack) {
        seen[i] = 1;
        stack.push_back(i);
      }
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (auto [v, b] : adj[u]) {
        if (seen[v]) continue;
        seen[v] = 1;
        tree.parent_edge[v] = static_cast<int>(tree.edges.size());
        tree.edges.push_back({b, u, v});
        stack.push_back(v);
      }
    }
    return tree;
  }
};

/// Variable layout of a balanced branch-flow program, kept alongside the
/// ConicProgram so results can be read back by network element.
struct BalancedBfm {
  ConicProgram program;
  TreeOrientation tree;
  std::vector<int> var_p;        // per tree edge
  std::vector<int> var_q;
  std::vector<int> var_l;
  std::vector<int> var_v;        // per bus
  std::vector<int> var_slack_p;  // per bus, -1 if not slack
  std::vector<int> var_slack_q;
  double base_kva = 0.0;
};

/// Builds the SOCP-relaxed balanced branch-flow program:
///   - per-bus active/reactive balance through each parent branch,
///   - child voltage drop v_c = v_p - 2(rP + xQ) + (r^2 + x^2) l,
///   - per-branch cone |S|^2 <= v_p * l via an SOC block,
///   - voltage and squared-current boxes,
///   - objective sum_b r_b * l_b (resistive loss).
inline BalancedBfm build_balanced_bfm(const Network& net, const SwitchConfig& cfg,
                                      const LoadProfile& loads) {
  if (loads.size() != net.buses.size())
    throw InputError("load profile size does not match bus count");
  BalancedBfm bfm;
  bfm.tree = TreeOrientation::build(net, cfg);
  bfm.base_kva = net.base_kva;
  ConicProgram& prog = bfm.program;

  const int n = net.num_buses();
  const int ne = static_cast<int>(bfm.tree.edges.size());

  bfm.var_v.resize(n);
  for (int i = 0; i < n; ++i) {
    bfm.var_v[i] = prog.add_variable("v" + std::to_string(net.buses[i].id));
    prog.set_bounds(bfm.var_v[i], net.buses[i].v_min, net.buses[i].v_max);
  }
  bfm.var_p.resize(ne);
  bfm.var_q.resize(ne);
  bfm.var_l.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const auto& edge = bfm.tree.edges[e];
    std::string tag = std::to_string(net.buses[edge.parent].id) + "_" +
                      std::to_string(net.buses[edge.child].id);
    bfm.var_p[e] = prog.add_variable("P" + tag);
    bfm.var_q[e] = prog.add_variable("Q" + tag);
    bfm.var_l[e] = prog.add_variable("l" + tag);
    prog.set_bounds(bfm.var_l[e], 0.0, net.branches[edge.branch].i_max);
  }
  bfm.var_slack_p.assign(n, -1);
  bfm.var_slack_q.assign(n, -1);
  for (int i = 0; i < n; ++i)
    if (net.buses[i].is_slack) {
      bfm.var_slack_p[i] = prog.add_variable("pg" + std::to_string(net.buses[i].id));
      bfm.var_slack_q[i] = prog.add_variable("qg" + std::to_string(net.buses[i].id));
    }

  // Balance rows: inflow after losses + generation - load = outflow.
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> prow, qrow;
    if (int pe = bfm.tree.parent_edge[i]; pe >= 0) {
      const auto& edge = bfm.tree.edges[pe];
      const Branch& br = net.branches[edge.branch];
      prow.push_back({bfm.var_p[pe], 1.0});
      prow.push_back({bfm.var_l[pe], -br.r[0]});
      qrow.push_back({bfm.var_q[pe], 1.0});
      qrow.push_back({bfm.var_l[pe], -br.x[0]});
    }
    if (bfm.var_slack_p[i] >= 0) {
      prow.push_back({bfm.var_slack_p[i], 1.0});
      qrow.push_back({bfm.var_slack_q[i], 1.0});
    }
    for (int e = 0; e < ne; ++e)
      if (bfm.tree.edges[e].parent == i) {
        prow.push_back({bfm.var_p[e], -1.0});
        qrow.push_back({bfm.var_q[e], -1.0});
      }
    prog.add_equality(std::move(prow), loads[i].p_kw / net.base_kva);
    prog.add_equality(std::move(qrow), loads[i].q_kvar / net.base_kva);
  }

  // Voltage drop and cone per branch.
  for (int e = 0; e < ne; ++e) {
    const auto& edge = bfm.tree.edges[e];
    const Branch& br = net.branches[edge.branch];
    double r = br.r[0], x = br.x[0];
    if (r * r + x * x <= 0.0)
      throw ValidationError("branch " + std::to_string(edge.branch) +
                            " has zero phase-a impedance; balanced model unusable");
    prog.add_equality({{bfm.var_v[edge.child], 1.0},
                       {bfm.var_v[edge.parent], -1.0},
                       {bfm.var_p[e], 2.0 * r},
                       {bfm.var_q[e], 2.0 * x},
                       {bfm.var_l[e], -(r * r + x * x)}},
                      0.0);

    std::string tag = prog.var_name(bfm.var_p[e]);
    int t = prog.add_variable("soc_t_" + tag);
    int w1 = prog.add_variable("soc_p_" + tag);
    int w2 = prog.add_variable("soc_q_" + tag);
    int w3 = prog.add_variable("soc_d_" + tag);
    prog.add_equality({{t, 1.0}, {bfm.var_v[edge.parent], -1.0}, {bfm.var_l[e], -1.0}}, 0.0);
    prog.add_equality({{w1, 1.0}, {bfm.var_p[e], -2.0}}, 0.0);
    prog.add_equality({{w2, 1.0}, {bfm.var_q[e], -2.0}}, 0.0);
    prog.add_equality({{w3, 1.0}, {bfm.var_v[edge.parent], -1.0}, {bfm.var_l[e], 1.0}}, 0.0);
    prog.add_soc({t, w1, w2, w3});

    prog.add_objective_term(bfm.var_l[e], br.r[0]);
  }
  return bfm;
}

struct BranchFlow {
  int branch = -1;     // index into Network::branches
  int parent_bus = -1; // bus indices, oriented away from the slack
  int child_bus = -1;
  double p = 0.0;      // pu, sending end (parent side)
  double q = 0.0;
  double l = 0.0;      // pu^2
};

struct OPFResultBalanced {
  std::vector<BranchFlow> flows;
  std::vector<double> voltages;  // pu^2 per bus index
  double total_loss_kw = 0.0;
  double relaxation_tightness = 0.0;  // max relative gap of l*v_parent vs |S|^2
  bool converged = false;
  int iterations = 0;
  double slack_p_kw = 0.0;  // total slack injection

  bool relaxation_exact() const { return relaxation_tightness <= 1e-3; }
};

inline OPFResultBalanced solve_balanced_opf(const BalancedBfm& bfm, const ADMMParams& params,
                                            const IterationTrace& trace = {}) {
  Solution sol = admm_solve(bfm.program, params, nullptr, trace);
  OPFResultBalanced res;
  res.converged = sol.converged;
  res.iterations = sol.iterations;
  const auto& v = sol.values;

  res.voltages.resize(bfm.var_v.size());
  for (std::size_t i = 0; i < bfm.var_v.size(); ++i) res.voltages[i] = v(bfm.var_v[i]);

  double tightness = 0.0;
  for (std::size_t e = 0; e < bfm.tree.edges.size(); ++e) {
    const auto& edge = bfm.tree.edges[e];
    BranchFlow f;
    f.branch = edge.branch;
    f.parent_bus = edge.parent;
    f.child_bus = edge.child;
    f.p = v(bfm.var_p[e]);
    f.q = v(bfm.var_q[e]);
    f.l = v(bfm.var_l[e]);
    res.flows.push_back(f);
    double vl = f.l * v(bfm.var_v[edge.parent]);
    double s2 = f.p * f.p + f.q * f.q;
    // Branches carrying no meaningful flow (both products below 1e-4 in pu
    // units) sit at solver noise level and are excluded from the relative
    // tightness measure.
    if (vl >= 1e-4 || s2 >= 1e-4)
      tightness = std::max(tightness, std::abs(vl - s2) / std::max(vl, 1e-6));
  }
  // The objective is sum r*l, which is the loss in per-unit.
  res.total_loss_kw = sol.objective * bfm.base_kva;
  res.relaxation_tightness = tightness;
  for (std::size_t i = 0; i < bfm.var_slack_p.size(); ++i)
    if (bfm.var_slack_p[i] >= 0) res.slack_p_kw += v(bfm.var_slack_p[i]) * bfm.base_kva;
  return res;
}

}  // namespace gridopt
