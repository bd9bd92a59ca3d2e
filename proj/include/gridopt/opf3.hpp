#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "gridopt/bfm_balanced.hpp"  // TreeOrientation, LoadProfile helpers

namespace gridopt {

/// Per-phase values for one bus; entries for undeclared phases stay zero.
struct PhaseLoad {
  std::array<double, 3> p_kw = {0, 0, 0};
  std::array<double, 3> q_kvar = {0, 0, 0};
};

using PhaseLoadProfile = std::vector<PhaseLoad>;  // indexed like Network::buses

inline PhaseLoadProfile phase_loads_from_network(const Network& net) {
  PhaseLoadProfile loads(net.buses.size());
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    loads[i].p_kw = net.buses[i].load_p;
    loads[i].q_kvar = net.buses[i].load_q;
  }
  return loads;
}

struct Opf3Options {
  double interval_minutes = 5.0;  // dispatch interval for energy integration
  double price_rt = 0.0;          // $/kWh applied to interval losses
};

/// Three-phase program layout. Phases are decoupled (self impedances only);
/// each active (branch, phase) contributes P/Q/l variables, a voltage-drop
/// row, and one 2x2 Hermitian PSD block [[v_parent, S], [S*, l]].
struct ThreePhaseBfm {
  ConicProgram program;
  TreeOrientation tree;
  Network const* net = nullptr;

  struct EdgePhase {
    int edge = -1;   // index into tree.edges
    int phase = 0;
    int var_p = -1;
    int var_q = -1;
    int var_l = -1;
    std::array<int, 4> psd_vars = {-1, -1, -1, -1};  // packed (v, l, re, im)
  };
  std::vector<EdgePhase> edge_phases;
  std::vector<std::array<int, 3>> var_v;       // bus x phase -> v var (-1 absent)
  std::vector<std::array<int, 3>> var_ctrl;    // bus x phase -> control injection
  std::vector<std::array<int, 3>> var_slack_p; // slack injections
  std::vector<std::array<int, 3>> var_slack_q;
  double base_kva = 0.0;
  Opf3Options options;
};

/// Builds the SDP-relaxed unbalanced branch-flow program. `headroom_kw` gives
/// the per-bus real-power control budget (renewable reserve), split evenly
/// over the bus's declared phases; reactive control is out of scope.
inline ThreePhaseBfm build_unbalanced_bfm(const Network& net, const PhaseLoadProfile& loads,
                                          const std::vector<double>& headroom_kw,
                                          const Opf3Options& options = {}) {
  if (loads.size() != net.buses.size())
    throw InputError("phase load profile size does not match bus count");
  if (headroom_kw.size() != net.buses.size())
    throw InputError("headroom vector size does not match bus count");
  for (double h : headroom_kw)
    if (h < 0.0) throw InputError("headroom must be >= 0");

  ThreePhaseBfm bfm;
  bfm.tree = TreeOrientation::build(net, net.initial_config());
  bfm.net = &net;
  bfm.base_kva = net.base_kva;
  bfm.options = options;
  ConicProgram& prog = bfm.program;
  const int n = net.num_buses();

  bfm.var_v.assign(n, {-1, -1, -1});
  bfm.var_ctrl.assign(n, {-1, -1, -1});
  bfm.var_slack_p.assign(n, {-1, -1, -1});
  bfm.var_slack_q.assign(n, {-1, -1, -1});
  for (int i = 0; i < n; ++i) {
    const Bus& bus = net.buses[i];
    for (int ph = 0; ph < 3; ++ph) {
      if (!bus.phases[ph]) continue;
      std::string tag = std::to_string(bus.id) + phase_letter(static_cast<Phase>(ph));
      bfm.var_v[i][ph] = prog.add_variable("v" + tag);
      prog.set_bounds(bfm.var_v[i][ph], bus.v_min, bus.v_max);
      if (bus.is_slack) {
        bfm.var_slack_p[i][ph] = prog.add_variable("pg" + tag);
        bfm.var_slack_q[i][ph] = prog.add_variable("qg" + tag);
      }
      if (headroom_kw[i] > 0.0) {
        bfm.var_ctrl[i][ph] = prog.add_variable("ctrl" + tag);
        double h_pu = headroom_kw[i] / bus.phase_count() / net.base_kva;
        prog.set_bounds(bfm.var_ctrl[i][ph], 0.0, h_pu);
      }
    }
  }

  // Branch variables per active phase (phase on both endpoints with nonzero
  // impedance).
  for (std::size_t e = 0; e < bfm.tree.edges.size(); ++e) {
    const auto& edge = bfm.tree.edges[e];
    const Branch& br = net.branches[edge.branch];
    for (int ph = 0; ph < 3; ++ph) {
      if (!net.buses[edge.parent].phases[ph] || !net.buses[edge.child].phases[ph]) continue;
      double r = br.r[ph], x = br.x[ph];
      if (r * r + x * x <= 0.0)
        throw ValidationError("branch " + std::to_string(edge.branch) + " phase " +
                              phase_letter(static_cast<Phase>(ph)) +
                              " has zero impedance but both endpoints declare the phase");
      ThreePhaseBfm::EdgePhase ep;
      ep.edge = static_cast<int>(e);
      ep.phase = ph;
      std::string tag = std::to_string(net.buses[edge.parent].id) + "_" +
                        std::to_string(net.buses[edge.child].id) +
                        phase_letter(static_cast<Phase>(ph));
      ep.var_p = prog.add_variable("P" + tag);
      ep.var_q = prog.add_variable("Q" + tag);
      ep.var_l = prog.add_variable("l" + tag);
      prog.set_bounds(ep.var_l, 0.0, br.i_max);
      bfm.edge_phases.push_back(ep);
    }
  }

  // Balance rows per (bus, phase).
  for (int i = 0; i < n; ++i) {
    for (int ph = 0; ph < 3; ++ph) {
      if (!net.buses[i].phases[ph]) continue;
      std::vector<std::pair<int, double>> prow, qrow;
      for (const auto& ep : bfm.edge_phases) {
        if (ep.phase != ph) continue;
        const auto& edge = bfm.tree.edges[ep.edge];
        const Branch& br = net.branches[edge.branch];
        if (edge.child == i) {
          prow.push_back({ep.var_p, 1.0});
          prow.push_back({ep.var_l, -br.r[ph]});
          qrow.push_back({ep.var_q, 1.0});
          qrow.push_back({ep.var_l, -br.x[ph]});
        }
        if (edge.parent == i) {
          prow.push_back({ep.var_p, -1.0});
          qrow.push_back({ep.var_q, -1.0});
        }
      }
      if (bfm.var_slack_p[i][ph] >= 0) {
        prow.push_back({bfm.var_slack_p[i][ph], 1.0});
        qrow.push_back({bfm.var_slack_q[i][ph], 1.0});
      }
      if (bfm.var_ctrl[i][ph] >= 0) prow.push_back({bfm.var_ctrl[i][ph], 1.0});
      prog.add_equality(std::move(prow), loads[i].p_kw[ph] / net.base_kva);
      prog.add_equality(std::move(qrow), loads[i].q_kvar[ph] / net.base_kva);
    }
  }

  // Voltage drop and PSD block per (branch, phase).
  const double sqrt2 = 1.41421356237309504880;
  for (auto& ep : bfm.edge_phases) {
    const auto& edge = bfm.tree.edges[ep.edge];
    const Branch& br = net.branches[edge.branch];
    double r = br.r[ep.phase], x = br.x[ep.phase];
    int vp = bfm.var_v[edge.parent][ep.phase];
    int vc = bfm.var_v[edge.child][ep.phase];
    prog.add_equality({{vc, 1.0},
                       {vp, -1.0},
                       {ep.var_p, 2.0 * r},
                       {ep.var_q, 2.0 * x},
                       {ep.var_l, -(r * r + x * x)}},
                      0.0);

    std::string tag = prog.var_name(ep.var_p);
    int bd_v = prog.add_variable("psd_v_" + tag);
    int bd_l = prog.add_variable("psd_l_" + tag);
    int bd_re = prog.add_variable("psd_re_" + tag);
    int bd_im = prog.add_variable("psd_im_" + tag);
    prog.add_equality({{bd_v, 1.0}, {vp, -1.0}}, 0.0);
    prog.add_equality({{bd_l, 1.0}, {ep.var_l, -1.0}}, 0.0);
    prog.add_equality({{bd_re, 1.0}, {ep.var_p, -sqrt2}}, 0.0);
    prog.add_equality({{bd_im, 1.0}, {ep.var_q, -sqrt2}}, 0.0);
    prog.add_psd(2, {bd_v, bd_l, bd_re, bd_im});
    ep.psd_vars = {bd_v, bd_l, bd_re, bd_im};

    prog.add_objective_term(ep.var_l, r);
  }
  return bfm;
}

struct Opf3Flow {
  int branch = -1;
  int parent_bus = -1;
  int child_bus = -1;
  int phase = 0;
  double p = 0.0;
  double q = 0.0;
  double l = 0.0;
  double rank1_gap = 0.0;
};

struct OPF3Result {
  std::vector<Opf3Flow> flows;
  std::vector<std::array<double, 3>> voltages;   // pu^2, 0 where phase absent
  std::vector<std::array<double, 3>> control_kw; // realized control injections
  double line_loss_kwh = 0.0;
  double fee_cost = 0.0;       // price_rt * interval losses
  double max_rank1_gap = 0.0;
  bool exact = false;          // every block gap <= 1e-3
  bool converged = false;
  int iterations = 0;
  double interval_minutes = 0.0;

  double loss_kw() const { return line_loss_kwh * 60.0 / interval_minutes; }
};

inline OPF3Result solve_unbalanced_opf(const ThreePhaseBfm& bfm, const ADMMParams& params,
                                       const IterationTrace& trace = {}) {
  Solution sol = admm_solve(bfm.program, params, nullptr, trace);
  OPF3Result res;
  res.converged = sol.converged;
  res.iterations = sol.iterations;
  res.interval_minutes = bfm.options.interval_minutes;
  const auto& v = sol.values;
  const Network& net = *bfm.net;

  res.voltages.assign(net.buses.size(), {0, 0, 0});
  res.control_kw.assign(net.buses.size(), {0, 0, 0});
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    for (int ph = 0; ph < 3; ++ph) {
      if (bfm.var_v[i][ph] >= 0) res.voltages[i][ph] = v(bfm.var_v[i][ph]);
      if (bfm.var_ctrl[i][ph] >= 0)
        res.control_kw[i][ph] = v(bfm.var_ctrl[i][ph]) * bfm.base_kva;
    }

  double loss_pu = 0.0;
  for (const auto& ep : bfm.edge_phases) {
    const auto& edge = bfm.tree.edges[ep.edge];
    Opf3Flow f;
    f.branch = edge.branch;
    f.parent_bus = edge.parent;
    f.child_bus = edge.child;
    f.phase = ep.phase;
    f.p = v(ep.var_p);
    f.q = v(ep.var_q);
    f.l = v(ep.var_l);
    // Gap from the Hermitian block assembled at the reported solution.
    Eigen::MatrixXcd block(2, 2);
    block(0, 0) = v(bfm.var_v[edge.parent][ep.phase]);
    block(1, 1) = f.l;
    block(0, 1) = std::complex<double>(f.p, f.q);
    block(1, 0) = std::conj(block(0, 1));
    f.rank1_gap = rank1_gap(block);
    res.max_rank1_gap = std::max(res.max_rank1_gap, f.rank1_gap);
    loss_pu += net.branches[edge.branch].r[ep.phase] * f.l;
    res.flows.push_back(f);
  }
  res.line_loss_kwh = loss_pu * bfm.base_kva * bfm.options.interval_minutes / 60.0;
  res.fee_cost = bfm.options.price_rt * res.line_loss_kwh;
  res.exact = res.max_rank1_gap <= 1e-3;
  return res;
}

/// Interval energy loss of a converged result.
inline double line_loss(const OPF3Result& result) { return result.line_loss_kwh; }

struct ExactnessEntry {
  int branch = -1;
  int phase = 0;
  double gap = 0.0;
};

struct ExactnessReport {
  std::vector<ExactnessEntry> entries;
  double max_gap = 0.0;
  bool exact = false;
};

inline ExactnessReport exactness_report(const OPF3Result& result) {
  ExactnessReport rep;
  for (const auto& f : result.flows) {
    rep.entries.push_back({f.branch, f.phase, f.rank1_gap});
    rep.max_gap = std::max(rep.max_gap, f.rank1_gap);
  }
  rep.exact = rep.max_gap <= 1e-3;
  return rep;
}

}  // namespace gridopt
