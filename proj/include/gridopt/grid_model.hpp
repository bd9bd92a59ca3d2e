#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridopt/csv.hpp"
#include "gridopt/errors.hpp"

namespace gridopt {

enum class Phase : int { A = 0, B = 1, C = 2 };
inline constexpr std::array<Phase, 3> kAllPhases = {Phase::A, Phase::B, Phase::C};
inline char phase_letter(Phase ph) { return "abc"[static_cast<int>(ph)]; }

/// A bus with per-phase loads and squared-voltage-magnitude bounds (pu^2).
struct Bus {
  long id = 0;
  std::array<bool, 3> phases = {false, false, false};
  std::array<double, 3> load_p = {0, 0, 0};  // kW per phase
  std::array<double, 3> load_q = {0, 0, 0};  // kvar per phase
  double v_min = 0.0;                        // pu^2
  double v_max = 0.0;                        // pu^2
  bool is_slack = false;

  bool has_phase(Phase ph) const { return phases[static_cast<int>(ph)]; }
  int phase_count() const {
    return (phases[0] ? 1 : 0) + (phases[1] ? 1 : 0) + (phases[2] ? 1 : 0);
  }
};

/// A branch with per-phase self impedances (pu) and a squared-current limit
/// (pu^2). Mutual terms are out of scope.
struct Branch {
  long from_bus = 0;
  long to_bus = 0;
  std::array<double, 3> r = {0, 0, 0};
  std::array<double, 3> x = {0, 0, 0};
  double i_max = 0.0;  // pu^2
  bool switchable = false;
  bool initially_closed = true;
};

/// Open/closed states for exactly the switchable branches, keyed by branch
/// index in Network::branches.
struct SwitchConfig {
  std::map<int, bool> states;  // true = closed

  bool closed(int branch_index) const {
    auto it = states.find(branch_index);
    if (it == states.end()) throw ConfigError("switch state missing for branch index " +
                                              std::to_string(branch_index));
    return it->second;
  }
};

class Network {
 public:
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  double base_kv = 4.16;
  double base_kva = 1000.0;

  int bus_index(long id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw TopologyError("unknown bus id " + std::to_string(id));
    return it->second;
  }

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_slacks() const {
    int d = 0;
    for (const auto& b : buses) d += b.is_slack ? 1 : 0;
    return d;
  }

  std::vector<int> switchable_branches() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < branches.size(); ++i)
      if (branches[i].switchable) out.push_back(static_cast<int>(i));
    return out;
  }

  /// Configuration with every switch at its initial state.
  SwitchConfig initial_config() const {
    SwitchConfig cfg;
    for (int i : switchable_branches()) cfg.states[i] = branches[i].initially_closed;
    return cfg;
  }

  /// True iff the branch carries power under cfg.
  bool branch_active(int branch_index, const SwitchConfig& cfg) const {
    const Branch& br = branches[branch_index];
    return br.switchable ? cfg.closed(branch_index) : true;
  }

  void finalize() {
    index_.clear();
    for (std::size_t i = 0; i < buses.size(); ++i) {
      auto [it, inserted] = index_.emplace(buses[i].id, static_cast<int>(i));
      if (!inserted)
        throw ValidationError("duplicate bus id " + std::to_string(buses[i].id));
    }
    validate();
  }

 private:
  void validate() const {
    if (num_slacks() < 1) throw ValidationError("network needs at least one slack bus");
    for (const auto& b : buses) {
      if (!(b.v_min > 0.0))
        throw ValidationError("bus " + std::to_string(b.id) + ": vmin2 must be > 0");
      if (!(b.v_min <= b.v_max))
        throw ValidationError("bus " + std::to_string(b.id) + ": vmin2 > vmax2");
      if (b.phase_count() == 0)
        throw ValidationError("bus " + std::to_string(b.id) + ": no phases declared");
      for (Phase ph : kAllPhases) {
        int p = static_cast<int>(ph);
        if (!b.phases[p] && (b.load_p[p] != 0.0 || b.load_q[p] != 0.0))
          throw ValidationError("bus " + std::to_string(b.id) + ": load on undeclared phase " +
                                phase_letter(ph));
      }
    }
    for (std::size_t i = 0; i < branches.size(); ++i) {
      const Branch& br = branches[i];
      if (br.from_bus == br.to_bus)
        throw ValidationError("branch " + std::to_string(i) + ": from == to");
      if (index_.find(br.from_bus) == index_.end())
        throw TopologyError("branch " + std::to_string(i) + " references absent bus " +
                            std::to_string(br.from_bus));
      if (index_.find(br.to_bus) == index_.end())
        throw TopologyError("branch " + std::to_string(i) + " references absent bus " +
                            std::to_string(br.to_bus));
      for (int p = 0; p < 3; ++p)
        if (br.r[p] < 0.0)
          throw ValidationError("branch " + std::to_string(i) + ": negative resistance");
      if (!(br.i_max > 0.0))
        throw ValidationError("branch " + std::to_string(i) + ": imax2 must be > 0");
    }
    // Every bus must be energized under the initial switch states.
    if (!all_reachable(initial_config()))
      throw TopologyError("network has buses not energized from any slack "
                          "under initial switch states");
  }

  bool all_reachable(const SwitchConfig& cfg) const {
    std::vector<std::vector<int>> adj(buses.size());
    for (std::size_t i = 0; i < branches.size(); ++i) {
      if (!branch_active(static_cast<int>(i), cfg)) continue;
      int a = index_.at(branches[i].from_bus);
      int b = index_.at(branches[i].to_bus);
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(buses.size(), 0);
    std::vector<int> stack;
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].is_slack) {
        seen[i] = 1;
        stack.push_back(static_cast<int>(i));
      }
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  }

  std::unordered_map<long, int> index_;
};

namespace detail {

inline std::array<bool, 3> parse_phases(const std::string& s, const std::string& path,
                                        int line) {
  std::array<bool, 3> out = {false, false, false};
  for (char c : s) {
    switch (c) {
      case 'a': out[0] = true; break;
      case 'b': out[1] = true; break;
      case 'c': out[2] = true; break;
      default:
        throw ParseError(path + ":" + std::to_string(line) + ": bad phase string '" + s + "'");
    }
  }
  return out;
}

inline void require_header(const CsvFile& file, const std::vector<std::string>& expected,
                           const std::string& path) {
  if (file.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) want += ',';
      want += expected[i];
    }
    throw ParseError(path + ": unexpected header (want '" + want + "')");
  }
}

/// Scans comment lines for `# key: value` directives (system bases).
inline void apply_directives(const CsvFile& file, Network& net) {
  for (const auto& c : file.comments) {
    auto read = [&](const std::string& key, double& target) {
      auto pos = c.find(key);  // key includes the colon, so base_kv != base_kva
      if (pos == std::string::npos) return;
      try {
        target = std::stod(c.substr(pos + key.size()));
      } catch (...) {
      }
    };
    read("base_kv:", net.base_kv);
    read("base_kva:", net.base_kva);
  }
}

}  // namespace detail

/// Reads buses.csv + branches.csv into a validated Network.
///
/// buses.csv:    id,phases,p_a,q_a,p_b,q_b,p_c,q_c,vmin2,vmax2,slack
/// branches.csv: from,to,r_a,x_a,r_b,x_b,r_c,x_c,imax2,switchable,closed
///
/// Comment lines may carry `# base_kv: <v>` / `# base_kva: <v>` directives.
inline Network parse_feeder(const std::string& bus_file, const std::string& branch_file) {
  Network net;
  CsvFile buses = read_csv(bus_file);
  detail::require_header(buses,
                         {"id", "phases", "p_a", "q_a", "p_b", "q_b", "p_c", "q_c", "vmin2",
                          "vmax2", "slack"},
                         bus_file);
  detail::apply_directives(buses, net);
  for (const auto& row : buses.rows) {
    if (row.fields.size() != 11)
      throw ParseError(bus_file + ":" + std::to_string(row.line) + ": expected 11 fields, got " +
                       std::to_string(row.fields.size()));
    Bus b;
    b.id = parse_long(row.fields[0], bus_file, row.line);
    b.phases = detail::parse_phases(row.fields[1], bus_file, row.line);
    for (int p = 0; p < 3; ++p) {
      b.load_p[p] = parse_double(row.fields[2 + 2 * p], bus_file, row.line);
      b.load_q[p] = parse_double(row.fields[3 + 2 * p], bus_file, row.line);
    }
    b.v_min = parse_double(row.fields[8], bus_file, row.line);
    b.v_max = parse_double(row.fields[9], bus_file, row.line);
    b.is_slack = parse_long(row.fields[10], bus_file, row.line) != 0;
    net.buses.push_back(b);
  }

  CsvFile branches = read_csv(branch_file);
  detail::require_header(branches,
                         {"from", "to", "r_a", "x_a", "r_b", "x_b", "r_c", "x_c", "imax2",
                          "switchable", "closed"},
                         branch_file);
  detail::apply_directives(branches, net);
  for (const auto& row : branches.rows) {
    if (row.fields.size() != 11)
      throw ParseError(branch_file + ":" + std::to_string(row.line) +
                       ": expected 11 fields, got " + std::to_string(row.fields.size()));
    Branch br;
    br.from_bus = parse_long(row.fields[0], branch_file, row.line);
    br.to_bus = parse_long(row.fields[1], branch_file, row.line);
    for (int p = 0; p < 3; ++p) {
      br.r[p] = parse_double(row.fields[2 + 2 * p], branch_file, row.line);
      br.x[p] = parse_double(row.fields[3 + 2 * p], branch_file, row.line);
    }
    br.i_max = parse_double(row.fields[8], branch_file, row.line);
    br.switchable = parse_long(row.fields[9], branch_file, row.line) != 0;
    br.initially_closed = parse_long(row.fields[10], branch_file, row.line) != 0;
    net.branches.push_back(br);
  }

  net.finalize();
  return net;
}

/// 0/1 adjacency under cfg: A[i][j] = 1 iff an active branch joins buses i, j
/// (indices into Network::buses). Symmetric, zero diagonal.
inline std::vector<std::vector<int>> adjacency_matrix(const Network& net,
                                                      const SwitchConfig& cfg) {
  for (int i : net.switchable_branches())
    if (cfg.states.find(i) == cfg.states.end())
      throw ConfigError("config missing switchable branch index " + std::to_string(i));
  int n = net.num_buses();
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < net.branches.size(); ++i) {
    if (!net.branch_active(static_cast<int>(i), cfg)) continue;
    int u = net.bus_index(net.branches[i].from_bus);
    int v = net.bus_index(net.branches[i].to_bus);
    a[u][v] = 1;
    a[v][u] = 1;
  }
  return a;
}

/// Radiality test: the active branches must form a spanning forest with one
/// tree per slack bus -- active edge count equals N - d and every bus reaches
/// a slack.
inline bool is_radial(const Network& net, const SwitchConfig& cfg) {
  int n = net.num_buses();
  int d = net.num_slacks();
  int active = 0;
  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < net.branches.size(); ++i) {
    if (!net.branch_active(static_cast<int>(i), cfg)) continue;
    ++active;
    int u = net.bus_index(net.branches[i].from_bus);
    int v = net.bus_index(net.branches[i].to_bus);
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  if (active != n - d) return false;
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
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

/// Enumerates every radial switch configuration in lexicographic order over
/// ascending switchable branch indices with open < closed.
inline std::vector<SwitchConfig> enumerate_radial_configs(const Network& net) {
  std::vector<int> sw = net.switchable_branches();
  if (sw.size() > 30)
    throw CapacityError("too many switchable branches (" + std::to_string(sw.size()) +
                        " > 30)");
  std::vector<SwitchConfig> out;
  const std::uint64_t total = 1ULL << sw.size();
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    SwitchConfig cfg;
    for (std::size_t j = 0; j < sw.size(); ++j) {
      // First switch is the most significant digit; open (0) sorts first.
      bool closed = (mask >> (sw.size() - 1 - j)) & 1ULL;
      cfg.states[sw[j]] = closed;
    }
    if (is_radial(net, cfg)) out.push_back(std::move(cfg));
  }
  return out;
}

/// Stable text encoding of a configuration, e.g. "0:open;5:closed".
inline std::string encode_config(const SwitchConfig& cfg) {
  std::string s;
  for (const auto& [idx, closed] : cfg.states) {
    if (!s.empty()) s += ';';
    s += std::to_string(idx);
    s += closed ? ":closed" : ":open";
  }
  return s;
}

}  // namespace gridopt
