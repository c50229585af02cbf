#pragma once

// Static grid description and exogenous per-slot profiles, loaded from a
// JSON case document. Everything downstream works in per-unit; generator
// cost polynomials are applied to MW at the boundary.

#include <json.hpp>

#include <complex>
#include <fstream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace evgrid::grid {

using Complex = std::complex<double>;

struct CaseError : std::runtime_error {
  explicit CaseError(const std::string& what) : std::runtime_error(what) {}
};

struct GeneratorSpec {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;  // per-unit
  double q_min = 0.0, q_max = 0.0;
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;  // cost f(P) with P in MW
  bool is_station = false;

  double cost_mw(double p_mw) const { return c2 * p_mw * p_mw + c1 * p_mw + c0; }
};

struct Line {
  int from = 0, to = 0;
  Complex impedance;     // per-unit series impedance
  double theta_max = 0;  // radians
};

struct GridCase {
  int bus_count = 0;
  double base_mva = 100.0;
  std::vector<double> v_min, v_max;  // per bus, per-unit
  std::vector<Line> lines;
  std::vector<GeneratorSpec> generators;

  bool is_generator_bus(int bus) const {
    for (const auto& g : generators)
      if (g.bus == bus) return true;
    return false;
  }
  const GeneratorSpec* generator_at(int bus) const {
    for (const auto& g : generators)
      if (g.bus == bus) return &g;
    return nullptr;
  }
  std::vector<int> station_buses() const {
    std::vector<int> out;
    for (const auto& g : generators)
      if (g.is_station) out.push_back(g.bus);
    return out;
  }
};

struct ScenarioProfiles {
  int slot_count = 0;
  double slot_hours = 0.5;
  std::vector<double> load_shape;              // l(t), dimensionless
  std::vector<double> prices;                  // beta_t, currency per kWh
  std::vector<std::pair<double, double>> base_loads;  // per bus (P, Q), per-unit
};

inline Complex line_admittance(Complex impedance) {
  if (impedance == Complex(0.0, 0.0)) throw CaseError("line impedance must be nonzero");
  return 1.0 / impedance;
}

inline double to_per_unit(double value_kw, double base_mva) {
  if (base_mva <= 0.0) throw CaseError("base power must be positive");
  return value_kw / (base_mva * 1000.0);
}

// P_l(t) = l(t) * Pbar * T / sum(l); reactive load scaled by the same factor.
inline std::pair<double, double> scaled_load(int bus, int slot, const ScenarioProfiles& p) {
  if (bus < 0 || bus >= static_cast<int>(p.base_loads.size()))
    throw CaseError("scaled_load: bus index out of range");
  if (slot < 0 || slot >= p.slot_count) throw CaseError("scaled_load: slot index out of range");
  double sum = 0.0;
  for (double l : p.load_shape) sum += l;
  const double factor = p.load_shape[slot] * p.slot_count / sum;
  return {factor * p.base_loads[bus].first, factor * p.base_loads[bus].second};
}

namespace detail {

inline void require(bool cond, const std::string& path, const std::string& msg) {
  if (!cond) throw CaseError(path + ": " + msg);
}

inline void check_connected(const GridCase& gc) {
  if (gc.bus_count == 1) return;
  std::vector<std::vector<int>> adj(gc.bus_count);
  for (const auto& ln : gc.lines) {
    adj[ln.from].push_back(ln.to);
    adj[ln.to].push_back(ln.from);
  }
  std::vector<bool> seen(gc.bus_count, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
  }
  require(count == gc.bus_count, "lines", "grid graph is not connected");
}

}  // namespace detail

inline void validate(const GridCase& gc, const ScenarioProfiles& pr) {
  using detail::require;
  require(gc.bus_count >= 1, "buses", "at least one bus required");
  require(gc.base_mva > 0.0, "base_mva", "must be positive");
  require(static_cast<int>(gc.v_min.size()) == gc.bus_count, "buses", "voltage limit count");
  for (int k = 0; k < gc.bus_count; ++k) {
    require(gc.v_min[k] > 0.0 && gc.v_min[k] <= gc.v_max[k], "buses[" + std::to_string(k) + "]",
            "requires 0 < v_min <= v_max");
  }
  for (size_t i = 0; i < gc.lines.size(); ++i) {
    const auto& ln = gc.lines[i];
    const std::string path = "lines[" + std::to_string(i) + "]";
    require(ln.from >= 0 && ln.from < gc.bus_count && ln.to >= 0 && ln.to < gc.bus_count, path,
            "endpoint references a nonexistent bus");
    require(ln.from != ln.to, path, "endpoints must be distinct");
    require(ln.impedance != Complex(0.0, 0.0), path, "impedance must be nonzero");
    require(ln.impedance.real() >= 0.0, path, "series resistance must be nonnegative");
    require(ln.theta_max > 0.0 && ln.theta_max < M_PI / 2, path,
            "requires 0 < theta_max < pi/2");
  }
  detail::check_connected(gc);
  for (size_t i = 0; i < gc.generators.size(); ++i) {
    const auto& g = gc.generators[i];
    const std::string path = "generators[" + std::to_string(i) + "]";
    require(g.bus >= 0 && g.bus < gc.bus_count, path, "bus index out of range");
    require(g.p_min <= g.p_max, path, "requires p_min <= p_max");
    require(g.q_min <= g.q_max, path, "requires q_min <= q_max");
    require(g.c2 >= 0.0, path, "quadratic cost coefficient must be nonnegative");
    for (size_t j = i + 1; j < gc.generators.size(); ++j)
      require(gc.generators[j].bus != g.bus, path, "duplicate generator bus");
  }
  require(pr.slot_count >= 1, "profiles.load_shape", "at least one slot required");
  require(static_cast<int>(pr.load_shape.size()) == pr.slot_count, "profiles.load_shape",
          "length mismatch");
  require(static_cast<int>(pr.prices.size()) == pr.slot_count, "profiles.prices",
          "length mismatch");
  require(pr.slot_hours > 0.0, "profiles.slot_hours", "must be positive");
  for (int t = 0; t < pr.slot_count; ++t) {
    require(pr.load_shape[t] > 0.0, "profiles.load_shape[" + std::to_string(t) + "]",
            "must be positive");
    require(pr.prices[t] >= 0.0, "profiles.prices[" + std::to_string(t) + "]",
            "must be nonnegative");
  }
  require(static_cast<int>(pr.base_loads.size()) == gc.bus_count, "profiles.base_loads",
          "one entry per bus required");
}

inline nlohmann::json to_json(const GridCase& gc, const ScenarioProfiles& pr) {
  nlohmann::json j;
  j["base_mva"] = gc.base_mva;
  for (int k = 0; k < gc.bus_count; ++k)
    j["buses"].push_back({{"id", k}, {"v_min", gc.v_min[k]}, {"v_max", gc.v_max[k]}});
  j["lines"] = nlohmann::json::array();
  for (const auto& ln : gc.lines)
    j["lines"].push_back({{"from", ln.from},
                          {"to", ln.to},
                          {"r", ln.impedance.real()},
                          {"x", ln.impedance.imag()},
                          {"theta_max", ln.theta_max}});
  j["generators"] = nlohmann::json::array();
  for (const auto& g : gc.generators)
    j["generators"].push_back({{"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"q_min", g.q_min},
                               {"q_max", g.q_max},
                               {"cost", {g.c2, g.c1, g.c0}},
                               {"is_station", g.is_station}});
  j["profiles"]["slot_hours"] = pr.slot_hours;
  j["profiles"]["load_shape"] = pr.load_shape;
  j["profiles"]["prices"] = pr.prices;
  j["profiles"]["base_loads"] = nlohmann::json::array();
  for (int k = 0; k < gc.bus_count; ++k)
    j["profiles"]["base_loads"].push_back(
        {{"bus", k}, {"p", pr.base_loads[k].first}, {"q", pr.base_loads[k].second}});
  return j;
}

inline std::pair<GridCase, ScenarioProfiles> from_json(const nlohmann::json& j) {
  GridCase gc;
  ScenarioProfiles pr;
  try {
    gc.base_mva = j.at("base_mva").get<double>();
    const auto& buses = j.at("buses");
    gc.bus_count = static_cast<int>(buses.size());
    gc.v_min.assign(gc.bus_count, 0.0);
    gc.v_max.assign(gc.bus_count, 0.0);
    for (const auto& bj : buses) {
      const int id = bj.at("id").get<int>();
      if (id < 0 || id >= gc.bus_count) throw CaseError("buses: ids must be 0..N-1");
      gc.v_min[id] = bj.at("v_min").get<double>();
      gc.v_max[id] = bj.at("v_max").get<double>();
    }
    for (const auto& lj : j.at("lines")) {
      Line ln;
      ln.from = lj.at("from").get<int>();
      ln.to = lj.at("to").get<int>();
      ln.impedance = Complex(lj.at("r").get<double>(), lj.at("x").get<double>());
      ln.theta_max = lj.at("theta_max").get<double>();
      gc.lines.push_back(ln);
    }
    for (const auto& gj : j.at("generators")) {
      GeneratorSpec g;
      g.bus = gj.at("bus").get<int>();
      g.p_min = gj.at("p_min").get<double>();
      g.p_max = gj.at("p_max").get<double>();
      g.q_min = gj.at("q_min").get<double>();
      g.q_max = gj.at("q_max").get<double>();
      const auto& cost = gj.at("cost");
      if (cost.size() != 3) throw CaseError("generators.cost: expected [c2,c1,c0]");
      g.c2 = cost[0].get<double>();
      g.c1 = cost[1].get<double>();
      g.c0 = cost[2].get<double>();
      g.is_station = gj.value("is_station", false);
      gc.generators.push_back(g);
    }
    const auto& pj = j.at("profiles");
    pr.slot_hours = pj.at("slot_hours").get<double>();
    pr.load_shape = pj.at("load_shape").get<std::vector<double>>();
    pr.prices = pj.at("prices").get<std::vector<double>>();
    pr.slot_count = static_cast<int>(pr.load_shape.size());
    pr.base_loads.assign(gc.bus_count, {0.0, 0.0});
    for (const auto& bj : pj.at("base_loads")) {
      const int bus = bj.at("bus").get<int>();
      if (bus < 0 || bus >= gc.bus_count) throw CaseError("profiles.base_loads: bus out of range");
      pr.base_loads[bus] = {bj.at("p").get<double>(), bj.at("q").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw CaseError(std::string("case schema: ") + e.what());
  }
  validate(gc, pr);
  return {gc, pr};
}

inline std::pair<GridCase, ScenarioProfiles> load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CaseError(std::string("case file is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline void save_case(const std::string& path, const GridCase& gc, const ScenarioProfiles& pr) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file: " + path);
  out << to_json(gc, pr).dump(2) << "\n";
}

// Complex net injection V_k (sum_m y_km (V_k - V_m))^* at every bus; the
// direct power-flow arithmetic used to cross-check the SDP balance rows.
inline std::vector<Complex> bus_injections(const GridCase& gc,
                                           const std::vector<Complex>& v) {
  std::vector<Complex> inj(gc.bus_count, Complex(0, 0));
  for (const auto& ln : gc.lines) {
    const Complex y = line_admittance(ln.impedance);
    inj[ln.from] += v[ln.from] * std::conj(y * (v[ln.from] - v[ln.to]));
    inj[ln.to] += v[ln.to] * std::conj(y * (v[ln.to] - v[ln.from]));
  }
  return inj;
}

}  // namespace evgrid::grid
