#pragma once

// PEV population: generation from a config (seeded, reproducible), arrival
// sampling, and the per-slot bookkeeping the MPC driver advances.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace evgrid::fleet {

struct FleetError : std::runtime_error {
  explicit FleetError(const std::string& what) : std::runtime_error(what) {}
};

struct PevRecord {
  int id = 0;
  int station = 0;        // bus index
  int arrival_slot = 0;   // 0-based
  int departure_slot = 0; // inclusive
  double capacity_kwh = 100.0;
  double initial_soc = 0.2;
  double max_rate_kw = 20.0;
  double efficiency = 0.9;
};

// tau_bar = ceil(C(1-s0) / (u_h * E)) with E the deliverable energy per slot.
inline int required_slots(double capacity_kwh, double s0, double u_h, double energy_per_slot) {
  if (energy_per_slot <= 0.0) throw FleetError("energy per slot must be positive");
  const double demand = capacity_kwh * (1.0 - s0);
  if (demand <= 0.0) return 0;
  return static_cast<int>(std::ceil(demand / (u_h * energy_per_slot) - 1e-12));
}

inline int required_slots_for_demand(double demand_kwh, double u_h, double energy_per_slot) {
  if (energy_per_slot <= 0.0) throw FleetError("energy per slot must be positive");
  if (demand_kwh <= 0.0) return 0;
  return static_cast<int>(std::ceil(demand_kwh / (u_h * energy_per_slot) - 1e-12));
}

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse CDF of N(mean, sd) truncated to [lo, hi], by bisection. Slower
// than a rational approximation but bit-stable across platforms.
inline double truncated_normal_quantile(double u, double mean, double sd, double lo, double hi) {
  const double c_lo = normal_cdf((lo - mean) / sd);
  const double c_hi = normal_cdf((hi - mean) / sd);
  const double target = c_lo + u * (c_hi - c_lo);
  double a = lo, b = hi;
  for (int i = 0; i < 200 && b - a > 1e-13 * std::max(1.0, std::abs(b)); ++i) {
    const double m = 0.5 * (a + b);
    if (normal_cdf((m - mean) / sd) < target)
      a = m;
    else
      b = m;
  }
  return 0.5 * (a + b);
}

}  // namespace detail

struct ArrivalParams {
  double mean_hour = 8.0;
  double sd_hour = 1.5;
  double window_start = 6.0;
  double window_end = 12.0;
};

// Hours on the same axis as the window; deterministic for a fixed seed.
inline std::vector<double> sample_arrival_hours(int count, std::uint64_t seed,
                                                const ArrivalParams& ap) {
  if (count < 0) throw FleetError("arrival count must be nonnegative");
  if (!(ap.window_start < ap.window_end)) throw FleetError("empty arrival window");
  if (ap.sd_hour <= 0.0) throw FleetError("arrival sd must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> hours(count);
  for (int i = 0; i < count; ++i)
    hours[i] = detail::truncated_normal_quantile(unif(rng), ap.mean_hour, ap.sd_hour,
                                                 ap.window_start, ap.window_end);
  return hours;
}

inline int hour_to_slot(double hour, double slot_hours, int slot_count) {
  int s = static_cast<int>(std::floor(hour / slot_hours));
  return std::clamp(s, 0, slot_count - 1);
}

inline std::vector<int> sample_arrivals(int count, std::uint64_t seed, const ArrivalParams& ap,
                                        double slot_hours, int slot_count) {
  std::vector<int> slots;
  for (double h : sample_arrival_hours(count, seed, ap))
    slots.push_back(hour_to_slot(h, slot_hours, slot_count));
  return slots;
}

struct FleetConfig {
  int count = 0;
  ArrivalParams arrival;
  double capacity_kwh = 100.0;
  double initial_soc = 0.2;
  double max_rate_kw = 20.0;
  double efficiency = 0.9;
  int slack_min = 0, slack_max = 0;  // extra slots past the minimum stay
  std::uint64_t seed = 0;
};

inline std::vector<PevRecord> generate_fleet(const FleetConfig& cfg,
                                             const std::vector<int>& station_buses,
                                             double slot_hours, int slot_count) {
  if (cfg.count < 0) throw FleetError("fleet count must be nonnegative");
  if (station_buses.empty() && cfg.count > 0) throw FleetError("no charging stations available");
  if (!(cfg.initial_soc >= 0.0 && cfg.initial_soc < 1.0))
    throw FleetError("initial_soc must lie in [0,1)");
  if (!(cfg.efficiency > 0.0 && cfg.efficiency <= 1.0))
    throw FleetError("efficiency must lie in (0,1]");
  if (cfg.max_rate_kw <= 0.0) throw FleetError("max_rate_kw must be positive");
  if (cfg.slack_min < 0 || cfg.slack_min > cfg.slack_max)
    throw FleetError("departure_slack requires 0 <= min <= max");

  const auto hours = sample_arrival_hours(cfg.count, cfg.seed, cfg.arrival);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> station_pick(0, static_cast<int>(station_buses.size()) - 1);
  std::uniform_int_distribution<int> slack_pick(cfg.slack_min, cfg.slack_max);

  const double energy_per_slot = cfg.max_rate_kw * slot_hours;
  std::vector<PevRecord> out;
  for (int i = 0; i < cfg.count; ++i) {
    PevRecord p;
    p.id = i;
    p.station = station_buses[station_pick(rng)];
    p.arrival_slot = hour_to_slot(hours[i], slot_hours, slot_count);
    p.capacity_kwh = cfg.capacity_kwh;
    p.initial_soc = cfg.initial_soc;
    p.max_rate_kw = cfg.max_rate_kw;
    p.efficiency = cfg.efficiency;
    const int tau_bar = required_slots(p.capacity_kwh, p.initial_soc, p.efficiency,
                                       energy_per_slot);
    p.departure_slot = p.arrival_slot + std::max(tau_bar, 1) - 1 + slack_pick(rng);
    if (p.departure_slot > slot_count - 1) p.departure_slot = slot_count - 1;
    if (required_slots(p.capacity_kwh, p.initial_soc, p.efficiency, energy_per_slot) >
        p.departure_slot - p.arrival_slot + 1)
      throw FleetError("pev " + std::to_string(i) +
                       ": demand not satisfiable within its stay window");
    out.push_back(p);
  }
  return out;
}

struct FleetState {
  int clock = 0;
  std::vector<PevRecord> records;
  std::vector<double> remaining_kwh;  // d_{k_n}(t), per PEV
  std::vector<double> soc;

  explicit FleetState(std::vector<PevRecord> recs = {}) : records(std::move(recs)) {
    for (const auto& p : records) {
      remaining_kwh.push_back(p.capacity_kwh * (1.0 - p.initial_soc));
      soc.push_back(p.initial_soc);
    }
  }

  bool is_active(int id) const {
    const auto& p = records.at(id);
    return p.arrival_slot <= clock && clock <= p.departure_slot && remaining_kwh[id] > 1e-9;
  }

  std::vector<int> active_set() const {
    std::vector<int> out;
    for (const auto& p : records)
      if (is_active(p.id)) out.push_back(p.id);
    return out;
  }

  // Psi(t): latest departure over C(t); nullopt when no PEV is active.
  std::optional<int> horizon() const {
    std::optional<int> psi;
    for (const auto& p : records)
      if (is_active(p.id)) psi = std::max(psi.value_or(p.departure_slot), p.departure_slot);
    return psi;
  }

  // Apply the slot-t charging decisions and move the clock to t+1.
  void advance(const std::map<int, int>& applied_tau, double slot_hours) {
    for (const auto& [id, tau] : applied_tau) {
      if (tau != 0 && tau != 1) throw FleetError("applied tau must be binary");
      if (tau == 0) continue;
      if (!is_active(id))
        throw FleetError("tau=1 for pev " + std::to_string(id) + " outside its active window");
      const auto& p = records.at(id);
      const double delivered = p.efficiency * p.max_rate_kw * slot_hours;
      remaining_kwh[id] = std::max(0.0, remaining_kwh[id] - delivered);
      soc[id] = std::min(1.0, soc[id] + delivered / p.capacity_kwh);
    }
    ++clock;
  }
};

inline FleetConfig fleet_config_from_json(const nlohmann::json& j) {
  FleetConfig cfg;
  try {
    cfg.count = j.at("count").get<int>();
    const auto& aj = j.at("arrival");
    cfg.arrival.mean_hour = aj.at("mean_hour").get<double>();
    cfg.arrival.sd_hour = aj.at("sd_hour").get<double>();
    const auto& wj = aj.at("window");
    if (wj.size() != 2) throw FleetError("arrival.window: expected [start,end]");
    cfg.arrival.window_start = wj[0].get<double>();
    cfg.arrival.window_end = wj[1].get<double>();
    cfg.capacity_kwh = j.at("capacity_kwh").get<double>();
    cfg.initial_soc = j.at("initial_soc").get<double>();
    cfg.max_rate_kw = j.at("max_rate_kw").get<double>();
    cfg.efficiency = j.at("efficiency").get<double>();
    const auto& sj = j.at("departure_slack");
    if (sj.size() != 2) throw FleetError("departure_slack: expected [min,max]");
    cfg.slack_min = sj[0].get<int>();
    cfg.slack_max = sj[1].get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FleetError(std::string("fleet config schema: ") + e.what());
  }
  return cfg;
}

inline std::vector<PevRecord> records_from_json(const nlohmann::json& j, int slot_count,
                                                double slot_hours) {
  std::vector<PevRecord> out;
  try {
    for (const auto& pj : j) {
      PevRecord p;
      p.id = pj.at("id").get<int>();
      p.station = pj.at("station").get<int>();
      p.arrival_slot = pj.at("arrival_slot").get<int>();
      p.departure_slot = pj.at("departure_slot").get<int>();
      p.capacity_kwh = pj.at("capacity_kwh").get<double>();
      p.initial_soc = pj.at("initial_soc").get<double>();
      p.max_rate_kw = pj.at("max_rate_kw").get<double>();
      p.efficiency = pj.at("efficiency").get<double>();
      out.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FleetError(std::string("fleet record schema: ") + e.what());
  }
  for (const auto& p : out) {
    if (p.arrival_slot < 0 || p.departure_slot < p.arrival_slot ||
        p.departure_slot >= slot_count)
      throw FleetError("pev " + std::to_string(p.id) + ": stay window out of range");
    if (!(p.initial_soc >= 0.0 && p.initial_soc < 1.0))
      throw FleetError("pev " + std::to_string(p.id) + ": initial_soc must lie in [0,1)");
    if (!(p.efficiency > 0.0 && p.efficiency <= 1.0))
      throw FleetError("pev " + std::to_string(p.id) + ": efficiency must lie in (0,1]");
    const int tau_bar = required_slots(p.capacity_kwh, p.initial_soc, p.efficiency,
                                       p.max_rate_kw * slot_hours);
    if (tau_bar > p.departure_slot - p.arrival_slot + 1)
      throw FleetError("pev " + std::to_string(p.id) +
                       ": demand not satisfiable within its stay window");
  }
  return out;
}

inline nlohmann::json records_to_json(const std::vector<PevRecord>& recs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : recs)
    j.push_back({{"id", p.id},
                 {"station", p.station},
                 {"arrival_slot", p.arrival_slot},
                 {"departure_slot", p.departure_slot},
                 {"capacity_kwh", p.capacity_kwh},
                 {"initial_soc", p.initial_soc},
                 {"max_rate_kw", p.max_rate_kw},
                 {"efficiency", p.efficiency}});
  return j;
}

// A fleet file is either a config object or a bare list of records.
inline std::vector<PevRecord> load_fleet(const std::string& path,
                                         const std::vector<int>& station_buses,
                                         double slot_hours, int slot_count) {
  std::ifstream in(path);
  if (!in) throw FleetError("cannot open fleet file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FleetError(std::string("fleet file is not valid JSON: ") + e.what());
  }
  if (j.is_array()) return records_from_json(j, slot_count, slot_hours);
  return generate_fleet(fleet_config_from_json(j), station_buses, slot_hours, slot_count);
}

}  // namespace evgrid::fleet
