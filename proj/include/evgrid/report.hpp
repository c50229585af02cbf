#pragma once

// Plot-ready CSV and JSON emission for MPC traces. Formatting is pinned so
// identical runs produce byte-identical files.

#include <evgrid/mpc.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace evgrid::report {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline void write_trace_csv(const std::string& path, const grid::GridCase& gc,
                            const mpc::MpcTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,charging_pevs,generation_cost,charging_cost,stage1_slot_cost,stage2_slot_cost,"
         "stage1_iters,stage2_iters,rank_ok,stage2_ran";
  for (int k = 0; k < gc.bus_count; ++k) out << ",vmag_" << k;
  for (size_t gi = 0; gi < gc.generators.size(); ++gi) out << ",pg_" << gi << ",qg_" << gi;
  out << "\n";
  for (const auto& r : trace.slots) {
    out << r.t << ",";
    bool first = true;
    for (const auto& [id, tau] : r.applied_tau)
      if (tau) {
        if (!first) out << ";";
        out << id;
        first = false;
      }
    out << "," << fmt(r.generation_cost) << "," << fmt(r.charging_cost) << ","
        << fmt(r.stage1_slot_cost) << "," << fmt(r.stage2_slot_cost) << ","
        << r.stage1_iterations << "," << r.stage2_iterations << "," << (r.rank_ok ? 1 : 0)
        << "," << (r.stage2_ran ? 1 : 0);
    for (int k = 0; k < gc.bus_count; ++k) out << "," << fmt(std::abs(r.v[k]));
    for (size_t gi = 0; gi < gc.generators.size(); ++gi)
      out << "," << fmt(r.pg[gi]) << "," << fmt(r.qg[gi]);
    out << "\n";
  }
}

// SoC time series, one column per PEV (the bang-bang staircase).
inline void write_soc_csv(const std::string& path,
                          const std::vector<fleet::PevRecord>& records,
                          const mpc::MpcTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t";
  for (const auto& p : records) out << ",pev_" << p.id;
  out << "\n";
  for (const auto& r : trace.slots) {
    out << r.t;
    for (const auto& p : records) out << "," << fmt(r.soc[p.id]);
    out << "\n";
  }
}

inline nlohmann::json trace_to_json(const grid::GridCase& gc, const mpc::MpcTrace& trace) {
  nlohmann::json j;
  j["status"] = trace.status == mpc::MpcStatus::Ok
                    ? "ok"
                    : trace.status == mpc::MpcStatus::Infeasible ? "infeasible"
                                                                 : "nonconvergence";
  if (trace.failed_slot >= 0) j["failed_slot"] = trace.failed_slot;
  if (!trace.message.empty()) j["message"] = trace.message;
  j["objective"] = trace.objective;
  j["avg_slot_time_s"] = trace.avg_slot_time_s;
  j["unmet_demand_pevs"] = trace.unmet_demand_pevs;
  j["slots"] = nlohmann::json::array();
  for (const auto& r : trace.slots) {
    nlohmann::json s;
    s["t"] = r.t;
    for (const auto& [id, tau] : r.applied_tau) s["applied_tau"][std::to_string(id)] = tau;
    for (int k = 0; k < gc.bus_count; ++k) {
      s["v_re"].push_back(r.v[k].real());
      s["v_im"].push_back(r.v[k].imag());
    }
    s["pg"] = r.pg;
    s["qg"] = r.qg;
    s["soc"] = r.soc;
    s["generation_cost"] = r.generation_cost;
    s["charging_cost"] = r.charging_cost;
    s["stage1_slot_cost"] = r.stage1_slot_cost;
    s["stage2_slot_cost"] = r.stage2_slot_cost;
    s["stage1_iterations"] = r.stage1_iterations;
    s["stage2_iterations"] = r.stage2_iterations;
    s["rank_ok"] = r.rank_ok;
    s["stage2_ran"] = r.stage2_ran;
    s["runtime_s"] = r.runtime_s;
    j["slots"].push_back(s);
  }
  return j;
}

inline nlohmann::json summary_json(const mpc::MpcTrace& trace,
                                   const std::vector<fleet::PevRecord>& records, double mu,
                                   double lambda) {
  long binary_vars = 0;
  for (const auto& p : records) binary_vars += p.departure_slot - p.arrival_slot + 1;
  double obj1 = 0.0, obj2 = 0.0;
  for (const auto& r : trace.slots) {
    obj1 += r.stage1_slot_cost + r.charging_cost;
    obj2 += r.stage2_slot_cost + r.charging_cost;
  }
  return {{"binary_variables", binary_vars}, {"mu", mu},
          {"lambda", lambda},                {"obj_stage1", obj1},
          {"obj_stage2", obj2},              {"avg_slot_time_s", trace.avg_slot_time_s}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace evgrid::report
