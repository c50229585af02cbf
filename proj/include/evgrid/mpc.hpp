#pragma once

// Online loop: per slot, run the path-following stage over the horizon,
// rank-check the resulting matrices, run the snapshot recovery when needed,
// apply only the slot-t controls, and advance the fleet. Also hosts the
// clairvoyant enumeration oracle used for desk-scale verification.

#include <evgrid/micp.hpp>
#include <evgrid/rank1.hpp>

#include <chrono>
#include <map>
#include <string>
#include <vector>

namespace evgrid::mpc {

inline bool rank_check(const std::vector<Eigen::MatrixXcd>& w_blocks, double eps) {
  for (const auto& w : w_blocks)
    if (rank1::relative_rank_residual(w) > eps) return false;
  return true;
}

enum class MpcStatus { Ok, Infeasible, Nonconvergence };

struct SlotRecord {
  int t = 0;
  std::map<int, int> applied_tau;        // pev id -> 0/1 (active PEVs only)
  Eigen::VectorXcd v;
  std::vector<double> pg, qg;            // per generator, pu
  double generation_cost = 0.0;
  double charging_cost = 0.0;
  double stage1_slot_cost = 0.0;         // relaxed SDP generation cost at t
  double stage2_slot_cost = 0.0;         // after rank-one recovery
  int stage1_iterations = 0;
  int stage2_iterations = 0;
  bool rank_ok = false;                  // all horizon blocks passed the test
  bool stage2_ran = false;
  std::vector<double> soc;               // per PEV, after applying this slot
  double runtime_s = 0.0;
};

struct MpcTrace {
  MpcStatus status = MpcStatus::Ok;
  std::string message;
  int failed_slot = -1;
  std::vector<SlotRecord> slots;
  std::vector<int> unmet_demand_pevs;
  double objective = 0.0;
  double avg_slot_time_s = 0.0;
};

struct MpcOptions {
  micp::MicpOptions stage1;
  rank1::Rank1Options stage2;
  double rank_eps = 1e-4;
};

inline MpcTrace run_mpc(const grid::GridCase& gc, const grid::ScenarioProfiles& pr,
                        const std::vector<fleet::PevRecord>& records,
                        const MpcOptions& opts = {}) {
  MpcTrace trace;
  fleet::FleetState st(records);
  const auto station_buses = gc.station_buses();

  for (int t = 0; t < pr.slot_count; ++t) {
    const auto tic = std::chrono::steady_clock::now();
    SlotRecord rec;
    rec.t = t;

    micp::MicpResult m1;
    try {
      m1 = micp::solve_micp(gc, pr, st, opts.stage1);
    } catch (const builder::InfeasibleDemand& e) {
      trace.status = MpcStatus::Infeasible;
      trace.failed_slot = t;
      trace.message = e.what();
      return trace;
    }
    if (m1.verdict == micp::MicpVerdict::Infeasible) {
      trace.status = MpcStatus::Infeasible;
      trace.failed_slot = t;
      trace.message = "stage 1 infeasible";
      return trace;
    }
    if (m1.verdict != micp::MicpVerdict::Optimal) {
      trace.status = MpcStatus::Nonconvergence;
      trace.failed_slot = t;
      trace.message = std::string("stage 1 verdict: ") + micp::to_string(m1.verdict);
      return trace;
    }
    rec.stage1_iterations = static_cast<int>(m1.iterations.size());

    // slot-t decisions and the resulting station draw
    std::vector<double> draw(gc.bus_count, 0.0);
    for (int id : st.active_set()) {
      auto it = m1.tau.find({id, t});
      const int tau = it == m1.tau.end() ? 0 : it->second;
      rec.applied_tau[id] = tau;
      if (tau) {
        const auto& p = st.records[id];
        draw[p.station] += grid::to_per_unit(p.max_rate_kw, gc.base_mva);
        rec.charging_cost += builder::charging_cost(pr, t, p.max_rate_kw, 1.0);
      }
    }

    rec.rank_ok = rank_check(m1.w_blocks, opts.rank_eps);
    const Eigen::MatrixXcd& w_t = m1.w_blocks[0];
    rec.pg = m1.pg[0];
    rec.qg = m1.qg[0];
    rec.stage1_slot_cost = builder::generation_cost(gc, rec.pg);

    if (rec.rank_ok) {
      rec.v = rank1::extract_voltage(w_t, opts.rank_eps);
      rec.stage2_slot_cost = rec.stage1_slot_cost;
    } else {
      rec.stage2_ran = true;
      auto m2 = rank1::solve_rank1(gc, pr, t, draw, w_t, opts.stage2, rec.pg, rec.qg);
      if (m2.verdict != rank1::Rank1Verdict::Converged) {
        trace.status = m2.verdict == rank1::Rank1Verdict::Infeasible ? MpcStatus::Infeasible
                                                                     : MpcStatus::Nonconvergence;
        trace.failed_slot = t;
        trace.message = std::string("stage 2 verdict: ") + rank1::to_string(m2.verdict);
        return trace;
      }
      rec.stage2_iterations = static_cast<int>(m2.iterations.size());
      rec.v = m2.v;
      rec.pg = m2.pg;
      rec.qg = m2.qg;
      rec.stage2_slot_cost = m2.objective;
    }
    rec.generation_cost = builder::generation_cost(gc, rec.pg);

    st.advance(rec.applied_tau, pr.slot_hours);
    rec.soc = st.soc;
    rec.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    trace.slots.push_back(rec);
  }

  for (const auto& p : st.records)
    if (st.remaining_kwh[p.id] > 1e-6) trace.unmet_demand_pevs.push_back(p.id);

  for (const auto& rec : trace.slots) {
    trace.objective += rec.generation_cost + rec.charging_cost;
    trace.avg_slot_time_s += rec.runtime_s;
  }
  if (!trace.slots.empty()) trace.avg_slot_time_s /= trace.slots.size();
  (void)station_buses;
  return trace;
}

// ---- clairvoyant offline oracle ---------------------------------------

struct OracleResult {
  double objective = 0.0;
  // per PEV: the chosen charging slots
  std::map<int, std::vector<int>> schedule;
  long candidates = 0;
};

namespace detail {

inline void combinations(int lo, int hi, int pick, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
  if (pick == 0) {
    out.push_back(cur);
    return;
  }
  for (int s = lo; s <= hi - pick + 1; ++s) {
    cur.push_back(s);
    combinations(s + 1, hi, pick - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

// Enumerate every binary schedule meeting each PEV's required slot count,
// price the per-slot OPFs (memoized on the station draw pattern), and
// return the cheapest total cost with its schedule.
inline OracleResult brute_force_oracle(const grid::GridCase& gc,
                                       const grid::ScenarioProfiles& pr,
                                       const std::vector<fleet::PevRecord>& records,
                                       const conic::SolverOptions& sopts = {}) {
  long binary_count = 0;
  for (const auto& p : records) binary_count += p.departure_slot - p.arrival_slot + 1;
  if (binary_count > 20)
    throw builder::BuildError("oracle guard: " + std::to_string(binary_count) +
                              " binary variables exceeds the enumeration limit of 20");

  struct PevChoices {
    const fleet::PevRecord* p;
    std::vector<std::vector<int>> slot_sets;
  };
  std::vector<PevChoices> choices;
  for (const auto& p : records) {
    const int tau_bar = fleet::required_slots(p.capacity_kwh, p.initial_soc, p.efficiency,
                                              p.max_rate_kw * pr.slot_hours);
    PevChoices pc{&p, {}};
    std::vector<int> cur;
    detail::combinations(p.arrival_slot, p.departure_slot, tau_bar, cur, pc.slot_sets);
    if (pc.slot_sets.empty()) throw builder::BuildError("oracle: unsatisfiable pev schedule");
    choices.push_back(std::move(pc));
  }

  // per-slot OPF cost memoized by the quantized per-bus draw pattern
  std::map<std::pair<int, std::vector<long long>>, double> memo;
  auto slot_cost = [&](int t, const std::vector<double>& draw) {
    std::vector<long long> q(gc.bus_count);
    for (int k = 0; k < gc.bus_count; ++k) q[k] = std::llround(draw[k] * 1e12);
    const auto key = std::make_pair(t, q);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    auto m = builder::build_slot_opf(gc, pr, t, draw);
    auto sol = m.prob.solve(sopts);
    double cost = std::numeric_limits<double>::infinity();
    if (sol.status == conic::SolveStatus::Optimal ||
        (sol.status == conic::SolveStatus::MaxIters && sol.primal_residual < 1e-6 &&
         sol.dual_residual < 1e-6))
      cost = builder::generation_cost(gc, m.pg_value(t, sol));
    memo[key] = cost;
    return cost;
  };

  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();

  std::vector<size_t> pick(choices.size(), 0);
  while (true) {
    ++best.candidates;
    // per-slot, per-bus charging draw for this candidate
    std::vector<std::vector<double>> draw(pr.slot_count,
                                          std::vector<double>(gc.bus_count, 0.0));
    double charging = 0.0;
    for (size_t i = 0; i < choices.size(); ++i) {
      const auto& p = *choices[i].p;
      for (int s : choices[i].slot_sets[pick[i]]) {
        draw[s][p.station] += grid::to_per_unit(p.max_rate_kw, gc.base_mva);
        charging += builder::charging_cost(pr, s, p.max_rate_kw, 1.0);
      }
    }
    double total = charging;
    for (int t = 0; t < pr.slot_count && total < best.objective; ++t)
      total += slot_cost(t, draw[t]);
    if (total < best.objective) {
      best.objective = total;
      best.schedule.clear();
      for (size_t i = 0; i < choices.size(); ++i)
        best.schedule[choices[i].p->id] = choices[i].slot_sets[pick[i]];
    }
    // odometer increment over the candidate cross product
    size_t i = 0;
    for (; i < choices.size(); ++i) {
      if (++pick[i] < choices[i].slot_sets.size()) break;
      pick[i] = 0;
    }
    if (i == choices.size()) break;
  }
  return best;
}

}  // namespace evgrid::mpc
