#pragma once

// Path-following loop for the mixed-integer stage: relax the binary
// charging variables, penalize the fractional measure 1/g - 1/tau_bar, and
// iterate convex surrogates until every tau is within eps of {0,1}.

#include <evgrid/builder.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace evgrid::micp {

inline double g_value(const std::vector<double>& tau, double L) {
  double g = 0.0;
  for (double t : tau) g += std::pow(std::max(0.0, t), L);
  return g;
}

inline double binary_gap(const std::vector<double>& tau, double L) {
  double s = 0.0;
  for (double t : tau) s += t - std::pow(std::max(0.0, t), L);
  return s;
}

inline double g1_value(const std::vector<double>& tau, double L, double tau_bar) {
  const double g = g_value(tau, L);
  if (g <= 0.0) throw builder::BuildError("g1 undefined: g(tau) = 0");
  if (tau_bar <= 0.0) throw builder::BuildError("g1 undefined: tau_bar = 0");
  return 1.0 / g - 1.0 / tau_bar;
}

enum class MicpVerdict { Optimal, Infeasible, Stall, RoundingFailure, SolverFailure };

inline const char* to_string(MicpVerdict v) {
  switch (v) {
    case MicpVerdict::Optimal: return "optimal";
    case MicpVerdict::Infeasible: return "infeasible";
    case MicpVerdict::Stall: return "stall";
    case MicpVerdict::RoundingFailure: return "rounding_failure";
    case MicpVerdict::SolverFailure: return "solver_failure";
  }
  return "?";
}

struct MicpIterate {
  int kappa = 0;
  double phi = 0.0;        // true penalized objective at the new point
  double binary_gap = 0.0;
  double mu_used = 0.0;
  conic::SolveStatus solver_status = conic::SolveStatus::NumericalFailure;
};

struct MicpResult {
  MicpVerdict verdict = MicpVerdict::SolverFailure;
  int t0 = 0, t1 = 0;
  std::map<std::pair<int, int>, int> tau;        // rounded binary schedule
  std::vector<Eigen::MatrixXcd> w_blocks;        // per horizon slot, at fixed tau
  std::vector<std::vector<double>> pg, qg;       // per horizon slot, per generator (pu)
  double objective = 0.0;                        // direct cost of the rounded point
  double relaxed_objective = 0.0;                // stage-1 value before rounding
  double final_gap = 0.0;                        // binary gap just before rounding
  std::vector<MicpIterate> iterations;

  std::string diagnostics_jsonl() const {
    std::ostringstream os;
    for (const auto& it : iterations)
      os << "{\"kappa\":" << it.kappa << ",\"phi\":" << it.phi
         << ",\"binary_gap\":" << it.binary_gap
         << ",\"solver_status\":\"" << conic::to_string(it.solver_status) << "\"}\n";
    return os.str();
  }
};

namespace detail {

inline bool usable(const conic::ConicProblem::Solution& s) {
  if (s.status == conic::SolveStatus::Optimal) return true;
  return s.status == conic::SolveStatus::MaxIters && s.primal_residual < 1e-6 &&
         s.dual_residual < 1e-6;
}

inline std::vector<double> tau_vector(const builder::HorizonModel& m,
                                      const conic::ConicProblem::Solution& sol) {
  std::vector<double> out;
  for (const auto& [key, v] : m.tau) out.push_back(sol.value(v));
  return out;
}

}  // namespace detail

struct MicpOptions {
  builder::PenaltyConfig penalty;
  conic::SolverOptions solver;
  int max_outer = 100;
  int max_mu_escalations = 6;
};

// Fill w/pg/qg for the horizon by solving per-slot OPFs with the schedule
// fixed; the slots decouple once tau is decided.
inline bool resolve_fixed(const grid::GridCase& gc, const grid::ScenarioProfiles& pr,
                          MicpResult& res, const std::vector<builder::ActivePev>& pevs,
                          const conic::SolverOptions& sopts) {
  res.objective = 0.0;
  res.w_blocks.clear();
  res.pg.clear();
  res.qg.clear();
  for (int t = res.t0; t <= res.t1; ++t) {
    std::vector<double> draw(gc.bus_count, 0.0);
    for (const auto& pev : pevs) {
      auto it = res.tau.find({pev.id, t});
      if (it != res.tau.end() && it->second == 1) {
        draw[pev.station] += grid::to_per_unit(pev.rate_kw, gc.base_mva);
        res.objective += builder::charging_cost(pr, t, pev.rate_kw, 1.0);
      }
    }
    auto m = builder::build_slot_opf(gc, pr, t, draw);
    auto sol = m.prob.solve(sopts);
    if (!detail::usable(sol)) return false;
    res.w_blocks.push_back(m.w_value(t, sol));
    res.pg.push_back(m.pg_value(t, sol));
    res.qg.push_back(m.qg_value(t, sol));
    res.objective += builder::generation_cost(gc, res.pg.back());
  }
  return true;
}

inline MicpResult solve_micp(const grid::GridCase& gc, const grid::ScenarioProfiles& pr,
                             const fleet::FleetState& st, const MicpOptions& opts = {}) {
  MicpResult res;
  const auto pevs = builder::active_pevs(st, pr.slot_hours);

  auto init = builder::build_init_problem(gc, pr, st);
  res.t0 = init.t0;
  res.t1 = init.t1;
  auto sol = init.prob.solve(opts.solver);
  if (sol.status == conic::SolveStatus::Infeasible) {
    res.verdict = MicpVerdict::Infeasible;
    return res;
  }
  if (!detail::usable(sol)) {
    res.verdict = MicpVerdict::SolverFailure;
    return res;
  }
  res.relaxed_objective = sol.objective;

  std::map<std::pair<int, int>, double> tau_cur;
  for (const auto& [key, v] : init.tau) tau_cur[key] = sol.value(v);

  const double tau_bar_total = init.tau_bar_total;
  double mu = opts.penalty.mu;
  int escalations = 0;
  double prev_phi = std::numeric_limits<double>::infinity();

  auto gap_of = [&](const std::map<std::pair<int, int>, double>& tc) {
    std::vector<double> tv;
    for (const auto& [k, v] : tc) tv.push_back(v);
    return binary_gap(tv, opts.penalty.L);
  };

  if (tau_bar_total > 0.0) {
    for (int kappa = 0; kappa < opts.max_outer && gap_of(tau_cur) > opts.penalty.eps; ++kappa) {
      builder::PenaltyConfig pc = opts.penalty;
      pc.mu = mu;
      auto sub = builder::build_penalized_subproblem(gc, pr, st, tau_cur, pc);
      auto ssol = sub.prob.solve(opts.solver);
      MicpIterate rec;
      rec.kappa = kappa;
      rec.mu_used = mu;
      rec.solver_status = ssol.status;
      if (!detail::usable(ssol)) {
        res.iterations.push_back(rec);
        res.verdict = MicpVerdict::SolverFailure;
        return res;
      }
      std::map<std::pair<int, int>, double> tau_next;
      std::vector<double> tv;
      for (const auto& [key, v] : sub.tau) {
        tau_next[key] = ssol.value(v);
        tv.push_back(ssol.value(v));
      }
      // true penalized objective: swap the surrogate value for g itself
      const double s_star = ssol.value(sub.penalty_s);
      const double f_val = ssol.objective - mu * s_star + mu / tau_bar_total;
      rec.phi = f_val + mu * g1_value(tv, opts.penalty.L, tau_bar_total);
      rec.binary_gap = binary_gap(tv, opts.penalty.L);
      res.iterations.push_back(rec);

      const bool stalled = prev_phi - rec.phi < 1e-9 && rec.binary_gap > opts.penalty.eps;
      if (stalled) {
        if (++escalations > opts.max_mu_escalations) {
          res.verdict = MicpVerdict::Stall;
          return res;
        }
        mu *= 5.0;
        prev_phi = std::numeric_limits<double>::infinity();  // new penalty scale
        continue;
      }
      prev_phi = rec.phi;
      tau_cur = tau_next;
    }
    if (gap_of(tau_cur) > opts.penalty.eps) {
      res.verdict = MicpVerdict::Stall;
      return res;
    }
  }

  // round and re-verify the per-PEV slot-count equalities exactly
  res.final_gap = gap_of(tau_cur);
  for (const auto& [key, v] : tau_cur) res.tau[key] = v >= 0.5 ? 1 : 0;
  for (const auto& pev : pevs) {
    int total = 0;
    for (int t = res.t0; t <= pev.window_end; ++t) total += res.tau[{pev.id, t}];
    if (total != pev.tau_bar) {
      res.verdict = MicpVerdict::RoundingFailure;
      return res;
    }
  }

  if (!resolve_fixed(gc, pr, res, pevs, opts.solver)) {
    res.verdict = MicpVerdict::SolverFailure;
    return res;
  }
  res.verdict = MicpVerdict::Optimal;
  return res;
}

}  // namespace evgrid::micp
