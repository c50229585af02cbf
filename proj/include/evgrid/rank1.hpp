#pragma once

// Second stage: drive the slot-t matrix to rank one by iterating the
// Trace(W) - w^H W w penalty, then factor W back into a voltage vector.

#include <evgrid/builder.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace evgrid::rank1 {

inline double rank_residual(const Eigen::MatrixXcd& w) {
  auto [lmax, v] = hermitian::max_eigpair(w);
  (void)v;
  return w.real().trace() - lmax;
}

inline double relative_rank_residual(const Eigen::MatrixXcd& w) {
  return rank_residual(w) / std::max(1.0, w.real().trace());
}

// V = sqrt(lambda_max) * w_max with the global phase fixed so the first
// component of nontrivial magnitude is real positive.
inline Eigen::VectorXcd extract_voltage(const Eigen::MatrixXcd& w, double eps = 1e-4) {
  if (relative_rank_residual(w) > eps)
    throw std::runtime_error("extract_voltage: matrix is not numerically rank one");
  auto [lmax, vec] = hermitian::max_eigpair(w);
  Eigen::VectorXcd v = std::sqrt(std::max(0.0, lmax)) * vec;
  for (int k = 0; k < v.size(); ++k)
    if (std::abs(v[k]) > 1e-9 * std::sqrt(std::max(1e-300, lmax))) {
      v *= std::conj(v[k]) / std::abs(v[k]);
      break;
    }
  return v;
}

// Worst per-unit violation of the slot physics at voltage V with generator
// setpoints (pg, qg) and the fixed per-bus charging draw.
inline double slot_violation(const grid::GridCase& gc, const grid::ScenarioProfiles& pr, int t,
                             const Eigen::VectorXcd& v, const std::vector<double>& pg,
                             const std::vector<double>& qg,
                             const std::vector<double>& draw_pu) {
  double worst = 0.0;
  const auto inj = grid::bus_injections(gc, {v.data(), v.data() + v.size()});
  for (int k = 0; k < gc.bus_count; ++k) {
    const auto [pl, ql] = grid::scaled_load(k, t, pr);
    double pgk = 0.0, qgk = 0.0;
    for (size_t gi = 0; gi < gc.generators.size(); ++gi)
      if (gc.generators[gi].bus == k) {
        pgk = pg[gi];
        qgk = qg[gi];
      }
    worst = std::max(worst, std::abs(inj[k].real() - (pgk - pl - draw_pu[k])));
    worst = std::max(worst, std::abs(inj[k].imag() - (qgk - ql)));
    const double vm = std::abs(v[k]);
    worst = std::max(worst, std::max(gc.v_min[k] - vm, vm - gc.v_max[k]));
  }
  for (size_t gi = 0; gi < gc.generators.size(); ++gi) {
    const auto& g = gc.generators[gi];
    worst = std::max({worst, g.p_min - pg[gi], pg[gi] - g.p_max, g.q_min - qg[gi],
                      qg[gi] - g.q_max});
  }
  for (const auto& ln : gc.lines) {
    double d = std::arg(v[ln.from] * std::conj(v[ln.to]));
    worst = std::max(worst, std::abs(d) - ln.theta_max);
  }
  return worst;
}

enum class Rank1Verdict { Converged, Nonconvergence, Infeasible, SolverFailure };

inline const char* to_string(Rank1Verdict v) {
  switch (v) {
    case Rank1Verdict::Converged: return "converged";
    case Rank1Verdict::Nonconvergence: return "nonconvergence";
    case Rank1Verdict::Infeasible: return "infeasible";
    case Rank1Verdict::SolverFailure: return "solver_failure";
  }
  return "?";
}

struct Rank1Iterate {
  int kappa = 0;
  double rank_residual = 0.0;
  double objective = 0.0;   // generation cost of the iterate
  double penalized = 0.0;   // objective + lambda * (Trace - lambda_max)
  double lambda_used = 0.0;
};

struct Rank1Result {
  Rank1Verdict verdict = Rank1Verdict::SolverFailure;
  Eigen::VectorXcd v;
  Eigen::MatrixXcd w;
  std::vector<double> pg, qg;
  double objective = 0.0;            // slot generation cost at the final iterate
  double residual = 0.0;             // relative rank residual at the final iterate
  double constraint_violation = 0.0; // worst per-unit slot violation of extracted V
  std::vector<Rank1Iterate> iterations;

  std::string diagnostics_jsonl() const {
    std::ostringstream os;
    for (const auto& it : iterations)
      os << "{\"kappa\":" << it.kappa << ",\"rank_residual\":" << it.rank_residual
         << ",\"objective\":" << it.objective << ",\"lambda_used\":" << it.lambda_used
         << "}\n";
    return os.str();
  }
};

struct Rank1Options {
  double lambda = 1.0;
  double eps = 1e-4;
  int max_iters = 50;
  double violation_tol = 1e-5;
  conic::SolverOptions solver;
};

inline Rank1Result solve_rank1(const grid::GridCase& gc, const grid::ScenarioProfiles& pr, int t,
                               const std::vector<double>& fixed_draw_pu,
                               const Eigen::MatrixXcd& w_init, const Rank1Options& opts = {},
                               const std::vector<double>& init_pg = {},
                               const std::vector<double>& init_qg = {}) {
  Rank1Result res;
  res.pg = init_pg;
  res.qg = init_qg;
  if (!init_pg.empty()) res.objective = builder::generation_cost(gc, init_pg);
  Eigen::MatrixXcd w_prev = w_init;
  double lambda = opts.lambda;
  const double lambda_cap = opts.lambda * 64.0;
  double last_resid = rank_residual(w_init);

  for (int kappa = 0; kappa < opts.max_iters; ++kappa) {
    // done already? (warm start may be rank one out of the gate)
    res.residual = relative_rank_residual(w_prev);
    if (res.residual <= opts.eps) {
      Eigen::VectorXcd v = extract_voltage(w_prev, opts.eps);
      const double viol = res.pg.empty()
                              ? 1.0
                              : slot_violation(gc, pr, t, v, res.pg, res.qg, fixed_draw_pu);
      if (!res.pg.empty() && viol <= opts.violation_tol) {
        res.v = v;
        res.w = w_prev;
        res.constraint_violation = viol;
        res.verdict = Rank1Verdict::Converged;
        return res;
      }
      // keep iterating: either no setpoints yet or extraction still coarse
    }

    auto m = builder::build_snapshot_problem(gc, pr, t, fixed_draw_pu, w_prev, lambda);
    auto sol = m.prob.solve(opts.solver);
    if (sol.status == conic::SolveStatus::Infeasible) {
      res.verdict = Rank1Verdict::Infeasible;
      return res;
    }
    if (sol.status != conic::SolveStatus::Optimal &&
        !(sol.status == conic::SolveStatus::MaxIters && sol.primal_residual < 1e-6 &&
          sol.dual_residual < 1e-6)) {
      res.verdict = Rank1Verdict::SolverFailure;
      return res;
    }

    Eigen::MatrixXcd w_new = m.w_value(t, sol);
    res.pg = m.pg_value(t, sol);
    res.qg = m.qg_value(t, sol);
    res.objective = builder::generation_cost(gc, res.pg);

    Rank1Iterate rec;
    rec.kappa = kappa;
    rec.rank_residual = rank_residual(w_new);
    rec.objective = res.objective;
    rec.lambda_used = lambda;
    // true penalized value; the majorize-minimize argument makes this
    // nonincreasing while lambda stays fixed
    rec.penalized = res.objective + lambda * rec.rank_residual;
    res.iterations.push_back(rec);

    if (rec.rank_residual > 0.95 * last_resid && rec.rank_residual > opts.eps &&
        lambda < lambda_cap)
      lambda *= 2.0;  // stalling: lean harder on the penalty
    last_resid = rec.rank_residual;
    w_prev = w_new;
  }

  res.residual = relative_rank_residual(w_prev);
  res.w = w_prev;
  if (res.residual <= opts.eps && !res.pg.empty()) {
    Eigen::VectorXcd v = extract_voltage(w_prev, opts.eps);
    const double viol = slot_violation(gc, pr, t, v, res.pg, res.qg, fixed_draw_pu);
    if (viol <= opts.violation_tol) {
      res.v = v;
      res.constraint_violation = viol;
      res.verdict = Rank1Verdict::Converged;
      return res;
    }
  }
  res.verdict = Rank1Verdict::Nonconvergence;
  return res;
}

}  // namespace evgrid::rank1
