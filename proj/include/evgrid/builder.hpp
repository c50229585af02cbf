#pragma once

// Assembles the per-slot / per-horizon conic programs: SDP-relaxed power
// flow over W(t') = V V^H plus bang-bang charging variables, the concave
// penalty machinery for driving tau to binary, and the eigenvector-penalty
// snapshot problem for rank-one recovery.

#include <evgrid/conic.hpp>
#include <evgrid/fleet.hpp>
#include <evgrid/grid.hpp>
#include <evgrid/hermitian.hpp>

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evgrid::builder {

struct BuildError : std::runtime_error {
  explicit BuildError(const std::string& what) : std::runtime_error(what) {}
};

struct InfeasibleDemand : BuildError {
  explicit InfeasibleDemand(const std::string& what) : BuildError(what) {}
};

struct PenaltyConfig {
  double mu = 10.0;
  double L = 1.5;
  double lambda = 1.0;
  double eps = 1e-4;
  double trust_floor = 1e-6;
};

// One PEV that is chargeable in the current horizon: eligible slots are
// [t, window_end] and tau_bar is the remaining required slot count.
struct ActivePev {
  int id = 0;
  int station = 0;
  int window_end = 0;
  int tau_bar = 0;
  double rate_kw = 0.0;
};

inline std::vector<ActivePev> active_pevs(const fleet::FleetState& st, double slot_hours) {
  std::vector<ActivePev> out;
  for (int id : st.active_set()) {
    const auto& p = st.records[id];
    ActivePev a;
    a.id = id;
    a.station = p.station;
    a.window_end = p.departure_slot;
    a.rate_kw = p.max_rate_kw;
    a.tau_bar = fleet::required_slots_for_demand(st.remaining_kwh[id], p.efficiency,
                                                 p.max_rate_kw * slot_hours);
    if (a.tau_bar > a.window_end - st.clock + 1)
      throw InfeasibleDemand("pev " + std::to_string(id) + ": needs " +
                             std::to_string(a.tau_bar) + " slots but only " +
                             std::to_string(a.window_end - st.clock + 1) + " remain");
    out.push_back(a);
  }
  return out;
}

// Variable handles for one horizon problem. Slots are addressed by absolute
// index t' in [t0, t1]; tau variables by (pev id, slot).
struct HorizonModel {
  const grid::GridCase* gc = nullptr;
  const grid::ScenarioProfiles* pr = nullptr;
  int t0 = 0, t1 = 0;

  conic::ConicProblem prob;
  std::vector<hermitian::HermitianEmbedding> embed;  // one per slot
  std::vector<std::vector<int>> pg, qg;              // [slot][generator] flat vars
  std::vector<ActivePev> pevs;
  std::map<std::pair<int, int>, int> tau;            // (pev id, slot) -> flat var
  std::vector<std::vector<double>> fixed_draw_pu;    // [slot][bus] when tau is fixed

  int penalty_s = -1;  // epigraph of 1/g^{(kappa)}
  int penalty_g = -1;  // value of the surrogate g^{(kappa)}(tau)
  double tau_bar_total = 0.0;

  int slot_index(int t) const {
    if (t < t0 || t > t1) throw BuildError("slot outside horizon");
    return t - t0;
  }
  Eigen::MatrixXcd w_value(int t, const conic::ConicProblem::Solution& sol) const {
    return embed[slot_index(t)].value(prob, sol);
  }
  double tau_value(int pev, int t, const conic::ConicProblem::Solution& sol) const {
    return sol.value(tau.at({pev, t}));
  }
  std::vector<double> pg_value(int t, const conic::ConicProblem::Solution& sol) const {
    std::vector<double> out;
    for (int v : pg[slot_index(t)]) out.push_back(sol.value(v));
    return out;
  }
  std::vector<double> qg_value(int t, const conic::ConicProblem::Solution& sol) const {
    std::vector<double> out;
    for (int v : qg[slot_index(t)]) out.push_back(sol.value(v));
    return out;
  }
  std::vector<std::pair<std::pair<int, int>, int>> tau_entries() const {
    return {tau.begin(), tau.end()};
  }
};

namespace detail {

// a >= b encoded as a - b - slack = rhs-shifted equality with slack >= 0.
inline void ge_row(conic::ConicProblem& p, const std::vector<std::pair<int, double>>& terms,
                   double rhs) {
  const int slack = p.add_nonneg(1);
  const int row = p.add_row(rhs);
  for (auto [v, c] : terms) p.add_term(row, v, c);
  p.add_term(row, p.var(slack), -1.0);
}

}  // namespace detail

// Power-balance equalities, two real rows per bus (Re/Im of the complex
// injection identity S_k = sum_m (W_kk - W_km) y_km^*).
inline void build_balance_rows(HorizonModel& m, int t, bool with_tau) {
  const auto& gc = *m.gc;
  const auto& pr = *m.pr;
  const int si = m.slot_index(t);
  const auto& emb = m.embed[si];

  for (int k = 0; k < gc.bus_count; ++k) {
    const auto [pl, ql] = grid::scaled_load(k, t, pr);
    double draw = 0.0;
    if (!with_tau && !m.fixed_draw_pu.empty()) draw = m.fixed_draw_pu[si][k];

    const int row_p = m.prob.add_row(-pl - draw);
    const int row_q = m.prob.add_row(-ql);

    for (const auto& ln : gc.lines) {
      int other = -1;
      if (ln.from == k) other = ln.to;
      if (ln.to == k) other = ln.from;
      if (other < 0) continue;
      const grid::Complex y = grid::line_admittance(ln.impedance);
      const double g = y.real(), b = y.imag();
      // Re: g(W_kk - Re W_km) - b Im W_km ; Im: -b(W_kk - Re W_km) - g Im W_km
      emb.add_re(m.prob, row_p, k, k, g);
      emb.add_re(m.prob, row_p, k, other, -g);
      emb.add_im(m.prob, row_p, k, other, -b);
      emb.add_re(m.prob, row_q, k, k, -b);
      emb.add_re(m.prob, row_q, k, other, b);
      emb.add_im(m.prob, row_q, k, other, -g);
    }

    // Injection side: -(P_g - P_l - station draw) moved into the row.
    for (size_t gi = 0; gi < gc.generators.size(); ++gi) {
      if (gc.generators[gi].bus != k) continue;
      m.prob.add_term(row_p, m.pg[si][gi], -1.0);
      m.prob.add_term(row_q, m.qg[si][gi], -1.0);
    }
    if (with_tau) {
      for (const auto& pev : m.pevs) {
        if (pev.station != k || t > pev.window_end) continue;
        const double rate_pu = grid::to_per_unit(pev.rate_kw, gc.base_mva);
        m.prob.add_term(row_p, m.tau.at({pev.id, t}), rate_pu);
      }
    }
  }
}

// Voltage boxes on W_kk, generator boxes, two-sided angle limits.
inline void build_static_rows(HorizonModel& m, int t) {
  const auto& gc = *m.gc;
  const int si = m.slot_index(t);
  const auto& emb = m.embed[si];
  auto& p = m.prob;

  for (int k = 0; k < gc.bus_count; ++k) {
    // v_min^2 <= W_kk <= v_max^2
    {
      const int slack = p.add_nonneg(1);
      const int row = p.add_row(gc.v_min[k] * gc.v_min[k]);
      emb.add_re(p, row, k, k, 1.0);
      p.add_term(row, p.var(slack), -1.0);
    }
    {
      const int slack = p.add_nonneg(1);
      const int row = p.add_row(gc.v_max[k] * gc.v_max[k]);
      emb.add_re(p, row, k, k, 1.0);
      p.add_term(row, p.var(slack), 1.0);
    }
  }
  for (size_t gi = 0; gi < gc.generators.size(); ++gi) {
    const auto& g = gc.generators[gi];
    detail::ge_row(p, {{m.pg[si][gi], 1.0}}, g.p_min);
    detail::ge_row(p, {{m.pg[si][gi], -1.0}}, -g.p_max);
    detail::ge_row(p, {{m.qg[si][gi], 1.0}}, g.q_min);
    detail::ge_row(p, {{m.qg[si][gi], -1.0}}, -g.q_max);
  }
  for (const auto& ln : gc.lines) {
    const double tn = std::tan(ln.theta_max);
    // tan(theta) Re W_km - Im W_km >= 0 and tan(theta) Re W_km + Im W_km >= 0
    for (double sgn : {1.0, -1.0}) {
      const int slack = p.add_nonneg(1);
      const int row = p.add_row(0.0);
      emb.add_re(p, row, ln.from, ln.to, tn);
      emb.add_im(p, row, ln.from, ln.to, sgn);
      p.add_term(row, p.var(slack), -1.0);
    }
  }
}

// Per-PEV scheduling: sum of tau over the eligible window equals tau_bar;
// each tau already lives in a nonneg block, so only the upper box is added.
inline void build_tau_rows(HorizonModel& m) {
  auto& p = m.prob;
  for (const auto& [key, v] : m.tau) {
    const int slack = p.add_nonneg(1);
    const int row = p.add_row(1.0);
    p.add_term(row, v, 1.0);
    p.add_term(row, p.var(slack), 1.0);
  }
  for (const auto& pev : m.pevs) {
    const int row = p.add_row(static_cast<double>(pev.tau_bar));
    for (int t = m.t0; t <= pev.window_end; ++t) p.add_term(row, m.tau.at({pev.id, t}), 1.0);
  }
}

// Generation cost applied to MW through a rotated-cone epigraph when the
// quadratic term is present; charging cost beta * tau * Pbar * slot_hours.
inline void build_objective(HorizonModel& m) {
  const auto& gc = *m.gc;
  const auto& pr = *m.pr;
  auto& p = m.prob;
  const double base = gc.base_mva;

  for (int t = m.t0; t <= m.t1; ++t) {
    const int si = m.slot_index(t);
    for (size_t gi = 0; gi < gc.generators.size(); ++gi) {
      const auto& g = gc.generators[gi];
      const int pgv = m.pg[si][gi];
      if (g.c2 > 0.0) {
        const int tg = p.var(p.add_free(1));
        const int soc = p.add_soc(3);
        const int a = p.var(soc, 0), b = p.var(soc, 1), cc = p.var(soc, 2);
        // u = (tg - c1*P_MW - c0)/c2; cone enforces P_MW^2 <= u.
        int row = p.add_row(g.c2 - g.c0);
        p.add_term(row, a, g.c2);
        p.add_term(row, tg, -1.0);
        p.add_term(row, pgv, g.c1 * base);
        row = p.add_row(0.0);
        p.add_term(row, b, 1.0);
        p.add_term(row, pgv, -2.0 * base);
        row = p.add_row(-g.c2 - g.c0);
        p.add_term(row, cc, g.c2);
        p.add_term(row, tg, -1.0);
        p.add_term(row, pgv, g.c1 * base);
        p.add_obj(tg, 1.0);
      } else {
        p.add_obj(pgv, g.c1 * base);
        p.add_obj_constant(g.c0);
      }
    }
  }
  for (const auto& [key, v] : m.tau) {
    const auto [id, t] = key;
    double rate_kw = 0.0;
    for (const auto& pev : m.pevs)
      if (pev.id == id) rate_kw = pev.rate_kw;
    p.add_obj(v, pr.prices[t] * rate_kw * pr.slot_hours);
  }
}

namespace detail {

inline HorizonModel make_skeleton(const grid::GridCase& gc, const grid::ScenarioProfiles& pr,
                                  int t0, int t1, const std::vector<ActivePev>& pevs,
                                  bool with_tau) {
  if (t0 < 0 || t1 < t0 || t1 >= pr.slot_count) throw BuildError("horizon out of range");
  HorizonModel m;
  m.gc = &gc;
  m.pr = &pr;
  m.t0 = t0;
  m.t1 = t1;
  m.pevs = pevs;
  for (const auto& a : pevs) m.tau_bar_total += a.tau_bar;

  const int n = gc.bus_count;
  for (int t = t0; t <= t1; ++t) {
    const int psd = m.prob.add_psd(2 * n);
    m.embed.emplace_back(n, psd);
    std::vector<int> pgs, qgs;
    for (size_t gi = 0; gi < gc.generators.size(); ++gi) {
      pgs.push_back(m.prob.var(m.prob.add_free(1)));
      qgs.push_back(m.prob.var(m.prob.add_free(1)));
    }
    m.pg.push_back(pgs);
    m.qg.push_back(qgs);
  }
  if (with_tau) {
    for (const auto& a : pevs)
      for (int t = t0; t <= std::min(a.window_end, t1); ++t)
        m.tau[{a.id, t}] = m.prob.var(m.prob.add_nonneg(1));
  }
  return m;
}

}  // namespace detail

// Eq.-style initialization: the full horizon problem with tau relaxed to
// [0,1] boxes and no penalty term.
inline HorizonModel build_init_problem(const grid::GridCase& gc,
                                       const grid::ScenarioProfiles& pr,
                                       const fleet::FleetState& st) {
  const auto pevs = active_pevs(st, pr.slot_hours);
  const int t0 = st.clock;
  int t1 = t0;
  for (const auto& a : pevs) t1 = std::max(t1, a.window_end);
  HorizonModel m = detail::make_skeleton(gc, pr, t0, t1, pevs, true);
  for (int t = t0; t <= t1; ++t) {
    build_balance_rows(m, t, true);
    build_static_rows(m, t);
  }
  build_tau_rows(m);
  build_objective(m);
  return m;
}

// Surrogate value at tau: g^{(kappa)}(tau) = -(L-1) sum tk^L + L sum tk^{L-1} tau.
inline double surrogate_value(const std::vector<double>& tau_prev,
                              const std::vector<double>& tau, double L) {
  double v = 0.0;
  for (size_t i = 0; i < tau_prev.size(); ++i) {
    const double tk = std::max(0.0, tau_prev[i]);
    v += -(L - 1.0) * std::pow(tk, L) + L * std::pow(tk, L - 1.0) * tau[i];
  }
  return v;
}

// The penalized subproblem: init-problem rows plus the exact hyperbolic
// epigraph s * g^{(kappa)}(tau) >= 1 and objective mu*s - mu/tau_bar_total.
// tau_prev is keyed the same way as HorizonModel::tau.
inline HorizonModel build_penalized_subproblem(const grid::GridCase& gc,
                                               const grid::ScenarioProfiles& pr,
                                               const fleet::FleetState& st,
                                               const std::map<std::pair<int, int>, double>& tau_prev,
                                               const PenaltyConfig& cfg) {
  HorizonModel m = build_init_problem(gc, pr, st);
  if (m.tau_bar_total <= 0.0) return m;  // nothing to drive binary

  auto& p = m.prob;
  const int sv = p.var(p.add_free(1));
  const int gv = p.var(p.add_free(1));
  m.penalty_s = sv;
  m.penalty_g = gv;

  // gv = g^{(kappa)}(tau), linearized around tau_prev.
  {
    double rhs = 0.0;
    const int row = p.add_row(0.0);
    p.add_term(row, gv, 1.0);
    for (const auto& [key, v] : m.tau) {
      const double tk = std::max(0.0, tau_prev.at(key));
      rhs += -(cfg.L - 1.0) * std::pow(tk, cfg.L);
      p.add_term(row, v, -cfg.L * std::pow(tk, cfg.L - 1.0));
    }
    // row reads gv - L sum tk^{L-1} tau = -(L-1) sum tk^L
    p.set_rhs(row, rhs);
  }
  // trust region g^{(kappa)} >= trust_floor
  detail::ge_row(p, {{gv, 1.0}}, cfg.trust_floor);
  // s*gv >= 1 via SOC: ||(2, s-gv)|| <= s+gv
  {
    const int soc = p.add_soc(3);
    const int a = p.var(soc, 0), b = p.var(soc, 1), c = p.var(soc, 2);
    int row = p.add_row(0.0);
    p.add_term(row, a, 1.0);
    p.add_term(row, sv, -1.0);
    p.add_term(row, gv, -1.0);
    row = p.add_row(2.0);
    p.add_term(row, b, 1.0);
    row = p.add_row(0.0);
    p.add_term(row, c, 1.0);
    p.add_term(row, sv, -1.0);
    p.add_term(row, gv, 1.0);
  }
  p.add_obj(sv, cfg.mu);
  p.add_obj_constant(-cfg.mu / m.tau_bar_total);
  return m;
}

// Single-slot OPF with the station draw fixed (tau already decided); used
// by the snapshot stage and by the offline oracle.
inline HorizonModel build_slot_opf(const grid::GridCase& gc, const grid::ScenarioProfiles& pr,
                                   int t, const std::vector<double>& fixed_draw_pu) {
  if (static_cast<int>(fixed_draw_pu.size()) != gc.bus_count)
    throw BuildError("fixed draw must have one entry per bus");
  HorizonModel m = detail::make_skeleton(gc, pr, t, t, {}, false);
  m.fixed_draw_pu = {fixed_draw_pu};
  build_balance_rows(m, t, false);
  build_static_rows(m, t);
  build_objective(m);
  return m;
}

// The eigenvector-penalized snapshot problem: slot-t OPF plus
// lambda * (Trace W - w^H W w) with w the top eigenvector of w_prev.
inline HorizonModel build_snapshot_problem(const grid::GridCase& gc,
                                           const grid::ScenarioProfiles& pr, int t,
                                           const std::vector<double>& fixed_draw_pu,
                                           const Eigen::MatrixXcd& w_prev, double lambda) {
  HorizonModel m = build_slot_opf(gc, pr, t, fixed_draw_pu);
  const auto& emb = m.embed[0];
  auto [lmax, w] = hermitian::max_eigpair(w_prev);
  (void)lmax;
  const int n = gc.bus_count;
  const Eigen::MatrixXcd c = w * w.adjoint();
  for (int k = 0; k < n; ++k) {
    emb.add_re_obj(m.prob, k, k, lambda * (1.0 - c(k, k).real()));
    for (int j = k + 1; j < n; ++j) {
      emb.add_re_obj(m.prob, k, j, -2.0 * lambda * c(k, j).real());
      emb.add_im_obj(m.prob, k, j, -2.0 * lambda * c(k, j).imag());
    }
  }
  return m;
}

// Direct Eq.-(7)-style evaluation used to cross-check conic objectives.
inline double generation_cost(const grid::GridCase& gc, const std::vector<double>& pg_pu) {
  double f = 0.0;
  for (size_t gi = 0; gi < gc.generators.size(); ++gi)
    f += gc.generators[gi].cost_mw(pg_pu[gi] * gc.base_mva);
  return f;
}

inline double charging_cost(const grid::ScenarioProfiles& pr, int slot, double rate_kw,
                            double tau) {
  return pr.prices[slot] * tau * rate_kw * pr.slot_hours;
}

}  // namespace evgrid::builder
