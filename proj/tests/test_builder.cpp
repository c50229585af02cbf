#include <catch2/catch_amalgamated.hpp>

#include <evgrid/builder.hpp>

#include <random>

using namespace evgrid;
using Complex = grid::Complex;

static const std::string kData = EVGRID_DATA_DIR;

namespace {

// 2-bus case: generator at bus 0, load at bus 1, y = 1 - 10j (pu).
std::pair<grid::GridCase, grid::ScenarioProfiles> two_bus(double pl, double ql) {
  grid::GridCase gc;
  gc.bus_count = 2;
  gc.base_mva = 10.0;
  gc.v_min = {0.9, 0.9};
  gc.v_max = {1.1, 1.1};
  gc.lines.push_back({0, 1, 1.0 / Complex(1.0, -10.0), 0.3});
  grid::GeneratorSpec g;
  g.bus = 0;
  g.p_min = -2.0;
  g.p_max = 2.0;
  g.q_min = -2.0;
  g.q_max = 2.0;
  g.c2 = 0.0;
  g.c1 = 10.0;
  g.is_station = true;
  gc.generators.push_back(g);
  grid::ScenarioProfiles pr;
  pr.slot_count = 1;
  pr.slot_hours = 0.5;
  pr.load_shape = {1.0};
  pr.prices = {0.1};
  pr.base_loads = {{0.0, 0.0}, {pl, ql}};
  grid::validate(gc, pr);
  return {gc, pr};
}

// iteration-capped solves with converged residuals are still usable answers
bool solved(const conic::ConicProblem::Solution& s) {
  return s.status == conic::SolveStatus::Optimal ||
         (s.status == conic::SolveStatus::MaxIters && s.primal_residual <= 1e-6 &&
          s.dual_residual <= 1e-6 && std::abs(s.duality_gap) <= 1e-4);
}

}  // namespace

TEST_CASE("balance rows vanish at W = V V^H") {
  // pick a voltage profile, compute its exact injections, and pose the load
  // so that bus 1 balances with no generation; pinning W must then force
  // the bus-0 generator to the computed injection.
  std::vector<Complex> v{Complex(1.0, 0.0), std::polar(0.98, -0.02)};
  grid::GridCase gc0 = two_bus(0.0, 0.0).first;
  auto inj = grid::bus_injections(gc0, v);
  auto [gc, pr] = two_bus(-inj[1].real(), -inj[1].imag());

  auto m = builder::build_slot_opf(gc, pr, 0, {0.0, 0.0});
  const auto& emb = m.embed[0];
  Eigen::MatrixXcd w(2, 2);
  w << Complex(std::norm(v[0]), 0), v[0] * std::conj(v[1]), v[1] * std::conj(v[0]),
      Complex(std::norm(v[1]), 0);
  int r = m.prob.add_row(w(0, 0).real());
  emb.add_re(m.prob, r, 0, 0, 1.0);
  r = m.prob.add_row(w(1, 1).real());
  emb.add_re(m.prob, r, 1, 1, 1.0);
  r = m.prob.add_row(w(0, 1).real());
  emb.add_re(m.prob, r, 0, 1, 1.0);
  r = m.prob.add_row(w(0, 1).imag());
  emb.add_im(m.prob, r, 0, 1, 1.0);

  auto sol = m.prob.solve();
  REQUIRE(sol.status == conic::SolveStatus::Optimal);
  REQUIRE(sol.value(m.pg[0][0]) == Catch::Approx(inj[0].real()).margin(1e-8));
  REQUIRE(sol.value(m.qg[0][0]) == Catch::Approx(inj[0].imag()).margin(1e-8));
}

TEST_CASE("voltage box squares the limits") {
  auto [gc, pr] = two_bus(0.0, 0.0);
  gc.generators[0].c1 = 0.0;
  // make W_00 itself the objective: its floor is v_min^2
  auto m = builder::build_slot_opf(gc, pr, 0, {0.0, 0.0});
  m.embed[0].add_re_obj(m.prob, 0, 0, 1.0);
  auto sol = m.prob.solve();
  REQUIRE(sol.status == conic::SolveStatus::Optimal);
  REQUIRE(m.w_value(0, sol)(0, 0).real() == Catch::Approx(0.81).margin(2e-6));
}

TEST_CASE("angle limit binds symmetrically") {
  // maximizing Im W_01 with W pinned elsewhere runs into Im <= Re tan(theta)
  auto [gc, pr] = two_bus(0.0, 0.0);
  gc.lines[0].theta_max = M_PI / 4;  // tan = 1
  // second generator so the bus-1 balance rows do not pin Im W_01, and wide
  // power limits so only the angle cut can bind (b = -10 moves a lot of Q)
  grid::GeneratorSpec g2 = gc.generators[0];
  g2.bus = 1;
  gc.generators.push_back(g2);
  for (auto& g : gc.generators) {
    g.p_min = -8.0;
    g.p_max = 8.0;
    g.q_min = -8.0;
    g.q_max = 8.0;
  }
  auto m = builder::build_slot_opf(gc, pr, 0, {0.0, 0.0});
  const auto& emb = m.embed[0];
  int r = m.prob.add_row(1.0);
  emb.add_re(m.prob, r, 0, 0, 1.0);
  r = m.prob.add_row(1.0);
  emb.add_re(m.prob, r, 1, 1, 1.0);
  r = m.prob.add_row(0.5);
  emb.add_re(m.prob, r, 0, 1, 1.0);
  for (double sgn : {1.0, -1.0}) {
    auto mm = m;
    mm.embed[0].add_im_obj(mm.prob, 0, 1, sgn);  // minimize +/- Im W_01
    auto sol = mm.prob.solve();
    REQUIRE(sol.status == conic::SolveStatus::Optimal);
    REQUIRE(std::abs(mm.w_value(0, sol)(0, 1).imag()) <= 0.5 + 1e-6);
  }
}

TEST_CASE("tau rows force the unique schedule") {
  auto [gc, pr] = grid::load_case(kData + "/case4_demo.json");
  // window of exactly tau_bar slots: every tau pinned to 1
  std::vector<fleet::PevRecord> recs{{0, 0, 0, 1, 60.0, 0.25, 50.0, 0.9}};  // tau_bar = 2
  fleet::FleetState st(recs);
  auto m = builder::build_init_problem(gc, pr, st);
  REQUIRE(m.tau.size() == 2);
  auto sol = m.prob.solve();
  REQUIRE(solved(sol));
  REQUIRE(m.tau_value(0, 0, sol) == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(m.tau_value(0, 1, sol) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("infeasible demand is rejected before solving") {
  auto [gc, pr] = grid::load_case(kData + "/case4_demo.json");
  std::vector<fleet::PevRecord> recs{{0, 0, 0, 3, 60.0, 0.25, 50.0, 0.9}};
  fleet::FleetState st(recs);
  st.clock = 3;  // one slot left, two needed
  REQUIRE_THROWS_AS(builder::active_pevs(st, pr.slot_hours), builder::InfeasibleDemand);
}

TEST_CASE("conic objective equals the direct cost evaluation") {
  auto [gc, pr] = grid::load_case(kData + "/case4_demo.json");
  auto recs = fleet::load_fleet(kData + "/fleet3.json", gc.station_buses(), pr.slot_hours,
                                pr.slot_count);
  fleet::FleetState st(recs);
  auto m = builder::build_init_problem(gc, pr, st);
  auto sol = m.prob.solve();
  REQUIRE(sol.status == conic::SolveStatus::Optimal);
  double direct = 0.0;
  for (int t = m.t0; t <= m.t1; ++t) direct += builder::generation_cost(gc, m.pg_value(t, sol));
  for (const auto& [key, v] : m.tau)
    direct += builder::charging_cost(pr, key.second, 50.0, sol.value(v));
  REQUIRE(sol.objective == Catch::Approx(direct).epsilon(1e-6));
}

TEST_CASE("overloaded case is infeasible") {
  auto [gc, pr] = grid::load_case(kData + "/case4_overload.json");
  auto m = builder::build_slot_opf(gc, pr, 2, {0.0, 0.0, 0.0, 0.0});
  auto sol = m.prob.solve();
  REQUIRE(sol.status == conic::SolveStatus::Infeasible);
}

TEST_CASE("surrogate touches g at the expansion point and minorizes it") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double L = 1.5;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<double> tk(n), tau(n);
    for (int i = 0; i < n; ++i) {
      tk[i] = u(rng);
      tau[i] = u(rng);
    }
    double g_tau = 0, g_tk = 0;
    for (int i = 0; i < n; ++i) {
      g_tau += std::pow(tau[i], L);
      g_tk += std::pow(tk[i], L);
    }
    REQUIRE(builder::surrogate_value(tk, tau, L) <= g_tau + 1e-10);
    REQUIRE(std::abs(builder::surrogate_value(tk, tk, L) - g_tk) <= 1e-10);
  }
}

TEST_CASE("snapshot penalty vanishes on its own rank-one point") {
  Eigen::VectorXcd v(2);
  v << Complex(1.0, 0.0), Complex(0.6, -0.8);
  Eigen::MatrixXcd w = v * v.adjoint();
  auto [lmax, wmax] = hermitian::max_eigpair(w);
  const Complex quad = (wmax.adjoint() * w * wmax)(0, 0);
  REQUIRE(w.real().trace() - quad.real() == Catch::Approx(0.0).margin(1e-12));
  // scaled identity: penalty equals the subdominant eigenvalue
  Eigen::MatrixXcd id = 2.0 * Eigen::MatrixXcd::Identity(2, 2);
  auto [l2, w2] = hermitian::max_eigpair(id);
  const Complex q2 = (w2.adjoint() * id * w2)(0, 0);
  REQUIRE(id.real().trace() - q2.real() == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("penalized subproblem reproduces g at the expansion point") {
  auto [gc, pr] = grid::load_case(kData + "/case4_demo.json");
  std::vector<fleet::PevRecord> recs{{0, 0, 0, 2, 60.0, 0.25, 50.0, 0.9}};  // tau_bar 2, 3 slots
  fleet::FleetState st(recs);
  std::map<std::pair<int, int>, double> tk{{{0, 0}, 0.7}, {{0, 1}, 0.7}, {{0, 2}, 0.6}};
  builder::PenaltyConfig cfg;
  auto m = builder::build_penalized_subproblem(gc, pr, st, tk, cfg);
  REQUIRE(m.penalty_s >= 0);
  REQUIRE(m.penalty_g >= 0);
  auto sol = m.prob.solve();
  REQUIRE(solved(sol));
  // the modeled g variable equals the surrogate formula at the solution tau
  std::vector<double> tkv, tauv;
  for (const auto& [key, var] : m.tau) {
    tkv.push_back(tk.at(key));
    tauv.push_back(sol.value(var));
  }
  REQUIRE(sol.value(m.penalty_g) ==
          Catch::Approx(builder::surrogate_value(tkv, tauv, cfg.L)).margin(1e-6));
  // epigraph is tight at the optimum: s = 1/g
  REQUIRE(sol.value(m.penalty_s) * sol.value(m.penalty_g) == Catch::Approx(1.0).margin(1e-6));
}
