#pragma once

// Analytic conic problems with closed-form optima, shared between the unit
// suite and the acceptance gate.

#include <evgrid/conic.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace battery {

using evgrid::conic::ConicProblem;
using evgrid::conic::SolveStatus;

struct Case {
  std::string name;
  std::function<ConicProblem()> build;
  SolveStatus status = SolveStatus::Optimal;
  double objective = 0.0;
};

inline std::vector<Case> cases() {
  std::vector<Case> out;
  const double rt2 = std::sqrt(2.0);

  out.push_back({"lp_min_x_ge_1", [] {
    ConicProblem p;
    const int x = p.var(p.add_nonneg(1));
    const int s = p.var(p.add_nonneg(1));
    const int r = p.add_row(1.0);
    p.add_term(r, x, 1.0);
    p.add_term(r, s, -1.0);
    p.add_obj(x, 1.0);
    return p;
  }, SolveStatus::Optimal, 1.0});

  out.push_back({"lp_simplex_2d", [] {
    ConicProblem p;
    const int b = p.add_nonneg(2);
    const int r = p.add_row(1.0);
    p.add_term(r, p.var(b, 0), 1.0);
    p.add_term(r, p.var(b, 1), 1.0);
    p.add_obj(p.var(b, 0), 2.0);
    p.add_obj(p.var(b, 1), 3.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  out.push_back({"lp_upper_box", [] {
    ConicProblem p;
    const int x = p.var(p.add_free(1));
    const int s = p.var(p.add_nonneg(1));
    const int r = p.add_row(5.0);  // x + s = 5 -> x <= 5
    p.add_term(r, x, 1.0);
    p.add_term(r, s, 1.0);
    p.add_obj(x, -1.0);
    return p;
  }, SolveStatus::Optimal, -5.0});

  out.push_back({"lp_weighted_knapsack", [] {
    ConicProblem p;
    const int b = p.add_nonneg(3);
    const int r = p.add_row(6.0);
    p.add_term(r, p.var(b, 0), 1.0);
    p.add_term(r, p.var(b, 1), 2.0);
    p.add_term(r, p.var(b, 2), 3.0);
    p.add_obj(p.var(b, 0), 3.0);
    p.add_obj(p.var(b, 1), 2.0);
    p.add_obj(p.var(b, 2), 1.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  out.push_back({"lp_degenerate_face", [] {
    ConicProblem p;
    const int b = p.add_nonneg(2);
    const int r = p.add_row(1.0);
    p.add_term(r, p.var(b, 0), 1.0);
    p.add_term(r, p.var(b, 1), 1.0);
    p.add_obj(p.var(b, 0), 1.0);
    p.add_obj(p.var(b, 1), 1.0);
    return p;
  }, SolveStatus::Optimal, 1.0});

  out.push_back({"lp_infeasible", [] {
    ConicProblem p;
    const int x = p.var(p.add_nonneg(1));
    const int s = p.var(p.add_nonneg(1));
    int r = p.add_row(1.0);  // x - s = 1 -> x >= 1
    p.add_term(r, x, 1.0);
    p.add_term(r, s, -1.0);
    const int s2 = p.var(p.add_nonneg(1));
    r = p.add_row(0.0);  // x + s2 = 0 -> x <= 0
    p.add_term(r, x, 1.0);
    p.add_term(r, s2, 1.0);
    p.add_obj(x, 1.0);
    return p;
  }, SolveStatus::Infeasible, 0.0});

  out.push_back({"lp_unbounded", [] {
    ConicProblem p;
    const int x = p.var(p.add_nonneg(1));
    p.add_obj(x, -1.0);
    return p;
  }, SolveStatus::Unbounded, 0.0});

  out.push_back({"lp_shifted_objective", [] {
    ConicProblem p;
    const int x = p.var(p.add_free(1));
    const int r = p.add_row(4.0);
    p.add_term(r, x, 1.0);
    p.add_obj(x, 1.0);
    p.add_obj_constant(2.5);
    return p;
  }, SolveStatus::Optimal, 6.5});

  out.push_back({"soc_pythagoras", [] {
    ConicProblem p;
    const int q = p.add_soc(3);
    int r = p.add_row(3.0);
    p.add_term(r, p.var(q, 1), 1.0);
    r = p.add_row(4.0);
    p.add_term(r, p.var(q, 2), 1.0);
    p.add_obj(p.var(q, 0), 1.0);
    return p;
  }, SolveStatus::Optimal, 5.0});

  out.push_back({"soc_disk_support", [&] {
    ConicProblem p;
    const int q = p.add_soc(3);
    const int r = p.add_row(1.0);  // radius 1
    p.add_term(r, p.var(q, 0), 1.0);
    p.add_obj(p.var(q, 1), 1.0);
    p.add_obj(p.var(q, 2), 1.0);
    return p;
  }, SolveStatus::Optimal, -rt2});

  out.push_back({"soc_hyperbolic", [] {
    ConicProblem p;
    // s*g >= 1 with g = 2: min s = 1/2
    const int s = p.var(p.add_free(1));
    const int g = p.var(p.add_free(1));
    const int q = p.add_soc(3);
    int r = p.add_row(2.0);
    p.add_term(r, g, 1.0);
    r = p.add_row(0.0);
    p.add_term(r, p.var(q, 0), 1.0);
    p.add_term(r, s, -1.0);
    p.add_term(r, g, -1.0);
    r = p.add_row(2.0);
    p.add_term(r, p.var(q, 1), 1.0);
    r = p.add_row(0.0);
    p.add_term(r, p.var(q, 2), 1.0);
    p.add_term(r, s, -1.0);
    p.add_term(r, g, 1.0);
    p.add_obj(s, 1.0);
    return p;
  }, SolveStatus::Optimal, 0.5});

  out.push_back({"soc_square_epigraph", [] {
    ConicProblem p;
    // t >= x^2 at x = 1.5 via (t+1, 2x, t-1)
    const int t = p.var(p.add_free(1));
    const int x = p.var(p.add_free(1));
    const int q = p.add_soc(3);
    int r = p.add_row(1.5);
    p.add_term(r, x, 1.0);
    r = p.add_row(1.0);
    p.add_term(r, p.var(q, 0), 1.0);
    p.add_term(r, t, -1.0);
    r = p.add_row(0.0);
    p.add_term(r, p.var(q, 1), 1.0);
    p.add_term(r, x, -2.0);
    r = p.add_row(-1.0);
    p.add_term(r, p.var(q, 2), 1.0);
    p.add_term(r, t, -1.0);
    p.add_obj(t, 1.0);
    return p;
  }, SolveStatus::Optimal, 2.25});

  out.push_back({"soc_abs_value", [] {
    ConicProblem p;
    const int q = p.add_soc(2);
    const int r = p.add_row(2.0);
    p.add_term(r, p.var(q, 1), 1.0);
    p.add_obj(p.var(q, 0), 1.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  out.push_back({"soc_shifted_center", [] {
    ConicProblem p;
    // min t, ||(u,v)|| <= t, u = 0-1, v = 0-2 -> t = sqrt(5)
    const int q = p.add_soc(3);
    int r = p.add_row(-1.0);
    p.add_term(r, p.var(q, 1), 1.0);
    r = p.add_row(-2.0);
    p.add_term(r, p.var(q, 2), 1.0);
    p.add_obj(p.var(q, 0), 1.0);
    return p;
  }, SolveStatus::Optimal, std::sqrt(5.0)});

  out.push_back({"soc_qp_min", [] {
    ConicProblem p;
    // min x^2 - 2x = (x-1)^2 - 1 -> -1
    const int t = p.var(p.add_free(1));
    const int x = p.var(p.add_free(1));
    const int q = p.add_soc(3);
    int r = p.add_row(1.0);
    p.add_term(r, p.var(q, 0), 1.0);
    p.add_term(r, t, -1.0);
    r = p.add_row(0.0);
    p.add_term(r, p.var(q, 1), 1.0);
    p.add_term(r, x, -2.0);
    r = p.add_row(-1.0);
    p.add_term(r, p.var(q, 2), 1.0);
    p.add_term(r, t, -1.0);
    p.add_obj(t, 1.0);
    p.add_obj(x, -2.0);
    return p;
  }, SolveStatus::Optimal, -1.0});

  out.push_back({"psd_amgm_offdiag", [] {
    ConicProblem p;
    const int X = p.add_psd(2);
    const int r = p.add_row(1.0);
    p.add_psd_term(r, X, 0, 1, 1.0);
    p.add_obj_psd(X, 0, 0, 1.0);
    p.add_obj_psd(X, 1, 1, 1.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  out.push_back({"psd_lambda_max", [] {
    ConicProblem p;
    // min t s.t. tI - diag(1,3) >= 0
    const int t = p.var(p.add_free(1));
    const int X = p.add_psd(2);
    int r = p.add_row(-1.0);
    p.add_psd_term(r, X, 0, 0, 1.0);
    p.add_term(r, t, -1.0);
    r = p.add_row(-3.0);
    p.add_psd_term(r, X, 1, 1, 1.0);
    p.add_term(r, t, -1.0);
    r = p.add_row(0.0);
    p.add_psd_term(r, X, 0, 1, 1.0);
    p.add_obj(t, 1.0);
    return p;
  }, SolveStatus::Optimal, 3.0});

  out.push_back({"psd_min_eig_diag", [] {
    ConicProblem p;
    const int X = p.add_psd(2);
    const int r = p.add_row(1.0);
    p.add_psd_term(r, X, 0, 0, 1.0);
    p.add_psd_term(r, X, 1, 1, 1.0);
    p.add_obj_psd(X, 0, 0, 2.0);
    p.add_obj_psd(X, 1, 1, 5.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  out.push_back({"psd_min_eig_coupled", [] {
    ConicProblem p;
    // <C, X>, C = [[2,1],[1,2]], trace X = 1 -> min eig = 1
    const int X = p.add_psd(2);
    const int r = p.add_row(1.0);
    p.add_psd_term(r, X, 0, 0, 1.0);
    p.add_psd_term(r, X, 1, 1, 1.0);
    p.add_obj_psd(X, 0, 0, 2.0);
    p.add_obj_psd(X, 1, 1, 2.0);
    p.add_obj_psd(X, 0, 1, 2.0);  // 2 * X01 counts both symmetric entries
    return p;
  }, SolveStatus::Optimal, 1.0});

  out.push_back({"psd_infeasible_diag", [] {
    ConicProblem p;
    const int X = p.add_psd(2);
    const int r = p.add_row(-1.0);
    p.add_psd_term(r, X, 0, 0, 1.0);
    p.add_obj_psd(X, 1, 1, 1.0);
    return p;
  }, SolveStatus::Infeasible, 0.0});

  out.push_back({"psd_all_ones_3x3", [] {
    ConicProblem p;
    const int X = p.add_psd(3);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const int r = p.add_row(1.0);
        p.add_psd_term(r, X, i, j, 1.0);
      }
    for (int i = 0; i < 3; ++i) p.add_obj_psd(X, i, i, 1.0);
    return p;
  }, SolveStatus::Optimal, 3.0});

  out.push_back({"mixed_lp_soc", [] {
    ConicProblem p;
    const int x = p.var(p.add_free(1));
    const int s = p.var(p.add_nonneg(1));
    int r = p.add_row(0.5);  // x - s = 0.5 -> x >= 0.5
    p.add_term(r, x, 1.0);
    p.add_term(r, s, -1.0);
    const int q = p.add_soc(2);
    r = p.add_row(1.0);
    p.add_term(r, p.var(q, 1), 1.0);
    p.add_obj(x, 1.0);
    p.add_obj(p.var(q, 0), 1.0);
    return p;
  }, SolveStatus::Optimal, 1.5});

  out.push_back({"mixed_soc_psd", [] {
    ConicProblem p;
    const int X = p.add_psd(2);
    int r = p.add_row(1.0);
    p.add_psd_term(r, X, 0, 1, 1.0);
    const int q = p.add_soc(2);
    r = p.add_row(1.0);
    p.add_term(r, p.var(q, 1), 1.0);
    p.add_obj_psd(X, 0, 0, 1.0);
    p.add_obj_psd(X, 1, 1, 1.0);
    p.add_obj(p.var(q, 0), 1.0);
    return p;
  }, SolveStatus::Optimal, 3.0});

  out.push_back({"lp_transport_2x2", [] {
    ConicProblem p;
    // supplies (1,2), demands (2,1), costs [[1,3],[2,1]] -> x00=1,x10=1,x11=1 -> 4
    const int b = p.add_nonneg(4);  // x00 x01 x10 x11
    int r = p.add_row(1.0);
    p.add_term(r, p.var(b, 0), 1.0);
    p.add_term(r, p.var(b, 1), 1.0);
    r = p.add_row(2.0);
    p.add_term(r, p.var(b, 2), 1.0);
    p.add_term(r, p.var(b, 3), 1.0);
    r = p.add_row(2.0);
    p.add_term(r, p.var(b, 0), 1.0);
    p.add_term(r, p.var(b, 2), 1.0);
    r = p.add_row(1.0);
    p.add_term(r, p.var(b, 1), 1.0);
    p.add_term(r, p.var(b, 3), 1.0);
    p.add_obj(p.var(b, 0), 1.0);
    p.add_obj(p.var(b, 1), 3.0);
    p.add_obj(p.var(b, 2), 2.0);
    p.add_obj(p.var(b, 3), 1.0);
    return p;
  }, SolveStatus::Optimal, 4.0});

  out.push_back({"soc_sum_of_norms", [&] {
    ConicProblem p;
    // min ||(x-1)|| + ||(x+1)|| over scalar x -> 2 (any x in [-1,1])
    const int x = p.var(p.add_free(1));
    const int q1 = p.add_soc(2);
    const int q2 = p.add_soc(2);
    int r = p.add_row(-1.0);
    p.add_term(r, p.var(q1, 1), 1.0);
    p.add_term(r, x, -1.0);
    r = p.add_row(1.0);
    p.add_term(r, p.var(q2, 1), 1.0);
    p.add_term(r, x, -1.0);
    p.add_obj(p.var(q1, 0), 1.0);
    p.add_obj(p.var(q2, 0), 1.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  out.push_back({"psd_completion_corner", [] {
    ConicProblem p;
    // min X11 s.t. X00 = 1, X01 = 0.6 -> X11 = 0.36
    const int X = p.add_psd(2);
    int r = p.add_row(1.0);
    p.add_psd_term(r, X, 0, 0, 1.0);
    r = p.add_row(0.6);
    p.add_psd_term(r, X, 0, 1, 1.0);
    p.add_obj_psd(X, 1, 1, 1.0);
    return p;
  }, SolveStatus::Optimal, 0.36});

  out.push_back({"free_var_equality", [] {
    ConicProblem p;
    const int x = p.var(p.add_free(1));
    const int r = p.add_row(4.0);
    p.add_term(r, x, 1.0);
    p.add_obj(x, 1.0);
    return p;
  }, SolveStatus::Optimal, 4.0});

  out.push_back({"lp_two_blocks_permuted", [] {
    // same as lp_simplex_2d with the block/objective roles swapped
    ConicProblem p;
    const int b1 = p.add_nonneg(1);
    const int b2 = p.add_nonneg(1);
    const int r = p.add_row(1.0);
    p.add_term(r, p.var(b2), 1.0);
    p.add_term(r, p.var(b1), 1.0);
    p.add_obj(p.var(b2), 3.0);
    p.add_obj(p.var(b1), 2.0);
    return p;
  }, SolveStatus::Optimal, 2.0});

  return out;
}

}  // namespace battery
