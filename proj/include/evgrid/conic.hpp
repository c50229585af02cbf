#pragma once

// Dense primal-dual interior-point solver for cone programs with
// nonnegative, second-order and real-symmetric PSD blocks.
//
// Internal standard form (after compiling a ConicProblem):
//   minimize    c'x
//   subject to  A x = b,         x free
//               G x + s = h,     s in K
// solved with Nesterov-Todd scaling on a homogeneous self-dual
// embedding, so primal/dual infeasibility is certified rather than
// guessed from divergence.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evgrid::conic {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730951;

inline int svec_dim(int order) { return order * (order + 1) / 2; }

// Column-major lower-triangle svec with sqrt(2)-scaled off-diagonals,
// so that svec(U)'svec(V) = <U,V>.
inline VectorXd svec(const MatrixXd& m) {
  const int p = static_cast<int>(m.rows());
  VectorXd v(svec_dim(p));
  int idx = 0;
  for (int j = 0; j < p; ++j) {
    v[idx++] = m(j, j);
    for (int i = j + 1; i < p; ++i) v[idx++] = kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  }
  return v;
}

inline MatrixXd smat(const Eigen::Ref<const VectorXd>& v, int p) {
  MatrixXd m(p, p);
  int idx = 0;
  for (int j = 0; j < p; ++j) {
    m(j, j) = v[idx++];
    for (int i = j + 1; i < p; ++i) {
      m(i, j) = m(j, i) = v[idx++] / kSqrt2;
    }
  }
  return m;
}

// Flat index of entry (i,j), i>=j, inside the svec of an order-p block.
inline int svec_index(int i, int j, int p) {
  if (i < j) std::swap(i, j);
  return j * p - j * (j - 1) / 2 + (i - j);
}

struct ConeLayout {
  int nonneg = 0;
  std::vector<int> soc;   // dims, each >= 2
  std::vector<int> psd;   // matrix orders, each >= 1

  int dim() const {
    int m = nonneg;
    for (int q : soc) m += q;
    for (int p : psd) m += svec_dim(p);
    return m;
  }
  // Barrier degree: one per nonneg entry, one per SOC block, order per PSD block.
  int degree() const {
    int d = nonneg + static_cast<int>(soc.size());
    for (int p : psd) d += p;
    return d;
  }
  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(dim());
    int off = 0;
    e.head(nonneg).setOnes();
    off += nonneg;
    for (int q : soc) {
      e[off] = 1.0;
      off += q;
    }
    for (int p : psd) {
      e.segment(off, svec_dim(p)) = svec(MatrixXd::Identity(p, p));
      off += svec_dim(p);
    }
    return e;
  }
};

namespace detail {

// Smallest spectral value of a cone element (per-block Jordan eigenvalue).
inline double min_eig(const ConeLayout& k, const VectorXd& u) {
  double me = kInf;
  int off = 0;
  for (int i = 0; i < k.nonneg; ++i) me = std::min(me, u[off + i]);
  off += k.nonneg;
  for (int q : k.soc) {
    me = std::min(me, u[off] - u.segment(off + 1, q - 1).norm());
    off += q;
  }
  for (int p : k.psd) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(smat(u.segment(off, svec_dim(p)), p),
                                               Eigen::EigenvaluesOnly);
    me = std::min(me, es.eigenvalues().minCoeff());
    off += svec_dim(p);
  }
  return me;
}

// Largest a such that u + t*d stays in the cone for all t in [0,a];
// u must be interior.
inline double max_step(const ConeLayout& k, const VectorXd& u, const VectorXd& d) {
  double amax = kInf;
  int off = 0;
  for (int i = 0; i < k.nonneg; ++i) {
    if (d[off + i] < 0.0) amax = std::min(amax, -u[off + i] / d[off + i]);
  }
  off += k.nonneg;
  for (int q : k.soc) {
    const double u0 = u[off], d0 = d[off];
    const auto u1 = u.segment(off + 1, q - 1);
    const auto d1 = d.segment(off + 1, q - 1);
    // boundary where (u0+t d0)^2 = |u1+t d1|^2 with u0+t d0 >= 0
    const double a = d0 * d0 - d1.squaredNorm();
    const double b = 2.0 * (u0 * d0 - u1.dot(d1));
    const double c = u0 * u0 - u1.squaredNorm();
    double root = kInf;
    const double disc = b * b - 4.0 * a * c;
    if (std::abs(a) < 1e-300) {
      if (b < 0.0) root = -c / b;
    } else if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double r1 = (-b - sq) / (2.0 * a);
      const double r2 = (-b + sq) / (2.0 * a);
      for (double r : {r1, r2})
        if (r > 0.0) root = std::min(root, r);
    }
    if (d0 < 0.0) root = std::min(root, -u0 / d0);
    amax = std::min(amax, root);
    off += q;
  }
  for (int p : k.psd) {
    const MatrixXd U = smat(u.segment(off, svec_dim(p)), p);
    const MatrixXd D = smat(d.segment(off, svec_dim(p)), p);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(U);
    const VectorXd ev = es.eigenvalues();
    const MatrixXd Q = es.eigenvectors();
    VectorXd isq(p);
    for (int i = 0; i < p; ++i) isq[i] = 1.0 / std::sqrt(std::max(ev[i], 1e-300));
    const MatrixXd Dn = isq.asDiagonal() * (Q.transpose() * D * Q) * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es2(Dn, Eigen::EigenvaluesOnly);
    const double g = es2.eigenvalues().minCoeff();
    if (g < 0.0) amax = std::min(amax, -1.0 / g);
    off += svec_dim(p);
  }
  return amax;
}

// Nesterov-Todd scaling point for (s, z), both interior.
struct NTScaling {
  VectorXd lin_w;                  // nonneg: w_i = sqrt(s_i/z_i)
  struct Soc {
    double eta;
    VectorXd wbar;                 // unit hyperbolic vector
  };
  std::vector<Soc> soc;
  struct Psd {
    MatrixXd r, rinv;
    VectorXd lam;                  // scaled eigenvalues
  };
  std::vector<Psd> psd;
  VectorXd lambda;                 // W z = W^{-T} s
  bool ok = true;
};

inline NTScaling compute_scaling(const ConeLayout& k, const VectorXd& s, const VectorXd& z) {
  NTScaling w;
  w.lambda.resize(k.dim());
  int off = 0;
  w.lin_w.resize(k.nonneg);
  for (int i = 0; i < k.nonneg; ++i) {
    if (s[i] <= 0.0 || z[i] <= 0.0) { w.ok = false; return w; }
    w.lin_w[i] = std::sqrt(s[i] / z[i]);
    w.lambda[i] = std::sqrt(s[i] * z[i]);
  }
  off = k.nonneg;
  for (int q : k.soc) {
    const auto sb = s.segment(off, q);
    const auto zb = z.segment(off, q);
    const double rs = sb[0] * sb[0] - sb.tail(q - 1).squaredNorm();
    const double rz = zb[0] * zb[0] - zb.tail(q - 1).squaredNorm();
    if (rs <= 0.0 || rz <= 0.0) { w.ok = false; return w; }
    const VectorXd sbar = sb / std::sqrt(rs);
    const VectorXd zbar = zb / std::sqrt(rz);
    const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
    NTScaling::Soc sc;
    sc.eta = std::pow(rs / rz, 0.25);
    VectorXd wpt(q);  // NT scaling point, unit hyperbolic norm
    wpt[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
    wpt.tail(q - 1) = (sbar.tail(q - 1) - zbar.tail(q - 1)) / (2.0 * gamma);
    // W = eta * P(wpt^{1/2}) = eta (2 v v' - J), v the Jordan square root
    sc.wbar = wpt;
    sc.wbar[0] += 1.0;
    sc.wbar /= std::sqrt(2.0 * (wpt[0] + 1.0));
    // lambda = W z
    const double zj0 = zb[0];
    const VectorXd zj1 = zb.tail(q - 1);
    const double wz = sc.wbar[0] * zj0 + sc.wbar.tail(q - 1).dot(zj1);
    VectorXd lam(q);
    lam[0] = sc.eta * (2.0 * sc.wbar[0] * wz - zj0);
    lam.tail(q - 1) = sc.eta * (2.0 * sc.wbar.tail(q - 1) * wz + zj1);
    w.lambda.segment(off, q) = lam;
    w.soc.push_back(std::move(sc));
    off += q;
  }
  for (int p : k.psd) {
    const int sd = svec_dim(p);
    const MatrixXd S = smat(s.segment(off, sd), p);
    const MatrixXd Z = smat(z.segment(off, sd), p);
    Eigen::LLT<MatrixXd> ls(S), lz(Z);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) { w.ok = false; return w; }
    const MatrixXd Ls = ls.matrixL();
    const MatrixXd Lz = lz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd sig = svd.singularValues();
    if (sig.minCoeff() <= 0.0) { w.ok = false; return w; }
    VectorXd isq(p), sq(p);
    for (int i = 0; i < p; ++i) {
      sq[i] = std::sqrt(sig[i]);
      isq[i] = 1.0 / sq[i];
    }
    NTScaling::Psd ps;
    ps.r = Ls * svd.matrixV() * isq.asDiagonal();
    // r^{-1} = diag(sq) V' Ls^{-1}
    ps.rinv = sq.asDiagonal() * svd.matrixV().transpose() *
              Ls.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(p, p));
    ps.lam = sig;
    w.lambda.segment(off, sd) = svec(MatrixXd(sig.asDiagonal()));
    w.psd.push_back(std::move(ps));
    off += sd;
  }
  return w;
}

enum class ScaleOp : std::uint8_t { W, Wt, WtInv, WtW, WtWInv };

// Apply the NT scaling (or a derived operator) blockwise to v.
inline VectorXd apply_scaling(const ConeLayout& k, const NTScaling& w, ScaleOp op,
                              const VectorXd& v) {
  VectorXd out(v.size());
  for (int i = 0; i < k.nonneg; ++i) {
    const double wi = w.lin_w[i];
    double f = wi;
    switch (op) {
      case ScaleOp::W:
      case ScaleOp::Wt: f = wi; break;
      case ScaleOp::WtInv: f = 1.0 / wi; break;
      case ScaleOp::WtW: f = wi * wi; break;
      case ScaleOp::WtWInv: f = 1.0 / (wi * wi); break;
    }
    out[i] = f * v[i];
  }
  int off = k.nonneg;
  for (size_t bi = 0; bi < k.soc.size(); ++bi) {
    const int q = k.soc[bi];
    const auto& sc = w.soc[bi];
    auto mul = [&](const VectorXd& u, bool inverse) {
      // W u = eta (2 wbar wbar' - J) u ; W^{-1} u = (1/eta)(2 (J wbar)(J wbar)' - J) u
      VectorXd r(q);
      if (!inverse) {
        const double d = sc.wbar.dot(u);
        r = 2.0 * d * sc.wbar;
        r[0] -= u[0];
        r.tail(q - 1) += u.tail(q - 1);
        r *= sc.eta;
      } else {
        VectorXd jw = sc.wbar;
        jw.tail(q - 1) = -jw.tail(q - 1);
        const double d = jw.dot(u);
        r = 2.0 * d * jw;
        r[0] -= u[0];
        r.tail(q - 1) += u.tail(q - 1);
        r /= sc.eta;
      }
      return r;
    };
    const VectorXd u = v.segment(off, q);
    VectorXd r;
    switch (op) {
      case ScaleOp::W:
      case ScaleOp::Wt: r = mul(u, false); break;
      case ScaleOp::WtInv: r = mul(u, true); break;
      case ScaleOp::WtW: r = mul(mul(u, false), false); break;
      case ScaleOp::WtWInv: r = mul(mul(u, true), true); break;
    }
    out.segment(off, q) = r;
    off += q;
  }
  for (size_t bi = 0; bi < k.psd.size(); ++bi) {
    const int p = k.psd[bi];
    const int sd = svec_dim(p);
    const auto& ps = w.psd[bi];
    const MatrixXd U = smat(v.segment(off, sd), p);
    MatrixXd r;
    switch (op) {
      case ScaleOp::W: r = ps.r.transpose() * U * ps.r; break;
      case ScaleOp::Wt: r = ps.r * U * ps.r.transpose(); break;
      case ScaleOp::WtInv: r = ps.rinv * U * ps.rinv.transpose(); break;
      case ScaleOp::WtW: {
        const MatrixXd rr = ps.r * ps.r.transpose();
        r = rr * U * rr;
        break;
      }
      case ScaleOp::WtWInv: {
        const MatrixXd ri = ps.rinv.transpose() * ps.rinv;
        r = ri * U * ri;
        break;
      }
    }
    out.segment(off, sd) = svec(0.5 * (r + r.transpose()));
    off += sd;
  }
  return out;
}

// Jordan product u o v.
inline VectorXd jordan(const ConeLayout& k, const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  out.head(k.nonneg) = u.head(k.nonneg).cwiseProduct(v.head(k.nonneg));
  int off = k.nonneg;
  for (int q : k.soc) {
    out[off] = u.segment(off, q).dot(v.segment(off, q));
    out.segment(off + 1, q - 1) =
        u[off] * v.segment(off + 1, q - 1) + v[off] * u.segment(off + 1, q - 1);
    off += q;
  }
  for (int p : k.psd) {
    const int sd = svec_dim(p);
    const MatrixXd U = smat(u.segment(off, sd), p);
    const MatrixXd V = smat(v.segment(off, sd), p);
    out.segment(off, sd) = svec(0.5 * (U * V + V * U));
    off += sd;
  }
  return out;
}

// Solve lam o x = v for x where lam is the scaled point (diagonal in PSD blocks).
inline VectorXd jordan_div(const ConeLayout& k, const NTScaling& w, const VectorXd& v) {
  const VectorXd& lam = w.lambda;
  VectorXd out(v.size());
  out.head(k.nonneg) = v.head(k.nonneg).cwiseQuotient(lam.head(k.nonneg));
  int off = k.nonneg;
  for (int q : k.soc) {
    const double l0 = lam[off];
    const auto l1 = lam.segment(off + 1, q - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * v[off] - l1.dot(v.segment(off + 1, q - 1))) / det;
    out[off] = x0;
    out.segment(off + 1, q - 1) = (v.segment(off + 1, q - 1) - x0 * l1) / l0;
    off += q;
  }
  for (size_t bi = 0; bi < k.psd.size(); ++bi) {
    const int p = k.psd[bi];
    const int sd = svec_dim(p);
    const VectorXd& d = w.psd[bi].lam;
    MatrixXd V = smat(v.segment(off, sd), p);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < p; ++i) V(i, j) *= 2.0 / (d[i] + d[j]);
    out.segment(off, sd) = svec(V);
    off += sd;
  }
  return out;
}

}  // namespace detail

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIters, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct SolverOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iters = 200;
  bool verbose = false;
};

struct ConelpResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  VectorXd x, y, z, s;
  double primal_obj = 0.0, dual_obj = 0.0;
  double duality_gap = 0.0, rel_gap = 0.0;
  double primal_residual = 0.0, dual_residual = 0.0;
  int iterations = 0;
};

// Core HSD interior-point loop.
inline ConelpResult conelp(const VectorXd& c, const MatrixXd& A, const VectorXd& b,
                           const MatrixXd& G, const VectorXd& h, const ConeLayout& cone,
                           const SolverOptions& opts = {}) {
  using namespace detail;
  const int n = static_cast<int>(c.size());
  const int p = static_cast<int>(b.size());
  const int m = cone.dim();
  if (G.rows() != m || G.cols() != n || A.cols() != n || A.rows() != p || h.size() != m)
    throw std::invalid_argument("conelp: dimension mismatch");

  ConelpResult res;
  const VectorXd e = cone.identity();
  const double degree = cone.degree() + 1;

  Eigen::PartialPivLU<MatrixXd> kkt_lu;
  MatrixXd DG(m, n);

  // Factor the reduced KKT matrix [G'DG  A'; A  0] for the current D = (W'W)^{-1}.
  auto factor = [&](const NTScaling* w) {
    if (w) {
      for (int j = 0; j < n; ++j) DG.col(j) = apply_scaling(cone, *w, ScaleOp::WtWInv, G.col(j));
    } else {
      DG = G;
    }
    MatrixXd K = MatrixXd::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = G.transpose() * DG;
    if (p > 0) {
      K.topRightCorner(n, p) = A.transpose();
      K.bottomLeftCorner(p, n) = A;
    }
    // static regularization; removed again by the refinement loop below
    const double reg = 1e-10;
    for (int i = 0; i < n; ++i) K(i, i) += reg;
    for (int i = n; i < n + p; ++i) K(i, i) -= reg;
    kkt_lu.compute(K);
  };

  // Solve [0 A' G'; A 0 0; G 0 -W'W] (dx,dy,dz) = (r1,r2,r3) with the reduced
  // factorization, then refine against the full system: the elimination of dz
  // amplifies factorization error by cond(W'W) near convergence.
  auto kkt_base = [&](const NTScaling* w, const VectorXd& r1, const VectorXd& r2,
                      const VectorXd& r3, VectorXd& dx, VectorXd& dy, VectorXd& dz) {
    const VectorXd t3 = w ? apply_scaling(cone, *w, ScaleOp::WtWInv, r3) : r3;
    VectorXd rhs(n + p);
    rhs.head(n) = r1 + G.transpose() * t3;
    if (p > 0) rhs.tail(p) = r2;
    const VectorXd sol = kkt_lu.solve(rhs);
    dx = sol.head(n);
    dy = p > 0 ? VectorXd(sol.tail(p)) : VectorXd(0);
    VectorXd gz = G * dx - r3;
    dz = w ? apply_scaling(cone, *w, ScaleOp::WtWInv, gz) : gz;
  };
  auto kkt_solve = [&](const NTScaling* w, const VectorXd& r1, const VectorXd& r2,
                       const VectorXd& r3, VectorXd& dx, VectorXd& dy, VectorXd& dz) {
    kkt_base(w, r1, r2, r3, dx, dy, dz);
    for (int ref = 0; ref < 3; ++ref) {
      const VectorXd f1 =
          r1 - (p > 0 ? VectorXd(A.transpose() * dy) : VectorXd(VectorXd::Zero(n))) -
          G.transpose() * dz;
      const VectorXd f2 = p > 0 ? VectorXd(r2 - A * dx) : VectorXd(0);
      const VectorXd wwdz = w ? apply_scaling(cone, *w, ScaleOp::WtW, dz) : dz;
      const VectorXd f3 = r3 - (G * dx - wwdz);
      const double fn = f1.norm() + f2.norm() + f3.norm();
      if (fn <= 1e-14 * (1.0 + r1.norm() + r2.norm() + r3.norm())) break;
      VectorXd e1, e2, e3;
      kkt_base(w, f1, f2, f3, e1, e2, e3);
      dx += e1;
      dy += e2;
      dz += e3;
    }
  };

  // --- initialization: least-norm primal/dual start, shifted into the cone
  VectorXd x(n), y(p), s(m), z(m);
  {
    factor(nullptr);
    VectorXd dx, dy, dz;
    kkt_solve(nullptr, VectorXd::Zero(n), b, h, dx, dy, dz);
    x = dx;
    s = -dz;  // = h - G x
    const double me = min_eig(cone, s);
    if (me < 1e-8) s += (1.0 - me) * e;

    kkt_solve(nullptr, -c, VectorXd::Zero(p), VectorXd::Zero(m), dx, dy, dz);
    y = dy;
    z = dz;
    const double med = min_eig(cone, z);
    if (med < 1e-8) z += (1.0 - med) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double nb = std::max(1.0, b.norm());
  const double nh = std::max(1.0, h.norm());
  const double nc = std::max(1.0, c.norm());

  // best iterate so far, returned on numerical breakdown
  struct Snapshot {
    VectorXd x, y, z, s;
    double tau = 1.0, kappa = 1.0;
    double score = kInf;
    double pres = kInf, dres = kInf, gap = kInf, rel_gap = kInf, pobj = 0.0, dobj = 0.0;
    int it = 0;
  } best;

  auto finish_optimal = [&](int it) {
    res.x = x / tau;
    res.y = y / tau;
    res.z = z / tau;
    res.s = s / tau;
    res.primal_obj = c.dot(res.x);
    res.dual_obj = -(b.dot(res.y) + h.dot(res.z));
    res.duality_gap = res.s.dot(res.z);
    res.rel_gap = res.duality_gap / std::max(1.0, std::abs(res.primal_obj));
    res.iterations = it;
    res.status = SolveStatus::Optimal;
  };

  for (int it = 0; it <= opts.max_iters; ++it) {
    const VectorXd rx = A.transpose() * y + G.transpose() * z + c * tau;
    const VectorXd ry = A * x - b * tau;
    const VectorXd rz = G * x + s - h * tau;
    const double rt = c.dot(x) + b.dot(y) + h.dot(z) + kappa;
    const double gap = s.dot(z);
    const double mu = (gap + tau * kappa) / degree;

    const double pcost = c.dot(x) / tau;
    const double dcost = -(b.dot(y) + h.dot(z)) / tau;
    const double pres = std::max(ry.norm() / nb, rz.norm() / nh) / tau;
    const double dres = rx.norm() / nc / tau;
    const double rel_gap = (gap / (tau * tau)) / std::max(1.0, std::abs(pcost));
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.duality_gap = gap / (tau * tau);
    res.rel_gap = rel_gap;
    res.primal_obj = pcost;
    res.dual_obj = dcost;
    res.iterations = it;

    if (opts.verbose) {
      std::ostringstream os;
      os << "it " << it << " pcost " << pcost << " dcost " << dcost << " pres " << pres
         << " dres " << dres << " gap " << rel_gap << " tau " << tau << " kappa " << kappa;
      fprintf(stderr, "%s\n", os.str().c_str());
    }

    if (pres <= opts.feas_tol && dres <= opts.feas_tol &&
        (rel_gap <= opts.gap_tol || gap / (tau * tau) <= opts.gap_tol)) {
      finish_optimal(it);
      return res;
    }

    const double score = std::max({pres, dres, rel_gap});
    if (score < best.score) {
      best = {x, y, z, s, tau, kappa, score, pres, dres, gap / (tau * tau), rel_gap,
              pcost, dcost, it};
    }
    // direction quality collapses once the scaled KKT system exceeds double
    // precision; stop at the best point rather than stepping into noise
    const bool breakdown = best.score < 1e-5 && score > 1e3 * best.score;
    if (breakdown) break;

    // infeasibility certificates
    const double byhz = -(b.dot(y) + h.dot(z));
    if (byhz > 0.0) {
      const double cert = (A.transpose() * y + G.transpose() * z).norm() / nc;
      if (cert / byhz <= opts.feas_tol) {
        res.status = SolveStatus::Infeasible;
        res.y = y / byhz;
        res.z = z / byhz;
        res.x = VectorXd::Zero(n);
        res.s = VectorXd::Zero(m);
        return res;
      }
    }
    const double mcx = -c.dot(x);
    if (mcx > 0.0) {
      const double cert = std::max((A * x).norm() / nb, (G * x + s).norm() / nh);
      if (cert / mcx <= opts.feas_tol) {
        res.status = SolveStatus::Unbounded;
        res.x = x / mcx;
        res.s = s / mcx;
        res.y = VectorXd::Zero(p);
        res.z = VectorXd::Zero(m);
        return res;
      }
    }
    // tau -> 0 with kappa bounded away from it is the homogeneous model's
    // signal that no complementary solution exists; classify by the sign of
    // the ray objective even when the certificate residual stays noisy
    if (tau <= 1e-9 * std::max(1.0, kappa)) {
      if (byhz > 0.0 && byhz >= mcx) {
        res.status = SolveStatus::Infeasible;
        res.y = y / byhz;
        res.z = z / byhz;
        res.x = VectorXd::Zero(n);
        res.s = VectorXd::Zero(m);
        return res;
      }
      if (mcx > 0.0) {
        res.status = SolveStatus::Unbounded;
        res.x = x / mcx;
        res.s = s / mcx;
        res.y = VectorXd::Zero(p);
        res.z = VectorXd::Zero(m);
        return res;
      }
    }
    if (it == opts.max_iters) break;

    const NTScaling w = compute_scaling(cone, s, z);
    if (!w.ok) break;
    factor(&w);

    VectorXd u1x, u1y, u1z;
    kkt_solve(&w, -c, b, h, u1x, u1y, u1z);
    const double denom = c.dot(u1x) + b.dot(u1y) + h.dot(u1z) - kappa / tau;
    if (!std::isfinite(denom) || std::abs(denom) < 1e-300) break;

    const VectorXd lam_lam = jordan(cone, w.lambda, w.lambda);

    auto direction = [&](double eta, const VectorXd& ds_target, double dk_target, VectorXd& dx,
                         VectorXd& dy, VectorXd& dz, VectorXd& ds, double& dtau,
                         double& dkappa) {
      const VectorXd wl = apply_scaling(cone, w, ScaleOp::Wt, jordan_div(cone, w, ds_target));
      VectorXd u2x, u2y, u2z;
      kkt_solve(&w, -(1.0 - eta) * rx, -(1.0 - eta) * ry, -(1.0 - eta) * rz + wl, u2x, u2y,
                u2z);
      dtau = (-(1.0 - eta) * rt - (c.dot(u2x) + b.dot(u2y) + h.dot(u2z)) + dk_target / tau) /
             denom;
      dx = u2x + dtau * u1x;
      dy = u2y + dtau * u1y;
      dz = u2z + dtau * u1z;
      ds = -wl - apply_scaling(cone, w, ScaleOp::WtW, dz);
      dkappa = (-dk_target - kappa * dtau) / tau;
    };

    // predictor
    VectorXd dx, dy, dz, ds;
    double dtau, dkappa;
    direction(0.0, lam_lam, tau * kappa, dx, dy, dz, ds, dtau, dkappa);

    const VectorXd ws_a = apply_scaling(cone, w, ScaleOp::WtInv, ds);
    const VectorXd wz_a = apply_scaling(cone, w, ScaleOp::W, dz);
    double amax = std::min(max_step(cone, w.lambda, ws_a), max_step(cone, w.lambda, wz_a));
    if (dtau < 0.0) amax = std::min(amax, -tau / dtau);
    if (dkappa < 0.0) amax = std::min(amax, -kappa / dkappa);
    const double a_aff = std::min(1.0, amax);
    double sigma = std::pow(1.0 - a_aff, 3.0);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // corrector (Mehrotra)
    const VectorXd corr = jordan(cone, ws_a, wz_a);
    const VectorXd ds_target = lam_lam + corr - sigma * mu * e;
    const double dk_target = tau * kappa + dtau * dkappa - sigma * mu;
    direction(sigma, ds_target, dk_target, dx, dy, dz, ds, dtau, dkappa);

    const VectorXd ws_c = apply_scaling(cone, w, ScaleOp::WtInv, ds);
    const VectorXd wz_c = apply_scaling(cone, w, ScaleOp::W, dz);
    double am = std::min(max_step(cone, w.lambda, ws_c), max_step(cone, w.lambda, wz_c));
    if (dtau < 0.0) am = std::min(am, -tau / dtau);
    if (dkappa < 0.0) am = std::min(am, -kappa / dkappa);
    const double alpha = std::min(1.0, 0.99 * am);
    if (!std::isfinite(alpha) || alpha <= 0.0) break;

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    if (tau <= 0.0 || kappa <= 0.0 || !std::isfinite(tau)) break;
  }

  // ran out of iterations or broke down: report the best recorded point
  if (!std::isfinite(best.score)) {
    res.status = SolveStatus::NumericalFailure;
    return res;
  }
  res.x = best.x / best.tau;
  res.y = best.y / best.tau;
  res.z = best.z / best.tau;
  res.s = best.s / best.tau;
  res.primal_obj = best.pobj;
  res.dual_obj = best.dobj;
  res.primal_residual = best.pres;
  res.dual_residual = best.dres;
  res.duality_gap = best.gap;
  res.rel_gap = best.rel_gap;
  res.iterations = best.it;
  res.status = SolveStatus::MaxIters;
  return res;
}

// ---------------------------------------------------------------------------
// Block-structured problem description compiled down to conelp form.
// Variable blocks are declared first (free / nonneg / SOC / PSD); the only
// constraints are linear equalities over them.

class ConicProblem {
 public:
  enum class BlockType { Free, NonNeg, Soc, Psd };

  struct Block {
    BlockType type;
    int size;    // scalar count, SOC dim, or PSD order
    int offset;  // flat offset in x (svec coordinates for PSD)
    int flat_dim;
  };

  int add_free(int count = 1) { return add_block(BlockType::Free, count, count); }
  int add_nonneg(int count = 1) { return add_block(BlockType::NonNeg, count, count); }
  int add_soc(int dim) {
    if (dim < 2) throw std::invalid_argument("SOC block dimension must be >= 2");
    return add_block(BlockType::Soc, dim, dim);
  }
  int add_psd(int order) {
    if (order < 1) throw std::invalid_argument("PSD block order must be >= 1");
    return add_block(BlockType::Psd, order, svec_dim(order));
  }

  // Flat variable index of a scalar entry in a non-PSD block.
  int var(int block, int i = 0) const {
    const Block& blk = blocks_.at(block);
    if (blk.type == BlockType::Psd) throw std::invalid_argument("use psd entry addressing");
    if (i < 0 || i >= blk.size) throw std::out_of_range("block entry index");
    return blk.offset + i;
  }

  int add_row(double rhs) {
    rows_.emplace_back();
    rhs_.push_back(rhs);
    return static_cast<int>(rows_.size()) - 1;
  }
  void add_term(int row, int flat_var, double coeff) {
    rows_.at(row).emplace_back(flat_var, coeff);
  }
  void set_rhs(int row, double rhs) { rhs_.at(row) = rhs; }
  // Coefficient on the symmetric-matrix entry X(i,j) (== X(j,i)) of a PSD block.
  void add_psd_term(int row, int block, int i, int j, double coeff) {
    rows_.at(row).emplace_back(psd_flat(block, i, j), psd_coeff(block, i, j, coeff));
  }

  void add_obj(int flat_var, double coeff) { obj_.emplace_back(flat_var, coeff); }
  void add_obj_psd(int block, int i, int j, double coeff) {
    obj_.emplace_back(psd_flat(block, i, j), psd_coeff(block, i, j, coeff));
  }
  void add_obj_constant(double c) { obj_const_ += c; }
  double obj_constant() const { return obj_const_; }

  int num_vars() const { return nvar_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<Block>& blocks() const { return blocks_; }

  struct Solution {
    SolveStatus status = SolveStatus::NumericalFailure;
    VectorXd x;        // flat primal values (svec coords for PSD blocks)
    VectorXd eq_dual;  // one multiplier per equality row
    double objective = 0.0;
    double duality_gap = 0.0, primal_residual = 0.0, dual_residual = 0.0;
    int iterations = 0;

    double value(int flat_var) const { return x[flat_var]; }
  };

  double psd_entry(const Solution& sol, int block, int i, int j) const {
    const Block& blk = blocks_.at(block);
    const int fi = blk.offset + svec_index(i, j, blk.size);
    return i == j ? sol.x[fi] : sol.x[fi] / kSqrt2;
  }
  MatrixXd psd_matrix(const Solution& sol, int block) const {
    const Block& blk = blocks_.at(block);
    return smat(sol.x.segment(blk.offset, blk.flat_dim), blk.size);
  }

  Solution solve(const SolverOptions& opts = {}) const {
    const int n = nvar_;
    VectorXd c = VectorXd::Zero(n);
    for (auto& [v, co] : obj_) c[v] += co;

    const int p = num_rows();
    MatrixXd A = MatrixXd::Zero(p, n);
    VectorXd b(p);
    for (int r = 0; r < p; ++r) {
      b[r] = rhs_[r];
      for (auto& [v, co] : rows_[r]) A(r, v) += co;
    }

    // cone membership: -x_blk + s = 0 for every conic block
    ConeLayout cone;
    std::vector<const Block*> nn, so, ps;
    for (const auto& blk : blocks_) {
      switch (blk.type) {
        case BlockType::Free: break;
        case BlockType::NonNeg: cone.nonneg += blk.size; nn.push_back(&blk); break;
        case BlockType::Soc: cone.soc.push_back(blk.size); so.push_back(&blk); break;
        case BlockType::Psd: cone.psd.push_back(blk.size); ps.push_back(&blk); break;
      }
    }
    const int m = cone.dim();
    MatrixXd G = MatrixXd::Zero(m, n);
    int roff = 0;
    for (auto* blk : nn) {
      for (int i = 0; i < blk->flat_dim; ++i) G(roff + i, blk->offset + i) = -1.0;
      roff += blk->flat_dim;
    }
    for (auto* blk : so) {
      for (int i = 0; i < blk->flat_dim; ++i) G(roff + i, blk->offset + i) = -1.0;
      roff += blk->flat_dim;
    }
    for (auto* blk : ps) {
      for (int i = 0; i < blk->flat_dim; ++i) G(roff + i, blk->offset + i) = -1.0;
      roff += blk->flat_dim;
    }
    const VectorXd h = VectorXd::Zero(m);

    const ConelpResult r = conelp(c, A, b, G, h, cone, opts);
    Solution sol;
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.duality_gap = r.duality_gap;
    sol.primal_residual = r.primal_residual;
    sol.dual_residual = r.dual_residual;
    if (r.status == SolveStatus::Optimal || r.status == SolveStatus::MaxIters) {
      sol.x = r.x;
      sol.eq_dual = r.y;
      sol.objective = r.primal_obj + obj_const_;
    }
    return sol;
  }

  // Deterministic one-line-per-row text dump for cross-solver checks.
  std::string dump() const {
    std::ostringstream os;
    os.precision(17);
    os << "vars " << nvar_ << " blocks";
    for (const auto& blk : blocks_) {
      const char* t = blk.type == BlockType::Free     ? "f"
                      : blk.type == BlockType::NonNeg ? "l"
                      : blk.type == BlockType::Soc    ? "q"
                                                      : "s";
      os << " " << t << blk.size;
    }
    os << "\nmin";
    for (auto& [v, co] : obj_) os << " " << v << ":" << co;
    if (obj_const_ != 0.0) os << " const:" << obj_const_;
    os << "\n";
    for (int r = 0; r < num_rows(); ++r) {
      os << "eq";
      for (auto& [v, co] : rows_[r]) os << " " << v << ":" << co;
      os << " = " << rhs_[r] << "\n";
    }
    return os.str();
  }

 private:
  int add_block(BlockType t, int size, int flat) {
    if (size < 1) throw std::invalid_argument("block size must be positive");
    blocks_.push_back({t, size, nvar_, flat});
    nvar_ += flat;
    return static_cast<int>(blocks_.size()) - 1;
  }
  int psd_flat(int block, int i, int j) const {
    const Block& blk = blocks_.at(block);
    if (blk.type != BlockType::Psd) throw std::invalid_argument("not a PSD block");
    if (i < 0 || j < 0 || i >= blk.size || j >= blk.size)
      throw std::out_of_range("psd entry index");
    return blk.offset + svec_index(i, j, blk.size);
  }
  static double psd_coeff(int, int i, int j, double coeff) {
    return i == j ? coeff : coeff / kSqrt2;
  }

  std::vector<Block> blocks_;
  int nvar_ = 0;
  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<double> rhs_;
  std::vector<std::pair<int, double>> obj_;
  double obj_const_ = 0.0;
};

}  // namespace evgrid::conic
