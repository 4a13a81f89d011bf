#pragma once

// Dense primal-dual interior-point solver for block-diagonal semidefinite
// programs in standard form:
//
//   primal:  minimize <C, X>  s.t.  <A_i, X> = b_i,  X >= 0 (PSD per block)
//   dual:    maximize b'y     s.t.  sum_i y_i A_i + S = C,  S >= 0
//
// Infeasible start, HKM search direction, Mehrotra predictor-corrector.
// 1x1 blocks carry nonnegative scalars.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace robust_ut::sdp {

/// Dense symmetric block. Writes go to both triangles.
class SymBlock {
 public:
  SymBlock() = default;
  explicit SymBlock(int dim) : m_(Eigen::MatrixXd::Zero(dim, dim)) {
    if (dim <= 0) throw std::invalid_argument("SymBlock: dimension must be positive");
  }
  explicit SymBlock(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("SymBlock: matrix must be square");
    m_ = 0.5 * (m + m.transpose());
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  void set(int i, int j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  void add(int i, int j, double v) {
    m_(i, j) += v;
    if (i != j) m_(j, i) += v;
  }
  const Eigen::MatrixXd& matrix() const { return m_; }
  bool is_zero() const { return m_.size() == 0 || m_.cwiseAbs().maxCoeff() == 0.0; }

 private:
  Eigen::MatrixXd m_;
};

struct BlockEntry {
  std::size_t block = 0;
  SymBlock matrix;
};

/// One equality <A_i, X> = rhs; blocks absent from `blocks` are zero.
struct Constraint {
  std::vector<BlockEntry> blocks;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<int> block_dims;
  std::vector<SymBlock> objective;  // C, one per block
  std::vector<Constraint> constraints;

  std::size_t total_dim() const {
    std::size_t n = 0;
    for (int d : block_dims) n += static_cast<std::size_t>(d);
    return n;
  }

  void validate() const {
    if (block_dims.empty()) throw std::invalid_argument("SdpProblem: no blocks");
    for (int d : block_dims)
      if (d <= 0) throw std::invalid_argument("SdpProblem: block dimensions must be positive");
    if (objective.size() != block_dims.size())
      throw std::invalid_argument("SdpProblem: objective has " + std::to_string(objective.size()) +
                                  " blocks, expected " + std::to_string(block_dims.size()));
    for (std::size_t b = 0; b < block_dims.size(); ++b)
      if (objective[b].dim() != block_dims[b])
        throw std::invalid_argument("SdpProblem: objective block " + std::to_string(b) + " has wrong dimension");
    if (constraints.empty()) throw std::invalid_argument("SdpProblem: at least one constraint is required");
    for (std::size_t i = 0; i < constraints.size(); ++i)
      for (const auto& e : constraints[i].blocks) {
        if (e.block >= block_dims.size())
          throw std::invalid_argument("SdpProblem: constraint " + std::to_string(i) + " references block " +
                                      std::to_string(e.block));
        if (e.matrix.dim() != block_dims[e.block])
          throw std::invalid_argument("SdpProblem: constraint " + std::to_string(i) + " block " +
                                      std::to_string(e.block) + " has wrong dimension");
      }
  }
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalTrouble, IterLimit };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NumericalTrouble: return "NumericalTrouble";
    case Status::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

struct SolverOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;
  /// When the iteration breaks down, the last iterate is still reported
  /// Optimal if it meets the tolerances relaxed by this factor.
  double breakdown_factor = 100.0;
  /// When non-empty, the problem is written here in SDPA sparse format before solving.
  std::string dump_path;
  /// Per-iteration progress lines, when set.
  std::ostream* log = nullptr;
};

using BlockMatrix = std::vector<Eigen::MatrixXd>;

struct SdpSolution {
  BlockMatrix X;
  Eigen::VectorXd y;
  BlockMatrix S;
  double primal_obj = std::numeric_limits<double>::quiet_NaN();
  double dual_obj = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::NumericalTrouble;
  int iterations = 0;
  /// Optimal only within breakdown_factor of the tolerances.
  bool reduced_accuracy = false;
  double primal_residual = std::numeric_limits<double>::infinity();  // ||b - A(X)|| / (1 + ||b||)
  double dual_residual = std::numeric_limits<double>::infinity();    // ||C - A'y - S|| / (1 + ||C||)
};

/// Writes the problem in SDPA sparse format. SDPA's primal is
/// min c'x s.t. sum_i F_i x_i - F_0 >= 0, which is our dual with
/// c = -b, F_i = -A_i, F_0 = -C; only upper-triangle entries are listed.
inline void write_sdpa(const SdpProblem& p, std::ostream& os) {
  p.validate();
  os << std::setprecision(17);
  os << "\"robust_ut dual-form SDP\"\n";
  os << p.constraints.size() << " = mDIM\n";
  os << p.block_dims.size() << " = nBLOCK\n";
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) os << (b ? " " : "") << p.block_dims[b];
  os << " = bLOCKsTRUCT\n";
  for (std::size_t i = 0; i < p.constraints.size(); ++i) os << (i ? " " : "") << -p.constraints[i].rhs;
  os << '\n';
  auto emit = [&os](std::size_t mat, std::size_t block, const SymBlock& m) {
    for (int r = 0; r < m.dim(); ++r)
      for (int c = r; c < m.dim(); ++c)
        if (m(r, c) != 0.0) os << mat << ' ' << block + 1 << ' ' << r + 1 << ' ' << c + 1 << ' ' << -m(r, c) << '\n';
  };
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) emit(0, b, p.objective[b]);
  for (std::size_t i = 0; i < p.constraints.size(); ++i)
    for (const auto& e : p.constraints[i].blocks) emit(i + 1, e.block, e.matrix);
}

namespace detail {

struct Entry {
  int row, col;
  double value;
};

struct SparseTerm {
  std::size_t constraint;
  std::vector<Entry> entries;  // both triangles
};

inline double frob_dot(const BlockMatrix& a, const BlockMatrix& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

inline double frob_norm(const BlockMatrix& a) { return std::sqrt(frob_dot(a, a)); }

inline double trace(const BlockMatrix& a) {
  double s = 0.0;
  for (const auto& m : a) s += m.trace();
  return s;
}

/// Largest alpha in (0, inf] keeping X + alpha*dX PSD, given a Cholesky factor of X.
inline double max_step(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX) {
  if (X.rows() == 1) return dX(0, 0) < 0 ? -X(0, 0) / dX(0, 0) : std::numeric_limits<double>::infinity();
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd W = L.triangularView<Eigen::Lower>().solve(dX);
  W = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
  W = 0.5 * (W + W.transpose());
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(W, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

class InteriorPoint {
 public:
  InteriorPoint(const SdpProblem& p, const SolverOptions& o) : p_(p), opt_(o) {
    nb_ = p.block_dims.size();
    m_ = p.constraints.size();
    by_block_.resize(nb_);
    b_.resize(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) {
      b_(static_cast<Eigen::Index>(i)) = p.constraints[i].rhs;
      std::vector<Eigen::MatrixXd> merged(nb_);
      for (const auto& e : p.constraints[i].blocks) {
        if (merged[e.block].size() == 0) merged[e.block] = e.matrix.matrix();
        else merged[e.block] += e.matrix.matrix();
      }
      for (std::size_t k = 0; k < nb_; ++k) {
        const auto& M = merged[k];
        SparseTerm t{i, {}};
        for (int c = 0; c < M.cols(); ++c)
          for (int r = 0; r < M.rows(); ++r)
            if (M(r, c) != 0.0) t.entries.push_back({r, c, M(r, c)});
        if (!t.entries.empty()) by_block_[k].push_back(std::move(t));
      }
    }
    C_.resize(nb_);
    for (std::size_t k = 0; k < nb_; ++k) C_[k] = p.objective[k].matrix();
    b_orig_norm_ = b_.norm();
    c_orig_norm_ = frob_norm(C_);

    // Unit-norm constraints, then b and C scaled to O(1).
    row_scale_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (const auto& terms : by_block_)
      for (const auto& t : terms)
        for (const auto& e : t.entries) row_scale_(static_cast<Eigen::Index>(t.constraint)) += e.value * e.value;
    row_scale_ = row_scale_.cwiseSqrt().unaryExpr([](double v) { return v > 0 ? v : 1.0; });
    for (auto& terms : by_block_)
      for (auto& t : terms)
        for (auto& e : t.entries) e.value /= row_scale_(static_cast<Eigen::Index>(t.constraint));
    b_.array() /= row_scale_.array();
    b_scale_ = std::max(1.0, b_.norm());
    c_scale_ = std::max(1.0, c_orig_norm_);
    b_ /= b_scale_;
    for (auto& c : C_) c /= c_scale_;
    factor_gram();
  }

  SdpSolution run() {
    SdpSolution sol;
    init_point();
    const double b_norm = b_.norm();
    const double c_norm = frob_norm(C_);
    const double obj_scale = b_scale_ * c_scale_;
    const double n_total = static_cast<double>(p_.total_dim());
    int stalls = 0, short_steps = 0;
    bool near_optimal = false;
    auto breakdown = [&] {
      sol.status = near_optimal ? Status::Optimal : Status::NumericalTrouble;
      sol.reduced_accuracy = near_optimal;
      return sol;
    };

    for (int iter = 0;; ++iter) {
      sol.iterations = iter;
      const Eigen::VectorXd rp = b_ - apply_A(X_);
      const BlockMatrix Rd = dual_residual();
      const double pobj_s = frob_dot(C_, X_);
      const double dobj_s = b_.dot(y_);
      const double xs_s = frob_dot(X_, S_);
      const double pobj = obj_scale * pobj_s;
      const double dobj = obj_scale * dobj_s;
      const double xs = obj_scale * xs_s;
      const double rel_p = b_scale_ * rp.cwiseProduct(row_scale_).norm() / (1.0 + b_orig_norm_);
      const double rel_d = c_scale_ * frob_norm(Rd) / (1.0 + c_orig_norm_);
      const double gap_scale = 1.0 + std::abs(pobj);

      fill(sol, pobj, dobj, rel_p, rel_d);
      if (opt_.log)
        *opt_.log << "iter " << iter << " pobj " << pobj << " dobj " << dobj << " pinf " << rel_p << " dinf " << rel_d
                  << " gap " << xs << '\n';
      if (!std::isfinite(pobj) || !std::isfinite(dobj)) {
        sol.status = Status::NumericalTrouble;
        return sol;
      }
      if (rel_p <= opt_.feas_tol && rel_d <= opt_.feas_tol && std::abs(pobj - dobj) <= opt_.gap_tol * gap_scale &&
          xs <= opt_.gap_tol * gap_scale) {
        sol.status = Status::Optimal;
        return sol;
      }
      const double f = opt_.breakdown_factor;
      near_optimal = rel_p <= f * opt_.feas_tol && rel_d <= f * opt_.feas_tol &&
                     std::abs(pobj - dobj) <= f * opt_.gap_tol * gap_scale && xs <= f * opt_.gap_tol * gap_scale;
      // Farkas-type certificates: a dual ray (b'y > 0, A'y + S ~ 0) or a primal ray.
      if (dobj_s > 0 && frob_norm(minus(C_, Rd)) <= opt_.feas_tol * dobj_s && dobj_s > 1e8 * (1.0 + c_norm)) {
        sol.status = Status::Infeasible;
        return sol;
      }
      if (pobj_s < 0 && (b_ - rp).norm() <= opt_.feas_tol * -pobj_s && -pobj_s > 1e8 * (1.0 + b_norm)) {
        sol.status = Status::Unbounded;
        return sol;
      }
      if (iter >= opt_.max_iter) {
        sol.status = Status::IterLimit;
        return sol;
      }

      // S^{-1} per block
      Sinv_.resize(nb_);
      for (std::size_t k = 0; k < nb_; ++k) {
        Eigen::LLT<Eigen::MatrixXd> llt(S_[k]);
        if (llt.info() != Eigen::Success) {
          return breakdown();
        }
        Sinv_[k] = llt.solve(Eigen::MatrixXd::Identity(S_[k].rows(), S_[k].cols()));
        Sinv_[k] = 0.5 * (Sinv_[k] + Sinv_[k].transpose());
      }
      if (!factor_schur()) {
        return breakdown();
      }

      const double mu = xs_s / n_total;
      // X Rd S^{-1}, shared by predictor and corrector
      BlockMatrix XRdSinv(nb_);
      for (std::size_t k = 0; k < nb_; ++k) XRdSinv[k] = X_[k] * Rd[k] * Sinv_[k];

      // predictor
      BlockMatrix K(nb_);
      for (std::size_t k = 0; k < nb_; ++k) K[k] = -X_[k];
      Direction pred = direction(K, rp, Rd, XRdSinv);
      double ap = step_to_boundary(X_, pred.dX);
      double ad = step_to_boundary(S_, pred.dS);
      ap = std::min(1.0, ap);
      ad = std::min(1.0, ad);
      double gap_aff = 0.0;
      for (std::size_t k = 0; k < nb_; ++k)
        gap_aff += (X_[k] + ap * pred.dX[k]).cwiseProduct(S_[k] + ad * pred.dS[k]).sum();
      const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / xs_s, 3.0), 0.0, 1.0);

      // corrector
      for (std::size_t k = 0; k < nb_; ++k) {
        const Eigen::MatrixXd corr = pred.dX[k] * pred.dS[k] * Sinv_[k];
        K[k] = sigma * mu * Sinv_[k] - X_[k] - 0.5 * (corr + corr.transpose());
      }
      Direction dir = direction(K, rp, Rd, XRdSinv);
      ap = std::min(1.0, opt_.step_fraction * step_to_boundary(X_, dir.dX));
      ad = std::min(1.0, opt_.step_fraction * step_to_boundary(S_, dir.dS));
      if (std::min(ap, ad) < 0.1) {
        // the second-order term can point out of the cone; recenter instead
        const double sc = std::max(sigma, 0.5);
        for (std::size_t k = 0; k < nb_; ++k) K[k] = sc * mu * Sinv_[k] - X_[k];
        Direction alt = direction(K, rp, Rd, XRdSinv);
        const double ap2 = std::min(1.0, opt_.step_fraction * step_to_boundary(X_, alt.dX));
        const double ad2 = std::min(1.0, opt_.step_fraction * step_to_boundary(S_, alt.dS));
        if (std::min(ap2, ad2) > std::min(ap, ad)) {
          dir = std::move(alt);
          ap = ap2;
          ad = ad2;
        }
      }
      if (!(ap > 0) || !(ad > 0)) {
        return breakdown();
      }

      for (std::size_t k = 0; k < nb_; ++k) {
        X_[k] += ap * dir.dX[k];
        S_[k] += ad * dir.dS[k];
        X_[k] = 0.5 * (X_[k] + X_[k].transpose());
        S_[k] = 0.5 * (S_[k] + S_[k].transpose());
      }
      y_ += ad * dir.dy;

      if (opt_.log) *opt_.log << "  step " << ap << ' ' << ad << " sigma " << sigma << '\n';
      stalls = (ap < 1e-10 && ad < 1e-10) ? stalls + 1 : 0;
      short_steps = std::min(ap, ad) < 1e-2 ? short_steps + 1 : 0;
      if (stalls >= 3 || (near_optimal && short_steps >= 5)) {
        return breakdown();
      }
    }
  }

 private:
  struct Direction {
    BlockMatrix dX, dS;
    Eigen::VectorXd dy;
  };

  static BlockMatrix minus(const BlockMatrix& a, const BlockMatrix& b) {
    BlockMatrix r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
    return r;
  }

  void fill(SdpSolution& sol, double pobj, double dobj, double rel_p, double rel_d) const {
    sol.X = X_;
    sol.S = S_;
    for (auto& x : sol.X) x *= b_scale_;
    for (auto& v : sol.S) v *= c_scale_;
    sol.y = c_scale_ * y_.cwiseQuotient(row_scale_);
    sol.primal_obj = pobj;
    sol.dual_obj = dobj;
    sol.primal_residual = rel_p;
    sol.dual_residual = rel_d;
  }

  void init_point() {
    X_.resize(nb_);
    S_.resize(nb_);
    y_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < nb_; ++k) {
      const double n = static_cast<double>(p_.block_dims[k]);
      double xi = std::max(10.0, std::sqrt(n));
      double eta = std::max({10.0, std::sqrt(n), C_[k].norm()});
      for (const auto& t : by_block_[k]) {
        double a_norm = 0.0;
        for (const auto& e : t.entries) a_norm += e.value * e.value;
        a_norm = std::sqrt(a_norm);
        xi = std::max(xi, n * (1.0 + std::abs(b_(static_cast<Eigen::Index>(t.constraint)))) / (1.0 + a_norm));
        eta = std::max(eta, a_norm);
      }
      const int d = p_.block_dims[k];
      X_[k] = xi * Eigen::MatrixXd::Identity(d, d);
      S_[k] = eta * Eigen::MatrixXd::Identity(d, d);
    }
  }

  Eigen::VectorXd apply_A(const BlockMatrix& X) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < nb_; ++k)
      for (const auto& t : by_block_[k]) {
        double s = 0.0;
        for (const auto& e : t.entries) s += e.value * X[k](e.row, e.col);
        r(static_cast<Eigen::Index>(t.constraint)) += s;
      }
    return r;
  }

  /// tr(A_i Y) for possibly nonsymmetric Y.
  Eigen::VectorXd apply_A_trace(const BlockMatrix& Y) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < nb_; ++k)
      for (const auto& t : by_block_[k]) {
        double s = 0.0;
        for (const auto& e : t.entries) s += e.value * Y[k](e.col, e.row);
        r(static_cast<Eigen::Index>(t.constraint)) += s;
      }
    return r;
  }

  BlockMatrix apply_At(const Eigen::VectorXd& y) const {
    BlockMatrix r(nb_);
    for (std::size_t k = 0; k < nb_; ++k) {
      r[k] = Eigen::MatrixXd::Zero(p_.block_dims[k], p_.block_dims[k]);
      for (const auto& t : by_block_[k]) {
        const double yi = y(static_cast<Eigen::Index>(t.constraint));
        for (const auto& e : t.entries) r[k](e.row, e.col) += yi * e.value;
      }
    }
    return r;
  }

  BlockMatrix dual_residual() const {
    BlockMatrix At = apply_At(y_);
    for (std::size_t k = 0; k < nb_; ++k) At[k] = C_[k] - At[k] - S_[k];
    return At;
  }

  // Schur complement M_ij = tr(A_i X A_j S^{-1}).
  bool factor_schur() {
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < nb_; ++k) {
      const auto& terms = by_block_[k];
      const int d = p_.block_dims[k];
      if (d == 1) {
        const double f = X_[k](0, 0) * Sinv_[k](0, 0);
        for (std::size_t a = 0; a < terms.size(); ++a)
          for (std::size_t c = a; c < terms.size(); ++c)
            M(static_cast<Eigen::Index>(terms[a].constraint), static_cast<Eigen::Index>(terms[c].constraint)) +=
                f * terms[a].entries[0].value * terms[c].entries[0].value;
        continue;
      }
      Eigen::MatrixXd XA(d, d);
      for (std::size_t a = 0; a < terms.size(); ++a) {
        XA.setZero();
        for (const auto& e : terms[a].entries) XA.col(e.col) += e.value * X_[k].col(e.row);
        const Eigen::MatrixXd T = XA * Sinv_[k];
        const auto i = static_cast<Eigen::Index>(terms[a].constraint);
        for (std::size_t c = a; c < terms.size(); ++c) {
          double s = 0.0;
          for (const auto& e : terms[c].entries) s += e.value * T(e.col, e.row);
          M(i, static_cast<Eigen::Index>(terms[c].constraint)) += s;
        }
      }
    }
    // entries were accumulated into whichever triangle the block ordering gave
    Eigen::MatrixXd Ms = M + M.transpose();
    Ms.diagonal() = M.diagonal();
    M = std::move(Ms);

    schur_matrix_ = M;
    schur_.compute(M);
    if (schur_.info() != Eigen::Success) {
      const double reg = 1e-12 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      M.diagonal().array() += reg;
      schur_matrix_ = M;
      schur_.compute(M);
      if (schur_.info() != Eigen::Success) return false;
    }
    return true;
  }

  // G_ij = <A_i, A_j>, used to project dX back onto A(dX) = rp.
  void factor_gram() {
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < nb_; ++k) {
      const int d = p_.block_dims[k];
      Eigen::MatrixXd Ai(d, d);
      for (const auto& ti : by_block_[k]) {
        Ai.setZero();
        for (const auto& e : ti.entries) Ai(e.row, e.col) = e.value;
        for (const auto& tj : by_block_[k]) {
          double s = 0.0;
          for (const auto& e : tj.entries) s += e.value * Ai(e.row, e.col);
          G(static_cast<Eigen::Index>(ti.constraint), static_cast<Eigen::Index>(tj.constraint)) += s;
        }
      }
    }
    gram_.compute(G);
    gram_ok_ = gram_.info() == Eigen::Success && gram_.isPositive() &&
               (gram_.vectorD().array() > 1e-12 * std::max(1.0, G.diagonal().maxCoeff())).all();
  }

  // dX = K - sym(X dS S^{-1}),  dS = Rd - A'dy,  A(dX) = rp.
  Direction direction(const BlockMatrix& K, const Eigen::VectorXd& rp, const BlockMatrix& Rd,
                      const BlockMatrix& XRdSinv) const {
    BlockMatrix T(nb_);
    for (std::size_t k = 0; k < nb_; ++k) T[k] = K[k] - XRdSinv[k];
    const Eigen::VectorXd rhs = rp - apply_A_trace(T);
    Direction d;
    d.dy = schur_.solve(rhs);
    const BlockMatrix Atdy = apply_At(d.dy);
    d.dS.resize(nb_);
    d.dX.resize(nb_);
    for (std::size_t k = 0; k < nb_; ++k) {
      d.dS[k] = Rd[k] - Atdy[k];
      const Eigen::MatrixXd P = X_[k] * d.dS[k] * Sinv_[k];
      d.dX[k] = K[k] - 0.5 * (P + P.transpose());
    }
    // X grows without bound on unattained certificates and dX loses the
    // linear constraints to cancellation; restore them.
    if (gram_ok_) {
      const BlockMatrix fix = apply_At(gram_.solve(rp - apply_A(d.dX)));
      for (std::size_t k = 0; k < nb_; ++k) d.dX[k] += fix[k];
    }
    return d;
  }

  double step_to_boundary(const BlockMatrix& X, const BlockMatrix& dX) const {
    double a = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nb_; ++k) a = std::min(a, max_step(X[k], dX[k]));
    return a;
  }

  const SdpProblem& p_;
  SolverOptions opt_;
  std::size_t nb_ = 0, m_ = 0;
  std::vector<std::vector<SparseTerm>> by_block_;
  Eigen::VectorXd b_;
  BlockMatrix C_, X_, S_, Sinv_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd schur_matrix_;
  Eigen::LLT<Eigen::MatrixXd> schur_;
  Eigen::LDLT<Eigen::MatrixXd> gram_;
  Eigen::VectorXd row_scale_;
  double b_scale_ = 1.0, c_scale_ = 1.0, b_orig_norm_ = 0.0, c_orig_norm_ = 0.0;
  bool gram_ok_ = false;
};

}  // namespace detail

inline SdpSolution sdp_solve(const SdpProblem& p, const SolverOptions& opts = {}) {
  p.validate();
  if (!(opts.feas_tol > 0) || !(opts.gap_tol > 0) || opts.max_iter <= 0 || !(opts.step_fraction > 0) ||
      !(opts.step_fraction < 1) || !(opts.breakdown_factor >= 1))
    throw std::invalid_argument(
        "SolverOptions: tolerances and iteration limit must be positive, step_fraction in (0, 1), breakdown_factor >= 1");
  if (!opts.dump_path.empty()) {
    std::ofstream f(opts.dump_path);
    if (!f) throw std::runtime_error("cannot open SDP dump file " + opts.dump_path);
    write_sdpa(p, f);
  }
  return detail::InteriorPoint(p, opts).run();
}

struct KktReport {
  double max_constraint_residual = 0.0;  // max_i |<A_i,X> - b_i|
  double complementarity = 0.0;          // max_k <X_k,S_k> / dim_k
  double max_dual_residual = 0.0;        // max |C - sum y_i A_i - S| elementwise / (1 + max|C|)
  double min_eig_X = 0.0;
  double min_eig_S = 0.0;
};

/// Independent recomputation of optimality conditions from problem data.
inline KktReport kkt_check(const SdpProblem& p, const SdpSolution& s) {
  KktReport r;
  std::vector<Eigen::MatrixXd> Rd(p.block_dims.size());
  double c_max = 0.0;
  for (std::size_t k = 0; k < p.block_dims.size(); ++k) {
    Rd[k] = p.objective[k].matrix() - s.S[k];
    c_max = std::max(c_max, p.objective[k].matrix().cwiseAbs().maxCoeff());
  }
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    double ax = 0.0;
    for (const auto& e : p.constraints[i].blocks) {
      ax += e.matrix.matrix().cwiseProduct(s.X[e.block]).sum();
      Rd[e.block] -= s.y(static_cast<Eigen::Index>(i)) * e.matrix.matrix();
    }
    r.max_constraint_residual = std::max(r.max_constraint_residual, std::abs(ax - p.constraints[i].rhs));
  }
  r.min_eig_X = r.min_eig_S = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.block_dims.size(); ++k) {
    r.max_dual_residual = std::max(r.max_dual_residual, Rd[k].cwiseAbs().maxCoeff() / (1.0 + c_max));
    r.complementarity =
        std::max(r.complementarity, s.X[k].cwiseProduct(s.S[k]).sum() / static_cast<double>(p.block_dims[k]));
    using Eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>;
    r.min_eig_X = std::min(r.min_eig_X, Eig(s.X[k], Eigen::EigenvaluesOnly).eigenvalues()(0));
    r.min_eig_S = std::min(r.min_eig_S, Eig(s.S[k], Eigen::EigenvaluesOnly).eigenvalues()(0));
  }
  return r;
}

}  // namespace robust_ut::sdp
