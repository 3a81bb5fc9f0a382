#pragma once

// Dense two-phase revised simplex for
//     minimize c^T x  subject to  A x = b,  x >= 0
// with Bland's smallest-index rule for both the entering and the leaving
// variable, so degenerate problems cannot cycle. The basis inverse is kept
// explicitly, updated by elementary row operations and refactored from
// scratch every `refactor_every` pivots.

#include "ergodic/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ergodic {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

struct LpResult {
    LpStatus status = LpStatus::iteration_limit;
    Eigen::VectorXd x;       // primal solution
    Eigen::VectorXd y;       // simplex multipliers, y^T = c_B^T B^{-1}
    double objective = 0.0;
    std::vector<int> basis;  // basic variable per row
    int pivots = 0;
};

struct SimplexOptions {
    double cost_tol = 1e-11;   // entering threshold on reduced costs
    double pivot_tol = 1e-9;   // minimal |pivot| accepted in the ratio test
    double feas_tol = 1e-9;    // phase-one residual accepted as feasible
    int refactor_every = 50;
    int max_pivots = 200000;
};

class RevisedSimplex {
public:
    RevisedSimplex(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::VectorXd c,
                   SimplexOptions opts = {})
        : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), opts_(opts) {
        if (a_.rows() != b_.size() || a_.cols() != c_.size())
            throw ArgumentError("RevisedSimplex: inconsistent LP dimensions");
        m_ = a_.rows();
        n_ = a_.cols();
        // b >= 0 so that the artificial basis is feasible
        for (Eigen::Index r = 0; r < m_; ++r)
            if (b_[r] < 0.0) {
                a_.row(r) *= -1.0;
                b_[r] = -b_[r];
                flipped_.push_back(r);
            }
    }

    LpResult solve() {
        LpResult res;
        basis_.resize(static_cast<std::size_t>(m_));
        for (Eigen::Index r = 0; r < m_; ++r) basis_[r] = static_cast<int>(n_ + r);
        binv_ = Eigen::MatrixXd::Identity(m_, m_);
        xb_ = b_;

        // phase one: minimize the sum of artificials
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_ + m_);
        phase1.tail(m_).setOnes();
        auto st = iterate(phase1, /*allow_artificial=*/true, res.pivots);
        if (st == LpStatus::iteration_limit) {
            res.status = st;
            return res;
        }
        double infeas = 0.0;
        for (Eigen::Index r = 0; r < m_; ++r)
            if (basis_[r] >= n_) infeas += xb_[r];
        if (infeas > opts_.feas_tol * (1.0 + b_.cwiseAbs().maxCoeff())) {
            res.status = LpStatus::infeasible;
            return res;
        }
        drive_out_artificials(res.pivots);

        // phase two
        Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_ + m_);
        phase2.head(n_) = c_;
        st = iterate(phase2, /*allow_artificial=*/false, res.pivots);
        res.status = st;
        if (st != LpStatus::optimal) return res;

        refactor();
        res.x = Eigen::VectorXd::Zero(n_);
        Eigen::VectorXd cb(m_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            cb[r] = phase2[basis_[r]];
            if (basis_[r] < n_) res.x[basis_[r]] = xb_[r];
        }
        res.y = binv_.transpose() * cb;
        for (auto r : flipped_) res.y[r] = -res.y[r];
        res.objective = c_.dot(res.x);
        res.basis = basis_;
        return res;
    }

private:
    [[nodiscard]] Eigen::VectorXd column(Eigen::Index j) const {
        if (j < n_) return a_.col(j);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
        e[j - n_] = 1.0;
        return e;
    }

    void refactor() {
        Eigen::MatrixXd bmat(m_, m_);
        for (Eigen::Index r = 0; r < m_; ++r) bmat.col(r) = column(basis_[r]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(bmat);
        if (!lu.isInvertible())
            throw NumericalError("RevisedSimplex: basis matrix became singular");
        binv_ = lu.inverse();
        xb_ = binv_ * b_;
        since_refactor_ = 0;
    }

    void pivot(Eigen::Index row, Eigen::Index entering, const Eigen::VectorXd& w) {
        const double wr = w[row];
        binv_.row(row) /= wr;
        for (Eigen::Index i = 0; i < m_; ++i)
            if (i != row && w[i] != 0.0) binv_.row(i) -= w[i] * binv_.row(row);
        basis_[row] = static_cast<int>(entering);
        if (++since_refactor_ >= opts_.refactor_every) refactor();
    }

    LpStatus iterate(const Eigen::VectorXd& cost, bool allow_artificial, int& pivots) {
        const Eigen::Index ncols = allow_artificial ? n_ + m_ : n_;
        std::vector<char> is_basic(static_cast<std::size_t>(n_ + m_), 0);
        for (auto v : basis_) is_basic[static_cast<std::size_t>(v)] = 1;
        const double scale = 1.0 + cost.cwiseAbs().maxCoeff();

        while (true) {
            if (pivots >= opts_.max_pivots) return LpStatus::iteration_limit;
            Eigen::VectorXd cb(m_);
            for (Eigen::Index r = 0; r < m_; ++r) cb[r] = cost[basis_[r]];
            const Eigen::VectorXd y = binv_.transpose() * cb;

            // Bland: first improving column
            Eigen::Index entering = -1;
            for (Eigen::Index j = 0; j < ncols; ++j) {
                if (is_basic[static_cast<std::size_t>(j)]) continue;
                const double reduced = j < n_ ? cost[j] - y.dot(a_.col(j)) : cost[j] - y[j - n_];
                // cancellation in y^T a_j must not read as an improvement
                const double noise =
                    j < n_ ? y.cwiseAbs().dot(a_.col(j).cwiseAbs()) : std::abs(y[j - n_]);
                if (reduced < -opts_.cost_tol * (scale + noise)) {
                    entering = j;
                    break;
                }
            }
            if (entering < 0) return LpStatus::optimal;

            const Eigen::VectorXd w = binv_ * column(entering);
            Eigen::Index leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index r = 0; r < m_; ++r) {
                if (w[r] <= opts_.pivot_tol) continue;
                const double ratio = std::max(xb_[r], 0.0) / w[r];
                // Bland: among minimal ratios, smallest basic variable index
                if (ratio < best_ratio ||
                    (leave >= 0 && ratio == best_ratio && basis_[r] < basis_[leave])) {
                    best_ratio = ratio;
                    leave = r;
                }
            }
            if (leave < 0) return LpStatus::unbounded;

            xb_ -= best_ratio * w;
            xb_[leave] = best_ratio;
            is_basic[static_cast<std::size_t>(basis_[leave])] = 0;
            is_basic[static_cast<std::size_t>(entering)] = 1;
            pivot(leave, entering, w);
            ++pivots;
        }
    }

    /// After phase one, swap zero-level artificials for structural columns.
    void drive_out_artificials(int& pivots) {
        for (Eigen::Index r = 0; r < m_; ++r) {
            if (basis_[r] < n_) continue;
            std::vector<char> is_basic(static_cast<std::size_t>(n_ + m_), 0);
            for (auto v : basis_) is_basic[static_cast<std::size_t>(v)] = 1;
            Eigen::Index entering = -1;
            double best = 0.0;
            const Eigen::RowVectorXd brow = binv_.row(r);
            for (Eigen::Index j = 0; j < n_; ++j) {
                if (is_basic[static_cast<std::size_t>(j)]) continue;
                const double v = std::abs(brow.dot(a_.col(j)));
                if (v > best) {
                    best = v;
                    entering = j;
                }
            }
            if (entering < 0 || best <= opts_.pivot_tol)
                throw NumericalError("RevisedSimplex: constraint row " + std::to_string(r) +
                                     " is redundant (rank-deficient constraint matrix)");
            const Eigen::VectorXd w = binv_ * a_.col(entering);
            xb_ -= (xb_[r] / w[r]) * w;
            xb_[r] = 0.0;
            pivot(r, entering, w);
            ++pivots;
        }
    }

    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    Eigen::VectorXd c_;
    SimplexOptions opts_;
    Eigen::Index m_ = 0;
    Eigen::Index n_ = 0;
    std::vector<Eigen::Index> flipped_;
    std::vector<int> basis_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd xb_;
    int since_refactor_ = 0;
};

inline LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                         const Eigen::VectorXd& c, const SimplexOptions& opts = {}) {
    return RevisedSimplex(a, b, c, opts).solve();
}

}  // namespace ergodic
