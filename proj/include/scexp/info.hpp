#pragma once

// Entropy, divergence and mutual-information functionals, all in bits.
// Conventions fixed globally: 0 log 0 = 0, and q > 0 with p = 0 yields +inf
// as a distinguished value rather than an exception.

#include "scexp/prob.hpp"

#include <cmath>
#include <limits>

namespace scexp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double entropy(const Pmf<double>& p) {
    double h = 0.0;
    for (double v : p.mass)
        if (v > 0.0) h -= v * std::log2(v);
    return h;
}

inline double entropy(const JointPmf<double>& p) {
    double h = 0.0;
    for (double v : p.mass)
        if (v > 0.0) h -= v * std::log2(v);
    return h;
}

inline double kl_divergence(const Pmf<double>& q, const Pmf<double>& p) {
    if (q.size() != p.size()) throw std::invalid_argument("kl_divergence: alphabet mismatch");
    double s = 0.0;
    for (int i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0) {
            if (p[i] <= 0.0) return kInf;
            s += q[i] * std::log2(q[i] / p[i]);
        }
    }
    return s;
}

inline double kl_divergence(const JointPmf<double>& q, const JointPmf<double>& p) {
    if (q.rows() != p.rows() || q.cols() != p.cols())
        throw std::invalid_argument("kl_divergence: alphabet mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < q.mass.size(); ++i) {
        if (q.mass[i] > 0.0) {
            if (p.mass[i] <= 0.0) return kInf;
            s += q.mass[i] * std::log2(q.mass[i] / p.mass[i]);
        }
    }
    return s;
}

/// Weighted sum of per-cell divergences D(q_cell || p_cell); +inf propagates.
inline double conditional_kl(const ConditionalPmf<double>& q_cond,
                             const ConditionalPmf<double>& p_cond,
                             const std::vector<double>& cell_weights) {
    if (q_cond.cells != p_cond.cells || q_cond.out_size() != p_cond.out_size())
        throw std::invalid_argument("conditional_kl: alphabet mismatch");
    if (static_cast<int>(cell_weights.size()) != q_cond.cells)
        throw std::invalid_argument("conditional_kl: weight length mismatch");
    double s = 0.0;
    for (int c = 0; c < q_cond.cells; ++c) {
        const double w = cell_weights[static_cast<std::size_t>(c)];
        if (w <= 0.0) continue;  // zero-weight cells are skipped entirely
        for (int o = 0; o < q_cond.out_size(); ++o) {
            const double qv = q_cond(c, o);
            if (qv > 0.0) {
                const double pv = p_cond(c, o);
                if (pv <= 0.0) return kInf;
                s += w * qv * std::log2(qv / pv);
            }
        }
    }
    return s;
}

inline double conditional_kl(const ConditionalPmf<double>& q_cond,
                             const ConditionalPmf<double>& p_cond,
                             const Pmf<double>& weight) {
    return conditional_kl(q_cond, p_cond, weight.mass);
}

inline double conditional_kl(const ConditionalPmf<double>& q_cond,
                             const ConditionalPmf<double>& p_cond,
                             const JointPmf<double>& weight) {
    return conditional_kl(q_cond, p_cond, weight.mass);
}

/// I(row; col) = D(joint || product of marginals). Never negative.
inline double mutual_information(const JointPmf<double>& joint) {
    const auto pr = joint.row_marginal();
    const auto pc = joint.col_marginal();
    double s = 0.0;
    for (int r = 0; r < joint.rows(); ++r)
        for (int c = 0; c < joint.cols(); ++c) {
            const double v = joint(r, c);
            if (v > 0.0) s += v * std::log2(v / (pr[r] * pc[c]));
        }
    return std::max(0.0, s);
}

/// I(X; Xhat | Y) for a joint over (X, Y, Xhat); zero iff X - Y - Xhat.
inline double conditional_mutual_information(const JointPmf3<double>& joint) {
    // sum_{x,y,z} T log2( T(x,y,z) * Qy(y) / (Qxy(x,y) * Qyz(y,z)) )
    std::vector<double> qy(static_cast<std::size_t>(joint.ny()), 0.0);
    std::vector<double> qxy(static_cast<std::size_t>(joint.nx()) * joint.ny(), 0.0);
    std::vector<double> qyz(static_cast<std::size_t>(joint.ny()) * joint.nz(), 0.0);
    for (int x = 0; x < joint.nx(); ++x)
        for (int y = 0; y < joint.ny(); ++y)
            for (int z = 0; z < joint.nz(); ++z) {
                const double v = joint(x, y, z);
                qy[static_cast<std::size_t>(y)] += v;
                qxy[static_cast<std::size_t>(x) * joint.ny() + y] += v;
                qyz[static_cast<std::size_t>(y) * joint.nz() + z] += v;
            }
    double s = 0.0;
    for (int x = 0; x < joint.nx(); ++x)
        for (int y = 0; y < joint.ny(); ++y)
            for (int z = 0; z < joint.nz(); ++z) {
                const double v = joint(x, y, z);
                if (v > 0.0)
                    s += v * std::log2(v * qy[static_cast<std::size_t>(y)] /
                                       (qxy[static_cast<std::size_t>(x) * joint.ny() + y] *
                                        qyz[static_cast<std::size_t>(y) * joint.nz() + z]));
            }
    return std::max(0.0, s);
}

inline double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

inline double positive_part(double a) { return a > 0.0 ? a : 0.0; }

}  // namespace scexp
