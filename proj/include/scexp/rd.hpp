#pragma once

// The three rate-distortion functions used by the exponent characterization:
// standard R(Q_X, Delta), conditional R_c(Q_XY, Delta) and remote
// R_r(P_XY, Delta), plus the Delta_min feasibility boundary.

#include "scexp/detail/kernel_ba.hpp"
#include "scexp/errors.hpp"
#include "scexp/info.hpp"

#include <optional>
#include <utility>

namespace scexp {

struct RdResult {
    double rate = 0.0;
    ConditionalPmf<double> achieving_kernel;  // conditioning per solver (x), (x,y) or (y)
    double achieved_distortion = 0.0;
    int iterations = 0;
    bool converged = true;
    double dual_route_gap = 0.0;  // remote solver only: |route (i) - route (ii)|
};

// Delta_min = min over maps xhat(y) of E[d(X, xhat(Y))]; the feasibility floor
// of the communication problem. Exact on the rational track.
struct DeltaMin {
    Rat value;
    std::vector<int> witness;  // optimal xhat per y
};

inline DeltaMin delta_min(const JointPmf<Rat>& p_xy, const DistortionMatrix& d) {
    if (p_xy.rows() != d.nx()) throw std::invalid_argument("delta_min: alphabet mismatch");
    DeltaMin out;
    out.value = 0;
    out.witness.assign(static_cast<std::size_t>(p_xy.cols()), 0);
    for (int y = 0; y < p_xy.cols(); ++y) {
        Rat best;
        int arg = 0;
        for (int h = 0; h < d.nxh(); ++h) {
            Rat acc = 0;
            for (int x = 0; x < p_xy.rows(); ++x) acc += p_xy(x, y) * d(x, h);
            if (h == 0 || acc < best) {
                best = acc;
                arg = h;
            }
        }
        out.value += best;
        out.witness[static_cast<std::size_t>(y)] = arg;
    }
    return out;
}

inline double delta_min_d(const JointPmf<double>& p_xy, const DistortionMatrix& d) {
    double total = 0.0;
    for (int y = 0; y < p_xy.cols(); ++y) {
        double best = kInf;
        for (int h = 0; h < d.nxh(); ++h) {
            double acc = 0.0;
            for (int x = 0; x < p_xy.rows(); ++x) acc += p_xy(x, y) * d.value_d(x, h);
            best = std::min(best, acc);
        }
        total += best;
    }
    return total;
}

// Smallest E[d] reachable by any kernel from (X, Y); the constraint set of the
// conditional-RD and inner-exponent programs is empty below this.
inline double kernel_distortion_floor(const JointPmf<double>& q_xy, const DistortionMatrix& d) {
    double total = 0.0;
    for (int x = 0; x < q_xy.rows(); ++x) {
        double rmin = d.value_d(x, 0);
        for (int h = 1; h < d.nxh(); ++h) rmin = std::min(rmin, d.value_d(x, h));
        for (int y = 0; y < q_xy.cols(); ++y) total += q_xy(x, y) * rmin;
    }
    return total;
}

inline double kernel_distortion_floor(const Pmf<double>& q_x, const DistortionMatrix& d) {
    double total = 0.0;
    for (int x = 0; x < q_x.size(); ++x) {
        double rmin = d.value_d(x, 0);
        for (int h = 1; h < d.nxh(); ++h) rmin = std::min(rmin, d.value_d(x, h));
        total += q_x[x] * rmin;
    }
    return total;
}

// Distortion above which a constant reproduction works, i.e. the zero-rate point.
inline double zero_rate_distortion(const JointPmf<double>& p_xy, const DistortionMatrix& d) {
    const auto px = p_xy.row_marginal();
    double best = kInf;
    for (int h = 0; h < d.nxh(); ++h) {
        double acc = 0.0;
        for (int x = 0; x < px.size(); ++x) acc += px[x] * d.value_d(x, h);
        best = std::min(best, acc);
    }
    return best;
}

namespace detail {

inline ConditionalPmf<double> kernel_from_solution(const KernelProblem& pr,
                                                   const KernelSolution& s) {
    return ConditionalPmf<double>(pr.nx * pr.ny, Alphabet(pr.nxh), s.w);
}

inline RdResult rd_from_solution(const KernelProblem& pr, const KernelSolution& s,
                                 const BaTols& tols) {
    RdResult r;
    r.rate = std::max(0.0, s.i_cond);
    r.achieving_kernel = kernel_from_solution(pr, s);
    r.achieved_distortion = s.e_d;
    r.iterations = s.iterations;
    r.converged = s.iterations < tols.max_iters;
    return r;
}

}  // namespace detail

/// R_c(Q_XY, Delta) = min I(X;Xhat|Y) over kernels Q_{Xhat|XY} with E d <= Delta.
inline RdResult conditional_rd(const JointPmf<double>& q_xy, const DistortionMatrix& d,
                               double delta, const detail::BaTols& tols = {}) {
    detail::KernelProblem pr(q_xy, d);
    if (delta < pr.floor - 1e-12)
        throw InfeasibleError("conditional_rd: delta below the reachable distortion floor");
    const auto sol = detail::solve_capped(pr, 0.0, std::max(delta, pr.floor), tols);
    return detail::rd_from_solution(pr, sol, tols);
}

/// Standard R(Q_X, Delta); the conditional solver with a trivial side alphabet.
inline RdResult standard_rd(const Pmf<double>& q_x, const DistortionMatrix& d, double delta,
                            const detail::BaTols& tols = {}) {
    JointPmf<double> as_joint(q_x.alphabet, Alphabet(1), q_x.mass);
    return conditional_rd(as_joint, d, delta, tols);
}

// d_tilde(y, xhat) = E[d(X, xhat) | Y = y], exact; zero-mass y rows dropped.
struct RemoteDistortionMeasure {
    DistortionMatrix d_tilde;  // rows indexed by kept_y
    std::vector<int> kept_y;
};

inline RemoteDistortionMeasure remote_distortion_measure(const JointPmf<Rat>& p_xy,
                                                         const DistortionMatrix& d) {
    if (p_xy.rows() != d.nx()) throw std::invalid_argument("remote distortion: alphabet mismatch");
    const auto py = p_xy.col_marginal();
    RemoteDistortionMeasure out;
    std::vector<Rat> vals;
    std::vector<std::string> labels;
    for (int y = 0; y < p_xy.cols(); ++y) {
        if (py[y] == 0) continue;
        out.kept_y.push_back(y);
        labels.push_back(p_xy.col_alphabet.label(y));
        for (int h = 0; h < d.nxh(); ++h) {
            Rat acc = 0;
            for (int x = 0; x < p_xy.rows(); ++x) acc += p_xy(x, y) * d(x, h);
            vals.push_back(acc / py[y]);
        }
    }
    out.d_tilde = DistortionMatrix(Alphabet(static_cast<int>(out.kept_y.size()), labels),
                                   d.xhat_alphabet, std::move(vals));
    return out;
}

namespace detail {

// Route (i) of the remote solver: cyclic pairwise coordinate descent on the
// kernel V(xhat|y), minimizing I(Y;Xhat) + lambda E[d(X,Xhat)] with exact 1-D
// line solves. Works directly on P_XY and d; the reduced measure d_tilde is
// never formed on this path.
struct RemoteDirectSolver {
    int nx, ny, nxh;
    std::vector<double> p;    // nx*ny
    std::vector<double> py;   // ny
    std::vector<double> e;    // ny*nxh: sum_x p(x,y) d(x,xh), unnormalized
    std::vector<int> ylive;

    RemoteDirectSolver(const JointPmf<double>& p_xy, const DistortionMatrix& d)
        : nx(p_xy.rows()), ny(p_xy.cols()), nxh(d.nxh()), p(p_xy.mass) {
        py.assign(static_cast<std::size_t>(ny), 0.0);
        e.assign(static_cast<std::size_t>(ny) * nxh, 0.0);
        for (int x = 0; x < nx; ++x)
            for (int y = 0; y < ny; ++y) {
                const double m = p[static_cast<std::size_t>(x) * ny + y];
                py[static_cast<std::size_t>(y)] += m;
                for (int h = 0; h < nxh; ++h)
                    e[static_cast<std::size_t>(y) * nxh + h] += m * d.value_d(x, h);
            }
        for (int y = 0; y < ny; ++y)
            if (py[static_cast<std::size_t>(y)] > 0.0) ylive.push_back(y);
    }

    double distortion(const std::vector<double>& v) const {
        double acc = 0.0;
        for (int y : ylive)
            for (int h = 0; h < nxh; ++h)
                acc += v[static_cast<std::size_t>(y) * nxh + h] * e[static_cast<std::size_t>(y) * nxh + h];
        return acc;
    }

    double rate(const std::vector<double>& v) const {
        std::vector<double> b(static_cast<std::size_t>(nxh), 0.0);
        for (int y : ylive)
            for (int h = 0; h < nxh; ++h)
                b[static_cast<std::size_t>(h)] +=
                    py[static_cast<std::size_t>(y)] * v[static_cast<std::size_t>(y) * nxh + h];
        double iy = 0.0;
        for (int y : ylive) {
            const double w = py[static_cast<std::size_t>(y)];
            for (int h = 0; h < nxh; ++h) {
                const double vv = v[static_cast<std::size_t>(y) * nxh + h];
                if (vv > 0.0) iy += w * vv * std::log2(vv / b[static_cast<std::size_t>(h)]);
            }
        }
        return std::max(0.0, iy);
    }

    // Minimize I + lambda*Ed by sweeps of exact pair moves until stall.
    std::vector<double> solve(double lambda, std::vector<double> v, int max_sweeps = 4000) const {
        std::vector<double> b(static_cast<std::size_t>(nxh), 0.0);
        auto rebuild_b = [&] {
            std::fill(b.begin(), b.end(), 0.0);
            for (int y : ylive)
                for (int h = 0; h < nxh; ++h)
                    b[static_cast<std::size_t>(h)] +=
                        py[static_cast<std::size_t>(y)] * v[static_cast<std::size_t>(y) * nxh + h];
        };
        rebuild_b();
        const double tiny = 1e-300;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double moved = 0.0;
            for (int y : ylive) {
                const double w = py[static_cast<std::size_t>(y)];
                for (int h1 = 0; h1 < nxh; ++h1)
                    for (int h2 = h1 + 1; h2 < nxh; ++h2) {
                        double& v1 = v[static_cast<std::size_t>(y) * nxh + h1];
                        double& v2 = v[static_cast<std::size_t>(y) * nxh + h2];
                        // shift t from h1 to h2; derivative of objective in t is
                        // increasing, so bisect its sign over [-v2, v1]
                        const double de = e[static_cast<std::size_t>(y) * nxh + h2] -
                                          e[static_cast<std::size_t>(y) * nxh + h1];
                        auto deriv = [&](double t) {
                            const double a2 = std::max(v2 + t, tiny);
                            const double a1 = std::max(v1 - t, tiny);
                            const double b2 = std::max(b[static_cast<std::size_t>(h2)] + w * t, tiny);
                            const double b1 = std::max(b[static_cast<std::size_t>(h1)] - w * t, tiny);
                            return w * (std::log2(a2 / b2) - std::log2(a1 / b1)) + lambda * de;
                        };
                        double tlo = -v2, thi = v1;
                        if (thi - tlo < 1e-16) continue;
                        if (deriv(tlo) >= 0.0) {
                            if (tlo == 0.0) continue;
                        } else if (deriv(thi) <= 0.0) {
                            tlo = thi;
                        } else {
                            for (int k = 0; k < 80; ++k) {
                                const double tm = 0.5 * (tlo + thi);
                                (deriv(tm) < 0.0 ? tlo : thi) = tm;
                            }
                            tlo = 0.5 * (tlo + thi);
                        }
                        const double t = tlo;
                        if (t == 0.0) continue;
                        moved = std::max(moved, std::abs(t));
                        v1 -= t;
                        v2 += t;
                        b[static_cast<std::size_t>(h1)] -= w * t;
                        b[static_cast<std::size_t>(h2)] += w * t;
                    }
            }
            if (moved < 1e-14) break;
            if ((sweep & 63) == 63) rebuild_b();  // shed accumulated drift
        }
        return v;
    }
};

}  // namespace detail

/// R_r(P_XY, Delta) = min I(Y;Xhat) over kernels Q_{Xhat|Y} with E d <= Delta.
/// Solved on two independent routes that must agree: a direct convex solve on
/// the kernel, and the reduction to standard_rd under the conditional-mean
/// distortion measure.
inline RdResult remote_rd(const JointPmf<double>& p_xy, const DistortionMatrix& d, double delta,
                          const detail::BaTols& tols = {}) {
    const double dmin = delta_min_d(p_xy, d);
    if (delta < dmin - 1e-12)
        throw InfeasibleError("remote_rd: delta below delta_min");

    // route (ii): Dobrushin-Tsybakov reduction
    const auto py_full = p_xy.col_marginal();
    std::vector<int> kept;
    std::vector<double> py_mass;
    for (int y = 0; y < p_xy.cols(); ++y)
        if (py_full[y] > 0.0) {
            kept.push_back(y);
            py_mass.push_back(py_full[y]);
        }
    std::vector<Rat> dt_vals;
    for (int yk : kept)
        for (int h = 0; h < d.nxh(); ++h) {
            double acc = 0.0;
            for (int x = 0; x < p_xy.rows(); ++x) acc += p_xy(x, yk) * d.value_d(x, h);
            dt_vals.push_back(rat_from_double(acc / py_full[yk]));
        }
    DistortionMatrix d_tilde(static_cast<int>(kept.size()), d.nxh(), std::move(dt_vals));
    Pmf<double> py_pmf(std::move(py_mass));
    // the pointwise floor of the reduced problem equals delta_min up to float dust
    const double reduced_floor = kernel_distortion_floor(py_pmf, d_tilde);
    RdResult reduced = standard_rd(py_pmf, d_tilde, std::max(delta, reduced_floor), tols);

    // route (i): direct pairwise descent with its own distortion bisection
    detail::RemoteDirectSolver ds(p_xy, d);
    std::vector<double> v0(static_cast<std::size_t>(p_xy.cols()) * d.nxh(), 1.0 / d.nxh());
    std::vector<double> vlo = ds.solve(0.0, v0);
    double direct_rate, direct_dist;
    if (ds.distortion(vlo) <= delta + 1e-13) {
        direct_rate = ds.rate(vlo);
        direct_dist = ds.distortion(vlo);
    } else {
        double lo = 0.0, hi = 2.0 * detail::KernelProblem(p_xy, d).lambda_max;
        std::vector<double> vhi = ds.solve(hi, vlo);
        for (int i = 0; i < tols.lambda_steps; ++i) {
            const double mid = 0.5 * (lo + hi);
            std::vector<double> vm = ds.solve(mid, vlo);
            if (ds.distortion(vm) > delta) {
                lo = mid;
                vlo = std::move(vm);
            } else {
                hi = mid;
                vhi = std::move(vm);
            }
        }
        const double dl = ds.distortion(vlo), dh = ds.distortion(vhi);
        double alpha = dl - dh > 0.0 ? (dl - delta) / (dl - dh) : 1.0;
        alpha = std::clamp(alpha, 0.0, 1.0);
        std::vector<double> vm(vlo.size());
        for (std::size_t i = 0; i < vm.size(); ++i)
            vm[i] = (1.0 - alpha) * vlo[i] + alpha * vhi[i];
        if (ds.distortion(vm) > delta + 1e-12) vm = vhi;
        direct_rate = ds.rate(vm);
        direct_dist = ds.distortion(vm);
        vlo = std::move(vm);
    }

    RdResult out = reduced;
    out.dual_route_gap = std::abs(direct_rate - reduced.rate);
    // report the better feasible witness; the kernel conditions on live y only
    if (direct_rate < reduced.rate) {
        std::vector<double> rows;
        for (int yk : kept)
            for (int h = 0; h < d.nxh(); ++h)
                rows.push_back(vlo[static_cast<std::size_t>(yk) * d.nxh() + h]);
        out.rate = direct_rate;
        out.achieved_distortion = direct_dist;
        out.achieving_kernel =
            ConditionalPmf<double>(static_cast<int>(kept.size()), d.xhat_alphabet, std::move(rows));
    }
    return out;
}

}  // namespace scexp
