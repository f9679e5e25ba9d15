#pragma once

// Alternating-minimization core shared by the rate-distortion solvers and the
// exponent solver. For a fixed source Q_XY it minimizes, over kernels
// W(xhat | x, y),
//
//     I(X;Xhat|Y) + rho * I(Y;Xhat) + lambda * E[d(X,Xhat)],
//
// using the identity I(X;Xhat|Y) + rho I(Y;Xhat)
//   = (1-rho) I(X;Xhat|Y) + rho I(XY;Xhat)
// and the closed-form row update
//   W(xh|x,y)  ~  A(xh|y)^(1-rho) * B(xh)^rho * 2^(-lambda d(x,xh)),
// where A and B are the induced conditional and plain output laws. Fixed
// points satisfy the KKT conditions of the convex objective.

#include "scexp/info.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scexp::detail {

struct BaTols {
    double rel_tol = 1e-13;
    int max_iters = 20000;
    int lambda_steps = 34;   // distortion-multiplier bisection
    int bisect_steps = 24;   // rho bisection in the inner primal
    int golden_steps = 32;   // segment polish
};

inline BaTols scan_tols() { return BaTols{1e-10, 3000, 12, 8, 4}; }
inline BaTols refine_tols() { return BaTols{1e-11, 6000, 14, 10, 8}; }

struct KernelProblem {
    int nx = 0, ny = 0, nxh = 0;
    std::vector<double> q;    // nx*ny
    std::vector<double> qy;   // ny
    std::vector<double> d;    // nx*nxh
    std::vector<int> active;  // flat cells x*ny+y with q > 0
    double floor = 0.0;       // min over kernels of E[d] = sum_xy q * min_h d
    double lambda_max = 1.0;

    KernelProblem(const JointPmf<double>& q_xy, const DistortionMatrix& dist) {
        nx = q_xy.rows();
        ny = q_xy.cols();
        nxh = dist.nxh();
        if (dist.nx() != nx) throw std::invalid_argument("kernel problem: distortion/source mismatch");
        q = q_xy.mass;
        qy.assign(static_cast<std::size_t>(ny), 0.0);
        d.resize(static_cast<std::size_t>(nx) * nxh);
        for (int x = 0; x < nx; ++x)
            for (int h = 0; h < nxh; ++h) d[static_cast<std::size_t>(x) * nxh + h] = dist.value_d(x, h);
        floor = 0.0;
        for (int x = 0; x < nx; ++x) {
            double rmin = d[static_cast<std::size_t>(x) * nxh];
            for (int h = 1; h < nxh; ++h) rmin = std::min(rmin, d[static_cast<std::size_t>(x) * nxh + h]);
            for (int y = 0; y < ny; ++y) {
                const double m = q[static_cast<std::size_t>(x) * ny + y];
                if (m > 0.0) {
                    active.push_back(x * ny + y);
                    qy[static_cast<std::size_t>(y)] += m;
                    floor += m * rmin;
                }
            }
        }
        // lambda_max = 50 / (smallest nonzero gap between distortion values)
        std::vector<double> vals(d);
        std::sort(vals.begin(), vals.end());
        double gap = 0.0;
        for (std::size_t i = 1; i < vals.size(); ++i) {
            const double g = vals[i] - vals[i - 1];
            if (g > 1e-14 && (gap == 0.0 || g < gap)) gap = g;
        }
        if (gap == 0.0) gap = vals.back() > 0 ? vals.back() : 1.0;
        lambda_max = 50.0 / gap;
    }

    double qcell(int x, int y) const { return q[static_cast<std::size_t>(x) * ny + y]; }
    double dval(int x, int h) const { return d[static_cast<std::size_t>(x) * nxh + h]; }
};

struct KernelSolution {
    std::vector<double> w;  // nx*ny*nxh, rows of inactive cells left uniform
    double i_cond = 0.0;    // I(X;Xhat|Y)
    double i_y = 0.0;       // I(Y;Xhat)
    double e_d = 0.0;
    double lambda = 0.0;
    int iterations = 0;

    double g(double rho) const { return i_cond + rho * i_y; }
};

// Evaluates I(X;Xhat|Y), I(Y;Xhat), E d for an explicit kernel.
inline void evaluate_kernel(const KernelProblem& pr, KernelSolution& s) {
    const int ny = pr.ny, nxh = pr.nxh;
    std::vector<double> A(static_cast<std::size_t>(ny) * nxh, 0.0);
    std::vector<double> B(static_cast<std::size_t>(nxh), 0.0);
    for (int cell : pr.active) {
        const int x = cell / ny, y = cell % ny;
        const double m = pr.qcell(x, y);
        for (int h = 0; h < nxh; ++h) {
            const double t = m * s.w[static_cast<std::size_t>(cell) * nxh + h];
            A[static_cast<std::size_t>(y) * nxh + h] += t;
            B[static_cast<std::size_t>(h)] += t;
        }
    }
    double icond = 0.0, iy = 0.0, ed = 0.0;
    for (int cell : pr.active) {
        const int x = cell / ny, y = cell % ny;
        const double m = pr.qcell(x, y);
        for (int h = 0; h < nxh; ++h) {
            const double wv = s.w[static_cast<std::size_t>(cell) * nxh + h];
            if (wv > 0.0) {
                const double t = m * wv;
                icond += t * std::log2(wv * pr.qy[static_cast<std::size_t>(y)] /
                                       A[static_cast<std::size_t>(y) * nxh + h]);
            }
            ed += m * wv * pr.dval(x, h);
        }
    }
    for (int y = 0; y < ny; ++y) {
        const double py = pr.qy[static_cast<std::size_t>(y)];
        if (py <= 0.0) continue;
        for (int h = 0; h < nxh; ++h) {
            const double a = A[static_cast<std::size_t>(y) * nxh + h];
            if (a > 0.0) iy += a * std::log2(a / (py * B[static_cast<std::size_t>(h)]));
        }
    }
    s.i_cond = std::max(0.0, icond);
    s.i_y = std::max(0.0, iy);
    s.e_d = ed;
}

// Finisher for ba_solve. The fixed-(rho, lambda) problem equals
//   min over (A, B) of  F(A,B) = -sum_{x,y} q(x,y) log2 sum_h G(x,y,h),
//   G = A(h|y)^(1-rho) * B(h)^rho * 2^(-lambda d(x,h)),
// which is jointly convex (negative log of a weighted geometric mean). BA can
// stagnate near low-dimensional faces; exact pairwise line searches on the
// simplex blocks converge reliably at these dimensions, and the unbounded
// derivative at zero mass re-grows support that BA collapsed prematurely.
inline void cd_polish(const KernelProblem& pr, double rho, double lam_ln,
                      std::vector<double>& acond, std::vector<double>& b,
                      const std::vector<char>* allowed, int max_sweeps = 400) {
    const int nxh = pr.nxh, ny = pr.ny;
    constexpr double tiny = 1e-300;
    auto coord_pow = [&](double v, double e) { return std::pow(std::max(v, tiny), e); };
    auto gfactor = [&](int x, int y, int h) {
        // G without the block being moved is assembled by the callers
        if (allowed && !(*allowed)[static_cast<std::size_t>(x) * nxh + h]) return 0.0;
        return std::exp(-lam_ln * pr.dval(x, h));
    };

    // exact line search along +t into h1, -t out of h2, within one block
    auto line_search = [&](bool in_a, int y_blk, int h1, int h2) {
        const double coef = in_a ? 1.0 - rho : rho;
        if (coef <= 0.0) return 0.0;
        double* c1 = in_a ? &acond[static_cast<std::size_t>(y_blk) * nxh + h1]
                          : &b[static_cast<std::size_t>(h1)];
        double* c2 = in_a ? &acond[static_cast<std::size_t>(y_blk) * nxh + h2]
                          : &b[static_cast<std::size_t>(h2)];

        struct CellTerms {
            double rest, k1, k2, q;
        };
        std::vector<CellTerms> terms;
        for (int cell : pr.active) {
            const int x = cell / ny, y = cell % ny;
            if (in_a && y != y_blk) continue;
            CellTerms t{0.0, 0.0, 0.0, pr.q[static_cast<std::size_t>(cell)]};
            for (int h = 0; h < nxh; ++h) {
                double g = gfactor(x, y, h);
                if (g == 0.0) continue;
                if (rho < 1.0 && (!in_a || (h != h1 && h != h2)))
                    g *= coord_pow(acond[static_cast<std::size_t>(y) * nxh + h], 1.0 - rho);
                if (rho > 0.0 && (in_a || (h != h1 && h != h2)))
                    g *= coord_pow(b[static_cast<std::size_t>(h)], rho);
                if (h == h1)
                    t.k1 = g;
                else if (h == h2)
                    t.k2 = g;
                else
                    t.rest += g;
            }
            terms.push_back(t);
        }
        const double moved_exp = coef;  // exponent of the moved coordinate
        auto fprime = [&](double t) {
            const double v1 = *c1 + t, v2 = *c2 - t;
            const double p1 = coord_pow(v1, moved_exp), p2 = coord_pow(v2, moved_exp);
            double acc = 0.0;
            for (const auto& ct : terms) {
                const double s = ct.rest + ct.k1 * p1 + ct.k2 * p2;
                if (s <= 0.0) continue;
                const double ds = moved_exp * (ct.k1 * p1 / std::max(v1, tiny) -
                                               ct.k2 * p2 / std::max(v2, tiny));
                acc -= ct.q * ds / s;
            }
            return acc;  // d/dt of F up to the positive 1/ln2 factor
        };
        double tlo = -*c1, thi = *c2;
        if (thi - tlo < 1e-16) return 0.0;
        if (fprime(tlo) >= 0.0) {
            if (tlo == 0.0) return 0.0;
        } else if (fprime(thi) <= 0.0) {
            tlo = thi;
        } else {
            for (int i = 0; i < 70; ++i) {
                const double tm = 0.5 * (tlo + thi);
                (fprime(tm) < 0.0 ? tlo : thi) = tm;
            }
            tlo = 0.5 * (tlo + thi);
        }
        const double t = tlo;
        *c1 += t;
        *c2 -= t;
        return std::abs(t);
    };

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double moved = 0.0;
        if (rho < 1.0)
            for (int y = 0; y < ny; ++y) {
                if (pr.qy[static_cast<std::size_t>(y)] <= 0.0) continue;
                for (int h1 = 0; h1 < nxh; ++h1)
                    for (int h2 = h1 + 1; h2 < nxh; ++h2)
                        moved = std::max(moved, line_search(true, y, h1, h2));
            }
        if (rho > 0.0)
            for (int h1 = 0; h1 < nxh; ++h1)
                for (int h2 = h1 + 1; h2 < nxh; ++h2)
                    moved = std::max(moved, line_search(false, 0, h1, h2));
        if (moved < 1e-13) break;
    }
}

// One (rho, lambda) solve. `allowed` optionally restricts kernel support
// (used for the lambda -> inf limit where only distortion minimizers remain).
inline KernelSolution ba_solve(const KernelProblem& pr, double rho, double lambda,
                               const BaTols& tols, const std::vector<double>* warm = nullptr,
                               const std::vector<char>* allowed = nullptr) {
    const int ny = pr.ny, nxh = pr.nxh;
    KernelSolution s;
    s.lambda = lambda;
    s.w.assign(static_cast<std::size_t>(pr.nx) * ny * nxh, 1.0 / nxh);
    if (warm) s.w = *warm;
    if (allowed) {
        for (int cell : pr.active) {
            const int x = cell / ny;
            double tot = 0.0;
            for (int h = 0; h < nxh; ++h) {
                double& wv = s.w[static_cast<std::size_t>(cell) * nxh + h];
                if (!(*allowed)[static_cast<std::size_t>(x) * nxh + h]) wv = 0.0;
                tot += wv;
            }
            for (int h = 0; h < nxh; ++h) s.w[static_cast<std::size_t>(cell) * nxh + h] /= tot;
        }
    }

    std::vector<double> A(static_cast<std::size_t>(ny) * nxh);
    std::vector<double> B(static_cast<std::size_t>(nxh));
    std::vector<double> logits(static_cast<std::size_t>(nxh));
    const double lam_ln = lambda * M_LN2;  // exp-domain tilt exponent, base e
    double prev = kInf;
    int it = 0;
    for (; it < tols.max_iters; ++it) {
        std::fill(A.begin(), A.end(), 0.0);
        std::fill(B.begin(), B.end(), 0.0);
        for (int cell : pr.active) {
            const int y = cell % ny;
            const double m = pr.q[static_cast<std::size_t>(cell)];
            for (int h = 0; h < nxh; ++h) {
                const double t = m * s.w[static_cast<std::size_t>(cell) * nxh + h];
                A[static_cast<std::size_t>(y) * nxh + h] += t;
                B[static_cast<std::size_t>(h)] += t;
            }
        }
        double obj = 0.0;
        for (int cell : pr.active) {
            const int x = cell / ny, y = cell % ny;
            const double m = pr.q[static_cast<std::size_t>(cell)];
            const double py = pr.qy[static_cast<std::size_t>(y)];
            double mx = -kInf;
            for (int h = 0; h < nxh; ++h) {
                double lg = -lam_ln * pr.dval(x, h);
                if (allowed && !(*allowed)[static_cast<std::size_t>(x) * nxh + h]) {
                    lg = -kInf;
                } else {
                    if (rho < 1.0) {
                        const double a = A[static_cast<std::size_t>(y) * nxh + h] / py;
                        lg = a > 0.0 ? lg + (1.0 - rho) * std::log(a) : -kInf;
                    }
                    if (rho > 0.0 && lg > -kInf) {
                        const double b = B[static_cast<std::size_t>(h)];
                        lg = b > 0.0 ? lg + rho * std::log(b) : -kInf;
                    }
                }
                logits[static_cast<std::size_t>(h)] = lg;
                mx = std::max(mx, lg);
            }
            double tot = 0.0;
            for (int h = 0; h < nxh; ++h) {
                const double e = logits[static_cast<std::size_t>(h)] > -kInf
                                     ? std::exp(logits[static_cast<std::size_t>(h)] - mx)
                                     : 0.0;
                logits[static_cast<std::size_t>(h)] = e;
                tot += e;
            }
            // row objective contribution: -m * log2(sum exp) with the max shift restored
            obj -= m * ((std::log(tot) + mx) / M_LN2);
            for (int h = 0; h < nxh; ++h)
                s.w[static_cast<std::size_t>(cell) * nxh + h] = logits[static_cast<std::size_t>(h)] / tot;
        }
        if (std::abs(prev - obj) <= tols.rel_tol * std::max(1.0, std::abs(obj))) {
            ++it;
            break;
        }
        prev = obj;
    }
    s.iterations = it;

    // convex finisher on (A, B): rescues BA stagnation near facial optima and
    // re-grows prematurely collapsed support, then rebuilds the kernel
    {
        std::vector<double> acond(static_cast<std::size_t>(ny) * nxh, 1.0 / nxh);
        std::vector<double> bvec(static_cast<std::size_t>(nxh), 0.0);
        std::fill(A.begin(), A.end(), 0.0);
        for (int cell : pr.active) {
            const int y = cell % ny;
            const double m = pr.q[static_cast<std::size_t>(cell)];
            for (int h = 0; h < nxh; ++h) {
                const double t = m * s.w[static_cast<std::size_t>(cell) * nxh + h];
                A[static_cast<std::size_t>(y) * nxh + h] += t;
                bvec[static_cast<std::size_t>(h)] += t;
            }
        }
        for (int y = 0; y < ny; ++y) {
            const double py = pr.qy[static_cast<std::size_t>(y)];
            if (py <= 0.0) continue;
            for (int h = 0; h < nxh; ++h)
                acond[static_cast<std::size_t>(y) * nxh + h] =
                    A[static_cast<std::size_t>(y) * nxh + h] / py;
        }
        cd_polish(pr, rho, lam_ln, acond, bvec, allowed);
        for (int cell : pr.active) {
            const int x = cell / ny, y = cell % ny;
            double mx = -kInf;
            for (int h = 0; h < nxh; ++h) {
                double lg = -lam_ln * pr.dval(x, h);
                if (allowed && !(*allowed)[static_cast<std::size_t>(x) * nxh + h]) {
                    lg = -kInf;
                } else {
                    if (rho < 1.0) {
                        const double a = acond[static_cast<std::size_t>(y) * nxh + h];
                        lg = a > 0.0 ? lg + (1.0 - rho) * std::log(a) : -kInf;
                    }
                    if (rho > 0.0 && lg > -kInf) {
                        const double bb = bvec[static_cast<std::size_t>(h)];
                        lg = bb > 0.0 ? lg + rho * std::log(bb) : -kInf;
                    }
                }
                logits[static_cast<std::size_t>(h)] = lg;
                mx = std::max(mx, lg);
            }
            double tot = 0.0;
            for (int h = 0; h < nxh; ++h) {
                const double e = logits[static_cast<std::size_t>(h)] > -kInf
                                     ? std::exp(logits[static_cast<std::size_t>(h)] - mx)
                                     : 0.0;
                logits[static_cast<std::size_t>(h)] = e;
                tot += e;
            }
            for (int h = 0; h < nxh; ++h)
                s.w[static_cast<std::size_t>(cell) * nxh + h] = logits[static_cast<std::size_t>(h)] / tot;
        }
    }
    evaluate_kernel(pr, s);
    return s;
}

inline std::vector<char> distortion_support_mask(const KernelProblem& pr) {
    std::vector<char> allowed(static_cast<std::size_t>(pr.nx) * pr.nxh, 0);
    for (int x = 0; x < pr.nx; ++x) {
        double rmin = pr.dval(x, 0);
        for (int h = 1; h < pr.nxh; ++h) rmin = std::min(rmin, pr.dval(x, h));
        for (int h = 0; h < pr.nxh; ++h)
            allowed[static_cast<std::size_t>(x) * pr.nxh + h] = pr.dval(x, h) <= rmin + 1e-14;
    }
    return allowed;
}

// min G_rho(W) subject to E d <= delta, via bisection on the distortion
// multiplier with a final chord mix between the bracketing kernels. The RD
// curve is convex, so the mix lands on (or above, within bracket width) the
// constrained optimum while keeping the kernel exactly feasible.
inline KernelSolution solve_capped(const KernelProblem& pr, double rho, double delta,
                                   const BaTols& tols,
                                   const std::vector<double>* warm = nullptr) {
    KernelSolution lo_sol = ba_solve(pr, rho, 0.0, tols, warm);
    if (lo_sol.e_d <= delta + 1e-13) return lo_sol;

    KernelSolution hi_sol = ba_solve(pr, rho, pr.lambda_max, tols, &lo_sol.w);
    if (hi_sol.e_d > delta) {
        // delta sits at (or within float dust of) the support floor
        const auto mask = distortion_support_mask(pr);
        hi_sol = ba_solve(pr, rho, 0.0, tols, nullptr, &mask);
    }
    double lo = 0.0, hi = pr.lambda_max;
    for (int i = 0; i < tols.lambda_steps; ++i) {
        const double mid = 0.5 * (lo + hi);
        KernelSolution sm = ba_solve(pr, rho, mid, tols, &lo_sol.w);
        const bool hit = std::abs(sm.e_d - delta) <= 1e-14 * std::max(1.0, delta);
        if (sm.e_d > delta) {
            lo = mid;
            lo_sol = std::move(sm);
        } else {
            hi = mid;
            hi_sol = std::move(sm);
        }
        if (hit || std::abs(lo_sol.e_d - hi_sol.e_d) <= 1e-14) break;
    }
    if (hi_sol.e_d >= delta - 1e-15) return hi_sol;  // boundary already met exactly
    const double spread = lo_sol.e_d - hi_sol.e_d;
    double alpha = spread > 0.0 ? (lo_sol.e_d - delta) / spread : 1.0;
    alpha = std::clamp(alpha, 0.0, 1.0);
    KernelSolution mix;
    mix.lambda = hi_sol.lambda;
    mix.iterations = lo_sol.iterations + hi_sol.iterations;
    mix.w.resize(lo_sol.w.size());
    for (std::size_t i = 0; i < mix.w.size(); ++i)
        mix.w[i] = (1.0 - alpha) * lo_sol.w[i] + alpha * hi_sol.w[i];
    evaluate_kernel(pr, mix);
    if (mix.e_d > delta && hi_sol.e_d <= delta) return hi_sol;
    return mix;
}

}  // namespace scexp::detail
