#pragma once

// Strong converse exponent E(R, Delta) for remote lossy source coding:
//
//   E(R, Delta) = min_{Q_XY} D(Q_XY || P_XY) + E(Q_XY, R, Delta),
//   E(Q_XY, R, Delta) = min_{Q_{Xhat|XY}: E_Q d <= Delta}
//                          I_Q(X;Xhat|Y) + |I_Q(Y;Xhat) - R|+ .
//
// The inner program is convex and solved on two routes: a primal route that
// evaluates the positive part directly on explicit feasible kernels (endpoint
// programs, a bisection on the kink condition I(Y;Xhat) = R, then a convex
// segment polish), and a validation route maximizing the concave dual
// V0(rho) - rho R over a rho grid with golden refinement. The outer
// minimization is nonconvex and handled by exhaustive simplex-grid seeding
// over denominator-k types plus local pattern refinement; grid cells are
// discarded early through a weak-duality lower bound evaluated at the
// incumbent witness's (rho, lambda).

#include "scexp/parallel.hpp"
#include "scexp/rd.hpp"

#include <functional>
#include <map>
#include <memory>

namespace scexp {

struct SolverOptions {
    int grid_k = 0;      // outer type denominator; 0 = auto from |supp P|
    int rho_steps = 65;  // validation-path grid on [0,1]
    double refine_step_floor = 1e-5;
    int refine_max_rounds = 120;
    int workers = 0;     // 0 = SCEXP_WORKERS env or hardware
    double budget = 1e8; // enumeration budget (oracle front end)

    int auto_grid_k(int support_cells) const {
        if (grid_k > 0) return grid_k;
        if (support_cells <= 4) return 24;
        if (support_cells <= 6) return 14;
        if (support_cells <= 9) return 10;
        return 6;
    }
};

struct ExponentDiagnostics {
    int grid_k = 0;
    int refine_rounds = 0;
    std::size_t evaluated_cells = 0;
    double refine_residual = 0.0;
    double inner_gap = 0.0;  // primal-dual certificate at the witness
    double route_gap = 0.0;  // |primal - rho-grid validation path|
    double gap = 0.0;        // reported certified gap (heuristic)
};

struct ExponentResult {
    double value = 0.0;
    JointPmf<double> witness_q_xy;
    ConditionalPmf<double> witness_kernel;  // Q_{Xhat|XY}, cells flattened (x,y)
    double rho_star = 0.0;
    ExponentDiagnostics diagnostics;
};

namespace detail {

struct InnerEval {
    double value = kInf;
    double rho_star = 0.0;
    double dual_best = -kInf;  // max over probed rho of V0(rho) - rho R
    KernelSolution best;       // feasible witness kernel
};

// Per-Q_XY solver for the inner exponent. Rho solves are cached; across a
// rate sweep the bisection probes repeat, so the cache carries most work.
class InnerSolver {
  public:
    InnerSolver(const JointPmf<double>& q_xy, const DistortionMatrix& d, double delta,
                BaTols tols, std::vector<double> warm_kernel = {})
        : pr_(q_xy, d), delta_(delta), tols_(tols), warm_(std::move(warm_kernel)) {
        if (warm_.size() != static_cast<std::size_t>(pr_.nx) * pr_.ny * pr_.nxh) warm_.clear();
    }

    bool feasible() const { return delta_ >= pr_.floor - 1e-12; }

    const KernelSolution& at_rho(double rho) {
        auto it = cache_.find(rho);
        if (it != cache_.end()) return it->second;
        auto sol = solve_capped(pr_, rho, std::max(delta_, pr_.floor), tols_,
                                warm_.empty() ? nullptr : &warm_);
        return cache_.emplace(rho, std::move(sol)).first->second;
    }

    // Weak-duality lower bound on the inner exponent from one unconstrained
    // tilted solve at fixed (rho, lambda); the solve is rate-independent and
    // cached, so sweeps pay for it once per (rho, lambda).
    double dual_bound(double rho, double lambda, double rate) {
        if (!feasible()) return kInf;
        const auto key = std::make_pair(rho, lambda);
        auto it = dual_cache_.find(key);
        if (it == dual_cache_.end()) {
            const KernelSolution s = ba_solve(pr_, rho, lambda, tols_);
            it = dual_cache_.emplace(key, s.g(rho) + lambda * s.e_d).first;
        }
        return it->second - rho * rate - lambda * std::max(delta_, pr_.floor);
    }

    InnerEval eval_primal(double rate) {
        InnerEval out;
        if (!feasible()) return out;
        auto F = [rate](const KernelSolution& s) {
            return s.i_cond + positive_part(s.i_y - rate);
        };
        auto note_dual = [&](double rho, const KernelSolution& s) {
            out.dual_best = std::max(out.dual_best, s.g(rho) - rho * rate);
        };
        const KernelSolution& s0 = at_rho(0.0);
        note_dual(0.0, s0);
        if (s0.i_y <= rate + 1e-12) {
            out.value = F(s0);
            out.rho_star = 0.0;
            out.best = s0;
            return out;
        }
        const KernelSolution& s1 = at_rho(1.0);
        note_dual(1.0, s1);
        if (s1.i_y >= rate - 1e-12) {
            out.value = F(s1);
            out.rho_star = 1.0;
            out.best = s1;
            return out;
        }
        // kink case: the optimum sits where I(Y;Xhat) crosses the rate;
        // h(rho) = I_Y(sol(rho)) - R is nonincreasing (envelope of concave V0)
        double lo = 0.0, hi = 1.0;
        KernelSolution slo = s0, shi = s1;
        for (int i = 0; i < tols_.bisect_steps; ++i) {
            const double mid = 0.5 * (lo + hi);
            const KernelSolution& sm = at_rho(mid);
            note_dual(mid, sm);
            if (sm.i_y > rate) {
                lo = mid;
                slo = sm;
            } else {
                hi = mid;
                shi = sm;
            }
        }
        out.rho_star = 0.5 * (lo + hi);
        KernelSolution best = F(slo) <= F(shi) ? slo : shi;
        // F is convex along the segment between the bracketing kernels; the
        // point with I(Y;Xhat) = R lies on the optimal face
        if (tols_.golden_steps > 0) {
            auto mix_eval = [&](double t) {
                KernelSolution m;
                m.w.resize(slo.w.size());
                for (std::size_t i = 0; i < m.w.size(); ++i)
                    m.w[i] = (1.0 - t) * slo.w[i] + t * shi.w[i];
                evaluate_kernel(pr_, m);
                return m;
            };
            constexpr double kGolden = 0.6180339887498949;
            double a = 0.0, b = 1.0;
            double c = b - kGolden * (b - a), e = a + kGolden * (b - a);
            KernelSolution sc = mix_eval(c), se = mix_eval(e);
            for (int i = 0; i < tols_.golden_steps; ++i) {
                if (F(sc) < F(se)) {
                    b = e;
                    e = c;
                    se = std::move(sc);
                    c = b - kGolden * (b - a);
                    sc = mix_eval(c);
                } else {
                    a = c;
                    c = e;
                    sc = std::move(se);
                    e = a + kGolden * (b - a);
                    se = mix_eval(e);
                }
            }
            const KernelSolution& sbest = F(sc) < F(se) ? sc : se;
            if (F(sbest) < F(best)) best = sbest;
        }
        out.value = F(best);
        out.best = std::move(best);
        return out;
    }

    // Validation route: max over a rho grid of V0(rho) - rho R, one golden pass.
    double eval_rho_form(double rate, int rho_steps) {
        if (!feasible()) return kInf;
        auto V = [&](double rho) { return at_rho(rho).g(rho) - rho * rate; };
        double best = -kInf;
        int arg = 0;
        for (int i = 0; i < rho_steps; ++i) {
            const double rho = static_cast<double>(i) / (rho_steps - 1);
            const double v = V(rho);
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        double a = std::max(0, arg - 1) / static_cast<double>(rho_steps - 1);
        double b = std::min(rho_steps - 1, arg + 1) / static_cast<double>(rho_steps - 1);
        constexpr double kGolden = 0.6180339887498949;
        double c = b - kGolden * (b - a), e = a + kGolden * (b - a);
        double fc = V(c), fe = V(e);
        for (int i = 0; i < 40; ++i) {
            if (fc > fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - kGolden * (b - a);
                fc = V(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + kGolden * (b - a);
                fe = V(e);
            }
        }
        return std::max(best, std::max(fc, fe));
    }

    const KernelProblem& problem() const { return pr_; }

  private:
    KernelProblem pr_;
    double delta_;
    BaTols tols_;
    std::vector<double> warm_;
    std::map<double, KernelSolution> cache_;
    std::map<std::pair<double, double>, double> dual_cache_;
};

// Enumerates denominator-k types on the support cells of an m-cell simplex.
inline void enumerate_simplex_grid(int m, int k, const std::vector<char>& support,
                                   const std::function<void(const std::vector<double>&)>& emit) {
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    std::vector<double> q(static_cast<std::size_t>(m), 0.0);
    std::vector<int> cells;
    for (int i = 0; i < m; ++i)
        if (support[static_cast<std::size_t>(i)]) cells.push_back(i);
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int rem) {
        if (pos + 1 == cells.size()) {
            counts[static_cast<std::size_t>(cells[pos])] = rem;
            for (int i = 0; i < m; ++i)
                q[static_cast<std::size_t>(i)] = static_cast<double>(counts[static_cast<std::size_t>(i)]) / k;
            emit(q);
            counts[static_cast<std::size_t>(cells[pos])] = 0;
            return;
        }
        for (int c = 0; c <= rem; ++c) {
            counts[static_cast<std::size_t>(cells[pos])] = c;
            rec(pos + 1, rem - c);
        }
        counts[static_cast<std::size_t>(cells[pos])] = 0;
    };
    if (!cells.empty()) rec(0, k);
}

enum class EvalMode { Scan, Refine, Final };

inline constexpr std::size_t kOffGrid = static_cast<std::size_t>(-1);

struct SimplexSearchOutcome {
    std::vector<double> q;
    double value = kInf;
    double refine_residual = 0.0;
    int rounds = 0;
    std::size_t evaluated = 0;
    int grid_k = 0;
};

// Grid seeding + pattern refinement for min over the simplex. The caller owns
// the candidate list so that per-cell solver state can persist across calls
// (rate sweeps). `evaluate(idx, q, mode, incumbent)` may return anything >=
// the true value when it can prove the true value >= incumbent; idx is
// kOffGrid for refinement probes. Must be safe to call concurrently for
// distinct idx.
inline SimplexSearchOutcome simplex_minimize(
    int m, const std::vector<char>& support, const SolverOptions& opts, int grid_k,
    const std::vector<std::vector<double>>& cand,
    const std::vector<std::pair<double, std::size_t>>& order,  // (lower bound, index) ascending
    const std::function<double(std::size_t, const std::vector<double>&, EvalMode, double)>& evaluate,
    const std::vector<double>& start_q, double start_value) {
    SimplexSearchOutcome out;
    out.grid_k = grid_k;

    double best = start_value;
    std::size_t best_idx = kOffGrid;
    const std::size_t batch = 64;
    std::vector<double> vals(batch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
        if (order[start].first >= best) break;  // sorted: nothing beyond can win
        const std::size_t stop = std::min(order.size(), start + batch);
        const double incumbent = best;
        parallel_for(stop - start, opts.workers, [&](std::size_t j) {
            const auto& [lb, idx] = order[start + j];
            vals[j] = lb >= incumbent ? kInf : evaluate(idx, cand[idx], EvalMode::Scan, incumbent);
        });
        for (std::size_t j = 0; j < stop - start; ++j) {
            ++out.evaluated;
            if (vals[j] < best) {
                best = vals[j];
                best_idx = order[start + j].second;
            }
        }
    }

    // pattern refinement with shrinking step; probes are pruned against the
    // running best (plus a small margin so near-ties still get measured)
    std::vector<double> q = best_idx == kOffGrid ? start_q : cand[best_idx];
    best = evaluate(kOffGrid, q, EvalMode::Refine, kInf);
    double step = 1.0 / (2.0 * grid_k);
    double last_improvement = 0.0, slope_est = 0.0;
    int rounds = 0;
    while (step >= opts.refine_step_floor && rounds < opts.refine_max_rounds) {
        ++rounds;
        bool improved = false;
        for (int i = 0; i < m; ++i) {
            if (!support[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < m; ++j) {
                if (j == i || !support[static_cast<std::size_t>(j)]) continue;
                const double t = std::min(step, q[static_cast<std::size_t>(j)]);
                if (t <= 1e-15) continue;
                std::vector<double> qt = q;
                qt[static_cast<std::size_t>(i)] += t;
                qt[static_cast<std::size_t>(j)] -= t;
                const double v = evaluate(kOffGrid, qt, EvalMode::Refine, best + 1e-4);
                ++out.evaluated;
                if (v < kInf) slope_est = std::max(slope_est, std::abs(v - best) / t);
                if (v < best - 1e-14) {
                    last_improvement = best - v;
                    best = v;
                    q = std::move(qt);
                    improved = true;
                }
            }
        }
        if (!improved) {
            step *= 0.5;
            slope_est = 0.0;
        }
    }
    out.q = q;
    out.value = evaluate(kOffGrid, q, EvalMode::Final, kInf);
    out.rounds = rounds;
    // the refine-stage evaluator has its own bias; measure it at the witness
    const double bias = std::abs(best - out.value);
    out.refine_residual = std::max(last_improvement, 2.0 * step * std::max(slope_est, 1.0)) + bias;
    return out;
}

// Convenience front end used by the reduction solvers: builds the grid, seeds
// with `seeds`, no per-cell state.
inline SimplexSearchOutcome simplex_minimize_simple(
    int m, const std::vector<char>& support, const SolverOptions& opts,
    const std::function<double(const std::vector<double>&)>& lower_bound,
    const std::function<double(const std::vector<double>&, EvalMode, double)>& evaluate,
    const std::vector<std::vector<double>>& seeds) {
    int support_cells = 0;
    for (char s : support) support_cells += s ? 1 : 0;
    const int k = opts.auto_grid_k(support_cells);

    std::vector<std::vector<double>> cand;
    enumerate_simplex_grid(m, k, support, [&](const std::vector<double>& q) { cand.push_back(q); });
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        const double lb = lower_bound(cand[i]);
        if (lb < kInf) order.emplace_back(lb, i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    // evaluate seeds sequentially to establish the incumbent
    double start_value = kInf;
    std::vector<double> start_q;
    for (const auto& s : seeds) {
        const double v = evaluate(s, EvalMode::Refine, kInf);
        if (v < start_value) {
            start_value = v;
            start_q = s;
        }
    }
    if (start_q.empty() && order.empty())
        throw InfeasibleError("simplex search: empty candidate set");
    if (start_q.empty()) start_q = cand[order.front().second];

    auto indexed = [&](std::size_t, const std::vector<double>& q, EvalMode mode,
                       double incumbent) { return evaluate(q, mode, incumbent); };
    return simplex_minimize(m, support, opts, k, cand, order, indexed, start_q, start_value);
}

inline std::vector<char> support_mask(const JointPmf<double>& p) {
    std::vector<char> s;
    s.reserve(p.mass.size());
    for (double v : p.mass) s.push_back(v > 0.0 ? 1 : 0);
    return s;
}

inline double kl_raw(const std::vector<double>& q, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0) {
            if (p[i] <= 0.0) return kInf;
            s += q[i] * std::log2(q[i] / p[i]);
        }
    }
    return std::max(0.0, s);
}

inline BaTols tols_for(EvalMode mode) {
    switch (mode) {
        case EvalMode::Scan: return scan_tols();
        case EvalMode::Refine: return refine_tols();
        default: return BaTols{};
    }
}

}  // namespace detail

/// E(Q_XY, R, Delta): the inner exponent at a fixed source law. Returns +inf
/// (as a value, not an exception) when no kernel can meet the distortion budget.
inline ExponentResult inner_exponent(const JointPmf<double>& q_xy, double rate, double delta,
                                     const DistortionMatrix& d, const SolverOptions& opts = {}) {
    ExponentResult out;
    out.witness_q_xy = q_xy;
    detail::InnerSolver solver(q_xy, d, delta, detail::BaTols{});
    if (!solver.feasible()) {
        out.value = kInf;
        return out;
    }
    auto primal = solver.eval_primal(rate);
    const double rho_form = solver.eval_rho_form(rate, opts.rho_steps);
    out.value = primal.value;
    out.rho_star = primal.rho_star;
    out.witness_kernel = detail::kernel_from_solution(solver.problem(), primal.best);
    out.diagnostics.inner_gap = std::max(0.0, primal.value - primal.dual_best);
    out.diagnostics.route_gap = std::abs(primal.value - rho_form);
    out.diagnostics.gap = std::max({out.diagnostics.inner_gap, out.diagnostics.route_gap, 1e-9});
    return out;
}

/// D(Q||P) + E(Q, R, Delta) for an explicitly supplied Q_XY; upper-bounds
/// exponent(...).value by definition of the outer min.
inline double outer_objective(const JointPmf<double>& p_xy, const JointPmf<double>& q_xy,
                              double rate, double delta, const DistortionMatrix& d) {
    const double dv = kl_divergence(q_xy, p_xy);
    if (dv == kInf) return kInf;
    detail::InnerSolver solver(q_xy, d, delta, detail::BaTols{});
    if (!solver.feasible()) return kInf;
    return dv + solver.eval_primal(rate).value;
}

// Outer search: grid + refinement with weak-duality pruning against the
// incumbent. The per-cell inner solvers (and their rho caches) persist across
// calls, so rate sweeps reuse almost all kernel solves.
class ExponentSolver {
  public:
    ExponentSolver(JointPmf<double> p_xy, DistortionMatrix d, double delta,
                   SolverOptions opts = {})
        : p_(std::move(p_xy)), d_(std::move(d)), delta_(delta), opts_(opts) {
        if (delta_ < delta_min_d(p_, d_) - 1e-12)
            throw InfeasibleError("exponent: delta below delta_min of the source");
        support_ = detail::support_mask(p_);
        int support_cells = 0;
        for (char s : support_) support_cells += s ? 1 : 0;
        grid_k_ = opts_.auto_grid_k(support_cells);
        detail::enumerate_simplex_grid(p_.rows() * p_.cols(), grid_k_, support_,
                                       [&](const std::vector<double>& q) { cand_.push_back(q); });
        for (std::size_t i = 0; i < cand_.size(); ++i) {
            const double lb = detail::kl_raw(cand_[i], p_.mass);
            if (lb < kInf) order_.emplace_back(lb, i);
        }
        std::stable_sort(order_.begin(), order_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        cell_.resize(cand_.size());
    }

    ExponentResult solve(double rate, const JointPmf<double>* warm_seed = nullptr) {
        const int m = p_.rows() * p_.cols();

        // incumbent and pruning hint from Q = P (always feasible)
        detail::InnerSolver at_p(p_, d_, delta_, detail::BaTols{});
        const auto p_eval = at_p.eval_primal(rate);
        hint_rho_ = quantize_hint(p_eval.rho_star, 32.0);
        hint_lambda_ = quantize_hint(p_eval.best.lambda, 8.0);
        refine_best_ = p_eval.value;

        if (p_eval.value <= 1e-9) {
            ExponentResult out;
            out.value = p_eval.value;
            out.witness_q_xy = p_;
            out.witness_kernel = detail::kernel_from_solution(at_p.problem(), p_eval.best);
            out.rho_star = p_eval.rho_star;
            out.diagnostics.grid_k = grid_k_;
            out.diagnostics.inner_gap = std::max(0.0, p_eval.value - p_eval.dual_best);
            out.diagnostics.gap = std::max(out.diagnostics.inner_gap + 1e-9, 1e-7);
            return out;
        }

        std::vector<double> start_q = p_.mass;
        double start_value = p_eval.value;
        if (warm_seed) {
            const double v = outer_value(detail::kOffGrid, warm_seed->mass,
                                         detail::EvalMode::Refine, kInf, rate);
            if (v < start_value) {
                start_value = v;
                start_q = warm_seed->mass;
            }
        }

        auto evaluate = [this, rate](std::size_t idx, const std::vector<double>& q,
                                     detail::EvalMode mode, double incumbent) {
            return outer_value(idx, q, mode, incumbent, rate);
        };
        auto sr = detail::simplex_minimize(m, support_, opts_, grid_k_, cand_, order_, evaluate,
                                           start_q, start_value);

        ExponentResult out;
        out.witness_q_xy = JointPmf<double>(p_.row_alphabet, p_.col_alphabet, sr.q);
        detail::InnerSolver fine(out.witness_q_xy, d_, delta_, detail::BaTols{});
        auto primal = fine.eval_primal(rate);
        const double dq = detail::kl_raw(sr.q, p_.mass);
        out.value = dq + primal.value;
        // Q = P is always a witness candidate; never report worse than it
        if (p_eval.value < out.value) {
            out.value = p_eval.value;
            out.witness_q_xy = p_;
            primal = p_eval;
            out.rho_star = p_eval.rho_star;
            out.witness_kernel = detail::kernel_from_solution(at_p.problem(), p_eval.best);
        } else {
            out.rho_star = primal.rho_star;
            out.witness_kernel = detail::kernel_from_solution(fine.problem(), primal.best);
        }
        out.diagnostics.grid_k = sr.grid_k;
        out.diagnostics.refine_rounds = sr.rounds;
        out.diagnostics.evaluated_cells = sr.evaluated;
        out.diagnostics.refine_residual = sr.refine_residual;
        out.diagnostics.inner_gap = std::max(0.0, primal.value - primal.dual_best);
        out.diagnostics.route_gap = 0.0;  // dual-path validation lives in inner_exponent
        out.diagnostics.gap = std::max({out.diagnostics.inner_gap + 1e-9,
                                        sr.refine_residual, 1e-7});
        return out;
    }

    const JointPmf<double>& source() const { return p_; }

  private:
    double outer_value(std::size_t idx, const std::vector<double>& q, detail::EvalMode mode,
                       double incumbent, double rate) {
        const double dv = detail::kl_raw(q, p_.mass);
        if (dv == kInf || dv >= incumbent) return kInf;

        detail::InnerSolver* solver = nullptr;
        std::unique_ptr<detail::InnerSolver> local;
        if (idx != detail::kOffGrid) {
            // persistent scan-precision solver for this grid cell
            if (!cell_[idx])
                cell_[idx] = std::make_unique<detail::InnerSolver>(
                    JointPmf<double>(p_.row_alphabet, p_.col_alphabet, q), d_, delta_,
                    detail::scan_tols());
            solver = cell_[idx].get();
        } else {
            local = std::make_unique<detail::InnerSolver>(
                JointPmf<double>(p_.row_alphabet, p_.col_alphabet, q), d_, delta_,
                detail::tols_for(mode), refine_warm_kernel_);
            solver = local.get();
        }
        if (!solver->feasible()) return kInf;
        if (mode != detail::EvalMode::Final && incumbent < kInf) {
            const double lb = solver->dual_bound(hint_rho_, hint_lambda_, rate);
            if (dv + std::max(0.0, lb) - 1e-5 >= incumbent) return kInf;
        }
        const auto ev = solver->eval_primal(rate);
        if (mode == detail::EvalMode::Refine && dv + ev.value < refine_best_) {
            // sequential during refinement: retarget the pruning multipliers
            refine_best_ = dv + ev.value;
            hint_rho_ = quantize_hint(ev.rho_star, 32.0);
            hint_lambda_ = quantize_hint(ev.best.lambda, 8.0);
            refine_warm_kernel_ = ev.best.w;
        }
        return dv + ev.value;
    }

    static double quantize_hint(double v, double scale) {
        return std::round(v * scale) / scale;
    }

    JointPmf<double> p_;
    DistortionMatrix d_;
    double delta_;
    SolverOptions opts_;
    std::vector<char> support_;
    int grid_k_ = 0;
    std::vector<std::vector<double>> cand_;
    std::vector<std::pair<double, std::size_t>> order_;
    std::vector<std::unique_ptr<detail::InnerSolver>> cell_;
    std::vector<double> refine_warm_kernel_;
    double refine_best_ = kInf;
    double hint_rho_ = 0.0, hint_lambda_ = 0.0;
};

/// Theorem-level exponent E(R, Delta).
inline ExponentResult exponent(const JointPmf<double>& p_xy, double rate, double delta,
                               const DistortionMatrix& d, const SolverOptions& opts = {}) {
    ExponentSolver solver(p_xy, d, delta, opts);
    return solver.solve(rate);
}

/// No-compression regime (R >= log2 |Xhat|): min_Q D(Q||P) + R_c(Q, Delta).
inline ExponentResult exponent_no_compression(const JointPmf<double>& p_xy, double delta,
                                              const DistortionMatrix& d,
                                              const SolverOptions& opts = {}) {
    // no rate constraint here, so delta is meaningful all the way down to the
    // kernel floor; above delta_min the value is identically zero (Q = P wins)
    if (delta < kernel_distortion_floor(p_xy, d) - 1e-12)
        throw InfeasibleError("exponent_no_compression: delta below the distortion floor");
    const int m = p_xy.rows() * p_xy.cols();
    const auto support = detail::support_mask(p_xy);
    // dual-prune hint: the distortion multiplier at Q = P
    const auto rc_p = conditional_rd(p_xy, d, delta);
    double hint_lambda = 0.0;
    {
        detail::InnerSolver probe(p_xy, d, delta, detail::BaTols{});
        hint_lambda = probe.at_rho(0.0).lambda;
    }
    auto lower_bound = [&](const std::vector<double>& q) { return detail::kl_raw(q, p_xy.mass); };
    auto evaluate = [&](const std::vector<double>& q, detail::EvalMode mode, double incumbent) {
        const double dv = detail::kl_raw(q, p_xy.mass);
        if (dv == kInf || dv >= incumbent) return kInf;
        JointPmf<double> qj(p_xy.row_alphabet, p_xy.col_alphabet, q);
        detail::InnerSolver solver(qj, d, delta, detail::tols_for(mode));
        if (!solver.feasible()) return kInf;
        if (mode != detail::EvalMode::Final && incumbent < kInf) {
            const double lb = solver.dual_bound(0.0, hint_lambda, 0.0);
            if (dv + std::max(0.0, lb) - 1e-5 >= incumbent) return kInf;
        }
        return dv + solver.at_rho(0.0).i_cond;
    };
    auto sr = detail::simplex_minimize_simple(m, support, opts, lower_bound, evaluate, {p_xy.mass});
    ExponentResult out;
    out.witness_q_xy = JointPmf<double>(p_xy.row_alphabet, p_xy.col_alphabet, sr.q);
    const auto rc = conditional_rd(out.witness_q_xy, d, delta);
    out.value = detail::kl_raw(sr.q, p_xy.mass) + rc.rate;
    out.witness_kernel = rc.achieving_kernel;
    if (rc_p.rate < out.value) {  // Q = P fallback
        out.value = rc_p.rate;
        out.witness_q_xy = p_xy;
        out.witness_kernel = rc_p.achieving_kernel;
    }
    out.rho_star = 0.0;
    out.diagnostics.grid_k = sr.grid_k;
    out.diagnostics.refine_rounds = sr.rounds;
    out.diagnostics.evaluated_cells = sr.evaluated;
    out.diagnostics.refine_residual = sr.refine_residual;
    out.diagnostics.inner_gap = 1e-8;
    out.diagnostics.gap = std::max(sr.refine_residual, 1e-7);
    return out;
}

/// Noiseless regime (X = Y a.s.): min_{Q_X} D(Q_X||P_X) + |R(Q_X, Delta) - R|+.
inline ExponentResult exponent_noiseless(const Pmf<double>& p_x, double rate, double delta,
                                         const DistortionMatrix& d,
                                         const SolverOptions& opts = {}) {
    if (delta < kernel_distortion_floor(p_x, d) - 1e-12)
        throw InfeasibleError("exponent_noiseless: delta below the distortion floor");
    const int m = p_x.size();
    std::vector<char> support;
    for (double v : p_x.mass) support.push_back(v > 0.0 ? 1 : 0);
    auto as_joint = [&](const std::vector<double>& q) {
        return JointPmf<double>(p_x.alphabet, Alphabet(1), q);
    };
    double hint_lambda = 0.0;
    {
        detail::InnerSolver probe(as_joint(p_x.mass), d, delta, detail::BaTols{});
        hint_lambda = probe.at_rho(0.0).lambda;
    }
    auto lower_bound = [&](const std::vector<double>& q) { return detail::kl_raw(q, p_x.mass); };
    auto evaluate = [&](const std::vector<double>& q, detail::EvalMode mode, double incumbent) {
        const double dv = detail::kl_raw(q, p_x.mass);
        if (dv == kInf || dv >= incumbent) return kInf;
        detail::InnerSolver solver(as_joint(q), d, delta, detail::tols_for(mode));
        if (!solver.feasible()) return kInf;
        if (mode != detail::EvalMode::Final && incumbent < kInf) {
            const double lb = solver.dual_bound(0.0, hint_lambda, 0.0);
            if (dv + positive_part(std::max(0.0, lb) - rate) - 1e-5 >= incumbent) return kInf;
        }
        return dv + positive_part(solver.at_rho(0.0).i_cond - rate);
    };
    auto sr = detail::simplex_minimize_simple(m, support, opts, lower_bound, evaluate, {p_x.mass});

    ExponentResult out;
    // witness reported as the diagonal joint the reduction came from
    std::vector<double> diag(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i)
        diag[static_cast<std::size_t>(i) * m + i] = sr.q[static_cast<std::size_t>(i)];
    out.witness_q_xy = JointPmf<double>(p_x.alphabet, p_x.alphabet, diag);
    Pmf<double> qp(p_x.alphabet, sr.q);
    const auto rd = standard_rd(qp, d, delta);
    out.value = detail::kl_raw(sr.q, p_x.mass) + positive_part(rd.rate - rate);
    out.witness_kernel = rd.achieving_kernel;
    out.rho_star = rd.rate > rate ? 1.0 : 0.0;
    out.diagnostics.grid_k = sr.grid_k;
    out.diagnostics.refine_rounds = sr.rounds;
    out.diagnostics.evaluated_cells = sr.evaluated;
    out.diagnostics.refine_residual = sr.refine_residual;
    out.diagnostics.inner_gap = 1e-8;
    out.diagnostics.gap = std::max(sr.refine_residual, 1e-7);
    return out;
}

/// Proposition-1 boundary: E(R, Delta) > 0 exactly for R below this threshold.
inline double positivity_threshold(const JointPmf<double>& p_xy, double delta,
                                   const DistortionMatrix& d) {
    return remote_rd(p_xy, d, delta).rate;
}

/// Exponent along an ascending rate grid, warm-starting the outer witness.
inline std::vector<std::pair<double, ExponentResult>> sweep_rate(
    const JointPmf<double>& p_xy, double delta, const DistortionMatrix& d,
    const std::vector<double>& r_grid, const SolverOptions& opts = {}) {
    ExponentSolver solver(p_xy, d, delta, opts);
    std::vector<std::pair<double, ExponentResult>> out;
    out.reserve(r_grid.size());
    const JointPmf<double>* warm = nullptr;
    for (double r : r_grid) {
        if (!out.empty() && out.back().first == r) {
            out.push_back(out.back());  // identical grid points give identical rows
            continue;
        }
        out.emplace_back(r, solver.solve(r, warm));
        warm = &out.back().second.witness_q_xy;
    }
    return out;
}

}  // namespace scexp
