#pragma once

// Ground truth at tiny blocklength: the exact optimal correct-reconstruction
// probability p_c(n, R, Delta), a certified finite-n converse bound B(n)
// assembled from exact type counts, and trajectory reports combining both
// with the constructed scheme's exact success probability.

#include "scexp/types_method.hpp"

#include <random>

namespace scexp {

struct OracleReport {
    int n = 0;
    unsigned long long m = 0;
    Rat p_c;                   // exact when exhaustive, else a hill-climb lower bound
    bool exhaustive = false;
    Rat scheme_prob;
    Rat converse_bound;        // B(n), clamped to 1
    double exponent_estimate = 0.0;  // -(1/n) log2 p_c
    std::vector<std::vector<int>> codebook;  // p_c witness decoder outputs
    std::vector<int> encoder;                // p_c witness: message per y-rank, 0 = none
    std::string error;         // per-n failure note in trajectories
};

namespace detail {

struct PcWorkspace {
    int n, nx, ny, nxh;
    std::size_t y_count, cand_count;
    std::vector<Rat> value;      // y_count x cand_count: P(y) * success(y, cand)
    std::vector<double> value_d;
    std::vector<std::size_t> live_y;

    PcWorkspace(const JointPmf<Rat>& p_xy, const DistortionMatrix& d, const Rat& delta, int n_)
        : n(n_), nx(p_xy.rows()), ny(p_xy.cols()), nxh(d.nxh()) {
        y_count = 1;
        for (int i = 0; i < n; ++i) y_count *= static_cast<std::size_t>(ny);
        cand_count = 1;
        for (int i = 0; i < n; ++i) cand_count *= static_cast<std::size_t>(nxh);

        const auto py = p_xy.col_marginal();
        std::vector<Rat> cond_rows(static_cast<std::size_t>(ny) * nx, Rat(0));
        for (int y = 0; y < ny; ++y) {
            if (py[y] == 0) {
                cond_rows[static_cast<std::size_t>(y) * nx] = 1;
                continue;
            }
            for (int x = 0; x < nx; ++x)
                cond_rows[static_cast<std::size_t>(y) * nx + x] = p_xy(x, y) / py[y];
        }
        const ConditionalPmf<Rat> cond(ny, Alphabet(nx), cond_rows);

        value.assign(y_count * cand_count, Rat(0));
        value_d.assign(y_count * cand_count, 0.0);
        std::map<std::vector<int>, Rat> success_memo;
        for (std::size_t yr = 0; yr < y_count; ++yr) {
            const auto y = sequence_of_rank(yr, n, ny);
            Rat p = 1;
            for (int v : y) {
                if (py[v] == 0) {
                    p = 0;
                    break;
                }
                p *= py[v];
            }
            if (p == 0) continue;
            live_y.push_back(yr);
            for (std::size_t cr = 0; cr < cand_count; ++cr) {
                const auto w = sequence_of_rank(cr, n, nxh);
                auto key = joint_counts(y, w, ny, nxh);
                auto it = success_memo.find(key);
                if (it == success_memo.end()) {
                    Rat sp = success_from_pair_counts(key, ny, nxh, cond, d, delta, n);
                    it = success_memo.emplace(std::move(key), std::move(sp)).first;
                }
                Rat v = p * it->second;
                value_d[yr * cand_count + cr] = to_double(v);
                value[yr * cand_count + cr] = std::move(v);
            }
        }
    }

    Rat exact_value(const std::vector<std::size_t>& book) const {
        Rat total = 0;
        for (std::size_t yr : live_y) {
            const Rat* row = &value[yr * cand_count];
            const Rat* best = &row[book.front()];
            for (std::size_t c : book)
                if (row[c] > *best) best = &row[c];
            total += *best;
        }
        return total;
    }

    double approx_value(const std::vector<std::size_t>& book) const {
        double total = 0.0;
        for (std::size_t yr : live_y) {
            const double* row = &value_d[yr * cand_count];
            double best = row[book.front()];
            for (std::size_t c : book) best = std::max(best, row[c]);
            total += best;
        }
        return total;
    }

    // encoder induced by a codebook: each y to its best codeword (first max)
    std::vector<int> induced_encoder(const std::vector<std::size_t>& book) const {
        std::vector<int> enc(y_count, 0);
        for (std::size_t yr : live_y) {
            const Rat* row = &value[yr * cand_count];
            std::size_t arg = 0;
            for (std::size_t i = 1; i < book.size(); ++i)
                if (row[book[i]] > row[book[arg]]) arg = i;
            enc[yr] = static_cast<int>(arg) + 1;
        }
        return enc;
    }
};

inline double log_choose(std::size_t n, std::size_t k) {
    if (k > n) return -kInf;
    k = std::min(k, n - k);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        s += std::log2(static_cast<double>(n - i)) - std::log2(static_cast<double>(i + 1));
    return s;
}

}  // namespace detail

/// Exact p_c(n, R, Delta) = max over M-message codes of the correct
/// reconstruction probability. The decoder's codebook determines everything
/// (the optimal encoder maps each y to its best codeword), so the search runs
/// over codebooks of size min(M, |Xhat|^n); equivalent to, and exponentially
/// cheaper than, enumerating encoders.
inline OracleReport optimal_pc(const JointPmf<Rat>& p_xy, const DistortionMatrix& d,
                               const Rat& delta, int n, double rate, double budget = 1e8) {
    OracleReport rep;
    rep.n = n;
    rep.m = message_budget(n, rate);
    if (rep.m < 1) throw std::invalid_argument("optimal_pc: message budget below 1");
    detail::PcWorkspace ws(p_xy, d, delta, n);
    const std::size_t k = static_cast<std::size_t>(
        std::min<unsigned long long>(rep.m, static_cast<unsigned long long>(ws.cand_count)));
    if (detail::log_choose(ws.cand_count, k) > std::log2(budget))
        throw BudgetError("optimal_pc: codebook enumeration exceeds budget");

    std::vector<std::size_t> book(k);
    for (std::size_t i = 0; i < k; ++i) book[i] = i;
    std::vector<std::size_t> best_book = book;
    Rat best = ws.exact_value(book);
    while (true) {
        // next combination in lexicographic order
        std::size_t i = k;
        while (i > 0 && book[i - 1] == ws.cand_count - k + (i - 1)) --i;
        if (i == 0) break;
        ++book[i - 1];
        for (std::size_t j = i; j < k; ++j) book[j] = book[j - 1] + 1;
        Rat v = ws.exact_value(book);
        if (v > best) {
            best = std::move(v);
            best_book = book;
        }
    }
    rep.p_c = best;
    rep.exhaustive = true;
    for (std::size_t c : best_book) rep.codebook.push_back(sequence_of_rank(c, n, ws.nxh));
    rep.encoder = ws.induced_encoder(best_book);
    rep.exponent_estimate = rep.p_c > 0 ? -log2_rat(rep.p_c) / n : kInf;
    return rep;
}

/// Best-improvement local search over codebooks; a certified lower bound on
/// p_c (the reported value is the exact evaluation of the found witness).
inline OracleReport hill_climb_pc(const JointPmf<Rat>& p_xy, const DistortionMatrix& d,
                                  const Rat& delta, int n, double rate,
                                  const std::vector<std::vector<int>>& seed_words = {},
                                  int restarts = 6, unsigned long long rng_seed = 0x5eedULL) {
    OracleReport rep;
    rep.n = n;
    rep.m = message_budget(n, rate);
    detail::PcWorkspace ws(p_xy, d, delta, n);
    const std::size_t k = static_cast<std::size_t>(
        std::min<unsigned long long>(rep.m, static_cast<unsigned long long>(ws.cand_count)));

    auto climb = [&](std::vector<std::size_t> book) {
        double cur = ws.approx_value(book);
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::size_t slot = 0; slot < book.size(); ++slot) {
                const std::size_t old = book[slot];
                std::size_t best_c = old;
                double best_v = cur;
                for (std::size_t c = 0; c < ws.cand_count; ++c) {
                    if (c == old) continue;
                    book[slot] = c;
                    const double v = ws.approx_value(book);
                    if (v > best_v + 1e-15) {
                        best_v = v;
                        best_c = c;
                    }
                }
                book[slot] = best_c;
                if (best_c != old) {
                    cur = best_v;
                    improved = true;
                }
            }
        }
        return book;
    };

    std::vector<std::vector<std::size_t>> starts;
    if (!seed_words.empty()) {
        std::vector<std::size_t> s;
        for (const auto& w : seed_words) s.push_back(sequence_rank(w, ws.nxh));
        while (s.size() < k) s.push_back(s.size() % ws.cand_count);  // pad deterministically
        s.resize(k);
        starts.push_back(std::move(s));
    }
    {
        // greedy max-coverage start
        std::vector<std::size_t> s;
        std::vector<double> bestrow(ws.y_count, 0.0);
        for (std::size_t pick = 0; pick < k; ++pick) {
            std::size_t arg = 0;
            double argv = -1.0;
            for (std::size_t c = 0; c < ws.cand_count; ++c) {
                double gain = 0.0;
                for (std::size_t yr : ws.live_y)
                    gain += std::max(bestrow[yr], ws.value_d[yr * ws.cand_count + c]);
                if (gain > argv) {
                    argv = gain;
                    arg = c;
                }
            }
            s.push_back(arg);
            for (std::size_t yr : ws.live_y)
                bestrow[yr] = std::max(bestrow[yr], ws.value_d[yr * ws.cand_count + arg]);
        }
        starts.push_back(std::move(s));
    }
    std::mt19937_64 rng(rng_seed);
    for (int r = 0; r < restarts; ++r) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < k; ++i)
            s.push_back(static_cast<std::size_t>(rng() % ws.cand_count));
        starts.push_back(std::move(s));
    }

    Rat best(-1);
    std::vector<std::size_t> best_book;
    for (auto& s : starts) {
        auto book = climb(std::move(s));
        Rat v = ws.exact_value(book);
        if (v > best) {
            best = std::move(v);
            best_book = std::move(book);
        }
    }
    rep.p_c = best;
    rep.exhaustive = false;
    for (std::size_t c : best_book) rep.codebook.push_back(sequence_of_rank(c, n, ws.nxh));
    rep.encoder = ws.induced_encoder(best_book);
    rep.exponent_estimate = rep.p_c > 0 ? -log2_rat(rep.p_c) / n : kInf;
    return rep;
}

/// Certified finite-n converse bound:
///   B(n) = sum_{Q_Y} sum_{Q_{Xhat|Y}} min(|T_n(Q_Y)|, M max |T_n(Q_{Y|Xhat}|xhat)|)
///          * P(Y^n in class) / |T_n(Q_Y)| ... assembled as exact rationals.
/// Every inequality in the chain holds non-asymptotically, so p_c(n) <= B(n).
inline Rat finite_n_converse_bound(const JointPmf<Rat>& p_xy, const DistortionMatrix& d,
                                   const Rat& delta, int n, double rate) {
    const unsigned long long m = message_budget(n, rate);
    const int nx = p_xy.rows(), ny = p_xy.cols(), nxh = d.nxh();
    const auto py = p_xy.col_marginal();

    // conditional source rows P(x|y), exact
    std::vector<std::vector<Rat>> pxgy(static_cast<std::size_t>(ny));
    for (int y = 0; y < ny; ++y) {
        if (py[y] == 0) continue;
        auto& row = pxgy[static_cast<std::size_t>(y)];
        row.resize(static_cast<std::size_t>(nx));
        for (int x = 0; x < nx; ++x) row[static_cast<std::size_t>(x)] = p_xy(x, y) / py[y];
    }

    const auto sd = detail::scale_distortion(d);
    const Rat threshold = Rat(sd.unit) * Rat(n) * delta;

    Rat bound = 0;
    for (const auto& qy : enumerate_types(n, p_xy.col_alphabet)) {
        bool live = true;
        Rat seq_prob = 1;  // 2^{-n(D(Q_Y||P_Y)+H(Q_Y))} = prod_y P_Y(y)^{count}
        for (int y = 0; y < ny; ++y) {
            const int c = qy.counts[static_cast<std::size_t>(y)];
            if (c == 0) continue;
            if (py[y] == 0) {
                live = false;
                break;
            }
            seq_prob *= pow_rat(py[y], static_cast<unsigned>(c));
        }
        if (!live) continue;
        const BigInt class_size = type_class_size(qy);

        for (const auto& jt : enumerate_conditional_types(qy, d.xhat_alphabet)) {
            // |T_n(Q_{Y|Xhat} | xhat)| for any xhat of the marginal type
            BigInt cond_size = 1;
            for (int h = 0; h < nxh; ++h) {
                std::vector<int> col(static_cast<std::size_t>(ny));
                int tot = 0;
                for (int y = 0; y < ny; ++y) {
                    col[static_cast<std::size_t>(y)] = jt.at(y, h);
                    tot += jt.at(y, h);
                }
                cond_size *= multinomial(tot, col);
            }
            BigInt count_term = BigInt(m) * cond_size;
            if (count_term > class_size) count_term = class_size;

            // sum over realizable conditional types Q_{X|Y Xhat} meeting the
            // distortion budget of 2^{-n D(. || P_{X|Y} | Q_{Y Xhat})}, exact:
            //   prod_{x,y,h} [ P(x|y) c(y,h) / t(x,y,h) ]^{t(x,y,h)}
            struct Cell {
                int y, h, c;
            };
            std::vector<Cell> cells;
            for (int y = 0; y < ny; ++y)
                for (int h = 0; h < nxh; ++h)
                    if (jt.at(y, h) > 0) cells.push_back({y, h, jt.at(y, h)});

            Rat inner_sum = 0;
            std::vector<int> t(static_cast<std::size_t>(nx));
            std::function<void(std::size_t, long long, const Rat&)> rec =
                [&](std::size_t ci, long long dist_acc, const Rat& factor_acc) {
                    if (Rat(dist_acc) > threshold) return;  // d >= 0: prune
                    if (ci == cells.size()) {
                        inner_sum += factor_acc;
                        return;
                    }
                    const auto& cell = cells[ci];
                    const auto& prow = pxgy[static_cast<std::size_t>(cell.y)];
                    // compositions of cell.c into nx parts, only on supp P(.|y)
                    std::function<void(int, int, long long, Rat)> comp =
                        [&](int x, int rem, long long dacc, Rat facc) {
                            if (Rat(dacc) > threshold) return;
                            if (x + 1 == nx) {
                                t[static_cast<std::size_t>(x)] = rem;
                                if (rem > 0 && prow[static_cast<std::size_t>(x)] == 0) return;
                                Rat f = facc;
                                if (rem > 0)
                                    f *= pow_rat(prow[static_cast<std::size_t>(x)] * Rat(cell.c) / Rat(rem),
                                                 static_cast<unsigned>(rem));
                                const long long dn =
                                    dacc + static_cast<long long>(rem) *
                                               sd.scaled[static_cast<std::size_t>(x) * nxh + cell.h];
                                rec(ci + 1, dn, f);
                                return;
                            }
                            for (int v = 0; v <= rem; ++v) {
                                if (v > 0 && prow[static_cast<std::size_t>(x)] == 0) break;
                                t[static_cast<std::size_t>(x)] = v;
                                Rat f = facc;
                                if (v > 0)
                                    f *= pow_rat(prow[static_cast<std::size_t>(x)] * Rat(cell.c) / Rat(v),
                                                 static_cast<unsigned>(v));
                                comp(x + 1, rem - v,
                                     dacc + static_cast<long long>(v) *
                                                sd.scaled[static_cast<std::size_t>(x) * nxh + cell.h],
                                     f);
                            }
                        };
                    comp(0, cell.c, dist_acc, factor_acc);
                };
            rec(0, 0, Rat(1));

            bound += Rat(count_term) * seq_prob * inner_sum;
        }
    }
    if (bound > 1) bound = 1;
    return bound;
}

struct TrajectoryOptions {
    double budget = 1e8;
    int restarts = 6;
    unsigned long long rng_seed = 0x5eedULL;
    KernelSelector selector;
};

/// Per-n reports: constructed-scheme probability, exact or hill-climb p_c,
/// and the converse bound. Per-n budget failures are recorded, not fatal.
inline std::vector<OracleReport> exponent_trajectory(const JointPmf<Rat>& p_xy,
                                                     const DistortionMatrix& d, const Rat& delta,
                                                     double rate, const std::vector<int>& n_list,
                                                     const TrajectoryOptions& opts = {}) {
    std::vector<OracleReport> out;
    for (int n : n_list) {
        OracleReport rep;
        try {
            const Scheme scheme = build_scheme(p_xy, d, rate, delta, n, opts.selector);
            const Rat sp = evaluate_scheme(scheme, p_xy, d, delta);
            std::vector<std::vector<int>> seed;
            for (std::size_t msg = 1; msg <= scheme.decoder.size(); ++msg)
                seed.push_back(scheme.codeword(static_cast<int>(msg)));

            const unsigned long long m = message_budget(n, rate);
            std::size_t cand_count = 1;
            for (int i = 0; i < n; ++i) cand_count *= static_cast<std::size_t>(d.nxh());
            const std::size_t k = static_cast<std::size_t>(
                std::min<unsigned long long>(m, static_cast<unsigned long long>(cand_count)));
            if (detail::log_choose(cand_count, k) <= std::log2(opts.budget)) {
                rep = optimal_pc(p_xy, d, delta, n, rate, opts.budget);
            } else {
                rep = hill_climb_pc(p_xy, d, delta, n, rate, seed, opts.restarts, opts.rng_seed);
            }
            rep.scheme_prob = sp;
            rep.converse_bound = finite_n_converse_bound(p_xy, d, delta, n, rate);
        } catch (const BudgetError& e) {
            rep.n = n;
            rep.error = e.what();
        }
        out.push_back(std::move(rep));
    }
    return out;
}

}  // namespace scexp
