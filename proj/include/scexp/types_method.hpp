#pragma once

// Method-of-types machinery: type enumeration, exact type-class counting, the
// greedy realization of the type-covering lemma, the type-per-type coding
// scheme, and exact success-probability evaluation at small blocklength.
// Everything on this path is exact rational arithmetic; floats appear only in
// the conditional-type selector scores.

#include "scexp/errors.hpp"
#include "scexp/info.hpp"
#include "scexp/prob.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace scexp {

struct TypeDescriptor {
    int n = 0;
    Alphabet alphabet;
    std::vector<int> counts;

    TypeDescriptor() = default;
    TypeDescriptor(int len, Alphabet a, std::vector<int> c)
        : n(len), alphabet(std::move(a)), counts(std::move(c)) {
        if (static_cast<int>(counts.size()) != alphabet.size)
            throw std::invalid_argument("type: counts length mismatch");
        int total = 0;
        for (int v : counts) {
            if (v < 0) throw std::invalid_argument("type: negative count");
            total += v;
        }
        if (total != n) throw std::invalid_argument("type: counts do not sum to n");
    }
};

struct JointTypeDescriptor {
    int n = 0;
    Alphabet row_alphabet, col_alphabet;
    std::vector<int> counts;  // row-major rows x cols

    JointTypeDescriptor() = default;
    JointTypeDescriptor(int len, Alphabet rows, Alphabet cols, std::vector<int> c)
        : n(len), row_alphabet(std::move(rows)), col_alphabet(std::move(cols)),
          counts(std::move(c)) {
        if (static_cast<int>(counts.size()) != row_alphabet.size * col_alphabet.size)
            throw std::invalid_argument("joint type: counts shape mismatch");
        int total = 0;
        for (int v : counts) {
            if (v < 0) throw std::invalid_argument("joint type: negative count");
            total += v;
        }
        if (total != n) throw std::invalid_argument("joint type: counts do not sum to n");
    }

    int rows() const { return row_alphabet.size; }
    int cols() const { return col_alphabet.size; }
    int at(int r, int c) const { return counts[static_cast<std::size_t>(r) * cols() + c]; }

    TypeDescriptor row_marginal() const {
        std::vector<int> m(static_cast<std::size_t>(rows()), 0);
        for (int r = 0; r < rows(); ++r)
            for (int c = 0; c < cols(); ++c) m[static_cast<std::size_t>(r)] += at(r, c);
        return TypeDescriptor(n, row_alphabet, std::move(m));
    }
    TypeDescriptor col_marginal() const {
        std::vector<int> m(static_cast<std::size_t>(cols()), 0);
        for (int r = 0; r < rows(); ++r)
            for (int c = 0; c < cols(); ++c) m[static_cast<std::size_t>(c)] += at(r, c);
        return TypeDescriptor(n, col_alphabet, std::move(m));
    }
};

/// All compositions of n into |alphabet| parts, first coordinate descending;
/// count is C(n + |A| - 1, |A| - 1).
inline std::vector<TypeDescriptor> enumerate_types(int n, const Alphabet& alphabet) {
    if (n < 1) throw std::invalid_argument("enumerate_types: n must be >= 1");
    std::vector<TypeDescriptor> out;
    std::vector<int> counts(static_cast<std::size_t>(alphabet.size), 0);
    std::function<void(int, int)> rec = [&](int pos, int rem) {
        if (pos + 1 == alphabet.size) {
            counts[static_cast<std::size_t>(pos)] = rem;
            out.emplace_back(n, alphabet, counts);
            counts[static_cast<std::size_t>(pos)] = 0;
            return;
        }
        for (int c = rem; c >= 0; --c) {
            counts[static_cast<std::size_t>(pos)] = c;
            rec(pos + 1, rem - c);
        }
        counts[static_cast<std::size_t>(pos)] = 0;
    };
    rec(0, n);
    return out;
}

/// |T_n(P)| = n! / prod counts!, exactly.
inline BigInt type_class_size(const TypeDescriptor& t) {
    BigInt out = 1;
    int placed = 0;
    for (int c : t.counts) {
        // multiply binomial(placed + c, c) incrementally
        for (int i = 1; i <= c; ++i) {
            ++placed;
            out = out * placed / i;
        }
    }
    return out;
}

inline BigInt multinomial(int total, const std::vector<int>& parts) {
    BigInt out = 1;
    int placed = 0;
    for (int c : parts) {
        for (int i = 1; i <= c; ++i) {
            ++placed;
            out = out * placed / i;
        }
    }
    if (placed != total) throw std::invalid_argument("multinomial: parts do not sum to total");
    return out;
}

/// Lexicographic enumeration of the whole type class.
inline std::vector<std::vector<int>> type_class_sequences(const TypeDescriptor& t) {
    std::vector<int> seq;
    seq.reserve(static_cast<std::size_t>(t.n));
    for (int a = 0; a < t.alphabet.size; ++a)
        seq.insert(seq.end(), static_cast<std::size_t>(t.counts[static_cast<std::size_t>(a)]), a);
    std::vector<std::vector<int>> out;
    do {
        out.push_back(seq);
    } while (std::next_permutation(seq.begin(), seq.end()));
    return out;
}

inline TypeDescriptor sequence_type(const std::vector<int>& seq, const Alphabet& alphabet) {
    std::vector<int> counts(static_cast<std::size_t>(alphabet.size), 0);
    for (int s : seq) ++counts.at(static_cast<std::size_t>(s));
    return TypeDescriptor(static_cast<int>(seq.size()), alphabet, std::move(counts));
}

inline std::vector<int> joint_counts(const std::vector<int>& a, const std::vector<int>& b,
                                     int na, int nb) {
    if (a.size() != b.size()) throw std::invalid_argument("joint type: length mismatch");
    std::vector<int> c(static_cast<std::size_t>(na) * nb, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        ++c[static_cast<std::size_t>(a[i]) * nb + b[i]];
    return c;
}

// Mixed-radix sequence ranks, most significant digit first.
inline std::size_t sequence_rank(const std::vector<int>& seq, int base) {
    std::size_t r = 0;
    for (int s : seq) r = r * static_cast<std::size_t>(base) + static_cast<std::size_t>(s);
    return r;
}

inline std::vector<int> sequence_of_rank(std::size_t rank, int n, int base) {
    std::vector<int> seq(static_cast<std::size_t>(n), 0);
    for (int i = n - 1; i >= 0; --i) {
        seq[static_cast<std::size_t>(i)] = static_cast<int>(rank % base);
        rank /= static_cast<std::size_t>(base);
    }
    return seq;
}

/// All joint types over (row, col) whose row marginal equals q_row.
inline std::vector<JointTypeDescriptor> enumerate_conditional_types(const TypeDescriptor& q_row,
                                                                    const Alphabet& col) {
    std::vector<JointTypeDescriptor> out;
    const int nr = q_row.alphabet.size, nc = col.size;
    std::vector<int> counts(static_cast<std::size_t>(nr) * nc, 0);
    std::function<void(int)> per_row = [&](int r) {
        if (r == nr) {
            out.emplace_back(q_row.n, q_row.alphabet, col, counts);
            return;
        }
        const int rem_total = q_row.counts[static_cast<std::size_t>(r)];
        std::function<void(int, int)> comp = [&](int c, int rem) {
            if (c + 1 == nc) {
                counts[static_cast<std::size_t>(r) * nc + c] = rem;
                per_row(r + 1);
                counts[static_cast<std::size_t>(r) * nc + c] = 0;
                return;
            }
            for (int v = rem; v >= 0; --v) {
                counts[static_cast<std::size_t>(r) * nc + c] = v;
                comp(c + 1, rem - v);
            }
            counts[static_cast<std::size_t>(r) * nc + c] = 0;
        };
        comp(0, rem_total);
    };
    per_row(0);
    return out;
}

struct Codebook {
    int n = 0;
    JointTypeDescriptor target;               // joint (Y, Xhat) type every pair realizes
    std::vector<std::vector<int>> words;      // all of type Q_Xhat, greedy order
};

/// Greedy set cover realizing the type-covering lemma: repeatedly pick the
/// candidate from T_n(Q_Xhat) covering the most uncovered sequences of
/// T_n(Q_Y), where covering means the pair's joint type equals the target.
/// Lowest-index tie-breaking; terminates with full coverage.
inline Codebook greedy_type_cover(const TypeDescriptor& q_y, const JointTypeDescriptor& target) {
    if (target.n != q_y.n) throw std::invalid_argument("type cover: blocklength mismatch");
    if (target.row_marginal().counts != q_y.counts)
        throw std::invalid_argument("type cover: joint type not realizable over this Q_Y");

    const auto ys = type_class_sequences(q_y);
    const auto cands = type_class_sequences(target.col_marginal());
    const int nb = target.cols();

    // cover bitsets: words of 64 y-indices each
    const std::size_t words_per = (ys.size() + 63) / 64;
    std::vector<std::uint64_t> cover(cands.size() * words_per, 0);
    for (std::size_t c = 0; c < cands.size(); ++c)
        for (std::size_t yi = 0; yi < ys.size(); ++yi)
            if (joint_counts(ys[yi], cands[c], q_y.alphabet.size, nb) == target.counts)
                cover[c * words_per + yi / 64] |= (std::uint64_t{1} << (yi % 64));

    std::vector<std::uint64_t> uncovered(words_per, ~std::uint64_t{0});
    if (ys.size() % 64 != 0)
        uncovered[words_per - 1] = (std::uint64_t{1} << (ys.size() % 64)) - 1;

    Codebook book;
    book.n = q_y.n;
    book.target = target;
    auto popcount_and = [&](std::size_t c) {
        int total = 0;
        for (std::size_t w = 0; w < words_per; ++w)
            total += std::popcount(cover[c * words_per + w] & uncovered[w]);
        return total;
    };
    std::size_t remaining = ys.size();
    while (remaining > 0) {
        std::size_t best = cands.size();
        int best_gain = 0;
        for (std::size_t c = 0; c < cands.size(); ++c) {
            const int g = popcount_and(c);
            if (g > best_gain) {
                best_gain = g;
                best = c;
            }
        }
        if (best == cands.size())
            throw std::logic_error("type cover: uncoverable sequence (realizability violated)");
        for (std::size_t w = 0; w < words_per; ++w) uncovered[w] &= ~cover[best * words_per + w];
        remaining -= static_cast<std::size_t>(best_gain);
        book.words.push_back(cands[best]);
    }
    return book;
}

// --- exact success probabilities ---

namespace detail {

struct ScaledDistortion {
    std::vector<long long> scaled;  // nx * nxh
    BigInt unit;                    // scaled = unit * d, entrywise
};

inline ScaledDistortion scale_distortion(const DistortionMatrix& d) {
    BigInt l = 1;
    for (const auto& v : d.values) {
        const BigInt den = boost::multiprecision::denominator(v);
        l = l / boost::multiprecision::gcd(l, den) * den;
    }
    ScaledDistortion out;
    out.unit = l;
    out.scaled.reserve(d.values.size());
    for (const auto& v : d.values) {
        const BigInt s = boost::multiprecision::numerator(v) *
                         (l / boost::multiprecision::denominator(v));
        if (s > BigInt(std::numeric_limits<long long>::max() / 64))
            throw BudgetError("distortion values too large to scale into 64-bit sums");
        out.scaled.push_back(static_cast<long long>(s));
    }
    return out;
}

// P{ sum_i d(X_i, xhat_i) <= n*delta } for independent X_i ~ rows(y_i), as a
// function of the pair's joint counts only. Exact dynamic programming on the
// lattice of reachable scaled distortion sums.
inline Rat success_from_pair_counts(const std::vector<int>& counts, int ny, int nxh,
                                    const ConditionalPmf<Rat>& p_x_given_y,
                                    const DistortionMatrix& d, const Rat& delta, int n) {
    const ScaledDistortion sd = scale_distortion(d);
    const int nx = d.nx();
    std::map<long long, Rat> dist{{0, Rat(1)}};
    for (int y = 0; y < ny; ++y)
        for (int h = 0; h < nxh; ++h) {
            const int c = counts[static_cast<std::size_t>(y) * nxh + h];
            for (int rep = 0; rep < c; ++rep) {
                std::map<long long, Rat> next;
                for (const auto& [sum, mass] : dist)
                    for (int x = 0; x < nx; ++x) {
                        const Rat& px = p_x_given_y(y, x);
                        if (px == 0) continue;
                        next[sum + sd.scaled[static_cast<std::size_t>(x) * nxh + h]] += mass * px;
                    }
                dist = std::move(next);
            }
        }
    const Rat threshold = Rat(sd.unit) * Rat(n) * delta;
    Rat total = 0;
    for (const auto& [sum, mass] : dist)
        if (Rat(sum) <= threshold) total += mass;
    return total;
}

}  // namespace detail

/// Exact P{ dbar(X^n, xhat^n) <= delta | Y^n = y^n } with X_i drawn
/// independently from p_x_given_y(. | y_i).
inline Rat success_prob_given_y(const std::vector<int>& y, const std::vector<int>& xhat,
                                const ConditionalPmf<Rat>& p_x_given_y,
                                const DistortionMatrix& d, const Rat& delta) {
    if (y.size() != xhat.size()) throw std::invalid_argument("success prob: length mismatch");
    if (y.empty()) throw std::invalid_argument("success prob: empty sequence");
    const int ny = p_x_given_y.cells, nxh = d.nxh();
    const auto counts = joint_counts(y, xhat, ny, nxh);
    return detail::success_from_pair_counts(counts, ny, nxh, p_x_given_y, d, delta,
                                            static_cast<int>(y.size()));
}

// --- the coding scheme ---

inline unsigned long long message_budget(int n, double rate) {
    const long double t = static_cast<long double>(n) * rate;
    if (t > 61.0L) throw BudgetError("message budget 2^(nR) exceeds 64-bit range");
    const long double raw = std::exp2(t);
    auto m = static_cast<unsigned long long>(std::floor(raw * (1.0L + 1e-12L)));
    return m;
}

struct SchemePerType {
    TypeDescriptor q_y;
    JointTypeDescriptor target;
    std::vector<std::vector<int>> codebook;  // sorted by owning cell size, descending
    std::vector<long long> cell_sizes;       // |F_i|, nonincreasing
    BigInt class_size;                       // |T_n(Q_Y)|
    std::size_t paper_kept = 0;              // min(M, #cells): the H_n bookkeeping cut
    BigInt h_n_size;                         // sum of kept cell sizes
    Rat seq_prob;                            // P(Y^n = y) for any y of this type
    Rat pair_success;                        // success prob for a target-typed pair
};

struct Scheme {
    int n = 0;
    int ny = 0, nxh = 0;
    unsigned long long m = 0;  // message budget floor(2^{nR}); index 0 reserved on top
    double rate = 0.0;
    Rat delta;
    std::vector<SchemePerType> per_type;     // indexed like enumerate_types(n, Y)
    std::vector<int> type_of_rank;           // |Y|^n
    std::vector<int> cell_of_rank;           // 1-based cell within its type class
    std::vector<int> message_of_rank;        // 0 = discard
    std::vector<std::pair<int, int>> decoder;  // message id - 1  ->  (type, cell-1)

    const std::vector<int>& codeword(int message) const {
        const auto& [t, c] = decoder[static_cast<std::size_t>(message - 1)];
        return per_type[static_cast<std::size_t>(t)].codebook[static_cast<std::size_t>(c)];
    }
};

using KernelSelector = std::function<std::size_t(const TypeDescriptor& q_y,
                                                 const std::vector<JointTypeDescriptor>& options)>;

namespace detail {

// Selector score: |I(Q_Y, Q_Xhat|Y) - R|+ plus the tilted divergence
// min { D(Q_{X|Y Xhat} || P_{X|Y} | Q_{Y Xhat}) : E_Q d <= delta }, the two
// pieces of the per-type achievability objective that depend on the choice.
inline double selector_score(const JointTypeDescriptor& jt,
                             const std::vector<std::vector<double>>& p_x_given_y,
                             const std::vector<char>& y_live, const DistortionMatrix& d,
                             double delta, double rate) {
    const int ny = jt.rows(), nxh = jt.cols(), nx = d.nx();
    const double n = jt.n;
    for (int y = 0; y < ny; ++y)
        if (!y_live[static_cast<std::size_t>(y)])
            for (int h = 0; h < nxh; ++h)
                if (jt.at(y, h) > 0) return kInf;  // type uses a zero-probability letter

    double iy = 0.0;
    {
        std::vector<double> qy(static_cast<std::size_t>(ny), 0.0), qh(static_cast<std::size_t>(nxh), 0.0);
        for (int y = 0; y < ny; ++y)
            for (int h = 0; h < nxh; ++h) {
                const double w = jt.at(y, h) / n;
                qy[static_cast<std::size_t>(y)] += w;
                qh[static_cast<std::size_t>(h)] += w;
            }
        for (int y = 0; y < ny; ++y)
            for (int h = 0; h < nxh; ++h) {
                const double w = jt.at(y, h) / n;
                if (w > 0.0)
                    iy += w * std::log2(w / (qy[static_cast<std::size_t>(y)] * qh[static_cast<std::size_t>(h)]));
            }
        iy = std::max(0.0, iy);
    }

    auto tilted = [&](double lambda, double& dist, double& div) {
        dist = 0.0;
        div = 0.0;
        for (int y = 0; y < ny; ++y)
            for (int h = 0; h < nxh; ++h) {
                const double w = jt.at(y, h) / n;
                if (w <= 0.0) continue;
                double z = 0.0, ed = 0.0, dd = 0.0;
                for (int x = 0; x < nx; ++x) {
                    const double p = p_x_given_y[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
                    if (p <= 0.0) continue;
                    z += p * std::exp2(-lambda * d.value_d(x, h));
                }
                for (int x = 0; x < nx; ++x) {
                    const double p = p_x_given_y[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
                    if (p <= 0.0) continue;
                    const double q = p * std::exp2(-lambda * d.value_d(x, h)) / z;
                    ed += q * d.value_d(x, h);
                    if (q > 0.0) dd += q * std::log2(q / p);
                }
                dist += w * ed;
                div += w * dd;
            }
    };
    double dist0, div0;
    tilted(0.0, dist0, div0);
    double tilt_term;
    if (dist0 <= delta + 1e-15) {
        tilt_term = 0.0;
    } else {
        double lo = 0.0, hi = 4096.0, dv = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            double dm, vm;
            tilted(mid, dm, vm);
            if (dm > delta) {
                lo = mid;
            } else {
                hi = mid;
                dv = vm;
            }
        }
        double dh, vh;
        tilted(hi, dh, vh);
        tilt_term = dh <= delta + 1e-9 ? vh : kInf;
        (void)dv;
    }
    return positive_part(iy - rate) + tilt_term;
}

}  // namespace detail

/// Builds the type-per-type covering scheme at blocklength n. Per type class
/// the paper's partition cells F_i and the H_n(Q_Y) cut at M are recorded as
/// bookkeeping; the actual encoder charges everything against the global
/// budget M = floor(2^{nR}) by allocating messages to the (type, cell) pairs
/// with the largest exact recovered probability mass, so the result is a true
/// M-message code and never beats the exhaustive optimum.
inline Scheme build_scheme(const JointPmf<Rat>& p_xy, const DistortionMatrix& d, double rate,
                           const Rat& delta, int n, const KernelSelector& selector = {}) {
    Scheme s;
    s.n = n;
    s.ny = p_xy.cols();
    s.nxh = d.nxh();
    s.rate = rate;
    s.delta = delta;
    s.m = message_budget(n, rate);
    if (s.m < 1) throw std::invalid_argument("build_scheme: message budget below 1");

    const int nx = p_xy.rows(), ny = s.ny, nxh = s.nxh;
    const auto py = p_xy.col_marginal();
    std::vector<char> y_live(static_cast<std::size_t>(ny), 0);
    std::vector<std::vector<double>> pxy_rows(static_cast<std::size_t>(ny),
                                              std::vector<double>(static_cast<std::size_t>(nx), 0.0));
    std::vector<Rat> cond_rows(static_cast<std::size_t>(ny) * nx, Rat(0));
    for (int y = 0; y < ny; ++y) {
        if (py[y] == 0) {
            cond_rows[static_cast<std::size_t>(y) * nx] = 1;  // placeholder row, never weighted
            continue;
        }
        y_live[static_cast<std::size_t>(y)] = 1;
        for (int x = 0; x < nx; ++x) {
            const Rat c = p_xy(x, y) / py[y];
            cond_rows[static_cast<std::size_t>(y) * nx + x] = c;
            pxy_rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = to_double(c);
        }
    }
    const ConditionalPmf<Rat> cond(ny, Alphabet(nx), cond_rows);

    const auto types = enumerate_types(n, p_xy.col_alphabet);
    const std::size_t total_ranks = static_cast<std::size_t>(std::pow(static_cast<double>(ny), n) + 0.5);
    s.type_of_rank.assign(total_ranks, -1);
    s.cell_of_rank.assign(total_ranks, 0);
    s.message_of_rank.assign(total_ranks, 0);

    struct Gain {
        Rat mass;
        int type;
        int cell;
    };
    std::vector<Gain> gains;

    for (std::size_t ti = 0; ti < types.size(); ++ti) {
        const auto& qy = types[ti];
        auto options = enumerate_conditional_types(qy, d.xhat_alphabet);
        std::size_t pick = 0;
        if (selector) {
            pick = selector(qy, options);
            if (pick >= options.size())
                throw std::invalid_argument("build_scheme: selector returned no realizable type");
        } else {
            double best = kInf;
            for (std::size_t i = 0; i < options.size(); ++i) {
                const double sc = detail::selector_score(options[i], pxy_rows, y_live, d,
                                                         to_double(delta), rate);
                if (sc < best) {
                    best = sc;
                    pick = i;
                }
            }
        }
        SchemePerType pt;
        pt.q_y = qy;
        pt.target = options[pick];
        pt.class_size = type_class_size(qy);

        Codebook book = greedy_type_cover(qy, pt.target);
        const auto ys = type_class_sequences(qy);
        std::vector<std::vector<std::size_t>> cells(book.words.size());
        std::vector<int> cell_of_seq(ys.size(), -1);
        for (std::size_t yi = 0; yi < ys.size(); ++yi) {
            for (std::size_t wi = 0; wi < book.words.size(); ++wi) {
                if (joint_counts(ys[yi], book.words[wi], ny, nxh) == pt.target.counts) {
                    cells[wi].push_back(yi);
                    cell_of_seq[yi] = static_cast<int>(wi);
                    break;  // lowest-index covering codeword
                }
            }
        }
        // order cells by size, nonincreasing; stable on the greedy index
        std::vector<std::size_t> order(cells.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return cells[a].size() > cells[b].size();
        });
        std::vector<int> new_cell(cells.size());
        for (std::size_t r = 0; r < order.size(); ++r) {
            new_cell[order[r]] = static_cast<int>(r);
            pt.codebook.push_back(book.words[order[r]]);
            pt.cell_sizes.push_back(static_cast<long long>(cells[order[r]].size()));
        }
        pt.paper_kept = std::min<std::size_t>(static_cast<std::size_t>(std::min<unsigned long long>(
                                                  s.m, static_cast<unsigned long long>(pt.codebook.size()))),
                                              pt.codebook.size());
        pt.h_n_size = 0;
        for (std::size_t i = 0; i < pt.paper_kept; ++i) pt.h_n_size += pt.cell_sizes[i];

        pt.seq_prob = 1;
        bool live_type = true;
        for (int y = 0; y < ny && live_type; ++y) {
            const int c = qy.counts[static_cast<std::size_t>(y)];
            if (c == 0) continue;
            if (py[y] == 0) {
                live_type = false;
                pt.seq_prob = 0;
            } else {
                pt.seq_prob *= pow_rat(py[y], static_cast<unsigned>(c));
            }
        }
        pt.pair_success = live_type
                              ? detail::success_from_pair_counts(pt.target.counts, ny, nxh, cond,
                                                                 d, delta, n)
                              : Rat(0);

        for (std::size_t yi = 0; yi < ys.size(); ++yi) {
            const std::size_t rank = sequence_rank(ys[yi], ny);
            s.type_of_rank[rank] = static_cast<int>(ti);
            s.cell_of_rank[rank] = new_cell[static_cast<std::size_t>(cell_of_seq[yi])] + 1;
        }
        for (std::size_t celli = 0; celli < pt.cell_sizes.size(); ++celli) {
            if (pt.cell_sizes[celli] == 0) continue;
            Gain g;
            g.mass = pt.seq_prob * pt.pair_success * Rat(pt.cell_sizes[celli]);
            g.type = static_cast<int>(ti);
            g.cell = static_cast<int>(celli);
            if (g.mass > 0) gains.push_back(std::move(g));
        }
        s.per_type.push_back(std::move(pt));
    }

    std::stable_sort(gains.begin(), gains.end(), [](const Gain& a, const Gain& b) {
        if (a.mass != b.mass) return a.mass > b.mass;
        if (a.type != b.type) return a.type < b.type;
        return a.cell < b.cell;
    });
    const std::size_t keep = std::min<std::size_t>(gains.size(),
                                                   static_cast<std::size_t>(std::min<unsigned long long>(
                                                       s.m, static_cast<unsigned long long>(gains.size()))));
    std::vector<std::vector<int>> msg_of_cell(types.size());
    for (std::size_t t = 0; t < types.size(); ++t)
        msg_of_cell[t].assign(s.per_type[t].cell_sizes.size(), 0);
    for (std::size_t g = 0; g < keep; ++g) {
        s.decoder.emplace_back(gains[g].type, gains[g].cell);
        msg_of_cell[static_cast<std::size_t>(gains[g].type)][static_cast<std::size_t>(gains[g].cell)] =
            static_cast<int>(g + 1);
    }
    for (std::size_t rank = 0; rank < total_ranks; ++rank) {
        const int t = s.type_of_rank[rank];
        const int c = s.cell_of_rank[rank] - 1;
        if (t >= 0 && c >= 0)
            s.message_of_rank[rank] = msg_of_cell[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
    }
    return s;
}

/// Exact success probability of an arbitrary message mapping: encoder gives a
/// message per y-rank (0 = declared error), decoder gives a codeword per
/// message. Joint-type memoization keeps this polynomial at desk scale.
inline Rat evaluate_mapping(int n, int ny, const std::vector<int>& message_of_rank,
                            const std::vector<std::vector<int>>& decoder_words,
                            const JointPmf<Rat>& p_xy, const DistortionMatrix& d,
                            const Rat& delta) {
    const int nx = p_xy.rows(), nxh = d.nxh();
    const auto py = p_xy.col_marginal();
    std::vector<Rat> cond_rows(static_cast<std::size_t>(ny) * nx, Rat(0));
    for (int y = 0; y < ny; ++y) {
        if (py[y] == 0) {
            cond_rows[static_cast<std::size_t>(y) * nx] = 1;
            continue;
        }
        for (int x = 0; x < nx; ++x) cond_rows[static_cast<std::size_t>(y) * nx + x] = p_xy(x, y) / py[y];
    }
    const ConditionalPmf<Rat> cond(ny, Alphabet(nx), cond_rows);

    std::map<std::vector<int>, Rat> success_memo;
    std::map<std::vector<int>, Rat> prob_memo;
    Rat total = 0;
    for (std::size_t rank = 0; rank < message_of_rank.size(); ++rank) {
        const int msg = message_of_rank[rank];
        if (msg <= 0) continue;
        const auto y = sequence_of_rank(rank, n, ny);
        std::vector<int> ycnt(static_cast<std::size_t>(ny), 0);
        for (int v : y) ++ycnt[static_cast<std::size_t>(v)];
        auto pit = prob_memo.find(ycnt);
        if (pit == prob_memo.end()) {
            Rat p = 1;
            for (int v = 0; v < ny; ++v) {
                const int c = ycnt[static_cast<std::size_t>(v)];
                if (c == 0) continue;
                if (py[v] == 0) {
                    p = 0;
                    break;
                }
                p *= pow_rat(py[v], static_cast<unsigned>(c));
            }
            pit = prob_memo.emplace(std::move(ycnt), std::move(p)).first;
        }
        if (pit->second == 0) continue;
        const auto& word = decoder_words[static_cast<std::size_t>(msg - 1)];
        auto key = joint_counts(y, word, ny, nxh);
        auto sit = success_memo.find(key);
        if (sit == success_memo.end()) {
            Rat sp = detail::success_from_pair_counts(key, ny, nxh, cond, d, delta, n);
            sit = success_memo.emplace(std::move(key), std::move(sp)).first;
        }
        total += pit->second * sit->second;
    }
    return total;
}

/// Exact P{ dbar(X^n, Xhat^n) <= delta } under the scheme (index 0 counts as
/// failure).
inline Rat evaluate_scheme(const Scheme& s, const JointPmf<Rat>& p_xy, const DistortionMatrix& d,
                           const Rat& delta) {
    std::vector<std::vector<int>> words;
    words.reserve(s.decoder.size());
    for (std::size_t m = 0; m < s.decoder.size(); ++m)
        words.push_back(s.codeword(static_cast<int>(m + 1)));
    return evaluate_mapping(s.n, s.ny, s.message_of_rank, words, p_xy, d, delta);
}

}  // namespace scexp
