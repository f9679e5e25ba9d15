#pragma once

// Distributions on finite alphabets, in two numeric tracks: double for the
// optimizers, exact rationals for distortion arithmetic and type counting.
// Conversions between the tracks are explicit.

#include "scexp/rational.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace scexp {

struct Alphabet {
    int size = 0;
    std::vector<std::string> labels;  // optional; empty or exactly `size` entries

    Alphabet() = default;
    explicit Alphabet(int n, std::vector<std::string> names = {})
        : size(n), labels(std::move(names)) {
        if (size < 1) throw std::invalid_argument("alphabet size must be >= 1");
        if (!labels.empty() && static_cast<int>(labels.size()) != size)
            throw std::invalid_argument("label count does not match alphabet size");
    }
    std::string label(int i) const {
        return labels.empty() ? std::to_string(i) : labels[static_cast<std::size_t>(i)];
    }
    friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.size == b.size; }
};

namespace detail {

inline bool nonneg(double v) { return v >= 0.0; }
inline bool nonneg(const Rat& v) { return v >= 0; }

// Accepts a total within 1e-9 of 1 and rescales exactly; larger deviations are input errors.
template <class T>
void normalize_mass(std::vector<T>& mass, const char* what) {
    T total{};
    for (const auto& v : mass) {
        if (!nonneg(v)) throw std::invalid_argument(std::string(what) + ": negative mass entry");
        total += v;
    }
    const double dev = std::abs(static_cast<double>(total) - 1.0);
    if (dev > 1e-9) throw std::invalid_argument(std::string(what) + ": mass does not sum to 1");
    if (total != T(1)) {
        for (auto& v : mass) v /= total;
    }
}

}  // namespace detail

template <class T>
struct Pmf {
    Alphabet alphabet;
    std::vector<T> mass;

    Pmf() = default;
    Pmf(Alphabet a, std::vector<T> m) : alphabet(std::move(a)), mass(std::move(m)) {
        if (static_cast<int>(mass.size()) != alphabet.size)
            throw std::invalid_argument("pmf: mass length does not match alphabet");
        detail::normalize_mass(mass, "pmf");
    }
    explicit Pmf(std::vector<T> m) : alphabet(static_cast<int>(m.size())), mass(std::move(m)) {
        detail::normalize_mass(mass, "pmf");
    }

    int size() const { return alphabet.size; }
    const T& operator[](int i) const { return mass[static_cast<std::size_t>(i)]; }
};

template <class T>
struct JointPmf {
    Alphabet row_alphabet, col_alphabet;
    std::vector<T> mass;  // row-major

    JointPmf() = default;
    JointPmf(Alphabet rows, Alphabet cols, std::vector<T> m)
        : row_alphabet(std::move(rows)), col_alphabet(std::move(cols)), mass(std::move(m)) {
        if (mass.size() != static_cast<std::size_t>(row_alphabet.size) * col_alphabet.size)
            throw std::invalid_argument("joint pmf: mass shape mismatch");
        detail::normalize_mass(mass, "joint pmf");
    }
    JointPmf(int rows, int cols, std::vector<T> m)
        : JointPmf(Alphabet(rows), Alphabet(cols), std::move(m)) {}

    int rows() const { return row_alphabet.size; }
    int cols() const { return col_alphabet.size; }
    const T& operator()(int r, int c) const {
        return mass[static_cast<std::size_t>(r) * cols() + c];
    }

    Pmf<T> row_marginal() const {
        std::vector<T> m(static_cast<std::size_t>(rows()), T{});
        for (int r = 0; r < rows(); ++r)
            for (int c = 0; c < cols(); ++c) m[static_cast<std::size_t>(r)] += (*this)(r, c);
        return Pmf<T>(row_alphabet, std::move(m));
    }
    Pmf<T> col_marginal() const {
        std::vector<T> m(static_cast<std::size_t>(cols()), T{});
        for (int r = 0; r < rows(); ++r)
            for (int c = 0; c < cols(); ++c) m[static_cast<std::size_t>(c)] += (*this)(r, c);
        return Pmf<T>(col_alphabet, std::move(m));
    }
};

// Three-axis joint, fixed meaning (X, Y, Xhat) throughout this library.
template <class T>
struct JointPmf3 {
    Alphabet x_alphabet, y_alphabet, z_alphabet;
    std::vector<T> mass;  // x-major, then y, then z

    JointPmf3() = default;
    JointPmf3(Alphabet ax, Alphabet ay, Alphabet az, std::vector<T> m)
        : x_alphabet(std::move(ax)), y_alphabet(std::move(ay)), z_alphabet(std::move(az)),
          mass(std::move(m)) {
        if (mass.size() != static_cast<std::size_t>(x_alphabet.size) * y_alphabet.size * z_alphabet.size)
            throw std::invalid_argument("joint pmf3: mass shape mismatch");
        detail::normalize_mass(mass, "joint pmf3");
    }
    JointPmf3(int nx, int ny, int nz, std::vector<T> m)
        : JointPmf3(Alphabet(nx), Alphabet(ny), Alphabet(nz), std::move(m)) {}

    int nx() const { return x_alphabet.size; }
    int ny() const { return y_alphabet.size; }
    int nz() const { return z_alphabet.size; }
    const T& operator()(int x, int y, int z) const {
        return mass[(static_cast<std::size_t>(x) * ny() + y) * nz() + z];
    }

    JointPmf<T> marginal_xy() const {
        std::vector<T> m(static_cast<std::size_t>(nx()) * ny(), T{});
        for (int x = 0; x < nx(); ++x)
            for (int y = 0; y < ny(); ++y)
                for (int z = 0; z < nz(); ++z)
                    m[static_cast<std::size_t>(x) * ny() + y] += (*this)(x, y, z);
        return JointPmf<T>(x_alphabet, y_alphabet, std::move(m));
    }
    JointPmf<T> marginal_yz() const {
        std::vector<T> m(static_cast<std::size_t>(ny()) * nz(), T{});
        for (int x = 0; x < nx(); ++x)
            for (int y = 0; y < ny(); ++y)
                for (int z = 0; z < nz(); ++z)
                    m[static_cast<std::size_t>(y) * nz() + z] += (*this)(x, y, z);
        return JointPmf<T>(y_alphabet, z_alphabet, std::move(m));
    }
    JointPmf<T> marginal_xz() const {
        std::vector<T> m(static_cast<std::size_t>(nx()) * nz(), T{});
        for (int x = 0; x < nx(); ++x)
            for (int y = 0; y < ny(); ++y)
                for (int z = 0; z < nz(); ++z)
                    m[static_cast<std::size_t>(x) * nz() + z] += (*this)(x, y, z);
        return JointPmf<T>(x_alphabet, z_alphabet, std::move(m));
    }
};

// Row-stochastic kernel: one output pmf per conditioning cell. Multi-variable
// conditioning is flattened row-major, e.g. cell = x * |Y| + y for (x, y).
template <class T>
struct ConditionalPmf {
    int cells = 0;
    Alphabet out_alphabet;
    std::vector<T> rows;  // cells x out, row-major

    ConditionalPmf() = default;
    ConditionalPmf(int conditioning_cells, Alphabet out, std::vector<T> r)
        : cells(conditioning_cells), out_alphabet(std::move(out)), rows(std::move(r)) {
        if (cells < 1) throw std::invalid_argument("conditional pmf: no conditioning cells");
        if (rows.size() != static_cast<std::size_t>(cells) * out_alphabet.size)
            throw std::invalid_argument("conditional pmf: row shape mismatch");
        for (int c = 0; c < cells; ++c) {
            std::vector<T> row(rows.begin() + static_cast<std::ptrdiff_t>(c) * out_alphabet.size,
                               rows.begin() + static_cast<std::ptrdiff_t>(c + 1) * out_alphabet.size);
            detail::normalize_mass(row, "conditional pmf row");
            std::copy(row.begin(), row.end(),
                      rows.begin() + static_cast<std::ptrdiff_t>(c) * out_alphabet.size);
        }
    }

    int out_size() const { return out_alphabet.size; }
    const T& operator()(int cell, int out) const {
        return rows[static_cast<std::size_t>(cell) * out_size() + out];
    }
    Pmf<T> row(int cell) const {
        std::vector<T> r(rows.begin() + static_cast<std::ptrdiff_t>(cell) * out_size(),
                         rows.begin() + static_cast<std::ptrdiff_t>(cell + 1) * out_size());
        return Pmf<T>(out_alphabet, std::move(r));
    }
};

// d(x, xhat) >= 0, held exactly; a double mirror is kept for the float solvers.
struct DistortionMatrix {
    Alphabet x_alphabet, xhat_alphabet;
    std::vector<Rat> values;   // row-major x by xhat
    std::vector<double> dbl;

    DistortionMatrix() = default;
    DistortionMatrix(Alphabet ax, Alphabet axh, std::vector<Rat> v)
        : x_alphabet(std::move(ax)), xhat_alphabet(std::move(axh)), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(x_alphabet.size) * xhat_alphabet.size)
            throw std::invalid_argument("distortion matrix: shape mismatch");
        dbl.reserve(values.size());
        for (const auto& r : values) {
            if (r < 0) throw std::invalid_argument("distortion matrix: negative value");
            dbl.push_back(to_double(r));
        }
    }
    DistortionMatrix(int nx, int nxh, std::vector<Rat> v)
        : DistortionMatrix(Alphabet(nx), Alphabet(nxh), std::move(v)) {}

    int nx() const { return x_alphabet.size; }
    int nxh() const { return xhat_alphabet.size; }
    const Rat& operator()(int x, int xh) const {
        return values[static_cast<std::size_t>(x) * nxh() + xh];
    }
    double value_d(int x, int xh) const {
        return dbl[static_cast<std::size_t>(x) * nxh() + xh];
    }

    static DistortionMatrix hamming(int n) {
        std::vector<Rat> v(static_cast<std::size_t>(n) * n, Rat(1));
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 0;
        return DistortionMatrix(n, n, std::move(v));
    }
};

// --- explicit track conversions ---

inline Pmf<double> to_double(const Pmf<Rat>& p) {
    std::vector<double> m;
    m.reserve(p.mass.size());
    for (const auto& v : p.mass) m.push_back(to_double(v));
    return Pmf<double>(p.alphabet, std::move(m));
}

inline JointPmf<double> to_double(const JointPmf<Rat>& p) {
    std::vector<double> m;
    m.reserve(p.mass.size());
    for (const auto& v : p.mass) m.push_back(to_double(v));
    return JointPmf<double>(p.row_alphabet, p.col_alphabet, std::move(m));
}

inline JointPmf<Rat> to_exact(const JointPmf<double>& p) {
    std::vector<Rat> m;
    m.reserve(p.mass.size());
    for (const auto& v : p.mass) m.push_back(rat_from_double(v));
    return JointPmf<Rat>(p.row_alphabet, p.col_alphabet, std::move(m));
}

// --- composition ---

template <class T>
JointPmf<T> compose(const Pmf<T>& base, const ConditionalPmf<T>& kernel) {
    if (kernel.cells != base.size())
        throw std::invalid_argument("compose: kernel conditioning does not match base alphabet");
    std::vector<T> m(static_cast<std::size_t>(base.size()) * kernel.out_size(), T{});
    for (int a = 0; a < base.size(); ++a)
        for (int b = 0; b < kernel.out_size(); ++b)
            m[static_cast<std::size_t>(a) * kernel.out_size() + b] = base[a] * kernel(a, b);
    return JointPmf<T>(base.alphabet, kernel.out_alphabet, std::move(m));
}

template <class T>
JointPmf3<T> compose(const JointPmf<T>& base, const ConditionalPmf<T>& kernel) {
    if (kernel.cells != base.rows() * base.cols())
        throw std::invalid_argument("compose: kernel conditioning does not match base axes");
    std::vector<T> m(base.mass.size() * static_cast<std::size_t>(kernel.out_size()), T{});
    for (int x = 0; x < base.rows(); ++x)
        for (int y = 0; y < base.cols(); ++y) {
            const int cell = x * base.cols() + y;
            for (int z = 0; z < kernel.out_size(); ++z)
                m[(static_cast<std::size_t>(x) * base.cols() + y) * kernel.out_size() + z] =
                    base(x, y) * kernel(cell, z);
        }
    return JointPmf3<T>(base.row_alphabet, base.col_alphabet, kernel.out_alphabet, std::move(m));
}

// --- expected distortion (exact on the rational track) ---

template <class T>
T expected_distortion(const JointPmf<T>& joint_x_xhat, const DistortionMatrix& d) {
    if (joint_x_xhat.rows() != d.nx() || joint_x_xhat.cols() != d.nxh())
        throw std::invalid_argument("expected_distortion: alphabet mismatch");
    T acc{};
    for (int x = 0; x < d.nx(); ++x)
        for (int h = 0; h < d.nxh(); ++h) {
            if constexpr (std::is_same_v<T, double>) {
                acc += joint_x_xhat(x, h) * d.value_d(x, h);
            } else {
                acc += joint_x_xhat(x, h) * d(x, h);
            }
        }
    return acc;
}

template <class T>
T expected_distortion(const JointPmf3<T>& joint, const DistortionMatrix& d) {
    if (joint.nx() != d.nx() || joint.nz() != d.nxh())
        throw std::invalid_argument("expected_distortion: alphabet mismatch");
    T acc{};
    for (int x = 0; x < joint.nx(); ++x)
        for (int y = 0; y < joint.ny(); ++y)
            for (int h = 0; h < joint.nz(); ++h) {
                if constexpr (std::is_same_v<T, double>) {
                    acc += joint(x, y, h) * d.value_d(x, h);
                } else {
                    acc += joint(x, y, h) * d(x, h);
                }
            }
    return acc;
}

}  // namespace scexp
