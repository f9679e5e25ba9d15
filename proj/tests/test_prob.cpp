#include "scexp/info.hpp"

#include "support/random_instances.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace scexp;
using scexp_test::random_joint;
using scexp_test::random_pmf;
using scexp_test::random_simplex;

TEST_CASE("entropy basics") {
    CHECK(entropy(Pmf<double>({0.5, 0.5})) == Catch::Approx(1.0).margin(1e-15));
    CHECK(entropy(Pmf<double>({1.0, 0.0})) == Catch::Approx(0.0).margin(1e-15));
    CHECK(entropy(Pmf<double>({0.25, 0.25, 0.25, 0.25})) == Catch::Approx(2.0).margin(1e-15));

    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const auto p = random_pmf(rng, 4);
        const double h = entropy(p);
        CHECK(h >= 0.0);
        CHECK(h <= 2.0 + 1e-12);
    }
}

TEST_CASE("kl divergence conventions") {
    Pmf<double> u({0.5, 0.5});
    CHECK(kl_divergence(u, u) == Catch::Approx(0.0).margin(1e-15));
    CHECK(kl_divergence(Pmf<double>({1.0, 0.0}), u) == Catch::Approx(1.0).margin(1e-15));
    CHECK(kl_divergence(u, Pmf<double>({1.0, 0.0})) == kInf);
    CHECK_THROWS_AS(kl_divergence(u, Pmf<double>({0.5, 0.25, 0.25})), std::invalid_argument);

    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const auto q = random_pmf(rng, 3), p = random_pmf(rng, 3);
        const double d = kl_divergence(q, p);
        CHECK(d >= 0.0);
        double tv = 0.0;
        for (int k = 0; k < 3; ++k) tv = std::max(tv, std::abs(q[k] - p[k]));
        if (d < 1e-12) CHECK(tv < 1e-5);  // zero divergence only at equality
    }
}

TEST_CASE("conditional kl") {
    std::vector<double> rows_q{1.0, 0.0, 0.5, 0.5};
    std::vector<double> rows_p{0.5, 0.5, 0.5, 0.5};
    ConditionalPmf<double> q(2, Alphabet(2), rows_q);
    ConditionalPmf<double> p(2, Alphabet(2), rows_p);
    CHECK(conditional_kl(q, q, Pmf<double>({0.3, 0.7})) == Catch::Approx(0.0).margin(1e-15));
    // zero weight on the only mismatching row
    CHECK(conditional_kl(q, p, std::vector<double>{0.0, 1.0}) == Catch::Approx(0.0).margin(1e-15));
    // hand arithmetic: 0.5 * D([1,0]||[0.5,0.5]) + 0.5 * 0 = 0.5
    ConditionalPmf<double> q2(2, Alphabet(2), {1.0, 0.0, 0.5, 0.5});
    CHECK(conditional_kl(q2, p, std::vector<double>{0.5, 0.5}) ==
          Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("mutual information") {
    // product joint
    JointPmf<double> prod(2, 2, {0.18, 0.42, 0.12, 0.28});  // (0.6,0.4) x (0.3,0.7)
    CHECK(mutual_information(prod) == Catch::Approx(0.0).margin(1e-12));
    // identity coupling of uniform bits
    JointPmf<double> ident(2, 2, {0.5, 0.0, 0.0, 0.5});
    CHECK(mutual_information(ident) == Catch::Approx(1.0).margin(1e-12));
    // frozen from exact evaluation of sum q log q/(q_r q_c)
    JointPmf<double> j(2, 2, {0.4, 0.1, 0.1, 0.4});
    CHECK(mutual_information(j) == Catch::Approx(0.278071905112638).margin(1e-12));

    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
        const auto q = random_joint(rng, 3, 2);
        // identity: I equals KL(joint || product of marginals)
        const auto pr = q.row_marginal();
        const auto pc = q.col_marginal();
        std::vector<double> prod_mass;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 2; ++c) prod_mass.push_back(pr[r] * pc[c]);
        const double viakl = kl_divergence(q, JointPmf<double>(3, 2, prod_mass));
        CHECK(mutual_information(q) == Catch::Approx(viakl).margin(1e-12));
    }
}

namespace {

JointPmf3<double> random_joint3(std::mt19937_64& rng, int nx, int ny, int nz) {
    return JointPmf3<double>(nx, ny, nz, random_simplex(rng, nx * ny * nz));
}

double entropy_of(const std::vector<double>& mass) {
    double h = 0.0;
    for (double v : mass)
        if (v > 0) h -= v * std::log2(v);
    return h;
}

}  // namespace

TEST_CASE("conditional mutual information") {
    // kernel depending only on y: Markov X - Y - Xhat
    std::mt19937_64 rng(14);
    const auto q_xy = random_joint(rng, 2, 2);
    std::vector<double> krows;
    const std::vector<double> per_y{0.3, 0.7, 0.9, 0.1};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            krows.push_back(per_y[static_cast<std::size_t>(2 * y)]);
            krows.push_back(per_y[static_cast<std::size_t>(2 * y + 1)]);
        }
    const auto j3 = compose(q_xy, ConditionalPmf<double>(4, Alphabet(2), krows));
    CHECK(conditional_mutual_information(j3) == Catch::Approx(0.0).margin(1e-12));

    // constant Y, Xhat = X uniform: reduces to I(X;Xhat) = 1
    JointPmf3<double> c(2, 1, 2, {0.5, 0.0, 0.0, 0.5});
    CHECK(conditional_mutual_information(c) == Catch::Approx(1.0).margin(1e-12));

    // entropy-difference oracle: I(X;Xhat|Y) = H(X|Y) - H(X|Y,Xhat)
    for (int i = 0; i < 100; ++i) {
        const auto t = random_joint3(rng, 2, 2, 2);
        const auto xy = t.marginal_xy();
        const auto yz = t.marginal_yz();
        const double h_xy = entropy_of(xy.mass), h_y = entropy(xy.col_marginal());
        const double h_xyz = entropy_of(t.mass), h_yz = entropy_of(yz.mass);
        const double oracle = (h_xy - h_y) - (h_xyz - h_yz);
        CHECK(conditional_mutual_information(t) == Catch::Approx(oracle).margin(1e-12));
    }
}

TEST_CASE("compose and marginalize") {
    // constant kernel gives the product joint
    Pmf<double> base({0.3, 0.7});
    ConditionalPmf<double> constant(2, Alphabet(2), {0.2, 0.8, 0.2, 0.8});
    const auto prod = compose(base, constant);
    CHECK(prod(0, 1) == Catch::Approx(0.24).margin(1e-15));
    CHECK(mutual_information(prod) == Catch::Approx(0.0).margin(1e-12));

    // identity kernel on uniform bits: diagonal halves
    const auto diag = compose(Pmf<double>({0.5, 0.5}),
                              ConditionalPmf<double>(2, Alphabet(2), {1.0, 0.0, 0.0, 1.0}));
    CHECK(diag(0, 0) == 0.5);
    CHECK(diag(0, 1) == 0.0);

    // exact round trip on the rational track
    std::vector<Rat> bm{Rat(1, 3), Rat(2, 3)};
    std::vector<Rat> km{Rat(1, 7), Rat(6, 7), Rat(2, 5), Rat(3, 5)};
    Pmf<Rat> rb(Alphabet(2), bm);
    const auto joint = compose(rb, ConditionalPmf<Rat>(2, Alphabet(2), km));
    const auto back = joint.row_marginal();
    CHECK(back[0] == Rat(1, 3));
    CHECK(back[1] == Rat(2, 3));

    // three-axis compose marginalizes back exactly as well
    std::vector<Rat> jm{Rat(1, 4), Rat(1, 4), Rat(1, 6), Rat(1, 3)};
    JointPmf<Rat> base2(Alphabet(2), Alphabet(2), jm);
    std::vector<Rat> k3;
    for (int c = 0; c < 4; ++c) {
        k3.push_back(Rat(c + 1, 10));
        k3.push_back(Rat(9 - c, 10));
    }
    const auto j3 = compose(base2, ConditionalPmf<Rat>(4, Alphabet(2), k3));
    const auto back2 = j3.marginal_xy();
    for (std::size_t i = 0; i < jm.size(); ++i) CHECK(back2.mass[i] == jm[i]);
}

TEST_CASE("expected distortion") {
    const auto ham = DistortionMatrix::hamming(2);
    JointPmf<double> ident(2, 2, {0.5, 0.0, 0.0, 0.5});
    CHECK(expected_distortion(ident, ham) == Catch::Approx(0.0).margin(1e-15));
    JointPmf<double> indep(2, 2, {0.25, 0.25, 0.25, 0.25});
    CHECK(expected_distortion(indep, ham) == Catch::Approx(0.5).margin(1e-15));
    JointPmf<double> j(2, 2, {0.4, 0.1, 0.1, 0.4});
    CHECK(expected_distortion(j, ham) == Catch::Approx(0.2).margin(1e-15));

    // exact on rationals
    JointPmf<Rat> jr(Alphabet(2), Alphabet(2), {Rat(2, 5), Rat(1, 10), Rat(1, 10), Rat(2, 5)});
    CHECK(expected_distortion(jr, ham) == Rat(1, 5));
}

TEST_CASE("divergence chain identity") {
    // D(Q_Y||P_Y) + D(Q_{X|YXh} || P_{X|Y} | Q_{YXh})
    //   = D(Q_XY||P_XY) + I_Q(X;Xh|Y), assembled from conditionals
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q_xy = random_joint(rng, 2, 2);
        const auto p_xy = random_joint(rng, 2, 2);
        std::vector<double> krows;
        for (int c = 0; c < 4; ++c) {
            const double t = scexp_test::uniform01(rng);
            krows.push_back(t);
            krows.push_back(1.0 - t);
        }
        const auto t3 = compose(q_xy, ConditionalPmf<double>(4, Alphabet(2), krows));

        const auto q_y = q_xy.col_marginal();
        const auto p_y = p_xy.col_marginal();
        const auto q_yxh = t3.marginal_yz();

        // per-(y,xh) posterior of X under Q, and P(x|y) replicated over xh
        std::vector<double> post_rows, pxy_rows;
        std::vector<double> weights;
        for (int y = 0; y < 2; ++y)
            for (int h = 0; h < 2; ++h) {
                const double w = q_yxh(y, h);
                weights.push_back(w);
                for (int x = 0; x < 2; ++x)
                    post_rows.push_back(w > 0 ? t3(x, y, h) / w : (x == 0 ? 1.0 : 0.0));
                for (int x = 0; x < 2; ++x)
                    pxy_rows.push_back(p_y[y] > 0 ? p_xy(x, y) / p_y[y] : (x == 0 ? 1.0 : 0.0));
            }
        ConditionalPmf<double> q_cond(4, Alphabet(2), post_rows);
        ConditionalPmf<double> p_cond(4, Alphabet(2), pxy_rows);

        const double lhs = kl_divergence(q_y, p_y) + conditional_kl(q_cond, p_cond, weights);
        const double rhs = kl_divergence(q_xy, p_xy) + conditional_mutual_information(t3);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-10));

        // middle decomposition: the extra term is exactly I(X;Xh|Y)
        std::vector<double> qx_given_y_rows;
        for (int y = 0; y < 2; ++y)
            for (int h = 0; h < 2; ++h)
                for (int x = 0; x < 2; ++x)
                    qx_given_y_rows.push_back(q_y[y] > 0 ? q_xy(x, y) / q_y[y]
                                                         : (x == 0 ? 1.0 : 0.0));
        ConditionalPmf<double> q_xgy(4, Alphabet(2), qx_given_y_rows);
        const double mid = conditional_kl(q_cond, q_xgy, weights);
        CHECK(mid == Catch::Approx(conditional_mutual_information(t3)).margin(1e-10));
    }
}

TEST_CASE("construction validation") {
    CHECK_THROWS_AS(Alphabet(0), std::invalid_argument);
    CHECK_THROWS_AS(Alphabet(2, {"a"}), std::invalid_argument);
    CHECK_THROWS_AS(Pmf<double>({0.6, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(Pmf<double>({-0.1, 1.1}), std::invalid_argument);
    // deviations within 1e-9 are normalized
    Pmf<double> p({0.5 + 4e-10, 0.5});
    CHECK(p[0] + p[1] == Catch::Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(DistortionMatrix(2, 2, {Rat(-1), Rat(0), Rat(0), Rat(1)}),
                    std::invalid_argument);
}
