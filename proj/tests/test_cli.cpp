#include "scexp/cli.hpp"

#include "support/grid_oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace scexp;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = SCEXP_TEST_DATA_DIR;
const std::string kReference = kDataDir + "/reference_instance.json";

int run(std::vector<std::string> argv_strings) {
    std::vector<const char*> argv{"scexp"};
    for (const auto& s : argv_strings) argv.push_back(s.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / ("scexp_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(dir, ec); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("instance loading and schema errors") {
    const auto inst = load_instance(kReference);
    CHECK(inst.p_xy(0, 0) == Catch::Approx(0.45));
    CHECK(inst.delta_min_value == Rat(1, 10));
    CHECK(inst.default_delta.front() == Rat(1, 5));

    TempDir tmp;
    // floats are rejected in the distortion matrix
    {
        std::ofstream out(tmp.path("bad.json"));
        out << R"({"x_size":2,"y_size":2,"xhat_size":2,
                   "p_xy":[[0.45,0.05],[0.05,0.45]],
                   "distortion":[[0.0,1.0],[1.0,0.0]]})";
    }
    CHECK_THROWS_AS(load_instance(tmp.path("bad.json")), SchemaError);
    {
        std::ofstream out(tmp.path("bad2.json"));
        out << R"({"x_size":2,"y_size":2)";
    }
    CHECK_THROWS_AS(load_instance(tmp.path("bad2.json")), SchemaError);
    CHECK_THROWS_AS(load_instance(tmp.path("missing.json")), IoError);

    // float p_xy entries are converted exactly and normalized
    {
        std::ofstream out(tmp.path("ok.json"));
        out << R"({"x_size":2,"y_size":2,"xhat_size":2,
                   "p_xy":[[0.45,0.05],[0.05,0.45]],
                   "distortion":[[0,1],[1,0]]})";
    }
    {
        const auto ok = load_instance(tmp.path("ok.json"));
        // floats convert to their exact dyadic value and the mass sums to 1
        CHECK(ok.p_xy_exact(0, 0) == rat_from_double(0.45) / (rat_from_double(0.45) * 2 + rat_from_double(0.05) * 2));
        Rat total = 0;
        for (const auto& v : ok.p_xy_exact.mass) total += v;
        CHECK(total == 1);
        CHECK(ok.p_xy(0, 0) == Catch::Approx(0.45).margin(1e-12));
    }
}

TEST_CASE("exit codes are a stable contract") {
    TempDir tmp;
    CHECK(run({"exponent", "--instance", tmp.path("absent.json"), "--rate", "0.5"}) == 1);
    {
        std::ofstream out(tmp.path("bad.json"));
        out << "{ not json";
    }
    CHECK(run({"exponent", "--instance", tmp.path("bad.json"), "--rate", "0.5"}) == 2);
    CHECK(run({"exponent", "--instance", kReference, "--rate", "0.5", "--delta", "1/100"}) == 3);
    CHECK(run({"scheme", "--instance", kReference, "--rate", "1.0", "--n", "100"}) == 4);
    CHECK(run({"exponent", "--instance", kReference, "--rate", "0.9"}) == 0);
}

TEST_CASE("exponent command emits a verifiable witness") {
    TempDir tmp;
    const auto out = tmp.path("exp.json");
    REQUIRE(run({"exponent", "--instance", kReference, "--rate", "0.35", "--delta", "1/5",
                 "--out", out}) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    const double value = j["value"].get<double>();
    const double gap = j["diagnostics"]["gap"].get<double>();

    // round trip: rebuild the witness and re-evaluate the outer objective
    const auto inst = load_instance(kReference);
    std::vector<double> qm;
    for (const auto& row : j["witness_q_xy"])
        for (const auto& v : row) qm.push_back(v.get<double>());
    JointPmf<double> q(2, 2, qm);
    const double replay = outer_objective(inst.p_xy, q, 0.35, 0.2, inst.distortion);
    CHECK(replay == Catch::Approx(value).margin(gap + 1e-6));
}

TEST_CASE("sweep command") {
    TempDir tmp;
    const auto out = tmp.path("sweep.csv");

    // two identical endpoints give two identical rows
    REQUIRE(run({"sweep", "--instance", kReference, "--delta", "1/5", "--rate-min", "0.4",
                 "--rate-max", "0.4", "--steps", "2", "--out", out}) == 0);
    {
        std::istringstream cs(slurp(out));
        std::string header, r1, r2;
        std::getline(cs, header);
        std::getline(cs, r1);
        std::getline(cs, r2);
        CHECK(header == "R,E,rho_star,gap");
        CHECK(r1.substr(r1.find(',')) == r2.substr(r2.find(',')));
    }

    // determinism: byte-identical reruns
    const auto out2 = tmp.path("sweep2.csv");
    REQUIRE(run({"sweep", "--instance", kReference, "--delta", "1/5", "--rate-min", "0",
                 "--rate-max", "1", "--steps", "6", "--out", out}) == 0);
    REQUIRE(run({"sweep", "--instance", kReference, "--delta", "1/5", "--rate-min", "0",
                 "--rate-max", "1", "--steps", "6", "--out", out2}) == 0);
    CHECK(slurp(out) == slurp(out2));

    // the first grid point with E <= gap brackets the positivity threshold
    const auto inst = load_instance(kReference);
    const double rr = positivity_threshold(inst.p_xy, 0.2, inst.distortion);
    std::istringstream cs(slurp(out));
    std::string line;
    std::getline(cs, line);
    double first_zero = 1.0;
    while (std::getline(cs, line)) {
        double r, e, rho, gap;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r, &e, &rho, &gap) == 4);
        if (e <= gap) {
            first_zero = r;
            break;
        }
    }
    CHECK(std::abs(first_zero - rr) <= 0.2 + 1e-9);  // one grid step of 1/5

    // gnuplot emission
    REQUIRE(run({"sweep", "--instance", kReference, "--delta", "1/5", "--rate-min", "0.4",
                 "--rate-max", "0.5", "--steps", "2", "--out", out,
                 "--gnuplot", tmp.path("plot.gp")}) == 0);
    CHECK(slurp(tmp.path("plot.gp")).find("plot '") != std::string::npos);
}

TEST_CASE("rd command curves") {
    TempDir tmp;
    const auto out = tmp.path("rd.csv");
    // binary-Hamming standard curve against the closed form
    REQUIRE(run({"rd", "--instance", kReference, "--which", "standard", "--delta-min", "0.0",
                 "--delta-max", "0.45", "--steps", "10", "--out", out}) == 0);
    std::istringstream cs(slurp(out));
    std::string line;
    std::getline(cs, line);
    CHECK(line == "delta,rate,status");
    int rows = 0;
    while (std::getline(cs, line)) {
        double delta, rate;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,ok", &delta, &rate) == 2);
        CHECK(rate == Catch::Approx(scexp_test::binary_hamming_rd(0.5, delta)).margin(1e-5));
        ++rows;
    }
    CHECK(rows == 10);

    // remote curve: delta_min endpoint finite, zero beyond constant reproduction,
    // infeasible rows flagged
    const auto out2 = tmp.path("rd2.csv");
    REQUIRE(run({"rd", "--instance", kReference, "--which", "remote", "--delta", "1/20",
                 "--delta", "1/10", "--delta", "1/2", "--out", out2}) == 0);
    const auto text = slurp(out2);
    CHECK(text.find("0.05,,infeasible") != std::string::npos);
    CHECK(text.find("0.1,1,ok") != std::string::npos);
    CHECK(text.find("0.5,0,ok") != std::string::npos);
}

TEST_CASE("scheme command builds, serializes and replays") {
    TempDir tmp;
    const auto out = tmp.path("scheme.json");
    REQUIRE(run({"scheme", "--instance", kReference, "--rate", "0.5", "--delta", "1/5", "--n",
                 "4", "--out", out}) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    const std::string sp = j["success_prob"].get<std::string>();

    // replay through the stored tables reproduces the stored probability
    const auto inst = load_instance(kReference);
    const auto stored = cli::scheme_from_json(j);
    const Rat replay = evaluate_mapping(stored.n, stored.ny, stored.message_of_rank,
                                        stored.decoder, inst.p_xy_exact, inst.distortion,
                                        stored.delta);
    CHECK(rat_to_string(replay) == sp);
}

TEST_CASE("oracle command trajectory and golden reference") {
    TempDir tmp;
    const auto out = tmp.path("oracle.csv");
    REQUIRE(run({"oracle", "--instance", kReference, "--rate", "0.5", "--delta", "1/5", "--n",
                 "1", "--n", "2", "--n", "3", "--out", out, "--witness",
                 tmp.path("witness.json")}) == 0);
    const auto text = slurp(out);

    // the n = 1 row carries the closed single-letter optimum:
    // M = floor(2^0.5) = 1, so p_c = max_xh sum_y P(y) P(X = xh | y) = 1/2
    CHECK(text.find("1,0.5,") != std::string::npos);

    // golden file: produced by this oracle on its first certified run, frozen
    const auto golden_path = kDataDir + "/reference_oracle_golden.csv";
    if (fs::exists(golden_path)) {
        CHECK(text == slurp(golden_path));
    } else {
        std::ofstream gold(golden_path, std::ios::binary);
        gold << text;
        WARN("golden file created; rerun to compare");
    }

    // witness JSON re-evaluates to the reported p_c
    const auto w = nlohmann::json::parse(slurp(tmp.path("witness.json")));
    const auto inst = load_instance(kReference);
    for (const auto& rep : w) {
        const auto codebook = rep["codebook"].get<std::vector<std::vector<int>>>();
        const auto encoder = rep["encoder"].get<std::vector<int>>();
        const Rat pc = parse_rational(rep["p_c"].get<std::string>());
        CHECK(evaluate_mapping(rep["n"].get<int>(), 2, encoder, codebook, inst.p_xy_exact,
                               inst.distortion, Rat(1, 5)) == pc);
    }
}
