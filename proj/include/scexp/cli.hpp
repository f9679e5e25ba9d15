#pragma once

// Command-line front end: solver invocation, sweep orchestration, oracle
// trajectories and plot-ready data emission. All outputs are deterministic
// for a fixed configuration; CSV uses 12 significant digits and '\n' line
// endings.

#include "scexp/exponent.hpp"
#include "scexp/instance.hpp"
#include "scexp/oracle.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace scexp::cli {

inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt12(const Rat& v) { return fmt12(to_double(v)); }

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write output file: " + path);
    out << text;
}

inline void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text(path, text);
}

inline std::string gnuplot_script(const std::string& csv_path, const std::string& xlabel,
                                  const std::string& ylabel) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set xlabel '" << xlabel << "'\n"
       << "set ylabel '" << ylabel << "'\n"
       << "set grid\n"
       << "plot '" << csv_path << "' using 1:2 with linespoints\n";
    return os.str();
}

// --- JSON renderings ---

inline nlohmann::json matrix_json(const JointPmf<double>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json kernel_json(const ConditionalPmf<double>& k) {
    nlohmann::json rows = nlohmann::json::array();
    for (int c = 0; c < k.cells; ++c) {
        nlohmann::json row = nlohmann::json::array();
        for (int o = 0; o < k.out_size(); ++o) row.push_back(k(c, o));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json exponent_json(const ExponentResult& r, double rate, const Rat& delta) {
    nlohmann::json j;
    j["rate"] = rate;
    j["delta"] = rat_to_string(delta);
    j["value"] = std::isfinite(r.value) ? nlohmann::json(r.value) : nlohmann::json("inf");
    j["rho_star"] = r.rho_star;
    j["witness_q_xy"] = matrix_json(r.witness_q_xy);
    j["witness_kernel"] = kernel_json(r.witness_kernel);
    j["diagnostics"] = {{"grid_k", r.diagnostics.grid_k},
                        {"refine_rounds", r.diagnostics.refine_rounds},
                        {"evaluated_cells", r.diagnostics.evaluated_cells},
                        {"refine_residual", r.diagnostics.refine_residual},
                        {"inner_gap", r.diagnostics.inner_gap},
                        {"route_gap", r.diagnostics.route_gap},
                        {"gap", r.diagnostics.gap}};
    return j;
}

inline nlohmann::json scheme_json(const Scheme& s) {
    nlohmann::json j;
    j["n"] = s.n;
    j["ny"] = s.ny;
    j["nxh"] = s.nxh;
    j["m"] = s.m;
    j["rate"] = s.rate;
    j["delta"] = rat_to_string(s.delta);
    nlohmann::json dec = nlohmann::json::array();
    for (std::size_t m = 1; m <= s.decoder.size(); ++m) dec.push_back(s.codeword(static_cast<int>(m)));
    j["decoder"] = std::move(dec);
    j["message_of_rank"] = s.message_of_rank;
    nlohmann::json types = nlohmann::json::array();
    for (const auto& pt : s.per_type) {
        nlohmann::json t;
        t["q_y_counts"] = pt.q_y.counts;
        t["target_counts"] = pt.target.counts;
        t["cell_sizes"] = pt.cell_sizes;
        t["class_size"] = pt.class_size.str();
        t["paper_kept"] = pt.paper_kept;
        t["h_n_size"] = pt.h_n_size.str();
        t["seq_prob"] = rat_to_string(pt.seq_prob);
        t["pair_success"] = rat_to_string(pt.pair_success);
        t["codebook"] = pt.codebook;
        types.push_back(std::move(t));
    }
    j["per_type"] = std::move(types);
    return j;
}

struct StoredScheme {
    int n = 0, ny = 0, nxh = 0;
    std::vector<int> message_of_rank;
    std::vector<std::vector<int>> decoder;
    Rat delta;
};

inline StoredScheme scheme_from_json(const nlohmann::json& j) {
    StoredScheme s;
    try {
        s.n = j.at("n").get<int>();
        s.ny = j.at("ny").get<int>();
        s.nxh = j.at("nxh").get<int>();
        s.message_of_rank = j.at("message_of_rank").get<std::vector<int>>();
        s.decoder = j.at("decoder").get<std::vector<std::vector<int>>>();
        s.delta = parse_rational(j.at("delta").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scheme document: ") + e.what());
    }
    return s;
}

inline nlohmann::json oracle_report_json(const OracleReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["m"] = r.m;
    j["exhaustive"] = r.exhaustive;
    j["p_c"] = rat_to_string(r.p_c);
    j["scheme_prob"] = rat_to_string(r.scheme_prob);
    j["converse_bound"] = rat_to_string(r.converse_bound);
    j["exponent_estimate"] = r.exponent_estimate;
    j["codebook"] = r.codebook;
    j["encoder"] = r.encoder;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

// --- commands ---

struct CommonArgs {
    std::string instance_path;
    std::string out_path;      // empty = stdout
    std::string format = "csv";
    std::string gnuplot_path;
    SolverOptions solver;
};

inline Rat resolve_delta(const ProblemInstance& inst, const std::string& delta_arg) {
    if (!delta_arg.empty()) return parse_rational(delta_arg);
    if (!inst.default_delta.empty()) return inst.default_delta.front();
    throw SchemaError("no --delta given and the instance carries no default_delta");
}

inline double resolve_rate(const ProblemInstance& inst, std::optional<double> rate_arg) {
    if (rate_arg) return *rate_arg;
    if (!inst.default_rate.empty()) return inst.default_rate.front();
    throw SchemaError("no --rate given and the instance carries no default_rate");
}

inline void require_feasible(const ProblemInstance& inst, const Rat& delta) {
    if (!inst.delta_feasible(delta))
        throw InfeasibleError("delta " + rat_to_string(delta) + " is below delta_min = " +
                              rat_to_string(inst.delta_min_value));
}

inline int cmd_exponent(const CommonArgs& args, std::optional<double> rate_arg,
                        const std::string& delta_arg, const std::string& reduction) {
    const auto inst = load_instance(args.instance_path);
    const Rat delta = resolve_delta(inst, delta_arg);
    const double rate = resolve_rate(inst, rate_arg);
    require_feasible(inst, delta);
    const double delta_d = to_double(delta);

    const auto res = exponent(inst.p_xy, rate, delta_d, inst.distortion, args.solver);
    nlohmann::json j = exponent_json(res, rate, delta);

    std::ostringstream human;
    human << "E(R=" << fmt12(rate) << ", delta=" << rat_to_string(delta)
          << ") = " << fmt12(res.value) << " bits\n"
          << "  rho* = " << fmt12(res.rho_star) << ", certified gap = "
          << fmt12(res.diagnostics.gap) << "\n"
          << "  witness Q_XY:\n";
    for (int x = 0; x < res.witness_q_xy.rows(); ++x) {
        human << "    ";
        for (int y = 0; y < res.witness_q_xy.cols(); ++y)
            human << fmt12(res.witness_q_xy(x, y)) << (y + 1 < res.witness_q_xy.cols() ? " " : "");
        human << "\n";
    }

    if (reduction == "noiseless") {
        bool diagonal = inst.p_xy.rows() == inst.p_xy.cols();
        for (int x = 0; x < inst.p_xy.rows() && diagonal; ++x)
            for (int y = 0; y < inst.p_xy.cols(); ++y)
                if (x != y && inst.p_xy(x, y) != 0.0) diagonal = false;
        if (!diagonal)
            throw InfeasibleError("--reduction noiseless requires a diagonal (X = Y) instance");
        std::vector<double> px;
        for (int x = 0; x < inst.p_xy.rows(); ++x) px.push_back(inst.p_xy(x, x));
        const auto red = exponent_noiseless(Pmf<double>(inst.x_alphabet, px), rate, delta_d,
                                            inst.distortion, args.solver);
        j["reduction"] = {{"kind", "noiseless"},
                          {"value", red.value},
                          {"difference", std::abs(red.value - res.value)}};
        human << "  noiseless reduction value = " << fmt12(red.value)
              << " (difference " << fmt12(std::abs(red.value - res.value)) << ")\n";
    } else if (reduction == "nocompression") {
        const auto red = exponent_no_compression(inst.p_xy, delta_d, inst.distortion, args.solver);
        j["reduction"] = {{"kind", "nocompression"},
                          {"value", red.value},
                          {"difference", std::abs(red.value - res.value)}};
        human << "  no-compression value = " << fmt12(red.value)
              << " (difference " << fmt12(std::abs(red.value - res.value)) << ")\n";
    } else if (!reduction.empty() && reduction != "none") {
        throw SchemaError("unknown --reduction: " + reduction);
    }

    std::cout << human.str();
    if (!args.out_path.empty())
        write_text(args.out_path, j.dump(2) + "\n");
    else if (args.format == "json")
        std::cout << j.dump(2) << "\n";
    return 0;
}

inline int cmd_sweep(const CommonArgs& args, const std::string& delta_arg, double r_min,
                     double r_max, int steps, const std::string& json_path) {
    if (steps < 2) throw SchemaError("sweep: --steps must be >= 2");
    if (r_min > r_max) throw SchemaError("sweep: --rate-min must be <= --rate-max");
    const auto inst = load_instance(args.instance_path);
    const Rat delta = resolve_delta(inst, delta_arg);
    require_feasible(inst, delta);

    std::vector<double> grid;
    for (int i = 0; i < steps; ++i)
        grid.push_back(r_min + (r_max - r_min) * i / (steps - 1));
    const auto rows = sweep_rate(inst.p_xy, to_double(delta), inst.distortion, grid, args.solver);

    std::ostringstream csv;
    csv << "R,E,rho_star,gap\n";
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& [r, res] : rows) {
        csv << fmt12(r) << ',' << fmt12(res.value) << ',' << fmt12(res.rho_star) << ','
            << fmt12(res.diagnostics.gap) << "\n";
        jrows.push_back(exponent_json(res, r, delta));
    }
    emit(args.out_path, csv.str());
    if (!json_path.empty()) write_text(json_path, jrows.dump(2) + "\n");
    if (!args.gnuplot_path.empty())
        write_text(args.gnuplot_path,
                   gnuplot_script(args.out_path.empty() ? "sweep.csv" : args.out_path, "R (bits)",
                                  "E(R, delta) (bits)"));
    return 0;
}

inline int cmd_oracle(const CommonArgs& args, std::optional<double> rate_arg,
                      const std::string& delta_arg, std::vector<int> n_list,
                      const std::string& witness_path) {
    const auto inst = load_instance(args.instance_path);
    const Rat delta = resolve_delta(inst, delta_arg);
    const double rate = resolve_rate(inst, rate_arg);
    require_feasible(inst, delta);
    if (n_list.empty()) throw SchemaError("oracle: at least one --n is required");

    TrajectoryOptions topts;
    topts.budget = args.solver.budget;
    const auto reports =
        exponent_trajectory(inst.p_xy_exact, inst.distortion, delta, rate, n_list, topts);

    std::ostringstream csv;
    csv << "n,p_c,scheme_prob,converse_bound,exponent_estimate\n";
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& rep : reports) {
        if (!rep.error.empty()) {
            std::cerr << "n=" << rep.n << ": " << rep.error << "\n";
            continue;
        }
        if (!(rep.scheme_prob <= rep.p_c && rep.p_c <= rep.converse_bound) && rep.exhaustive) {
            std::cerr << "sandwich violated at n=" << rep.n << ": scheme="
                      << rat_to_string(rep.scheme_prob) << " p_c=" << rat_to_string(rep.p_c)
                      << " B=" << rat_to_string(rep.converse_bound) << "\n";
            throw std::runtime_error("oracle sandwich violated; aborting");
        }
        csv << rep.n << ',' << fmt12(rep.p_c) << ',' << fmt12(rep.scheme_prob) << ','
            << fmt12(rep.converse_bound) << ',' << fmt12(rep.exponent_estimate) << "\n";
        jrows.push_back(oracle_report_json(rep));
        if (!rep.exhaustive)
            std::cerr << "n=" << rep.n << ": p_c is a hill-climb lower bound (budget)\n";
    }
    emit(args.out_path, csv.str());
    if (!witness_path.empty()) write_text(witness_path, jrows.dump(2) + "\n");
    if (!args.gnuplot_path.empty())
        write_text(args.gnuplot_path,
                   gnuplot_script(args.out_path.empty() ? "oracle.csv" : args.out_path, "n",
                                  "probability"));
    return 0;
}

inline int cmd_rd(const CommonArgs& args, const std::string& which,
                  std::vector<std::string> delta_args, std::optional<double> dmin_arg,
                  std::optional<double> dmax_arg, int steps) {
    const auto inst = load_instance(args.instance_path);
    std::vector<Rat> deltas;
    for (const auto& s : delta_args) deltas.push_back(parse_rational(s));
    if (deltas.empty()) {
        if (dmin_arg && dmax_arg && steps >= 2) {
            for (int i = 0; i < steps; ++i)
                deltas.push_back(rat_from_double(*dmin_arg + (*dmax_arg - *dmin_arg) * i / (steps - 1)));
        } else if (!inst.default_delta.empty()) {
            deltas = inst.default_delta;
        } else {
            throw SchemaError("rd: give --delta values or --delta-min/--delta-max/--steps");
        }
    }

    std::ostringstream csv;
    csv << "delta,rate,status\n";
    for (const auto& delta : deltas) {
        const double dd = to_double(delta);
        try {
            RdResult r;
            if (which == "standard") {
                r = standard_rd(inst.p_xy.row_marginal(), inst.distortion, dd);
            } else if (which == "remote") {
                r = remote_rd(inst.p_xy, inst.distortion, dd);
                if (r.dual_route_gap > 1e-6)
                    std::cerr << "warning: remote dual-route gap " << fmt12(r.dual_route_gap)
                              << " at delta " << rat_to_string(delta) << "\n";
            } else if (which == "conditional") {
                r = conditional_rd(inst.p_xy, inst.distortion, dd);
            } else {
                throw SchemaError("rd: --which must be standard, remote or conditional");
            }
            csv << fmt12(delta) << ',' << fmt12(r.rate) << ",ok\n";
        } catch (const InfeasibleError&) {
            csv << fmt12(delta) << ",,infeasible\n";
        }
    }
    emit(args.out_path, csv.str());
    if (!args.gnuplot_path.empty())
        write_text(args.gnuplot_path,
                   gnuplot_script(args.out_path.empty() ? "rd.csv" : args.out_path, "delta",
                                  "rate (bits)"));
    return 0;
}

inline int cmd_scheme(const CommonArgs& args, std::optional<double> rate_arg,
                      const std::string& delta_arg, int n, const std::string& replay_path) {
    const auto inst = load_instance(args.instance_path);
    if (!replay_path.empty()) {
        std::ifstream in(replay_path);
        if (!in) throw IoError("cannot open scheme document: " + replay_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("scheme document: parse error: ") + e.what());
        }
        const auto stored = scheme_from_json(j);
        if (stored.ny != inst.y_alphabet.size || stored.nxh != inst.xhat_alphabet.size)
            throw SchemaError("scheme document alphabets do not match the instance");
        const Rat sp = evaluate_mapping(stored.n, stored.ny, stored.message_of_rank,
                                        stored.decoder, inst.p_xy_exact, inst.distortion,
                                        stored.delta);
        std::cout << "replayed scheme: n=" << stored.n
                  << " success_prob=" << rat_to_string(sp) << " (" << fmt12(sp) << ")\n";
        return 0;
    }

    const Rat delta = resolve_delta(inst, delta_arg);
    const double rate = resolve_rate(inst, rate_arg);
    require_feasible(inst, delta);
    if (n < 1) throw SchemaError("scheme: --n must be >= 1");

    const Scheme s = build_scheme(inst.p_xy_exact, inst.distortion, rate, delta, n);
    const Rat sp = evaluate_scheme(s, inst.p_xy_exact, inst.distortion, delta);
    std::cout << "scheme: n=" << n << " M=" << s.m << " messages_used=" << s.decoder.size()
              << "\n  success_prob = " << rat_to_string(sp) << " (" << fmt12(sp) << ")\n";
    for (const auto& pt : s.per_type) {
        std::cout << "  type [";
        for (std::size_t i = 0; i < pt.q_y.counts.size(); ++i)
            std::cout << pt.q_y.counts[i] << (i + 1 < pt.q_y.counts.size() ? " " : "");
        std::cout << "]: class_size=" << pt.class_size.str() << " cells=" << pt.cell_sizes.size()
                  << " H_n=" << pt.h_n_size.str() << "\n";
    }
    nlohmann::json j = scheme_json(s);
    j["success_prob"] = rat_to_string(sp);
    if (!args.out_path.empty()) write_text(args.out_path, j.dump(2) + "\n");
    return 0;
}

// --- CLI11 wiring ---

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"strong converse exponents for remote lossy source coding"};
    app.require_subcommand(1);

    CommonArgs args;
    std::optional<double> rate_arg;
    std::string delta_arg, reduction = "none", which = "standard";
    std::string json_path, witness_path, replay_path;
    double r_min = 0.0, r_max = 1.0;
    std::optional<double> dmin_arg, dmax_arg;
    int steps = 11, n_single = 0;
    std::vector<int> n_list;
    std::vector<std::string> delta_list;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--instance", args.instance_path, "problem instance JSON")->required();
        sub->add_option("--grid-k", args.solver.grid_k, "outer simplex grid denominator");
        sub->add_option("--rho-steps", args.solver.rho_steps, "rho validation grid size");
        sub->add_option("--budget", args.solver.budget, "enumeration budget");
        sub->add_option("--workers", args.solver.workers,
                        "worker threads (0 = SCEXP_WORKERS env or hardware)");
        sub->add_option("--out", args.out_path, "output path ('-' or empty = stdout)");
        sub->add_option("--format", args.format, "primary output format")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--gnuplot", args.gnuplot_path, "write a gnuplot script here");
    };

    auto* cexp = app.add_subcommand("exponent", "compute E(R, delta)");
    add_common(cexp);
    cexp->add_option("--rate", rate_arg, "rate R in bits");
    cexp->add_option("--delta", delta_arg, "distortion level (rational or decimal)");
    cexp->add_option("--reduction", reduction, "also run a reduction: noiseless|nocompression");

    auto* csweep = app.add_subcommand("sweep", "E over a rate grid");
    add_common(csweep);
    csweep->add_option("--delta", delta_arg, "distortion level");
    csweep->add_option("--rate-min", r_min, "sweep start")->required();
    csweep->add_option("--rate-max", r_max, "sweep end")->required();
    csweep->add_option("--steps", steps, "grid points (>= 2)");
    csweep->add_option("--json", json_path, "also write full results as JSON");

    auto* corc = app.add_subcommand("oracle", "exact p_c / scheme / converse trajectory");
    add_common(corc);
    corc->add_option("--rate", rate_arg, "rate R in bits");
    corc->add_option("--delta", delta_arg, "distortion level");
    corc->add_option("--n", n_list, "blocklengths (repeatable)");
    corc->add_option("--witness", witness_path, "write witness reports as JSON");

    auto* crd = app.add_subcommand("rd", "rate-distortion curves");
    add_common(crd);
    crd->add_option("--which", which, "standard|remote|conditional");
    crd->add_option("--delta", delta_list, "distortion levels (repeatable)");
    crd->add_option("--delta-min", dmin_arg, "grid start");
    crd->add_option("--delta-max", dmax_arg, "grid end");
    crd->add_option("--steps", steps, "grid points");

    auto* csch = app.add_subcommand("scheme", "build, evaluate and serialize a covering scheme");
    add_common(csch);
    csch->add_option("--rate", rate_arg, "rate R in bits");
    csch->add_option("--delta", delta_arg, "distortion level");
    csch->add_option("--n", n_single, "blocklength");
    csch->add_option("--replay", replay_path, "evaluate a stored scheme JSON instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cexp->parsed()) return cmd_exponent(args, rate_arg, delta_arg, reduction);
        if (csweep->parsed()) return cmd_sweep(args, delta_arg, r_min, r_max, steps, json_path);
        if (corc->parsed()) return cmd_oracle(args, rate_arg, delta_arg, n_list, witness_path);
        if (crd->parsed()) return cmd_rd(args, which, delta_list, dmin_arg, dmax_arg, steps);
        if (csch->parsed()) return cmd_scheme(args, rate_arg, delta_arg, n_single, replay_path);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return IoError::exit_code;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return SchemaError::exit_code;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return InfeasibleError::exit_code;
    } catch (const BudgetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return BudgetError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace scexp::cli
