#pragma once

// Problem-instance ingestion. Instances are JSON documents with explicit
// alphabet sizes, a row-major P_XY (rationals as "num/den" strings, floats
// allowed and converted exactly), and a row-major distortion matrix whose
// entries must be rational-encoded; distortion exactness is load-bearing for
// the oracles.

#include "scexp/errors.hpp"
#include "scexp/rd.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace scexp {

struct ProblemInstance {
    Alphabet x_alphabet, y_alphabet, xhat_alphabet;
    JointPmf<Rat> p_xy_exact;
    JointPmf<double> p_xy;
    DistortionMatrix distortion;
    std::vector<Rat> default_delta;
    std::vector<double> default_rate;
    Rat delta_min_value;
    std::vector<int> delta_min_witness;

    bool delta_feasible(const Rat& delta) const { return delta >= delta_min_value; }
};

namespace detail {

inline Rat json_rational(const nlohmann::json& v, bool allow_float, const char* what) {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rat(BigInt(v.get<long long>()));
    if (v.is_number_float()) {
        if (!allow_float)
            throw SchemaError(std::string(what) + ": floats are not accepted here; use \"num/den\"");
        return rat_from_double(v.get<double>());
    }
    throw SchemaError(std::string(what) + ": expected number or \"num/den\" string");
}

inline Alphabet json_alphabet(const nlohmann::json& j, const char* size_key,
                              const char* label_key) {
    if (!j.contains(size_key) || !j[size_key].is_number_integer())
        throw SchemaError(std::string("instance: missing integer field ") + size_key);
    const int size = j[size_key].get<int>();
    if (size < 1) throw SchemaError(std::string(size_key) + " must be >= 1");
    std::vector<std::string> labels;
    if (j.contains(label_key)) {
        for (const auto& l : j[label_key]) labels.push_back(l.get<std::string>());
        if (static_cast<int>(labels.size()) != size)
            throw SchemaError(std::string(label_key) + " length does not match size");
    }
    return Alphabet(size, std::move(labels));
}

inline std::vector<Rat> json_matrix(const nlohmann::json& m, int rows, int cols, bool allow_float,
                                    const char* what) {
    if (!m.is_array() || static_cast<int>(m.size()) != rows)
        throw SchemaError(std::string(what) + ": expected " + std::to_string(rows) + " rows");
    std::vector<Rat> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    for (const auto& row : m) {
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw SchemaError(std::string(what) + ": expected " + std::to_string(cols) + " columns");
        for (const auto& v : row) out.push_back(json_rational(v, allow_float, what));
    }
    return out;
}

}  // namespace detail

inline ProblemInstance parse_instance(const nlohmann::json& j) {
    ProblemInstance inst;
    try {
        inst.x_alphabet = detail::json_alphabet(j, "x_size", "x_labels");
        inst.y_alphabet = detail::json_alphabet(j, "y_size", "y_labels");
        inst.xhat_alphabet = detail::json_alphabet(j, "xhat_size", "xhat_labels");
        if (!j.contains("p_xy")) throw SchemaError("instance: missing p_xy");
        if (!j.contains("distortion")) throw SchemaError("instance: missing distortion");

        auto p_vals = detail::json_matrix(j["p_xy"], inst.x_alphabet.size, inst.y_alphabet.size,
                                          /*allow_float=*/true, "p_xy");
        inst.p_xy_exact = JointPmf<Rat>(inst.x_alphabet, inst.y_alphabet, std::move(p_vals));
        inst.p_xy = to_double(inst.p_xy_exact);

        auto d_vals = detail::json_matrix(j["distortion"], inst.x_alphabet.size,
                                          inst.xhat_alphabet.size,
                                          /*allow_float=*/false, "distortion");
        inst.distortion = DistortionMatrix(inst.x_alphabet, inst.xhat_alphabet, std::move(d_vals));

        if (j.contains("default_delta"))
            for (const auto& v : j["default_delta"])
                inst.default_delta.push_back(detail::json_rational(v, true, "default_delta"));
        if (j.contains("default_rate"))
            for (const auto& v : j["default_rate"]) {
                if (v.is_string())
                    inst.default_rate.push_back(to_double(parse_rational(v.get<std::string>())));
                else
                    inst.default_rate.push_back(v.get<double>());
            }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("instance: malformed JSON value: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("instance: ") + e.what());
    }
    const auto dm = delta_min(inst.p_xy_exact, inst.distortion);
    inst.delta_min_value = dm.value;
    inst.delta_min_witness = dm.witness;
    return inst;
}

inline ProblemInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open instance file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("instance: JSON parse error: ") + e.what());
    }
    return parse_instance(j);
}

}  // namespace scexp
