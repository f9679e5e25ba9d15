#pragma once

#include <stdexcept>
#include <string>

namespace scexp {

// Stable CLI exit-code contract: 0 success, 1 I/O, 2 schema, 3 infeasible, 4 budget.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 1;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 2;
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 3;
};

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 4;
};

}  // namespace scexp
