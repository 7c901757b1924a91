#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace dst {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, Equal, GreaterEqual };

/// maximize c'x  subject to  rows,  lower <= x <= upper.
struct LinearProgram {
    struct Term {
        std::size_t var;
        double coef;
    };
    struct Row {
        std::vector<Term> terms;
        RowSense sense = RowSense::Equal;
        double rhs = 0.0;
        std::string name;
    };

    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::string> names;
    std::vector<Row> rows;

    std::size_t add_variable(double lo, double hi, double cost, std::string name = {});
    std::size_t add_row(std::vector<Term> terms, RowSense sense, double rhs, std::string name = {});

    std::size_t num_variables() const { return objective.size(); }
    std::size_t num_rows() const { return rows.size(); }

    double evaluate(const std::vector<double>& x) const;

    /// Largest bound or row violation of `x`.
    double max_violation(const std::vector<double>& x) const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

const char* to_string(SolveStatus status);

struct Solution {
    SolveStatus status = SolveStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> values;
    std::size_t iterations = 0;
};

enum class PivotRule {
    /// Lowest-index improving column, lowest-index leaving row on ratio ties.
    Bland,
    /// Largest reduced cost (lowest index on ties); drops to Bland's rule
    /// while a run of degenerate pivots lasts.
    DantzigBland,
};

struct SimplexOptions {
    double tolerance = 1e-9;
    PivotRule rule = PivotRule::Bland;
    std::size_t max_iterations = 0;  // 0: scaled to problem size
};

/// Two-phase bounded-variable primal simplex on a dense tableau.
///
/// Deterministic: the same program always yields the same basis and values.
/// Throws SolverFailure on iteration exhaustion or if the final point fails
/// the feasibility check.
Solution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

inline Solution solve_lp(const LinearProgram& lp, double tol) {
    SimplexOptions o;
    o.tolerance = tol;
    return solve_lp(lp, o);
}

/// CPLEX-style LP text (Maximize / Subject To / Bounds / End).
std::string write_lp_text(const LinearProgram& lp);

}  // namespace dst
