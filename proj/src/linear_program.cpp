#include "dst/linear_program.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dst/common.hpp"

namespace dst {

std::size_t LinearProgram::add_variable(double lo, double hi, double cost, std::string name) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    if (name.empty()) {
        name = "x" + std::to_string(objective.size() - 1);
    }
    names.push_back(std::move(name));
    return objective.size() - 1;
}

std::size_t LinearProgram::add_row(std::vector<Term> terms, RowSense sense, double rhs, std::string name) {
    for (const auto& t : terms) {
        if (t.var >= num_variables()) {
            throw InvalidInput("row references unknown variable");
        }
    }
    if (name.empty()) {
        name = "r" + std::to_string(rows.size());
    }
    rows.push_back({std::move(terms), sense, rhs, std::move(name)});
    return rows.size() - 1;
}

double LinearProgram::evaluate(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < objective.size(); ++j) {
        v += objective[j] * x[j];
    }
    return v;
}

double LinearProgram::max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        worst = std::max({worst, lower[j] - x[j], x[j] - upper[j]});
    }
    for (const auto& row : rows) {
        double lhs = 0.0;
        for (const auto& t : row.terms) {
            lhs += t.coef * x[t.var];
        }
        const double diff = lhs - row.rhs;
        switch (row.sense) {
            case RowSense::LessEqual: worst = std::max(worst, diff); break;
            case RowSense::GreaterEqual: worst = std::max(worst, -diff); break;
            case RowSense::Equal: worst = std::max(worst, std::abs(diff)); break;
        }
    }
    return worst;
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
    }
    return "unknown";
}

namespace {

constexpr double kPivotTol = 1e-11;
constexpr std::size_t kDegenerateRunBeforeBland = 50;
constexpr std::size_t kRefreshEvery = 100;

// Dense tableau over structural, slack and artificial columns.
class Tableau {
public:
    Tableau(const LinearProgram& lp, const SimplexOptions& opt) : lp_(lp), opt_(opt) {
        n_struct_ = lp.num_variables();
        m_ = lp.num_rows();
        setup();
    }

    Solution run() {
        Solution sol;
        for (std::size_t j = 0; j < n_struct_; ++j) {
            if (lp_.lower[j] > lp_.upper[j] + opt_.tolerance) {
                sol.status = SolveStatus::Infeasible;
                return sol;
            }
        }

        if (n_art_ > 0) {
            std::vector<double> phase1(cols_, 0.0);
            for (std::size_t j = first_art_; j < cols_; ++j) {
                phase1[j] = -1.0;
            }
            set_costs(phase1);
            const auto status = iterate();
            if (status == SolveStatus::Unbounded) {
                throw SolverFailure("simplex: phase one reported unbounded");
            }
            refresh();
            double infeas = 0.0;
            double scale = 1.0;
            for (std::size_t i = 0; i < m_; ++i) {
                scale = std::max(scale, std::abs(lp_.rows[i].rhs));
                if (basis_[i] >= first_art_) {
                    infeas += std::max(beta_[i], 0.0);
                }
            }
            if (infeas > 10.0 * opt_.tolerance * scale) {
                sol.status = SolveStatus::Infeasible;
                sol.iterations = iterations_;
                return sol;
            }
            drive_out_artificials();
            for (std::size_t j = first_art_; j < cols_; ++j) {
                hi_[j] = 0.0;
                if (pos_[j] < 0) {
                    x_[j] = 0.0;
                }
            }
        }

        std::vector<double> phase2(cols_, 0.0);
        std::copy(lp_.objective.begin(), lp_.objective.end(), phase2.begin());
        set_costs(phase2);
        const auto status = iterate();
        sol.iterations = iterations_;
        if (status == SolveStatus::Unbounded) {
            sol.status = SolveStatus::Unbounded;
            return sol;
        }
        refresh();

        sol.values.assign(n_struct_, 0.0);
        for (std::size_t j = 0; j < n_struct_; ++j) {
            double v = pos_[j] >= 0 ? beta_[static_cast<std::size_t>(pos_[j])] : x_[j];
            // snap round-off onto the bounds
            if (v < lp_.lower[j]) {
                v = lp_.lower[j];
            }
            if (v > lp_.upper[j]) {
                v = lp_.upper[j];
            }
            sol.values[j] = v;
        }
        double bscale = 1.0;
        for (const auto& row : lp_.rows) {
            bscale = std::max(bscale, std::abs(row.rhs));
        }
        const double viol = lp_.max_violation(sol.values);
        if (viol > std::max(opt_.tolerance, 1e-9) * bscale) {
            throw SolverFailure("simplex: final point violates constraints by " +
                                format_double(viol, 3, 'e'));
        }
        sol.status = SolveStatus::Optimal;
        sol.objective = lp_.evaluate(sol.values);
        return sol;
    }

private:
    double& at(std::size_t r, std::size_t c) { return t_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return t_[r * cols_ + c]; }

    void setup() {
        // slack columns for inequality rows
        std::vector<std::ptrdiff_t> slack_of(m_, -1);
        std::size_t n_slack = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (lp_.rows[i].sense != RowSense::Equal) {
                slack_of[i] = static_cast<std::ptrdiff_t>(n_struct_ + n_slack++);
            }
        }
        first_art_ = n_struct_ + n_slack;

        lo_.assign(first_art_, 0.0);
        hi_.assign(first_art_, 0.0);
        x_.assign(first_art_, 0.0);
        for (std::size_t j = 0; j < n_struct_; ++j) {
            lo_[j] = lp_.lower[j];
            hi_[j] = lp_.upper[j];
            x_[j] = std::isfinite(lo_[j]) ? lo_[j] : (std::isfinite(hi_[j]) ? hi_[j] : 0.0);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (slack_of[i] < 0) {
                continue;
            }
            const auto s = static_cast<std::size_t>(slack_of[i]);
            if (lp_.rows[i].sense == RowSense::LessEqual) {
                lo_[s] = 0.0;
                hi_[s] = kInf;
            } else {
                lo_[s] = -kInf;
                hi_[s] = 0.0;
            }
        }

        // pick the initial basic column of each row
        std::vector<double> resid(m_);
        std::vector<double> art_sign(m_, 0.0);
        init_col_.assign(m_, 0);
        init_coef_.assign(m_, 1.0);
        for (std::size_t i = 0; i < m_; ++i) {
            double r = lp_.rows[i].rhs;
            for (const auto& t : lp_.rows[i].terms) {
                r -= t.coef * x_[t.var];
            }
            resid[i] = r;
            if (slack_of[i] >= 0) {
                const auto s = static_cast<std::size_t>(slack_of[i]);
                if (r >= lo_[s] && r <= hi_[s]) {
                    init_col_[i] = s;
                    continue;
                }
            }
            art_sign[i] = r >= 0.0 ? 1.0 : -1.0;
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (art_sign[i] != 0.0) {
                init_col_[i] = first_art_ + n_art_++;
                init_coef_[i] = art_sign[i];
            }
        }
        cols_ = first_art_ + n_art_;
        lo_.resize(cols_, 0.0);
        hi_.resize(cols_, kInf);
        x_.resize(cols_, 0.0);

        t_.assign(m_ * cols_, 0.0);
        beta_.assign(m_, 0.0);
        basis_.assign(m_, 0);
        pos_.assign(cols_, -1);
        for (std::size_t i = 0; i < m_; ++i) {
            const double inv = 1.0 / init_coef_[i];
            for (const auto& t : lp_.rows[i].terms) {
                at(i, t.var) += t.coef * inv;
            }
            if (slack_of[i] >= 0) {
                at(i, static_cast<std::size_t>(slack_of[i])) = inv;
            }
            at(i, init_col_[i]) = 1.0;
            basis_[i] = init_col_[i];
            pos_[init_col_[i]] = static_cast<std::ptrdiff_t>(i);
            beta_[i] = resid[i] * inv;
            if (init_col_[i] < first_art_ && slack_of[i] >= 0) {
                // slack basic: its nonbasic value slot is unused
                x_[init_col_[i]] = 0.0;
            }
        }
        // nonbasic slacks rest at zero, which is a bound for both senses
    }

    void set_costs(const std::vector<double>& c) {
        cost_ = c;
        d_ = c;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) {
                continue;
            }
            const double* row = &t_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) {
                d_[j] -= cb * row[j];
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            d_[basis_[i]] = 0.0;
        }
    }

    // Direction in which nonbasic j would improve the objective, or 0.
    int improving_direction(std::size_t j) const {
        if (pos_[j] >= 0 || hi_[j] - lo_[j] <= 0.0) {
            return 0;
        }
        const double tol = opt_.tolerance;
        const bool can_up = x_[j] < hi_[j];
        const bool can_down = x_[j] > lo_[j];
        if (d_[j] > tol && can_up) {
            return 1;
        }
        if (d_[j] < -tol && can_down) {
            return -1;
        }
        return 0;
    }

    SolveStatus iterate() {
        std::size_t degenerate_run = 0;
        const std::size_t cap =
            opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + cols_) + 10000;
        std::size_t since_refresh = 0;
        std::size_t tiny_pivots = 0;

        while (true) {
            if (iterations_ >= cap) {
                throw SolverFailure("simplex: iteration limit reached");
            }
            const bool bland = opt_.rule == PivotRule::Bland || degenerate_run >= kDegenerateRunBeforeBland;

            // pricing
            std::size_t enter = cols_;
            int dir = 0;
            double best = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) {
                const int dj = improving_direction(j);
                if (dj == 0) {
                    continue;
                }
                if (bland) {
                    enter = j;
                    dir = dj;
                    break;
                }
                if (std::abs(d_[j]) > best) {
                    best = std::abs(d_[j]);
                    enter = j;
                    dir = dj;
                }
            }
            if (enter == cols_) {
                return SolveStatus::Optimal;
            }

            // ratio test
            double step = hi_[enter] - lo_[enter];  // bound flip distance
            std::size_t leave_row = m_;
            bool leave_to_upper = false;
            double leave_pivot = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = at(i, enter);
                if (std::abs(a) <= kPivotTol) {
                    continue;
                }
                const double rate = -static_cast<double>(dir) * a;
                const std::size_t b = basis_[i];
                double limit;
                bool to_upper;
                if (rate < 0.0) {
                    if (!std::isfinite(lo_[b])) {
                        continue;
                    }
                    limit = std::max(beta_[i] - lo_[b], 0.0) / -rate;
                    to_upper = false;
                } else {
                    if (!std::isfinite(hi_[b])) {
                        continue;
                    }
                    limit = std::max(hi_[b] - beta_[i], 0.0) / rate;
                    to_upper = true;
                }
                const double slack = std::isfinite(step) ? 1e-12 * (1.0 + step) : 0.0;
                const bool better = limit < step - slack;
                const bool tie = !better && limit <= step + slack && leave_row < m_ &&
                                 b < basis_[leave_row];
                if (better || tie) {
                    step = limit;
                    leave_row = i;
                    leave_to_upper = to_upper;
                    leave_pivot = a;
                }
            }
            if (!std::isfinite(step)) {
                return SolveStatus::Unbounded;
            }
            if (leave_row < m_ && std::abs(leave_pivot) < 1e-9) {
                if (++tiny_pivots > 1000) {
                    throw SolverFailure("simplex: repeated near-zero pivots");
                }
            }

            ++iterations_;
            degenerate_run = step <= 0.0 ? degenerate_run + 1 : 0;

            // move along the edge
            if (step > 0.0) {
                const double delta = static_cast<double>(dir) * step;
                for (std::size_t i = 0; i < m_; ++i) {
                    const double a = at(i, enter);
                    if (a != 0.0) {
                        beta_[i] -= a * delta;
                    }
                }
            }
            if (leave_row == m_) {
                x_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
                continue;
            }
            const double entering_value = x_[enter] + static_cast<double>(dir) * step;
            const std::size_t leaving = basis_[leave_row];
            x_[leaving] = leave_to_upper ? hi_[leaving] : lo_[leaving];
            pos_[leaving] = -1;
            basis_[leave_row] = enter;
            pos_[enter] = static_cast<std::ptrdiff_t>(leave_row);
            beta_[leave_row] = entering_value;
            pivot(leave_row, enter);

            if (++since_refresh >= kRefreshEvery) {
                refresh();
                since_refresh = 0;
            }
        }
    }

    void pivot(std::size_t r, std::size_t c) {
        double* prow = &t_[r * cols_];
        const double inv = 1.0 / prow[c];
        for (std::size_t j = 0; j < cols_; ++j) {
            prow[j] *= inv;
        }
        prow[c] = 1.0;
        nz_.clear();
        for (std::size_t j = 0; j < cols_; ++j) {
            if (prow[j] != 0.0) {
                nz_.push_back(j);
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) {
                continue;
            }
            double* row = &t_[i * cols_];
            const double f = row[c];
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j : nz_) {
                row[j] -= f * prow[j];
            }
            row[c] = 0.0;
        }
        const double fd = d_[c];
        if (fd != 0.0) {
            for (std::size_t j : nz_) {
                d_[j] -= fd * prow[j];
            }
            d_[c] = 0.0;
        }
    }

    // Recompute basic values from the original rows: beta = B^-1 (b - N x_N).
    void refresh() {
        std::vector<double> r(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            double v = lp_.rows[i].rhs;
            for (const auto& t : lp_.rows[i].terms) {
                if (pos_[t.var] < 0) {
                    v -= t.coef * x_[t.var];
                }
            }
            r[i] = v;
        }
        // nonbasic slacks and artificials sit at zero, so they drop out
        std::vector<double> next(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t col = init_col_[i];
            const double scale = r[i] / init_coef_[i];
            if (scale == 0.0) {
                continue;
            }
            for (std::size_t k = 0; k < m_; ++k) {
                next[k] += at(k, col) * scale;
            }
        }
        beta_ = std::move(next);
    }

    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < first_art_) {
                continue;
            }
            std::size_t best = first_art_;
            double best_abs = 1e-9;
            for (std::size_t j = 0; j < first_art_; ++j) {
                if (pos_[j] < 0 && std::abs(at(i, j)) > best_abs) {
                    best_abs = std::abs(at(i, j));
                    best = j;
                }
            }
            if (best == first_art_) {
                continue;  // redundant row: the artificial stays basic at zero
            }
            const std::size_t leaving = basis_[i];
            x_[leaving] = 0.0;
            pos_[leaving] = -1;
            basis_[i] = best;
            pos_[best] = static_cast<std::ptrdiff_t>(i);
            beta_[i] = x_[best];
            pivot(i, best);
            ++iterations_;
        }
        refresh();
    }

    const LinearProgram& lp_;
    SimplexOptions opt_;
    std::size_t n_struct_ = 0;
    std::size_t m_ = 0;
    std::size_t first_art_ = 0;
    std::size_t n_art_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> t_;
    std::vector<double> beta_;
    std::vector<double> x_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<double> cost_;
    std::vector<double> d_;
    std::vector<std::size_t> basis_;
    std::vector<std::ptrdiff_t> pos_;
    std::vector<std::size_t> init_col_;
    std::vector<double> init_coef_;
    std::vector<std::size_t> nz_;
    std::size_t iterations_ = 0;
};

std::string lp_number(double v) {
    return format_double(v, 17, 'g');
}

}  // namespace

Solution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
    if (!(options.tolerance > 0.0)) {
        throw InvalidInput("solve_lp: tolerance must be positive");
    }
    if (lp.lower.size() != lp.num_variables() || lp.upper.size() != lp.num_variables()) {
        throw InvalidInput("solve_lp: bound vectors do not match variable count");
    }
    Tableau tableau(lp, options);
    return tableau.run();
}

std::string write_lp_text(const LinearProgram& lp) {
    std::ostringstream out;
    auto write_terms = [&](const std::vector<LinearProgram::Term>& terms) {
        bool first = true;
        for (const auto& t : terms) {
            if (t.coef == 0.0) {
                continue;
            }
            const bool neg = t.coef < 0.0;
            out << (first ? (neg ? "- " : "") : (neg ? " - " : " + ")) << lp_number(std::abs(t.coef))
                << " " << lp.names[t.var];
            first = false;
        }
        if (first) {
            out << "0 " << (lp.names.empty() ? std::string("x0") : lp.names.front());
        }
    };

    out << "\\ scenario tree program\n";
    out << "Maximize\n obj: ";
    std::vector<LinearProgram::Term> obj;
    for (std::size_t j = 0; j < lp.num_variables(); ++j) {
        obj.push_back({j, lp.objective[j]});
    }
    write_terms(obj);
    out << "\nSubject To\n";
    for (const auto& row : lp.rows) {
        out << " " << row.name << ": ";
        write_terms(row.terms);
        switch (row.sense) {
            case RowSense::LessEqual: out << " <= "; break;
            case RowSense::GreaterEqual: out << " >= "; break;
            case RowSense::Equal: out << " = "; break;
        }
        out << lp_number(row.rhs) << "\n";
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < lp.num_variables(); ++j) {
        const double lo = lp.lower[j];
        const double hi = lp.upper[j];
        out << " ";
        if (!std::isfinite(lo) && !std::isfinite(hi)) {
            out << lp.names[j] << " free\n";
            continue;
        }
        out << (std::isfinite(lo) ? lp_number(lo) : std::string("-inf")) << " <= " << lp.names[j]
            << " <= " << (std::isfinite(hi) ? lp_number(hi) : std::string("+inf")) << "\n";
    }
    out << "End\n";
    return out.str();
}

}  // namespace dst
