#include "vefl/convex.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

namespace vefl::cvx {

namespace {

// Dense two-phase tableau simplex with Bland's rule. Variables are shifted by
// their (finite) lower bounds; finite upper bounds become extra <= rows.
struct Tableau {
    Mat t;          // (m+1) x (n+1); last row = objective, last col = rhs
    std::vector<int> basis;

    std::size_t m() const { return t.rows - 1; }
    std::size_t n() const { return t.cols - 1; }

    void pivot(std::size_t pr, std::size_t pc) {
        double pivv = t(pr, pc);
        for (std::size_t c = 0; c <= n(); ++c) t(pr, c) /= pivv;
        for (std::size_t r = 0; r <= m(); ++r) {
            if (r == pr) continue;
            double f = t(r, pc);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= n(); ++c) t(r, c) -= f * t(pr, c);
        }
        basis[pr] = static_cast<int>(pc);
    }

    // Bland's rule: entering = smallest-index column with negative reduced
    // cost, leaving = smallest-index basic variable among ratio-test ties.
    // Returns false if optimal, throws sentinel -1 column if unbounded.
    enum class Step { Optimal, Pivoted, Unbounded };

    Step step(double tol, int ncols_allowed) {
        int pc = -1;
        for (int c = 0; c < ncols_allowed; ++c) {
            if (t(m(), static_cast<std::size_t>(c)) < -tol) {
                pc = c;
                break;
            }
        }
        if (pc < 0) return Step::Optimal;
        int pr = -1;
        double best_ratio = kInf;
        for (std::size_t r = 0; r < m(); ++r) {
            double a = t(r, static_cast<std::size_t>(pc));
            if (a > tol) {
                double ratio = t(r, n()) / a;
                if (ratio < best_ratio - tol ||
                    (ratio < best_ratio + tol && (pr < 0 || basis[r] < basis[static_cast<std::size_t>(pr)]))) {
                    best_ratio = ratio;
                    pr = static_cast<int>(r);
                }
            }
        }
        if (pr < 0) return Step::Unbounded;
        pivot(static_cast<std::size_t>(pr), static_cast<std::size_t>(pc));
        return Step::Pivoted;
    }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, double tol) {
    const std::size_t n = lp.c.size();
    if (lp.lo.size() != n || lp.hi.size() != n)
        throw DimensionMismatch("solve_lp: bound size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(lp.lo[i])) throw ConfigError("solve_lp: lower bounds must be finite");
        if (lp.hi[i] < lp.lo[i]) return {LpStatus::Infeasible, {}, 0.0};
    }

    // Shift x = y + lo, y >= 0; finite upper bounds become rows y_i <= hi-lo.
    std::size_t m_ub = lp.a_ub.rows;
    std::size_t m_eq = lp.a_eq.rows;
    std::size_t n_ubrows = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::isfinite(lp.hi[i])) ++n_ubrows;

    const std::size_t m = m_ub + n_ubrows + m_eq;
    // Columns: n structural + m sl/surplus-or-artificial bookkeeping. Every row
    // gets a slack (<=) or artificial (=); rows with negative rhs after the
    // shift flip sign first.
    std::vector<Vec> rows;
    Vec rhs;
    std::vector<bool> is_eq_row;
    rows.reserve(m);
    rhs.reserve(m);

    auto add_row = [&](const Vec& coef, double b, bool eq) {
        rows.push_back(coef);
        rhs.push_back(b);
        is_eq_row.push_back(eq);
    };

    for (std::size_t r = 0; r < m_ub; ++r) {
        Vec coef(n);
        double b = lp.b_ub[r];
        for (std::size_t c = 0; c < n; ++c) {
            coef[c] = lp.a_ub(r, c);
            b -= coef[c] * lp.lo[c];
        }
        add_row(coef, b, false);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(lp.hi[i])) continue;
        Vec coef(n, 0.0);
        coef[i] = 1.0;
        add_row(coef, lp.hi[i] - lp.lo[i], false);
    }
    for (std::size_t r = 0; r < m_eq; ++r) {
        Vec coef(n);
        double b = lp.b_eq[r];
        for (std::size_t c = 0; c < n; ++c) {
            coef[c] = lp.a_eq(r, c);
            b -= coef[c] * lp.lo[c];
        }
        add_row(coef, b, true);
    }

    // Slack columns for <= rows with nonnegative rhs serve as the initial
    // basis; everything else gets an artificial.
    std::size_t n_slack = 0;
    for (std::size_t r = 0; r < m; ++r)
        if (!is_eq_row[r]) ++n_slack;
    std::size_t total_cols = n + n_slack + m;  // worst case; artificials trimmed below

    Tableau tab;
    tab.t = Mat(m + 1, total_cols + 1, 0.0);
    tab.basis.assign(m, -1);

    std::size_t slack_at = n;
    std::size_t art_at = n + n_slack;
    std::vector<int> artificial_cols;
    for (std::size_t r = 0; r < m; ++r) {
        double b = rhs[r];
        double sgn = 1.0;
        if (b < 0) {
            sgn = -1.0;
            b = -b;
        }
        for (std::size_t c = 0; c < n; ++c) tab.t(r, c) = sgn * rows[r][c];
        tab.t(r, total_cols) = b;
        if (!is_eq_row[r]) {
            tab.t(r, slack_at) = sgn * 1.0;
            if (sgn > 0) {
                tab.basis[r] = static_cast<int>(slack_at);
            }
            ++slack_at;
        }
        if (tab.basis[r] < 0) {
            tab.t(r, art_at) = 1.0;
            tab.basis[r] = static_cast<int>(art_at);
            artificial_cols.push_back(static_cast<int>(art_at));
            ++art_at;
        }
    }
    const std::size_t ncols_used = art_at;

    // Phase 1: minimize sum of artificials.
    if (!artificial_cols.empty()) {
        for (int c : artificial_cols) tab.t(m, static_cast<std::size_t>(c)) = 1.0;
        for (std::size_t r = 0; r < m; ++r) {
            bool is_art = std::find(artificial_cols.begin(), artificial_cols.end(), tab.basis[r]) !=
                          artificial_cols.end();
            if (is_art) {
                for (std::size_t c = 0; c <= tab.n(); ++c) tab.t(m, c) -= tab.t(r, c);
            }
        }
        for (int guard = 0; guard < 200000; ++guard) {
            auto s = tab.step(tol, static_cast<int>(ncols_used));
            if (s == Tableau::Step::Optimal) break;
            if (s == Tableau::Step::Unbounded) return {LpStatus::Infeasible, {}, 0.0};
        }
        if (-tab.t(m, tab.n()) > 1e-7) return {LpStatus::Infeasible, {}, 0.0};
        // Pivot remaining artificials out of the basis where possible.
        for (std::size_t r = 0; r < m; ++r) {
            bool is_art = std::find(artificial_cols.begin(), artificial_cols.end(), tab.basis[r]) !=
                          artificial_cols.end();
            if (!is_art) continue;
            for (std::size_t c = 0; c < n + n_slack; ++c) {
                if (std::fabs(tab.t(r, c)) > tol) {
                    tab.pivot(r, c);
                    break;
                }
            }
        }
        // Zero the phase-1 objective row.
        for (std::size_t c = 0; c <= tab.n(); ++c) tab.t(m, c) = 0.0;
    }

    // Phase 2: install the real objective (in shifted variables) and reduce it
    // against the current basis.
    for (std::size_t c = 0; c < n; ++c) tab.t(m, c) = lp.c[c];
    for (std::size_t r = 0; r < m; ++r) {
        int bc = tab.basis[r];
        double f = tab.t(m, static_cast<std::size_t>(bc));
        if (f != 0.0) {
            for (std::size_t c = 0; c <= tab.n(); ++c) tab.t(m, c) -= f * tab.t(r, c);
            tab.t(m, static_cast<std::size_t>(bc)) = 0.0;
        }
    }

    for (int guard = 0; guard < 200000; ++guard) {
        // Entering columns restricted to structural + slack; artificial
        // columns can never re-enter the basis.
        auto s = tab.step(tol, static_cast<int>(n + n_slack));
        if (s == Tableau::Step::Optimal) break;
        if (s == Tableau::Step::Unbounded) return {LpStatus::Unbounded, {}, 0.0};
    }

    Vec x(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        int bc = tab.basis[r];
        if (bc >= 0 && bc < static_cast<int>(n)) x[static_cast<std::size_t>(bc)] = tab.t(r, tab.n());
    }
    for (std::size_t i = 0; i < n; ++i) x[i] += lp.lo[i];
    return {LpStatus::Optimal, x, dot(lp.c, x)};
}

SmoothResult solve_smooth(const SmoothConvexProgram& prog, Vec start, double tol, int max_iters) {
    SmoothResult res;
    prog.project(start);
    Vec x = std::move(start);
    Vec grad(x.size(), 0.0);
    double fx = prog.objective(x, grad);
    double step = 1.0;

    for (int it = 0; it < max_iters; ++it) {
        // Projected-gradient step with Armijo backtracking.
        Vec trial(x.size());
        double ft = 0.0;
        Vec gt(x.size());
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - step * grad[i];
            prog.project(trial);
            Vec diff(x.size());
            double dsq = 0.0, gd = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                diff[i] = trial[i] - x[i];
                dsq += diff[i] * diff[i];
                gd += grad[i] * diff[i];
            }
            ft = prog.objective(trial, gt);
            if (ft <= fx + gd + (0.5 / step) * dsq + 1e-14) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        double move = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = trial[i] - x[i];
            move += d * d;
        }
        x.swap(trial);
        fx = ft;
        grad.swap(gt);
        res.iterations = it + 1;

        double pg = std::sqrt(move) / step;
        res.pg_norm = pg;
        if (pg <= tol) {
            res.converged = true;
            break;
        }
        step = std::min(step * 1.6, 1e12);  // cautious growth after success
    }
    // Final projected-gradient norm at x.
    {
        Vec t = x;
        double probe = 1e-4;
        for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i] - probe * grad[i];
        prog.project(t);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = (x[i] - t[i]) / probe;
            s += d * d;
        }
        res.pg_norm = std::sqrt(s);
        if (res.pg_norm <= tol) res.converged = true;
    }
    res.x = std::move(x);
    res.objective = fx;
    return res;
}

double check_gradient(const std::function<double(const Vec&, Vec&)>& evaluator, const Vec& point,
                      double h) {
    Vec g(point.size());
    evaluator(point, g);
    double max_rel = 0.0;
    Vec p = point;
    Vec scratch(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        double x0 = p[i];
        p[i] = x0 + h;
        double fp = evaluator(p, scratch);
        p[i] = x0 - h;
        double fm = evaluator(p, scratch);
        p[i] = x0;
        double fd = (fp - fm) / (2.0 * h);
        double denom = std::max({std::fabs(g[i]), std::fabs(fd), 1e-8});
        max_rel = std::max(max_rel, std::fabs(g[i] - fd) / denom);
    }
    return max_rel;
}

void project_box(Vec& x, const Vec& lo, const Vec& hi) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

void project_box_budget(Vec& x, const Vec& lo, const Vec& hi, double budget) {
    // KKT form: x_i <- clamp(x_i - lambda, lo_i, hi_i) with lambda >= 0,
    // lambda > 0 only when the budget binds. The threshold must be found on
    // the raw values; clamping first would erase their ordering.
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::clamp(x[i], lo[i], hi[i]);
    if (s <= budget + 1e-15) {
        project_box(x, lo, hi);
        return;
    }
    // Find lambda >= 0 with sum clamp(x - lambda) == budget. The map is
    // piecewise linear and non-increasing in lambda; walk the breakpoints.
    Vec bps;
    bps.reserve(2 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        bps.push_back(x[i] - lo[i]);
        bps.push_back(x[i] - hi[i]);
    }
    std::sort(bps.begin(), bps.end());
    auto sum_at = [&](double lam) {
        double t = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) t += std::clamp(x[i] - lam, lo[i], hi[i]);
        return t;
    };
    double lo_l = 0.0, hi_l = bps.back();
    for (double b : bps) {
        if (b <= 0) continue;
        if (sum_at(b) <= budget) {
            hi_l = b;
            break;
        }
        lo_l = b;
    }
    double s_lo = sum_at(lo_l), s_hi = sum_at(hi_l);
    double lam = (s_lo - s_hi) > 1e-18 ? lo_l + (s_lo - budget) * (hi_l - lo_l) / (s_lo - s_hi)
                                       : hi_l;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] - lam, lo[i], hi[i]);
}

void project_capped_simplex(Vec& x, double s) {
    // {sum x = s, 0 <= x <= 1}: sum(clamp(x - lam)) is piecewise linear and
    // non-increasing in lam with breakpoints at x_i and x_i - 1, so the exact
    // shift comes from a breakpoint search plus one interpolation.
    const std::size_t n = x.size();
    if (n == 0) return;
    s = std::clamp(s, 0.0, static_cast<double>(n));
    Vec bp;
    bp.reserve(2 * n);
    for (double v : x) {
        bp.push_back(v - 1.0);
        bp.push_back(v);
    }
    std::sort(bp.begin(), bp.end());
    auto sum_at = [&](double lam) {
        double t = 0.0;
        for (double v : x) t += std::clamp(v - lam, 0.0, 1.0);
        return t;
    };
    double lam;
    if (sum_at(bp.front()) <= s) {
        lam = bp.front();
    } else {
        std::size_t a = 0, b = bp.size() - 1;
        while (b - a > 1) {
            std::size_t m = (a + b) / 2;
            (sum_at(bp[m]) > s ? a : b) = m;
        }
        double t0 = sum_at(bp[a]), t1 = sum_at(bp[b]);
        lam = t0 - t1 <= 0.0 ? bp[b] : bp[a] + (t0 - s) * (bp[b] - bp[a]) / (t0 - t1);
    }
    for (double& v : x) v = std::clamp(v - lam, 0.0, 1.0);
}

void dykstra_project(Vec& x, const std::vector<std::function<void(Vec&)>>& projectors, double tol,
                     int max_sweeps) {
    const std::size_t n = x.size();
    std::vector<Vec> corrections(projectors.size(), Vec(n, 0.0));
    Vec y(n), before(n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t k = 0; k < projectors.size(); ++k) {
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + corrections[k][i];
            before = y;
            projectors[k](y);
            for (std::size_t i = 0; i < n; ++i) {
                corrections[k][i] = before[i] - y[i];
                change += std::fabs(y[i] - x[i]);
            }
            x.swap(y);
        }
        if (change <= tol) return;
    }
}

}  // namespace vefl::cvx
