#include "vefl/rat_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vefl::rat {

namespace {

double effective_bw(const radio::RadioConfig& cfg) {
    return cfg.prb_bandwidth * (1.0 - cfg.overhead_fraction);
}

double prb_rate_sum(const double* powers, const double* gains, int z_count,
                    const radio::RadioConfig& cfg) {
    double noise = cfg.noise_over_prb();
    double s = 0.0;
    for (int z = 0; z < z_count; ++z)
        s += std::log2(1.0 + std::max(powers[z], 0.0) * gains[z] / noise);
    return effective_bw(cfg) * s;
}

}  // namespace

PayloadQueue update_queue(const PayloadQueue& q, const Vec& rates, double tti) {
    if (rates.size() != q.remaining.size())
        throw DimensionMismatch("update_queue: rate vector size mismatch");
    PayloadQueue out = q;
    for (std::size_t v = 0; v < rates.size(); ++v) {
        if (rates[v] < 0) throw std::invalid_argument("update_queue: negative rate");
        out.remaining[v] = std::max(out.remaining[v] - tti * rates[v], 0.0);
    }
    return out;
}

double success_probability(double q_final, double payload_total) {
    if (payload_total <= 0 || q_final < 0 || q_final > payload_total + 1e-9)
        throw std::invalid_argument("success_probability: backlog outside [0, S]");
    return 1.0 - q_final / payload_total;
}

std::vector<int> edf_schedule(const std::vector<int>& candidates, const Vec& deadlines,
                              const Vec& backlogs, int prb_count) {
    if (candidates.size() != deadlines.size() || candidates.size() != backlogs.size())
        throw DimensionMismatch("edf_schedule: aligned vectors required");
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (deadlines[a] != deadlines[b]) return deadlines[a] < deadlines[b];
        if (backlogs[a] != backlogs[b]) return backlogs[a] > backlogs[b];
        return a < b;
    });
    std::vector<int> out;
    for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < prb_count; ++i)
        out.push_back(candidates[order[i]]);
    return out;
}

double min_rate_requirement(double backlog, double remaining_slots, int subset_size,
                            int prb_count, double tti) {
    if (backlog <= 0) return 0.0;
    double guaranteed = remaining_slots;
    if (subset_size > prb_count)
        guaranteed = std::floor(static_cast<double>(prb_count) / subset_size * remaining_slots);
    if (guaranteed <= 0)
        throw ExpiredDeadline("min_rate_requirement: no guaranteed slots remain");
    return backlog / (tti * guaranteed);
}

double slot_utility(const Mat& lifted_powers, const Mat& gains, const Vec& queues,
                    double ee_ratio, double control, const radio::RadioConfig& cfg) {
    if (lifted_powers.rows != gains.rows || lifted_powers.cols != gains.cols ||
        queues.size() != lifted_powers.rows)
        throw DimensionMismatch("slot_utility: shape mismatch");
    double power_sum = 0.0;
    double reward = 0.0;
    int zc = static_cast<int>(gains.cols);
    for (std::size_t v = 0; v < lifted_powers.rows; ++v) {
        const double* pw = lifted_powers.data.data() + v * lifted_powers.cols;
        const double* g = gains.data.data() + v * gains.cols;
        for (int z = 0; z < zc; ++z) power_sum += pw[z];
        reward += prb_rate_sum(pw, g, zc, cfg) * (control + cfg.tti * queues[v]);
    }
    return control * ee_ratio * power_sum - reward;
}

namespace {

// Water-filling with per-pRB cap and total budget: P_z = clamp(w / (a + mu) -
// noise/g_z, 0, p_max) with mu >= 0 chosen so the budget holds.
Vec waterfill(const Vec& gains, double w, double a, double p_max, double noise) {
    auto point = [&](double mu) {
        Vec p(gains.size());
        for (std::size_t z = 0; z < gains.size(); ++z) {
            double level = a + mu > 0 ? w / (a + mu) : kInf;
            double raw = gains[z] > 0 ? level - noise / gains[z] : 0.0;
            p[z] = std::clamp(raw, 0.0, p_max);
        }
        return p;
    };
    auto total = [](const Vec& p) { return std::accumulate(p.begin(), p.end(), 0.0); };
    Vec p0 = point(0.0);
    if (total(p0) <= p_max + 1e-15) return p0;
    double lo = 0.0, hi = 1.0;
    while (total(point(hi)) > p_max) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (total(point(mid)) > p_max ? lo : hi) = mid;
    }
    return point(hi);
}

}  // namespace

Vec solve_single_cv_power(const Vec& gains, double backlog, double rate_floor, double ee_ratio,
                          const LyapunovConfig& cfg, const radio::RadioConfig& radio,
                          double p_max, double* kkt_residual, bool* floor_met) {
    double noise = radio.noise_over_prb();
    double bw = effective_bw(radio);
    double a = cfg.control * ee_ratio;  // linear power price
    double weight0 = bw * (cfg.control + radio.tti * backlog) / std::log(2.0);

    auto candidate = [&](double nu) {
        return waterfill(gains, weight0 + bw * nu / std::log(2.0), a, p_max, noise);
    };
    auto rate_of = [&](const Vec& p) {
        return prb_rate_sum(p.data(), gains.data(), static_cast<int>(gains.size()), radio);
    };

    double nu = 0.0;
    Vec p = candidate(0.0);
    bool met = rate_of(p) >= rate_floor - 1e-9;
    if (!met && rate_floor > 0) {
        // Push the floor multiplier up; the limit is full-budget water-filling.
        Vec full = waterfill(gains, 1.0, 0.0, p_max, noise);
        if (rate_of(full) < rate_floor - 1e-9) {
            p = full;  // best effort: the maximum-rate allocation
        } else {
            double lo = 0.0, hi = 1.0;
            while (rate_of(candidate(hi)) < rate_floor) hi *= 2.0;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                (rate_of(candidate(mid)) < rate_floor ? lo : hi) = mid;
            }
            nu = hi;
            p = candidate(nu);
            met = true;
        }
    }

    // Projected-gradient polish of the fixed-multiplier Lagrangian; also the
    // source of the reported stationarity residual.
    double w = weight0 + bw * nu / std::log(2.0);
    // Normalized by w so the reported stationarity residual is scale-free.
    double scale = std::max(w, 1.0);
    cvx::SmoothConvexProgram prog;
    prog.objective = [&, w, scale](const Vec& x, Vec& grad) {
        grad.assign(x.size(), 0.0);
        double val = 0.0;
        for (std::size_t z = 0; z < x.size(); ++z) {
            double denom = noise + std::max(x[z], 0.0) * gains[z];
            val += (a * x[z] - w * std::log(1.0 + std::max(x[z], 0.0) * gains[z] / noise)) /
                   scale;
            grad[z] = (a - w * gains[z] / denom) / scale;
        }
        return val;
    };
    Vec lo(gains.size(), 0.0), hi_b(gains.size(), p_max);
    prog.project = [&](Vec& x) { cvx::project_box_budget(x, lo, hi_b, p_max); };
    auto res = cvx::solve_smooth(prog, p, 1e-8, 500);
    if (kkt_residual) *kkt_residual = res.pg_norm;
    if (floor_met) *floor_met = met || rate_floor <= 0;
    // Keep the better of the analytic and polished points.
    double obj_p, obj_r;
    {
        Vec g;
        obj_p = prog.objective(p, g);
        obj_r = prog.objective(res.x, g);
    }
    return obj_r <= obj_p ? res.x : p;
}

SlotAllocation solve_prb_power(const std::vector<int>& scheduled, const Mat& gains,
                               const Vec& backlogs, const Vec& rate_floors, const Vec& deadlines,
                               const EeTracker& ee, const LyapunovConfig& cfg,
                               const radio::RadioConfig& radio, const Vec& p_max) {
    const std::size_t nv = scheduled.size();
    const std::size_t nz = gains.cols;
    if (gains.rows != nv || backlogs.size() != nv || rate_floors.size() != nv ||
        deadlines.size() != nv || p_max.size() != nv)
        throw DimensionMismatch("solve_prb_power: shape mismatch");
    if (nv < 1 || nz < 1) throw std::invalid_argument("solve_prb_power: empty slot");

    double noise = radio.noise_over_prb();
    double bw = effective_bw(radio);
    double beta = ee.ratio();
    const std::size_t np = nv * nz;  // indicator block size; powers follow

    // Relaxed start: uniform ownership, coupled equal powers.
    Vec x(2 * np);
    for (std::size_t j = 0; j < np; ++j) x[j] = 1.0 / static_cast<double>(nv);
    for (std::size_t v = 0; v < nv; ++v)
        for (std::size_t z = 0; z < nz; ++z)
            x[np + v * nz + z] =
                std::min(p_max[v] / static_cast<double>(nz), p_max[v] * x[v * nz + z]);

    // Feasible-set projectors: per-pRB assignment simplex, per-CV power
    // budget, and the P~ <= p_max * I coupling half-spaces.
    std::vector<std::function<void(Vec&)>> projectors;
    projectors.push_back([&, nv, nz, np](Vec& y) {
        Vec col(nv);
        for (std::size_t z = 0; z < nz; ++z) {
            for (std::size_t v = 0; v < nv; ++v) col[v] = y[v * nz + z];
            cvx::project_capped_simplex(col, 1.0);
            for (std::size_t v = 0; v < nv; ++v) y[v * nz + z] = col[v];
        }
    });
    projectors.push_back([&, nv, nz, np](Vec& y) {
        Vec row(nz);
        for (std::size_t v = 0; v < nv; ++v) {
            for (std::size_t z = 0; z < nz; ++z) row[z] = y[np + v * nz + z];
            Vec lo(nz, 0.0), hi(nz, p_max[v]);
            cvx::project_box_budget(row, lo, hi, p_max[v]);
            for (std::size_t z = 0; z < nz; ++z) y[np + v * nz + z] = row[z];
        }
    });
    projectors.push_back([&, nv, nz, np](Vec& y) {
        for (std::size_t v = 0; v < nv; ++v) {
            double pm = p_max[v];
            double scale = 1.0 + pm * pm;
            for (std::size_t z = 0; z < nz; ++z) {
                double& ind = y[v * nz + z];
                double& pw = y[np + v * nz + z];
                double viol = pw - pm * ind;
                if (viol > 0) {
                    pw -= viol / scale;
                    ind += viol * pm / scale;
                }
            }
        }
    });

    // Utility scale anchors the dimensionless floor-shortfall penalty.
    double scale_est = 0.0;
    for (std::size_t v = 0; v < nv; ++v)
        scale_est += bw * (cfg.control + radio.tti * backlogs[v]) * static_cast<double>(nz);
    double floor_penalty = cfg.floor_weight > 0 ? 100.0 * std::max(scale_est, 1.0) : 0.0;

    SlotAllocation out;
    out.scheduled = scheduled;
    Vec prev_ind(x.begin(), x.begin() + static_cast<long>(np));

    auto make_program = [&](double theta) {
        cvx::SmoothConvexProgram prog;
        prog.objective = [&, theta](const Vec& y, Vec& grad) {
            grad.assign(y.size(), 0.0);
            double val = 0.0;
            for (std::size_t v = 0; v < nv; ++v) {
                double weight = cfg.control + radio.tti * backlogs[v];
                double rate = 0.0;
                for (std::size_t z = 0; z < nz; ++z) {
                    std::size_t ji = v * nz + z, jp = np + ji;
                    double pw = std::max(y[jp], 0.0);
                    double g = gains(v, z);
                    val += cfg.control * beta * y[jp];
                    grad[jp] += cfg.control * beta;
                    double denom = noise + pw * g;
                    double lg = std::log2(1.0 + pw * g / noise);
                    rate += bw * lg;
                    val -= bw * weight * lg;
                    grad[jp] -= bw * weight * g / (denom * std::log(2.0));
                    // SCA-linearized concave penalty driving I to {0,1}; the
                    // anchor constant keeps values comparable across
                    // expansion points.
                    val += theta * ((1.0 - 2.0 * prev_ind[ji]) * y[ji] +
                                    prev_ind[ji] * prev_ind[ji]);
                    grad[ji] += theta * (1.0 - 2.0 * prev_ind[ji]);
                }
                if (rate_floors[v] > 0 && floor_penalty > 0) {
                    double short_rel = std::max(0.0, 1.0 - rate / rate_floors[v]);
                    val += floor_penalty * short_rel * short_rel;
                    if (short_rel > 0) {
                        double coef = -2.0 * floor_penalty * short_rel / rate_floors[v];
                        for (std::size_t z = 0; z < nz; ++z) {
                            std::size_t jp = np + v * nz + z;
                            double pw = std::max(y[jp], 0.0);
                            double g = gains(v, z);
                            grad[jp] += coef * bw * g / ((noise + pw * g) * std::log(2.0));
                        }
                    }
                }
            }
            return val;
        };
        prog.project = [&](Vec& y) { cvx::dykstra_project(y, projectors, 1e-10, cfg.dykstra_sweeps); };
        return prog;
    };

    // Relaxed phase: no indicator pressure, so the projections alone decide
    // how much fractional ownership each CV needs to cover its power.
    {
        auto prog = make_program(0.0);
        auto res = cvx::solve_smooth(prog, x, cfg.tol, cfg.relax_iters);
        x = res.x;
    }

    // Anchor at a vertex: every pRB goes to its strongest fractional owner,
    // powers move onto the owned pRBs.
    for (std::size_t z = 0; z < nz; ++z) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < nv; ++v)
            if (x[v * nz + z] > x[best * nz + z]) best = v;
        for (std::size_t v = 0; v < nv; ++v) {
            x[v * nz + z] = v == best ? 1.0 : 0.0;
            if (v != best) x[np + v * nz + z] = 0.0;
        }
    }
    for (std::size_t ji = 0; ji < np; ++ji) prev_ind[ji] = x[ji];

    // Penalized phase at a fixed penalty scaled past the steepest marginal
    // value an indicator can have (the coupling constraint transfers at most
    // p_max times the zero-power rate slope per unit of indicator), so
    // holding a vertex is always cheaper than fractional sharing. The
    // linearization anchors each subproblem at its own expansion point, so
    // the recorded surrogate objectives cannot increase.
    double slope_max = 0.0;
    for (std::size_t v = 0; v < nv; ++v) {
        double weight = cfg.control + radio.tti * backlogs[v];
        for (std::size_t z = 0; z < nz; ++z)
            slope_max = std::max(slope_max,
                                 bw * weight * p_max[v] * gains(v, z) / (noise * std::log(2.0)));
    }
    double theta = cfg.penalty_base * std::max({2.0 * slope_max, scale_est, 1.0});
    double prev_obj = kInf;
    for (int j = 1; j <= cfg.max_iters; ++j) {
        auto prog = make_program(theta);
        auto res = cvx::solve_smooth(prog, x, cfg.tol, cfg.inner_iters);
        x = res.x;
        out.surrogate_trace.push_back(res.objective);
        double worst = 0.0;
        for (std::size_t ji = 0; ji < np; ++ji) {
            prev_ind[ji] = x[ji];
            worst = std::max(worst, std::min(x[ji], 1.0 - x[ji]));
        }
        if (worst <= 1e-3 && j >= 2 &&
            std::fabs(prev_obj - res.objective) <= cfg.tol * (1.0 + std::fabs(res.objective)))
            break;
        prev_obj = res.objective;
    }

    out.relaxed_assign.assign(x.begin(), x.begin() + static_cast<long>(np));

    // Round: each pRB to its strongest relaxed owner gives the starting
    // ownership vector; exact per-CV power comes from the single-CV routine
    // restricted to the pRBs actually owned.
    std::vector<int> owner(nz, 0);
    for (std::size_t z = 0; z < nz; ++z) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < nv; ++v)
            if (x[v * nz + z] > x[best * nz + z]) best = v;
        owner[z] = static_cast<int>(best);
    }

    // The slot objective is separable across CVs once ownership is fixed, so
    // each candidate ownership vector is scored per CV from the exact
    // single-CV power solve.
    struct CvSolution {
        Vec powers;                      // aligned with `mine`
        std::vector<std::size_t> mine;   // owned pRBs
        double contrib = 0.0;
        bool floor_ok = true;
    };
    auto solve_cv = [&](std::size_t v, std::vector<std::size_t> mine) {
        CvSolution s;
        s.mine = std::move(mine);
        if (s.mine.empty()) {
            s.floor_ok = rate_floors[v] <= 0;
            return s;
        }
        Vec sub_g(s.mine.size());
        for (std::size_t i = 0; i < s.mine.size(); ++i) sub_g[i] = gains(v, s.mine[i]);
        bool met = true;
        s.powers = solve_single_cv_power(sub_g, backlogs[v], rate_floors[v], beta, cfg, radio,
                                         p_max[v], nullptr, &met);
        s.floor_ok = met || rate_floors[v] <= 0;
        double weight = cfg.control + radio.tti * backlogs[v];
        for (std::size_t i = 0; i < s.mine.size(); ++i)
            s.contrib += cfg.control * beta * s.powers[i];
        s.contrib -= weight * prb_rate_sum(s.powers.data(), sub_g.data(),
                                           static_cast<int>(s.mine.size()), radio);
        return s;
    };
    auto owned_by = [&](const std::vector<int>& own, std::size_t v) {
        std::vector<std::size_t> mine;
        for (std::size_t z = 0; z < nz; ++z)
            if (own[z] == static_cast<int>(v)) mine.push_back(z);
        return mine;
    };
    auto score = [&](const std::vector<CvSolution>& sols) {
        std::size_t unmet = 0;
        double util = 0.0;
        for (const CvSolution& s : sols) {
            if (!s.floor_ok) ++unmet;
            util += s.contrib;
        }
        return std::pair<std::size_t, double>(unmet, util);
    };
    auto better = [](std::pair<std::size_t, double> a, std::pair<std::size_t, double> b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second - 1e-12 * (1.0 + std::fabs(b.second));
    };

    std::vector<CvSolution> sols(nv);
    for (std::size_t v = 0; v < nv; ++v) sols[v] = solve_cv(v, owned_by(owner, v));

    // The relaxed vertex can be a poor local optimum, so search ownership
    // vectors directly: exhaustively when the space is tiny, otherwise by
    // best-improvement single-pRB reassignments (each move only re-solves the
    // two CVs it touches).
    double combos = std::pow(static_cast<double>(nv), static_cast<double>(nz));
    if (combos <= 64.0) {
        auto best_score = score(sols);
        std::vector<int> cand(nz, 0);
        while (true) {
            if (cand != owner) {
                std::vector<CvSolution> trial(nv);
                for (std::size_t v = 0; v < nv; ++v) trial[v] = solve_cv(v, owned_by(cand, v));
                auto sc = score(trial);
                if (better(sc, best_score)) {
                    best_score = sc;
                    sols = std::move(trial);
                    owner = cand;
                }
            }
            std::size_t z = 0;
            while (z < nz && ++cand[z] == static_cast<int>(nv)) cand[z++] = 0;
            if (z == nz) break;
        }
    } else {
        // Each pass applies one best-improvement move.  Moves that repair an
        // unmet rate floor do not consume the pass budget: the unmet count is
        // bounded by the number of CVs and strictly decreases, so they
        // terminate on their own and must never be starved out by the cap on
        // pure utility polishing.
        for (int sweep = 0; sweep < cfg.owner_search_sweeps; ) {
            bool moved = false;
            std::size_t best_z = 0, best_v = 0;
            CvSolution best_from, best_to;
            int best_dunmet = 0;
            double best_dutil = 0.0;
            for (std::size_t z = 0; z < nz; ++z) {
                std::size_t from = static_cast<std::size_t>(owner[z]);
                std::vector<std::size_t> from_mine = sols[from].mine;
                from_mine.erase(std::find(from_mine.begin(), from_mine.end(), z));
                CvSolution from_new = solve_cv(from, std::move(from_mine));
                for (std::size_t v = 0; v < nv; ++v) {
                    if (v == from) continue;
                    std::vector<std::size_t> to_mine = sols[v].mine;
                    to_mine.insert(std::lower_bound(to_mine.begin(), to_mine.end(), z), z);
                    CvSolution to_new = solve_cv(v, std::move(to_mine));
                    int dunmet = static_cast<int>(!from_new.floor_ok) +
                                 static_cast<int>(!to_new.floor_ok) -
                                 static_cast<int>(!sols[from].floor_ok) -
                                 static_cast<int>(!sols[v].floor_ok);
                    double dutil = to_new.contrib + from_new.contrib - sols[v].contrib -
                                   sols[from].contrib;
                    // Lexicographic: never add floor misses; prefer dropping
                    // them, then the largest utility decrease.
                    bool improves = dunmet < 0 ||
                                    (dunmet == 0 &&
                                     dutil < -1e-12 * (1.0 + std::fabs(sols[v].contrib)));
                    bool beats = !moved || dunmet < best_dunmet ||
                                 (dunmet == best_dunmet && dutil < best_dutil);
                    if (improves && beats) {
                        moved = true;
                        best_dunmet = dunmet;
                        best_dutil = dutil;
                        best_z = z;
                        best_v = v;
                        best_from = from_new;
                        best_to = to_new;
                    }
                }
            }
            if (!moved) break;
            if (best_dunmet >= 0) ++sweep;
            sols[static_cast<std::size_t>(owner[best_z])] = std::move(best_from);
            sols[best_v] = std::move(best_to);
            owner[best_z] = static_cast<int>(best_v);
        }
    }

    out.prb_owner = owner;
    out.assign = Mat(nv, nz);
    out.powers = Mat(nv, nz);
    out.lifted_powers = Mat(nv, nz);
    std::vector<int> unmet;
    for (std::size_t z = 0; z < nz; ++z) out.assign(static_cast<std::size_t>(owner[z]), z) = 1.0;
    for (std::size_t v = 0; v < nv; ++v) {
        for (std::size_t i = 0; i < sols[v].mine.size(); ++i) {
            out.powers(v, sols[v].mine[i]) = sols[v].powers[i];
            out.lifted_powers(v, sols[v].mine[i]) = sols[v].powers[i];
        }
        if (!sols[v].floor_ok) unmet.push_back(static_cast<int>(v));
    }
    // Jointly unsatisfiable floors are relaxed latest-deadline first.
    std::stable_sort(unmet.begin(), unmet.end(), [&](int a, int b) {
        return deadlines[static_cast<std::size_t>(a)] > deadlines[static_cast<std::size_t>(b)];
    });
    out.relaxed_floors = std::move(unmet);
    out.utility = slot_utility(out.lifted_powers, gains, backlogs, beta, cfg.control, radio);
    return out;
}

double drift_bound_const(const Mat& gains, const Vec& p_max, const radio::RadioConfig& cfg) {
    if (gains.rows != p_max.size()) throw DimensionMismatch("drift_bound_const: shape mismatch");
    double bw = effective_bw(cfg);
    double ln2 = std::log(2.0);
    double snr_sum = 0.0;
    for (std::size_t v = 0; v < gains.rows; ++v)
        for (std::size_t z = 0; z < gains.cols; ++z)
            snr_sum += p_max[v] * gains(v, z) / cfg.noise_over_prb();
    return cfg.tti * cfg.tti * bw * bw / (ln2 * ln2) * snr_sum;
}

std::pair<double, double> drift_penalty_bound(const Mat& lifted_powers, const Mat& gains,
                                              const Vec& queues, const Vec& p_max,
                                              double ee_ratio, double control,
                                              const radio::RadioConfig& cfg) {
    if (lifted_powers.rows != gains.rows || queues.size() != gains.rows)
        throw DimensionMismatch("drift_penalty_bound: shape mismatch");
    int zc = static_cast<int>(gains.cols);
    double power_sum = 0.0, rate_sum = 0.0, drift = 0.0, cross = 0.0;
    for (std::size_t v = 0; v < gains.rows; ++v) {
        const double* pw = lifted_powers.data.data() + v * lifted_powers.cols;
        const double* g = gains.data.data() + v * gains.cols;
        double r = prb_rate_sum(pw, g, zc, cfg);
        for (int z = 0; z < zc; ++z) power_sum += pw[z];
        rate_sum += r;
        double q_next = std::max(queues[v] - cfg.tti * r, 0.0);
        drift += 0.5 * (q_next * q_next - queues[v] * queues[v]);
        cross += cfg.tti * r * queues[v];
    }
    double penalty = control * (ee_ratio * power_sum - rate_sum);
    double lhs = drift + penalty;
    double rhs = drift_bound_const(gains, p_max, cfg) - cross + penalty;
    return {lhs, rhs};
}

}  // namespace vefl::rat
