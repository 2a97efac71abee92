#include "vefl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace vefl::harness {

using nlohmann::json;

Mode parse_mode(const std::string& name) {
    if (name == "FDPC") return Mode::Fdpc;
    if (name == "PDPC") return Mode::Pdpc;
    if (name == "FedProxBaseline") return Mode::FedProxBaseline;
    if (name == "EqualPowerBaseline") return Mode::EqualPowerBaseline;
    throw ConfigError("unknown mode: " + name);
}

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::Fdpc: return "FDPC";
        case Mode::Pdpc: return "PDPC";
        case Mode::FedProxBaseline: return "FedProxBaseline";
        case Mode::EqualPowerBaseline: return "EqualPowerBaseline";
    }
    return "?";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void apply_key(RunConfig& cfg, const std::string& key, double num, const std::string& str,
               bool is_string) {
    auto want_number = [&]() {
        if (is_string) throw ConfigError("config key '" + key + "' expects a number");
        return num;
    };
    if (key == "mode") {
        if (!is_string) throw ConfigError("config key 'mode' expects a string");
        cfg.mode = parse_mode(str);
        return;
    }
    if (key == "seed") cfg.seed = static_cast<std::uint64_t>(want_number());
    else if (key == "rounds") cfg.rounds = static_cast<int>(want_number());
    else if (key == "slots_per_round") cfg.slots_per_round = static_cast<int>(want_number());
    else if (key == "initial_cvs") cfg.initial_cvs = static_cast<int>(want_number());
    else if (key == "radio.prb_count") cfg.radio.prb_count = static_cast<int>(want_number());
    else if (key == "radio.prb_bandwidth") cfg.radio.prb_bandwidth = want_number();
    else if (key == "radio.antennas") cfg.radio.antennas = static_cast<int>(want_number());
    else if (key == "radio.noise_power_density") cfg.radio.noise_power_density = want_number();
    else if (key == "radio.overhead_fraction") cfg.radio.overhead_fraction = want_number();
    else if (key == "radio.tti") cfg.radio.tti = want_number();
    else if (key == "radio.pathloss_exponent") cfg.radio.pathloss_exponent = want_number();
    else if (key == "radio.pathloss_ref_gain_db") cfg.radio.pathloss_ref_gain_db = want_number();
    else if (key == "radio.shadowing_sigma_db") cfg.radio.shadowing_sigma_db = want_number();
    else if (key == "mobility.u_max") cfg.idm.u_max = want_number();
    else if (key == "mobility.a_max") cfg.idm.a_max = want_number();
    else if (key == "mobility.b_comf") cfg.idm.b_comf = want_number();
    else if (key == "mobility.s_saf") cfg.idm.s_saf = want_number();
    else if (key == "mobility.t_headway") cfg.idm.t_headway = want_number();
    else if (key == "mobility.arrival_rate") cfg.road.arrival_rate = want_number();
    else if (key == "mobility.lanes") {
        int lanes = static_cast<int>(want_number());
        if (lanes < 1) throw ConfigError("mobility.lanes must be >= 1");
        cfg.road.lane_offsets.clear();
        for (int i = 0; i < lanes; ++i)
            cfg.road.lane_offsets.push_back(3.5 * (i - (lanes - 1) / 2.0));
    }
    else if (key == "mobility.entry_speed_frac") cfg.road.entry_speed_frac = want_number();
    else if (key == "mobility.min_spawn_gap") cfg.road.min_spawn_gap = want_number();
    else if (key == "mobility.radius") cfg.geom.radius = want_number();
    else if (key == "sla.eta_min_lo") cfg.eta_min_lo = want_number();
    else if (key == "sla.eta_min_hi") cfg.eta_min_hi = want_number();
    else if (key == "sla.eta_max_lo") cfg.eta_max_lo = want_number();
    else if (key == "sla.eta_max_hi") cfg.eta_max_hi = want_number();
    else if (key == "sla.energy_budget_lo") cfg.energy_budget_lo = want_number();
    else if (key == "sla.energy_budget_hi") cfg.energy_budget_hi = want_number();
    else if (key == "sla.cycles_lo") cfg.cycles_lo = want_number();
    else if (key == "sla.cycles_hi") cfg.cycles_hi = want_number();
    else if (key == "sla.price_lo") cfg.price_lo = want_number();
    else if (key == "sla.price_hi") cfg.price_hi = want_number();
    else if (key == "sla.fee_lo") cfg.fee_lo = want_number();
    else if (key == "sla.fee_hi") cfg.fee_hi = want_number();
    else if (key == "sla.p_max") cfg.p_max = want_number();
    else if (key == "sla.chip_capacitance") cfg.chip_capacitance = want_number();
    else if (key == "budget.money") cfg.money = want_number();
    else if (key == "budget.desired_iters") cfg.desired_iters = static_cast<int>(want_number());
    else if (key == "budget.iter_min") cfg.iter_min = static_cast<int>(want_number());
    else if (key == "budget.iter_max") cfg.iter_max = static_cast<int>(want_number());
    else if (key == "budget.subset_frac") cfg.subset_frac = want_number();
    else if (key == "lambda") cfg.lambda = want_number();
    else if (key == "lambda_bar") cfg.lambda_bar = want_number();
    else if (key == "learn.n_features") cfg.n_features = static_cast<int>(want_number());
    else if (key == "learn.n_classes") cfg.n_classes = static_cast<int>(want_number());
    else if (key == "learn.n_samples") cfg.n_samples = static_cast<int>(want_number());
    else if (key == "learn.n_test") cfg.n_test = static_cast<int>(want_number());
    else if (key == "learn.dirichlet_alpha") cfg.dirichlet_alpha = want_number();
    else if (key == "learn.data_spread") cfg.blob_spread = want_number();
    else if (key == "learn.data_partitions") cfg.data_partitions = static_cast<int>(want_number());
    else if (key == "learn.prox_mu") cfg.prox_mu = want_number();
    else if (key == "learn.fpp_bits") cfg.fpp_bits = static_cast<int>(want_number());
    else if (key == "rat.control_c") cfg.control_c = want_number();
    else if (key == "rat.snr_percentile") cfg.snr_percentile = want_number();
    else if (key == "rat.snr_draws") cfg.snr_draws = static_cast<int>(want_number());
    else if (key == "rat.worst_snr_at_current_distance")
        cfg.worst_snr_at_current_distance = want_number() != 0;
    else if (key == "solver.plan_sca_iters") cfg.plan_sca_iters = static_cast<int>(want_number());
    else if (key == "solver.slot_sca_iters") cfg.slot_sca_iters = static_cast<int>(want_number());
    else if (key == "solver.tol") cfg.solver_tol = want_number();
    else if (key == "log_slots") cfg.log_slots = want_number() != 0;
    else throw ConfigError("unknown config key: " + key);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    RunConfig cfg;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (it.value().is_string())
            apply_key(cfg, it.key(), 0.0, it.value().get<std::string>(), true);
        else if (it.value().is_number())
            apply_key(cfg, it.key(), it.value().get<double>(), "", false);
        else if (it.value().is_boolean())
            apply_key(cfg, it.key(), it.value().get<bool>() ? 1.0 : 0.0, "", false);
        else
            throw ConfigError("config key '" + it.key() + "' has unsupported type");
    }
    if (const char* env = std::getenv("VEFL_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError("VEFL_SEED must be an integer");
        cfg.seed = v;
    }
    if (cfg.rounds < 1 || cfg.slots_per_round < 1 || !cfg.radio.valid() || !cfg.idm.valid() ||
        cfg.subset_frac <= 0 || cfg.subset_frac > 1 || cfg.lambda < 0 || cfg.lambda > 1 ||
        cfg.money <= 0)
        throw ConfigError("config validation failed");
    return cfg;
}

std::vector<std::string> round_csv_columns() {
    return {"k",
            "skipped",
            "n_fleet",
            "n_selected",
            "subset_size",
            "sum_charge",
            "budget_money",
            "mean_p_suc",
            "min_p_suc",
            "delivered",
            "accuracy",
            "beta_bar",
            "theorem1",
            "loss_change",
            "grad_norm",
            "bound_margin_min",
            "plan_objective",
            "control_c",
            "sum_energy",
            "max_delay",
            "clamped_tau",
            "relaxed_floors",
            "sca_iters"};
}

Vec round_csv_row(const RoundRecord& r) {
    return {r.k,           r.skipped,      r.n_fleet,       r.n_selected,
            r.subset_size, r.sum_charge,   r.budget_money,  r.mean_p_suc,
            r.min_p_suc,   r.delivered,    r.accuracy,      r.beta_bar,
            r.theorem1,    r.loss_change,  r.grad_norm,     r.bound_margin_min,
            r.plan_objective, r.control_c, r.sum_energy,    r.max_delay,
            r.clamped_tau, r.relaxed_floors, r.sca_iters};
}

namespace {

struct CvRuntime {
    std::uint64_t id = 0;
    int partition = 0;
    cost::SlaTerms sla;
};

cost::SlaTerms draw_sla(const RunConfig& cfg, std::uint64_t id, double dataset_bits) {
    Rng rng = make_rng(cfg.seed, "sla", id);
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    cost::SlaTerms sla;
    sla.eta_min = uni(cfg.eta_min_lo, cfg.eta_min_hi);
    sla.eta_max = uni(cfg.eta_max_lo, cfg.eta_max_hi);
    sla.energy_budget = uni(cfg.energy_budget_lo, cfg.energy_budget_hi);
    sla.cycles_per_bit = uni(cfg.cycles_lo, cfg.cycles_hi);
    sla.energy_price = uni(cfg.price_lo, cfg.price_hi);
    sla.participation_fee = uni(cfg.fee_lo, cfg.fee_hi);
    sla.p_max = cfg.p_max;
    sla.chip_capacitance = cfg.chip_capacitance;
    sla.dataset_bits = dataset_bits;
    return sla;
}

void place_initial_fleet(mobility::Fleet& fleet, const RunConfig& cfg) {
    int lanes = static_cast<int>(cfg.road.lane_offsets.size());
    if (lanes == 0) throw ConfigError("mobility: at least one lane required");
    int per_lane = (cfg.initial_cvs + lanes - 1) / lanes;
    for (int lane = 0; lane < lanes; ++lane) {
        double y = cfg.road.lane_offsets[static_cast<std::size_t>(lane)];
        double half = std::sqrt(std::max(cfg.geom.radius * cfg.geom.radius - y * y, 0.0));
        int count = std::min(per_lane, cfg.initial_cvs - lane * per_lane);
        for (int i = 0; i < count; ++i) {
            mobility::VehicleState v;
            v.id = fleet.next_id++;
            v.lane_id = lane;
            v.y = y;
            v.x = -0.8 * half + 1.6 * half * (i + 0.5) / std::max(count, 1);
            v.speed = cfg.road.entry_speed_frac * cfg.idm.u_max;
            fleet.vehicles.push_back(v);
        }
    }
    std::stable_sort(fleet.vehicles.begin(), fleet.vehicles.end(),
                     [](const auto& a, const auto& b) {
                         return a.lane_id != b.lane_id ? a.lane_id < b.lane_id : a.x > b.x;
                     });
}

double distance_of(const mobility::VehicleState& v) { return std::hypot(v.x, v.y); }

// Weighted global loss and gradient norm at the anchor over the participants.
void global_loss_stats(const fl::ModelParams& anchor,
                       const std::vector<const fl::ClientDataset*>& data, const Vec& weights,
                       const fl::LearningConfig& lcfg, double* loss, double* grad_norm,
                       double* b_hat) {
    fl::LearningConfig plain = lcfg;
    plain.prox_mu = 0.0;
    Vec total(anchor.values.size(), 0.0);
    double l = 0.0;
    Vec norms(data.size(), 0.0);
    for (std::size_t v = 0; v < data.size(); ++v) {
        Vec g;
        l += weights[v] * fl::local_objective(anchor, anchor, *data[v], plain, &g);
        norms[v] = norm2(g);
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += weights[v] * g[j];
    }
    double gn = norm2(total);
    if (loss) *loss = l;
    if (grad_norm) *grad_norm = gn;
    if (b_hat) {
        double worst = 1.0;
        if (gn > 1e-12)
            for (double n : norms) worst = std::max(worst, n / gn);
        *b_hat = worst;
    }
}

}  // namespace

RunResult run_simulation(const RunConfig& cfg) {
    const auto& rc = cfg.radio;
    const double kappa = rc.tti;
    const int zc = rc.prb_count;

    // Data: one pool, deterministic split into train/test, Dirichlet shards.
    Rng data_rng = make_rng(cfg.seed, "pool");
    fl::DataPool all = fl::make_blob_pool(cfg.n_samples + cfg.n_test, cfg.n_features,
                                          cfg.n_classes, cfg.blob_spread, data_rng);
    fl::DataPool train, test;
    train.n_classes = test.n_classes = cfg.n_classes;
    train.features = Mat(static_cast<std::size_t>(cfg.n_samples), all.features.cols);
    test.features = Mat(static_cast<std::size_t>(cfg.n_test), all.features.cols);
    for (int i = 0; i < cfg.n_samples + cfg.n_test; ++i) {
        auto& dst = i < cfg.n_samples ? train : test;
        std::size_t row = static_cast<std::size_t>(i < cfg.n_samples ? i : i - cfg.n_samples);
        for (std::size_t f = 0; f < all.features.cols; ++f)
            dst.features(row, f) = all.features(static_cast<std::size_t>(i), f);
        dst.labels.push_back(all.labels[static_cast<std::size_t>(i)]);
    }
    Rng part_rng = make_rng(cfg.seed, "dirichlet");
    auto shards = fl::partition_dirichlet(train, cfg.dirichlet_alpha, cfg.data_partitions,
                                          part_rng);

    fl::LearningConfig lcfg;
    lcfg.prox_mu = cfg.prox_mu;
    lcfg.n_classes = cfg.n_classes;
    const int dim = cfg.n_classes * (cfg.n_features + 1);
    fl::ModelParams model;
    model.values.assign(static_cast<std::size_t>(dim), 0.0);
    cost::PayloadSpec payload = cost::PayloadSpec::uniform(dim, cfg.fpp_bits);
    const double payload_total = cost::payload_bits(payload);

    mobility::Fleet fleet;
    place_initial_fleet(fleet, cfg);
    std::map<std::uint64_t, CvRuntime> known;

    rat::LyapunovConfig lyap;
    lyap.max_iters = cfg.slot_sca_iters;
    lyap.tol = cfg.solver_tol;
    // Per-slot budgets: the slot loop runs tens of thousands of times per
    // simulation, so the inner solvers get a trimmed iteration diet and the
    // rounding polish recovers assignment quality.
    lyap.relax_iters = 50;
    lyap.inner_iters = 40;
    lyap.dykstra_sweeps = 15;
    lyap.owner_search_sweeps = 6;
    double control_c = cfg.control_c;
    bool control_set = control_c > 0;

    RunResult result;
    double last_accuracy = 0.0;
    bool accuracy_known = false;
    for (int k = 0; k < cfg.rounds; ++k) {
        const long long rs = static_cast<long long>(k) * cfg.slots_per_round;
        const long long re = rs + cfg.slots_per_round;
        RoundRecord rec;
        rec.k = k;
        rec.budget_money = cfg.money;
        rec.control_c = control_set ? control_c : 0.0;

        // Active fleet snapshot and per-CV planning inputs.
        std::vector<std::uint64_t> ids;
        std::vector<const mobility::VehicleState*> states;
        for (const auto& v : fleet.vehicles)
            if (!v.departed) {
                ids.push_back(v.id);
                states.push_back(&v);
            }
        const int vcount = static_cast<int>(ids.size());
        rec.n_fleet = vcount;
        rec.cv_ids = ids;

        auto advance_round = [&]() {
            Rng step_rng = make_rng(cfg.seed, "mobility", static_cast<std::uint64_t>(k));
            for (int t = 0; t < cfg.slots_per_round; ++t)
                mobility::step_mobility(fleet, cfg.idm, cfg.road, cfg.geom, kappa, rs + t,
                                        step_rng);
        };
        if (vcount == 0) {
            rec.skipped = 1;
            rec.accuracy = accuracy_known ? last_accuracy
                                          : fl::test_accuracy(model, test, cfg.n_classes);
            rec.note = "empty fleet";
            result.rounds.push_back(rec);
            advance_round();
            continue;
        }

        std::vector<cost::SlaTerms> slas(ids.size());
        std::vector<double> sojourns(ids.size());
        std::vector<double> data_bits(ids.size());
        std::vector<long long> worst_tx(ids.size());
        bool degenerate = false;
        for (std::size_t v = 0; v < ids.size(); ++v) {
            auto it = known.find(ids[v]);
            if (it == known.end()) {
                CvRuntime rt;
                rt.id = ids[v];
                rt.partition = static_cast<int>(ids[v] % static_cast<std::uint64_t>(
                                                             cfg.data_partitions));
                rt.sla = draw_sla(cfg, ids[v],
                                  shards[static_cast<std::size_t>(rt.partition)].bits);
                it = known.emplace(ids[v], rt).first;
            }
            slas[v] = it->second.sla;
            data_bits[v] = slas[v].dataset_bits;
            sojourns[v] = mobility::sojourn_lower_bound(states[v]->x, states[v]->y, cfg.geom,
                                                        cfg.idm.u_max);
            double dist = cfg.worst_snr_at_current_distance ? distance_of(*states[v])
                                                            : cfg.geom.radius;
            Rng snr_rng = make_rng(cfg.seed, "snr", static_cast<std::uint64_t>(k), ids[v]);
            double snr = cost::worst_snr_percentile(dist, cfg.p_max, rc, cfg.snr_percentile,
                                                    cfg.snr_draws, snr_rng);
            try {
                worst_tx[v] = cost::worst_case_tx_ttis(payload, rc, snr, vcount);
                // The fractional share model holds in expectation, but the
                // deadline scheduler can only grant whole slots: a window of
                // W slots guarantees floor(Z*W/V) of them.  Widen the planned
                // window until that integer share covers the full-rate slot
                // need, otherwise same-deadline cohorts larger than Z starve.
                if (vcount > rc.prb_count) {
                    long long full = cost::worst_case_tx_ttis(payload, rc, snr, rc.prb_count);
                    long long window = (full * vcount + rc.prb_count - 1) / rc.prb_count;
                    worst_tx[v] = std::max(worst_tx[v], window);
                }
            } catch (const cost::ZeroWorstRate&) {
                degenerate = true;
            }
        }
        if (degenerate) {
            rec.skipped = 1;
            rec.accuracy = accuracy_known ? last_accuracy
                                          : fl::test_accuracy(model, test, cfg.n_classes);
            rec.note = "zero worst-case SNR";
            result.rounds.push_back(rec);
            advance_round();
            continue;
        }

        opt::RoundBudget budget;
        budget.money = cfg.money;
        budget.deadline = kappa * cfg.slots_per_round;
        budget.desired_iters = cfg.desired_iters;
        budget.iter_min = cfg.iter_min;
        budget.iter_max = cfg.iter_max;
        budget.subset_size = std::max(1, static_cast<int>(std::lround(cfg.subset_frac * vcount)));
        rec.subset_size = budget.subset_size;

        const bool full_participation =
            cfg.mode == Mode::Fdpc || cfg.mode == Mode::FedProxBaseline;
        opt::RoundPlan plan;
        try {
            if (cfg.mode == Mode::FedProxBaseline) {
                // Equal budget split, maximum frequency, maximal iterations.
                plan.selected.assign(ids.size(), false);
                plan.iters.assign(ids.size(), 0);
                plan.freqs.assign(ids.size(), 0.0);
                plan.est_delay.assign(ids.size(), 0.0);
                plan.est_energy.assign(ids.size(), 0.0);
                plan.est_charge.assign(ids.size(), 0.0);
                plan.theta = fl::aggregation_weights(data_bits, sojourns, 0.0);
                double share = cfg.money / vcount;
                int taken = 0;
                for (std::size_t v = 0; v < ids.size(); ++v) {
                    double eta = slas[v].eta_max;
                    int l = cfg.iter_min;
                    double tx_s = kappa * static_cast<double>(worst_tx[v]);
                    double window = std::min(budget.deadline, sojourns[v]) - 2.0 * kappa - tx_s;
                    bool ok = false;
                    for (int cand = cfg.iter_max; cand >= cfg.iter_min; --cand) {
                        double d = cost::compute_delay(cand, slas[v], eta);
                        double e = cost::compute_energy(cand, slas[v], eta) +
                                   tx_s * slas[v].p_max;
                        double charge = cost::cv_charge_upper(cand, eta, worst_tx[v], slas[v], rc);
                        if (d <= window && e <= slas[v].energy_budget && charge <= share) {
                            l = cand;
                            ok = true;
                            break;
                        }
                    }
                    if (!ok) continue;
                    plan.selected[v] = true;
                    plan.iters[v] = l;
                    plan.freqs[v] = eta;
                    plan.est_delay[v] = cost::compute_delay(l, slas[v], eta) + tx_s;
                    plan.est_energy[v] =
                        cost::compute_energy(l, slas[v], eta) + tx_s * slas[v].p_max;
                    plan.est_charge[v] = cost::cv_charge_upper(l, eta, worst_tx[v], slas[v], rc);
                    ++taken;
                }
                if (taken == 0)
                    throw opt::NoFeasiblePlan("fedprox baseline: no CV fits its budget share",
                                              "C5 (equal split)");
            } else {
                Vec theta = full_participation
                                ? fl::aggregation_weights(data_bits, sojourns, cfg.lambda)
                                : opt::theta_weights(data_bits, sojourns, cfg.lambda_bar);
                opt::SolverOptions sopts;
                sopts.max_iters = cfg.plan_sca_iters;
                sopts.tol = cfg.solver_tol;
                plan = opt::solve_vefl_round(slas, sojourns, theta, budget, worst_tx, rc,
                                             full_participation, sopts);
            }
        } catch (const opt::NoFeasiblePlan& e) {
            rec.skipped = 1;
            rec.accuracy = accuracy_known ? last_accuracy
                                          : fl::test_accuracy(model, test, cfg.n_classes);
            rec.note = std::string(e.what()) + " [" + e.binding_constraint + "]";
            result.rounds.push_back(rec);
            advance_round();
            continue;
        }
        rec.selected = plan.selected;
        rec.plan_objective = plan.objective;
        rec.sca_iters = plan.sca_iterations;
        rec.n_selected = static_cast<double>(
            std::count(plan.selected.begin(), plan.selected.end(), true));

        // Local training for the participants, from the current global model.
        std::vector<fl::ModelParams> locals(ids.size());
        Vec comp_energy(ids.size(), 0.0), comp_delay(ids.size(), 0.0);
        for (std::size_t v = 0; v < ids.size(); ++v) {
            if (!plan.selected[v]) continue;
            const auto& shard = shards[static_cast<std::size_t>(known[ids[v]].partition)];
            locals[v] = fl::local_train(model, shard, lcfg, plan.iters[v]);
            comp_delay[v] = cost::compute_delay(plan.iters[v], slas[v], plan.freqs[v]);
            comp_energy[v] = cost::compute_energy(plan.iters[v], slas[v], plan.freqs[v]);
        }

        // Transmission windows.
        std::vector<long long> tau(ids.size(), re), cv_deadline(ids.size(), re);
        double clamped_count = 0;
        for (std::size_t v = 0; v < ids.size(); ++v) {
            if (!plan.selected[v]) continue;
            bool clamped = false;
            tau[v] = cost::tx_start_slot(rs, re, sojourns[v], worst_tx[v], rc, true, &clamped);
            // Never start before the local training finishes.
            long long ready = rs + static_cast<long long>(std::ceil(comp_delay[v] / kappa));
            tau[v] = std::max(tau[v], ready);
            if (clamped) clamped_count += 1;
            cv_deadline[v] = std::min(
                re, rs + static_cast<long long>(std::floor(sojourns[v] / kappa)));
        }
        rec.clamped_tau = clamped_count;

        // Slot loop.
        Vec queue(ids.size(), 0.0), tx_energy(ids.size(), 0.0), tx_slots_used(ids.size(), 0.0);
        for (std::size_t v = 0; v < ids.size(); ++v)
            if (plan.selected[v]) queue[v] = payload_total;
        rat::EeTracker ee;
        double margin_min = kInf;
        double relaxed = 0;
        Rng step_rng = make_rng(cfg.seed, "mobility", static_cast<std::uint64_t>(k));
        for (int t = 0; t < cfg.slots_per_round; ++t) {
            const long long a = rs + t;
            // Candidates: selected, backlogged, trained, within their window,
            // still inside coverage, and with energy headroom for one slot.
            std::vector<int> cand;
            std::vector<std::size_t> cand_pos;
            Vec cand_deadline, cand_backlog;
            std::map<std::uint64_t, const mobility::VehicleState*> alive;
            for (const auto& vs : fleet.vehicles)
                if (!vs.departed) alive[vs.id] = &vs;
            for (std::size_t v = 0; v < ids.size(); ++v) {
                if (!plan.selected[v] || queue[v] <= 0 || a < tau[v] || a >= cv_deadline[v])
                    continue;
                if (!alive.count(ids[v])) continue;
                if (comp_energy[v] + tx_energy[v] + kappa * slas[v].p_max >
                    slas[v].energy_budget + 1e-12)
                    continue;
                cand.push_back(static_cast<int>(v));
                cand_pos.push_back(v);
                cand_deadline.push_back(static_cast<double>(cv_deadline[v] - a));
                cand_backlog.push_back(queue[v]);
            }
            if (cand.empty()) {
                mobility::step_mobility(fleet, cfg.idm, cfg.road, cfg.geom, kappa, a, step_rng);
                continue;
            }
            auto sched = rat::edf_schedule(cand, cand_deadline, cand_backlog, zc);
            const std::size_t ns = sched.size();

            std::vector<double> dists(ns);
            Vec backlogs(ns), floors(ns), deadlines(ns), pmaxv(ns);
            for (std::size_t s = 0; s < ns; ++s) {
                auto v = static_cast<std::size_t>(sched[s]);
                dists[s] = distance_of(*alive[ids[v]]);
                backlogs[s] = queue[v];
                deadlines[s] = static_cast<double>(cv_deadline[v] - a);
                pmaxv[s] = slas[v].p_max;
                try {
                    floors[s] = rat::min_rate_requirement(queue[v], deadlines[s],
                                                          budget.subset_size, zc, kappa);
                } catch (const rat::ExpiredDeadline&) {
                    floors[s] = 0.0;  // no guaranteed share left; best effort
                }
            }
            Rng chan_rng = make_rng(cfg.seed, "channel", static_cast<std::uint64_t>(a));
            auto chan = radio::sample_channels(dists, rc, chan_rng);
            Mat gains(ns, static_cast<std::size_t>(zc));
            for (std::size_t s = 0; s < ns; ++s)
                for (int z = 0; z < zc; ++z) gains(s, static_cast<std::size_t>(z)) =
                    chan.gain(static_cast<int>(s), z);

            if (!control_set) {
                // Balance the EE price and backlog pressure terms.
                control_c = kappa * *std::max_element(backlogs.begin(), backlogs.end());
                control_set = true;
                result.control_c = control_c;
            }
            lyap.control = control_c;

            Mat lifted(ns, static_cast<std::size_t>(zc));
            if (cfg.mode == Mode::EqualPowerBaseline) {
                // Round-robin pRBs, equal power across owned pRBs.
                std::vector<int> owned(ns, 0);
                for (int z = 0; z < zc; ++z) ++owned[static_cast<std::size_t>(z) % ns];
                for (int z = 0; z < zc; ++z) {
                    std::size_t s = static_cast<std::size_t>(z) % ns;
                    lifted(s, static_cast<std::size_t>(z)) =
                        pmaxv[s] / static_cast<double>(owned[s]);
                }
            } else if (ns == 1) {
                Vec g(static_cast<std::size_t>(zc));
                for (int z = 0; z < zc; ++z) g[static_cast<std::size_t>(z)] =
                    gains(0, static_cast<std::size_t>(z));
                bool met = true;
                Vec p = rat::solve_single_cv_power(g, backlogs[0], floors[0], ee.ratio(), lyap,
                                                   rc, pmaxv[0], nullptr, &met);
                if (!met) relaxed += 1;
                for (int z = 0; z < zc; ++z)
                    lifted(0, static_cast<std::size_t>(z)) = p[static_cast<std::size_t>(z)];
            } else {
                auto alloc = rat::solve_prb_power(sched, gains, backlogs, floors, deadlines, ee,
                                                  lyap, rc, pmaxv);
                lifted = alloc.lifted_powers;
                relaxed += static_cast<double>(alloc.relaxed_floors.size());
            }

            double beta_prior = ee.ratio();
            auto [lhs, rhs] = rat::drift_penalty_bound(lifted, gains, backlogs, pmaxv,
                                                       beta_prior, control_c, rc);
            margin_min = std::min(margin_min, rhs - lhs);

            double rate_sum = 0.0, power_sum = 0.0;
            Vec rates(ns, 0.0);
            for (std::size_t s = 0; s < ns; ++s) {
                Vec pw(static_cast<std::size_t>(zc)), g(static_cast<std::size_t>(zc));
                for (int z = 0; z < zc; ++z) {
                    pw[static_cast<std::size_t>(z)] = lifted(s, static_cast<std::size_t>(z));
                    g[static_cast<std::size_t>(z)] = gains(s, static_cast<std::size_t>(z));
                    power_sum += lifted(s, static_cast<std::size_t>(z));
                }
                rates[s] = radio::achievable_rate(pw, g, rc);
                rate_sum += rates[s];
                auto v = static_cast<std::size_t>(sched[s]);
                double spent = 0.0;
                for (int z = 0; z < zc; ++z)
                    spent += kappa * lifted(s, static_cast<std::size_t>(z));
                tx_energy[v] += spent;
                if (spent > 0) tx_slots_used[v] += 1;
                queue[v] = std::max(queue[v] - kappa * rates[s], 0.0);
            }
            ee.add(rate_sum, power_sum);

            if (cfg.log_slots) {
                json line;
                line["schema"] = 1;
                line["round"] = k;
                line["slot"] = a;
                json jsched = json::array(), jrates = json::array(), jq = json::array();
                for (std::size_t s = 0; s < ns; ++s) {
                    jsched.push_back(ids[static_cast<std::size_t>(sched[s])]);
                    jrates.push_back(rates[s]);
                    jq.push_back(queue[static_cast<std::size_t>(sched[s])]);
                }
                line["scheduled"] = jsched;
                line["rates"] = jrates;
                line["queues"] = jq;
                line["beta"] = beta_prior;
                line["power"] = power_sum;
                line["bound_lhs"] = lhs;
                line["bound_rhs"] = rhs;
                result.slot_lines.push_back(line.dump());
            }
            mobility::step_mobility(fleet, cfg.idm, cfg.road, cfg.geom, kappa, a, step_rng);
        }
        rec.relaxed_floors = relaxed;
        rec.beta_bar = ee.ratio();
        rec.bound_margin_min = margin_min == kInf ? 0.0 : margin_min;
        rec.control_c = control_set ? control_c : 0.0;

        // Delivery outcomes, charges, aggregation.
        fl::AggregationInputs agg;
        agg.lambda = cfg.lambda;
        agg.weights = fl::aggregation_weights(data_bits, sojourns, cfg.lambda);
        agg.success.assign(ids.size(), false);
        agg.selected.assign(plan.selected.begin(), plan.selected.end());
        agg.success_prob.assign(ids.size(), 1.0);
        agg.selection_prob.assign(
            ids.size(), full_participation
                            ? 1.0
                            : static_cast<double>(budget.subset_size) / vcount);
        rec.p_suc.assign(ids.size(), 0.0);
        rec.charges.assign(ids.size(), 0.0);
        double psum = 0.0, pmin = 1.0;
        int delivered = 0, participants = 0;
        for (std::size_t v = 0; v < ids.size(); ++v) {
            if (!plan.selected[v]) continue;
            ++participants;
            double ps = rat::success_probability(queue[v], payload_total);
            rec.p_suc[v] = ps;
            agg.success[v] = queue[v] <= 1e-9;
            if (agg.success[v]) ++delivered;
            psum += ps;
            pmin = std::min(pmin, ps);
            double e_tot = comp_energy[v] + tx_energy[v];
            rec.charges[v] = cost::cv_charge(e_tot, slas[v]);
            rec.sum_charge += rec.charges[v];
            rec.sum_energy += e_tot;
            rec.max_delay = std::max(rec.max_delay,
                                     comp_delay[v] + kappa * tx_slots_used[v]);
        }
        rec.delivered = delivered;
        rec.mean_p_suc = participants > 0 ? psum / participants : 0.0;
        rec.min_p_suc = participants > 0 ? pmin : 0.0;

        // Theorem-style plausibility numbers at the anchor.
        std::vector<const fl::ClientDataset*> part_data;
        Vec part_w;
        for (std::size_t v = 0; v < ids.size(); ++v)
            if (plan.selected[v]) {
                part_data.push_back(&shards[static_cast<std::size_t>(known[ids[v]].partition)]);
                part_w.push_back(agg.weights[v]);
            }
        double wsum = std::accumulate(part_w.begin(), part_w.end(), 0.0);
        if (wsum > 0)
            for (auto& w : part_w) w /= wsum;
        double loss_before = 0.0, gnorm = 0.0, b_hat = 1.0;
        global_loss_stats(model, part_data, part_w, lcfg, &loss_before, &gnorm, &b_hat);
        rec.grad_norm = gnorm;

        fl::ModelParams next = full_participation ? fl::aggregate_fdpc(model, locals, agg)
                                                  : fl::aggregate_pdpc(model, locals, agg);
        double loss_after = 0.0;
        global_loss_stats(next, part_data, part_w, lcfg, &loss_after, nullptr, nullptr);
        rec.loss_change = loss_after - loss_before;

        fl::LearningConfig bcfg = lcfg;
        bcfg.dissimilarity_b = b_hat;
        Rng lip_rng = make_rng(cfg.seed, "lipschitz-round", static_cast<std::uint64_t>(k));
        double l_hat = 0.1;
        for (auto* d : part_data)
            l_hat = std::max(l_hat, fl::estimate_lipschitz(*d, lcfg, lip_rng));
        bcfg.lipschitz_l = l_hat;
        fl::AggregationInputs bagg = agg;
        Vec bw_weights, bq, bp;
        for (std::size_t v = 0; v < ids.size(); ++v)
            if (plan.selected[v]) {
                bw_weights.push_back(part_w[bw_weights.size()]);
                bq.push_back(agg.selection_prob[v]);
                bp.push_back(1.0);
            }
        bagg.weights = bw_weights;
        bagg.selection_prob = bq;
        bagg.success_prob = bp;
        rec.theorem1 = participants > 0 ? fl::theorem1_bound(bagg, gnorm, bcfg) : 0.0;

        model = next;
        rec.accuracy = fl::test_accuracy(model, test, cfg.n_classes);
        last_accuracy = rec.accuracy;
        accuracy_known = true;
        result.rounds.push_back(rec);
    }
    if (!result.rounds.empty()) result.final_accuracy = result.rounds.back().accuracy;
    result.control_c = control_set ? control_c : 0.0;
    return result;
}

RunResult run_baseline_fedprox(RunConfig cfg) {
    cfg.mode = Mode::FedProxBaseline;
    return run_simulation(cfg);
}

void export_metrics(const RunResult& result, const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    {
        std::ofstream csv(out_dir + "/rounds.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write rounds.csv");
        auto cols = round_csv_columns();
        for (std::size_t i = 0; i < cols.size(); ++i)
            csv << cols[i] << (i + 1 < cols.size() ? "," : "");
        csv << "\r\n";
        for (const auto& r : result.rounds) {
            Vec row = round_csv_row(r);
            for (std::size_t i = 0; i < row.size(); ++i)
                csv << format_double(row[i]) << (i + 1 < row.size() ? "," : "");
            csv << "\r\n";
        }
        if (!csv) throw IoError("write failure on rounds.csv");
    }
    {
        std::ofstream jl(out_dir + "/slots.jsonl", std::ios::binary);
        if (!jl) throw IoError("cannot write slots.jsonl");
        for (const auto& line : result.slot_lines) jl << line << "\n";
    }
    {
        json summary;
        summary["schema"] = 1;
        summary["mode"] = mode_name(cfg.mode);
        summary["seed"] = cfg.seed;
        summary["rounds"] = result.rounds.size();
        summary["final_accuracy"] = result.final_accuracy;
        summary["control_c"] = result.control_c;
        // Success CCDF over per-round mean success probabilities and the
        // per-round server cost CDF.
        Vec ps, costs;
        for (const auto& r : result.rounds)
            if (r.skipped == 0) {
                ps.push_back(r.mean_p_suc);
                costs.push_back(r.sum_charge);
            }
        std::sort(ps.begin(), ps.end());
        std::sort(costs.begin(), costs.end());
        json ccdf = json::array(), cdf = json::array();
        for (std::size_t i = 0; i < ps.size(); ++i)
            ccdf.push_back({ps[i], 1.0 - static_cast<double>(i) / ps.size()});
        for (std::size_t i = 0; i < costs.size(); ++i)
            cdf.push_back({costs[i], static_cast<double>(i + 1) / costs.size()});
        summary["success_ccdf"] = ccdf;
        summary["cost_cdf"] = cdf;
        std::ofstream sj(out_dir + "/summary.json", std::ios::binary);
        if (!sj) throw IoError("cannot write summary.json");
        sj << summary.dump(2) << "\n";
    }
}

std::vector<Vec> import_rounds_csv(const std::string& path, std::vector<std::string>* header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Vec> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        fields.push_back(cur);
        if (first) {
            if (header) *header = fields;
            first = false;
            continue;
        }
        Vec row;
        for (const auto& f : fields) row.push_back(std::strtod(f.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace vefl::harness
