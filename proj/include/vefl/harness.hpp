#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vefl/cost_model.hpp"
#include "vefl/fl_core.hpp"
#include "vefl/mobility.hpp"
#include "vefl/radio.hpp"
#include "vefl/rat_opt.hpp"
#include "vefl/vefl_opt.hpp"

namespace vefl::harness {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Mode { Fdpc, Pdpc, FedProxBaseline, EqualPowerBaseline };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct RunConfig {
    std::uint64_t seed = 1;
    Mode mode = Mode::Pdpc;
    int rounds = 20;
    int slots_per_round = 1000;

    radio::RadioConfig radio;
    mobility::IdmParams idm;
    mobility::RoadConfig road;
    mobility::CoverageGeometry geom;
    int initial_cvs = 20;

    // SLA generator ranges (uniform per CV, fixed at first sight).
    double eta_min_lo = 1e3, eta_min_hi = 5e3;
    double eta_max_lo = 1.9e9, eta_max_hi = 2.8e9;
    double energy_budget_lo = 20.0, energy_budget_hi = 30.0;
    double cycles_lo = 20.0, cycles_hi = 30.0;
    double price_lo = 5.0, price_hi = 10.0;
    double fee_lo = 10.0, fee_hi = 20.0;
    double p_max = 0.2;
    double chip_capacitance = 1.2e-26;

    double money = 1500.0;
    int desired_iters = 5;
    int iter_min = 1;
    int iter_max = 50;
    double subset_frac = 1.0 / 3.0;  // |C_k| = max(1, round(frac * V))
    double lambda = 0.5;
    double lambda_bar = 0.5;

    int n_features = 99;
    int n_classes = 10;
    int n_samples = 3000;
    int n_test = 600;
    double dirichlet_alpha = 0.1;
    double blob_spread = 1.0;
    int data_partitions = 30;
    double prox_mu = 1.0;
    int fpp_bits = 31;  // plus one sign bit per element

    double control_c = 0.0;  // <= 0: auto-scaled at the first optimized slot
    double snr_percentile = 5.0;
    int snr_draws = 400;
    bool worst_snr_at_current_distance = false;
    int plan_sca_iters = 25;
    int slot_sca_iters = 3;
    double solver_tol = 1e-6;
    bool log_slots = true;
};

// Loads a flat JSON object with dotted keys (e.g. "radio.prb_count").
// Unknown keys raise ConfigError; VEFL_SEED in the environment overrides
// the configured seed.
RunConfig load_config(const std::string& path);
void apply_key(RunConfig& cfg, const std::string& key, double num, const std::string& str,
               bool is_string);

struct RoundRecord {
    // Exactly the numeric columns of rounds.csv, in order.
    double k = 0, skipped = 0, n_fleet = 0, n_selected = 0, subset_size = 0;
    double sum_charge = 0, budget_money = 0, mean_p_suc = 0, min_p_suc = 0, delivered = 0;
    double accuracy = 0, beta_bar = 0, theorem1 = 0, loss_change = 0, grad_norm = 0;
    double bound_margin_min = 0, plan_objective = 0, control_c = 0, sum_energy = 0;
    double max_delay = 0, clamped_tau = 0, relaxed_floors = 0, sca_iters = 0;

    // Extra context not exported to the CSV.
    std::vector<std::uint64_t> cv_ids;
    std::vector<bool> selected;
    Vec p_suc;
    Vec charges;
    std::string note;
};

std::vector<std::string> round_csv_columns();
Vec round_csv_row(const RoundRecord& r);

struct RunResult {
    std::vector<RoundRecord> rounds;
    std::vector<std::string> slot_lines;  // pre-rendered JSONL entries
    double final_accuracy = 0.0;
    double control_c = 0.0;
};

RunResult run_simulation(const RunConfig& cfg);
RunResult run_baseline_fedprox(RunConfig cfg);

void export_metrics(const RunResult& result, const RunConfig& cfg, const std::string& out_dir);

// Re-imports rounds.csv as a numeric matrix (row per round, CSV column
// order); used by the round-trip checks and the plotting tool.
std::vector<Vec> import_rounds_csv(const std::string& path, std::vector<std::string>* header);

std::string format_double(double v);  // %.17g, round-trip safe

}  // namespace vefl::harness
