// vefl: desk-scale vehicular-edge federated-learning simulator CLI.
//
// Commands:
//   simulate     run one configuration and write rounds.csv / slots.jsonl /
//                summary.json into the output directory
//   sweep        re-run simulate across a list of values for one config key
//   verify       run fast built-in consistency checks
//   export-plots render rounds.csv into standalone SVG charts
//
// Exit codes: 0 success, 2 config error, 3 no round produced a feasible plan.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vefl/harness.hpp"

namespace {

using namespace vefl;

int run_simulate(const std::string& config_path, const std::string& out_dir) {
    harness::RunConfig cfg = harness::load_config(config_path);
    harness::RunResult result = harness::run_simulation(cfg);
    harness::export_metrics(result, cfg, out_dir);
    bool any_ok = false;
    for (const auto& r : result.rounds)
        if (r.skipped == 0) any_ok = true;
    if (!any_ok) {
        std::cerr << "no round produced a feasible plan\n";
        return 3;
    }
    std::cout << "rounds=" << result.rounds.size()
              << " final_accuracy=" << harness::format_double(result.final_accuracy) << "\n";
    return 0;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

int run_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& param, const std::string& values_csv) {
    std::vector<std::string> values;
    std::stringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(tok);
    if (values.empty()) throw ConfigError("sweep: --values must list at least one value");

    int rc = 3;
    std::ofstream index(out_dir + "/sweep.csv", std::ios::binary);
    std::filesystem::create_directories(out_dir);
    index.open(out_dir + "/sweep.csv", std::ios::binary);
    index << param << ",final_accuracy,out_dir\r\n";
    for (const auto& value : values) {
        harness::RunConfig cfg = harness::load_config(config_path);
        try {
            double num = std::stod(value);
            harness::apply_key(cfg, param, num, value, false);
        } catch (const std::invalid_argument&) {
            harness::apply_key(cfg, param, 0.0, value, true);
        }
        std::string sub = out_dir + "/" + sanitize(param) + "_" + sanitize(value);
        harness::RunResult result = harness::run_simulation(cfg);
        harness::export_metrics(result, cfg, sub);
        index << value << "," << harness::format_double(result.final_accuracy) << "," << sub
              << "\r\n";
        for (const auto& r : result.rounds)
            if (r.skipped == 0) rc = 0;
        std::cout << param << "=" << value
                  << " final_accuracy=" << harness::format_double(result.final_accuracy) << "\n";
    }
    return rc;
}

bool check(const char* name, bool ok, int& failures) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
    return ok;
}

int run_verify() {
    int failures = 0;

    {  // Sojourn bound never exceeds the straight-line exit time.
        Rng rng = make_rng(7, "verify-sojourn");
        mobility::CoverageGeometry geom;
        bool ok = true;
        for (int i = 0; i < 200 && ok; ++i) {
            double ang = std::uniform_real_distribution<double>(0, 6.28318)(rng);
            double rad = std::uniform_real_distribution<double>(0, geom.radius * 0.999)(rng);
            double x = rad * std::cos(ang), y = rad * std::sin(ang);
            double bound = mobility::sojourn_lower_bound(x, y, geom, 20.0);
            double exit_x = std::sqrt(geom.radius * geom.radius - y * y) - x;
            ok = bound * 20.0 <= exit_x + 1e-9;
        }
        check("sojourn bound is a lower bound on the x-exit distance", ok, failures);
    }
    {  // Box-budget projection lands inside the set and is idempotent.
        Rng rng = make_rng(7, "verify-proj");
        bool ok = true;
        for (int i = 0; i < 100 && ok; ++i) {
            Vec x(6);
            for (auto& v : x) v = std::normal_distribution<double>(0, 2)(rng);
            Vec lo(x.size(), 0.0), hi(x.size(), 1.0);
            Vec y = x;
            cvx::project_box_budget(y, lo, hi, 2.5);
            double s = 0;
            for (double v : y) {
                ok = ok && v >= -1e-12 && v <= 1.0 + 1e-12;
                s += v;
            }
            ok = ok && s <= 2.5 + 1e-9;
            Vec z = y;
            cvx::project_box_budget(z, lo, hi, 2.5);
            for (std::size_t j = 0; j < y.size(); ++j) ok = ok && std::abs(z[j] - y[j]) < 1e-9;
        }
        check("box-budget projection is feasible and idempotent", ok, failures);
    }
    {  // Single-CV power allocation obeys box and budget and the KKT residual.
        radio::RadioConfig rc;
        Rng rng = make_rng(7, "verify-power");
        bool ok = true;
        for (int i = 0; i < 50 && ok; ++i) {
            Vec g(static_cast<std::size_t>(rc.prb_count));
            for (auto& v : g) v = std::exp(std::normal_distribution<double>(-9, 1)(rng));
            rat::LyapunovConfig lcfg;
            double kkt = 0;
            Vec p = rat::solve_single_cv_power(g, 1e5, 0.0, 0.5, lcfg, rc, 0.2, &kkt);
            double tot = 0;
            for (double v : p) {
                ok = ok && v >= -1e-12 && v <= 0.2 + 1e-9;
                tot += v;
            }
            ok = ok && tot <= 0.2 + 1e-9 && kkt < 1e-4;
        }
        check("slot power allocation satisfies box, budget, and KKT residual", ok, failures);
    }
    {  // Simulation determinism on a tiny run.
        harness::RunConfig cfg;
        cfg.rounds = 2;
        cfg.slots_per_round = 200;
        cfg.initial_cvs = 6;
        cfg.n_samples = 300;
        cfg.n_test = 100;
        cfg.data_partitions = 6;
        cfg.log_slots = true;
        auto a = harness::run_simulation(cfg);
        auto b = harness::run_simulation(cfg);
        bool ok = a.rounds.size() == b.rounds.size() && a.slot_lines == b.slot_lines;
        for (std::size_t i = 0; ok && i < a.rounds.size(); ++i)
            ok = harness::round_csv_row(a.rounds[i]) == harness::round_csv_row(b.rounds[i]);
        check("simulation is bitwise deterministic for a fixed seed", ok, failures);
    }
    std::cout << (failures == 0 ? "verify: all checks passed\n"
                                : "verify: " + std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? 0 : 1;
}

// Minimal standalone SVG line chart.
void write_svg(const std::string& path, const std::string& title, const Vec& xs, const Vec& ys) {
    const double w = 640, h = 400, ml = 60, mb = 40, mt = 30, mr = 20;
    double xmin = xs.empty() ? 0 : *std::min_element(xs.begin(), xs.end());
    double xmax = xs.empty() ? 1 : *std::max_element(xs.begin(), xs.end());
    double ymin = ys.empty() ? 0 : *std::min_element(ys.begin(), ys.end());
    double ymax = ys.empty() ? 1 : *std::max_element(ys.begin(), ys.end());
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mb - mt); };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw harness::IoError("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py(ymin) << "\" text-anchor=\"end\" "
        << "font-size=\"10\">" << harness::format_double(ymin) << "</text>\n"
        << "<text x=\"" << ml - 6 << "\" y=\"" << py(ymax) + 8 << "\" text-anchor=\"end\" "
        << "font-size=\"10\">" << harness::format_double(ymax) << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) out << px(xs[i]) << "," << py(ys[i]) << " ";
    out << "\"/>\n</svg>\n";
}

int run_export_plots(const std::string& dir) {
    std::vector<std::string> header;
    auto rows = harness::import_rounds_csv(dir + "/rounds.csv", &header);
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw harness::IoError("rounds.csv: missing column " + name);
    };
    std::size_t ck = col("k"), cacc = col("accuracy"), cp = col("mean_p_suc"),
                cch = col("sum_charge"), cbeta = col("beta_bar");
    Vec k, acc, psuc, charge, beta;
    for (const auto& r : rows) {
        k.push_back(r[ck]);
        acc.push_back(r[cacc]);
        psuc.push_back(r[cp]);
        charge.push_back(r[cch]);
        beta.push_back(r[cbeta]);
    }
    write_svg(dir + "/accuracy.svg", "Test accuracy per round", k, acc);
    write_svg(dir + "/success.svg", "Mean delivery success probability", k, psuc);
    write_svg(dir + "/cost.svg", "Server charge per round", k, charge);
    write_svg(dir + "/energy_efficiency.svg", "Cumulative rate/power ratio", k, beta);
    std::cout << "wrote 4 charts to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vehicular-edge federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", param, values;

    auto* sim = app.add_subcommand("simulate", "run one configuration");
    sim->add_option("--config", config_path, "JSON config file")->required();
    sim->add_option("--out", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "run a one-parameter sweep");
    sweep->add_option("--config", config_path, "JSON config file")->required();
    sweep->add_option("--param", param, "config key to vary")->required();
    sweep->add_option("--values", values, "comma-separated values")->required();
    sweep->add_option("--out", out_dir, "output directory");

    auto* verify = app.add_subcommand("verify", "run built-in consistency checks");

    auto* plots = app.add_subcommand("export-plots", "render rounds.csv into SVG charts");
    plots->add_option("--out", out_dir, "directory holding rounds.csv")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) return run_simulate(config_path, out_dir);
        if (sweep->parsed()) return run_sweep(config_path, out_dir, param, values);
        if (verify->parsed()) return run_verify();
        if (plots->parsed()) return run_export_plots(out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
