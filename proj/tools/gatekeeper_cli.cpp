#include "gk/harness.hpp"
#include "gk/verification.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace {

int run_firewatch(const std::string& config_file, const std::string& preset,
                  bool seed_set, uint64_t seed, double duration,
                  const std::string& filter, double sigma_assumed,
                  const std::string& out_dir) {
    gk::ScenarioConfig cfg = config_file.empty()
                                 ? gk::ScenarioConfig::preset_config(preset)
                                 : gk::ScenarioConfig::from_file(config_file);
    if (!config_file.empty() && preset != cfg.preset && !preset.empty())
        cfg.apply({{"preset", preset}});
    if (seed_set) cfg.seed = seed;
    if (duration > 0.0) cfg.duration = duration;
    if (!filter.empty()) cfg.apply({{"filter", filter}});
    if (sigma_assumed > 0.0) cfg.sigma_max_assumed = sigma_assumed;

    std::string started = gk::utc_timestamp();
    auto w0 = std::chrono::steady_clock::now();
    gk::MissionArtifacts art = gk::run_mission(cfg);
    auto w1 = std::chrono::steady_clock::now();
    double elapsed = std::chrono::duration<double>(w1 - w0).count();
    std::string summary = gk::write_run(out_dir, art, started, gk::utc_timestamp(), elapsed);
    std::cout << summary;
    std::cout << "run written to " << out_dir << "\n";
    return 0;
}

int run_appendix_oracle(int samples, int trials, uint64_t seed) {
    gk::AppendixOracleReport rep = gk::run_appendix_oracle(samples, trials, seed);
    auto line = [](const char* name, bool ok) {
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
    };
    line("B_k(t) subset of S(t)", rep.bk_in_s);
    line("B_k(t) subset of B_{k+1}(t)", rep.bk_nested);
    line("C_k(t) subset of S(t)", rep.ck_in_s);
    line("MovingBall invariant under LQR backup", rep.ball_invariant);
    line("C_k reached within exactly T_B", rep.reach_in_tb);
    std::printf("containment samples: %d, propagation trials: %d\n",
                rep.containment_samples, rep.invariance_trials);
    return rep.ok() ? 0 : 2;
}

int run_theorem_suite(const std::string& preset, uint64_t seed, int thm3_runs) {
    bool all_ok = true;

    gk::ScenarioConfig cfg = gk::ScenarioConfig::preset_config(preset);
    cfg.seed = seed;
    cfg.record_commits = true;
    gk::MissionArtifacts art = gk::run_mission(cfg);

    gk::Theorem1Report t1 = gk::verify_theorem1(art);
    std::printf("[%s] theorem 1: committed trajectories in true S(t); %d samples, %d violations, min sd %.2f m\n",
                t1.ok ? "PASS" : "FAIL", t1.samples, t1.violations, t1.min_sd);
    all_ok = all_ok && t1.ok;

    gk::Theorem2Report t2 = gk::verify_theorem2(art);
    std::printf("[%s] theorem 2: nominal loop replays committed trajectory; max err %.3e m (tol %.3e)\n",
                t2.ok ? "PASS" : "FAIL", t2.max_err, t2.tol);
    all_ok = all_ok && t2.ok;

    gk::ScenarioConfig pert = cfg;
    pert.d_bar = 0.3;
    pert.v_bar = 1.0;
    pert.r_est = 1.0;
    pert.record_commits = false;
    gk::Theorem3Report t3 = gk::verify_theorem3(pert, thm3_runs, seed + 100);
    std::printf("[%s] theorem 3: %d perturbed runs within R=%.2f m of commitment and safe; max err %.2f m, %d tube / %d safety violations\n",
                t3.ok ? "PASS" : "FAIL", t3.runs, t3.R, t3.max_err, t3.tube_violations,
                t3.safety_violations);
    all_ok = all_ok && t3.ok;

    return all_ok ? 0 : 2;
}

int run_calibrate(const std::string& out_file, uint64_t seed, int held_out) {
    gk::HelicopterModel model;
    gk::HeliTrackingGains gains;
    gk::IssCalibrationConfig cfg;
    cfg.seed = seed;
    gk::IssFitReport rep = gk::calibrate_iss_helicopter(model, gains, cfg);
    int exceed = gk::validate_iss_helicopter(model, gains, rep.bound, cfg, held_out,
                                             seed ^ 0xBEEF);
    std::printf("fitted:   M=%.3f lambda=%.4f c=%.3f\n", rep.fitted_gain, rep.fitted_decay,
                rep.fitted_dist_gain);
    std::printf("shipped:  iss_gain=%.3f iss_decay=%.4f iss_dist_gain=%.3f\n",
                rep.bound.gain, rep.bound.decay, rep.bound.dist_gain);
    std::printf("held-out exceedances: %d / %d references\n", exceed, held_out);
    if (!out_file.empty()) {
        std::FILE* f = std::fopen(out_file.c_str(), "w");
        if (!f) throw std::runtime_error("cannot open " + out_file);
        std::fprintf(f, "iss_gain = %.6f\niss_decay = %.6f\niss_dist_gain = %.6f\n",
                     rep.bound.gain, rep.bound.decay, rep.bound.dist_gain);
        std::fclose(f);
        std::printf("written to %s\n", out_file.c_str());
    }
    return exceed == 0 ? 0 : 2;
}

int run_summarize(const std::string& run_dir, bool emit_plots) {
    gk::SummaryStats s = gk::summarize_run(run_dir);
    std::cout << gk::format_summary(s);
    if (emit_plots) {
        gk::emit_plot_data(run_dir);
        std::cout << "plot data written to " << run_dir << "/plots\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gatekeeper: online safety verification for the firewatch mission"};
    app.require_subcommand(1);

    auto* fw = app.add_subcommand("firewatch", "run the firewatch mission simulation");
    std::string fw_config, fw_preset = "desk", fw_filter, fw_out = "run";
    uint64_t fw_seed = 0;
    bool fw_seed_set = false;
    double fw_duration = -1.0, fw_sigma_assumed = -1.0;
    fw->add_option("--config", fw_config, "config file or run manifest");
    fw->add_option("--preset", fw_preset, "scenario preset: desk|full")
        ->check(CLI::IsMember({"desk", "full"}));
    fw->add_option("--seed", fw_seed, "scenario seed")->each([&](const std::string&) {
        fw_seed_set = true;
    });
    fw->add_option("--duration", fw_duration, "simulated flight time [s]");
    fw->add_option("--filter", fw_filter, "off | gatekeeper")
        ->check(CLI::IsMember({"off", "gatekeeper"}));
    fw->add_option("--sigma-assumed", fw_sigma_assumed, "assumed max spread rate [m/s]");
    fw->add_option("--out", fw_out, "output run directory");

    auto* ao = app.add_subcommand("appendix-oracle",
                                  "analytic containment and invariance oracle suite");
    int ao_samples = 1500, ao_trials = 120;
    uint64_t ao_seed = 7;
    ao->add_option("--samples", ao_samples, "containment samples");
    ao->add_option("--trials", ao_trials, "propagation trials");
    ao->add_option("--seed", ao_seed, "rng seed");

    auto* ts = app.add_subcommand("theorem-suite", "executable checks of theorems 1-3");
    std::string ts_preset = "desk";
    uint64_t ts_seed = 1;
    int ts_runs = 20;
    ts->add_option("--preset", ts_preset)->check(CLI::IsMember({"desk", "full"}));
    ts->add_option("--seed", ts_seed, "base seed");
    ts->add_option("--runs", ts_runs, "number of perturbed runs for theorem 3");

    auto* ci = app.add_subcommand("calibrate-iss",
                                  "fit the tracking-error envelope from experiments");
    std::string ci_out;
    uint64_t ci_seed = 2024;
    int ci_held_out = 100;
    ci->add_option("--out", ci_out, "write fitted bound as a config fragment");
    ci->add_option("--seed", ci_seed, "rng seed");
    ci->add_option("--held-out", ci_held_out, "held-out validation references");

    auto* sm = app.add_subcommand("summarize", "render summary statistics for a run");
    std::string sm_dir;
    bool sm_plots = false;
    sm->add_option("run_dir", sm_dir, "run directory")->required();
    sm->add_flag("--emit-plots", sm_plots, "also write plot-ready CSV series");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*fw)
            return run_firewatch(fw_config, fw_preset, fw_seed_set, fw_seed, fw_duration,
                                 fw_filter, fw_sigma_assumed, fw_out);
        if (*ao) return run_appendix_oracle(ao_samples, ao_trials, ao_seed);
        if (*ts) return run_theorem_suite(ts_preset, ts_seed, ts_runs);
        if (*ci) return run_calibrate(ci_out, ci_seed, ci_held_out);
        if (*sm) return run_summarize(sm_dir, sm_plots);
    } catch (const gk::StartupCommitmentError& e) {
        std::fprintf(stderr, "startup commitment failure: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
