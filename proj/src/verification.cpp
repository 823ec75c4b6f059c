#include "gk/verification.hpp"

#include <cmath>

namespace gk {

Theorem1Report verify_theorem1(const MissionArtifacts& art, double sample_dt) {
    Theorem1Report rep;
    if (art.commits.empty())
        throw std::invalid_argument("verify_theorem1: mission was run without record_commits");

    const ScenarioConfig& cfg = art.cfg;
    std::vector<CommitState> states;
    states.reserve(art.commits.size());
    for (const Commit& c : art.commits) states.emplace_back(c);

    double t_max = 0.0;
    for (const Commit& c : art.commits)
        t_max = std::max(t_max, c.traj.grid.t_end() + 2.0 * cfg.T_B);

    // re-simulate the deterministic fire truth on its own schedule
    FireField fire = make_mission_fire(cfg);
    auto sd_true = [&](const Vec2& p, double t) {
        return mission_true_distance(fire, cfg, p, t);
    };

    for (double ts = 0.0; ts <= t_max + 1e-9; ts += sample_dt) {
        while (fire.t + cfg.fire_dt <= ts + 1e-9) fire = step_levelset(fire, cfg.fire_dt);
        for (size_t ci = 0; ci < states.size(); ++ci) {
            const Commit& c = art.commits[ci];
            if (ts < c.t_commit - 1e-9) continue;
            if (ts > c.traj.grid.t_end() + 2.0 * cfg.T_B + 1e-9) continue;
            Vec xs = states[ci].committed_state(ts);
            double sd = sd_true(xs.head<2>(), ts);
            ++rep.samples;
            if (sd < rep.min_sd) {
                rep.min_sd = sd;
                rep.worst_t = ts;
                rep.worst_p = xs.head<2>();
            }
            if (sd < 0.0) ++rep.violations;
        }
    }
    rep.ok = rep.violations == 0;
    return rep;
}

Theorem2Report verify_theorem2(const MissionArtifacts& art) {
    Theorem2Report rep;
    if (art.cfg.d_bar > 0.0 || art.cfg.v_bar > 0.0)
        throw std::invalid_argument("verify_theorem2: needs a disturbance-free run");
    rep.tol = 10.0 * std::pow(art.cfg.control_dt, 4);
    for (double e : art.log.track_err) rep.max_err = std::max(rep.max_err, e);
    rep.ok = rep.max_err <= rep.tol;
    return rep;
}

Theorem3Report verify_theorem3(const ScenarioConfig& base, int n_runs, uint64_t seed0) {
    Theorem3Report rep;
    rep.runs = n_runs;
    GatekeeperConfig g = base.gatekeeper_config();
    rep.R = g.R();
    for (int i = 0; i < n_runs; ++i) {
        ScenarioConfig cfg = base;
        cfg.seed = seed0 + static_cast<uint64_t>(i);
        cfg.record_commits = false;
        MissionArtifacts art = run_mission(cfg);
        bool tube_bad = false, safety_bad = false;
        for (size_t s = 0; s < art.log.t.size(); ++s) {
            rep.max_err = std::max(rep.max_err, art.log.track_err[s]);
            if (art.log.track_err[s] > rep.R + 1e-9) tube_bad = true;
            if (art.log.dist[s] < 0.0) safety_bad = true;
        }
        if (tube_bad) ++rep.tube_violations;
        if (safety_bad) ++rep.safety_violations;
    }
    rep.ok = rep.tube_violations == 0 && rep.safety_violations == 0;
    return rep;
}

namespace {

// sigma(r) for the worked example: strictly inside (0, 2) m/s everywhere.
double appendix_sigma(double r) { return 1.1 + 0.7 * std::sin(r / 150.0 + 1.0); }

}  // namespace

AppendixOracleReport run_appendix_oracle(int samples, int trials, uint64_t seed) {
    AppendixOracleReport rep;
    std::mt19937_64 rng(seed);

    // true fire radius r(t): dr/dt = sigma(r), dense RK4 table
    const double r0 = 100.0;
    const double t_end = 400.0;
    const double dt = 0.05;
    std::vector<double> radius;
    radius.reserve(static_cast<size_t>(t_end / dt) + 2);
    radius.push_back(r0);
    {
        double r = r0;
        for (double t = 0.0; t < t_end; t += dt) {
            double k1 = appendix_sigma(r);
            double k2 = appendix_sigma(r + 0.5 * dt * k1);
            double k3 = appendix_sigma(r + 0.5 * dt * k2);
            double k4 = appendix_sigma(r + dt * k3);
            r += (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
            radius.push_back(r);
        }
    }
    auto r_of = [&radius, dt, t_end](double t) {
        double s = std::clamp(t, 0.0, t_end) / dt;
        int i = std::min(static_cast<int>(s), static_cast<int>(radius.size()) - 2);
        double a = s - i;
        return (1.0 - a) * radius[i] + a * radius[i + 1];
    };

    AnalyticDiskComplement S(Vec2::Zero(), r_of);
    const double spread_bound = 2.0;  // assumed sigma(r) <= 2 for all r
    auto B_of = [&](double t_k) {
        double r_k = r_of(t_k);
        return AnalyticDiskComplement(
            Vec2::Zero(), [r_k, t_k, spread_bound](double t) {
                return r_k + spread_bound * (t - t_k);
            });
    };

    // containments at random samples
    for (int s = 0; s < samples; ++s) {
        double t_k = 300.0 * uniform01(rng);
        double t_k1 = t_k + 1.0 + 50.0 * uniform01(rng);
        AnalyticDiskComplement B_k = B_of(t_k);
        AnalyticDiskComplement B_k1 = B_of(std::min(t_k1, t_end));
        double t = std::min(t_k1, t_end) + 80.0 * uniform01(rng);

        double ang = 2.0 * M_PI * uniform01(rng);
        double rad = 1500.0 * uniform01(rng);
        Vec2 p(rad * std::cos(ang), rad * std::sin(ang));

        ++rep.containment_samples;
        if (B_k.contains(p, t) && !S.contains(p, t)) rep.bk_in_s = false;
        if (B_k.contains(p, t) && !B_k1.contains(p, t)) rep.bk_nested = false;

        // C_k membership implies position safety
        double r_k = r_of(t_k);
        Vec2 n_k(std::cos(ang), std::sin(ang));
        MovingBall C(n_k, r_k, t_k);
        Vec center = C.center(t);
        Vec state = center + DisturbanceSpec::sample_in_ball(rng, 4, 1.0);
        if (C.contains(state, t) && !S.contains(state.head<2>(), t)) rep.ck_in_s = false;
    }

    // MovingBall invariance and fixed-time reachability under the LQR backup
    Eigen::Matrix<double, 2, 4> K = double_integrator_lqr_gain();
    DoubleIntegrator plant;
    const double T_B = 10.0;
    for (int trial = 0; trial < trials; ++trial) {
        double t_k = 200.0 * uniform01(rng);
        double r_k = r_of(t_k);
        double ang = 2.0 * M_PI * uniform01(rng);
        Vec2 n_k(std::cos(ang), std::sin(ang));
        Vec anchor(4);
        anchor << (1.0 + r_k) * n_k.x(), (1.0 + r_k) * n_k.y(), 2.0 * n_k.x(), 2.0 * n_k.y();
        RadialBackupPolicy pi(anchor, r_k, t_k, K);
        MovingBall C(n_k, r_k, t_k);

        // invariance: start inside, stay inside
        Vec x0 = C.center(t_k) + DisturbanceSpec::sample_in_ball(rng, 4, 1.0);
        Policy pol = [&pi](double t, const Vec& x) { return pi(t, x); };
        Trajectory traj = integrate_zoh(plant.dynamics(), x0, pol,
                                        TimeGrid(t_k, 0.02, 1000));
        for (int i = 0; i <= traj.grid.n_steps; ++i) {
            if (!C.contains(traj.states[i], traj.grid.time(i), -1e-6)) {
                rep.ball_invariant = false;
                break;
            }
        }

        // reachability: from a neighborhood (||e0|| <= 5), inside C_k at
        // exactly t_k + T_B
        Vec xn = C.center(t_k) + DisturbanceSpec::sample_in_ball(rng, 4, 5.0);
        Trajectory reach = integrate_zoh(plant.dynamics(), xn, pol,
                                         TimeGrid(t_k, 0.02, static_cast<int>(T_B / 0.02)));
        if (!C.contains(reach.states.back(), t_k + T_B, 0.0)) rep.reach_in_tb = false;
        ++rep.invariance_trials;
    }
    return rep;
}

}  // namespace gk
