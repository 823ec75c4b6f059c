#pragma once

#include "gk/fire_mission.hpp"

namespace gk {

/// Every sampled committed state, including two backup horizons of
/// extension, must lie in the true safe set of the (re-simulated) fire.
struct Theorem1Report {
    bool ok = true;
    int samples = 0;
    int violations = 0;
    double min_sd = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    Vec2 worst_p = Vec2::Zero();
};
Theorem1Report verify_theorem1(const MissionArtifacts& art, double sample_dt = 1.0);

/// Disturbance-free closed loop replays the committed trajectory to
/// integration tolerance.
struct Theorem2Report {
    bool ok = true;
    double max_err = 0.0;
    double tol = 0.0;
};
Theorem2Report verify_theorem2(const MissionArtifacts& art);

/// Perturbed runs stay within the tube radius R of the committed trajectory
/// and inside the true safe set.
struct Theorem3Report {
    bool ok = true;
    int runs = 0;
    int tube_violations = 0;
    int safety_violations = 0;
    double max_err = 0.0;
    double R = 0.0;
};
Theorem3Report verify_theorem3(const ScenarioConfig& base, int n_runs, uint64_t seed0);

/// Analytic worked-example family: radially spreading fire with hidden
/// sigma(r) <= 2 m/s, perceived sets from radius measurements, radial-escape
/// LQR backup with the unit moving ball.
struct AppendixOracleReport {
    bool bk_in_s = true;         // B_k(t) subset of S(t)
    bool bk_nested = true;       // B_k(t) subset of B_{k+1}(t)
    bool ck_in_s = true;         // C_k(t) subset of S(t)
    bool ball_invariant = true;  // MovingBall invariance under the LQR backup
    bool reach_in_tb = true;     // C_k reached within exactly T_B from a neighborhood
    int containment_samples = 0;
    int invariance_trials = 0;
    bool ok() const { return bk_in_s && bk_nested && ck_in_s && ball_invariant && reach_in_tb; }
};
AppendixOracleReport run_appendix_oracle(int samples = 1500, int trials = 120,
                                         uint64_t seed = 7);

}  // namespace gk
