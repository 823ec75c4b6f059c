#include "gk/gatekeeper.hpp"
#include "gk/vehicles.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace gk;

namespace {

// half plane x >= 0 is safe; static environment
class HalfPlane : public TimeVaryingSet {
public:
    double signed_distance(const Vec2& p, double) const override { return p.x(); }
};

struct DiRig {
    DoubleIntegrator plant;
    Eigen::Matrix<double, 2, 4> K = double_integrator_lqr_gain();
    GatekeeperConfig cfg;
    std::shared_ptr<HalfPlane> wall = std::make_shared<HalfPlane>();

    DiRig() {
        plant.a_max = 2.0;
        cfg.T_H = 4.0;
        cfg.T_B = 4.0;
        cfg.N = 4;
        cfg.dt = 0.05;
        cfg.iss = IssBound(1.5, 1.0, 1.0);
        cfg.mode = ValidityMode::Robust;
    }

    GatekeeperProblem problem() const {
        GatekeeperProblem prob;
        prob.f = plant.dynamics();
        prob.tracking_law = [](const Vec& x, const Vec& ref) {
            return di_tracking_control(4.0, 4.0, x, ref);
        };
        auto Kc = K;
        auto amax = plant.a_max;
        prob.backup_factory = [Kc, amax](const BackupRequest& req) {
            StopBackupPolicy pol(req.x_switch, amax, Kc, 0.1, 0.5);
            BackupInstance inst;
            inst.policy = [pol](double t, const Vec& x) { return pol(t, x); };
            inst.set = pol.backup_set();
            return inst;
        };
        return prob;
    }
};

// straight constant-velocity nominal along +x
Trajectory straight_nominal(const Vec& x0, double vx, double t_k, double T_H, double dt) {
    int n = static_cast<int>(std::llround(T_H / dt));
    Trajectory traj;
    traj.grid = TimeGrid(t_k, dt, n);
    traj.inputs.assign(n, Vec::Zero(2));
    for (int i = 0; i <= n; ++i) {
        Vec s(4);
        s << x0(0) + vx * (traj.grid.time(i) - t_k), x0(1), vx, 0.0;
        traj.states.push_back(s);
    }
    return traj;
}

Vec di_state(double px, double py, double vx, double vy) {
    Vec x(4);
    x << px, py, vx, vy;
    return x;
}

}  // namespace

TEST_CASE("candidate construction: grid arithmetic and pure-backup degenerate case") {
    DiRig rig;
    GatekeeperProblem prob = rig.problem();
    Vec x0 = di_state(5.0, 0.0, 1.0, 0.0);
    Trajectory nom = straight_nominal(x0, 1.0, 0.0, rig.cfg.T_H, rig.cfg.dt);

    Policy backup = [&](double, const Vec& x) { return Vec(-rig.K * x); };
    Trajectory cand = build_candidate(rig.cfg, prob.f, prob.tracking_law, backup, nom, x0,
                                      0.0, 2.0);
    CHECK(cand.grid.n_steps == static_cast<int>(std::llround((2.0 + 4.0) / 0.05)));
    CHECK(*cand.switch_index == 40);
    CHECK((cand.states.front() - x0).norm() == 0.0);

    Trajectory pure = build_candidate(rig.cfg, prob.f, prob.tracking_law, backup, nom, x0,
                                      0.0, 0.0);
    CHECK(*pure.switch_index == 0);
    CHECK(pure.grid.span() == doctest::Approx(4.0));
}

TEST_CASE("validity checks: pass, interior graze, terminal miss") {
    DiRig rig;
    HalfPlane wall;

    // trajectory cruising far from the wall, ending stopped
    Vec x0 = di_state(10.0, 0.0, 0.5, 0.0);
    GatekeeperProblem prob = rig.problem();
    Trajectory nom = straight_nominal(x0, 0.5, 0.0, rig.cfg.T_H, rig.cfg.dt);
    BackupInstance bk;
    CandidateReport fused =
        evaluate_candidate(rig.cfg, prob, nom, x0, 0.0, 2.0, wall, &bk);
    REQUIRE(fused.valid());
    CandidateReport plain = check_valid(fused.traj, wall, *bk.set, fused.traj.grid.t_end());
    CHECK(plain.valid());

    // interior graze: drive toward the wall and cross it mid-flight
    Vec x1 = di_state(1.0, 0.0, -1.5, 0.0);
    Trajectory nom_in = straight_nominal(x1, -1.5, 0.0, rig.cfg.T_H, rig.cfg.dt);
    CandidateReport graze = evaluate_candidate(rig.cfg, prob, nom_in, x1, 0.0, 4.0, wall);
    CHECK(graze.verdict == Verdict::RejectedTube);
    CHECK(graze.fail_time > 0.0);
    CHECK(graze.fail_pos.x() <= rig.cfg.R() + wall.query_pad() + 0.05);

    // terminal miss: valid tube but the backup set sits outside C at t_kB
    StopBall tiny(Vec2(1e6, 0.0), 0.1, 0.5);  // nowhere near the trajectory
    CandidateReport miss = check_valid(fused.traj, wall, tiny, fused.traj.grid.t_end());
    CHECK(miss.verdict == Verdict::RejectedTerminal);
}

TEST_CASE("zero-margin robust check degenerates exactly to the nominal check") {
    DiRig rig;
    rig.cfg.r = 0.0;
    rig.cfg.w_bar = 0.0;
    HalfPlane wall;
    GatekeeperProblem prob = rig.problem();
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        Vec x0 = di_state(0.5 + 4.0 * uniform01(rng), 0.0, -1.0 + 2.0 * uniform01(rng),
                          0.5 * uniform01(rng));
        Trajectory nom = straight_nominal(x0, x0(2), 0.0, rig.cfg.T_H, rig.cfg.dt);
        BackupInstance bk;
        CandidateReport fused =
            evaluate_candidate(rig.cfg, prob, nom, x0, 0.0, 2.0, wall, &bk);
        if (fused.verdict == Verdict::RejectedPropagation) continue;
        if (!fused.traj.states.empty()) {
            GatekeeperConfig nominal_cfg = rig.cfg;
            nominal_cfg.mode = ValidityMode::Nominal;
            CandidateReport a =
                check_valid(fused.traj, wall, *bk.set, fused.traj.grid.t_end());
            CandidateReport b = check_robustly_valid(fused.traj, wall, *bk.set, rig.cfg);
            CHECK(a.verdict == b.verdict);
        }
    }
}

TEST_CASE("grid search commits the largest valid switch time") {
    DiRig rig;
    GatekeeperProblem prob = rig.problem();

    // far from the wall: everything is valid, i = 0 wins
    Vec x0 = di_state(50.0, 0.0, 1.0, 0.0);
    Trajectory nom = straight_nominal(x0, 1.0, 0.0, rig.cfg.T_H, rig.cfg.dt);
    CommitState st = initialize_commit(rig.cfg, prob, x0, 0.0, rig.wall);
    IterationOutcome out = iterate(st, rig.cfg, prob, nom, x0, 0.0, rig.wall);
    CHECK(out.committed);
    CHECK(out.T_S_star == doctest::Approx(rig.cfg.T_H));
    CHECK(st.commit().T_S == doctest::Approx(4.0));

    // nominal dives straight into the wall: any tracking prefix crosses it,
    // only the pure-backup candidate survives
    Vec x1 = di_state(2.0, 0.0, -1.8, 0.0);
    Trajectory nom_in = straight_nominal(x1, -1.8, 0.0, rig.cfg.T_H, rig.cfg.dt);
    CommitState st2 = initialize_commit(rig.cfg, prob, x1, 0.0, rig.wall);
    IterationOutcome out2 = iterate(st2, rig.cfg, prob, nom_in, x1, 0.0, rig.wall);
    CHECK(out2.committed);
    CHECK(out2.T_S_star == doctest::Approx(0.0));
}

TEST_CASE("rejected-all retains the previous commitment and fires the callback") {
    DiRig rig;
    rig.cfg.r = 0.2;  // R = 0.3: erosion band near the wall
    GatekeeperProblem prob = rig.problem();
    Vec x0 = di_state(30.0, 0.0, 0.0, 0.0);
    CommitState st = initialize_commit(rig.cfg, prob, x0, 0.0, rig.wall);
    Trajectory before = st.commit().traj;

    int callbacks = 0;
    prob.on_rejected_all = [&callbacks](double) { ++callbacks; };
    // estimate deep inside the eroded boundary: every candidate fails at t_k
    Vec bad = di_state(0.01, 0.0, 0.0, 0.0);
    Trajectory nom = straight_nominal(bad, 1.0, 10.0, rig.cfg.T_H, rig.cfg.dt);
    IterationOutcome out = iterate(st, rig.cfg, prob, nom, bad, 10.0, rig.wall);
    CHECK_FALSE(out.committed);
    CHECK(callbacks == 1);
    CHECK(st.commit().traj.grid.t_start == before.grid.t_start);
    CHECK((st.commit().traj.states.back() - before.states.back()).norm() == 0.0);
    CHECK(st.history().back().reject_reason == "tube");
}

TEST_CASE("speculative fan-out selects the same switch time as sequential search") {
    DiRig rig;
    GatekeeperProblem prob = rig.problem();
    Vec x0 = di_state(7.5, 0.0, -1.2, 0.0);
    Trajectory nom = straight_nominal(x0, -1.2, 0.0, rig.cfg.T_H, rig.cfg.dt);

    setenv("GATEKEEPER_THREADS", "1", 1);
    CommitState seq = initialize_commit(rig.cfg, prob, x0, 0.0, rig.wall);
    IterationOutcome a = iterate(seq, rig.cfg, prob, nom, x0, 0.0, rig.wall);
    setenv("GATEKEEPER_THREADS", "3", 1);
    CommitState par = initialize_commit(rig.cfg, prob, x0, 0.0, rig.wall);
    IterationOutcome b = iterate(par, rig.cfg, prob, nom, x0, 0.0, rig.wall);
    unsetenv("GATEKEEPER_THREADS");

    CHECK(a.committed == b.committed);
    CHECK(a.T_S_star == b.T_S_star);
    for (size_t i = 0; i < seq.commit().traj.states.size(); ++i)
        CHECK((seq.commit().traj.states[i] - par.commit().traj.states[i]).norm() == 0.0);
}

TEST_CASE("committed state: stored grid, stop-point extension, radial extension") {
    DiRig rig;
    GatekeeperProblem prob = rig.problem();
    Vec x0 = di_state(20.0, 3.0, 1.0, 0.0);
    CommitState st = initialize_commit(rig.cfg, prob, x0, 0.0, rig.wall);

    // within the stored grid: interpolated stored state
    CHECK((st.committed_state(0.0) - x0).norm() == 0.0);
    double end = st.stored_end();
    CHECK(end == doctest::Approx(4.0));

    // stop backup: far beyond the grid the state holds at the stop point
    Vec far = st.committed_state(end + 10.0);
    Vec farther = st.committed_state(end + 30.0);
    CHECK((far - farther).norm() <= 1e-6);
    CHECK(far.tail<2>().norm() <= 0.05);
    CHECK_THROWS_AS(st.committed_state(-1.0), std::out_of_range);

    // radial backup: the extension keeps tracking the moving reference
    Eigen::Matrix<double, 2, 4> K = rig.K;
    GatekeeperProblem radial_prob = prob;
    radial_prob.backup_factory = [K](const BackupRequest& req) {
        auto pol = std::make_shared<RadialBackupPolicy>(req.x_switch, 100.0, req.t_switch, K);
        BackupInstance inst;
        inst.policy = [pol](double t, const Vec& x) { return (*pol)(t, x); };
        inst.set = pol->backup_set();
        return inst;
    };
    DoubleIntegrator free_plant;  // no saturation so the LQR law is exact
    radial_prob.f = free_plant.dynamics();
    Vec xr = di_state(101.0, 0.0, 2.0, 0.0);
    CommitState str = initialize_commit(rig.cfg, radial_prob, xr, 0.0, rig.wall);
    double te = str.stored_end() + 25.0;
    Vec xe = str.committed_state(te);
    Vec ref(4);
    ref << 101.0 + 2.0 * te, 0.0, 2.0, 0.0;
    CHECK((xe - ref).norm() <= 1.0);  // inside the invariant unit ball
}

TEST_CASE("deadlock regression: naive tube check stalls, the backup margin recovers") {
    // The disturbance scenario of the robustified check. R = 0.3, r = 0.2,
    // stop ball radius 0.1. With the naive tube-only check a commitment may
    // stop with only R of clearance; once the estimate drifts r toward the
    // boundary, every new candidate starts inside the eroded band and is
    // rejected forever. The backup-margin check forces R + r clearance at
    // commit time, leaving room to commit again.
    DiRig rig;
    rig.cfg.r = 0.2;
    rig.cfg.w_bar = 0.0;
    rig.cfg.iss = IssBound(1.5, 1.0, 1.0);  // R = 1.5 * 0.2 = 0.3
    const double R = rig.cfg.R();
    CHECK(R == doctest::Approx(0.3));
    GatekeeperProblem prob = rig.problem();

    // stage 1: the tube-only verifier accepts a candidate whose stop ball has
    // no margin beyond R, while the robust verifier rejects exactly that
    // candidate for its missing backup margin.
    Vec near_wall = di_state(R + 0.11, 0.0, 0.0, 0.0);  // stops in place
    Trajectory nom = straight_nominal(near_wall, 0.0, 0.0, rig.cfg.T_H, rig.cfg.dt);
    GatekeeperConfig tube_cfg = rig.cfg;
    tube_cfg.mode = ValidityMode::TubeOnly;
    CandidateReport tube_rep =
        evaluate_candidate(tube_cfg, prob, nom, near_wall, 0.0, 0.0, *rig.wall);
    CHECK(tube_rep.valid());
    GatekeeperConfig robust_cfg = rig.cfg;
    CandidateReport robust_rep =
        evaluate_candidate(robust_cfg, prob, nom, near_wall, 0.0, 0.0, *rig.wall);
    CHECK(robust_rep.verdict == Verdict::RejectedBackupMargin);

    // stage 2: after convergence the estimate sits r closer to the boundary
    // than the committed stop point. Tube-only world: stop point at R + eps,
    // estimate at R + eps - r < R, so even an outbound nominal is rejected at
    // its first sample. Robust world: stop point at >= R + r + rho, estimate
    // at >= R + rho, and the outbound candidate commits.
    Trajectory outbound_tube = straight_nominal(di_state(R + 0.11 - 0.2, 0.0, 0.5, 0.0),
                                                0.5, 100.0, rig.cfg.T_H, rig.cfg.dt);
    Vec est_tube = di_state(R + 0.11 - 0.2, 0.0, 0.0, 0.0);
    CommitState st_tube = initialize_commit(tube_cfg, prob, di_state(30.0, 0.0, 0.0, 0.0),
                                            0.0, rig.wall);
    IterationOutcome stalled =
        iterate(st_tube, tube_cfg, prob, outbound_tube, est_tube, 100.0, rig.wall);
    CHECK_FALSE(stalled.committed);
    CHECK(stalled.first_verdict == Verdict::RejectedTube);

    double robust_stop = R + rig.cfg.r + 0.1 + 0.01;  // what stage 1 enforces
    Vec est_robust = di_state(robust_stop - 0.2, 0.0, 0.0, 0.0);
    Trajectory outbound_rob = straight_nominal(est_robust, 0.5, 100.0, rig.cfg.T_H,
                                               rig.cfg.dt);
    CommitState st_rob = initialize_commit(robust_cfg, prob, di_state(30.0, 0.0, 0.0, 0.0),
                                           0.0, rig.wall);
    IterationOutcome recovered =
        iterate(st_rob, robust_cfg, prob, outbound_rob, est_robust, 100.0, rig.wall);
    CHECK(recovered.committed);
    CHECK(recovered.T_S_star > 0.0);
}

TEST_CASE("startup without a valid backup-only candidate fails loudly") {
    DiRig rig;
    GatekeeperProblem prob = rig.problem();
    Vec inside = di_state(-5.0, 0.0, 0.0, 0.0);
    CHECK_THROWS_AS(initialize_commit(rig.cfg, prob, inside, 0.0, rig.wall),
                    StartupCommitmentError);
    CommitState uninitialized;
    Trajectory nom = straight_nominal(inside, 0.0, 0.0, rig.cfg.T_H, rig.cfg.dt);
    CHECK_THROWS_AS(iterate(uninitialized, rig.cfg, prob, nom, inside, 0.0, rig.wall),
                    std::logic_error);
}
