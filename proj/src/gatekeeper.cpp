#include "gk/gatekeeper.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

namespace gk {

void GatekeeperConfig::validate() const {
    if (!(T_H > 0.0) || !(T_B > 0.0)) throw std::invalid_argument("GatekeeperConfig: horizons must be > 0");
    if (N < 1) throw std::invalid_argument("GatekeeperConfig: N must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("GatekeeperConfig: dt must be > 0");
    if (r < 0.0 || w_bar < 0.0) throw std::invalid_argument("GatekeeperConfig: r, w_bar must be >= 0");
    if (sub_samples < 1) throw std::invalid_argument("GatekeeperConfig: sub_samples must be >= 1");
    auto aligned = [this](double T) {
        double s = T / dt;
        return std::abs(s - std::llround(s)) <= 1e-6;
    };
    if (!aligned(T_B)) throw std::invalid_argument("GatekeeperConfig: T_B not grid-aligned");
    if (!aligned(T_H / N)) throw std::invalid_argument("GatekeeperConfig: T_H/N not grid-aligned");
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Valid: return "valid";
        case Verdict::RejectedTube: return "tube";
        case Verdict::RejectedTerminal: return "terminal";
        case Verdict::RejectedBackupMargin: return "backup-margin";
        case Verdict::RejectedPropagation: return "propagation";
    }
    return "?";
}

int gatekeeper_threads() {
    if (const char* e = std::getenv("GATEKEEPER_THREADS")) {
        int n = std::atoi(e);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

Vec2 pos_of(const Vec& x) { return x.head<2>(); }

// Tube membership along the segment from (ta, xa) to (tb, xb): endpoint plus
// sub-sampled interior points on the linear interpolant.
bool segment_in_tube(const TimeVaryingSet& B, const Vec& xa, const Vec& xb, double ta,
                     double tb, double margin, int sub, double* fail_t, Vec2* fail_p) {
    for (int j = 1; j <= sub; ++j) {
        double a = static_cast<double>(j) / (sub + 1);
        Vec2 p = (1.0 - a) * pos_of(xa) + a * pos_of(xb);
        double t = (1.0 - a) * ta + a * tb;
        if (!B.contains(p, t, margin)) {
            *fail_t = t;
            *fail_p = p;
            return false;
        }
    }
    if (!B.contains(pos_of(xb), tb, margin)) {
        *fail_t = tb;
        *fail_p = pos_of(xb);
        return false;
    }
    return true;
}

// Backup-margin condition: C_k clears R + r (+pad) in the perceived set over
// [t_k, t_kB + T_B]. Sampled; the mission's backup-set variants have
// non-decreasing clearance in t, so the sampling is a safe witness.
bool backup_margin_ok(const BackupSet& C, const TimeVaryingSet& B, double t_k,
                      double t_kB, double T_B, double need, double* fail_t) {
    const int n_samples = 17;
    double t_hi = t_kB + T_B;
    for (int i = 0; i < n_samples; ++i) {
        double t = t_k + (t_hi - t_k) * static_cast<double>(i) / (n_samples - 1);
        if (C.min_forecast_clearance(B, t) < need) {
            *fail_t = t;
            return false;
        }
    }
    return true;
}

}  // namespace

Trajectory build_candidate(const GatekeeperConfig& cfg, const Dynamics& f,
                           const TrackingLaw& tracking_law, const Policy& backup_policy,
                           const Trajectory& p_nom, const Vec& x_start, double t_k,
                           double T_S) {
    if (T_S < -1e-12 || T_S > cfg.T_H + 1e-9)
        throw std::invalid_argument("build_candidate: T_S outside [0, T_H]");
    Policy pi_track = [&tracking_law, &p_nom](double t, const Vec& x) {
        return tracking_law(x, p_nom.state_at(t));
    };
    return integrate_switched(f, x_start, pi_track, backup_policy, t_k, T_S, cfg.T_B,
                              cfg.dt);
}

CandidateReport check_valid(const Trajectory& candidate, const TimeVaryingSet& B_k,
                            const BackupSet& C_k, double t_kB, int sub_samples) {
    CandidateReport rep;
    rep.traj = candidate;
    rep.T_S = candidate.switch_index ? *candidate.switch_index * candidate.grid.dt : 0.0;
    const double margin = B_k.query_pad();

    const TimeGrid& g = candidate.grid;
    if (!B_k.contains(pos_of(candidate.states[0]), g.t_start, margin)) {
        rep.verdict = Verdict::RejectedTube;
        rep.fail_time = g.t_start;
        rep.fail_pos = pos_of(candidate.states[0]);
        return rep;
    }
    for (int i = 0; i < g.n_steps; ++i) {
        if (!segment_in_tube(B_k, candidate.states[i], candidate.states[i + 1], g.time(i),
                             g.time(i + 1), margin, sub_samples, &rep.fail_time,
                             &rep.fail_pos)) {
            rep.verdict = Verdict::RejectedTube;
            return rep;
        }
    }
    if (!C_k.contains(candidate.states.back(), t_kB, 0.0)) {
        rep.verdict = Verdict::RejectedTerminal;
        rep.fail_time = t_kB;
        rep.fail_pos = pos_of(candidate.states.back());
        return rep;
    }
    rep.verdict = Verdict::Valid;
    return rep;
}

CandidateReport check_robustly_valid(const Trajectory& candidate,
                                     const TimeVaryingSet& B_k, const BackupSet& C_k,
                                     const GatekeeperConfig& cfg) {
    CandidateReport rep;
    rep.traj = candidate;
    rep.T_S = candidate.switch_index ? *candidate.switch_index * candidate.grid.dt : 0.0;
    const double pad = B_k.query_pad();
    const double margin = cfg.R() + pad;
    const TimeGrid& g = candidate.grid;
    const double t_kB = g.t_end();

    if (!B_k.contains(pos_of(candidate.states[0]), g.t_start, margin)) {
        rep.verdict = Verdict::RejectedTube;
        rep.fail_time = g.t_start;
        rep.fail_pos = pos_of(candidate.states[0]);
        return rep;
    }
    for (int i = 0; i < g.n_steps; ++i) {
        if (!segment_in_tube(B_k, candidate.states[i], candidate.states[i + 1], g.time(i),
                             g.time(i + 1), margin, cfg.sub_samples, &rep.fail_time,
                             &rep.fail_pos)) {
            rep.verdict = Verdict::RejectedTube;
            return rep;
        }
    }
    if (!C_k.contains(candidate.states.back(), t_kB, 0.0)) {
        rep.verdict = Verdict::RejectedTerminal;
        rep.fail_time = t_kB;
        rep.fail_pos = pos_of(candidate.states.back());
        return rep;
    }
    if (cfg.mode == ValidityMode::Robust) {
        double need = cfg.R() + cfg.r + pad;
        if (!backup_margin_ok(C_k, B_k, g.t_start, t_kB, cfg.T_B, need, &rep.fail_time)) {
            rep.verdict = Verdict::RejectedBackupMargin;
            return rep;
        }
    }
    rep.verdict = Verdict::Valid;
    return rep;
}

CandidateReport evaluate_candidate(const GatekeeperConfig& cfg,
                                   const GatekeeperProblem& prob,
                                   const Trajectory& p_nom, const Vec& x_start,
                                   double t_k, double T_S, const TimeVaryingSet& B_k,
                                   BackupInstance* out_backup) {
    CandidateReport rep;
    rep.T_S = T_S;
    const double pad = B_k.query_pad();
    const double tube_margin = (cfg.mode == ValidityMode::Nominal ? 0.0 : cfg.R()) + pad;
    const int n_track = static_cast<int>(std::llround(T_S / cfg.dt));
    const int n_backup = static_cast<int>(std::llround(cfg.T_B / cfg.dt));
    const double t_kB = t_k + (n_track + n_backup) * cfg.dt;

    if (!B_k.contains(pos_of(x_start), t_k, tube_margin)) {
        rep.verdict = Verdict::RejectedTube;
        rep.fail_time = t_k;
        rep.fail_pos = pos_of(x_start);
        return rep;
    }

    Trajectory traj;
    traj.grid = TimeGrid(t_k, cfg.dt, n_track + n_backup);
    traj.switch_index = n_track;
    traj.states.reserve(traj.grid.n_steps + 1);
    traj.inputs.reserve(traj.grid.n_steps);
    traj.states.push_back(x_start);

    BackupInstance backup;
    Vec x = x_start;
    try {
        for (int i = 0; i < traj.grid.n_steps; ++i) {
            double t = traj.grid.time(i);
            Vec u;
            if (i < n_track) {
                u = prob.tracking_law(x, p_nom.state_at(t));
            } else {
                if (i == n_track) {
                    backup = prob.backup_factory({t_k, x_start, t, x});
                    if (!backup.policy || !backup.set)
                        throw std::logic_error("backup_factory returned empty instance");
                }
                u = backup.policy(t, x);
            }
            if (!u.allFinite()) throw PropagationError(t, "non-finite input");
            Vec x_next = rk4_held_step(prob.f, x, u, cfg.dt);
            if (!x_next.allFinite())
                throw PropagationError(traj.grid.time(i + 1), "non-finite state");
            if (!segment_in_tube(B_k, x, x_next, t, traj.grid.time(i + 1), tube_margin,
                                 cfg.sub_samples, &rep.fail_time, &rep.fail_pos)) {
                rep.verdict = Verdict::RejectedTube;
                return rep;
            }
            traj.inputs.push_back(u);
            traj.states.push_back(x_next);
            x = x_next;
        }
    } catch (const PropagationError& e) {
        rep.verdict = Verdict::RejectedPropagation;
        rep.fail_time = e.t_fail;
        rep.detail = e.what();
        return rep;
    }

    if (!backup.set->contains(x, t_kB, 0.0)) {
        rep.verdict = Verdict::RejectedTerminal;
        rep.fail_time = t_kB;
        rep.fail_pos = pos_of(x);
        return rep;
    }
    if (cfg.mode == ValidityMode::Robust) {
        double need = cfg.R() + cfg.r + pad;
        if (!backup_margin_ok(*backup.set, B_k, t_k, t_kB, cfg.T_B, need, &rep.fail_time)) {
            rep.verdict = Verdict::RejectedBackupMargin;
            return rep;
        }
    }
    rep.verdict = Verdict::Valid;
    rep.traj = std::move(traj);
    if (out_backup) *out_backup = std::move(backup);
    return rep;
}

CommitState::CommitState(Commit first)
    : commit_(std::make_shared<Commit>(std::move(first))),
      extension_(std::make_shared<Extension>()) {}

const Commit& CommitState::commit() const {
    if (!commit_) throw std::logic_error("CommitState: not initialized");
    return *commit_;
}

double CommitState::stored_end() const { return commit().traj.grid.t_end(); }

void CommitState::replace(Commit next) {
    if (!commit_) throw std::logic_error("CommitState: not initialized");
    commit_ = std::make_shared<Commit>(std::move(next));
    extension_ = std::make_shared<Extension>();
}

Vec CommitState::committed_input(double t) const {
    const Commit& c = commit();
    const double slack = 1e-9 * std::max(1.0, std::abs(t));
    if (t < c.traj.grid.t_start - slack || t >= c.traj.grid.t_end() - slack)
        throw std::out_of_range("committed_input: t outside stored grid");
    double s = (t - c.traj.grid.t_start) / c.traj.grid.dt;
    int i = std::clamp(static_cast<int>(std::floor(s + 1e-9)), 0, c.traj.grid.n_steps - 1);
    return c.traj.inputs[i];
}

Vec CommitState::committed_state(double t) const {
    const Commit& c = commit();
    const double slack = 1e-9 * std::max(1.0, std::abs(t));
    if (t < c.traj.grid.t_start - slack)
        throw std::out_of_range("committed_state: t before commit time");
    if (t <= c.traj.grid.t_end() + slack) {
        return c.traj.state_at(std::min(t, c.traj.grid.t_end()));
    }
    Extension& ext = *extension_;
    std::lock_guard<std::mutex> lock(ext.mutex);
    if (ext.states.empty()) {
        ext.t0 = c.traj.grid.t_end();
        ext.dt = c.traj.grid.dt;
        ext.states.push_back(c.traj.states.back());
    }
    while (ext.t0 + (ext.states.size() - 1) * ext.dt < t) {
        double ti = ext.t0 + (ext.states.size() - 1) * ext.dt;
        const Vec& xi = ext.states.back();
        Vec u = c.backup(ti, xi);
        ext.states.push_back(rk4_held_step(c.f, xi, u, ext.dt));
    }
    double s = (t - ext.t0) / ext.dt;
    int i = std::min(static_cast<int>(std::floor(s)),
                     static_cast<int>(ext.states.size()) - 2);
    i = std::max(i, 0);
    double a = std::clamp(s - i, 0.0, 1.0);
    return (1.0 - a) * ext.states[i] + a * ext.states[i + 1];
}

IterationOutcome iterate(CommitState& state, const GatekeeperConfig& cfg,
                         const GatekeeperProblem& prob, const Trajectory& p_nom,
                         const Vec& x_hat, double t_k,
                         std::shared_ptr<const TimeVaryingSet> B_k) {
    if (!state.initialized()) throw std::logic_error("iterate: CommitState not initialized");
    cfg.validate();
    auto t_begin = std::chrono::steady_clock::now();

    IterationOutcome outcome;
    const int threads = gatekeeper_threads();

    struct Eval {
        CandidateReport report;
        BackupInstance backup;
    };
    auto run_one = [&](int i) {
        Eval e;
        double T_S = (1.0 - static_cast<double>(i) / cfg.N) * cfg.T_H;
        e.report = evaluate_candidate(cfg, prob, p_nom, x_hat, t_k, T_S, *B_k, &e.backup);
        return e;
    };

    std::optional<Eval> chosen;
    for (int start = 0; start <= cfg.N && !chosen; start += threads) {
        int end = std::min(cfg.N, start + threads - 1);
        std::vector<Eval> batch(end - start + 1);
        if (threads == 1 || end == start) {
            for (int i = start; i <= end; ++i) batch[i - start] = run_one(i);
        } else {
            std::vector<std::future<Eval>> futs;
            futs.reserve(end - start + 1);
            for (int i = start; i <= end; ++i)
                futs.push_back(std::async(std::launch::async, run_one, i));
            for (int i = start; i <= end; ++i) batch[i - start] = futs[i - start].get();
        }
        for (int i = start; i <= end; ++i) {
            Eval& e = batch[i - start];
            if (i == 0) outcome.first_verdict = e.report.verdict;
            ++outcome.candidates_evaluated;
            if (e.report.valid()) {
                chosen = std::move(e);
                break;
            }
        }
    }

    IterationRecord rec;
    rec.k = state.iteration_counter() + 1;
    rec.t_k = t_k;
    if (chosen) {
        Commit next;
        next.traj = std::move(chosen->report.traj);
        next.backup = std::move(chosen->backup.policy);
        next.set = std::move(chosen->backup.set);
        next.f = prob.f;
        next.t_commit = t_k;
        next.T_S = chosen->report.T_S;
        state.replace(std::move(next));
        outcome.committed = true;
        outcome.T_S_star = chosen->report.T_S;
        rec.committed = true;
        rec.T_S_star = outcome.T_S_star;
        rec.reject_reason = "";
    } else {
        // Eq. 21: keep the previous commitment.
        rec.committed = false;
        rec.reject_reason = verdict_name(outcome.first_verdict);
        if (prob.on_rejected_all) prob.on_rejected_all(t_k);
    }
    state.iteration_counter() += 1;

    auto t_done = std::chrono::steady_clock::now();
    outcome.compute_ms =
        std::chrono::duration<double, std::milli>(t_done - t_begin).count();
    rec.compute_ms = outcome.compute_ms;
    state.record(std::move(rec));
    return outcome;
}

CommitState initialize_commit(const GatekeeperConfig& cfg, const GatekeeperProblem& prob,
                              const Vec& x0, double t0,
                              std::shared_ptr<const TimeVaryingSet> B_0) {
    cfg.validate();
    Trajectory unused;
    BackupInstance backup;
    CandidateReport rep =
        evaluate_candidate(cfg, prob, unused, x0, t0, 0.0, *B_0, &backup);
    if (!rep.valid())
        throw StartupCommitmentError(
            std::string("initial backup-only candidate rejected (") +
            verdict_name(rep.verdict) + " at t=" + std::to_string(rep.fail_time) + ")");
    Commit first;
    first.traj = std::move(rep.traj);
    first.backup = std::move(backup.policy);
    first.set = std::move(backup.set);
    first.f = prob.f;
    first.t_commit = t0;
    first.T_S = 0.0;
    return CommitState(std::move(first));
}

}  // namespace gk
