#pragma once

#include "gk/ode.hpp"
#include "gk/sets.hpp"

#include <memory>
#include <mutex>

namespace gk {

/// Startup could not certify even the pure-backup initial trajectory.
struct StartupCommitmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Which validity definition the verifier applies. TubeOnly is the naive
/// robustification (tube of radius R but no backup-set margin); it exists to
/// demonstrate the deadlock it causes.
enum class ValidityMode { Nominal, TubeOnly, Robust };

struct GatekeeperConfig {
    double T_H = 120.0;
    double T_B = 120.0;
    int N = 10;
    double dt = 0.05;
    double r = 0.0;      // initial estimate-error bound
    double w_bar = 0.0;  // disturbance bound
    IssBound iss;
    ValidityMode mode = ValidityMode::Robust;
    int sub_samples = 4;  // interior tube-check points per step

    /// Tube radius R = beta(r, 0) + gamma(w_bar); zero in Nominal mode.
    double R() const {
        return mode == ValidityMode::Nominal ? 0.0 : iss.tube_radius(r, w_bar);
    }
    void validate() const;
};

enum class Verdict {
    Valid,
    RejectedTube,
    RejectedTerminal,
    RejectedBackupMargin,
    RejectedPropagation,
};

const char* verdict_name(Verdict v);

struct CandidateReport {
    double T_S = 0.0;
    Verdict verdict = Verdict::RejectedPropagation;
    double fail_time = 0.0;
    Vec2 fail_pos = Vec2::Zero();
    std::string detail;
    Trajectory traj;  // populated when propagation succeeded

    bool valid() const { return verdict == Verdict::Valid; }
};

/// Everything a backup policy may bind per candidate: the iteration anchor
/// (t_k, x_k) and the state the candidate reaches at the switch instant.
struct BackupRequest {
    double t_k = 0.0;
    Vec x_k;
    double t_switch = 0.0;
    Vec x_switch;
};

struct BackupInstance {
    Policy policy;
    std::shared_ptr<BackupSet> set;
};

using BackupFactory = std::function<BackupInstance(const BackupRequest&)>;
using TrackingLaw = std::function<Vec(const Vec& x, const Vec& ref_state)>;

/// Vehicle bindings the gatekeeper iterates with.
struct GatekeeperProblem {
    Dynamics f;
    TrackingLaw tracking_law;
    BackupFactory backup_factory;
    std::function<void(double t_k)> on_rejected_all;  // optional
};

/// Forward-propagate the candidate: track p_nom until t_k + T_S, then run the
/// backup policy for T_B. Dynamically feasible by construction.
Trajectory build_candidate(const GatekeeperConfig& cfg, const Dynamics& f,
                           const TrackingLaw& tracking_law, const Policy& backup_policy,
                           const Trajectory& p_nom, const Vec& x_start, double t_k,
                           double T_S);

/// Nominal validity (no margins): candidate inside B_k over the whole span
/// (grid points plus sub-samples), terminal state inside C_k at t_kB.
CandidateReport check_valid(const Trajectory& candidate,
                            const TimeVaryingSet& B_k, const BackupSet& C_k,
                            double t_kB, int sub_samples = 4);

/// Robust validity: tube of radius R inside B_k, terminal in C_k, and C_k at
/// least R + r clear of the perceived boundary over [t_k, t_kB + T_B]
/// (TubeOnly skips the last check).
CandidateReport check_robustly_valid(const Trajectory& candidate,
                                     const TimeVaryingSet& B_k, const BackupSet& C_k,
                                     const GatekeeperConfig& cfg);

struct IterationRecord {
    int k = 0;
    double t_k = 0.0;
    double T_S_star = -1.0;
    bool committed = false;
    std::string reject_reason;
    double compute_ms = 0.0;
};

/// A committed trajectory plus what is needed to extend it: the backup policy
/// that generated its tail and the plant dynamics.
struct Commit {
    Trajectory traj;
    Policy backup;
    std::shared_ptr<BackupSet> set;
    Dynamics f;
    double t_commit = 0.0;
    double T_S = 0.0;
};

/// Gatekeeper iteration state. The committed trajectory is replaced only by a
/// candidate that passed the active validity check; queries beyond the stored
/// grid extend it by propagating the stored backup policy on demand.
class CommitState {
public:
    CommitState() = default;
    explicit CommitState(Commit first);

    bool initialized() const { return static_cast<bool>(commit_); }
    const Commit& commit() const;
    int k() const { return k_; }
    double stored_end() const;

    /// State of the committed trajectory at t >= commit time; domain is
    /// [t_commit, infinity) via backup extension.
    Vec committed_state(double t) const;
    /// Stored generating input for the step containing t (feedforward term).
    /// Only defined within the stored grid.
    Vec committed_input(double t) const;
    /// Backup input at time t (for executing the tail directly).
    Vec backup_input(double t, const Vec& x) const { return commit().backup(t, x); }

    void replace(Commit next);
    void record(IterationRecord rec) { history_.push_back(std::move(rec)); }
    const std::vector<IterationRecord>& history() const { return history_; }
    int& iteration_counter() { return k_; }

private:
    struct Extension {
        std::mutex mutex;
        std::vector<Vec> states;  // from stored_end, step dt
        double t0 = 0.0;
        double dt = 0.0;
    };

    std::shared_ptr<Commit> commit_;
    std::shared_ptr<Extension> extension_;
    std::vector<IterationRecord> history_;
    int k_ = 0;
};

struct IterationOutcome {
    bool committed = false;
    double T_S_star = -1.0;
    Verdict first_verdict = Verdict::Valid;  // verdict of the largest-T_S candidate
    int candidates_evaluated = 0;
    double compute_ms = 0.0;
};

/// One gatekeeper iteration: backwards grid search over T_S in
/// {(1 - i/N) T_H : i = 0..N}, largest valid wins; on REJECTED-ALL the
/// previous commitment is retained. Candidate evaluations may fan out over
/// GATEKEEPER_THREADS workers; the selection is by T_S order regardless of
/// completion order.
IterationOutcome iterate(CommitState& state, const GatekeeperConfig& cfg,
                         const GatekeeperProblem& prob, const Trajectory& p_nom,
                         const Vec& x_hat, double t_k,
                         std::shared_ptr<const TimeVaryingSet> B_k);

/// Build and certify the initial T_S = 0 (backup only) commitment; throws
/// StartupCommitmentError if even that candidate is invalid.
CommitState initialize_commit(const GatekeeperConfig& cfg, const GatekeeperProblem& prob,
                              const Vec& x0, double t0,
                              std::shared_ptr<const TimeVaryingSet> B_0);

/// Worker cap for candidate evaluation (env GATEKEEPER_THREADS, default
/// hardware parallelism).
int gatekeeper_threads();

/// Fused propagate-and-check used by iterate: identical verdicts to
/// build_candidate + check, but aborts propagation at the first violation.
CandidateReport evaluate_candidate(const GatekeeperConfig& cfg,
                                   const GatekeeperProblem& prob,
                                   const Trajectory& p_nom, const Vec& x_start,
                                   double t_k, double T_S, const TimeVaryingSet& B_k,
                                   BackupInstance* out_backup = nullptr);

}  // namespace gk
