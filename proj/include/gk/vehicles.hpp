#pragma once

#include "gk/ode.hpp"
#include "gk/sets.hpp"

#include <memory>

namespace gk {

/// Coordinated-turn helicopter. State (x1, x2) position [m], x3 forward
/// speed [m/s], x4 heading [rad]; inputs u1 longitudinal acceleration
/// [m/s^2], u2 roll angle [rad]. The model is singular at x3 = 0, so a speed
/// floor is enforced.
struct HelicopterModel {
    static constexpr int state_dim = 4;
    static constexpr int input_dim = 2;

    double g = 9.81;
    double u1_max = 0.5 * 9.81;
    double u2_max = M_PI / 4.0;
    double speed_floor = 5.0;  // x3_min

    Vec saturate(const Vec& u) const;
    /// dx1 = x3 cos x4, dx2 = x3 sin x4, dx3 = u1, dx4 = (g/x3) tan u2,
    /// with inputs saturated first. Throws PropagationError below the floor.
    Vec rhs(const Vec& x, const Vec& u) const;
    Dynamics dynamics() const;
};

/// Planar double integrator, state [pos; vel] in R^4, input acceleration.
struct DoubleIntegrator {
    static constexpr int state_dim = 4;
    static constexpr int input_dim = 2;

    double a_max = std::numeric_limits<double>::infinity();

    Vec saturate(const Vec& u) const;
    Vec rhs(const Vec& x, const Vec& u) const;
    Dynamics dynamics() const;
    static Eigen::Matrix4d A();
    static Eigen::Matrix<double, 4, 2> B();
};

/// Continuous algebraic Riccati equation via the stable invariant subspace of
/// the Hamiltonian matrix.
Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// LQR gain for the double integrator with Q = I, R = I. Construction asserts
/// the closed loop is strictly stable.
Eigen::Matrix<double, 2, 4> double_integrator_lqr_gain();

struct HeliTrackingGains {
    double kp = 0.5;
    double kd = 1.5;
};

/// Flatness-based PD on the position outputs, mapped to (u1, u2) and
/// saturated. Zero error on a straight constant-speed reference gives zero
/// input. Throws below the speed floor (singular map region).
Vec heli_tracking_control(const HelicopterModel& model, const HeliTrackingGains& gains,
                          const Vec& x_hat, const Vec& ref_state);

/// PD correction mapped to the input channels, without feedforward or
/// saturation.
Vec heli_feedback_correction(const HelicopterModel& model, const HeliTrackingGains& gains,
                             const Vec& x_hat, const Vec& ref_state);

/// Tracking with feedforward: sat(u_ff + correction). With zero error this
/// reproduces the reference's generating input exactly, so a committed
/// trajectory replays bit-for-bit in the disturbance-free loop.
Vec heli_tracking_with_ff(const HelicopterModel& model, const HeliTrackingGains& gains,
                          const Vec& x_hat, const Vec& ref_state, const Vec& u_ff);

/// PD law u = kp (p_ref - p) + kd (v_ref - v) for the double integrator.
Vec di_tracking_control(double kp, double kd, const Vec& x_hat, const Vec& ref_state);

/// Radial-escape LQR backup for the double integrator: track the reference
/// [p_ref(t); 2 n_k] with p_ref(t) = (1 + r_k + 2 (t - t_k)) n_k.
class RadialBackupPolicy {
public:
    /// n_k is the unit vector toward x_k's position; throws on degenerate
    /// geometry (position at the fire center).
    RadialBackupPolicy(const Vec& x_k, double r_k, double t_k,
                       const Eigen::Matrix<double, 2, 4>& K);

    Vec operator()(double t, const Vec& x) const;
    Vec reference(double t) const;
    std::shared_ptr<BackupSet> backup_set() const;

    const Vec2& n_k() const { return n_k_; }

private:
    Vec2 n_k_;
    double r_k_, t_k_;
    Eigen::Matrix<double, 2, 4> K_;
};

/// Stopping backup for the double integrator: saturated deceleration along
/// the current velocity, then an LQR hold at the predicted stop point.
class StopBackupPolicy {
public:
    StopBackupPolicy(const Vec& x_k, double a_max,
                     const Eigen::Matrix<double, 2, 4>& K,
                     double ball_radius = 1.0, double vel_threshold = 0.5);

    Vec operator()(double t, const Vec& x) const;
    std::shared_ptr<BackupSet> backup_set() const;
    const Vec2& stop_pos() const { return stop_pos_; }

private:
    Vec2 stop_pos_;
    double a_max_;
    Eigen::Matrix<double, 2, 4> K_;
    double ball_radius_, vel_threshold_;
};

/// Firewatch escape backup for the helicopter: fly along the outward
/// direction field (gradient of the perceived field, frozen per iteration)
/// at a target speed above the assumed spread rate.
class HeliEscapeBackupPolicy {
public:
    HeliEscapeBackupPolicy(const HelicopterModel& model,
                           std::function<Vec2(const Vec2&)> outward_dir,
                           double v_escape, double k_speed = 1.0, double k_heading = 1.5);

    Vec operator()(double t, const Vec& x) const;

private:
    HelicopterModel model_;
    std::function<Vec2(const Vec2&)> outward_dir_;
    double v_escape_, k_speed_, k_heading_;
};

/// Backup set for the helicopter escape: clearance in the frozen perceived
/// map at least margin_c and outward speed at least speed_min.
class HeliEscapeSet : public BackupSet {
public:
    HeliEscapeSet(std::shared_ptr<const TimeVaryingSet> map,
                  std::function<Vec2(const Vec2&)> outward_dir, double margin_c,
                  double speed_min);

    bool contains(const Vec& state, double t, double margin = 0.0) const override;
    /// Every member clears margin_c in the defining map by construction;
    /// constant in t (the clearance is measured in the forecast metric).
    double min_forecast_clearance(const TimeVaryingSet& B, double t) const override;

    double margin_c() const { return margin_c_; }

private:
    std::shared_ptr<const TimeVaryingSet> map_;
    std::function<Vec2(const Vec2&)> outward_dir_;
    double margin_c_, speed_min_;
};

/// Tracking-error norm used for ISS envelopes. The firewatch scenario uses
/// the position projection (fire safety depends only on position).
double tracking_error(const Vec& x, const Vec& ref, bool position_only);

struct IssCalibrationConfig {
    double duration = 60.0;
    double dt = 0.05;
    double delta_max = 20.0;   // initial position-estimate error bound [m]
    double d_bar_max = 0.5;    // state disturbance level for fitting
    double v_bar_max = 0.5;    // measurement noise level for fitting
    int n_decay_runs = 24;
    int n_disturbed_runs = 24;
    uint64_t seed = 2024;
    double safety_factor = 1.5;
};

struct IssFitReport {
    IssBound bound;
    double fitted_gain = 0.0;
    double fitted_decay = 0.0;
    double fitted_dist_gain = 0.0;
};

/// Fit (M, lambda, c) from tracking experiments on random feasible
/// references, inflated by the safety factor. Position-only norm.
IssFitReport calibrate_iss_helicopter(const HelicopterModel& model,
                                      const HeliTrackingGains& gains,
                                      const IssCalibrationConfig& cfg);

/// Count of envelope exceedances on freshly seeded references; zero means the
/// bound dominates empirically.
int validate_iss_helicopter(const HelicopterModel& model, const HeliTrackingGains& gains,
                            const IssBound& bound, const IssCalibrationConfig& cfg,
                            int n_refs, uint64_t seed);

/// Random dynamically feasible helicopter trajectory (piecewise-constant
/// bounded inputs), used by calibration and tests.
Trajectory random_heli_reference(const HelicopterModel& model, std::mt19937_64& rng,
                                 double duration, double dt);

}  // namespace gk
