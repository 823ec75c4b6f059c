#include "gk/vehicles.hpp"

#include <cmath>

namespace gk {

namespace {

double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

}  // namespace

Vec HelicopterModel::saturate(const Vec& u) const {
    Vec s(2);
    s(0) = std::clamp(u(0), -u1_max, u1_max);
    s(1) = std::clamp(u(1), -u2_max, u2_max);
    return s;
}

Vec HelicopterModel::rhs(const Vec& x, const Vec& u) const {
    if (x(2) < speed_floor - 1e-9)
        throw PropagationError(0.0, "helicopter: speed below floor (model singularity)");
    Vec us = saturate(u);
    Vec dx(4);
    dx(0) = x(2) * std::cos(x(3));
    dx(1) = x(2) * std::sin(x(3));
    dx(2) = us(0);
    dx(3) = (g / x(2)) * std::tan(us(1));
    return dx;
}

Dynamics HelicopterModel::dynamics() const {
    HelicopterModel m = *this;
    return [m](const Vec& x, const Vec& u) { return m.rhs(x, u); };
}

Vec DoubleIntegrator::saturate(const Vec& u) const {
    if (!std::isfinite(a_max)) return u;
    double n = u.norm();
    if (n <= a_max) return u;
    return u * (a_max / n);
}

Vec DoubleIntegrator::rhs(const Vec& x, const Vec& u) const {
    Vec us = saturate(u);
    Vec dx(4);
    dx(0) = x(2);
    dx(1) = x(3);
    dx(2) = us(0);
    dx(3) = us(1);
    return dx;
}

Dynamics DoubleIntegrator::dynamics() const {
    DoubleIntegrator m = *this;
    return [m](const Vec& x, const Vec& u) { return m.rhs(x, u); };
}

Eigen::Matrix4d DoubleIntegrator::A() {
    Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
    a(0, 2) = 1.0;
    a(1, 3) = 1.0;
    return a;
}

Eigen::Matrix<double, 4, 2> DoubleIntegrator::B() {
    Eigen::Matrix<double, 4, 2> b = Eigen::Matrix<double, 4, 2>::Zero();
    b(2, 0) = 1.0;
    b(3, 1) = 1.0;
    return b;
}

Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd Rinv = R.inverse();
    Eigen::MatrixXd H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = A;
    H.topRightCorner(n, n) = -B * Rinv * B.transpose();
    H.bottomLeftCorner(n, n) = -Q;
    H.bottomRightCorner(n, n) = -A.transpose();

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.cast<std::complex<double>>());
    if (es.info() != Eigen::Success)
        throw std::runtime_error("solve_care: eigen decomposition failed");

    Eigen::MatrixXcd U(2 * n, n);
    int k = 0;
    for (int i = 0; i < 2 * n && k < n; ++i) {
        if (es.eigenvalues()(i).real() < 0.0) U.col(k++) = es.eigenvectors().col(i);
    }
    if (k != n) throw std::runtime_error("solve_care: stable subspace has wrong dimension");

    Eigen::MatrixXcd U1 = U.topRows(n);
    Eigen::MatrixXcd U2 = U.bottomRows(n);
    Eigen::MatrixXd P = (U2 * U1.inverse()).real();
    P = 0.5 * (P + P.transpose().eval());

    Eigen::MatrixXd residual =
        A.transpose() * P + P * A - P * B * Rinv * B.transpose() * P + Q;
    if (residual.norm() > 1e-6 * std::max(1.0, Q.norm()))
        throw std::runtime_error("solve_care: residual too large");
    return P;
}

Eigen::Matrix<double, 2, 4> double_integrator_lqr_gain() {
    Eigen::MatrixXd A = DoubleIntegrator::A();
    Eigen::MatrixXd B = DoubleIntegrator::B();
    Eigen::MatrixXd Q = Eigen::Matrix4d::Identity();
    Eigen::MatrixXd R = Eigen::Matrix2d::Identity();
    Eigen::MatrixXd P = solve_care(A, B, Q, R);
    Eigen::Matrix<double, 2, 4> K = (R.inverse() * B.transpose() * P);

    Eigen::Matrix4d Acl = DoubleIntegrator::A() - DoubleIntegrator::B() * K;
    Eigen::EigenSolver<Eigen::Matrix4d> es(Acl);
    for (int i = 0; i < 4; ++i)
        if (es.eigenvalues()(i).real() >= -1e-9)
            throw std::runtime_error("double_integrator_lqr_gain: closed loop not stable");
    return K;
}

Vec heli_feedback_correction(const HelicopterModel& model, const HeliTrackingGains& gains,
                             const Vec& x_hat, const Vec& ref_state) {
    if (x_hat(2) < model.speed_floor - 1e-9)
        throw std::domain_error("heli tracking: speed at floor, flatness map singular");
    if (ref_state(2) < model.speed_floor - 1e-9)
        throw std::domain_error("heli tracking: reference speed below floor");

    Vec2 p_err = ref_state.head<2>() - x_hat.head<2>();
    Vec2 v_ref(ref_state(2) * std::cos(ref_state(3)), ref_state(2) * std::sin(ref_state(3)));
    Vec2 v(x_hat(2) * std::cos(x_hat(3)), x_hat(2) * std::sin(x_hat(3)));
    Vec2 a_des = gains.kp * p_err + gains.kd * (v_ref - v);

    Vec2 heading(std::cos(x_hat(3)), std::sin(x_hat(3)));
    Vec2 lateral(-heading.y(), heading.x());
    Vec u(2);
    u << a_des.dot(heading), std::atan(a_des.dot(lateral) / model.g);
    return u;
}

Vec heli_tracking_control(const HelicopterModel& model, const HeliTrackingGains& gains,
                          const Vec& x_hat, const Vec& ref_state) {
    Vec u = heli_feedback_correction(model, gains, x_hat, ref_state);
    if (x_hat(2) <= model.speed_floor + 0.5) u(0) = std::max(u(0), 0.0);
    return model.saturate(u);
}

Vec heli_tracking_with_ff(const HelicopterModel& model, const HeliTrackingGains& gains,
                          const Vec& x_hat, const Vec& ref_state, const Vec& u_ff) {
    Vec u = u_ff + heli_feedback_correction(model, gains, x_hat, ref_state);
    if (x_hat(2) <= model.speed_floor + 0.5) u(0) = std::max(u(0), 0.0);
    return model.saturate(u);
}

Vec di_tracking_control(double kp, double kd, const Vec& x_hat, const Vec& ref_state) {
    Vec2 p_err = ref_state.head<2>() - x_hat.head<2>();
    Vec2 v_err = ref_state.tail<2>() - x_hat.tail<2>();
    Vec u(2);
    u = kp * p_err + kd * v_err;
    return u;
}

RadialBackupPolicy::RadialBackupPolicy(const Vec& x_k, double r_k, double t_k,
                                       const Eigen::Matrix<double, 2, 4>& K)
    : r_k_(r_k), t_k_(t_k), K_(K) {
    Vec2 pos = x_k.head<2>();
    if (pos.norm() < 1e-9)
        throw std::domain_error("RadialBackupPolicy: degenerate geometry, position at center");
    n_k_ = pos.normalized();

    Eigen::Matrix4d Acl = DoubleIntegrator::A() - DoubleIntegrator::B() * K_;
    Eigen::EigenSolver<Eigen::Matrix4d> es(Acl);
    for (int i = 0; i < 4; ++i)
        if (es.eigenvalues()(i).real() >= -1e-9)
            throw std::invalid_argument("RadialBackupPolicy: K does not stabilize the plant");
}

Vec RadialBackupPolicy::reference(double t) const {
    Vec ref(4);
    Vec2 p = (1.0 + r_k_ + 2.0 * (t - t_k_)) * n_k_;
    ref << p.x(), p.y(), 2.0 * n_k_.x(), 2.0 * n_k_.y();
    return ref;
}

Vec RadialBackupPolicy::operator()(double t, const Vec& x) const {
    return -K_ * (x - reference(t));
}

std::shared_ptr<BackupSet> RadialBackupPolicy::backup_set() const {
    return std::make_shared<MovingBall>(n_k_, r_k_, t_k_, 2.0, 1.0);
}

StopBackupPolicy::StopBackupPolicy(const Vec& x_k, double a_max,
                                   const Eigen::Matrix<double, 2, 4>& K,
                                   double ball_radius, double vel_threshold)
    : a_max_(a_max), K_(K), ball_radius_(ball_radius), vel_threshold_(vel_threshold) {
    if (!(a_max_ > 0.0)) throw std::invalid_argument("StopBackupPolicy: a_max must be > 0");
    Vec2 pos = x_k.head<2>();
    Vec2 vel = x_k.tail<2>();
    double speed = vel.norm();
    stop_pos_ = speed > 1e-9 ? Vec2(pos + vel.normalized() * (speed * speed / (2.0 * a_max_)))
                             : pos;
}

Vec StopBackupPolicy::operator()(double, const Vec& x) const {
    Vec2 vel = x.tail<2>();
    Vec u(2);
    if (vel.norm() > 0.1) {
        u = -a_max_ * vel.normalized();
        return u;
    }
    Vec e(4);
    e << x(0) - stop_pos_.x(), x(1) - stop_pos_.y(), x(2), x(3);
    u = -K_ * e;
    double n = u.norm();
    if (n > a_max_) u *= a_max_ / n;
    return u;
}

std::shared_ptr<BackupSet> StopBackupPolicy::backup_set() const {
    return std::make_shared<StopBall>(stop_pos_, ball_radius_, vel_threshold_);
}

HeliEscapeBackupPolicy::HeliEscapeBackupPolicy(const HelicopterModel& model,
                                               std::function<Vec2(const Vec2&)> outward_dir,
                                               double v_escape, double k_speed,
                                               double k_heading)
    : model_(model), outward_dir_(std::move(outward_dir)), v_escape_(v_escape),
      k_speed_(k_speed), k_heading_(k_heading) {
    if (v_escape_ < model_.speed_floor + 0.5)
        throw std::invalid_argument("HeliEscapeBackupPolicy: escape speed too close to floor");
}

Vec HeliEscapeBackupPolicy::operator()(double, const Vec& x) const {
    Vec2 dir = outward_dir_(x.head<2>());
    double heading_target = std::atan2(dir.y(), dir.x());
    double err = wrap_angle(heading_target - x(3));
    double u1 = k_speed_ * (v_escape_ - x(2));
    if (x(2) <= model_.speed_floor + 0.5) u1 = std::max(u1, 0.0);
    double x4dot_des = k_heading_ * err;
    double u2 = std::atan(x4dot_des * x(2) / model_.g);
    Vec u(2);
    u << u1, u2;
    return model_.saturate(u);
}

HeliEscapeSet::HeliEscapeSet(std::shared_ptr<const TimeVaryingSet> map,
                             std::function<Vec2(const Vec2&)> outward_dir, double margin_c,
                             double speed_min)
    : map_(std::move(map)), outward_dir_(std::move(outward_dir)), margin_c_(margin_c),
      speed_min_(speed_min) {
    if (!(margin_c_ > 0.0)) throw std::invalid_argument("HeliEscapeSet: margin_c must be > 0");
}

bool HeliEscapeSet::contains(const Vec& state, double t, double margin) const {
    Vec2 pos = state.head<2>();
    if (map_->signed_distance(pos, t) < margin_c_ + margin) return false;
    Vec2 dir = outward_dir_(pos);
    Vec2 vel(state(2) * std::cos(state(3)), state(2) * std::sin(state(3)));
    return vel.dot(dir) >= speed_min_;
}

double HeliEscapeSet::min_forecast_clearance(const TimeVaryingSet&, double) const {
    return margin_c_;
}

double tracking_error(const Vec& x, const Vec& ref, bool position_only) {
    if (position_only) return (x.head<2>() - ref.head<2>()).norm();
    return (x - ref).norm();
}

Trajectory random_heli_reference(const HelicopterModel& model, std::mt19937_64& rng,
                                 double duration, double dt) {
    Vec x0(4);
    x0 << 0.0, 0.0, 8.0 + 12.0 * uniform01(rng), 2.0 * M_PI * uniform01(rng);
    const double resample = 5.0;
    auto u1 = std::make_shared<std::vector<double>>();
    auto u2 = std::make_shared<std::vector<double>>();
    int n_seg = static_cast<int>(std::ceil(duration / resample)) + 1;
    for (int i = 0; i < n_seg; ++i) {
        u1->push_back(-1.5 + 3.0 * uniform01(rng));
        u2->push_back(-0.25 + 0.5 * uniform01(rng));
    }
    HelicopterModel m = model;
    Policy pi = [m, u1, u2, resample](double t, const Vec& x) {
        int seg = static_cast<int>(t / resample);
        seg = std::min(seg, static_cast<int>(u1->size()) - 1);
        double a = (*u1)[seg];
        if (x(2) <= m.speed_floor + 1.0) a = std::max(a, 0.0);
        if (x(2) >= 22.0) a = std::min(a, 0.0);
        Vec u(2);
        u << a, (*u2)[seg];
        return u;
    };
    int n = static_cast<int>(std::llround(duration / dt));
    return integrate_zoh(m.dynamics(), x0, pi, TimeGrid(0.0, dt, n));
}

namespace {

// One disturbed estimate-feedback tracking run; returns per-step position
// error against the reference.
std::vector<double> tracking_run(const HelicopterModel& model,
                                 const HeliTrackingGains& gains, const Trajectory& ref,
                                 double delta, double d_bar, double v_bar,
                                 std::mt19937_64& rng) {
    const TimeGrid& grid = ref.grid;
    Vec x = ref.states.front();
    if (delta > 0.0) x.head<2>() += DisturbanceSpec::sample_in_ball(rng, 2, delta).head<2>();
    std::vector<double> err;
    err.reserve(grid.n_steps + 1);
    err.push_back(tracking_error(x, ref.states.front(), true));
    Dynamics f = model.dynamics();
    for (int i = 0; i < grid.n_steps; ++i) {
        Vec x_hat = x;
        if (v_bar > 0.0) x_hat.head<2>() += DisturbanceSpec::sample_in_ball(rng, 2, v_bar).head<2>();
        Vec u = heli_tracking_with_ff(model, gains, x_hat, ref.states[i], ref.inputs[i]);
        Vec d = d_bar > 0.0 ? DisturbanceSpec::sample_in_ball(rng, 4, d_bar) : Vec(Vec::Zero(4));
        Dynamics fd = [&f, &d](const Vec& s, const Vec& us) { return Vec(f(s, us) + d); };
        x = rk4_held_step(fd, x, u, grid.dt);
        err.push_back(tracking_error(x, ref.states[i + 1], true));
    }
    return err;
}

}  // namespace

IssFitReport calibrate_iss_helicopter(const HelicopterModel& model,
                                      const HeliTrackingGains& gains,
                                      const IssCalibrationConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    const int n_steps = static_cast<int>(std::llround(cfg.duration / cfg.dt));

    // Stage A: undisturbed decay from initial offsets; envelope of err/delta.
    std::vector<double> envelope(n_steps + 1, 0.0);
    for (int run = 0; run < cfg.n_decay_runs; ++run) {
        Trajectory ref = random_heli_reference(model, rng, cfg.duration, cfg.dt);
        double delta = cfg.delta_max * (0.25 + 0.75 * uniform01(rng));
        std::vector<double> err = tracking_run(model, gains, ref, delta, 0.0, 0.0, rng);
        for (size_t i = 0; i < err.size(); ++i)
            envelope[i] = std::max(envelope[i], err[i] / delta);
    }

    // Pick the fastest decay rate whose matched gain stays moderate.
    double best_lambda = 0.01, best_gain = 1e18;
    for (int li = 0; li < 60; ++li) {
        double lambda = 0.01 * std::pow(200.0, li / 59.0);  // 0.01 .. 2
        double gain = 1.0;
        for (int i = 0; i <= n_steps; ++i) {
            double t = i * cfg.dt;
            double e = lambda * t;
            if (e > 500.0) break;  // envelope long since zero
            gain = std::max(gain, envelope[i] * std::exp(e));
        }
        if (gain <= 4.0 && lambda > best_lambda) {
            best_lambda = lambda;
            best_gain = gain;
        } else if (best_gain > 4.0 && gain < best_gain) {
            best_lambda = lambda;
            best_gain = gain;
        }
    }

    // Stage B: matched start, disturbance-driven error; gain against w_bar.
    double c_hat = 0.0;
    for (int run = 0; run < cfg.n_disturbed_runs; ++run) {
        Trajectory ref = random_heli_reference(model, rng, cfg.duration, cfg.dt);
        double d_bar = cfg.d_bar_max * (0.5 + 0.5 * uniform01(rng));
        double v_bar = cfg.v_bar_max * (0.5 + 0.5 * uniform01(rng));
        double w_bar = std::max(d_bar, v_bar);
        std::vector<double> err = tracking_run(model, gains, ref, 0.0, d_bar, v_bar, rng);
        for (double e : err) c_hat = std::max(c_hat, e / w_bar);
    }

    IssFitReport rep;
    rep.fitted_gain = std::max(best_gain, 1.0);
    rep.fitted_decay = best_lambda;
    rep.fitted_dist_gain = c_hat;
    rep.bound = IssBound(std::max(1.0, cfg.safety_factor * rep.fitted_gain),
                         rep.fitted_decay / cfg.safety_factor,
                         std::max(1.0, cfg.safety_factor * c_hat));
    return rep;
}

int validate_iss_helicopter(const HelicopterModel& model, const HeliTrackingGains& gains,
                            const IssBound& bound, const IssCalibrationConfig& cfg,
                            int n_refs, uint64_t seed) {
    std::mt19937_64 rng(seed);
    int exceedances = 0;
    for (int run = 0; run < n_refs; ++run) {
        Trajectory ref = random_heli_reference(model, rng, cfg.duration, cfg.dt);
        double delta = cfg.delta_max * uniform01(rng);
        double d_bar = cfg.d_bar_max * uniform01(rng);
        double v_bar = cfg.v_bar_max * uniform01(rng);
        double w_bar = std::max(d_bar, v_bar);
        std::vector<double> err = tracking_run(model, gains, ref, delta, d_bar, v_bar, rng);
        for (size_t i = 0; i < err.size(); ++i) {
            double t = static_cast<double>(i) * cfg.dt;
            if (err[i] > bound.envelope(delta, w_bar, t) + 1e-9) {
                ++exceedances;
                break;
            }
        }
    }
    return exceedances;
}

}  // namespace gk
