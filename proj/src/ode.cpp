#include "gk/ode.hpp"

#include <cmath>

namespace gk {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

Vec rk4_step(const Rhs& rhs, double t, const Vec& x, double dt) {
    Vec k1 = rhs(t, x);
    Vec k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
    Vec k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
    Vec k4 = rhs(t + dt, x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

int steps_for(double duration, double dt, const char* what) {
    double s = duration / dt;
    int n = static_cast<int>(std::llround(s));
    if (std::abs(s - static_cast<double>(n)) > 1e-6)
        throw std::invalid_argument(std::string(what) + " is not an integer multiple of dt");
    return n;
}

}  // namespace

Vec rk4_held_step(const Dynamics& f, const Vec& x, const Vec& u, double dt) {
    Vec k1 = f(x, u);
    Vec k2 = f(x + 0.5 * dt * k1, u);
    Vec k3 = f(x + 0.5 * dt * k2, u);
    Vec k4 = f(x + dt * k3, u);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate(const IvpSpec& spec) {
    if (!all_finite(spec.x0))
        throw PropagationError(spec.grid.t_start, "integrate: non-finite initial state");
    Trajectory traj;
    traj.grid = spec.grid;
    traj.states.reserve(spec.grid.n_steps + 1);
    traj.states.push_back(spec.x0);
    Vec x = spec.x0;
    for (int i = 0; i < spec.grid.n_steps; ++i) {
        double t = spec.grid.time(i);
        x = rk4_step(spec.rhs, t, x, spec.grid.dt);
        if (!all_finite(x))
            throw PropagationError(spec.grid.time(i + 1),
                                   "integrate: non-finite state at t=" +
                                       std::to_string(spec.grid.time(i + 1)));
        traj.states.push_back(x);
    }
    return traj;
}

Trajectory integrate_zoh(const Dynamics& f, const Vec& x0, const Policy& pi,
                         const TimeGrid& grid) {
    if (!all_finite(x0))
        throw PropagationError(grid.t_start, "integrate_zoh: non-finite initial state");
    Trajectory traj;
    traj.grid = grid;
    traj.states.reserve(grid.n_steps + 1);
    traj.inputs.reserve(grid.n_steps);
    traj.states.push_back(x0);
    Vec x = x0;
    for (int i = 0; i < grid.n_steps; ++i) {
        double t = grid.time(i);
        Vec u = pi(t, x);
        if (!all_finite(u))
            throw PropagationError(t, "integrate_zoh: non-finite input at t=" + std::to_string(t));
        x = rk4_held_step(f, x, u, grid.dt);
        if (!all_finite(x))
            throw PropagationError(grid.time(i + 1),
                                   "integrate_zoh: non-finite state at t=" +
                                       std::to_string(grid.time(i + 1)));
        traj.inputs.push_back(u);
        traj.states.push_back(x);
    }
    return traj;
}

Trajectory integrate_switched(const Dynamics& f, const Vec& x0,
                              const Policy& pi_track, const Policy& pi_backup,
                              double t_k, double T_S, double T_B, double dt) {
    if (T_S < 0.0) throw std::invalid_argument("integrate_switched: T_S must be >= 0");
    if (!(T_B > 0.0)) throw std::invalid_argument("integrate_switched: T_B must be > 0");
    int n_track = T_S > 0.0 ? steps_for(T_S, dt, "T_S") : 0;
    int n_backup = steps_for(T_B, dt, "T_B");

    Trajectory traj;
    traj.grid = TimeGrid(t_k, dt, n_track + n_backup);
    traj.switch_index = n_track;
    traj.states.reserve(traj.grid.n_steps + 1);
    traj.inputs.reserve(traj.grid.n_steps);
    traj.states.push_back(x0);
    Vec x = x0;
    for (int i = 0; i < traj.grid.n_steps; ++i) {
        double t = traj.grid.time(i);
        Vec u = (i < n_track) ? pi_track(t, x) : pi_backup(t, x);
        if (!all_finite(u))
            throw PropagationError(t, "integrate_switched: non-finite input at t=" +
                                          std::to_string(t));
        x = rk4_held_step(f, x, u, dt);
        if (!all_finite(x))
            throw PropagationError(traj.grid.time(i + 1),
                                   "integrate_switched: non-finite state at t=" +
                                       std::to_string(traj.grid.time(i + 1)));
        traj.inputs.push_back(u);
        traj.states.push_back(x);
    }
    return traj;
}

}  // namespace gk
