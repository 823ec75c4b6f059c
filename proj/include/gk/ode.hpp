#pragma once

#include "gk/core.hpp"

#include <functional>

namespace gk {

using Rhs = std::function<Vec(double, const Vec&)>;
using Dynamics = std::function<Vec(const Vec&, const Vec&)>;  // f(x, u)
using Policy = std::function<Vec(double, const Vec&)>;        // u = pi(t, x)

struct IvpSpec {
    Rhs rhs;
    Vec x0;
    TimeGrid grid;
};

/// Classical fixed-step RK4. Deterministic bit-for-bit for identical inputs.
/// Throws PropagationError with the failing time on a non-finite state.
Trajectory integrate(const IvpSpec& spec);

/// Single RK4 step of dx = f(x, u) with u held constant over [t, t+dt].
Vec rk4_held_step(const Dynamics& f, const Vec& x, const Vec& u, double dt);

/// RK4 with the control held constant over each step (zero-order hold):
/// u_i = pi(t_i, x_i) is applied on [t_i, t_{i+1}) and recorded in inputs[i].
Trajectory integrate_zoh(const Dynamics& f, const Vec& x0, const Policy& pi,
                         const TimeGrid& grid);

/// Candidate-trajectory propagation: tracking policy before t_k + T_S, backup
/// policy from t_k + T_S onwards (the switch instant itself uses the backup).
/// T_S and T_B must be integer multiples of dt.
Trajectory integrate_switched(const Dynamics& f, const Vec& x0,
                              const Policy& pi_track, const Policy& pi_backup,
                              double t_k, double T_S, double T_B, double dt);

}  // namespace gk
