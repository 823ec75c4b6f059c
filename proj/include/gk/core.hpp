#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gk {

using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

/// Forward propagation hit a non-finite state or a model singularity.
struct PropagationError : std::runtime_error {
    double t_fail;
    PropagationError(double t, const std::string& what)
        : std::runtime_error(what), t_fail(t) {}
};

/// Uniform time grid. Point i sits at exactly t_start + i*dt (computed
/// multiplicatively, no accumulated drift).
struct TimeGrid {
    double t_start = 0.0;
    double dt = 0.0;
    int n_steps = 0;

    TimeGrid() = default;
    TimeGrid(double t_start_, double dt_, int n_steps_);

    double time(int i) const { return t_start + static_cast<double>(i) * dt; }
    double t_end() const { return time(n_steps); }
    double span() const { return static_cast<double>(n_steps) * dt; }
};

/// Piecewise-linear state trajectory on a uniform grid, with the inputs that
/// generated it and an optional index where the generating policy switched
/// from tracking to backup.
struct Trajectory {
    TimeGrid grid;
    std::vector<Vec> states;   // n_steps + 1
    std::vector<Vec> inputs;   // n_steps (input held on [t_i, t_{i+1}))
    std::optional<int> switch_index;

    void validate() const;

    /// Linear interpolation between grid states; exact at grid points.
    /// Throws std::out_of_range outside the grid span.
    Vec state_at(double t) const;

    Vec2 position_at(double t) const { return state_at(t).head<2>(); }

    void write_csv(const std::string& path) const;
    static Trajectory read_csv(const std::string& path);
};

/// Exponential/linear ISS envelope: beta(delta, t) = M * delta * exp(-lambda t),
/// gamma(w) = c * w. With M >= 1 the commit-time radius R = M r + c w never
/// shrinks below r, so erosion margins nest.
struct IssBound {
    double gain = 1.0;       // M, dimensionless, >= 1
    double decay = 1.0;      // lambda, 1/s, > 0
    double dist_gain = 0.0;  // c, state units per disturbance unit, >= 0

    IssBound() = default;
    IssBound(double M, double lambda, double c);

    double beta(double delta, double t) const;
    double gamma(double w) const { return dist_gain * w; }
    double envelope(double delta, double w_bar, double t_elapsed) const;
    /// R = beta(r, 0) + gamma(w_bar) = M r + c w_bar.
    double tube_radius(double r, double w_bar) const { return gain * r + dist_gain * w_bar; }
};

/// envelope = M * delta * exp(-lambda t) + c * w_bar. Domain error on
/// negative arguments.
double iss_envelope(const IssBound& bound, double delta, double w_bar, double t_elapsed);

/// Bounds on the additive state disturbance d(t) and measurement noise v(t).
/// Samples are uniform in the norm ball, so the sup-norm contracts hold for
/// every draw.
struct DisturbanceSpec {
    double d_bar = 0.0;
    double v_bar = 0.0;

    double w_bar() const { return std::max(d_bar, v_bar); }

    /// Uniform sample from the closed ball of radius `radius` in R^dim.
    static Vec sample_in_ball(std::mt19937_64& rng, int dim, double radius);
    Vec sample_state_disturbance(std::mt19937_64& rng, int dim) const;
    Vec sample_measurement_noise(std::mt19937_64& rng, int dim) const;
};

/// Uniform double in [0, 1) with platform-independent bit use.
double uniform01(std::mt19937_64& rng);

}  // namespace gk
