#include "gk/core.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace gk {

TimeGrid::TimeGrid(double t_start_, double dt_, int n_steps_)
    : t_start(t_start_), dt(dt_), n_steps(n_steps_) {
    if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be > 0");
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    if (!std::isfinite(t_start)) throw std::invalid_argument("TimeGrid: non-finite t_start");
}

void Trajectory::validate() const {
    if (static_cast<int>(states.size()) != grid.n_steps + 1)
        throw std::invalid_argument("Trajectory: states.size() != n_steps + 1");
    if (static_cast<int>(inputs.size()) != grid.n_steps)
        throw std::invalid_argument("Trajectory: inputs.size() != n_steps");
    if (switch_index && (*switch_index < 0 || *switch_index > grid.n_steps))
        throw std::invalid_argument("Trajectory: switch_index out of range");
}

Vec Trajectory::state_at(double t) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(grid.t_end()));
    if (t < grid.t_start - slack || t > grid.t_end() + slack)
        throw std::out_of_range("Trajectory: t outside grid span");
    double s = (t - grid.t_start) / grid.dt;
    if (s <= 0.0) return states.front();
    if (s >= static_cast<double>(grid.n_steps)) return states.back();
    int i = static_cast<int>(std::floor(s));
    double a = s - static_cast<double>(i);
    if (a == 0.0) return states[i];
    return (1.0 - a) * states[i] + a * states[i + 1];
}

void Trajectory::write_csv(const std::string& path) const {
    validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Trajectory: cannot open " + path);
    const int nx = states.empty() ? 0 : static_cast<int>(states[0].size());
    const int nu = inputs.empty() ? 0 : static_cast<int>(inputs[0].size());
    out << "t";
    for (int j = 0; j < nx; ++j) out << ",x" << j;
    for (int j = 0; j < nu; ++j) out << ",u" << j;
    out << ",switch_index\n";
    out.precision(17);
    for (int i = 0; i <= grid.n_steps; ++i) {
        out << grid.time(i);
        for (int j = 0; j < nx; ++j) out << "," << states[i](j);
        for (int j = 0; j < nu; ++j) {
            if (i < grid.n_steps) out << "," << inputs[i](j);
            else out << ",";
        }
        if (switch_index) out << "," << *switch_index;
        else out << ",";
        out << "\n";
    }
}

Trajectory Trajectory::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Trajectory: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("Trajectory: empty file");
    int nx = 0, nu = 0;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.size() > 1 && tok[0] == 'x') ++nx;
            if (tok.size() > 1 && tok[0] == 'u') ++nu;
        }
    }
    std::vector<double> times;
    Trajectory traj;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        times.push_back(std::stod(tok));
        Vec x(nx);
        for (int j = 0; j < nx; ++j) {
            std::getline(ss, tok, ',');
            x(j) = std::stod(tok);
        }
        traj.states.push_back(x);
        Vec u(nu);
        bool has_u = nu > 0;
        for (int j = 0; j < nu; ++j) {
            std::getline(ss, tok, ',');
            if (tok.empty()) { has_u = false; break; }
            u(j) = std::stod(tok);
        }
        if (has_u) traj.inputs.push_back(u);
        if (std::getline(ss, tok, ',') && !tok.empty())
            traj.switch_index = std::stoi(tok);
    }
    if (times.size() < 2) throw std::runtime_error("Trajectory: needs at least two rows");
    traj.grid = TimeGrid(times.front(), times[1] - times[0],
                         static_cast<int>(times.size()) - 1);
    traj.validate();
    return traj;
}

IssBound::IssBound(double M, double lambda, double c)
    : gain(M), decay(lambda), dist_gain(c) {
    if (!(gain >= 1.0)) throw std::invalid_argument("IssBound: M must be >= 1");
    if (!(decay > 0.0)) throw std::invalid_argument("IssBound: lambda must be > 0");
    if (!(dist_gain >= 0.0)) throw std::invalid_argument("IssBound: c must be >= 0");
}

double IssBound::beta(double delta, double t) const {
    return gain * delta * std::exp(-decay * t);
}

double IssBound::envelope(double delta, double w_bar, double t_elapsed) const {
    return beta(delta, t_elapsed) + gamma(w_bar);
}

double iss_envelope(const IssBound& bound, double delta, double w_bar, double t_elapsed) {
    if (delta < 0.0 || w_bar < 0.0 || t_elapsed < 0.0)
        throw std::domain_error("iss_envelope: negative argument");
    return bound.envelope(delta, w_bar, t_elapsed);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Vec DisturbanceSpec::sample_in_ball(std::mt19937_64& rng, int dim, double radius) {
    Vec v(dim);
    if (radius <= 0.0) {
        v.setZero();
        return v;
    }
    // Gaussian direction, radius scaled for a uniform draw from the ball.
    double norm2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) {
            double u1 = uniform01(rng), u2 = uniform01(rng);
            u1 = std::max(u1, 1e-300);
            v(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        }
        norm2 = v.squaredNorm();
    } while (norm2 == 0.0);
    double r = radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(dim));
    return v * (r / std::sqrt(norm2));
}

Vec DisturbanceSpec::sample_state_disturbance(std::mt19937_64& rng, int dim) const {
    return sample_in_ball(rng, dim, d_bar);
}

Vec DisturbanceSpec::sample_measurement_noise(std::mt19937_64& rng, int dim) const {
    return sample_in_ball(rng, dim, v_bar);
}

}  // namespace gk
