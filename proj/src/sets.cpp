#include "gk/sets.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace gk {

namespace {

constexpr double kBig = 1e30;        // "no source" cost for the transform
constexpr double kSdCap = 1e9;       // signed distance when nothing is unsafe

// Felzenszwalb-Huttenlocher 1-D squared distance transform (lower envelope
// of parabolas). f and d are in squared cell units.
void dt1d(const std::vector<double>& f, std::vector<double>& d,
          std::vector<int>& v, std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -kBig;
    z[1] = kBig;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            int p = v[k];
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kBig;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

std::vector<double> distance_transform(const Grid2& grid,
                                       const std::vector<uint8_t>& source,
                                       const std::vector<double>& extra_cost_sq) {
    const int nx = grid.nx, ny = grid.ny;
    const double c2 = grid.cell * grid.cell;
    std::vector<double> work(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        if (source[i])
            work[i] = extra_cost_sq.empty() ? 0.0 : extra_cost_sq[i] / c2;
        else
            work[i] = kBig;
    }
    const int nmax = std::max(nx, ny);
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    // columns (along y)
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) f[j] = work[grid.idx(i, j)];
        dt1d(f, d, v, z, ny);
        for (int j = 0; j < ny; ++j) work[grid.idx(i, j)] = d[j];
    }
    // rows (along x)
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) f[i] = work[grid.idx(i, j)];
        dt1d(f, d, v, z, nx);
        for (int i = 0; i < nx; ++i) work[grid.idx(i, j)] = d[i];
    }
    for (double& w : work)
        w = (w >= kBig / 2.0) ? std::numeric_limits<double>::infinity()
                              : grid.cell * std::sqrt(w);
    return work;
}

SdfForecastSet::SdfForecastSet(Grid2 grid, std::vector<double> phi0, double t_meas,
                               double spread_max)
    : grid_(grid), phi0_(std::move(phi0)), t_meas_(t_meas), spread_max_(spread_max) {
    if (grid_.nx < 2 || grid_.ny < 2)
        throw std::invalid_argument("SdfForecastSet: grid must be at least 2x2");
    if (static_cast<int>(phi0_.size()) != grid_.size())
        throw std::invalid_argument("SdfForecastSet: sample count mismatch");
    if (spread_max_ < 0.0)
        throw std::invalid_argument("SdfForecastSet: spread_max must be >= 0");
}

double bilinear_sample(const Grid2& g, const std::vector<double>& f, const Vec2& p) {
    double sx = (p.x() - g.origin.x()) / g.cell;
    double sy = (p.y() - g.origin.y()) / g.cell;
    sx = std::clamp(sx, 0.0, static_cast<double>(g.nx - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(g.ny - 1));
    int i = std::min(static_cast<int>(sx), g.nx - 2);
    int j = std::min(static_cast<int>(sy), g.ny - 2);
    double ax = sx - i, ay = sy - j;
    double f00 = f[g.idx(i, j)];
    double f10 = f[g.idx(i + 1, j)];
    double f01 = f[g.idx(i, j + 1)];
    double f11 = f[g.idx(i + 1, j + 1)];
    return (1 - ax) * (1 - ay) * f00 + ax * (1 - ay) * f10 + (1 - ax) * ay * f01 +
           ax * ay * f11;
}

double SdfForecastSet::sample_phi0(const Vec2& p) const {
    return bilinear_sample(grid_, phi0_, p);
}

Vec2 SdfForecastSet::gradient(const Vec2& p) const {
    const double h = grid_.cell;
    double gx = (sample_phi0(p + Vec2(h, 0)) - sample_phi0(p - Vec2(h, 0))) / (2 * h);
    double gy = (sample_phi0(p + Vec2(0, h)) - sample_phi0(p - Vec2(0, h))) / (2 * h);
    return Vec2(gx, gy);
}

double SdfForecastSet::signed_distance(const Vec2& p, double t) const {
    if (t < t_meas_ - 1e-9)
        throw std::domain_error("SdfForecastSet: query before measurement time");
    const double pad = grid_.cell;
    if (p.x() < grid_.origin.x() - pad || p.y() < grid_.origin.y() - pad ||
        p.x() > grid_.origin.x() + (grid_.nx - 1) * grid_.cell + pad ||
        p.y() > grid_.origin.y() + (grid_.ny - 1) * grid_.cell + pad)
        return -std::numeric_limits<double>::infinity();  // unknown territory
    return sample_phi0(p) - spread_max_ * (t - t_meas_);
}

namespace {

class ErodedSet : public TimeVaryingSet {
public:
    ErodedSet(std::shared_ptr<const TimeVaryingSet> inner, double R)
        : inner_(std::move(inner)), R_(R) {}
    double signed_distance(const Vec2& p, double t) const override {
        return inner_->signed_distance(p, t) - R_;
    }
    double query_pad() const override { return inner_->query_pad(); }

private:
    std::shared_ptr<const TimeVaryingSet> inner_;
    double R_;
};

}  // namespace

std::shared_ptr<const TimeVaryingSet> erode(std::shared_ptr<const TimeVaryingSet> set,
                                            double R) {
    if (R < 0.0) throw std::domain_error("erode: R must be >= 0");
    if (R == 0.0) return set;
    return std::make_shared<ErodedSet>(std::move(set), R);
}

SdfForecastSet build_sdf_from_bitmask(const Bitmask& mask, double spread_max) {
    if (mask.cells.empty() || static_cast<int>(mask.cells.size()) != mask.grid.size())
        throw std::invalid_argument("build_sdf_from_bitmask: bad mask");
    std::vector<uint8_t> unsafe(mask.cells.size()), free(mask.cells.size());
    int n_free = 0;
    for (size_t i = 0; i < mask.cells.size(); ++i) {
        free[i] = mask.cells[i] == CellState::Free;
        unsafe[i] = !free[i];
        n_free += free[i];
    }
    if (n_free == 0)
        throw std::invalid_argument("build_sdf_from_bitmask: no free cell, perceived safe set empty");

    const double half_diag = mask.grid.cell * M_SQRT2 / 2.0;
    std::vector<double> phi(mask.cells.size());
    if (n_free == static_cast<int>(mask.cells.size())) {
        std::fill(phi.begin(), phi.end(), kSdCap);
    } else {
        std::vector<double> d_unsafe = distance_transform(mask.grid, unsafe);
        std::vector<double> d_free = distance_transform(mask.grid, free);
        for (size_t i = 0; i < phi.size(); ++i)
            phi[i] = free[i] ? d_unsafe[i] - half_diag : -d_free[i];
    }
    return SdfForecastSet(mask.grid, std::move(phi), mask.t_meas, spread_max);
}

NestingReport check_nesting(const SdfForecastSet& older, const SdfForecastSet& newer,
                            int samples, uint64_t seed) {
    if (!(older.t_meas() < newer.t_meas()))
        throw std::invalid_argument("check_nesting: older.t_meas must precede newer.t_meas");
    const Grid2& ga = older.grid();
    const Grid2& gb = newer.grid();
    double lox = std::max(ga.origin.x(), gb.origin.x());
    double loy = std::max(ga.origin.y(), gb.origin.y());
    double hix = std::min(ga.origin.x() + (ga.nx - 1) * ga.cell,
                          gb.origin.x() + (gb.nx - 1) * gb.cell);
    double hiy = std::min(ga.origin.y() + (ga.ny - 1) * ga.cell,
                          gb.origin.y() + (gb.ny - 1) * gb.cell);
    if (lox >= hix || loy >= hiy)
        throw std::invalid_argument("check_nesting: grids do not overlap");

    std::mt19937_64 rng(seed);
    NestingReport rep;
    const double t_span = 600.0;
    for (int s = 0; s < samples; ++s) {
        Vec2 p(lox + uniform01(rng) * (hix - lox), loy + uniform01(rng) * (hiy - loy));
        double t = newer.t_meas() + uniform01(rng) * t_span;
        double sd_a = older.signed_distance(p, t);
        if (sd_a < 0.0) continue;
        double sd_b = newer.signed_distance(p, t);
        if (sd_b < 0.0) {
            rep.ok = false;
            rep.p = p;
            rep.t = t;
            rep.sd_older = sd_a;
            rep.sd_newer = sd_b;
            return rep;
        }
    }
    return rep;
}

MovingBall::MovingBall(const Vec2& n_k, double r_k, double t_k, double escape_speed,
                       double radius)
    : n_k_(n_k), r_k_(r_k), t_k_(t_k), escape_speed_(escape_speed), radius_(radius) {
    if (std::abs(n_k_.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("MovingBall: n_k must be a unit vector");
    if (!(radius_ > 0.0)) throw std::invalid_argument("MovingBall: radius must be > 0");
}

Vec MovingBall::center(double t) const {
    Vec c(4);
    Vec2 p = position_center(t);
    c << p.x(), p.y(), escape_speed_ * n_k_.x(), escape_speed_ * n_k_.y();
    return c;
}

Vec2 MovingBall::position_center(double t) const {
    return (1.0 + r_k_ + escape_speed_ * (t - t_k_)) * n_k_;
}

bool MovingBall::contains(const Vec& state, double t, double margin) const {
    return (state - center(t)).norm() <= radius_ - margin;
}

double MovingBall::min_forecast_clearance(const TimeVaryingSet& B, double t) const {
    // 1-Lipschitz signed distance: every point of the position footprint
    // clears at least sd(center) - radius.
    return B.signed_distance(position_center(t), t) - radius_;
}

StopBall::StopBall(const Vec2& stop_pos, double radius, double vel_threshold)
    : stop_pos_(stop_pos), radius_(radius), vel_threshold_(vel_threshold) {
    if (!(radius_ > 0.0)) throw std::invalid_argument("StopBall: radius must be > 0");
}

bool StopBall::contains(const Vec& state, double t, double margin) const {
    (void)t;
    Vec2 pos = state.head<2>();
    Vec2 vel = state.tail<2>();
    return (pos - stop_pos_).norm() <= radius_ - margin && vel.norm() <= vel_threshold_;
}

double StopBall::min_forecast_clearance(const TimeVaryingSet& B, double t) const {
    return B.signed_distance(stop_pos_, t) - radius_;
}

namespace {

void write_grid_header(std::ofstream& out, const Grid2& g, double t_meas,
                       double spread_max) {
    out.precision(17);
    out << g.origin.x() << " " << g.origin.y() << " " << g.cell << " " << g.nx << " "
        << g.ny << " " << t_meas << " " << spread_max << "\n";
}

Grid2 read_grid_header(std::ifstream& in, double& t_meas, double& spread_max) {
    Grid2 g;
    double ox, oy;
    if (!(in >> ox >> oy >> g.cell >> g.nx >> g.ny >> t_meas >> spread_max))
        throw std::runtime_error("grid file: bad header");
    g.origin = Vec2(ox, oy);
    return g;
}

}  // namespace

void SdfForecastSet::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("SdfForecastSet: cannot open " + path);
    write_grid_header(out, grid_, t_meas_, spread_max_);
    for (int j = 0; j < grid_.ny; ++j) {
        for (int i = 0; i < grid_.nx; ++i) {
            out << phi0_[grid_.idx(i, j)];
            out << (i + 1 == grid_.nx ? '\n' : ' ');
        }
    }
}

SdfForecastSet SdfForecastSet::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("SdfForecastSet: cannot open " + path);
    double t_meas, spread_max;
    Grid2 g = read_grid_header(in, t_meas, spread_max);
    std::vector<double> phi(g.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!(in >> phi[g.idx(i, j)]))
                throw std::runtime_error("SdfForecastSet: truncated samples");
    return SdfForecastSet(g, std::move(phi), t_meas, spread_max);
}

void Bitmask::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Bitmask: cannot open " + path);
    write_grid_header(out, grid, t_meas, 0.0);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            out << static_cast<int>(cells[grid.idx(i, j)]);
            out << (i + 1 == grid.nx ? '\n' : ' ');
        }
    }
}

Bitmask Bitmask::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Bitmask: cannot open " + path);
    Bitmask m;
    double spread;
    m.grid = read_grid_header(in, m.t_meas, spread);
    m.cells.resize(m.grid.size());
    for (int j = 0; j < m.grid.ny; ++j)
        for (int i = 0; i < m.grid.nx; ++i) {
            int v;
            if (!(in >> v)) throw std::runtime_error("Bitmask: truncated samples");
            m.cells[m.grid.idx(i, j)] = static_cast<CellState>(v);
        }
    return m;
}

}  // namespace gk
