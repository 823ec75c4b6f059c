#pragma once

#include "gk/core.hpp"

#include <functional>
#include <memory>

namespace gk {

/// Time-varying set queried through a signed distance in position space.
/// Positive = inside the set (safe), negative = outside. signed_distance is
/// 1-Lipschitz in position for fixed t (up to grid interpolation slack, see
/// query_pad).
class TimeVaryingSet {
public:
    virtual ~TimeVaryingSet() = default;
    virtual double signed_distance(const Vec2& p, double t) const = 0;
    bool contains(const Vec2& p, double t, double margin = 0.0) const {
        return signed_distance(p, t) >= margin;
    }
    /// Extra margin a conservative caller should add to absorb interpolation
    /// error. Zero for analytic sets, cell*sqrt(2)/2 for sampled grids.
    virtual double query_pad() const { return 0.0; }
};

/// Complement of a disk with a (nondecreasing) time-varying radius:
/// sd(p, t) = |p - center| - radius_at(t). The analytic S(t) / B_k(t) of the
/// worked radial-fire example.
class AnalyticDiskComplement : public TimeVaryingSet {
public:
    AnalyticDiskComplement(const Vec2& center, std::function<double(double)> radius_at)
        : center_(center), radius_at_(std::move(radius_at)) {}
    double signed_distance(const Vec2& p, double t) const override {
        return (p - center_).norm() - radius_at_(t);
    }
    const Vec2& center() const { return center_; }
    double radius(double t) const { return radius_at_(t); }

private:
    Vec2 center_;
    std::function<double(double)> radius_at_;
};

/// Row-major 2-D sample lattice. Sample (i, j) sits at
/// origin + (i*cell, j*cell); i runs along x, j along y.
struct Grid2 {
    Vec2 origin = Vec2::Zero();
    double cell = 1.0;
    int nx = 0;
    int ny = 0;

    int size() const { return nx * ny; }
    int idx(int i, int j) const { return j * nx + i; }
    Vec2 pos(int i, int j) const {
        return origin + Vec2(i * cell, j * cell);
    }
    bool same_layout(const Grid2& o) const {
        return nx == o.nx && ny == o.ny && cell == o.cell &&
               (origin - o.origin).norm() < 1e-9;
    }
};

/// Clamped bilinear interpolation of row-major samples on `g`.
double bilinear_sample(const Grid2& g, const std::vector<double>& f, const Vec2& p);

enum class CellState : uint8_t { Free = 0, Burning = 1, Unknown = 2 };

/// Sensor bitmask: per-cell free/burning classification, Unknown where the
/// sensor could not see. Stamped with the measurement time.
struct Bitmask {
    Grid2 grid;
    std::vector<CellState> cells;
    double t_meas = 0.0;

    void write(const std::string& path) const;
    static Bitmask read(const std::string& path);
};

/// Worst-case forecast of a sampled signed distance field:
/// sd(p, t) = bilinear(phi0, p) - spread_max * (t - t_meas), t >= t_meas.
/// Queries outside the padded grid are unsafe (-inf); queries before t_meas
/// are a temporal domain error.
class SdfForecastSet : public TimeVaryingSet {
public:
    SdfForecastSet() = default;
    SdfForecastSet(Grid2 grid, std::vector<double> phi0, double t_meas, double spread_max);

    double signed_distance(const Vec2& p, double t) const override;
    double query_pad() const override { return grid_.cell * M_SQRT2 / 2.0; }

    /// Raw bilinear sample at measurement time; no forecast, no bounds error
    /// (clamped outside).
    double sample_phi0(const Vec2& p) const;
    Vec2 gradient(const Vec2& p) const;

    const Grid2& grid() const { return grid_; }
    const std::vector<double>& phi0() const { return phi0_; }
    double t_meas() const { return t_meas_; }
    double spread_max() const { return spread_max_; }

    void write(const std::string& path) const;
    static SdfForecastSet read(const std::string& path);

private:
    Grid2 grid_;
    std::vector<double> phi0_;
    double t_meas_ = 0.0;
    double spread_max_ = 0.0;
};

/// Pontryagin erosion by a ball of radius R: sd drops by R everywhere.
std::shared_ptr<const TimeVaryingSet> erode(std::shared_ptr<const TimeVaryingSet> set,
                                            double R);

/// Exact Euclidean distance transform (Felzenszwalb-Huttenlocher) of the
/// cells where `unsafe` is true; +inf where no unsafe cell exists. Distances
/// in meters. `extra_cost` may carry per-source squared offsets (lifted
/// transform); pass empty for the plain EDT.
std::vector<double> distance_transform(const Grid2& grid,
                                       const std::vector<uint8_t>& source,
                                       const std::vector<double>& extra_cost_sq = {});

/// Signed field from a bitmask: +EDT to burning-or-unknown cells on free
/// cells, -EDT to free cells elsewhere, minus half a cell diagonal of
/// quantization slack (cell-center classification cannot place the front
/// more precisely). Throws if no cell is free.
SdfForecastSet build_sdf_from_bitmask(const Bitmask& mask, double spread_max);

struct NestingReport {
    bool ok = true;
    Vec2 p = Vec2::Zero();
    double t = 0.0;
    double sd_older = 0.0;
    double sd_newer = 0.0;
};

/// Monte-Carlo check of the perceived-set nesting contract: every sampled
/// point contained in `older` at t >= newer.t_meas must be contained in
/// `newer`. Diagnostic utility; reports the first counterexample found.
NestingReport check_nesting(const SdfForecastSet& older, const SdfForecastSet& newer,
                            int samples, uint64_t seed = 1234);

/// Controlled-invariant terminal set in full state space.
class BackupSet {
public:
    virtual ~BackupSet() = default;
    virtual bool contains(const Vec& state, double t, double margin = 0.0) const = 0;
    /// Smallest clearance (signed distance in B) over the set's position
    /// footprint at time t; used for the backup-margin check.
    virtual double min_forecast_clearance(const TimeVaryingSet& B, double t) const = 0;
};

/// Unit-norm ball in (position, velocity) space translating radially at the
/// escape speed: center(t) = [(1 + r_k + v_esc (t - t_k)) n_k ; v_esc n_k].
class MovingBall : public BackupSet {
public:
    MovingBall(const Vec2& n_k, double r_k, double t_k,
               double escape_speed = 2.0, double radius = 1.0);
    bool contains(const Vec& state, double t, double margin = 0.0) const override;
    double min_forecast_clearance(const TimeVaryingSet& B, double t) const override;

    Vec center(double t) const;
    Vec2 position_center(double t) const;
    double radius() const { return radius_; }

private:
    Vec2 n_k_;
    double r_k_, t_k_, escape_speed_, radius_;
};

/// Static ball around a stop state: position within `radius` of the stop
/// point and velocity below `vel_threshold`.
class StopBall : public BackupSet {
public:
    StopBall(const Vec2& stop_pos, double radius, double vel_threshold);
    bool contains(const Vec& state, double t, double margin = 0.0) const override;
    double min_forecast_clearance(const TimeVaryingSet& B, double t) const override;

    const Vec2& stop_pos() const { return stop_pos_; }
    double radius() const { return radius_; }

private:
    Vec2 stop_pos_;
    double radius_, vel_threshold_;
};

}  // namespace gk
