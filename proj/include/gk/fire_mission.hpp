#pragma once

#include "gk/fire_sim.hpp"
#include "gk/gatekeeper.hpp"
#include "gk/vehicles.hpp"

#include <map>

namespace gk {

/// The nominal planner cannot produce a reference (vehicle inside the
/// perceived fire); recovery is left to the retained commitment.
struct PlannerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FilterMode { Off, Gatekeeper };

/// Flat key-value scenario configuration. Presets: "desk" (3 km arena, CI
/// scale) and "full" (12 km arena, release benchmarking).
struct ScenarioConfig {
    uint64_t seed = 1;
    std::string preset = "desk";
    FilterMode filter = FilterMode::Gatekeeper;
    double duration = 540.0;

    // arena and fire truth; the truth grid extends truth_margin beyond the
    // mission arena so escape tails stay on simulated ground
    double arena_half = 1500.0;
    double truth_margin = 1500.0;
    double cell = 10.0;
    double fire_center_x = 0.0;
    double fire_center_y = 0.0;
    double fire_r0 = 700.0;
    double sigma_max_true = 8000.0 / 3600.0;     // 8 km/h
    double sigma_max_assumed = 8000.0 / 3600.0;  // what the controllers assume
    double sigma_min_frac = 0.85;
    int sigma_noise_cells = 6;  // lattice of the hidden rate-of-spread field
    // initial perimeter waviness: third harmonic plus a higher harmonic of
    // configurable order; pockets form between the lobes
    double fire_wobble3 = 0.25;
    double fire_wobble5 = 0.0;
    int fire_wobble_n = 5;
    // optional satellite ignitions seated at the perimeter valleys: the
    // channels between them and the main fire pinch shut as the fronts merge
    int fire2_count = 3;
    double fire2_r0 = 220.0;
    double fire2_dist = 1390.0;
    double fire2_bearing = 0.0;  // bearing offset of the first satellite
    double fire_dt = 1.0;
    int reinit_every = 20;

    // sensing
    double thermal_range = 1000.0;
    double meas_period = 10.0;  // 0.1 Hz

    // mission
    double standoff = 100.0;
    double nominal_spacing = 45.0;  // planner waypoint resolution (40/horizon)
    double target_speed = 15.0;
    double start_standoff = 450.0;
    double start_angle = 0.0;
    double control_dt = 0.05;  // 20 Hz zero-order hold

    // gatekeeper
    double T_H = 120.0;
    double T_B = 120.0;
    int N = 10;
    double d_bar = 0.0;
    double v_bar = 0.0;
    double r_est = 0.0;  // defaults to v_bar when 0 and v_bar > 0
    // envelope from `calibrate-iss` (1.5x safety factor), rounded conservatively
    double iss_gain = 3.4;
    double iss_decay = 0.31;
    double iss_dist_gain = 7.1;
    ValidityMode validity = ValidityMode::Robust;

    // vehicle and backup
    double x3_min = 5.0;
    double kp_track = 0.5;
    double kd_track = 1.5;
    double v_escape = 10.0;
    double margin_c = 50.0;

    // hooks
    double freeze_commits_after = std::numeric_limits<double>::infinity();
    bool record_commits = true;

    Vec2 fire_center() const { return Vec2(fire_center_x, fire_center_y); }
    double effective_r() const { return r_est > 0.0 ? r_est : v_bar; }
    bool assumption_breach() const { return sigma_max_assumed < sigma_max_true - 1e-12; }
    /// Outer radius bound on the initial main fire; the perceived-set prior.
    double fire_r_outer() const {
        return fire_r0 * (1.0 + std::abs(fire_wobble3) + std::abs(fire_wobble5));
    }
    /// Initial ignition disks (center, outer radius) known to the mission.
    std::vector<std::pair<Vec2, double>> ignitions() const {
        std::vector<std::pair<Vec2, double>> v{{fire_center(), fire_r_outer()}};
        for (int k = 0; k < fire2_count; ++k) {
            double bearing = M_PI / 2.0 + fire2_bearing + k * 2.0 * M_PI / 3.0;
            v.push_back({fire_center() + fire2_dist * Vec2(std::cos(bearing),
                                                           std::sin(bearing)),
                         fire2_r0});
        }
        return v;
    }
    double truth_half() const { return arena_half + truth_margin; }

    GatekeeperConfig gatekeeper_config() const;
    HelicopterModel helicopter() const;
    HeliTrackingGains gains() const { return HeliTrackingGains{kp_track, kd_track}; }
    void validate() const;

    static ScenarioConfig preset_config(const std::string& name);
    /// Apply key=value pairs on top of this config (preset key first if
    /// present). Unknown keys are an error.
    void apply(const std::map<std::string, std::string>& kv);
    std::map<std::string, std::string> to_key_values() const;
    static ScenarioConfig from_file(const std::string& path);
    void write_file(const std::string& path) const;
};

/// Ground-truth fire for a scenario: wavy front around fire_r0 on the truth
/// grid, hidden sigma field seeded from the scenario seed.
FireField make_mission_fire(const ScenarioConfig& cfg);

/// True distance to fire extended outside the truth grid by the sound
/// componentwise-clamp bound (the fire lives inside the grid, so
/// d(p, fire) >= d(clamp(p), fire)) and the initial-extent ball bound.
double mission_true_distance(const FireField& fire, const ScenarioConfig& cfg,
                             const Vec2& p, double t);

/// Perceived safe set served to the gatekeeper: worst-case forecast of the
/// fused observation history, extended outside the mapped arena by the
/// analytic prior (initial fire bound aged at the assumed spread rate).
class PriorCompositeSet : public TimeVaryingSet {
public:
    PriorCompositeSet(std::shared_ptr<const SdfForecastSet> grid_part,
                      std::vector<std::pair<Vec2, double>> ignitions, double t0,
                      double spread);
    double signed_distance(const Vec2& p, double t) const override;
    double query_pad() const override { return grid_part_->query_pad(); }
    const SdfForecastSet& grid_part() const { return *grid_part_; }

private:
    std::shared_ptr<const SdfForecastSet> grid_part_;
    std::vector<std::pair<Vec2, double>> ignitions_;
    double t0_, spread_;
};

/// Owns the two world models built from measurements:
///  - the gatekeeper map: aged max-fusion of all observation history with the
///    analytic prior, unknown treated as burning (sound, nested by
///    construction);
///  - the nominal-planner map: latest-observation-wins, unknown treated as
///    free, no forecast (myopic by design).
class MapManager {
public:
    MapManager(const Grid2& grid, std::vector<std::pair<Vec2, double>> ignitions,
               double t0, double sigma_assumed);

    void update(const Bitmask& mask);

    std::shared_ptr<const TimeVaryingSet> perceived() const { return composite_; }
    std::shared_ptr<const SdfForecastSet> fused() const { return fused_set_; }
    const SdfForecastSet& nominal_map() const { return *nominal_; }
    /// Outward direction field bound to the current fused snapshot (radial
    /// from the fire center where the map is uninformative).
    std::function<Vec2(const Vec2&)> outward_dir_fn() const;
    double t_meas() const { return t_last_; }

private:
    Grid2 grid_;
    std::vector<std::pair<Vec2, double>> ignitions_;
    double t0_, sigma_assumed_;
    double t_last_;
    std::vector<double> phi_fused_;
    std::shared_ptr<SdfForecastSet> fused_set_;
    std::shared_ptr<SdfForecastSet> nominal_;
    std::shared_ptr<PriorCompositeSet> composite_;
};

/// Tangent-following reference along the standoff isocontour of the
/// (myopic) perceived map, at constant speed. Straight-line continuation
/// when the map carries no fire information. Throws PlannerError if the
/// vehicle is inside the perceived fire.
Trajectory plan_nominal(const SdfForecastSet& perceived, const Vec& x, double t_k,
                        double T_H, double standoff, double speed, double dt,
                        double waypoint_spacing = 45.0);

struct MetricsLog {
    std::vector<double> t;
    std::vector<double> x1, x2;
    std::vector<double> dist;       // true distance to fire [m]
    std::vector<double> speed;      // airspeed [m/s]
    std::vector<double> track_err;  // position error vs committed [m]
    std::vector<IterationRecord> iterations;
    bool assumption_breach = false;
    int planner_errors = 0;

    /// Deterministic per seed: excludes wall-clock columns.
    void write_metrics_csv(const std::string& path) const;
    /// Commit history `k,t_k,T_S_star,verdict,reject_reason,compute_ms`.
    void write_commits_csv(const std::string& path) const;
    static MetricsLog read_metrics_csv(const std::string& path);
};

struct MissionArtifacts {
    ScenarioConfig cfg;
    MetricsLog log;
    std::vector<Commit> commits;  // when cfg.record_commits
};

MissionArtifacts run_mission(const ScenarioConfig& cfg);

// Summary statistics conventions: std is the sample standard deviation
// (N - 1); quantiles interpolate linearly between order statistics.
double stat_mean(const std::vector<double>& v);
double stat_sample_std(const std::vector<double>& v);
double stat_quantile(std::vector<double> v, double q);

struct SummaryStats {
    double dist_min_km = 0.0, dist_mean_km = 0.0, dist_std_km = 0.0;
    double speed_mean = 0.0, speed_std = 0.0;
    double comp_median_ms = 0.0, comp_iqr_ms = 0.0;
    int n_iterations = 0, n_committed = 0, n_rejected_all = 0;
    bool unsafe = false;
    bool breach = false;
};

SummaryStats summarize(const MetricsLog& log);
std::string format_summary(const SummaryStats& s);

}  // namespace gk
