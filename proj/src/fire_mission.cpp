#include "gk/fire_mission.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gk {

GatekeeperConfig ScenarioConfig::gatekeeper_config() const {
    GatekeeperConfig g;
    g.T_H = T_H;
    g.T_B = T_B;
    g.N = N;
    g.dt = control_dt;
    g.r = effective_r();
    g.w_bar = std::max(d_bar, v_bar);
    g.iss = IssBound(iss_gain, iss_decay, iss_dist_gain);
    g.mode = validity;
    return g;
}

HelicopterModel ScenarioConfig::helicopter() const {
    HelicopterModel m;
    m.speed_floor = x3_min;
    return m;
}

void ScenarioConfig::validate() const {
    if (duration <= 0.0) throw std::invalid_argument("config: duration must be > 0");
    if (cell <= 0.0 || arena_half <= cell) throw std::invalid_argument("config: bad arena");
    if (fire_r0 <= 0.0) throw std::invalid_argument("config: fire_r0 must be > 0");
    if (sigma_max_true < 0.0 || sigma_max_assumed < 0.0)
        throw std::invalid_argument("config: spread rates must be >= 0");
    auto multiple = [](double a, double b) {
        double s = a / b;
        return std::abs(s - std::llround(s)) < 1e-6;
    };
    if (!multiple(fire_dt, control_dt))
        throw std::invalid_argument("config: fire_dt must be a multiple of control_dt");
    if (!multiple(meas_period, control_dt))
        throw std::invalid_argument("config: meas_period must be a multiple of control_dt");
    if (target_speed < x3_min || v_escape < x3_min)
        throw std::invalid_argument("config: speeds must respect the x3 floor");
    gatekeeper_config().validate();
}

ScenarioConfig ScenarioConfig::preset_config(const std::string& name) {
    ScenarioConfig c;
    if (name == "desk") {
        c.preset = "desk";
    } else if (name == "full") {
        c.preset = "full";
        c.arena_half = 6000.0;
        c.truth_margin = 2500.0;
        c.fire_r0 = 16000.0 / (2.0 * M_PI);  // 16 km initial perimeter
        c.fire2_dist = 1390.0 * c.fire_r0 / 700.0;
        c.fire2_r0 = 220.0 * c.fire_r0 / 700.0;
        c.duration = 3000.0;                 // 50 minutes
        c.record_commits = false;
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }
    return c;
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace

std::map<std::string, std::string> ScenarioConfig::to_key_values() const {
    std::map<std::string, std::string> kv;
    kv["preset"] = preset;
    kv["seed"] = std::to_string(seed);
    kv["filter"] = filter == FilterMode::Gatekeeper ? "gatekeeper" : "off";
    kv["duration"] = fmt_double(duration);
    kv["arena_half"] = fmt_double(arena_half);
    kv["truth_margin"] = fmt_double(truth_margin);
    kv["cell"] = fmt_double(cell);
    kv["fire_center_x"] = fmt_double(fire_center_x);
    kv["fire_center_y"] = fmt_double(fire_center_y);
    kv["fire_r0"] = fmt_double(fire_r0);
    kv["sigma_max_true"] = fmt_double(sigma_max_true);
    kv["sigma_max_assumed"] = fmt_double(sigma_max_assumed);
    kv["sigma_min_frac"] = fmt_double(sigma_min_frac);
    kv["sigma_noise_cells"] = std::to_string(sigma_noise_cells);
    kv["fire_wobble3"] = fmt_double(fire_wobble3);
    kv["fire_wobble5"] = fmt_double(fire_wobble5);
    kv["fire_wobble_n"] = std::to_string(fire_wobble_n);
    kv["fire2_count"] = std::to_string(fire2_count);
    kv["fire2_r0"] = fmt_double(fire2_r0);
    kv["fire2_dist"] = fmt_double(fire2_dist);
    kv["fire2_bearing"] = fmt_double(fire2_bearing);
    kv["fire_dt"] = fmt_double(fire_dt);
    kv["reinit_every"] = std::to_string(reinit_every);
    kv["thermal_range"] = fmt_double(thermal_range);
    kv["meas_period"] = fmt_double(meas_period);
    kv["standoff"] = fmt_double(standoff);
    kv["nominal_spacing"] = fmt_double(nominal_spacing);
    kv["target_speed"] = fmt_double(target_speed);
    kv["start_standoff"] = fmt_double(start_standoff);
    kv["start_angle"] = fmt_double(start_angle);
    kv["control_dt"] = fmt_double(control_dt);
    kv["T_H"] = fmt_double(T_H);
    kv["T_B"] = fmt_double(T_B);
    kv["N"] = std::to_string(N);
    kv["d_bar"] = fmt_double(d_bar);
    kv["v_bar"] = fmt_double(v_bar);
    kv["r_est"] = fmt_double(r_est);
    kv["iss_gain"] = fmt_double(iss_gain);
    kv["iss_decay"] = fmt_double(iss_decay);
    kv["iss_dist_gain"] = fmt_double(iss_dist_gain);
    kv["validity"] = validity == ValidityMode::Robust     ? "robust"
                     : validity == ValidityMode::TubeOnly ? "tube_only"
                                                          : "nominal";
    kv["x3_min"] = fmt_double(x3_min);
    kv["kp_track"] = fmt_double(kp_track);
    kv["kd_track"] = fmt_double(kd_track);
    kv["v_escape"] = fmt_double(v_escape);
    kv["margin_c"] = fmt_double(margin_c);
    kv["freeze_commits_after"] = std::isinf(freeze_commits_after)
                                     ? "inf"
                                     : fmt_double(freeze_commits_after);
    kv["record_commits"] = record_commits ? "1" : "0";
    return kv;
}

void ScenarioConfig::apply(const std::map<std::string, std::string>& kv) {
    auto it = kv.find("preset");
    if (it != kv.end() && it->second != preset) *this = preset_config(it->second);

    for (const auto& [key, val] : kv) {
        if (key == "preset") continue;
        try {
            if (key == "seed") seed = std::stoull(val);
            else if (key == "filter") {
                if (val == "gatekeeper") filter = FilterMode::Gatekeeper;
                else if (val == "off") filter = FilterMode::Off;
                else throw std::invalid_argument("filter must be off|gatekeeper");
            } else if (key == "duration") duration = std::stod(val);
            else if (key == "arena_half") arena_half = std::stod(val);
            else if (key == "truth_margin") truth_margin = std::stod(val);
            else if (key == "cell") cell = std::stod(val);
            else if (key == "fire_center_x") fire_center_x = std::stod(val);
            else if (key == "fire_center_y") fire_center_y = std::stod(val);
            else if (key == "fire_r0") fire_r0 = std::stod(val);
            else if (key == "sigma_max_true") sigma_max_true = std::stod(val);
            else if (key == "sigma_max_assumed") sigma_max_assumed = std::stod(val);
            else if (key == "sigma_min_frac") sigma_min_frac = std::stod(val);
            else if (key == "sigma_noise_cells") sigma_noise_cells = std::stoi(val);
            else if (key == "fire_wobble3") fire_wobble3 = std::stod(val);
            else if (key == "fire_wobble5") fire_wobble5 = std::stod(val);
            else if (key == "fire_wobble_n") fire_wobble_n = std::stoi(val);
            else if (key == "fire2_count") fire2_count = std::stoi(val);
            else if (key == "fire2_r0") fire2_r0 = std::stod(val);
            else if (key == "fire2_dist") fire2_dist = std::stod(val);
            else if (key == "fire2_bearing") fire2_bearing = std::stod(val);
            else if (key == "fire_dt") fire_dt = std::stod(val);
            else if (key == "reinit_every") reinit_every = std::stoi(val);
            else if (key == "thermal_range") thermal_range = std::stod(val);
            else if (key == "meas_period") meas_period = std::stod(val);
            else if (key == "standoff") standoff = std::stod(val);
            else if (key == "nominal_spacing") nominal_spacing = std::stod(val);
            else if (key == "target_speed") target_speed = std::stod(val);
            else if (key == "start_standoff") start_standoff = std::stod(val);
            else if (key == "start_angle") start_angle = std::stod(val);
            else if (key == "control_dt") control_dt = std::stod(val);
            else if (key == "T_H") T_H = std::stod(val);
            else if (key == "T_B") T_B = std::stod(val);
            else if (key == "N") N = std::stoi(val);
            else if (key == "d_bar") d_bar = std::stod(val);
            else if (key == "v_bar") v_bar = std::stod(val);
            else if (key == "r_est") r_est = std::stod(val);
            else if (key == "iss_gain") iss_gain = std::stod(val);
            else if (key == "iss_decay") iss_decay = std::stod(val);
            else if (key == "iss_dist_gain") iss_dist_gain = std::stod(val);
            else if (key == "validity") {
                if (val == "robust") validity = ValidityMode::Robust;
                else if (val == "tube_only") validity = ValidityMode::TubeOnly;
                else if (val == "nominal") validity = ValidityMode::Nominal;
                else throw std::invalid_argument("validity must be nominal|tube_only|robust");
            } else if (key == "x3_min") x3_min = std::stod(val);
            else if (key == "kp_track") kp_track = std::stod(val);
            else if (key == "kd_track") kd_track = std::stod(val);
            else if (key == "v_escape") v_escape = std::stod(val);
            else if (key == "margin_c") margin_c = std::stod(val);
            else if (key == "freeze_commits_after")
                freeze_commits_after = val == "inf"
                                           ? std::numeric_limits<double>::infinity()
                                           : std::stod(val);
            else if (key == "record_commits") record_commits = val != "0";
            else throw std::invalid_argument("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("bad value for config key " + key + ": " + val);
        }
    }
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    bool in_config_section = true;  // plain config files have no sections
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r\n");
        line = line.substr(first, last - first + 1);
        if (line.front() == '[') {  // manifest section header
            in_config_section = line == "[config]";
            continue;
        }
        if (!in_config_section) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value, got: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);
        kv[key] = val;
    }
    ScenarioConfig cfg;
    cfg.apply(kv);
    return cfg;
}

void ScenarioConfig::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot open " + path);
    for (const auto& [k, v] : to_key_values()) out << k << " = " << v << "\n";
}

namespace {

// initial front radius at bearing theta (wavy perimeter)
double initial_front_radius(const ScenarioConfig& cfg, double theta) {
    return cfg.fire_r0 * (1.0 + cfg.fire_wobble3 * std::sin(3.0 * theta) +
                          cfg.fire_wobble5 * std::sin(cfg.fire_wobble_n * theta + 1.0));
}

}  // namespace

FireField make_mission_fire(const ScenarioConfig& cfg) {
    const double half = cfg.truth_half();
    int n = static_cast<int>(std::llround(2.0 * half / cfg.cell)) + 1;
    Grid2 grid{Vec2(-half + cfg.fire_center_x, -half + cfg.fire_center_y), cfg.cell, n, n};
    RosField ros = RosField::smooth_random(grid, cfg.seed ^ 0xF17EF17Eull,
                                           cfg.sigma_min_frac * cfg.sigma_max_true,
                                           cfg.sigma_max_true, cfg.sigma_noise_cells);
    FireField fire = make_circular_fire(grid, cfg.fire_center(), cfg.fire_r0, std::move(ros));
    fire.reinit_every = cfg.reinit_every;
    if (cfg.fire_wobble3 != 0.0 || cfg.fire_wobble5 != 0.0 || cfg.fire2_count > 0) {
        // wavy main front plus satellite ignition disks, then redistance
        std::vector<std::pair<Vec2, double>> satellites = cfg.ignitions();
        satellites.erase(satellites.begin());  // main fire handled radially
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                Vec2 d = grid.pos(i, j) - cfg.fire_center();
                double theta = std::atan2(d.y(), d.x());
                double phi = d.norm() - initial_front_radius(cfg, theta);
                for (const auto& [c, r] : satellites)
                    phi = std::min(phi, (grid.pos(i, j) - c).norm() - r);
                fire.phi[grid.idx(i, j)] = phi;
            }
        reinitialize(fire);
    }
    return fire;
}

double mission_true_distance(const FireField& fire, const ScenarioConfig& cfg,
                             const Vec2& p, double t) {
    const Grid2& g = fire.grid;
    const double xmax = g.origin.x() + (g.nx - 1) * g.cell;
    const double ymax = g.origin.y() + (g.ny - 1) * g.cell;
    if (p.x() >= g.origin.x() && p.y() >= g.origin.y() && p.x() <= xmax && p.y() <= ymax)
        return true_distance_to_fire(fire, p);
    Vec2 b(std::clamp(p.x(), g.origin.x(), xmax), std::clamp(p.y(), g.origin.y(), ymax));
    double clamp_bound = bilinear_sample(g, fire.phi, b);
    double ball_bound = std::numeric_limits<double>::infinity();
    for (const auto& [c, r] : cfg.ignitions())
        ball_bound = std::min(ball_bound, (p - c).norm() - (r + cfg.sigma_max_true * t));
    return std::max(clamp_bound, ball_bound);
}

PriorCompositeSet::PriorCompositeSet(std::shared_ptr<const SdfForecastSet> grid_part,
                                     std::vector<std::pair<Vec2, double>> ignitions,
                                     double t0, double spread)
    : grid_part_(std::move(grid_part)), ignitions_(std::move(ignitions)), t0_(t0),
      spread_(spread) {}

double PriorCompositeSet::signed_distance(const Vec2& p, double t) const {
    double prior = std::numeric_limits<double>::infinity();
    for (const auto& [c, r] : ignitions_)
        prior = std::min(prior, (p - c).norm() - r);
    prior -= spread_ * (t - t0_);
    return std::max(grid_part_->signed_distance(p, t), prior);
}

MapManager::MapManager(const Grid2& grid, std::vector<std::pair<Vec2, double>> ignitions,
                       double t0, double sigma_assumed)
    : grid_(grid), ignitions_(std::move(ignitions)), t0_(t0),
      sigma_assumed_(sigma_assumed), t_last_(t0) {
    phi_fused_.resize(grid_.size());
    for (int j = 0; j < grid_.ny; ++j)
        for (int i = 0; i < grid_.nx; ++i) {
            double prior = std::numeric_limits<double>::infinity();
            for (const auto& [c, r] : ignitions_)
                prior = std::min(prior, (grid_.pos(i, j) - c).norm() - r);
            phi_fused_[grid_.idx(i, j)] = prior;
        }
    fused_set_ = std::make_shared<SdfForecastSet>(grid_, phi_fused_, t_last_, sigma_assumed_);
    composite_ = std::make_shared<PriorCompositeSet>(fused_set_, ignitions_, t0_,
                                                     sigma_assumed_);
    Bitmask all_free{grid_, std::vector<CellState>(grid_.size(), CellState::Free), t_last_};
    nominal_ = std::make_shared<SdfForecastSet>(build_sdf_from_bitmask(all_free, 0.0));
}

void MapManager::update(const Bitmask& mask) {
    if (!mask.grid.same_layout(grid_))
        throw std::invalid_argument("MapManager: mask grid mismatch");
    if (mask.t_meas < t_last_ - 1e-9)
        throw std::invalid_argument("MapManager: measurements must be time-ordered");

    const double decay = sigma_assumed_ * (mask.t_meas - t_last_);
    bool any_free = false;
    for (const CellState& c : mask.cells)
        if (c == CellState::Free) {
            any_free = true;
            break;
        }

    if (any_free) {
        // Aged max-fusion: the perceived set is the union of every
        // observation's individual worst-case forecast, so each rebuild nests
        // the previous one. The extra half diagonal keeps the fused field at
        // or below the true front distance despite cell-center quantization.
        SdfForecastSet raw = build_sdf_from_bitmask(mask, sigma_assumed_);
        const double slack = grid_.cell * M_SQRT2 / 2.0;
        for (int c = 0; c < grid_.size(); ++c)
            phi_fused_[c] = std::max(phi_fused_[c] - decay, raw.phi0()[c] - slack);
    } else {
        for (double& v : phi_fused_) v -= decay;
    }
    t_last_ = mask.t_meas;
    fused_set_ = std::make_shared<SdfForecastSet>(grid_, phi_fused_, t_last_, sigma_assumed_);
    composite_ = std::make_shared<PriorCompositeSet>(fused_set_, ignitions_, t0_,
                                                     sigma_assumed_);

    // the nominal planner works from the current snapshot alone, treating
    // unknown cells as free: no forecast, no memory (myopic by design)
    Bitmask nominal_mask;
    nominal_mask.grid = grid_;
    nominal_mask.t_meas = mask.t_meas;
    nominal_mask.cells.resize(grid_.size());
    for (int c = 0; c < grid_.size(); ++c)
        nominal_mask.cells[c] =
            mask.cells[c] == CellState::Burning ? CellState::Burning : CellState::Free;
    nominal_ = std::make_shared<SdfForecastSet>(build_sdf_from_bitmask(nominal_mask, 0.0));
}

std::function<Vec2(const Vec2&)> MapManager::outward_dir_fn() const {
    // Inverse-square blend of the per-ignition radial directions. Unlike the
    // raw grid gradient this stays smooth across the medial axis between
    // fires, where the gradient flips and would spin the escape policy.
    std::vector<std::pair<Vec2, double>> igns = ignitions_;
    return [igns](const Vec2& p) -> Vec2 {
        Vec2 blend = Vec2::Zero();
        for (const auto& [c, r] : igns) {
            Vec2 radial = p - c;
            double dist = radial.norm();
            if (dist < 1e-6) continue;
            double clearance = std::max(dist - r, 30.0);
            blend += radial / (dist * clearance * clearance);
        }
        double n = blend.norm();
        if (n < 1e-12) return Vec2(1.0, 0.0);
        return blend / n;
    };
}

Trajectory plan_nominal(const SdfForecastSet& perceived, const Vec& x, double t_k,
                        double T_H, double standoff, double speed, double dt,
                        double waypoint_spacing) {
    Vec2 w = x.head<2>();
    double sd0 = perceived.signed_distance(w, t_k);
    if (std::isfinite(sd0) && sd0 < 0.0)
        throw PlannerError("plan_nominal: vehicle inside perceived fire");

    const double k_corr = 0.01;  // full deflection when 90 m off the contour
    const double sd_no_info = 0.45e9;
    Vec2 dir(std::cos(x(3)), std::sin(x(3)));

    // fix traversal chirality from the current direction of travel
    double chi = 1.0;
    {
        Vec2 g = perceived.gradient(w);
        if (g.norm() > 0.2) {
            Vec2 gn = g.normalized();
            Vec2 tau(-gn.y(), gn.x());
            chi = tau.dot(dir) >= 0.0 ? 1.0 : -1.0;
        }
    }

    int n = static_cast<int>(std::llround(T_H / dt));
    Trajectory traj;
    traj.grid = TimeGrid(t_k, dt, n);
    traj.states.reserve(n + 1);
    traj.inputs.assign(n, Vec::Zero(2));

    auto push_state = [&traj, speed](const Vec2& p, const Vec2& d) {
        Vec s(4);
        s << p.x(), p.y(), speed, std::atan2(d.y(), d.x());
        traj.states.push_back(s);
    };
    auto refresh_dir = [&](const Vec2& at) {
        double sd = perceived.signed_distance(at, t_k);
        Vec2 g = perceived.gradient(at);
        if (std::isfinite(sd) && sd < sd_no_info && g.norm() > 0.2) {
            Vec2 gn = g.normalized();
            Vec2 tau = chi * Vec2(-gn.y(), gn.x());
            double corr = std::clamp(k_corr * (sd - standoff), -0.9, 0.9);
            dir = (tau - corr * gn).normalized();
        }
        // no usable fire information: continue straight
    };

    // the contour direction is refreshed at waypoint resolution, not every
    // sample: the reference is a coarse gradient-orthogonal polyline
    refresh_dir(w);
    push_state(w, dir);
    double since_refresh = 0.0;
    for (int i = 0; i < n; ++i) {
        if (since_refresh >= waypoint_spacing) {
            refresh_dir(w);
            since_refresh = 0.0;
        }
        w += speed * dt * dir;
        since_refresh += speed * dt;
        push_state(w, dir);
    }
    return traj;
}

void MetricsLog::write_metrics_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot open " + path);
    out.precision(17);
    out << "t,x1,x2,dist_m,speed_mps,track_err_m\n";
    for (size_t i = 0; i < t.size(); ++i)
        out << t[i] << "," << x1[i] << "," << x2[i] << "," << dist[i] << "," << speed[i]
            << "," << track_err[i] << "\n";
}

void MetricsLog::write_commits_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("commits: cannot open " + path);
    out << "k,t_k,T_S_star,verdict,reject_reason,compute_ms\n";
    out.precision(17);
    for (const IterationRecord& r : iterations)
        out << r.k << "," << r.t_k << "," << r.T_S_star << ","
            << (r.committed ? "committed" : "rejected-all") << "," << r.reject_reason
            << "," << r.compute_ms << "\n";
}

MetricsLog MetricsLog::read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("metrics: cannot open " + path);
    MetricsLog log;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        double vals[6];
        for (int i = 0; i < 6; ++i) {
            if (!std::getline(ss, tok, ',')) throw std::runtime_error("metrics: short row");
            vals[i] = std::stod(tok);
        }
        log.t.push_back(vals[0]);
        log.x1.push_back(vals[1]);
        log.x2.push_back(vals[2]);
        log.dist.push_back(vals[3]);
        log.speed.push_back(vals[4]);
        log.track_err.push_back(vals[5]);
    }
    return log;
}

MissionArtifacts run_mission(const ScenarioConfig& cfg) {
    cfg.validate();
    MissionArtifacts art;
    art.cfg = cfg;
    MetricsLog& log = art.log;
    log.assumption_breach = cfg.assumption_breach();

    FireField fire = make_mission_fire(cfg);
    HelicopterModel heli = cfg.helicopter();
    HeliTrackingGains gains = cfg.gains();
    GatekeeperConfig gcfg = cfg.gatekeeper_config();
    ThermalSensor sensor{cfg.thermal_range, 1.0 / cfg.meas_period};
    MapManager maps(fire.grid, cfg.ignitions(), 0.0, cfg.sigma_max_assumed);
    DisturbanceSpec dist{cfg.d_bar, cfg.v_bar};

    std::mt19937_64 rng_est(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    std::mt19937_64 rng_dist(cfg.seed ^ 0xC2B2AE3D27D4EB4Full);

    Vec x(4);
    {
        double orbit = initial_front_radius(cfg, cfg.start_angle) + cfg.start_standoff;
        Vec2 p = cfg.fire_center() +
                 orbit * Vec2(std::cos(cfg.start_angle), std::sin(cfg.start_angle));
        x << p.x(), p.y(), cfg.target_speed, cfg.start_angle + M_PI / 2.0;
    }

    auto estimate = [&](const Vec& xt) {
        if (cfg.v_bar <= 0.0) return xt;
        Vec xh = xt;
        Vec n = DisturbanceSpec::sample_in_ball(rng_est, 2, cfg.v_bar);
        xh(0) += n(0);
        xh(1) += n(1);
        return xh;
    };
    auto true_dist = [&](const Vec2& p, double t) {
        return mission_true_distance(fire, cfg, p, t);
    };
    auto make_problem = [&]() {
        GatekeeperProblem prob;
        prob.f = heli.dynamics();
        HelicopterModel hm = heli;
        HeliTrackingGains hg = gains;
        prob.tracking_law = [hm, hg](const Vec& xs, const Vec& ref) {
            return heli_tracking_control(hm, hg, xs, ref);
        };
        auto dir_fn = maps.outward_dir_fn();
        auto B = maps.perceived();
        double v_esc = cfg.v_escape;
        double speed_min = cfg.sigma_max_assumed + 1.0;
        double margin_c = cfg.margin_c;
        prob.backup_factory = [hm, dir_fn, B, v_esc, speed_min,
                               margin_c](const BackupRequest&) {
            BackupInstance inst;
            inst.policy = HeliEscapeBackupPolicy(hm, dir_fn, v_esc);
            inst.set = std::make_shared<HeliEscapeSet>(B, dir_fn, margin_c, speed_min);
            return inst;
        };
        return prob;
    };

    // initial measurement, plan, and commitment at t = 0
    Bitmask mask = sense(fire, sensor, x.head<2>(), 0.0);
    maps.update(mask);
    Vec x_hat = estimate(x);
    Trajectory p_nom = plan_nominal(maps.nominal_map(), x_hat, 0.0, cfg.T_H, cfg.standoff,
                                    cfg.target_speed, cfg.control_dt, cfg.nominal_spacing);
    CommitState commit_state;
    if (cfg.filter == FilterMode::Gatekeeper) {
        auto t0 = std::chrono::steady_clock::now();
        commit_state = initialize_commit(gcfg, make_problem(), x_hat, 0.0, maps.perceived());
        auto t1 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.k = 0;
        rec.t_k = 0.0;
        rec.T_S_star = 0.0;
        rec.committed = true;
        rec.compute_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        log.iterations.push_back(rec);
        if (cfg.record_commits) art.commits.push_back(commit_state.commit());
    }

    auto log_row = [&](double t) {
        log.t.push_back(t);
        log.x1.push_back(x(0));
        log.x2.push_back(x(1));
        log.dist.push_back(true_dist(x.head<2>(), t));
        log.speed.push_back(x(2));
        double err = 0.0;
        if (cfg.filter == FilterMode::Gatekeeper)
            err = (x.head<2>() - commit_state.committed_state(t).head<2>()).norm();
        log.track_err.push_back(err);
    };
    log_row(0.0);

    const int n_steps = static_cast<int>(std::llround(cfg.duration / cfg.control_dt));
    const int steps_per_fire = static_cast<int>(std::llround(cfg.fire_dt / cfg.control_dt));
    const int steps_per_meas =
        static_cast<int>(std::llround(cfg.meas_period / cfg.control_dt));

    for (int i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * cfg.control_dt;

        if (i > 0 && i % steps_per_fire == 0) fire = step_levelset(fire, cfg.fire_dt);

        if (i > 0 && i % steps_per_meas == 0) {
            mask = sense(fire, sensor, x.head<2>(), t);
            maps.update(mask);
            x_hat = estimate(x);
            bool plan_ok = true;
            try {
                p_nom = plan_nominal(maps.nominal_map(), x_hat, t, cfg.T_H, cfg.standoff,
                                     cfg.target_speed, cfg.control_dt, cfg.nominal_spacing);
            } catch (const PlannerError&) {
                ++log.planner_errors;
                plan_ok = false;
            }
            if (cfg.filter == FilterMode::Gatekeeper && plan_ok &&
                t < cfg.freeze_commits_after) {
                GatekeeperProblem prob = make_problem();
                IterationOutcome out =
                    iterate(commit_state, gcfg, prob, p_nom, x_hat, t, maps.perceived());
                IterationRecord rec;
                rec.k = static_cast<int>(log.iterations.size());
                rec.t_k = t;
                rec.T_S_star = out.T_S_star;
                rec.committed = out.committed;
                rec.reject_reason = out.committed ? "" : verdict_name(out.first_verdict);
                rec.compute_ms = out.compute_ms;
                log.iterations.push_back(rec);
                if (out.committed && cfg.record_commits)
                    art.commits.push_back(commit_state.commit());
            }
        }

        // control, held over this step
        Vec x_ctl = estimate(x);
        Vec u;
        if (cfg.filter == FilterMode::Gatekeeper) {
            if (t < commit_state.stored_end() - 1e-9) {
                Vec ref = commit_state.committed_state(t);
                Vec u_ff = commit_state.committed_input(t);
                u = heli_tracking_with_ff(heli, gains, x_ctl, ref, u_ff);
            } else {
                u = commit_state.backup_input(t, x_ctl);
            }
        } else {
            double tq = std::clamp(t, p_nom.grid.t_start, p_nom.grid.t_end());
            u = heli_tracking_control(heli, gains, x_ctl, p_nom.state_at(tq));
        }

        if (cfg.d_bar > 0.0) {
            Vec d = dist.sample_state_disturbance(rng_dist, 4);
            Dynamics f = heli.dynamics();
            Dynamics fd = [f, d](const Vec& xs, const Vec& us) { return Vec(f(xs, us) + d); };
            x = rk4_held_step(fd, x, u, cfg.control_dt);
        } else {
            x = rk4_held_step(heli.dynamics(), x, u, cfg.control_dt);
        }
        log_row(static_cast<double>(i + 1) * cfg.control_dt);
    }
    return art;
}

double stat_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stat_sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = stat_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double stat_quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    int lo = static_cast<int>(std::floor(pos));
    int hi = std::min(lo + 1, static_cast<int>(v.size()) - 1);
    double a = pos - lo;
    return (1.0 - a) * v[lo] + a * v[hi];
}

SummaryStats summarize(const MetricsLog& log) {
    if (log.t.empty()) throw std::invalid_argument("summarize: empty log");
    SummaryStats s;
    s.dist_min_km = *std::min_element(log.dist.begin(), log.dist.end()) / 1000.0;
    s.dist_mean_km = stat_mean(log.dist) / 1000.0;
    s.dist_std_km = stat_sample_std(log.dist) / 1000.0;
    s.speed_mean = stat_mean(log.speed);
    s.speed_std = stat_sample_std(log.speed);
    std::vector<double> comp;
    for (const IterationRecord& r : log.iterations) {
        comp.push_back(r.compute_ms);
        if (r.committed) ++s.n_committed;
        else ++s.n_rejected_all;
    }
    s.n_iterations = static_cast<int>(log.iterations.size());
    if (!comp.empty()) {
        s.comp_median_ms = stat_quantile(comp, 0.5);
        s.comp_iqr_ms = stat_quantile(comp, 0.75) - stat_quantile(comp, 0.25);
    }
    s.unsafe = s.dist_min_km < 0.0;
    s.breach = log.assumption_breach;
    return s;
}

std::string format_summary(const SummaryStats& s) {
    char buf[512];
    std::string out;
    out += "                Distance to Fire [km]    Speed [m/s]    Comp. time [ms]\n";
    out += "                Min     Mean    Std      Mean    Std    Median  IQR\n";
    std::snprintf(buf, sizeof(buf),
                  "run             %-7.3f %-7.3f %-8.3f %-7.2f %-6.2f %-7.2f %-7.2f %s\n",
                  s.dist_min_km, s.dist_mean_km, s.dist_std_km, s.speed_mean, s.speed_std,
                  s.comp_median_ms, s.comp_iqr_ms, s.unsafe ? "Unsafe" : "Safe");
    out += buf;
    std::snprintf(buf, sizeof(buf), "iterations: %d  committed: %d  rejected-all: %d\n",
                  s.n_iterations, s.n_committed, s.n_rejected_all);
    out += buf;
    if (s.breach)
        out += "*** ASSUMPTION BREACH: assumed max spread rate is below the true bound; "
               "safety guarantees are void ***\n";
    return out;
}

}  // namespace gk
