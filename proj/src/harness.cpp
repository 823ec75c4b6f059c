#include "gk/harness.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace gk {

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path);
    out << "# firewatch run manifest\n";
    out << "[run]\n";
    out << "version = " << version << "\n";
    out << "started = " << started << "\n";
    out << "finished = " << finished << "\n";
    out << "elapsed_s = " << elapsed_s << "\n";
    out << "[files]\n";
    out << "metrics = " << metrics_file << "\n";
    out << "commits = " << commits_file << "\n";
    out << "summary = " << summary_file << "\n";
    out << "[config]\n";
    for (const auto& [k, v] : cfg.to_key_values()) out << k << " = " << v << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
    RunManifest m;
    m.cfg = ScenarioConfig::from_file(path);  // parses the [config] section
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    std::string line, section;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            section = line;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, line.find_first_of(" ="));
        std::string val = line.substr(eq + 1);
        val = val.substr(val.find_first_not_of(' '));
        if (section == "[run]") {
            if (key == "version") m.version = val;
            else if (key == "started") m.started = val;
            else if (key == "finished") m.finished = val;
            else if (key == "elapsed_s") m.elapsed_s = std::stod(val);
        } else if (section == "[files]") {
            if (key == "metrics") m.metrics_file = val;
            else if (key == "commits") m.commits_file = val;
            else if (key == "summary") m.summary_file = val;
        }
    }
    return m;
}

std::string write_run(const std::string& dir, const MissionArtifacts& art,
                      const std::string& started, const std::string& finished,
                      double elapsed_s) {
    fs::create_directories(dir);
    RunManifest manifest;
    manifest.cfg = art.cfg;
    manifest.started = started;
    manifest.finished = finished;
    manifest.elapsed_s = elapsed_s;
    art.log.write_metrics_csv(dir + "/" + manifest.metrics_file);
    art.log.write_commits_csv(dir + "/" + manifest.commits_file);
    if (!art.commits.empty())
        art.commits.back().traj.write_csv(dir + "/committed_final.csv");
    SummaryStats stats = summarize(art.log);
    std::string text = format_summary(stats);
    {
        std::ofstream out(dir + "/" + manifest.summary_file);
        out << text;
    }
    manifest.write(dir + "/manifest.txt");
    return text;
}

SummaryStats summarize_run(const std::string& run_dir) {
    RunManifest m = RunManifest::read(run_dir + "/manifest.txt");
    MetricsLog log = MetricsLog::read_metrics_csv(run_dir + "/" + m.metrics_file);
    log.assumption_breach = m.cfg.assumption_breach();
    // rebuild iteration records from the commit log
    std::ifstream in(run_dir + "/" + m.commits_file);
    if (!in) throw std::runtime_error("summarize_run: missing " + m.commits_file);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        IterationRecord r;
        std::stringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        r.k = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.t_k = std::stod(tok);
        std::getline(ss, tok, ',');
        r.T_S_star = std::stod(tok);
        std::getline(ss, tok, ',');
        r.committed = tok == "committed";
        std::getline(ss, tok, ',');
        r.reject_reason = tok;
        std::getline(ss, tok, ',');
        r.compute_ms = std::stod(tok);
        log.iterations.push_back(r);
    }
    return summarize(log);
}

void emit_plot_data(const std::string& run_dir, double contour_interval) {
    std::vector<std::string> missing;
    for (const char* f : {"manifest.txt", "metrics.csv", "commits.csv"})
        if (!fs::exists(run_dir + "/" + f)) missing.push_back(f);
    if (!missing.empty()) {
        std::string what = "emit_plot_data: incomplete run, missing:";
        for (const std::string& f : missing) what += " " + f;
        throw std::runtime_error(what);
    }
    RunManifest m = RunManifest::read(run_dir + "/manifest.txt");
    MetricsLog log = MetricsLog::read_metrics_csv(run_dir + "/" + m.metrics_file);
    fs::create_directories(run_dir + "/plots");

    {
        std::ofstream out(run_dir + "/plots/distance_vs_t.csv");
        out.precision(17);
        out << "t,dist_m\n";
        for (size_t i = 0; i < log.t.size(); ++i) out << log.t[i] << "," << log.dist[i] << "\n";
    }
    {
        std::ofstream out(run_dir + "/plots/speed_vs_t.csv");
        out.precision(17);
        out << "t,speed_mps\n";
        for (size_t i = 0; i < log.t.size(); ++i)
            out << log.t[i] << "," << log.speed[i] << "\n";
    }
    {
        std::ofstream out(run_dir + "/plots/trajectory_trace.csv");
        out.precision(17);
        out << "t,x1,x2\n";
        for (size_t i = 0; i < log.t.size(); ++i)
            out << log.t[i] << "," << log.x1[i] << "," << log.x2[i] << "\n";
    }
    {
        // fire front snapshots from the deterministic re-simulation
        std::ofstream out(run_dir + "/plots/fire_contours.csv");
        out.precision(10);
        out << "t,x,y\n";
        FireField fire = make_mission_fire(m.cfg);
        double next_snap = 0.0;
        for (double t = 0.0; t <= m.cfg.duration + 1e-9; t += m.cfg.fire_dt) {
            if (t + 1e-9 >= next_snap) {
                const Grid2& g = fire.grid;
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i + 1 < g.nx; ++i) {
                        double a = fire.phi[g.idx(i, j)];
                        double b = fire.phi[g.idx(i + 1, j)];
                        if (a * b < 0.0) {
                            double frac = a / (a - b);
                            Vec2 p = g.pos(i, j) + Vec2(frac * g.cell, 0.0);
                            out << t << "," << p.x() << "," << p.y() << "\n";
                        }
                    }
                next_snap += contour_interval;
            }
            fire = step_levelset(fire, m.cfg.fire_dt);
        }
    }
}

}  // namespace gk
