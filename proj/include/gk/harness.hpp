#pragma once

#include "gk/fire_mission.hpp"

namespace gk {

inline constexpr const char* kVersion = "0.1.0";

/// Everything needed to reproduce and inspect a run: the full config
/// snapshot, seed, code version, wall times, and the output file names.
struct RunManifest {
    ScenarioConfig cfg;
    std::string version = kVersion;
    std::string started;
    std::string finished;
    double elapsed_s = 0.0;
    std::string metrics_file = "metrics.csv";
    std::string commits_file = "commits.csv";
    std::string summary_file = "summary.txt";

    void write(const std::string& path) const;
    static RunManifest read(const std::string& path);
};

/// Write manifest + metrics + commit log + summary into `dir` (created if
/// missing). Returns the summary text.
std::string write_run(const std::string& dir, const MissionArtifacts& art,
                      const std::string& started, const std::string& finished,
                      double elapsed_s);

/// Plot-ready CSV series from a completed run directory:
/// distance_vs_t.csv, speed_vs_t.csv, trajectory_trace.csv,
/// fire_contours.csv (front snapshots re-simulated from the manifest).
/// Throws listing missing artifacts if the run is incomplete.
void emit_plot_data(const std::string& run_dir, double contour_interval = 60.0);

/// Summary statistics recomputed from a run directory.
SummaryStats summarize_run(const std::string& run_dir);

std::string utc_timestamp();

}  // namespace gk
