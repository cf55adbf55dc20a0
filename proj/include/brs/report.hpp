#pragma once

#include <array>
#include <string>
#include <vector>

#include "brs/extract.hpp"
#include "brs/sim.hpp"

namespace brs {

/// Minimal self-contained SVG scatter/line plot over a fixed data window.
class SvgPlot {
public:
    SvgPlot(double xlo, double xhi, double ylo, double yhi, int width = 720, int height = 720);

    void polyline(const std::vector<std::array<double, 2>>& pts, const std::string& color,
                  double stroke_width, bool closed = false);
    void point(double x, double y, const std::string& color, double radius);
    std::string finish(const std::string& title, const std::string& run_id) const;

private:
    double px(double x) const;
    double py(double y) const;
    double xlo_, xhi_, ylo_, yhi_;
    int width_, height_;
    std::string body_;
};

std::string trajectory_csv(const Trajectory& tr, const std::vector<std::string>& states,
                           const std::vector<std::string>& inputs, const std::string& run_id);

std::string samples_csv(const BrsEstimate& est, const std::vector<std::string>& states,
                        double radius, const std::string& run_id);

struct RunManifest {
    std::string run_id;
    std::string command;
    std::string problem_hash;
    int k = 0;
    std::string mode;
    double feas_tol = 0, gap_tol = 0;
    int max_iter = 0;
    std::uint64_t seed = 0;
    std::string started, finished;
    std::string status;
    std::vector<std::string> files;
    double pstar = 0, gap = 0, brs_volume = 0, brs_ci = 0;
};

/// Appends one JSON line to <dir>/manifest.jsonl (append-only per directory).
void append_manifest(const std::string& dir, const RunManifest& m);

std::string timestamp_utc();

}  // namespace brs
