#include "brs/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace brs {

SvgPlot::SvgPlot(double xlo, double xhi, double ylo, double yhi, int width, int height)
    : xlo_(xlo), xhi_(xhi), ylo_(ylo), yhi_(yhi), width_(width), height_(height) {}

double SvgPlot::px(double x) const { return 40 + (x - xlo_) / (xhi_ - xlo_) * (width_ - 80); }
double SvgPlot::py(double y) const { return height_ - 40 - (y - ylo_) / (yhi_ - ylo_) * (height_ - 80); }

void SvgPlot::polyline(const std::vector<std::array<double, 2>>& pts, const std::string& color,
                       double stroke_width, bool closed) {
    if (pts.size() < 2) return;
    std::ostringstream os;
    os << "<path d=\"M";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        os << (i ? " L" : "") << px(pts[i][0]) << " " << py(pts[i][1]);
    }
    if (closed) os << " Z";
    os << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke_width
       << "\"/>\n";
    body_ += os.str();
}

void SvgPlot::point(double x, double y, const std::string& color, double radius) {
    std::ostringstream os;
    os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << radius << "\" fill=\""
       << color << "\"/>\n";
    body_ += os.str();
}

std::string SvgPlot::finish(const std::string& title, const std::string& run_id) const {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<!-- brsynth plot run " << run_id << " -->\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
       << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<rect x=\"40\" y=\"40\" width=\"" << width_ - 80 << "\" height=\"" << height_ - 80
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << width_ / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"14\">" << title << "</text>\n";
    os << body_;
    os << "</svg>\n";
    return os.str();
}

std::string trajectory_csv(const Trajectory& tr, const std::vector<std::string>& states,
                           const std::vector<std::string>& inputs, const std::string& run_id) {
    std::ostringstream os;
    os << "# brsynth trajectory run " << run_id << "\n";
    os << "t";
    for (const auto& s : states) os << "," << s;
    for (const auto& u : inputs) os << "," << u;
    os << "\n";
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        os << format_double(tr.t[i]);
        for (int j = 0; j < tr.x[i].size(); ++j) os << "," << format_double(tr.x[i][j]);
        for (int j = 0; j < tr.u[i].size(); ++j) os << "," << format_double(tr.u[i][j]);
        os << "\n";
    }
    return os.str();
}

std::string samples_csv(const BrsEstimate& est, const std::vector<std::string>& states,
                        double radius, const std::string& run_id) {
    std::ostringstream os;
    os << "# brsynth reachability samples run " << run_id << " radius " << format_double(radius)
       << "\n";
    for (const auto& s : states) os << s << ",";
    os << "success,hit_time\n";
    for (std::size_t i = 0; i < est.x0.size(); ++i) {
        for (int j = 0; j < est.x0[i].size(); ++j) os << format_double(est.x0[i][j]) << ",";
        os << int(est.success[i]) << "," << format_double(est.hit_time[i]) << "\n";
    }
    return os.str();
}

void append_manifest(const std::string& dir, const RunManifest& m) {
    nlohmann::json j;
    j["run_id"] = m.run_id;
    j["command"] = m.command;
    j["problem_hash"] = m.problem_hash;
    j["k"] = m.k;
    j["mode"] = m.mode;
    j["options"] = {{"feas_tol", m.feas_tol}, {"gap_tol", m.gap_tol}, {"max_iter", m.max_iter}};
    j["seed"] = m.seed;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["status"] = m.status;
    j["files"] = m.files;
    j["headline"] = {{"pstar", m.pstar},
                     {"gap", m.gap},
                     {"brs_volume", m.brs_volume},
                     {"brs_ci", m.brs_ci}};
    std::ofstream out(dir + "/manifest.jsonl", std::ios::app);
    if (!out) throw std::runtime_error("cannot append manifest in '" + dir + "'");
    out << j.dump() << "\n";
}

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    return buf;
}

}  // namespace brs
