#include "mambaio/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mambaio/errors.hpp"

namespace mambaio::plot {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// round a span to a tick step of 1/2/5 x 10^k
double tick_step(double span) {
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    if (r < 1.5) return mag;
    if (r < 3.5) return 2 * mag;
    if (r < 7.5) return 5 * mag;
    return 10 * mag;
}

}  // namespace

std::string trajectory_svg(const metrics::Trajectory& est, const metrics::Trajectory& gt,
                           int width, int height) {
    est.validate();
    gt.validate();
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto* traj : {&est, &gt})
        for (const auto& p : traj->positions) {
            xmin = std::min(xmin, p[0]);
            xmax = std::max(xmax, p[0]);
            ymin = std::min(ymin, p[1]);
            ymax = std::max(ymax, p[1]);
        }
    const double padx = std::max(1e-6, (xmax - xmin) * 0.05);
    const double pady = std::max(1e-6, (ymax - ymin) * 0.05);
    xmin -= padx;
    xmax += padx;
    ymin -= pady;
    ymax += pady;

    const int m = 48;  // margin for labels
    auto sx = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (width - 2 * m); };
    auto sy = [&](double y) { return height - m - (y - ymin) / (ymax - ymin) * (height - 2 * m); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << width - 2 * m << "\" height=\""
      << height - 2 * m << "\" fill=\"none\" stroke=\"#999\"/>\n";

    const double stepx = tick_step(xmax - xmin), stepy = tick_step(ymax - ymin);
    for (double x = std::ceil(xmin / stepx) * stepx; x <= xmax; x += stepx) {
        s << "<line x1=\"" << fmt(sx(x)) << "\" y1=\"" << height - m << "\" x2=\"" << fmt(sx(x))
          << "\" y2=\"" << height - m + 5 << "\" stroke=\"#333\"/>\n";
        s << "<text x=\"" << fmt(sx(x)) << "\" y=\"" << height - m + 18
          << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
    }
    for (double y = std::ceil(ymin / stepy) * stepy; y <= ymax; y += stepy) {
        s << "<line x1=\"" << m - 5 << "\" y1=\"" << fmt(sy(y)) << "\" x2=\"" << m << "\" y2=\""
          << fmt(sy(y)) << "\" stroke=\"#333\"/>\n";
        s << "<text x=\"" << m - 8 << "\" y=\"" << fmt(sy(y) + 4)
          << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
    }

    auto polyline = [&](const metrics::Trajectory& t, const char* color) {
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : t.positions) s << fmt(sx(p[0])) << ',' << fmt(sy(p[1])) << ' ';
        s << "\"/>\n";
    };
    polyline(gt, "#1a7f37");
    polyline(est, "#cf222e");
    s << "<text x=\"" << m + 8 << "\" y=\"" << m + 16
      << "\" font-size=\"12\" fill=\"#1a7f37\">ground truth</text>\n";
    s << "<text x=\"" << m + 8 << "\" y=\"" << m + 32
      << "\" font-size=\"12\" fill=\"#cf222e\">estimate</text>\n";
    s << "</svg>\n";
    return s.str();
}

void write_trajectory_svg(const std::string& path, const metrics::Trajectory& est,
                          const metrics::Trajectory& gt) {
    std::ofstream f(path);
    if (!f) throw ConfigError("plot: cannot write " + path);
    f << trajectory_svg(est, gt);
}

}  // namespace mambaio::plot
