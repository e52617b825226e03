#include "glvl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace glvl {

namespace {

std::string svg_header(double w, double h) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    return out.str();
}

}  // namespace

std::string match_svg(const Image& a, const Image& b, const MatchSet& matches) {
    const double gap = 20;
    double w = a.width + gap + b.width;
    double h = std::max(a.height, b.height);
    std::ostringstream out;
    out << svg_header(w, h);
    out << "<rect x=\"0\" y=\"0\" width=\"" << a.width << "\" height=\"" << a.height
        << "\" fill=\"#f0f0f0\" stroke=\"#888\"/>\n";
    out << "<rect x=\"" << a.width + gap << "\" y=\"0\" width=\"" << b.width << "\" height=\""
        << b.height << "\" fill=\"#f0f0f0\" stroke=\"#888\"/>\n";
    double xoff = a.width + gap;
    for (const auto& m : matches) {
        out << "<line x1=\"" << m.a.x << "\" y1=\"" << m.a.y << "\" x2=\"" << xoff + m.b.x
            << "\" y2=\"" << m.b.y << "\" stroke=\"#2a7\" stroke-width=\"0.6\"/>\n";
        out << "<circle cx=\"" << m.a.x << "\" cy=\"" << m.a.y << "\" r=\"1.5\" fill=\"#d33\"/>\n";
        out << "<circle cx=\"" << xoff + m.b.x << "\" cy=\"" << m.b.y
            << "\" r=\"1.5\" fill=\"#d33\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string trajectory_svg(const FlightLog& log, const GeoSidecar& map) {
    const double size = 800;
    auto to_xy = [&](const GeoPoint& g) {
        double x = (g.lon - map.ll.lon) / (map.ur.lon - map.ll.lon) * size;
        double y = (map.ur.lat - g.lat) / (map.ur.lat - map.ll.lat) * size;
        return std::pair<double, double>(x, y);
    };
    std::ostringstream out;
    out << svg_header(size, size);
    out << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size
        << "\" fill=\"#fafafa\" stroke=\"#444\"/>\n";

    auto polyline = [&](bool use_truth, const char* color) {
        std::ostringstream pts;
        for (const auto& r : log.results) {
            const auto& p = use_truth ? r.truth : r.predicted;
            if (!p) continue;
            auto [x, y] = to_xy(*p);
            pts << x << "," << y << " ";
        }
        std::string s = pts.str();
        if (!s.empty())
            out << "<polyline points=\"" << s << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.2\"/>\n";
    };
    polyline(true, "#36c");
    polyline(false, "#d33");
    for (const auto& r : log.results) {
        if (r.predicted) {
            auto [x, y] = to_xy(*r.predicted);
            out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.5\" fill=\"#d33\"/>\n";
        }
        if (r.truth) {
            auto [x, y] = to_xy(*r.truth);
            out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2\" fill=\"#36c\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::string error_scatter_svg(const FlightLog& log) {
    const double w = 800, h = 400, margin = 40;
    double max_err = 1.0;
    int max_id = 1;
    for (const auto& r : log.results) {
        if (r.error_m) max_err = std::max(max_err, *r.error_m);
        max_id = std::max(max_id, r.frame_id);
    }
    std::ostringstream out;
    out << svg_header(w, h);
    out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << w - 2 * margin
        << "\" height=\"" << h - 2 * margin << "\" fill=\"#fafafa\" stroke=\"#444\"/>\n";
    for (const auto& r : log.results) {
        double x = margin + double(r.frame_id) / max_id * (w - 2 * margin);
        if (r.error_m) {
            double y = h - margin - (*r.error_m / max_err) * (h - 2 * margin);
            out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"#36c\"/>\n";
        } else {
            // Failed frames drawn at the axis in red.
            out << "<circle cx=\"" << x << "\" cy=\"" << h - margin
                << "\" r=\"3\" fill=\"#d33\"/>\n";
        }
    }
    out << "<text x=\"" << margin << "\" y=\"" << margin - 10 << "\" font-size=\"12\">error_m (max "
        << max_err << ")</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace glvl
