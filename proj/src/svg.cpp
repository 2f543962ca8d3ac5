#include "reachcert/svg.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace reachcert {

namespace {

struct View {
    double x0, y0, x1, y1;  // world window
    double px = 720.0;      // output width
    double scale() const { return px / (x1 - x0); }
    double py() const { return (y1 - y0) * scale(); }
    double sx(double x) const { return (x - x0) * scale(); }
    double sy(double y) const { return (y1 - y) * scale(); }  // flip y
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

void render_svg(const Scenario& sc, const std::vector<Trajectory>& trajectories,
                const std::string& path) {
    View v{0, 0, 1, 1};
    if (sc.environment) {
        v = View{0, 0, sc.environment->width, sc.environment->height};
    } else {
        double span = 1.2;
        if (sc.chat) {
            if (auto ball = as_ball(sc.chat->constraints[0]))
                span = ball->radius * 1.15;
        }
        v = View{-span, -span, span, span};
    }

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << v.px << "\" height=\""
       << v.py() << "\" viewBox=\"0 0 " << v.px << " " << v.py() << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\" stroke=\"#333\"/>\n";

    if (sc.environment) {
        for (const auto& o : sc.environment->obstacles) {
            if (o.shape == Obstacle::Shape::Rect) {
                os << "<rect x=\"" << v.sx(o.x) << "\" y=\"" << v.sy(o.y + o.h)
                   << "\" width=\"" << o.w * v.scale() << "\" height=\"" << o.h * v.scale()
                   << "\" fill=\"#555\"/>\n";
            } else {
                os << "<circle cx=\"" << v.sx(o.x) << "\" cy=\"" << v.sy(o.y) << "\" r=\""
                   << o.r * v.scale() << "\" fill=\"#555\"/>\n";
            }
        }
    }

    auto draw_set_ball = [&](const SemiAlgebraicSet& set, const char* stroke,
                             const char* fill) {
        for (const auto& c : set.constraints)
            if (auto ball = as_ball(c))
                os << "<circle cx=\"" << v.sx(ball->center[0]) << "\" cy=\""
                   << v.sy(ball->center[1]) << "\" r=\"" << ball->radius * v.scale()
                   << "\" fill=\"" << fill << "\" stroke=\"" << stroke
                   << "\" stroke-width=\"1.5\"/>\n";
    };

    if (sc.safe_set) draw_set_ball(*sc.safe_set, "#2ca02c", "none");
    if (sc.chat) draw_set_ball(*sc.chat, "#999", "none");
    for (const auto& t : sc.targets) draw_set_ball(t, "#b8860b", "#ffeb8a");

    int color = 0;
    for (const auto& traj : trajectories) {
        if (traj.states.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 5]
           << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& st : traj.states) os << v.sx(st[0]) << "," << v.sy(st[1]) << " ";
        os << "\"/>\n";
        os << "<circle cx=\"" << v.sx(traj.states.front()[0]) << "\" cy=\""
           << v.sy(traj.states.front()[1]) << "\" r=\"3\" fill=\"" << kPalette[color % 5]
           << "\"/>\n";
        ++color;
    }
    os << "</svg>\n";

    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << os.str();
}

}  // namespace reachcert
