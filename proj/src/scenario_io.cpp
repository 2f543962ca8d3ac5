#include "reachcert/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace reachcert {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
    throw ScenarioError("field '" + field + "': " + why);
}

const json& require(const json& j, const std::string& field) {
    if (!j.contains(field)) fail(field, "missing");
    return j.at(field);
}

Polynomial poly_field(const json& j, const std::string& field, std::size_t n_vars) {
    if (!j.is_string()) fail(field, "expected a polynomial string");
    try {
        return parse_polynomial(j.get<std::string>(), n_vars);
    } catch (const std::exception& e) {
        fail(field, e.what());
    }
}

SemiAlgebraicSet set_field(const json& j, const std::string& field, std::size_t n) {
    std::vector<Polynomial> cs;
    if (j.is_object() && j.contains("ball")) {
        const auto& b = j.at("ball");
        auto center = b.at("center").get<std::vector<double>>();
        double radius = b.at("radius").get<double>();
        if (center.size() != n) fail(field, "ball center arity mismatch");
        Polynomial p(n);
        double c0 = -radius * radius;
        for (std::size_t i = 0; i < n; ++i) {
            Monomial sq(n);
            sq.exps[i] = 2;
            p.add_term(sq, 1.0);
            Monomial li(n);
            li.exps[i] = 1;
            p.add_term(li, -2.0 * center[i]);
            c0 += center[i] * center[i];
        }
        p.add_term(Monomial(n), c0);
        cs.push_back(p);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i)
            cs.push_back(poly_field(j[i], field + "[" + std::to_string(i) + "]", n));
    } else {
        fail(field, "expected a constraint array or a ball object");
    }
    if (cs.empty()) fail(field, "needs at least one constraint");
    return SemiAlgebraicSet(n, std::move(cs));
}

ControlDistribution dist_field(const json& j) {
    std::string kind = require(j, "kind").get<std::string>();
    if (kind == "uniform_box") {
        auto bounds = require(j, "bounds").get<std::vector<std::vector<double>>>();
        std::vector<std::pair<double, double>> b;
        for (const auto& r : bounds) {
            if (r.size() != 2) fail("control_distribution.bounds", "each entry is [lo,hi]");
            b.emplace_back(r[0], r[1]);
        }
        return ControlDistribution::uniform_box(std::move(b));
    }
    if (kind == "dubins_polar") {
        auto v = require(j, "v").get<std::vector<double>>();
        if (v.size() != 2) fail("control_distribution.v", "expected [lo,hi]");
        return ControlDistribution::dubins_polar(v[0], v[1]);
    }
    fail("control_distribution.kind", "unknown kind '" + kind + "'");
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("invalid JSON: ") + e.what());
    }

    Scenario sc;
    sc.name = j.value("name", "scenario");
    std::size_t n = require(j, "n_state").get<std::size_t>();
    if (n == 0) fail("n_state", "must be positive");

    sc.dist = dist_field(require(j, "control_distribution"));
    std::size_t na = sc.dist.n_atoms();

    const auto& dyn = require(j, "dynamics");
    if (!dyn.is_array() || dyn.size() != n)
        fail("dynamics", "expected " + std::to_string(n) + " components");
    std::vector<Polynomial> comps;
    for (std::size_t i = 0; i < n; ++i)
        comps.push_back(poly_field(dyn[i], "dynamics[" + std::to_string(i) + "]", n + na));
    try {
        sc.dynamics = DynamicsSpec(n, na, std::move(comps));
    } catch (const std::exception& e) {
        fail("dynamics", e.what());
    }

    if (j.contains("safe_set")) sc.safe_set = set_field(j.at("safe_set"), "safe_set", n);

    const auto& tg = require(j, "targets");
    if (!tg.is_array()) fail("targets", "expected an array");
    for (std::size_t i = 0; i < tg.size(); ++i)
        sc.targets.push_back(set_field(tg[i], "targets[" + std::to_string(i) + "]", n));

    sc.x0 = require(j, "x0").get<std::vector<double>>();
    if (sc.x0.size() != n) fail("x0", "arity mismatch");

    sc.lambda = require(j, "lambda").get<double>();
    if (sc.lambda <= 1.0) fail("lambda", "must lie in (1, inf)");
    sc.epsilon = j.value("epsilon", 1e-6);
    if (sc.epsilon <= 0.0) fail("epsilon", "must be positive");
    sc.degree = j.value("degree", 6u);
    if (sc.degree < 2 || sc.degree % 2 != 0) fail("degree", "must be even and >= 2");
    sc.encoding = j.value("encoding", std::string("theorem1"));
    if (sc.encoding != "theorem1" && sc.encoding != "prop1")
        fail("encoding", "must be 'theorem1' or 'prop1'");
    sc.paper_exact = j.value("paper_exact", false);

    if (j.contains("chat")) sc.chat = set_field(j.at("chat"), "chat", n);
    sc.chat_margin = j.value("chat_margin", 0.1);

    if (j.contains("multiplier_degree")) {
        unsigned d = j.at("multiplier_degree").get<unsigned>();
        for (const char* fam : {"s0", "s1", "s2", "s3", "s4", "a_s", "b_s", "c_s", "d_s"})
            sc.multiplier_degrees[fam] = d;
    }
    if (j.contains("multiplier_degrees"))
        for (const auto& [k, v] : j.at("multiplier_degrees").items())
            sc.multiplier_degrees[k] = v.get<unsigned>();

    if (j.contains("controller")) {
        const auto& c = j.at("controller");
        sc.controller.n_samples = c.value("N", 100);
        if (sc.controller.n_samples < 1) fail("controller.N", "must be >= 1");
        sc.controller.p_omega = c.value("p_omega", 0.0);
        if (sc.controller.p_omega < 0.0) fail("controller.p_omega", "must be >= 0");
        sc.controller.seed = c.value("seed", 1ull);
        sc.controller.fallback_growth = c.value("fallback_growth", 10);
        if (c.contains("waypoints"))
            for (const auto& wp : c.at("waypoints")) {
                auto v = wp.get<std::vector<double>>();
                if (v.size() != 2) fail("controller.waypoints", "each waypoint is [x,y]");
                sc.waypoints.push_back({v[0], v[1]});
            }
        sc.accept_radius = c.value("accept_radius", 2.0);
    }
    sc.max_steps = j.value("max_steps", 0);

    if (j.contains("domain_box")) {
        auto box = j.at("domain_box").get<std::vector<std::vector<double>>>();
        if (box.size() != n) fail("domain_box", "one [lo,hi] pair per state variable");
        for (const auto& r : box) {
            if (r.size() != 2 || r[0] >= r[1]) fail("domain_box", "entries are [lo,hi]");
            sc.domain_box.emplace_back(r[0], r[1]);
        }
    }

    if (j.contains("environment")) {
        const auto& e = j.at("environment");
        Environment env;
        auto box = require(e, "box").get<std::vector<double>>();
        if (box.size() != 2 || box[0] <= 0 || box[1] <= 0)
            fail("environment.box", "expected [width,height]");
        env.width = box[0];
        env.height = box[1];
        if (e.contains("obstacles"))
            for (const auto& o : e.at("obstacles")) {
                if (o.contains("rect")) {
                    auto r = o.at("rect").get<std::vector<double>>();
                    if (r.size() != 4) fail("environment.obstacles.rect", "[x,y,w,h]");
                    env.obstacles.push_back(Obstacle::rect(r[0], r[1], r[2], r[3]));
                } else if (o.contains("disc")) {
                    auto d = o.at("disc").get<std::vector<double>>();
                    if (d.size() != 3) fail("environment.obstacles.disc", "[cx,cy,r]");
                    env.obstacles.push_back(Obstacle::disc(d[0], d[1], d[2]));
                } else {
                    fail("environment.obstacles", "each obstacle is a rect or a disc");
                }
            }
        for (const auto& o : env.obstacles) {
            double ox0 = o.shape == Obstacle::Shape::Rect ? o.x : o.x - o.r;
            double oy0 = o.shape == Obstacle::Shape::Rect ? o.y : o.y - o.r;
            double ox1 = o.shape == Obstacle::Shape::Rect ? o.x + o.w : o.x + o.r;
            double oy1 = o.shape == Obstacle::Shape::Rect ? o.y + o.h : o.y + o.r;
            if (ox0 < 0 || oy0 < 0 || ox1 > env.width || oy1 > env.height)
                fail("environment.obstacles", "obstacle extends outside the scene box");
        }
        sc.environment = std::move(env);
    }

    if (j.contains("mission")) {
        const auto& m = j.at("mission");
        sc.mission.scan_radius = m.value("D", 60.0);
        sc.mission.n_rays = m.value("n_rays", 64);
        sc.mission.delta = m.value("delta", 0.0);
        sc.mission.svm_degree = m.value("svm_degree", 6u);
        sc.mission.c_plus = m.value("c_plus", 1.0);
        sc.mission.c_minus = m.value("c_minus", 1e12);
        sc.mission.chat_margin = m.value("chat_margin", 0.3);
        sc.mission.cert_degree = m.value("cert_degree", 8u);
    }

    if (sc.safe_set && !sc.safe_set->contains(sc.x0))
        fail("x0", "initial state lies outside the safe set");
    if (sc.targets.empty() && !j.contains("environment"))
        fail("targets", "needs at least one target");

    return sc;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ScenarioError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_scenario_text(ss.str());
}

}  // namespace reachcert
