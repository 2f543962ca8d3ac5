// reachcert: reach-avoid certificate synthesis and simulation toolkit.
//
// Subcommands map one-to-one onto pipeline stages so failures stay
// attributable: synthesize, simulate, mission, validate, train-safeset,
// export-sdpa, solve-sdpa, bench.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reachcert/control.hpp"
#include "reachcert/crs.hpp"
#include "reachcert/safeset.hpp"
#include "reachcert/scenario_io.hpp"
#include "reachcert/sim.hpp"
#include "reachcert/sos.hpp"
#include "reachcert/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reachcert;

namespace {

enum ExitCode {
    kOk = 0,
    kConfig = 1,
    kInfeasible = 2,
    kValidation = 3,
    kViability = 4,
    kIo = 5,
    kInternal = 6,
    kBench = 7,
};

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void logi(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << msg << "\n";
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct OutputDir {
    fs::path dir;
    std::vector<std::pair<std::string, std::uint64_t>> artifacts;

    explicit OutputDir(const std::string& path) : dir(path.empty() ? "." : path) {
        fs::create_directories(dir);
    }
    fs::path path(const std::string& name) const { return dir / name; }
    void record(const std::string& name) {
        std::ifstream f(dir / name, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        artifacts.emplace_back(name, fnv1a64(ss.str()));
    }
    void write_manifest() {
        json j;
        auto& arr = j["artifacts"] = json::array();
        for (const auto& [name, hash] : artifacts) {
            char buf[20];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(hash));
            arr.push_back({{"file", name}, {"fnv1a64", buf}});
        }
        std::ofstream f(dir / "manifest.json");
        f << j.dump(2) << "\n";
    }
};

struct CommonFlags {
    std::string scenario_path;
    std::string out = "out";
    int degree = 0;             // 0 = scenario default
    double lambda = 0.0;        // 0 = scenario default
    double epsilon = 0.0;
    std::uint64_t seed = 0;     // 0 = scenario default
    std::string encoding;
    bool paper_exact = false;
    bool plot = false;
};

void apply_overrides(Scenario& sc, const CommonFlags& flags) {
    if (flags.degree > 0) sc.degree = static_cast<unsigned>(flags.degree);
    if (flags.lambda > 0.0) sc.lambda = flags.lambda;
    if (flags.epsilon > 0.0) sc.epsilon = flags.epsilon;
    if (flags.seed != 0) sc.controller.seed = flags.seed;
    if (!flags.encoding.empty()) sc.encoding = flags.encoding;
    if (flags.paper_exact) sc.paper_exact = true;
}

SemiAlgebraicSet resolve_chat(const Scenario& sc) {
    if (sc.chat) return *sc.chat;
    if (!sc.safe_set) throw ScenarioError("scenario has neither 'chat' nor 'safe_set'");
    std::vector<std::pair<double, double>> box = sc.domain_box;
    if (box.empty()) {
        if (auto ball = as_ball(sc.safe_set->constraints[0])) {
            for (std::size_t i = 0; i < sc.safe_set->n_vars; ++i)
                box.emplace_back(ball->center[i] - ball->radius,
                                 ball->center[i] + ball->radius);
        } else {
            throw ScenarioError("provide 'domain_box' to construct chat by sampling");
        }
    }
    return compute_chat(*sc.safe_set, sc.dynamics, sc.dist, sc.chat_margin, box);
}

Certificate synthesize_from(const Scenario& sc, const SemiAlgebraicSet& chat) {
    if (!sc.safe_set) throw ScenarioError("scenario needs an explicit 'safe_set'");
    if (sc.targets.empty()) throw ScenarioError("scenario needs at least one target");
    CertificateOptions opts = sc.certificate_options();
    opts.verbose = g_log_level >= 2;
    return compute_certificate(*sc.safe_set, sc.targets[0], chat, sc.dynamics, sc.dist,
                               sc.x0, opts);
}

int cmd_synthesize(const CommonFlags& flags) {
    Scenario sc = parse_scenario(flags.scenario_path);
    apply_overrides(sc, flags);
    SemiAlgebraicSet chat = resolve_chat(sc);
    auto t0 = std::chrono::steady_clock::now();
    Certificate cert = synthesize_from(sc, chat);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();

    OutputDir out(flags.out);
    save_certificate_json(cert, out.path("certificate.json").string());
    out.record("certificate.json");
    out.write_manifest();

    auto hb = hitting_bounds(cert, sc.x0);
    logi("certificate: v(x0)=" + std::to_string(cert.report.v_at_x0) +
         " M=" + std::to_string(cert.M) + " T_max=" + std::to_string(hb.t_max) +
         " (solved in " + std::to_string(ms) + " ms)");
    std::cout << "status: valid certificate written to "
              << out.path("certificate.json").string() << "\n";
    return kOk;
}

int cmd_simulate(const CommonFlags& flags, const std::string& cert_path) {
    Scenario sc = parse_scenario(flags.scenario_path);
    apply_overrides(sc, flags);
    if (!sc.safe_set) throw ScenarioError("scenario needs an explicit 'safe_set'");
    Certificate cert;
    if (!cert_path.empty()) {
        cert = load_certificate_json(cert_path);
    } else {
        cert = synthesize_from(sc, resolve_chat(sc));
    }
    Trajectory traj = run_episode(sc, cert, *sc.safe_set, sc.targets[0], sc.x0,
                                  sc.controller.seed);

    OutputDir out(flags.out);
    write_trajectory_csv(traj, out.path("trajectory.csv").string());
    out.record("trajectory.csv");
    if (flags.plot) {
        render_svg(sc, {traj}, out.path("trajectory.svg").string());
        out.record("trajectory.svg");
    }
    out.write_manifest();

    std::cout << "outcome: " << to_string(traj.outcome);
    if (traj.hit_time) std::cout << " at step " << *traj.hit_time;
    std::cout << "\n";
    if (traj.outcome != Trajectory::Outcome::Hit) return kViability;
    return kOk;
}

int cmd_validate(const CommonFlags& flags, const std::string& cert_path) {
    Scenario sc = parse_scenario(flags.scenario_path);
    apply_overrides(sc, flags);
    if (!sc.safe_set) throw ScenarioError("scenario needs an explicit 'safe_set'");
    Certificate cert = load_certificate_json(cert_path);
    auto box = sc.domain_box.empty() ? box_for_chat(cert.chat) : sc.domain_box;
    ValidationReport rep = validate_certificate(cert, *sc.safe_set, sc.targets[0],
                                                sc.dynamics, sc.dist, sc.x0, 10000, box);
    json j = {{"n_samples", rep.n_samples},
              {"worst_one_step", rep.worst_one_step},
              {"worst_boundary_v", rep.worst_boundary_v},
              {"v_at_x0", rep.v_at_x0},
              {"one_step_ok", rep.one_step_ok},
              {"boundary_ok", rep.boundary_ok},
              {"x0_ok", rep.x0_ok}};
    std::cout << j.dump(2) << "\n";
    return (rep.one_step_ok && rep.boundary_ok && rep.x0_ok) ? kOk : kValidation;
}

int cmd_mission(const CommonFlags& flags) {
    Scenario sc = parse_scenario(flags.scenario_path);
    apply_overrides(sc, flags);
    MissionResult res = run_mission(sc, g_log_level >= 2);

    OutputDir out(flags.out);
    std::vector<Trajectory> trajs;
    json summary;
    summary["legs"] = json::array();
    for (const auto& leg : res.legs) {
        std::string name = "leg" + std::to_string(leg.target_index) + ".csv";
        write_trajectory_csv(leg.trajectory, out.path(name).string());
        out.record(name);
        trajs.push_back(leg.trajectory);
        summary["legs"].push_back(
            {{"target", leg.target_index},
             {"outcome", to_string(leg.trajectory.outcome)},
             {"hit_time", leg.trajectory.hit_time ? *leg.trajectory.hit_time : -1},
             {"steps", leg.trajectory.states.size() - 1},
             {"M", leg.certificate.M},
             {"v_x0", leg.certificate.report.v_at_x0}});
    }
    summary["completed"] = res.completed;
    {
        std::ofstream f(out.path("mission.json"));
        f << summary.dump(2) << "\n";
    }
    out.record("mission.json");
    if (flags.plot) {
        render_svg(sc, trajs, out.path("mission.svg").string());
        out.record("mission.svg");
    }
    out.write_manifest();
    std::cout << "mission " << (res.completed ? "completed" : "aborted") << ", "
              << res.legs.size() << " legs\n";
    return res.completed ? kOk : kViability;
}

int cmd_train_safeset(const std::string& scan_path, double dmax, double delta,
                      double c_plus, double c_minus, unsigned degree,
                      std::vector<double> origin, const std::string& out_path) {
    std::ifstream f(scan_path);
    if (!f) throw std::runtime_error("cannot open scan file: " + scan_path);
    SensorScan scan;
    scan.origin = origin;
    scan.max_range = dmax;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.find("angle") != std::string::npos) continue;  // header
        std::istringstream ls(line);
        double angle, dist;
        char comma;
        if (!(ls >> angle >> comma >> dist))
            throw std::runtime_error("bad scan line: " + line);
        scan.ray_angles.push_back(angle);
        scan.hit_distance.push_back(dist);
    }
    if (delta <= 0.0) delta = dmax / 10.0;
    auto labels = generate_labels(scan, delta);
    SvmKernel kernel{1.0, degree};
    SvmModel model = train_svm(labels, c_plus, c_minus, kernel);
    auto [dec, set] = decision_polynomial(model);

    OutputDir out(out_path);
    save_svm_json(model, out.path("svm_model.json").string());
    out.record("svm_model.json");
    {
        std::ofstream pf(out.path("safe_set.txt"));
        pf << set.constraints[0].str() << "\n";
    }
    out.record("safe_set.txt");
    out.write_manifest();

    std::size_t miscls = 0;
    for (const auto& s : labels)
        if (s.label < 0 && model.decision(s.x) >= 1.0) ++miscls;
    std::cout << "trained on " << labels.size() << " samples, "
              << model.support_x.size() << " support vectors, " << miscls
              << " unsafe samples inside the learned set\n";
    return miscls == 0 ? kOk : kValidation;
}

SosEncoding encode_scenario(const Scenario& sc, const SemiAlgebraicSet& chat,
                            const std::string& encoding) {
    SosProgram prog;
    prog.v_degree = sc.degree;
    prog.multiplier_degrees = sc.multiplier_degrees;
    prog.lambda = sc.lambda;
    prog.epsilon = sc.epsilon;
    prog.safe_set = *sc.safe_set;
    prog.target_set = sc.targets[0];
    prog.chat = chat;
    prog.x0 = sc.x0;
    prog.dynamics = sc.dynamics;
    prog.dist = sc.dist;
    prog.paper_exact = sc.paper_exact;
    return encoding == "prop1" ? encode_prop1(prog) : encode_theorem1(prog);
}

int cmd_export_sdpa(const CommonFlags& flags) {
    Scenario sc = parse_scenario(flags.scenario_path);
    apply_overrides(sc, flags);
    if (!sc.safe_set) throw ScenarioError("scenario needs an explicit 'safe_set'");
    SemiAlgebraicSet chat = resolve_chat(sc);
    SosEncoding enc = encode_scenario(sc, chat, sc.encoding);
    OutputDir out(flags.out);
    std::string name = sc.name + "_" + sc.encoding + "_d" + std::to_string(sc.degree) +
                       ".dat-s";
    write_sdpa(enc.sdp, out.path(name).string());
    out.record(name);
    out.write_manifest();
    std::cout << "wrote " << out.path(name).string() << " ("
              << enc.sdp.constraints.size() << " rows, "
              << sdpa_entry_count(enc.sdp) << " entries)\n";
    return kOk;
}

int cmd_solve_sdpa(const std::string& path) {
    SdpStandardForm problem = read_sdpa(path);
    SdpOptions opts;
    opts.verbose = g_log_level >= 2;
    SdpSolution sol = solve_sdp(problem, opts);
    std::cout << "status: " << to_string(sol.status) << "\n"
              << "iterations: " << sol.iterations << "\n"
              << "primal_residual: " << sol.primal_residual << "\n"
              << "dual_residual: " << sol.dual_residual << "\n"
              << "duality_gap: " << sol.duality_gap << "\n"
              << "primal_objective: " << sol.primal_objective << "\n";
    if (sol.status == SdpStatus::Optimal || sol.status == SdpStatus::Infeasible)
        return kOk;
    return kInternal;
}

int cmd_bench(const CommonFlags& flags, std::vector<int> degrees, double time_factor) {
    Scenario sc = parse_scenario(flags.scenario_path);
    apply_overrides(sc, flags);
    if (!sc.safe_set) throw ScenarioError("scenario needs an explicit 'safe_set'");
    SemiAlgebraicSet chat = resolve_chat(sc);

    OutputDir out(flags.out);
    std::ofstream csv(out.path("bench.csv"));
    csv << "degree,encoding,scalar_variables,rows,wall_ms,status\n";
    std::cout << "degree,encoding,scalar_variables,rows,wall_ms,status\n";

    bool ordering_ok = true;
    for (int d : degrees) {
        double ms_by_enc[2] = {0, 0};
        std::size_t vars_by_enc[2] = {0, 0};
        int which = 0;
        for (const std::string& encoding : {std::string("theorem1"), std::string("prop1")}) {
            Scenario sd = sc;
            sd.degree = static_cast<unsigned>(d);
            std::string status = "error";
            double ms = 0.0;
            std::size_t vars = 0, rows = 0;
            try {
                auto t0 = std::chrono::steady_clock::now();
                SosEncoding enc = encode_scenario(sd, chat, encoding);
                SdpSolution sol = solve_sdp(enc.sdp);
                ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
                vars = enc.sdp.scalar_variable_count();
                rows = enc.sdp.constraints.size();
                status = to_string(sol.status);
            } catch (const std::exception& e) {
                status = std::string("error: ") + e.what();
            }
            csv << d << "," << encoding << "," << vars << "," << rows << "," << ms << ","
                << status << "\n";
            std::cout << d << "," << encoding << "," << vars << "," << rows << "," << ms
                      << "," << status << "\n";
            ms_by_enc[which] = ms;
            vars_by_enc[which] = vars;
            ++which;
        }
        if (vars_by_enc[0] > vars_by_enc[1]) {
            ordering_ok = false;
            logi("bench: theorem1 has more variables than prop1 at degree " +
                 std::to_string(d));
        }
        if (ms_by_enc[0] > time_factor * ms_by_enc[1]) {
            ordering_ok = false;
            logi("bench: theorem1 slower than prop1 beyond factor at degree " +
                 std::to_string(d));
        }
    }
    out.record("bench.csv");
    out.write_manifest();
    return ordering_ok ? kOk : kBench;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* lvl = std::getenv("REACHCERT_LOG")) {
        std::string s = lvl;
        if (s == "quiet") g_log_level = 0;
        else if (s == "debug") g_log_level = 2;
    }

    CLI::App app{"reach-avoid certificate synthesis toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string cert_path, scan_path, sdpa_path;
    std::vector<int> degrees;
    double time_factor = 1.25;
    double dmax = 80.0, delta = 0.0, c_plus = 1.0, c_minus = 1e12;
    unsigned svm_degree = 6;
    std::vector<double> origin = {0.0, 0.0};

    auto add_common = [&](CLI::App* cmd, bool needs_scenario = true) {
        if (needs_scenario)
            cmd->add_option("--scenario", flags.scenario_path, "scenario JSON file")
                ->required();
        cmd->add_option("--out", flags.out, "output directory");
        cmd->add_option("--degree", flags.degree, "certificate degree override");
        cmd->add_option("--lambda", flags.lambda, "lambda override");
        cmd->add_option("--epsilon", flags.epsilon, "epsilon override");
        cmd->add_option("--seed", flags.seed, "controller seed override");
        cmd->add_option("--encoding", flags.encoding, "theorem1 | prop1");
        cmd->add_flag("--paper-exact", flags.paper_exact,
                      "include the published cross terms verbatim");
        cmd->add_flag("--plot", flags.plot, "write an SVG rendering");
    };

    auto* synth = app.add_subcommand("synthesize", "compute and validate a certificate");
    add_common(synth);
    auto* sim = app.add_subcommand("simulate", "run a certified episode");
    add_common(sim);
    sim->add_option("--certificate", cert_path, "use a persisted certificate");
    auto* mission = app.add_subcommand("mission", "multi-target sense/learn/certify loop");
    add_common(mission);
    auto* validate = app.add_subcommand("validate", "re-validate a persisted certificate");
    add_common(validate);
    validate->add_option("--certificate", cert_path, "certificate JSON")->required();
    auto* train = app.add_subcommand("train-safeset", "train the SVM safe set from a scan");
    train->add_option("--scan", scan_path, "CSV of angle,distance rows")->required();
    train->add_option("--dmax", dmax, "valid scanning radius D");
    train->add_option("--delta", delta, "outward unsafe offset (default D/10)");
    train->add_option("--cplus", c_plus, "safe-class penalty");
    train->add_option("--cminus", c_minus, "unsafe-class penalty");
    train->add_option("--degree", svm_degree, "polynomial kernel degree");
    train->add_option("--origin", origin, "scan origin")->expected(2);
    train->add_option("--out", flags.out, "output directory");
    auto* exp = app.add_subcommand("export-sdpa", "write the encoded SDP in SDPA format");
    add_common(exp);
    auto* solve = app.add_subcommand("solve-sdpa", "solve a sparse SDPA file");
    solve->add_option("file", sdpa_path, ".dat-s file")->required();
    auto* bench = app.add_subcommand("bench", "compare the two encodings");
    add_common(bench);
    bench->add_option("--degrees", degrees, "degrees to benchmark");
    bench->add_option("--time-factor", time_factor, "allowed theorem1/prop1 time ratio");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synthesize(flags);
        if (sim->parsed()) return cmd_simulate(flags, cert_path);
        if (mission->parsed()) return cmd_mission(flags);
        if (validate->parsed()) return cmd_validate(flags, cert_path);
        if (train->parsed())
            return cmd_train_safeset(scan_path, dmax, delta, c_plus, c_minus, svm_degree,
                                     origin, flags.out);
        if (exp->parsed()) return cmd_export_sdpa(flags);
        if (solve->parsed()) return cmd_solve_sdpa(sdpa_path);
        if (bench->parsed()) return cmd_bench(flags, degrees, time_factor);
    } catch (const ScenarioError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kConfig;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return kValidation;
    } catch (const ViabilityLostError& e) {
        std::cerr << "error: viability: " << e.what() << "\n";
        return kViability;
    } catch (const MissionError& e) {
        std::cerr << "error: mission: " << e.what() << "\n";
        return kViability;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kConfig;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return kInternal;
    }
    return kConfig;
}
