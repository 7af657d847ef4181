#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "phasordyn/grid_io.hpp"
#include "phasordyn/operation_point.hpp"
#include "phasordyn/scenarios.hpp"

namespace {

using namespace phasordyn;

int usage_error(const std::string& message) {
    std::cerr << "usage error: " << message << "\n";
    return 2;
}

double parse_number(const std::string& text, const std::string& what) {
    size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        throw CLI::ValidationError(what, "'" + text + "' is not a number");
    }
    if (consumed != text.size()) {
        throw CLI::ValidationError(what, "'" + text + "' is not a number");
    }
    return value;
}

std::pair<double, double> parse_span(const std::string& text, const std::string& what) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw CLI::ValidationError(what, "expected START:END, got '" + text + "'");
    }
    return {parse_number(text.substr(0, colon), what),
            parse_number(text.substr(colon + 1), what)};
}

// Fault specs: "line-failure:NAME", "power-perturbation:NODE:P=V[,Q=V]",
// "set-initial:OWNER:VAR=VALUE". The first two need --fault-window.
Perturbation parse_fault(const std::string& spec,
                         const std::optional<std::pair<double, double>>& window) {
    const auto head_end = spec.find(':');
    if (head_end == std::string::npos) {
        throw CLI::ValidationError("--fault", "expected KIND:... in '" + spec + "'");
    }
    const std::string kind = spec.substr(0, head_end);
    const std::string rest = spec.substr(head_end + 1);

    if (kind == "line-failure") {
        if (rest.empty()) throw CLI::ValidationError("--fault", "missing line name");
        if (!window) throw CLI::ValidationError("--fault", "line-failure needs --fault-window");
        return LineFailure{rest, *window};
    }
    if (kind == "power-perturbation") {
        const auto node_end = rest.find(':');
        if (node_end == std::string::npos) {
            throw CLI::ValidationError("--fault", "expected power-perturbation:NODE:P=VALUE");
        }
        if (!window) {
            throw CLI::ValidationError("--fault", "power-perturbation needs --fault-window");
        }
        PowerPerturbation p;
        p.node_name = rest.substr(0, node_end);
        p.tspan_fault = *window;
        std::string assigns = rest.substr(node_end + 1);
        size_t pos = 0;
        while (pos < assigns.size()) {
            auto comma = assigns.find(',', pos);
            if (comma == std::string::npos) comma = assigns.size();
            const std::string item = assigns.substr(pos, comma - pos);
            const auto eq = item.find('=');
            if (eq == std::string::npos) {
                throw CLI::ValidationError("--fault", "expected P=VALUE or Q=VALUE in '" + item + "'");
            }
            const std::string key = item.substr(0, eq);
            const double value = parse_number(item.substr(eq + 1), "--fault");
            if (key == "P") {
                p.P_fault = value;
            } else if (key == "Q") {
                p.Q_fault = value;
            } else {
                throw CLI::ValidationError("--fault", "power-perturbation only sets P and Q");
            }
            pos = comma + 1;
        }
        if (!p.P_fault && !p.Q_fault) {
            throw CLI::ValidationError("--fault", "power-perturbation needs P= and/or Q=");
        }
        return p;
    }
    if (kind == "set-initial") {
        const auto owner_end = rest.find(':');
        if (owner_end == std::string::npos) {
            throw CLI::ValidationError("--fault", "expected set-initial:OWNER:VAR=VALUE");
        }
        const std::string owner = rest.substr(0, owner_end);
        const std::string assign = rest.substr(owner_end + 1);
        const auto eq = assign.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("--fault", "expected set-initial:OWNER:VAR=VALUE");
        }
        if (window) {
            throw CLI::ValidationError("--fault", "set-initial takes no --fault-window");
        }
        ChangeInitialConditions ic;
        ic.assignments.push_back(
            {owner, assign.substr(0, eq), parse_number(assign.substr(eq + 1), "--fault")});
        return ic;
    }
    throw CLI::ValidationError("--fault", "unknown fault kind '" + kind + "'");
}

OpMethod parse_method(const std::string& name) {
    if (name == "rootfind") return OpMethod::rootfind;
    if (name == "nlsolve") return OpMethod::nlsolve;
    if (name == "dynamic") return OpMethod::dynamic;
    throw CLI::ValidationError("--method", "expected rootfind, nlsolve or dynamic");
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot open '" + path + "' for writing");
    out << content;
}

double residual_norm(const PowerGrid& grid, const State& state) {
    const RhsFunction rhs = build_rhs(grid);
    return rhs(0.0, state.values()).lpNorm<Eigen::Infinity>();
}

int run_validate(const std::string& grid_path) {
    const PowerGrid grid = read_powergrid_file(grid_path);
    const auto violations = validate(grid);
    for (const auto& v : violations) {
        std::cout << (v.severity == Severity::error ? "error: " : "warning: ") << v.message
                  << "\n";
    }
    if (is_valid(violations)) {
        std::cout << "ok: " << grid.nodes().size() << " nodes, " << grid.lines().size()
                  << " lines\n";
        return 0;
    }
    return 1;
}

int run_op(const std::string& grid_path, const std::string& method,
           const std::string& out_path) {
    const PowerGrid grid = read_powergrid_file(grid_path);
    const State op = find_operationpoint(grid, parse_method(method));
    std::cout << "residual norm: " << residual_norm(grid, op) << "\n";
    if (!out_path.empty()) write_text_file(out_path, write_state(op));
    return 0;
}

struct SimulateArgs {
    std::string grid_path;
    std::string tspan;
    std::string fault;
    std::string fault_window;
    std::string from_path;
    std::string out_path;
    std::string plot_path;
    double sample = 0.0;
    double rtol = 1e-6;
    double atol = 1e-6;
    bool verbose = false;
};

int run_simulate(const SimulateArgs& args) {
    const PowerGrid grid = read_powergrid_file(args.grid_path);
    const auto tspan = parse_span(args.tspan, "--tspan");
    if (!(tspan.second > tspan.first)) {
        throw CLI::ValidationError("--tspan", "needs T0 < T1");
    }

    std::optional<std::pair<double, double>> window;
    if (!args.fault_window.empty()) {
        window = parse_span(args.fault_window, "--fault-window");
    }
    Perturbation perturbation = ChangeInitialConditions{};  // no-op baseline
    if (!args.fault.empty()) {
        perturbation = parse_fault(args.fault, window);
    } else if (window) {
        throw CLI::ValidationError("--fault-window", "given without --fault");
    }

    State x0 = [&] {
        if (!args.from_path.empty()) {
            std::ifstream in(args.from_path, std::ios::binary);
            if (!in) throw Error("io", "cannot open state file '" + args.from_path + "'");
            std::ostringstream buffer;
            buffer << in.rdbuf();
            return read_state(buffer.str(), build_layout(grid));
        }
        return find_operationpoint(grid);
    }();

    SimulateOptions options;
    options.solver.rtol = args.rtol;
    options.solver.atol = args.atol;
    SolverStats stats;
    const PowerGridSolution solution = simulate(perturbation, grid, x0, tspan, options, &stats);

    const double sample =
        args.sample > 0.0 ? args.sample : (tspan.second - tspan.first) / 500.0;
    if (!args.out_path.empty()) {
        write_text_file(args.out_path, write_solution_csv(solution, sample));
    }
    if (!args.plot_path.empty()) {
        write_text_file(args.plot_path, render_plot_svg(solution, {"v", "p", "ω"}));
    }
    std::cout << "simulated [" << tspan.first << ", " << tspan.second << "] s in "
              << solution.segments().size() << " segment(s)\n";
    if (args.verbose) {
        std::cout << "steps accepted:       " << stats.accepted << "\n"
                  << "steps rejected:       " << stats.rejected << "\n"
                  << "newton iterations:    " << stats.newton_iterations << "\n"
                  << "rhs evaluations:      " << stats.rhs_evaluations << "\n"
                  << "jacobian evaluations: " << stats.jacobian_evaluations << "\n"
                  << "lu factorizations:    " << stats.lu_factorizations << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phasordyn - time-domain dq-phasor power grid simulator"};
    app.require_subcommand(1);

    std::string grid_path;
    std::string method = "rootfind";
    std::string op_out;
    SimulateArgs sim;

    auto* cmd_validate = app.add_subcommand("validate", "check a grid file");
    cmd_validate->add_option("--grid", grid_path, "grid JSON file")->required();

    auto* cmd_op = app.add_subcommand("op", "find the operation point");
    cmd_op->add_option("--grid", grid_path, "grid JSON file")->required();
    cmd_op->add_option("--method", method, "rootfind|nlsolve|dynamic");
    cmd_op->add_option("--out", op_out, "write the operation point to this state file");

    auto* cmd_sim = app.add_subcommand("simulate", "run a fault scenario");
    cmd_sim->add_option("--grid", sim.grid_path, "grid JSON file")->required();
    cmd_sim->add_option("--tspan", sim.tspan, "simulation span T0:T1")->required();
    cmd_sim->add_option("--fault", sim.fault,
                        "line-failure:NAME | power-perturbation:NODE:P=V[,Q=V] | "
                        "set-initial:OWNER:VAR=VALUE");
    cmd_sim->add_option("--fault-window", sim.fault_window, "fault window TON:TOFF");
    cmd_sim->add_option("--from", sim.from_path, "start from this state file instead of the op");
    cmd_sim->add_option("--out", sim.out_path, "write the sampled solution CSV here");
    cmd_sim->add_option("--plot", sim.plot_path, "write an SVG plot (panels v, p, ω) here");
    cmd_sim->add_option("--sample", sim.sample, "CSV sample step in seconds");
    cmd_sim->add_option("--rtol", sim.rtol, "relative tolerance");
    cmd_sim->add_option("--atol", sim.atol, "absolute tolerance");
    cmd_sim->add_flag("--verbose", sim.verbose, "print solver statistics");

    try {
        app.parse(argc, argv);
        if (cmd_validate->parsed()) return run_validate(grid_path);
        if (cmd_op->parsed()) return run_op(grid_path, method, op_out);
        return run_simulate(sim);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    } catch (const phasordyn::Error& e) {
        std::cerr << "error[" << e.component() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
