#include "phasordyn/grid_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "phasordyn/assembly.hpp"
#include "phasordyn/errors.hpp"

namespace phasordyn {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void schema_error(const std::string& path, const std::string& message) {
    throw SchemaError("io", path + ": " + message);
}

double require_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) schema_error(path, "expected a finite number");
    const double v = j.get<double>();
    if (!is_finite(v)) schema_error(path, "expected a finite number");
    return v;
}

std::string require_string(const ordered_json& parent, const char* key, const std::string& path) {
    if (!parent.contains(key)) schema_error(path + "." + key, "missing");
    if (!parent[key].is_string()) schema_error(path + "." + key, "expected a string");
    return parent[key].get<std::string>();
}

NodeModel make_node_model(const std::string& type, const std::string& path) {
    if (type == "SlackAlgebraic") return SlackAlgebraic{};
    if (type == "PQAlgebraic") return PQAlgebraic{};
    if (type == "FourthOrderEq") return FourthOrderEq{};
    if (type == "VSIVoltagePT1") return VSIVoltagePT1{};
    if (type == "GridFollowingPLL") return GridFollowingPLL{};
    schema_error(path + ".type", "unknown node model type '" + type + "'");
}

LineModel make_line_model(const std::string& type, const std::string& path) {
    if (type == "StaticLine") return StaticLine{};
    if (type == "PiModelLine") return PiModelLine{};
    if (type == "Transformer") return Transformer{};
    if (type == "RLLine") return RLLine{};
    schema_error(path + ".type", "unknown line model type '" + type + "'");
}

// Parameters that fall back to the grid-level nominal frequency when absent.
bool is_optional_param(std::string_view type, std::string_view name) {
    return (type == "FourthOrderEq" && name == "Ω") || (type == "RLLine" && name == "ω_N");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

PowerGrid read_powergrid(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("io", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) schema_error("$", "expected a JSON object");

    if (!doc.contains("version")) schema_error("$.version", "missing");
    if (!doc["version"].is_string() || doc["version"].get<std::string>() != "1") {
        schema_error("$.version", "unsupported version (expected \"1\")");
    }

    double hz = 50.0;
    if (doc.contains("omega_nominal_hz")) {
        hz = require_number(doc["omega_nominal_hz"], "$.omega_nominal_hz");
        if (!(hz > 0.0)) schema_error("$.omega_nominal_hz", "must be > 0");
    }
    PowerGrid grid(kTwoPi * hz);

    if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
        schema_error("$.nodes", "missing or not an array");
    }
    for (size_t k = 0; k < doc["nodes"].size(); ++k) {
        const std::string path = "nodes[" + std::to_string(k) + "]";
        const auto& item = doc["nodes"][k];
        if (!item.is_object()) schema_error(path, "expected an object");
        const std::string name = require_string(item, "name", path);
        const std::string type = require_string(item, "type", path);
        if (!item.contains("params") || !item["params"].is_object()) {
            schema_error(path + ".params", "missing or not an object");
        }
        NodeModel model = make_node_model(type, path);
        if (auto* machine = std::get_if<FourthOrderEq>(&model)) {
            machine->omega = grid.omega_nominal();
        }
        const auto& params = item["params"];
        for (auto it = params.begin(); it != params.end(); ++it) {
            if (!node_has_param(model, it.key())) {
                schema_error(path + ".params." + it.key(), "unknown parameter for " + type);
            }
            node_set_param(model, it.key(),
                           require_number(it.value(), path + ".params." + it.key()));
        }
        for (const auto pname : node_param_names(model)) {
            if (!params.contains(std::string(pname)) && !is_optional_param(type, pname)) {
                schema_error(path + ".params." + std::string(pname), "missing");
            }
        }
        try {
            grid.add_node(name, std::move(model));
        } catch (const Error& e) {
            schema_error(path, e.what());
        }
    }

    if (!doc.contains("lines") || !doc["lines"].is_array()) {
        schema_error("$.lines", "missing or not an array");
    }
    for (size_t k = 0; k < doc["lines"].size(); ++k) {
        const std::string path = "lines[" + std::to_string(k) + "]";
        const auto& item = doc["lines"][k];
        if (!item.is_object()) schema_error(path, "expected an object");
        const std::string name = require_string(item, "name", path);
        const std::string type = require_string(item, "type", path);
        const std::string from = require_string(item, "from", path);
        const std::string to = require_string(item, "to", path);
        if (!item.contains("params") || !item["params"].is_object()) {
            schema_error(path + ".params", "missing or not an object");
        }
        LineModel model = make_line_model(type, path);
        if (auto* rl = std::get_if<RLLine>(&model)) {
            rl->omega_nominal = grid.omega_nominal();
        }
        const auto& params = item["params"];
        for (auto it = params.begin(); it != params.end(); ++it) {
            if (!line_has_param(model, it.key())) {
                schema_error(path + ".params." + it.key(), "unknown parameter for " + type);
            }
            line_set_param(model, it.key(),
                           require_number(it.value(), path + ".params." + it.key()));
        }
        for (const auto pname : line_param_names(model)) {
            if (!params.contains(std::string(pname)) && !is_optional_param(type, pname)) {
                schema_error(path + ".params." + std::string(pname), "missing");
            }
        }
        try {
            grid.add_line(name, std::move(model), from, to);
        } catch (const Error& e) {
            schema_error(path, e.what());
        }
    }
    return grid;
}

PowerGrid read_powergrid_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open grid file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return read_powergrid(buffer.str());
}

std::string write_powergrid(const PowerGrid& grid) {
    ordered_json doc;
    doc["version"] = "1";
    doc["omega_nominal_hz"] = grid.omega_nominal() / kTwoPi;
    doc["nodes"] = ordered_json::array();
    for (const auto& n : grid.nodes()) {
        ordered_json item;
        item["name"] = n.name;
        item["type"] = std::string(node_type_name(n.model));
        ordered_json params = ordered_json::object();
        for (const auto pname : node_param_names(n.model)) {
            params[std::string(pname)] = node_get_param(n.model, pname);
        }
        item["params"] = std::move(params);
        doc["nodes"].push_back(std::move(item));
    }
    doc["lines"] = ordered_json::array();
    for (const auto& l : grid.lines()) {
        ordered_json item;
        item["name"] = l.name;
        item["type"] = std::string(line_type_name(l.model));
        item["from"] = l.from;
        item["to"] = l.to;
        ordered_json params = ordered_json::object();
        for (const auto pname : line_param_names(l.model)) {
            params[std::string(pname)] = line_get_param(l.model, pname);
        }
        item["params"] = std::move(params);
        doc["lines"].push_back(std::move(item));
    }
    return doc.dump(2) + "\n";
}

void write_powergrid_file(const PowerGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot open '" + path + "' for writing");
    out << write_powergrid(grid);
}

State read_state(const std::string& text, std::shared_ptr<const StateLayout> layout) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("io", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) schema_error("$", "expected a JSON object");
    if (!doc.contains("version") || !doc["version"].is_string() ||
        doc["version"].get<std::string>() != "1") {
        schema_error("$.version", "unsupported version (expected \"1\")");
    }
    if (!doc.contains("values") || !doc["values"].is_object()) {
        schema_error("$.values", "missing or not an object");
    }

    State state(layout);
    std::vector<bool> seen(static_cast<size_t>(layout->size()), false);
    for (auto it = doc["values"].begin(); it != doc["values"].end(); ++it) {
        const std::string& key = it.key();
        const auto colon = key.find(':');
        if (colon == std::string::npos) {
            schema_error("$.values." + key, "expected \"OWNER:VAR\" keys");
        }
        const std::string owner = key.substr(0, colon);
        const std::string var = key.substr(colon + 1);
        if (!layout->contains(owner, var)) {
            schema_error("$.values." + key, "unknown variable for this grid");
        }
        const int idx = layout->index_of(owner, var);
        state.values()[idx] = require_number(it.value(), "$.values." + key);
        seen[static_cast<size_t>(idx)] = true;
    }
    for (int i = 0; i < layout->size(); ++i) {
        if (!seen[static_cast<size_t>(i)]) {
            const auto& e = layout->entry(i);
            schema_error("$.values", "missing entry \"" + e.owner + ":" + e.var + "\"");
        }
    }
    if (!state.values().allFinite()) schema_error("$.values", "non-finite entries");
    return state;
}

std::string write_state(const State& state) {
    ordered_json doc;
    doc["version"] = "1";
    ordered_json values = ordered_json::object();
    for (int i = 0; i < state.layout().size(); ++i) {
        const auto& e = state.layout().entry(i);
        values[e.owner + ":" + e.var] = state.values()[i];
    }
    doc["values"] = std::move(values);
    return doc.dump(2) + "\n";
}

std::string write_solution_csv(const PowerGridSolution& solution, double sample_step) {
    if (!(sample_step > 0.0)) throw Error("io", "sample step must be > 0");
    const auto [t0, t1] = solution.tspan();
    const auto layout = build_layout(solution.grid());

    std::vector<std::pair<std::string, std::string>> columns;
    for (int i = 0; i < layout->size(); ++i) {
        columns.emplace_back(layout->entry(i).owner, layout->entry(i).var);
    }
    for (const auto& n : solution.grid().nodes()) {
        columns.emplace_back(n.name, "v");
        columns.emplace_back(n.name, "p");
        columns.emplace_back(n.name, "q");
    }

    std::vector<double> times;
    const double eps = 1e-9 * std::max(sample_step, t1 - t0);
    for (long k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) * sample_step;
        if (t >= t1 - eps) break;
        times.push_back(t);
    }
    times.push_back(t1);

    std::string out = "t";
    for (const auto& [owner, var] : columns) {
        out += "," + owner + ":" + var;
    }
    out += "\n";
    for (const double t : times) {
        out += format_double(t);
        for (const auto& [owner, var] : columns) {
            out += "," + format_double(solution.value(t, owner, var));
        }
        out += "\n";
    }
    return out;
}

namespace {

struct PlotSeries {
    std::string owner;
    std::vector<double> values;
};

struct PlotPanel {
    std::string var;
    std::vector<PlotSeries> series;
};

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt_px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
    const double span = hi - lo;
    double raw = span / std::max(target, 2);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> ticks;
    double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + 0.5 * step; v += step) {
        ticks.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    }
    return ticks;
}

}  // namespace

std::string render_plot_svg(const PowerGridSolution& solution,
                            const std::vector<std::string>& selections) {
    if (selections.empty()) throw Error("io", "no plot selections given");
    const auto [t0, t1] = solution.tspan();
    if (!(t1 > t0)) throw Error("io", "empty time range");

    constexpr int kSamples = 401;
    std::vector<double> times(kSamples);
    for (int k = 0; k < kSamples; ++k) {
        times[static_cast<size_t>(k)] = t0 + (t1 - t0) * k / (kSamples - 1);
    }

    std::vector<PlotPanel> panels;
    for (const auto& selection : selections) {
        PlotPanel panel;
        std::vector<std::pair<std::string, std::string>> targets;
        const auto colon = selection.find(':');
        if (colon != std::string::npos) {
            targets.emplace_back(selection.substr(0, colon), selection.substr(colon + 1));
            panel.var = selection;
        } else {
            panel.var = selection;
            for (const auto& owner : solution.owners_with(selection)) {
                targets.emplace_back(owner, selection);
            }
            if (targets.empty()) {
                throw LookupError("io", "selection '" + selection + "' matches no component");
            }
        }
        for (const auto& [owner, var] : targets) {
            PlotSeries s;
            s.owner = owner;
            s.values = solution.series(times, owner, var);  // throws for bad names
            panel.series.push_back(std::move(s));
        }
        panels.push_back(std::move(panel));
    }

    constexpr double kLeft = 70.0, kRight = 30.0, kTop = 30.0, kBottom = 45.0;
    constexpr double kPlotW = 720.0, kPlotH = 200.0, kGap = 25.0;
    const double width = kLeft + kPlotW + kRight;
    const double height = kTop + panels.size() * (kPlotH + kBottom) + (panels.size() - 1) * kGap;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<style>text{font-family:sans-serif;font-size:12px;}.axis{stroke:#333;stroke-width:1;}"
        << ".grid{stroke:#ddd;stroke-width:0.5;}.series{fill:none;stroke-width:1.5;}</style>\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double panel_top = kTop;
    for (const auto& panel : panels) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& s : panel.series) {
            for (double v : s.values) {
                if (!std::isfinite(v)) continue;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            lo = -1.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            const double pad = std::max(1e-6, std::abs(hi) * 1e-3);
            lo -= pad;
            hi += pad;
        } else {
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }

        auto x_px = [&](double t) { return kLeft + (t - t0) / (t1 - t0) * kPlotW; };
        auto y_px = [&](double v) { return panel_top + kPlotH - (v - lo) / (hi - lo) * kPlotH; };

        svg << "<g class=\"panel\">\n";
        // frame and ticks
        svg << "<rect x=\"" << fmt_px(kLeft) << "\" y=\"" << fmt_px(panel_top) << "\" width=\""
            << fmt_px(kPlotW) << "\" height=\"" << fmt_px(kPlotH)
            << "\" fill=\"none\" class=\"axis\"/>\n";
        for (double ty : nice_ticks(lo, hi, 5)) {
            const double y = y_px(ty);
            svg << "<line class=\"grid\" x1=\"" << fmt_px(kLeft) << "\" y1=\"" << fmt_px(y)
                << "\" x2=\"" << fmt_px(kLeft + kPlotW) << "\" y2=\"" << fmt_px(y) << "\"/>\n";
            svg << "<text x=\"" << fmt_px(kLeft - 8) << "\" y=\"" << fmt_px(y + 4)
                << "\" text-anchor=\"end\">" << fmt_tick(ty) << "</text>\n";
        }
        for (double tx : nice_ticks(t0, t1, 6)) {
            const double xp = x_px(tx);
            svg << "<line class=\"grid\" x1=\"" << fmt_px(xp) << "\" y1=\"" << fmt_px(panel_top)
                << "\" x2=\"" << fmt_px(xp) << "\" y2=\"" << fmt_px(panel_top + kPlotH)
                << "\"/>\n";
            svg << "<text x=\"" << fmt_px(xp) << "\" y=\"" << fmt_px(panel_top + kPlotH + 16)
                << "\" text-anchor=\"middle\">" << fmt_tick(tx) << "</text>\n";
        }
        svg << "<text x=\"" << fmt_px(kLeft + kPlotW / 2) << "\" y=\""
            << fmt_px(panel_top + kPlotH + 34) << "\" text-anchor=\"middle\">t [s]</text>\n";
        svg << "<text x=\"" << fmt_px(16.0) << "\" y=\"" << fmt_px(panel_top + kPlotH / 2)
            << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
            << fmt_px(panel_top + kPlotH / 2) << ")\">" << panel.var << "</text>\n";

        // series polylines, split at non-finite samples
        for (size_t si = 0; si < panel.series.size(); ++si) {
            const auto& s = panel.series[si];
            const char* color = kPalette[si % std::size(kPalette)];
            std::string points;
            auto flush = [&]() {
                if (!points.empty()) {
                    svg << "<polyline class=\"series\" stroke=\"" << color << "\" points=\""
                        << points << "\"/>\n";
                    points.clear();
                }
            };
            for (int k = 0; k < kSamples; ++k) {
                const double v = s.values[static_cast<size_t>(k)];
                if (!std::isfinite(v)) {
                    flush();
                    continue;
                }
                if (!points.empty()) points += " ";
                points += fmt_px(x_px(times[static_cast<size_t>(k)])) + "," + fmt_px(y_px(v));
            }
            flush();
        }

        // legend
        for (size_t si = 0; si < panel.series.size(); ++si) {
            const char* color = kPalette[si % std::size(kPalette)];
            const double lx = kLeft + kPlotW - 150.0;
            const double ly = panel_top + 14.0 + 16.0 * static_cast<double>(si);
            svg << "<line x1=\"" << fmt_px(lx) << "\" y1=\"" << fmt_px(ly - 4) << "\" x2=\""
                << fmt_px(lx + 18) << "\" y2=\"" << fmt_px(ly - 4) << "\" stroke=\"" << color
                << "\" stroke-width=\"2\"/>\n";
            svg << "<text x=\"" << fmt_px(lx + 24) << "\" y=\"" << fmt_px(ly) << "\">"
                << panel.series[si].owner << "</text>\n";
        }
        svg << "</g>\n";
        panel_top += kPlotH + kBottom + kGap;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace phasordyn
