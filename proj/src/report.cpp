#include "psychkit/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>

#include "psychkit/ctt.hpp"
#include "psychkit/dif.hpp"
#include "psychkit/error.hpp"
#include "psychkit/inference.hpp"
#include "psychkit/irt.hpp"
#include "psychkit/proficiency.hpp"

namespace psychkit::report {
namespace {

using io::Json;

std::string extra(const AnalysisConfig& cfg, const std::string& key, const std::string& fallback) {
    const auto it = cfg.extra.find(key);
    return it == cfg.extra.end() ? fallback : it->second;
}

double extra_number(const AnalysisConfig& cfg, const std::string& key, double fallback) {
    const auto it = cfg.extra.find(key);
    if (it == cfg.extra.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw Error("config", key + " must be numeric");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) {
        const auto b = part.find_first_not_of(" \t");
        const auto e = part.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(part.substr(b, e - b + 1));
    }
    return out;
}

std::vector<double> as_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct Stage {
    std::vector<Failure>* failures;

    template <typename F>
    bool run(const std::string& module, const std::string& context, F&& f) {
        try {
            f();
            return true;
        } catch (const Error& e) {
            failures->push_back({e.module().empty() ? module : e.module(),
                                 (context.empty() ? "" : context + ": ") + e.what()});
        } catch (const std::exception& e) {
            failures->push_back({module, (context.empty() ? "" : context + ": ") + e.what()});
        }
        return false;
    }
};

struct GroupOutput {
    std::string label;
    Json ctt;
    Json irt;
    std::optional<ctt::NormTable> norms;
    std::optional<irt::IrtModel> two_pl;
    std::optional<irt::CurveTable> curves;
    std::optional<irt::WrightMap> wright;
    std::vector<Failure> failures;
};

GroupOutput analyse_group(const std::string& label, const ResponseMatrix& m, const std::string& hash) {
    GroupOutput out;
    out.label = label;
    Stage stage{&out.failures};
    const std::string ctx = "group " + label;

    stage.run("ctt", ctx, [&] {
        const auto totals = m.totals();
        const std::vector<double> scores = as_vector(totals);
        out.norms = ctt::norm_table(scores, static_cast<int>(m.n_items()));
        out.ctt = {{"group", label},
                   {"config_hash", hash},
                   {"n_students", m.n_students()},
                   {"item_analysis", io::to_json(ctt::item_analysis(m))},
                   {"descriptives", io::to_json(ctt::descriptives(scores))},
                   {"norm_table", io::to_json(*out.norms)}};
    });

    stage.run("irt", ctx, [&] {
        const auto grid = irt::normal_grid();
        const auto one = irt::fit(m, irt::ModelKind::one_pl, grid);
        const auto two = irt::fit(m, irt::ModelKind::two_pl, grid);
        if (!two.converged) throw Error("irt", "2PL EM did not converge");
        out.two_pl = two;
        const auto abilities = irt::eap(m, two, grid);
        out.curves = irt::curves(two);
        out.wright = irt::wright_map_data(two, abilities.eap);
        Json adjusted = Json::array();
        for (Index j = 0; j < two.n_items(); ++j)
            adjusted.push_back({{"item", two.items[j]},
                                {"adjusted_difficulty", proficiency::adjusted_difficulty(two.a(j), two.b(j))}});
        out.irt = {{"group", label},
                   {"config_hash", hash},
                   {"one_pl", io::to_json(one)},
                   {"two_pl", io::to_json(two)},
                   {"comparison", io::to_json(irt::compare(one, two, m.n_students()))},
                   {"adjusted_difficulty", adjusted},
                   {"classification", io::to_json(irt::classify_items(two))},
                   {"eap_reliability", abilities.eap_reliability},
                   {"q3", io::to_json(irt::yen_q3(m, two, abilities))},
                   {"unidimensionality", io::to_json(irt::unidimensionality_screen(m))},
                   {"wright_map", io::to_json(*out.wright)}};
    });
    return out;
}

std::set<std::string> parse_values(const std::string& s) {
    const auto parts = split(s, '+');
    return {parts.begin(), parts.end()};
}

std::string safe_name(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s;
}

}  // namespace

ReportOutcome build_report(const ResponseMatrix& matrix, const AnalysisConfig& config) {
    ReportOutcome outcome;
    Stage stage{&outcome.failures};
    const std::string hash = config.hash();
    Json& report = outcome.report;
    report["tool"] = {{"name", "psychkit"}, {"version", kToolVersion}};
    report["config"] = {{"canonical", config.canonical()}, {"hash", hash}, {"seed", config.random_seed}};

    const std::string group_col = config.grouping_variable;
    std::vector<std::string> levels;
    if (!stage.run("dataset", "", [&] {
            if (matrix.empty()) throw Error("dataset", "no students to analyse");
            if (!matrix.has_column(group_col)) throw Error("dataset", "unknown grouping column " + group_col);
            levels = matrix.group_levels(group_col);
        }))
        return outcome;

    Json group_sizes = Json::object();
    std::vector<ResponseMatrix> subsets;
    for (const auto& level : levels) {
        subsets.push_back(subset(matrix, GroupSelector{}.where(group_col, {level})));
        group_sizes[level] = subsets.back().n_students();
    }
    const auto& st = matrix.load_stats();
    report["dataset"] = {{"config_hash", hash},
                         {"n_students", matrix.n_students()},
                         {"n_items", matrix.n_items()},
                         {"items", matrix.items()},
                         {"grouping_variable", group_col},
                         {"group_sizes", group_sizes},
                         {"load_stats",
                          {{"raw_rows", st.raw_rows},
                           {"usable_rows", st.usable_rows},
                           {"filtered_rows", st.filtered_rows},
                           {"blank_rows", st.blank_rows},
                           {"imputed_cells", st.imputed_cells}}}};

    // Per-group stages are independent; results are gathered in level order.
    std::vector<std::future<GroupOutput>> tasks;
    for (std::size_t g = 0; g < levels.size(); ++g)
        tasks.push_back(std::async(std::launch::async, analyse_group, group_col + "=" + levels[g],
                                   std::cref(subsets[g]), hash));
    GroupOutput combined = analyse_group("combined", matrix, hash);
    std::vector<GroupOutput> groups;
    for (auto& t : tasks) groups.push_back(t.get());
    groups.push_back(std::move(combined));

    Json ctt_groups = Json::array();
    Json irt_groups = Json::array();
    for (auto& g : groups) {
        if (!g.ctt.is_null()) ctt_groups.push_back(g.ctt);
        if (!g.irt.is_null()) irt_groups.push_back(g.irt);
        outcome.failures.insert(outcome.failures.end(), g.failures.begin(), g.failures.end());
    }
    report["ctt"] = {{"config_hash", hash}, {"skew_kurtosis_estimator", "scaled"}, {"groups", ctt_groups}};

    Json inf = {{"config_hash", hash}};
    stage.run("inference", "", [&] {
        if (levels.size() < 2) {
            inf["note"] = "fewer than two levels of " + group_col + "; group comparisons skipped";
            return;
        }
        std::vector<inference::Sample> samples;
        std::vector<double> sizes;
        for (const auto& s : subsets) {
            samples.push_back(as_vector(s.totals()));
            sizes.push_back(static_cast<double>(s.n_students()));
        }
        inf["outcome"] = "total";
        inf["factor"] = group_col;
        inf["anova"] = io::to_json(inference::one_way_anova(samples));
        Json dunn = Json::array();
        for (const auto& r : inference::dunn_test(samples, levels)) dunn.push_back(io::to_json(r));
        inf["dunn"] = dunn;
        inf["mdes"] = io::to_json(inference::min_detectable_effect(sizes));
    });
    stage.run("inference", "two-way", [&] {
        const std::string second = extra(config, "second_factor", "gender");
        if (levels.size() < 2 || second == group_col || !matrix.has_column(second) ||
            matrix.group_levels(second).size() < 2)
            return;
        std::vector<std::string> fa, fb;
        for (Index i = 0; i < matrix.n_students(); ++i) {
            fa.push_back(matrix.group_value(i, group_col));
            fb.push_back(matrix.group_value(i, second));
        }
        const std::vector<double> totals = as_vector(matrix.totals());
        Json rows = Json::array();
        for (const auto& r : inference::two_way_anova(totals, fa, fb)) rows.push_back(io::to_json(r));
        inf["two_way"] = {{"factors", {group_col, second}}, {"rows", rows}};
    });
    report["inference"] = inf;
    report["irt"] = {{"config_hash", hash}, {"quadrature_nodes", 61}, {"groups", irt_groups}};

    // DIF: gender on the full sample, plus configured pairs of grouping levels.
    dif::DifOptions dopt;
    std::vector<dif::Method> methods;
    std::vector<std::pair<std::string, dif::GroupSplit>> analyses;
    stage.run("dif", "options", [&] {
        dopt.alpha = extra_number(config, "dif_alpha", dopt.alpha);
        dopt.max_rounds = static_cast<int>(extra_number(config, "dif_max_rounds", dopt.max_rounds));
        dopt.lord_min_group_size =
            static_cast<Index>(extra_number(config, "lord_min_group_size", static_cast<double>(dopt.lord_min_group_size)));
        dopt.include_studied_item = extra(config, "dif_include_studied_item", "true") != "false";
        for (const auto& m : split(extra(config, "dif_methods", "mh,logistic,lord"), ','))
            methods.push_back(dif::parse_method(m));
        if (extra(config, "dif_gender", "true") != "false" && matrix.has_column("gender"))
            analyses.push_back({"gender", dif::GroupSplit{"gender", {}, {}}});
        for (const auto& pair : split(extra(config, "dif_pairs", ""), ';')) {
            const auto sides = split(pair, ':');
            if (sides.size() != 2) throw Error("config", "dif_pairs entries look like 3+4:5+6");
            analyses.push_back({group_col + "_" + sides[0] + "_vs_" + sides[1],
                                dif::GroupSplit{group_col, parse_values(sides[0]), parse_values(sides[1])}});
        }
    });
    Json dif_json = Json::array();
    for (const auto& [name, split_spec] : analyses) {
        stage.run("dif", name, [&] {
            const auto a = dif::purify_and_synthesize(matrix, split_spec, methods, dopt);
            Json j = io::to_json(a);
            j["name"] = name;
            j["column"] = split_spec.column;
            j["config_hash"] = hash;
            j["include_studied_item"] = dopt.include_studied_item;
            j["alpha"] = dopt.alpha;
            dif_json.push_back(j);
            for (const auto& r : a.results)
                if (!r.error.empty()) outcome.failures.push_back({"dif", name + ": " + r.error});
        });
    }
    report["dif"] = {{"config_hash", hash}, {"analyses", dif_json}};

    proficiency::ProfileOptions popt;
    Json prof = {{"config_hash", hash}};
    stage.run("proficiency", "combined", [&] {
        popt.origin = extra_number(config, "proficiency_origin", popt.origin);
        popt.min_items = static_cast<Index>(extra_number(config, "proficiency_min_items", static_cast<double>(popt.min_items)));
        const auto& model = groups.back().two_pl;
        if (!model) throw Error("proficiency", "combined 2PL model unavailable");
        const auto est = irt::eap(matrix, *model);
        std::map<std::string, std::vector<double>> by_group;
        for (Index i = 0; i < matrix.n_students(); ++i)
            by_group[matrix.group_value(i, group_col)].push_back(est.eap(i));
        std::map<std::string, Vector> abilities;
        for (auto& [g, v] : by_group) abilities[g] = Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size()));
        const auto profile = proficiency::build_profile(*model, abilities, popt);
        prof["combined"] = io::to_json(profile);
        prof["combined_semantics"] = io::to_json(proficiency::verify_level_semantics(profile, *model));
    });
    Json per_group = Json::array();
    for (std::size_t g = 0; g < levels.size(); ++g) {
        stage.run("proficiency", groups[g].label, [&] {
            const auto& model = groups[g].two_pl;
            if (!model) throw Error("proficiency", "2PL model unavailable");
            const auto est = irt::eap(subsets[g], *model);
            const auto profile = proficiency::build_profile(*model, {{levels[g], est.eap}}, popt);
            per_group.push_back({{"group", groups[g].label}, {"profile", io::to_json(profile)}});
        });
    }
    prof["per_group"] = per_group;
    report["proficiency"] = prof;

    Json failures = Json::array();
    for (const auto& f : outcome.failures) failures.push_back({{"module", f.module}, {"message", f.message}});
    report["failures"] = failures;

    // Sidecar payloads kept alongside for run_report.
    std::map<std::string, ctt::NormTable> norms;
    for (const auto& g : groups)
        if (g.norms) norms[g.label] = *g.norms;
    std::ostringstream norm_csv;
    io::write_norm_csv(norm_csv, norms);
    report["_sidecars"]["norms.csv"] = norm_csv.str();
    for (const auto& g : groups) {
        if (g.curves) {
            std::ostringstream os;
            io::write_curves_csv(os, *g.curves);
            report["_sidecars"]["curves_" + safe_name(g.label) + ".csv"] = os.str();
        }
        if (g.wright) {
            std::ostringstream os;
            io::write_wright_csv(os, *g.wright);
            report["_sidecars"]["wright_" + safe_name(g.label) + ".csv"] = os.str();
        }
    }
    return outcome;
}

ReportOutcome run_report(const ReportOptions& options) {
    ReportOutcome outcome;
    Stage stage{&outcome.failures};
    AnalysisConfig config;
    ResponseMatrix matrix;
    const bool loaded = stage.run("config", "", [&] {
        if (options.config) config = load_config(*options.config);
        if (options.seed) config.random_seed = *options.seed;
        if (options.group) config.grouping_variable = *options.group;
    }) && stage.run("dataset", options.input.string(), [&] { matrix = load_csv(options.input, config); });

    if (loaded) {
        outcome = build_report(matrix, config);
    } else {
        outcome.report["tool"] = {{"name", "psychkit"}, {"version", kToolVersion}};
        outcome.report["config"] = {{"canonical", config.canonical()}, {"hash", config.hash()}};
        Json failures = Json::array();
        for (const auto& f : outcome.failures) failures.push_back({{"module", f.module}, {"message", f.message}});
        outcome.report["failures"] = failures;
    }

    std::filesystem::create_directories(options.out_dir);
    if (outcome.report.contains("_sidecars")) {
        for (const auto& [name, text] : outcome.report["_sidecars"].items()) {
            std::ofstream out(options.out_dir / name, std::ios::binary);
            out << text.get<std::string>();
        }
        outcome.report.erase("_sidecars");
    }
    for (const auto& a : outcome.report.value("dif", Json::object()).value("analyses", Json::array())) {
        std::ofstream out(options.out_dir / ("dif_" + safe_name(a.at("name").get<std::string>()) + ".csv"),
                          std::ios::binary);
        out << "method,item,statistic,p_adjusted,effect_size,effect_class,flagged\n";
        for (const auto& r : a.at("results"))
            for (const auto& it : r.at("items")) {
                auto num = [](const Json& v) { return v.is_null() ? std::string() : io::format_number(v.get<double>()); };
                out << r.at("method").get<std::string>() << ',' << it.at("item").get<std::string>() << ','
                    << num(it.at("statistic")) << ',' << num(it.at("p_adjusted")) << ','
                    << num(it.at("effect_size")) << ','
                    << (it.at("effect_class").is_null() ? "" : it.at("effect_class").get<std::string>()) << ','
                    << (it.at("flagged").get<bool>() ? 1 : 0) << '\n';
            }
    }
    io::write_json(options.out_dir / "report.json", outcome.report);

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream stamp;
    stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    io::write_json(options.out_dir / "report.meta.json",
                   {{"generated_at", stamp.str()}, {"input", options.input.string()}, {"tool_version", kToolVersion}});

    const auto failures_path = options.out_dir / "failures.json";
    if (!outcome.failures.empty())
        io::write_json(failures_path, outcome.report["failures"]);
    else
        std::filesystem::remove(failures_path);
    return outcome;
}

}  // namespace psychkit::report
