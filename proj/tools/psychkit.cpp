#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "psychkit/ctt.hpp"
#include "psychkit/dataset.hpp"
#include "psychkit/dif.hpp"
#include "psychkit/error.hpp"
#include "psychkit/inference.hpp"
#include "psychkit/irt.hpp"
#include "psychkit/proficiency.hpp"
#include "psychkit/report.hpp"
#include "psychkit/serialize.hpp"
#include "psychkit/simulate.hpp"

namespace pk = psychkit;
using pk::io::Json;

namespace {

struct Globals {
    std::string input;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string group;
};

pk::AnalysisConfig load_config(const Globals& g) {
    pk::AnalysisConfig cfg = g.config.empty() ? pk::AnalysisConfig{} : pk::load_config(g.config);
    if (g.seed) cfg.random_seed = *g.seed;
    if (!g.group.empty()) cfg.grouping_variable = g.group;
    return cfg;
}

pk::ResponseMatrix load_input(const Globals& g, const pk::AnalysisConfig& cfg) {
    if (g.input.empty()) throw pk::Error("cli", "--input is required");
    return pk::load_csv(g.input, cfg);
}

// Writes to --out, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pk::Error("cli", "cannot write " + path);
    out << text;
}

void emit_json(const std::string& path, const Json& j) { emit(path, j.dump(2) + "\n"); }

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep))
        if (!part.empty()) out.push_back(part);
    return out;
}

std::set<std::string> value_set(const std::string& s) {
    const auto v = split(s, '+');
    return {v.begin(), v.end()};
}

pk::ResponseMatrix apply_subset(const pk::ResponseMatrix& m, const std::string& where) {
    if (where.empty()) return m;
    const auto eq = where.find('=');
    if (eq == std::string::npos) throw pk::Error("cli", "--subset expects column=value[+value]");
    return pk::subset(m, pk::GroupSelector{}.where(where.substr(0, eq), value_set(where.substr(eq + 1))));
}

std::vector<std::string> levels_or_all(const pk::ResponseMatrix& m, const std::string& column) {
    if (column == "none") return {};
    if (!m.has_column(column)) throw pk::Error("cli", "unknown group column " + column);
    return m.group_levels(column);
}

std::vector<double> totals_of(const pk::ResponseMatrix& m) {
    const pk::Vector t = m.totals();
    return {t.data(), t.data() + t.size()};
}

pk::ctt::MomentEstimator parse_estimator(const std::string& s) {
    if (s == "moment") return pk::ctt::MomentEstimator::moment;
    if (s == "adjusted") return pk::ctt::MomentEstimator::adjusted;
    if (s == "scaled") return pk::ctt::MomentEstimator::scaled;
    throw pk::Error("cli", "unknown estimator " + s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"psychkit: psychometric analysis of binary test responses"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--input", g.input, "response CSV");
    app.add_option("--config", g.config, "key=value configuration file");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--out", g.out, "output file (directory for report)");
    app.add_option("--group", g.group, "grouping column");

    std::function<void()> action;

    auto* ctt_cmd = app.add_subcommand("ctt", "item analysis, reliability, descriptives, norm tables");
    std::string norm_csv, estimator = "scaled";
    ctt_cmd->add_option("--csv", norm_csv, "norm table CSV sidecar");
    ctt_cmd->add_option("--estimator", estimator, "moment | adjusted | scaled")->capture_default_str();
    ctt_cmd->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto m = load_input(g, cfg);
            const auto est = parse_estimator(estimator);
            std::vector<std::pair<std::string, pk::ResponseMatrix>> parts;
            for (const auto& level : levels_or_all(m, cfg.grouping_variable))
                parts.push_back({cfg.grouping_variable + "=" + level,
                                 pk::subset(m, pk::GroupSelector{}.where(cfg.grouping_variable, {level}))});
            parts.push_back({"combined", m});
            Json groups = Json::array();
            std::map<std::string, pk::ctt::NormTable> norms;
            for (const auto& [label, part] : parts) {
                const auto scores = totals_of(part);
                norms[label] = pk::ctt::norm_table(scores, static_cast<int>(part.n_items()));
                groups.push_back({{"group", label},
                                  {"config_hash", cfg.hash()},
                                  {"n_students", part.n_students()},
                                  {"item_analysis", pk::io::to_json(pk::ctt::item_analysis(part))},
                                  {"descriptives", pk::io::to_json(pk::ctt::descriptives(scores, est))},
                                  {"norm_table", pk::io::to_json(norms[label])}});
            }
            emit_json(g.out, {{"config_hash", cfg.hash()},
                              {"skew_kurtosis_estimator", pk::ctt::to_string(est)},
                              {"groups", groups}});
            if (!norm_csv.empty()) {
                std::ostringstream os;
                pk::io::write_norm_csv(os, norms);
                emit(norm_csv, os.str());
            }
        };
    });

    auto* cmp = app.add_subcommand("compare", "ANOVA, Dunn post hoc and minimum detectable effect");
    std::string outcome = "total", factor, factor2;
    double alpha = 0.05, power = 0.8;
    cmp->add_option("--outcome", outcome, "total or an item name")->capture_default_str();
    cmp->add_option("--factor", factor, "grouping column (default: --group)");
    cmp->add_option("--factor2", factor2, "second factor for the two-way ANOVA");
    cmp->add_option("--alpha", alpha)->capture_default_str();
    cmp->add_option("--power", power)->capture_default_str();
    cmp->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto m = load_input(g, cfg);
            const std::string f1 = factor.empty() ? cfg.grouping_variable : factor;
            pk::Vector y;
            if (outcome == "total")
                y = m.totals();
            else if (m.has_item(outcome))
                y = m.scores().col(m.item_index(outcome));
            else
                throw pk::Error("cli", "unknown outcome " + outcome);
            const auto levels = levels_or_all(m, f1);
            std::vector<pk::inference::Sample> samples(levels.size());
            std::vector<std::string> fa, fb;
            for (pk::Index i = 0; i < m.n_students(); ++i) {
                const auto v = m.group_value(i, f1);
                samples[std::find(levels.begin(), levels.end(), v) - levels.begin()].push_back(y(i));
                fa.push_back(v);
                if (!factor2.empty()) fb.push_back(m.group_value(i, factor2));
            }
            std::vector<double> sizes;
            for (const auto& s : samples) sizes.push_back(static_cast<double>(s.size()));
            Json dunn = Json::array();
            for (const auto& r : pk::inference::dunn_test(samples, levels)) dunn.push_back(pk::io::to_json(r));
            Json out = {{"config_hash", cfg.hash()},
                        {"outcome", outcome},
                        {"factor", f1},
                        {"anova", pk::io::to_json(pk::inference::one_way_anova(samples))},
                        {"dunn", dunn},
                        {"mdes", pk::io::to_json(pk::inference::min_detectable_effect(sizes, alpha, power))}};
            if (!factor2.empty()) {
                if (!m.has_column(factor2)) throw pk::Error("cli", "unknown factor " + factor2);
                const std::vector<double> yy(y.data(), y.data() + y.size());
                Json rows = Json::array();
                for (const auto& r : pk::inference::two_way_anova(yy, fa, fb)) rows.push_back(pk::io::to_json(r));
                out["two_way"] = {{"factors", {f1, factor2}}, {"rows", rows}};
            }
            emit_json(g.out, out);
        };
    });

    auto* irt_cmd = app.add_subcommand("irt", "item response theory");
    irt_cmd->require_subcommand(1);
    std::string kind = "2pl", where, model_path;
    auto* fit_cmd = irt_cmd->add_subcommand("fit", "fit 1PL / 2PL by marginal maximum likelihood");
    fit_cmd->add_option("--kind", kind, "1pl | 2pl | both")->capture_default_str();
    fit_cmd->add_option("--subset", where, "column=value[+value] row filter");
    fit_cmd->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto m = apply_subset(load_input(g, cfg), where);
            if (kind == "both") {
                const auto one = pk::irt::fit(m, pk::irt::ModelKind::one_pl);
                const auto two = pk::irt::fit(m, pk::irt::ModelKind::two_pl);
                emit_json(g.out, {{"config_hash", cfg.hash()},
                                  {"one_pl", pk::io::to_json(one)},
                                  {"two_pl", pk::io::to_json(two)},
                                  {"comparison", pk::io::to_json(pk::irt::compare(one, two, m.n_students()))}});
                return;
            }
            const auto model = pk::irt::fit(m, pk::irt::parse_model_kind(kind));
            Json j = pk::io::to_json(model);
            j["config_hash"] = cfg.hash();
            j["classification"] = pk::io::to_json(pk::irt::classify_items(model));
            emit_json(g.out, j);
        };
    });

    pk::irt::GridSpec grid_spec;
    auto* curves_cmd = irt_cmd->add_subcommand("curves", "ICC / IIC / TIF / SEM tables");
    curves_cmd->add_option("--model", model_path, "model JSON")->required();
    curves_cmd->add_option("--min", grid_spec.min)->capture_default_str();
    curves_cmd->add_option("--max", grid_spec.max)->capture_default_str();
    curves_cmd->add_option("--step", grid_spec.step)->capture_default_str();
    curves_cmd->callback([&] {
        action = [&] {
            std::ostringstream os;
            pk::io::write_curves_csv(os, pk::irt::curves(pk::io::load_model(model_path), grid_spec));
            emit(g.out, os.str());
        };
    });

    double bin_width = 0.25;
    auto* wright_cmd = irt_cmd->add_subcommand("wright", "Wright map data");
    wright_cmd->add_option("--model", model_path, "model JSON")->required();
    wright_cmd->add_option("--bin-width", bin_width)->capture_default_str();
    wright_cmd->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto m = load_input(g, cfg);
            const auto model = pk::io::load_model(model_path);
            const auto est = pk::irt::eap(m, model);
            std::ostringstream os;
            pk::io::write_wright_csv(os, pk::irt::wright_map_data(model, est.eap, bin_width));
            emit(g.out, os.str());
        };
    });

    auto* eap_cmd = irt_cmd->add_subcommand("eap", "EAP abilities per student");
    eap_cmd->add_option("--model", model_path, "model JSON")->required();
    eap_cmd->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto m = load_input(g, cfg);
            const auto est = pk::irt::eap(m, pk::io::load_model(model_path));
            std::vector<pk::io::AbilityRow> rows;
            for (pk::Index i = 0; i < m.n_students(); ++i)
                rows.push_back({est.student_ids[i], m.group_value(i, cfg.grouping_variable), est.eap(i),
                                est.posterior_sd(i)});
            std::ostringstream os;
            pk::io::write_eap_csv(os, rows);
            emit(g.out, os.str());
        };
    });

    auto* dif_cmd = app.add_subcommand("dif", "differential item functioning");
    std::string methods = "mh,logistic,lord", reference, focal, dif_csv;
    pk::dif::DifOptions dopt;
    bool exclude_studied = false;
    dif_cmd->add_option("--methods", methods)->capture_default_str();
    dif_cmd->add_option("--reference", reference, "reference values, joined with +");
    dif_cmd->add_option("--focal", focal, "focal values, joined with +");
    dif_cmd->add_option("--alpha", dopt.alpha)->capture_default_str();
    dif_cmd->add_option("--max-rounds", dopt.max_rounds)->capture_default_str();
    dif_cmd->add_option("--lord-min-group", dopt.lord_min_group_size)->capture_default_str();
    dif_cmd->add_option("--lord-model", kind, "1pl | 2pl")->capture_default_str();
    dif_cmd->add_flag("--exclude-studied-item", exclude_studied);
    dif_cmd->add_option("--csv", dif_csv, "flat DIF table");
    dif_cmd->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto m = load_input(g, cfg);
            dopt.include_studied_item = !exclude_studied;
            dopt.lord_model = pk::irt::parse_model_kind(kind);
            std::vector<pk::dif::Method> ms;
            for (const auto& s : split(methods, ',')) ms.push_back(pk::dif::parse_method(s));
            const pk::dif::GroupSplit split_spec{g.group.empty() ? std::string("gender") : g.group,
                                                 value_set(reference), value_set(focal)};
            const auto analysis = pk::dif::purify_and_synthesize(m, split_spec, ms, dopt);
            Json j = pk::io::to_json(analysis);
            j["column"] = split_spec.column;
            j["config_hash"] = cfg.hash();
            j["alpha"] = dopt.alpha;
            j["include_studied_item"] = dopt.include_studied_item;
            emit_json(g.out, j);
            if (!dif_csv.empty()) {
                std::ostringstream os;
                pk::io::write_dif_csv(os, analysis);
                emit(dif_csv, os.str());
            }
            for (const auto& r : analysis.results)
                if (!r.error.empty()) throw pk::Error("dif", pk::dif::to_string(r.method) + " abstained: " + r.error);
        };
    });

    auto* prof_cmd = app.add_subcommand("proficiency", "proficiency levels from a 2PL model");
    std::string abilities_path;
    pk::proficiency::ProfileOptions popt;
    prof_cmd->add_option("--model", model_path, "2PL model JSON")->required();
    prof_cmd->add_option("--abilities", abilities_path, "EAP CSV (student_id,group,eap)");
    prof_cmd->add_option("--origin", popt.origin)->capture_default_str();
    prof_cmd->add_option("--min-items", popt.min_items)->capture_default_str();
    prof_cmd->callback([&] {
        action = [&] {
            const auto model = pk::io::load_model(model_path);
            std::map<std::string, pk::Vector> abilities;
            if (!abilities_path.empty()) {
                std::ifstream in(abilities_path);
                if (!in) throw pk::Error("cli", "cannot open " + abilities_path);
                std::map<std::string, std::vector<double>> by_group;
                for (const auto& r : pk::io::read_eap_csv(in)) by_group[r.group].push_back(r.eap);
                for (auto& [grp, v] : by_group)
                    abilities[grp] = Eigen::Map<pk::Vector>(v.data(), static_cast<pk::Index>(v.size()));
            }
            const auto profile = pk::proficiency::build_profile(model, abilities, popt);
            Json j = pk::io::to_json(profile);
            j["semantics"] = pk::io::to_json(pk::proficiency::verify_level_semantics(profile, model));
            emit_json(g.out, j);
        };
    });

    auto* report_cmd = app.add_subcommand("report", "full pipeline into an output directory");
    report_cmd->callback([&] {
        action = [&] {
            if (g.input.empty()) throw pk::Error("cli", "--input is required");
            pk::report::ReportOptions ro;
            ro.input = g.input;
            if (!g.config.empty()) ro.config = g.config;
            ro.seed = g.seed;
            if (!g.group.empty()) ro.group = g.group;
            ro.out_dir = g.out.empty() ? "report" : g.out;
            const auto outcome = pk::report::run_report(ro);
            for (const auto& f : outcome.failures) std::cerr << "error [" << f.module << "]: " << f.message << '\n';
            if (!outcome.ok()) throw pk::Error("report", std::to_string(outcome.failures.size()) + " stage failure(s)");
        };
    });

    auto* sim_cmd = app.add_subcommand("simulate", "draw 2PL responses");
    pk::Index n_students = 1000, n_items = 25, dif_item = 0;
    double dif_shift = 0.0;
    sim_cmd->add_option("--students", n_students)->capture_default_str();
    sim_cmd->add_option("--items", n_items)->capture_default_str();
    sim_cmd->add_option("--dif-item", dif_item, "1-based item shifted for the second gender group");
    sim_cmd->add_option("--dif-shift", dif_shift)->capture_default_str();
    sim_cmd->callback([&] {
        action = [&] {
            pk::sim::Rng rng(g.seed.value_or(pk::AnalysisConfig{}.random_seed));
            const pk::Vector a = pk::sim::uniform_draws(n_items, 0.6, 2.5, rng);
            pk::Vector b = pk::sim::uniform_draws(n_items, -3.0, 3.0, rng);
            const pk::Vector theta = pk::sim::normal_draws(n_students, 0.0, 1.0, rng);
            std::vector<std::string> groups;
            for (pk::Index i = 0; i < n_students; ++i) groups.push_back(i % 2 == 0 ? "F" : "M");
            pk::Matrix y = pk::sim::simulate_2pl(a, b, theta, rng);
            if (dif_item > 0 && dif_shift != 0.0) {
                pk::Vector shifted = b;
                shifted(dif_item - 1) += dif_shift;
                const pk::Matrix y2 = pk::sim::simulate_2pl(a, shifted, theta, rng);
                for (pk::Index i = 1; i < n_students; i += 2) y.row(i) = y2.row(i);
            }
            std::ostringstream os;
            pk::write_csv(os, pk::sim::to_response_matrix(y, groups, 3));
            emit(g.out, os.str());
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (action) action();
    } catch (const pk::Error& e) {
        std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
