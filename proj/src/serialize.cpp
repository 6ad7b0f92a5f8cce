#include "psychkit/serialize.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "psychkit/error.hpp"

namespace psychkit::io {
namespace {

constexpr const char* kModule = "io";

Json number(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

template <typename T>
Json optional_number(const std::optional<T>& x) {
    if (!x) return nullptr;
    return number(static_cast<double>(*x));
}

Json vec(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
    return out;
}

Json optional_bound(const std::optional<double>& x) { return optional_number(x); }

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(kModule, "cannot parse " + what + " value '" + s + "'");
    }
}

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Json to_json(const ctt::ItemAnalysis& analysis) {
    Json items = Json::array();
    for (const auto& it : analysis.items) {
        items.push_back({{"item", it.item},
                         {"difficulty_index", number(it.difficulty_index)},
                         {"point_biserial", number(it.point_biserial)},
                         {"point_biserial_corrected", number(it.point_biserial_corrected)},
                         {"drop_alpha", optional_number(it.drop_alpha)},
                         {"flag", ctt::to_string(it.flag)},
                         {"zero_variance", it.zero_variance}});
    }
    return {{"reliability",
             {{"alpha", number(analysis.reliability.alpha)},
              {"n_items", analysis.reliability.n_items},
              {"interpretation", ctt::to_string(analysis.reliability.interpretation)}}},
            {"items", items}};
}

Json to_json(const ctt::Descriptives& d) {
    return {{"n", d.n},          {"mean", number(d.mean)},         {"sem", number(d.sem)},
            {"sd", number(d.sd)}, {"skew", number(d.skew)},         {"kurtosis", number(d.kurtosis)},
            {"min", number(d.min)}, {"max", number(d.max)}};
}

Json to_json(const ctt::NormTable& table) {
    Json rows = Json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"score", r.score}, {"z", number(r.z)}, {"percentile", r.percentile}});
    return {{"mean", number(table.mean)}, {"sd", number(table.sd)}, {"rows", rows}};
}

Json to_json(const inference::TestResult& r) {
    return {{"label", r.label},
            {"statistic", number(r.statistic)},
            {"df1", number(r.df1)},
            {"df2", optional_number(r.df2)},
            {"p_value", number(r.p_value)},
            {"p_adjusted", optional_number(r.p_adjusted)},
            {"difference", optional_number(r.difference)},
            {"effect_size", optional_number(r.effect_size)},
            {"effect_label", r.effect_label}};
}

Json to_json(const inference::MinimumDetectableEffect& m) {
    return {{"two_group_d", optional_number(m.two_group_d)},
            {"anova_d", number(m.anova_d)},
            {"anova_f", number(m.anova_f)}};
}

Json to_json(const irt::IrtModel& model) {
    Json items = Json::array();
    for (Index j = 0; j < model.n_items(); ++j)
        items.push_back({{"item", model.items[j]}, {"a", number(model.a(j))}, {"b", number(model.b(j))}});
    return {{"kind", irt::to_string(model.kind)},
            {"items", items},
            {"log_likelihood", number(model.log_likelihood)},
            {"n_params", model.n_params},
            {"n_students", model.n_students},
            {"converged", model.converged},
            {"n_iterations", model.n_iterations}};
}

irt::IrtModel model_from_json(const Json& j) {
    try {
        irt::IrtModel m;
        m.kind = irt::parse_model_kind(j.at("kind").get<std::string>());
        const auto& items = j.at("items");
        const auto k = static_cast<Index>(items.size());
        m.a.resize(k);
        m.b.resize(k);
        for (Index i = 0; i < k; ++i) {
            const auto& it = items.at(static_cast<std::size_t>(i));
            m.items.push_back(it.at("item").get<std::string>());
            m.a(i) = it.at("a").get<double>();
            m.b(i) = it.at("b").get<double>();
        }
        m.log_likelihood = j.value("log_likelihood", 0.0);
        m.n_params = j.value("n_params", irt::parameter_count(m.kind, k));
        m.n_students = j.value("n_students", Index{0});
        m.converged = j.value("converged", true);
        m.n_iterations = j.value("n_iterations", 0);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, std::string("malformed model JSON: ") + e.what());
    }
}

irt::IrtModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

Json to_json(const irt::FitComparison& c) {
    return {{"aic_small", number(c.small.aic)}, {"bic_small", number(c.small.bic)},
            {"aic_large", number(c.large.aic)}, {"bic_large", number(c.large.bic)},
            {"lrt", number(c.lrt)},             {"df", c.df},
            {"p_value", number(c.p_value)}};
}

Json to_json(const irt::Q3Result& q3) {
    Json pairs = Json::array();
    for (const auto& p : q3.flagged)
        pairs.push_back({{"item_a", p.item_a}, {"item_b", p.item_b}, {"q3", number(p.q3)}});
    return {{"max_abs", number(q3.max_abs)},
            {"acceptable", q3.acceptable},
            {"poor", q3.poor},
            {"flagged", pairs}};
}

Json to_json(const irt::UnidimensionalityScreen& u) {
    Json clamped = Json::array();
    for (const auto& [a, b] : u.clamped_pairs) clamped.push_back({a, b});
    return {{"eigenvalues", vec(u.eigenvalues)},
            {"ratio", number(u.ratio)},
            {"plausibly_unidimensional", u.plausibly_unidimensional},
            {"clamped_pairs", clamped}};
}

Json to_json(const irt::WrightMap& w) {
    Json persons = Json::array();
    for (const auto& b : w.persons)
        persons.push_back({{"lower", number(b.lower)}, {"upper", number(b.upper)}, {"count", b.count}});
    Json items = Json::array();
    for (const auto& it : w.items)
        items.push_back({{"item", it.item},
                         {"difficulty", number(it.difficulty)},
                         {"discrimination", number(it.discrimination)}});
    return {{"bin_width", number(w.bin_width)}, {"persons", persons}, {"items", items}};
}

Json to_json(const std::vector<irt::ItemClassification>& c) {
    Json out = Json::array();
    for (const auto& it : c)
        out.push_back({{"item", it.item}, {"discrimination", it.discrimination}, {"difficulty", it.difficulty}});
    return out;
}

Json to_json(const dif::DifResult& r) {
    Json items = Json::array();
    for (const auto& it : r.items) {
        Json row = {{"item", it.item},
                    {"statistic", number(it.statistic)},
                    {"df", number(it.df)},
                    {"p_value", number(it.p_value)},
                    {"p_adjusted", number(it.p_adjusted)},
                    {"effect_size", optional_number(it.effect_size)},
                    {"effect_class", it.effect_class ? Json(dif::to_string(*it.effect_class)) : Json(nullptr)},
                    {"flagged", it.flagged}};
        if (it.odds_ratio) row["odds_ratio"] = number(*it.odds_ratio);
        if (!it.note.empty()) row["note"] = it.note;
        items.push_back(row);
    }
    Json out = {{"method", dif::to_string(r.method)}, {"items", items}};
    if (!r.equating.empty()) out["equating"] = r.equating;
    if (!r.error.empty()) out["error"] = r.error;
    return out;
}

Json to_json(const dif::DifAnalysis& a) {
    Json results = Json::array();
    for (const auto& r : a.results) results.push_back(to_json(r));
    Json traces = Json::array();
    for (const auto& t : a.traces)
        traces.push_back({{"method", dif::to_string(t.method)},
                          {"rounds", t.flagged_per_round},
                          {"stabilized", t.stabilized},
                          {"cycled", t.cycled},
                          {"anchors_exhausted", t.anchors_exhausted}});
    Json synthesis = Json::array();
    for (const auto& s : a.synthesis)
        synthesis.push_back({{"item", s.item}, {"votes", s.votes}, {"verdict", s.dif ? "DIF" : "NoDIF"}});
    return {{"reference", a.reference_label},
            {"focal", a.focal_label},
            {"results", results},
            {"synthesis", synthesis},
            {"purification", traces}};
}

Json to_json(const proficiency::ProficiencyProfile& p) {
    Json levels = Json::array();
    for (const auto& l : p.levels)
        levels.push_back({{"index", l.index},
                          {"lower_bound", optional_bound(l.lower)},
                          {"upper_bound", optional_bound(l.upper)},
                          {"items", l.items},
                          {"anchor", l.anchor ? Json(*l.anchor) : Json(nullptr)},
                          {"sparse", l.sparse}});
    Json items = Json::array();
    for (std::size_t j = 0; j < p.items.size(); ++j)
        items.push_back({{"item", p.items[j]},
                         {"adjusted_difficulty", number(p.adjusted[j])},
                         {"level", p.item_assignment.at(p.items[j])}});
    Json dist = Json::object();
    for (const auto& [group, pct] : p.student_distribution)
        dist[group] = {{"n", p.group_sizes.at(group)}, {"percent", pct}};
    return {{"origin", number(p.origin)},
            {"level_width", proficiency::kLevelWidth},
            {"target_p", number(p.target_p)},
            {"min_items", p.min_items},
            {"ability_estimator", p.ability_estimator},
            {"levels", levels},
            {"items", items},
            {"student_distribution", dist}};
}

Json to_json(const std::vector<proficiency::LevelSemantics>& s) {
    Json out = Json::array();
    for (const auto& l : s)
        out.push_back({{"level", l.index},
                       {"p_lower", optional_number(l.p_lower)},
                       {"p_upper", optional_number(l.p_upper)},
                       {"lower_deviation", optional_number(l.lower_deviation)},
                       {"upper_deviation", optional_number(l.upper_deviation)},
                       {"note", l.note}});
    return out;
}

void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kModule, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(kModule, "write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, path.string() + ": " + e.what());
    }
}

void write_norm_csv(std::ostream& out, const std::map<std::string, ctt::NormTable>& tables) {
    out << "group,score,z,percentile\n";
    for (const auto& [group, t] : tables)
        for (const auto& r : t.rows)
            out << group << ',' << r.score << ',' << format_number(r.z) << ',' << r.percentile << '\n';
}

void write_curves_csv(std::ostream& out, const irt::CurveTable& c) {
    out << "theta,item,probability,information\n";
    for (Index t = 0; t < c.theta.size(); ++t)
        for (std::size_t j = 0; j < c.items.size(); ++j)
            out << format_number(c.theta(t)) << ',' << c.items[j] << ','
                << format_number(c.probability(t, static_cast<Index>(j))) << ','
                << format_number(c.information(t, static_cast<Index>(j))) << '\n';
    for (Index t = 0; t < c.theta.size(); ++t)
        out << format_number(c.theta(t)) << ",TEST,," << format_number(c.test_information(t)) << '\n';
}

void write_wright_csv(std::ostream& out, const irt::WrightMap& map) {
    out << "kind,label,lower,upper,value\n";
    for (const auto& b : map.persons)
        out << "persons,," << format_number(b.lower) << ',' << format_number(b.upper) << ',' << b.count << '\n';
    for (const auto& it : map.items)
        out << "item," << it.item << ',' << format_number(it.difficulty) << ',' << format_number(it.difficulty)
            << ',' << format_number(it.discrimination) << '\n';
}

void write_dif_csv(std::ostream& out, const dif::DifAnalysis& analysis) {
    out << "method,item,statistic,df,p_value,p_adjusted,effect_size,effect_class,flagged,votes,verdict\n";
    for (const auto& r : analysis.results)
        for (std::size_t j = 0; j < r.items.size(); ++j) {
            const auto& it = r.items[j];
            const auto& s = analysis.synthesis[j];
            out << dif::to_string(r.method) << ',' << it.item << ',' << format_number(it.statistic) << ','
                << format_number(it.df) << ',' << format_number(it.p_value) << ','
                << format_number(it.p_adjusted) << ','
                << (it.effect_size ? format_number(*it.effect_size) : "") << ','
                << (it.effect_class ? dif::to_string(*it.effect_class) : "") << ','
                << (it.flagged ? 1 : 0) << ',' << s.votes << ',' << (s.dif ? "DIF" : "NoDIF") << '\n';
        }
}

void write_eap_csv(std::ostream& out, const std::vector<AbilityRow>& rows) {
    out << "student_id,group,eap,posterior_sd\n";
    for (const auto& r : rows)
        out << r.student_id << ',' << r.group << ',' << format_number(r.eap) << ','
            << format_number(r.posterior_sd) << '\n';
}

std::vector<AbilityRow> read_eap_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(kModule, "abilities file is empty");
    const auto header = split(strip_cr(line), ',');
    auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(kModule, "abilities file lacks column " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_id = col("student_id");
    const auto c_eap = col("eap");
    const auto it_group = std::find(header.begin(), header.end(), "group");
    std::vector<AbilityRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw Error(kModule, "abilities line " + std::to_string(line_no) + " has the wrong number of fields");
        AbilityRow r;
        r.student_id = cells[c_id];
        r.group = it_group == header.end() ? "all" : cells[static_cast<std::size_t>(it_group - header.begin())];
        r.eap = parse_double(cells[c_eap], "eap");
        rows.push_back(r);
    }
    if (rows.empty()) throw Error(kModule, "abilities file has no rows");
    return rows;
}

}  // namespace psychkit::io
