#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include <json.hpp>

#include "psychkit/ctt.hpp"
#include "psychkit/dif.hpp"
#include "psychkit/inference.hpp"
#include "psychkit/irt.hpp"
#include "psychkit/proficiency.hpp"

namespace psychkit::io {

using Json = nlohmann::ordered_json;

Json to_json(const ctt::ItemAnalysis& analysis);
Json to_json(const ctt::Descriptives& d);
Json to_json(const ctt::NormTable& table);
Json to_json(const inference::TestResult& r);
Json to_json(const inference::MinimumDetectableEffect& m);
Json to_json(const irt::IrtModel& model);
Json to_json(const irt::FitComparison& c);
Json to_json(const irt::Q3Result& q3);
Json to_json(const irt::UnidimensionalityScreen& u);
Json to_json(const irt::WrightMap& w);
Json to_json(const std::vector<irt::ItemClassification>& c);
Json to_json(const dif::DifResult& r);
Json to_json(const dif::DifAnalysis& a);
Json to_json(const proficiency::ProficiencyProfile& p);
Json to_json(const std::vector<proficiency::LevelSemantics>& s);

irt::IrtModel model_from_json(const Json& j);
irt::IrtModel load_model(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

void write_norm_csv(std::ostream& out, const std::map<std::string, ctt::NormTable>& tables);
void write_curves_csv(std::ostream& out, const irt::CurveTable& curves);
void write_wright_csv(std::ostream& out, const irt::WrightMap& map);
void write_dif_csv(std::ostream& out, const dif::DifAnalysis& analysis);

struct AbilityRow {
    std::string student_id;
    std::string group;
    double eap = 0.0;
    double posterior_sd = 0.0;
};

void write_eap_csv(std::ostream& out, const std::vector<AbilityRow>& rows);
std::vector<AbilityRow> read_eap_csv(std::istream& in);

/// Shortest round-trip text for a double.
std::string format_number(double x);

}  // namespace psychkit::io
