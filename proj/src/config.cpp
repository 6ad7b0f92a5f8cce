#include <fstream>
#include <iomanip>
#include <sstream>

#include "psychkit/dataset.hpp"
#include "psychkit/error.hpp"

namespace psychkit {
namespace {

constexpr const char* kModule = "config";

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

template <typename Range>
std::string join(const Range& r) {
    std::string out;
    for (const auto& v : r) {
        if (!out.empty()) out += ',';
        if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v)>>)
            out += std::to_string(v);
        else
            out += v;
    }
    return out;
}

}  // namespace

std::string AnalysisConfig::canonical() const {
    std::map<std::string, std::string> kv = extra;
    kv["excluded_items"] = join(excluded_items);
    kv["grouping_variable"] = grouping_variable;
    kv["missing_policy"] =
        missing_policy == MissingPolicy::reject ? "reject" : "score_as_incorrect";
    kv["random_seed"] = std::to_string(random_seed);
    kv["metadata_columns"] = join(metadata_columns);
    kv["grades"] = join(grades);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string AnalysisConfig::hash() const {
    // FNV-1a, 64 bit.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

AnalysisConfig parse_config(std::istream& in) {
    AnalysisConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(kModule, "line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "excluded_items") {
            for (auto& item : split_list(value)) cfg.excluded_items.insert(item);
        } else if (key == "grouping_variable") {
            cfg.grouping_variable = value;
        } else if (key == "missing_policy") {
            if (value == "reject")
                cfg.missing_policy = MissingPolicy::reject;
            else if (value == "score_as_incorrect")
                cfg.missing_policy = MissingPolicy::score_as_incorrect;
            else
                throw Error(kModule, "unknown missing_policy " + value);
        } else if (key == "random_seed") {
            try {
                cfg.random_seed = std::stoull(value);
            } catch (const std::exception&) {
                throw Error(kModule, "random_seed must be an unsigned integer");
            }
        } else if (key == "metadata_columns") {
            cfg.metadata_columns = split_list(value);
        } else if (key == "grades") {
            for (const auto& g : split_list(value)) {
                try {
                    cfg.grades.insert(std::stoi(g));
                } catch (const std::exception&) {
                    throw Error(kModule, "grades must be integers");
                }
            }
        } else {
            cfg.extra[key] = value;
        }
    }
    return cfg;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open " + path.string());
    return parse_config(in);
}

}  // namespace psychkit
