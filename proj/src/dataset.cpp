#include "psychkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "psychkit/error.hpp"

namespace psychkit {
namespace {

constexpr const char* kModule = "dataset";

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field += ch;
        }
    }
    fields.push_back(trim(field));
    return fields;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

ResponseMatrix::ResponseMatrix(std::vector<std::string> items, std::vector<StudentRecord> rows,
                               std::vector<std::string> metadata_columns, LoadStats stats)
    : items_(std::move(items)),
      rows_(std::move(rows)),
      metadata_columns_(std::move(metadata_columns)),
      stats_(stats) {
    std::set<std::string> seen;
    for (const auto& item : items_)
        if (!seen.insert(item).second) throw Error(kModule, "duplicate item identifier " + item);
    scores_.resize(static_cast<Index>(rows_.size()), static_cast<Index>(items_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (rows_[r].responses.size() != items_.size())
            throw Error(kModule, "student " + rows_[r].student_id + " has " +
                                     std::to_string(rows_[r].responses.size()) +
                                     " responses for " + std::to_string(items_.size()) + " items");
        for (std::size_t j = 0; j < items_.size(); ++j) {
            const auto v = rows_[r].responses[j];
            if (v > 1) throw Error(kModule, "non-binary response for student " + rows_[r].student_id);
            scores_(static_cast<Index>(r), static_cast<Index>(j)) = v;
        }
    }
}

Index ResponseMatrix::item_index(const std::string& item) const {
    const auto it = std::find(items_.begin(), items_.end(), item);
    if (it == items_.end()) throw Error(kModule, "unknown item " + item);
    return static_cast<Index>(it - items_.begin());
}

bool ResponseMatrix::has_item(const std::string& item) const {
    return std::find(items_.begin(), items_.end(), item) != items_.end();
}

bool ResponseMatrix::has_column(const std::string& column) const {
    return column == "grade" || column == "gender" ||
           std::find(metadata_columns_.begin(), metadata_columns_.end(), column) !=
               metadata_columns_.end();
}

std::string ResponseMatrix::group_value(Index row, const std::string& column) const {
    const auto& rec = rows_.at(static_cast<std::size_t>(row));
    if (column == "grade") return std::to_string(rec.grade);
    if (column == "gender") return rec.gender;
    if (!has_column(column)) throw Error(kModule, "unknown grouping column " + column);
    return rec.metadata.at(column);
}

std::vector<std::string> ResponseMatrix::group_levels(const std::string& column) const {
    if (!has_column(column)) throw Error(kModule, "unknown grouping column " + column);
    if (column == "grade") {
        std::set<int> grades;
        for (const auto& r : rows_) grades.insert(r.grade);
        std::vector<std::string> out;
        for (int g : grades) out.push_back(std::to_string(g));
        return out;
    }
    std::set<std::string> levels;
    for (Index i = 0; i < n_students(); ++i) levels.insert(group_value(i, column));
    return {levels.begin(), levels.end()};
}

ResponseMatrix ResponseMatrix::without_items(const std::set<std::string>& items) const {
    std::vector<std::string> keep;
    for (const auto& item : items_)
        if (!items.count(item)) keep.push_back(item);
    for (const auto& item : items)
        if (!has_item(item)) throw Error(kModule, "cannot exclude unknown item " + item);
    return with_items(keep);
}

ResponseMatrix ResponseMatrix::with_items(const std::vector<std::string>& items) const {
    std::vector<Index> idx;
    idx.reserve(items.size());
    for (const auto& item : items) idx.push_back(item_index(item));
    std::vector<StudentRecord> rows = rows_;
    for (auto& rec : rows) {
        std::vector<std::uint8_t> picked;
        picked.reserve(idx.size());
        for (Index j : idx) picked.push_back(rec.responses[static_cast<std::size_t>(j)]);
        rec.responses = std::move(picked);
    }
    return ResponseMatrix(items, std::move(rows), metadata_columns_, stats_);
}

bool ResponseMatrix::operator==(const ResponseMatrix& other) const {
    return items_ == other.items_ && rows_ == other.rows_ &&
           metadata_columns_ == other.metadata_columns_;
}

ResponseMatrix read_csv(std::istream& in, const AnalysisConfig& config) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
            line.erase(0, 3);
        if (!trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw Error(kModule, "empty file");

    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "student_id" || header[1] != "grade" ||
        header[2] != "gender")
        throw Error(kModule, "malformed header: expected student_id,grade,gender,<items...>");
    const std::size_t first_item = 3 + config.metadata_columns.size();
    for (std::size_t m = 0; m < config.metadata_columns.size(); ++m)
        if (header.size() <= 3 + m || header[3 + m] != config.metadata_columns[m])
            throw Error(kModule, "malformed header: metadata column " +
                                     config.metadata_columns[m] + " not found after gender");
    if (header.size() <= first_item) throw Error(kModule, "malformed header: no item columns");

    std::vector<std::string> all_items(header.begin() + static_cast<long>(first_item), header.end());
    {
        std::set<std::string> seen;
        for (const auto& item : all_items) {
            if (item.empty()) throw Error(kModule, "malformed header: empty item identifier");
            if (!seen.insert(item).second)
                throw Error(kModule, "malformed header: duplicate item " + item);
        }
        for (const auto& ex : config.excluded_items)
            if (!seen.count(ex)) throw Error(kModule, "excluded item " + ex + " is not in the header");
    }
    std::vector<std::size_t> kept;
    std::vector<std::string> items;
    for (std::size_t j = 0; j < all_items.size(); ++j) {
        if (config.excluded_items.count(all_items[j])) continue;
        kept.push_back(j);
        items.push_back(all_items[j]);
    }

    LoadStats stats;
    std::vector<StudentRecord> rows;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++stats.raw_rows;
        const auto fields = split_csv_line(line);
        const std::string where = "row " + std::to_string(line_no);
        if (fields.size() != header.size())
            throw Error(kModule, where + ": expected " + std::to_string(header.size()) +
                                     " fields, found " + std::to_string(fields.size()));
        StudentRecord rec;
        rec.student_id = fields[0];
        if (rec.student_id.empty()) throw Error(kModule, where + ": empty student_id");
        if (!ids.insert(rec.student_id).second)
            throw Error(kModule, where + ": duplicate student_id " + rec.student_id);
        {
            const auto& g = fields[1];
            const auto res = std::from_chars(g.data(), g.data() + g.size(), rec.grade);
            if (res.ec != std::errc() || res.ptr != g.data() + g.size())
                throw Error(kModule, where + ", column grade: not an integer: '" + g + "'");
        }
        rec.gender = fields[2];
        for (std::size_t m = 0; m < config.metadata_columns.size(); ++m)
            rec.metadata[config.metadata_columns[m]] = fields[3 + m];

        std::size_t missing = 0;
        std::vector<int> raw(all_items.size());
        for (std::size_t j = 0; j < all_items.size(); ++j) {
            const auto& cell = fields[first_item + j];
            if (cell.empty()) {
                raw[j] = -1;
                continue;
            }
            if (cell == "0" || cell == "1") {
                raw[j] = cell[0] - '0';
                continue;
            }
            throw Error(kModule, where + ", column " + all_items[j] + ": non-binary value '" +
                                     cell + "'");
        }
        for (std::size_t j : kept) {
            if (raw[j] >= 0) continue;
            if (config.missing_policy == MissingPolicy::reject)
                throw Error(kModule, where + ", column " + all_items[j] +
                                         ": missing response (missing_policy=reject)");
            ++missing;
        }
        if (!config.grades.empty() && !config.grades.count(rec.grade)) {
            ++stats.filtered_rows;
            continue;
        }
        if (missing == kept.size()) {
            ++stats.blank_rows;
            continue;
        }
        stats.imputed_cells += missing;
        rec.responses.reserve(kept.size());
        for (std::size_t j : kept) rec.responses.push_back(static_cast<std::uint8_t>(raw[j] > 0));
        rows.push_back(std::move(rec));
    }
    if (stats.raw_rows == 0) throw Error(kModule, "file has a header but no data rows");
    stats.usable_rows = rows.size();
    return ResponseMatrix(std::move(items), std::move(rows), config.metadata_columns, stats);
}

ResponseMatrix load_csv(const std::filesystem::path& path, const AnalysisConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error(kModule, "cannot open " + path.string());
    return read_csv(in, config);
}

void write_csv(std::ostream& out, const ResponseMatrix& matrix) {
    out << "student_id,grade,gender";
    for (const auto& m : matrix.metadata_columns()) out << ',' << quote_if_needed(m);
    for (const auto& item : matrix.items()) out << ',' << quote_if_needed(item);
    out << '\n';
    for (const auto& rec : matrix.rows()) {
        out << quote_if_needed(rec.student_id) << ',' << rec.grade << ','
            << quote_if_needed(rec.gender);
        for (const auto& m : matrix.metadata_columns())
            out << ',' << quote_if_needed(rec.metadata.at(m));
        for (auto v : rec.responses) out << ',' << static_cast<int>(v);
        out << '\n';
    }
}

GroupSelector& GroupSelector::where(const std::string& column, std::set<std::string> values) {
    auto [it, inserted] = clauses.emplace(column, std::move(values));
    if (!inserted) {
        std::set<std::string> both;
        std::set_intersection(it->second.begin(), it->second.end(), values.begin(), values.end(),
                              std::inserter(both, both.begin()));
        it->second = std::move(both);
    }
    return *this;
}

GroupSelector GroupSelector::operator&&(const GroupSelector& other) const {
    GroupSelector out = *this;
    for (const auto& [column, values] : other.clauses) out.where(column, values);
    return out;
}

ResponseMatrix subset(const ResponseMatrix& matrix, const GroupSelector& selector) {
    for (const auto& [column, values] : selector.clauses)
        if (!matrix.has_column(column)) throw Error(kModule, "unknown grouping column " + column);
    std::vector<StudentRecord> rows;
    for (Index i = 0; i < matrix.n_students(); ++i) {
        bool keep = true;
        for (const auto& [column, values] : selector.clauses)
            if (!values.count(matrix.group_value(i, column))) {
                keep = false;
                break;
            }
        if (keep) rows.push_back(matrix.rows()[static_cast<std::size_t>(i)]);
    }
    return ResponseMatrix(matrix.items(), std::move(rows), matrix.metadata_columns(),
                          matrix.load_stats());
}

ResponseMatrix subset(const ResponseMatrix& matrix,
                      const std::function<bool(const StudentRecord&)>& predicate) {
    std::vector<StudentRecord> rows;
    for (const auto& rec : matrix.rows())
        if (predicate(rec)) rows.push_back(rec);
    return ResponseMatrix(matrix.items(), std::move(rows), matrix.metadata_columns(),
                          matrix.load_stats());
}

}  // namespace psychkit
