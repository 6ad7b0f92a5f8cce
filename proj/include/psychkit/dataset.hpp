#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "psychkit/linalg.hpp"

namespace psychkit {

enum class MissingPolicy { reject, score_as_incorrect };

struct AnalysisConfig {
    std::set<std::string> excluded_items;
    std::string grouping_variable = "grade";
    MissingPolicy missing_policy = MissingPolicy::reject;
    std::uint64_t random_seed = 20230601;
    /// Columns between `gender` and the first item that carry extra metadata.
    std::vector<std::string> metadata_columns;
    /// When non-empty, rows whose grade is not listed are filtered out.
    std::set<int> grades;

    /// Remaining key=value pairs, consumed by the pipeline stages.
    std::map<std::string, std::string> extra;

    /// Canonical key=value rendering; the config hash is computed over it.
    std::string canonical() const;
    std::string hash() const;
};

AnalysisConfig parse_config(std::istream& in);
AnalysisConfig load_config(const std::filesystem::path& path);

struct StudentRecord {
    std::string student_id;
    int grade = 0;
    std::string gender;
    std::map<std::string, std::string> metadata;
    std::vector<std::uint8_t> responses;

    bool operator==(const StudentRecord&) const = default;
};

struct LoadStats {
    std::size_t raw_rows = 0;
    std::size_t usable_rows = 0;
    std::size_t filtered_rows = 0;  // dropped by the grade filter
    std::size_t blank_rows = 0;     // every response missing
    std::size_t imputed_cells = 0;  // blanks scored as incorrect

    bool operator==(const LoadStats&) const = default;
};

/// Binary students x items response table. Immutable once constructed.
class ResponseMatrix {
public:
    ResponseMatrix() = default;
    ResponseMatrix(std::vector<std::string> items, std::vector<StudentRecord> rows,
                   std::vector<std::string> metadata_columns = {}, LoadStats stats = {});

    const std::vector<std::string>& items() const { return items_; }
    const std::vector<StudentRecord>& rows() const { return rows_; }
    const std::vector<std::string>& metadata_columns() const { return metadata_columns_; }
    const LoadStats& load_stats() const { return stats_; }

    Index n_students() const { return static_cast<Index>(rows_.size()); }
    Index n_items() const { return static_cast<Index>(items_.size()); }
    bool empty() const { return rows_.empty(); }

    /// Responses as a dense students x items 0/1 matrix.
    const Matrix& scores() const { return scores_; }
    Vector totals() const { return scores_.rowwise().sum(); }

    Index item_index(const std::string& item) const;
    bool has_item(const std::string& item) const;

    bool has_column(const std::string& column) const;
    /// Value of a grouping column (`grade`, `gender` or a metadata column).
    std::string group_value(Index row, const std::string& column) const;
    /// Distinct values of a grouping column, sorted (numerically for grade).
    std::vector<std::string> group_levels(const std::string& column) const;

    ResponseMatrix without_items(const std::set<std::string>& items) const;
    ResponseMatrix with_items(const std::vector<std::string>& items) const;

    bool operator==(const ResponseMatrix& other) const;

private:
    std::vector<std::string> items_;
    std::vector<StudentRecord> rows_;
    std::vector<std::string> metadata_columns_;
    LoadStats stats_;
    Matrix scores_;
};

ResponseMatrix load_csv(const std::filesystem::path& path, const AnalysisConfig& config);
ResponseMatrix read_csv(std::istream& in, const AnalysisConfig& config);
void write_csv(std::ostream& out, const ResponseMatrix& matrix);

/// Conjunction of column = one-of(values) clauses.
struct GroupSelector {
    std::map<std::string, std::set<std::string>> clauses;

    GroupSelector& where(const std::string& column, std::set<std::string> values);
    GroupSelector operator&&(const GroupSelector& other) const;
};

ResponseMatrix subset(const ResponseMatrix& matrix, const GroupSelector& selector);
ResponseMatrix subset(const ResponseMatrix& matrix,
                      const std::function<bool(const StudentRecord&)>& predicate);

}  // namespace psychkit
