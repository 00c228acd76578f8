/**
 * @file data.hpp
 * @brief Irregular multi-resolution observation panels.
 *
 * A panel holds, for every (subject i, series j) cell, a time-sorted list of
 * (t, y) observations on [0, T]. Cells may be empty; different cells may be
 * sampled on unrelated time grids.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace idlfm {

struct Observation {
    double time = 0.0;
    double value = 0.0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

class ObservationPanel {
public:
    ObservationPanel() = default;

    /// Empty panel with I x J cells and generated labels "s1".., "y1"...
    ObservationPanel(std::size_t num_subjects, std::size_t num_series, double domain_end);

    ObservationPanel(std::vector<std::string> subject_ids, std::vector<std::string> series_ids,
                     double domain_end);

    [[nodiscard]] std::size_t num_subjects() const noexcept { return subject_ids_.size(); }
    [[nodiscard]] std::size_t num_series() const noexcept { return series_ids_.size(); }
    [[nodiscard]] double domain_end() const noexcept { return domain_end_; }
    [[nodiscard]] const std::vector<std::string>& subject_ids() const noexcept { return subject_ids_; }
    [[nodiscard]] const std::vector<std::string>& series_ids() const noexcept { return series_ids_; }

    [[nodiscard]] std::span<const Observation> cell(std::size_t subject, std::size_t series) const;

    /// Replaces a cell; the observations are sorted by time (stable).
    /// Throws std::invalid_argument if a time falls outside [0, T].
    void set_cell(std::size_t subject, std::size_t series, std::vector<Observation> obs);

    /// Appends one observation, keeping the cell sorted.
    void add(std::size_t subject, std::size_t series, Observation obs);

    /// Total number of observations |Omega|.
    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] bool empty() const noexcept { return size() == 0; }
    [[nodiscard]] std::size_t series_count(std::size_t series) const;

    [[nodiscard]] std::optional<std::size_t> find_subject(const std::string& id) const;
    [[nodiscard]] std::optional<std::size_t> find_series(const std::string& id) const;

    friend bool operator==(const ObservationPanel&, const ObservationPanel&) = default;

private:
    std::size_t index(std::size_t subject, std::size_t series) const;

    std::vector<std::string> subject_ids_;
    std::vector<std::string> series_ids_;
    double domain_end_ = 0.0;
    std::vector<std::vector<Observation>> cells_;  // row-major over (subject, series)
};

// ---------------------------------------------------------------------------
// CSV interchange: long format, header `subject,series,time,value`, `#` comments.

/// Parses a panel. Subjects and series are labelled in order of first
/// appearance. T is the largest observed time unless domain_end is given.
/// Throws ParseError on malformed rows and std::invalid_argument on negative
/// times or an empty data section ("no observations").
ObservationPanel read_panel_csv(std::istream& in, std::optional<double> domain_end = std::nullopt);
ObservationPanel read_panel_csv(const std::filesystem::path& path,
                                std::optional<double> domain_end = std::nullopt);

/// Writes rows in (subject, series, time) order with round-trip precision.
/// Each line of `comment` is emitted as a leading `# ` line.
void write_panel_csv(std::ostream& out, const ObservationPanel& panel, const std::string& comment = {});

/// One row of an interpolation query: header `subject,series,time`.
struct QueryPoint {
    std::string subject;
    std::string series;
    double time = 0.0;
};

/// Parses a query CSV (`#` comments allowed). Throws ParseError on malformed rows.
std::vector<QueryPoint> read_query_csv(std::istream& in);

/// Writes each line of `comment` as `# line`.
void write_comment_lines(std::ostream& out, const std::string& comment);

/// Formats a double with the shortest representation that round-trips.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Standardization

struct CellStats {
    double mean = 0.0;
    double std = 1.0;
    /// Fewer than two observations or zero variance: values passed through unscaled.
    bool degenerate = false;

    friend bool operator==(const CellStats&, const CellStats&) = default;
};

struct StandardizationStats {
    std::size_t num_subjects = 0;
    std::size_t num_series = 0;
    /// Population convention (divide by n).
    std::string convention = "population";
    std::vector<CellStats> cells;  // row-major over (subject, series)

    [[nodiscard]] const CellStats& at(std::size_t subject, std::size_t series) const;

    /// Identity statistics (mean 0, std 1) for an unstandardized panel.
    static StandardizationStats identity(std::size_t num_subjects, std::size_t num_series);

    friend bool operator==(const StandardizationStats&, const StandardizationStats&) = default;
};

struct StandardizedPanel {
    ObservationPanel panel;
    StandardizationStats stats;
};

/// Centres and scales every cell by its own mean and population std.
StandardizedPanel standardize(const ObservationPanel& panel);

/// Maps standardized values of one cell back to the original scale.
/// Throws std::out_of_range for an unknown cell.
std::vector<double> destandardize(std::span<const double> values, const StandardizationStats& stats,
                                  std::size_t subject, std::size_t series);
double destandardize(double value, const StandardizationStats& stats, std::size_t subject,
                     std::size_t series);

// ---------------------------------------------------------------------------
// Train/test splitting of the target series

enum class SplitMode { RandomFraction, ExplicitTimepoints };

struct SplitSpec {
    SplitMode mode = SplitMode::RandomFraction;
    double test_fraction = 0.3;
    /// Series index of the target; defaults to the last series.
    std::optional<std::size_t> target_series;
    std::uint64_t seed = 0;
    /// ExplicitTimepoints: per-subject test times of the target series.
    std::vector<std::vector<double>> test_times;
};

struct PanelSplit {
    ObservationPanel train;
    ObservationPanel test;
};

/// RandomFraction: each subject contributes floor(fraction * K_iJ) target
/// points to the test set, drawn without replacement from a seeded generator.
/// ExplicitTimepoints: target points whose time is listed for that subject
/// move to the test set. Non-target series always stay in train.
PanelSplit split(const ObservationPanel& panel, const SplitSpec& spec);

}  // namespace idlfm
