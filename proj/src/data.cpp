#include "idlfm/data.hpp"

#include "idlfm/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace idlfm {

namespace {

std::vector<std::string> numbered_labels(const char* prefix, std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
        out.push_back(prefix + std::to_string(k));
    }
    return out;
}

void sort_by_time(std::vector<Observation>& obs) {
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Observation& a, const Observation& b) { return a.time < b.time; });
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        fields.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(comma + 1);
    }
    return fields;
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || begin == end) {
        return std::nullopt;
    }
    return v;
}

}  // namespace

ObservationPanel::ObservationPanel(std::size_t num_subjects, std::size_t num_series, double domain_end)
    : ObservationPanel(numbered_labels("s", num_subjects), numbered_labels("y", num_series), domain_end) {}

ObservationPanel::ObservationPanel(std::vector<std::string> subject_ids,
                                   std::vector<std::string> series_ids, double domain_end)
    : subject_ids_(std::move(subject_ids)),
      series_ids_(std::move(series_ids)),
      domain_end_(domain_end),
      cells_(subject_ids_.size() * series_ids_.size()) {
    if (!(domain_end > 0.0)) {
        throw std::invalid_argument("panel domain end must be positive");
    }
}

std::size_t ObservationPanel::index(std::size_t subject, std::size_t series) const {
    if (subject >= num_subjects() || series >= num_series()) {
        std::ostringstream msg;
        msg << "cell (" << subject << ", " << series << ") outside panel of " << num_subjects()
            << " subjects and " << num_series() << " series";
        throw std::out_of_range(msg.str());
    }
    return subject * num_series() + series;
}

std::span<const Observation> ObservationPanel::cell(std::size_t subject, std::size_t series) const {
    return cells_[index(subject, series)];
}

void ObservationPanel::set_cell(std::size_t subject, std::size_t series, std::vector<Observation> obs) {
    for (const auto& o : obs) {
        if (!(o.time >= 0.0 && o.time <= domain_end_)) {
            std::ostringstream msg;
            msg << "observation time " << o.time << " outside [0, " << domain_end_ << "]";
            throw std::invalid_argument(msg.str());
        }
    }
    sort_by_time(obs);
    cells_[index(subject, series)] = std::move(obs);
}

void ObservationPanel::add(std::size_t subject, std::size_t series, Observation obs) {
    if (!(obs.time >= 0.0 && obs.time <= domain_end_)) {
        std::ostringstream msg;
        msg << "observation time " << obs.time << " outside [0, " << domain_end_ << "]";
        throw std::invalid_argument(msg.str());
    }
    auto& c = cells_[index(subject, series)];
    const auto pos = std::upper_bound(c.begin(), c.end(), obs.time,
                                      [](double t, const Observation& o) { return t < o.time; });
    c.insert(pos, obs);
}

std::size_t ObservationPanel::size() const noexcept {
    std::size_t n = 0;
    for (const auto& c : cells_) {
        n += c.size();
    }
    return n;
}

std::size_t ObservationPanel::series_count(std::size_t series) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < num_subjects(); ++i) {
        n += cell(i, series).size();
    }
    return n;
}

std::optional<std::size_t> ObservationPanel::find_subject(const std::string& id) const {
    const auto it = std::find(subject_ids_.begin(), subject_ids_.end(), id);
    if (it == subject_ids_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - subject_ids_.begin());
}

std::optional<std::size_t> ObservationPanel::find_series(const std::string& id) const {
    const auto it = std::find(series_ids_.begin(), series_ids_.end(), id);
    if (it == series_ids_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - series_ids_.begin());
}

// ---------------------------------------------------------------------------

ObservationPanel read_panel_csv(std::istream& in, std::optional<double> domain_end) {
    struct Row {
        std::size_t subject;
        std::size_t series;
        Observation obs;
    };
    std::vector<std::string> subjects, series;
    std::map<std::string, std::size_t> subject_index, series_index;
    std::vector<Row> rows;

    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) {
            line.erase(0, 3);
        }
        const std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') {
            continue;
        }
        const auto fields = split_fields(trimmed);
        if (!have_header) {
            if (fields != std::vector<std::string>{"subject", "series", "time", "value"}) {
                throw ParseError(line_no, "expected header 'subject,series,time,value'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != 4) {
            throw ParseError(line_no, "expected 4 fields, found " + std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError(line_no, "empty subject or series label");
        }
        const auto t = parse_double(fields[2]);
        const auto y = parse_double(fields[3]);
        if (!t || !std::isfinite(*t)) {
            throw ParseError(line_no, "invalid time '" + fields[2] + "'");
        }
        if (!y || !std::isfinite(*y)) {
            throw ParseError(line_no, "invalid value '" + fields[3] + "'");
        }
        if (*t < 0.0) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": negative time " + fields[2]);
        }
        auto [sit, snew] = subject_index.try_emplace(fields[0], subjects.size());
        if (snew) {
            subjects.push_back(fields[0]);
        }
        auto [jit, jnew] = series_index.try_emplace(fields[1], series.size());
        if (jnew) {
            series.push_back(fields[1]);
        }
        rows.push_back({sit->second, jit->second, {*t, *y}});
    }
    if (!have_header) {
        throw ParseError(line_no, "missing header 'subject,series,time,value'");
    }
    if (rows.empty()) {
        throw std::invalid_argument("no observations");
    }

    double t_max = 0.0;
    for (const auto& r : rows) {
        t_max = std::max(t_max, r.obs.time);
    }
    const double T = domain_end.value_or(t_max);
    if (!(T > 0.0)) {
        throw std::invalid_argument("domain end must be positive (all observations at time 0?)");
    }
    if (t_max > T) {
        throw std::invalid_argument("observation time exceeds the requested domain end");
    }

    std::vector<std::vector<Observation>> cells(subjects.size() * series.size());
    for (const auto& r : rows) {
        cells[r.subject * series.size() + r.series].push_back(r.obs);
    }
    ObservationPanel panel(std::move(subjects), std::move(series), T);
    for (std::size_t i = 0; i < panel.num_subjects(); ++i) {
        for (std::size_t j = 0; j < panel.num_series(); ++j) {
            panel.set_cell(i, j, std::move(cells[i * panel.num_series() + j]));
        }
    }
    return panel;
}

ObservationPanel read_panel_csv(const std::filesystem::path& path, std::optional<double> domain_end) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return read_panel_csv(in, domain_end);
}

std::vector<QueryPoint> read_query_csv(std::istream& in) {
    std::vector<QueryPoint> out;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') {
            continue;
        }
        const auto fields = split_fields(trimmed);
        if (!have_header) {
            if (fields != std::vector<std::string>{"subject", "series", "time"}) {
                throw ParseError(line_no, "expected header 'subject,series,time'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
        }
        const auto t = parse_double(fields[2]);
        if (!t || !std::isfinite(*t)) {
            throw ParseError(line_no, "invalid time '" + fields[2] + "'");
        }
        out.push_back({fields[0], fields[1], *t});
    }
    if (!have_header) {
        throw ParseError(line_no, "missing header 'subject,series,time'");
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        throw std::runtime_error("cannot format double");
    }
    return std::string(buf, ptr);
}

void write_comment_lines(std::ostream& out, const std::string& comment) {
    if (comment.empty()) {
        return;
    }
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) {
        out << "# " << line << '\n';
    }
}

void write_panel_csv(std::ostream& out, const ObservationPanel& panel, const std::string& comment) {
    write_comment_lines(out, comment);
    out << "subject,series,time,value\n";
    for (std::size_t i = 0; i < panel.num_subjects(); ++i) {
        for (std::size_t j = 0; j < panel.num_series(); ++j) {
            for (const auto& o : panel.cell(i, j)) {
                out << panel.subject_ids()[i] << ',' << panel.series_ids()[j] << ','
                    << format_double(o.time) << ',' << format_double(o.value) << '\n';
            }
        }
    }
}

// ---------------------------------------------------------------------------

const CellStats& StandardizationStats::at(std::size_t subject, std::size_t series) const {
    if (subject >= num_subjects || series >= num_series) {
        throw std::out_of_range("unknown cell (" + std::to_string(subject) + ", " +
                                std::to_string(series) + ") in standardization stats");
    }
    return cells[subject * num_series + series];
}

StandardizationStats StandardizationStats::identity(std::size_t num_subjects, std::size_t num_series) {
    StandardizationStats s;
    s.num_subjects = num_subjects;
    s.num_series = num_series;
    s.convention = "none";
    s.cells.assign(num_subjects * num_series, CellStats{});
    return s;
}

StandardizedPanel standardize(const ObservationPanel& panel) {
    StandardizedPanel result{panel, {}};
    auto& stats = result.stats;
    stats.num_subjects = panel.num_subjects();
    stats.num_series = panel.num_series();
    stats.cells.resize(stats.num_subjects * stats.num_series);

    for (std::size_t i = 0; i < panel.num_subjects(); ++i) {
        for (std::size_t j = 0; j < panel.num_series(); ++j) {
            const auto obs = panel.cell(i, j);
            auto& cs = stats.cells[i * panel.num_series() + j];
            if (obs.size() < 2) {
                cs = {0.0, 1.0, true};
                continue;
            }
            const double n = static_cast<double>(obs.size());
            double mean = 0.0;
            for (const auto& o : obs) {
                mean += o.value;
            }
            mean /= n;
            double ss = 0.0;
            for (const auto& o : obs) {
                ss += (o.value - mean) * (o.value - mean);
            }
            const double sd = std::sqrt(ss / n);
            if (!(sd > 0.0)) {
                cs = {0.0, 1.0, true};
                continue;
            }
            cs = {mean, sd, false};
            std::vector<Observation> scaled(obs.begin(), obs.end());
            for (auto& o : scaled) {
                o.value = (o.value - mean) / sd;
            }
            result.panel.set_cell(i, j, std::move(scaled));
        }
    }
    return result;
}

double destandardize(double value, const StandardizationStats& stats, std::size_t subject,
                     std::size_t series) {
    const auto& cs = stats.at(subject, series);
    return value * cs.std + cs.mean;
}

std::vector<double> destandardize(std::span<const double> values, const StandardizationStats& stats,
                                  std::size_t subject, std::size_t series) {
    const auto& cs = stats.at(subject, series);
    std::vector<double> out(values.begin(), values.end());
    for (auto& v : out) {
        v = v * cs.std + cs.mean;
    }
    return out;
}

// ---------------------------------------------------------------------------

PanelSplit split(const ObservationPanel& panel, const SplitSpec& spec) {
    const std::size_t J = panel.num_series();
    const std::size_t target = spec.target_series.value_or(J - 1);
    if (target >= J) {
        throw std::invalid_argument("target series index out of range");
    }

    PanelSplit out{panel, ObservationPanel(panel.subject_ids(), panel.series_ids(), panel.domain_end())};

    if (spec.mode == SplitMode::RandomFraction) {
        if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
            throw std::invalid_argument("test fraction must lie in (0, 1)");
        }
        std::mt19937_64 rng(spec.seed);
        for (std::size_t i = 0; i < panel.num_subjects(); ++i) {
            const auto obs = panel.cell(i, target);
            if (obs.size() < 2) {
                throw std::invalid_argument("subject " + panel.subject_ids()[i] +
                                            " has fewer than 2 target observations to split");
            }
            const auto n_test = static_cast<std::size_t>(
                std::floor(spec.test_fraction * static_cast<double>(obs.size())));
            std::vector<std::size_t> order(obs.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            // Partial Fisher-Yates with an explicit draw so the split does not
            // depend on the standard library's shuffle algorithm.
            for (std::size_t k = 0; k < n_test; ++k) {
                const std::size_t span = obs.size() - k;
                const std::size_t pick = k + static_cast<std::size_t>(rng() % span);
                std::swap(order[k], order[pick]);
            }
            std::vector<bool> is_test(obs.size(), false);
            for (std::size_t k = 0; k < n_test; ++k) {
                is_test[order[k]] = true;
            }
            std::vector<Observation> train_obs, test_obs;
            for (std::size_t k = 0; k < obs.size(); ++k) {
                (is_test[k] ? test_obs : train_obs).push_back(obs[k]);
            }
            out.train.set_cell(i, target, std::move(train_obs));
            out.test.set_cell(i, target, std::move(test_obs));
        }
        return out;
    }

    if (spec.test_times.size() != panel.num_subjects()) {
        throw std::invalid_argument("explicit split needs one time list per subject");
    }
    for (std::size_t i = 0; i < panel.num_subjects(); ++i) {
        std::vector<double> times = spec.test_times[i];
        std::sort(times.begin(), times.end());
        std::vector<Observation> train_obs, test_obs;
        for (const auto& o : panel.cell(i, target)) {
            const bool held_out = std::binary_search(times.begin(), times.end(), o.time);
            (held_out ? test_obs : train_obs).push_back(o);
        }
        out.train.set_cell(i, target, std::move(train_obs));
        out.test.set_cell(i, target, std::move(test_obs));
    }
    return out;
}

}  // namespace idlfm
