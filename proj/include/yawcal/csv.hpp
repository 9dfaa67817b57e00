#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "yawcal/errors.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

// Shortest decimal string that round-trips the exact double.
inline std::string format_double(double v) {
    std::array<char, 40> buf;
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc())
        throw Error(ErrorKind::invalid_input, "format_double failed");
    return std::string(buf.data(), p);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorKind::parse, "bad number '" + std::string(s) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorKind::parse, "bad integer '" + std::string(s) + "'");
    return v;
}

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3u : 9u)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate { std::int64_t year; unsigned month, day; };

constexpr CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2), m, d};
}

}  // namespace detail

// Accepts YYYY-MM-DD[T or space]HH:MM:SS with an optional trailing Z.
inline std::int64_t parse_iso8601(std::string_view s) {
    auto fail = [&] {
        throw Error(ErrorKind::parse, "bad timestamp '" + std::string(s) + "'");
    };
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 19) fail();
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':')
        fail();
    auto num = [&](int off, int len) -> std::int64_t {
        std::int64_t v = 0;
        for (int i = off; i < off + len; ++i) {
            char c = s[static_cast<std::size_t>(i)];
            if (c < '0' || c > '9') fail();
            v = v * 10 + (c - '0');
        }
        return v;
    };
    std::int64_t year = num(0, 4);
    unsigned month = static_cast<unsigned>(num(5, 2));
    unsigned day = static_cast<unsigned>(num(8, 2));
    std::int64_t hh = num(11, 2), mm = num(14, 2), ss = num(17, 2);
    if (month < 1 || month > 12 || day < 1 || day > 31) fail();
    if (hh > 23 || mm > 59 || ss > 60) fail();
    // Round-trip check rejects impossible dates like Feb 30.
    auto days = detail::days_from_civil(year, month, day);
    auto back = detail::civil_from_days(days);
    if (back.year != year || back.month != month || back.day != day) fail();
    return days * 86400 + hh * 3600 + mm * 60 + ss;
}

inline std::string format_iso8601(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    auto cd = detail::civil_from_days(days);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(cd.year), cd.month, cd.day,
                  static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return std::string(buf);
}

enum class TimestampFormat { epoch_seconds, iso8601 };

// Maps canonical record fields onto file column names. Fields absent from the
// map keep their canonical names. Columns in the file that map to no field are
// carried through as numeric extras.
struct CsvSchema {
    std::map<std::string, std::string> columns;
    TimestampFormat timestamp_format = TimestampFormat::epoch_seconds;
    bool strict = false;

    static const std::array<std::string_view, 9>& field_names() {
        static const std::array<std::string_view, 9> names{
            "timestamp",      "wind_speed", "wind_direction",
            "nacelle_direction", "power",   "power_limit",
            "pitch_angle",    "air_density", "fault_code"};
        return names;
    }

    std::string column_for(std::string_view field) const {
        auto it = columns.find(std::string(field));
        return it == columns.end() ? std::string(field) : it->second;
    }
};

struct SkippedRow {
    std::size_t line;  // 1-based line number in the file
    std::string reason;
};

struct TelemetryCsv {
    std::vector<TelemetryRecord> records;
    // Pass-through columns, index-aligned with records.
    std::map<std::string, std::vector<double>> extras;
    std::vector<SkippedRow> skipped;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        std::size_t b = s.find_first_not_of(" \t");
        std::size_t e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

}  // namespace detail

inline TelemetryCsv load_telemetry_csv(const std::filesystem::path& path,
                                       const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::schema, "'" + path.string() + "' has no header");
    auto header = detail::split_csv_line(line);

    // Resolve each canonical field to its column index.
    std::map<std::string, int> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (col_index.count(header[i]))
            throw Error(ErrorKind::schema,
                        "duplicate column '" + header[i] + "'");
        col_index[header[i]] = static_cast<int>(i);
    }
    std::array<int, 9> field_col{};
    std::vector<bool> claimed(header.size(), false);
    const auto& fields = CsvSchema::field_names();
    for (std::size_t f = 0; f < fields.size(); ++f) {
        std::string col = schema.column_for(fields[f]);
        auto it = col_index.find(col);
        if (it == col_index.end())
            throw Error(ErrorKind::schema, "missing column '" + col +
                                               "' for field '" +
                                               std::string(fields[f]) + "'");
        field_col[f] = it->second;
        claimed[static_cast<std::size_t>(it->second)] = true;
    }
    std::vector<std::pair<std::string, int>> extra_cols;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (!claimed[i] && !header[i].empty())
            extra_cols.emplace_back(header[i], static_cast<int>(i));

    TelemetryCsv out;
    for (const auto& [name, idx] : extra_cols) out.extras[name];

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        auto reject = [&](const std::string& reason, ErrorKind kind) {
            if (schema.strict)
                throw Error(kind, path.string() + ":" + std::to_string(line_no) +
                                      ": " + reason);
            out.skipped.push_back({line_no, reason});
        };
        if (cells.size() != header.size()) {
            reject("expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()),
                   ErrorKind::parse);
            continue;
        }
        TelemetryRecord r;
        std::vector<double> extra_vals(extra_cols.size());
        try {
            auto cell = [&](std::size_t f) -> const std::string& {
                return cells[static_cast<std::size_t>(field_col[f])];
            };
            r.timestamp = schema.timestamp_format == TimestampFormat::epoch_seconds
                              ? parse_int(cell(0))
                              : parse_iso8601(cell(0));
            r.wind_speed = parse_double(cell(1));
            r.wind_direction = parse_double(cell(2));
            r.nacelle_direction = parse_double(cell(3));
            r.power = parse_double(cell(4));
            r.power_limit = parse_double(cell(5));
            r.pitch_angle = parse_double(cell(6));
            r.air_density = parse_double(cell(7));
            r.fault_code = static_cast<int>(parse_int(cell(8)));
            validate(r);
            for (std::size_t e = 0; e < extra_cols.size(); ++e)
                extra_vals[e] = parse_double(
                    cells[static_cast<std::size_t>(extra_cols[e].second)]);
        } catch (const Error& err) {
            reject(err.what(), err.kind());
            continue;
        }
        out.records.push_back(r);
        for (std::size_t e = 0; e < extra_cols.size(); ++e)
            out.extras[extra_cols[e].first].push_back(extra_vals[e]);
    }

    // Order corruption is structural, never skippable.
    for (std::size_t i = 1; i < out.records.size(); ++i)
        if (out.records[i].timestamp <= out.records[i - 1].timestamp)
            throw Error(ErrorKind::ordering,
                        path.string() + ": timestamps not strictly increasing near t=" +
                            std::to_string(out.records[i].timestamp));
    return out;
}

inline void save_telemetry_csv(
    const std::filesystem::path& path, std::span<const TelemetryRecord> records,
    const CsvSchema& schema = {},
    const std::map<std::string, std::vector<double>>* extras = nullptr) {
    if (extras)
        for (const auto& [name, vals] : *extras)
            if (vals.size() != records.size())
                throw Error(ErrorKind::invalid_input,
                            "extra column '" + name + "' not aligned with records");
    std::ofstream outf(path, std::ios::trunc);
    if (!outf)
        throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    const auto& fields = CsvSchema::field_names();
    std::string header;
    for (auto f : fields) {
        if (!header.empty()) header += ',';
        header += schema.column_for(f);
    }
    if (extras)
        for (const auto& [name, vals] : *extras) header += "," + name;
    outf << header << '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::string row =
            schema.timestamp_format == TimestampFormat::epoch_seconds
                ? std::to_string(r.timestamp)
                : format_iso8601(r.timestamp);
        row += ',' + format_double(r.wind_speed);
        row += ',' + format_double(r.wind_direction);
        row += ',' + format_double(r.nacelle_direction);
        row += ',' + format_double(r.power);
        row += ',' + format_double(r.power_limit);
        row += ',' + format_double(r.pitch_angle);
        row += ',' + format_double(r.air_density);
        row += ',' + std::to_string(r.fault_code);
        if (extras)
            for (const auto& [name, vals] : *extras)
                row += ',' + format_double(vals[i]);
        outf << row << '\n';
    }
    outf.flush();
    if (!outf)
        throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

// Minimal generic table writer for derived artifacts (metrics, bins, ...).
inline void write_csv_table(const std::filesystem::path& path,
                            const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows) {
    std::ofstream outf(path, std::ios::trunc);
    if (!outf)
        throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    std::string h;
    for (const auto& c : header) {
        if (!h.empty()) h += ',';
        h += c;
    }
    outf << h << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw Error(ErrorKind::invalid_input, "ragged table row");
        std::string line;
        for (const auto& c : row) {
            if (!line.empty()) line += ',';
            line += c;
        }
        outf << line << '\n';
    }
    outf.flush();
    if (!outf)
        throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

}  // namespace yawcal
