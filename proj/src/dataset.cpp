#include "hydrofit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hydrofit/rng.hpp"

namespace hydrofit {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& field, std::size_t line_no, const std::string& col) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + field +
                         "' as a number in column '" + col + "'");
    }
    return value;
}

int find_column(const std::vector<std::string>& columns, const std::string& name) {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

}  // namespace

CsvSchema CsvSchema::from_header(const std::string& header_line) {
    CsvSchema schema;
    schema.columns = split_fields(header_line);
    for (const char* required : {"t", "v", "p"}) {
        if (find_column(schema.columns, required) < 0) {
            throw SchemaError(std::string("CSV header is missing required column '") + required +
                              "'");
        }
    }
    schema.has_vdot = find_column(schema.columns, "vdot") >= 0;
    schema.has_vddot = find_column(schema.columns, "vddot") >= 0;
    schema.has_cycle = find_column(schema.columns, "cycle") >= 0;
    return schema;
}

namespace {

struct RawRow {
    double t, v, vdot, vddot, p;
    long cycle;
    std::size_t line_no;
};

double infer_rate(const std::vector<RawRow>& rows, std::size_t begin, std::size_t end) {
    if (end - begin < 2) return 25.0;  // nominal bench rate; single row has no spacing
    std::vector<double> dts;
    dts.reserve(end - begin - 1);
    for (std::size_t i = begin + 1; i < end; ++i) dts.push_back(rows[i].t - rows[i - 1].t);
    std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
    const double median = dts[dts.size() / 2];
    if (!(median > 0.0)) return 25.0;
    return 1.0 / median;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("'" + path.string() + "' is empty (header row required)");
    }
    const CsvSchema file_schema = CsvSchema::from_header(line);
    if (file_schema.columns != schema.columns) {
        throw SchemaError("'" + path.string() + "' header does not match the expected schema");
    }

    const int col_t = find_column(schema.columns, "t");
    const int col_v = find_column(schema.columns, "v");
    const int col_p = find_column(schema.columns, "p");
    const int col_vdot = find_column(schema.columns, "vdot");
    const int col_vddot = find_column(schema.columns, "vddot");
    const int col_cycle = find_column(schema.columns, "cycle");

    std::vector<RawRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != schema.columns.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(schema.columns.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        RawRow row{};
        row.line_no = line_no;
        row.t = parse_double(fields[col_t], line_no, "t");
        row.v = parse_double(fields[col_v], line_no, "v");
        row.p = parse_double(fields[col_p], line_no, "p");
        row.vdot = col_vdot >= 0 ? parse_double(fields[col_vdot], line_no, "vdot") : 0.0;
        row.vddot = col_vddot >= 0 ? parse_double(fields[col_vddot], line_no, "vddot") : 0.0;
        row.cycle = col_cycle >= 0
                        ? static_cast<long>(parse_double(fields[col_cycle], line_no, "cycle"))
                        : 0;
        rows.push_back(row);
    }
    if (rows.empty()) {
        throw ParseError("'" + path.string() + "' contains no data rows");
    }

    // Group consecutive rows with equal cycle values into trajectories.
    std::vector<Trajectory> trajectories;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= rows.size(); ++i) {
        if (i < rows.size() && rows[i].cycle == rows[begin].cycle) continue;
        // Monotone-time check first so the error can name the offending line.
        for (std::size_t r = begin + 1; r < i; ++r) {
            if (rows[r].t <= rows[r - 1].t) {
                throw InvariantError("line " + std::to_string(rows[r].line_no) + " (data row " +
                                     std::to_string(rows[r].line_no - 1) +
                                     "): time is not strictly increasing");
            }
        }
        const double rate = infer_rate(rows, begin, i);
        std::vector<Sample> samples;
        samples.reserve(i - begin);
        for (std::size_t r = begin; r < i; ++r) {
            try {
                samples.emplace_back(rows[r].t, rows[r].v, rows[r].vdot, rows[r].vddot, rows[r].p);
            } catch (const InvariantError& e) {
                throw InvariantError("line " + std::to_string(rows[r].line_no) + ": " + e.what());
            }
        }
        trajectories.emplace_back(std::move(samples), rate, static_cast<int>(rows[begin].cycle),
                                  Phase::Mixed, schema.has_vdot, schema.has_vddot);
        begin = i;
    }
    Dataset ds(std::move(trajectories), 0);
    ds.metadata["source"] = path.filename().string();
    return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw ParseError("'" + path.string() + "' is empty (header row required)");
    }
    return load_csv(path, CsvSchema::from_header(header));
}

namespace {

void append_double(std::string& out, double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    out.append(buf, ptr);
}

}  // namespace

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::string out = "t,v,vdot,vddot,p,cycle\n";
    for (const Trajectory& traj : ds.trajectories) {
        for (const Sample& s : traj.samples()) {
            append_double(out, s.t);
            out.push_back(',');
            append_double(out, s.v);
            out.push_back(',');
            append_double(out, s.v_dot);
            out.push_back(',');
            append_double(out, s.v_ddot);
            out.push_back(',');
            append_double(out, s.p);
            out.push_back(',');
            out += std::to_string(traj.cycle_id());
            out.push_back('\n');
        }
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
        file << out;
    }
    std::filesystem::rename(tmp, path);
}

Trajectory differentiate(const Trajectory& traj) {
    const auto& samples = traj.samples();
    const std::size_t n = samples.size();
    if (n < 5) {
        throw TooShortError("differentiate needs >= 5 samples, got " + std::to_string(n));
    }

    // Quadratic fit over a 5-sample window; offsets x in {-2..2} sample
    // units. a1 = S1/10, a2 = (S2 - 2*S0)/14 with Sk = sum(x^k * f).
    // Derivative at offset x is (a1 + 2*a2*x)/h, second derivative 2*a2/h^2.
    std::vector<Sample> out = samples;
    auto window_fit = [&](std::size_t center) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (int x = -2; x <= 2; ++x) {
            const double f =
                samples[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(center) + x)].v;
            s0 += f;
            s1 += x * f;
            s2 += x * x * f;
        }
        const double a1 = s1 / 10.0;
        const double a2 = (s2 - 2.0 * s0) / 14.0;
        const double h = (samples[center + 2].t - samples[center - 2].t) / 4.0;
        return std::array<double, 3>{a1, a2, h};
    };
    auto fill = [&](std::size_t idx, std::size_t center) {
        const auto [a1, a2, h] = window_fit(center);
        const double x = static_cast<double>(idx) - static_cast<double>(center);
        out[idx].v_dot = (a1 + 2.0 * a2 * x) / h;
        out[idx].v_ddot = 2.0 * a2 / (h * h);
    };

    for (std::size_t i = 2; i + 2 < n; ++i) fill(i, i);
    fill(0, 2);
    fill(1, 2);
    fill(n - 2, n - 3);
    fill(n - 1, n - 3);

    return Trajectory(std::move(out), traj.sample_rate_hz(), traj.cycle_id(), traj.phase(),
                      /*has_vdot=*/true, /*has_vddot=*/true);
}

Dataset differentiate(const Dataset& ds) {
    std::vector<Trajectory> out;
    out.reserve(ds.trajectories.size());
    for (const Trajectory& traj : ds.trajectories) out.push_back(differentiate(traj));
    return Dataset(std::move(out), ds.chamber_id, ds.metadata);
}

std::vector<Trajectory> segment_cycles(const Trajectory& traj) {
    const auto& samples = traj.samples();

    auto classify = [](double v_dot) -> int {
        if (v_dot > kPhaseBand) return +1;
        if (v_dot < -kPhaseBand) return -1;
        return 0;  // dwell: continues the current phase
    };

    std::vector<std::pair<std::size_t, int>> boundaries;  // (start index, sign)
    int current = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int sign = classify(samples[i].v_dot);
        if (sign == 0 || sign == current) continue;
        if (current == 0) {
            // First signed sample: the leading dwell belongs to this segment.
            boundaries.emplace_back(0, sign);
        } else {
            boundaries.emplace_back(i, sign);
        }
        current = sign;
    }

    if (boundaries.empty()) {
        return {Trajectory(samples, traj.sample_rate_hz(), traj.cycle_id(), Phase::Mixed,
                           traj.has_vdot(), traj.has_vddot())};
    }

    std::vector<Trajectory> segments;
    for (std::size_t b = 0; b < boundaries.size(); ++b) {
        const std::size_t begin = boundaries[b].first;
        const std::size_t end = (b + 1 < boundaries.size()) ? boundaries[b + 1].first
                                                            : samples.size();
        const Phase phase = boundaries[b].second > 0 ? Phase::Inflation : Phase::Deflation;
        std::vector<Sample> part(samples.begin() + begin, samples.begin() + end);
        segments.emplace_back(std::move(part), traj.sample_rate_hz(), traj.cycle_id(), phase,
                              traj.has_vdot(), traj.has_vddot());
    }
    return segments;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw InvariantError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
    }
    const std::size_t count = ds.trajectories.size();
    if (count < 2) {
        throw InsufficientTrajectoriesError("split needs >= 2 trajectories, got " +
                                            std::to_string(count));
    }
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed);
    deterministic_shuffle(order, rng);

    // Floor rule, clamped so both parts stay non-empty.
    std::size_t n_first = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(count)));
    n_first = std::clamp<std::size_t>(n_first, 1, count - 1);

    std::vector<Trajectory> first, second;
    for (std::size_t i = 0; i < count; ++i) {
        (i < n_first ? first : second).push_back(ds.trajectories[order[i]]);
    }
    return {Dataset(std::move(first), ds.chamber_id, ds.metadata),
            Dataset(std::move(second), ds.chamber_id, ds.metadata)};
}

}  // namespace hydrofit
