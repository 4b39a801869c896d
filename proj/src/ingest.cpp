#include "rebal/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rebal {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date
// (Howard Hinnant's days_from_civil).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Uniform double in [0, 1) from the top 53 bits; portable across stdlibs.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Knuth's product-of-uniforms Poisson sampler; exact and portable for the
// small rates the synthetic generator uses.
int poisson_draw(std::mt19937_64& rng, double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= next_unit(rng);
    } while (p > limit);
    return k - 1;
}

}  // namespace

std::int64_t civil_to_unix(int year, int month, int day, int hour, int minute,
                           int second) {
    return days_from_civil(year, month, day) * 86400LL + hour * 3600LL +
           minute * 60LL + second;
}

std::optional<std::int64_t> parse_timestamp(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) return std::nullopt;

    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    char sep = 0;
    // ISO: YYYY-MM-DD[ T]HH:MM[:SS]
    {
        std::istringstream in(s);
        char d1, d2;
        if (in >> y >> d1 >> mo >> d2 >> d && d1 == '-' && d2 == '-') {
            sep = static_cast<char>(in.peek());
            if (sep == 'T' || sep == ' ') in.get();
            char c1;
            if (in >> h >> c1 >> mi && c1 == ':') {
                if (in.peek() == ':') {
                    in.get();
                    in >> se;
                }
            } else {
                h = mi = se = 0;
            }
            if (mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h >= 0 && h < 24 &&
                mi >= 0 && mi < 60 && se >= 0 && se < 60) {
                return civil_to_unix(y, mo, d, h, mi, se);
            }
        }
    }
    // US: MM/DD/YYYY HH:MM[:SS] [AM|PM]
    {
        std::istringstream in(s);
        char d1, d2, c1;
        if (in >> mo >> d1 >> d >> d2 >> y && d1 == '/' && d2 == '/') {
            h = mi = se = 0;
            if (in >> h >> c1 >> mi && c1 == ':') {
                if (in.peek() == ':') {
                    in.get();
                    in >> se;
                }
                std::string ampm;
                if (in >> ampm) {
                    if (ampm == "PM" || ampm == "pm") {
                        if (h < 12) h += 12;
                    } else if (ampm == "AM" || ampm == "am") {
                        if (h == 12) h = 0;
                    }
                }
            }
            if (mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h >= 0 && h < 24 &&
                mi >= 0 && mi < 60 && se >= 0 && se < 60) {
                return civil_to_unix(y, mo, d, h, mi, se);
            }
        }
    }
    return std::nullopt;
}

RegionMapping RegionMapping::contiguous(int n, int base) {
    RegionMapping m;
    for (int i = 0; i < n; ++i) m.table[std::to_string(base + i)] = i;
    return m;
}

RegionMapping RegionMapping::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("region mapping file not found: " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    RegionMapping m;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        m.table[it.key()] = it.value().get<RegionId>();
    }
    return m;
}

std::optional<RegionId> RegionMapping::lookup(const std::string& raw) const {
    // Tolerate numeric labels exported with a decimal point ("12.0").
    std::string key = trim(raw);
    const auto dot = key.find('.');
    if (dot != std::string::npos &&
        key.find_first_not_of("0123456789.", 0) == std::string::npos) {
        key = key.substr(0, dot);
    }
    const auto it = table.find(key);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

int RegionMapping::max_region() const {
    int mx = -1;
    for (const auto& [_, id] : table) mx = std::max(mx, id);
    return mx;
}

std::string IngestReport::to_text() const {
    std::ostringstream out;
    out << "rows read:    " << rows_read << "\n"
        << "rows kept:    " << rows_kept << "\n"
        << "rows skipped: " << skipped() << "\n"
        << "  bad timestamp: " << skipped_bad_timestamp << "\n"
        << "  bad region:    " << skipped_bad_region << "\n"
        << "  short row:     " << skipped_short_row << "\n";
    return out.str();
}

std::vector<TripRecord> load_trips(const std::string& path,
                                   const CsvSchema& schema,
                                   const RegionMapping& mapping,
                                   IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw IngestError("trip file not found: " + path);

    std::string header_line;
    if (!std::getline(in, header_line))
        throw IngestError("trip file is empty (no header row): " + path);

    const auto header = split_csv_line(header_line);
    auto find_col = [&](const std::string& name) -> int {
        for (size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return static_cast<int>(i);
        return -1;
    };
    const int col_ts = find_col(schema.timestamp);
    const int col_start = find_col(schema.start_region);
    const int col_end = find_col(schema.end_region);
    if (col_ts < 0) throw IngestError("missing mandatory column: " + schema.timestamp);
    if (col_start < 0) throw IngestError("missing mandatory column: " + schema.start_region);
    if (col_end < 0) throw IngestError("missing mandatory column: " + schema.end_region);
    const int col_dist = find_col(schema.distance);
    const int col_vendor = find_col(schema.vendor);

    IngestReport rep;
    std::vector<TripRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++rep.rows_read;
        const auto fields = split_csv_line(line);
        const int needed = std::max({col_ts, col_start, col_end});
        if (static_cast<int>(fields.size()) <= needed) {
            ++rep.skipped_short_row;
            continue;
        }
        const auto ts = parse_timestamp(fields[col_ts]);
        if (!ts) {
            ++rep.skipped_bad_timestamp;
            continue;
        }
        const auto start = mapping.lookup(fields[col_start]);
        const auto end = mapping.lookup(fields[col_end]);
        if (!start || !end) {
            ++rep.skipped_bad_region;
            continue;
        }
        TripRecord rec;
        rec.start_time = *ts;
        rec.start_region = *start;
        rec.end_region = *end;
        if (col_dist >= 0 && col_dist < static_cast<int>(fields.size())) {
            const std::string d = trim(fields[col_dist]);
            if (!d.empty()) {
                try {
                    rec.distance = std::stod(d);
                } catch (const std::exception&) {
                }
            }
        }
        if (col_vendor >= 0 && col_vendor < static_cast<int>(fields.size())) {
            const std::string v = trim(fields[col_vendor]);
            if (!v.empty()) rec.operator_label = v;
        }
        records.push_back(std::move(rec));
        ++rep.rows_kept;
    }

    std::stable_sort(records.begin(), records.end(),
                     [](const TripRecord& a, const TripRecord& b) {
                         return a.start_time < b.start_time;
                     });
    if (report) *report = rep;
    return records;
}

DemandSeries build_demand_series(const std::vector<TripRecord>& trips,
                                 const ExperimentConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_regions;
    const int T = cfg.slots_per_day;
    if (trips.empty()) return DemandSeries(n, T, TimeSlot{0, 0});

    const std::int64_t seconds_per_slot = 86400LL / T;
    std::int64_t min_time = std::numeric_limits<std::int64_t>::max();
    std::int64_t max_time = std::numeric_limits<std::int64_t>::min();
    for (const auto& t : trips) {
        min_time = std::min(min_time, t.start_time);
        max_time = std::max(max_time, t.start_time);
    }
    // Day 0 starts at the midnight of the earliest trip.
    const std::int64_t day0 =
        (min_time >= 0 ? min_time / 86400 : (min_time - 86399) / 86400) * 86400;

    const auto slot_of = [&](std::int64_t time) {
        return (time - day0) / seconds_per_slot;
    };
    const long long n_slots = slot_of(max_time) + 1;

    DemandSeries series(n, T, TimeSlot{0, 0});
    for (long long s = 0; s < n_slots; ++s) series.push_back(DemandMatrix(n));
    for (const auto& t : trips) {
        series.at_index(static_cast<int>(slot_of(t.start_time)))
            .at(t.start_region, t.end_region) += 1;
    }
    return series;
}

DemandStats compute_stats(const DemandSeries& series) {
    if (series.empty()) throw std::invalid_argument("compute_stats: empty series");
    const int n = series.regions();
    const int slots = series.size();

    DemandStats stats;
    stats.per_region.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        long long sum = 0;
        int mn = std::numeric_limits<int>::max();
        int mx = std::numeric_limits<int>::min();
        for (int s = 0; s < slots; ++s) {
            const int out = static_cast<int>(series.at_index(s).row_sum(i));
            sum += out;
            mn = std::min(mn, out);
            mx = std::max(mx, out);
        }
        const double avg = static_cast<double>(sum) / slots;
        double var = 0.0;
        for (int s = 0; s < slots; ++s) {
            const double d = static_cast<double>(series.at_index(s).row_sum(i)) - avg;
            var += d * d;
        }
        var /= slots;  // population variance
        stats.per_region[static_cast<size_t>(i)] = {avg, std::sqrt(var), mn, mx};
    }
    return stats;
}

const char* to_string(PredictorMode mode) {
    switch (mode) {
        case PredictorMode::HistoricalAverage: return "historical_average";
        case PredictorMode::PerfectForesight: return "perfect_foresight";
    }
    return "unknown";
}

std::vector<DemandMatrix> predict_demand(const DemandSeries& series, TimeSlot at,
                                         int h, PredictorMode mode) {
    if (h < 1) throw std::invalid_argument("predict_demand: horizon must be >= 1");
    const int n = series.regions();
    const int T = series.slots_per_day();
    std::vector<DemandMatrix> out;
    out.reserve(static_cast<size_t>(h));

    for (int k = 0; k < h; ++k) {
        const TimeSlot target =
            TimeSlot::from_absolute(at.absolute(T) + k, T);
        if (mode == PredictorMode::PerfectForesight) {
            out.push_back(series.contains(target) ? series.at(target)
                                                  : DemandMatrix(n));
            continue;
        }
        // Mean over the same slot-of-day on all days before the decision day.
        DemandMatrix pred(n);
        long long count = 0;
        std::vector<long long> sums(static_cast<size_t>(n) * n, 0);
        for (int day = 0; day < at.day; ++day) {
            const TimeSlot sample{day, target.slot};
            if (!series.contains(sample)) continue;
            const DemandMatrix& m = series.at(sample);
            for (size_t c = 0; c < sums.size(); ++c) sums[c] += m.cells[c];
            ++count;
        }
        if (count == 0) {
            if (!series.contains(target)) {
                out.push_back(DemandMatrix(n));  // past the data: no demand known
                continue;
            }
            std::ostringstream msg;
            msg << "predict_demand: no training day covers slot-of-day "
                << target.slot << " before day " << at.day;
            throw std::runtime_error(msg.str());
        }
        for (size_t c = 0; c < sums.size(); ++c) {
            // round half-up: floor(sum/count + 1/2) in exact integer arithmetic
            pred.cells[c] = static_cast<int>((2 * sums[c] + count) / (2 * count));
        }
        out.push_back(std::move(pred));
    }
    return out;
}

DemandSeries generate_synthetic(int n, int t_slots, double intensity,
                                std::uint64_t seed, int slots_per_day) {
    if (n < 2) throw std::invalid_argument("generate_synthetic: n must be >= 2");
    if (t_slots < 1) throw std::invalid_argument("generate_synthetic: t_slots must be >= 1");
    if (!(intensity > 0.0))
        throw std::invalid_argument("generate_synthetic: intensity must be > 0");

    // Region weights spread 3.5x from coldest to hottest, normalized so the
    // grand mean rate over all OD cells is exactly `intensity`.
    std::vector<double> w(static_cast<size_t>(n));
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        w[static_cast<size_t>(i)] = 1.0 + 2.5 * i / (n - 1);
        wsum += w[static_cast<size_t>(i)];
    }
    const double wmean = wsum / n;

    std::mt19937_64 rng(seed);
    DemandSeries series(n, slots_per_day, TimeSlot{0, 0});
    for (int s = 0; s < t_slots; ++s) {
        DemandMatrix m(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double rate =
                    intensity * w[static_cast<size_t>(i)] * w[static_cast<size_t>(j)] /
                    (wmean * wmean);
                m.at(i, j) = poisson_draw(rng, rate);
            }
        }
        series.push_back(std::move(m));
    }
    return series;
}

std::string series_to_json(const DemandSeries& series) {
    nlohmann::json slots = nlohmann::json::array();
    for (int s = 0; s < series.size(); ++s) {
        nlohmann::json entries = nlohmann::json::array();
        const DemandMatrix& m = series.at_index(s);
        for (int i = 0; i < m.n; ++i)
            for (int j = 0; j < m.n; ++j)
                if (m.at(i, j) != 0)
                    entries.push_back({i, j, m.at(i, j)});
        slots.push_back(std::move(entries));
    }
    nlohmann::json doc{{"regions", series.regions()},
                       {"slots_per_day", series.slots_per_day()},
                       {"first", {{"day", series.first_slot().day},
                                  {"slot", series.first_slot().slot}}},
                       {"slots", std::move(slots)}};
    return doc.dump();
}

DemandSeries series_from_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    const int n = doc.at("regions").get<int>();
    DemandSeries series(n, doc.at("slots_per_day").get<int>(),
                        TimeSlot{doc.at("first").at("day").get<int>(),
                                 doc.at("first").at("slot").get<int>()});
    for (const auto& entries : doc.at("slots")) {
        DemandMatrix m(n);
        for (const auto& e : entries) {
            m.at(e.at(0).get<int>(), e.at(1).get<int>()) = e.at(2).get<int>();
        }
        series.push_back(std::move(m));
    }
    return series;
}

std::string stats_to_json(const DemandStats& stats) {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : stats.per_region) {
        regions.push_back({{"avg", r.avg}, {"std", r.std}, {"min", r.min}, {"max", r.max}});
    }
    // std is the population standard deviation; consumers render it as-is.
    return nlohmann::json{{"per_region", std::move(regions)},
                          {"std_kind", "population"}}
        .dump();
}

}  // namespace rebal
