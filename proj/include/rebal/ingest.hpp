#ifndef REBAL_INGEST_HPP
#define REBAL_INGEST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rebal/core.hpp"

namespace rebal {

// One trip row after parsing and region mapping.
struct TripRecord {
    std::int64_t start_time = 0;  // unix seconds, UTC
    RegionId start_region = 0;
    RegionId end_region = 0;
    std::optional<double> distance;  // meters
    std::optional<std::string> operator_label;
};

struct RegionStat {
    double avg = 0.0;
    double std = 0.0;  // population standard deviation
    int min = 0;
    int max = 0;
};

// Per-region {avg, std, min, max} of total outbound trips per slot.
struct DemandStats {
    std::vector<RegionStat> per_region;
};

// Contiguous run of per-slot OD matrices starting at `first`.
class DemandSeries {
public:
    DemandSeries() = default;
    DemandSeries(int n, int slots_per_day, TimeSlot first)
        : n_(n), slots_per_day_(slots_per_day), first_(first) {}

    int regions() const { return n_; }
    int slots_per_day() const { return slots_per_day_; }
    TimeSlot first_slot() const { return first_; }
    int size() const { return static_cast<int>(mats_.size()); }
    bool empty() const { return mats_.empty(); }

    void push_back(DemandMatrix m) { mats_.push_back(std::move(m)); }

    // Index of a slot relative to the series start; negative or >= size()
    // means the slot is outside the stored window.
    long long index_of(TimeSlot t) const {
        return t.absolute(slots_per_day_) - first_.absolute(slots_per_day_);
    }
    TimeSlot slot_at(int index) const {
        return TimeSlot::from_absolute(first_.absolute(slots_per_day_) + index,
                                       slots_per_day_);
    }
    bool contains(TimeSlot t) const {
        const long long i = index_of(t);
        return i >= 0 && i < size();
    }

    const DemandMatrix& at_index(int index) const { return mats_[static_cast<size_t>(index)]; }
    DemandMatrix& at_index(int index) { return mats_[static_cast<size_t>(index)]; }
    const DemandMatrix& at(TimeSlot t) const { return mats_[static_cast<size_t>(index_of(t))]; }

    long long total_trips() const {
        long long s = 0;
        for (const auto& m : mats_) s += m.total();
        return s;
    }

    bool operator==(const DemandSeries&) const = default;

private:
    int n_ = 0;
    int slots_per_day_ = 24;
    TimeSlot first_{};
    std::vector<DemandMatrix> mats_;
};

// Column names for the trip CSV. Defaults follow the Chicago e-scooter export.
struct CsvSchema {
    std::string timestamp = "trip_start_timestamp";
    std::string start_region = "start_community_area";
    std::string end_region = "end_community_area";
    std::string distance = "trip_distance";  // optional column
    std::string vendor = "vendor";           // optional column
};

// Maps raw region labels from the CSV onto dense 0-based ids. The table is the
// single source of truth; anything absent from it is unmappable.
struct RegionMapping {
    std::map<std::string, RegionId> table;

    // Labels "base".."base+n-1" onto ids 0..n-1 (community areas are 1-based).
    static RegionMapping contiguous(int n, int base = 1);
    static RegionMapping load(const std::string& path);

    std::optional<RegionId> lookup(const std::string& raw) const;
    int max_region() const;
};

struct IngestReport {
    long long rows_read = 0;
    long long rows_kept = 0;
    long long skipped_bad_timestamp = 0;
    long long skipped_bad_region = 0;
    long long skipped_short_row = 0;

    long long skipped() const {
        return skipped_bad_timestamp + skipped_bad_region + skipped_short_row;
    }
    std::string to_text() const;
};

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parses the trip CSV. Rows with unparseable timestamps or unmappable regions
// are skipped and counted; a missing file or missing mandatory column is
// fatal. Records come back sorted by start_time.
std::vector<TripRecord> load_trips(const std::string& path,
                                   const CsvSchema& schema,
                                   const RegionMapping& mapping,
                                   IngestReport* report = nullptr);

// Buckets trips into per-slot OD matrices. Day 0 is the civil day of the
// earliest trip; the series is contiguous through the last trip's slot.
DemandSeries build_demand_series(const std::vector<TripRecord>& trips,
                                 const ExperimentConfig& cfg);

// Per-region outbound-trips-per-slot statistics over the whole series.
DemandStats compute_stats(const DemandSeries& series);

enum class PredictorMode {
    HistoricalAverage,
    PerfectForesight,
};

const char* to_string(PredictorMode mode);

// Demand forecast for slots `at .. at+h-1`. HistoricalAverage takes the
// element-wise mean over all same-slot-of-day matrices on days before
// `at.day`, rounded half-up; it fails naming the first slot-of-day with no
// history. PerfectForesight returns the stored future matrices. Slots past
// the end of the series come back as zero matrices in both modes.
std::vector<DemandMatrix> predict_demand(const DemandSeries& series, TimeSlot at,
                                         int h, PredictorMode mode);

// Seeded synthetic demand with region-specific rates (hottest region draws
// at least 3x the coldest) whose grand mean per OD cell is `intensity`.
DemandSeries generate_synthetic(int n, int t_slots, double intensity,
                                std::uint64_t seed, int slots_per_day = 24);

// Series cache round-trip (sparse JSON document).
std::string series_to_json(const DemandSeries& series);
DemandSeries series_from_json(const std::string& text);

std::string stats_to_json(const DemandStats& stats);

// Unix seconds for a UTC civil date-time, proleptic Gregorian.
std::int64_t civil_to_unix(int year, int month, int day, int hour = 0,
                           int minute = 0, int second = 0);

// Accepts "YYYY-MM-DD[ T]HH:MM[:SS]" and "MM/DD/YYYY HH:MM[:SS] [AM|PM]".
std::optional<std::int64_t> parse_timestamp(const std::string& text);

}  // namespace rebal

#endif  // REBAL_INGEST_HPP
