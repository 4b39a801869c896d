#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "rebal/ingest.hpp"
#include "support/generators.hpp"

using namespace rebal;
namespace fs = std::filesystem;

namespace {

// Writes a throwaway CSV fixture and removes it on scope exit.
struct TempCsv {
    fs::path path;
    explicit TempCsv(const std::string& content) {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("rebal_ingest_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++) + ".csv");
        std::ofstream(path) << content;
    }
    ~TempCsv() { std::error_code ec; fs::remove(path, ec); }
};

constexpr const char* kHeader =
    "trip_start_timestamp,start_community_area,end_community_area,trip_distance,vendor\n";

ExperimentConfig desk_config(int n) {
    ExperimentConfig cfg;
    cfg.n_regions = n;
    cfg.slots_per_day = 24;
    cfg.rebalance_period = 12;
    return cfg;
}

}  // namespace

TEST_CASE("load_trips reads a clean fixture") {
    TempCsv csv(std::string(kHeader) +
                "2022-06-01 08:15:00,1,2,850,lime\n"
                "2022-06-01 09:30:00,2,1,1200,spin\n"
                "2022-06-01 07:05:00,3,3,400,bird\n");
    IngestReport report;
    const auto trips =
        load_trips(csv.path.string(), CsvSchema{}, RegionMapping::contiguous(77), &report);
    REQUIRE(trips.size() == 3);
    CHECK(report.rows_kept == 3);
    CHECK(report.skipped() == 0);
    // sorted by start_time: the 07:05 trip first
    CHECK(trips[0].start_region == 2);
    CHECK(trips[0].end_region == 2);
    CHECK(trips[1].start_region == 0);
    CHECK(*trips[1].distance == doctest::Approx(850));
    CHECK(*trips[1].operator_label == "lime");
}

TEST_CASE("load_trips skips rows with blank or unmappable regions") {
    TempCsv csv(std::string(kHeader) +
                "2022-06-01 08:15:00,1,2,850,lime\n"
                "2022-06-01 09:30:00,,1,1200,spin\n"
                "2022-06-01 10:30:00,2,2,300,bird\n");
    IngestReport report;
    const auto trips =
        load_trips(csv.path.string(), CsvSchema{}, RegionMapping::contiguous(77), &report);
    CHECK(trips.size() == 2);
    CHECK(report.skipped_bad_region == 1);
}

TEST_CASE("load_trips skips unparseable timestamps") {
    TempCsv csv(std::string(kHeader) +
                "not-a-time,1,2,850,lime\n"
                "06/01/2022 08:15:00 PM,4,5,850,lime\n");
    IngestReport report;
    const auto trips =
        load_trips(csv.path.string(), CsvSchema{}, RegionMapping::contiguous(77), &report);
    REQUIRE(trips.size() == 1);
    CHECK(report.skipped_bad_timestamp == 1);
    CHECK(trips[0].start_time == civil_to_unix(2022, 6, 1, 20, 15, 0));
}

TEST_CASE("load_trips covers all 77 community areas") {
    std::ostringstream content;
    content << kHeader;
    for (int area = 1; area <= 77; ++area)
        content << "2022-06-01 08:00:00," << area << "," << area << ",100,lime\n";
    TempCsv csv(content.str());
    const auto trips =
        load_trips(csv.path.string(), CsvSchema{}, RegionMapping::contiguous(77));
    REQUIRE(trips.size() == 77);
    RegionId max_region = 0;
    for (const auto& t : trips) max_region = std::max(max_region, t.start_region);
    CHECK(max_region == 76);
}

TEST_CASE("load_trips fails fast on a missing mandatory column") {
    TempCsv csv("trip_start_timestamp,end_community_area\n2022-06-01 08:00:00,1\n");
    CHECK_THROWS_WITH_AS(
        load_trips(csv.path.string(), CsvSchema{}, RegionMapping::contiguous(77)),
        doctest::Contains("start_community_area"), IngestError);
}

TEST_CASE("load_trips fails fast on a missing file") {
    CHECK_THROWS_AS(load_trips("/nonexistent/trips.csv", CsvSchema{},
                               RegionMapping::contiguous(77)),
                    IngestError);
}

TEST_CASE("region mapping tolerates decimal-point labels") {
    const auto mapping = RegionMapping::contiguous(77);
    CHECK(mapping.lookup("12.0") == RegionId{11});
    CHECK(mapping.lookup("77") == RegionId{76});
    CHECK(!mapping.lookup("78").has_value());
    CHECK(!mapping.lookup("").has_value());
}

TEST_CASE("build_demand_series buckets trips into slots") {
    std::vector<TripRecord> trips;
    // two trips 0 -> 1 inside slot 3 (03:00-04:00 on day 0)
    trips.push_back({civil_to_unix(2022, 6, 1, 3, 10), 0, 1, {}, {}});
    trips.push_back({civil_to_unix(2022, 6, 1, 3, 50), 0, 1, {}, {}});
    const auto series = build_demand_series(trips, desk_config(4));
    REQUIRE(series.size() == 4);  // contiguous through the last trip's slot
    CHECK(series.at(TimeSlot{0, 3}).at(0, 1) == 2);
    CHECK(series.total_trips() == 2);
}

TEST_CASE("build_demand_series on an empty trip list") {
    const auto series = build_demand_series({}, desk_config(4));
    CHECK(series.total_trips() == 0);
}

TEST_CASE("build_demand_series preserves the trip count on a random fixture") {
    std::mt19937_64 rng(99);
    std::vector<TripRecord> trips;
    long long expected_in_slot5 = 0;
    for (int k = 0; k < 50; ++k) {
        const int day = testing::uniform_int(rng, 0, 2);
        const int hour = testing::uniform_int(rng, 0, 23);
        const RegionId from = testing::uniform_int(rng, 0, 3);
        const RegionId to = testing::uniform_int(rng, 0, 3);
        trips.push_back({civil_to_unix(2022, 6, 1 + day, hour, 30), from, to, {}, {}});
        if (day == 0 && hour == 5) ++expected_in_slot5;  // independent row count
    }
    const auto series = build_demand_series(trips, desk_config(4));
    CHECK(series.total_trips() == 50);
    CHECK(series.at(TimeSlot{0, 5}).total() == expected_in_slot5);
}

TEST_CASE("compute_stats against hand-computed population moments") {
    // region 0 outbound per slot: [2, 13, 8, 10]
    DemandSeries series(2, 24, TimeSlot{0, 0});
    for (int v : {2, 13, 8, 10}) {
        DemandMatrix m(2);
        m.at(0, 1) = v;
        series.push_back(std::move(m));
    }
    const auto stats = compute_stats(series);
    const RegionStat& r0 = stats.per_region[0];
    CHECK(r0.avg == doctest::Approx(8.25));
    CHECK(r0.std == doctest::Approx(4.02336923485777).epsilon(1e-12));
    CHECK(r0.min == 2);
    CHECK(r0.max == 13);
    // region 1 never sends trips
    CHECK(stats.per_region[1].avg == 0.0);
    CHECK(stats.per_region[1].std == 0.0);
}

TEST_CASE("compute_stats on constant and single-sample series") {
    DemandSeries series(1, 24, TimeSlot{0, 0});
    for (int k = 0; k < 3; ++k) {
        DemandMatrix m(1);
        m.at(0, 0) = 5;
        series.push_back(std::move(m));
    }
    auto stats = compute_stats(series);
    CHECK(stats.per_region[0].avg == 5.0);
    CHECK(stats.per_region[0].std == 0.0);
    CHECK(stats.per_region[0].min == 5);
    CHECK(stats.per_region[0].max == 5);

    DemandSeries single(1, 24, TimeSlot{0, 0});
    DemandMatrix m(1);
    m.at(0, 0) = 7;
    single.push_back(std::move(m));
    stats = compute_stats(single);
    CHECK(stats.per_region[0].avg == stats.per_region[0].min);
    CHECK(stats.per_region[0].avg == stats.per_region[0].max);
    CHECK(stats.per_region[0].std == 0.0);
}

namespace {

DemandSeries two_day_series(int v_day0, int v_day1) {
    DemandSeries series(2, 24, TimeSlot{0, 0});
    for (int day = 0; day < 2; ++day) {
        for (int slot = 0; slot < 24; ++slot) {
            DemandMatrix m(2);
            if (slot == 9) m.at(0, 1) = day == 0 ? v_day0 : v_day1;
            series.push_back(std::move(m));
        }
    }
    return series;
}

}  // namespace

TEST_CASE("historical average predicts the per-slot mean with half-up rounding") {
    const auto series = two_day_series(4, 6);
    const auto pred = predict_demand(series, TimeSlot{2, 9}, 1,
                                     PredictorMode::HistoricalAverage);
    REQUIRE(pred.size() == 1);
    CHECK(pred[0].at(0, 1) == 5);

    // values 1 and 2 average to 1.5 and round half-up to 2
    const auto series2 = two_day_series(1, 2);
    const auto pred2 = predict_demand(series2, TimeSlot{2, 9}, 1,
                                      PredictorMode::HistoricalAverage);
    CHECK(pred2[0].at(0, 1) == 2);
}

TEST_CASE("historical average is invariant to training-day order") {
    const auto a = predict_demand(two_day_series(4, 6), TimeSlot{2, 9}, 1,
                                  PredictorMode::HistoricalAverage);
    const auto b = predict_demand(two_day_series(6, 4), TimeSlot{2, 9}, 1,
                                  PredictorMode::HistoricalAverage);
    CHECK(a == b);
}

TEST_CASE("historical average names the uncovered slot-of-day") {
    DemandSeries series(2, 24, TimeSlot{0, 0});
    DemandMatrix m(2);
    series.push_back(m);  // one slot on day 0 only
    CHECK_THROWS_WITH_AS(predict_demand(series, TimeSlot{0, 0}, 1,
                                        PredictorMode::HistoricalAverage),
                         doctest::Contains("slot-of-day 0"), std::runtime_error);
}

TEST_CASE("perfect foresight returns the stored future") {
    const auto series = two_day_series(4, 6);
    const auto pred =
        predict_demand(series, TimeSlot{1, 8}, 3, PredictorMode::PerfectForesight);
    REQUIRE(pred.size() == 3);
    CHECK(pred[0] == series.at(TimeSlot{1, 8}));
    CHECK(pred[1] == series.at(TimeSlot{1, 9}));
    CHECK(pred[1].at(0, 1) == 6);
    // past the end of the data: zero matrices
    const auto tail =
        predict_demand(series, TimeSlot{1, 23}, 2, PredictorMode::PerfectForesight);
    CHECK(tail[1].total() == 0);
}

TEST_CASE("synthetic demand is reproducible and calibrated") {
    const auto a = generate_synthetic(5, 100, 1.0, 42);
    const auto b = generate_synthetic(5, 100, 1.0, 42);
    CHECK(a == b);

    const auto c = generate_synthetic(5, 100, 1.0, 43);
    CHECK(a.total_trips() != c.total_trips());  // different seed, different draws

    // grand mean per OD cell within 15% of the intensity
    const double mean =
        static_cast<double>(a.total_trips()) / (5.0 * 5.0 * 100.0);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.15));

    // hottest region sends several times the coldest region's trips
    std::vector<long long> outbound(5, 0);
    for (int s = 0; s < a.size(); ++s)
        for (int i = 0; i < 5; ++i) outbound[static_cast<size_t>(i)] += a.at_index(s).row_sum(i);
    CHECK(static_cast<double>(outbound[4]) >= 2.5 * static_cast<double>(outbound[0]));
}

TEST_CASE("synthetic demand rejects bad arguments") {
    CHECK_THROWS_AS(generate_synthetic(5, 10, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic(1, 10, 1.0, 1), std::invalid_argument);
}

TEST_CASE("series JSON cache round-trips") {
    const auto series = generate_synthetic(4, 30, 0.7, 7);
    const auto back = series_from_json(series_to_json(series));
    CHECK(back == series);
}

TEST_CASE("timestamp parser accepts the documented shapes") {
    CHECK(parse_timestamp("2022-09-05T14:30:00") ==
          civil_to_unix(2022, 9, 5, 14, 30, 0));
    CHECK(parse_timestamp("2022-09-05 14:30") == civil_to_unix(2022, 9, 5, 14, 30, 0));
    CHECK(parse_timestamp("09/05/2022 02:30:00 PM") ==
          civil_to_unix(2022, 9, 5, 14, 30, 0));
    CHECK(parse_timestamp("09/05/2022 12:05:00 AM") ==
          civil_to_unix(2022, 9, 5, 0, 5, 0));
    CHECK(!parse_timestamp("garbage").has_value());
    CHECK(!parse_timestamp("").has_value());
}
