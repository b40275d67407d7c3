#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "bitmc/io.hpp"
#include "bitmc/rng.hpp"

using namespace bitmc;

namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("bitmc_io_test_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    void write_file(const std::string& name, const std::string& body) const {
        std::ofstream out(path(name));
        out << body;
    }
    std::filesystem::path dir_;
};

using MatrixCsv = TempDir;
using ObservationFile = TempDir;
using Ratings = TempDir;
using ResultJson = TempDir;

TEST_F(MatrixCsv, SingleEntryRoundTripsExactly) {
    DenseMatrix m(1, 1, {0.5});
    write_matrix_csv(path("m.csv"), m);
    EXPECT_TRUE(read_matrix_csv(path("m.csv")) == m);
}

TEST_F(MatrixCsv, RandomMatrixRoundTripsBitExact) {
    Rng rng(RngSeed{5});
    DenseMatrix m(100, 80);
    for (double& v : m.values()) v = 3.0 * rng.uniform_symmetric() * std::exp(10.0 * rng.uniform_symmetric());
    write_matrix_csv(path("m.csv"), m);
    const DenseMatrix back = read_matrix_csv(path("m.csv"));
    EXPECT_TRUE(back == m);  // exact bytes, not just close
}

TEST_F(MatrixCsv, ExtremeValuesRoundTripBitwise) {
    DenseMatrix m(2, 3, {1e-308, -1e308, -0.0, 5e-324, 1.0 + 1e-15, -3.1415926535897931});
    write_matrix_csv(path("x.csv"), m);
    const DenseMatrix back = read_matrix_csv(path("x.csv"));
    ASSERT_TRUE(back.same_shape(m));
    EXPECT_EQ(0, std::memcmp(back.data(), m.data(), sizeof(double) * m.size()));
}

TEST_F(MatrixCsv, RejectsMalformedInput) {
    write_file("bad1.csv", "2\n1,2\n3,4\n");
    EXPECT_THROW(read_matrix_csv(path("bad1.csv")), ParseError);
    write_file("bad2.csv", "2,2\n1,2\n3\n");
    EXPECT_THROW(read_matrix_csv(path("bad2.csv")), ParseError);
    write_file("bad3.csv", "2,2\n1,x\n3,4\n");
    EXPECT_THROW(read_matrix_csv(path("bad3.csv")), ParseError);
    write_file("bad4.csv", "1,2\n1e999,0\n");  // overflows double
    EXPECT_THROW(read_matrix_csv(path("bad4.csv")), ParseError);
    write_file("bad5.csv", "1,2\ninf,0\n");
    EXPECT_THROW(read_matrix_csv(path("bad5.csv")), ParseError);
    EXPECT_THROW(read_matrix_csv(path("missing.csv")), ParseError);
}

TEST_F(ObservationFile, EmptySetRoundTrips) {
    ObservationSet obs;
    obs.d1 = 3;
    obs.d2 = 7;
    write_observations(path("o.txt"), obs);
    const ObservationSet back = read_observations(path("o.txt"));
    EXPECT_EQ(back.d1, 3);
    EXPECT_EQ(back.d2, 7);
    EXPECT_TRUE(back.empty());
}

TEST_F(ObservationFile, EntriesRoundTrip) {
    ObservationSet obs;
    obs.d1 = 4;
    obs.d2 = 5;
    obs.entries = {{0, 0, 1}, {3, 4, -1}, {1, 2, 1}};
    write_observations(path("o.txt"), obs);
    const ObservationSet back = read_observations(path("o.txt"));
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(back.entries[k].i, obs.entries[k].i);
        EXPECT_EQ(back.entries[k].j, obs.entries[k].j);
        EXPECT_EQ(back.entries[k].y, obs.entries[k].y);
    }
}

TEST_F(ObservationFile, ValidatesOnRead) {
    write_file("dup.txt", "2,2\n0,0,1\n0,0,-1\n");
    EXPECT_THROW(read_observations(path("dup.txt")), std::invalid_argument);
    write_file("range.txt", "2,2\n5,0,1\n");
    EXPECT_THROW(read_observations(path("range.txt")), std::invalid_argument);
    write_file("label.txt", "2,2\n0,0,2\n");
    EXPECT_THROW(read_observations(path("label.txt")), std::invalid_argument);
}

TEST_F(Ratings, ParsesTsvRecord) {
    write_file("u.data", "1\t2\t5\t0\n");
    const RatingsTable t = parse_ratings(path("u.data"), RatingsFormat::tsv_uirt);
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].user, 1);
    EXPECT_EQ(t.records[0].item, 2);
    EXPECT_DOUBLE_EQ(t.records[0].rating, 5.0);
    EXPECT_EQ(*t.records[0].timestamp, 0);
}

TEST_F(Ratings, EmptyFileGivesEmptyTable) {
    write_file("u.data", "");
    const RatingsTable t = parse_ratings(path("u.data"), RatingsFormat::tsv_uirt);
    EXPECT_TRUE(t.records.empty());
    EXPECT_EQ(t.d1, 0);
    EXPECT_EQ(t.d2, 0);
}

TEST_F(Ratings, ContiguousIndexRemap) {
    write_file("r.csv", "7,9,4\n9,7,2\n");
    const RatingsTable t = parse_ratings(path("r.csv"), RatingsFormat::csv_uir);
    EXPECT_EQ(t.d1, 2);
    EXPECT_EQ(t.d2, 2);
    EXPECT_EQ(t.row_of(7), 0);
    EXPECT_EQ(t.row_of(9), 1);
    EXPECT_EQ(t.col_of(7), 0);
    EXPECT_EQ(t.col_of(9), 1);
}

TEST_F(Ratings, MalformedLineNamesLineNumber) {
    write_file("u.data", "1\t2\t5\t0\n1\t2\n");
    try {
        parse_ratings(path("u.data"), RatingsFormat::tsv_uirt);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
}

TEST_F(Ratings, DuplicateKeepsLastAndWarns) {
    write_file("r.csv", "1,2,3\n1,2,5\n");
    const RatingsTable t = parse_ratings(path("r.csv"), RatingsFormat::csv_uir);
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_DOUBLE_EQ(t.records[0].rating, 5.0);
    EXPECT_EQ(t.warnings.size(), 1u);
}

TEST_F(Ratings, BinarizeSplitBasics) {
    write_file("r.csv", "1,1,5\n1,2,1\n2,1,4\n2,2,2\n3,1,3\n3,2,3\n4,1,5\n4,2,1\n5,1,4\n5,2,2\n");
    const RatingsTable t = parse_ratings(path("r.csv"), RatingsFormat::csv_uir);
    const SplitObservations split = binarize_split(t, 0.2, RngSeed{9});
    EXPECT_DOUBLE_EQ(split.threshold, 3.0);  // mean of all ratings
    EXPECT_EQ(split.holdout.size(), 2u);     // round(0.2 * 10) exactly
    EXPECT_EQ(split.train.size() + split.holdout.size(), 10u);
    for (const auto& h : split.holdout) {
        const int expected = h.original_rating > 3.0 ? 1 : -1;  // ties map to -1
        EXPECT_EQ(h.binary_label, expected);
    }
    for (const auto& e : split.train.entries) EXPECT_TRUE(e.y == 1 || e.y == -1);
    // reproducible
    const SplitObservations again = binarize_split(t, 0.2, RngSeed{9});
    EXPECT_EQ(again.holdout.size(), split.holdout.size());
    for (std::size_t k = 0; k < split.holdout.size(); ++k) {
        EXPECT_EQ(again.holdout[k].i, split.holdout[k].i);
        EXPECT_EQ(again.holdout[k].j, split.holdout[k].j);
    }
}

TEST_F(Ratings, ThresholdUsesAllRecordsNotJustTrain) {
    write_file("r.csv", "1,1,5\n2,1,1\n3,1,4\n4,1,2\n");
    const RatingsTable t = parse_ratings(path("r.csv"), RatingsFormat::csv_uir);
    const SplitObservations split = binarize_split(t, 0.25, RngSeed{3});
    double mean = 0.0;
    for (const auto& r : t.records) mean += r.rating;
    mean /= static_cast<double>(t.records.size());
    EXPECT_DOUBLE_EQ(split.threshold, mean);
}

TEST_F(Ratings, ExplicitThresholdAndTieRule) {
    write_file("r.csv", "1,1,5\n2,1,1\n3,1,3\n4,1,2\n");
    const RatingsTable t = parse_ratings(path("r.csv"), RatingsFormat::csv_uir);
    const SplitObservations split = binarize_split(t, 0.5, RngSeed{4}, 3.0);
    EXPECT_DOUBLE_EQ(split.threshold, 3.0);
    for (const auto& h : split.holdout)
        EXPECT_EQ(h.binary_label, h.original_rating > 3.0 ? 1 : -1);
}

TEST_F(Ratings, RejectsBadHoldoutFraction) {
    write_file("r.csv", "1,1,5\n");
    const RatingsTable t = parse_ratings(path("r.csv"), RatingsFormat::csv_uir);
    EXPECT_THROW(binarize_split(t, 1.0, RngSeed{1}), std::invalid_argument);
    EXPECT_THROW(binarize_split(t, 0.0, RngSeed{1}), std::invalid_argument);
}

TEST_F(ResultJson, RoundTripsAndChecksVersion) {
    nlohmann::json body{{"config", {{"kind", "recover"}}}, {"seed", 7}};
    write_result_json(path("res.json"), body);
    const nlohmann::json back = read_result_json(path("res.json"));
    EXPECT_EQ(back["seed"], 7);
    EXPECT_EQ(back["schema_version"], kResultSchemaVersion);

    write_file("old.json", "{\"schema_version\": 999}\n");
    EXPECT_THROW(read_result_json(path("old.json")), SchemaError);
    write_file("none.json", "{}\n");
    EXPECT_THROW(read_result_json(path("none.json")), SchemaError);
    write_file("garbage.json", "not json\n");
    EXPECT_THROW(read_result_json(path("garbage.json")), ParseError);
}

}  // namespace
