#include "helpers.hpp"

#include "stgf/data.hpp"
#include "stgf/error.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>

using namespace stgf;
using testutil::uniform;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

Matrix ramp(Eigen::Index time, Eigen::Index n) {
    Matrix m(time, n);
    for (Eigen::Index t = 0; t < time; ++t)
        for (Eigen::Index j = 0; j < n; ++j) m(t, j) = static_cast<double>(10 * t + j);
    return m;
}

}  // namespace

TEST_CASE("loading speeds") {
    testutil::TempDir dir("speeds");
    std::mt19937_64 rng(61);
    const Matrix raw = uniform(10, 3, rng, 0.0, 80.0);
    const auto ds = make_dataset("toy", 15, raw);
    save_speeds(ds, dir / "s.csv");
    const auto back = load_speeds(dir / "s.csv", 15);
    CHECK(back.time() == 10);
    CHECK(back.n() == 3);
    CHECK(back.split_index == 8);
    CHECK(std::memcmp(back.speeds.data(), raw.data(), sizeof(double) * raw.size()) == 0);
    save_speeds(back, dir / "s2.csv");
    const auto again = load_speeds(dir / "s2.csv", 15);
    CHECK(std::memcmp(again.speeds.data(), raw.data(), sizeof(double) * raw.size()) == 0);

    write_text(dir / "h.csv", "road_a,road_b\n1,2\n3,4\n5,6\n");
    const auto with_header = load_speeds(dir / "h.csv", 5);
    CHECK(with_header.time() == 3);
    CHECK(with_header.speeds(2, 1) == 6.0);

    // numeric header names need the explicit mode
    write_text(dir / "num.csv", "101,102\n1,2\n3,4\n");
    CHECK(load_speeds(dir / "num.csv", 5, "x", HeaderMode::Present).time() == 2);
    CHECK(load_speeds(dir / "num.csv", 5, "x", HeaderMode::Absent).time() == 3);
}

TEST_CASE("malformed speed files") {
    testutil::TempDir dir("bad");
    write_text(dir / "ragged.csv", "1,2,3\n4,5,6\n7,8\n");
    try {
        load_speeds(dir / "ragged.csv", 15);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find('3') != std::string::npos);
    }
    write_text(dir / "neg.csv", "1,2\n3,-4\n");
    CHECK_THROWS_AS(load_speeds(dir / "neg.csv", 15), DataError);
    write_text(dir / "word.csv", "1,2\n3,abc\n");
    CHECK_THROWS_AS(load_speeds(dir / "word.csv", 15), FormatError);
    CHECK_THROWS_AS(load_speeds(dir / "missing.csv", 15), IoError);
}

TEST_CASE("normalisation") {
    Matrix raw = ramp(10, 2);
    auto ds = make_dataset("r", 15, raw);
    CHECK(ds.max_speed == 71.0);
    const Matrix norm = normalize(ds);
    CHECK(norm(7, 1) == 1.0);
    CHECK(norm(9, 1) > 1.0);
    CHECK(testutil::max_abs_diff(denormalize(norm, ds), raw) < 1e-12);
}

TEST_CASE("eval rows do not touch the normalisation constant") {
    std::mt19937_64 rng(62);
    Matrix raw = uniform(50, 4, rng, 0.0, 60.0);
    const auto a = make_dataset("a", 15, raw);
    raw.bottomRows(10) = uniform(10, 4, rng, 100.0, 500.0);
    const auto b = make_dataset("b", 15, raw);
    CHECK(a.split_index == 40);
    CHECK(a.max_speed == b.max_speed);
}

TEST_CASE("windows") {
    const auto ds = make_dataset("w", 15, ramp(12, 2));  // split at 9
    const Matrix values = normalize(ds);
    const auto deriv = make_dataset("d", 15, ramp(13, 2));  // split at 10
    const auto train10 = make_windows(normalize(deriv), deriv, 4, 2, Split::Train);
    CHECK(train10.size() == 5);

    const auto train = make_windows(values, ds, 2, 1, Split::Train);
    REQUIRE(!train.empty());
    CHECK(train.front().start_index == 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& w = train[i];
        CHECK(w.start_index == static_cast<Eigen::Index>(i));
        CHECK(w.history == values.middleRows(w.start_index, 2));
        CHECK(w.target == values.middleRows(w.start_index + 2, 1));
        CHECK(w.start_index + 3 <= ds.split_index);
    }
    CHECK(train.size() == static_cast<std::size_t>(ds.split_index - 3 + 1));

    const auto eval = make_windows(values, ds, 2, 1, Split::Eval);
    REQUIRE(!eval.empty());
    CHECK(eval.front().start_index == ds.split_index);
    CHECK(eval.size() == static_cast<std::size_t>(ds.time() - ds.split_index - 3 + 1));

    CHECK_THROWS_AS(make_windows(values, ds, 3, 2, Split::Eval), DataError);
}

TEST_CASE("steps per horizon") {
    auto sz = make_dataset("sz", 15, ramp(10, 1));
    CHECK(sz.steps_for_minutes(60) == 4);
    CHECK(sz.steps_for_minutes(15) == 1);
    CHECK_THROWS_AS(sz.steps_for_minutes(10), ParameterError);
    auto los = make_dataset("los", 5, ramp(10, 1));
    CHECK(los.steps_for_minutes(60) == 12);
}

TEST_CASE("manifest") {
    testutil::TempDir dir("manifest");
    std::filesystem::create_directories(dir / "data");
    const auto ds = make_dataset("toy", 5, ramp(20, 3));
    save_speeds(ds, dir / "data" / "speeds.csv");
    write_text(dir / "data" / "adj.csv", "0,1,0\n1,0,1\n0,1,0\n");
    write_text(dir / "data" / "m.json",
               R"({"name": "toy", "interval_minutes": 5, "speeds": "speeds.csv", "adjacency": "adj.csv"})");
    const auto m = Manifest::load(dir / "data" / "m.json");
    CHECK(m.name == "toy");
    CHECK(m.interval_minutes == 5);
    CHECK(std::filesystem::exists(m.speeds));
    const auto loaded = m.load_dataset();
    CHECK(loaded.n() == 3);
    CHECK(loaded.name == "toy");
    CHECK(loaded.interval_minutes == 5);

    m.save(dir / "copy.json");
    const auto copy = Manifest::load(dir / "copy.json");
    CHECK(std::filesystem::equivalent(copy.speeds, m.speeds));

    write_text(dir / "broken.json", R"({"name": "x"})");
    CHECK_THROWS(Manifest::load(dir / "broken.json"));
}
