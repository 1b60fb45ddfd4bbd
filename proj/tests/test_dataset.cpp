#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fricsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

using namespace fricsim;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// Small config that still exercises both noise and dilation logic.
DatasetConfig small_config() {
    DatasetConfig cfg;
    cfg.per_ref = 4;
    cfg.num_points = 2000;
    cfg.windows_per_dilation = 5;
    cfg.dilations = {1, 8};
    return cfg;
}

}  // namespace

TEST_CASE("grid enumeration cardinality and filtering") {
    FrictionCube c;  // default 8x8x8
    auto curves = enumerate_curves(c);
    // Every grid point here satisfies beta1*beta2 > beta3 (min product
    // 0.15*20 = 3 > 0.55), so the count is 512 plus the 3 reference roads.
    CHECK(curves.size() == 512 + 3);
    for (const auto& p : curves) CHECK(p.valid());

    // A 1x1x1 cube whose corner is exactly the wet reference: the appended
    // reference must be deduplicated, leaving grid point + dry + snow.
    FrictionCube single{0.857, 0.858, 33.822, 33.823, 0.347, 0.348, 1, 1, 1};
    auto one = enumerate_curves(single);
    CHECK(one.size() == 3);
    CHECK(one[0].beta1 == doctest::Approx(0.857));
}

TEST_CASE("neighborhood family contains the references and respects jitter bounds") {
    auto curves = neighborhood_curves(70, 0.10, 42);
    CHECK(curves.size() == 3 + 3 * 70);
    CHECK(curves[0].beta1 == doctest::Approx(kDry.beta1));
    CHECK(curves[1].beta1 == doctest::Approx(kWet.beta1));
    CHECK(curves[2].beta1 == doctest::Approx(kSnow.beta1));
    // Jittered copies of road k occupy [3 + k*70, 3 + (k+1)*70).
    for (std::size_t i = 3; i < 73; ++i) {
        CHECK(curves[i].beta1 >= kDry.beta1 * 0.9);
        CHECK(curves[i].beta1 <= kDry.beta1 * 1.1);
        CHECK(curves[i].beta2 >= kDry.beta2 * 0.9);
        CHECK(curves[i].beta2 <= kDry.beta2 * 1.1);
    }
    // Deterministic in the seed.
    auto again = neighborhood_curves(70, 0.10, 42);
    REQUIRE(again.size() == curves.size());
    for (std::size_t i = 0; i < curves.size(); ++i)
        CHECK(again[i].beta1 == curves[i].beta1);
    auto other = neighborhood_curves(70, 0.10, 43);
    CHECK(other[3].beta1 != curves[3].beta1);
}

TEST_CASE("sample_curve endpoints and values") {
    auto s = sample_curve(kWet, 101);
    REQUIRE(s.size() == 101);
    CHECK(s.front().first == 0.0);
    CHECK(s.front().second == 0.0);
    CHECK(s.back().first == 1.0);
    CHECK(s[50].first == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[50].second == doctest::Approx(mu(kWet, 0.5)).epsilon(1e-12));
}

TEST_CASE("window labels equal the closed-form optimum of their curve") {
    DatasetConfig cfg = small_config();
    auto [man, data] = build_dataset(cfg);
    std::set<double> labels;
    for (const auto& lw : data) labels.insert(lw.lambda_star);
    // Every label must be the optimum of some curve in the family.
    auto curves = neighborhood_curves(cfg.per_ref, cfg.jitter, cfg.seed);
    std::set<double> expect;
    for (const auto& p : curves) expect.insert(optimal_point_closed_form(p).lambda_star);
    for (double l : labels) CHECK(expect.count(l) == 1);
    // The wet reference label is present.
    bool found = false;
    for (double l : labels)
        if (std::fabs(l - 0.13083864398848125) < 1e-12) found = true;
    CHECK(found);
}

TEST_CASE("clean/noisy pairs: same multiset of slips, mu differs by noise") {
    DatasetConfig cfg = small_config();
    auto [man, data] = build_dataset(cfg);
    REQUIRE(data.size() % 2 == 0);
    double max_abs_noise = 0.0, sum = 0.0, sum2 = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) {
        const auto& clean = data[i].window.values;
        const auto& noisy = data[i + 1].window.values;
        CHECK(data[i].lambda_star == data[i + 1].lambda_star);
        // Slip multisets must match even though each copy is shuffled
        // independently.
        std::vector<double> lc, ln;
        for (std::size_t k = 0; k < clean.size(); k += 2) {
            lc.push_back(clean[k]);
            ln.push_back(noisy[k]);
        }
        std::sort(lc.begin(), lc.end());
        std::sort(ln.begin(), ln.end());
        CHECK(lc == ln);
        // Match slips to compare mu: noise residuals should look like
        // N(0, sigma^2).
        for (std::size_t k = 0; k < clean.size(); k += 2)
            for (std::size_t j = 0; j < noisy.size(); j += 2)
                if (noisy[j] == clean[k]) {
                    double d = noisy[j + 1] - clean[k + 1];
                    max_abs_noise = std::max(max_abs_noise, std::fabs(d));
                    sum += d;
                    sum2 += d * d;
                    ++count;
                    break;
                }
    }
    REQUIRE(count > 1000);
    double mean = sum / static_cast<double>(count);
    double var = sum2 / static_cast<double>(count) - mean * mean;
    CHECK(std::fabs(mean) < 3.0 * cfg.noise_sigma / std::sqrt(static_cast<double>(count)));
    CHECK(std::sqrt(var) == doctest::Approx(cfg.noise_sigma).epsilon(0.1));
    CHECK(max_abs_noise < 6.0 * cfg.noise_sigma);
}

TEST_CASE("zero noise makes the pair identical up to permutation") {
    DatasetConfig cfg = small_config();
    cfg.noise_sigma = 0.0;
    auto [man, data] = build_dataset(cfg);
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) {
        std::vector<double> a = data[i].window.values, b = data[i + 1].window.values;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("windows stay inside the slip coverage band (unit dilation)") {
    DatasetConfig cfg = small_config();
    cfg.dilations = {1};
    auto [man, data] = build_dataset(cfg);
    for (const auto& lw : data) {
        for (std::size_t k = 0; k < lw.window.values.size(); k += 2) {
            double lam = lw.window.values[k];
            // Start indices floor to the grid, so allow one sample of slack.
            CHECK(lam >= cfg.cover_lo - 1.0 / static_cast<double>(cfg.num_points));
            // n-1 extra samples past the last allowed start.
            CHECK(lam <= cfg.cover_hi + static_cast<double>(cfg.n) / cfg.num_points + 1e-9);
        }
    }
}

TEST_CASE("default configuration yields the expected corpus size") {
    DatasetConfig cfg;  // 213 curves x 4 dilations x 30 starts x 2 copies
    auto [man, data] = build_dataset(cfg);
    CHECK(man.total_windows == 51120);
    CHECK(data.size() == 51120);
}

TEST_CASE("stride mode window count") {
    DatasetConfig cfg = small_config();
    cfg.stride = 500;
    cfg.num_points = 2000;
    // starts 0,500,1000,1500 each fit n=15 -> 4 pairs per curve.
    auto [man, data] = build_dataset(cfg);
    auto curves = neighborhood_curves(cfg.per_ref, cfg.jitter, cfg.seed);
    CHECK(data.size() == curves.size() * 4 * 2);
}

TEST_CASE("save/load round-trip is bit-exact and regeneration is byte-identical") {
    DatasetConfig cfg = small_config();
    auto [man, data] = build_dataset(cfg);
    const char* p1 = "test_ds_a.bin";
    const char* p2 = "test_ds_b.bin";
    save_dataset(p1, man, data);

    auto [man2, data2] = load_dataset(p1);
    REQUIRE(data2.size() == data.size());
    CHECK(man2.total_windows == man.total_windows);
    CHECK(man2.config.n == cfg.n);
    CHECK(man2.config.seed == cfg.seed);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(data2[i].lambda_star == data[i].lambda_star);
        CHECK(data2[i].window.values == data[i].window.values);
    }

    auto [man3, data3] = build_dataset(cfg);
    save_dataset(p2, man3, data3);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1);
    std::remove(p2);
}

TEST_CASE("loader rejects bad magic, bad version, and truncation") {
    const char* path = "test_ds_bad.bin";
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOTMAGIC nothing here\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("bad magic"),
                         std::runtime_error);
    {
        std::ofstream f(path, std::ios::binary);
        DatasetConfig cfg = small_config();
        auto [man, data] = build_dataset(cfg);
        man.format_version = 2;
        save_dataset(path, man, data);
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("format_version"),
                         std::runtime_error);
    {
        DatasetConfig cfg = small_config();
        auto [man, data] = build_dataset(cfg);
        save_dataset(path, man, data);
        // Chop the last record in half.
        std::string bytes = slurp(path);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("truncated"),
                         std::runtime_error);
    std::remove(path);
}

TEST_CASE("manifest header survives parse_kv_line") {
    DatasetConfig cfg = small_config();
    auto [man, data] = build_dataset(cfg);
    auto kv = parse_kv_line(manifest_header(man));
    CHECK(kv.at("total_windows") == std::to_string(data.size()));
    CHECK(kv.at("n") == "15");
    CHECK(kv.at("family") == "neighborhood");
    CHECK(kv.at("dilations") == "1,8");
}
